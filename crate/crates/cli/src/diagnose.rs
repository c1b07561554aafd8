//! Candidate-rule diagnostics over the guided decision points of a finished run.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use lpdp::diagnostics::{rule_diagnostics, RootState};
use lpdp::lpdp::CandidateRule;
use lpdp::{CachedOracle, Env};

use crate::config::{ExperimentConfig, MethodSpec, Task};
use crate::run::read_records;

/// One row of `diagnostics.csv`.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsRow {
    pub method: String,
    pub rule: String,
    pub root_instances: usize,
    pub local_instances: usize,
    pub cand_ratio: f64,
    pub path_ratio: f64,
    pub top1_agreement_max: f64,
    pub top1_agreement_lse: f64,
    pub mixed_rank_tail: f64,
    pub mass_eff: Option<f64>,
    pub mass_eff_instances: usize,
    pub mass_eff_note: &'static str,
}

/// Guided decision points of `method` in `run_dir`, in sample order, at most `max_roots`.
pub fn collect_roots(run_dir: &Path, method: &str, max_roots: usize) -> Result<Vec<RootState>> {
    let mut roots = Vec::new();
    for rec in read_records(run_dir, method)? {
        for (x, t) in rec.guided_states()? {
            if roots.len() == max_roots {
                return Ok(roots);
            }
            roots.push(RootState { x, t });
        }
    }
    Ok(roots)
}

/// Computes the diagnostics of every candidate rule for each LPDP method of `cfg`.
pub fn diagnose(cfg: &ExperimentConfig, run_dir: &Path, max_roots: usize) -> Result<Vec<DiagnosticsRow>> {
    let task = Task::build(cfg)?;
    let mut rows = Vec::new();
    for block in &cfg.methods {
        let MethodSpec::Lpdp(guidance) = &block.spec else { continue };
        let roots = collect_roots(run_dir, &block.name, max_roots)?;
        let oracle = CachedOracle::new(task.oracle.clone());
        let env = Env::new(task.model.as_ref(), &task.space, &oracle);
        for rule in CandidateRule::ALL {
            let d = rule_diagnostics(env, guidance, &roots, rule)
                .with_context(|| format!("diagnostics for {} under {rule}", block.name))?;
            rows.push(DiagnosticsRow {
                method: block.name.clone(),
                rule: rule.to_string(),
                root_instances: d.root_instances,
                local_instances: d.local_instances,
                cand_ratio: d.cand_ratio,
                path_ratio: d.path_ratio,
                top1_agreement_max: d.top1_agreement_max,
                top1_agreement_lse: d.top1_agreement_lse,
                mixed_rank_tail: d.mixed_rank_tail,
                mass_eff: d.mass_eff,
                mass_eff_instances: d.mass_eff_instances,
                mass_eff_note: if d.mass_eff_is_subset { "subset" } else { "relative-not-subset" },
            });
        }
    }
    if rows.is_empty() {
        bail!("the config has no lpdp method blocks to diagnose");
    }
    Ok(rows)
}

pub fn write_diagnostics(path: &Path, rows: &[DiagnosticsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
