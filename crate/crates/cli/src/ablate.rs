//! One-factor sweeps around the first LPDP block of a config.

use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use lpdp::lpdp::{GuidanceConfig, WindowSpec};

use crate::config::{ExperimentConfig, MethodBlock, MethodSpec};
use crate::run::execute;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Horizon,
    Lambda,
    WindowPosition,
    WindowLength,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::Horizon, Axis::Lambda, Axis::WindowPosition, Axis::WindowLength];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Horizon => "horizon",
            Axis::Lambda => "lambda",
            Axis::WindowPosition => "window-position",
            Axis::WindowLength => "window-length",
        }
    }
}

impl FromStr for Axis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Axis> {
        Axis::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .with_context(|| format!("unknown axis {s:?} (expected horizon, lambda, window-position or window-length)"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub axis: String,
    pub value: String,
    pub method: String,
    pub reward_mean: f64,
    pub reward_stderr: f64,
    pub calls_per_sample: f64,
    pub traj_ll: f64,
    pub jsd3: Option<f64>,
}

/// The guidance variants swept along `axis`, labelled by their value.
pub fn variants(base: &GuidanceConfig, axis: Axis, total_steps: usize) -> Vec<(String, GuidanceConfig)> {
    let with = |f: &dyn Fn(&mut GuidanceConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    match axis {
        Axis::Horizon => (1..=3).map(|h| (h.to_string(), with(&|c| c.horizon = h))).collect(),
        Axis::Lambda => {
            [0.25, 0.5, 1.0].into_iter().map(|l| (l.to_string(), with(&|c| c.lambda = l))).collect()
        }
        Axis::WindowPosition => {
            let n = match base.window {
                WindowSpec::First(n) | WindowSpec::Last(n) | WindowSpec::Mid(n) => n,
                _ => 16,
            }
            .min(total_steps);
            [WindowSpec::First(n), WindowSpec::Mid(n), WindowSpec::Last(n)]
                .into_iter()
                .map(|w| (w.to_string(), with(&|c| c.window = w.clone())))
                .collect()
        }
        Axis::WindowLength => [8, 16, 32]
            .into_iter()
            .map(|n| {
                let w = WindowSpec::First(n.min(total_steps));
                (w.to_string(), with(&|c| c.window = w.clone()))
            })
            .collect(),
    }
}

/// Runs every variant of each axis in `axes` and returns one row per variant.
pub fn ablate(cfg: &ExperimentConfig, axes: &[Axis]) -> Result<Vec<AblationRow>> {
    let Some((name, base)) = cfg.methods.iter().find_map(|m| match &m.spec {
        MethodSpec::Lpdp(c) => Some((m.name.clone(), c.clone())),
        _ => None,
    }) else {
        bail!("ablation needs at least one lpdp method block");
    };
    let mut rows = Vec::new();
    for &axis in axes {
        for (value, guidance) in variants(&base, axis, cfg.run.total_steps) {
            let method = format!("{name}.{}={value}", axis.as_str()).replace(':', "-");
            let mut variant = cfg.clone();
            variant.methods = vec![MethodBlock { name: method.clone(), spec: MethodSpec::Lpdp(guidance) }];
            let out = execute(&variant).with_context(|| format!("ablation {method}"))?;
            let s = &out.methods[0].summary;
            rows.push(AblationRow {
                axis: axis.as_str().to_string(),
                value,
                method,
                reward_mean: s.reward_mean,
                reward_stderr: s.reward_stderr,
                calls_per_sample: s.calls_per_sample,
                traj_ll: s.traj_ll,
                jsd3: s.jsd3,
            });
        }
    }
    Ok(rows)
}

pub fn write_ablation(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
