//! Same-type diagnostics: how typed candidate rules compare with the mixed
//! reference on the states a guided run actually visits.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exactdp::{enumerate_paths, log_partition};
use crate::lpdp::{
    local_neighborhood, rank_by_proposal, Backup, CandidateRule, Env, GuidanceConfig, Planner, TrajectoryRecord,
};
use crate::seq::{EditAction, Sequence};

/// A lookahead root: the child `state` of root edit `prev` taken at step `root_t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalState {
    pub state: Sequence,
    pub prev: EditAction,
    pub root_t: usize,
}

/// A guided decision point `(x, t)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootState {
    pub x: Sequence,
    pub t: usize,
}

/// The states at which `traj` made guided decisions.
pub fn guided_instances(traj: &TrajectoryRecord) -> Result<Vec<RootState>> {
    let states = traj.states()?;
    Ok(traj.steps.iter().zip(states).filter(|(s, _)| s.guided).map(|(s, x)| RootState { x, t: s.t }).collect())
}

/// Lookahead roots spawned by the band at `root` under `planner`.
pub fn local_states(planner: &Planner<'_>, root: &RootState) -> Result<Vec<LocalState>> {
    let out = planner.step(&root.x, root.t)?;
    out.band
        .iter()
        .map(|b| Ok(LocalState { state: root.x.apply(&b.action)?, prev: b.action, root_t: root.t }))
        .collect()
}

fn with_rule(config: &GuidanceConfig, rule: CandidateRule) -> GuidanceConfig {
    GuidanceConfig { rule, ..config.clone() }
}

/// `|C_rule| / |C_mixed|` at the first lookahead level. `None` when the
/// neighborhood is empty.
pub fn cand_ratio(planner: &Planner<'_>, s: &LocalState, rule: CandidateRule) -> Result<Option<f64>> {
    let t = planner.local_time(s.root_t, 1);
    let mixed = planner.candidate_set_with(&s.state, &s.prev, CandidateRule::Mixed, t)?;
    if mixed.is_empty() {
        return Ok(None);
    }
    let typed = planner.candidate_set_with(&s.state, &s.prev, rule, t)?;
    Ok(Some(typed.len() as f64 / mixed.len() as f64))
}

/// `|T_rule| / |T_mixed|` over depth-`h` enumerated paths.
pub fn path_ratio(planner: &Planner<'_>, s: &LocalState, h: usize, rule: CandidateRule) -> Result<f64> {
    let (typed, mixed) = paired_paths(planner, s, h, rule)?;
    Ok(typed.len() as f64 / mixed.len() as f64)
}

fn paired_paths(
    planner: &Planner<'_>,
    s: &LocalState,
    h: usize,
    rule: CandidateRule,
) -> Result<(Vec<crate::exactdp::LocalPath>, Vec<crate::exactdp::LocalPath>)> {
    let typed_cfg = with_rule(planner.config, rule);
    let mixed_cfg = with_rule(planner.config, CandidateRule::Mixed);
    let typed = enumerate_paths(&Planner { env: planner.env, config: &typed_cfg }, &s.state, &s.prev, h, s.root_t)?;
    let mixed = enumerate_paths(&Planner { env: planner.env, config: &mixed_cfg }, &s.state, &s.prev, h, s.root_t)?;
    Ok((typed, mixed))
}

/// Whether the typed rule picks the same root edit as mixed at `root`, with
/// the backup set in `config`.
pub fn top1_agrees(env: Env<'_>, config: &GuidanceConfig, root: &RootState, rule: CandidateRule) -> Result<bool> {
    let typed_cfg = with_rule(config, rule);
    let mixed_cfg = with_rule(config, CandidateRule::Mixed);
    let a = Planner::new(env, &typed_cfg)?.step(&root.x, root.t)?.action;
    let b = Planner::new(env, &mixed_cfg)?.step(&root.x, root.t)?.action;
    Ok(a == b)
}

/// Top-1 agreement with mixed, reported per backup.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub max: f64,
    pub lse: f64,
}

pub fn top1_agreement(
    env: Env<'_>,
    config: &GuidanceConfig,
    roots: &[RootState],
    rule: CandidateRule,
) -> Result<Agreement> {
    let frac = |backup: Backup| -> Result<f64> {
        let cfg = GuidanceConfig { backup, ..config.clone() };
        let mut hits = 0usize;
        for r in roots {
            hits += usize::from(top1_agrees(env, &cfg, r, rule)?);
        }
        Ok(if roots.is_empty() { 1.0 } else { hits as f64 / roots.len() as f64 })
    };
    Ok(Agreement { max: frac(Backup::Max)?, lse: frac(Backup::Lse)? })
}

/// 1-based rank of each retained candidate in the mixed base-prior ranking
/// of its neighborhood.
pub fn mixed_ranks(planner: &Planner<'_>, s: &LocalState, rule: CandidateRule) -> Result<Vec<usize>> {
    let t = planner.local_time(s.root_t, 1);
    let neighborhood = local_neighborhood(planner.env.space, &s.state, &s.prev, planner.config.radius);
    if neighborhood.is_empty() {
        return Ok(Vec::new());
    }
    let dist = planner.env.proposal(&s.state, t)?;
    let ranked = rank_by_proposal(&neighborhood, &dist);
    let kept = planner.candidate_set_with(&s.state, &s.prev, rule, t)?;
    Ok(kept.iter().map(|b| ranked.iter().position(|r| r == b).expect("candidate in neighborhood") + 1).collect())
}

/// Fraction of retained candidates, pooled over `states`, whose mixed rank
/// exceeds `K_loc`. Zero when nothing was retained.
pub fn mixed_rank_tail(planner: &Planner<'_>, states: &[LocalState], rule: CandidateRule) -> Result<f64> {
    let mut tail = 0usize;
    let mut total = 0usize;
    for s in states {
        let ranks = mixed_ranks(planner, s, rule)?;
        total += ranks.len();
        tail += ranks.iter().filter(|&&r| r > planner.config.k_loc).count();
    }
    Ok(if total == 0 { 0.0 } else { tail as f64 / total as f64 })
}

/// `(Z_typed / Z_mixed) / (|T_typed| / |T_mixed|)` from explicit path sets.
/// `None` when either set is empty.
pub fn mass_efficiency_from_paths(
    typed: &[crate::exactdp::LocalPath],
    mixed: &[crate::exactdp::LocalPath],
    tau: f64,
) -> Option<f64> {
    if typed.is_empty() || mixed.is_empty() {
        return None;
    }
    let mass = (log_partition(typed, tau) - log_partition(mixed, tau)).exp();
    Some(mass * mixed.len() as f64 / typed.len() as f64)
}

pub fn mass_efficiency(planner: &Planner<'_>, s: &LocalState, h: usize, rule: CandidateRule) -> Result<Option<f64>> {
    let (typed, mixed) = paired_paths(planner, s, h, rule)?;
    Ok(mass_efficiency_from_paths(&typed, &mixed, planner.config.tau))
}

/// Aggregated same-type diagnostics for one rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleDiagnostics {
    pub rule: CandidateRule,
    pub root_instances: usize,
    pub local_instances: usize,
    pub cand_ratio: f64,
    pub path_ratio: f64,
    pub top1_agreement_max: f64,
    pub top1_agreement_lse: f64,
    pub mixed_rank_tail: f64,
    /// Mean over local states where it is defined.
    pub mass_eff: Option<f64>,
    pub mass_eff_instances: usize,
    /// `false` for rules whose candidates are not a subset of the mixed
    /// shortlist; their mass efficiency is a relative soft-value diagnostic
    /// rather than a subset coverage guarantee.
    pub mass_eff_is_subset: bool,
}

/// Runs every diagnostic for `rule` on the given guided decision points.
/// Local states come from the mixed-rule band at each root.
pub fn rule_diagnostics(
    env: Env<'_>,
    config: &GuidanceConfig,
    roots: &[RootState],
    rule: CandidateRule,
) -> Result<RuleDiagnostics> {
    let mixed_cfg = with_rule(config, CandidateRule::Mixed);
    let planner = Planner::new(env, &mixed_cfg)?;
    let mut locals = Vec::new();
    for r in roots {
        locals.extend(local_states(&planner, r)?);
    }
    let h = config.horizon - 1;
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };

    let mut cand = Vec::new();
    let mut paths = Vec::new();
    let mut mass = Vec::new();
    for s in &locals {
        if let Some(c) = cand_ratio(&planner, s, rule)? {
            cand.push(c);
        }
        let (typed, mixed) = paired_paths(&planner, s, h, rule)?;
        paths.push(typed.len() as f64 / mixed.len() as f64);
        if let Some(m) = mass_efficiency_from_paths(&typed, &mixed, config.tau) {
            mass.push(m);
        }
    }
    let agreement = top1_agreement(env, config, roots, rule)?;
    Ok(RuleDiagnostics {
        rule,
        root_instances: roots.len(),
        local_instances: locals.len(),
        cand_ratio: mean(&cand),
        path_ratio: mean(&paths),
        top1_agreement_max: agreement.max,
        top1_agreement_lse: agreement.lse,
        mixed_rank_tail: mixed_rank_tail(&planner, &locals, rule)?,
        mass_eff: if mass.is_empty() { None } else { Some(mean(&mass)) },
        mass_eff_instances: mass.len(),
        mass_eff_is_subset: rule != CandidateRule::StFirst,
    })
}
