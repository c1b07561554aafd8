//! Local re-solving of root edits.
//!
//! At a guided step the [`Planner`] scores every valid root edit with the
//! one-step tilted score
//!
//! ```text
//! q_t(x, a) = log p0(a | x, t) + β · (R(f(x, a)) − R(x))
//! ```
//!
//! keeps the band of roots within `δ` of the best (capped at `K_root`), and
//! re-ranks each retained root by a bounded lookahead around its child:
//!
//! ```text
//! S(x, a) = q_t(x, a) + λ · V_{H−1}(f(x, a), a)
//! ```
//!
//! where `V` is a Max or soft (LSE) backup over a site-local, typed candidate
//! graph. Only the single best root edit is applied.

mod config;
mod rollout;

pub use config::{Backup, CandidateRule, GuidanceConfig, WindowSpec};
pub use rollout::{guided_rollout, StepRecord, TrajectoryRecord};
pub(crate) use rollout::{drive, Choice};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::soft_max;
use crate::oracle::CachedOracle;
use crate::proposal::{normalized_proposal, ProposalDist, ProposalModel};
use crate::seq::{anchor_site, ActionSpace, EditAction, Sequence};

/// The frozen pieces every search method shares.
#[derive(Clone, Copy)]
pub struct Env<'a> {
    pub model: &'a dyn ProposalModel,
    pub space: &'a ActionSpace,
    pub oracle: &'a CachedOracle,
}

impl<'a> Env<'a> {
    pub fn new(model: &'a dyn ProposalModel, space: &'a ActionSpace, oracle: &'a CachedOracle) -> Env<'a> {
        Env { model, space, oracle }
    }

    pub fn proposal(&self, x: &Sequence, t: usize) -> Result<ProposalDist> {
        normalized_proposal(self.model, self.space, x, t)
    }
}

/// `log p0 + β · ΔR`. Every tilted score in the crate goes through here.
#[inline]
pub fn tilted_score(log_p0: f64, delta_r: f64, beta: f64) -> f64 {
    log_p0 + beta * delta_r
}

/// A root edit with its one-step score and, once re-solved, its LPDP score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredAction {
    pub action: EditAction,
    pub log_p0: f64,
    pub delta_r: f64,
    pub q: f64,
    pub v_local: Option<f64>,
    pub s_lpdp: Option<f64>,
}

impl ScoredAction {
    /// `S` when re-solved, otherwise the one-step score.
    pub fn score(&self) -> f64 {
        self.s_lpdp.unwrap_or(self.q)
    }
}

/// A node of the local lookahead graph: state, the edit that produced it,
/// and the remaining depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalNode {
    pub state: Sequence,
    pub prev_edit: EditAction,
    pub depth: usize,
}

/// Largest one-step score, `q*`. `-inf` when empty.
pub fn best_score(scored: &[ScoredAction]) -> f64 {
    scored.iter().map(|s| s.q).fold(f64::NEG_INFINITY, f64::max)
}

/// Descending by `key`, canonical action order on ties.
fn by_score_then_canonical(a: (f64, &EditAction), b: (f64, &EditAction)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Roots with `q ≥ q* − δ`, the best `k_root` of them by `q`, ordered by
/// `q` descending then canonical order.
pub fn root_band(scored: &[ScoredAction], delta: f64, k_root: usize) -> Vec<ScoredAction> {
    let cutoff = best_score(scored) - delta;
    let mut band: Vec<ScoredAction> = scored.iter().filter(|s| s.q >= cutoff).cloned().collect();
    band.sort_by(|a, b| by_score_then_canonical((a.q, &a.action), (b.q, &b.action)));
    band.truncate(k_root);
    band
}

/// Valid actions at `z` within `radius` sites of the anchor of `prev`.
pub fn local_neighborhood(space: &ActionSpace, z: &Sequence, prev: &EditAction, radius: usize) -> Vec<EditAction> {
    let anchor = anchor_site(prev, z);
    space.enumerate(z).into_iter().filter(|a| a.site().abs_diff(anchor) <= radius).collect()
}

/// `actions` sorted by base probability under `dist`, highest first, ties canonical.
pub fn rank_by_proposal(actions: &[EditAction], dist: &ProposalDist) -> Vec<EditAction> {
    let mut ranked: Vec<(f64, EditAction)> = actions
        .iter()
        .map(|a| (dist.log_prob(a).expect("neighborhood action missing from proposal support"), *a))
        .collect();
    ranked.sort_by(|a, b| by_score_then_canonical((a.0, &a.1), (b.0, &b.1)));
    ranked.into_iter().map(|(_, a)| a).collect()
}

/// Applies a candidate rule to a neighborhood.
///
/// The result is in base-probability rank order.
pub fn select_candidates(
    neighborhood: &[EditAction],
    dist: &ProposalDist,
    prev: &EditAction,
    rule: CandidateRule,
    k_loc: usize,
) -> Vec<EditAction> {
    let ranked = rank_by_proposal(neighborhood, dist);
    let mixed: Vec<EditAction> = ranked.iter().take(k_loc).copied().collect();
    match rule {
        CandidateRule::Mixed => mixed,
        CandidateRule::StAfter => {
            let typed: Vec<EditAction> = mixed.iter().filter(|b| b.kind() == prev.kind()).copied().collect();
            if typed.is_empty() {
                mixed
            } else {
                typed
            }
        }
        CandidateRule::StFirst => {
            let typed: Vec<EditAction> =
                ranked.iter().filter(|b| b.kind() == prev.kind()).take(k_loc).copied().collect();
            if typed.is_empty() {
                mixed
            } else {
                typed
            }
        }
    }
}

/// Result of one guided step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub action: EditAction,
    /// The retained root band with local values and LPDP scores filled in.
    pub band: Vec<ScoredAction>,
}

/// The five-stage re-solving operator bound to a model, oracle and config.
#[derive(Clone, Copy)]
pub struct Planner<'a> {
    pub env: Env<'a>,
    pub config: &'a GuidanceConfig,
}

impl<'a> Planner<'a> {
    pub fn new(env: Env<'a>, config: &'a GuidanceConfig) -> Result<Planner<'a>> {
        config.validate_allow_zero_beta()?;
        Ok(Planner { env, config })
    }

    /// One [`ScoredAction`] per valid root edit, in canonical order.
    pub fn root_scores(&self, x: &Sequence, t: usize) -> Result<Vec<ScoredAction>> {
        let dist = self.env.proposal(x, t)?;
        let oracle = self.env.oracle;
        let r_x = oracle.reward(x);
        dist.iter()
            .map(|(a, log_p0)| {
                let child = x.apply(a)?;
                let delta_r = oracle.reward(&child) - r_x;
                Ok(ScoredAction {
                    action: *a,
                    log_p0,
                    delta_r,
                    q: tilted_score(log_p0, delta_r, self.config.beta),
                    v_local: None,
                    s_lpdp: None,
                })
            })
            .collect()
    }

    /// Step index used at lookahead depth `i` (the root child is depth 0).
    pub(crate) fn local_time(&self, t: usize, depth: usize) -> usize {
        if self.config.advance_local_time {
            t + depth
        } else {
            t
        }
    }

    pub fn candidate_set(&self, z: &Sequence, prev: &EditAction, t: usize) -> Result<Vec<EditAction>> {
        self.candidate_set_with(z, prev, self.config.rule, t)
    }

    /// Candidate set under an explicit rule, ranking by `p0(· | z, t)`.
    pub fn candidate_set_with(
        &self,
        z: &Sequence,
        prev: &EditAction,
        rule: CandidateRule,
        t: usize,
    ) -> Result<Vec<EditAction>> {
        Ok(self.candidates_and_proposal(z, prev, rule, t)?.map(|(c, _)| c).unwrap_or_default())
    }

    fn candidates_and_proposal(
        &self,
        z: &Sequence,
        prev: &EditAction,
        rule: CandidateRule,
        t: usize,
    ) -> Result<Option<(Vec<EditAction>, ProposalDist)>> {
        let neighborhood = local_neighborhood(self.env.space, z, prev, self.config.radius);
        if neighborhood.is_empty() {
            return Ok(None);
        }
        let dist = self.env.proposal(z, t)?;
        Ok(Some((select_candidates(&neighborhood, &dist, prev, rule, self.config.k_loc), dist)))
    }

    /// `V_h(y, a)` for the configured backup, with the root at step `t`.
    pub fn backup_value(&self, y: &Sequence, a: &EditAction, h: usize, t: usize) -> Result<f64> {
        self.value(y, a, h, t, 1)
    }

    fn value(&self, z: &Sequence, prev: &EditAction, h: usize, root_t: usize, depth: usize) -> Result<f64> {
        if h == 0 {
            return Ok(0.0);
        }
        let t = self.local_time(root_t, depth);
        let Some((candidates, dist)) = self.candidates_and_proposal(z, prev, self.config.rule, t)? else {
            return Ok(0.0);
        };
        let oracle = self.env.oracle;
        let r_z = oracle.reward(z);
        let cfg = self.config;
        let mut terms = Vec::with_capacity(candidates.len());
        for b in &candidates {
            let child = z.apply(b)?;
            let log_p0 = dist.log_prob(b).ok_or(Error::InvalidAction { action: *b, len: z.len() })?;
            let q = tilted_score(log_p0, oracle.reward(&child) - r_z, cfg.beta);
            let future = self.value(&child, b, h - 1, root_t, depth + 1)?;
            terms.push(q + cfg.gamma * future);
        }
        Ok(match cfg.backup {
            Backup::Max => terms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Backup::Lse => soft_max(&terms, cfg.tau),
        })
    }

    /// Scores the band and returns the root edit with the largest
    /// `S = q + λ · V_{H−1}`, ties broken canonically.
    pub fn step(&self, x: &Sequence, t: usize) -> Result<StepOutcome> {
        let scored = self.root_scores(x, t)?;
        let mut band = root_band(&scored, self.config.delta, self.config.k_root);
        for root in band.iter_mut() {
            let child = x.apply(&root.action)?;
            let v = self.backup_value(&child, &root.action, self.config.horizon - 1, t)?;
            root.v_local = Some(v);
            root.s_lpdp = Some(root.q + self.config.lambda * v);
        }
        let best = band
            .iter()
            .min_by(|a, b| by_score_then_canonical((a.score(), &a.action), (b.score(), &b.action)))
            .ok_or(Error::NoActions)?;
        Ok(StepOutcome { action: best.action, band })
    }
}

/// Free-function form of [`Planner::step`].
pub fn lpdp_step(env: Env<'_>, config: &GuidanceConfig, x: &Sequence, t: usize) -> Result<StepOutcome> {
    Planner::new(env, config)?.step(x, t)
}
