//! Exhaustive reference computations.
//!
//! Everything here enumerates explicitly instead of recursing on values, so
//! it can serve as ground truth for the fast backups in [`crate::lpdp`].
//! Each enumeration predicts its size first and refuses to run past a hard
//! guard rather than truncating.

use crate::error::{Error, Result};
use crate::lpdp::{tilted_score, Env, Planner};
use crate::math::{log_sum_exp, soft_max};
use crate::seq::{EditAction, Sequence};

/// Largest number of paths or states an enumeration may visit.
pub const PATH_GUARD: u128 = 1_000_000;

/// A local edit path `ξ` from a lookahead root.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPath {
    pub edits: Vec<EditAction>,
    /// `states[0]` is the root; `states[i + 1] = states[i].apply(edits[i])`.
    pub states: Vec<Sequence>,
    /// Tilted score `q` of each edit at the state it was applied to.
    pub steps: Vec<f64>,
    /// Cumulative score `G`, discounted by `γ` per level.
    pub score: f64,
}

impl LocalPath {
    /// `q_0 + γ (q_1 + γ (q_2 + ...))`, folded from the tail.
    pub fn recompute_score(&self, gamma: f64) -> f64 {
        self.steps.iter().rev().fold(0.0, |acc, q| q + gamma * acc)
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }
}

fn upper_branching(len: usize, h: usize) -> u128 {
    8 * (len + h) as u128 + 4
}

fn guarded_pow(base: u128, exp: usize) -> Result<u128> {
    let mut total: u128 = 1;
    for _ in 0..exp {
        total = total.saturating_mul(base);
        if total > PATH_GUARD {
            return Err(Error::GuardExceeded { predicted: total, limit: PATH_GUARD });
        }
    }
    Ok(total)
}

/// Every local path of length `h` from `(z, prev)` under the planner's
/// candidate rule, in lexicographic order of the edit list.
///
/// A branch that reaches a node with no candidates ends early; its path is
/// kept, matching the zero value of a terminal node. `root_t` is the step of
/// the root edit that produced `z`.
pub fn enumerate_paths(
    planner: &Planner<'_>,
    z: &Sequence,
    prev: &EditAction,
    h: usize,
    root_t: usize,
) -> Result<Vec<LocalPath>> {
    let branching = upper_branching(z.len(), h).min(planner.config.k_loc as u128);
    guarded_pow(branching, h)?;

    let env = planner.env;
    let beta = planner.config.beta;
    let gamma = planner.config.gamma;
    let rule = planner.config.rule;

    struct Partial {
        edits: Vec<EditAction>,
        states: Vec<Sequence>,
        steps: Vec<f64>,
    }

    let mut done = Vec::new();
    let mut stack =
        vec![Partial { edits: Vec::new(), states: vec![z.clone()], steps: Vec::new() }];
    while let Some(p) = stack.pop() {
        let depth = p.edits.len();
        let here = p.states.last().expect("root state");
        let last = p.edits.last().unwrap_or(prev);
        let t = planner.local_time(root_t, depth + 1);
        let candidates = if depth == h { Vec::new() } else { planner.candidate_set_with(here, last, rule, t)? };
        if candidates.is_empty() {
            let mut path = LocalPath { edits: p.edits, states: p.states, steps: p.steps, score: 0.0 };
            path.score = path.recompute_score(gamma);
            done.push(path);
            continue;
        }
        let dist = env.proposal(here, t)?;
        let r_here = env.oracle.reward(here);
        for b in candidates {
            let child = here.apply(&b)?;
            let lp = dist.log_prob(&b).ok_or(Error::InvalidAction { action: b, len: here.len() })?;
            let q = tilted_score(lp, env.oracle.reward(&child) - r_here, beta);
            let mut next = Partial { edits: p.edits.clone(), states: p.states.clone(), steps: p.steps.clone() };
            next.edits.push(b);
            next.states.push(child);
            next.steps.push(q);
            stack.push(next);
        }
    }
    done.sort_by(|a, b| a.edits.cmp(&b.edits));
    Ok(done)
}

/// `τ · log Σ_ξ exp(G(ξ) / τ)`. An empty path set is worth 0.
pub fn partition_value(paths: &[LocalPath], tau: f64) -> f64 {
    if paths.is_empty() {
        return 0.0;
    }
    let scores: Vec<f64> = paths.iter().map(|p| p.score).collect();
    soft_max(&scores, tau)
}

/// `log Z` at temperature `τ`, i.e. `log Σ exp(G / τ)`.
pub fn log_partition(paths: &[LocalPath], tau: f64) -> f64 {
    let scaled: Vec<f64> = paths.iter().map(|p| p.score / tau).collect();
    log_sum_exp(&scaled)
}

/// Best path score. An empty path set is worth 0.
pub fn max_path_value(paths: &[LocalPath]) -> f64 {
    if paths.is_empty() {
        return 0.0;
    }
    paths.iter().map(|p| p.score).fold(f64::NEG_INFINITY, f64::max)
}

/// Finite-horizon DP over the full edit graph.
///
/// Returns `max_a [q(x, a) + W_{H−1}(f(x, a))]` with `W_h(z) = max_b [q(z, b)
/// + W_{h−1}(f(z, b))]` and `W_0 = 0`, together with the maximizing first
/// edit (canonical order on ties). Every level is scored at step `t`.
pub fn full_graph_dp(
    env: Env<'_>,
    x: &Sequence,
    t: usize,
    horizon: usize,
    beta: f64,
) -> Result<(f64, Option<EditAction>)> {
    let branching = upper_branching(x.len(), horizon);
    let mut predicted: u128 = 0;
    for level in 0..=horizon {
        predicted = predicted.saturating_add(guarded_pow(branching, level)?);
    }
    if predicted > PATH_GUARD {
        return Err(Error::GuardExceeded { predicted, limit: PATH_GUARD });
    }
    dp_value(env, x, t, horizon, beta)
}

fn dp_value(env: Env<'_>, z: &Sequence, t: usize, h: usize, beta: f64) -> Result<(f64, Option<EditAction>)> {
    if h == 0 {
        return Ok((0.0, None));
    }
    let dist = match env.proposal(z, t) {
        Ok(d) => d,
        Err(Error::NoActions) => return Ok((0.0, None)),
        Err(e) => return Err(e),
    };
    let r_z = env.oracle.reward(z);
    let mut best = (f64::NEG_INFINITY, None);
    for (a, lp) in dist.iter() {
        let child = z.apply(a)?;
        let q = tilted_score(lp, env.oracle.reward(&child) - r_z, beta);
        let total = q + dp_value(env, &child, t, h - 1, beta)?.0;
        if total > best.0 {
            best = (total, Some(*a));
        }
    }
    Ok(best)
}
