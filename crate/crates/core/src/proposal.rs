//! Base edit-proposal models.
//!
//! A [`ProposalModel`] supplies a positive transition rate for every valid
//! one-edit successor. Rates enter the rest of the crate only through the
//! normalized proposal
//!
//! ```text
//! p0(a | x, t) = u_t(f(x,a) | x) / Σ_{a' ∈ A(x)} u_t(f(x,a') | x)
//! ```
//!
//! which [`normalized_proposal`] computes in log space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::seq::{ActionSpace, EditAction, EditKind, Sequence};

/// A frozen edit-flow rate model.
///
/// Implementors return the natural log of the rate, so positivity holds by
/// construction. `log_rate` must be finite and deterministic in `(x, a, t)`.
pub trait ProposalModel: Send + Sync {
    fn log_rate(&self, x: &Sequence, a: &EditAction, t: usize) -> f64;

    fn rate(&self, x: &Sequence, a: &EditAction, t: usize) -> f64 {
        self.log_rate(x, a, t).exp()
    }
}

impl<M: ProposalModel + ?Sized> ProposalModel for &M {
    fn log_rate(&self, x: &Sequence, a: &EditAction, t: usize) -> f64 {
        (**self).log_rate(x, a, t)
    }
}

impl<M: ProposalModel + ?Sized> ProposalModel for Box<M> {
    fn log_rate(&self, x: &Sequence, a: &EditAction, t: usize) -> f64 {
        (**self).log_rate(x, a, t)
    }
}

/// Position in the discrete rollout schedule: one edit per step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutClock {
    step: usize,
    total_steps: usize,
}

impl RolloutClock {
    pub const DEFAULT_TOTAL_STEPS: usize = 256;

    pub fn new(step: usize, total_steps: usize) -> Result<RolloutClock> {
        if step >= total_steps {
            return Err(Error::Config(format!("step {step} outside schedule of {total_steps} steps")));
        }
        Ok(RolloutClock { step, total_steps })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// The next step, or `None` at the end of the schedule.
    pub fn advance(self) -> Option<RolloutClock> {
        RolloutClock::new(self.step + 1, self.total_steps).ok()
    }
}

/// Every valid action gets the same rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UniformModel;

impl ProposalModel for UniformModel {
    fn log_rate(&self, _x: &Sequence, _a: &EditAction, _t: usize) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftModelParams {
    pub theta_sub: f64,
    pub theta_ins: f64,
    pub theta_del: f64,
    pub target_length: usize,
    pub drift_gain: f64,
}

impl Default for DriftModelParams {
    fn default() -> Self {
        DriftModelParams { theta_sub: 0.0, theta_ins: 0.0, theta_del: 0.0, target_length: 32, drift_gain: 1.0 }
    }
}

/// Length-drifting toy flow:
/// `log u = θ_e + κ · σ(e) · (L* − |x|) / L*` with `σ(ins) = +1`,
/// `σ(del) = −1`, `σ(sub) = 0`. Insertions dominate below the target length
/// and deletions above it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftModel {
    params: DriftModelParams,
}

impl DriftModel {
    pub fn new(params: DriftModelParams) -> Result<DriftModel> {
        if params.target_length == 0 {
            return Err(Error::Config("drift target_length must be positive".into()));
        }
        if !(params.drift_gain >= 0.0) || !params.drift_gain.is_finite() {
            return Err(Error::Config("drift_gain must be finite and >= 0".into()));
        }
        if ![params.theta_sub, params.theta_ins, params.theta_del].iter().all(|t| t.is_finite()) {
            return Err(Error::Config("drift type weights must be finite".into()));
        }
        Ok(DriftModel { params })
    }

    pub fn params(&self) -> &DriftModelParams {
        &self.params
    }
}

impl ProposalModel for DriftModel {
    fn log_rate(&self, x: &Sequence, a: &EditAction, _t: usize) -> f64 {
        let p = &self.params;
        let target = p.target_length as f64;
        let pull = p.drift_gain * (target - x.len() as f64) / target;
        match a.kind() {
            EditKind::Sub => p.theta_sub,
            EditKind::Ins => p.theta_ins + pull,
            EditKind::Del => p.theta_del - pull,
        }
    }
}

/// `p0(· | x, t)` over `A(x)`, held in log space.
///
/// `actions` is in canonical order, so lookups are binary searches.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalDist {
    actions: Vec<EditAction>,
    log_probs: Vec<f64>,
}

impl ProposalDist {
    pub fn actions(&self) -> &[EditAction] {
        &self.actions
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn index_of(&self, a: &EditAction) -> Option<usize> {
        self.actions.binary_search(a).ok()
    }

    pub fn log_prob(&self, a: &EditAction) -> Option<f64> {
        self.index_of(a).map(|i| self.log_probs[i])
    }

    pub fn prob(&self, a: &EditAction) -> Option<f64> {
        self.log_prob(a).map(f64::exp)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EditAction, f64)> {
        self.actions.iter().zip(self.log_probs.iter().copied())
    }

    /// Indices ordered by probability, highest first, ties in canonical order.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        // actions are canonical, so a stable sort keeps canonical order on ties
        idx.sort_by(|&i, &j| self.log_probs[j].total_cmp(&self.log_probs[i]));
        idx
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> EditAction {
        sample_log_weights(&self.log_probs, rng).map(|i| self.actions[i]).expect("proposal is never empty")
    }
}

/// Draws an index proportionally to `exp(log_w)`. `None` if every weight is zero.
pub(crate) fn sample_log_weights<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> Option<usize> {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return None;
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            return Some(i);
        }
        u -= wi;
    }
    // rounding left u just past the last bucket
    w.iter().rposition(|&wi| wi > 0.0)
}

/// The normalized base proposal at `x`.
pub fn normalized_proposal<M: ProposalModel + ?Sized>(
    model: &M,
    space: &ActionSpace,
    x: &Sequence,
    t: usize,
) -> Result<ProposalDist> {
    let actions = space.enumerate(x);
    if actions.is_empty() {
        return Err(Error::NoActions);
    }
    let log_rates: Vec<f64> = actions.iter().map(|a| model.log_rate(x, a, t)).collect();
    Ok(ProposalDist { actions, log_probs: normalize_log_rates(&log_rates) })
}

pub(crate) fn normalize_log_rates(log_rates: &[f64]) -> Vec<f64> {
    let log_z = log_sum_exp(log_rates);
    log_rates.iter().map(|l| l - log_z).collect()
}

/// `log p0(a | x, t)`. Fails if `a ∉ A(x)`.
pub fn log_p0<M: ProposalModel + ?Sized>(
    model: &M,
    space: &ActionSpace,
    x: &Sequence,
    a: &EditAction,
    t: usize,
) -> Result<f64> {
    normalized_proposal(model, space, x, t)?
        .log_prob(a)
        .ok_or(Error::InvalidAction { action: *a, len: x.len() })
}

/// One draw from `p0(· | x, t)` using a generator seeded with `seed`.
pub fn sample_action<M: ProposalModel + ?Sized>(
    model: &M,
    space: &ActionSpace,
    x: &Sequence,
    t: usize,
    seed: u64,
) -> Result<EditAction> {
    let dist = normalized_proposal(model, space, x, t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(dist.sample(&mut rng))
}
