use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Env, GuidanceConfig, Planner};
use crate::error::{Error, Result};
use crate::oracle::CacheStats;
use crate::proposal::ProposalDist;
use crate::seq::{EditAction, Sequence};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub action: EditAction,
    pub log_p0: f64,
    pub guided: bool,
    /// Reward of the resulting sequence, when the step already paid for it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
}

/// One generated sample: start state, every applied edit, and the oracle
/// traffic the rollout caused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub initial: Sequence,
    pub steps: Vec<StepRecord>,
    pub final_sequence: Sequence,
    pub cache: CacheStats,
    /// Log importance weight of the sampled path, for twisted samplers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_weight: Option<f64>,
}

impl TrajectoryRecord {
    pub fn actions(&self) -> impl Iterator<Item = &EditAction> {
        self.steps.iter().map(|s| &s.action)
    }

    /// The visited states `x_0, ..., x_T`, rebuilt by replaying the edits.
    pub fn states(&self) -> Result<Vec<Sequence>> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(self.initial.clone());
        for s in &self.steps {
            let next = out.last().expect("nonempty").apply(&s.action)?;
            out.push(next);
        }
        Ok(out)
    }
}

pub(crate) fn stats_since(before: CacheStats, after: CacheStats) -> CacheStats {
    CacheStats { misses: after.misses - before.misses, hits: after.hits - before.hits }
}

pub(crate) struct Choice {
    pub action: EditAction,
    pub reward: Option<f64>,
}

/// Runs `total_steps` one-edit steps from `x0`. Steps in `window` ask
/// `guide`; the rest draw from `p0` with a generator seeded by `seed`.
pub(crate) fn drive<F>(
    env: Env<'_>,
    x0: &Sequence,
    total_steps: usize,
    window: &BTreeSet<usize>,
    seed: u64,
    mut guide: F,
) -> Result<TrajectoryRecord>
where
    F: FnMut(&Sequence, usize, &ProposalDist, &mut ChaCha8Rng) -> Result<Choice>,
{
    env.space.check(x0)?;
    let before = env.oracle.stats();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0.clone();
    let mut steps = Vec::with_capacity(total_steps);
    for t in 0..total_steps {
        let dist = env.proposal(&x, t)?;
        let guided = window.contains(&t);
        let choice =
            if guided { guide(&x, t, &dist, &mut rng)? } else { Choice { action: dist.sample(&mut rng), reward: None } };
        let log_p0 = dist.log_prob(&choice.action).ok_or(Error::InvalidAction { action: choice.action, len: x.len() })?;
        x = x.apply(&choice.action)?;
        steps.push(StepRecord { t, action: choice.action, log_p0, guided, reward: choice.reward });
    }
    Ok(TrajectoryRecord {
        initial: x0.clone(),
        steps,
        final_sequence: x,
        cache: stats_since(before, env.oracle.stats()),
        log_weight: None,
    })
}

/// Rolls out `total_steps` edits, applying the LPDP step on the configured
/// window and base sampling elsewhere.
pub fn guided_rollout(
    env: Env<'_>,
    config: &GuidanceConfig,
    x0: &Sequence,
    total_steps: usize,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let planner = Planner::new(env, config)?;
    let window = config.window.resolve(total_steps)?;
    drive(env, x0, total_steps, &window, seed, |x, t, _, _| {
        let outcome = planner.step(x, t)?;
        let child = x.apply(&outcome.action)?;
        Ok(Choice { action: outcome.action, reward: Some(env.oracle.reward(&child)) })
    })
}
