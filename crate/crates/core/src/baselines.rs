//! Reference allocators sharing the frozen model, action space and cached
//! oracle with LPDP: raw sampling, beam search, the cross-entropy method,
//! sequential Monte Carlo and a twisted-proposal sampler.
//!
//! Every allocator returns a [`TrajectoryRecord`] whose cache counters are
//! the oracle traffic it caused, so calls/sample is comparable across them.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpdp::{drive, tilted_score, Choice, Env, StepRecord, TrajectoryRecord, WindowSpec};
use crate::math::log_sum_exp;
use crate::oracle::CacheStats;
use crate::proposal::{sample_log_weights, ProposalDist};
use crate::seq::{EditAction, EditKind, Sequence};

/// Base sampling at every step. Makes no oracle calls.
pub fn raw_rollout(env: Env<'_>, x0: &Sequence, total_steps: usize, seed: u64) -> Result<TrajectoryRecord> {
    drive(env, x0, total_steps, &BTreeSet::new(), seed, |_, _, _, _| unreachable!("no guided steps"))
}

fn one_step_scores(env: Env<'_>, x: &Sequence, dist: &ProposalDist, beta: f64) -> Result<Vec<f64>> {
    let r_x = env.oracle.reward(x);
    dist.iter().map(|(a, lp)| Ok(tilted_score(lp, env.oracle.reward(&x.apply(a)?) - r_x, beta))).collect()
}

fn reward_choice(env: Env<'_>, x: &Sequence, action: EditAction) -> Result<Choice> {
    let child = x.apply(&action)?;
    Ok(Choice { action, reward: Some(env.oracle.reward(&child)) })
}

// ---------------------------------------------------------------- beam

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamConfig {
    pub width: usize,
    pub depth: usize,
    pub beta: f64,
    pub window: WindowSpec,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig { width: 8, depth: 2, beta: 20.0, window: WindowSpec::default() }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.depth == 0 {
            return Err(Error::Config("beam width and depth must be >= 1".into()));
        }
        Ok(())
    }
}

/// A partial path in the beam: where it ends, its first edit and the
/// cumulative tilted score.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamNode {
    pub sequence: Sequence,
    pub first_edit: Option<EditAction>,
    pub score: f64,
}

impl BeamNode {
    pub fn root(x: &Sequence) -> BeamNode {
        BeamNode { sequence: x.clone(), first_edit: None, score: 0.0 }
    }
}

fn beam_order(a: &BeamNode, b: &BeamNode) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.first_edit.cmp(&b.first_edit))
        .then_with(|| a.sequence.cmp(&b.sequence))
}

/// Expands every node over its full action set at step `t`, merges children
/// that reach the same sequence (keeping the higher score, then the
/// canonically smaller first edit) and keeps the best `width`.
///
/// Nodes with no valid actions are carried forward unchanged.
pub fn beam_step(env: Env<'_>, frontier: &[BeamNode], t: usize, config: &BeamConfig) -> Result<Vec<BeamNode>> {
    let mut best: HashMap<Sequence, BeamNode> = HashMap::new();
    let mut offer = |node: BeamNode| {
        let keep = match best.get(&node.sequence) {
            Some(old) => beam_order(&node, old).is_lt(),
            None => true,
        };
        if keep {
            best.insert(node.sequence.clone(), node);
        }
    };
    for node in frontier {
        let dist = match env.proposal(&node.sequence, t) {
            Ok(d) => d,
            Err(Error::NoActions) => {
                offer(node.clone());
                continue;
            }
            Err(e) => return Err(e),
        };
        let q = one_step_scores(env, &node.sequence, &dist, config.beta)?;
        for ((a, _), qa) in dist.iter().zip(q) {
            offer(BeamNode {
                sequence: node.sequence.apply(a)?,
                first_edit: node.first_edit.or(Some(*a)),
                score: node.score + qa,
            });
        }
    }
    let mut next: Vec<BeamNode> = best.into_values().collect();
    next.sort_by(beam_order);
    next.truncate(config.width);
    Ok(next)
}

/// Runs `depth` beam levels from `x` and returns the first edit of the best
/// path with that path's cumulative score.
pub fn beam_plan(env: Env<'_>, x: &Sequence, t: usize, config: &BeamConfig) -> Result<(EditAction, f64)> {
    let mut frontier = vec![BeamNode::root(x)];
    for _ in 0..config.depth {
        frontier = beam_step(env, &frontier, t, config)?;
    }
    let best = frontier.first().ok_or(Error::NoActions)?;
    Ok((best.first_edit.ok_or(Error::NoActions)?, best.score))
}

pub fn beam_rollout(
    env: Env<'_>,
    x0: &Sequence,
    total_steps: usize,
    config: &BeamConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let window = config.window.resolve(total_steps)?;
    drive(env, x0, total_steps, &window, seed, |x, t, _, _| reward_choice(env, x, beam_plan(env, x, t, config)?.0))
}

// ---------------------------------------------------------------- shared segment plumbing

/// Raw steps from `x` over `steps`, appending to `out`.
fn raw_steps<R: Rng>(
    env: Env<'_>,
    x: &mut Sequence,
    steps: std::ops::Range<usize>,
    rng: &mut R,
    out: &mut Vec<StepRecord>,
) -> Result<()> {
    for t in steps {
        let dist = env.proposal(x, t)?;
        let a = dist.sample(rng);
        let lp = dist.log_prob(&a).expect("sampled from support");
        *x = x.apply(&a)?;
        out.push(StepRecord { t, action: a, log_p0: lp, guided: false, reward: None });
    }
    Ok(())
}

/// `[first, last]` window indices, or `None` for an empty window.
fn segment(window: &BTreeSet<usize>) -> Option<(usize, usize)> {
    Some((*window.first()?, *window.last()?))
}

fn finish(
    x0: &Sequence,
    steps: Vec<StepRecord>,
    x: Sequence,
    before: CacheStats,
    env: Env<'_>,
) -> TrajectoryRecord {
    let after = env.oracle.stats();
    TrajectoryRecord {
        initial: x0.clone(),
        steps,
        final_sequence: x,
        cache: CacheStats { misses: after.misses - before.misses, hits: after.hits - before.hits },
        log_weight: None,
    }
}

// ---------------------------------------------------------------- CEM

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CemConfig {
    pub population: usize,
    pub elites: usize,
    pub rounds: usize,
    pub window: WindowSpec,
}

impl Default for CemConfig {
    fn default() -> Self {
        CemConfig { population: 64, elites: 8, rounds: 2, window: WindowSpec::default() }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.elites == 0 || self.elites > self.population {
            return Err(Error::Config("CEM needs 1 <= elites <= population".into()));
        }
        Ok(())
    }
}

/// Per-kind logit offsets, indexed by [`EditKind::index`].
pub type KindOffsets = [f64; 3];

/// Refits per-step kind offsets to elite kind frequencies.
///
/// For each guided step `j`, `π_j(e) = (c_j(e) + 1) / (E + 3)` and the new
/// offset is `ln π_j(e)` centred to mean zero. If all elites chose the same
/// kinds at every step the old offsets are returned unchanged.
pub fn refit_offsets(elite_kinds: &[Vec<EditKind>], old: &[KindOffsets]) -> Vec<KindOffsets> {
    if elite_kinds.is_empty() || elite_kinds.iter().all(|k| k == &elite_kinds[0]) {
        return old.to_vec();
    }
    let e = elite_kinds.len() as f64;
    (0..old.len())
        .map(|j| {
            let mut counts = [0.0f64; 3];
            for kinds in elite_kinds {
                counts[kinds[j].index()] += 1.0;
            }
            let logs = counts.map(|c| ((c + 1.0) / (e + 3.0)).ln());
            let mean = logs.iter().sum::<f64>() / 3.0;
            logs.map(|l| l - mean)
        })
        .collect()
}

/// Draws from `p0` tilted by `exp(offsets[kind])`.
fn sample_tilted<R: Rng>(dist: &ProposalDist, offsets: &KindOffsets, rng: &mut R) -> EditAction {
    let lw: Vec<f64> = dist.iter().map(|(a, lp)| lp + offsets[a.kind().index()]).collect();
    dist.actions()[sample_log_weights(&lw, rng).expect("nonempty proposal")]
}

struct Candidate {
    steps: Vec<StepRecord>,
    end: Sequence,
    score: f64,
}

/// Cross-entropy method over the guided segment.
///
/// Raw steps run up to the first window index. The segment from the first to
/// the last window index is then sampled `population` times per round, with
/// kind offsets applied at window steps and raw sampling elsewhere. Each
/// sample scores the reward at the segment end. After the initial round and
/// `rounds` refits, the best sampled segment is kept and the rollout
/// continues raw.
pub fn cem_rollout(
    env: Env<'_>,
    x0: &Sequence,
    total_steps: usize,
    config: &CemConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    env.space.check(x0)?;
    let window = config.window.resolve(total_steps)?;
    let before = env.oracle.stats();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0.clone();
    let mut steps = Vec::with_capacity(total_steps);
    let Some((first, last)) = segment(&window) else {
        raw_steps(env, &mut x, 0..total_steps, &mut rng, &mut steps)?;
        return Ok(finish(x0, steps, x, before, env));
    };
    raw_steps(env, &mut x, 0..first, &mut rng, &mut steps)?;

    let guided: Vec<usize> = window.iter().copied().collect();
    let mut offsets = vec![[0.0; 3]; guided.len()];
    let mut best: Option<Candidate> = None;
    for round in 0..=config.rounds {
        let mut pop = Vec::with_capacity(config.population);
        for _ in 0..config.population {
            let mut z = x.clone();
            let mut seg = Vec::with_capacity(last - first + 1);
            let mut j = 0;
            for t in first..=last {
                let dist = env.proposal(&z, t)?;
                let is_guided = window.contains(&t);
                let a = if is_guided { sample_tilted(&dist, &offsets[j], &mut rng) } else { dist.sample(&mut rng) };
                j += usize::from(is_guided);
                let lp = dist.log_prob(&a).expect("sampled from support");
                z = z.apply(&a)?;
                seg.push(StepRecord { t, action: a, log_p0: lp, guided: is_guided, reward: None });
            }
            let score = env.oracle.reward(&z);
            pop.push(Candidate { steps: seg, end: z, score });
        }
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[b].score.total_cmp(&pop[a].score).then(a.cmp(&b)));
        if round < config.rounds {
            let elite_kinds: Vec<Vec<EditKind>> = order[..config.elites]
                .iter()
                .map(|&i| pop[i].steps.iter().filter(|s| s.guided).map(|s| s.action.kind()).collect())
                .collect();
            offsets = refit_offsets(&elite_kinds, &offsets);
        }
        let top = order[0];
        if best.as_ref().is_none_or(|b| pop[top].score > b.score) {
            best = Some(pop.swap_remove(top));
        }
    }
    let best = best.expect("population is nonempty");
    steps.extend(best.steps);
    x = best.end;
    raw_steps(env, &mut x, last + 1..total_steps, &mut rng, &mut steps)?;
    Ok(finish(x0, steps, x, before, env))
}

// ---------------------------------------------------------------- SMC

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmcConfig {
    pub particles: usize,
    /// Guided steps between effective-sample-size checks.
    pub depth: usize,
    pub proposal_top_k: usize,
    pub beta: f64,
    pub window: WindowSpec,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig { particles: 64, depth: 2, proposal_top_k: 32, beta: 20.0, window: WindowSpec::default() }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 || self.depth == 0 || self.proposal_top_k == 0 {
            return Err(Error::Config("SMC particles, depth and proposal_top_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// `(Σ w)² / Σ w²` for weights given in log space.
pub fn ess(log_w: &[f64]) -> f64 {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return 0.0;
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    s * s / w.iter().map(|x| x * x).sum::<f64>()
}

/// Systematic resampling with offset `u ∈ [0, 1)`. All-zero or non-finite
/// weights resample uniformly, which with `n` draws keeps every index once.
pub fn systematic_resample(weights: &[f64], u: f64) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return (0..n).collect();
    }
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0] / total;
    let mut i = 0;
    for k in 0..n {
        let pos = (k as f64 + u) / n as f64;
        while pos >= cum && i + 1 < n {
            i += 1;
            cum += weights[i] / total;
        }
        out.push(i);
    }
    out
}

/// The top-`k` actions by `p0` (canonical on ties) with `p0` renormalized
/// over them, as `(action, log prob)` in rank order.
pub fn top_k_support(dist: &ProposalDist, k: usize) -> Vec<(EditAction, f64)> {
    let idx: Vec<usize> = dist.ranked().into_iter().take(k).collect();
    let lps: Vec<f64> = idx.iter().map(|&i| dist.log_probs()[i]).collect();
    let z = log_sum_exp(&lps);
    idx.iter().zip(lps).map(|(&i, lp)| (dist.actions()[i], lp - z)).collect()
}

#[derive(Clone)]
struct Particle {
    x: Sequence,
    steps: Vec<StepRecord>,
}

/// Sequential Monte Carlo over the guided segment.
///
/// `particles` copies of the state at the first window index advance to the
/// last window index. At window steps each samples from `p0` restricted to
/// its top `proposal_top_k` actions and multiplies its weight by
/// `exp(β · ΔR)`; other segment steps are raw. Every `depth` guided steps,
/// and when the segment ends, the population is systematically resampled if
/// its effective sample size is below half the particle count. The particle
/// with the highest reward at the segment end continues raw.
pub fn smc_rollout(
    env: Env<'_>,
    x0: &Sequence,
    total_steps: usize,
    config: &SmcConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    env.space.check(x0)?;
    let window = config.window.resolve(total_steps)?;
    let before = env.oracle.stats();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0.clone();
    let mut steps = Vec::with_capacity(total_steps);
    let Some((first, last)) = segment(&window) else {
        raw_steps(env, &mut x, 0..total_steps, &mut rng, &mut steps)?;
        return Ok(finish(x0, steps, x, before, env));
    };
    raw_steps(env, &mut x, 0..first, &mut rng, &mut steps)?;

    let n = config.particles;
    let mut parts = vec![Particle { x: x.clone(), steps: Vec::new() }; n];
    let mut log_w = vec![0.0; n];
    let mut since_check = 0;
    for t in first..=last {
        let is_guided = window.contains(&t);
        for (p, lw) in parts.iter_mut().zip(log_w.iter_mut()) {
            let dist = env.proposal(&p.x, t)?;
            let a = if is_guided {
                let support = top_k_support(&dist, config.proposal_top_k);
                let lps: Vec<f64> = support.iter().map(|s| s.1).collect();
                support[sample_log_weights(&lps, &mut rng).expect("nonempty support")].0
            } else {
                dist.sample(&mut rng)
            };
            let child = p.x.apply(&a)?;
            let mut reward = None;
            if is_guided {
                let r_child = env.oracle.reward(&child);
                *lw += config.beta * (r_child - env.oracle.reward(&p.x));
                reward = Some(r_child);
            }
            let lp = dist.log_prob(&a).expect("support is within the proposal");
            p.steps.push(StepRecord { t, action: a, log_p0: lp, guided: is_guided, reward });
            p.x = child;
        }
        since_check += usize::from(is_guided);
        if (since_check == config.depth || t == last) && ess(&log_w) < n as f64 / 2.0 {
            let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = log_w.iter().map(|l| if m.is_finite() { (l - m).exp() } else { 0.0 }).collect();
            let idx = systematic_resample(&w, rng.random::<f64>());
            parts = idx.iter().map(|&i| parts[i].clone()).collect();
            log_w = vec![0.0; n];
        }
        if since_check == config.depth {
            since_check = 0;
        }
    }
    let rewards: Vec<f64> = parts.iter().map(|p| env.oracle.reward(&p.x)).collect();
    let best = (0..n).fold(0, |b, i| if rewards[i] > rewards[b] { i } else { b });
    let chosen = parts.swap_remove(best);
    steps.extend(chosen.steps);
    x = chosen.x;
    raw_steps(env, &mut x, last + 1..total_steps, &mut rng, &mut steps)?;
    Ok(finish(x0, steps, x, before, env))
}

// ---------------------------------------------------------------- twisted sampler

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TdsConfig {
    /// Softmax temperature; `0` takes the argmax.
    pub temperature: f64,
    pub support_top_k: usize,
    pub beta: f64,
    pub window: WindowSpec,
}

impl Default for TdsConfig {
    fn default() -> Self {
        TdsConfig { temperature: 1.0, support_top_k: 8, beta: 20.0, window: WindowSpec::default() }
    }
}

impl TdsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0) || self.support_top_k == 0 {
            return Err(Error::Config("TDS needs temperature >= 0 and support_top_k >= 1".into()));
        }
        Ok(())
    }
}

/// The twisted distribution at `x`: over the top `support_top_k` actions by
/// `p0`, `log q(a) ∝ (log p0(a) + β ΔR(x, a)) / temperature`. Returned as
/// `(action, log p0, log q)` in base-probability rank order. Requires a
/// positive temperature.
pub fn tds_distribution(
    env: Env<'_>,
    x: &Sequence,
    dist: &ProposalDist,
    config: &TdsConfig,
) -> Result<Vec<(EditAction, f64, f64)>> {
    let r_x = env.oracle.reward(x);
    let idx: Vec<usize> = dist.ranked().into_iter().take(config.support_top_k).collect();
    let mut logits = Vec::with_capacity(idx.len());
    for &i in &idx {
        let a = dist.actions()[i];
        let s = tilted_score(dist.log_probs()[i], env.oracle.reward(&x.apply(&a)?) - r_x, config.beta);
        logits.push(s / config.temperature);
    }
    let z = log_sum_exp(&logits);
    Ok(idx.iter().zip(logits).map(|(&i, l)| (dist.actions()[i], dist.log_probs()[i], l - z)).collect())
}

/// Twisted-proposal sampling at window steps, base sampling elsewhere. The
/// record's `log_weight` is `Σ (log p0 − log q)` over guided steps (zero
/// when the temperature is zero).
pub fn tds_rollout(
    env: Env<'_>,
    x0: &Sequence,
    total_steps: usize,
    config: &TdsConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let window = config.window.resolve(total_steps)?;
    let mut log_weight = 0.0;
    let mut rec = drive(env, x0, total_steps, &window, seed, |x, _, dist, rng| {
        if config.temperature == 0.0 {
            let scores = one_step_scores(env, x, dist, config.beta)?;
            let best = dist
                .ranked()
                .into_iter()
                .take(config.support_top_k)
                .min_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(dist.actions()[i].cmp(&dist.actions()[j])))
                .expect("nonempty support");
            return reward_choice(env, x, dist.actions()[best]);
        }
        let twisted = tds_distribution(env, x, dist, config)?;
        let lq: Vec<f64> = twisted.iter().map(|e| e.2).collect();
        let (a, lp, lqa) = twisted[sample_log_weights(&lq, rng).expect("nonempty support")];
        log_weight += lp - lqa;
        reward_choice(env, x, a)
    })?;
    rec.log_weight = Some(log_weight);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpdp::{guided_rollout, lpdp_step, GuidanceConfig};
    use crate::oracle::{CachedOracle, MotifCountOracle};
    use crate::proposal::{DriftModel, DriftModelParams};
    use crate::seq::{ActionSpace, LengthBounds};
    use crate::synthetic::{HashedModel, HashedOracle};

    struct Fixture {
        model: DriftModel,
        space: ActionSpace,
        oracle: CachedOracle,
    }

    impl Fixture {
        fn new() -> Fixture {
            Fixture {
                model: DriftModel::new(DriftModelParams { target_length: 10, ..Default::default() }).unwrap(),
                space: ActionSpace::new(LengthBounds::new(1, 24).unwrap()),
                oracle: CachedOracle::from_oracle(MotifCountOracle::new("GAT".parse().unwrap()).unwrap()),
            }
        }

        fn env(&self) -> Env<'_> {
            Env::new(&self.model, &self.space, &self.oracle)
        }
    }

    fn x0() -> Sequence {
        "ACGTACGA".parse().unwrap()
    }

    #[test]
    fn raw_rollout_is_free_and_matches_empty_window() {
        let f = Fixture::new();
        let raw = raw_rollout(f.env(), &x0(), 40, 17).unwrap();
        assert_eq!(raw.cache, CacheStats::default());
        let cfg = GuidanceConfig { window: WindowSpec::none(), ..Default::default() };
        let g = guided_rollout(f.env(), &cfg, &x0(), 40, 17).unwrap();
        assert_eq!(raw, g);
        assert_eq!(raw, raw_rollout(f.env(), &x0(), 40, 17).unwrap());
    }

    #[test]
    fn narrow_beam_equals_one_step_lpdp() {
        let m = HashedModel::new(3, 1.0);
        let sp = ActionSpace::new(LengthBounds::new(1, 9).unwrap());
        let o = CachedOracle::from_oracle(HashedOracle { seed: 5, scale: 0.2 });
        let env = Env::new(&m, &sp, &o);
        let beam = BeamConfig { width: 1, depth: 1, beta: 4.0, ..Default::default() };
        let lp = GuidanceConfig { horizon: 1, delta: 0.0, k_root: 1, beta: 4.0, ..Default::default() };
        for s in ["A", "GT", "ACGTT", "TTTTTTTTT"] {
            let x: Sequence = s.parse().unwrap();
            assert_eq!(beam_plan(env, &x, 0, &beam).unwrap().0, lpdp_step(env, &lp, &x, 0).unwrap().action);
        }
    }

    #[test]
    fn beam_dedups_children() {
        let f = Fixture::new();
        let x: Sequence = "AA".parse().unwrap();
        let next = beam_step(f.env(), &[BeamNode::root(&x)], 0, &BeamConfig { width: 1000, ..Default::default() }).unwrap();
        let distinct: BTreeSet<&Sequence> = next.iter().map(|n| &n.sequence).collect();
        assert_eq!(distinct.len(), next.len());
        assert!(next.len() < f.space.enumerate(&x).len());
    }

    #[test]
    fn beam_rollout_counts_calls() {
        let f = Fixture::new();
        let cfg = BeamConfig { window: WindowSpec::First(2), ..Default::default() };
        let r = beam_rollout(f.env(), &x0(), 10, &cfg, 1).unwrap();
        assert!(r.cache.misses > 0);
        assert_eq!(r.steps.iter().filter(|s| s.guided).count(), 2);
    }

    #[test]
    fn refit_moves_toward_elite_kinds() {
        let old = vec![[0.0; 3]; 2];
        let elites = vec![vec![EditKind::Ins, EditKind::Ins], vec![EditKind::Ins, EditKind::Sub]];
        let new = refit_offsets(&elites, &old);
        let ins = EditKind::Ins.index();
        assert!(new[0][ins] > old[0][ins]);
        assert!(new[1][ins] > new[1][EditKind::Del.index()]);
        for row in &new {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
        let same = vec![vec![EditKind::Ins, EditKind::Sub]; 3];
        assert_eq!(refit_offsets(&same, &old), old);
    }

    #[test]
    fn cem_without_refits_is_best_of_population() {
        let f = Fixture::new();
        let cfg = CemConfig { population: 12, elites: 3, rounds: 0, window: WindowSpec::First(4) };
        let r = cem_rollout(f.env(), &x0(), 8, &cfg, 2).unwrap();
        assert_eq!(r.steps.len(), 8);
        assert_eq!(r.states().unwrap().last(), Some(&r.final_sequence));
        let again = cem_rollout(f.env(), &x0(), 8, &cfg, 2).unwrap();
        assert_eq!((r.steps.clone(), r.final_sequence.clone()), (again.steps, again.final_sequence));
        assert_eq!(again.cache.misses, 0);
        assert!(CemConfig { elites: 13, ..cfg }.validate().is_err());
    }

    #[test]
    fn ess_and_resampling() {
        assert!((ess(&[0.0; 5]) - 5.0).abs() < 1e-12);
        assert!((ess(&[0.0, f64::NEG_INFINITY]) - 1.0).abs() < 1e-12);
        assert_eq!(systematic_resample(&[0.0, 0.0, 0.0], 0.3), vec![0, 1, 2]);
        assert_eq!(systematic_resample(&[1.0, 0.0, 0.0], 0.9), vec![0, 0, 0]);
        assert_eq!(systematic_resample(&[1.0, 1.0], 0.5), vec![0, 1]);
        let idx = systematic_resample(&[0.1, 0.6, 0.3], 0.5);
        assert_eq!(idx, vec![1, 1, 2]);
    }

    #[test]
    fn single_particle_smc_is_restricted_raw() {
        let f = Fixture::new();
        let cfg = SmcConfig { particles: 1, proposal_top_k: 3, window: WindowSpec::First(5), ..Default::default() };
        let r = smc_rollout(f.env(), &x0(), 12, &cfg, 4).unwrap();
        let states = r.states().unwrap();
        for s in r.steps.iter().filter(|s| s.guided) {
            let dist = f.env().proposal(&states[s.t], s.t).unwrap();
            let top: Vec<EditAction> = top_k_support(&dist, 3).into_iter().map(|e| e.0).collect();
            assert!(top.contains(&s.action));
        }
    }

    #[test]
    fn tds_limits() {
        let m = HashedModel::new(11, 1.0);
        let sp = ActionSpace::new(LengthBounds::new(1, 9).unwrap());
        let o = CachedOracle::from_oracle(HashedOracle { seed: 12, scale: 0.2 });
        let env = Env::new(&m, &sp, &o);
        let x: Sequence = "ACGT".parse().unwrap();
        let dist = env.proposal(&x, 0).unwrap();

        let greedy = TdsConfig { temperature: 0.0, support_top_k: 1000, beta: 3.0, window: WindowSpec::First(1) };
        let r = tds_rollout(env, &x, 1, &greedy, 0).unwrap();
        let lp = GuidanceConfig { horizon: 1, delta: 0.0, beta: 3.0, ..Default::default() };
        assert_eq!(r.steps[0].action, lpdp_step(env, &lp, &x, 0).unwrap().action);

        let flat = TdsConfig { temperature: 1.0, support_top_k: 5, beta: 0.0, ..greedy };
        let twisted = tds_distribution(env, &x, &dist, &flat).unwrap();
        let support = top_k_support(&dist, 5);
        assert_eq!(twisted.len(), 5);
        for ((a, _, lq), (b, lp)) in twisted.iter().zip(&support) {
            assert_eq!(a, b);
            assert!((lq - lp).abs() < 1e-12);
        }
    }
}
