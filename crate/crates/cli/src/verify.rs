//! Randomized brute-force checks of the planner's exact identities.
//!
//! Each suite draws small instances from a seeded generator, computes the
//! fast-path quantity and its exhaustive counterpart, and reports how many
//! instances it saw, how many violated the claim and the largest residual.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use lpdp::exactdp::{enumerate_paths, full_graph_dp, log_partition, max_path_value, partition_value};
use lpdp::lpdp::{
    local_neighborhood, rank_by_proposal, root_band, select_candidates, Backup, CandidateRule, GuidanceConfig,
};
use lpdp::oracle::MotifCountOracle;
use lpdp::proposal::{DriftModel, DriftModelParams};
use lpdp::synthetic::{HashedModel, HashedOracle};
use lpdp::{ActionSpace, CachedOracle, EditAction, Env, LengthBounds, Nucleotide, Planner, ProposalModel, Sequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Small instance counts; finishes in seconds.
    Tiny,
    Default,
    /// Default sizes with the soft-backup temperature negated in the fast
    /// path. The soft-value checks must fail; this is a negative control.
    FaultTau,
}

impl FromStr for Preset {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Preset> {
        Ok(match s {
            "tiny" => Preset::Tiny,
            "default" => Preset::Default,
            "fault-tau" => Preset::FaultTau,
            other => bail!("unknown preset {other:?} (expected tiny, default or fault-tau)"),
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Tiny => "tiny",
            Preset::Default => "default",
            Preset::FaultTau => "fault-tau",
        })
    }
}

/// Instance counts per suite.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Sizes {
    pub backup_instances: usize,
    pub band_instances: usize,
    pub rank_sets: usize,
    pub typed_instances: usize,
    pub reduction_instances: usize,
}

impl Preset {
    pub fn sizes(self) -> Sizes {
        match self {
            Preset::Tiny => Sizes {
                backup_instances: 45,
                band_instances: 90,
                rank_sets: 1500,
                typed_instances: 45,
                reduction_instances: 30,
            },
            Preset::Default | Preset::FaultTau => Sizes {
                backup_instances: 240,
                band_instances: 600,
                rank_sets: 12_000,
                typed_instances: 240,
                reduction_instances: 120,
            },
        }
    }
}

/// Outcome of one property suite.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub claim: &'static str,
    pub instances: usize,
    pub violations: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, claim: &'static str, tolerance: f64) -> Check {
        Check { name, claim, instances: 0, violations: 0, max_residual: 0.0, tolerance, detail: String::new() }
    }

    fn observe(&mut self, residual: f64, violated: bool) {
        self.instances += 1;
        self.violations += usize::from(violated);
        if residual.is_nan() || residual > self.max_residual {
            self.max_residual = residual;
        }
    }

    pub fn passed(&self) -> bool {
        self.instances > 0 && self.violations == 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub preset: Preset,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut s = format!("verify preset={} seed={}\n", self.preset, self.seed);
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {:<22} n={:<6} violations={:<4} max_residual={:<10.3e} tol={:.0e}  {}{}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.instances,
                c.violations,
                c.max_residual,
                c.tolerance,
                c.claim,
                if c.detail.is_empty() { String::new() } else { format!(" [{}]", c.detail) },
            );
        }
        s
    }
}

/// A randomly drawn frozen model and oracle.
pub struct World {
    pub model: Box<dyn ProposalModel>,
    pub space: ActionSpace,
    pub oracle: CachedOracle,
}

impl World {
    pub fn draw<R: Rng>(rng: &mut R, max_len: usize) -> World {
        let seed: u64 = rng.random();
        let model: Box<dyn ProposalModel> = if rng.random_bool(0.7) {
            Box::new(HashedModel::new(seed, rng.random_range(0.2..2.0)))
        } else {
            let p = DriftModelParams {
                theta_sub: rng.random_range(-1.0..1.0),
                theta_ins: rng.random_range(-1.0..1.0),
                theta_del: rng.random_range(-1.0..1.0),
                target_length: 3,
                drift_gain: 1.0,
            };
            Box::new(DriftModel::new(p).expect("valid drift parameters"))
        };
        let oracle = if rng.random_bool(0.8) {
            CachedOracle::from_oracle(HashedOracle { seed: seed.rotate_left(17), scale: rng.random_range(0.05..0.5) })
        } else {
            CachedOracle::from_oracle(MotifCountOracle::new("GT".parse().expect("motif")).expect("motif"))
        };
        World { model, space: ActionSpace::new(LengthBounds::new(1, max_len).expect("bounds")), oracle }
    }

    pub fn env(&self) -> Env<'_> {
        Env::new(self.model.as_ref(), &self.space, &self.oracle)
    }
}

fn random_sequence<R: Rng>(rng: &mut R, min: usize, max: usize) -> Sequence {
    let n = rng.random_range(min..=max);
    Sequence::new((0..n).map(|_| Nucleotide::from_index(rng.random_range(0..4))).collect())
}

/// A lookahead root of length at most `max_len`: a random child of a random parent.
fn local_root<R: Rng>(rng: &mut R, space: &ActionSpace, max_len: usize) -> (Sequence, EditAction) {
    loop {
        let parent = random_sequence(rng, 1, max_len);
        let actions: Vec<EditAction> =
            space.enumerate(&parent).into_iter().filter(|a| parent.apply(a).unwrap().len() <= max_len).collect();
        if actions.is_empty() {
            continue;
        }
        let a = actions[rng.random_range(0..actions.len())];
        return (parent.apply(&a).unwrap(), a);
    }
}

/// Relative slack for inequalities whose two sides are computed along
/// different floating-point paths.
pub const ROUNDING: f64 = 1e-12;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// A planner that skips validation, so the negative control can inject a
/// mis-signed temperature.
fn planner<'a>(env: Env<'a>, config: &'a GuidanceConfig) -> Planner<'a> {
    Planner { env, config }
}

fn backup_suites(rng: &mut ChaCha8Rng, n: usize, fault: bool) -> Vec<Check> {
    let mut partition = Check::new(
        "lse-path-partition",
        "soft backup equals tau * log of the summed exp(path score / tau) over all local paths",
        1e-9,
    );
    let mut gap = Check::new(
        "lse-max-gap",
        "0 <= V_lse - V_max <= tau * ln(number of local paths), up to rounding",
        ROUNDING,
    );
    let mut cold = Check::new(
        "low-temperature-limit",
        "|V_lse(tau = 1e-4) - V_max| <= 1e-4 * ln(number of local paths), up to rounding",
        ROUNDING,
    );
    let mut rules = [0usize; 3];
    for i in 0..n {
        let w = World::draw(rng, 7);
        let (z, prev) = local_root(rng, &w.space, 4);
        let rule = CandidateRule::ALL[i % 3];
        rules[i % 3] += 1;
        let h = rng.random_range(0..=3);
        let tau = rng.random_range(0.1..2.0);
        let lse = GuidanceConfig {
            rule,
            backup: Backup::Lse,
            beta: rng.random_range(0.5..8.0),
            k_loc: rng.random_range(1..=4),
            radius: rng.random_range(0..=2),
            tau,
            gamma: 1.0,
            ..Default::default()
        };
        let max = GuidanceConfig { backup: Backup::Max, ..lse.clone() };
        let fast_lse = GuidanceConfig { tau: if fault { -tau } else { tau }, ..lse.clone() };
        let fast_cold = GuidanceConfig { tau: if fault { -1e-4 } else { 1e-4 }, ..lse.clone() };

        let env = w.env();
        let paths = enumerate_paths(&planner(env, &lse), &z, &prev, h, 0).expect("guard-safe");
        let v_lse = planner(env, &fast_lse).backup_value(&z, &prev, h, 0).expect("backup");
        let v_max = planner(env, &max).backup_value(&z, &prev, h, 0).expect("backup");
        let v_cold = planner(env, &fast_cold).backup_value(&z, &prev, h, 0).expect("backup");
        let log_count = (paths.len() as f64).ln();

        let r = rel(v_lse, partition_value(&paths, tau));
        partition.observe(r, !(r <= 1e-9));

        let slack = ROUNDING * v_max.abs().max(1.0);
        let d = v_lse - v_max;
        let bound = tau * log_count;
        let excess = (-d).max(d - bound).max(0.0);
        gap.observe(excess, !(excess <= slack));

        let dc = v_cold - v_max;
        let cold_excess = (dc.abs() - 1e-4 * log_count).max(0.0);
        cold.observe(cold_excess, !(cold_excess <= slack));
    }
    let detail = format!("mixed/st_after/st_first instances = {}/{}/{}", rules[0], rules[1], rules[2]);
    partition.detail = detail.clone();
    gap.detail = detail.clone();
    cold.detail = detail;
    vec![partition, gap, cold]
}

fn band_suite(rng: &mut ChaCha8Rng, n: usize) -> Check {
    let mut c = Check::new("band-truncation", "every root outside the uncapped band has q < q* - delta", 0.0);
    let mut excluded = 0usize;
    for i in 0..n {
        let w = World::draw(rng, 8);
        let x = random_sequence(rng, 1, 6);
        let delta = [0.0, 0.5, 2.0][i % 3];
        let cfg = GuidanceConfig { beta: rng.random_range(0.5..20.0), ..Default::default() };
        let t = rng.random_range(0..8);
        let scored = Planner::new(w.env(), &cfg).expect("config").root_scores(&x, t).expect("scores");
        let band = root_band(&scored, delta, usize::MAX);
        let q_star = band[0].q;
        let mut worst = 0.0f64;
        let mut bad = false;
        for s in &scored {
            let inside = band.iter().any(|b| b.action == s.action);
            if inside {
                bad |= s.q < q_star - delta;
            } else {
                excluded += 1;
                let over = s.q - (q_star - delta);
                if over >= 0.0 {
                    bad = true;
                    worst = worst.max(over);
                }
            }
        }
        c.observe(worst, bad);
    }
    c.detail = format!("{excluded} excluded roots");
    c
}

fn rank_suites(rng: &mut ChaCha8Rng, n: usize) -> Vec<Check> {
    let mut after = Check::new("st-after-rank", "every st_after candidate has mixed rank <= K_loc", 0.0);
    while after.instances < n {
        let w = World::draw(rng, 10);
        let parent = random_sequence(rng, 1, 8);
        let acts = w.space.enumerate(&parent);
        let prev = acts[rng.random_range(0..acts.len())];
        let z = parent.apply(&prev).expect("valid");
        let nb = local_neighborhood(&w.space, &z, &prev, rng.random_range(0..=3));
        if nb.is_empty() {
            continue;
        }
        let k_loc = rng.random_range(1..=8);
        let dist = w.env().proposal(&z, rng.random_range(0..8)).expect("proposal");
        let ranked = rank_by_proposal(&nb, &dist);
        let kept = select_candidates(&nb, &dist, &prev, CandidateRule::StAfter, k_loc);
        let worst = kept.iter().map(|b| ranked.iter().position(|r| r == b).expect("in neighborhood") + 1).max();
        let over = worst.unwrap_or(0).saturating_sub(k_loc);
        after.observe(over as f64, over > 0);
    }

    let mut first = Check::new(
        "st-first-witness",
        "a constructed state where st_first keeps a candidate of mixed rank > K_loc",
        0.0,
    );
    let space = ActionSpace::new(LengthBounds::new(1, 20).expect("bounds"));
    let model = DriftModel::new(DriftModelParams { theta_sub: 3.0, drift_gain: 0.0, ..Default::default() })
        .expect("drift");
    let z: Sequence = "ACGTA".parse().expect("sequence");
    let prev = EditAction::ins(2, Nucleotide::G);
    let k_loc = 3;
    let nb = local_neighborhood(&space, &z, &prev, 0);
    let dist = lpdp::proposal::normalized_proposal(&model, &space, &z, 0).expect("proposal");
    let ranked = rank_by_proposal(&nb, &dist);
    let kept = select_candidates(&nb, &dist, &prev, CandidateRule::StFirst, k_loc);
    let ranks: Vec<usize> = kept.iter().map(|b| ranked.iter().position(|r| r == b).expect("member") + 1).collect();
    let beyond = ranks.iter().filter(|&&r| r > k_loc).count();
    first.observe(0.0, beyond == 0);
    first.detail = format!("z={z} prev={prev} K_loc={k_loc} st_first ranks {ranks:?}");
    vec![after, first]
}

fn typed_suites(rng: &mut ChaCha8Rng, n: usize, fault: bool) -> Vec<Check> {
    let mut recovery = Check::new(
        "max-recovery",
        "typed Max equals mixed Max whenever an optimal mixed path survives st_after pruning",
        0.0,
    );
    let mut soft = Check::new(
        "soft-gap-ratio",
        "V_lse(mixed) - V_lse(st_after) = tau * ln(Z_mixed / Z_after)",
        1e-9,
    );
    let mut drawn = 0usize;
    let mut subset_violations = 0usize;
    for _ in 0..n {
        drawn += 1;
        let w = World::draw(rng, 7);
        let (z, prev) = local_root(rng, &w.space, 4);
        let h = rng.random_range(1..=3);
        let tau = rng.random_range(0.1..2.0);
        let base = GuidanceConfig {
            beta: rng.random_range(0.5..8.0),
            k_loc: rng.random_range(1..=4),
            radius: rng.random_range(0..=2),
            tau,
            backup: Backup::Max,
            ..Default::default()
        };
        let mixed_max = base.clone();
        let after_max = GuidanceConfig { rule: CandidateRule::StAfter, ..base.clone() };
        let signed = if fault { -tau } else { tau };
        let mixed_lse = GuidanceConfig { backup: Backup::Lse, tau: signed, ..base.clone() };
        let after_lse = GuidanceConfig { rule: CandidateRule::StAfter, ..mixed_lse.clone() };

        let env = w.env();
        let tm = enumerate_paths(&planner(env, &mixed_max), &z, &prev, h, 0).expect("guard-safe");
        let ta = enumerate_paths(&planner(env, &after_max), &z, &prev, h, 0).expect("guard-safe");
        let vm = planner(env, &mixed_max).backup_value(&z, &prev, h, 0).expect("backup");
        let va = planner(env, &after_max).backup_value(&z, &prev, h, 0).expect("backup");
        if va > vm {
            subset_violations += 1;
        }
        let best = max_path_value(&tm);
        let survives = tm.iter().filter(|p| p.score == best).any(|p| ta.iter().any(|q| q.edits == p.edits));
        if survives {
            recovery.observe((va - vm).abs(), va != vm);
        }

        let gap = planner(env, &mixed_lse).backup_value(&z, &prev, h, 0).expect("backup")
            - planner(env, &after_lse).backup_value(&z, &prev, h, 0).expect("backup");
        let ratio = tau * (log_partition(&tm, tau) - log_partition(&ta, tau));
        let r = (gap - ratio).abs() / gap.abs().max(1.0);
        soft.observe(r, !(r <= 1e-9));
    }
    recovery.violations += subset_violations;
    recovery.detail = format!("{} qualifying of {drawn} drawn; {subset_violations} with V_after > V_mixed", recovery.instances);
    vec![recovery, soft]
}

fn reduction_suites(rng: &mut ChaCha8Rng, n: usize) -> Vec<Check> {
    let mut h1 = Check::new("reduction-horizon-one", "with H = 1 the chosen edit is the band argmax of q", 0.0);
    let mut l0 = Check::new("reduction-lambda-zero", "with lambda = 0 the chosen edit is the band argmax of q", 0.0);
    let mut full = Check::new(
        "reduction-full-dp",
        "lambda = 1 with no band, radius or cap limits matches full-graph DP score and first edit",
        1e-9,
    );
    let mut skipped = 0usize;
    for _ in 0..n {
        let w = World::draw(rng, 8);
        let env = w.env();
        let x = random_sequence(rng, 1, 5);
        let t = rng.random_range(0..4);
        let common = GuidanceConfig {
            beta: rng.random_range(0.5..8.0),
            delta: [0.0, 0.5, 2.0, f64::INFINITY][rng.random_range(0..4)],
            k_root: rng.random_range(1..=16),
            k_loc: rng.random_range(1..=6),
            radius: rng.random_range(0..=2),
            rule: CandidateRule::ALL[rng.random_range(0..3)],
            backup: Backup::ALL[rng.random_range(0..2)],
            ..Default::default()
        };
        let band = root_band(&Planner::new(env, &common).expect("config").root_scores(&x, t).expect("scores"), common.delta, common.k_root);
        let one = GuidanceConfig { horizon: 1, ..common.clone() };
        let a1 = Planner::new(env, &one).expect("config").step(&x, t).expect("step").action;
        h1.observe(0.0, a1 != band[0].action);
        let zero = GuidanceConfig { lambda: 0.0, horizon: 2, ..common.clone() };
        let a0 = Planner::new(env, &zero).expect("config").step(&x, t).expect("step").action;
        l0.observe(0.0, a0 != band[0].action);

        let y = random_sequence(rng, 1, 3);
        let horizon = rng.random_range(1..=2);
        let open = GuidanceConfig {
            lambda: 1.0,
            horizon,
            rule: CandidateRule::Mixed,
            backup: Backup::Max,
            ..common.clone()
        }
        .unrestricted();
        let out = Planner::new(env, &open).expect("config").step(&y, t).expect("step");
        match full_graph_dp(env, &y, t, horizon, open.beta) {
            Ok((v, a)) => {
                let s = out.band.iter().find(|b| b.action == out.action).expect("chosen root").score();
                let r = rel(s, v);
                full.observe(r, !(r <= 1e-9) || a != Some(out.action));
            }
            Err(lpdp::Error::GuardExceeded { .. }) => skipped += 1,
            Err(e) => panic!("full DP failed: {e}"),
        }
    }
    full.detail = format!("{skipped} instances over the enumeration guard");
    vec![h1, l0, full]
}

/// Runs every suite for `preset` from `seed`.
pub fn run_suites(preset: Preset, seed: u64) -> Report {
    let sizes = preset.sizes();
    let fault = preset == Preset::FaultTau;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = backup_suites(&mut rng, sizes.backup_instances, fault);
    checks.push(band_suite(&mut rng, sizes.band_instances));
    checks.extend(rank_suites(&mut rng, sizes.rank_sets));
    checks.extend(typed_suites(&mut rng, sizes.typed_instances, fault));
    checks.extend(reduction_suites(&mut rng, sizes.reduction_instances));
    Report { preset, seed, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_preset_passes() {
        let r = run_suites(Preset::Tiny, 1);
        assert!(r.passed(), "{}", r.render());
        assert_eq!(r.checks.len(), 11);
    }

    #[test]
    fn presets_parse() {
        for p in [Preset::Tiny, Preset::Default, Preset::FaultTau] {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
        }
        assert!("huge".parse::<Preset>().is_err());
    }
}
