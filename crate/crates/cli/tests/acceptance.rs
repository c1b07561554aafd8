//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lpdp::baselines::raw_rollout;
use lpdp::lpdp::{GuidanceConfig, WindowSpec};
use lpdp::metrics::{base_traj_ll, jsd_k, splice_sample, KmerDistribution};
use lpdp::oracle::{MotifCountOracle, Pwm, SpliceToyOracle};
use lpdp::proposal::UniformModel;
use lpdp::{
    guided_rollout, ActionSpace, CachedOracle, Env, LengthBounds, Nucleotide, RewardOracle, Sequence,
};
use lpdp_cli::config::ExperimentConfig;
use lpdp_cli::run::{execute, stderr, write_outputs};
use lpdp_cli::verify::{run_suites, Check, Preset, Report};

struct Outcome {
    id: u8,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn check<'a>(report: &'a Report, name: &str) -> &'a Check {
    report.check(name).unwrap_or_else(|| panic!("missing check {name}"))
}

fn describe(c: &Check) -> String {
    format!("{} n={} violations={} max_residual={:.2e}", c.name, c.instances, c.violations, c.max_residual)
}

fn identities() -> Vec<Outcome> {
    let start = Instant::now();
    let report = run_suites(Preset::Default, 0);
    let secs = start.elapsed().as_secs_f64();

    let partition = check(&report, "lse-path-partition");
    let gap = check(&report, "lse-max-gap");
    let cold = check(&report, "low-temperature-limit");
    let band = check(&report, "band-truncation");
    let after = check(&report, "st-after-rank");
    let witness = check(&report, "st-first-witness");
    let recovery = check(&report, "max-recovery");
    let soft = check(&report, "soft-gap-ratio");
    let h1 = check(&report, "reduction-horizon-one");
    let l0 = check(&report, "reduction-lambda-zero");
    let full = check(&report, "reduction-full-dp");

    vec![
        Outcome {
            id: 1,
            title: "soft backup equals the log-partition over enumerated local paths",
            pass: partition.passed() && partition.instances >= 200 && secs < 120.0,
            detail: format!("{} [{}] suite time {secs:.2}s", describe(partition), partition.detail),
        },
        Outcome {
            id: 2,
            title: "soft/hard backup gap and low-temperature limit",
            pass: gap.passed() && cold.passed() && gap.instances >= 200,
            detail: format!("{}; {}", describe(gap), describe(cold)),
        },
        Outcome {
            id: 3,
            title: "uncapped band excludes only strictly worse roots",
            pass: band.passed() && band.instances >= 500,
            detail: format!("{} [{}]", describe(band), band.detail),
        },
        Outcome {
            id: 4,
            title: "st_after stays inside the mixed shortlist; st_first witness escapes it",
            pass: after.passed() && after.instances >= 10_000 && witness.passed(),
            detail: format!("{}; witness: {}", describe(after), witness.detail),
        },
        Outcome {
            id: 5,
            title: "typed Max recovery and soft-gap log-partition ratio",
            pass: recovery.passed() && soft.passed(),
            detail: format!("{} [{}]; {}", describe(recovery), recovery.detail, describe(soft)),
        },
        Outcome {
            id: 6,
            title: "reductions to one-step argmax and to full-graph DP",
            pass: h1.passed() && l0.passed() && full.passed(),
            detail: format!("{}; {}; {} [{}]", describe(h1), describe(l0), describe(full), full.detail),
        },
    ]
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn benchmark() -> Outcome {
    const VARIANTS: [&str; 6] = [
        "lpdp-mixed-max",
        "lpdp-st-after-max",
        "lpdp-st-first-max",
        "lpdp-mixed-lse",
        "lpdp-st-after-lse",
        "lpdp-st-first-lse",
    ];
    let mut cfg = ExperimentConfig::from_path(&configs_dir().join("desk_pwm.toml")).expect("desk_pwm.toml");
    assert_eq!((cfg.run.total_steps, cfg.run.samples), (64, 100));
    let seeds = 0..5u64;
    let mut per_seed: Vec<(String, Vec<f64>)> =
        ["raw", "lpdp-h1"].iter().chain(VARIANTS.iter()).map(|n| (n.to_string(), Vec::new())).collect();
    let mut beats_raw = true;
    let mut losses = Vec::new();
    for seed in seeds.clone() {
        cfg.run.seed = seed;
        let out = execute(&cfg).expect("benchmark run");
        let raw = out.method("raw").expect("raw block").summary.reward_mean;
        for (name, v) in per_seed.iter_mut() {
            let m = out.method(name).unwrap_or_else(|| panic!("missing block {name}")).summary.reward_mean;
            if VARIANTS.contains(&name.as_str()) && !(m > raw) {
                beats_raw = false;
                losses.push(format!("{name}@seed{seed}"));
            }
            v.push(m);
        }
    }
    let summary = |name: &str| -> (f64, f64) {
        let v = &per_seed.iter().find(|(n, _)| n == name).expect("collected").1;
        (mean(v), stderr(v))
    };
    let (h1, h1_se) = summary("lpdp-h1");
    let mut h_order = true;
    let mut parts = vec![format!("raw {:.4}±{:.4}", summary("raw").0, summary("raw").1), format!("H1 {h1:.4}±{h1_se:.4}")];
    for v in VARIANTS {
        let (m, se) = summary(v);
        h_order &= m >= h1;
        parts.push(format!("{} {m:.4}±{se:.4}", v.trim_start_matches("lpdp-")));
    }
    Outcome {
        id: 7,
        title: "desk-scale benchmark: every LPDP variant beats raw; H=2 >= H=1 over 5 seeds",
        pass: beats_raw && h_order,
        detail: format!(
            "seed-mean±stderr over {} seeds: {}{}",
            seeds.count(),
            parts.join(", "),
            if losses.is_empty() { String::new() } else { format!("; not above raw: {}", losses.join(" ")) }
        ),
    }
}

/// Counts distinct sequences reaching the underlying reward function.
struct DistinctCounter {
    inner: MotifCountOracle,
    seen: Mutex<HashSet<Sequence>>,
    calls: AtomicUsize,
}

impl RewardOracle for DistinctCounter {
    fn reward(&self, x: &Sequence) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.seen.lock().unwrap().insert(x.clone());
        self.inner.reward(x)
    }
}

fn cost_accounting() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let pipeline = |init: &str, bounds: (usize, usize), method: &str| -> Vec<u64> {
        let text = format!(
            r#"
            [task]
            bounds = {{ min_len = {}, max_len = {} }}
            model = {{ kind = "uniform" }}
            oracle = {{ kind = "motif", motif = "GT" }}
            init = {{ kind = "literal", sequence = "{init}" }}
            [run]
            samples = 8
            total_steps = {}
            window = "first:1"
            [[method]]
            {method}
            "#,
            bounds.0,
            bounds.1,
            if method.contains("raw") { 12 } else { 1 },
        );
        let cfg = ExperimentConfig::parse(&text, Path::new(".")).expect("cost config");
        execute(&cfg).expect("cost run").methods[0].records.iter().map(|r| r.calls).collect()
    };

    let raw = pipeline("ACGTACGT", (1, 16), "kind = \"raw\"");
    let raw_ok = raw.iter().all(|&c| c == 0);
    pass &= raw_ok;
    notes.push(format!("raw calls/sample {:?}", raw.iter().max()));

    let guided = pipeline("ACGT", (1, 4), "kind = \"lpdp\"\nhorizon = 1");
    let guided_ok = guided.iter().all(|&c| c == 17);
    pass &= guided_ok;
    notes.push(format!("one guided H=1 step on ACGT (|A|=16): misses {:?}", guided.first()));

    let cfg = GuidanceConfig { horizon: 1, window: WindowSpec::First(1), ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut distinct_states, mut states) = (0, 0);
    for i in 0..200u64 {
        let n = rng.random_range(1..=10);
        let mut bases: Vec<Nucleotide> = Vec::with_capacity(n);
        // Odd draws sit at the length cap with no adjacent repeats, so every child is distinct.
        let at_cap = i % 2 == 1;
        while bases.len() < n {
            let b = Nucleotide::from_index(rng.random_range(0..4));
            if !(at_cap && bases.last() == Some(&b)) {
                bases.push(b);
            }
        }
        let x = Sequence::new(bases);
        let space = ActionSpace::new(LengthBounds::new(1, if at_cap { n } else { 12 }).unwrap());
        let counter = Arc::new(DistinctCounter {
            inner: MotifCountOracle::new("GT".parse().unwrap()).unwrap(),
            seen: Mutex::new(HashSet::new()),
            calls: AtomicUsize::new(0),
        });
        let oracle = CachedOracle::new(counter.clone());
        let rec = guided_rollout(Env::new(&UniformModel, &space, &oracle), &cfg, &x, 1, i).expect("rollout");
        let actions = space.enumerate(&x);
        let mut reachable: HashSet<Sequence> = actions.iter().map(|a| x.apply(a).unwrap()).collect();
        let all_distinct = reachable.len() == actions.len();
        reachable.insert(x.clone());
        let seen = counter.seen.lock().unwrap().len() as u64;
        let ok = rec.cache.misses == seen
            && counter.calls.load(Ordering::Relaxed) as u64 == seen
            && seen == reachable.len() as u64
            && (!all_distinct || rec.cache.misses == actions.len() as u64 + 1);
        pass &= ok;
        states += 1;
        distinct_states += usize::from(all_distinct);
    }
    notes.push(format!(
        "{states} random states: misses == independent distinct count; |A|+1 on the {distinct_states} with all-distinct children"
    ));
    Outcome { id: 8, title: "cost accounting in distinct oracle evaluations", pass, detail: notes.join("; ") }
}

fn metrics_suite() -> Outcome {
    let mut notes = Vec::new();
    let seq = |s: &str| s.parse::<Sequence>().unwrap();

    let a = KmerDistribution::from_sequences(3, [&seq("ACGTTGCAAC")]).unwrap();
    let same = jsd_k(&a, &a).unwrap();
    let disjoint = jsd_k(
        &KmerDistribution::from_sequences(3, [&seq("AAAAAA")]).unwrap(),
        &KmerDistribution::from_sequences(3, [&seq("CCCCCCC")]).unwrap(),
    )
    .unwrap();
    let jsd_ok = same == 0.0 && (disjoint - 2f64.ln()).abs() <= 1e-12;
    notes.push(format!("jsd identical {same:e}, disjoint - ln2 = {:.1e}", disjoint - 2f64.ln()));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut random_pwm = |len: usize| {
        Pwm::new(
            (0..len)
                .map(|_| {
                    let w: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
                    let z: f64 = w.iter().sum();
                    w.map(|p| p / z)
                })
                .collect(),
        )
        .unwrap()
    };
    let oracle = SpliceToyOracle {
        donor: random_pwm(6),
        donor_offset: 2,
        acceptor: random_pwm(5),
        acceptor_offset: 3,
        left_exon_len: 8,
        right_exon_len: 7,
    };
    let direct = |pwm: &Pwm, x: &Sequence, start: usize| -> f64 {
        let mut log_p = 0.0;
        let mut log_best = 0.0;
        for (i, row) in pwm.rows().iter().enumerate() {
            log_p += row[x.bases()[start + i].index()].ln();
            log_best += row.iter().copied().fold(0.0, f64::max).ln();
        }
        (log_p - log_best).exp()
    };
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(20..40);
        let x = Sequence::new((0..n).map(|_| Nucleotide::from_index(rng.random_range(0..4))).collect());
        let s = splice_sample(&x, &oracle).unwrap();
        let d = direct(&oracle.donor, &x, 8 - 2);
        let acc = direct(&oracle.acceptor, &x, n - 7 - 3);
        worst = worst
            .max((s.donor - d).abs())
            .max((s.acceptor - acc).abs())
            .max((s.geomean - (d * acc).sqrt()).abs())
            .max((s.min - d.min(acc)).abs());
    }
    let splice_ok = worst <= 1e-12;
    notes.push(format!("splice max |err| over 100 pairs {worst:.1e}"));

    let space = ActionSpace::new(LengthBounds::new(2, 30).unwrap());
    let oracle = CachedOracle::from_oracle(|_: &Sequence| 0.0);
    let mut ll_worst = 0.0f64;
    for seed in 0..20 {
        let rec = raw_rollout(Env::new(&UniformModel, &space, &oracle), &seq("ACGTACGTAC"), 40, seed).unwrap();
        let states = rec.states().unwrap();
        let expected =
            -states[..rec.steps.len()].iter().map(|x| (space.enumerate(x).len() as f64).ln()).sum::<f64>()
                / rec.steps.len() as f64;
        ll_worst = ll_worst.max((base_traj_ll(&rec, &UniformModel, &space).unwrap() - expected).abs());
    }
    let ll_ok = ll_worst <= 1e-12;
    notes.push(format!("uniform traj_ll max |err| {ll_worst:.1e}"));

    Outcome { id: 9, title: "metric unit suite", pass: jsd_ok && splice_ok && ll_ok, detail: notes.join("; ") }
}

fn determinism() -> Outcome {
    let mut cfg = ExperimentConfig::from_path(&configs_dir().join("compare.toml")).expect("compare.toml");
    cfg.run.samples = 6;
    let write = |cfg: &ExperimentConfig| {
        let dir = tempfile::tempdir().unwrap();
        write_outputs(cfg, &execute(cfg).unwrap(), dir.path()).unwrap();
        dir
    };
    let first = write(&cfg);
    let second = write(&cfg);
    cfg.run.workers = 3;
    let threaded = write(&cfg);
    let mut files = 0;
    let mut identical = true;
    for m in &cfg.methods {
        let name = format!("{}.jsonl", m.name);
        let a = std::fs::read(first.path().join(&name)).unwrap();
        identical &= a == std::fs::read(second.path().join(&name)).unwrap();
        identical &= a == std::fs::read(threaded.path().join(&name)).unwrap();
        files += 1;
    }
    Outcome {
        id: 10,
        title: "repeated runs write byte-identical JSONL",
        pass: identical,
        detail: format!("{files} method files compared across two repeats and a 3-worker run"),
    }
}

fn main() -> ExitCode {
    let mut outcomes = identities();
    outcomes.push(benchmark());
    outcomes.push(cost_accounting());
    outcomes.push(metrics_suite());
    outcomes.push(determinism());
    outcomes.sort_by_key(|o| o.id);
    for o in &outcomes {
        println!("{} criterion {:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.title, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
