use lpdp::baselines::{beam_rollout, cem_rollout, raw_rollout, smc_rollout, tds_rollout, BeamConfig, CemConfig, SmcConfig, TdsConfig};
use lpdp::lpdp::{guided_rollout, Env, GuidanceConfig, WindowSpec};
use lpdp::metrics::{base_traj_ll, calls_per_sample, jsd_k, KmerDistribution};
use lpdp::oracle::{Pwm, PwmMode, PwmOracle};
use lpdp::proposal::{DriftModel, DriftModelParams};
use lpdp::{ActionSpace, CachedOracle, LengthBounds, Sequence, TrajectoryRecord};

type Runner<'a> = Box<dyn Fn(Env<'_>) -> TrajectoryRecord + 'a>;

fn setup() -> (DriftModel, ActionSpace, CachedOracle) {
    let model = DriftModel::new(DriftModelParams { target_length: 16, drift_gain: 2.0, ..Default::default() }).unwrap();
    let space = ActionSpace::new(LengthBounds::new(4, 32).unwrap());
    let pwm = Pwm::one_hot(&"TATAAA".parse().unwrap()).unwrap();
    let oracle = CachedOracle::from_oracle(PwmOracle::new(pwm, PwmMode::BestWindow));
    (model, space, oracle)
}

#[test]
fn every_method_replays_and_accounts_calls() {
    let (m, sp, o) = setup();
    let x0: Sequence = "ACGTACGTAC".parse().unwrap();
    let window = WindowSpec::First(3);
    let runs: Vec<(&str, Runner)> = vec![
        ("raw", Box::new(|env| raw_rollout(env, &x0, 12, 1).unwrap())),
        ("lpdp", Box::new(|env| {
            let cfg = GuidanceConfig { window: window.clone(), k_root: 4, k_loc: 3, ..Default::default() };
            guided_rollout(env, &cfg, &x0, 12, 1).unwrap()
        })),
        ("beam", Box::new(|env| beam_rollout(env, &x0, 12, &BeamConfig { width: 2, window: window.clone(), ..Default::default() }, 1).unwrap())),
        ("cem", Box::new(|env| cem_rollout(env, &x0, 12, &CemConfig { population: 8, elites: 2, rounds: 1, window: window.clone() }, 1).unwrap())),
        ("smc", Box::new(|env| smc_rollout(env, &x0, 12, &SmcConfig { particles: 6, window: window.clone(), ..Default::default() }, 1).unwrap())),
        ("tds", Box::new(|env| tds_rollout(env, &x0, 12, &TdsConfig { window: window.clone(), ..Default::default() }, 1).unwrap())),
    ];
    for (name, run) in &runs {
        let fresh = o.fresh();
        let rec = run(Env::new(&m, &sp, &fresh));
        assert_eq!(rec.steps.len(), 12, "{name}");
        assert_eq!(rec.states().unwrap().last(), Some(&rec.final_sequence), "{name}");
        assert_eq!(rec.cache, fresh.stats(), "{name}");
        assert_eq!(rec.cache.misses as usize, fresh.cached_len(), "{name}");
        assert!(base_traj_ll(&rec, &m, &sp).unwrap() < 0.0, "{name}");
        if *name == "raw" {
            assert_eq!(calls_per_sample(&[rec]), 0.0);
        } else {
            assert!(rec.cache.misses > 0, "{name}");
        }
    }
}

#[test]
fn guidance_raises_motif_reward_over_raw() {
    let (m, sp, o) = setup();
    let x0: Sequence = "ACGTACGTAC".parse().unwrap();
    let cfg = GuidanceConfig { window: WindowSpec::First(6), k_root: 8, k_loc: 4, ..Default::default() };
    let mut raw = 0.0;
    let mut guided = 0.0;
    let mut raw_seqs = Vec::new();
    let mut guided_seqs = Vec::new();
    for seed in 0..20 {
        let env = Env::new(&m, &sp, &o);
        let r = raw_rollout(env, &x0, 6, seed).unwrap();
        let g = guided_rollout(env, &cfg, &x0, 6, seed).unwrap();
        raw += o.inner().reward(&r.final_sequence);
        guided += o.inner().reward(&g.final_sequence);
        raw_seqs.push(r.final_sequence);
        guided_seqs.push(g.final_sequence);
    }
    assert!(guided > raw, "{guided} vs {raw}");
    let jsd = jsd_k(
        &KmerDistribution::from_sequences(3, &guided_seqs).unwrap(),
        &KmerDistribution::from_sequences(3, &raw_seqs).unwrap(),
    )
    .unwrap();
    assert!(jsd > 0.0 && jsd <= 2f64.ln());
}
