//! Batch rollouts, per-sample records and the summary table.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lpdp::baselines::{beam_rollout, cem_rollout, raw_rollout, smc_rollout, tds_rollout};
use lpdp::metrics::{base_traj_ll, jsd_k, splice_sample, summarize_splice, KmerDistribution, SpliceSample};
use lpdp::{guided_rollout, CachedOracle, EditAction, Env, Sequence, TrajectoryRecord};

use crate::config::{CacheMode, ExperimentConfig, MethodBlock, MethodSpec, Task};

/// Seed for sample `index`, shared by every method of a run.
pub fn sample_seed(run_seed: u64, index: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(run_seed ^ mix(index as u64))
}

/// One generated sample, as written to the per-method JSONL file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub method: String,
    pub sample: usize,
    pub seed: u64,
    pub initial: Sequence,
    pub final_sequence: Sequence,
    pub length: usize,
    pub reward: f64,
    pub traj_ll: f64,
    /// Distinct oracle evaluations (cache misses) caused by this sample.
    pub calls: u64,
    pub cache_hits: u64,
    pub guided_steps: Vec<usize>,
    pub edits: Vec<EditAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splice: Option<SpliceSample>,
}

impl SampleRecord {
    /// The states at which guided decisions were made, with their step index.
    pub fn guided_states(&self) -> Result<Vec<(Sequence, usize)>> {
        let mut x = self.initial.clone();
        let mut out = Vec::new();
        let mut guided = self.guided_steps.iter().peekable();
        for (t, a) in self.edits.iter().enumerate() {
            if guided.peek() == Some(&&t) {
                out.push((x.clone(), t));
                guided.next();
            }
            x = x.apply(a)?;
        }
        if x != self.final_sequence {
            bail!("sample {} of {}: edits do not replay to the final sequence", self.sample, self.method);
        }
        Ok(out)
    }
}

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub kind: String,
    pub model: String,
    pub oracle: String,
    pub samples: usize,
    pub total_steps: usize,
    pub seed: u64,
    pub cache_mode: String,
    pub reward_mean: f64,
    pub reward_median: f64,
    pub reward_stderr: f64,
    pub jsd3: Option<f64>,
    pub jsd_log_base: String,
    pub traj_ll: f64,
    pub calls_per_sample: f64,
    pub length_mean: f64,
    pub splice_geomean: Option<f64>,
    pub splice_min: Option<f64>,
    pub splice_gt_rate: Option<f64>,
    pub splice_donor: Option<f64>,
    pub splice_acceptor: Option<f64>,
}

pub struct MethodOutput {
    pub block: MethodBlock,
    pub records: Vec<SampleRecord>,
    pub summary: SummaryRow,
}

pub struct RunOutput {
    pub methods: Vec<MethodOutput>,
    pub reference: String,
}

impl RunOutput {
    pub fn method(&self, name: &str) -> Option<&MethodOutput> {
        self.methods.iter().find(|m| m.block.name == name)
    }
}

fn rollout(env: Env<'_>, spec: &MethodSpec, x0: &Sequence, steps: usize, seed: u64) -> lpdp::Result<TrajectoryRecord> {
    match spec {
        MethodSpec::Lpdp(c) => guided_rollout(env, c, x0, steps, seed),
        MethodSpec::Raw => raw_rollout(env, x0, steps, seed),
        MethodSpec::Beam(c) => beam_rollout(env, x0, steps, c, seed),
        MethodSpec::Cem(c) => cem_rollout(env, x0, steps, c, seed),
        MethodSpec::Smc(c) => smc_rollout(env, x0, steps, c, seed),
        MethodSpec::Tds(c) => tds_rollout(env, x0, steps, c, seed),
    }
}

fn run_sample(
    cfg: &ExperimentConfig,
    task: &Task,
    block: &MethodBlock,
    oracle: &CachedOracle,
    index: usize,
) -> Result<SampleRecord> {
    let seed = sample_seed(cfg.run.seed, index);
    let x0 = task.initial(seed)?;
    let env = Env::new(task.model.as_ref(), &task.space, oracle);
    let rec = rollout(env, &block.spec, &x0, cfg.run.total_steps, seed)
        .with_context(|| format!("method {} sample {index}", block.name))?;
    let splice = match &task.splice {
        Some(s) => Some(splice_sample(&rec.final_sequence, s).unwrap_or(SpliceSample::from_scores(0.0, 0.0, false))),
        None => None,
    };
    Ok(SampleRecord {
        method: block.name.clone(),
        sample: index,
        seed,
        reward: task.oracle.reward(&rec.final_sequence),
        traj_ll: base_traj_ll(&rec, task.model.as_ref(), &task.space)?,
        calls: rec.cache.misses,
        cache_hits: rec.cache.hits,
        guided_steps: rec.steps.iter().filter(|s| s.guided).map(|s| s.t).collect(),
        edits: rec.steps.iter().map(|s| s.action).collect(),
        length: rec.final_sequence.len(),
        initial: rec.initial,
        final_sequence: rec.final_sequence,
        log_weight: rec.log_weight,
        splice,
    })
}

fn run_method(cfg: &ExperimentConfig, task: &Task, block: &MethodBlock, pool: &rayon::ThreadPool) -> Result<Vec<SampleRecord>> {
    let n = cfg.run.samples;
    match cfg.run.cache {
        CacheMode::Fresh => pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| run_sample(cfg, task, block, &CachedOracle::new(task.oracle.clone()), i))
                .collect()
        }),
        CacheMode::Shared => {
            let shared = CachedOracle::new(task.oracle.clone());
            (0..n).map(|i| run_sample(cfg, task, block, &shared, i)).collect()
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Standard error of the mean with the `n − 1` variance; zero for one sample.
pub fn stderr(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn summarize(cfg: &ExperimentConfig, block: &MethodBlock, records: &[SampleRecord], reference: Option<&KmerDistribution>) -> Result<SummaryRow> {
    let rewards: Vec<f64> = records.iter().map(|r| r.reward).collect();
    let generated = KmerDistribution::from_sequences(3, records.iter().map(|r| &r.final_sequence))?;
    let jsd3 = match reference {
        Some(r) if r.total() > 0 && generated.total() > 0 => Some(jsd_k(&generated, r)?),
        _ => None,
    };
    let splice: Vec<SpliceSample> = records.iter().filter_map(|r| r.splice).collect();
    let sp = if splice.is_empty() { None } else { Some(summarize_splice(&splice)?) };
    Ok(SummaryRow {
        method: block.name.clone(),
        kind: block.spec.kind().to_string(),
        model: cfg.task.model.name().to_string(),
        oracle: cfg.task.oracle.name().to_string(),
        samples: records.len(),
        total_steps: cfg.run.total_steps,
        seed: cfg.run.seed,
        cache_mode: cfg.run.cache.as_str().to_string(),
        reward_mean: mean(&rewards),
        reward_median: median(&rewards),
        reward_stderr: stderr(&rewards),
        jsd3,
        jsd_log_base: "e".to_string(),
        traj_ll: mean(&records.iter().map(|r| r.traj_ll).collect::<Vec<_>>()),
        calls_per_sample: mean(&records.iter().map(|r| r.calls as f64).collect::<Vec<_>>()),
        length_mean: mean(&records.iter().map(|r| r.length as f64).collect::<Vec<_>>()),
        splice_geomean: sp.map(|s| s.geomean),
        splice_min: sp.map(|s| s.min),
        splice_gt_rate: sp.map(|s| s.gt_rate),
        splice_donor: sp.map(|s| s.donor_mean),
        splice_acceptor: sp.map(|s| s.acceptor_mean),
    })
}

/// Reads reference sequences, one per line. Blank lines and lines starting
/// with `>` or `#` are skipped.
pub fn read_reference(path: &Path) -> Result<Vec<Sequence>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading reference {}", path.display()))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('>') && !l.starts_with('#'))
        .map(|l| l.parse::<Sequence>().with_context(|| format!("reference line {l:?}")))
        .collect()
}

fn reference_kmers(cfg: &ExperimentConfig, task: &Task, pool: &rayon::ThreadPool) -> Result<(KmerDistribution, String)> {
    if let Some(path) = &cfg.run.reference {
        let full = cfg.base_dir.join(path);
        let seqs = read_reference(&full)?;
        return Ok((KmerDistribution::from_sequences(3, &seqs)?, format!("file:{}", path.display())));
    }
    let raw = MethodBlock { name: "reference-raw".into(), spec: MethodSpec::Raw };
    let records = run_method(cfg, task, &raw, pool)?;
    Ok((KmerDistribution::from_sequences(3, records.iter().map(|r| &r.final_sequence))?, "raw-base".to_string()))
}

/// Runs every method block over `run.samples` seeded samples.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let task = Task::build(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.run.workers).build()?;
    let (reference, label) = reference_kmers(cfg, &task, &pool)?;
    let mut methods = Vec::with_capacity(cfg.methods.len());
    for block in &cfg.methods {
        let records = run_method(cfg, &task, block, &pool)?;
        let summary = summarize(cfg, block, &records, Some(&reference))?;
        methods.push(MethodOutput { block: block.clone(), records, summary });
    }
    Ok(RunOutput { methods, reference: label })
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    seed: u64,
    samples: usize,
    total_steps: usize,
    cache_mode: &'static str,
    jsd_reference: &'a str,
    methods: Vec<&'a str>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.source.as_bytes()))
}

pub fn write_summary(path: &Path, rows: &[&SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<method>.jsonl` per method, `summary.csv`, `manifest.json` and a
/// copy of the config into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for m in &out.methods {
        let path = dir.join(format!("{}.jsonl", m.block.name));
        let mut f = std::io::BufWriter::new(fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?);
        for r in &m.records {
            serde_json::to_writer(&mut f, r)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
    }
    write_summary(&dir.join("summary.csv"), &out.methods.iter().map(|m| &m.summary).collect::<Vec<_>>())?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: config_hash(cfg),
        seed: cfg.run.seed,
        samples: cfg.run.samples,
        total_steps: cfg.run.total_steps,
        cache_mode: cfg.run.cache.as_str(),
        jsd_reference: &out.reference,
        methods: out.methods.iter().map(|m| m.block.name.as_str()).collect(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    fs::write(dir.join("config.toml"), &cfg.source)?;
    Ok(())
}

/// Reads back the records of one method from a run directory.
pub fn read_records(dir: &Path, method: &str) -> Result<Vec<SampleRecord>> {
    let path = dir.join(format!("{method}.jsonl"));
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}
