//! Experiment files.
//!
//! An experiment is one TOML document with a `[task]` table (model, oracle,
//! length bounds and start sequences), an optional `[run]` table and any
//! number of `[[method]]` blocks. Errors carry the path of the offending
//! field.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use lpdp::baselines::{BeamConfig, CemConfig, SmcConfig, TdsConfig};
use lpdp::lpdp::WindowSpec;
use lpdp::oracle::{MotifCountOracle, Pwm, PwmMode, PwmOracle, SpliceToyOracle};
use lpdp::proposal::{DriftModel, DriftModelParams, UniformModel};
use lpdp::{ActionSpace, GuidanceConfig, LengthBounds, Nucleotide, ProposalModel, RewardOracle, Sequence};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        BoundsSpec { min_len: 1, max_len: 512 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Uniform,
    Drift(DriftModelParams),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Uniform => "uniform",
            ModelSpec::Drift(_) => "drift",
        }
    }
}

/// A PWM given by file, consensus string or literal rows. Exactly one is set.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PwmSource {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub consensus: Option<Sequence>,
    #[serde(default)]
    pub rows: Option<Vec<[f64; 4]>>,
}

impl PwmSource {
    fn load(&self, base_dir: &Path) -> Result<Pwm> {
        match (&self.path, &self.consensus, &self.rows) {
            (Some(p), None, None) => {
                let full = base_dir.join(p);
                Ok(Pwm::from_path(&full).with_context(|| format!("loading PWM {}", full.display()))?)
            }
            (None, Some(c), None) => Ok(Pwm::one_hot(c)?),
            (None, None, Some(rows)) => Ok(Pwm::new(rows.clone())?),
            _ => bail!("a PWM needs exactly one of `path`, `consensus` or `rows`"),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PwmOracleSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub consensus: Option<Sequence>,
    #[serde(default)]
    pub rows: Option<Vec<[f64; 4]>>,
    #[serde(default)]
    pub mode: PwmMode,
}

impl PwmOracleSpec {
    pub fn source(&self) -> PwmSource {
        PwmSource { path: self.path.clone(), consensus: self.consensus.clone(), rows: self.rows.clone() }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpliceOracleSpec {
    pub donor: PwmSource,
    #[serde(default)]
    pub donor_offset: usize,
    pub acceptor: PwmSource,
    #[serde(default)]
    pub acceptor_offset: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    Motif { motif: Sequence },
    Pwm(PwmOracleSpec),
    Splice(SpliceOracleSpec),
}

impl OracleSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OracleSpec::Motif { .. } => "motif",
            OracleSpec::Pwm(_) => "pwm",
            OracleSpec::Splice(_) => "splice",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    Literal {
        sequence: Sequence,
    },
    /// Uniform random bases, drawn per sample.
    Random {
        length: usize,
    },
    /// Fixed flanks around an editable middle, given literally or drawn at
    /// random per sample.
    Inpaint {
        left: Sequence,
        right: Sequence,
        #[serde(default)]
        middle: Option<Sequence>,
        #[serde(default)]
        middle_length: Option<usize>,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    #[serde(default)]
    pub bounds: BoundsSpec,
    pub model: ModelSpec,
    pub oracle: OracleSpec,
    pub init: InitSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    /// Every sample starts from an empty cache.
    #[default]
    Fresh,
    /// One cache per method, shared by its samples in index order.
    Shared,
}

impl CacheMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CacheMode::Fresh => "fresh",
            CacheMode::Shared => "shared",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub samples: usize,
    pub total_steps: usize,
    /// Guidance window for method blocks that do not set their own.
    pub window: WindowSpec,
    pub seed: u64,
    pub cache: CacheMode,
    pub workers: usize,
    pub out: PathBuf,
    /// Optional file of reference sequences for the k-mer divergence, one
    /// per line. Without it the raw base samples of the same run are used.
    pub reference: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            samples: 100,
            total_steps: 256,
            window: WindowSpec::default(),
            seed: 0,
            cache: CacheMode::Fresh,
            workers: 1,
            out: PathBuf::from("runs/latest"),
            reference: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodSpec {
    Lpdp(GuidanceConfig),
    Raw,
    Beam(BeamConfig),
    Cem(CemConfig),
    Smc(SmcConfig),
    Tds(TdsConfig),
}

impl MethodSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MethodSpec::Lpdp(_) => "lpdp",
            MethodSpec::Raw => "raw",
            MethodSpec::Beam(_) => "beam",
            MethodSpec::Cem(_) => "cem",
            MethodSpec::Smc(_) => "smc",
            MethodSpec::Tds(_) => "tds",
        }
    }

    pub fn window(&self) -> Option<&WindowSpec> {
        match self {
            MethodSpec::Lpdp(c) => Some(&c.window),
            MethodSpec::Raw => None,
            MethodSpec::Beam(c) => Some(&c.window),
            MethodSpec::Cem(c) => Some(&c.window),
            MethodSpec::Smc(c) => Some(&c.window),
            MethodSpec::Tds(c) => Some(&c.window),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodBlock {
    pub name: String,
    #[serde(flatten)]
    pub spec: MethodSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    task: TaskConfig,
    #[serde(default)]
    run: RunConfig,
    #[serde(default, rename = "method")]
    methods: Vec<toml::Table>,
}

/// A parsed and checked experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub run: RunConfig,
    pub methods: Vec<MethodBlock>,
    /// Directory that relative paths resolve against.
    pub base_dir: PathBuf,
    /// The source text, hashed into run manifests.
    pub source: String,
}

fn with_path<T: DeserializeOwned>(table: toml::Table, what: &str) -> Result<T> {
    serde_path_to_error::deserialize(table).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("{what}.{path}: {}", e.into_inner())
    })
}

fn parse_method(index: usize, mut table: toml::Table, default_window: &WindowSpec) -> Result<MethodBlock> {
    let at = format!("method[{index}]");
    let kind = match table.remove("kind") {
        Some(toml::Value::String(k)) => k,
        Some(_) => bail!("{at}.kind: expected a string"),
        None => bail!("{at}: missing `kind`"),
    };
    let name = match table.remove("name") {
        Some(toml::Value::String(n)) => Some(n),
        Some(_) => bail!("{at}.name: expected a string"),
        None => None,
    };
    if kind != "raw" && !table.contains_key("window") {
        table.insert("window".into(), toml::Value::String(default_window.to_string()));
    }
    let spec = match kind.as_str() {
        "lpdp" => {
            let c: GuidanceConfig = with_path(table, &at)?;
            c.validate().with_context(|| at.clone())?;
            MethodSpec::Lpdp(c)
        }
        "raw" => {
            if let Some(key) = table.keys().next() {
                bail!("{at}.{key}: raw sampling takes no parameters");
            }
            MethodSpec::Raw
        }
        "beam" => {
            let c: BeamConfig = with_path(table, &at)?;
            c.validate().with_context(|| at.clone())?;
            MethodSpec::Beam(c)
        }
        "cem" => {
            let c: CemConfig = with_path(table, &at)?;
            c.validate().with_context(|| at.clone())?;
            MethodSpec::Cem(c)
        }
        "smc" => {
            let c: SmcConfig = with_path(table, &at)?;
            c.validate().with_context(|| at.clone())?;
            MethodSpec::Smc(c)
        }
        "tds" => {
            let c: TdsConfig = with_path(table, &at)?;
            c.validate().with_context(|| at.clone())?;
            MethodSpec::Tds(c)
        }
        other => bail!("{at}.kind: unknown method kind {other:?} (expected lpdp, raw, beam, cem, smc or tds)"),
    };
    let name = name.unwrap_or_else(|| match &spec {
        MethodSpec::Lpdp(c) => format!("lpdp-{}-{}", c.rule.as_str().replace('_', "-"), c.backup),
        other => other.kind().to_string(),
    });
    Ok(MethodBlock { name, spec })
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        ExperimentConfig::parse(&text, &base).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
        let de = toml::Deserializer::parse(text)?;
        let raw: RawExperiment = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow!("{path}: {}", e.into_inner())
        })?;
        let methods = raw
            .methods
            .into_iter()
            .enumerate()
            .map(|(i, t)| parse_method(i, t, &raw.run.window))
            .collect::<Result<Vec<_>>>()?;
        let cfg = ExperimentConfig {
            task: raw.task,
            run: raw.run,
            methods,
            base_dir: base_dir.to_path_buf(),
            source: text.to_string(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if self.methods.is_empty() {
            bail!("no [[method]] blocks");
        }
        if self.run.samples == 0 || self.run.total_steps == 0 {
            bail!("run.samples and run.total_steps must be >= 1");
        }
        if self.run.workers == 0 {
            bail!("run.workers must be >= 1");
        }
        let mut names = BTreeSet::new();
        for m in &self.methods {
            if !m.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) || m.name.is_empty() {
                bail!("method name {:?} may only use letters, digits, '-', '_' and '.'", m.name);
            }
            if !names.insert(m.name.clone()) {
                bail!("duplicate method name {:?}", m.name);
            }
            if let Some(w) = m.spec.window() {
                w.resolve(self.run.total_steps)
                    .with_context(|| format!("method {:?}: window does not fit run.total_steps", m.name))?;
            }
        }
        Task::build(self)?;
        Ok(())
    }
}

/// The frozen pieces of an experiment, ready to roll out.
pub struct Task {
    pub model: Box<dyn ProposalModel>,
    pub space: ActionSpace,
    pub oracle: Arc<dyn RewardOracle>,
    pub splice: Option<SpliceToyOracle>,
    init: InitSpec,
}

impl Task {
    pub fn build(cfg: &ExperimentConfig) -> Result<Task> {
        let t = &cfg.task;
        let bounds = LengthBounds::new(t.bounds.min_len, t.bounds.max_len).context("task.bounds")?;
        let model: Box<dyn ProposalModel> = match &t.model {
            ModelSpec::Uniform => Box::new(UniformModel),
            ModelSpec::Drift(p) => Box::new(DriftModel::new(*p).context("task.model")?),
        };
        let (left, right) = match &t.init {
            InitSpec::Inpaint { left, right, .. } => (left.len(), right.len()),
            _ => (0, 0),
        };
        let space = ActionSpace::with_flanks(bounds, left, right);
        let mut splice = None;
        let oracle: Arc<dyn RewardOracle> = match &t.oracle {
            OracleSpec::Motif { motif } => Arc::new(MotifCountOracle::new(motif.clone()).context("task.oracle")?),
            OracleSpec::Pwm(p) => {
                Arc::new(PwmOracle::new(p.source().load(&cfg.base_dir).context("task.oracle")?, p.mode))
            }
            OracleSpec::Splice(s) => {
                if !matches!(t.init, InitSpec::Inpaint { .. }) {
                    bail!("task.oracle: the splice oracle needs an inpaint init to place its junctions");
                }
                let o = SpliceToyOracle {
                    donor: s.donor.load(&cfg.base_dir).context("task.oracle.donor")?,
                    donor_offset: s.donor_offset,
                    acceptor: s.acceptor.load(&cfg.base_dir).context("task.oracle.acceptor")?,
                    acceptor_offset: s.acceptor_offset,
                    left_exon_len: left,
                    right_exon_len: right,
                };
                splice = Some(o.clone());
                Arc::new(o)
            }
        };
        let task = Task { model, space, oracle, splice, init: t.init.clone() };
        let probe = task.initial(cfg.run.seed).context("task.init")?;
        if let Some(s) = &task.splice {
            s.junction_scores(&probe).context("task.oracle: junction windows do not fit the initial sequence")?;
        }
        Ok(task)
    }

    /// The start sequence for a sample with seed `seed`.
    pub fn initial(&self, seed: u64) -> Result<Sequence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1A17_5EED);
        let mut random = |n: usize| -> Sequence {
            Sequence::new((0..n).map(|_| Nucleotide::from_index(rng.random_range(0..4))).collect())
        };
        let x = match &self.init {
            InitSpec::Literal { sequence } => sequence.clone(),
            InitSpec::Random { length } => random(*length),
            InitSpec::Inpaint { left, right, middle, middle_length } => {
                let mid = match (middle, middle_length) {
                    (Some(m), None) => m.clone(),
                    (None, Some(n)) => random(*n),
                    _ => bail!("inpaint init needs exactly one of `middle` or `middle_length`"),
                };
                let bases: Vec<Nucleotide> =
                    left.bases().iter().chain(mid.bases()).chain(right.bases()).copied().collect();
                Sequence::new(bases)
            }
        };
        self.space.check(&x)?;
        Ok(x)
    }
}
