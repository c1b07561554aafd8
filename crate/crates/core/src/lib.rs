//! Local Perturbation Discrete Programming over DNA edit actions.
//!
//! A frozen base proposal `p0(a | x, t)` over substitution, insertion and
//! deletion edits is steered at inference time by a reward oracle. At each
//! guided step the [`lpdp::Planner`] keeps a narrow band of good root edits
//! and re-ranks them with a short lookahead around the edited site.
//!
//! ```
//! use lpdp::lpdp::{lpdp_step, Env, GuidanceConfig};
//! use lpdp::oracle::{CachedOracle, MotifCountOracle};
//! use lpdp::proposal::UniformModel;
//! use lpdp::seq::{ActionSpace, LengthBounds, Sequence};
//!
//! let space = ActionSpace::new(LengthBounds::new(1, 16).unwrap());
//! let oracle = CachedOracle::from_oracle(MotifCountOracle::new("GT".parse().unwrap()).unwrap());
//! let x: Sequence = "AGCA".parse().unwrap();
//! let out = lpdp_step(Env::new(&UniformModel, &space, &oracle), &GuidanceConfig::default(), &x, 0).unwrap();
//! assert!(x.apply(&out.action).unwrap().to_string().contains("GT"));
//! ```

pub mod baselines;
pub mod diagnostics;
pub mod error;
pub mod exactdp;
pub mod lpdp;
pub mod math;
pub mod metrics;
pub mod oracle;
pub mod proposal;
pub mod seq;
pub mod synthetic;

pub use error::{Error, Result};
pub use lpdp::{guided_rollout, lpdp_step, Env, GuidanceConfig, Planner, TrajectoryRecord};
pub use oracle::{CachedOracle, RewardOracle};
pub use proposal::ProposalModel;
pub use seq::{ActionSpace, EditAction, EditKind, LengthBounds, Nucleotide, Sequence};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/planner.md")]
    mod planner {}
    #[doc = include_str!("../../../book/src/candidate-rules.md")]
    mod candidate_rules {}
    #[doc = include_str!("../../../book/src/backups.md")]
    mod backups {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
