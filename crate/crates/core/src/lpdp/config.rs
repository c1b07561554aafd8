use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Which local continuation edits enter the lookahead graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateRule {
    /// Top-`k_loc` of the neighborhood by base probability, all kinds together.
    #[default]
    Mixed,
    /// Same-kind members of the mixed shortlist (falls back to the shortlist).
    StAfter,
    /// Top-`k_loc` among same-kind neighborhood members (falls back to mixed).
    StFirst,
}

impl CandidateRule {
    pub const ALL: [CandidateRule; 3] = [CandidateRule::Mixed, CandidateRule::StAfter, CandidateRule::StFirst];

    pub fn as_str(self) -> &'static str {
        match self {
            CandidateRule::Mixed => "mixed",
            CandidateRule::StAfter => "st_after",
            CandidateRule::StFirst => "st_first",
        }
    }
}

impl fmt::Display for CandidateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CandidateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(CandidateRule::Mixed),
            "st_after" | "after" => Ok(CandidateRule::StAfter),
            "st_first" | "first" => Ok(CandidateRule::StFirst),
            other => Err(Error::Config(format!("unknown candidate rule {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backup {
    /// Best single continuation.
    #[default]
    Max,
    /// Soft log-partition at temperature `tau`.
    Lse,
}

impl Backup {
    pub const ALL: [Backup; 2] = [Backup::Max, Backup::Lse];

    pub fn as_str(self) -> &'static str {
        match self {
            Backup::Max => "max",
            Backup::Lse => "lse",
        }
    }
}

impl fmt::Display for Backup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Backup::Max),
            "lse" => Ok(Backup::Lse),
            other => Err(Error::Config(format!("unknown backup {other:?}"))),
        }
    }
}

/// Rollout steps where guidance replaces base sampling.
///
/// Text forms: `first:N`, `last:N`, `mid:N`, `all`, `none`, or a
/// comma-separated index list such as `0,3,7`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WindowSpec {
    First(usize),
    Last(usize),
    Mid(usize),
    All,
    Explicit(BTreeSet<usize>),
}

impl WindowSpec {
    pub fn none() -> WindowSpec {
        WindowSpec::Explicit(BTreeSet::new())
    }

    /// Resolves to concrete step indices in `[0, total_steps)`.
    pub fn resolve(&self, total_steps: usize) -> Result<BTreeSet<usize>> {
        let too_long = |n: usize| {
            if n > total_steps {
                Err(Error::Config(format!("window of {n} steps exceeds schedule of {total_steps}")))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            WindowSpec::First(n) => {
                too_long(*n)?;
                (0..*n).collect()
            }
            WindowSpec::Last(n) => {
                too_long(*n)?;
                (total_steps - n..total_steps).collect()
            }
            WindowSpec::Mid(n) => {
                too_long(*n)?;
                let start = (total_steps - n) / 2;
                (start..start + n).collect()
            }
            WindowSpec::All => (0..total_steps).collect(),
            WindowSpec::Explicit(set) => {
                if let Some(&bad) = set.iter().find(|&&i| i >= total_steps) {
                    return Err(Error::Config(format!("window step {bad} outside schedule of {total_steps}")));
                }
                set.clone()
            }
        })
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec::First(16)
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowSpec::First(n) => write!(f, "first:{n}"),
            WindowSpec::Last(n) => write!(f, "last:{n}"),
            WindowSpec::Mid(n) => write!(f, "mid:{n}"),
            WindowSpec::All => write!(f, "all"),
            WindowSpec::Explicit(set) if set.is_empty() => write!(f, "none"),
            WindowSpec::Explicit(set) => {
                let parts: Vec<String> = set.iter().map(|i| i.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

impl FromStr for WindowSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse window {s:?}"));
        let s = s.trim();
        match s {
            "all" => return Ok(WindowSpec::All),
            "none" | "" => return Ok(WindowSpec::none()),
            _ => {}
        }
        if let Some((pos, n)) = s.split_once(':') {
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            return match pos.trim() {
                "first" | "early" => Ok(WindowSpec::First(n)),
                "last" | "late" => Ok(WindowSpec::Last(n)),
                "mid" | "middle" => Ok(WindowSpec::Mid(n)),
                _ => Err(bad()),
            };
        }
        s.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<BTreeSet<_>>>()
            .map(WindowSpec::Explicit)
    }
}

impl Serialize for WindowSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WindowSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Every LPDP scalar plus the candidate rule, backup and guidance window.
///
/// `Default` gives the enhancer operating point: `β = 20`, `δ = 2`,
/// `K_root = 16`, `H = 2`, `r = 1`, `K_loc = 8`, `τ = 1`, `γ = 1`,
/// `λ = 0.5`, guidance on the first 16 steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    pub beta: f64,
    pub delta: f64,
    pub k_root: usize,
    pub radius: usize,
    pub k_loc: usize,
    pub horizon: usize,
    pub lambda: f64,
    pub tau: f64,
    pub gamma: f64,
    pub rule: CandidateRule,
    pub backup: Backup,
    pub window: WindowSpec,
    /// Score and rank depth-`i` continuations at step `t + i` instead of `t`.
    pub advance_local_time: bool,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        GuidanceConfig {
            beta: 20.0,
            delta: 2.0,
            k_root: 16,
            radius: 1,
            k_loc: 8,
            horizon: 2,
            lambda: 0.5,
            tau: 1.0,
            gamma: 1.0,
            rule: CandidateRule::Mixed,
            backup: Backup::Max,
            window: WindowSpec::default(),
            advance_local_time: false,
        }
    }
}

impl GuidanceConfig {
    /// No band, radius or cap truncation anywhere: the full edit graph.
    pub fn unrestricted(self) -> GuidanceConfig {
        GuidanceConfig { delta: f64::INFINITY, k_root: usize::MAX, radius: usize::MAX, k_loc: usize::MAX, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.beta > 0.0) || self.beta.is_infinite() {
            return fail("beta must be finite and > 0");
        }
        if !(self.delta >= 0.0) {
            return fail("delta must be >= 0");
        }
        if self.k_root == 0 || self.k_loc == 0 {
            return fail("k_root and k_loc must be >= 1");
        }
        if self.horizon == 0 {
            return fail("horizon must be >= 1");
        }
        if !(self.lambda >= 0.0) || self.lambda.is_infinite() {
            return fail("lambda must be finite and >= 0");
        }
        if !(self.tau > 0.0) || self.tau.is_infinite() {
            return fail("tau must be finite and > 0");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate) but allows `beta = 0`, which only
    /// makes sense for reward-free checks.
    pub(crate) fn validate_allow_zero_beta(&self) -> Result<()> {
        if self.beta == 0.0 {
            GuidanceConfig { beta: 1.0, ..self.clone() }.validate()
        } else {
            self.validate()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_forms() {
        assert_eq!(WindowSpec::First(16).resolve(256).unwrap(), (0..16).collect());
        assert_eq!(WindowSpec::Last(16).resolve(256).unwrap(), (240..256).collect());
        assert_eq!(WindowSpec::Mid(16).resolve(256).unwrap(), (120..136).collect());
        assert!(WindowSpec::First(300).resolve(256).is_err());
        assert!("3,300".parse::<WindowSpec>().unwrap().resolve(256).is_err());
        for text in ["first:8", "last:16", "mid:4", "all", "none", "0,3,7"] {
            let w: WindowSpec = text.parse().unwrap();
            assert_eq!(w.to_string(), text);
        }
        assert!("sideways:3".parse::<WindowSpec>().is_err());
        assert!("first:x".parse::<WindowSpec>().is_err());
    }

    #[test]
    fn defaults_and_validation() {
        let c = GuidanceConfig::default();
        c.validate().unwrap();
        assert_eq!((c.beta, c.delta, c.k_root, c.horizon, c.radius, c.k_loc), (20.0, 2.0, 16, 2, 1, 8));
        assert_eq!((c.tau, c.gamma, c.lambda), (1.0, 1.0, 0.5));
        assert!(GuidanceConfig { tau: 0.0, ..c.clone() }.validate().is_err());
        assert!(GuidanceConfig { gamma: 1.5, ..c.clone() }.validate().is_err());
        assert!(GuidanceConfig { k_loc: 0, ..c.clone() }.validate().is_err());
        assert!(GuidanceConfig { beta: 0.0, ..c.clone() }.validate().is_err());
        assert!(GuidanceConfig { beta: 0.0, ..c.clone() }.validate_allow_zero_beta().is_ok());
        c.unrestricted().validate().unwrap();
    }
}
