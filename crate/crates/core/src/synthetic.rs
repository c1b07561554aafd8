//! Hash-seeded models and oracles with generic (tie-free) values.
//!
//! These exist for randomized property checks: every `(x, a, t)` gets an
//! unrelated pseudo-random rate and every sequence an unrelated reward, so
//! brute-force identities are exercised away from degenerate ties.

use crate::oracle::RewardOracle;
use crate::proposal::ProposalModel;
use crate::seq::{EditAction, Sequence};

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_sequence(seed: u64, x: &Sequence) -> u64 {
    x.bases().iter().fold(mix(seed ^ x.len() as u64), |h, b| mix(h ^ (b.index() as u64 + 1)))
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Log-rates uniform in `[-spread, spread]`, keyed on `(seed, x, a)` and,
/// when `time_dependent`, on `t` as well.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HashedModel {
    pub seed: u64,
    pub spread: f64,
    pub time_dependent: bool,
}

impl HashedModel {
    pub fn new(seed: u64, spread: f64) -> HashedModel {
        HashedModel { seed, spread, time_dependent: false }
    }
}

impl ProposalModel for HashedModel {
    fn log_rate(&self, x: &Sequence, a: &EditAction, t: usize) -> f64 {
        let mut h = hash_sequence(self.seed, x);
        h = mix(h ^ a.site() as u64);
        h = mix(h ^ (a.kind().index() as u64 + 11));
        h = mix(h ^ a.token().map_or(17, |v| v.index() as u64 + 23));
        if self.time_dependent {
            h = mix(h ^ t as u64);
        }
        self.spread * (2.0 * unit(h) - 1.0)
    }
}

/// Rewards uniform in `[0, scale)`, keyed on `(seed, x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HashedOracle {
    pub seed: u64,
    pub scale: f64,
}

impl RewardOracle for HashedOracle {
    fn reward(&self, x: &Sequence) -> f64 {
        self.scale * unit(hash_sequence(self.seed ^ 0xA5A5_5A5A, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::Nucleotide;

    #[test]
    fn deterministic_and_bounded() {
        let m = HashedModel::new(3, 2.0);
        let x: Sequence = "ACGT".parse().unwrap();
        let a = EditAction::ins(1, Nucleotide::G);
        assert_eq!(m.log_rate(&x, &a, 0), m.log_rate(&x, &a, 5));
        assert!(m.log_rate(&x, &a, 0).abs() <= 2.0);
        let timed = HashedModel { time_dependent: true, ..m };
        assert_ne!(timed.log_rate(&x, &a, 0), timed.log_rate(&x, &a, 5));

        let o = HashedOracle { seed: 1, scale: 1.0 };
        let y: Sequence = "ACGA".parse().unwrap();
        assert_eq!(o.reward(&x), o.reward(&x));
        assert_ne!(o.reward(&x), o.reward(&y));
        assert!((0.0..1.0).contains(&o.reward(&x)));
    }
}
