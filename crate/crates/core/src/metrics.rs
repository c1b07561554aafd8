//! Distribution and cost metrics over generated samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpdp::TrajectoryRecord;
use crate::oracle::SpliceToyOracle;
use crate::proposal::{normalized_proposal, ProposalModel};
use crate::seq::{ActionSpace, Sequence};

/// Pooled overlapping k-mer counts, indexed by the base-4 value of the k-mer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KmerDistribution {
    k: usize,
    counts: Vec<u64>,
    total: u64,
}

impl KmerDistribution {
    pub fn new(k: usize) -> Result<KmerDistribution> {
        if k == 0 || k > 12 {
            return Err(Error::Config(format!("k-mer size {k} outside 1..=12")));
        }
        Ok(KmerDistribution { k, counts: vec![0; 1 << (2 * k)], total: 0 })
    }

    pub fn from_sequences<'a, I>(k: usize, sequences: I) -> Result<KmerDistribution>
    where
        I: IntoIterator<Item = &'a Sequence>,
    {
        let mut d = KmerDistribution::new(k)?;
        for s in sequences {
            d.add(s);
        }
        Ok(d)
    }

    /// Counts every overlapping window of `x`. Sequences shorter than `k` add nothing.
    pub fn add(&mut self, x: &Sequence) {
        let mask = self.counts.len() - 1;
        let mut code = 0usize;
        for (i, b) in x.bases().iter().enumerate() {
            code = ((code << 2) | b.index()) & mask;
            if i + 1 >= self.k {
                self.counts[code] += 1;
                self.total += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &KmerDistribution) -> Result<()> {
        if other.k != self.k {
            return Err(Error::KmerMismatch { left: self.k, right: other.k });
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, kmer: &Sequence) -> u64 {
        if kmer.len() != self.k {
            return 0;
        }
        let code = kmer.bases().iter().fold(0usize, |c, b| (c << 2) | b.index());
        self.counts[code]
    }

    pub fn probabilities(&self) -> Result<Vec<f64>> {
        if self.total == 0 {
            return Err(Error::EmptyDistribution);
        }
        let n = self.total as f64;
        Ok(self.counts.iter().map(|&c| c as f64 / n).collect())
    }
}

/// Natural-log Jensen-Shannon divergence of two probability vectors.
/// Cells where a distribution is zero contribute nothing to its KL term.
pub fn jsd(p: &[f64], q: &[f64]) -> f64 {
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let mi = 0.5 * (pi + qi);
        if pi > 0.0 {
            kl_p += pi * (pi / mi).ln();
        }
        if qi > 0.0 {
            kl_q += qi * (qi / mi).ln();
        }
    }
    0.5 * kl_p + 0.5 * kl_q
}

/// JSD between two k-mer distributions, in nats (at most `ln 2`).
pub fn jsd_k(generated: &KmerDistribution, reference: &KmerDistribution) -> Result<f64> {
    if generated.k != reference.k {
        return Err(Error::KmerMismatch { left: generated.k, right: reference.k });
    }
    Ok(jsd(&generated.probabilities()?, &reference.probabilities()?))
}

/// Mean base log-probability of the applied edits, recomputed by replaying
/// the trajectory under `model`.
pub fn base_traj_ll<M: ProposalModel + ?Sized>(
    traj: &TrajectoryRecord,
    model: &M,
    space: &ActionSpace,
) -> Result<f64> {
    if traj.steps.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut x = traj.initial.clone();
    let mut total = 0.0;
    for step in &traj.steps {
        let dist = normalized_proposal(model, space, &x, step.t)?;
        total += dist.log_prob(&step.action).ok_or(Error::InvalidAction { action: step.action, len: x.len() })?;
        x = x.apply(&step.action)?;
    }
    Ok(total / traj.steps.len() as f64)
}

/// Per-sample splice quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpliceSample {
    pub donor: f64,
    pub acceptor: f64,
    pub geomean: f64,
    pub min: f64,
    pub donor_gt: bool,
}

impl SpliceSample {
    pub fn from_scores(donor: f64, acceptor: f64, donor_gt: bool) -> SpliceSample {
        SpliceSample { donor, acceptor, geomean: (donor * acceptor).sqrt(), min: donor.min(acceptor), donor_gt }
    }
}

/// Means over samples of the splice quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpliceSummary {
    pub geomean: f64,
    pub min: f64,
    pub gt_rate: f64,
    pub donor_mean: f64,
    pub acceptor_mean: f64,
    pub n: usize,
}

pub fn splice_sample(x: &Sequence, oracle: &SpliceToyOracle) -> Result<SpliceSample> {
    let (d, a) = oracle.junction_scores(x)?;
    Ok(SpliceSample::from_scores(d, a, oracle.donor_gt(x)))
}

pub fn summarize_splice(samples: &[SpliceSample]) -> Result<SpliceSummary> {
    if samples.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let n = samples.len() as f64;
    let mean = |f: fn(&SpliceSample) -> f64| samples.iter().map(f).sum::<f64>() / n;
    Ok(SpliceSummary {
        geomean: mean(|s| s.geomean),
        min: mean(|s| s.min),
        gt_rate: mean(|s| if s.donor_gt { 1.0 } else { 0.0 }),
        donor_mean: mean(|s| s.donor),
        acceptor_mean: mean(|s| s.acceptor),
        n: samples.len(),
    })
}

pub fn splice_metrics(samples: &[Sequence], oracle: &SpliceToyOracle) -> Result<SpliceSummary> {
    let per: Vec<SpliceSample> = samples.iter().map(|x| splice_sample(x, oracle)).collect::<Result<_>>()?;
    summarize_splice(&per)
}

/// Mean cache misses per record. Zero for an empty slice.
pub fn calls_per_sample(records: &[TrajectoryRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.cache.misses as f64).sum::<f64>() / records.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpdp::{guided_rollout, Env, GuidanceConfig, WindowSpec};
    use crate::oracle::{CachedOracle, Pwm};
    use crate::proposal::UniformModel;
    use crate::seq::LengthBounds;

    fn seqs(v: &[&str]) -> Vec<Sequence> {
        v.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn kmer_counts_overlap_and_pool() {
        let d = KmerDistribution::from_sequences(3, &seqs(&["AAAA", "ACGTA", "AC"])).unwrap();
        assert_eq!(d.total(), 2 + 3);
        assert_eq!(d.count(&"AAA".parse().unwrap()), 2);
        assert_eq!(d.count(&"CGT".parse().unwrap()), 1);
        let p = d.probabilities().unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(KmerDistribution::new(3).unwrap().probabilities(), Err(Error::EmptyDistribution));
    }

    #[test]
    fn jsd_reference_values() {
        let a = KmerDistribution::from_sequences(3, &seqs(&["AAAAA"])).unwrap();
        let b = KmerDistribution::from_sequences(3, &seqs(&["CCCCC"])).unwrap();
        assert_eq!(jsd_k(&a, &a).unwrap(), 0.0);
        assert!((jsd_k(&a, &b).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(jsd_k(&a, &KmerDistribution::new(2).unwrap()).is_err());

        // P = (1, 0), Q = (1/2, 1/2), M = (3/4, 1/4)
        let direct = 0.5 * (1.0f64 * (1.0f64 / 0.75).ln())
            + 0.5 * (0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln());
        assert!((jsd(&[1.0, 0.0], &[0.5, 0.5]) - direct).abs() < 1e-15);
    }

    #[test]
    fn splice_algebra() {
        let s = SpliceSample::from_scores(0.9, 0.4, true);
        assert!((s.geomean - 0.6).abs() < 1e-12);
        assert_eq!(s.min, 0.4);
        let one = SpliceSample::from_scores(1.0, 1.0, true);
        let sum = summarize_splice(&[one, one]).unwrap();
        assert_eq!((sum.geomean, sum.min, sum.gt_rate), (1.0, 1.0, 1.0));
    }

    #[test]
    fn splice_metrics_on_consensus() {
        let oracle = SpliceToyOracle {
            donor: Pwm::one_hot(&"GTAAGT".parse().unwrap()).unwrap(),
            donor_offset: 0,
            acceptor: Pwm::one_hot(&"TTCAGG".parse().unwrap()).unwrap(),
            acceptor_offset: 5,
            left_exon_len: 3,
            right_exon_len: 1,
        };
        let x: Sequence = "CCCGTAAGTCCTTCAGG".parse().unwrap();
        let m = splice_metrics(&[x], &oracle).unwrap();
        assert!((m.geomean - 1.0).abs() < 1e-12);
        assert_eq!(m.gt_rate, 1.0);
    }

    #[test]
    fn uniform_traj_ll_is_mean_log_inverse_action_count() {
        let space = ActionSpace::new(LengthBounds::new(1, 12).unwrap());
        let oracle = CachedOracle::from_oracle(|_: &Sequence| 0.0);
        let cfg = GuidanceConfig { window: WindowSpec::none(), ..Default::default() };
        let traj = guided_rollout(Env::new(&UniformModel, &space, &oracle), &cfg, &"ACG".parse().unwrap(), 20, 3).unwrap();
        let states = traj.states().unwrap();
        let expected = -states[..20].iter().map(|x| (space.enumerate(x).len() as f64).ln()).sum::<f64>() / 20.0;
        assert!((base_traj_ll(&traj, &UniformModel, &space).unwrap() - expected).abs() < 1e-12);
        assert_eq!(calls_per_sample(&[traj]), 0.0);
    }
}
