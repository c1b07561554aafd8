//! Frozen reward oracles and the miss-counting cache.
//!
//! Cost is measured in cache misses: the number of distinct sequences whose
//! reward was actually computed. Repeated queries are free.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{EditAction, Nucleotide, Sequence};

/// A deterministic reward `R: X -> R`, defined on every sequence.
pub trait RewardOracle: Send + Sync {
    fn reward(&self, x: &Sequence) -> f64;
}

impl<F> RewardOracle for F
where
    F: Fn(&Sequence) -> f64 + Send + Sync,
{
    fn reward(&self, x: &Sequence) -> f64 {
        self(x)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub misses: u64,
    pub hits: u64,
}

/// Memoizing wrapper that counts first evaluations (misses) and repeats (hits).
///
/// Safe to share between threads. Two threads racing on the same new
/// sequence may both compute it, but only the one that stores the value
/// records a miss; the other records a hit.
pub struct CachedOracle {
    inner: Arc<dyn RewardOracle>,
    cache: Mutex<HashMap<Sequence, f64>>,
    misses: AtomicU64,
    hits: AtomicU64,
}

impl CachedOracle {
    pub fn new(inner: Arc<dyn RewardOracle>) -> CachedOracle {
        CachedOracle { inner, cache: Mutex::new(HashMap::new()), misses: AtomicU64::new(0), hits: AtomicU64::new(0) }
    }

    pub fn from_oracle<O: RewardOracle + 'static>(oracle: O) -> CachedOracle {
        CachedOracle::new(Arc::new(oracle))
    }

    pub fn inner(&self) -> &Arc<dyn RewardOracle> {
        &self.inner
    }

    /// A fresh, empty cache over the same inner oracle.
    pub fn fresh(&self) -> CachedOracle {
        CachedOracle::new(Arc::clone(&self.inner))
    }

    pub fn reward(&self, x: &Sequence) -> f64 {
        if let Some(&v) = self.cache.lock().expect("oracle cache poisoned").get(x) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return v;
        }
        let value = self.inner.reward(x);
        let mut cache = self.cache.lock().expect("oracle cache poisoned");
        match cache.get(x) {
            Some(&v) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                v
            }
            None => {
                cache.insert(x.clone(), value);
                self.misses.fetch_add(1, Ordering::Relaxed);
                value
            }
        }
    }

    /// `R(child) - R(parent)`, both through the cache.
    pub fn delta(&self, parent: &Sequence, child: &Sequence) -> f64 {
        let before = self.reward(parent);
        self.reward(child) - before
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats { misses: self.misses.load(Ordering::Relaxed), hits: self.hits.load(Ordering::Relaxed) }
    }

    /// Drops every cached value and zeroes both counters.
    pub fn reset(&self) {
        self.cache.lock().expect("oracle cache poisoned").clear();
        self.misses.store(0, Ordering::Relaxed);
        self.hits.store(0, Ordering::Relaxed);
    }

    pub fn cached_len(&self) -> usize {
        self.cache.lock().expect("oracle cache poisoned").len()
    }
}

impl RewardOracle for CachedOracle {
    fn reward(&self, x: &Sequence) -> f64 {
        CachedOracle::reward(self, x)
    }
}

impl std::fmt::Debug for CachedOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CachedOracle").field("stats", &self.stats()).finish_non_exhaustive()
    }
}

/// `ΔR(x, a) = R(f(x, a)) - R(x)` through the cache.
pub fn delta_reward(oracle: &CachedOracle, x: &Sequence, a: &EditAction) -> Result<f64> {
    let child = x.apply(a)?;
    Ok(oracle.delta(x, &child))
}

pub fn cache_stats(oracle: &CachedOracle) -> CacheStats {
    oracle.stats()
}

/// Counts overlapping occurrences of a fixed motif.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotifCountOracle {
    motif: Sequence,
}

impl MotifCountOracle {
    pub fn new(motif: Sequence) -> Result<MotifCountOracle> {
        if motif.is_empty() {
            return Err(Error::Config("motif must be nonempty".into()));
        }
        Ok(MotifCountOracle { motif })
    }

    pub fn count(&self, x: &Sequence) -> usize {
        let m = self.motif.bases();
        x.bases().windows(m.len()).filter(|w| *w == m).count()
    }
}

impl RewardOracle for MotifCountOracle {
    fn reward(&self, x: &Sequence) -> f64 {
        self.count(x) as f64
    }
}

/// Smallest probability kept in a position weight matrix.
pub const PWM_FLOOR: f64 = 1e-3;

/// Position probability matrix: one row of `A, C, G, T` probabilities per
/// motif position. Entries are floored at [`PWM_FLOOR`] and renormalized on
/// construction, so every log-probability is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Pwm {
    rows: Vec<[f64; 4]>,
    log_rows: Vec<[f64; 4]>,
    consensus_log_prob: f64,
}

impl Pwm {
    pub fn new(rows: Vec<[f64; 4]>) -> Result<Pwm> {
        if rows.is_empty() {
            return Err(Error::Pwm("matrix has no rows".into()));
        }
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Pwm(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-3 {
                return Err(Error::Pwm(format!("row {i} sums to {sum}, expected 1")));
            }
            let floored = row.map(|p| p.max(PWM_FLOOR));
            let z: f64 = floored.iter().sum();
            out.push(floored.map(|p| p / z));
        }
        let log_rows: Vec<[f64; 4]> = out.iter().map(|r| r.map(f64::ln)).collect();
        let consensus_log_prob =
            log_rows.iter().map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).sum();
        Ok(Pwm { rows: out, log_rows, consensus_log_prob })
    }

    /// Probability 1 on the given base at each position (before flooring).
    pub fn one_hot(consensus: &Sequence) -> Result<Pwm> {
        Pwm::new(
            consensus
                .bases()
                .iter()
                .map(|b| {
                    let mut row = [0.0; 4];
                    row[b.index()] = 1.0;
                    row
                })
                .collect(),
        )
    }

    /// Parses one row per line, four whitespace-separated probabilities.
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Pwm> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Pwm(format!("line {}: {e}", lineno + 1)))?;
            let row: [f64; 4] = vals
                .try_into()
                .map_err(|v: Vec<f64>| Error::Pwm(format!("line {}: expected 4 values, got {}", lineno + 1, v.len())))?;
            rows.push(row);
        }
        Pwm::new(rows)
    }

    pub fn from_path(path: &Path) -> Result<Pwm> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Pwm(format!("{}: {e}", path.display())))?;
        Pwm::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[[f64; 4]] {
        &self.rows
    }

    pub fn consensus_log_prob(&self) -> f64 {
        self.consensus_log_prob
    }

    pub fn consensus(&self) -> Sequence {
        Sequence::new(
            self.rows
                .iter()
                .map(|r| {
                    let best = (0..4).fold(0, |b, i| if r[i] > r[b] { i } else { b });
                    Nucleotide::from_index(best)
                })
                .collect(),
        )
    }

    /// Log-probability of the window of `x` starting at `start`.
    pub fn window_log_prob(&self, x: &Sequence, start: usize) -> f64 {
        self.log_rows.iter().zip(&x.bases()[start..start + self.len()]).map(|(r, b)| r[b.index()]).sum()
    }

    /// Window probability relative to the consensus, in `(0, 1]`.
    pub fn relative_score(&self, x: &Sequence, start: usize) -> f64 {
        (self.window_log_prob(x, start) - self.consensus_log_prob).exp()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PwmMode {
    /// Best single window.
    #[default]
    BestWindow,
    /// Sum over every window.
    SumWindows,
}

/// Motif-activity toy oracle.
///
/// In best-window mode the reward is `exp(max_w log P(w) - log P(consensus))`,
/// which lies in `[0, 1]`. Sequences shorter than the motif score 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PwmOracle {
    pwm: Pwm,
    mode: PwmMode,
}

impl PwmOracle {
    pub fn new(pwm: Pwm, mode: PwmMode) -> PwmOracle {
        PwmOracle { pwm, mode }
    }

    pub fn pwm(&self) -> &Pwm {
        &self.pwm
    }
}

impl RewardOracle for PwmOracle {
    fn reward(&self, x: &Sequence) -> f64 {
        let m = self.pwm.len();
        if x.len() < m {
            return 0.0;
        }
        let windows = 0..=x.len() - m;
        match self.mode {
            PwmMode::BestWindow => {
                let best = windows.map(|s| self.pwm.window_log_prob(x, s)).fold(f64::NEG_INFINITY, f64::max);
                (best - self.pwm.consensus_log_prob).exp()
            }
            PwmMode::SumWindows => windows.map(|s| self.pwm.relative_score(x, s)).sum(),
        }
    }
}

/// Exon-intron-exon toy splice oracle.
///
/// The donor junction is the first intron base, at index `left_exon_len`.
/// The acceptor junction is the first base of the right exon, at index
/// `len - right_exon_len`, so both junctions track middle-region edits. Each
/// PWM window starts `offset` bases before its junction. Junction scores are
/// relative to the PWM consensus, so a consensus window scores exactly 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SpliceToyOracle {
    pub donor: Pwm,
    pub donor_offset: usize,
    pub acceptor: Pwm,
    pub acceptor_offset: usize,
    pub left_exon_len: usize,
    pub right_exon_len: usize,
}

impl SpliceToyOracle {
    fn window(&self, pwm: &Pwm, junction: isize, offset: usize, len: usize) -> Result<usize> {
        let start = junction - offset as isize;
        let end = start + pwm.len() as isize;
        if start < 0 || end > len as isize {
            return Err(Error::SpliceWindow { start, end, len });
        }
        Ok(start as usize)
    }

    pub fn donor_junction(&self) -> usize {
        self.left_exon_len
    }

    pub fn acceptor_junction(&self, x: &Sequence) -> isize {
        x.len() as isize - self.right_exon_len as isize
    }

    /// `(D(x), A(x))`, each in `(0, 1]`.
    pub fn junction_scores(&self, x: &Sequence) -> Result<(f64, f64)> {
        let d = self.window(&self.donor, self.donor_junction() as isize, self.donor_offset, x.len())?;
        let a = self.window(&self.acceptor, self.acceptor_junction(x), self.acceptor_offset, x.len())?;
        Ok((self.donor.relative_score(x, d), self.acceptor.relative_score(x, a)))
    }

    /// `sqrt(D(x) · A(x))`.
    pub fn splice_reward(&self, x: &Sequence) -> Result<f64> {
        let (d, a) = self.junction_scores(x)?;
        Ok((d * a).sqrt())
    }

    /// Whether the two bases at the donor junction read `GT`.
    pub fn donor_gt(&self, x: &Sequence) -> bool {
        let j = self.donor_junction();
        x.get(j) == Some(Nucleotide::G) && x.get(j + 1) == Some(Nucleotide::T)
    }
}

impl RewardOracle for SpliceToyOracle {
    /// Out-of-range junction windows score 0.
    fn reward(&self, x: &Sequence) -> f64 {
        self.splice_reward(x).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> Sequence {
        s.parse().unwrap()
    }

    fn gt_counter() -> CachedOracle {
        CachedOracle::from_oracle(MotifCountOracle::new(seq("GT")).unwrap())
    }

    #[test]
    fn delta_reward_examples() {
        let o = gt_counter();
        assert_eq!(delta_reward(&o, &seq("AC"), &EditAction::ins(2, Nucleotide::G)).unwrap(), 0.0);
        assert_eq!(delta_reward(&o, &seq("ACG"), &EditAction::ins(3, Nucleotide::T)).unwrap(), 1.0);
    }

    #[test]
    fn delta_reward_is_antisymmetric_under_inverse_substitution() {
        let o = gt_counter();
        let x = seq("AGCTA");
        let a = EditAction::sub(2, Nucleotide::T);
        let child = x.apply(&a).unwrap();
        let back = EditAction::sub(2, Nucleotide::C);
        assert_eq!(delta_reward(&o, &x, &a).unwrap(), -delta_reward(&o, &child, &back).unwrap());
    }

    #[test]
    fn cache_counts() {
        let o = gt_counter();
        o.reward(&seq("ACGT"));
        o.reward(&seq("ACGT"));
        assert_eq!(o.stats(), CacheStats { misses: 1, hits: 1 });

        o.reset();
        for s in ["A", "C", "G"] {
            o.reward(&seq(s));
        }
        assert_eq!(o.stats(), CacheStats { misses: 3, hits: 0 });

        o.reset();
        o.reward(&seq("T"));
        assert_eq!(cache_stats(&o), CacheStats { misses: 1, hits: 0 });
    }

    #[test]
    fn concurrent_first_evaluations_record_one_miss() {
        let o = Arc::new(gt_counter());
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let o = Arc::clone(&o);
                std::thread::spawn(move || {
                    for s in ["GTGT", "ACGT", "TTTT"] {
                        o.reward(&seq(s));
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let stats = o.stats();
        assert_eq!(stats.misses, 3);
        assert_eq!(stats.misses + stats.hits, 24);
    }

    #[test]
    fn splice_geomean() {
        let donor = Pwm::one_hot(&seq("GT")).unwrap();
        let acceptor = Pwm::one_hot(&seq("AG")).unwrap();
        let o = SpliceToyOracle {
            donor,
            donor_offset: 0,
            acceptor,
            acceptor_offset: 2,
            left_exon_len: 3,
            right_exon_len: 3,
        };
        let perfect = seq("CCCGTAAAAGCCC");
        assert!((o.splice_reward(&perfect).unwrap() - 1.0).abs() < 1e-15);
        assert!(o.donor_gt(&perfect));
        let off = seq("CCCATAAAAGCCC");
        let (d, a) = o.junction_scores(&off).unwrap();
        assert!(d < 1e-2 && (a - 1.0).abs() < 1e-15);
        assert!(!o.donor_gt(&off));
        assert!(o.splice_reward(&seq("CCCG")).is_err());
        assert_eq!(RewardOracle::reward(&o, &seq("CCCG")), 0.0);
    }

    #[test]
    fn splice_reward_is_geometric_mean() {
        // D = 0.9, A = 0.4 via single-row matrices scored relative to consensus
        let donor = Pwm::new(vec![[0.5, 0.45, 0.025, 0.025]]).unwrap();
        let acceptor = Pwm::new(vec![[0.5, 0.2, 0.15, 0.15]]).unwrap();
        let o = SpliceToyOracle {
            donor,
            donor_offset: 0,
            acceptor,
            acceptor_offset: 0,
            left_exon_len: 0,
            right_exon_len: 1,
        };
        let (d, a) = o.junction_scores(&seq("CC")).unwrap();
        assert!((d - 0.9).abs() < 1e-12, "{d}");
        assert!((a - 0.4).abs() < 1e-12, "{a}");
        assert!((o.splice_reward(&seq("CC")).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn pwm_floor_and_parse() {
        let p = Pwm::parse("# motif\n1 0 0 0\n0.25 0.25 0.25 0.25\n\n").unwrap();
        assert_eq!(p.len(), 2);
        for row in p.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| v > 0.0));
        }
        assert!(p.rows()[0][1] >= PWM_FLOOR / (1.0 + 3.0 * PWM_FLOOR) - 1e-18);
        assert!(Pwm::parse("1 0 0\n").is_err());
        assert!(Pwm::parse("0.5 0.5 0.5 0.5\n").is_err());
        assert!(Pwm::parse("").is_err());
        assert_eq!(p.consensus(), seq("AA"));
    }

    #[test]
    fn pwm_best_window_is_flank_invariant() {
        let o = PwmOracle::new(Pwm::one_hot(&seq("TATA")).unwrap(), PwmMode::BestWindow);
        let core = seq("TATA");
        assert!((o.reward(&core) - 1.0).abs() < 1e-15);
        assert_eq!(o.reward(&seq("CCTATACC")), o.reward(&core));
        let weak = seq("TACA");
        assert_eq!(o.reward(&seq("GGTACAGG")), o.reward(&weak));
        assert_eq!(o.reward(&seq("TAT")), 0.0);
    }

    #[test]
    fn pwm_sum_windows_adds_windows() {
        let o = PwmOracle::new(Pwm::one_hot(&seq("AA")).unwrap(), PwmMode::SumWindows);
        let r = o.reward(&seq("AAA"));
        assert!((r - 2.0).abs() < 1e-12);
    }
}
