//! Variable-length DNA sequences and the single-edit action space.
//!
//! An [`EditAction`] is a `(site, kind, token)` triple. The derived ordering
//! on actions (site, then kind `sub < ins < del`, then token `A < C < G < T`)
//! is the canonical order used for every tie-break in the crate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Nucleotide {
    A,
    C,
    G,
    T,
}

impl Nucleotide {
    pub const ALL: [Nucleotide; 4] = [Nucleotide::A, Nucleotide::C, Nucleotide::G, Nucleotide::T];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Nucleotide {
        Self::ALL[i & 3]
    }

    pub fn as_char(self) -> char {
        match self {
            Nucleotide::A => 'A',
            Nucleotide::C => 'C',
            Nucleotide::G => 'G',
            Nucleotide::T => 'T',
        }
    }

    pub fn from_char(c: char) -> Result<Nucleotide> {
        match c {
            'A' => Ok(Nucleotide::A),
            'C' => Ok(Nucleotide::C),
            'G' => Ok(Nucleotide::G),
            'T' => Ok(Nucleotide::T),
            other => Err(Error::InvalidBase(other)),
        }
    }
}

impl fmt::Display for Nucleotide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// A DNA sequence. Serializes as a plain uppercase `ACGT` string.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sequence(Vec<Nucleotide>);

impl Sequence {
    pub fn new(bases: Vec<Nucleotide>) -> Sequence {
        Sequence(bases)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bases(&self) -> &[Nucleotide] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<Nucleotide> {
        self.0.get(i).copied()
    }

    /// Applies `a` and returns the child sequence `f(x, a)`.
    ///
    /// Only structural validity is checked here (site range, no identity
    /// substitution). Length bounds and editable spans are the business of
    /// [`ActionSpace`].
    pub fn apply(&self, a: &EditAction) -> Result<Sequence> {
        let len = self.len();
        let invalid = || Error::InvalidAction { action: *a, len };
        let mut bases = self.0.clone();
        match a.kind {
            EditKind::Sub => {
                if a.site >= len || bases[a.site] == a.token {
                    return Err(invalid());
                }
                bases[a.site] = a.token;
            }
            EditKind::Ins => {
                if a.site > len {
                    return Err(invalid());
                }
                bases.insert(a.site, a.token);
            }
            EditKind::Del => {
                if a.site >= len {
                    return Err(invalid());
                }
                bases.remove(a.site);
            }
        }
        Ok(Sequence(bases))
    }
}

impl FromStr for Sequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Sequence> {
        s.chars().map(Nucleotide::from_char).collect::<Result<Vec<_>>>().map(Sequence)
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{}", b.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sequence(\"{self}\")")
    }
}

impl Serialize for Sequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Sub,
    Ins,
    Del,
}

impl EditKind {
    pub const ALL: [EditKind; 3] = [EditKind::Sub, EditKind::Ins, EditKind::Del];

    pub fn as_str(self) -> &'static str {
        match self {
            EditKind::Sub => "sub",
            EditKind::Ins => "ins",
            EditKind::Del => "del",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single edit `(site, kind, token)`.
///
/// For insertions `site` is the slot before which the token goes, so
/// `0..=len` are valid. Deletions carry no token; the constructor pins it to
/// `A` so equal deletions compare equal.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EditAction {
    site: usize,
    kind: EditKind,
    token: Nucleotide,
}

impl EditAction {
    pub fn new(site: usize, kind: EditKind, token: Nucleotide) -> EditAction {
        match kind {
            EditKind::Del => EditAction::del(site),
            _ => EditAction { site, kind, token },
        }
    }

    pub fn sub(site: usize, token: Nucleotide) -> EditAction {
        EditAction { site, kind: EditKind::Sub, token }
    }

    pub fn ins(site: usize, token: Nucleotide) -> EditAction {
        EditAction { site, kind: EditKind::Ins, token }
    }

    pub fn del(site: usize) -> EditAction {
        EditAction { site, kind: EditKind::Del, token: Nucleotide::A }
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn kind(&self) -> EditKind {
        self.kind
    }

    /// The inserted or substituted base; `None` for deletions.
    pub fn token(&self) -> Option<Nucleotide> {
        match self.kind {
            EditKind::Del => None,
            _ => Some(self.token),
        }
    }
}

impl fmt::Display for EditAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EditKind::Del => write!(f, "del@{}", self.site),
            kind => write!(f, "{}@{}:{}", kind, self.site, self.token),
        }
    }
}

impl fmt::Debug for EditAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for EditAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<EditAction> {
        let bad = || Error::ParseAction(s.to_string());
        let (kind, rest) = s.split_once('@').ok_or_else(bad)?;
        let (site, token) = match rest.split_once(':') {
            Some((site, token)) => (site, Some(token)),
            None => (rest, None),
        };
        let site: usize = site.parse().map_err(|_| bad())?;
        let token = match token {
            Some(t) => {
                let mut chars = t.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Some(Nucleotide::from_char(c)?),
                    _ => return Err(bad()),
                }
            }
            None => None,
        };
        match (kind, token) {
            ("sub", Some(v)) => Ok(EditAction::sub(site, v)),
            ("ins", Some(v)) => Ok(EditAction::ins(site, v)),
            ("del", None) => Ok(EditAction::del(site)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for EditAction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EditAction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LengthBounds {
    min_len: usize,
    max_len: usize,
}

impl LengthBounds {
    pub fn new(min_len: usize, max_len: usize) -> Result<LengthBounds> {
        if min_len == 0 || min_len > max_len {
            return Err(Error::InvalidBounds { min: min_len, max: max_len });
        }
        Ok(LengthBounds { min_len, max_len })
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn contains(&self, len: usize) -> bool {
        (self.min_len..=self.max_len).contains(&len)
    }

    pub fn check(&self, x: &Sequence) -> Result<()> {
        if self.contains(x.len()) {
            Ok(())
        } else {
            Err(Error::OutOfBounds { len: x.len(), min: self.min_len, max: self.max_len })
        }
    }
}

impl Default for LengthBounds {
    fn default() -> Self {
        LengthBounds { min_len: 1, max_len: 512 }
    }
}

/// The valid-action set `A(x)`: length bounds plus an optional pair of fixed
/// flanks that no edit may touch (the inpainting mask).
///
/// With flanks `(left, right)` only sites in `[left, len - right)` may be
/// substituted or deleted and only slots in `[left, len - right]` may receive
/// insertions, so the flank lengths are preserved by every valid edit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub bounds: LengthBounds,
    pub left_fixed: usize,
    pub right_fixed: usize,
}

impl ActionSpace {
    pub fn new(bounds: LengthBounds) -> ActionSpace {
        ActionSpace { bounds, left_fixed: 0, right_fixed: 0 }
    }

    pub fn with_flanks(bounds: LengthBounds, left_fixed: usize, right_fixed: usize) -> ActionSpace {
        ActionSpace { bounds, left_fixed, right_fixed }
    }

    /// Checks that `x` is a legal state of this space.
    pub fn check(&self, x: &Sequence) -> Result<()> {
        self.bounds.check(x)?;
        if x.len() < self.left_fixed + self.right_fixed {
            return Err(Error::Config(format!(
                "sequence of length {} is shorter than its fixed flanks ({} + {})",
                x.len(),
                self.left_fixed,
                self.right_fixed
            )));
        }
        Ok(())
    }

    /// Half-open range of sites that may be substituted or deleted.
    fn editable(&self, len: usize) -> (usize, usize) {
        (self.left_fixed, len.saturating_sub(self.right_fixed))
    }

    /// Every valid action at `x`, once each, in canonical order.
    pub fn enumerate(&self, x: &Sequence) -> Vec<EditAction> {
        let len = x.len();
        let can_ins = len < self.bounds.max_len;
        let can_del = len > self.bounds.min_len;
        let (lo, hi) = self.editable(len);
        let mut out = Vec::with_capacity(8 * (hi - lo.min(hi)) + 4);
        for site in lo..=hi.max(lo) {
            if site < hi {
                let current = x.0[site];
                out.extend(Nucleotide::ALL.iter().filter(|&&v| v != current).map(|&v| EditAction::sub(site, v)));
            }
            if can_ins && site <= hi {
                out.extend(Nucleotide::ALL.iter().map(|&v| EditAction::ins(site, v)));
            }
            if can_del && site < hi {
                out.push(EditAction::del(site));
            }
        }
        out
    }

    pub fn contains(&self, x: &Sequence, a: &EditAction) -> bool {
        let len = x.len();
        let (lo, hi) = self.editable(len);
        if a.site < lo {
            return false;
        }
        match a.kind {
            EditKind::Sub => a.site < hi && x.0[a.site] != a.token,
            EditKind::Ins => a.site <= hi && len < self.bounds.max_len,
            EditKind::Del => a.site < hi && len > self.bounds.min_len,
        }
    }

    /// Applies `a`, rejecting actions outside `A(x)`.
    pub fn apply(&self, x: &Sequence, a: &EditAction) -> Result<Sequence> {
        if !self.contains(x, a) {
            return Err(Error::InvalidAction { action: *a, len: x.len() });
        }
        x.apply(a)
    }
}

/// Every valid action at `x` under `bounds`, in canonical order.
pub fn enumerate_actions(x: &Sequence, bounds: LengthBounds) -> Vec<EditAction> {
    ActionSpace::new(bounds).enumerate(x)
}

/// `f(x, a)`.
pub fn apply_edit(x: &Sequence, a: &EditAction) -> Result<Sequence> {
    x.apply(a)
}

/// Anchor site of the edit that produced `child`: the edited site for
/// substitutions and insertions, and the site now occupying the deleted
/// position for deletions (clamped to the last index).
pub fn anchor_site(a: &EditAction, child: &Sequence) -> usize {
    match a.kind {
        EditKind::Sub | EditKind::Ins => a.site,
        EditKind::Del => a.site.min(child.len().saturating_sub(1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> Sequence {
        s.parse().unwrap()
    }

    fn bounds(min: usize, max: usize) -> LengthBounds {
        LengthBounds::new(min, max).unwrap()
    }

    fn count(actions: &[EditAction], kind: EditKind) -> usize {
        actions.iter().filter(|a| a.kind() == kind).count()
    }

    #[test]
    fn enumerate_interior_length() {
        let acts = enumerate_actions(&seq("AC"), bounds(1, 10));
        assert_eq!(acts.len(), 20);
        assert_eq!(count(&acts, EditKind::Sub), 6);
        assert_eq!(count(&acts, EditKind::Ins), 12);
        assert_eq!(count(&acts, EditKind::Del), 2);
    }

    #[test]
    fn enumerate_at_min_length_has_no_deletions() {
        let acts = enumerate_actions(&seq("A"), bounds(1, 10));
        assert_eq!(acts.len(), 11);
        assert_eq!(count(&acts, EditKind::Del), 0);
    }

    #[test]
    fn enumerate_at_max_length_has_no_insertions() {
        let acts = enumerate_actions(&seq("ACGT"), bounds(1, 4));
        assert_eq!(acts.len(), 16);
        assert_eq!(count(&acts, EditKind::Sub), 12);
        assert_eq!(count(&acts, EditKind::Ins), 0);
        assert_eq!(count(&acts, EditKind::Del), 4);
    }

    #[test]
    fn enumerate_is_canonically_sorted_and_unique() {
        let acts = enumerate_actions(&seq("GATTACA"), bounds(1, 20));
        let mut sorted = acts.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(acts, sorted);
    }

    #[test]
    fn interior_count_formula_by_brute_force() {
        // Brute force: try every (site, kind, token) triple and keep those that apply.
        for len in 1..=12usize {
            let x = Sequence::new((0..len).map(|i| Nucleotide::from_index(i * 7 + i / 3)).collect());
            let b = bounds(1, 64);
            let mut brute = Vec::new();
            for site in 0..=len + 1 {
                for kind in EditKind::ALL {
                    for v in Nucleotide::ALL {
                        let a = EditAction::new(site, kind, v);
                        if x.apply(&a).is_ok() && !brute.contains(&a) {
                            brute.push(a);
                        }
                    }
                }
            }
            let len_ok = if len == 1 { brute.iter().filter(|a| a.kind() != EditKind::Del).count() } else { brute.len() };
            let expected = if len == 1 { 3 + 8 } else { 3 * len + 4 * (len + 1) + len };
            assert_eq!(len_ok, expected);
            assert_eq!(enumerate_actions(&x, b).len(), expected, "len {len}");
        }
    }

    #[test]
    fn apply_examples() {
        assert_eq!(apply_edit(&seq("ACGT"), &EditAction::del(2)).unwrap(), seq("ACT"));
        assert_eq!(apply_edit(&seq("ACGT"), &EditAction::ins(4, Nucleotide::A)).unwrap(), seq("ACGTA"));
        assert_eq!(apply_edit(&seq("AC"), &EditAction::sub(0, Nucleotide::G)).unwrap(), seq("GC"));
    }

    #[test]
    fn apply_rejects_invalid() {
        assert!(apply_edit(&seq("AC"), &EditAction::sub(0, Nucleotide::A)).is_err());
        assert!(apply_edit(&seq("AC"), &EditAction::del(2)).is_err());
        assert!(apply_edit(&seq("AC"), &EditAction::ins(3, Nucleotide::A)).is_err());
        let space = ActionSpace::new(bounds(2, 2));
        assert!(space.apply(&seq("AC"), &EditAction::del(0)).is_err());
        assert!(space.apply(&seq("AC"), &EditAction::ins(0, Nucleotide::T)).is_err());
    }

    #[test]
    fn anchor_examples() {
        let child = seq("ACGTACGT");
        assert_eq!(anchor_site(&EditAction::sub(3, Nucleotide::A), &child), 3);
        assert_eq!(anchor_site(&EditAction::ins(0, Nucleotide::A), &seq("AGC")), 0);
        assert_eq!(anchor_site(&EditAction::del(4), &seq("ACGT")), 3);
        assert_eq!(anchor_site(&EditAction::del(1), &seq("ACGT")), 1);
    }

    #[test]
    fn action_text_form() {
        for text in ["sub@3:T", "ins@0:A", "del@7"] {
            let a: EditAction = text.parse().unwrap();
            assert_eq!(a.to_string(), text);
        }
        for bad in ["sub@3", "del@2:A", "ins@x:A", "mov@1:A", "sub@1:N", "sub@1:AC"] {
            assert!(bad.parse::<EditAction>().is_err(), "{bad}");
        }
        assert!("ACGN".parse::<Sequence>().is_err());
    }

    #[test]
    fn flanks_mask_edits() {
        let space = ActionSpace::with_flanks(bounds(1, 20), 2, 2);
        let x = seq("AACCGG");
        let acts = space.enumerate(&x);
        for a in &acts {
            let child = space.apply(&x, a).unwrap();
            assert_eq!(&child.bases()[..2], &x.bases()[..2]);
            assert_eq!(&child.bases()[child.len() - 2..], &x.bases()[4..]);
        }
        // sites 2,3 editable (3 sub + 1 del each), slots 2..=4 take insertions
        assert_eq!(acts.len(), 2 * 4 + 3 * 4);
    }

    #[test]
    fn bounds_validation() {
        assert!(LengthBounds::new(0, 4).is_err());
        assert!(LengthBounds::new(5, 4).is_err());
        assert_eq!(LengthBounds::default().max_len(), 512);
    }
}
