//! Permutation patterns over the five physical positions and the secret pattern sets.
//!
//! A [`Pattern`] is stored in one-line notation: entry `i` (0-based) holds `p(i + 1)`, the
//! physical position that standard position `i + 1` is moved to. Enumerations are
//! lexicographic and built once.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{QkdError, Result};

/// Number of physical positions in a block.
pub const BLOCK_LEN: usize = 5;
/// Minimum position distance between the two patterns of a secret set.
pub const MIN_SET_DISTANCE: usize = 3;

/// A permutation of the positions `{1, 2, 3, 4, 5}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern([u8; BLOCK_LEN]);

impl Pattern {
    pub const IDENTITY: Pattern = Pattern([1, 2, 3, 4, 5]);

    pub fn new(mapping: [u8; BLOCK_LEN]) -> Result<Self> {
        let mut seen = [false; BLOCK_LEN];
        for &m in &mapping {
            if !(1..=BLOCK_LEN as u8).contains(&m) || seen[(m - 1) as usize] {
                return Err(QkdError::InvalidPattern(mapping.to_vec()));
            }
            seen[(m - 1) as usize] = true;
        }
        Ok(Pattern(mapping))
    }

    pub fn mapping(&self) -> [u8; BLOCK_LEN] {
        self.0
    }

    /// `p(position)` for a 1-based standard position.
    pub fn image(&self, position: usize) -> usize {
        self.0[position - 1] as usize
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Position of this pattern in [`all_patterns`].
    pub fn index(&self) -> usize {
        // Lehmer code gives the lexicographic rank directly.
        let mut rank = 0;
        for i in 0..BLOCK_LEN {
            let smaller_later = self.0[i + 1..].iter().filter(|&&x| x < self.0[i]).count();
            rank = rank * (BLOCK_LEN - i) + smaller_later;
        }
        rank
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in self.0 {
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl FromStr for Pattern {
    type Err = QkdError;

    /// Parses the compact one-line form, e.g. `"12453"`.
    fn from_str(s: &str) -> Result<Self> {
        let digits: Vec<u8> = s.trim().bytes().map(|b| b.wrapping_sub(b'0')).collect();
        let mapping: [u8; BLOCK_LEN] = digits.clone().try_into().map_err(|_| QkdError::InvalidPattern(digits))?;
        Pattern::new(mapping)
    }
}

/// Number of positions where `p` and `q` disagree.
pub fn pattern_distance(p: &Pattern, q: &Pattern) -> usize {
    p.0.iter().zip(q.0.iter()).filter(|(a, b)| a != b).count()
}

/// `compose(p, q)` is "apply `q`, then `p`": `i ↦ p(q(i))`.
pub fn compose(p: &Pattern, q: &Pattern) -> Pattern {
    let mut out = [0u8; BLOCK_LEN];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = p.0[q.0[i] as usize - 1];
    }
    Pattern(out)
}

pub fn invert(p: &Pattern) -> Pattern {
    let mut out = [0u8; BLOCK_LEN];
    for (i, &m) in p.0.iter().enumerate() {
        out[m as usize - 1] = (i + 1) as u8;
    }
    Pattern(out)
}

/// All 120 patterns in lexicographic order.
pub fn all_patterns() -> &'static [Pattern] {
    static TABLE: OnceLock<Vec<Pattern>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = Vec::with_capacity(120);
        let mut current = [1u8, 2, 3, 4, 5];
        loop {
            out.push(Pattern(current));
            if !next_permutation(&mut current) {
                break;
            }
        }
        out
    })
}

fn next_permutation(xs: &mut [u8]) -> bool {
    let Some(i) = (0..xs.len() - 1).rev().find(|&i| xs[i] < xs[i + 1]) else {
        return false;
    };
    let j = (i + 1..xs.len()).rev().find(|&j| xs[j] > xs[i]).unwrap();
    xs.swap(i, j);
    xs[i + 1..].reverse();
    true
}

/// An unordered pair of patterns at distance at least 3, stored in lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternSet {
    first: Pattern,
    second: Pattern,
}

impl PatternSet {
    pub fn new(a: Pattern, b: Pattern) -> Result<Self> {
        let distance = pattern_distance(&a, &b);
        if distance < MIN_SET_DISTANCE {
            return Err(QkdError::PatternsTooClose(a.to_string(), b.to_string(), distance));
        }
        let (first, second) = if a < b { (a, b) } else { (b, a) };
        Ok(PatternSet { first, second })
    }

    pub fn first(&self) -> Pattern {
        self.first
    }

    pub fn second(&self) -> Pattern {
        self.second
    }

    pub fn members(&self) -> [Pattern; 2] {
        [self.first, self.second]
    }

    /// Member by pattern index (0 = first, 1 = second).
    pub fn get(&self, index: u8) -> Pattern {
        match index {
            0 => self.first,
            1 => self.second,
            _ => panic!("pattern index must be 0 or 1, got {index}"),
        }
    }

    pub fn contains(&self, p: &Pattern) -> bool {
        self.first == *p || self.second == *p
    }

    /// How many patterns this set has in common with `other` (0, 1 or 2).
    pub fn shared_with(&self, other: &PatternSet) -> usize {
        other.members().iter().filter(|p| self.contains(p)).count()
    }

    pub fn distance(&self) -> usize {
        pattern_distance(&self.first, &self.second)
    }

    /// Position of this set in [`valid_pattern_sets`].
    pub fn id(&self) -> usize {
        valid_pattern_sets().binary_search(self).expect("every PatternSet is in the enumerated table")
    }

    pub fn from_id(id: usize) -> Option<PatternSet> {
        valid_pattern_sets().get(id).copied()
    }
}

impl fmt::Display for PatternSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.first, self.second)
    }
}

impl FromStr for PatternSet {
    type Err = QkdError;

    /// Parses `"12345,12453"`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once(',').ok_or_else(|| QkdError::InvalidPattern(s.bytes().collect()))?;
        PatternSet::new(a.parse()?, b.parse()?)
    }
}

/// Every valid secret set (6540 of them), sorted by `(first, second)`.
pub fn valid_pattern_sets() -> &'static [PatternSet] {
    static TABLE: OnceLock<Vec<PatternSet>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let patterns = all_patterns();
        let mut sets = Vec::new();
        for (i, a) in patterns.iter().enumerate() {
            for b in &patterns[i + 1..] {
                if pattern_distance(a, b) >= MIN_SET_DISTANCE {
                    sets.push(PatternSet { first: *a, second: *b });
                }
            }
        }
        sets
    })
}

/// Uniform over [`valid_pattern_sets`].
pub fn sample_pattern_set<R: Rng + ?Sized>(rng: &mut R) -> PatternSet {
    let sets = valid_pattern_sets();
    sets[rng.random_range(0..sets.len())]
}

/// Uniform over the two members; returns the member index alongside the pattern.
pub fn sample_pattern<R: Rng + ?Sized>(set: &PatternSet, rng: &mut R) -> (u8, Pattern) {
    let index = u8::from(rng.random::<bool>());
    (index, set.get(index))
}

/// Uniform over all 120 patterns.
pub fn sample_any_pattern<R: Rng + ?Sized>(rng: &mut R) -> Pattern {
    let patterns = all_patterns();
    patterns[rng.random_range(0..patterns.len())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn enumeration_counts_and_order() {
        let all = all_patterns();
        assert_eq!(all.len(), 120);
        assert_eq!(all[0], Pattern::IDENTITY);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        for (i, p) in all.iter().enumerate() {
            assert_eq!(p.index(), i);
            assert!(Pattern::new(p.mapping()).is_ok());
        }
        assert_eq!(valid_pattern_sets().len(), 6540);
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(Pattern::new([1, 1, 3, 4, 5]).is_err());
        assert!(Pattern::new([0, 2, 3, 4, 5]).is_err());
        assert!(Pattern::new([1, 2, 3, 4, 6]).is_err());
        assert!("1234".parse::<Pattern>().is_err());
        assert!("12a45".parse::<Pattern>().is_err());
        assert_eq!("21345".parse::<Pattern>().unwrap().mapping(), [2, 1, 3, 4, 5]);
    }

    #[test]
    fn distance_examples() {
        let swap: Pattern = "21345".parse().unwrap();
        assert_eq!(pattern_distance(&Pattern::IDENTITY, &swap), 2);
        for p in all_patterns() {
            assert_eq!(pattern_distance(p, p), 0);
        }
    }

    #[test]
    fn distance_one_never_occurs() {
        let all = all_patterns();
        for p in all {
            for q in all {
                let d = pattern_distance(p, q);
                assert_ne!(d, 1);
                assert_eq!(d == 0, p == q);
                assert_eq!(d, pattern_distance(q, p));
            }
        }
    }

    #[test]
    fn every_pattern_has_109_partners() {
        let all = all_patterns();
        for p in all {
            let partners = all.iter().filter(|q| pattern_distance(p, q) >= 3).count();
            assert_eq!(partners, 109);
            let transpositions = all.iter().filter(|q| pattern_distance(p, q) == 2).count();
            assert_eq!(transpositions, 10);
        }
    }

    #[test]
    fn group_axioms() {
        assert_eq!(invert(&Pattern::IDENTITY), Pattern::IDENTITY);
        for p in all_patterns() {
            assert!(compose(p, &invert(p)).is_identity());
            assert!(compose(&invert(p), p).is_identity());
            assert_eq!(invert(&invert(p)), *p);
            assert_eq!(compose(p, &Pattern::IDENTITY), *p);
        }
    }

    #[test]
    fn set_canonicalization_and_ids() {
        let a: Pattern = "12453".parse().unwrap();
        let b = Pattern::IDENTITY;
        let s1 = PatternSet::new(a, b).unwrap();
        let s2 = PatternSet::new(b, a).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.first(), b);
        assert_eq!(s1.id(), 0);
        assert_eq!(PatternSet::from_id(0), Some(s1));
        assert_eq!(s1.to_string().parse::<PatternSet>().unwrap(), s1);
        for (i, s) in valid_pattern_sets().iter().enumerate().step_by(97) {
            assert_eq!(s.id(), i);
            assert!(s.distance() >= 3);
        }
    }

    #[test]
    fn close_or_equal_patterns_are_not_a_set() {
        let swap: Pattern = "21345".parse().unwrap();
        assert!(matches!(PatternSet::new(Pattern::IDENTITY, swap), Err(QkdError::PatternsTooClose(_, _, 2))));
        assert!(PatternSet::new(swap, swap).is_err());
    }

    #[test]
    fn member_sampling_is_fair() {
        let set = valid_pattern_sets()[1234];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let firsts = (0..n).filter(|_| sample_pattern(&set, &mut rng).0 == 0).count();
        let freq = firsts as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn set_sampling_passes_chi_square() {
        let sets = valid_pattern_sets();
        let mut counts = vec![0u64; sets.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 1_000_000u64;
        for _ in 0..draws {
            let s = sample_pattern_set(&mut rng);
            assert!(s.distance() >= 3);
            counts[s.id()] += 1;
        }
        let expected = draws as f64 / sets.len() as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // Wilson-Hilferty upper 0.001 quantile for 6539 degrees of freedom.
        let k = (sets.len() - 1) as f64;
        let z = 3.090_232_306;
        let critical = k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3);
        assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
    }
}
