//! Reduced words in free groups.
//!
//! A free group of rank `k` has `2k` letters. Letter `2i` is the `i`-th
//! generator and `2i + 1` its inverse, so the involution is `l ^ 1`. Strings
//! use one character per generator and the ASCII suffix `'` for inverses,
//! e.g. `"ab'c"`. Enumeration order is lexicographic in letter index.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Letter = u8;

pub const INVERSE_MARKER: char = '\'';

#[inline]
pub fn inverse_letter(l: Letter) -> Letter {
    l ^ 1
}

/// Symmetric generating set of a free group: `k` named generators and their inverses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSet {
    names: Vec<char>,
}

impl GeneratorSet {
    pub fn new(names: impl IntoIterator<Item = char>) -> Result<Self> {
        let names: Vec<char> = names.into_iter().collect();
        if names.is_empty() {
            return Err(Error::InvalidWord {
                word: String::new(),
                reason: "empty generator set".into(),
            });
        }
        if names.len() > 64 {
            return Err(Error::OutOfRange(format!(
                "rank {} exceeds 64",
                names.len()
            )));
        }
        for (i, c) in names.iter().enumerate() {
            if *c == INVERSE_MARKER || c.is_whitespace() {
                return Err(Error::InvalidWord {
                    word: c.to_string(),
                    reason: "reserved generator name".into(),
                });
            }
            if names[..i].contains(c) {
                return Err(Error::InvalidWord {
                    word: c.to_string(),
                    reason: "duplicate generator name".into(),
                });
            }
        }
        Ok(Self { names })
    }

    /// Generators named `a`, `b`, `c`, ...
    pub fn standard(rank: usize) -> Self {
        assert!((1..=26).contains(&rank));
        Self {
            names: (0..rank as u8).map(|i| (b'a' + i) as char).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.names.len()
    }

    pub fn num_letters(&self) -> usize {
        2 * self.names.len()
    }

    pub fn names(&self) -> &[char] {
        &self.names
    }

    pub fn letter_name(&self, l: Letter) -> String {
        let c = self.names[(l / 2) as usize];
        if l % 2 == 0 {
            c.to_string()
        } else {
            format!("{c}{INVERSE_MARKER}")
        }
    }

    /// Parses a single letter such as `a` or `a'`.
    pub fn parse_letter(&self, s: &str) -> Result<Letter> {
        self.parse(s).and_then(|w| match w.letters() {
            [l] => Ok(*l),
            _ => Err(Error::InvalidWord {
                word: s.into(),
                reason: "expected a single letter".into(),
            }),
        })
    }

    /// Parses a string like `"ab'c"`. Cancelling pairs are rejected: the
    /// input must already be reduced.
    pub fn parse(&self, s: &str) -> Result<Word> {
        let mut letters = Vec::with_capacity(s.len());
        let mut chars = s.chars().peekable();
        while let Some(c) = chars.next() {
            let idx =
                self.names
                    .iter()
                    .position(|n| *n == c)
                    .ok_or_else(|| Error::InvalidWord {
                        word: s.into(),
                        reason: format!("unknown generator {c:?}"),
                    })?;
            let mut l = (2 * idx) as Letter;
            if chars.peek() == Some(&INVERSE_MARKER) {
                chars.next();
                l += 1;
            }
            letters.push(l);
        }
        Word::from_letters(self.rank(), letters).map_err(|_| Error::InvalidWord {
            word: s.into(),
            reason: "not reduced".into(),
        })
    }

    pub fn format(&self, w: &Word) -> String {
        w.letters.iter().map(|&l| self.letter_name(l)).collect()
    }
}

/// A reduced word over the letters of a rank-`k` free group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    rank: usize,
    letters: Vec<Letter>,
}

impl Word {
    pub fn identity(rank: usize) -> Self {
        Self {
            rank,
            letters: Vec::new(),
        }
    }

    /// Builds a word from letters, failing if any letter is out of range or
    /// the sequence is not reduced.
    pub fn from_letters(rank: usize, letters: Vec<Letter>) -> Result<Self> {
        for &l in &letters {
            if l as usize >= 2 * rank {
                return Err(Error::InvalidWord {
                    word: format!("{letters:?}"),
                    reason: format!("letter {l} out of range"),
                });
            }
        }
        if letters.windows(2).any(|w| w[1] == inverse_letter(w[0])) {
            return Err(Error::InvalidWord {
                word: format!("{letters:?}"),
                reason: "not reduced".into(),
            });
        }
        Ok(Self { rank, letters })
    }

    /// Freely reduces an arbitrary letter sequence.
    pub fn reduce(rank: usize, letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            debug_assert!((l as usize) < 2 * rank);
            if out.last() == Some(&inverse_letter(l)) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Self { rank, letters: out }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn last(&self) -> Option<Letter> {
        self.letters.last().copied()
    }

    pub fn inverse(&self) -> Self {
        Self {
            rank: self.rank,
            letters: self
                .letters
                .iter()
                .rev()
                .map(|&l| inverse_letter(l))
                .collect(),
        }
    }

    pub fn multiply(&self, other: &Word) -> Result<Word> {
        if self.rank != other.rank {
            return Err(Error::GeneratorMismatch {
                left: self.rank,
                right: other.rank,
            });
        }
        let mut cancel = 0;
        while cancel < self.len().min(other.len())
            && other.letters[cancel] == inverse_letter(self.letters[self.len() - 1 - cancel])
        {
            cancel += 1;
        }
        let mut letters = Vec::with_capacity(self.len() + other.len() - 2 * cancel);
        letters.extend_from_slice(&self.letters[..self.len() - cancel]);
        letters.extend_from_slice(&other.letters[cancel..]);
        Ok(Word {
            rank: self.rank,
            letters,
        })
    }

    /// Appends one letter, cancelling if it is the inverse of the last letter.
    pub fn push_reduced(&mut self, l: Letter) {
        if self.letters.last() == Some(&inverse_letter(l)) {
            self.letters.pop();
        } else {
            self.letters.push(l);
        }
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word {
            rank: self.rank,
            letters: self.letters[..n.min(self.len())].to_vec(),
        }
    }

    pub fn starts_with(&self, prefix: &Word) -> bool {
        self.rank == prefix.rank && self.letters.starts_with(&prefix.letters)
    }

    pub fn common_prefix_len(&self, other: &Word) -> usize {
        self.letters
            .iter()
            .zip(&other.letters)
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// True when the word and all its cyclic conjugates are reduced.
    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(&f), Some(&l)) => self.len() == 1 || f != inverse_letter(l),
            _ => true,
        }
    }

    /// `w^n` as a reduced word.
    pub fn power(&self, n: usize) -> Word {
        Word::reduce(
            self.rank,
            std::iter::repeat(self.letters.iter().copied())
                .take(n)
                .flatten(),
        )
    }

    /// Extends by uniformly random legal letters (no cancellation).
    pub fn random_extension<R: Rng + ?Sized>(&self, extra: usize, rng: &mut R) -> Word {
        let mut w = self.clone();
        for _ in 0..extra {
            let l = random_next_letter(self.rank, w.last(), rng);
            w.letters.push(l);
        }
        w
    }

    /// Extends by repeating `period` until the length reaches `depth`.
    pub fn eventually_periodic(&self, period: &Word, depth: usize) -> Result<Word> {
        if period.is_empty() || !period.is_cyclically_reduced() {
            return Err(Error::InvalidWord {
                word: format!("{:?}", period.letters),
                reason: "period must be non-empty and cyclically reduced".into(),
            });
        }
        if let (Some(l), Some(&f)) = (self.last(), period.letters.first()) {
            if f == inverse_letter(l) {
                return Err(Error::InvalidWord {
                    word: format!("{:?}", period.letters),
                    reason: "period cancels against prefix".into(),
                });
            }
        }
        let mut letters = self.letters.clone();
        let mut cycle = period.letters.iter().cycle();
        while letters.len() < depth {
            letters.push(*cycle.next().expect("non-empty period"));
        }
        Ok(Word {
            rank: self.rank,
            letters,
        })
    }
}

/// Letters that may follow `last` in a reduced word, in increasing index order.
pub fn next_letters(rank: usize, last: Option<Letter>) -> impl Iterator<Item = Letter> {
    let forbidden = last.map(inverse_letter);
    (0..(2 * rank) as Letter).filter(move |l| Some(*l) != forbidden)
}

pub fn random_next_letter<R: Rng + ?Sized>(
    rank: usize,
    last: Option<Letter>,
    rng: &mut R,
) -> Letter {
    let n = 2 * rank;
    match last {
        None => rng.gen_range(0..n) as Letter,
        Some(prev) => {
            let forbidden = inverse_letter(prev) as usize;
            let mut l = rng.gen_range(0..n - 1);
            if l >= forbidden {
                l += 1;
            }
            l as Letter
        }
    }
}

/// Uniformly random reduced word of length `len`.
pub fn random_word<R: Rng + ?Sized>(rank: usize, len: usize, rng: &mut R) -> Word {
    Word::identity(rank).random_extension(len, rng)
}

/// Number of reduced words of length `n` in the free group of rank `rank`.
pub fn sphere_size(rank: usize, n: usize) -> u128 {
    if n == 0 {
        1
    } else {
        let k = rank as u128;
        2 * k * (2 * k - 1).pow(n as u32 - 1)
    }
}

/// All reduced words of length exactly `n`, lexicographic in letter index.
pub fn sphere(rank: usize, n: usize) -> Vec<Word> {
    let mut level = vec![Word::identity(rank)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(level.len() * (2 * rank).saturating_sub(1).max(1));
        for w in &level {
            for l in next_letters(rank, w.last()) {
                let mut child = w.clone();
                child.letters.push(l);
                next.push(child);
            }
        }
        level = next;
    }
    level
}

/// Gromov product `(x|y) = (|x| + |y| - |x^{-1} y|) / 2`. Always an integer in a free group.
pub fn gromov_product(x: &Word, y: &Word) -> Result<usize> {
    let z = x.inverse().multiply(y)?;
    let twice = x.len() + y.len() - z.len();
    debug_assert!(twice % 2 == 0);
    Ok(twice / 2)
}

/// Visual distance `exp(-exponent * (x|y))` on finite approximants of boundary points.
pub fn visual_distance(x: &Word, y: &Word, exponent: f64) -> Result<f64> {
    if x == y {
        return Ok(0.0);
    }
    Ok((-exponent * gromov_product(x, y)? as f64).exp())
}

/// Set of boundary points whose geodesic ray starts with `prefix`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cylinder {
    prefix: Word,
}

impl Cylinder {
    pub fn new(prefix: Word) -> Self {
        Self { prefix }
    }

    pub fn whole(rank: usize) -> Self {
        Self {
            prefix: Word::identity(rank),
        }
    }

    pub fn prefix(&self) -> &Word {
        &self.prefix
    }

    pub fn depth(&self) -> usize {
        self.prefix.len()
    }

    /// Membership of a finite approximant (a ray truncated at some depth >= the cylinder depth).
    pub fn contains(&self, approximant: &Word) -> bool {
        approximant.len() >= self.depth() && approximant.starts_with(&self.prefix)
    }

    pub fn sample<R: Rng + ?Sized>(&self, extra: usize, rng: &mut R) -> Word {
        self.prefix.random_extension(extra, rng)
    }
}

impl fmt::Display for Word {
    /// Formats with the standard names `a, b, c, ...`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &l in &self.letters {
            write!(f, "{}", (b'a' + l / 2) as char)?;
            if l % 2 == 1 {
                write!(f, "{INVERSE_MARKER}")?;
            }
        }
        Ok(())
    }
}

/// Shorthand for the standard generator set of the given rank.
pub fn parse_standard(rank: usize, s: &str) -> Result<Word> {
    GeneratorSet::standard(rank).parse(s)
}

/// The shadow cylinder of a finite ray prefix.
pub fn shadow_cylinder(ray_prefix: &Word) -> Cylinder {
    Cylinder::new(ray_prefix.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        parse_standard(4, s).unwrap()
    }

    #[test]
    fn multiply_cancels() {
        assert_eq!(w("ab").multiply(&w("b'c")).unwrap(), w("ac"));
        assert_eq!(w("ab").multiply(&w("cd")).unwrap(), w("abcd"));
        let x = w("ab'cd");
        assert!(x.multiply(&x.inverse()).unwrap().is_empty());
    }

    #[test]
    fn multiply_rejects_mismatched_rank() {
        let x = parse_standard(2, "a").unwrap();
        let y = parse_standard(3, "c").unwrap();
        assert!(matches!(
            x.multiply(&y),
            Err(Error::GeneratorMismatch { .. })
        ));
    }

    #[test]
    fn parse_and_format_round_trip() {
        let gens = GeneratorSet::standard(3);
        for s in ["", "a", "a'", "ab'c", "c'c'b"] {
            assert_eq!(gens.format(&gens.parse(s).unwrap()), s);
        }
        assert!(gens.parse("aa'").is_err());
        assert!(gens.parse("z").is_err());
    }

    #[test]
    fn sphere_counts() {
        assert_eq!(sphere(2, 0).len(), 1);
        assert_eq!(sphere(2, 1).len(), 4);
        assert_eq!(sphere(2, 3).len(), 36);
        for k in 1..=3 {
            for n in 0..=6 {
                let s = sphere(k, n);
                assert_eq!(s.len() as u128, sphere_size(k, n));
                let mut sorted = s.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), s.len(), "duplicates in sphere({k},{n})");
                assert!(
                    s.windows(2).all(|p| p[0].letters < p[1].letters),
                    "not lexicographic"
                );
            }
        }
    }

    #[test]
    fn gromov_product_examples() {
        assert_eq!(gromov_product(&w("ab"), &w("ac")).unwrap(), 1);
        assert_eq!(gromov_product(&w("abc"), &w("abc")).unwrap(), 3);
        assert_eq!(gromov_product(&w("ab"), &w("a'c")).unwrap(), 0);
    }

    #[test]
    fn cylinders() {
        let mut rng = rng_from_seed(1);
        assert!(Cylinder::whole(2).contains(&random_word(2, 7, &mut rng)));
        let c = shadow_cylinder(&parse_standard(3, "ab").unwrap());
        assert!(c.contains(&parse_standard(3, "abca").unwrap()));
        assert!(!c.contains(&parse_standard(3, "acab").unwrap()));
        assert!(!c.contains(&parse_standard(3, "a").unwrap()));
        for _ in 0..50 {
            assert!(c.contains(&c.sample(5, &mut rng)));
        }
    }

    #[test]
    fn periodic_extension() {
        let p = parse_standard(2, "ab").unwrap();
        let e = p.eventually_periodic(&parse_standard(2, "b'a").unwrap(), 7);
        assert!(e.is_err());
        let e = p
            .eventually_periodic(&parse_standard(2, "ab").unwrap(), 7)
            .unwrap();
        assert_eq!(e.to_string(), "abababa");
    }

    fn word_strategy(rank: usize, max_len: usize) -> impl Strategy<Value = Word> {
        (0..=max_len, any::<u64>())
            .prop_map(move |(n, seed)| random_word(rank, n, &mut rng_from_seed(seed)))
    }

    proptest! {
        #[test]
        fn multiply_associative(x in word_strategy(3, 8), y in word_strategy(3, 8), z in word_strategy(3, 8)) {
            let left = x.multiply(&y).unwrap().multiply(&z).unwrap();
            let right = x.multiply(&y.multiply(&z).unwrap()).unwrap();
            prop_assert_eq!(&left, &right);
            prop_assert!(x.multiply(&y).unwrap().len() <= x.len() + y.len());
            prop_assert!(x.multiply(&x.inverse()).unwrap().is_empty());
        }

        #[test]
        fn gromov_is_common_prefix(x in word_strategy(2, 10), y in word_strategy(2, 10)) {
            let g = gromov_product(&x, &y).unwrap();
            prop_assert_eq!(g, x.common_prefix_len(&y));
            prop_assert_eq!(g, gromov_product(&y, &x).unwrap());
        }

        #[test]
        fn cylinder_membership_monotone(p in word_strategy(2, 5), seed in any::<u64>(), extra in 0usize..6, more in 1usize..6) {
            let c = Cylinder::new(p);
            let mut rng = rng_from_seed(seed);
            let member = c.sample(extra, &mut rng);
            prop_assert!(c.contains(&member));
            prop_assert!(c.contains(&member.random_extension(more, &mut rng)));
        }
    }
}
