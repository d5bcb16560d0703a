use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A finite alphabet `{0, .., size - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub const BINARY: Alphabet = Alphabet { size: 2 };

    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return invalid("alphabet size must be at least 1");
        }
        Ok(Alphabet { size })
    }

    pub fn size(self) -> usize {
        self.size
    }

    /// Number of words of length `len`, or `None` on overflow.
    pub fn word_count(self, len: usize) -> Option<usize> {
        let exp = u32::try_from(len).ok()?;
        self.size.checked_pow(exp)
    }

    pub fn contains(self, symbol: usize) -> bool {
        symbol < self.size
    }

    pub fn check_word(self, word: &[usize]) -> Result<()> {
        match word.iter().position(|&s| s >= self.size) {
            Some(i) => invalid(format!(
                "symbol {} at index {} is outside the alphabet of size {}",
                word[i], i, self.size
            )),
            None => Ok(()),
        }
    }

    /// Index of `word` among words of its length; index 0 is the most
    /// significant digit, so prefixes of a word index contiguous ranges.
    pub fn encode(self, word: &[usize]) -> usize {
        word.iter().fold(0, |acc, &s| acc * self.size + s)
    }

    /// Inverse of [`Alphabet::encode`].
    pub fn decode(self, mut index: usize, len: usize) -> Vec<usize> {
        let mut out = vec![0; len];
        for slot in out.iter_mut().rev() {
            *slot = index % self.size;
            index /= self.size;
        }
        out
    }

    /// All words of length `len`, in encoding order.
    pub fn words(self, len: usize) -> impl Iterator<Item = Vec<usize>> {
        let count = self.word_count(len).expect("word enumeration overflow");
        (0..count).map(move |i| self.decode(i, len))
    }
}

/// A finite word over an alphabet. Index 0 is the most recent (leftmost)
/// coordinate of a one-sided sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(symbols: Vec<usize>) -> Self {
        Word(symbols)
    }

    pub fn constant(symbol: usize, len: usize) -> Self {
        Word(vec![symbol; len])
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// The word `a . self`.
    pub fn prepend(&self, a: usize) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(a);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    /// Prepend symbols one at a time in the given order, so the last one
    /// ends up at index 0, keeping at most `max_len` coordinates.
    pub fn push_front_all(&mut self, added: &[usize], max_len: usize) {
        let mut v = Vec::with_capacity((self.0.len() + added.len()).min(max_len));
        v.extend(added.iter().rev().copied());
        v.extend_from_slice(&self.0);
        v.truncate(max_len);
        self.0 = v;
    }
}

impl Deref for Word {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

impl From<&[usize]> for Word {
    fn from(v: &[usize]) -> Self {
        Word(v.to_vec())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

/// Concordance time: the length of the longest common prefix.
pub fn concordance(x: &[usize], y: &[usize]) -> Result<usize> {
    if x.len() != y.len() {
        return invalid(format!(
            "concordance needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        ));
    }
    Ok(common_prefix(x, y))
}

pub(crate) fn common_prefix(x: &[usize], y: &[usize]) -> usize {
    x.iter().zip(y).take_while(|(a, b)| a == b).count()
}
