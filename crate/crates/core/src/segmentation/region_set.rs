use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Set of region ids backed by a bitmask. Trailing zero words are trimmed so
/// equal sets hash equally regardless of how they were built.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct RegionSet {
    words: Vec<u64>,
}

impl RegionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// `{0, 1, …, m-1}`.
    pub fn full(m: usize) -> Self {
        let mut s = Self {
            words: vec![u64::MAX; m / 64],
        };
        if !m.is_multiple_of(64) {
            s.words.push((1u64 << (m % 64)) - 1);
        }
        s.trim();
        s
    }

    pub fn from_ids(ids: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::new();
        for id in ids {
            s.insert(id);
        }
        s
    }

    pub fn insert(&mut self, id: usize) -> bool {
        let (w, bit) = (id / 64, 1u64 << (id % 64));
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        let fresh = self.words[w] & bit == 0;
        self.words[w] |= bit;
        fresh
    }

    pub fn remove(&mut self, id: usize) -> bool {
        let (w, bit) = (id / 64, 1u64 << (id % 64));
        let Some(word) = self.words.get_mut(w) else {
            return false;
        };
        let present = *word & bit != 0;
        *word &= !bit;
        self.trim();
        present
    }

    pub fn with(&self, id: usize) -> Self {
        let mut s = self.clone();
        s.insert(id);
        s
    }

    pub fn contains(&self, id: usize) -> bool {
        self.words
            .get(id / 64)
            .is_some_and(|w| w & (1u64 << (id % 64)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn max(&self) -> Option<usize> {
        let last = self.words.last()?;
        Some((self.words.len() - 1) * 64 + 63 - last.leading_zeros() as usize)
    }

    /// `{0..m} ∖ self`.
    pub fn complement(&self, m: usize) -> Self {
        let mut full = Self::full(m);
        for (dst, src) in full.words.iter_mut().zip(&self.words) {
            *dst &= !src;
        }
        full.trim();
        full
    }

    pub fn is_subset(&self, other: &RegionSet) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    /// Ascending ids.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }
}

impl FromIterator<usize> for RegionSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Self::from_ids(iter)
    }
}

impl fmt::Debug for RegionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for RegionSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for RegionSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Vec::<usize>::deserialize(d)?.into_iter().collect())
    }
}
