//! Multi-indices `α = (α_i^k)` over temporal modes `i` and noise channels `k`,
//! their truncated index sets and the `Q`-weights `q^α`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

/// Default upper bound on the cardinality of an enumerated index set.
pub const DEFAULT_CARDINALITY_CAP: usize = 200_000;

/// One stored entry `α_i^k = count` with `count ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Entry {
    pub mode: u32,
    pub channel: u32,
    pub count: u32,
}

/// Sparse multi-index. Entries are kept sorted by `(mode, channel)` and zero
/// counts are never stored, so structural equality is value equality.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<Entry>,
}

impl MultiIndex {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a multi-index from `(i, k, count)` triples. Zero counts are
    /// dropped and repeated keys are summed.
    pub fn from_triples(triples: &[(u32, u32, u32)]) -> Result<Self> {
        let mut alpha = Self::empty();
        for &(mode, channel, count) in triples {
            if mode == 0 || channel == 0 {
                return Err(Error::InvalidParameter(format!(
                    "multi-index keys are 1-based, got ({mode},{channel})"
                )));
            }
            for _ in 0..count {
                alpha = alpha.increment(mode, channel);
            }
        }
        Ok(alpha)
    }

    /// `α_i^1 = 1`, the first-order index for mode `i` on channel `k`.
    pub fn unit(mode: u32, channel: u32) -> Self {
        Self {
            entries: alloc::vec![Entry { mode, channel, count: 1 }],
        }
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `α_i^k`, zero when absent.
    pub fn get(&self, mode: u32, channel: u32) -> u32 {
        self.position(mode, channel)
            .map(|p| self.entries[p].count)
            .unwrap_or(0)
    }

    fn position(&self, mode: u32, channel: u32) -> core::result::Result<usize, usize> {
        self.entries
            .binary_search_by(|e| (e.mode, e.channel).cmp(&(mode, channel)))
    }

    /// `|α| = Σ α_i^k`.
    pub fn order(&self) -> u32 {
        self.entries.iter().map(|e| e.count).sum()
    }

    /// `α! = Π α_i^k!`, exact, with overflow reported.
    pub fn factorial(&self) -> Result<u128> {
        self.entries.iter().try_fold(1u128, |acc, e| {
            acc.checked_mul(factorial(e.count)?)
                .ok_or(Error::FactorialOverflow(e.count))
        })
    }

    /// `α!` as a float, for use in `1/√α!` normalisations.
    pub fn factorial_f64(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| (1..=e.count).map(f64::from).product::<f64>())
            .product()
    }

    /// `α⁻(i,k)`: the entry at `(i,k)` reduced by one, clamped at zero.
    pub fn decrement(&self, mode: u32, channel: u32) -> Self {
        let mut out = self.clone();
        if let Ok(p) = out.position(mode, channel) {
            if out.entries[p].count == 1 {
                out.entries.remove(p);
            } else {
                out.entries[p].count -= 1;
            }
        }
        out
    }

    pub fn increment(&self, mode: u32, channel: u32) -> Self {
        let mut out = self.clone();
        match out.position(mode, channel) {
            Ok(p) => out.entries[p].count += 1,
            Err(p) => out.entries.insert(p, Entry { mode, channel, count: 1 }),
        }
        out
    }

    /// Entrywise sum `α + β`.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for e in &other.entries {
            match out.position(e.mode, e.channel) {
                Ok(p) => out.entries[p].count += e.count,
                Err(p) => out.entries.insert(p, *e),
            }
        }
        out
    }

    pub fn max_mode(&self) -> u32 {
        self.entries.iter().map(|e| e.mode).max().unwrap_or(0)
    }

    pub fn max_channel(&self) -> u32 {
        self.entries.iter().map(|e| e.channel).max().unwrap_or(0)
    }

    /// File-name-safe rendering, e.g. `u_1-1-2__3-2-1`; `u_0` for the empty index.
    pub fn file_stem(&self) -> String {
        if self.is_empty() {
            return String::from("u_0");
        }
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|e| format!("{}-{}-{}", e.mode, e.channel, e.count))
            .collect();
        format!("u_{}", parts.join("__"))
    }
}

/// Graded order: lower `|α|` first, then lexicographic on the flattened
/// `(i, k, count)` entries.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.entries.cmp(&other.entries))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical rendering `(1,1):2;(3,2):1`; the empty index renders as `()`.
impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("()");
        }
        for (n, e) in self.entries.iter().enumerate() {
            if n > 0 {
                f.write_str(";")?;
            }
            write!(f, "({},{}):{}", e.mode, e.channel, e.count)?;
        }
        Ok(())
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "()" || s.is_empty() {
            return Ok(Self::empty());
        }
        let bad = || Error::InvalidParameter(format!("malformed multi-index `{s}`"));
        let mut triples = Vec::new();
        for part in s.split(';') {
            let (key, count) = part.split_once(':').ok_or_else(bad)?;
            let key = key
                .trim()
                .strip_prefix('(')
                .and_then(|k| k.strip_suffix(')'))
                .ok_or_else(bad)?;
            let (i, k) = key.split_once(',').ok_or_else(bad)?;
            let parse = |v: &str| v.trim().parse::<u32>().map_err(|_| bad());
            triples.push((parse(i)?, parse(k)?, parse(count)?));
        }
        Self::from_triples(&triples)
    }
}

fn factorial(n: u32) -> Result<u128> {
    (1..=u128::from(n)).try_fold(1u128, |acc, m| acc.checked_mul(m).ok_or(Error::FactorialOverflow(n)))
}

/// `binomial(n, k)` in `u128`, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        // acc * (n - j) / (j + 1) stays integral at every step
        acc = acc.checked_mul(u128::from(n - j))? / u128::from(j + 1);
    }
    Some(acc)
}

/// Total-degree truncation `(I, K, N)` of the index set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Truncation {
    pub modes: u32,
    pub channels: u32,
    pub order: u32,
}

impl Truncation {
    pub fn new(modes: u32, channels: u32, order: u32) -> Result<Self> {
        if modes == 0 || channels == 0 {
            return Err(Error::InvalidParameter(format!(
                "truncation needs I ≥ 1 and K ≥ 1, got I={modes}, K={channels}"
            )));
        }
        Ok(Self { modes, channels, order })
    }

    /// `binomial(I·K + N, N)`.
    pub fn cardinality(&self) -> Option<u128> {
        let vars = u64::from(self.modes) * u64::from(self.channels);
        binomial(vars + u64::from(self.order), u64::from(self.order))
    }
}

/// Graded, decrement-closed truncation of the multi-index set.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiIndexSet {
    indices: Vec<MultiIndex>,
    truncation: Truncation,
}

impl MultiIndexSet {
    /// All `α` with support in `i ≤ I`, `k ≤ K` and `|α| ≤ N`, graded.
    pub fn enumerate(modes: u32, channels: u32, order: u32) -> Result<Self> {
        Self::enumerate_with_cap(modes, channels, order, DEFAULT_CARDINALITY_CAP)
    }

    pub fn enumerate_with_cap(modes: u32, channels: u32, order: u32, cap: usize) -> Result<Self> {
        let truncation = Truncation::new(modes, channels, order)?;
        let count = truncation.cardinality().unwrap_or(u128::MAX);
        if count > cap as u128 {
            return Err(Error::TruncationTooLarge { count, cap });
        }
        let vars: Vec<(u32, u32)> = (1..=modes)
            .flat_map(|i| (1..=channels).map(move |k| (i, k)))
            .collect();
        let mut indices = Vec::with_capacity(count as usize);
        let mut current = Vec::new();
        extend_indices(&vars, order, &mut current, &mut indices);
        indices.sort();
        Ok(Self { indices, truncation })
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn get(&self, pos: usize) -> &MultiIndex {
        &self.indices[pos]
    }

    /// Position of `α` in the graded ordering.
    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(alpha).ok()
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        self.position(alpha).is_some()
    }

    /// Half-open position range of the indices with `|α| = n`.
    pub fn order_range(&self, n: u32) -> core::ops::Range<usize> {
        let start = self.indices.partition_point(|a| a.order() < n);
        let end = self.indices.partition_point(|a| a.order() <= n);
        start..end
    }
}

fn extend_indices(
    vars: &[(u32, u32)],
    budget: u32,
    current: &mut Vec<(u32, u32, u32)>,
    out: &mut Vec<MultiIndex>,
) {
    let Some((&(mode, channel), rest)) = vars.split_first() else {
        let entries = current
            .iter()
            .filter(|t| t.2 > 0)
            .map(|&(mode, channel, count)| Entry { mode, channel, count })
            .collect();
        out.push(MultiIndex { entries });
        return;
    };
    for count in 0..=budget {
        current.push((mode, channel, count));
        extend_indices(rest, budget - count, current, out);
        current.pop();
    }
}

/// Positive weights `q_k`, `k = 1..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    q: Vec<f64>,
}

impl WeightSequence {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidParameter("weight sequence is empty".into()));
        }
        if let Some(bad) = q.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParameter(format!("weight {bad} is not positive")));
        }
        Ok(Self { q })
    }

    pub fn ones(channels: usize) -> Self {
        Self { q: alloc::vec![1.0; channels] }
    }

    pub fn uniform(channels: usize, q: f64) -> Result<Self> {
        Self::new(alloc::vec![q; channels])
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    /// `q_k` for 1-based `k`.
    pub fn q(&self, channel: usize) -> Result<f64> {
        channel
            .checked_sub(1)
            .and_then(|c| self.q.get(c).copied())
            .ok_or(Error::ChannelOutOfRange { channel, max: self.q.len() })
    }

    /// `q^α = Π q_k^{α_i^k}`.
    pub fn weight(&self, alpha: &MultiIndex) -> Result<f64> {
        let mut w = 1.0;
        for e in alpha.entries() {
            let q = self.q(e.channel as usize)?;
            w *= num_traits::Float::powi(q, e.count as i32);
        }
        Ok(w)
    }
}
