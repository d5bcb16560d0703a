use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::symbolic::{Tail, VariationSequence};

/// Rates equal to zero are replaced by this in closed-form evaluations.
pub const DEGENERATE_RATE: f64 = 1e-15;

/// Block lengths `b_1, .., b_M` with cumulative ends `B_l = b_1 + .. + b_l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStructure {
    b: Vec<usize>,
    ends: Vec<usize>,
}

impl BlockStructure {
    pub fn new(b: Vec<usize>) -> Result<Self> {
        if b.is_empty() {
            return invalid("block structure needs at least one level");
        }
        if let Some(i) = b.iter().position(|&x| x == 0) {
            return invalid(format!("block length at level {} is zero", i + 1));
        }
        let mut ends = Vec::with_capacity(b.len());
        let mut acc = 0usize;
        for &x in &b {
            acc = acc
                .checked_add(x)
                .ok_or_else(|| crate::Error::InvalidInput("block ends overflow".into()))?;
            ends.push(acc);
        }
        Ok(BlockStructure { b, ends })
    }

    pub fn unit(levels: usize) -> Result<Self> {
        Self::new(vec![1; levels])
    }

    pub fn levels(&self) -> usize {
        self.b.len()
    }

    pub fn lengths(&self) -> &[usize] {
        &self.b
    }

    /// `B_1, .., B_M`.
    pub fn ends(&self) -> &[usize] {
        &self.ends
    }

    /// `B_{l-1}` for level `l` (1-based), with `B_0 = 0`.
    pub fn start(&self, level: usize) -> usize {
        if level <= 1 {
            0
        } else {
            self.ends[level - 2]
        }
    }

    pub fn total(&self) -> usize {
        *self.ends.last().unwrap()
    }

    /// The first `levels` levels.
    pub fn truncated(&self, levels: usize) -> Result<Self> {
        Self::new(self.b[..levels.min(self.b.len())].to_vec())
    }
}

/// Where the rates of a pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    FromRho,
    FromS,
    Manual,
}

/// A block structure together with rates `r_l >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockVariationPair {
    blocks: BlockStructure,
    rates: Vec<f64>,
    source: RateSource,
    /// `s_l` when the rates were derived from variations.
    s: Option<Vec<f64>>,
}

impl BlockVariationPair {
    pub fn new(blocks: BlockStructure, rates: Vec<f64>) -> Result<Self> {
        Self::with_source(blocks, rates, RateSource::Manual, None)
    }

    pub fn with_source(
        blocks: BlockStructure,
        rates: Vec<f64>,
        source: RateSource,
        s: Option<Vec<f64>>,
    ) -> Result<Self> {
        if rates.len() != blocks.levels() {
            return invalid(format!(
                "{} rates for {} levels",
                rates.len(),
                blocks.levels()
            ));
        }
        if let Some(i) = rates.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
            return invalid(format!("rate at level {} is not a finite nonnegative number", i + 1));
        }
        Ok(BlockVariationPair { blocks, rates, source, s })
    }

    pub fn blocks(&self) -> &BlockStructure {
        &self.blocks
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn source(&self) -> RateSource {
        self.source
    }

    pub fn s_values(&self) -> Option<&[f64]> {
        self.s.as_deref()
    }

    pub fn levels(&self) -> usize {
        self.rates.len()
    }

    /// True when some rate is zero (closed forms then use [`DEGENERATE_RATE`]).
    pub fn is_degenerate(&self) -> bool {
        self.rates.contains(&0.0)
    }

    /// Rates with zeros replaced by [`DEGENERATE_RATE`].
    pub fn effective_rates(&self) -> Vec<f64> {
        self.rates.iter().map(|&r| r.max(DEGENERATE_RATE)).collect()
    }

    /// The pair with rates `r_l + s * b_l`.
    pub fn inflated(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return invalid("sup-log gap must be finite and nonnegative");
        }
        let rates = self
            .rates
            .iter()
            .zip(self.blocks.lengths())
            .map(|(&r, &b)| r + s * b as f64)
            .collect();
        Self::with_source(self.blocks.clone(), rates, self.source, self.s.clone())
    }

    pub fn truncated(&self, levels: usize) -> Result<Self> {
        let blocks = self.blocks.truncated(levels)?;
        let k = blocks.levels();
        Self::with_source(
            blocks,
            self.rates[..k].to_vec(),
            self.source,
            self.s.as_ref().map(|s| s[..k].to_vec()),
        )
    }
}

/// `delta_bar = (1 + sum_l b_l e^{-r_1..-r_{l-1}} (1 - e^{-r_l})) / sum_l b_l e^{-r_1..-r_{l-1}}`.
pub fn delta_bar(pair: &BlockVariationPair) -> f64 {
    *delta_bar_prefixes(pair).last().unwrap()
}

/// `delta_bar` of the first `l` levels, for `l = 1..M`.
pub fn delta_bar_prefixes(pair: &BlockVariationPair) -> Vec<f64> {
    let mut out = Vec::with_capacity(pair.levels());
    let mut survive = 1.0f64;
    let mut num = 1.0f64;
    let mut den = 0.0f64;
    for (r, &b) in pair.effective_rates().into_iter().zip(pair.blocks.lengths()) {
        let b = b as f64;
        num += b * survive * -(-r).exp_m1();
        den += b * survive;
        survive *= (-r).exp();
        out.push(num / den);
    }
    out
}

/// `s_l = sum_{k = B_{l-1}}^{B_l - 1} var_k^2 / 8` and `r_l = sqrt(2 s_l) + 2 s_l`.
pub fn r_from_variations(
    vars: &VariationSequence,
    blocks: &BlockStructure,
) -> Result<BlockVariationPair> {
    let mut s = Vec::with_capacity(blocks.levels());
    let mut rates = Vec::with_capacity(blocks.levels());
    for level in 1..=blocks.levels() {
        let lo = blocks.start(level);
        let hi = blocks.ends()[level - 1];
        let mut acc = 0.0;
        for k in lo..hi {
            let Some(v) = vars.get(k) else {
                return invalid(format!(
                    "variation data ends at index {} but level {level} needs index {}",
                    vars.len(),
                    hi - 1
                ));
            };
            acc += v * v;
        }
        let s_l = acc / 8.0;
        s.push(s_l);
        rates.push((2.0 * s_l).sqrt() + 2.0 * s_l);
    }
    BlockVariationPair::with_source(blocks.clone(), rates, RateSource::FromS, Some(s))
}

/// How to lay out block lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStrategy {
    /// `b_l = 1`.
    Unit,
    /// `B_l = ceil(c^l / (c - 1))`, `c > 1`.
    Geometric { c: f64 },
    /// `B_l = min { B > B_{l-1} : sum_{n >= B} var_n^2 <= L / 2^l }` with
    /// `L = sum_{n >= 0} var_n^2`.
    Tail,
    /// Explicit block lengths.
    Manual { b: Vec<usize> },
}

/// Block structure with `levels` levels, stopping early once `B_l` would
/// exceed `max_total` (when given).
pub fn make_blocks(
    strategy: &BlockStrategy,
    vars: Option<&VariationSequence>,
    levels: usize,
    max_total: Option<usize>,
) -> Result<BlockStructure> {
    if levels == 0 {
        return invalid("need at least one level");
    }
    let limit = max_total.unwrap_or(usize::MAX);
    let mut ends: Vec<usize> = Vec::with_capacity(levels.min(1 << 20));
    match strategy {
        BlockStrategy::Unit => {
            let m = levels.min(limit);
            ends.extend(1..=m);
        }
        BlockStrategy::Manual { b } => {
            let mut acc = 0usize;
            for &x in b.iter().take(levels) {
                if x == 0 {
                    return invalid("manual block lengths must be positive");
                }
                acc = acc.saturating_add(x);
                if acc > limit {
                    break;
                }
                ends.push(acc);
            }
        }
        BlockStrategy::Geometric { c } => {
            let c = *c;
            if !(c.is_finite() && c > 1.0) {
                return invalid("geometric blocks need c > 1");
            }
            for l in 1..=levels {
                let x = c.powi(l as i32) / (c - 1.0);
                if !x.is_finite() || x > 9.0e15 {
                    if ends.is_empty() {
                        return invalid("geometric block end overflows");
                    }
                    break;
                }
                let snapped = x.round();
                let end = if (x - snapped).abs() <= 1e-9 * x.max(1.0) {
                    snapped
                } else {
                    x.ceil()
                } as usize;
                if end > limit {
                    break;
                }
                ends.push(end);
            }
        }
        BlockStrategy::Tail => {
            let Some(vars) = vars else {
                return invalid("tail blocks need a variation sequence");
            };
            let tail = SquareTail::new(vars)?;
            let total = tail.from(0);
            let mut prev = 0usize;
            for l in 1..=levels {
                let target = total / 2f64.powi(l as i32);
                let Some(end) = tail.first_below(prev + 1, target) else {
                    break;
                };
                if end > limit {
                    break;
                }
                ends.push(end);
                prev = end;
            }
        }
    }
    if ends.is_empty() {
        return invalid("no level fits within the horizon");
    }
    let mut b = Vec::with_capacity(ends.len());
    let mut prev = 0;
    for &e in &ends {
        b.push(e - prev);
        prev = e;
    }
    BlockStructure::new(b)
}

/// Square tail sums `sum_{n >= B} var_n^2` from stored suffix sums plus the
/// tail model.
struct SquareTail<'a> {
    vars: &'a VariationSequence,
    suffix: Vec<f64>,
}

impl<'a> SquareTail<'a> {
    fn new(vars: &'a VariationSequence) -> Result<Self> {
        let beyond = match vars.tail() {
            Tail::Unknown => return invalid("tail blocks need a variation tail model"),
            _ => vars.power_tail(vars.len(), 2.0).unwrap(),
        };
        if !beyond.is_finite() {
            return invalid("tail blocks need square-summable variations");
        }
        let mut suffix = vec![0.0; vars.len() + 1];
        suffix[vars.len()] = beyond;
        for n in (0..vars.len()).rev() {
            suffix[n] = suffix[n + 1] + vars.values()[n].powi(2);
        }
        Ok(SquareTail { vars, suffix })
    }

    fn from(&self, b: usize) -> f64 {
        match self.suffix.get(b) {
            Some(&v) => v,
            None => self.vars.power_tail(b, 2.0).unwrap(),
        }
    }

    /// Smallest `B >= start` with tail at most `target` (relative slack 1e-12).
    fn first_below(&self, start: usize, target: f64) -> Option<usize> {
        let ok = |b: usize| self.from(b) <= target * (1.0 + 1e-12);
        if ok(start) {
            return Some(start);
        }
        let mut hi = start.max(1);
        loop {
            hi = hi.checked_mul(2)?;
            if hi > (1usize << 53) {
                return None;
            }
            if ok(hi) {
                break;
            }
        }
        let mut lo = start;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }
}
