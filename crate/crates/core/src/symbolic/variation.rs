use serde::{Deserialize, Serialize};

use super::gfunction::{log_sigmoid, Couplings, GFunction, GKind, LogisticG};
use crate::error::{invalid, Result};

/// Whether a variation value is exact or only an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    UpperBound,
}

/// A variation value with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub value: f64,
    pub provenance: Provenance,
}

/// `var_n log g`: the sup of `|log g(x) - log g(y)|` over words agreeing in
/// their first `n` coordinates.
///
/// Tables are exact. Logistic families return the bound
/// `2 * sum_{k >= n} |theta_k|` (theta_0 included at `n = 0`) for the
/// untruncated family.
pub fn variation(g: &GFunction, n: usize) -> Variation {
    match g.kind() {
        GKind::Table(_) => Variation {
            value: table_variation(g, n),
            provenance: Provenance::Exact,
        },
        GKind::Logistic(l) => Variation {
            value: 2.0 * l.abs_tail(n),
            provenance: Provenance::UpperBound,
        },
    }
}

/// Exact variation of the evaluated kernel, i.e. the sup over pasts truncated
/// at the evaluation depth. Same as [`variation`] for tables.
pub fn truncated_variation(g: &GFunction, n: usize) -> f64 {
    match g.kind() {
        GKind::Table(_) => table_variation(g, n),
        GKind::Logistic(l) => logistic_truncated_variation(l, n),
    }
}

fn table_variation(g: &GFunction, n: usize) -> f64 {
    let GKind::Table(t) = g.kind() else { unreachable!() };
    let len = t.memory() + 1;
    if n >= len {
        return 0.0;
    }
    let s = g.alphabet().size();
    let class_size = s.pow((len - n) as u32);
    t.log_values()
        .chunks(class_size)
        .map(|class| {
            let (lo, hi) = class
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// For fixed new symbol and fixed first coordinates the field ranges over an
/// interval `[c - T, c + T]`, and `log sigma` is monotone with decreasing
/// slope, so the sup is attained at the extreme prefix field.
fn logistic_truncated_variation(l: &LogisticG, n: usize) -> f64 {
    let theta = l.truncated_theta();
    let all: f64 = theta.iter().map(|t| t.abs()).sum();
    if n == 0 {
        let lo = l.theta0() - all;
        let hi = l.theta0() + all;
        let max = log_sigmoid(hi).max(log_sigmoid(-lo));
        let min = log_sigmoid(lo).min(log_sigmoid(-hi));
        return max - min;
    }
    // coordinates x_1 .. x_{n-1} are shared, x_n .. x_depth are free
    let shared: f64 = theta.iter().take(n - 1).map(|t| t.abs()).sum();
    let free = all - shared;
    let c_min = l.theta0() - shared;
    let c_max = l.theta0() + shared;
    let one = log_sigmoid(c_min + free) - log_sigmoid(c_min - free);
    let zero = log_sigmoid(-c_max + free) - log_sigmoid(-c_max - free);
    one.max(zero)
}

/// Closed-form decay models for variation sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    /// `scale * max(n, 1)^(-exponent)`.
    Power { scale: f64, exponent: f64 },
    /// `scale * ratio^n`, `0 <= ratio < 1`.
    Geometric { scale: f64, ratio: f64 },
}

impl Decay {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Decay::Power { scale, exponent } => {
                if !(scale.is_finite() && scale >= 0.0 && exponent.is_finite() && exponent > 0.0) {
                    return invalid("power decay needs finite scale >= 0 and exponent > 0");
                }
            }
            Decay::Geometric { scale, ratio } => {
                if !(scale.is_finite() && scale >= 0.0 && (0.0..1.0).contains(&ratio)) {
                    return invalid("geometric decay needs finite scale >= 0 and ratio in [0, 1)");
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, n: usize) -> f64 {
        match *self {
            Decay::Power { scale, exponent } => scale * (n.max(1) as f64).powf(-exponent),
            Decay::Geometric { scale, ratio } => scale * ratio.powi(n.min(i32::MAX as usize) as i32),
        }
    }

    /// Upper bound on `sum_{n >= from} value(n)^p`; infinite when divergent.
    pub fn power_tail(&self, from: usize, p: f64) -> f64 {
        match *self {
            Decay::Power { scale, exponent } => {
                if scale == 0.0 {
                    return 0.0;
                }
                let q = exponent * p;
                if q <= 1.0 {
                    return f64::INFINITY;
                }
                let (head, start) = if from == 0 {
                    (self.value(0).powf(p), 1usize)
                } else {
                    (0.0, from)
                };
                let m = start as f64;
                // f(m) + integral_m^inf f
                head + scale.powf(p) * (m.powf(-q) + m.powf(1.0 - q) / (q - 1.0))
            }
            Decay::Geometric { scale, ratio } => {
                let rp = ratio.powf(p);
                scale.powf(p) * rp.powf(from as f64) / (1.0 - rp)
            }
        }
    }
}

/// What is known about a variation sequence beyond its stored values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// All later values are zero.
    Zero,
    /// Later values are bounded by (or equal to) this decay.
    Decay(Decay),
    /// Nothing is known.
    Unknown,
}

/// The sequence `var_n log g`, `n >= 0`, stored up to some length, with an
/// optional model of its tail.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationSequence {
    values: Vec<f64>,
    provenance: Vec<Provenance>,
    tail: Tail,
}

impl VariationSequence {
    pub fn new(values: Vec<f64>, provenance: Vec<Provenance>, tail: Tail) -> Result<Self> {
        if values.len() != provenance.len() {
            return invalid("variation values and provenance flags differ in length");
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid(format!("variation value at index {i} is not a finite nonnegative number"));
        }
        if let Tail::Decay(d) = &tail {
            d.validate()?;
        }
        Ok(VariationSequence { values, provenance, tail })
    }

    pub fn exact(values: Vec<f64>, tail: Tail) -> Result<Self> {
        let provenance = vec![Provenance::Exact; values.len()];
        Self::new(values, provenance, tail)
    }

    /// Materializes `len` values of a closed-form decay.
    pub fn from_decay(decay: Decay, len: usize) -> Result<Self> {
        decay.validate()?;
        let values = (0..len).map(|n| decay.value(n)).collect();
        Self::new(values, vec![Provenance::Exact; len], Tail::Decay(decay))
    }

    /// Variations of `g` for `n < len`, with the tail model `g` implies.
    pub fn from_g(g: &GFunction, len: usize) -> Self {
        let (values, provenance): (Vec<f64>, Vec<Provenance>) = (0..len)
            .map(|n| {
                let v = variation(g, n);
                (v.value, v.provenance)
            })
            .unzip();
        let tail = match g.kind() {
            GKind::Table(t) if len > t.memory() => Tail::Zero,
            GKind::Table(_) => Tail::Unknown,
            GKind::Logistic(l) => match *l.couplings() {
                // 2 * (n^-a + n^(1-a)/(a-1)) <= 2a/(a-1) * n^(1-a)
                Couplings::Power { scale, exponent } => Tail::Decay(Decay::Power {
                    scale: 2.0 * scale.abs() * exponent / (exponent - 1.0),
                    exponent: exponent - 1.0,
                }),
                Couplings::Explicit { ref theta, tail_bound } => {
                    if tail_bound == 0.0 && len > theta.len() {
                        Tail::Zero
                    } else {
                        Tail::Unknown
                    }
                }
            },
        };
        VariationSequence { values, provenance, tail }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// `var_n`, falling back on the tail model past the stored values.
    pub fn get(&self, n: usize) -> Option<f64> {
        if let Some(&v) = self.values.get(n) {
            return Some(v);
        }
        match self.tail {
            Tail::Zero => Some(0.0),
            Tail::Decay(d) => Some(d.value(n)),
            Tail::Unknown => None,
        }
    }

    /// Upper bound on `sum_{n >= from} var_n^p`; `None` when the tail is
    /// unknown, infinite when the tail model diverges.
    pub fn power_tail(&self, from: usize, p: f64) -> Option<f64> {
        let stored: f64 = self.values.iter().skip(from).map(|v| v.powf(p)).sum();
        let start = from.max(self.values.len());
        let rest = match self.tail {
            Tail::Zero => 0.0,
            Tail::Decay(d) => d.power_tail(start, p),
            Tail::Unknown => return None,
        };
        Some(stored + rest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::Alphabet;

    fn table1() -> GFunction {
        GFunction::binary_markov(0.3, 0.6).unwrap()
    }

    /// Oracle: enumerate all pairs of (m+1)-words.
    fn brute_variation(g: &GFunction, n: usize) -> f64 {
        let len = g.memory().unwrap() + 1;
        let a = g.alphabet();
        let mut best = 0.0f64;
        for x in a.words(len) {
            for y in a.words(len) {
                if x[..n.min(len)] == y[..n.min(len)] {
                    let d = (g.log_eval(&x).unwrap() - g.log_eval(&y).unwrap()).abs();
                    best = best.max(d);
                }
            }
        }
        best
    }

    #[test]
    fn table_variation_examples() {
        let g = table1();
        assert!((variation(&g, 1).value - 2f64.ln()).abs() < 1e-12);
        assert!((brute_variation(&g, 1) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(variation(&g, 2).value, 0.0);
        let iid = GFunction::iid(vec![0.2, 0.8]).unwrap();
        assert_eq!(variation(&iid, 1).value, 0.0);
        assert_eq!(variation(&g, 1).provenance, Provenance::Exact);
    }

    #[test]
    fn table_variation_matches_brute_force_and_decreases() {
        let a = Alphabet::new(3).unwrap();
        let cols: Vec<Vec<f64>> = (0..9)
            .map(|h| {
                let w = [1.0 + h as f64, 2.0 + (h % 4) as f64, 1.5];
                let s: f64 = w.iter().sum();
                w.iter().map(|v| v / s).collect()
            })
            .collect();
        let g = GFunction::table(a, 2, cols).unwrap();
        let mut prev = f64::INFINITY;
        for n in 0..5 {
            let v = variation(&g, n).value;
            assert!((v - brute_variation(&g, n)).abs() < 1e-12);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn logistic_bound_and_truncated_exact() {
        let theta: Vec<f64> = (1..=8).map(|k| 0.3 / (k as f64).powf(1.5)).collect();
        let g = GFunction::logistic(0.2, Couplings::Explicit { theta, tail_bound: 0.0 }, 8).unwrap();
        let a = g.alphabet();
        for n in 0..=9 {
            // oracle over all depth-8 pasts
            let mut best = 0.0f64;
            for x in a.words(9) {
                for y in a.words(9) {
                    if x[..n.min(9)] == y[..n.min(9)] {
                        best = best.max((g.log_eval(&x).unwrap() - g.log_eval(&y).unwrap()).abs());
                    }
                }
            }
            let exact = truncated_variation(&g, n);
            assert!((exact - best).abs() < 1e-12, "n={n}: {exact} vs {best}");
            let bound = variation(&g, n);
            assert_eq!(bound.provenance, Provenance::UpperBound);
            assert!(bound.value + 1e-15 >= exact);
        }
    }

    #[test]
    fn decay_tails_bound_partial_sums() {
        let d = Decay::Power { scale: 1.0, exponent: 0.6 };
        let direct: f64 = (10..2_000_000).map(|n| d.value(n).powi(2)).sum();
        assert!(d.power_tail(10, 2.0) >= direct);
        assert!(d.power_tail(10, 1.0).is_infinite());
        let geo = Decay::Geometric { scale: 1.0, ratio: 0.5f64.sqrt() };
        assert!((geo.power_tail(0, 2.0) - 2.0).abs() < 1e-12);
        assert!((geo.power_tail(3, 2.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sequence_from_g_tails() {
        let g = table1();
        let v = VariationSequence::from_g(&g, 4);
        assert_eq!(v.tail(), Tail::Zero);
        assert_eq!(v.get(100), Some(0.0));
        assert!(VariationSequence::exact(vec![-1.0], Tail::Zero).is_err());
    }
}
