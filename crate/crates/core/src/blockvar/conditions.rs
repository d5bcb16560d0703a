use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::structure::BlockVariationPair;
use crate::symbolic::VariationSequence;

/// Default number of series terms examined.
pub const DEFAULT_HORIZON: usize = 1_000_000;

/// Finite-horizon rules for calling a series convergent or divergent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesProtocol {
    /// Partial sums at or above this count as divergent.
    pub divergence_threshold: f64,
    /// Extrapolated remainders below this count as convergent.
    pub remainder_tolerance: f64,
    /// Decade increment ratios at or above this count as non-shrinking.
    pub decade_ratio_floor: f64,
    /// Largest `r_l` over the last half of the levels accepted as `~ 0`.
    pub limsup_tolerance: f64,
}

impl Default for SeriesProtocol {
    fn default() -> Self {
        SeriesProtocol {
            divergence_threshold: 1e3,
            remainder_tolerance: 1e-6,
            decade_ratio_floor: 0.9,
            limsup_tolerance: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesClass {
    Convergent,
    Divergent,
    Undecided,
}

/// How a series was classified.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    pub class: SeriesClass,
    pub rule: String,
    pub terms: usize,
    pub partial_sum: f64,
    pub last_term: f64,
    pub tail_bound: Option<f64>,
    pub decade_ratios: Option<(f64, f64)>,
}

/// Classify `sum_{n=1}^N t_n` given the terms and, when known, a certified
/// bound on the remainder `sum_{n > N} t_n` (infinite when it diverges).
pub fn classify_series(terms: &[f64], tail_bound: Option<f64>, protocol: &SeriesProtocol) -> SeriesReport {
    let n = terms.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0f64);
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    for &t in terms {
        let y = t - comp;
        let s = acc + y;
        comp = (s - acc) - y;
        acc = s;
        prefix.push(acc);
    }
    let partial_sum = acc;
    let decade_ratios = if n >= 1000 {
        let inc = |hi: usize, lo: usize| prefix[hi] - prefix[lo];
        let (a, b, c, d) = (n, n / 10, n / 100, n / 1000);
        let last = inc(a, b) / inc(b, c);
        let prev = inc(b, c) / inc(c, d);
        Some((prev, last))
    } else {
        None
    };
    let mut report = SeriesReport {
        class: SeriesClass::Undecided,
        rule: "no rule decided the series at this horizon".into(),
        terms: n,
        partial_sum,
        last_term: terms.last().copied().unwrap_or(0.0),
        tail_bound,
        decade_ratios,
    };
    let mut decide = |class, rule: &str| {
        report.class = class;
        report.rule = rule.to_string();
    };
    if let Some(t) = tail_bound {
        if t.is_finite() {
            decide(SeriesClass::Convergent, "certified remainder bound is finite");
        } else {
            decide(SeriesClass::Divergent, "remainder bound diverges");
        }
        return report;
    }
    if partial_sum >= protocol.divergence_threshold {
        decide(SeriesClass::Divergent, "partial sum reached the divergence threshold");
        return report;
    }
    if let Some((prev, last)) = decade_ratios {
        if prev >= protocol.decade_ratio_floor && last >= protocol.decade_ratio_floor {
            decide(SeriesClass::Divergent, "decade increments do not shrink");
            return report;
        }
        if last.is_finite() && last < 0.5 {
            let inc = prefix[n] - prefix[n / 10];
            if inc * last / (1.0 - last) < protocol.remainder_tolerance {
                decide(SeriesClass::Convergent, "geometric extrapolation of decade increments");
                return report;
            }
        }
    }
    if n >= 2 {
        let half = &terms[n / 2..];
        if half[0] > 0.0 && half.windows(2).all(|w| w[1] >= w[0]) {
            decide(SeriesClass::Divergent, "positive terms do not decrease");
            return report;
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    HoldsAtHorizon,
    Fails,
    Inconclusive,
}

/// Which uniqueness condition to test.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    /// `sum_n var_n^2 < inf`.
    SquareSummable,
    /// `sum_n exp(-(1/2 + eps)(var_1 + .. + var_n)) = inf`.
    BerbeeEps { epsilon: f64 },
    /// `lim r_l = 0` and `sum_l b_l e^{-r_1 - .. - r_l} = inf`.
    Main(BlockVariationPair),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub condition: String,
    pub status: Status,
    pub horizon: usize,
    /// The inequality that failed, present exactly when `status` is `fails`.
    pub violated: Option<String>,
    pub note: String,
    pub witness: BTreeMap<String, f64>,
    pub series: Vec<(String, SeriesReport)>,
}

fn missing_data(condition: &str, horizon: usize, have: usize) -> ConditionVerdict {
    ConditionVerdict {
        condition: condition.into(),
        status: Status::Inconclusive,
        horizon,
        violated: None,
        note: format!("variation data ends at index {have}"),
        witness: BTreeMap::new(),
        series: Vec::new(),
    }
}

pub fn check_conditions(
    condition: &Condition,
    vars: &VariationSequence,
    horizon: usize,
    protocol: &SeriesProtocol,
) -> ConditionVerdict {
    match condition {
        Condition::SquareSummable => check_square(vars, horizon, protocol),
        Condition::BerbeeEps { epsilon } => check_berbee(vars, *epsilon, horizon, protocol),
        Condition::Main(pair) => check_main(pair, horizon, protocol),
    }
}

fn terms_from(vars: &VariationSequence, horizon: usize, f: impl Fn(f64) -> f64) -> Option<Vec<f64>> {
    (1..=horizon).map(|n| vars.get(n).map(&f)).collect()
}

fn check_square(vars: &VariationSequence, horizon: usize, protocol: &SeriesProtocol) -> ConditionVerdict {
    let name = "square_summable";
    let Some(terms) = terms_from(vars, horizon, |v| v * v) else {
        return missing_data(name, horizon, vars.len());
    };
    let rep = classify_series(&terms, vars.power_tail(horizon + 1, 2.0), protocol);
    let mut witness = BTreeMap::new();
    witness.insert("partial_sum".into(), rep.partial_sum);
    if let Some(t) = rep.tail_bound {
        witness.insert("tail_bound".into(), t);
        witness.insert("remainder_below_tolerance".into(), f64::from(u8::from(t < protocol.remainder_tolerance)));
    }
    let (status, violated) = match rep.class {
        SeriesClass::Convergent => (Status::HoldsAtHorizon, None),
        SeriesClass::Divergent => (Status::Fails, Some(format!("sum var_n^2 = inf ({})", rep.rule))),
        SeriesClass::Undecided => (Status::Inconclusive, None),
    };
    ConditionVerdict {
        condition: name.into(),
        status,
        horizon,
        violated,
        note: rep.rule.clone(),
        witness,
        series: vec![("sum var_n^2".into(), rep)],
    }
}

fn check_berbee(
    vars: &VariationSequence,
    epsilon: f64,
    horizon: usize,
    protocol: &SeriesProtocol,
) -> ConditionVerdict {
    let name = "berbee_eps";
    let Some(v) = terms_from(vars, horizon, |v| v) else {
        return missing_data(name, horizon, vars.len());
    };
    let mut cum = 0.0;
    let terms: Vec<f64> = v
        .iter()
        .map(|x| {
            cum += x;
            (-(0.5 + epsilon) * cum).exp()
        })
        .collect();
    let rep = classify_series(&terms, None, protocol);
    let mut witness = BTreeMap::new();
    witness.insert("epsilon".into(), epsilon);
    witness.insert("partial_sum".into(), rep.partial_sum);
    witness.insert("last_term".into(), rep.last_term);
    let (status, violated) = match rep.class {
        SeriesClass::Divergent => (Status::HoldsAtHorizon, None),
        SeriesClass::Convergent => (
            Status::Fails,
            Some(format!("sum exp(-(1/2 + eps) S_n) < inf ({})", rep.rule)),
        ),
        SeriesClass::Undecided => (Status::Inconclusive, None),
    };
    ConditionVerdict {
        condition: name.into(),
        status,
        horizon,
        violated,
        note: rep.rule.clone(),
        witness,
        series: vec![("sum exp(-(1/2 + eps) S_n)".into(), rep)],
    }
}

/// Terms `b_l e^{-r_1 - .. - r_l}` and `b_l e^{-r_1 - .. - r_{l-1}}`.
pub fn main_terms(pair: &BlockVariationPair) -> (Vec<f64>, Vec<f64>) {
    let mut through = Vec::with_capacity(pair.levels());
    let mut prefix = Vec::with_capacity(pair.levels());
    let mut cum = 0.0f64;
    for (&r, &b) in pair.rates().iter().zip(pair.blocks().lengths()) {
        prefix.push(b as f64 * (-cum).exp());
        cum += r;
        through.push(b as f64 * (-cum).exp());
    }
    (through, prefix)
}

fn check_main(pair: &BlockVariationPair, horizon: usize, protocol: &SeriesProtocol) -> ConditionVerdict {
    let name = "main";
    let levels = pair
        .blocks()
        .ends()
        .iter()
        .take_while(|&&e| e <= horizon.max(pair.blocks().ends()[0]))
        .count();
    let pair = pair.truncated(levels).expect("at least one level");
    let (through, prefix) = main_terms(&pair);
    let thm1 = classify_series(&through, None, protocol);
    let thm26 = classify_series(&prefix, None, protocol);
    let rates = pair.rates();
    let limsup = rates[rates.len() / 2..].iter().copied().fold(0.0, f64::max);
    let mut witness = BTreeMap::new();
    witness.insert("levels".into(), levels as f64);
    witness.insert("block_end".into(), pair.blocks().total() as f64);
    witness.insert("sum_through_r_l".into(), thm1.partial_sum);
    witness.insert("sum_through_r_l_minus_1".into(), thm26.partial_sum);
    witness.insert("limsup_r".into(), limsup);
    witness.insert("last_r".into(), *rates.last().unwrap());
    let (status, violated, note) = match thm1.class {
        SeriesClass::Divergent if limsup <= protocol.limsup_tolerance => {
            (Status::HoldsAtHorizon, None, thm1.rule.clone())
        }
        SeriesClass::Divergent => (
            Status::Inconclusive,
            None,
            format!("sum diverges but r_l over the last half of levels reaches {limsup:.6e}"),
        ),
        SeriesClass::Convergent => (
            Status::Fails,
            Some(format!("sum b_l e^(-r_1 - .. - r_l) < inf ({})", thm1.rule)),
            thm1.rule.clone(),
        ),
        SeriesClass::Undecided => (Status::Inconclusive, None, thm1.rule.clone()),
    };
    ConditionVerdict {
        condition: name.into(),
        status,
        horizon,
        violated,
        note,
        witness,
        series: vec![
            ("sum b_l e^(-r_1 - .. - r_l)".into(), thm1),
            ("sum b_l e^(-r_1 - .. - r_(l-1))".into(), thm26),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockvar::{make_blocks, pair_from_rho, r_from_variations, BlockStrategy, BlockStructure};
    use crate::symbolic::{Decay, GFunction};

    #[test]
    fn square_summable_power() {
        let vars = VariationSequence::from_decay(Decay::Power { scale: 1.0, exponent: 0.6 }, 1001).unwrap();
        let v = check_conditions(&Condition::SquareSummable, &vars, 1000, &SeriesProtocol::default());
        assert_eq!(v.status, Status::HoldsAtHorizon);
        let vars = VariationSequence::from_decay(Decay::Power { scale: 1.0, exponent: 0.5 }, 1001).unwrap();
        let v = check_conditions(&Condition::SquareSummable, &vars, 1000, &SeriesProtocol::default());
        assert_eq!(v.status, Status::Fails);
        assert!(v.violated.is_some());
    }

    #[test]
    fn berbee_harmonic() {
        let vars = VariationSequence::from_decay(Decay::Power { scale: 1.0, exponent: 1.0 }, 100_001).unwrap();
        let v = check_conditions(&Condition::BerbeeEps { epsilon: 0.1 }, &vars, 100_000, &SeriesProtocol::default());
        assert_eq!(v.status, Status::HoldsAtHorizon);
        let fast = VariationSequence::from_decay(Decay::Power { scale: 6.0, exponent: 1.0 }, 100_001).unwrap();
        let v = check_conditions(&Condition::BerbeeEps { epsilon: 0.1 }, &fast, 100_000, &SeriesProtocol::default());
        assert_eq!(v.status, Status::Fails);
    }

    #[test]
    fn main_condition_table1() {
        let g = GFunction::binary_markov(0.3, 0.6).unwrap();
        let pair = pair_from_rho(&g, &BlockStructure::unit(40).unwrap()).unwrap();
        let v = check_conditions(&Condition::Main(pair), &VariationSequence::from_g(&g, 2), 100, &SeriesProtocol::default());
        assert_eq!(v.status, Status::HoldsAtHorizon);
        assert_eq!(v.witness["limsup_r"], 0.0);
    }

    #[test]
    fn main_condition_convergent_fails() {
        let pair = BlockVariationPair::new(BlockStructure::unit(2000).unwrap(), vec![0.5; 2000]).unwrap();
        let vars = VariationSequence::from_decay(Decay::Power { scale: 1.0, exponent: 1.0 }, 2).unwrap();
        let v = check_conditions(&Condition::Main(pair), &vars, 2000, &SeriesProtocol::default());
        assert_eq!(v.status, Status::Fails);
    }

    #[test]
    fn main_condition_inverse_sqrt_geometric() {
        let n = 1 << 16;
        let vars = VariationSequence::from_decay(Decay::Power { scale: 1.0, exponent: 0.5 }, n + 1).unwrap();
        let blocks = make_blocks(&BlockStrategy::Geometric { c: 2.0 }, None, 64, Some(n)).unwrap();
        let pair = r_from_variations(&vars, &blocks).unwrap();
        let v = check_conditions(&Condition::Main(pair), &vars, n, &SeriesProtocol::default());
        assert_eq!(v.series[0].1.class, SeriesClass::Divergent);
        assert_eq!(v.status, Status::Inconclusive);
    }

    #[test]
    fn geometric_series_extrapolates() {
        let terms: Vec<f64> = (1..=2000).map(|n| 0.5f64.powi(n)).collect();
        let rep = classify_series(&terms, None, &SeriesProtocol::default());
        assert_eq!(rep.class, SeriesClass::Convergent);
        let ones = vec![1.0; 50];
        assert_eq!(classify_series(&ones, None, &SeriesProtocol::default()).class, SeriesClass::Divergent);
    }
}
