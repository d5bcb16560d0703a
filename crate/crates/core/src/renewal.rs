//! The dominating integer chain `Y_n`, its renewal equation and exact
//! solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blockvar::BlockVariationPair;
use crate::error::{invalid, Result};

/// Renewal description of a block-variation pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalSpec {
    pub pair: BlockVariationPair,
    /// `q_l = e^{-r_1 - .. - r_{l-1}} (1 - e^{-r_l})`.
    pub q: Vec<f64>,
    /// `(j, p_j)` on the grid `B_1 < .. < B_M`.
    pub p: Vec<(usize, f64)>,
    /// `a_0 .. a_{B_M}`.
    pub a: Vec<f64>,
    pub expected_t1: f64,
    pub sum_a: f64,
}

impl RenewalSpec {
    pub fn limit(&self) -> f64 {
        self.sum_a / self.expected_t1
    }
}

pub fn build_spec(pair: &BlockVariationPair) -> RenewalSpec {
    let rates = pair.effective_rates();
    let blocks = pair.blocks();
    let m = pair.levels();
    let mut q = Vec::with_capacity(m);
    let mut survive = 1.0f64;
    let mut expected_t1 = 0.0;
    let mut sum_a = 1.0;
    for (l, &r) in rates.iter().enumerate() {
        let b = blocks.lengths()[l] as f64;
        let ql = survive * -(-r).exp_m1();
        expected_t1 += b * survive;
        sum_a += b * ql;
        q.push(ql);
        survive *= (-r).exp();
    }
    let mut p: Vec<(usize, f64)> = blocks.ends()[..m - 1]
        .iter()
        .zip(&q)
        .map(|(&j, &ql)| (j, ql))
        .collect();
    // 1 - sum_{l<M} q_l is the chance of reaching the last level
    let reach_last = rates[..m - 1].iter().map(|r| (-r).exp()).product::<f64>();
    p.push((blocks.total(), reach_last));
    let mut a = vec![0.0; blocks.total() + 1];
    a[0] = 1.0;
    for level in 1..=m {
        a[blocks.start(level) + 1..=blocks.ends()[level - 1]].fill(q[level - 1]);
    }
    RenewalSpec { pair: pair.clone(), q, p, a, expected_t1, sum_a }
}

/// Solution of `A_n = a_n + sum_j A_{n-j} p_j` for `n = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalSolution {
    pub values: Vec<f64>,
    /// `sum_a / E[T_1]`.
    pub limit: f64,
    /// `|A_N - limit|`.
    pub tail_error: f64,
    /// Mean of the last `B_M` values, which also converges for periodic `p`.
    pub window_mean: f64,
}

pub fn renewal_exact(spec: &RenewalSpec, n: usize) -> Result<RenewalSolution> {
    let bm = spec.pair.blocks().total();
    if n < bm {
        return invalid(format!("horizon {n} is shorter than B_M = {bm}"));
    }
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut acc = spec.a.get(k).copied().unwrap_or(0.0);
        let mut comp = 0.0f64;
        for &(j, pj) in &spec.p {
            if j > k {
                break;
            }
            // Neumaier summation
            let x = values[k - j] * pj;
            let t = acc + x;
            if acc.abs() >= x.abs() {
                comp += (acc - t) + x;
            } else {
                comp += (x - t) + acc;
            }
            acc = t;
        }
        values.push(acc + comp);
    }
    let limit = spec.limit();
    let window = &values[n + 1 - bm..];
    Ok(RenewalSolution {
        tail_error: (values[n] - limit).abs(),
        window_mean: window.iter().sum::<f64>() / bm as f64,
        limit,
        values,
    })
}

/// A simulated path of `Y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YTrace {
    pub values: Vec<i64>,
    pub seed: u64,
}

/// One transition of `Y`: climb off the grid, at `B_{l-1}` climb with
/// probability `e^{-r_l}` (decided by `u < e^{-r_l}`) or crash to `-b_l`, and
/// reset from `B_M` to 0.
#[derive(Debug, Clone)]
pub struct YChain {
    starts: Vec<usize>,
    lengths: Vec<usize>,
    climb: Vec<f64>,
    top: i64,
}

impl YChain {
    pub fn new(pair: &BlockVariationPair) -> Self {
        let blocks = pair.blocks();
        YChain {
            starts: (1..=pair.levels()).map(|l| blocks.start(l)).collect(),
            lengths: blocks.lengths().to_vec(),
            climb: pair.rates().iter().map(|r| (-r).exp()).collect(),
            top: blocks.total() as i64,
        }
    }

    /// Level `l` (1-based) when `y = B_{l-1}`.
    pub fn decision_level(&self, y: i64) -> Option<usize> {
        if y < 0 {
            return None;
        }
        self.starts.binary_search(&(y as usize)).ok().map(|i| i + 1)
    }

    pub fn climb_probability(&self, level: usize) -> f64 {
        self.climb[level - 1]
    }

    pub fn block_length(&self, level: usize) -> usize {
        self.lengths[level - 1]
    }

    pub fn top(&self) -> i64 {
        self.top
    }

    /// Next value given the current one and a uniform `u`, which is only
    /// read at decision points.
    pub fn step(&self, y: i64, u: f64) -> i64 {
        if y == self.top {
            return 0;
        }
        match self.decision_level(y) {
            Some(l) if u < self.climb[l - 1] => y + 1,
            Some(l) => -(self.lengths[l - 1] as i64),
            None => y + 1,
        }
    }
}

/// Simulated path together with the frequency of `Y_n <= 0` over `n = 1..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YSimulation {
    pub trace: Option<YTrace>,
    pub steps: usize,
    pub nonpositive: u64,
    pub frequency: f64,
}

/// Run `Y` for `steps` transitions from `Y_0 = 0`; the path itself is kept
/// when `keep_trace` is set.
pub fn simulate_y(pair: &BlockVariationPair, steps: usize, seed: u64, keep_trace: bool) -> Result<YSimulation> {
    if steps == 0 {
        return invalid("simulation needs at least one step");
    }
    let chain = YChain::new(pair);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = 0i64;
    let mut values = keep_trace.then(|| {
        let mut v = Vec::with_capacity(steps + 1);
        v.push(0);
        v
    });
    let mut count = 0u64;
    for _ in 0..steps {
        let u = if chain.decision_level(y).is_some() && y != chain.top { rng.gen::<f64>() } else { 0.0 };
        y = chain.step(y, u);
        if y <= 0 {
            count += 1;
        }
        if let Some(v) = values.as_mut() {
            v.push(y);
        }
    }
    Ok(YSimulation {
        trace: values.map(|values| YTrace { values, seed }),
        steps,
        nonpositive: count,
        frequency: count as f64 / steps as f64,
    })
}

/// Long-run frequency of `Y_n <= 0` for the simulated chain, whose cycles
/// include the reset step: `(1 + sum b_l q_l) / (1 + sum b_l e^{-r_1 - .. - r_{l-1}})`.
pub fn mechanical_frequency(pair: &BlockVariationPair) -> f64 {
    let spec = build_spec(pair);
    spec.sum_a / (1.0 + spec.expected_t1)
}
