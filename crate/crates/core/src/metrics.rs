//! Distances between block marginals and cylinder measures, the one-step
//! Hellinger affinity, and a maximal-coupling sampler.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::measures::{BlockMarginal, CylinderMeasure};
use crate::symbolic::{GFunction, Word};

fn check_shapes(a: &CylinderMeasure, b: &CylinderMeasure) -> Result<()> {
    if a.alphabet() != b.alphabet() || a.depth() != b.depth() {
        return invalid(format!(
            "shape mismatch: depth {} over {} symbols vs depth {} over {} symbols",
            a.depth(),
            a.alphabet().size(),
            b.depth(),
            b.alphabet().size()
        ));
    }
    Ok(())
}

/// `d_TV = sum_w |eta(w) - eta'(w)|`, in `[0, 2]`.
pub fn total_variation(eta: &BlockMarginal, other: &BlockMarginal) -> Result<f64> {
    tv_measures(eta.as_measure(), other.as_measure())
}

pub fn tv_measures(a: &CylinderMeasure, b: &CylinderMeasure) -> Result<f64> {
    check_shapes(a, b)?;
    Ok(l1(a.masses(), b.masses()))
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Overlap `sum_w min(eta(w), eta'(w)) = 1 - d_TV / 2`.
pub(crate) fn overlap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).sum()
}

/// Hellinger integral `sum_w sqrt(eta(w) eta'(w))`, in `[0, 1]`.
pub fn hellinger_integral(eta: &BlockMarginal, other: &BlockMarginal) -> Result<f64> {
    let (a, b) = (eta.as_measure(), other.as_measure());
    check_shapes(a, b)?;
    Ok(affinity(a.masses(), b.masses()))
}

const LOG_SPACE_BELOW: f64 = 1e-300;

pub(crate) fn affinity(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            if x == 0.0 || y == 0.0 {
                0.0
            } else if x < LOG_SPACE_BELOW || y < LOG_SPACE_BELOW {
                (0.5 * (x.ln() + y.ln())).exp()
            } else {
                x.sqrt() * y.sqrt()
            }
        })
        .sum();
    s.min(1.0)
}

/// Summary of how far apart two marginals are.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub tv: f64,
    pub hellinger: f64,
    pub success_prob: f64,
}

pub fn metric_report(eta: &BlockMarginal, other: &BlockMarginal) -> Result<MetricReport> {
    let tv = total_variation(eta, other)?;
    Ok(MetricReport {
        tv,
        hellinger: hellinger_integral(eta, other)?,
        success_prob: 1.0 - tv / 2.0,
    })
}

/// `-log sum_a sqrt(g(a y) g(a y'))`: the one-step Hellinger distance
/// between the next-symbol laws after pasts `y` and `y'`.
pub fn one_step_h(g: &GFunction, y: &Word, y_other: &Word) -> Result<f64> {
    let p = g.next_law(y)?;
    let q = g.next_law(y_other)?;
    Ok((-affinity(&p, &q).ln()).max(0.0))
}

/// `f(d) = d^-2 (1/2 (1 + e^d) - e^(d/2))`, extended by `f(0) = 1/8`.
///
/// Evaluated as `1/2 (expm1(d/2) / d)^2`, which is the same expression
/// without cancellation near zero.
pub fn f_delta(delta: f64) -> f64 {
    if delta == 0.0 {
        return 0.125;
    }
    let r = (0.5 * delta).exp_m1() / delta;
    0.5 * r * r
}

/// One draw from a maximal coupling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingSample {
    pub left: Word,
    pub right: Word,
    pub success: bool,
}

/// Draws a pair of words with marginals `eta` and `other` that coincide with
/// the largest possible probability `sum_w min(eta(w), other(w))`.
pub fn sample_maximal_coupling<R: Rng + ?Sized>(
    eta: &BlockMarginal,
    other: &BlockMarginal,
    rng: &mut R,
) -> Result<CouplingSample> {
    let u: f64 = rng.gen();
    let (l, r) = coupled_indices(eta, other, u, rng)?;
    let a = eta.alphabet();
    let n = eta.len();
    Ok(CouplingSample {
        left: Word::new(a.decode(l, n)),
        right: Word::new(a.decode(r, n)),
        success: l == r,
    })
}

/// Maximal coupling driven by an external uniform `u`: the outcome is a
/// shared word exactly when `u < overlap`. Returns cell indices.
pub(crate) fn coupled_indices<R: Rng + ?Sized>(
    eta: &BlockMarginal,
    other: &BlockMarginal,
    u: f64,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let (a, b) = (eta.masses(), other.masses());
    check_shapes(eta.as_measure(), other.as_measure())?;
    let common = overlap(a, b);
    if u < common {
        // shared word from the normalized minimum measure
        let target = u;
        let idx = pick(a.iter().zip(b).map(|(x, y)| x.min(*y)), target);
        return Ok((idx, idx));
    }
    // disjoint residuals (eta - min) and (other - min)
    let resid = 1.0 - common;
    let l = pick(a.iter().zip(b).map(|(x, y)| (x - y).max(0.0)), rng.gen::<f64>() * resid);
    let r = pick(b.iter().zip(a).map(|(x, y)| (x - y).max(0.0)), rng.gen::<f64>() * resid);
    Ok((l, r))
}

/// Index where the running sum of `weights` first exceeds `target`, falling
/// back on the last positive weight.
fn pick(weights: impl Iterator<Item = f64>, target: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Exact Wasserstein-1 distance for the metric `2^-kappa` on the depth-`n`
/// quotient: `sum_{k<n} 2^-(k+1) D_k + 2^-n D_n` with
/// `D_k = sum_{|w|=k} |mu[w] - nu[w]|`. The untruncated value is within
/// `2^-n` of this.
pub fn wasserstein_ultra(mu: &CylinderMeasure, nu: &CylinderMeasure) -> Result<f64> {
    check_shapes(mu, nu)?;
    let n = mu.depth();
    if n == 0 {
        return Ok(0.0);
    }
    let s = mu.alphabet().size();
    let mut a = mu.masses().to_vec();
    let mut b = nu.masses().to_vec();
    let mut total = 0.5f64.powi(n as i32) * l1(&a, &b);
    for k in (1..n).rev() {
        a = a.chunks(s).map(|c| c.iter().sum()).collect();
        b = b.chunks(s).map(|c| c.iter().sum()).collect();
        total += 0.5f64.powi(k as i32 + 1) * l1(&a, &b);
    }
    Ok(total)
}
