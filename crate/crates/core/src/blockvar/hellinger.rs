use rayon::prelude::*;
use serde::Serialize;

use super::structure::{BlockStructure, BlockVariationPair, RateSource};
use crate::error::{invalid, Error, Result};
use crate::measures::block_marginal;
use crate::metrics::affinity;
use crate::symbolic::{finite_approx, sigmoid, variation, GFunction, GKind, LogisticG, Word};

/// Largest `S^depth * S^b` table of block marginals built for an enumeration.
pub const MAX_MARGINAL_CELLS: usize = 1 << 24;

/// Largest number of `(past, past', word)` triples visited by an enumeration.
pub const MAX_PAIR_WORK: u64 = 1 << 34;

/// Past depth used for logistic blocks with `b > 1`.
pub const LOGISTIC_BLOCK_DEPTH: usize = 10;

/// Largest number of shared logistic coordinates enumerated sign by sign.
pub const LOGISTIC_SIGN_LIMIT: usize = 20;

/// A block variation of the evaluated g together with the additive slack
/// that certifies it for the untruncated family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSup {
    pub h: f64,
    pub rho: f64,
    pub slack: f64,
    /// False when a sup had to be bounded rather than attained.
    pub attained: bool,
}

/// `-log` of the Hellinger integral, accurate for nearby laws.
pub(crate) fn hellinger_distance(a: &[f64], b: &[f64]) -> f64 {
    let half_sq: f64 = 0.5
        * a.iter()
            .zip(b)
            .map(|(&x, &y)| (x.sqrt() - y.sqrt()).powi(2))
            .sum::<f64>();
    if half_sq < 0.5 {
        (-(-half_sq).ln_1p()).max(0.0)
    } else {
        -affinity(a, b).ln()
    }
}

/// `-log sum min(a, b)`, accurate for nearby laws.
pub(crate) fn overlap_distance(a: &[f64], b: &[f64]) -> f64 {
    let half_l1 = 0.5 * crate::metrics::l1(a, b);
    if half_l1 < 0.5 {
        (-(-half_l1).ln_1p()).max(0.0)
    } else {
        -crate::metrics::overlap(a, b).ln()
    }
}

/// `h^g(B, b)` and `rho^g(B, b)`: sups over pasts agreeing in their first `B`
/// coordinates of the distance between the laws of the next `b` symbols.
pub fn block_sup(g: &GFunction, big_b: usize, b: usize) -> Result<BlockSup> {
    if b == 0 {
        return invalid("block length must be positive");
    }
    match g.kind() {
        GKind::Table(t) => table_sup(g, t.memory(), big_b, b),
        GKind::Logistic(l) if b == 1 => Ok(logistic_one_step(l, big_b, g.truncation_slack())),
        GKind::Logistic(l) => {
            let depth = l.depth().min(LOGISTIC_BLOCK_DEPTH);
            let approx = finite_approx(g, depth, &Word::default())?;
            let per_step = 2.0 * l.abs_tail(depth + 1);
            let sup = table_sup(&approx.g, depth, big_b, b)?;
            Ok(BlockSup { slack: b as f64 * per_step, ..sup })
        }
    }
}

fn table_sup(g: &GFunction, memory: usize, big_b: usize, b: usize) -> Result<BlockSup> {
    let zero = BlockSup { h: 0.0, rho: 0.0, slack: 0.0, attained: true };
    if big_b >= memory {
        return Ok(zero);
    }
    let a = g.alphabet();
    let too_big = || Error::Unsupported(format!(
        "block enumeration with memory {memory}, b = {b} over {} symbols is too large",
        a.size()
    ));
    let pasts = a.word_count(memory).ok_or_else(too_big)?;
    let cells = a.word_count(b).ok_or_else(too_big)?;
    if pasts.checked_mul(cells).map_or(true, |c| c > MAX_MARGINAL_CELLS) {
        return Err(too_big());
    }
    let class = a.word_count(memory - big_b).ok_or_else(too_big)?;
    let work = (pasts as u64) * (class as u64) * (cells as u64) / 2;
    if work > MAX_PAIR_WORK {
        return Err(too_big());
    }
    let marginals: Vec<Vec<f64>> = (0..pasts)
        .into_par_iter()
        .map(|i| {
            let past = a.decode(i, memory);
            block_marginal(g, &past, b).map(|m| m.masses().to_vec())
        })
        .collect::<Result<_>>()?;
    // pasts agreeing in their first B coordinates form contiguous runs
    let classes = pasts / class;
    let (h, rho) = (0..classes)
        .into_par_iter()
        .map(|c| {
            let run = &marginals[c * class..(c + 1) * class];
            let mut h = 0.0f64;
            let mut rho = 0.0f64;
            for i in 0..run.len() {
                for j in i + 1..run.len() {
                    h = h.max(hellinger_distance(&run[i], &run[j]));
                    rho = rho.max(overlap_distance(&run[i], &run[j]));
                }
            }
            (h, rho)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
    Ok(BlockSup { h, rho, slack: 0.0, attained: true })
}

fn bernoulli(p1: f64) -> [f64; 2] {
    [1.0 - p1, p1]
}

/// One-step distances between fields `c - t` and `c + t`.
fn field_pair(c: f64, t: f64) -> (f64, f64) {
    let p = bernoulli(sigmoid(c - t));
    let q = bernoulli(sigmoid(c + t));
    (hellinger_distance(&p, &q), overlap_distance(&p, &q))
}

/// One-step sup for the truncated logistic family. Two pasts sharing their
/// first `B` symbols have fields `c + u`, `c + u'` where `c` collects theta_0
/// and the shared couplings and `|u|, |u'| <= T`, both extremes attainable.
fn logistic_one_step(l: &LogisticG, big_b: usize, slack: f64) -> BlockSup {
    let theta = l.truncated_theta();
    let shared = big_b.min(theta.len());
    let t: f64 = theta[shared..].iter().map(|x| x.abs()).sum();
    if t == 0.0 {
        return BlockSup { h: 0.0, rho: 0.0, slack, attained: true };
    }
    if shared <= LOGISTIC_SIGN_LIMIT {
        let mut h = 0.0f64;
        let mut rho = 0.0f64;
        for signs in 0u64..(1u64 << shared) {
            let mut c = l.theta0();
            for (k, th) in theta[..shared].iter().enumerate() {
                c += if signs >> k & 1 == 1 { *th } else { -*th };
            }
            let (hh, rr) = field_pair(c, t);
            h = h.max(hh);
            rho = rho.max(rr);
        }
        return BlockSup { h, rho, slack, attained: true };
    }
    // both distances decrease in |c|; bound by the field range point closest to 0
    let spread: f64 = theta[..shared].iter().map(|x| x.abs()).sum();
    let c = 0f64.clamp(l.theta0() - spread, l.theta0() + spread);
    let (h, rho) = field_pair(c, t);
    BlockSup { h, rho, slack, attained: false }
}

pub fn h_block(g: &GFunction, big_b: usize, b: usize) -> Result<f64> {
    Ok(block_sup(g, big_b, b)?.h)
}

/// `rho^g(B, b)` with the bounds obtained from `h^g(B, b)` and from the
/// variations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoRecord {
    pub exact: f64,
    /// `-log(1 - sqrt(1 - e^{-2h}))`.
    pub bound_log: f64,
    /// `sqrt(2h) + 2h`.
    pub bound_sqrt: f64,
    /// `w / 2` with `w^2 = sum_{k = max(B, 1)}^{B + b} var_k^2`; asymptotic, up to a
    /// `1 + O(w)` factor.
    pub bound_w: f64,
    pub w_caveat: bool,
    pub h: f64,
    /// Additive slack certifying `exact` and `h` for the untruncated family.
    pub slack: f64,
    pub attained: bool,
}

impl RhoRecord {
    /// Certified `rho` for the untruncated family.
    pub fn certified(&self) -> f64 {
        self.exact + self.slack
    }
}

pub fn bound_log(h: f64) -> f64 {
    let s = (-(-2.0 * h).exp_m1()).sqrt();
    -(-s).ln_1p()
}

pub fn bound_sqrt(h: f64) -> f64 {
    (2.0 * h).sqrt() + 2.0 * h
}

pub fn bound_w(g: &GFunction, big_b: usize, b: usize) -> f64 {
    // var_0 also sees the new symbol, which plays no part in block laws
    let w2: f64 = (big_b.max(1)..=big_b + b).map(|k| variation(g, k).value.powi(2)).sum();
    0.5 * w2.sqrt()
}

pub fn rho_block(g: &GFunction, big_b: usize, b: usize) -> Result<RhoRecord> {
    let sup = block_sup(g, big_b, b)?;
    Ok(RhoRecord {
        exact: sup.rho,
        bound_log: bound_log(sup.h),
        bound_sqrt: bound_sqrt(sup.h),
        bound_w: bound_w(g, big_b, b),
        w_caveat: true,
        h: sup.h,
        slack: sup.slack,
        attained: sup.attained,
    })
}

/// Pair with `r_l = rho^g(B_{l-1}, b_l)` (plus slack).
pub fn pair_from_rho(g: &GFunction, blocks: &BlockStructure) -> Result<BlockVariationPair> {
    let mut rates = Vec::with_capacity(blocks.levels());
    for level in 1..=blocks.levels() {
        let rec = rho_block(g, blocks.start(level), blocks.lengths()[level - 1])?;
        rates.push(rec.certified());
    }
    BlockVariationPair::with_source(blocks.clone(), rates, RateSource::FromRho, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoSource {
    Exact,
    BoundSqrt,
    AsymptoticW,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelValidity {
    pub level: usize,
    pub start: usize,
    pub b: usize,
    pub r: f64,
    pub rho: f64,
    pub rho_source: RhoSource,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub levels: Vec<LevelValidity>,
    /// First level from which every level is valid.
    pub valid_from: Option<usize>,
    pub all_valid: bool,
}

/// Rate comparisons allow this much rounding.
pub const VALIDITY_TOLERANCE: f64 = 1e-12;

pub fn validity_report(g: &GFunction, pair: &BlockVariationPair) -> ValidityReport {
    let blocks = pair.blocks();
    let mut levels = Vec::with_capacity(pair.levels());
    for level in 1..=pair.levels() {
        let start = blocks.start(level);
        let b = blocks.lengths()[level - 1];
        let (rho, rho_source) = match rho_block(g, start, b) {
            Ok(rec) if rec.attained => (rec.certified(), RhoSource::Exact),
            Ok(rec) => (rec.bound_sqrt + rec.slack, RhoSource::BoundSqrt),
            Err(_) => (bound_w(g, start, b), RhoSource::AsymptoticW),
        };
        let r = pair.rates()[level - 1];
        levels.push(LevelValidity {
            level,
            start,
            b,
            r,
            rho,
            rho_source,
            valid: r + VALIDITY_TOLERANCE >= rho,
        });
    }
    let valid_from = match levels.iter().rposition(|l| !l.valid) {
        None => Some(1),
        Some(i) if i + 1 < levels.len() => Some(i + 2),
        Some(_) => None,
    };
    ValidityReport { all_valid: valid_from == Some(1), levels, valid_from }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockvar::r_from_variations;
    use crate::metrics::one_step_h;
    use crate::symbolic::{Alphabet, Couplings};

    fn table1() -> GFunction {
        GFunction::binary_markov(0.3, 0.6).unwrap()
    }

    #[test]
    fn table1_block_variations() {
        let g = table1();
        let h = h_block(&g, 0, 1).unwrap();
        assert!((h - -(0.28f64.sqrt() + 0.18f64.sqrt()).ln()).abs() < 1e-15);
        assert!((h - 0.047708).abs() < 5e-6);
        assert_eq!(h_block(&g, 1, 1).unwrap(), 0.0);
        let h2 = h_block(&g, 0, 2).unwrap();
        assert!((h2 - h_block(&g, 0, 1).unwrap()).abs() < 1e-12);

        let r = rho_block(&g, 0, 1).unwrap();
        assert!((r.exact - 0.356675).abs() < 1e-6);
        let s = (1.0 - (-2.0 * h).exp()).sqrt();
        assert!((r.bound_log - -(1.0 - s).ln()).abs() < 1e-12);
        assert!((r.bound_sqrt - ((2.0 * h).sqrt() + 2.0 * h)).abs() < 1e-15);
        assert!((r.bound_log - 0.358720).abs() < 4e-4);
        assert!((r.bound_sqrt - 0.404318).abs() < 5e-5);
        assert!(r.exact <= r.bound_log && r.bound_log <= r.bound_sqrt);
        let r1 = rho_block(&g, 1, 1).unwrap();
        assert_eq!((r1.exact, r1.bound_log, r1.bound_sqrt), (0.0, 0.0, 0.0));
    }

    #[test]
    fn iid_block_variations_vanish() {
        let g = GFunction::iid(vec![0.2, 0.5, 0.3]).unwrap();
        for big_b in 0..3 {
            for b in 1..3 {
                let r = rho_block(&g, big_b, b).unwrap();
                assert_eq!((r.exact, r.bound_log, r.bound_sqrt, r.bound_w), (0.0, 0.0, 0.0, 0.0));
            }
        }
    }

    #[test]
    fn one_step_sup_matches_pairwise_oracle() {
        let g = GFunction::table(
            Alphabet::BINARY,
            2,
            vec![vec![0.2, 0.8], vec![0.55, 0.45], vec![0.9, 0.1], vec![0.4, 0.6]],
        )
        .unwrap();
        for big_b in 0..2 {
            let mut best = 0.0f64;
            for x in g.alphabet().words(2) {
                for y in g.alphabet().words(2) {
                    if x[..big_b] == y[..big_b] {
                        best = best.max(one_step_h(&g, &Word::new(x.clone()), &Word::new(y)).unwrap());
                    }
                }
            }
            assert!((h_block(&g, big_b, 1).unwrap() - best).abs() < 1e-14);
        }
    }

    #[test]
    fn logistic_one_step_matches_enumeration() {
        let theta = vec![0.5, -0.3, 0.2, 0.1, -0.05, 0.02];
        let g = GFunction::logistic(
            0.2,
            Couplings::Explicit { theta: theta.clone(), tail_bound: 0.0 },
            theta.len(),
        )
        .unwrap();
        let approx = finite_approx(&g, theta.len(), &Word::default()).unwrap();
        for big_b in 0..=theta.len() {
            let direct = block_sup(&g, big_b, 1).unwrap();
            let table = table_sup(&approx.g, theta.len(), big_b, 1).unwrap();
            assert!((direct.h - table.h).abs() < 1e-13, "B={big_b}");
            assert!((direct.rho - table.rho).abs() < 1e-13, "B={big_b}");
        }
    }

    #[test]
    fn one_step_distances_decrease_in_field_magnitude() {
        for t in [1e-3, 0.05, 0.4, 2.0] {
            let mut prev = field_pair(0.0, t);
            for i in 1..400 {
                let c = i as f64 * 0.025;
                let cur = field_pair(c, t);
                assert!(cur.0 <= prev.0 + 1e-15 && cur.1 <= prev.1 + 1e-15, "t={t} c={c}");
                let mirrored = field_pair(-c, t);
                assert!((mirrored.0 - cur.0).abs() < 1e-14 && (mirrored.1 - cur.1).abs() < 1e-14);
                prev = cur;
            }
        }
    }

    #[test]
    fn logistic_blocks_carry_slack() {
        let g = GFunction::logistic(0.0, Couplings::Power { scale: 0.3, exponent: 2.0 }, 30).unwrap();
        let one = block_sup(&g, 2, 1).unwrap();
        assert_eq!(one.slack, g.truncation_slack());
        let two = block_sup(&g, 2, 2).unwrap();
        assert!(two.slack > 0.0);
        assert!(two.h >= 0.0 && two.rho >= two.h);
    }

    #[test]
    fn validity_examples() {
        let g = table1();
        let blocks = BlockStructure::unit(5).unwrap();
        let mut rates = vec![0.01; 5];
        rates[0] = 0.36;
        let rep = validity_report(&g, &BlockVariationPair::new(blocks.clone(), rates.clone()).unwrap());
        assert!(rep.all_valid);
        assert_eq!(rep.valid_from, Some(1));

        rates[0] = 0.3;
        let rep = validity_report(&g, &BlockVariationPair::new(blocks.clone(), rates).unwrap());
        assert!(!rep.levels[0].valid);
        assert_eq!(rep.valid_from, Some(2));

        let vars = crate::symbolic::VariationSequence::from_g(&g, 8);
        let pair = r_from_variations(&vars, &blocks).unwrap();
        assert!(validity_report(&g, &pair).all_valid);

        let exact = pair_from_rho(&g, &blocks).unwrap();
        assert!(validity_report(&g, &exact).all_valid);
        assert!((exact.rates()[0] - 0.7f64.ln().abs()).abs() < 1e-12);
    }
}
