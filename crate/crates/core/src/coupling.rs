//! Block-coupled simulation of two g-chains dominated by the `Y` chain,
//! empirical `d-bar` estimates and attractiveness experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockvar::{delta_bar, BlockVariationPair};
use crate::error::{invalid, Result};
use crate::measures::{
    adjoint_power, block_marginal, stationary_measure_at, BlockMarginal, CylinderMeasure, DepthCap,
};
use crate::metrics::{coupled_indices, overlap, wasserstein_ultra};
use crate::renewal::YChain;
use crate::symbolic::{common_prefix, finite_approx, Alphabet, GFunction, GKind, Word};

/// Largest block alphabet `S^b` sampled jointly.
pub const MAX_BLOCK_CELLS: usize = 1 << 20;

/// Past depth used when comparing logistic g-functions cell by cell.
pub const GAP_DEPTH: usize = 12;

/// Allowed rounding when checking `p_actual >= e^{-r'}`.
pub const VIOLATION_TOLERANCE: f64 = 1e-12;

/// Two pasts (most recent symbol first) and the bookkeeping of the coupled
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub left: Word,
    pub right: Word,
    pub kappa: usize,
    pub y: i64,
    pub level: Option<usize>,
    pub s: f64,
}

impl CoupledState {
    pub fn new(left: Word, right: Word, s: f64) -> Self {
        let kappa = common_prefix(&left, &right);
        CoupledState { left, right, kappa, y: 0, level: None, s }
    }
}

/// How the two block extensions are joined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CouplingStrategy {
    #[default]
    Maximal,
    Independent,
}

/// Law of the two initial pasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialLaw {
    /// Left past constantly 0, right past constantly the last symbol.
    #[default]
    Adversarial,
    /// Independent draws from each chain's stationary law.
    Stationary,
    /// Independent uniform pasts.
    Uniform,
    Points { left: Vec<usize>, right: Vec<usize> },
}

/// Outcome of one coupled block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    /// Left and right blocks in time order.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub success: bool,
    pub p_actual: f64,
    pub u: f64,
}

/// Joint law of the next `b` symbols of both chains, driven by a single
/// uniform `u`: the blocks coincide exactly when `u < p_actual`.
#[allow(clippy::too_many_arguments)]
pub fn coupled_block<R: Rng + ?Sized>(
    g: &GFunction,
    g_other: &GFunction,
    left_past: &[usize],
    right_past: &[usize],
    b: usize,
    strategy: CouplingStrategy,
    u: f64,
    rng: &mut R,
) -> Result<BlockOutcome> {
    let a = g.alphabet();
    if a.word_count(b).map_or(true, |c| c > MAX_BLOCK_CELLS) {
        return invalid(format!("blocks of length {b} exceed the joint sampling limit"));
    }
    let eta = block_marginal(g, left_past, b)?;
    let other = block_marginal(g_other, right_past, b)?;
    let p_actual = overlap(eta.masses(), other.masses());
    let (l, r) = match strategy {
        CouplingStrategy::Maximal => coupled_indices(&eta, &other, u, rng)?,
        CouplingStrategy::Independent => (draw(&eta, rng.gen()), draw(&other, rng.gen())),
    };
    Ok(BlockOutcome {
        left: a.decode(l, b),
        right: a.decode(r, b),
        success: l == r,
        p_actual,
        u,
    })
}

fn draw(m: &BlockMarginal, u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in m.masses().iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    m.masses().iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// `coupled_block` followed by the state update: `kappa` grows by `b` on
/// success and is recomputed from the new blocks otherwise.
pub fn coupled_block_extension<R: Rng + ?Sized>(
    g: &GFunction,
    g_other: &GFunction,
    state: &CoupledState,
    b: usize,
    rng: &mut R,
) -> Result<(CoupledState, bool, f64)> {
    let u = rng.gen();
    let out = coupled_block(g, g_other, &state.left, &state.right, b, CouplingStrategy::Maximal, u, rng)?;
    let keep = state.left.len().max(state.right.len());
    let mut next = state.clone();
    for (&x, &y) in out.left.iter().zip(&out.right) {
        next.left.push_front_all(&[x], keep);
        next.right.push_front_all(&[y], keep);
        next.kappa = if x == y { next.kappa + 1 } else { 0 };
    }
    Ok((next, out.success, out.p_actual))
}

/// Per-step record of a coupled run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub kappa: usize,
    pub y: i64,
}

impl StepRecord {
    pub fn disagree_now(&self) -> bool {
        self.kappa == 0
    }
}

/// A block whose success probability fell below the climb probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub step: usize,
    pub level: usize,
    pub p_actual: f64,
    pub required: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingTrace {
    /// Records for steps `1..=N`.
    pub steps: Vec<StepRecord>,
    pub successes: Vec<u64>,
    pub failures: Vec<u64>,
    pub violations: Vec<Violation>,
    /// Steps with `kappa < y`, skipping those between a violation and the
    /// next visit of `Y` to a nonpositive value.
    pub dominance_breaks: Vec<usize>,
    pub strategy: CouplingStrategy,
}

impl CouplingTrace {
    /// Fraction of steps in the last `fraction` of the run where the chains
    /// disagree in their newest symbol.
    pub fn tail_disagreement(&self, fraction: f64) -> f64 {
        let n = self.steps.len();
        let w = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
        let bad = self.steps[n - w..].iter().filter(|r| r.disagree_now()).count();
        bad as f64 / w as f64
    }
}

/// Run both chains for `horizon` symbols. A block of level `l` starts when
/// `Y = B_{l-1}` and no block is pending; off the grid each chain advances by
/// a one-symbol maximal coupling. Climbs of `Y` use the block's uniform
/// against `e^{-r_l}`; `pair` should already carry the inflated rates.
pub fn run_coupling<R: Rng + ?Sized>(
    g: &GFunction,
    g_other: &GFunction,
    pair: &BlockVariationPair,
    initial: (Word, Word),
    horizon: usize,
    strategy: CouplingStrategy,
    rng: &mut R,
) -> Result<CouplingTrace> {
    if g.alphabet() != g_other.alphabet() {
        return invalid("coupled g-functions use different alphabets");
    }
    let keep = g.context_len().max(g_other.context_len()).max(1);
    let (mut left, mut right) = initial;
    for w in [&left, &right] {
        if w.len() < keep {
            return invalid(format!("initial past of length {} is shorter than {keep}", w.len()));
        }
        g.alphabet().check_word(w)?;
    }
    left = Word::new(left[..keep].to_vec());
    right = Word::new(right[..keep].to_vec());
    let chain = YChain::new(pair);
    let levels = pair.levels();
    let mut kappa = common_prefix(&left, &right);
    let mut y = 0i64;
    let mut queue: std::collections::VecDeque<(usize, usize)> = Default::default();
    let mut trusted = true;
    let mut trace = CouplingTrace {
        steps: Vec::with_capacity(horizon),
        successes: vec![0; levels],
        failures: vec![0; levels],
        violations: Vec::new(),
        dominance_breaks: Vec::new(),
        strategy,
    };
    for step in 1..=horizon {
        let mut u_y = 0.0;
        if queue.is_empty() {
            let u: f64 = rng.gen();
            u_y = u;
            match chain.decision_level(y).filter(|_| y != chain.top()) {
                Some(level) => {
                    let b = chain.block_length(level);
                    let out = coupled_block(g, g_other, &left, &right, b, strategy, u, rng)?;
                    let required = chain.climb_probability(level);
                    if strategy == CouplingStrategy::Maximal && out.p_actual < required - VIOLATION_TOLERANCE {
                        trace.violations.push(Violation { step, level, p_actual: out.p_actual, required });
                        trusted = false;
                    }
                    if out.success {
                        trace.successes[level - 1] += 1;
                    } else {
                        trace.failures[level - 1] += 1;
                    }
                    queue.extend(out.left.into_iter().zip(out.right));
                }
                None => {
                    let out = coupled_block(g, g_other, &left, &right, 1, strategy, u, rng)?;
                    queue.push_back((out.left[0], out.right[0]));
                }
            }
        }
        let (x, x_other) = queue.pop_front().unwrap();
        left.push_front_all(&[x], keep);
        right.push_front_all(&[x_other], keep);
        kappa = if x == x_other { kappa.saturating_add(1) } else { 0 };
        y = chain.step(y, u_y);
        if y <= 0 {
            trusted = true;
        }
        if trusted && strategy == CouplingStrategy::Maximal && (kappa as i64) < y {
            trace.dominance_breaks.push(step);
        }
        trace.steps.push(StepRecord { kappa, y });
    }
    Ok(trace)
}

/// Bound on `|| log g - log g_other ||_inf`: exact for two tables, certified
/// for logistic families through depth-[`GAP_DEPTH`] approximations.
pub fn sup_log_gap(g: &GFunction, g_other: &GFunction) -> Result<f64> {
    if g.alphabet() != g_other.alphabet() {
        return invalid("g-functions use different alphabets");
    }
    let depth_of = |h: &GFunction| match h.kind() {
        GKind::Table(t) => t.memory(),
        GKind::Logistic(l) => l.depth().min(GAP_DEPTH),
    };
    let depth = depth_of(g).max(depth_of(g_other));
    let (a, sa) = as_table(g, depth)?;
    let (b, sb) = as_table(g_other, depth)?;
    let mut worst = 0.0f64;
    for w in g.alphabet().words(depth + 1) {
        worst = worst.max((a.log_eval_unchecked(&w) - b.log_eval_unchecked(&w)).abs());
    }
    Ok(worst + sa + sb)
}

fn as_table(g: &GFunction, depth: usize) -> Result<(GFunction, f64)> {
    match g.kind() {
        GKind::Table(_) => Ok((g.clone(), 0.0)),
        GKind::Logistic(l) => {
            let approx = finite_approx(g, depth, &Word::default())?;
            Ok((approx.g, 2.0 * l.abs_tail(depth + 1)))
        }
    }
}

fn sample_past<R: Rng + ?Sized>(m: &CylinderMeasure, rng: &mut R) -> Word {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut idx = m.masses().len() - 1;
    for (i, &p) in m.masses().iter().enumerate() {
        acc += p;
        if u < acc {
            idx = i;
            break;
        }
    }
    Word::new(m.alphabet().decode(idx, m.depth()))
}

/// Initial pasts of length `depth` drawn from `law`.
pub fn initial_pasts<R: Rng + ?Sized>(
    law: &InitialLaw,
    g: &GFunction,
    g_other: &GFunction,
    depth: usize,
    rng: &mut R,
) -> Result<(Word, Word)> {
    let a: Alphabet = g.alphabet();
    let depth = depth.max(1);
    match law {
        InitialLaw::Adversarial => Ok((Word::constant(0, depth), Word::constant(a.size() - 1, depth))),
        InitialLaw::Uniform => {
            let mut draw = || Word::new((0..depth).map(|_| rng.gen_range(0..a.size())).collect());
            Ok((draw(), draw()))
        }
        InitialLaw::Stationary => {
            let left = stationary_measure_at(g, depth)?;
            let right = stationary_measure_at(g_other, depth)?;
            Ok((sample_past(&left, rng), sample_past(&right, rng)))
        }
        InitialLaw::Points { left, right } => {
            let pad = |w: &Vec<usize>| {
                let mut v = w.clone();
                if v.len() < depth {
                    v.resize(depth, 0);
                }
                Word::new(v)
            };
            a.check_word(left)?;
            a.check_word(right)?;
            Ok((pad(left), pad(right)))
        }
    }
}

/// Settings of a `d-bar` estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbarConfig {
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub strategy: CouplingStrategy,
    #[serde(default)]
    pub initial: InitialLaw,
    /// Fraction of the horizon averaged at the end of each trial.
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
}

fn default_tail_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub tail_disagreement: f64,
    pub violations: usize,
    pub dominance_breaks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DbarEstimate {
    pub estimate: f64,
    /// Three standard errors, the larger of the binomial and the empirical one.
    pub band: f64,
    /// `delta_bar` of the rates `r_l + s b_l`.
    pub ceiling: f64,
    pub s: f64,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub strategy: CouplingStrategy,
    pub per_trial: Vec<TrialResult>,
}

/// Average tail disagreement over `trials` runs seeded `seed ^ i`.
pub fn estimate_dbar(
    g: &GFunction,
    g_other: &GFunction,
    pair: &BlockVariationPair,
    config: &DbarConfig,
) -> Result<DbarEstimate> {
    if config.trials == 0 || config.horizon == 0 {
        return invalid("need at least one trial and one step");
    }
    if !(config.tail_fraction > 0.0 && config.tail_fraction <= 1.0) {
        return invalid("tail_fraction must lie in (0, 1]");
    }
    let s = sup_log_gap(g, g_other)?;
    let inflated = pair.inflated(s)?;
    let keep = g.context_len().max(g_other.context_len()).max(1);
    let per_trial: Vec<TrialResult> = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            let seed = config.seed ^ i as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = initial_pasts(&config.initial, g, g_other, keep, &mut rng)?;
            let trace = run_coupling(g, g_other, &inflated, init, config.horizon, config.strategy, &mut rng)?;
            Ok(TrialResult {
                trial: i,
                seed,
                tail_disagreement: trace.tail_disagreement(config.tail_fraction),
                violations: trace.violations.len(),
                dominance_breaks: trace.dominance_breaks.len(),
            })
        })
        .collect::<Result<_>>()?;
    let k = per_trial.len() as f64;
    let estimate = per_trial.iter().map(|t| t.tail_disagreement).sum::<f64>() / k;
    let window = ((config.horizon as f64 * config.tail_fraction).ceil()).max(1.0);
    let binomial = (estimate * (1.0 - estimate) / (k * window)).sqrt();
    let empirical = if per_trial.len() > 1 {
        let var = per_trial
            .iter()
            .map(|t| (t.tail_disagreement - estimate).powi(2))
            .sum::<f64>()
            / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    Ok(DbarEstimate {
        estimate,
        band: 3.0 * binomial.max(empirical),
        ceiling: delta_bar(&inflated),
        s,
        horizon: config.horizon,
        trials: config.trials,
        seed: config.seed,
        strategy: config.strategy,
        per_trial,
    })
}

/// `wasserstein_ultra(L*^n nu1, L*^n nu2)` for `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorSeries {
    pub distances: Vec<f64>,
    /// `2^-depth` of the measures compared at each step.
    pub resolution: Vec<f64>,
}

pub fn iterate_attractor(
    g: &GFunction,
    nu1: &CylinderMeasure,
    nu2: &CylinderMeasure,
    n_max: usize,
    cap: DepthCap,
) -> Result<AttractorSeries> {
    let mut a = nu1.clone();
    let mut b = nu2.clone();
    let mut distances = Vec::with_capacity(n_max + 1);
    let mut resolution = Vec::with_capacity(n_max + 1);
    distances.push(wasserstein_ultra(&a, &b)?);
    resolution.push(0.5f64.powi(a.depth() as i32));
    for _ in 0..n_max {
        a = adjoint_power(g, &a, 1, cap)?;
        b = adjoint_power(g, &b, 1, cap)?;
        distances.push(wasserstein_ultra(&a, &b)?);
        resolution.push(0.5f64.powi(a.depth() as i32));
    }
    Ok(AttractorSeries { distances, resolution })
}
