//! Measures on cylinder algebras, block marginals of g-chain extensions and
//! the adjoint transfer operator.
//!
//! A [`CylinderMeasure`] of depth `n` lives on words `(x_0, .., x_{n-1})` in
//! prefix order (most recent first). A [`BlockMarginal`] instead lists the
//! appended symbols in the order they were added, `(y_1, .., y_b)`; use
//! [`BlockMarginal::to_prefix_order`] to cross between the two.

use crate::error::{invalid, unsupported, Result};
use crate::symbolic::{Alphabet, GFunction, GKind, Word};

/// Upper limit on the number of cells a cylinder measure may hold.
pub const MAX_CELLS: usize = 1 << 24;

/// Default number of cells at which the adjoint iteration stops growing.
pub const DEFAULT_CAP_CELLS: usize = 1 << 20;

/// Dense elimination is used for stationary laws up to this many states.
pub const DENSE_STATE_LIMIT: usize = 4096;

/// A probability measure on the cylinder algebra of depth `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderMeasure {
    alphabet: Alphabet,
    depth: usize,
    /// Indexed by [`Alphabet::encode`] of the prefix-ordered word.
    masses: Vec<f64>,
}

impl CylinderMeasure {
    /// Validates nonnegativity and total mass (within 1e-9), then
    /// renormalizes so the total is 1 to rounding.
    pub fn new(alphabet: Alphabet, depth: usize, masses: Vec<f64>) -> Result<Self> {
        let cells = cell_count(alphabet, depth)?;
        if masses.len() != cells {
            return invalid(format!(
                "depth-{depth} measure needs {cells} masses, got {}",
                masses.len()
            ));
        }
        if let Some(i) = masses.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return invalid(format!("mass at index {i} is negative or not finite"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("masses sum to {total}, expected 1"));
        }
        let masses = masses.into_iter().map(|m| m / total).collect();
        Ok(CylinderMeasure { alphabet, depth, masses })
    }

    pub(crate) fn from_raw(alphabet: Alphabet, depth: usize, masses: Vec<f64>) -> Self {
        debug_assert_eq!(masses.len(), alphabet.word_count(depth).unwrap());
        CylinderMeasure { alphabet, depth, masses }
    }

    pub fn point_mass(alphabet: Alphabet, word: &[usize]) -> Result<Self> {
        alphabet.check_word(word)?;
        let cells = cell_count(alphabet, word.len())?;
        let mut masses = vec![0.0; cells];
        masses[alphabet.encode(word)] = 1.0;
        Ok(CylinderMeasure { alphabet, depth: word.len(), masses })
    }

    pub fn uniform(alphabet: Alphabet, depth: usize) -> Result<Self> {
        let cells = cell_count(alphabet, depth)?;
        Ok(CylinderMeasure {
            alphabet,
            depth,
            masses: vec![1.0 / cells as f64; cells],
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Mass of the cylinder of `word` (any length up to the depth).
    pub fn mass(&self, word: &[usize]) -> Result<f64> {
        if word.len() > self.depth {
            return invalid("word is longer than the measure's depth");
        }
        self.alphabet.check_word(word)?;
        let block = self.alphabet.word_count(self.depth - word.len()).unwrap();
        let start = self.alphabet.encode(word) * block;
        Ok(self.masses[start..start + block].iter().sum())
    }

    /// Restriction to the first `k` coordinates.
    pub fn marginal(&self, k: usize) -> Result<CylinderMeasure> {
        if k > self.depth {
            return invalid(format!("cannot restrict depth {} to depth {k}", self.depth));
        }
        let block = self.alphabet.word_count(self.depth - k).unwrap();
        let masses = self.masses.chunks(block).map(|c| c.iter().sum()).collect();
        Ok(CylinderMeasure { alphabet: self.alphabet, depth: k, masses })
    }

    /// Largest absolute difference in cell masses at equal depth.
    pub fn max_abs_diff(&self, other: &CylinderMeasure) -> Result<f64> {
        if self.depth != other.depth || self.alphabet != other.alphabet {
            return invalid("measures differ in shape");
        }
        Ok(self
            .masses
            .iter()
            .zip(&other.masses)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn cell_count(alphabet: Alphabet, depth: usize) -> Result<usize> {
    match alphabet.word_count(depth) {
        Some(c) if c <= MAX_CELLS => Ok(c),
        _ => invalid(format!(
            "depth {depth} over {} symbols exceeds {MAX_CELLS} cells",
            alphabet.size()
        )),
    }
}

/// Law of the next `b` symbols appended to a fixed past; words are listed
/// in the order of addition `(y_1, .., y_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMarginal {
    measure: CylinderMeasure,
}

impl BlockMarginal {
    pub fn new(measure: CylinderMeasure) -> Self {
        BlockMarginal { measure }
    }

    pub fn len(&self) -> usize {
        self.measure.depth
    }

    pub fn is_empty(&self) -> bool {
        self.measure.depth == 0
    }

    pub fn alphabet(&self) -> Alphabet {
        self.measure.alphabet
    }

    pub fn masses(&self) -> &[f64] {
        &self.measure.masses
    }

    pub fn as_measure(&self) -> &CylinderMeasure {
        &self.measure
    }

    /// The same law on prefix-ordered words `(y_b, .., y_1)`.
    pub fn to_prefix_order(&self) -> CylinderMeasure {
        let a = self.measure.alphabet;
        let b = self.measure.depth;
        let mut masses = vec![0.0; self.measure.masses.len()];
        for (i, &m) in self.measure.masses.iter().enumerate() {
            let mut w = a.decode(i, b);
            w.reverse();
            masses[a.encode(&w)] = m;
        }
        CylinderMeasure::from_raw(a, b, masses)
    }
}

/// The law of `b` symbols appended to `past` by a g-chain: the mass of
/// `(y_1, .., y_b)` is `prod_i g(y_i y_{i-1} .. y_1 past)`.
pub fn block_marginal(g: &GFunction, past: &[usize], b: usize) -> Result<BlockMarginal> {
    if b == 0 {
        return invalid("block length must be positive");
    }
    check_past(g, past)?;
    let a = g.alphabet();
    let cells = cell_count(a, b)?;
    let mut masses = Vec::with_capacity(cells);
    let mut buf = vec![0usize; b];
    buf.extend_from_slice(past);
    let mut law = vec![0.0; a.size()];
    fill_block(g, &mut buf, b, 1, 1.0, &mut law, &mut masses);
    Ok(BlockMarginal::new(CylinderMeasure::from_raw(a, b, masses)))
}

/// `buf[b - j]` holds `y_j`; the history of `y_i` is `buf[b - i + 1..]`.
fn fill_block(
    g: &GFunction,
    buf: &mut [usize],
    b: usize,
    i: usize,
    acc: f64,
    law: &mut Vec<f64>,
    out: &mut Vec<f64>,
) {
    g.next_law_into(&buf[b - i + 1..], law);
    let probs = law.clone();
    for (y, p) in probs.into_iter().enumerate() {
        if i == b {
            out.push(acc * p);
        } else {
            buf[b - i] = y;
            fill_block(g, buf, b, i + 1, acc * p, law, out);
        }
    }
}

pub(crate) fn check_past(g: &GFunction, past: &[usize]) -> Result<()> {
    let need = g.memory().unwrap_or(0);
    if past.len() < need {
        return invalid(format!(
            "past of length {} is too short for memory {need}",
            past.len()
        ));
    }
    g.alphabet().check_word(past)
}

/// Depth bound for [`adjoint_power`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthCap(pub usize);

impl DepthCap {
    /// Largest depth with at most [`DEFAULT_CAP_CELLS`] cells: 20 for a
    /// binary alphabet.
    pub fn default_for(alphabet: Alphabet) -> Self {
        let mut d = 0;
        while alphabet.word_count(d + 1).is_some_and(|c| c <= DEFAULT_CAP_CELLS) && alphabet.size() > 1 {
            d += 1;
        }
        DepthCap(d)
    }
}

/// `L*^n nu`: prepend `n` symbols drawn from `g`. The depth grows by one per
/// step until `cap` (or the input depth, if larger), beyond which the
/// deepest coordinate is marginalized out exactly.
pub fn adjoint_power(
    g: &GFunction,
    nu: &CylinderMeasure,
    n: usize,
    cap: DepthCap,
) -> Result<CylinderMeasure> {
    if n == 0 {
        return invalid("adjoint power needs n >= 1");
    }
    if nu.alphabet != g.alphabet() {
        return invalid("measure and g use different alphabets");
    }
    if nu.depth < g.context_len() {
        return invalid(format!(
            "measure depth {} is smaller than the {} past coordinates g reads",
            nu.depth,
            g.context_len()
        ));
    }
    let cap = cap.0.max(nu.depth);
    cell_count(g.alphabet(), cap.min(nu.depth + n))?;
    let mut current = nu.clone();
    for _ in 0..n {
        current = adjoint_step(g, &current, cap);
    }
    Ok(current)
}

fn adjoint_step(g: &GFunction, nu: &CylinderMeasure, cap: usize) -> CylinderMeasure {
    let a = g.alphabet();
    let s = a.size();
    let d = nu.depth;
    let cells = nu.masses.len();
    let mut grown = vec![0.0; cells * s];
    match g.kind() {
        GKind::Table(t) => {
            let m = t.memory();
            let n_hist = a.word_count(m).unwrap();
            let shift = a.word_count(d - m).unwrap();
            let vals = t.values();
            for (idx, &mass) in nu.masses.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let h = idx / shift;
                for sym in 0..s {
                    grown[sym * cells + idx] = mass * vals[sym * n_hist + h];
                }
            }
        }
        GKind::Logistic(_) => {
            let mut law = vec![0.0; s];
            for (idx, &mass) in nu.masses.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                g.next_law_into(&a.decode(idx, d), &mut law);
                for sym in 0..s {
                    grown[sym * cells + idx] = mass * law[sym];
                }
            }
        }
    }
    if d + 1 > cap {
        let folded = grown.chunks(s).map(|c| c.iter().sum()).collect();
        CylinderMeasure::from_raw(a, d, folded)
    } else {
        CylinderMeasure::from_raw(a, d + 1, grown)
    }
}

/// The unique g-measure of a table g, restricted to its first `memory`
/// coordinates.
pub fn stationary_measure(g: &GFunction) -> Result<CylinderMeasure> {
    let GKind::Table(t) = g.kind() else {
        return unsupported("stationary_measure needs a table g; iterate adjoint_power instead");
    };
    let a = g.alphabet();
    let m = t.memory();
    let states = cell_count(a, m)?;
    if states == 1 {
        return Ok(CylinderMeasure::from_raw(a, 0, vec![1.0]));
    }
    // transition h = (x_1..x_m) -> (sym, x_1..x_{m-1}) with prob g(sym . h)
    let shift = states / a.size();
    let step = |h: usize, sym: usize| sym * shift + h / a.size();
    let pi = if states <= DENSE_STATE_LIMIT {
        let mut mat = vec![0.0; states * states];
        for h in 0..states {
            for sym in 0..a.size() {
                // row = target state, column = source state: (P^T - I)
                mat[step(h, sym) * states + h] += t.values()[sym * states + h];
            }
            mat[h * states + h] -= 1.0;
        }
        let mut rhs = vec![0.0; states];
        for c in 0..states {
            mat[(states - 1) * states + c] = 1.0;
        }
        rhs[states - 1] = 1.0;
        solve_dense(&mut mat, &mut rhs, states)?
    } else {
        let mut pi = vec![1.0 / states as f64; states];
        let mut next = vec![0.0; states];
        let mut converged = false;
        for _ in 0..1_000_000 {
            next.iter_mut().for_each(|x| *x = 0.0);
            for h in 0..states {
                for sym in 0..a.size() {
                    next[step(h, sym)] += pi[h] * t.values()[sym * states + h];
                }
            }
            let diff: f64 = pi.iter().zip(&next).map(|(x, y)| (x - y).abs()).sum();
            std::mem::swap(&mut pi, &mut next);
            if diff < 1e-13 {
                converged = true;
                break;
            }
        }
        if !converged {
            return unsupported("power iteration for the stationary law did not converge");
        }
        pi
    };
    let total: f64 = pi.iter().sum();
    let masses = pi.into_iter().map(|p| p.max(0.0) / total).collect();
    Ok(CylinderMeasure::from_raw(a, m, masses))
}

/// The stationary measure of a table g on the first `depth >= memory`
/// coordinates.
pub fn stationary_measure_at(g: &GFunction, depth: usize) -> Result<CylinderMeasure> {
    let base = stationary_measure(g)?;
    if depth < base.depth {
        return base.marginal(depth);
    }
    if depth == base.depth {
        return Ok(base);
    }
    cell_count(g.alphabet(), depth)?;
    adjoint_power(g, &base, depth - base.depth, DepthCap(depth))
}

/// Gaussian elimination with partial pivoting on a row-major square matrix.
fn solve_dense(mat: &mut [f64], rhs: &mut [f64], n: usize) -> Result<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| mat[i * n + col].abs().total_cmp(&mat[j * n + col].abs()))
            .unwrap();
        if mat[pivot * n + col].abs() < 1e-300 {
            return unsupported("stationarity system is singular");
        }
        if pivot != col {
            for c in 0..n {
                mat.swap(pivot * n + c, col * n + c);
            }
            rhs.swap(pivot, col);
        }
        let p = mat[col * n + col];
        for row in col + 1..n {
            let f = mat[row * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                mat[row * n + c] -= f * mat[col * n + c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc -= mat[row * n + c] * x[c];
        }
        x[row] = acc / mat[row * n + row];
    }
    Ok(x)
}

/// Convenience: the point mass on `word` as a [`Word`]-typed call.
pub fn point_mass(alphabet: Alphabet, word: &Word) -> Result<CylinderMeasure> {
    CylinderMeasure::point_mass(alphabet, word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::Couplings;

    fn table1() -> GFunction {
        GFunction::binary_markov(0.3, 0.6).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn block_marginal_examples() {
        let iid = GFunction::iid(vec![0.5, 0.5]).unwrap();
        let eta = block_marginal(&iid, &[], 2).unwrap();
        assert!(eta.masses().iter().all(|&m| m == 0.25));

        let g = table1();
        let eta = block_marginal(&g, &[1], 2).unwrap();
        // words (y1, y2) in encoding order 00, 01, 10, 11
        let expected = [0.28, 0.42, 0.21, 0.09];
        for (m, e) in eta.masses().iter().zip(expected) {
            assert!(close(*m, e, 1e-15), "{m} vs {e}");
        }
        assert!(block_marginal(&g, &[1], 0).is_err());
        assert!(block_marginal(&g, &[], 1).is_err());
    }

    #[test]
    fn near_deterministic_table_gives_point_mass() {
        let g = GFunction::binary_markov(1.0 - 2e-9, 1.0 - 2e-9).unwrap();
        let eta = block_marginal(&g, &[0], 4).unwrap();
        let last = eta.masses().len() - 1;
        assert!(close(eta.masses()[last], 1.0, 1e-8));
    }

    #[test]
    fn block_marginals_are_consistent_under_marginalization() {
        let g = GFunction::table(
            Alphabet::BINARY,
            2,
            vec![vec![0.2, 0.8], vec![0.55, 0.45], vec![0.9, 0.1], vec![0.35, 0.65]],
        )
        .unwrap();
        for past in g.alphabet().words(2) {
            for b in 2..=5 {
                let long = block_marginal(&g, &past, b).unwrap();
                let short = block_marginal(&g, &past, b - 1).unwrap();
                let folded = long.as_measure().marginal(b - 1).unwrap();
                assert!(folded.max_abs_diff(short.as_measure()).unwrap() < 1e-15);
                assert!(close(long.as_measure().total(), 1.0, 1e-12));
                assert!(long.masses().iter().all(|&m| m > 0.0));
            }
        }
    }

    #[test]
    fn adjoint_single_step_and_block_marginal_bridge() {
        let g = table1();
        let nu = CylinderMeasure::point_mass(Alphabet::BINARY, &[1]).unwrap();
        let one = adjoint_power(&g, &nu, 1, DepthCap(20)).unwrap();
        assert_eq!(one.depth(), 2);
        assert!(close(one.mass(&[1, 1]).unwrap(), 0.3, 1e-15));
        assert!(close(one.mass(&[0, 1]).unwrap(), 0.7, 1e-15));

        let two = adjoint_power(&g, &nu, 2, DepthCap(20)).unwrap();
        let new_coords = two.marginal(2).unwrap();
        let eta = block_marginal(&g, &[1], 2).unwrap().to_prefix_order();
        assert!(new_coords.max_abs_diff(&eta).unwrap() < 1e-15);
    }

    #[test]
    fn stationary_examples() {
        let g = table1();
        let pi = stationary_measure(&g).unwrap();
        assert!(close(pi.mass(&[1]).unwrap(), 0.6 / 1.3, 1e-12));
        assert!((pi.mass(&[1]).unwrap() - 0.461538).abs() < 1e-6);
        let fixed = adjoint_power(&g, &pi, 5, DepthCap(1)).unwrap();
        assert!(fixed.max_abs_diff(&pi).unwrap() < 1e-12);

        let iid_like = GFunction::binary_markov(0.35, 0.35).unwrap();
        let pi = stationary_measure_at(&iid_like, 3).unwrap();
        assert!(close(pi.mass(&[1, 0, 1]).unwrap(), 0.35 * 0.65 * 0.35, 1e-12));

        let uniform = GFunction::table(Alphabet::new(3).unwrap(), 2, vec![vec![1.0 / 3.0; 3]; 9]).unwrap();
        let pi = stationary_measure(&uniform).unwrap();
        assert!(pi.masses().iter().all(|&m| close(m, 1.0 / 9.0, 1e-12)));

        let logistic = GFunction::logistic(0.0, Couplings::Power { scale: 1.0, exponent: 2.0 }, 4).unwrap();
        assert!(stationary_measure(&logistic).is_err());
    }

    #[test]
    fn stationary_is_fixed_at_every_depth() {
        let g = GFunction::table(
            Alphabet::BINARY,
            2,
            vec![vec![0.3, 0.7], vec![0.6, 0.4], vec![0.15, 0.85], vec![0.5, 0.5]],
        )
        .unwrap();
        for depth in 2..=8 {
            let pi = stationary_measure_at(&g, depth).unwrap();
            let next = adjoint_power(&g, &pi, 3, DepthCap(depth)).unwrap();
            assert!(next.max_abs_diff(&pi).unwrap() < 1e-12, "depth {depth}");
        }
    }

    #[test]
    fn adjoint_requires_depth() {
        let g = GFunction::table(Alphabet::BINARY, 2, vec![vec![0.5, 0.5]; 4]).unwrap();
        let nu = CylinderMeasure::point_mass(Alphabet::BINARY, &[1]).unwrap();
        assert!(adjoint_power(&g, &nu, 1, DepthCap(10)).is_err());
        assert_eq!(DepthCap::default_for(Alphabet::BINARY), DepthCap(20));
    }
}
