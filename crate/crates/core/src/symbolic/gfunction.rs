use serde::{Deserialize, Serialize};

use super::word::Alphabet;
use crate::error::{invalid, Result};

/// Smallest admissible entry of a table g-function.
pub const TABLE_FLOOR: f64 = 1e-9;

/// Columns must sum to one within this before exact renormalization.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Symbol used for coordinates beyond the supplied past of a logistic g.
pub const LOGISTIC_FILL: usize = 0;

/// A normalized, strictly positive transition kernel on the one-sided shift.
///
/// `g(a . x)` is the probability that the next symbol is `a` given the past
/// `x`; the word `a . x` is what [`GFunction::eval`] receives.
#[derive(Debug, Clone, PartialEq)]
pub struct GFunction {
    alphabet: Alphabet,
    kind: GKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GKind {
    Table(TableG),
    Logistic(LogisticG),
}

/// Finite-memory g: depends on the new symbol and `memory` past symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct TableG {
    memory: usize,
    /// Indexed by the encoding of the `(memory + 1)`-word, new symbol first.
    values: Vec<f64>,
    logs: Vec<f64>,
}

/// Binary long-range family `P(x0 = 1 | past) = sigma(theta0 + sum_k theta_k (2 x_k - 1))`,
/// evaluated with the past truncated at `depth` and padded with
/// [`LOGISTIC_FILL`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticG {
    theta0: f64,
    couplings: Couplings,
    depth: usize,
    /// `theta[k - 1]` is theta_k for `1 <= k <= depth`.
    theta: Vec<f64>,
}

/// Coupling constants `theta_k`, `k >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Couplings {
    /// `theta_1 .. theta_K` listed; `tail_bound >= sum_{k > K} |theta_k|`.
    Explicit { theta: Vec<f64>, tail_bound: f64 },
    /// `theta_k = scale * k^(-exponent)` with `exponent > 1`.
    Power { scale: f64, exponent: f64 },
}

impl Couplings {
    fn validate(&self) -> Result<()> {
        match self {
            Couplings::Explicit { theta, tail_bound } => {
                if theta.iter().any(|t| !t.is_finite()) {
                    return invalid("logistic couplings must be finite");
                }
                if !(tail_bound.is_finite() && *tail_bound >= 0.0) {
                    return invalid("logistic tail_bound must be finite and nonnegative");
                }
            }
            Couplings::Power { scale, exponent } => {
                if !scale.is_finite() {
                    return invalid("power coupling scale must be finite");
                }
                if !(exponent.is_finite() && *exponent > 1.0) {
                    return invalid("power coupling exponent must exceed 1 for summability");
                }
            }
        }
        Ok(())
    }

    /// theta_k for `k >= 1` where known; explicit lists are zero past their end.
    pub fn theta(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        match self {
            Couplings::Explicit { theta, .. } => theta.get(k - 1).copied().unwrap_or(0.0),
            Couplings::Power { scale, exponent } => scale * (k as f64).powf(-exponent),
        }
    }

    /// Upper bound on `sum_{k >= n} |theta_k|` for `n >= 1`.
    pub fn abs_tail_from(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        match self {
            Couplings::Explicit { theta, tail_bound } => {
                let listed: f64 = theta.iter().skip(n - 1).map(|t| t.abs()).sum();
                listed + tail_bound
            }
            Couplings::Power { scale, exponent } => {
                // f(n) + integral_n^inf f
                let n = n as f64;
                scale.abs() * (n.powf(-exponent) + n.powf(1.0 - exponent) / (exponent - 1.0))
            }
        }
    }

    /// Upper bound on `sum_{k > depth} |theta_k|`.
    fn abs_tail_beyond(&self, depth: usize) -> f64 {
        match self {
            Couplings::Explicit { .. } => self.abs_tail_from(depth + 1),
            Couplings::Power { scale, exponent } if depth >= 1 => {
                scale.abs() * (depth as f64).powf(1.0 - exponent) / (exponent - 1.0)
            }
            Couplings::Power { .. } => self.abs_tail_from(1),
        }
    }
}

impl GFunction {
    /// Table g-function from its columns: `columns[h][a] = g(a . h)` where `h`
    /// is the encoding of the `memory` most recent past symbols (most recent
    /// first). Columns are renormalized exactly after validation.
    pub fn table(alphabet: Alphabet, memory: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        let s = alphabet.size();
        let Some(n_hist) = alphabet.word_count(memory) else {
            return invalid("table memory too large");
        };
        if columns.len() != n_hist {
            return invalid(format!(
                "table of memory {memory} over {s} symbols needs {n_hist} columns, got {}",
                columns.len()
            ));
        }
        let mut values = vec![0.0; n_hist * s];
        for (h, col) in columns.iter().enumerate() {
            if col.len() != s {
                return invalid(format!("column {h} has {} entries, expected {s}", col.len()));
            }
            let sum: f64 = col.iter().sum();
            if !sum.is_finite() || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return invalid(format!("column {h} sums to {sum}, expected 1"));
            }
            for (a, &v) in col.iter().enumerate() {
                if !(v.is_finite() && v >= TABLE_FLOOR) {
                    return invalid(format!(
                        "entry g({a} | column {h}) = {v} is below the positivity floor {TABLE_FLOOR}"
                    ));
                }
                values[a * n_hist + h] = v / sum;
            }
        }
        Ok(Self::from_normalized_values(alphabet, memory, values))
    }

    /// Table g-function from a function of the `(memory + 1)`-word (new symbol
    /// first). Columns are renormalized; the second component reports whether
    /// renormalization changed anything beyond rounding.
    pub fn table_from_fn(
        alphabet: Alphabet,
        memory: usize,
        f: impl Fn(&[usize]) -> f64,
    ) -> Result<(Self, bool)> {
        let s = alphabet.size();
        let Some(n_hist) = alphabet.word_count(memory) else {
            return invalid("table memory too large");
        };
        let mut values = vec![0.0; n_hist * s];
        let mut renormalized = false;
        let mut word = vec![0usize; memory + 1];
        for h in 0..n_hist {
            word[1..].copy_from_slice(&alphabet.decode(h, memory));
            let mut sum = 0.0;
            for a in 0..s {
                word[0] = a;
                let v = f(&word);
                if !(v.is_finite() && v > 0.0) {
                    return invalid(format!("g value {v} at word {word:?} is not positive"));
                }
                values[a * n_hist + h] = v;
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-14 {
                renormalized = true;
            }
            for a in 0..s {
                values[a * n_hist + h] /= sum;
            }
        }
        Ok((Self::from_normalized_values(alphabet, memory, values), renormalized))
    }

    fn from_normalized_values(alphabet: Alphabet, memory: usize, values: Vec<f64>) -> Self {
        let logs = values.iter().map(|v| v.ln()).collect();
        GFunction {
            alphabet,
            kind: GKind::Table(TableG { memory, values, logs }),
        }
    }

    /// Binary Markov kernel with `P(1 | 1) = p11` and `P(1 | 0) = p10`.
    pub fn binary_markov(p11: f64, p10: f64) -> Result<Self> {
        Self::table(
            Alphabet::BINARY,
            1,
            vec![vec![1.0 - p10, p10], vec![1.0 - p11, p11]],
        )
    }

    /// Memory-0 kernel: i.i.d. symbols with the given law.
    pub fn iid(probs: Vec<f64>) -> Result<Self> {
        let alphabet = Alphabet::new(probs.len())?;
        Self::table(alphabet, 0, vec![probs])
    }

    pub fn logistic(theta0: f64, couplings: Couplings, depth: usize) -> Result<Self> {
        if !theta0.is_finite() {
            return invalid("logistic theta0 must be finite");
        }
        if depth == 0 {
            return invalid("logistic truncation depth must be positive");
        }
        couplings.validate()?;
        let theta = (1..=depth).map(|k| couplings.theta(k)).collect();
        Ok(GFunction {
            alphabet: Alphabet::BINARY,
            kind: GKind::Logistic(LogisticG {
                theta0,
                couplings,
                depth,
                theta,
            }),
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn kind(&self) -> &GKind {
        &self.kind
    }

    /// Memory of a table g, `None` for infinite-memory families.
    pub fn memory(&self) -> Option<usize> {
        match &self.kind {
            GKind::Table(t) => Some(t.memory),
            GKind::Logistic(_) => None,
        }
    }

    /// Number of past coordinates read by an evaluation: the memory of a
    /// table, the truncation depth of a logistic g.
    pub fn context_len(&self) -> usize {
        match &self.kind {
            GKind::Table(t) => t.memory,
            GKind::Logistic(l) => l.depth,
        }
    }

    /// Certified bound on `|log g_eval - log g|` where `g_eval` is the
    /// truncated evaluation and `g` the untruncated family.
    pub fn truncation_slack(&self) -> f64 {
        match &self.kind {
            GKind::Table(_) => 0.0,
            GKind::Logistic(l) => 2.0 * l.couplings.abs_tail_beyond(l.depth),
        }
    }

    fn check_word(&self, word: &[usize]) -> Result<()> {
        if word.is_empty() {
            return invalid("g needs a word of length at least 1");
        }
        if let GKind::Table(t) = &self.kind {
            if word.len() < t.memory + 1 {
                return invalid(format!(
                    "word of length {} is too short for table memory {}",
                    word.len(),
                    t.memory
                ));
            }
        }
        self.alphabet.check_word(word)
    }

    /// `g(word)`: `word[0]` is the new symbol, `word[1..]` its history.
    pub fn eval(&self, word: &[usize]) -> Result<f64> {
        self.check_word(word)?;
        Ok(self.eval_unchecked(word))
    }

    pub fn log_eval(&self, word: &[usize]) -> Result<f64> {
        self.check_word(word)?;
        Ok(self.log_eval_unchecked(word))
    }

    pub(crate) fn eval_unchecked(&self, word: &[usize]) -> f64 {
        match &self.kind {
            GKind::Table(t) => t.values[self.alphabet.encode(&word[..=t.memory])],
            GKind::Logistic(l) => l.log_eval(word).exp(),
        }
    }

    pub(crate) fn log_eval_unchecked(&self, word: &[usize]) -> f64 {
        match &self.kind {
            GKind::Table(t) => t.logs[self.alphabet.encode(&word[..=t.memory])],
            GKind::Logistic(l) => l.log_eval(word),
        }
    }

    /// Law of the next symbol given `history` (most recent first), written
    /// into `out[a] = g(a . history)`.
    pub(crate) fn next_law_into(&self, history: &[usize], out: &mut [f64]) {
        match &self.kind {
            GKind::Table(t) => {
                let n_hist = t.values.len() / self.alphabet.size();
                let h = self.alphabet.encode(&history[..t.memory]);
                for (a, o) in out.iter_mut().enumerate() {
                    *o = t.values[a * n_hist + h];
                }
            }
            GKind::Logistic(l) => {
                let field = l.field_of_history(history);
                out[1] = sigmoid(field);
                out[0] = sigmoid(-field);
            }
        }
    }

    /// Law of the next symbol given `history`.
    pub fn next_law(&self, history: &[usize]) -> Result<Vec<f64>> {
        if history.len() < self.memory().unwrap_or(0) {
            return invalid(format!(
                "history of length {} is too short for memory {}",
                history.len(),
                self.context_len()
            ));
        }
        self.alphabet.check_word(history)?;
        let mut out = vec![0.0; self.alphabet.size()];
        self.next_law_into(history, &mut out);
        Ok(out)
    }
}

impl TableG {
    pub fn memory(&self) -> usize {
        self.memory
    }

    /// Values indexed by the encoding of the `(memory + 1)`-word.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_values(&self) -> &[f64] {
        &self.logs
    }
}

impl LogisticG {
    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// theta_1 .. theta_depth.
    pub fn truncated_theta(&self) -> &[f64] {
        &self.theta
    }

    /// Bound on `sum_{k >= n} |theta_k|` over the untruncated family, with
    /// theta_0 counted at `n = 0`.
    pub fn abs_tail(&self, n: usize) -> f64 {
        if n == 0 {
            self.theta0.abs() + self.couplings.abs_tail_from(1)
        } else if n <= self.depth {
            let listed: f64 = self.theta[n - 1..].iter().map(|t| t.abs()).sum();
            listed + self.couplings.abs_tail_beyond(self.depth)
        } else {
            self.couplings.abs_tail_from(n)
        }
    }

    /// Field of the next symbol given its history (most recent first).
    fn field_of_history(&self, history: &[usize]) -> f64 {
        let mut f = self.theta0;
        for (k, &t) in self.theta.iter().enumerate() {
            let x = history.get(k).copied().unwrap_or(LOGISTIC_FILL);
            f += if x == 1 { t } else { -t };
        }
        f
    }

    fn log_eval(&self, word: &[usize]) -> f64 {
        let field = self.field_of_history(&word[1..]);
        if word[0] == 1 {
            log_sigmoid(field)
        } else {
            log_sigmoid(-field)
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}
