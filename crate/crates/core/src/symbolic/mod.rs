//! Alphabets, words, g-functions and their variations.

mod gfunction;
mod variation;
mod word;

pub use gfunction::{
    Couplings, GFunction, GKind, LogisticG, TableG, LOGISTIC_FILL, NORMALIZATION_TOLERANCE,
    TABLE_FLOOR,
};
pub use variation::{
    truncated_variation, variation, Decay, Provenance, Tail, Variation, VariationSequence,
};
pub use word::{concordance, Alphabet, Word};

pub(crate) use gfunction::sigmoid;
pub(crate) use word::common_prefix;

use crate::error::Result;

/// A finite-memory approximation together with its certified distance to
/// the original in sup-log norm.
#[derive(Debug, Clone)]
pub struct FiniteApprox {
    pub g: GFunction,
    /// Bound on `|| log g_approx - log g ||_inf`.
    pub sup_log_bound: f64,
    /// True when columns had to be renormalized after substitution.
    pub renormalized: bool,
}

/// `g_N(x) = g(x_0, .., x_N z)`: the memory-`N` table obtained by freezing
/// every coordinate past `N` to the continuation `z` (padded with symbol 0
/// when shorter than needed).
///
/// The reported bound is `var_N log g`, doubled when renormalization was
/// needed.
pub fn finite_approx(g: &GFunction, n: usize, z: &Word) -> Result<FiniteApprox> {
    g.alphabet().check_word(z)?;
    let needed = g.context_len().saturating_sub(n);
    let mut tail = z.symbols().to_vec();
    if tail.len() < needed {
        tail.resize(needed, 0);
    }
    let mut buf = vec![0usize; n + 1 + tail.len()];
    buf[n + 1..].copy_from_slice(&tail);
    let (approx, renormalized) = GFunction::table_from_fn(g.alphabet(), n, |w| {
        let mut b = buf.clone();
        b[..=n].copy_from_slice(w);
        g.eval_unchecked(&b)
    })?;
    let base = variation(g, n).value;
    Ok(FiniteApprox {
        g: approx,
        sup_log_bound: if renormalized { 2.0 * base } else { base },
        renormalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_approx_reproduces_finite_memory() {
        let g = GFunction::binary_markov(0.3, 0.6).unwrap();
        let a = finite_approx(&g, 1, &Word::new(vec![1, 0, 1])).unwrap();
        assert_eq!(a.g, g);
        assert!(!a.renormalized);
        let deeper = finite_approx(&g, 3, &Word::default()).unwrap();
        for w in g.alphabet().words(4) {
            assert_eq!(deeper.g.eval(&w).unwrap(), g.eval(&w).unwrap());
        }
    }

    #[test]
    fn finite_approx_zero_is_iid_column() {
        let g = GFunction::binary_markov(0.3, 0.6).unwrap();
        let a = finite_approx(&g, 0, &Word::new(vec![1])).unwrap();
        assert_eq!(a.g.memory(), Some(0));
        assert!((a.g.eval(&[1]).unwrap() - 0.3).abs() < 1e-15);
        assert!((a.g.eval(&[0]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn finite_approx_of_logistic_within_tail() {
        let theta: Vec<f64> = (1..=10).map(|k| 0.8 / (k as f64).powf(1.5)).collect();
        let g = GFunction::logistic(
            0.1,
            Couplings::Explicit { theta: theta.clone(), tail_bound: 0.0 },
            10,
        )
        .unwrap();
        for n in 0..=6 {
            let approx = finite_approx(&g, n, &Word::default()).unwrap();
            let t = 2.0 * theta[n..].iter().map(|x| x.abs()).sum::<f64>();
            let mut worst = 0.0f64;
            for w in g.alphabet().words(11) {
                let d = (approx.g.log_eval(&w).unwrap() - g.log_eval(&w).unwrap()).abs();
                worst = worst.max(d);
            }
            assert!(worst <= t + 1e-12, "n={n}: {worst} > {t}");
            assert!(worst <= approx.sup_log_bound + 1e-12);
            assert_eq!(truncated_variation(&approx.g, n + 1), 0.0);
        }
    }

    #[test]
    fn normalization_holds_everywhere() {
        let g = GFunction::logistic(0.4, Couplings::Power { scale: 0.7, exponent: 1.5 }, 12).unwrap();
        for h in g.alphabet().words(6) {
            let s: f64 = (0..2).map(|a| g.eval(&Word::from(h.clone()).prepend(a)).unwrap()).sum();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }
}
