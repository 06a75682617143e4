use crate::scalar::Scalar;

/// Differences below this are treated as a flat log-likelihood.
const PLATEAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AitkenStatus<F> {
    pub converged: bool,
    /// Asymptotic log-likelihood estimate from the most recent three values.
    pub l_inf: F,
}

/// Extrapolated limit from three consecutive values, or `None` on a plateau.
fn asymptote<F: Scalar>(prev: F, cur: F, next: F) -> Option<F> {
    let denom = cur - prev;
    if denom.abs() < F::lit(PLATEAU) {
        return None;
    }
    let acc = (next - cur) / denom;
    Some(cur + (next - cur) / (F::one() - acc))
}

/// Aitken acceleration stopping rule.
///
/// Needs at least three values. With four or more, convergence is declared
/// when the last two asymptotic estimates differ by less than `epsilon`.
/// A flat step (`|l(t) − l(t−1)| < 1e-12`) counts as converged at any length.
pub fn aitken_converged<F: Scalar>(history: &[F], epsilon: F) -> AitkenStatus<F> {
    let n = history.len();
    assert!(n >= 3, "Aitken rule needs three log-likelihood values");
    let (a, b, c) = (history[n - 3], history[n - 2], history[n - 1]);
    let Some(l_inf) = asymptote(a, b, c) else {
        return AitkenStatus {
            converged: true,
            l_inf: c,
        };
    };
    let converged = n >= 4
        && match asymptote(history[n - 4], a, b) {
            Some(prev) => (l_inf - prev).abs() < epsilon,
            None => (l_inf - b).abs() < epsilon,
        };
    AitkenStatus { converged, l_inf }
}
