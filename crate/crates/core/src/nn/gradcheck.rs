/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Entries smaller than this are below central-difference resolution for
/// O(1) losses and are compared absolutely.
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, GRADIENT_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADIENT_FLOOR)
}

/// Compares the gradient returned by `f` at `params` against central
/// differences with the given step, entry by entry.
///
/// `f` maps a flat parameter vector to `(value, gradient)`.
pub fn gradient_check_detailed<F>(mut f: F, params: &[f64], step: f64) -> GradCheck
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(params);
    assert_eq!(analytic.len(), params.len(), "gradient length must match params");
    let mut probe = params.to_vec();
    let mut worst = GradCheck {
        max_relative_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for i in 0..params.len() {
        probe[i] = params[i] + step;
        let (plus, _) = f(&probe);
        probe[i] = params[i] - step;
        let (minus, _) = f(&probe);
        probe[i] = params[i];
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic[i], numeric);
        if err > worst.max_relative_error || err.is_nan() {
            worst = GradCheck {
                max_relative_error: err,
                worst_index: i,
                analytic: analytic[i],
                numeric,
            };
        }
    }
    worst
}

pub fn gradient_check<F>(f: F, params: &[f64], step: f64) -> f64
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    gradient_check_detailed(f, params, step).max_relative_error
}
