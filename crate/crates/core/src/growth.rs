//! Moment Lyapunov exponents, intermittency diagnostics, and exponential
//! growth indices: closed-form bounds, the exact transition for
//! exponentially decaying data, and an empirical estimator driven by the
//! exact second moment.

use alloc::vec::Vec;

use core::fmt;

use crate::kernels::GrowthEnvelope;
use crate::math;
use crate::measure::InitialMeasure;
use crate::moments::{second_moment_exact, MomentError, MomentRequest};
use crate::stats::{golden_section_max, ols_fit};

/// Errors from growth-index estimation.
#[derive(Debug, Clone, PartialEq)]
pub enum GrowthError {
    /// The fitted rate has one sign over the whole scanned range; no
    /// transition bracket exists there.
    NoSignChange,
    OrderTooSmall(u32),
    QuasiLinearRequired,
    NonnegativeMeasureRequired,
    Moment(MomentError),
}

impl fmt::Display for GrowthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoSignChange => write!(f, "growth rate has constant sign on the scanned cone slopes"),
            Self::OrderTooSmall(p) => write!(f, "growth indices need order >= 2, got {p}"),
            Self::QuasiLinearRequired => write!(f, "empirical growth index needs a quasi-linear envelope with zero offset"),
            Self::NonnegativeMeasureRequired => write!(f, "empirical growth index needs a nonnegative, nonzero measure"),
            Self::Moment(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GrowthError {}

impl From<MomentError> for GrowthError {
    fn from(e: MomentError) -> Self {
        Self::Moment(e)
    }
}

/// Upper bound on the order-`p` moment Lyapunov exponent for Lebesgue data:
/// `2^3 p^3 L^4 / nu` when the growth offset vanishes, `2^5 p^3 L^4 / nu`
/// otherwise.
pub fn lyapunov_bound_lebesgue(p: u32, growth: f64, nu: f64, offset_zero: bool) -> f64 {
    let pf = f64::from(p);
    let factor = if offset_zero { 8.0 } else { 32.0 };
    factor * pf * pf * pf * math::powi(growth, 4) / nu
}

/// Exact moment Lyapunov exponent of the parabolic Anderson model with
/// Lebesgue data: `lambda^4 n (n^2 - 1) / (4! nu)`.
pub fn lyapunov_exact_pam(n: u32, lambda: f64, nu: f64) -> f64 {
    assert!(n >= 1);
    let nf = f64::from(n);
    math::powi(lambda, 4) * nf * (nf * nf - 1.0) / (24.0 * nu)
}

/// Closed-form bounds `(lower, upper)` on the exponential growth indices of
/// order `p` for a nonnegative measure with exponential tail rate `beta`
/// (`+infinity` for compactly supported data, `0` when no exponential decay).
///
/// For `p = 2` the bound is the sharp one (it coincides with the exact
/// transition of [`growth_index_exact_exp_decay`]); for `p > 2` the
/// `z_p = 2 sqrt(p)` envelope enters fourth power, so the bound is generous.
/// A nonzero growth offset forces both indices to `+infinity`.
pub fn growth_index_bounds(
    p: u32,
    env: &GrowthEnvelope,
    beta: f64,
    nu: f64,
) -> Result<(f64, f64), GrowthError> {
    if p < 2 {
        return Err(GrowthError::OrderTooSmall(p));
    }
    if env.offset_lower != 0.0 {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    let lower = 0.5 * env.growth_lower * env.growth_lower;
    if env.offset_upper != 0.0 {
        return Ok((lower, f64::INFINITY));
    }
    let even = p + p % 2;
    let lip = env.growth_upper;
    let upper = if even == 2 {
        let threshold = lip * lip / (2.0 * nu);
        if beta >= threshold {
            0.5 * lip * lip
        } else if beta > 0.0 {
            beta * nu / 2.0 + math::powi(lip, 4) / (8.0 * nu * beta)
        } else {
            f64::INFINITY
        }
    } else {
        let z = 2.0 * math::sqrt(f64::from(even));
        let threshold = z * z * lip * lip / nu;
        if beta >= threshold {
            z * z * lip * lip
        } else if beta > 0.0 {
            beta * nu / 2.0 + math::powi(z, 4) * math::powi(lip, 4) / (2.0 * nu * beta)
        } else {
            f64::INFINITY
        }
    };
    Ok((lower, upper))
}

/// Exact order-2 growth index of the parabolic Anderson model with density
/// `e^{-beta |x|}`: `beta nu / 2 + lambda^4 / (8 beta nu)` up to the
/// transition at `beta = lambda^2 / (2 nu)`, and `lambda^2 / 2` beyond it.
pub fn growth_index_exact_exp_decay(beta: f64, lambda: f64, nu: f64) -> f64 {
    assert!(beta > 0.0);
    let l2 = lambda * lambda;
    if beta <= l2 / (2.0 * nu) {
        beta * nu / 2.0 + l2 * l2 / (8.0 * beta * nu)
    } else {
        0.5 * l2
    }
}

/// Options for the empirical growth-index estimator.
#[derive(Debug, Clone, Copy)]
pub struct GrowthOptions {
    /// Largest time on the fitting window `[t_max/2, t_max]`.
    pub t_max: f64,
    /// Number of time samples in the slope fit.
    pub t_samples: usize,
    /// Half-width of the scanned cone-slope range around the theoretical
    /// hints, in units of `lambda^2`.
    pub alpha_margin: f64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        // The fitted slope stabilizes once lambda^4 t / 4 nu >> 1, so 100 is
        // comfortable for lambda, nu near 1.
        Self { t_max: 100.0, t_samples: 5, alpha_margin: 0.2 }
    }
}

/// Empirical growth-index report.
#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub order: u32,
    pub lower_index_bound: f64,
    pub upper_index_bound: f64,
    /// Empirical transition slope (midpoint of `bracket`).
    pub transition: f64,
    pub bracket: (f64, f64),
    /// Scanned `(alpha, fitted rate)` pairs.
    pub per_alpha_rates: Vec<(f64, f64)>,
    /// Largest rms residual among the slope fits.
    pub max_fit_residual: f64,
}

/// Estimate the order-2 growth index transition of the parabolic Anderson
/// model empirically: for each cone slope `alpha`, fit the exponential rate
/// of `t -> sup_{|x| >= alpha t} log E|u(t,x)|^2` over `[t_max/2, t_max]`
/// and bisect the sign change in `alpha`.
///
/// The spatial supremum at fixed `t` is taken by golden-section over
/// `|x| in [alpha t, alpha t + 10 sqrt(nu t)]` (the second moment of
/// decaying data is eventually decreasing in `|x|`), with a dense-scan
/// fallback when the unimodality assumption looks violated.
pub fn empirical_growth_index(
    mu: &InitialMeasure,
    nu: f64,
    lambda: f64,
    opts: &GrowthOptions,
) -> Result<GrowthReport, GrowthError> {
    let env = GrowthEnvelope::quasi_linear(lambda, 0.0).map_err(|_| GrowthError::QuasiLinearRequired)?;
    if !mu.is_nonnegative() || (mu.atoms().is_empty() && mu.density().is_none()) {
        return Err(GrowthError::NonnegativeMeasureRequired);
    }
    let beta = mu.exponential_tail_rate();
    let (lower_hint, upper_hint) = growth_index_bounds(2, &env, beta, nu)?;

    let l2 = lambda * lambda;
    let margin = opts.alpha_margin * l2;
    let hint_lo = if lower_hint.is_finite() { lower_hint } else { 0.5 * l2 };
    let hint_hi = if upper_hint.is_finite() { upper_hint } else { hint_lo * 2.0 + l2 };
    let alpha_lo = (hint_lo.min(hint_hi) - margin).max(0.01 * l2);
    let alpha_hi = hint_hi.max(hint_lo) + margin;
    let step = 0.01 * l2;

    let rate = |alpha: f64| -> Result<(f64, f64), GrowthError> {
        fitted_rate(mu, &env, nu, alpha, opts)
    };

    let mut per_alpha = Vec::new();
    let mut max_residual = 0.0f64;
    let n_steps = math::ceil((alpha_hi - alpha_lo) / step) as usize;
    let mut bracket: Option<((f64, f64), (f64, f64))> = None;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n_steps {
        let alpha = alpha_lo + step * i as f64;
        let (r, resid) = rate(alpha)?;
        per_alpha.push((alpha, r));
        max_residual = max_residual.max(resid);
        if let Some((pa, pr)) = prev {
            if pr > 0.0 && r <= 0.0 {
                bracket = Some(((pa, pr), (alpha, r)));
                break;
            }
        }
        prev = Some((alpha, r));
    }

    let Some(((mut a_pos, _), (mut a_neg, _))) = bracket else {
        return Err(GrowthError::NoSignChange);
    };

    // Bisection refinement inside the bracketing grid cell.
    for _ in 0..3 {
        let mid = 0.5 * (a_pos + a_neg);
        let (r, resid) = rate(mid)?;
        max_residual = max_residual.max(resid);
        per_alpha.push((mid, r));
        if r > 0.0 {
            a_pos = mid;
        } else {
            a_neg = mid;
        }
    }
    per_alpha.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    Ok(GrowthReport {
        order: 2,
        lower_index_bound: lower_hint,
        upper_index_bound: upper_hint,
        transition: 0.5 * (a_pos + a_neg),
        bracket: (a_pos.min(a_neg), a_pos.max(a_neg)),
        per_alpha_rates: per_alpha,
        max_fit_residual: max_residual,
    })
}

/// Fitted exponential rate of the log-supremum along the cone of slope
/// `alpha`, with the rms residual of the fit.
fn fitted_rate(
    mu: &InitialMeasure,
    env: &GrowthEnvelope,
    nu: f64,
    alpha: f64,
    opts: &GrowthOptions,
) -> Result<(f64, f64), GrowthError> {
    let m = opts.t_samples.max(3);
    let mut ts = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for i in 0..m {
        let t = opts.t_max / 2.0 + opts.t_max / 2.0 * (i as f64) / ((m - 1) as f64);
        ys.push(log_sup_over_cone(mu, env, nu, alpha, t)?);
        ts.push(t);
    }
    let (slope, _, residual) = ols_fit(&ts, &ys);
    Ok((slope, residual))
}

fn log_sup_over_cone(
    mu: &InitialMeasure,
    env: &GrowthEnvelope,
    nu: f64,
    alpha: f64,
    t: f64,
) -> Result<f64, GrowthError> {
    let lo = alpha * t;
    let hi = alpha * t + 10.0 * math::sqrt(nu * t);
    let mut failure: Option<MomentError> = None;
    let mut log_f = |x: f64| -> f64 {
        let req = MomentRequest {
            measure: mu.clone(),
            envelope: *env,
            nu,
            order: 2,
            t,
            x,
        };
        match second_moment_exact(&req) {
            Ok(v) => math::ln(v.max(f64::MIN_POSITIVE)),
            Err(e) => {
                failure = Some(e);
                f64::NEG_INFINITY
            }
        }
    };
    let (_, golden) = golden_section_max(&mut log_f, lo, hi, 1e-4 * (hi - lo).max(1e-12));
    let end_lo = log_f(lo);
    let end_hi = log_f(hi);
    let mut best = golden.max(end_lo).max(end_hi);
    // Unimodality check: golden must not lose to the endpoints by more than
    // jitter; otherwise fall back to a dense scan.
    if golden + 1e-9 < best {
        for i in 0..=32 {
            let x = lo + (hi - lo) * (i as f64) / 32.0;
            best = best.max(log_f(x));
        }
    }
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(best)
}
