//! The scalar kernels that drive every moment formula, together with the
//! growth-envelope description of the nonlinearity and the parameter
//! substitutions (upper / lower / higher-order) applied to them.
//!
//! `moment_kernel` is a product of the heat kernel at half diffusivity with a
//! time factor that is integrably singular (`t^{-1/2}`) at the origin; all
//! consumers that integrate it in time share one policy: substitute
//! `t = w^2` (or split and mirror) near zero so the integrand is bounded.

use core::fmt;

use crate::math;
use crate::quad::{integrate, QuadOpts};
use crate::special::{exp_mul_erfc, heat_kernel, std_normal_cdf};

pub use crate::special::KernelParams;

/// Growth description of the nonlinearity `rho`:
/// `|rho(u)|^2 <= growth_upper^2 (offset_upper^2 + u^2)` globally, optionally
/// `|rho(u)|^2 >= growth_lower^2 (offset_lower^2 + u^2)`, and optionally the
/// quasi-linear equality case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEnvelope {
    /// Lipschitz constant of `rho`.
    pub lipschitz: f64,
    /// Upper linear-growth constant.
    pub growth_upper: f64,
    /// Offset in the upper growth bound (>= 0).
    pub offset_upper: f64,
    /// Lower linear-growth constant (0 when no lower bound is known).
    pub growth_lower: f64,
    /// Offset in the lower growth bound (>= 0).
    pub offset_lower: f64,
    /// Set when `|rho(u)|^2 = lambda^2 (offset^2 + u^2)` exactly.
    pub quasi_linear: Option<QuasiLinear>,
}

/// The quasi-linear case `|rho(u)|^2 = lambda^2 (offset^2 + u^2)`; the
/// parabolic Anderson model is `offset = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiLinear {
    pub lambda: f64,
    pub offset: f64,
}

impl GrowthEnvelope {
    /// Envelope for the parabolic Anderson model `rho(u) = lambda u`.
    pub fn pam(lambda: f64) -> Result<Self, KernelError> {
        Self::quasi_linear(lambda, 0.0)
    }

    /// Envelope for `|rho(u)|^2 = lambda^2 (offset^2 + u^2)`.
    ///
    /// All four growth constants coincide with `|lambda|` (offsets with
    /// `offset`), and the Lipschitz constant of `u -> lambda sqrt(offset^2 +
    /// u^2)` is `|lambda|`.
    pub fn quasi_linear(lambda: f64, offset: f64) -> Result<Self, KernelError> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(KernelError::InvalidEnvelope("quasi-linear lambda must be nonzero"));
        }
        if offset < 0.0 || !offset.is_finite() {
            return Err(KernelError::InvalidEnvelope("offset must be nonnegative"));
        }
        let l = math::abs(lambda);
        Ok(Self {
            lipschitz: l,
            growth_upper: l,
            offset_upper: offset,
            growth_lower: l,
            offset_lower: offset,
            quasi_linear: Some(QuasiLinear { lambda, offset }),
        })
    }

    /// Canonical envelope derived from Lipschitz continuity alone:
    /// `|rho(u)| <= |rho(0)| + LIP |u|` gives `growth_upper = sqrt(2) LIP`
    /// and `offset_upper = |rho(0)| / LIP`.
    pub fn from_lipschitz(lipschitz: f64, rho_at_zero: f64) -> Result<Self, KernelError> {
        if !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return Err(KernelError::InvalidEnvelope("Lipschitz constant must be positive"));
        }
        Ok(Self {
            lipschitz,
            growth_upper: core::f64::consts::SQRT_2 * lipschitz,
            offset_upper: math::abs(rho_at_zero) / lipschitz,
            growth_lower: 0.0,
            offset_lower: 0.0,
            quasi_linear: None,
        })
    }

    /// Fully explicit envelope.  Validates the orderings that the moment
    /// bounds rely on; the `sqrt(2) lipschitz <= growth_upper` normalization
    /// applies to envelopes that encode no structure beyond Lipschitz
    /// continuity, so it is enforced here but not in the quasi-linear
    /// constructor (where `rho` is known exactly and `growth = |lambda|`).
    pub fn with_bounds(
        lipschitz: f64,
        growth_upper: f64,
        offset_upper: f64,
        growth_lower: f64,
        offset_lower: f64,
    ) -> Result<Self, KernelError> {
        if !(growth_upper > 0.0) {
            return Err(KernelError::InvalidEnvelope("growth_upper must be positive"));
        }
        if growth_lower < 0.0 || growth_lower > growth_upper {
            return Err(KernelError::InvalidEnvelope("need 0 <= growth_lower <= growth_upper"));
        }
        if offset_upper < 0.0 || offset_lower < 0.0 {
            return Err(KernelError::InvalidEnvelope("offsets must be nonnegative"));
        }
        if core::f64::consts::SQRT_2 * lipschitz > growth_upper * (1.0 + 1e-12) {
            return Err(KernelError::InvalidEnvelope("growth_upper must be at least sqrt(2) * lipschitz"));
        }
        Ok(Self { lipschitz, growth_upper, offset_upper, growth_lower, offset_lower, quasi_linear: None })
    }
}

/// Burkholder–Davis–Gundy constant `z_p` and the companion constant
/// `a_{p, offset}` entering the higher-order kernel substitution.
///
/// Only `z_2 = 1` is pinned; for even `p > 2` the envelope `z_p = 2 sqrt(p)`
/// is stored.  Tighter constants would tighten every higher-order bound
/// proportionally, so reports always carry the value used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdgConstants {
    pub order: u32,
    pub z: f64,
    pub a: f64,
}

impl BdgConstants {
    pub fn for_order(order: u32, offset_nonzero: bool) -> Result<Self, KernelError> {
        if order < 2 || order % 2 != 0 {
            return Err(KernelError::OddOrder(order));
        }
        let (z, a) = if order == 2 {
            (1.0, 1.0)
        } else {
            let p = f64::from(order);
            let a = if offset_nonzero { math::powf(2.0, (p - 1.0) / p) } else { core::f64::consts::SQRT_2 };
            (2.0 * math::sqrt(p), a)
        };
        Ok(Self { order, z, a })
    }
}

/// Which parameter substitution to apply to the kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    /// Noise intensity replaced by the upper growth constant.
    Upper,
    /// Noise intensity replaced by the lower growth constant.
    Lower,
    /// Noise intensity replaced by `a_{p,offset} z_p growth_upper`
    /// (reduces to `Upper` at `p = 2`).
    HigherOrder,
}

/// Errors from kernel parameterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelError {
    InvalidEnvelope(&'static str),
    OddOrder(u32),
    ZeroLowerEnvelope,
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidEnvelope(msg) => write!(f, "invalid growth envelope: {msg}"),
            Self::OddOrder(p) => write!(f, "moment order must be an even integer >= 2, got {p}"),
            Self::ZeroLowerEnvelope => write!(f, "lower growth constant is zero; no lower kernel exists"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for KernelError {}

/// Kernel parameters after an envelope substitution.
pub fn envelope_params(
    kind: EnvelopeKind,
    env: &GrowthEnvelope,
    order: u32,
    nu: f64,
) -> Result<KernelParams, KernelError> {
    let lambda = match kind {
        EnvelopeKind::Upper => env.growth_upper,
        EnvelopeKind::Lower => {
            if env.growth_lower == 0.0 {
                return Err(KernelError::ZeroLowerEnvelope);
            }
            env.growth_lower
        }
        EnvelopeKind::HigherOrder => {
            let bdg = BdgConstants::for_order(order, env.offset_upper != 0.0)?;
            bdg.a * bdg.z * env.growth_upper
        }
    };
    KernelParams::new(nu, lambda).map_err(|_| KernelError::InvalidEnvelope("substituted parameters invalid"))
}

/// `exp(a) * Phi(b)` for `b >= 0`, overflow-aware.
fn exp_phi(a: f64, b: f64) -> f64 {
    if a < 700.0 {
        math::exp(a) * std_normal_cdf(b)
    } else {
        // Phi(b) = 1 - erfc(b/sqrt(2))/2; the erfc part is negligible in the
        // regimes where `a` is this large, but keep it for form's sake.
        math::exp(a) - 0.5 * exp_mul_erfc(a, b * core::f64::consts::FRAC_1_SQRT_2)
    }
}

/// Time factor of the moment kernel:
/// `lambda^2/sqrt(4 pi nu t) + (lambda^4/2nu) e^(lambda^4 t/4nu) Phi(lambda^2 sqrt(t/2nu))`.
///
/// The moment kernel itself is this factor times `G_{nu/2}(t, x)`.
pub fn moment_kernel_time_factor(t: f64, params: &KernelParams) -> f64 {
    assert!(t > 0.0, "moment kernel requires t > 0, got {t}");
    let KernelParams { nu, lambda } = *params;
    let l2 = lambda * lambda;
    let l4 = l2 * l2;
    let singular = l2 / math::sqrt(4.0 * core::f64::consts::PI * nu * t);
    let grown = (l4 / (2.0 * nu)) * exp_phi(l4 * t / (4.0 * nu), l2 * math::sqrt(t / (2.0 * nu)));
    singular + grown
}

/// The moment kernel `K(t, x; nu, lambda)`.
///
/// Every term carries at least `lambda^2`, so it vanishes pointwise as the
/// noise intensity goes to zero, and the Gaussian factor kills it as
/// `|x| -> infinity`.
pub fn moment_kernel(t: f64, x: f64, params: &KernelParams) -> f64 {
    heat_kernel(params.nu / 2.0, t, x) * moment_kernel_time_factor(t, params)
}

/// Space-time integral of the moment kernel:
/// `H(t) = 2 e^(lambda^4 t/4nu) Phi(lambda^2 sqrt(t/2nu)) - 1`, with
/// `H(0) = 0`.
pub fn moment_kernel_integral(t: f64, params: &KernelParams) -> f64 {
    assert!(t >= 0.0, "moment kernel integral requires t >= 0, got {t}");
    if t == 0.0 {
        return 0.0;
    }
    let KernelParams { nu, lambda } = *params;
    let l2 = lambda * lambda;
    let l4 = l2 * l2;
    2.0 * exp_phi(l4 * t / (4.0 * nu), l2 * math::sqrt(t / (2.0 * nu))) - 1.0
}

/// Moment kernel with an envelope substitution applied.
pub fn moment_kernel_variant(
    kind: EnvelopeKind,
    env: &GrowthEnvelope,
    order: u32,
    nu: f64,
    t: f64,
    x: f64,
) -> Result<f64, KernelError> {
    Ok(moment_kernel(t, x, &envelope_params(kind, env, order, nu)?))
}

/// Kernel integral with an envelope substitution applied.
pub fn moment_kernel_integral_variant(
    kind: EnvelopeKind,
    env: &GrowthEnvelope,
    order: u32,
    nu: f64,
    t: f64,
) -> Result<f64, KernelError> {
    Ok(moment_kernel_integral(t, &envelope_params(kind, env, order, nu)?))
}

/// Evaluate `H(t)` as the full space-time quadrature of the moment kernel,
/// the independent route used to validate the closed form.
///
/// The time integral is computed with the `t = w^2` substitution so the
/// `t^{-1/2}` singularity of the kernel becomes a bounded integrand; the
/// space integral is truncated at 14 standard deviations of the Gaussian
/// factor.
pub fn moment_kernel_integral_by_quadrature(t: f64, params: &KernelParams, rel_tol: f64) -> Option<f64> {
    let nu_half = params.nu / 2.0;
    let inner_opts = QuadOpts { rel_tol: rel_tol * 0.1, abs_tol: 1e-14, max_splits: 400 };
    let outer_opts = QuadOpts { rel_tol, abs_tol: 1e-14, max_splits: 800 };
    let mut inner_ok = true;
    let out = integrate(
        |w| {
            let tau = w * w;
            if tau == 0.0 {
                return 0.0;
            }
            let r = 14.0 * math::sqrt(nu_half * tau);
            let inner = integrate(|xi| moment_kernel(tau, xi, params), -r, r, &inner_opts);
            inner_ok &= inner.converged;
            2.0 * w * inner.value
        },
        0.0,
        math::sqrt(t),
        &outer_opts,
    );
    (out.converged && inner_ok).then_some(out.value)
}
