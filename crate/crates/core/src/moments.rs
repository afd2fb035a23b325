//! Moment formulas for the quasi-linear stochastic heat equation: the exact
//! second moment and two-point correlation, upper and lower bounds for all
//! even orders, and the comparison integrals of Bertini & Cancrini (1994).
//!
//! Every closed form has an independent numerical route next to it: the
//! general space-time-convolution evaluator ([`second_moment_quadrature`],
//! [`two_point_general`]) computes the same quantities by nested adaptive
//! quadrature, and the validation suites hold the two routes against each
//! other.

use alloc::vec;
use alloc::vec::Vec;

use core::fmt;

use crate::kernels::{
    envelope_params, moment_kernel, moment_kernel_integral, moment_kernel_time_factor, BdgConstants,
    EnvelopeKind, GrowthEnvelope, KernelError, QuasiLinear,
};
use crate::math;
use crate::measure::{DensityKind, InitialMeasure, MeasureError};
use crate::picard::GridFunction;
use crate::quad::{integrate, integrate_segments, split_segments, QuadOpts};
use crate::special::{erfc, exp_mul_erfc, heat_kernel, std_normal_cdf, KernelParams};

/// Errors from moment evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum MomentError {
    /// The moment (or an inner convolution) fails its finiteness bound.
    Divergent,
    /// Adaptive quadrature missed its tolerance budget.
    Quadrature,
    EvenOrderRequired(u32),
    /// The operation is only defined for the quasi-linear case.
    QuasiLinearRequired,
    Kernel(KernelError),
    Measure(MeasureError),
}

impl fmt::Display for MomentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Divergent => write!(f, "moment diverges (inner convolution failed its tail bound)"),
            Self::Quadrature => write!(f, "moment quadrature failed to converge"),
            Self::EvenOrderRequired(p) => write!(f, "moment order must be even and >= 2, got {p}"),
            Self::QuasiLinearRequired => write!(f, "operation requires a quasi-linear envelope"),
            Self::Kernel(e) => write!(f, "{e}"),
            Self::Measure(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MomentError {}

impl From<KernelError> for MomentError {
    fn from(e: KernelError) -> Self {
        Self::Kernel(e)
    }
}

impl From<MeasureError> for MomentError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::DivergentJ0 => Self::Divergent,
            other => Self::Measure(other),
        }
    }
}

/// A fully specified moment query.
#[derive(Debug, Clone)]
pub struct MomentRequest {
    pub measure: InitialMeasure,
    pub envelope: GrowthEnvelope,
    pub nu: f64,
    /// Moment order `p` (even, `>= 2`).
    pub order: u32,
    pub t: f64,
    pub x: f64,
}

impl MomentRequest {
    pub fn new(
        measure: InitialMeasure,
        envelope: GrowthEnvelope,
        nu: f64,
        order: u32,
        t: f64,
        x: f64,
    ) -> Result<Self, MomentError> {
        if order < 2 || order % 2 != 0 {
            return Err(MomentError::EvenOrderRequired(order));
        }
        if !(nu > 0.0) || !(t > 0.0) {
            return Err(MomentError::Measure(MeasureError::InvalidParameter("need nu > 0 and t > 0")));
        }
        if !measure.is_admissible_at(nu, t, x) {
            return Err(MomentError::Divergent);
        }
        Ok(Self { measure, envelope, nu, order, t, x })
    }

    fn quasi(&self) -> Result<QuasiLinear, MomentError> {
        self.envelope.quasi_linear.ok_or(MomentError::QuasiLinearRequired)
    }
}

/// Which formula family produced a bound, for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundBranch {
    /// The `p = 2` branch (upper growth constants, no BDG factor).
    SecondMoment,
    /// The `p > 2` branch (leading factor 2, BDG-substituted kernel).
    HigherEven,
}

impl fmt::Display for BoundBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SecondMoment => write!(f, "p2"),
            Self::HigherEven => write!(f, "p-gt-2"),
        }
    }
}

/// A moment bound with its provenance.
#[derive(Debug, Clone, Copy)]
pub struct MomentBound {
    /// Bound on the squared `L^p(Omega)` norm of `u(t, x)`.
    pub value: f64,
    pub branch: BoundBranch,
    /// BDG constants used by the `p > 2` branch; the stored `z_p = 2 sqrt p`
    /// is an envelope, so tighter universal constants would tighten the
    /// bound proportionally.
    pub bdg: Option<BdgConstants>,
}

impl MomentBound {
    /// The implied bound on `E|u|^p`.
    pub fn pth_power(&self, order: u32) -> f64 {
        math::powf(self.value, f64::from(order) / 2.0)
    }
}

// ---------------------------------------------------------------------------
// closed forms
// ---------------------------------------------------------------------------

/// Two-point correlation for Lebesgue initial data (quasi-linear case):
/// `1 + (1 + vv^2) (e^{(l^4 t - 2 l^2 d)/4nu} erfc((d - l^2 t)/(2 sqrt(nu t)))
///  - erfc(d / (2 sqrt(nu t))))` with `d = |x - y|`.
pub fn two_point_lebesgue(nu: f64, lambda: f64, vv: f64, t: f64, x: f64, y: f64) -> f64 {
    assert!(t > 0.0 && nu > 0.0);
    let d = math::abs(x - y);
    let l2 = lambda * lambda;
    let root = 2.0 * math::sqrt(nu * t);
    let grown = exp_mul_erfc((l2 * l2 * t - 2.0 * l2 * d) / (4.0 * nu), (d - l2 * t) / root);
    1.0 + (1.0 + vv * vv) * (grown - erfc(d / root))
}

/// Two-point correlation for unit Dirac data at the origin (quasi-linear).
pub fn two_point_delta(nu: f64, lambda: f64, vv: f64, t: f64, x: f64, y: f64) -> f64 {
    assert!(t > 0.0 && nu > 0.0);
    let d = math::abs(x - y);
    let l2 = lambda * lambda;
    let v2 = vv * vv;
    let root = 2.0 * math::sqrt(nu * t);
    let grown = exp_mul_erfc((l2 * l2 * t - 2.0 * l2 * d) / (4.0 * nu), (d - l2 * t) / root);
    heat_kernel(nu, t, x) * heat_kernel(nu, t, y) - v2 * erfc(d / root)
        + (l2 / (4.0 * nu) * heat_kernel(nu / 2.0, t, 0.5 * (x + y)) + v2) * grown
}

/// Second moment of the stochastic-integral part for Dirac data
/// (`vv = 0`): `(lambda^2 / 2nu) e^{lambda^4 t / 4nu}
/// Phi(lambda^2 sqrt(t / 2nu)) G_{nu/2}(t, x)`.
///
/// Its `t -> 0` limit is `0` off the atom and `+infinity` on it, which is
/// why no initial-data continuity can hold at the atom.
pub fn stochastic_integral_second_moment_delta(nu: f64, lambda: f64, t: f64, x: f64) -> f64 {
    assert!(t > 0.0 && nu > 0.0);
    let l2 = lambda * lambda;
    let a = l2 * l2 * t / (4.0 * nu);
    let b = l2 * math::sqrt(t / (2.0 * nu));
    let grown = if a < 700.0 {
        math::exp(a) * std_normal_cdf(b)
    } else {
        math::exp(a) - 0.5 * exp_mul_erfc(a, b * core::f64::consts::FRAC_1_SQRT_2)
    };
    l2 / (2.0 * nu) * grown * heat_kernel(nu / 2.0, t, x)
}

enum ClosedFormKind {
    Lebesgue,
    SingleAtom { location: f64, mass: f64 },
    None,
}

fn closed_form_kind(mu: &InitialMeasure) -> ClosedFormKind {
    match (mu.density(), mu.atoms()) {
        (Some(DensityKind::Lebesgue), []) => ClosedFormKind::Lebesgue,
        (None, [atom]) => ClosedFormKind::SingleAtom { location: atom.location, mass: atom.mass },
        _ => ClosedFormKind::None,
    }
}

/// Exact second moment `E|u(t,x)|^2` in the quasi-linear case:
/// `J0^2 + (J0^2 star K) + vv^2 H(t)`.
///
/// Lebesgue and single-atom data take their closed forms; everything else
/// goes through the nested-quadrature convolution.
pub fn second_moment_exact(req: &MomentRequest) -> Result<f64, MomentError> {
    let q = req.quasi()?;
    let params = KernelParams::new(req.nu, q.lambda).map_err(|_| MomentError::QuasiLinearRequired)?;
    let vv2 = q.offset * q.offset;
    match closed_form_kind(&req.measure) {
        ClosedFormKind::Lebesgue => {
            Ok(1.0 + (1.0 + vv2) * moment_kernel_integral(req.t, &params))
        }
        ClosedFormKind::SingleAtom { location, mass } => {
            let k = moment_kernel(req.t, req.x - location, &params);
            Ok(mass * mass * k / (q.lambda * q.lambda) + vv2 * moment_kernel_integral(req.t, &params))
        }
        ClosedFormKind::None => second_moment_quadrature(req),
    }
}

/// Exact second moment via the general nested-quadrature route, bypassing
/// every closed-form shortcut.  This is the independent evaluator the
/// closed forms are validated against.
pub fn second_moment_quadrature(req: &MomentRequest) -> Result<f64, MomentError> {
    let q = req.quasi()?;
    let params = KernelParams::new(req.nu, q.lambda).map_err(|_| MomentError::QuasiLinearRequired)?;
    let j0 = req.measure.homogeneous_solution(req.nu, req.t, req.x)?;
    let star = star_j0_squared(&req.measure, req.nu, &params, req.t, req.x)?;
    let vv2 = q.offset * q.offset;
    Ok(j0 * j0 + star + vv2 * moment_kernel_integral(req.t, &params))
}

/// Upper bound on the squared `L^p` norm for even `p >= 2`.
pub fn moment_upper_bound(req: &MomentRequest) -> Result<MomentBound, MomentError> {
    let p = req.order;
    if p < 2 || p % 2 != 0 {
        return Err(MomentError::EvenOrderRequired(p));
    }
    let (kind, branch, lead) = if p == 2 {
        (EnvelopeKind::Upper, BoundBranch::SecondMoment, 1.0)
    } else {
        (EnvelopeKind::HigherOrder, BoundBranch::HigherEven, 2.0)
    };
    let params = envelope_params(kind, &req.envelope, p, req.nu)?;
    let vvb = req.envelope.offset_upper;
    let bdg = (p > 2).then(|| BdgConstants::for_order(p, vvb != 0.0)).transpose()?;
    let h = moment_kernel_integral(req.t, &params);
    let value = match closed_form_kind(&req.measure) {
        ClosedFormKind::Lebesgue => lead + lead * h + vvb * vvb * h,
        ClosedFormKind::SingleAtom { location, mass } => {
            let k = moment_kernel(req.t, req.x - location, &params);
            lead * mass * mass * k / (params.lambda * params.lambda) + vvb * vvb * h
        }
        ClosedFormKind::None => {
            let j0 = req.measure.homogeneous_solution(req.nu, req.t, req.x)?;
            let star = star_j0_squared(&req.measure, req.nu, &params, req.t, req.x)?;
            lead * (j0 * j0 + star) + vvb * vvb * h
        }
    };
    Ok(MomentBound { value, branch, bdg })
}

/// Lower bound on the second moment from the lower growth envelope;
/// degenerates to `J0^2` (always valid: the noise term has mean zero) when
/// no lower constant is declared.
pub fn second_moment_lower(req: &MomentRequest) -> Result<f64, MomentError> {
    if req.envelope.growth_lower == 0.0 {
        let j0 = req.measure.homogeneous_solution(req.nu, req.t, req.x)?;
        return Ok(j0 * j0);
    }
    let params = envelope_params(EnvelopeKind::Lower, &req.envelope, 2, req.nu)?;
    let vvl = req.envelope.offset_lower;
    let h = moment_kernel_integral(req.t, &params);
    let value = match closed_form_kind(&req.measure) {
        ClosedFormKind::Lebesgue => 1.0 + h + vvl * vvl * h,
        ClosedFormKind::SingleAtom { location, mass } => {
            let k = moment_kernel(req.t, req.x - location, &params);
            mass * mass * k / (params.lambda * params.lambda) + vvl * vvl * h
        }
        ClosedFormKind::None => {
            let j0 = req.measure.homogeneous_solution(req.nu, req.t, req.x)?;
            let star = star_j0_squared(&req.measure, req.nu, &params, req.t, req.x)?;
            j0 * j0 + star + vvl * vvl * h
        }
    };
    Ok(value)
}

/// Natural log of the fully expanded higher-moment bound for Lebesgue data,
/// `ln(2^{p-1} + 2^{p/2-1} (2 + vv^2)^{p/2} e^{a^4 z^4 p L^4 t / 8nu}
/// Phi(a^2 z^2 L^2 sqrt(t/2nu))^{p/2})`, computed in log space so it stays
/// finite long after the bound itself overflows.
pub fn lebesgue_higher_moment_log_bound(
    p: u32,
    env: &GrowthEnvelope,
    nu: f64,
    t: f64,
) -> Result<f64, MomentError> {
    if p <= 2 || p % 2 != 0 {
        return Err(MomentError::EvenOrderRequired(p));
    }
    let bdg = BdgConstants::for_order(p, env.offset_upper != 0.0)?;
    let pf = f64::from(p);
    let lam_hat = bdg.a * bdg.z * env.growth_upper;
    let l2 = lam_hat * lam_hat;
    let ln2 = core::f64::consts::LN_2;
    let term1 = (pf - 1.0) * ln2;
    let phi = std_normal_cdf(l2 * math::sqrt(t / (2.0 * nu)));
    let term2 = (pf / 2.0 - 1.0) * ln2
        + pf / 2.0 * math::ln(2.0 + env.offset_upper * env.offset_upper)
        + pf * l2 * l2 * t / (8.0 * nu)
        + pf / 2.0 * math::ln(phi);
    // log-sum-exp
    let (hi, lo) = if term1 >= term2 { (term1, term2) } else { (term2, term1) };
    Ok(hi + math::ln_1p(math::exp(lo - hi)))
}

// ---------------------------------------------------------------------------
// the space-time convolution (J0^2 star K)
// ---------------------------------------------------------------------------

/// Narrow features of `J0^2(s, .)` the inner quadrature must be pointed at:
/// `(center, base halfwidth)`; the halfwidth grows with `sqrt(nu s)` as the
/// heat flow spreads them.
fn measure_features(mu: &InitialMeasure) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = mu.atoms().iter().map(|a| (a.location, 0.0)).collect();
    match mu.density() {
        Some(DensityKind::GaussianBump { center, width }) => out.push((*center, 14.0 * width)),
        Some(DensityKind::Indicator { lo, hi }) => out.push((0.5 * (lo + hi), 0.5 * (hi - lo))),
        _ => {}
    }
    out
}

/// `(J0^2 star K)(t, x)`: outer time integral split at `t/2` with square-root
/// substitutions at both endpoints (the kernel factor is `tau^{-1/2}` at
/// `tau = 0`; for atomic data `J0^2(s, .)` contributes `s^{-1/2}` mass at
/// `s = 0`), inner space integral over the Gaussian window plus feature
/// segments.
fn star_j0_squared(
    mu: &InitialMeasure,
    nu: f64,
    params: &KernelParams,
    t: f64,
    x: f64,
) -> Result<f64, MomentError> {
    let features = measure_features(mu);
    let inner_opts = QuadOpts { rel_tol: 1e-8, abs_tol: 1e-30, max_splits: 600 };
    let outer_opts = QuadOpts { rel_tol: 1e-6, abs_tol: 1e-30, max_splits: 600 };

    let mut failure: Option<MomentError> = None;
    let mut inner = |tau: f64| -> f64 {
        if tau <= 0.0 || tau >= t {
            return 0.0;
        }
        let s = t - tau;
        let r = 13.0 * math::sqrt(nu / 2.0 * tau);
        let mut segs = vec![(-r, r)];
        for &(loc, base) in &features {
            let c = x - loc;
            let pad = base + 13.0 * math::sqrt(nu * s);
            segs.push((c - pad, c));
            segs.push((c, c + pad));
        }
        let segs = split_segments(&segs);
        let out = integrate_segments(
            |xi| {
                let j0 = match mu.homogeneous_solution(nu, s, x - xi) {
                    Ok(v) => v,
                    Err(e) => {
                        failure = Some(e.into());
                        return f64::NAN;
                    }
                };
                heat_kernel(nu / 2.0, tau, xi) * j0 * j0
            },
            &segs,
            &inner_opts,
        );
        if !out.converged && failure.is_none() {
            failure = Some(MomentError::Quadrature);
        }
        out.value
    };

    let half_root = math::sqrt(t / 2.0);
    let lower = integrate(
        |w| {
            let tau = w * w;
            if tau == 0.0 {
                return 0.0;
            }
            2.0 * w * moment_kernel_time_factor(tau, params) * inner(tau)
        },
        0.0,
        half_root,
        &outer_opts,
    );
    let upper = integrate(
        |sig| {
            let tau = t - sig * sig;
            if tau <= 0.0 || tau >= t {
                return 0.0;
            }
            2.0 * sig * moment_kernel_time_factor(tau, params) * inner(tau)
        },
        0.0,
        half_root,
        &outer_opts,
    );

    if let Some(e) = failure {
        return Err(e);
    }
    if !lower.value.is_finite() || !upper.value.is_finite() {
        return Err(MomentError::Divergent);
    }
    if !lower.converged || !upper.converged {
        return Err(MomentError::Quadrature);
    }
    Ok(lower.value + upper.value)
}

// ---------------------------------------------------------------------------
// general two-point correlation
// ---------------------------------------------------------------------------

/// Resolution of the cached second-moment field used inside the two-point
/// quadrature.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationCacheConfig {
    pub t_cells: usize,
    pub x_cells: usize,
}

impl Default for CorrelationCacheConfig {
    fn default() -> Self {
        Self { t_cells: 200, x_cells: 400 }
    }
}

#[derive(Clone, Copy)]
enum SecondMomentProfile {
    /// Exact second moment (quasi-linear).
    Exact,
    /// Right-hand side of the `p = 2` upper bound.
    UpperP2,
    /// Right-hand side of the lower bound.
    Lower,
}

fn profile_value(
    profile: SecondMomentProfile,
    mu: &InitialMeasure,
    env: &GrowthEnvelope,
    nu: f64,
    s: f64,
    z: f64,
) -> Result<f64, MomentError> {
    let req = MomentRequest {
        measure: mu.clone(),
        envelope: *env,
        nu,
        order: 2,
        t: s,
        x: z,
    };
    match profile {
        SecondMomentProfile::Exact => second_moment_exact(&req),
        SecondMomentProfile::UpperP2 => Ok(moment_upper_bound(&req)?.value),
        SecondMomentProfile::Lower => second_moment_lower(&req),
    }
}

/// How the second-moment field is supplied to the two-point quadrature:
/// closed forms directly where they exist (a bilinear cache cannot resolve
/// the small-time spike of atomic data), a cached grid otherwise.
enum ProfileField {
    LebesgueClosed { params: Option<KernelParams>, offset_sq: f64 },
    AtomClosed { nu: f64, location: f64, mass_sq: f64, params: Option<KernelParams>, offset_sq: f64 },
    Cached(GridFunction),
}

impl ProfileField {
    fn eval(&self, s: f64, z: f64) -> f64 {
        match self {
            Self::LebesgueClosed { params, offset_sq } => match params {
                Some(p) => {
                    let h = moment_kernel_integral(s, p);
                    1.0 + h + offset_sq * h
                }
                None => 1.0,
            },
            Self::AtomClosed { nu, location, mass_sq, params, offset_sq } => match params {
                Some(p) => {
                    mass_sq * moment_kernel(s, z - location, p) / (p.lambda * p.lambda)
                        + offset_sq * moment_kernel_integral(s, p)
                }
                None => {
                    let g = heat_kernel(*nu, s, z - location);
                    mass_sq * g * g
                }
            },
            Self::Cached(grid) => grid.eval(s, z),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn field_source(
    profile: SecondMomentProfile,
    mu: &InitialMeasure,
    env: &GrowthEnvelope,
    nu: f64,
    t: f64,
    z_lo: f64,
    z_hi: f64,
    cfg: &CorrelationCacheConfig,
) -> Result<ProfileField, MomentError> {
    // Kernel parameters and offset implied by the profile; `None` marks the
    // degenerate lower bound J0^2.
    let (params, offset) = match profile {
        SecondMomentProfile::Exact => {
            let q = env.quasi_linear.ok_or(MomentError::QuasiLinearRequired)?;
            (
                Some(KernelParams::new(nu, q.lambda).map_err(|_| MomentError::QuasiLinearRequired)?),
                q.offset,
            )
        }
        SecondMomentProfile::UpperP2 => {
            (Some(envelope_params(EnvelopeKind::Upper, env, 2, nu)?), env.offset_upper)
        }
        SecondMomentProfile::Lower => {
            if env.growth_lower == 0.0 {
                (None, 0.0)
            } else {
                (Some(envelope_params(EnvelopeKind::Lower, env, 2, nu)?), env.offset_lower)
            }
        }
    };
    let offset_sq = offset * offset;
    match closed_form_kind(mu) {
        ClosedFormKind::Lebesgue => Ok(ProfileField::LebesgueClosed { params, offset_sq }),
        ClosedFormKind::SingleAtom { location, mass } => Ok(ProfileField::AtomClosed {
            nu,
            location,
            mass_sq: mass * mass,
            params,
            offset_sq,
        }),
        ClosedFormKind::None => Ok(ProfileField::Cached(build_cache(
            profile, mu, env, nu, t, z_lo, z_hi, cfg,
        )?)),
    }
}

#[allow(clippy::too_many_arguments)]
fn build_cache(
    profile: SecondMomentProfile,
    mu: &InitialMeasure,
    env: &GrowthEnvelope,
    nu: f64,
    t: f64,
    z_lo: f64,
    z_hi: f64,
    cfg: &CorrelationCacheConfig,
) -> Result<GridFunction, MomentError> {
    let nt = cfg.t_cells;
    let nx = cfg.x_cells + 1;
    let t_nodes: Vec<f64> =
        (1..=nt).map(|k| t * (k as f64 / nt as f64) * (k as f64 / nt as f64)).collect();
    let dx = (z_hi - z_lo) / cfg.x_cells as f64;
    let x_nodes: Vec<f64> = (0..nx).map(|j| z_lo + j as f64 * dx).collect();
    let mut values = vec![0.0f64; nt * nx];
    // Lebesgue data is spatially constant: fill rows from one evaluation.
    let constant_in_space = matches!(closed_form_kind(mu), ClosedFormKind::Lebesgue);
    for (ki, &s) in t_nodes.iter().enumerate() {
        if constant_in_space {
            let v = profile_value(profile, mu, env, nu, s, x_nodes[0])?;
            values[ki * nx..(ki + 1) * nx].fill(v);
        } else {
            for (ji, &z) in x_nodes.iter().enumerate() {
                values[ki * nx + ji] = profile_value(profile, mu, env, nu, s, z)?;
            }
        }
    }
    Ok(GridFunction { t_nodes, x_nodes, values })
}

/// The interaction integral
/// `int_0^t ds int f(s, z) G_nu(t-s, x-z) G_nu(t-s, y-z) dz`
/// with `f` bilinearly interpolated from a cached grid.  The Gaussian pair
/// collapses to `G_{2nu}(t-s, x-y) G_{nu/2}(t-s, z - (x+y)/2)`.
fn interaction_integral(
    field: &ProfileField,
    mu: &InitialMeasure,
    nu: f64,
    t: f64,
    x: f64,
    y: f64,
) -> Result<f64, MomentError> {
    let mid = 0.5 * (x + y);
    let delta = x - y;
    let features = measure_features(mu);
    let inner_opts = QuadOpts { rel_tol: 1e-7, abs_tol: 1e-30, max_splits: 400 };
    let outer_opts = QuadOpts { rel_tol: 1e-6, abs_tol: 1e-30, max_splits: 500 };

    let inner = |s: f64| -> f64 {
        let tau = t - s;
        if tau <= 0.0 || s <= 0.0 {
            return 0.0;
        }
        let r = 13.0 * math::sqrt(nu / 2.0 * tau);
        let mut segs = vec![(mid - r, mid + r)];
        for &(loc, base) in &features {
            let pad = base + 13.0 * math::sqrt(nu * s);
            segs.push((loc - pad, loc));
            segs.push((loc, loc + pad));
        }
        let segs = split_segments(&segs);
        let out = integrate_segments(
            |z| heat_kernel(nu / 2.0, tau, z - mid) * field.eval(s, z),
            &segs,
            &inner_opts,
        );
        heat_kernel(2.0 * nu, tau, delta) * out.value
    };

    let half_root = math::sqrt(t / 2.0);
    let lower = integrate(|w| 2.0 * w * inner(w * w), 0.0, half_root, &outer_opts);
    let upper = integrate(|sig| 2.0 * sig * inner(t - sig * sig), 0.0, half_root, &outer_opts);
    if !lower.value.is_finite() || !upper.value.is_finite() {
        return Err(MomentError::Divergent);
    }
    Ok(lower.value + upper.value)
}

fn offset_terms(nu: f64, growth: f64, offset: f64, t: f64, x: f64, y: f64) -> f64 {
    if offset == 0.0 {
        return 0.0;
    }
    let c2 = growth * growth * offset * offset;
    let d = math::abs(x - y);
    c2 / nu * d * (std_normal_cdf(d / math::sqrt(2.0 * nu * t)) - 1.0)
        + 2.0 * c2 * t * heat_kernel(2.0 * nu, t, x - y)
}

fn cache_window(nu: f64, t: f64, x: f64, y: f64, mu: &InitialMeasure) -> (f64, f64) {
    let mid = 0.5 * (x + y);
    let mut extent = math::abs(x - y) / 2.0 + 14.0 * math::sqrt(nu * t);
    for (loc, base) in measure_features(mu) {
        extent = extent.max(math::abs(loc - mid) + base + 14.0 * math::sqrt(nu * t));
    }
    (mid - extent, mid + extent)
}

/// Exact two-point correlation `E[u(t,x) u(t,y)]` for the quasi-linear case
/// by the general route: homogeneous product, interaction integral over the
/// cached second moment, and the offset terms.
pub fn two_point_general(
    req: &MomentRequest,
    y: f64,
    cfg: &CorrelationCacheConfig,
) -> Result<f64, MomentError> {
    let q = req.quasi()?;
    let (nu, t, x) = (req.nu, req.t, req.x);
    let j0x = req.measure.homogeneous_solution(nu, t, x)?;
    let j0y = req.measure.homogeneous_solution(nu, t, y)?;
    let (z_lo, z_hi) = cache_window(nu, t, x, y, &req.measure);
    let field =
        field_source(SecondMomentProfile::Exact, &req.measure, &req.envelope, nu, t, z_lo, z_hi, cfg)?;
    let inter = interaction_integral(&field, &req.measure, nu, t, x, y)?;
    Ok(j0x * j0y + q.lambda * q.lambda * inter + offset_terms(nu, q.lambda, q.offset, t, x, y))
}

/// Two-point correlation bounds `(lower, upper)` from the growth envelope.
pub fn two_point_bounds(
    req: &MomentRequest,
    y: f64,
    cfg: &CorrelationCacheConfig,
) -> Result<(f64, f64), MomentError> {
    let (nu, t, x) = (req.nu, req.t, req.x);
    let j0x = req.measure.homogeneous_solution(nu, t, x)?;
    let j0y = req.measure.homogeneous_solution(nu, t, y)?;
    let base = j0x * j0y;
    let (z_lo, z_hi) = cache_window(nu, t, x, y, &req.measure);

    let up_field =
        field_source(SecondMomentProfile::UpperP2, &req.measure, &req.envelope, nu, t, z_lo, z_hi, cfg)?;
    let up_inter = interaction_integral(&up_field, &req.measure, nu, t, x, y)?;
    let gu = req.envelope.growth_upper;
    let upper = base + gu * gu * up_inter + offset_terms(nu, gu, req.envelope.offset_upper, t, x, y);

    let lower = if req.envelope.growth_lower == 0.0 {
        base
    } else {
        let lo_field =
            field_source(SecondMomentProfile::Lower, &req.measure, &req.envelope, nu, t, z_lo, z_hi, cfg)?;
        let lo_inter = interaction_integral(&lo_field, &req.measure, nu, t, x, y)?;
        let gl = req.envelope.growth_lower;
        base + gl * gl * lo_inter + offset_terms(nu, gl, req.envelope.offset_lower, t, x, y)
    };
    Ok((lower, upper))
}

// ---------------------------------------------------------------------------
// Bertini-Cancrini comparison integrals
// ---------------------------------------------------------------------------

/// Bertini & Cancrini's integral form of the Lebesgue-data two-point
/// function, evaluated after the hitting-time substitution
/// `w = |x-y| / sqrt(4 nu s)` which turns the `s^{-3/2}` kernel into
/// `e^{-w^2}`:
/// `(4/sqrt(pi)) int_{w0}^inf e^{-w^2} e^{(t - s(w))/4nu}
///  Phi(sqrt((t - s(w))/2nu)) dw`, `w0 = |x-y|/sqrt(4 nu t)`.
///
/// At `x = y` the integrand is the `|x-y| -> 0` limit of the printed form.
pub fn bc_two_point_lebesgue_integral(nu: f64, t: f64, x: f64, y: f64) -> Result<f64, MomentError> {
    assert!(t > 0.0 && nu > 0.0);
    let d = math::abs(x - y);
    let w0 = d / math::sqrt(4.0 * nu * t);
    let opts = QuadOpts { rel_tol: 1e-9, abs_tol: 1e-30, max_splits: 800 };
    let out = integrate(
        |w| {
            let s = if w > 0.0 { d * d / (4.0 * nu * w * w) } else { 0.0 };
            let rem = (t - s).max(0.0);
            math::exp(-w * w)
                * math::exp(rem / (4.0 * nu))
                * std_normal_cdf(math::sqrt(rem / (2.0 * nu)))
        },
        w0,
        w0 + 12.0,
        &opts,
    );
    if !out.converged {
        return Err(MomentError::Quadrature);
    }
    Ok(4.0 / math::sqrt(core::f64::consts::PI) * out.value)
}

/// Bertini & Cancrini's integral form of the Dirac-data two-point function,
/// split at `s = 1/2` with the hitting-time substitution toward `s = 0` and
/// `s = 1 - q^2` toward `s = 1` (both endpoint singularities are square
/// roots).
pub fn bc_two_point_delta_integral(nu: f64, t: f64, x: f64, y: f64) -> Result<f64, MomentError> {
    assert!(t > 0.0 && nu > 0.0);
    let d = math::abs(x - y);
    let beta = d / math::sqrt(4.0 * nu * t);
    let bracket = |s: f64| -> f64 {
        let rem = (1.0 - s).max(0.0);
        1.0 + math::sqrt(core::f64::consts::PI * t * rem / nu)
            * math::exp(t * rem / (4.0 * nu))
            * std_normal_cdf(math::sqrt(t * rem / (2.0 * nu)))
    };
    let opts = QuadOpts { rel_tol: 1e-9, abs_tol: 1e-30, max_splits: 800 };

    // s in (0, 1/2]: (2/sqrt(pi)) int_beta^inf e^{-w^2} Br(s(w)) dw.
    let part1 = integrate(
        |w| {
            let s = if w > 0.0 { beta * beta / (beta * beta + w * w) } else { 0.0 };
            math::exp(-w * w) * bracket(s)
        },
        beta,
        beta + 12.0,
        &opts,
    );
    // s in [1/2, 1]: substitution s = 1 - q^2 removes the (1-s)^{-1/2}.
    let part2 = integrate(
        |q| {
            let s = 1.0 - q * q;
            let expo = -beta * beta * (1.0 - s) / s;
            if expo < crate::special::MIN_NORMAL_EXPONENT {
                return 0.0;
            }
            d / math::sqrt(4.0 * core::f64::consts::PI * nu * t)
                * 2.0
                * math::powf(s, -1.5)
                * math::exp(expo)
                * bracket(s)
        },
        0.0,
        core::f64::consts::FRAC_1_SQRT_2,
        &opts,
    );
    if !part1.converged || !part2.converged {
        return Err(MomentError::Quadrature);
    }
    let prefactor_exp = -(x * x + y * y) / (2.0 * nu * t);
    if prefactor_exp < crate::special::MIN_NORMAL_EXPONENT {
        return Ok(0.0);
    }
    let prefactor = math::exp(prefactor_exp) / (2.0 * core::f64::consts::PI * nu * t);
    Ok(prefactor * (2.0 / math::sqrt(core::f64::consts::PI) * part1.value + part2.value))
}

/// Bertini & Cancrini's `n`-th moment for Lebesgue data:
/// `2 exp(n(n^2-1) t / (4! nu)) Phi(sqrt(n(n^2-1) t / (12 nu)))`.
pub fn bc_moment_lebesgue(n: u32, nu: f64, t: f64) -> f64 {
    assert!(n >= 1 && t > 0.0 && nu > 0.0);
    let nf = f64::from(n);
    let rate = nf * (nf * nf - 1.0);
    2.0 * math::exp(rate * t / (24.0 * nu)) * std_normal_cdf(math::sqrt(rate * t / (12.0 * nu)))
}
