//! Lattice Monte Carlo for the mild form `u = J0 + I` of the stochastic
//! heat equation.
//!
//! The default scheme decomposes the field as `u^n = J0(t_n, .) + v^n`: the
//! homogeneous part is carried analytically (so rough data like a Dirac mass
//! never gets rasterized, and `E[u] = J0` holds exactly by construction),
//! while the fluctuation field is propagated with a variance-exact lattice
//! heat step and driven by counter-based white noise with
//! `Var(dW^n_j) = dt / dx`.
//!
//! Replicates are pure functions of `(seed, replicate)`: they can be run in
//! any order, on any number of threads, with bit-identical results.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use core::borrow::Borrow;
use core::fmt;

use crate::kernels::{GrowthEnvelope, QuasiLinear};
use crate::math;
use crate::measure::{InitialMeasure, MeasureError};
use crate::rng::normal_at;
use crate::stats::{mean_and_stderr, ols_fit};

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Mild scheme: exact homogeneous layer plus lattice-propagated
    /// fluctuations (default).
    ExponentialMild,
    /// Classic explicit finite differences on the rasterized initial data
    /// (atoms become spikes of height `mass / dx`).
    ExplicitFd,
}

/// Boundary handling for the fluctuation field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    DirichletZero,
    Periodic,
}

/// Simulation parameters.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    /// Domain is `[-half_width, half_width]`.
    pub half_width: f64,
    pub dx: f64,
    pub dt: f64,
    /// Final time.
    pub horizon: f64,
    pub replicates: u32,
    pub seed: u64,
    pub scheme: Scheme,
    pub boundary: Boundary,
}

impl SimConfig {
    pub fn new(half_width: f64, dx: f64, dt: f64, horizon: f64, replicates: u32, seed: u64) -> Self {
        Self {
            half_width,
            dx,
            dt,
            horizon,
            replicates,
            seed,
            scheme: Scheme::ExponentialMild,
            boundary: Boundary::DirichletZero,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }
}

/// Nonlinearity for the simulator: the evaluable function plus its growth
/// envelope.
#[derive(Clone)]
pub struct RhoSpec {
    kind: RhoKind,
    envelope: GrowthEnvelope,
}

#[derive(Clone)]
enum RhoKind {
    Linear { lambda: f64 },
    QuasiLinear { lambda: f64, offset: f64 },
    Custom { f: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl fmt::Debug for RhoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RhoKind::Linear { lambda } => write!(f, "RhoSpec::pam({lambda})"),
            RhoKind::QuasiLinear { lambda, offset } => write!(f, "RhoSpec::quasi_linear({lambda}, {offset})"),
            RhoKind::Custom { .. } => write!(f, "RhoSpec::custom(..)"),
        }
    }
}

impl RhoSpec {
    /// Parabolic Anderson model `rho(u) = lambda u`; `lambda = 0` is the
    /// noiseless heat equation.
    pub fn pam(lambda: f64) -> Self {
        let l = math::abs(lambda);
        Self {
            kind: RhoKind::Linear { lambda },
            envelope: GrowthEnvelope {
                lipschitz: l,
                growth_upper: l,
                offset_upper: 0.0,
                growth_lower: l,
                offset_lower: 0.0,
                quasi_linear: Some(QuasiLinear { lambda, offset: 0.0 }),
            },
        }
    }

    /// `rho(u) = lambda sqrt(offset^2 + u^2)`.
    pub fn quasi_linear(lambda: f64, offset: f64) -> Self {
        let l = math::abs(lambda);
        Self {
            kind: RhoKind::QuasiLinear { lambda, offset },
            envelope: GrowthEnvelope {
                lipschitz: l,
                growth_upper: l,
                offset_upper: offset,
                growth_lower: l,
                offset_lower: offset,
                quasi_linear: Some(QuasiLinear { lambda, offset }),
            },
        }
    }

    /// Arbitrary Lipschitz nonlinearity with a declared envelope.
    pub fn custom(f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, envelope: GrowthEnvelope) -> Self {
        Self { kind: RhoKind::Custom { f }, envelope }
    }

    #[inline]
    pub fn apply(&self, u: f64) -> f64 {
        match &self.kind {
            RhoKind::Linear { lambda } => lambda * u,
            RhoKind::QuasiLinear { lambda, offset } => lambda * math::sqrt(offset * offset + u * u),
            RhoKind::Custom { f } => f(u),
        }
    }

    pub fn envelope(&self) -> &GrowthEnvelope {
        &self.envelope
    }
}

/// Simulation failures.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Config(&'static str),
    /// `nu dt / dx^2` exceeds the explicit-scheme stability bound.
    Stability { ratio: f64 },
    NumericalBlowup { replicate: u32, step: usize },
    InsufficientReplicates { have: u32 },
    /// Fewer than four usable dyadic lags.
    WindowTooNarrow { lags: usize },
    /// Query point too close to the domain boundary for the truncation to
    /// be certified.
    QueryOutsideDomain,
    Measure(MeasureError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "invalid simulation config: {m}"),
            Self::Stability { ratio } => write!(f, "explicit scheme unstable: nu dt/dx^2 = {ratio} > 1/2"),
            Self::NumericalBlowup { replicate, step } => {
                write!(f, "numerical blowup in replicate {replicate} at step {step}")
            }
            Self::InsufficientReplicates { have } => write!(f, "need at least 2 replicates, have {have}"),
            Self::WindowTooNarrow { lags } => write!(f, "need at least 4 dyadic lags, window fits {lags}"),
            Self::QueryOutsideDomain => write!(f, "query too close to the domain boundary"),
            Self::Measure(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SimError {}

impl From<MeasureError> for SimError {
    fn from(e: MeasureError) -> Self {
        Self::Measure(e)
    }
}

/// One replicate's solution samples on the space-time lattice.
///
/// Layers are `n = 1..=nt` at times `n dt`; time zero is not stored (the
/// initial datum may be a measure, not a function).
#[derive(Debug, Clone)]
pub struct LatticeField {
    pub replicate: u32,
    pub nu: f64,
    pub dx: f64,
    pub dt: f64,
    /// Position of site 0.
    pub x0: f64,
    pub nx: usize,
    pub nt: usize,
    /// Row-major `[(n - 1) * nx + j]`.
    pub values: Vec<f64>,
}

/// A lattice query point after nearest-node snapping.
#[derive(Debug, Clone, Copy)]
pub struct LatticePoint {
    pub layer: usize,
    pub site: usize,
    pub t: f64,
    pub x: f64,
    /// Snap offsets `query - node`.
    pub t_offset: f64,
    pub x_offset: f64,
}

impl LatticeField {
    pub fn layer(&self, n: usize) -> &[f64] {
        debug_assert!(n >= 1 && n <= self.nt);
        &self.values[(n - 1) * self.nx..n * self.nx]
    }

    pub fn site_x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    /// Snap `(t, x)` to the nearest lattice node.
    pub fn snap(&self, t: f64, x: f64) -> Result<LatticePoint, SimError> {
        let n = (math::round(t / self.dt) as i64).clamp(1, self.nt as i64) as usize;
        let j = math::round((x - self.x0) / self.dx) as i64;
        if j < 0 || j >= self.nx as i64 {
            return Err(SimError::QueryOutsideDomain);
        }
        let j = j as usize;
        let tn = n as f64 * self.dt;
        let xj = self.site_x(j);
        Ok(LatticePoint { layer: n, site: j, t: tn, x: xj, t_offset: t - tn, x_offset: x - xj })
    }

    pub fn value(&self, p: &LatticePoint) -> f64 {
        self.values[(p.layer - 1) * self.nx + p.site]
    }
}

/// Precomputed state shared by all replicates of one simulation.
pub struct SimWorkspace {
    config: SimConfig,
    nu: f64,
    rho: RhoSpec,
    nx: usize,
    nt: usize,
    x0: f64,
    /// `J0(n dt, x_j)` for the mild scheme, layers `1..=nt`; empty for
    /// explicit finite differences.
    j0_layers: Vec<f64>,
    /// Rasterized initial data for explicit finite differences.
    u0: Vec<f64>,
    /// Mild-scheme propagator: three-tap stencil weight, or a sampled row.
    propagator: Propagator,
    noise_scale: f64,
}

enum Propagator {
    Stencil { a: f64 },
    Row(Vec<f64>),
}

impl SimWorkspace {
    pub fn new(mu: &InitialMeasure, rho: RhoSpec, nu: f64, config: SimConfig) -> Result<Self, SimError> {
        if !(nu > 0.0) {
            return Err(SimError::Config("nu must be positive"));
        }
        if !(config.dx > 0.0 && config.dt > 0.0 && config.half_width > 0.0) {
            return Err(SimError::Config("dx, dt and half_width must be positive"));
        }
        if config.horizon < config.dt {
            return Err(SimError::Config("horizon shorter than one step"));
        }
        if config.replicates < 2 {
            return Err(SimError::InsufficientReplicates { have: config.replicates });
        }
        let ratio = nu * config.dt / (config.dx * config.dx);
        if config.scheme == Scheme::ExplicitFd && ratio > 0.5 {
            return Err(SimError::Stability { ratio });
        }

        let half_sites = math::round(config.half_width / config.dx) as usize;
        let nx = 2 * half_sites + 1;
        let x0 = -(half_sites as f64) * config.dx;
        let nt = math::round(config.horizon / config.dt).max(1.0) as usize;

        let mut j0_layers = Vec::new();
        let mut u0 = Vec::new();
        match config.scheme {
            Scheme::ExponentialMild => {
                j0_layers = vec![0.0; nt * nx];
                for n in 1..=nt {
                    let t = n as f64 * config.dt;
                    for j in 0..nx {
                        let x = x0 + j as f64 * config.dx;
                        j0_layers[(n - 1) * nx + j] = mu.homogeneous_solution(nu, t, x)?;
                    }
                }
            }
            Scheme::ExplicitFd => {
                u0 = vec![0.0; nx];
                for (j, v) in u0.iter_mut().enumerate() {
                    *v = mu.density_at(x0 + j as f64 * config.dx);
                }
                for atom in mu.atoms() {
                    let j = math::round((atom.location - x0) / config.dx) as i64;
                    if (0..nx as i64).contains(&j) {
                        u0[j as usize] += atom.mass / config.dx;
                    }
                }
            }
        }

        // Lattice heat step for the fluctuation field.  The three-tap
        // stencil {a, 1-2a, a} has second moment exactly nu dt when
        // a = nu dt / (2 dx^2); beyond its stability range a sampled,
        // mass-normalized kernel row (truncated at 8 sqrt(nu dt)) is used.
        let a = nu * config.dt / (2.0 * config.dx * config.dx);
        let propagator = if a <= 0.5 {
            Propagator::Stencil { a }
        } else {
            let sigma = math::sqrt(nu * config.dt);
            let w = ((8.0 * sigma / config.dx) as usize).max(1).min(nx - 1);
            let mut row = Vec::with_capacity(w + 1);
            for i in 0..=w {
                let z = i as f64 * config.dx;
                row.push(math::exp(-z * z / (2.0 * nu * config.dt)));
            }
            let total: f64 = row[0] + 2.0 * row[1..].iter().sum::<f64>();
            for r in row.iter_mut() {
                *r /= total;
            }
            Propagator::Row(row)
        };

        let noise_scale = math::sqrt(config.dt / config.dx);
        Ok(Self { config, nu, rho, nx, nt, x0, j0_layers, u0, propagator, noise_scale })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lattice_shape(&self) -> (usize, usize) {
        (self.nt, self.nx)
    }

    /// Position of lattice site `j` (the domain is snapped to whole steps).
    pub fn site_x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.config.dx
    }

    /// Run one replicate; bit-identical for identical `(seed, replicate)`.
    pub fn replicate(&self, replicate: u32) -> Result<LatticeField, SimError> {
        match self.config.scheme {
            Scheme::ExponentialMild => self.replicate_mild(replicate),
            Scheme::ExplicitFd => self.replicate_fd(replicate),
        }
    }

    fn replicate_mild(&self, replicate: u32) -> Result<LatticeField, SimError> {
        let (nx, nt) = (self.nx, self.nt);
        let seed = self.config.seed;
        let mut values = vec![0.0f64; nt * nx];
        let mut v = vec![0.0f64; nx];
        let mut v_next = vec![0.0f64; nx];

        // First layer is the exact heat step; noise starts afterwards.
        values[..nx].copy_from_slice(&self.j0_layers[..nx]);

        for n in 1..nt {
            self.apply_propagator(&v, &mut v_next);
            let u_layer = &values[(n - 1) * nx..n * nx];
            for j in 0..nx {
                let xi = normal_at(seed, replicate, n as u32, j as u32);
                v_next[j] += self.rho.apply(u_layer[j]) * xi * self.noise_scale;
            }
            core::mem::swap(&mut v, &mut v_next);
            let j0 = &self.j0_layers[n * nx..(n + 1) * nx];
            let out = &mut values[n * nx..(n + 1) * nx];
            let mut max_abs = 0.0f64;
            for j in 0..nx {
                out[j] = j0[j] + v[j];
                max_abs = max_abs.max(math::abs(out[j]));
            }
            if max_abs > 1e12 {
                return Err(SimError::NumericalBlowup { replicate, step: n + 1 });
            }
        }

        Ok(LatticeField {
            replicate,
            nu: self.nu,
            dx: self.config.dx,
            dt: self.config.dt,
            x0: self.x0,
            nx,
            nt,
            values,
        })
    }

    fn replicate_fd(&self, replicate: u32) -> Result<LatticeField, SimError> {
        let (nx, nt) = (self.nx, self.nt);
        let seed = self.config.seed;
        let a = self.nu * self.config.dt / (2.0 * self.config.dx * self.config.dx);
        let mut values = vec![0.0f64; nt * nx];
        let mut u = self.u0.clone();
        let mut u_next = vec![0.0f64; nx];
        for n in 0..nt {
            for j in 0..nx {
                let (left, right) = match self.config.boundary {
                    Boundary::DirichletZero => {
                        (if j > 0 { u[j - 1] } else { 0.0 }, if j + 1 < nx { u[j + 1] } else { 0.0 })
                    }
                    Boundary::Periodic => (u[(j + nx - 1) % nx], u[(j + 1) % nx]),
                };
                let xi = normal_at(seed, replicate, n as u32, j as u32);
                u_next[j] = u[j]
                    + a * (left - 2.0 * u[j] + right)
                    + self.rho.apply(u[j]) * xi * self.noise_scale;
            }
            core::mem::swap(&mut u, &mut u_next);
            let mut max_abs = 0.0f64;
            for (out, val) in values[n * nx..(n + 1) * nx].iter_mut().zip(u.iter()) {
                *out = *val;
                max_abs = max_abs.max(math::abs(*val));
            }
            if max_abs > 1e12 {
                return Err(SimError::NumericalBlowup { replicate, step: n + 1 });
            }
        }
        Ok(LatticeField {
            replicate,
            nu: self.nu,
            dx: self.config.dx,
            dt: self.config.dt,
            x0: self.x0,
            nx,
            nt,
            values,
        })
    }

    fn apply_propagator(&self, v: &[f64], out: &mut [f64]) {
        let nx = v.len();
        match (&self.propagator, self.config.boundary) {
            (Propagator::Stencil { a }, Boundary::DirichletZero) => {
                let c = 1.0 - 2.0 * a;
                out[0] = c * v[0] + a * v[1];
                for j in 1..nx - 1 {
                    out[j] = c * v[j] + a * (v[j - 1] + v[j + 1]);
                }
                out[nx - 1] = c * v[nx - 1] + a * v[nx - 2];
            }
            (Propagator::Stencil { a }, Boundary::Periodic) => {
                let c = 1.0 - 2.0 * a;
                for j in 0..nx {
                    let left = v[(j + nx - 1) % nx];
                    let right = v[(j + 1) % nx];
                    out[j] = c * v[j] + a * (left + right);
                }
            }
            (Propagator::Row(row), boundary) => {
                let w = row.len() - 1;
                for j in 0..nx {
                    let mut s = row[0] * v[j];
                    for i in 1..=w {
                        let (l, r) = match boundary {
                            Boundary::DirichletZero => (
                                if j >= i { v[j - i] } else { 0.0 },
                                if j + i < nx { v[j + i] } else { 0.0 },
                            ),
                            Boundary::Periodic => (v[(j + nx - i) % nx], v[(j + i) % nx]),
                        };
                        s += row[i] * (l + r);
                    }
                    out[j] = s;
                }
            }
        }
    }
}

/// Lazily generate all replicates of a workspace.
pub fn simulate(ws: &SimWorkspace) -> impl Iterator<Item = Result<LatticeField, SimError>> + '_ {
    (0..ws.config.replicates).map(move |r| ws.replicate(r))
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicates: u32,
    pub order: u32,
}

impl MomentEstimate {
    /// Estimate `E[X^order]` from per-replicate samples of `X`.
    pub fn from_samples(samples: &[f64], order: u32) -> Result<Self, SimError> {
        if samples.len() < 2 {
            return Err(SimError::InsufficientReplicates { have: samples.len() as u32 });
        }
        let powered: Vec<f64> = samples.iter().map(|u| math::powi(*u, order as i32)).collect();
        let (mean, stderr) = mean_and_stderr(&powered);
        Ok(Self { mean, stderr, replicates: samples.len() as u32, order })
    }

    /// Estimate `E[X Y]` from paired per-replicate samples.
    pub fn from_product_samples(pairs: &[(f64, f64)]) -> Result<Self, SimError> {
        if pairs.len() < 2 {
            return Err(SimError::InsufficientReplicates { have: pairs.len() as u32 });
        }
        let products: Vec<f64> = pairs.iter().map(|(a, b)| a * b).collect();
        let (mean, stderr) = mean_and_stderr(&products);
        Ok(Self { mean, stderr, replicates: pairs.len() as u32, order: 2 })
    }
}

/// `E[|u(t, x)|^p]` across replicates (nearest-node snap; the snapped point
/// is returned alongside).  `p = 1` gives the plain mean, even orders the
/// moments; standard errors are meaningful from a few dozen replicates up.
pub fn mc_moment<I>(fields: I, order: u32, t: f64, x: f64) -> Result<(MomentEstimate, LatticePoint), SimError>
where
    I: IntoIterator,
    I::Item: core::borrow::Borrow<LatticeField>,
{
    let mut samples = Vec::new();
    let mut point: Option<LatticePoint> = None;
    for item in fields {
        let field = item.borrow();
        let p = match &point {
            Some(p) => *p,
            None => {
                let p = field.snap(t, x)?;
                point = Some(p);
                p
            }
        };
        samples.push(field.value(&p));
    }
    let point = point.ok_or(SimError::InsufficientReplicates { have: 0 })?;
    Ok((MomentEstimate::from_samples(&samples, order)?, point))
}

/// `E[u(t, x) u(t, y)]` across replicates.
pub fn mc_two_point<I>(
    fields: I,
    t: f64,
    x: f64,
    y: f64,
) -> Result<(MomentEstimate, LatticePoint, LatticePoint), SimError>
where
    I: IntoIterator,
    I::Item: core::borrow::Borrow<LatticeField>,
{
    let mut pairs = Vec::new();
    let mut points: Option<(LatticePoint, LatticePoint)> = None;
    for item in fields {
        let field = item.borrow();
        let (px, py) = match &points {
            Some(p) => *p,
            None => {
                let p = (field.snap(t, x)?, field.snap(t, y)?);
                points = Some(p);
                p
            }
        };
        pairs.push((field.value(&px), field.value(&py)));
    }
    let (px, py) = points.ok_or(SimError::InsufficientReplicates { have: 0 })?;
    Ok((MomentEstimate::from_product_samples(&pairs)?, px, py))
}

/// Variogram direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Space,
    Time,
}

/// Hölder-exponent estimate from a log-log variogram fit.
#[derive(Debug, Clone)]
pub struct HolderEstimate {
    pub exponent: f64,
    pub residual: f64,
    /// `(lag, mean squared increment)` pairs entering the fit.
    pub lags: Vec<(f64, f64)>,
}

/// Dyadic lag ladder (in lattice units) for one direction.
pub fn dyadic_lags(direction: Direction, count: usize) -> Vec<usize> {
    let base = match direction {
        Direction::Space => 2usize,
        Direction::Time => 8usize,
    };
    (0..count).map(|k| base << k).collect()
}

/// Accumulate squared-increment sums for one replicate.
///
/// Base points are restricted to sites at least `6 sqrt(nu T)` from the
/// boundary so truncation artifacts stay out of the estimate.
pub fn variogram_accumulate(
    field: &LatticeField,
    direction: Direction,
    t0: f64,
    lags: &[usize],
    sums: &mut [(f64, u64)],
) -> Result<(), SimError> {
    assert_eq!(lags.len(), sums.len());
    if !(t0 > 0.0) {
        return Err(SimError::Config("holder estimation needs t0 > 0"));
    }
    let n0 = (math::round(t0 / field.dt) as i64).max(1) as usize;
    if n0 > field.nt {
        return Err(SimError::Config("t0 beyond the simulated horizon"));
    }
    let horizon = field.nt as f64 * field.dt;
    let margin = (math::ceil(6.0 * math::sqrt(field.nu * horizon) / field.dx) as usize).min(field.nx / 2);
    let max_space_lag = match direction {
        Direction::Space => *lags.last().unwrap(),
        Direction::Time => 0,
    };
    let j_lo = margin;
    let j_hi = field.nx.saturating_sub(margin + max_space_lag);
    if j_lo >= j_hi {
        return Err(SimError::WindowTooNarrow { lags: 0 });
    }
    match direction {
        Direction::Space => {
            let layer = field.layer(n0);
            for (li, &lag) in lags.iter().enumerate() {
                let mut acc = 0.0;
                let mut count = 0u64;
                for j in j_lo..j_hi {
                    let d = layer[j + lag] - layer[j];
                    acc += d * d;
                    count += 1;
                }
                sums[li].0 += acc;
                sums[li].1 += count;
            }
        }
        Direction::Time => {
            if n0 + *lags.last().unwrap() > field.nt {
                return Err(SimError::WindowTooNarrow { lags: lags.len() });
            }
            let base = field.layer(n0);
            for (li, &lag) in lags.iter().enumerate() {
                let shifted = field.layer(n0 + lag);
                let mut acc = 0.0;
                let mut count = 0u64;
                for j in j_lo..j_hi {
                    let d = shifted[j] - base[j];
                    acc += d * d;
                    count += 1;
                }
                sums[li].0 += acc;
                sums[li].1 += count;
            }
        }
    }
    Ok(())
}

/// Fit `log V(h) = slope log h + c`; the Hölder exponent estimate is
/// `slope / 2`.
pub fn holder_from_variogram(lag_values: &[(f64, f64)]) -> Result<HolderEstimate, SimError> {
    if lag_values.len() < 4 {
        return Err(SimError::WindowTooNarrow { lags: lag_values.len() });
    }
    let xs: Vec<f64> = lag_values.iter().map(|(h, _)| math::ln(*h)).collect();
    let ys: Vec<f64> = lag_values.iter().map(|(_, v)| math::ln(*v)).collect();
    let (slope, _, residual) = ols_fit(&xs, &ys);
    Ok(HolderEstimate { exponent: slope / 2.0, residual, lags: lag_values.to_vec() })
}

/// Estimate the Hölder exponent in one direction at interior time `t0` from
/// a stream of replicate fields.
pub fn holder_estimate<I>(
    fields: I,
    direction: Direction,
    t0: f64,
    lag_count: usize,
) -> Result<HolderEstimate, SimError>
where
    I: IntoIterator,
    I::Item: core::borrow::Borrow<LatticeField>,
{
    if lag_count < 4 {
        return Err(SimError::WindowTooNarrow { lags: lag_count });
    }
    let lags = dyadic_lags(direction, lag_count);
    let mut sums = vec![(0.0f64, 0u64); lags.len()];
    let mut spacing = None;
    for item in fields {
        let field = item.borrow();
        spacing.get_or_insert(match direction {
            Direction::Space => field.dx,
            Direction::Time => field.dt,
        });
        variogram_accumulate(field, direction, t0, &lags, &mut sums)?;
    }
    let spacing = spacing.ok_or(SimError::InsufficientReplicates { have: 0 })?;
    let lag_values: Vec<(f64, f64)> = lags
        .iter()
        .zip(sums.iter())
        .map(|(&lag, &(acc, count))| (lag as f64 * spacing, acc / count as f64))
        .collect();
    holder_from_variogram(&lag_values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::heat_kernel;

    fn quick_config(replicates: u32) -> SimConfig {
        SimConfig::new(4.0, 0.1, 0.0025, 0.25, replicates, 42)
    }

    #[test]
    fn noiseless_lebesgue_is_identically_one() {
        let ws =
            SimWorkspace::new(&InitialMeasure::lebesgue(), RhoSpec::pam(0.0), 1.0, quick_config(2)).unwrap();
        let field = ws.replicate(0).unwrap();
        assert!(field.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn noiseless_dirac_follows_heat_kernel_exactly() {
        let ws = SimWorkspace::new(&InitialMeasure::dirac(), RhoSpec::pam(0.0), 1.0, quick_config(2)).unwrap();
        let field = ws.replicate(0).unwrap();
        let mut worst = 0.0f64;
        for n in 1..=field.nt {
            let t = n as f64 * field.dt;
            for j in 0..field.nx {
                let exact = heat_kernel(1.0, t, field.site_x(j));
                worst = worst.max((field.layer(n)[j] - exact).abs());
            }
        }
        assert!(worst <= 1e-8, "max error {worst}");
    }

    #[test]
    fn noiseless_smooth_data_follows_homogeneous_solution() {
        let mu = InitialMeasure::gaussian_bump(0.0, 0.5).unwrap();
        let ws = SimWorkspace::new(&mu, RhoSpec::pam(0.0), 1.0, quick_config(2)).unwrap();
        let field = ws.replicate(0).unwrap();
        let mut worst = 0.0f64;
        for n in (1..=field.nt).step_by(20) {
            let t = n as f64 * field.dt;
            for j in 0..field.nx {
                let exact = mu.homogeneous_solution(1.0, t, field.site_x(j)).unwrap();
                worst = worst.max((field.layer(n)[j] - exact).abs());
            }
        }
        assert!(worst <= 1e-6, "max error {worst}");
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        let ws = SimWorkspace::new(&InitialMeasure::lebesgue(), RhoSpec::pam(1.0), 1.0, quick_config(3))
            .unwrap();
        let a = ws.replicate(1).unwrap();
        let b = ws.replicate(1).unwrap();
        assert_eq!(a.values.len(), b.values.len());
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let c = ws.replicate(2).unwrap();
        assert!(a.values.iter().zip(c.values.iter()).any(|(x, y)| x != y));
    }

    #[test]
    fn noise_box_variance_matches_area() {
        // Sum of dW over an (nt x nsites) box has variance nt dt * nsites dx.
        let (dt, dx) = (0.01f64, 0.1f64);
        let scale = (dt / dx).sqrt();
        let (bt, bx) = (20u32, 15u32);
        let area = f64::from(bt) * dt * f64::from(bx) * dx;
        let m = 600;
        let mut sums = Vec::with_capacity(m as usize);
        for rep in 0..m {
            let mut s = 0.0;
            for n in 0..bt {
                for j in 0..bx {
                    s += normal_at(7, rep, n, j) * scale * dx;
                }
            }
            sums.push(s);
        }
        let mean = sums.iter().sum::<f64>() / f64::from(m);
        let var = sums.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / f64::from(m - 1);
        let sigma_var = area * (2.0 / f64::from(m)).sqrt();
        assert!((var - area).abs() <= 4.0 * sigma_var, "var {var} vs area {area}");
    }

    #[test]
    fn mean_preservation_for_pam() {
        // E[u(t, x)] = J0(t, x): the noise term is a martingale increment.
        let config = SimConfig::new(4.0, 0.1, 0.0025, 0.25, 400, 11);
        let ws = SimWorkspace::new(&InitialMeasure::dirac(), RhoSpec::pam(0.5), 1.0, config).unwrap();
        let fields: Vec<LatticeField> = simulate(&ws).collect::<Result<_, _>>().unwrap();
        for &(t, x) in &[(0.25, 0.0), (0.125, 0.5), (0.25, -1.0)] {
            let (est, p) = mc_moment(fields.iter(), 1, t, x).unwrap();
            let exact = heat_kernel(1.0, p.t, p.x);
            assert!(
                (est.mean - exact).abs() <= 3.0 * est.stderr + 1e-12,
                "t={t} x={x}: {} vs {exact} (stderr {})",
                est.mean,
                est.stderr
            );
        }
    }

    #[test]
    fn quasi_linear_second_moment_tracks_closed_form() {
        // rho(u) = lambda sqrt(vv^2 + u^2) with Lebesgue data:
        // E[u^2](t) = 1 + (1 + vv^2) H(t).
        let (lambda, vv, t) = (0.5, 0.8, 0.25);
        let config = SimConfig::new(4.0, 0.1, 0.0025, t, 3000, 29);
        let ws =
            SimWorkspace::new(&InitialMeasure::lebesgue(), RhoSpec::quasi_linear(lambda, vv), 1.0, config)
                .unwrap();
        let fields: Vec<LatticeField> = simulate(&ws).collect::<Result<_, _>>().unwrap();
        let (est, _) = mc_moment(fields.iter(), 2, t, 0.0).unwrap();
        let params = crate::special::KernelParams::new(1.0, lambda).unwrap();
        let target = 1.0 + (1.0 + vv * vv) * crate::kernels::moment_kernel_integral(t, &params);
        assert!(
            (est.mean - target).abs() <= 3.0 * est.stderr + 0.05 * target,
            "{} vs {target} (stderr {})",
            est.mean,
            est.stderr
        );
        // The mean stays on J0 = 1 even though rho(0) != 0.
        let (mean, _) = mc_moment(fields.iter(), 1, t, 0.0).unwrap();
        assert!((mean.mean - 1.0).abs() <= 3.0 * mean.stderr, "{} pm {}", mean.mean, mean.stderr);
    }

    #[test]
    fn snapping_reports_offsets() {
        let ws = SimWorkspace::new(&InitialMeasure::lebesgue(), RhoSpec::pam(0.0), 1.0, quick_config(2))
            .unwrap();
        let field = ws.replicate(0).unwrap();
        let p = field.snap(0.1234, 0.04).unwrap();
        assert!((p.t_offset).abs() <= field.dt / 2.0 + 1e-12);
        assert!((p.x_offset).abs() <= field.dx / 2.0 + 1e-12);
        assert!(field.snap(0.1, 100.0).is_err());
    }

    #[test]
    fn insufficient_replicates_is_an_error() {
        let config = quick_config(1);
        assert!(matches!(
            SimWorkspace::new(&InitialMeasure::lebesgue(), RhoSpec::pam(0.0), 1.0, config),
            Err(SimError::InsufficientReplicates { .. })
        ));
        assert!(MomentEstimate::from_samples(&[1.0], 2).is_err());
    }

    #[test]
    fn explicit_fd_rejects_unstable_steps() {
        let config = SimConfig::new(2.0, 0.1, 0.02, 0.2, 2, 1).with_scheme(Scheme::ExplicitFd);
        assert!(matches!(
            SimWorkspace::new(&InitialMeasure::lebesgue(), RhoSpec::pam(0.0), 1.0, config),
            Err(SimError::Stability { .. })
        ));
    }

    #[test]
    fn explicit_fd_noiseless_diffuses_towards_j0() {
        let config = SimConfig::new(4.0, 0.05, 0.000625, 0.1, 2, 1).with_scheme(Scheme::ExplicitFd);
        let mu = InitialMeasure::gaussian_bump(0.0, 0.4).unwrap();
        let ws = SimWorkspace::new(&mu, RhoSpec::pam(0.0), 1.0, config).unwrap();
        let field = ws.replicate(0).unwrap();
        let t = field.nt as f64 * field.dt;
        let mut worst = 0.0f64;
        for j in 0..field.nx {
            let exact = mu.homogeneous_solution(1.0, t, field.site_x(j)).unwrap();
            worst = worst.max((field.layer(field.nt)[j] - exact).abs());
        }
        assert!(worst < 5e-4, "fd error {worst}");
    }

    #[test]
    fn smooth_deterministic_field_has_unit_spatial_exponent() {
        let config = SimConfig::new(6.0, 0.05, 0.000625, 0.55, 2, 9);
        let mu = InitialMeasure::gaussian_bump(0.0, 0.7).unwrap();
        let ws = SimWorkspace::new(&mu, RhoSpec::pam(0.0), 1.0, config).unwrap();
        let fields: Vec<LatticeField> = simulate(&ws).collect::<Result<_, _>>().unwrap();
        let est = holder_estimate(fields.iter(), Direction::Space, 0.5, 4).unwrap();
        assert!((est.exponent - 1.0).abs() < 0.05, "exponent {}", est.exponent);
        assert!(est.residual < 0.05, "residual {}", est.residual);
    }

    #[test]
    fn window_too_narrow_detected() {
        let config = SimConfig::new(4.0, 0.1, 0.0025, 0.05, 2, 1);
        let ws = SimWorkspace::new(&InitialMeasure::lebesgue(), RhoSpec::pam(1.0), 1.0, config).unwrap();
        let fields: Vec<LatticeField> = simulate(&ws).collect::<Result<_, _>>().unwrap();
        // horizon 0.05 -> nt = 20 steps; time lags reach 8..64 > remaining window
        assert!(matches!(
            holder_estimate(fields.iter(), Direction::Time, 0.04, 4),
            Err(SimError::WindowTooNarrow { .. })
        ));
    }
}
