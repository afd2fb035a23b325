//! Scalar special functions and the heat kernel.
//!
//! Everything downstream (moment kernels, closed forms, quadrature oracles)
//! reduces to the error function, the standard normal distribution function
//! and the Gaussian heat kernel defined here.
//!
//! `erf`/`erfc` use W. J. Cody's rational minimax approximations (SPECFUN,
//! TOMS 715) with maximum relative error below `1.5e-16` on each of the three
//! approximation intervals.  The normal distribution function is defined
//! through `erfc`, so one approximation is the single source of truth.

use crate::math;

use core::fmt;

/// `ln(f64::MIN_POSITIVE)`: exponents below this underflow to zero even
/// before subnormals, so the kernel evaluators return an exact `0.0` there.
/// Downstream quadrature is written to tolerate exact zeros.
pub(crate) const MIN_NORMAL_EXPONENT: f64 = -708.396_418_532_264_1;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_286_9;

/// Diffusion and noise-intensity parameters of the stochastic heat equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Diffusion coefficient `nu > 0`.
    pub nu: f64,
    /// Noise intensity `lambda != 0`.
    pub lambda: f64,
}

impl KernelParams {
    pub fn new(nu: f64, lambda: f64) -> Result<Self, SpecialError> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(SpecialError::InvalidDiffusion(nu));
        }
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(SpecialError::InvalidNoiseIntensity(lambda));
        }
        Ok(Self { nu, lambda })
    }
}

/// Parameter validation errors for the scalar kernel layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpecialError {
    InvalidDiffusion(f64),
    InvalidNoiseIntensity(f64),
}

impl fmt::Display for SpecialError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidDiffusion(nu) => write!(f, "diffusion coefficient must be positive, got {nu}"),
            Self::InvalidNoiseIntensity(l) => write!(f, "noise intensity must be nonzero, got {l}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SpecialError {}

// Cody's coefficients (SPECFUN `calerf`).  First interval |x| <= 0.46875.
const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];
// Second interval 0.46875 < x <= 4.
const ERF_C: [f64; 9] = [
    5.641_884_969_886_700_89e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const ERF_D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];
// Third interval x > 4.
const ERF_P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const ERF_Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];

const ERF_THRESHOLD: f64 = 0.46875;
// erfc underflows to zero beyond this.
const ERFC_XBIG: f64 = 26.543;

/// erf on the first interval, |x| <= 0.46875.  Relative error < 6e-19.
fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// erfc for y > 0.46875 (both remaining Cody intervals).
fn erfc_large(y: f64) -> f64 {
    let result = if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        (num + ERF_C[7]) / (den + ERF_D[7])
    } else {
        if y >= ERFC_XBIG {
            return 0.0;
        }
        let z = 1.0 / (y * y);
        let mut num = ERF_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERF_P[i]) * z;
            den = (den + ERF_Q[i]) * z;
        }
        let r = z * (num + ERF_P[4]) / (den + ERF_Q[4]);
        (FRAC_1_SQRT_PI - r) / y
    };
    // exp(-y^2) split into an exactly representable part and a remainder,
    // which keeps the relative error of the exponential factor at one ulp.
    let ysq = math::trunc(y * 16.0) / 16.0;
    let del = (y - ysq) * (y + ysq);
    math::exp(-ysq * ysq) * math::exp(-del) * result
}

/// Error function.
///
/// Maximum relative error below `1.5e-16` (Cody's rational approximations).
pub fn erf(x: f64) -> f64 {
    let y = math::abs(x);
    if y <= ERF_THRESHOLD {
        erf_small(x)
    } else {
        let r = erfc_large(y);
        let v = (0.5 - r) + 0.5;
        if x < 0.0 {
            -v
        } else {
            v
        }
    }
}

/// Complementary error function `1 - erf(x)`, accurate in the far tail.
pub fn erfc(x: f64) -> f64 {
    let y = math::abs(x);
    if y <= ERF_THRESHOLD {
        1.0 - erf_small(x)
    } else {
        let r = erfc_large(y);
        if x < 0.0 {
            2.0 - r
        } else {
            r
        }
    }
}

/// Distribution function of the standard normal law.
///
/// Defined through [`erfc`] so the Cody approximation is the single source of
/// truth; absolute error stays below `1e-15`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Density of the standard normal law.
pub fn std_normal_pdf(x: f64) -> f64 {
    const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    FRAC_1_SQRT_2PI * math::exp(-0.5 * x * x)
}

/// Heat kernel `G_nu(t, x)`, the fundamental solution of
/// `d/dt - (nu/2) d^2/dx^2`; identically zero for `t <= 0`.
///
/// Panics if `nu <= 0`.
pub fn heat_kernel(nu: f64, t: f64, x: f64) -> f64 {
    assert!(nu > 0.0, "heat_kernel requires nu > 0, got {nu}");
    if t <= 0.0 {
        return 0.0;
    }
    let var = nu * t;
    let exponent = -(x * x) / (2.0 * var);
    if exponent < MIN_NORMAL_EXPONENT {
        return 0.0;
    }
    math::exp(exponent) / math::sqrt(2.0 * core::f64::consts::PI * var)
}

/// `order`-th spatial derivative of the heat kernel, via the Rodrigues
/// formula with probabilists' Hermite polynomials:
/// `d^n/dx^n G = (-1)^n sigma^{-n} He_n(x / sigma) G(t, x)`, `sigma^2 = nu t`.
///
/// This is the homogeneous solution seeded by the `order`-th derivative of a
/// Dirac mass, which is not a measure for `order >= 1`.
pub fn heat_kernel_derivative(nu: f64, t: f64, x: f64, order: u32) -> f64 {
    assert!(nu > 0.0, "heat_kernel_derivative requires nu > 0");
    if t <= 0.0 {
        return 0.0;
    }
    let sigma = math::sqrt(nu * t);
    let z = x / sigma;
    // He_0 = 1, He_1 = z, He_{n+1} = z He_n - n He_{n-1}.
    let mut prev = 1.0;
    let mut cur = z;
    let he = match order {
        0 => 1.0,
        1 => z,
        _ => {
            for n in 1..order {
                let next = z * cur - f64::from(n) * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    };
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    sign * he / math::powi(sigma, order as i32) * heat_kernel(nu, t, x)
}

/// `Phi(b) - Phi(a)` for `a <= b`, avoiding cancellation when both
/// arguments sit in the same tail.
pub fn normal_cdf_diff(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    let h = core::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a * h) - erfc(b * h))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * h) - erfc(-a * h))
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
}

/// `exp(a) * erfc(z)` without intermediate under/overflow.
///
/// For `z` beyond the `erfc` underflow point the product is reassembled in
/// log space from the asymptotic expansion
/// `erfc(z) ~ exp(-z^2)/(z sqrt(pi)) (1 - 1/(2z^2) + 3/(4z^4) - ...)`,
/// whose truncation error is below `1e-12` relative there.
pub fn exp_mul_erfc(a: f64, z: f64) -> f64 {
    if z < 26.0 {
        return math::exp(a) * erfc(z);
    }
    let zi = 1.0 / (z * z);
    let series = 1.0 + zi * (-0.5 + zi * (0.75 + zi * (-1.875 + zi * 6.5625)));
    let log_val = a - z * z + math::ln(series * FRAC_1_SQRT_PI / z);
    if log_val < MIN_NORMAL_EXPONENT {
        0.0
    } else {
        math::exp(log_val)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOpts};

    #[test]
    fn normal_cdf_at_zero_and_tails() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(std_normal_cdf(40.0), 1.0);
        assert_eq!(std_normal_cdf(-40.0), 0.0);
    }

    #[test]
    fn normal_cdf_against_quadrature_oracle() {
        // Independent oracle: adaptive quadrature of the normal density.
        let oracle = |x: f64| {
            let out = integrate(std_normal_pdf, -12.0, x, &QuadOpts::tight());
            assert!(out.converged);
            out.value
        };
        for &x in &[-3.0, -1.0, -0.25, 0.5, 1.0, 2.0, 3.5] {
            assert!((std_normal_cdf(x) - oracle(x)).abs() <= 1e-14, "x = {x}");
        }
        // Frozen value from the oracle (also the classical tabulated value).
        assert!((std_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
    }

    #[test]
    fn erf_against_maclaurin_oracle() {
        // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1)); converges
        // fast for |x| <= 1 and is independent of the rational approximation.
        let oracle = |x: f64| {
            let mut term = x;
            let mut sum = x;
            for n in 1..40 {
                let nf = n as f64;
                term *= -x * x / nf;
                sum += term / (2.0 * nf + 1.0);
            }
            2.0 * FRAC_1_SQRT_PI * sum
        };
        for &x in &[0.1, 0.3, 0.5, 0.7, 1.0] {
            assert!((erf(x) - oracle(x)).abs() < 1e-15, "x = {x}");
        }
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-15);
    }

    #[test]
    fn erf_erfc_basics() {
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erfc(0.0), 1.0);
        assert!((erfc(1.0) + erf(1.0) - 1.0).abs() < 1e-16);
        assert!((erfc(3.0) - 2.209_049_699_858_544e-5).abs() < 1e-19);
        // Deep tail stays accurate (reference: mpmath erfc(10)).
        assert!((erfc(10.0) - 2.088_487_583_762_545e-45).abs() < 1e-59);
    }

    #[test]
    fn phi_erf_consistency_identities() {
        // erf(x) = 2 Phi(sqrt(2) x) - 1 and erfc(x) = 2 (1 - Phi(sqrt(2) x)),
        // checked over a deterministic pseudo-random sample.
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let u = crate::rng::uniform_at(0x5eed, 0, 0, i);
            let x = 12.0 * (u - 0.5);
            let lhs1 = erf(x);
            let rhs1 = 2.0 * std_normal_cdf(core::f64::consts::SQRT_2 * x) - 1.0;
            let lhs2 = erfc(x);
            let rhs2 = 2.0 * (1.0 - std_normal_cdf(core::f64::consts::SQRT_2 * x));
            worst = worst.max((lhs1 - rhs1).abs()).max((lhs2 - rhs2).abs());
        }
        assert!(worst <= 1e-13, "worst identity error {worst}");
    }

    #[test]
    fn phi_symmetry_and_monotonicity() {
        let mut prev = 0.0;
        for i in 0..=800 {
            let x = -8.0 + i as f64 * 0.02;
            let p = std_normal_cdf(x);
            assert!(p >= prev, "not monotone at {x}");
            assert!((std_normal_cdf(-x) - (1.0 - p)).abs() < 1e-15);
            prev = p;
        }
    }

    #[test]
    fn heat_kernel_peak_and_zero_convention() {
        let peak = heat_kernel(1.0, 1.0, 0.0);
        assert!((peak - 1.0 / (2.0 * core::f64::consts::PI).sqrt()).abs() < 1e-16);
        assert_eq!(heat_kernel(1.0, -0.5, 3.0), 0.0);
        assert_eq!(heat_kernel(1.0, 0.0, 3.0), 0.0);
        // Underflow policy: exact zero far in the tails.
        assert_eq!(heat_kernel(1.0, 1e-4, 1.0), 0.0);
    }

    #[test]
    #[should_panic(expected = "nu > 0")]
    fn heat_kernel_rejects_nonpositive_nu() {
        heat_kernel(-1.0, 1.0, 0.0);
    }

    #[test]
    fn heat_kernel_mass_is_one() {
        let (nu, t) = (2.0f64, 0.7f64);
        let r = 12.0 * (nu * t).sqrt();
        let out = integrate(|x| heat_kernel(nu, t, x), -r, r, &QuadOpts::tight());
        assert!(out.converged);
        assert!((out.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heat_kernel_semigroup_property() {
        // Integral of G(s, x-y) G(t, y) over y equals G(s+t, x).
        for i in 0..12u32 {
            let s = 0.1 + 0.3 * f64::from(i % 4);
            let t = 0.2 + 0.25 * f64::from(i % 3);
            let x = -2.0 + 0.4 * f64::from(i);
            let nu = 1.3;
            let r = 14.0 * (nu * (s + t)).sqrt();
            let out = integrate(
                |y| heat_kernel(nu, s, x - y) * heat_kernel(nu, t, y),
                -r,
                r,
                &QuadOpts::default(),
            );
            assert!(out.converged);
            let exact = heat_kernel(nu, s + t, x);
            assert!((out.value - exact).abs() < 1e-10, "s={s} t={t} x={x}");
        }
    }

    #[test]
    fn heat_kernel_scaling_identity() {
        for i in 0..40 {
            let t = 0.05 + 0.11 * f64::from(i);
            let x = -3.0 + 0.15 * f64::from(i);
            let nu = 2.7;
            let a = heat_kernel(nu, t, x);
            let b = heat_kernel(1.0, nu * t, x);
            assert!((a - b).abs() <= 1e-16 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn exp_mul_erfc_matches_plain_product() {
        for &(a, z) in &[(0.3f64, 1.0f64), (5.0, 2.5), (-2.0, 0.1), (10.0, 4.0)] {
            let plain = a.exp() * erfc(z);
            assert!((exp_mul_erfc(a, z) - plain).abs() <= 1e-13 * plain.abs());
        }
        // Far-tail branch at a = z^2, where the product equals the scaled
        // complementary error function erfcx(z) = e^{z^2} erfc(z).
        let z = 30.0f64;
        let erfcx = (1.0 / (z * core::f64::consts::PI.sqrt()))
            * (1.0 - 0.5 / (z * z) + 0.75 / (z * z * z * z));
        let v = exp_mul_erfc(z * z, z);
        assert!((v / erfcx - 1.0).abs() < 1e-6, "{v} vs {erfcx}");
    }

    #[test]
    fn normal_cdf_diff_avoids_tail_cancellation() {
        // Both arguments deep in the same tail: the direct difference of the
        // distribution function underflows to zero relative accuracy.
        let d = normal_cdf_diff(10.0, 11.0);
        let reference = 0.5 * (erfc(10.0 * core::f64::consts::FRAC_1_SQRT_2)
            - erfc(11.0 * core::f64::consts::FRAC_1_SQRT_2));
        assert!(d > 0.0);
        assert_eq!(d.to_bits(), reference.to_bits());
        let sym = normal_cdf_diff(-11.0, -10.0);
        assert!((sym - d).abs() <= 1e-16 * d);
    }
}
