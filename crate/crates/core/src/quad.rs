//! Globally adaptive Gauss–Kronrod quadrature (7–15 point pair).
//!
//! The worst interval (largest error estimate) is bisected until the summed
//! error estimate meets `max(abs_tol, rel_tol * |integral|)` or the interval
//! budget is exhausted.  Node placement never touches the endpoints, so
//! integrands with integrable endpoint singularities (after substitution)
//! are safe to pass in.

use alloc::collections::BinaryHeap;

use crate::math;

// QUADPACK dqk15 nodes and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_33,
    0.949_107_912_342_758_524_526_189_684_047_85,
    0.864_864_423_359_769_072_789_712_788_640_93,
    0.741_531_185_599_394_439_863_864_773_280_79,
    0.586_087_235_467_691_130_294_144_838_258_73,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_24,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_52,
    0.140_653_259_715_525_918_745_189_590_510_24,
    0.169_004_726_639_267_902_826_583_426_598_55,
    0.190_350_578_064_785_409_913_256_402_421_01,
    0.204_432_940_075_298_892_414_161_999_234_65,
    0.209_482_141_084_727_828_012_999_174_891_71,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_08,
    0.279_705_391_489_276_667_901_467_771_423_78,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_33,
];

/// Tolerances and budget for one adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadOpts {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of interval bisections.
    pub max_splits: u32,
}

impl Default for QuadOpts {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-8, max_splits: 1200 }
    }
}

impl QuadOpts {
    /// Near machine-precision target, for oracle computations in tests.
    pub fn tight() -> Self {
        Self { abs_tol: 1e-15, rel_tol: 1e-13, max_splits: 4000 }
    }

    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

/// Result of one adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadOutcome {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: u32,
    pub converged: bool,
}

struct Segment {
    value: f64,
    error: f64,
    a: f64,
    b: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(core::cmp::Ordering::Equal)
    }
}

/// One 15-point Kronrod application on `[a, b]`; returns `(value, error)`.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut kronrod = WGK[7] * f_center;
    let mut gauss = WG[3] * f_center;
    let mut res_abs = WGK[7] * math::abs(f_center);

    let mut samples = [0.0f64; 15];
    samples[7] = f_center;

    for i in 0..7 {
        let dx = half * XGK[i];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        samples[i] = f1;
        samples[14 - i] = f2;
        kronrod += WGK[i] * (f1 + f2);
        res_abs += WGK[i] * (math::abs(f1) + math::abs(f2));
        if i % 2 == 1 {
            gauss += WG[i / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * math::abs(f_center - mean);
    for i in 0..7 {
        res_asc += WGK[i] * (math::abs(samples[i] - mean) + math::abs(samples[14 - i] - mean));
    }

    let value = kronrod * half;
    res_abs *= math::abs(half);
    res_asc *= math::abs(half);

    // QUADPACK error rescaling.
    let mut err = math::abs((kronrod - gauss) * half);
    if res_asc != 0.0 && err != 0.0 {
        let scale = math::powf(200.0 * err / res_asc, 1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    let tiny = f64::MIN_POSITIVE / (50.0 * f64::EPSILON);
    if res_abs > tiny {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

/// Adaptively integrate `f` over `[a, b]`.
///
/// A non-finite integrand value marks the outcome as not converged with a
/// NaN value; callers translate that into their own error type.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: &QuadOpts) -> QuadOutcome {
    if a == b {
        return QuadOutcome { value: 0.0, error_estimate: 0.0, evaluations: 0, converged: true };
    }

    let (v, e) = gk15(&mut f, a, b);
    let mut evaluations = 15u32;
    if !v.is_finite() {
        return QuadOutcome { value: f64::NAN, error_estimate: f64::INFINITY, evaluations, converged: false };
    }

    let mut heap = BinaryHeap::new();
    heap.push(Segment { value: v, error: e, a, b });
    let mut total_value = v;
    let mut total_error = e;

    for _ in 0..opts.max_splits {
        if total_error <= opts.abs_tol.max(opts.rel_tol * math::abs(total_value)) {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        // An interval narrower than a few ulps cannot be refined further.
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            total_error = total_error.min(f64::INFINITY);
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        if !v1.is_finite() || !v2.is_finite() {
            return QuadOutcome {
                value: f64::NAN,
                error_estimate: f64::INFINITY,
                evaluations,
                converged: false,
            };
        }
        total_value += v1 + v2 - worst.value;
        total_error += e1 + e2 - worst.error;
        heap.push(Segment { value: v1, error: e1, a: worst.a, b: mid });
        heap.push(Segment { value: v2, error: e2, a: mid, b: worst.b });
    }

    let converged = total_error <= opts.abs_tol.max(opts.rel_tol * math::abs(total_value));
    QuadOutcome { value: total_value, error_estimate: total_error, evaluations, converged }
}

/// Partition the hull of the given intervals at every interval endpoint.
///
/// Feeding the result to [`integrate_segments`] guarantees the integrator
/// sees a segment boundary at the edge of every known feature, so a spike
/// much narrower than the overall domain cannot slip between the nodes of
/// the first Kronrod pass.
pub fn split_segments(intervals: &[(f64, f64)]) -> alloc::vec::Vec<(f64, f64)> {
    let mut points: alloc::vec::Vec<f64> = intervals.iter().flat_map(|&(a, b)| [a, b]).collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    points.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Integrate over a union of disjoint intervals (used when the integrand has
/// known, widely separated features that plain bisection could step over).
pub fn integrate_segments<F: FnMut(f64) -> f64>(
    mut f: F,
    segments: &[(f64, f64)],
    opts: &QuadOpts,
) -> QuadOutcome {
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    let mut converged = true;
    for &(a, b) in segments {
        let out = integrate(&mut f, a, b, opts);
        value += out.value;
        error += out.error_estimate;
        evaluations += out.evaluations;
        converged &= out.converged;
    }
    QuadOutcome { value, error_estimate: error, evaluations, converged }
}
