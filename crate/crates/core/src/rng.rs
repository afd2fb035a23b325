//! Counter-based random numbers for reproducible parallel Monte Carlo.
//!
//! Every variate is a pure function of `(seed, replicate, step, site)`, so
//! simulations are bit-identical across thread schedules and replicate
//! partitions.  The generator is Philox-4x32 with 10 rounds; the normal
//! transform is Wichura's PPND16 inverse distribution function (AS 241),
//! accurate to about `1e-15` over the full open unit interval.

use crate::math;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline]
fn philox_round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let p0 = u64::from(ctr[0]) * u64::from(PHILOX_M0);
    let p1 = u64::from(ctr[2]) * u64::from(PHILOX_M1);
    let (lo0, hi0) = (p0 as u32, (p0 >> 32) as u32);
    let (lo1, hi1) = (p1 as u32, (p1 >> 32) as u32);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

/// Philox-4x32-10 block function: 128 pseudo-random bits per counter.
#[inline]
pub fn philox4x32(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for _ in 0..10 {
        ctr = philox_round(ctr, key);
        key[0] = key[0].wrapping_add(PHILOX_W0);
        key[1] = key[1].wrapping_add(PHILOX_W1);
    }
    ctr
}

#[inline]
fn block_at(seed: u64, replicate: u32, step: u32, site: u32) -> [u32; 4] {
    let key = [seed as u32, (seed >> 32) as u32];
    philox4x32([site, step, replicate, 0], key)
}

/// Uniform variate on the open interval `(0, 1)`.
#[inline]
pub fn uniform_at(seed: u64, replicate: u32, step: u32, site: u32) -> f64 {
    let b = block_at(seed, replicate, step, site);
    let bits = (u64::from(b[0]) << 32) | u64::from(b[1]);
    ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal variate, a pure function of its four coordinates.
#[inline]
pub fn normal_at(seed: u64, replicate: u32, step: u32, site: u32) -> f64 {
    standard_normal_quantile(uniform_at(seed, replicate, step, site))
}

// AS 241 PPND16 coefficients.
const PPND_A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const PPND_B: [f64; 7] = [
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const PPND_C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const PPND_D: [f64; 7] = [
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const PPND_E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const PPND_F: [f64; 7] = [
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

#[inline]
fn poly8_over_poly7(num: &[f64; 8], den: &[f64; 7], r: f64) -> f64 {
    let mut n = num[7];
    for i in (0..7).rev() {
        n = n * r + num[i];
    }
    let mut d = den[6];
    for i in (0..6).rev() {
        d = d * r + den[i];
    }
    n / (d * r + 1.0)
}

/// Quantile (inverse distribution function) of the standard normal law,
/// Wichura's algorithm AS 241, double-precision variant.
pub fn standard_normal_quantile(p: f64) -> f64 {
    let q = p - 0.5;
    if math::abs(q) <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly8_over_poly7(&PPND_A, &PPND_B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    if r <= 0.0 {
        return if q < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    let r = math::sqrt(-math::ln(r));
    let val = if r <= 5.0 {
        poly8_over_poly7(&PPND_C, &PPND_D, r - 1.6)
    } else {
        poly8_over_poly7(&PPND_E, &PPND_F, r - 5.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::std_normal_cdf;

    #[test]
    fn deterministic_by_construction() {
        let a = normal_at(42, 3, 100, 7);
        let b = normal_at(42, 3, 100, 7);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(normal_at(42, 3, 100, 8).to_bits(), a.to_bits());
        assert_ne!(normal_at(43, 3, 100, 7).to_bits(), a.to_bits());
    }

    #[test]
    fn quantile_inverts_cdf() {
        // Round-tripping through p = Phi(x) loses accuracy at the rate
        // eps / phi(x) because the tail mass is stored next to 1.0, so the
        // tolerance carries that representation term.
        for &x in &[-8.0, -3.2, -1.0, -0.1, 0.0, 0.4, 1.0, 2.5, 5.0, 7.5] {
            let p = std_normal_cdf(x);
            let back = standard_normal_quantile(p);
            let tol = 1e-13 * (1.0 + x.abs()) + 4.0 * f64::EPSILON / crate::special::std_normal_pdf(x);
            assert!((back - x).abs() < tol, "x = {x}, back = {back}");
        }
        // Central region is much tighter.
        for &x in &[-1.5, -0.5, 0.25, 1.25] {
            let back = standard_normal_quantile(std_normal_cdf(x));
            assert!((back - x).abs() < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn quantile_reference_values() {
        assert!((standard_normal_quantile(0.5) - 0.0).abs() < 1e-16);
        assert!((standard_normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-13);
        assert!((standard_normal_quantile(0.025) + 1.959_963_984_540_054).abs() < 1e-13);
        assert!((standard_normal_quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-9);
        assert_eq!(standard_normal_quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(standard_normal_quantile(1.0), f64::INFINITY);
    }

    #[test]
    fn sample_moments_within_four_sigma() {
        let n = 1_000_000u32;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let z = normal_at(0xDEADBEEF, i / 1000, i % 1000, 17);
            sum += z;
            sum_sq += z * z;
        }
        let nf = f64::from(n);
        let mean = sum / nf;
        let var = sum_sq / nf - mean * mean;
        // stderr(mean) = 1/sqrt(n), stderr(var) ~ sqrt(2/n)
        assert!(mean.abs() < 4.0 / nf.sqrt(), "mean = {mean}");
        assert!((var - 1.0).abs() < 4.0 * (2.0 / nf).sqrt(), "var = {var}");
    }

    #[test]
    fn replicate_streams_uncorrelated() {
        let n = 10_000;
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let x = normal_at(7, 0, i, 3);
            let y = normal_at(7, 1, i, 3);
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let nf = f64::from(n);
        let cov = sxy / nf - (sx / nf) * (sy / nf);
        let vx = sxx / nf - (sx / nf) * (sx / nf);
        let vy = syy / nf - (sy / nf) * (sy / nf);
        let r = cov / (vx * vy).sqrt();
        assert!(r.abs() < 0.05, "cross-replicate correlation {r}");
    }

    #[test]
    fn uniform_is_open_interval() {
        for i in 0..10_000 {
            let u = uniform_at(1, 2, 3, i);
            assert!(u > 0.0 && u < 1.0);
        }
    }
}
