//! Randomized invariants: identities and orderings the library must satisfy
//! on whole parameter regions, not just at the frozen example points.

use proptest::prelude::*;

use sheq_core::kernels::{moment_kernel, moment_kernel_integral, GrowthEnvelope};
use sheq_core::measure::InitialMeasure;
use sheq_core::moments::{
    moment_upper_bound, second_moment_exact, second_moment_lower, two_point_delta,
    two_point_lebesgue, MomentRequest,
};
use sheq_core::quad::{integrate, QuadOpts};
use sheq_core::special::{erf, erfc, heat_kernel, std_normal_cdf, KernelParams};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn phi_erf_identities(x in -10.0f64..10.0) {
        let lhs = erf(x);
        let rhs = 2.0 * std_normal_cdf(core::f64::consts::SQRT_2 * x) - 1.0;
        prop_assert!((lhs - rhs).abs() <= 1e-13);
        let lhs = erfc(x);
        let rhs = 2.0 * (1.0 - std_normal_cdf(core::f64::consts::SQRT_2 * x));
        prop_assert!((lhs - rhs).abs() <= 1e-13);
    }

    #[test]
    fn normal_cdf_symmetry(x in -38.0f64..38.0) {
        prop_assert!((std_normal_cdf(-x) - (1.0 - std_normal_cdf(x))).abs() <= 1e-15);
    }

    #[test]
    fn heat_kernel_scaling(nu in 0.1f64..5.0, t in 1e-3f64..10.0, x in -8.0f64..8.0) {
        let a = heat_kernel(nu, t, x);
        let b = heat_kernel(1.0, nu * t, x);
        prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
    }

    #[test]
    fn kernel_monotone_in_lambda(
        t in 0.05f64..3.0,
        x in -3.0f64..3.0,
        l1 in 0.2f64..1.5,
        bump in 0.01f64..1.5,
    ) {
        let p1 = KernelParams::new(1.0, l1).unwrap();
        let p2 = KernelParams::new(1.0, l1 + bump).unwrap();
        prop_assert!(moment_kernel(t, x, &p1) <= moment_kernel(t, x, &p2) * (1.0 + 1e-13));
    }

    #[test]
    fn kernel_integral_monotone_in_time(
        nu in 0.3f64..3.0,
        lambda in 0.3f64..2.0,
        t in 0.0f64..5.0,
        dt in 1e-4f64..1.0,
    ) {
        let p = KernelParams::new(nu, lambda).unwrap();
        let a = moment_kernel_integral(t, &p);
        let b = moment_kernel_integral(t + dt, &p);
        prop_assert!(a >= 0.0);
        prop_assert!(b >= a - 1e-13);
    }

    #[test]
    fn lebesgue_two_point_dominated_by_diagonal(
        t in 0.05f64..2.0,
        x in -2.0f64..2.0,
        sep in 0.0f64..4.0,
        vv in 0.0f64..1.0,
    ) {
        // Cauchy-Schwarz plus positivity of the interaction term.
        let y = x + sep;
        let tp = two_point_lebesgue(1.0, 1.0, vv, t, x, y);
        let mx = two_point_lebesgue(1.0, 1.0, vv, t, x, x);
        let my = two_point_lebesgue(1.0, 1.0, vv, t, y, y);
        prop_assert!(tp * tp <= mx * my * (1.0 + 1e-11));
        if vv == 0.0 {
            prop_assert!(tp >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn delta_two_point_exceeds_homogeneous_product(
        t in 0.05f64..2.0,
        x in -1.5f64..1.5,
        sep in 0.0f64..3.0,
    ) {
        let y = x + sep;
        let tp = two_point_delta(1.0, 1.0, 0.0, t, x, y);
        let base = heat_kernel(1.0, t, x) * heat_kernel(1.0, t, y);
        prop_assert!(tp >= base - 1e-14);
    }
}

proptest! {
    // Quadrature-backed properties are expensive; fewer cases.
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heat_semigroup_identity(
        s in 0.05f64..1.5,
        t in 0.05f64..1.5,
        x in -2.0f64..2.0,
    ) {
        let nu = 1.0;
        let r = 14.0 * (nu * (s + t)).sqrt();
        let out = integrate(
            |y| heat_kernel(nu, s, x - y) * heat_kernel(nu, t, y),
            -r,
            r,
            &QuadOpts::tight(),
        );
        prop_assert!(out.converged);
        prop_assert!((out.value - heat_kernel(nu, s + t, x)).abs() < 1e-11);
    }

    #[test]
    fn homogeneous_solution_is_finite_and_smooth(
        t in 0.02f64..3.0,
        x in -4.0f64..4.0,
        rate in 0.2f64..2.0,
    ) {
        // Admissible data: j0 finite, and the centered second difference
        // stays bounded on compacts (smoothness of the heat flow).
        let mu = InitialMeasure::exp_decay(rate).unwrap();
        let h = 1e-3;
        let f = |z: f64| mu.homogeneous_solution(1.0, t, z).unwrap();
        let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
        prop_assert!(f0.is_finite() && f0 > 0.0);
        let second = (fp - 2.0 * f0 + fm) / (h * h);
        prop_assert!(second.abs() < 1e4, "second difference {second}");
    }

    #[test]
    fn quasi_linear_sandwich_collapses(
        t in 0.05f64..2.0,
        x in -2.0f64..2.0,
        lambda in 0.4f64..1.6,
        vv in 0.0f64..0.8,
    ) {
        // With coinciding envelopes the lower bound, the exact value and the
        // p = 2 upper bound are one formula.
        let env = GrowthEnvelope::quasi_linear(lambda, vv).unwrap();
        for mu in [InitialMeasure::lebesgue(), InitialMeasure::dirac()] {
            let req = MomentRequest::new(mu, env, 1.0, 2, t, x).unwrap();
            let exact = second_moment_exact(&req).unwrap();
            let lower = second_moment_lower(&req).unwrap();
            let upper = moment_upper_bound(&req).unwrap().value;
            prop_assert!((lower - exact).abs() <= 1e-10 * exact.max(1e-10));
            prop_assert!((upper - exact).abs() <= 1e-10 * exact.max(1e-10));
        }
    }

    #[test]
    fn strict_envelope_sandwich_orders(
        t in 0.1f64..1.5,
        x in -1.0f64..1.0,
    ) {
        let env = GrowthEnvelope::with_bounds(0.8, 1.3, 0.0, 0.7, 0.0).unwrap();
        let quasi = GrowthEnvelope::quasi_linear(1.0, 0.0).unwrap();
        let req_e = MomentRequest::new(InitialMeasure::dirac(), quasi, 1.0, 2, t, x).unwrap();
        let req_b = MomentRequest::new(InitialMeasure::dirac(), env, 1.0, 2, t, x).unwrap();
        let exact = second_moment_exact(&req_e).unwrap();
        let lower = second_moment_lower(&req_b).unwrap();
        let upper = moment_upper_bound(&req_b).unwrap().value;
        prop_assert!(lower < exact && exact < upper);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulator_replicates_are_pure(seed in any::<u64>(), rep in 0u32..32) {
        use sheq_core::sim::{simulate, RhoSpec, SimConfig, SimWorkspace};
        let config = SimConfig::new(2.0, 0.2, 0.01, 0.05, rep.max(2), seed);
        let ws = SimWorkspace::new(&InitialMeasure::lebesgue(), RhoSpec::pam(1.0), 1.0, config).unwrap();
        let direct = ws.replicate(1).unwrap();
        let via_stream = simulate(&ws).nth(1).unwrap().unwrap();
        prop_assert_eq!(direct.values, via_stream.values);
    }
}
