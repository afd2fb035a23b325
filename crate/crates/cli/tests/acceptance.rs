//! Acceptance suite: every validation criterion, at full resolution and
//! the tolerances pinned in `sheq_cli::validate`, one test per criterion.
//! Each prints its pass/fail summary line (visible with `--nocapture`).

use sheq_cli::validate::{self, ValidateCtx};

fn run(id: &'static str, f: fn(&ValidateCtx) -> validate::CriterionResult) {
    let ctx = ValidateCtx::default();
    let result = f(&ctx);
    println!("{}", result.summary_line());
    for check in &result.checks {
        println!(
            "    {} {} (error {:.3e}, tolerance {:.3e})",
            if check.pass { "ok  " } else { "FAIL" },
            check.label,
            check.error,
            check.tolerance
        );
    }
    assert!(result.pass(), "criterion {id} failed:\n{}", result.summary_line());
    assert_eq!(result.id, id);
}

#[test]
fn criterion_01_kernel_identity() {
    run("kernel-identity", validate::kernel_identity);
}

#[test]
fn criterion_02_closed_vs_quadrature() {
    run("closed-vs-quadrature", validate::closed_vs_quadrature);
}

#[test]
fn criterion_03_bc_identities() {
    run("bc-identities", validate::bc_identities);
}

#[test]
fn criterion_04_bc_moment() {
    run("bc-moment", validate::bc_moment);
}

#[test]
fn criterion_05_picard() {
    run("picard", validate::picard);
}

#[test]
fn criterion_06_mc_moments() {
    run("mc-moments", validate::mc_moments);
}

#[test]
fn criterion_07_mc_mean() {
    run("mc-mean", validate::mc_mean);
}

#[test]
fn criterion_08_growth_transition() {
    run("growth-transition", validate::growth_transition);
}

#[test]
fn criterion_09_lyapunov() {
    run("lyapunov", validate::lyapunov);
}

#[test]
fn criterion_10_holder() {
    run("holder", validate::holder);
}

#[test]
fn criterion_11_bound_sandwich() {
    run("bound-sandwich", validate::bound_sandwich);
}

#[test]
fn criterion_12_determinism() {
    run("determinism", validate::determinism);
}
