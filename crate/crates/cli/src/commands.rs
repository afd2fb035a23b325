//! Subcommand implementations.  Each takes a fully resolved [`RunConfig`],
//! writes its artifacts plus a manifest into the output directory, and maps
//! failures onto the stable exit-code contract.


use sheq_core::growth::{empirical_growth_index, growth_index_bounds, GrowthError, GrowthOptions};
use sheq_core::kernels::GrowthEnvelope;
use sheq_core::measure::InitialMeasure;
use sheq_core::moments::{
    bc_two_point_delta_integral, bc_two_point_lebesgue_integral, moment_upper_bound,
    second_moment_exact, second_moment_lower, second_moment_quadrature, two_point_delta,
    two_point_general, two_point_lebesgue, CorrelationCacheConfig, MomentRequest,
};
use sheq_core::picard::{picard_second_moment, PicardGrid, PicardStatus};
use sheq_core::sim::{
    holder_from_variogram, dyadic_lags, Direction, LatticeField, MomentEstimate, RhoSpec, Scheme,
    SimConfig, SimWorkspace, Boundary,
};

use crate::config::{prepare_output, RunConfig};
use crate::measure_arg::{parse_measure, MeasureArg};
use crate::output::{Cell, Format, Table};
use crate::parallel::map_replicates;
use crate::{CliError, ExitStatus};

fn measure_from(config: &RunConfig) -> Result<MeasureArg, CliError> {
    let spec = config
        .get("measure")
        .ok_or_else(|| CliError::config("missing required parameter 'measure'"))?;
    parse_measure(spec)
}

fn format_from(config: &RunConfig) -> Result<Format, CliError> {
    Format::parse(config.str_or("format", "csv"))
}

fn quasi_envelope(config: &RunConfig) -> Result<(f64, f64, f64, GrowthEnvelope), CliError> {
    let nu = config.f64_or("nu", 1.0)?;
    let lambda = config.f64_or("lambda", 1.0)?;
    let vv = config.f64_or("vv", 0.0)?;
    if !(nu > 0.0) {
        return Err(CliError::config("nu must be positive"));
    }
    let env = GrowthEnvelope::quasi_linear(lambda, vv)
        .map_err(|e| CliError::config(format!("invalid nonlinearity: {e}")))?;
    Ok((nu, lambda, vv, env))
}

// ---------------------------------------------------------------------------
// moments
// ---------------------------------------------------------------------------

pub fn cmd_moments(config: &RunConfig) -> Result<(), CliError> {
    let mu = measure_from(config)?.require_measure()?;
    let (nu, _lambda, _vv, env) = quasi_envelope(config)?;
    let order = config.u64_or("p", 2)? as u32;
    let ts = config.f64_list_or("t", &[])?;
    let xs = config.f64_list_or("x", &[])?;
    if ts.is_empty() || xs.is_empty() {
        return Err(CliError::config("moments needs t and x (comma-separated lists accepted)"));
    }
    let out_dir = prepare_output("moments", config)?;
    let format = format_from(config)?;

    let mut table = Table::new(vec![
        "formula_id",
        "t",
        "x",
        "y",
        "p",
        "value",
        "branch",
        "tolerance_met",
    ]);
    for &t in &ts {
        for &x in &xs {
            let req = MomentRequest::new(mu.clone(), env, nu, order, t, x)?;
            let mut push = |id: &str, p: u32, value: f64, branch: &str| {
                table.push(vec![
                    Cell::Str(id.into()),
                    Cell::Num(t),
                    Cell::Num(x),
                    Cell::Null,
                    Cell::Int(i64::from(p)),
                    Cell::Num(value),
                    Cell::Str(branch.into()),
                    Cell::Bool(true),
                ]);
            };
            if order == 2 {
                push("second-moment-exact", 2, second_moment_exact(&req)?, "closed");
                push("second-moment-quadrature", 2, second_moment_quadrature(&req)?, "quadrature");
                push("second-moment-lower", 2, second_moment_lower(&req)?, "lower");
            }
            let bound = moment_upper_bound(&req)?;
            let branch = format!(
                "{}{}",
                bound.branch,
                bound.bdg.map(|b| format!(" z_p={} a={}", b.z, b.a)).unwrap_or_default()
            );
            push("moment-upper-sq-norm", order, bound.value, &branch);
            push("moment-upper-pth-power", order, bound.pth_power(order), &branch);
        }
    }
    table.write(&out_dir.join(format!("moments.{}", format.extension())), format)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// twopoint
// ---------------------------------------------------------------------------

pub fn cmd_twopoint(config: &RunConfig) -> Result<(), CliError> {
    let mu = measure_from(config)?.require_measure()?;
    let (nu, lambda, vv, env) = quasi_envelope(config)?;
    let ts = config.f64_list_or("t", &[])?;
    let x = config.f64_required("x")?;
    let y = config.f64_required("y")?;
    if ts.is_empty() {
        return Err(CliError::config("twopoint needs t"));
    }
    let cache = CorrelationCacheConfig {
        t_cells: config.usize_or("cache-t", 200)?,
        x_cells: config.usize_or("cache-x", 400)?,
    };
    let method = config.str_or("method", "auto").to_string();
    let out_dir = prepare_output("twopoint", config)?;
    let format = format_from(config)?;

    let is_lebesgue = mu.density().map(|d| matches!(d, sheq_core::measure::DensityKind::Lebesgue))
        == Some(true)
        && mu.atoms().is_empty();
    let is_unit_dirac = mu.density().is_none()
        && mu.atoms().len() == 1
        && mu.atoms()[0].mass == 1.0
        && mu.atoms()[0].location == 0.0;

    let mut table = Table::new(vec![
        "formula_id",
        "t",
        "x",
        "y",
        "p",
        "value",
        "branch",
        "tolerance_met",
    ]);
    for &t in &ts {
        let mut push = |id: &str, value: f64, branch: &str| {
            table.push(vec![
                Cell::Str(id.into()),
                Cell::Num(t),
                Cell::Num(x),
                Cell::Num(y),
                Cell::Int(2),
                Cell::Num(value),
                Cell::Str(branch.into()),
                Cell::Bool(true),
            ]);
        };
        if method != "general" {
            if is_lebesgue {
                push("two-point-closed", two_point_lebesgue(nu, lambda, vv, t, x, y), "lebesgue");
                if lambda == 1.0 && vv == 0.0 {
                    push("bc-integral", bc_two_point_lebesgue_integral(nu, t, x, y)?, "lebesgue");
                }
            }
            if is_unit_dirac {
                push("two-point-closed", two_point_delta(nu, lambda, vv, t, x, y), "delta");
                if lambda == 1.0 && vv == 0.0 {
                    push("bc-integral", bc_two_point_delta_integral(nu, t, x, y)?, "delta");
                }
            }
        }
        if method != "closed" {
            let req = MomentRequest::new(mu.clone(), env, nu, 2, t, x)?;
            push("two-point-general", two_point_general(&req, y, &cache)?, "general");
        }
    }
    table.write(&out_dir.join(format!("twopoint.{}", format.extension())), format)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// growth
// ---------------------------------------------------------------------------

pub fn cmd_growth(config: &RunConfig) -> Result<(), CliError> {
    let mu = measure_from(config)?.require_measure()?;
    let (nu, lambda, vv, env) = quasi_envelope(config)?;
    let order = config.u64_or("p", 2)? as u32;
    let opts = GrowthOptions {
        t_max: config.f64_or("t-max", 100.0)?,
        t_samples: config.usize_or("t-samples", 5)?,
        alpha_margin: config.f64_or("alpha-margin", 0.2)?,
    };
    let out_dir = prepare_output("growth", config)?;

    let beta = mu.exponential_tail_rate();
    let (lower, upper) =
        growth_index_bounds(order, &env, beta, nu).map_err(|e| CliError::config(e.to_string()))?;

    let empirical = if vv == 0.0 {
        match empirical_growth_index(&mu, nu, lambda, &opts) {
            Ok(report) => Some(Ok(report)),
            Err(GrowthError::NoSignChange) => Some(Err(GrowthError::NoSignChange)),
            Err(e) => return Err(CliError::config(e.to_string())),
        }
    } else {
        None
    };

    // GrowthReport as JSON (always) and the scanned rates as CSV.
    let mut json = String::from("{\n");
    json.push_str(&format!("  \"p\": {},\n", order));
    json.push_str(&format!(
        "  \"bounds\": [{}, {}],\n",
        crate::output::json_number(lower),
        crate::output::json_number(upper)
    ));
    json.push_str(&format!("  \"tail_rate\": {},\n", crate::output::json_number(beta)));
    match &empirical {
        Some(Ok(report)) => {
            json.push_str(&format!(
                "  \"transition\": {},\n  \"bracket\": [{}, {}],\n  \"max_fit_residual\": {},\n",
                crate::output::json_number(report.transition),
                crate::output::json_number(report.bracket.0),
                crate::output::json_number(report.bracket.1),
                crate::output::json_number(report.max_fit_residual),
            ));
            let pairs: Vec<String> = report
                .per_alpha_rates
                .iter()
                .map(|(a, r)| {
                    format!("[{}, {}]", crate::output::json_number(*a), crate::output::json_number(*r))
                })
                .collect();
            json.push_str(&format!("  \"per_alpha\": [{}],\n", pairs.join(", ")));
            json.push_str("  \"status\": \"ok\"\n");
        }
        Some(Err(_)) => {
            json.push_str("  \"transition\": null,\n  \"per_alpha\": [],\n");
            json.push_str("  \"status\": \"no-sign-change\"\n");
        }
        None => {
            json.push_str("  \"transition\": null,\n  \"per_alpha\": [],\n");
            json.push_str("  \"status\": \"offsets-force-infinite-indices\"\n");
        }
    }
    json.push_str("}\n");
    std::fs::write(out_dir.join("growth.json"), json)?;

    if let Some(Ok(report)) = &empirical {
        let mut table = Table::new(vec!["alpha", "rate"]);
        for &(a, r) in &report.per_alpha_rates {
            table.push(vec![Cell::Num(a), Cell::Num(r)]);
        }
        table.write(&out_dir.join("growth_rates.csv"), Format::Csv)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub struct SimSetup {
    pub workspace: SimWorkspace,
    pub rho: RhoSpec,
}

pub fn sim_setup(config: &RunConfig, mu: &InitialMeasure) -> Result<SimSetup, CliError> {
    let nu = config.f64_or("nu", 1.0)?;
    let lambda = config.f64_or("lambda", 1.0)?;
    let vv = config.f64_or("vv", 0.0)?;
    let dx = config.f64_or("dx", 0.05)?;
    let dt = config.f64_or("dt", dx * dx / 4.0)?;
    let horizon = config.f64_or("horizon", 0.5)?;
    let half_width = config.f64_or("half-width", {
        // Certified truncation default: queries near the origin see less
        // than 1e-8 of boundary influence.
        6.0 * (nu * horizon).sqrt() + 1.0
    })?;
    let replicates = config.u64_or("replicates", 100)? as u32;
    let seed = config.u64_or("seed", 0)?;
    let scheme = match config.str_or("scheme", "exponential_mild") {
        "exponential_mild" => Scheme::ExponentialMild,
        "explicit_fd" => Scheme::ExplicitFd,
        other => return Err(CliError::config(format!("unknown scheme '{other}'"))),
    };
    let boundary = match config.str_or("boundary", "dirichlet_zero") {
        "dirichlet_zero" => Boundary::DirichletZero,
        "periodic" => Boundary::Periodic,
        other => return Err(CliError::config(format!("unknown boundary '{other}'"))),
    };
    let rho = if vv == 0.0 { RhoSpec::pam(lambda) } else { RhoSpec::quasi_linear(lambda, vv) };
    let sim_config = SimConfig { half_width, dx, dt, horizon, replicates, seed, scheme, boundary };
    let workspace = SimWorkspace::new(mu, rho.clone(), nu, sim_config)?;
    Ok(SimSetup { workspace, rho })
}

pub fn cmd_simulate(config: &RunConfig) -> Result<(), CliError> {
    let mu = measure_from(config)?.require_measure()?;
    let setup = sim_setup(config, &mu)?;
    let ws = &setup.workspace;
    let out_dir = prepare_output("simulate", config)?;
    let horizon = ws.config().horizon;
    let snapshots = config.f64_list_or("snapshot-t", &[horizon])?;
    let binary_fields = config.u64_or("binary-fields", 0)? as u32;

    // Probe points: "t,x" or "t,x,y" entries separated by ';'.
    let mut probes: Vec<(f64, f64, Option<f64>)> = Vec::new();
    if let Some(spec) = config.get("probe") {
        for chunk in spec.split(';') {
            let parts: Vec<&str> = chunk.split(',').map(str::trim).collect();
            let parse = |s: &str| -> Result<f64, CliError> {
                s.parse().map_err(|_| CliError::config(format!("bad probe component '{s}'")))
            };
            match parts.as_slice() {
                [t, x] => probes.push((parse(t)?, parse(x)?, None)),
                [t, x, y] => probes.push((parse(t)?, parse(x)?, Some(parse(y)?))),
                _ => return Err(CliError::config("probe entries must be 't,x' or 't,x,y'")),
            }
        }
    }
    // Truncation certificate: probes must keep 6 sqrt(nu T) of clearance
    // from the boundary so the missing tails stay below 1e-8.
    let margin = 6.0 * (ws.nu() * horizon).sqrt();
    for &(_, x, y) in &probes {
        let reach = x.abs().max(y.map(f64::abs).unwrap_or(0.0));
        if reach + margin > ws.config().half_width {
            return Err(CliError::config(format!(
                "probe at |x| = {reach} needs half-width >= {} (6 sqrt(nu T) clearance)",
                reach + margin
            )));
        }
    }

    // One parallel pass collects snapshot rows and probe samples.
    struct PerReplicate {
        snapshots: Vec<Vec<f64>>,
        probe_values: Vec<(f64, Option<f64>)>,
    }
    let snapshot_layers: Vec<usize> = snapshots
        .iter()
        .map(|&t| ((t / ws.config().dt).round() as usize).clamp(1, ws.lattice_shape().0))
        .collect();
    let probe_points = probes.clone();
    let per_rep: Vec<PerReplicate> = map_replicates(ws, |field: &LatticeField| {
        let snapshots = snapshot_layers.iter().map(|&n| field.layer(n).to_vec()).collect();
        let probe_values = probe_points
            .iter()
            .map(|&(t, x, y)| {
                let px = field.snap(t, x).map(|p| field.value(&p)).unwrap_or(f64::NAN);
                let py = y.map(|yy| field.snap(t, yy).map(|p| field.value(&p)).unwrap_or(f64::NAN));
                (px, py)
            })
            .collect();
        PerReplicate { snapshots, probe_values }
    })?;

    // fields.csv: (t, x, replicate, value) at the snapshot times.
    let mut table = Table::new(vec!["t", "x", "replicate", "value"]);
    for (rep, data) in per_rep.iter().enumerate() {
        for (si, layer) in data.snapshots.iter().enumerate() {
            let t = snapshot_layers[si] as f64 * ws.config().dt;
            for (j, &v) in layer.iter().enumerate() {
                table.push(vec![
                    Cell::Num(t),
                    Cell::Num(ws.site_x(j)),
                    Cell::Int(rep as i64),
                    Cell::Num(v),
                ]);
            }
        }
    }
    table.write(&out_dir.join("fields.csv"), Format::Csv)?;

    // Optional full binary snapshots for the first few replicates.
    for rep in 0..binary_fields.min(ws.config().replicates) {
        let field = ws.replicate(rep)?;
        crate::output::write_field_binary(&field, &out_dir.join(format!("field-r{rep:04}.she1")))?;
    }

    // Probe moment estimates.
    if !probes.is_empty() {
        let mut table = Table::new(vec!["p", "t", "x", "y", "mean", "stderr", "replicates"]);
        for (pi, &(t, x, y)) in probes.iter().enumerate() {
            let xs: Vec<f64> = per_rep.iter().map(|d| d.probe_values[pi].0).collect();
            for order in [1u32, 2] {
                let est = MomentEstimate::from_samples(&xs, order)?;
                table.push(vec![
                    Cell::Int(i64::from(order)),
                    Cell::Num(t),
                    Cell::Num(x),
                    Cell::Null,
                    Cell::Num(est.mean),
                    Cell::Num(est.stderr),
                    Cell::Int(i64::from(est.replicates)),
                ]);
            }
            if let Some(yy) = y {
                let pairs: Vec<(f64, f64)> =
                    per_rep.iter().map(|d| (d.probe_values[pi].0, d.probe_values[pi].1.unwrap())).collect();
                let est = MomentEstimate::from_product_samples(&pairs)?;
                table.push(vec![
                    Cell::Int(2),
                    Cell::Num(t),
                    Cell::Num(x),
                    Cell::Num(yy),
                    Cell::Num(est.mean),
                    Cell::Num(est.stderr),
                    Cell::Int(i64::from(est.replicates)),
                ]);
            }
        }
        table.write(&out_dir.join("mc_moments.csv"), Format::Csv)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// holder
// ---------------------------------------------------------------------------

pub fn cmd_holder(config: &RunConfig) -> Result<(), CliError> {
    let mu = measure_from(config)?.require_measure()?;
    let t0 = config.f64_required("t0")?;
    if !(t0 > 0.0) {
        return Err(CliError::config("holder estimation requires t0 > 0 (strictly away from the time origin)"));
    }
    let direction = match config.str_or("direction", "space") {
        "space" => Direction::Space,
        "time" => Direction::Time,
        other => return Err(CliError::config(format!("unknown direction '{other}'"))),
    };
    let lag_count = config.usize_or("lags", 4)?;
    let lags = dyadic_lags(direction, lag_count);

    // Size the horizon so the time window fits.
    let dx = config.f64_or("dx", 0.025)?;
    let dt = config.f64_or("dt", dx * dx / 4.0)?;
    let needed_horizon = match direction {
        Direction::Space => t0,
        Direction::Time => t0 + (*lags.last().unwrap() + 1) as f64 * dt,
    };
    let mut local = config.clone();
    local.set("dx", dx.to_string());
    local.set("dt", dt.to_string());
    if config.get("horizon").is_none() {
        local.set("horizon", needed_horizon.to_string());
    }
    if config.get("replicates").is_none() {
        local.set("replicates", "200");
    }
    let setup = sim_setup(&local, &mu)?;
    let ws = &setup.workspace;
    let out_dir = prepare_output("holder", config)?;

    let sums: Vec<Vec<(f64, u64)>> = map_replicates(ws, |field| {
        let mut acc = vec![(0.0f64, 0u64); lags.len()];
        // Accumulation failures surface as empty counts below.
        let _ = sheq_core::sim::variogram_accumulate(field, direction, t0, &lags, &mut acc);
        acc
    })?;
    let mut merged = vec![(0.0f64, 0u64); lags.len()];
    for rep in &sums {
        for (m, r) in merged.iter_mut().zip(rep.iter()) {
            m.0 += r.0;
            m.1 += r.1;
        }
    }
    if merged.iter().any(|&(_, n)| n == 0) {
        return Err(CliError::from(sheq_core::sim::SimError::WindowTooNarrow { lags: lag_count }));
    }
    let spacing = match direction {
        Direction::Space => ws.config().dx,
        Direction::Time => ws.config().dt,
    };
    let lag_values: Vec<(f64, f64)> =
        lags.iter().zip(&merged).map(|(&l, &(s, n))| (l as f64 * spacing, s / n as f64)).collect();
    let est = holder_from_variogram(&lag_values)?;

    let dir_name = match direction {
        Direction::Space => "space",
        Direction::Time => "time",
    };
    let mut json = String::from("{\n");
    json.push_str(&format!("  \"direction\": {},\n", crate::output::json_string(dir_name)));
    json.push_str(&format!("  \"t0\": {},\n", crate::output::json_number(t0)));
    json.push_str(&format!("  \"exponent\": {},\n", crate::output::json_number(est.exponent)));
    json.push_str(&format!("  \"fit_residual\": {},\n", crate::output::json_number(est.residual)));
    let pairs: Vec<String> = est
        .lags
        .iter()
        .map(|(h, v)| format!("[{}, {}]", crate::output::json_number(*h), crate::output::json_number(*v)))
        .collect();
    json.push_str(&format!("  \"variogram\": [{}]\n", pairs.join(", ")));
    json.push_str("}\n");
    std::fs::write(out_dir.join("holder.json"), json)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// picard (exposed through `validate`, but useful standalone)
// ---------------------------------------------------------------------------

pub fn cmd_picard(config: &RunConfig) -> Result<(), CliError> {
    let input = measure_from(config)?.into_picard_input();
    let nu = config.f64_or("nu", 1.0)?;
    let lambda = config.f64_or("lambda", 1.0)?;
    let vv = config.f64_or("vv", 0.0)?;
    let grid = PicardGrid::new(
        config.f64_or("horizon", 1.0)?,
        config.usize_or("t-cells", 200)?,
        config.f64_or("half-width", 5.0)?,
        config.usize_or("x-cells", 400)?,
    );
    let out_dir = prepare_output("picard", config)?;
    let outcome = picard_second_moment(&input, nu, lambda, vv, &grid, None)?;
    let status = match outcome.status {
        PicardStatus::Converged { iterations } => format!("converged after {iterations} iterations"),
        PicardStatus::Diverged { iterations } => format!("diverged after {iterations} iterations"),
    };
    let mut table = Table::new(vec!["iteration", "sup_change"]);
    for (i, c) in outcome.sup_changes.iter().enumerate() {
        table.push(vec![Cell::Int((i + 1) as i64), Cell::Num(*c)]);
    }
    table.write(&out_dir.join("picard_convergence.csv"), Format::Csv)?;
    std::fs::write(out_dir.join("picard_status.txt"), format!("{status}\n"))?;
    if matches!(outcome.status, PicardStatus::Diverged { .. }) {
        return Err(CliError {
            status: ExitStatus::Divergence,
            message: format!("picard iteration {status}"),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

pub fn cmd_validate(config: &RunConfig) -> Result<(), CliError> {
    let ctx = crate::validate::ValidateCtx {
        quick: config.str_or("quick", "false") == "true",
        seed: config.u64_or("seed", crate::validate::ValidateCtx::default().seed)?,
    };
    let only: Option<Vec<String>> = config
        .get("only")
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let out_dir = prepare_output("validate", config)?;

    let results = crate::validate::run_campaign(&ctx, only.as_deref()).map_err(CliError::config)?;
    let mut table = Table::new(vec!["criterion", "check", "error", "tolerance", "pass", "mode"]);
    let mode = if ctx.quick { "quick" } else { "full" };
    for result in &results {
        println!("{}", result.summary_line());
        for check in &result.checks {
            table.push(vec![
                Cell::Str(result.id.into()),
                Cell::Str(check.label.clone()),
                Cell::Num(check.error),
                Cell::Num(check.tolerance),
                Cell::Bool(check.pass),
                Cell::Str(mode.into()),
            ]);
        }
    }
    table.write(&out_dir.join("report.csv"), Format::Csv)?;

    let all_pass = !results.is_empty() && results.iter().all(|r| r.pass());
    if all_pass {
        println!("all {} criteria passed", results.len());
        Ok(())
    } else {
        Err(CliError {
            status: ExitStatus::ValidationFailure,
            message: format!(
                "{} of {} criteria failed (report written to {})",
                results.iter().filter(|r| !r.pass()).count(),
                results.len(),
                out_dir.join("report.csv").display()
            ),
        })
    }
}
