use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use mesodyn::diagnostics::{
    critical_point, euler_lagrange_residual, flux_distribution, invariant_report,
    CriticalPointSpec, FluxInput,
};
use mesodyn::export::{
    diagnostics_csv, format_number, key_value_csv, residual_csv, trajectory_csv,
};
use mesodyn::fixed::{evolve, integrate_direct, SolverTag, Trajectory};
use mesodyn::linalg::{ComplexMatrix, HermitianMatrix, UnitaryMatrix, C64};
use mesodyn::moving::{weak_residual, AtimeForm, MovingScenario};
use mesodyn::scenario::{json_digest, validate_scenario, ScenarioConfig};
use mesodyn::verify::{suite, Bound, CheckOutcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::output::{csv_field, CheckStatus, OutputDir, RunManifest};
use crate::{CliError, Command, Overrides, Verb};

/// Largest cross-solver distance `compare` accepts.
pub const COMPARE_TOLERANCE: f64 = 1e-6;

/// What a verb produced before the manifest is written. `failure` is set
/// when the verb stopped early but still left partial outputs behind.
struct VerbOutcome {
    digest: String,
    status: Vec<CheckStatus>,
    failure: Option<CliError>,
}

impl VerbOutcome {
    fn done(digest: String, status: Vec<CheckStatus>) -> Self {
        VerbOutcome {
            digest,
            status,
            failure: None,
        }
    }
}

/// Executes `cmd`, writes its outputs and `run.json`, and returns the
/// manifest. Check failures are reported through the manifest; rank loss
/// returns [`CliError::NearSingular`] after the partial outputs and the
/// manifest are on disk.
pub fn run(cmd: &Command) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let mut out = OutputDir::create(&cmd.output_dir)?;
    let outcome = match cmd.verb {
        Verb::Simulate => simulate(cmd, &mut out)?,
        Verb::Compare => compare(cmd, &mut out)?,
        Verb::Critical => critical(cmd, &mut out)?,
        Verb::Moving => moving(cmd, &mut out)?,
        Verb::Flux => flux(cmd, &mut out)?,
        Verb::Verify => verify(cmd, &mut out)?,
    };
    let manifest = RunManifest {
        verb: cmd.verb.as_str().to_owned(),
        scenario_digest: outcome.digest,
        tool_version: format!("mesodyn {}", env!("CARGO_PKG_VERSION")),
        wall_time: start.elapsed().as_secs_f64(),
        outputs: out.written(),
        status: outcome.status,
    };
    out.write_manifest(&manifest)?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

fn read_config(cmd: &Command) -> Result<String, CliError> {
    let path = cmd.config_path.as_deref().ok_or_else(|| {
        CliError::Usage(format!("`{}` requires --config PATH", cmd.verb.as_str()))
    })?;
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_json<T: for<'de> Deserialize<'de>>(
    text: &str,
    path: Option<&Path>,
) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| {
        let name = path.map(|p| p.display().to_string()).unwrap_or_default();
        CliError::ConfigInvalid(format!("{name}: {e}"))
    })
}

fn apply_overrides(cfg: &mut ScenarioConfig, o: &Overrides) {
    if let Some(dt) = o.dt {
        cfg.dt = dt;
    }
    if let Some(t_end) = o.t_end {
        cfg.t_end = t_end;
    }
    if let Some(hbar) = o.hbar {
        cfg.hbar = hbar;
    }
    if let Some(floor) = o.pd_floor {
        cfg.pd_floor = floor;
    }
}

/// Loads the fixed-domain scenario, applies overrides and runs the full
/// validation, positive definiteness of `H` included.
fn load_scenario(cmd: &Command) -> Result<ScenarioConfig, CliError> {
    let text = read_config(cmd)?;
    let mut cfg: ScenarioConfig = parse_json(&text, cmd.config_path.as_deref())?;
    apply_overrides(&mut cfg, &cmd.overrides);
    validate_scenario(&cfg)
        .into_result()
        .map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    Ok(cfg)
}

fn trajectory_name(tag: SolverTag) -> String {
    format!("trajectory_{}.csv", tag.as_str())
}

/// Writes the trajectory (with drift columns) and its diagnostics table.
fn write_trajectory(
    out: &mut OutputDir,
    traj: &Trajectory,
    cfg: &ScenarioConfig,
) -> Result<(), CliError> {
    let report = invariant_report(traj, cfg)?;
    let tag = traj.solver_tag.as_str();
    out.write(
        &trajectory_name(traj.solver_tag),
        &trajectory_csv(traj, Some(&report))?,
    )?;
    out.write(&format!("diagnostics_{tag}.csv"), &diagnostics_csv(&report))?;
    Ok(())
}

/// Runs one solver. A direct run that loses rank still returns the states
/// computed so far together with the error.
fn solve(
    cfg: &ScenarioConfig,
    tag: SolverTag,
    terms: usize,
) -> Result<(Trajectory, Option<CliError>), CliError> {
    match tag {
        SolverTag::Direct => {
            let run = integrate_direct(cfg)?;
            Ok((run.trajectory, run.failure.map(CliError::from)))
        }
        other => Ok((evolve(cfg, other, terms)?, None)),
    }
}

fn simulate(cmd: &Command, out: &mut OutputDir) -> Result<VerbOutcome, CliError> {
    let cfg = load_scenario(cmd)?;
    let tag = cmd.overrides.solver.unwrap_or(SolverTag::Factorized);
    let (traj, failure) = solve(&cfg, tag, cmd.overrides.terms)?;
    write_trajectory(out, &traj, &cfg)?;
    let status = match &failure {
        Some(e) => vec![CheckStatus::failed(tag.as_str(), e.to_string())],
        None => {
            let report = invariant_report(&traj, &cfg)?;
            let mut s = vec![CheckStatus::info(
                "max_kk_drift",
                report.max_kk_star_drift(),
            )];
            if let Some(d) = report.max_trace_khk_drift() {
                s.push(CheckStatus::info("max_trace_khk_drift", d));
            }
            s
        }
    };
    Ok(VerbOutcome {
        digest: cfg.digest(),
        status,
        failure,
    })
}

fn compare(cmd: &Command, out: &mut OutputDir) -> Result<VerbOutcome, CliError> {
    let cfg = load_scenario(cmd)?;
    let mut tags = vec![SolverTag::Direct, SolverTag::Factorized];
    if cfg.has_constant_coefficients() {
        tags.push(SolverTag::Series);
    }
    let mut runs = Vec::new();
    for tag in tags {
        let (traj, failure) = solve(&cfg, tag, cmd.overrides.terms)?;
        write_trajectory(out, &traj, &cfg)?;
        if let Some(e) = failure {
            return Ok(VerbOutcome {
                digest: cfg.digest(),
                status: vec![CheckStatus::failed(tag.as_str(), e.to_string())],
                failure: Some(e),
            });
        }
        runs.push(traj);
    }
    let mut rows = Vec::new();
    let mut status = Vec::new();
    for (i, a) in runs.iter().enumerate() {
        for b in &runs[i + 1..] {
            let pair = format!("{}-{}", a.solver_tag.as_str(), b.solver_tag.as_str());
            let d = a.max_distance(b)?;
            status.push(CheckStatus::at_most(&pair, d, COMPARE_TOLERANCE));
            rows.push((pair, d));
        }
    }
    out.write(
        "compare.csv",
        &key_value_csv(["pair", "max_distance"], &rows),
    )?;
    Ok(VerbOutcome::done(cfg.digest(), status))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CriticalConfig {
    hamiltonian: HermitianMatrix,
    nu: f64,
    b: f64,
    /// Defaults to the identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unitary: Option<ComplexMatrix>,
}

fn matrix_csv(m: &ComplexMatrix) -> String {
    let mut s = String::from("i,j,re,im\n");
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m[(i, j)];
            let _ = writeln!(s, "{i},{j},{},{}", format_number(z.re), format_number(z.im));
        }
    }
    s
}

fn critical(cmd: &Command, out: &mut OutputDir) -> Result<VerbOutcome, CliError> {
    let text = read_config(cmd)?;
    let config: CriticalConfig = parse_json(&text, cmd.config_path.as_deref())?;
    let n = config.hamiltonian.dim();
    let unitary = match &config.unitary {
        Some(u) => UnitaryMatrix::new(u.clone())?,
        None => UnitaryMatrix::identity(n),
    };
    let spec = CriticalPointSpec {
        nu: config.nu,
        unitary,
        hamiltonian: config.hamiltonian.clone(),
        b: config.b,
    };
    let k = critical_point(&spec)?;
    let residual = euler_lagrange_residual(&k, &spec.hamiltonian, spec.b, spec.nu)?;
    let relative = residual / k.frobenius_norm();
    out.write("critical_point.csv", &matrix_csv(&k))?;
    out.write(
        "critical_residual.csv",
        &key_value_csv(
            ["quantity", "value"],
            &[
                ("residual".into(), residual),
                ("relative_residual".into(), relative),
            ],
        ),
    )?;
    Ok(VerbOutcome::done(
        json_digest(&config),
        vec![CheckStatus::at_most(
            "euler_lagrange_residual",
            relative,
            1e-11,
        )],
    ))
}

fn moving(cmd: &Command, out: &mut OutputDir) -> Result<VerbOutcome, CliError> {
    let text = read_config(cmd)?;
    let mut scenario: MovingScenario = parse_json(&text, cmd.config_path.as_deref())?;
    let o = &cmd.overrides;
    if let Some(dt) = o.dt {
        scenario.dt = dt;
    }
    if let Some(t_end) = o.t_end {
        scenario.t_end = t_end;
    }
    if let Some(hbar) = o.hbar {
        scenario.hbar = hbar;
    }
    if let Some(floor) = o.pd_floor {
        scenario.pd_floor = floor;
    }
    let problem = scenario.problem()?;
    let form = if cmd.literal_atime {
        AtimeForm::Literal
    } else {
        AtimeForm::PolarCorrected
    };
    let solution = problem.solve(form)?;
    let records = weak_residual(
        &solution.states,
        &problem.space,
        &problem.field,
        problem.hbar,
        problem.pd_floor,
    )?;
    out.write("moving_residual.csv", &residual_csv(&records))?;
    let gram0 = solution.states[0]
        .k
        .gram_outer()
        .as_matrix()
        .frobenius_norm();
    let max =
        |f: fn(&mesodyn::moving::ResidualRecord) -> f64| records.iter().map(f).fold(0.0, f64::max);
    let status = vec![
        CheckStatus::at_most("image_drift", max(|r| r.image_drift), 1e-10),
        CheckStatus::at_most("kk_drift", max(|r| r.radial_drift) / gram0, 1e-9),
        CheckStatus::info("max_weak_residual", max(|r| r.weak_residual)),
    ];
    Ok(VerbOutcome::done(scenario.digest(), status))
}

#[derive(Debug, Serialize, Deserialize)]
struct ComplexVector {
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluxConfig {
    k: ComplexMatrix,
    upsilon: ComplexVector,
    total_flux: f64,
}

fn flux(cmd: &Command, out: &mut OutputDir) -> Result<VerbOutcome, CliError> {
    let text = read_config(cmd)?;
    let config: FluxConfig = parse_json(&text, cmd.config_path.as_deref())?;
    if config.upsilon.re.len() != config.upsilon.im.len() {
        return Err(CliError::ConfigInvalid(format!(
            "upsilon has {} real and {} imaginary parts",
            config.upsilon.re.len(),
            config.upsilon.im.len()
        )));
    }
    let input = FluxInput {
        upsilon: config
            .upsilon
            .re
            .iter()
            .zip(&config.upsilon.im)
            .map(|(&re, &im)| C64::new(re, im))
            .collect(),
        total_flux: config.total_flux,
    };
    let v = flux_distribution(&config.k, &input)?;
    let rows: Vec<(String, f64)> = v
        .iter()
        .enumerate()
        .map(|(i, x)| (i.to_string(), *x))
        .collect();
    out.write("flux.csv", &key_value_csv(["index", "flux"], &rows))?;
    let gap = (v.iter().sum::<f64>() - input.total_flux).abs() / input.total_flux.max(1.0);
    Ok(VerbOutcome::done(
        json_digest(&config),
        vec![CheckStatus::at_most("flux_normalization", gap, 1e-12)],
    ))
}

fn verify_csv(outcomes: &[CheckOutcome]) -> String {
    let mut s = String::from("check,value,threshold,bound,passed,error\n");
    for o in outcomes {
        let bound = match o.bound {
            Bound::AtMost => "at_most",
            Bound::AtLeast => "at_least",
        };
        let _ = writeln!(
            s,
            "{},{},{},{bound},{},{}",
            o.name,
            format_number(o.value),
            format_number(o.threshold),
            o.passed,
            csv_field(o.error.as_deref().unwrap_or(""))
        );
    }
    s
}

fn verify(cmd: &Command, out: &mut OutputDir) -> Result<VerbOutcome, CliError> {
    let seed = cmd.overrides.seed;
    let checks = suite();
    // Each check draws from its own stream, so the fan-out order does not
    // affect the numbers.
    let outcomes: Vec<CheckOutcome> = checks
        .par_iter()
        .enumerate()
        .map(|(i, c)| c.evaluate(seed, i as u64))
        .collect();
    out.write("verify.csv", &verify_csv(&outcomes))?;
    let names: Vec<&str> = checks.iter().map(|c| c.name).collect();
    let digest =
        json_digest(&serde_json::json!({ "verb": "verify", "seed": seed, "checks": names }));
    let status = outcomes
        .iter()
        .map(|o| CheckStatus {
            name: o.name.to_owned(),
            passed: o.passed,
            value: o.value.is_finite().then_some(o.value),
            threshold: Some(o.threshold),
            detail: o.error.clone(),
        })
        .collect();
    Ok(VerbOutcome::done(digest, status))
}
