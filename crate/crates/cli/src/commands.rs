use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use gauge_rig_core::constraint_chain::{assemble_tension_system_with, residuals, TensionSystem};
use gauge_rig_core::dynamics::{integrate_with, prepare_initial_data_with, IntegrationOptions, PolicyShape, Trajectory};
use gauge_rig_core::gauge_lab::{classify_tension_functionals, gauge_fix as fix_gauge, gauge_orbit_sample_with, NamedPolicy};
use gauge_rig_core::io::{load_input, read_trajectory, write_atomic, write_reduced_csv, write_trajectory_csv, write_trajectory_json};
use gauge_rig_core::linalg::integer_form;
use gauge_rig_core::reduced_model::{reduce as reduce_point, reference_parameters};
use gauge_rig_core::{PhasePoint, RodFramework, Tolerances};

use crate::{AnalyzeArgs, CompareArgs, Format, GaugeFixArgs, InitialArgs, ReduceArgs, RunArgs, SimulateArgs};

fn tolerances() -> Result<Tolerances> {
    Tolerances::from_env().context("reading tolerance overrides")
}

fn initial_point(args: &InitialArgs, tol: &Tolerances) -> Result<(RodFramework, PhasePoint)> {
    let input = load_input(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let config = input
        .require_configuration()
        .with_context(|| format!("{} cannot be simulated", args.input.display()))?;
    let point = prepare_initial_data_with(&input.framework, config, args.omega, args.lambda, tol)
        .context("preparing initial data")?;
    Ok((input.framework, point))
}

fn options(run: &RunArgs, tol: &Tolerances) -> IntegrationOptions {
    IntegrationOptions {
        record_every: run.record_every.max(1),
        tolerances: *tol,
        ..IntegrationOptions::new(run.t_end, run.step)
    }
}

fn parse_policy(spec: &str) -> Result<PolicyShape> {
    spec.parse::<PolicyShape>().with_context(|| format!("--xi {spec}"))
}

/// Sends `write` to the file atomically, or to stdout.
fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> gauge_rig_core::Result<()>) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, write).with_context(|| format!("writing {}", path.display())),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

/// Human-readable lines go to stdout unless stdout carries the data.
fn say(data_on_stdout: bool, line: &str) {
    if data_on_stdout {
        eprintln!("{line}");
    } else {
        println!("{line}");
    }
}

fn resolve_format(format: Option<Format>, out: Option<&PathBuf>) -> Format {
    format.unwrap_or_else(|| match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    })
}

fn write_trajectory(fw: &RodFramework, traj: &Trajectory, out: Option<&PathBuf>, format: Format) -> Result<()> {
    emit(out.map(PathBuf::as_path), |w| match format {
        Format::Csv => write_trajectory_csv(fw, traj, w),
        Format::Json => write_trajectory_json(fw, traj, w),
    })
}

/// `0` for values at roundoff level, otherwise shortest round-trip form.
fn show(x: f64) -> String {
    if x.abs() < 1e-12 {
        "0".into()
    } else {
        format!("{x}")
    }
}

fn show_vector(v: &DVector<f64>) -> String {
    let entries: Vec<String> = v.iter().map(|x| show(*x)).collect();
    format!("({})", entries.join(","))
}

/// Directions are shown as their smallest integer multiple when rational.
fn show_direction(v: &DVector<f64>) -> String {
    match integer_form(v) {
        Some(ints) => format!("({})", ints.iter().map(i64::to_string).collect::<Vec<_>>().join(",")),
        None => show_vector(v),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Serialize)]
struct ResidualReport {
    c0: f64,
    c1: f64,
    c2: f64,
    c3: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    vertices: Vec<String>,
    edges: Vec<String>,
    /// Row-major, rows and columns in `edges` order.
    matrix: Vec<Vec<f64>>,
    /// Factor taking `matrix` to the integer matrix of the reference system.
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_normalization: Option<f64>,
    rhs: Vec<f64>,
    singular_values: Vec<f64>,
    rank: usize,
    gauge_dimension: usize,
    self_stress: Vec<Vec<f64>>,
    invariant_functionals: Vec<Vec<f64>>,
    solvable: bool,
    max_violation: f64,
    tensions: Vec<f64>,
    residuals: ResidualReport,
}

fn analyze_report(fw: &RodFramework, point: &PhasePoint, system: &TensionSystem) -> AnalyzeReport {
    let r = residuals(fw, point).max_abs();
    AnalyzeReport {
        vertices: fw.vertices().iter().map(|v| v.id.clone()).collect(),
        edges: (0..fw.edge_count()).map(|k| fw.edge_id(k)).collect(),
        matrix: rows(&system.matrix),
        reference_normalization: reference_parameters(fw)
            .ok()
            .map(|(m, ell)| gauge_rig_core::constraint_chain::reference_normalization(m, ell)),
        rhs: to_vec(&system.rhs),
        singular_values: to_vec(system.singular_values()),
        rank: system.rank,
        gauge_dimension: system.gauge_dimension(),
        self_stress: system.self_stress_basis.iter().map(to_vec).collect(),
        invariant_functionals: classify_tension_functionals(system).invariant.iter().map(to_vec).collect(),
        solvable: system.solvable,
        max_violation: system.max_violation,
        tensions: to_vec(point.tensions()),
        residuals: ResidualReport {
            c0: r[0],
            c1: r[1],
            c2: r[2],
            c3: r[3],
        },
    }
}

pub fn analyze(args: AnalyzeArgs) -> Result<ExitCode> {
    let tol = tolerances()?;
    let (fw, point) = initial_point(&args.initial, &tol)?;
    let system = assemble_tension_system_with(&fw, point.positions(), point.momenta(), &tol)?;
    let report = analyze_report(&fw, &point, &system);

    if let Some(out) = &args.out {
        emit_json(Some(out), &report)?;
    }
    if args.format == Some(Format::Json) {
        emit_json(None, &report)?;
        return Ok(ExitCode::SUCCESS);
    }

    println!("framework: {} masses, {} rods", fw.vertex_count(), fw.edge_count());
    println!("rank: {} of {}", system.rank, fw.edge_count());
    let stresses: Vec<String> = system.self_stress_basis.iter().map(show_direction).collect();
    if stresses.is_empty() {
        println!("gauge dimension: 0");
    } else {
        println!("gauge dimension: {}; self-stress: {}", system.gauge_dimension(), stresses.join(", "));
    }
    println!(
        "solvable: {} (violation {:.3e})",
        if system.solvable { "yes" } else { "no" },
        system.max_violation
    );
    println!("tensions: {}", show_vector(point.tensions()));
    let r = &report.residuals;
    println!("residuals: c0 {:.3e}, c1 {:.3e}, c2 {:.3e}, c3 {:.3e}", r.c0, r.c1, r.c2, r.c3);
    Ok(ExitCode::SUCCESS)
}

pub fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let tol = tolerances()?;
    let policy = parse_policy(&args.xi)?;
    let (fw, point) = initial_point(&args.initial, &tol)?;
    let traj = integrate_with(&fw, &point, &policy, &options(&args.run, &tol)).context("integration failed")?;
    let format = resolve_format(args.format, args.out.as_ref());
    write_trajectory(&fw, &traj, args.out.as_ref(), format)?;
    let (t, _) = traj.last().expect("trajectory has samples");
    say(
        args.out.is_none(),
        &format!(
            "simulated to t = {t} with xi = {policy}: {} samples, energy drift {:.3e}, constraint drift {:.3e}",
            traj.len(),
            traj.energy_drift(),
            traj.constraint_drift()
        ),
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Discrepancies {
    positions: f64,
    momenta: f64,
    forces: f64,
    energy: f64,
    invariant_functionals: f64,
}

#[derive(Serialize)]
struct FunctionalTrace {
    coefficients: Vec<f64>,
    /// `[policy][sample]`.
    values: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct CompareReport {
    policies: Vec<String>,
    t_end: f64,
    step: f64,
    discrepancies: Discrepancies,
    tension_spread: BTreeMap<String, f64>,
    final_tension_spread: BTreeMap<String, f64>,
    times: Vec<f64>,
    invariant_functionals: Vec<FunctionalTrace>,
}

pub fn gauge_compare(args: CompareArgs) -> Result<ExitCode> {
    let tol = tolerances()?;
    let policies = args
        .xi
        .iter()
        .map(|s| Ok(NamedPolicy::new(s.clone(), parse_policy(s)?)))
        .collect::<Result<Vec<_>>>()?;
    let (fw, point) = initial_point(&args.initial, &tol)?;
    let cmp = gauge_orbit_sample_with(&fw, &point, &policies, &options(&args.run, &tol)).context("gauge comparison failed")?;

    let per_edge = |v: &[f64]| -> BTreeMap<String, f64> { v.iter().enumerate().map(|(k, x)| (fw.edge_id(k), *x)).collect() };
    let values = cmp.functional_values();
    let traces = cmp
        .invariant_functionals
        .iter()
        .enumerate()
        .map(|(f, c)| FunctionalTrace {
            coefficients: to_vec(c),
            values: values.iter().map(|run| run.iter().map(|s| s[f]).collect()).collect(),
        })
        .collect();
    let rep = &cmp.invariant_report;
    let report = CompareReport {
        policies: cmp.policies.clone(),
        t_end: args.run.t_end,
        step: args.run.step,
        discrepancies: Discrepancies {
            positions: rep.positions,
            momenta: rep.momenta,
            forces: rep.forces,
            energy: rep.energy,
            invariant_functionals: rep.functionals,
        },
        tension_spread: per_edge(&cmp.tension_spread),
        final_tension_spread: per_edge(&cmp.final_tension_spread),
        times: cmp.times().to_vec(),
        invariant_functionals: traces,
    };
    emit_json(args.out.as_deref(), &report)?;

    let on_stdout = args.out.is_none();
    say(on_stdout, &format!("policies: {}", cmp.policies.join(", ")));
    say(
        on_stdout,
        &format!(
            "max discrepancy: positions {:.3e}, momenta {:.3e}, forces {:.3e}, energy {:.3e}, invariant functionals {:.3e}",
            rep.positions, rep.momenta, rep.forces, rep.energy, rep.functionals
        ),
    );
    let spreads: Vec<String> = (0..fw.edge_count())
        .map(|k| format!("{} {:.3e}", fw.edge_label(k), cmp.tension_spread[k]))
        .collect();
    say(on_stdout, &format!("tension spread: {}", spreads.join(", ")));
    Ok(ExitCode::SUCCESS)
}

pub fn gauge_fix(args: GaugeFixArgs) -> Result<ExitCode> {
    let tol = tolerances()?;
    let (fw, point) = initial_point(&args.initial, &tol)?;
    let edge = fw.edge_index(&args.fixed_edge)?;
    let fixing = fix_gauge(&fw, &point, edge, args.fixed_value)?;
    let writes_stdout = args.t_end.is_some() && args.out.is_none();
    say(
        writes_stdout,
        &format!("fixed rod {} at tension {}", fw.edge_label(edge), show(args.fixed_value)),
    );
    say(writes_stdout, &format!("induced Xi = {}", show(fixing.induced_xi)));
    say(writes_stdout, &format!("tensions: {}", show_vector(fixing.point.tensions())));

    if let Some(t_end) = args.t_end {
        let opts = IntegrationOptions {
            record_every: args.record_every.max(1),
            tolerances: tol,
            ..IntegrationOptions::new(t_end, args.step)
        };
        let traj = integrate_with(&fw, &fixing.point, &fixing.policy, &opts).context("integration failed")?;
        let deviation = traj
            .states
            .iter()
            .map(|s| (s.tensions()[edge] - args.fixed_value).abs())
            .fold(0.0, f64::max);
        write_trajectory(&fw, &traj, args.out.as_ref(), resolve_format(args.format, args.out.as_ref()))?;
        say(
            writes_stdout,
            &format!(
                "max |tension {} - {}| over run: {:.3e}; energy drift {:.3e}",
                fw.edge_label(edge),
                show(args.fixed_value),
                deviation,
                traj.energy_drift()
            ),
        );
    } else if args.out.is_some() {
        anyhow::bail!("--out needs --t-end for gauge-fix");
    }
    Ok(ExitCode::SUCCESS)
}

pub fn reduce(args: ReduceArgs) -> Result<ExitCode> {
    let input = load_input(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let fw = input.framework;
    let (m, ell) = reference_parameters(&fw)?;
    let text = fs::read_to_string(&args.trajectory).with_context(|| format!("reading {}", args.trajectory.display()))?;
    let states = read_trajectory(&fw, &text).with_context(|| format!("parsing {}", args.trajectory.display()))?;
    let rows = states
        .iter()
        .map(|(t, s)| Ok((*t, reduce_point(&fw, s)?)))
        .collect::<gauge_rig_core::Result<Vec<_>>>()?;
    emit(args.out.as_deref(), |w| write_reduced_csv(&rows, m, ell, w))?;
    say(args.out.is_none(), &format!("reduced {} samples", rows.len()));
    Ok(ExitCode::SUCCESS)
}
