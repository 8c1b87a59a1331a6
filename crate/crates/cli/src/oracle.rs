//! The `oracle-check` table: the library against closed-form solutions and
//! independent finite differences.

use std::f64::consts::TAU;
use std::process::ExitCode;

use anyhow::Result;
use nalgebra::{DMatrix, DVector};

use gauge_rig_core::analytic_oracle::{analytic_state, coefficient_extraction, verify_eom, AnalyticSolution};
use gauge_rig_core::constraint_chain::{assemble_tension_system, reference_normalization, residuals};
use gauge_rig_core::dynamics::{hamiltonian, integrate, prepare_initial_data, PolicyShape};
use gauge_rig_core::framework::{reference_framework, Configuration};
use gauge_rig_core::reduced_model::{reduce, reduced_hamiltonian};

struct Row {
    name: &'static str,
    value: f64,
    limit: f64,
}

impl Row {
    fn pass(&self) -> bool {
        self.value.is_finite() && self.value < self.limit
    }
}

const REFERENCE_MATRIX: [f64; 36] = [
    4., -1., -1., 3., 3., 0., //
    -1., 4., -1., 3., 0., 3., //
    -1., -1., 4., 0., 3., 3., //
    3., 3., 0., 12., 3., 3., //
    3., 0., 3., 3., 12., 3., //
    0., 3., 3., 3., 3., 12.,
];

/// Reference configuration turned by `angle` about the origin.
fn rotated(points: &DVector<f64>, angle: f64) -> DVector<f64> {
    let (s, c) = angle.sin_cos();
    DVector::from_fn(points.len(), |k, _| {
        let (x, y) = (points[k - k % 2], points[k - k % 2 + 1]);
        if k % 2 == 0 {
            c * x - s * y
        } else {
            s * x + c * y
        }
    })
}

fn rows() -> Result<Vec<Row>> {
    let (fw, cfg) = reference_framework(1.0, 1.0)?;
    let mut out = Vec::new();

    let sol = AnalyticSolution::new(1.0, 1.0, 1.0, f64::sin);
    let mut constraint = 0.0f64;
    let mut eom = 0.0f64;
    for k in 0..=20 {
        let t = 0.31 * k as f64;
        let r = residuals(&fw, &analytic_state(&sol, t)).max_abs();
        constraint = constraint.max(r[1]).max(r[2]).max(r[3]);
        eom = eom.max(verify_eom(&sol, t, 1e-4));
    }
    out.push(Row {
        name: "closed form satisfies the constraints",
        value: constraint,
        limit: 1e-12,
    });
    out.push(Row {
        name: "closed form satisfies Newton's law (h = 1e-4)",
        value: eom,
        limit: 1e-6,
    });

    let sys = assemble_tension_system(&fw, cfg.coords(), &DVector::zeros(8))?;
    let reference = DMatrix::from_row_slice(6, 6, &REFERENCE_MATRIX);
    out.push(Row {
        name: "normalized tension matrix at reference",
        value: (&sys.matrix * reference_normalization(1.0, 1.0) - reference).amax(),
        limit: 1e-10,
    });

    let mut extraction = 0.0f64;
    for k in 0..20 {
        let k = k as f64;
        let q = rotated(cfg.coords(), 0.37 * k);
        let config = Configuration::new(&fw, q)?;
        let point = prepare_initial_data(&fw, &config, -2.0 + 0.21 * k, -1.0 + 0.1 * k)?;
        let assembled = assemble_tension_system(&fw, point.positions(), point.momenta())?.matrix;
        let extracted = coefficient_extraction(&fw, point.positions(), point.momenta());
        extraction = extraction.max((&extracted - &assembled).amax() / assembled.amax());
    }
    out.push(Row {
        name: "extracted coefficients match assembly (relative)",
        value: extraction,
        limit: 1e-6,
    });

    let start = prepare_initial_data(&fw, &cfg, 1.0, 0.0)?;
    let sol = AnalyticSolution::constant(1.0, 1.0, 1.0, 0.0);
    let traj = integrate(&fw, &start, &PolicyShape::ZERO, TAU, 1e-3)?;
    let mut position = 0.0f64;
    let mut tension = 0.0f64;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        position = position.max((s.positions() - sol.positions(*t)).amax());
        tension = tension.max((s.tensions() - sol.tensions(*t)).amax());
    }
    out.push(Row {
        name: "integrated positions follow rotation (one period)",
        value: position,
        limit: 1e-6,
    });
    out.push(Row {
        name: "integrated tensions stay on closed form",
        value: tension,
        limit: 1e-8,
    });

    let energy = (reduced_hamiltonian(&reduce(&fw, &start)?, 1.0, 1.0) - hamiltonian(&fw, &start)).abs()
        + (hamiltonian(&fw, &start) - 1.5).abs();
    out.push(Row {
        name: "reduced and full energy equal 3/2 m l^2 w^2",
        value: energy,
        limit: 1e-10,
    });
    Ok(out)
}

pub fn run() -> Result<ExitCode> {
    let rows = rows()?;
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    println!("{:<width$}  {:>10}  {:>7}  result", "check", "value", "limit");
    for r in &rows {
        println!(
            "{:<width$}  {:>10.3e}  {:>7.0e}  {}",
            r.name,
            r.value,
            r.limit,
            if r.pass() { "PASS" } else { "FAIL" }
        );
    }
    Ok(if rows.iter().all(Row::pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
