//! Projection back onto the final constraint manifold.
//!
//! Positions: mass-weighted Gauss-Newton on the squared rod lengths.
//! Momenta: mass-metric orthogonal projection onto `R W p = 0`.
//! Tensions: `x - A^+ (A x - b)`, which keeps the self-stress component.

use nalgebra::DVector;

use crate::constraint_chain::{assemble, length_residuals_relative};
use crate::error::{Error, Result};
use crate::framework::{length_residuals, rigidity_matrix, PhasePoint, RodFramework};
use crate::linalg::rank_reveal;
use crate::tolerances::Tolerances;

/// Residual accepted when the target cannot be reached because of roundoff.
const ACCEPTABLE_RELATIVE_RESIDUAL: f64 = 1e-12;

pub fn project_to_constraint_manifold(framework: &RodFramework, point: &PhasePoint) -> Result<PhasePoint> {
    project_with(framework, point, &Tolerances::default())
}

pub fn project_with(framework: &RodFramework, point: &PhasePoint, tol: &Tolerances) -> Result<PhasePoint> {
    let residual = length_residuals_relative(framework, point.positions());
    if residual > tol.projection_gate {
        return Err(Error::LengthConstraintViolated {
            residual,
            limit: tol.projection_gate,
        });
    }
    let q = project_positions(framework, point.positions().clone(), tol)?;
    let p = project_momenta(framework, &q, point.momenta(), tol);
    let system = assemble(framework, &q, &p, tol, false)?;
    let lambda = point.tensions();
    let correction = system.pseudoinverse() * (&system.matrix * lambda - &system.rhs);
    Ok(PhasePoint::from_parts_unchecked(q, p, lambda - correction))
}

pub(crate) fn project_positions(
    framework: &RodFramework,
    mut q: DVector<f64>,
    tol: &Tolerances,
) -> Result<DVector<f64>> {
    let w = framework.inverse_mass_diagonal();
    let mut residual = length_residuals_relative(framework, &q);
    let mut iterations = 0;
    while residual > tol.projection_target && iterations < tol.projection_max_iterations {
        let c1 = length_residuals(framework, &q);
        let r = rigidity_matrix(framework, &q);
        let wrt = nalgebra::DMatrix::from_diagonal(&w) * r.transpose();
        let normal = &r * &wrt;
        let step = &wrt * (rank_reveal(&normal, tol.rank).pseudoinverse * c1);
        q -= step;
        iterations += 1;
        let next = length_residuals_relative(framework, &q);
        if !next.is_finite() {
            residual = next;
            break;
        }
        // roundoff floor reached
        if next >= residual && next <= ACCEPTABLE_RELATIVE_RESIDUAL {
            residual = next;
            break;
        }
        residual = next;
    }
    if residual.is_finite() && residual <= tol.projection_target.max(ACCEPTABLE_RELATIVE_RESIDUAL) {
        Ok(q)
    } else {
        Err(Error::ProjectionFailed {
            step: None,
            residual,
            iterations,
        })
    }
}

pub(crate) fn project_momenta(
    framework: &RodFramework,
    q: &DVector<f64>,
    p: &DVector<f64>,
    tol: &Tolerances,
) -> DVector<f64> {
    let w = framework.inverse_mass_diagonal();
    let r = rigidity_matrix(framework, q);
    let rw = &r * nalgebra::DMatrix::from_diagonal(&w);
    let normal = &rw * r.transpose();
    let multipliers = rank_reveal(&normal, tol.rank).pseudoinverse * (&rw * p);
    p - r.transpose() * multipliers
}
