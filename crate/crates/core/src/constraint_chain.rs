//! The constraint hierarchy and the rod-tension linear system.
//!
//! Residual conventions (per edge `{i,j}`, `dq = q_i - q_j`, `v = p/m`):
//!
//! ```text
//! c0 = p_ij
//! c1 = |dq|^2 - l_ij^2
//! c2 = 2 dq . dv                      (d/dt c1)
//! c3 = 2 |dv|^2 + 2 dq . da           (d^2/dt^2 c1)
//! a_i = -(1/m_i) sum_{j~i} q_ij dq_ij
//! ```
//!
//! `c3` is affine in the tensions, `c3 = rhs - A q_ij`, with
//! `A = (1/2) R W R^T` (R the rigidity matrix, W the inverse masses). For the
//! equal-mass reference system the textbook matrix with integer entries is
//! `(m / l^2) A`, see [`reference_normalization`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::framework::{dot2, length_residuals, rigidity_matrix, separation, PhasePoint, RodFramework};
use crate::linalg::{canonical_basis, rank_reveal, RankRevealed};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintResiduals {
    pub c0: DVector<f64>,
    pub c1: DVector<f64>,
    pub c2: DVector<f64>,
    pub c3: DVector<f64>,
}

impl ConstraintResiduals {
    /// Max-abs of each level, `[c0, c1, c2, c3]`.
    pub fn max_abs(&self) -> [f64; 4] {
        [amax(&self.c0), amax(&self.c1), amax(&self.c2), amax(&self.c3)]
    }
}

fn amax(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.amax()
    }
}

pub fn velocities(framework: &RodFramework, momenta: &DVector<f64>) -> DVector<f64> {
    momenta.component_mul(&framework.inverse_mass_diagonal())
}

/// Total rod force on each particle, `-sum_{j~i} q_ij (q_i - q_j)`.
pub fn particle_forces(
    framework: &RodFramework,
    positions: &DVector<f64>,
    tensions: &DVector<f64>,
) -> DVector<f64> {
    let d = framework.dimension();
    let mut f = DVector::zeros(framework.coordinate_count());
    for (k, e) in framework.edges().iter().enumerate() {
        let [i, j] = e.ends;
        let s = separation(positions, d, i, j);
        for c in 0..d {
            f[i * d + c] -= tensions[k] * s[c];
            f[j * d + c] += tensions[k] * s[c];
        }
    }
    f
}

pub fn accelerations(
    framework: &RodFramework,
    positions: &DVector<f64>,
    tensions: &DVector<f64>,
) -> DVector<f64> {
    particle_forces(framework, positions, tensions).component_mul(&framework.inverse_mass_diagonal())
}

/// Largest relative length violation `|c1_ij| / l_ij^2`.
pub fn length_residuals_relative(framework: &RodFramework, positions: &DVector<f64>) -> f64 {
    length_residuals(framework, positions)
        .iter()
        .zip(framework.edges())
        .map(|(c, e)| c.abs() / (e.rest_length * e.rest_length))
        .fold(0.0, f64::max)
}

/// Evaluates all four constraint levels at a phase-space point.
pub fn residuals(framework: &RodFramework, point: &PhasePoint) -> ConstraintResiduals {
    let d = framework.dimension();
    let q = point.positions();
    let v = velocities(framework, point.momenta());
    let a = accelerations(framework, q, point.tensions());
    let mut c2 = DVector::zeros(framework.edge_count());
    let mut c3 = DVector::zeros(framework.edge_count());
    for (k, e) in framework.edges().iter().enumerate() {
        let [i, j] = e.ends;
        let dq = separation(q, d, i, j);
        let dv = separation(&v, d, i, j);
        let da = separation(&a, d, i, j);
        c2[k] = 2.0 * dot2(dq, dv);
        c3[k] = 2.0 * dot2(dv, dv) + 2.0 * dot2(dq, da);
    }
    ConstraintResiduals {
        c0: point.multiplier_momenta().clone(),
        c1: length_residuals(framework, q),
        c2,
        c3,
    }
}

/// The acceleration-level conditions viewed as a linear system
/// `matrix * tensions = rhs`, together with its rank analysis.
#[derive(Debug, Clone)]
pub struct TensionSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub rank: usize,
    /// Self-stresses: canonical basis of the kernel of `matrix`.
    pub self_stress_basis: Vec<DVector<f64>>,
    pub solvable: bool,
    pub max_violation: f64,
    decomposition: RankRevealed,
}

impl TensionSystem {
    pub fn gauge_dimension(&self) -> usize {
        self.self_stress_basis.len()
    }

    pub fn edge_count(&self) -> usize {
        self.rhs.len()
    }

    pub fn pseudoinverse(&self) -> &DMatrix<f64> {
        &self.decomposition.pseudoinverse
    }

    /// Orthonormal basis of the complement of the self-stress space.
    pub fn range_basis(&self) -> &[DVector<f64>] {
        &self.decomposition.range
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.decomposition.singular_values
    }

    /// Minimum-norm solution of `matrix * x = rhs` (least squares if the
    /// system is incompatible).
    pub fn particular(&self) -> DVector<f64> {
        &self.decomposition.pseudoinverse * &self.rhs
    }

    /// Same decomposition with a different right-hand side.
    pub fn with_rhs(&self, rhs: DVector<f64>, tol: &Tolerances) -> TensionSystem {
        let mut out = self.clone();
        out.rhs = rhs;
        let check = solvability_check_with(&out, tol);
        out.solvable = check.solvable;
        out.max_violation = check.max_violation;
        out
    }
}

/// Factor turning the assembled matrix into the integer-valued matrix of the
/// equal-mass reference system (`m / l^2`, with `l` the centre-to-corner rod).
pub fn reference_normalization(m: f64, ell: f64) -> f64 {
    m / (ell * ell)
}

pub fn assemble_tension_system(
    framework: &RodFramework,
    positions: &DVector<f64>,
    momenta: &DVector<f64>,
) -> Result<TensionSystem> {
    assemble_tension_system_with(framework, positions, momenta, &Tolerances::default())
}

pub fn assemble_tension_system_with(
    framework: &RodFramework,
    positions: &DVector<f64>,
    momenta: &DVector<f64>,
    tol: &Tolerances,
) -> Result<TensionSystem> {
    assemble(framework, positions, momenta, tol, true)
}

/// Assembly without the off-manifold warning, for intermediate states of the
/// integrator and the projection.
pub(crate) fn assemble(
    framework: &RodFramework,
    positions: &DVector<f64>,
    momenta: &DVector<f64>,
    tol: &Tolerances,
    warn: bool,
) -> Result<TensionSystem> {
    framework.check_coordinates("positions", positions)?;
    framework.check_coordinates("momenta", momenta)?;
    let d = framework.dimension();
    let v = velocities(framework, momenta);

    let mut rhs = DVector::zeros(framework.edge_count());
    let mut worst_c1: f64 = 0.0;
    let mut worst_c2: f64 = 0.0;
    for (k, e) in framework.edges().iter().enumerate() {
        let [i, j] = e.ends;
        let dq = separation(positions, d, i, j);
        let len2 = dot2(dq, dq);
        let rest2 = e.rest_length * e.rest_length;
        if len2 <= 1e-24 * rest2 {
            return Err(Error::DegenerateEdge(framework.edge_label(k)));
        }
        let dv = separation(&v, d, i, j);
        rhs[k] = 2.0 * dot2(dv, dv);
        worst_c1 = worst_c1.max((len2 - rest2).abs() / rest2);
        worst_c2 = worst_c2.max(dot2(dq, dv).abs() / (len2.sqrt() * dot2(dv, dv).sqrt().max(1.0)));
    }
    if warn && (worst_c1 > 1e-8 || worst_c2 > 1e-8) {
        log::warn!(
            "assembling tension system off the velocity manifold (relative c1 {worst_c1:.2e}, c2 {worst_c2:.2e})"
        );
    }

    let r = rigidity_matrix(framework, positions);
    let w = framework.inverse_mass_diagonal();
    let rw = &r * DMatrix::from_diagonal(&w);
    let matrix = (&rw * r.transpose()) * 0.5;

    let decomposition = rank_reveal(&matrix, tol.rank);
    let self_stress_basis = canonical_basis(&decomposition.kernel);
    let mut system = TensionSystem {
        matrix,
        rhs,
        rank: decomposition.rank,
        self_stress_basis,
        solvable: true,
        max_violation: 0.0,
        decomposition,
    };
    let check = solvability_check_with(&system, tol);
    system.solvable = check.solvable;
    system.max_violation = check.max_violation;
    Ok(system)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solvability {
    pub solvable: bool,
    /// Worst `|u . rhs| / (|u| |rhs|)` over the self-stresses `u`.
    pub max_violation: f64,
}

pub fn solvability_check(system: &TensionSystem) -> Solvability {
    solvability_check_with(system, &Tolerances::default())
}

/// Right-hand sides with norm below this are treated as exactly zero.
const RHS_FLOOR: f64 = 1e-12;

pub fn solvability_check_with(system: &TensionSystem, tol: &Tolerances) -> Solvability {
    let rhs_norm = system.rhs.norm();
    let max_violation = if rhs_norm <= RHS_FLOOR {
        0.0
    } else {
        system
            .self_stress_basis
            .iter()
            .map(|u| u.dot(&system.rhs).abs() / (u.norm() * rhs_norm))
            .fold(0.0, f64::max)
    };
    Solvability {
        solvable: max_violation <= tol.solvability,
        max_violation,
    }
}

/// A point of the affine solution set: minimum-norm particular solution plus
/// coefficients along the self-stress basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TensionSolution {
    pub particular: DVector<f64>,
    pub kernel_coefficients: Vec<f64>,
}

impl TensionSolution {
    pub fn tensions(&self, system: &TensionSystem) -> DVector<f64> {
        combine(&self.particular, &system.self_stress_basis, &self.kernel_coefficients)
    }
}

pub(crate) fn combine(base: &DVector<f64>, basis: &[DVector<f64>], coefficients: &[f64]) -> DVector<f64> {
    basis
        .iter()
        .zip(coefficients)
        .fold(base.clone(), |acc, (s, c)| acc + s * *c)
}

pub fn solve_tensions(system: &TensionSystem, kernel_coefficients: &[f64]) -> Result<TensionSolution> {
    if kernel_coefficients.len() != system.gauge_dimension() {
        return Err(Error::PolicyArity {
            expected: system.gauge_dimension(),
            found: kernel_coefficients.len(),
        });
    }
    if !system.solvable {
        return Err(Error::Unsolvable {
            violation: system.max_violation,
        });
    }
    Ok(TensionSolution {
        particular: system.particular(),
        kernel_coefficients: kernel_coefficients.to_vec(),
    })
}

/// Kernel coefficients giving tension `value` on `edge`: the first self-stress
/// with a nonzero component on the edge absorbs the difference, the others
/// stay at zero. For a one-dimensional kernel this is the unique choice.
pub fn coefficients_for_edge_value(system: &TensionSystem, edge: usize, value: f64) -> Result<Vec<f64>> {
    if edge >= system.edge_count() {
        return Err(Error::UnknownEdge(edge.to_string()));
    }
    let mut coefficients = vec![0.0; system.gauge_dimension()];
    let (k, s) = system
        .self_stress_basis
        .iter()
        .enumerate()
        .find(|(_, s)| s[edge].abs() > 1e-12)
        .ok_or_else(|| Error::InvalidParameter(format!("no self-stress acts on edge #{edge}")))?;
    coefficients[k] = (value - system.particular()[edge]) / s[edge];
    Ok(coefficients)
}

/// Kernel coordinates of an arbitrary tension vector, i.e. the coefficients of
/// its component orthogonal to the range (least squares in the basis).
pub fn kernel_coordinates(system: &TensionSystem, tensions: &DVector<f64>) -> Vec<f64> {
    let k = system.gauge_dimension();
    if k == 0 {
        return Vec::new();
    }
    let basis = DMatrix::from_columns(&system.self_stress_basis);
    let gram = basis.transpose() * &basis;
    let proj = basis.transpose() * (tensions - system.particular());
    gram.lu()
        .solve(&proj)
        .map(|c| c.iter().copied().collect())
        .unwrap_or_else(|| vec![0.0; k])
}
