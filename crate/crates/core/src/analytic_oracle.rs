//! Ground truth for the test suite: the closed-form rotating solutions of the
//! four-mass system and brute-force finite-difference checks.
//!
//! Nothing here reuses the assembly code in [`crate::constraint_chain`]; the
//! acceleration-level residual is re-derived edge by edge from neighbour
//! sums so the two routes can be compared.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::framework::{PhasePoint, RodFramework};

/// Rigid rotation about the central mass with angular velocity `omega`; the
/// three inner rods carry tension `f(t)`, the outer ones `(m omega^2 - f(t))/3`.
#[derive(Clone)]
pub struct AnalyticSolution {
    pub omega: f64,
    pub ell: f64,
    pub m: f64,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for AnalyticSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticSolution")
            .field("omega", &self.omega)
            .field("ell", &self.ell)
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

impl AnalyticSolution {
    pub fn new(omega: f64, ell: f64, m: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        assert!(ell > 0.0 && m > 0.0, "ell and m must be positive");
        Self {
            omega,
            ell,
            m,
            f: Arc::new(f),
        }
    }

    /// Inner tensions held constant at `f0`.
    pub fn constant(omega: f64, ell: f64, m: f64, f0: f64) -> Self {
        Self::new(omega, ell, m, move |_| f0)
    }

    pub fn inner_tension(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    /// Positions `(x1, y1, ..., x4, y4)` at time `t`.
    pub fn positions(&self, t: f64) -> DVector<f64> {
        let mut q = DVector::zeros(8);
        for (i, phase) in [0.0, -2.0 * PI / 3.0, 2.0 * PI / 3.0].into_iter().enumerate() {
            let a = self.omega * t + phase;
            q[2 * (i + 1)] = -self.ell * a.sin();
            q[2 * (i + 1) + 1] = self.ell * a.cos();
        }
        q
    }

    /// `m` times the time derivative of [`Self::positions`].
    pub fn momenta(&self, t: f64) -> DVector<f64> {
        let mut p = DVector::zeros(8);
        let k = self.m * self.ell * self.omega;
        for (i, phase) in [0.0, -2.0 * PI / 3.0, 2.0 * PI / 3.0].into_iter().enumerate() {
            let a = self.omega * t + phase;
            p[2 * (i + 1)] = -k * a.cos();
            p[2 * (i + 1) + 1] = -k * a.sin();
        }
        p
    }

    /// Tensions in edge order `{1,2},{1,3},{1,4},{2,3},{2,4},{3,4}`.
    pub fn tensions(&self, t: f64) -> DVector<f64> {
        let f = self.inner_tension(t);
        let outer = (self.m * self.omega * self.omega - f) / 3.0;
        DVector::from_vec(vec![f, f, f, outer, outer, outer])
    }
}

pub fn analytic_state(sol: &AnalyticSolution, t: f64) -> PhasePoint {
    PhasePoint::from_parts_unchecked(sol.positions(t), sol.momenta(t), sol.tensions(t))
}

const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Newton's law residual of the closed form: central second differences of the
/// positions against the rod forces. Returns the largest component.
pub fn verify_eom(sol: &AnalyticSolution, t: f64, h: f64) -> f64 {
    verify_eom_with(sol, t, h, |s| sol.tensions(s))
}

/// As [`verify_eom`] with an arbitrary tension history (for negative controls).
pub fn verify_eom_with(
    sol: &AnalyticSolution,
    t: f64,
    h: f64,
    tensions: impl Fn(f64) -> DVector<f64>,
) -> f64 {
    assert!(h > 0.0);
    let q = sol.positions(t);
    let second = (sol.positions(t + h) - &q * 2.0 + sol.positions(t - h)) / (h * h);
    let lambda = tensions(t);
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for c in 0..2 {
            let mut force = 0.0;
            for (k, &(a, b)) in EDGES.iter().enumerate() {
                if a == i {
                    force -= lambda[k] * (q[2 * a + c] - q[2 * b + c]);
                } else if b == i {
                    force -= lambda[k] * (q[2 * b + c] - q[2 * a + c]);
                }
            }
            worst = worst.max((sol.m * second[2 * i + c] - force).abs());
        }
    }
    worst
}

/// Step used for the finite-difference coefficient extraction.
pub const EXTRACTION_STEP: f64 = 1e-5;

/// Acceleration-level residual of every rod, written out from neighbour sums:
///
/// ```text
/// 2|v_i - v_j|^2 - (2/m_i) sum_{k~i} q_ik (q_i - q_j).(q_i - q_k)
///                + (2/m_j) sum_{k~j} q_jk (q_i - q_j).(q_j - q_k)
/// ```
fn acceleration_residual_by_neighbours(
    framework: &RodFramework,
    positions: &DVector<f64>,
    momenta: &DVector<f64>,
    tensions: &DVector<f64>,
) -> DVector<f64> {
    let n = framework.vertex_count();
    let mut neighbours: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, e) in framework.edges().iter().enumerate() {
        neighbours[e.ends[0]].push((e.ends[1], k));
        neighbours[e.ends[1]].push((e.ends[0], k));
    }
    let x = |v: &DVector<f64>, i: usize| (v[2 * i], v[2 * i + 1]);
    let mut out = DVector::zeros(framework.edge_count());
    for (k, e) in framework.edges().iter().enumerate() {
        let (i, j) = (e.ends[0], e.ends[1]);
        let (mi, mj) = (framework.mass(i), framework.mass(j));
        let (qi, qj) = (x(positions, i), x(positions, j));
        let (pi, pj) = (x(momenta, i), x(momenta, j));
        let dvx = pi.0 / mi - pj.0 / mj;
        let dvy = pi.1 / mi - pj.1 / mj;
        let dqx = qi.0 - qj.0;
        let dqy = qi.1 - qj.1;
        let mut value = 2.0 * (dvx * dvx + dvy * dvy);
        for &(o, edge) in &neighbours[i] {
            let qo = x(positions, o);
            value -= 2.0 / mi * tensions[edge] * (dqx * (qi.0 - qo.0) + dqy * (qi.1 - qo.1));
        }
        for &(o, edge) in &neighbours[j] {
            let qo = x(positions, o);
            value += 2.0 / mj * tensions[edge] * (dqx * (qj.0 - qo.0) + dqy * (qj.1 - qo.1));
        }
        out[k] = value;
    }
    out
}

/// Coefficient matrix of the acceleration-level conditions extracted by
/// central differences in each tension: `entry (e, e') = -d c3_e / d q_e'`.
pub fn coefficient_extraction(
    framework: &RodFramework,
    positions: &DVector<f64>,
    momenta: &DVector<f64>,
) -> DMatrix<f64> {
    let edges = framework.edge_count();
    let mut matrix = DMatrix::zeros(edges, edges);
    for col in 0..edges {
        let mut plus = DVector::zeros(edges);
        let mut minus = DVector::zeros(edges);
        plus[col] = EXTRACTION_STEP;
        minus[col] = -EXTRACTION_STEP;
        let up = acceleration_residual_by_neighbours(framework, positions, momenta, &plus);
        let down = acceleration_residual_by_neighbours(framework, positions, momenta, &minus);
        let derivative = (up - down) / (2.0 * EXTRACTION_STEP);
        matrix.set_column(col, &(-derivative));
    }
    matrix
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint_chain::{reference_normalization, residuals};
    use crate::framework::reference_framework;
    use approx::assert_relative_eq;

    #[test]
    fn state_at_zero() {
        let sol = AnalyticSolution::constant(1.0, 1.0, 1.0, 0.0);
        let s = analytic_state(&sol, 0.0);
        assert_relative_eq!(s.positions()[2], 0.0, epsilon = 1e-15);
        assert_relative_eq!(s.positions()[3], 1.0);
        assert_relative_eq!(s.momenta()[2], -1.0);
        assert_relative_eq!(s.momenta()[3], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_inner_tension_family() {
        let sol = AnalyticSolution::constant(1.5, 1.0, 2.0, 0.0);
        for t in [0.0, 0.3, 2.0] {
            let l = sol.tensions(t);
            assert_eq!(&l.as_slice()[..3], &[0.0; 3]);
            assert_relative_eq!(l[3], 2.0 * 1.5 * 1.5 / 3.0);
        }
        let still = AnalyticSolution::constant(0.0, 1.0, 1.0, 0.0);
        let s = analytic_state(&still, 4.0);
        assert_eq!(s.momenta().amax(), 0.0);
        assert_eq!(s.tensions().amax(), 0.0);
    }

    #[test]
    fn closed_form_satisfies_the_constraints() {
        let (fw, _) = reference_framework(1.3, 0.7).unwrap();
        let sol = AnalyticSolution::new(0.9, 1.3, 0.7, |t| 0.2 * t.sin());
        for t in [0.0, 0.4, 3.0, 11.0] {
            let r = residuals(&fw, &analytic_state(&sol, t)).max_abs();
            assert!(r.iter().all(|x| *x < 1e-12), "{r:?}");
        }
    }

    #[test]
    fn eom_residuals() {
        let sol = AnalyticSolution::new(1.0, 1.0, 1.0, f64::sin);
        assert!(verify_eom(&sol, 0.7, 1e-4) < 1e-6);
        let still = AnalyticSolution::constant(0.0, 1.0, 1.0, 0.0);
        assert_eq!(verify_eom(&still, 1.0, 1e-4), 0.0);
        // outer tensions not compensating f
        let bad = verify_eom_with(&sol, 0.7, 1e-4, |t| {
            let f = t.sin() + 1.0;
            DVector::from_vec(vec![f, f, f, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])
        });
        assert!(bad > 0.5, "{bad}");
    }

    #[test]
    fn extracted_entries_at_reference() {
        let (fw, cfg) = reference_framework(1.0, 1.0).unwrap();
        let sol = AnalyticSolution::constant(1.0, 1.0, 1.0, 0.0);
        let m = coefficient_extraction(&fw, cfg.coords(), &sol.momenta(0.0)) * reference_normalization(1.0, 1.0);
        assert_relative_eq!(m[(3, 3)], 12.0, epsilon = 1e-8);
        assert_relative_eq!(m[(0, 5)], 0.0, epsilon = 1e-8);
        assert_relative_eq!(m[(3, 4)], 3.0, epsilon = 1e-8);
        assert_relative_eq!(m[(0, 1)], -1.0, epsilon = 1e-8);
    }
}
