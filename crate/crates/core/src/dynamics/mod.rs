//! Gauge-parameterized Hamiltonian dynamics on the final constraint manifold.
//!
//! The flow is
//!
//! ```text
//! dq_i/dt  = p_i / m_i
//! dp_i/dt  = -sum_{j~i} q_ij (q_i - q_j)
//! dq_ij/dt = A^+ b + sum_k xi_k s_k        (s_k the self-stresses)
//! dp_ij/dt = 0
//! ```
//!
//! where `A x = b` is the tangency condition `d/dt c3 = 0` and the
//! coefficients `xi_k` are supplied by a [`GaugePolicy`].

mod integrator;
mod policy;
mod projection;

pub use integrator::{integrate, integrate_with, IntegrationOptions, Sample, Trajectory};
pub use policy::{FnPolicy, GaugePolicy, PolicyShape};
pub use projection::{project_to_constraint_manifold, project_with};

use nalgebra::DVector;

use crate::constraint_chain::{
    accelerations, assemble, assemble_tension_system_with, coefficients_for_edge_value, combine,
    length_residuals_relative, particle_forces, solve_tensions, velocities, TensionSystem,
};
use crate::error::{Error, Result};
use crate::framework::{
    center_of_mass, dot2, rotate_quarter, separation, Configuration, PhasePoint, RodFramework,
};
use crate::tolerances::Tolerances;

/// Kinetic energy plus the tension-weighted length constraints.
pub fn hamiltonian(framework: &RodFramework, point: &PhasePoint) -> f64 {
    let d = framework.dimension();
    let p = point.momenta();
    let kinetic: f64 = (0..framework.vertex_count())
        .map(|i| {
            let pi = &p.as_slice()[i * d..(i + 1) * d];
            pi.iter().map(|x| x * x).sum::<f64>() / (2.0 * framework.mass(i))
        })
        .sum();
    let c1 = crate::framework::length_residuals(framework, point.positions());
    kinetic + 0.5 * point.tensions().dot(&c1)
}

/// Affine space of admissible tension rates at a point of the final manifold.
#[derive(Debug, Clone)]
pub struct MultiplierRates {
    /// Minimum-norm solution of the tangency system.
    pub particular: DVector<f64>,
    /// Self-stress basis (the free directions).
    pub basis: Vec<DVector<f64>>,
    /// Right-hand side of the tangency system.
    pub rhs: DVector<f64>,
    /// `max_k |s_k . rhs| / |s_k|`; zero on the manifold.
    pub compatibility_residual: f64,
}

impl MultiplierRates {
    pub fn gauge_dimension(&self) -> usize {
        self.basis.len()
    }

    /// Rates for the given self-stress coefficients.
    pub fn rates(&self, coefficients: &[f64]) -> Result<DVector<f64>> {
        if coefficients.len() != self.basis.len() {
            return Err(Error::PolicyArity {
                expected: self.basis.len(),
                found: coefficients.len(),
            });
        }
        Ok(combine(&self.particular, &self.basis, coefficients))
    }
}

/// Right-hand side of `A dq_ij/dt = b`, the time derivative of `c3` along the
/// particle flow with tensions held fixed:
/// `b = 6 dv . da + 2 dq . d(da/dt)` with `da/dt` at frozen tensions.
fn tangency_rhs(framework: &RodFramework, point: &PhasePoint) -> DVector<f64> {
    let d = framework.dimension();
    let q = point.positions();
    let lambda = point.tensions();
    let v = velocities(framework, point.momenta());
    let a = accelerations(framework, q, lambda);
    // jerk at frozen tensions: -(1/m_i) sum q_ij (v_i - v_j)
    let jerk = particle_forces(framework, &v, lambda).component_mul(&framework.inverse_mass_diagonal());
    DVector::from_iterator(
        framework.edge_count(),
        framework.edges().iter().map(|e| {
            let [i, j] = e.ends;
            let dq = separation(q, d, i, j);
            let dv = separation(&v, d, i, j);
            let da = separation(&a, d, i, j);
            let dj = separation(&jerk, d, i, j);
            6.0 * dot2(dv, da) + 2.0 * dot2(dq, dj)
        }),
    )
}

pub(crate) fn multiplier_rates_unchecked(
    framework: &RodFramework,
    point: &PhasePoint,
    tol: &Tolerances,
) -> Result<(MultiplierRates, TensionSystem)> {
    let system = assemble(framework, point.positions(), point.momenta(), tol, false)?;
    let rhs = tangency_rhs(framework, point);
    let particular = system.pseudoinverse() * &rhs;
    let compatibility_residual = system
        .self_stress_basis
        .iter()
        .map(|s| s.dot(&rhs).abs() / s.norm())
        .fold(0.0, f64::max);
    Ok((
        MultiplierRates {
            particular,
            basis: system.self_stress_basis.clone(),
            rhs,
            compatibility_residual,
        },
        system,
    ))
}

/// Solves the tangency condition for the tension rates. Fails when the system
/// is incompatible, which only happens off the constraint manifold.
pub fn tangency_solve_multiplier_rates(framework: &RodFramework, point: &PhasePoint) -> Result<MultiplierRates> {
    tangency_solve_with(framework, point, &Tolerances::default())
}

pub fn tangency_solve_with(framework: &RodFramework, point: &PhasePoint, tol: &Tolerances) -> Result<MultiplierRates> {
    let (rates, _) = multiplier_rates_unchecked(framework, point, tol)?;
    if rates.compatibility_residual > tol.tangency {
        return Err(Error::TangencyIncompatible {
            residual: rates.compatibility_residual,
        });
    }
    Ok(rates)
}

/// The Hamiltonian vector field at a point for a given gauge policy.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldValue {
    pub dq: DVector<f64>,
    pub dp: DVector<f64>,
    pub dtension: DVector<f64>,
    /// Always zero: the primary constraints are preserved.
    pub dmultiplier_momenta: DVector<f64>,
}

pub fn vector_field(
    framework: &RodFramework,
    point: &PhasePoint,
    policy: &dyn GaugePolicy,
    time: f64,
) -> Result<VectorFieldValue> {
    vector_field_with(framework, point, policy, time, &Tolerances::default())
}

pub fn vector_field_with(
    framework: &RodFramework,
    point: &PhasePoint,
    policy: &dyn GaugePolicy,
    time: f64,
    tol: &Tolerances,
) -> Result<VectorFieldValue> {
    let residual = length_residuals_relative(framework, point.positions());
    if residual > 1e-8 {
        log::warn!("evaluating vector field off the length manifold (relative residual {residual:.2e})");
    }
    let rates = tangency_solve_with(framework, point, tol)?;
    let xi = policy.coefficients(time, point, &rates);
    Ok(VectorFieldValue {
        dq: velocities(framework, point.momenta()),
        dp: particle_forces(framework, point.positions(), point.tensions()),
        dtension: rates.rates(&xi)?,
        dmultiplier_momenta: DVector::zeros(framework.edge_count()),
    })
}

/// Least-squares angular velocity of a planar rigid motion,
/// `v_i - v_j ~ omega R (q_i - q_j)` over all rods.
pub fn angular_velocity(framework: &RodFramework, point: &PhasePoint) -> f64 {
    let d = framework.dimension();
    let v = velocities(framework, point.momenta());
    let (num, den) = framework.edges().iter().fold((0.0, 0.0), |(n, m), e| {
        let dq = separation(point.positions(), d, e.ends[0], e.ends[1]);
        let dv = separation(&v, d, e.ends[0], e.ends[1]);
        (n + dot2(dv, rotate_quarter(dq)), m + dot2(dq, dq))
    });
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// The first edge carrying a component of the first self-stress; the edge
/// whose tension is used as the free parameter of initial data.
pub fn designated_edge(system: &TensionSystem) -> Option<usize> {
    system
        .self_stress_basis
        .first()
        .and_then(|s| s.iter().position(|x| x.abs() > 1e-12))
}

/// Rigid rotation about the centre of mass with angular velocity `omega`, and
/// tensions on the admissible family with `lambda` on the designated edge.
/// When the framework has no self-stress the tensions are unique and
/// `lambda` is ignored.
pub fn prepare_initial_data(
    framework: &RodFramework,
    config: &Configuration,
    omega: f64,
    lambda: f64,
) -> Result<PhasePoint> {
    prepare_initial_data_with(framework, config, omega, lambda, &Tolerances::default())
}

pub fn prepare_initial_data_with(
    framework: &RodFramework,
    config: &Configuration,
    omega: f64,
    lambda: f64,
    tol: &Tolerances,
) -> Result<PhasePoint> {
    if !omega.is_finite() || !lambda.is_finite() {
        return Err(Error::InvalidParameter("omega and lambda must be finite".into()));
    }
    let residual = length_residuals_relative(framework, config.coords());
    if residual > tol.projection_gate {
        return Err(Error::LengthConstraintViolated {
            residual,
            limit: tol.projection_gate,
        });
    }
    let q = if residual > tol.initial_data {
        log::info!("snapping configuration onto rod lengths (relative residual {residual:.2e})");
        projection::project_positions(framework, config.coords().clone(), tol)?
    } else {
        config.coords().clone()
    };

    let c = center_of_mass(framework, &q);
    let d = framework.dimension();
    let p = DVector::from_fn(framework.coordinate_count(), |k, _| {
        let i = k / d;
        let r = rotate_quarter([q[i * d] - c[0], q[i * d + 1] - c[1]]);
        framework.mass(i) * omega * r[k % d]
    });

    let system = assemble_tension_system_with(framework, &q, &p, tol)?;
    let coefficients = match designated_edge(&system) {
        Some(edge) => coefficients_for_edge_value(&system, edge, lambda)?,
        None => Vec::new(),
    };
    let tensions = solve_tensions(&system, &coefficients)?.tensions(&system);
    PhasePoint::on_primary(framework, q, p, tensions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint_chain::residuals;
    use crate::framework::reference_framework;
    use approx::assert_relative_eq;

    fn rotating(omega: f64, lambda: f64) -> (RodFramework, PhasePoint) {
        let (fw, cfg) = reference_framework(1.0, 1.0).unwrap();
        let point = prepare_initial_data(&fw, &cfg, omega, lambda).unwrap();
        (fw, point)
    }

    #[test]
    fn initial_data_momenta_and_tensions() {
        let (fw, point) = rotating(1.0, 0.0);
        let p = point.momenta();
        let h = 3f64.sqrt() / 2.0;
        let expected = [0.0, 0.0, -1.0, 0.0, 0.5, h, 0.5, -h];
        for (a, b) in p.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        let t = point.tensions();
        for k in 0..3 {
            assert!(t[k].abs() < 1e-14);
            assert_relative_eq!(t[k + 3], 1.0 / 3.0, epsilon = 1e-14);
        }
        let r = residuals(&fw, &point).max_abs();
        assert!(r.iter().all(|x| *x < 1e-12), "{r:?}");

        let (_, fast) = rotating(2.0, 0.0);
        for k in 3..6 {
            assert_relative_eq!(fast.tensions()[k], 4.0 / 3.0, epsilon = 1e-13);
        }
        let (_, still) = rotating(0.0, 0.0);
        assert_eq!(still.momenta().amax(), 0.0);
        assert!(still.tensions().amax() < 1e-15);
    }

    #[test]
    fn energy_of_rotating_point() {
        let (fw, point) = rotating(1.0, 0.0);
        assert_relative_eq!(hamiltonian(&fw, &point), 1.5, epsilon = 1e-14);
        let (fw, still) = rotating(0.0, 0.0);
        assert_eq!(hamiltonian(&fw, &still), 0.0);
        assert_relative_eq!(angular_velocity(&fw, &point), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn energy_off_the_length_manifold() {
        // positions scaled by 1.1, unit tensions, zero momenta:
        // H = 1/2 (3 * 0.21 + 3 * 0.63) = 1.26
        let (fw, cfg) = reference_framework(1.0, 1.0).unwrap();
        let point = PhasePoint::on_primary(
            &fw,
            cfg.coords() * 1.1,
            DVector::zeros(8),
            DVector::from_element(6, 1.0),
        )
        .unwrap();
        assert_relative_eq!(hamiltonian(&fw, &point), 1.26, epsilon = 1e-13);
    }

    #[test]
    fn vector_field_patterns() {
        let (fw, point) = rotating(1.0, 0.0);
        let zero = vector_field(&fw, &point, &PolicyShape::ZERO, 0.0).unwrap();
        assert!(zero.dtension.amax() < 1e-13);
        assert_eq!(zero.dmultiplier_momenta.amax(), 0.0);

        let c = 0.8;
        let v = vector_field(&fw, &point, &PolicyShape::Const(c), 0.0).unwrap();
        for k in 0..3 {
            assert_relative_eq!(v.dtension[k], c, epsilon = 1e-13);
            assert_relative_eq!(v.dtension[k + 3], -c / 3.0, epsilon = 1e-13);
        }
        // dp is the rod force, centripetal for the rotating body
        assert_relative_eq!(v.dp[3], -1.0, epsilon = 1e-13);

        let (fw, still) = rotating(0.0, 0.0);
        let v = vector_field(&fw, &still, &PolicyShape::ZERO, 0.0).unwrap();
        assert_eq!(v.dq.amax(), 0.0);
        assert!(v.dp.amax() < 1e-15 && v.dtension.amax() < 1e-15);
    }

    #[test]
    fn tangency_structure() {
        let (fw, point) = rotating(1.3, 0.4);
        let rates = tangency_solve_multiplier_rates(&fw, &point).unwrap();
        assert_eq!(rates.gauge_dimension(), 1);
        assert!(rates.compatibility_residual < 1e-12);
        let (fw, still) = rotating(0.0, 0.0);
        let rates = tangency_solve_multiplier_rates(&fw, &still).unwrap();
        assert_eq!(rates.rhs.amax(), 0.0);
        assert_eq!(rates.particular.amax(), 0.0);

        let five = fw.without_edge("3-4").unwrap();
        let (_, cfg) = reference_framework(1.0, 1.0).unwrap();
        let point = prepare_initial_data(&five, &cfg, 1.0, 0.0).unwrap();
        let rates = tangency_solve_multiplier_rates(&five, &point).unwrap();
        assert_eq!(rates.gauge_dimension(), 0);
    }

    #[test]
    fn policy_arity_is_checked() {
        struct Wrong;
        impl GaugePolicy for Wrong {
            fn coefficients(&self, _: f64, _: &PhasePoint, _: &MultiplierRates) -> Vec<f64> {
                vec![1.0, 2.0]
            }
        }
        let (fw, point) = rotating(1.0, 0.0);
        assert!(matches!(
            vector_field(&fw, &point, &Wrong, 0.0),
            Err(Error::PolicyArity { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn initial_data_rejects_stretched_configuration() {
        let (fw, cfg) = reference_framework(1.0, 1.0).unwrap();
        let stretched = Configuration::new(&fw, cfg.coords() * 1.1).unwrap();
        assert!(matches!(
            prepare_initial_data(&fw, &stretched, 1.0, 0.0),
            Err(Error::LengthConstraintViolated { .. })
        ));
    }
}
