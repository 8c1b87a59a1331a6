//! Gauge structure experiments: orbit sampling under competing policies,
//! invariant versus pure-gauge tension functionals, and gauge fixing.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::constraint_chain::{
    assemble_tension_system, assemble_tension_system_with, coefficients_for_edge_value, solve_tensions, TensionSystem,
};
use crate::dynamics::{
    integrate_with, tangency_solve_multiplier_rates, GaugePolicy, IntegrationOptions, MultiplierRates, Trajectory,
};
use crate::error::{Error, Result};
use crate::framework::{PhasePoint, RodFramework};
use crate::linalg::canonical_basis;

pub struct NamedPolicy {
    pub name: String,
    pub policy: Box<dyn GaugePolicy>,
}

impl NamedPolicy {
    pub fn new(name: impl Into<String>, policy: impl GaugePolicy + 'static) -> Self {
        Self {
            name: name.into(),
            policy: Box::new(policy),
        }
    }
}

/// Max-abs discrepancies of gauge-invariant observables across policies,
/// taken over all components and samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvariantReport {
    pub positions: f64,
    pub momenta: f64,
    pub forces: f64,
    pub energy: f64,
    /// Invariant linear functionals of the tensions.
    pub functionals: f64,
}

#[derive(Debug, Clone)]
pub struct GaugeComparison {
    pub policies: Vec<String>,
    pub runs: Vec<Trajectory>,
    pub end_states: Vec<PhasePoint>,
    pub invariant_functionals: Vec<DVector<f64>>,
    pub invariant_report: InvariantReport,
    /// Per edge: largest spread (max - min over policies) over all samples.
    pub tension_spread: Vec<f64>,
    /// Per edge: spread at the final time.
    pub final_tension_spread: Vec<f64>,
}

impl GaugeComparison {
    pub fn times(&self) -> &[f64] {
        &self.runs[0].times
    }

    /// Values of every invariant functional at every sample, per policy:
    /// `[policy][sample][functional]`.
    pub fn functional_values(&self) -> Vec<Vec<Vec<f64>>> {
        self.runs
            .iter()
            .map(|run| {
                run.states
                    .iter()
                    .map(|s| self.invariant_functionals.iter().map(|c| c.dot(s.tensions())).collect())
                    .collect()
            })
            .collect()
    }
}

fn spread<'a>(values: impl Iterator<Item = &'a DVector<f64>> + Clone) -> DVector<f64> {
    let first = values.clone().next().expect("at least one run").clone();
    let (lo, hi) = values.fold((first.clone(), first), |(lo, hi), v| (lo.inf(v), hi.sup(v)));
    hi - lo
}

/// Runs every policy from the same initial data and compares the outcomes.
/// Runs execute in parallel.
pub fn gauge_orbit_sample(
    framework: &RodFramework,
    initial: &PhasePoint,
    policies: &[NamedPolicy],
    t_end: f64,
    step: f64,
) -> Result<GaugeComparison> {
    gauge_orbit_sample_with(framework, initial, policies, &IntegrationOptions::new(t_end, step))
}

pub fn gauge_orbit_sample_with(
    framework: &RodFramework,
    initial: &PhasePoint,
    policies: &[NamedPolicy],
    options: &IntegrationOptions,
) -> Result<GaugeComparison> {
    if policies.is_empty() {
        return Err(Error::InvalidParameter("at least one policy is required".into()));
    }
    let runs: Vec<Trajectory> = policies
        .par_iter()
        .map(|p| integrate_with(framework, initial, &p.policy, options))
        .collect::<Result<_>>()?;

    let system = assemble_tension_system_with(framework, initial.positions(), initial.momenta(), &options.tolerances)?;
    let functionals = classify_tension_functionals(&system);
    let invariant_functionals = functionals.invariant;

    let samples = runs[0].len();
    let edges = framework.edge_count();
    let mut report = InvariantReport::default();
    let mut tension_spread = vec![0.0; edges];
    let mut final_tension_spread = vec![0.0; edges];
    for k in 0..samples {
        let states = runs.iter().map(|r| &r.states[k]);
        report.positions = report.positions.max(spread(states.clone().map(|s| s.positions())).amax());
        report.momenta = report.momenta.max(spread(states.clone().map(|s| s.momenta())).amax());
        let forces = runs.iter().map(|r| &r.samples[k].forces);
        report.forces = report.forces.max(spread(forces).amax());
        let energies: Vec<f64> = runs.iter().map(|r| r.samples[k].energy).collect();
        let e_spread = energies.iter().cloned().fold(f64::MIN, f64::max)
            - energies.iter().cloned().fold(f64::MAX, f64::min);
        report.energy = report.energy.max(e_spread);
        if !invariant_functionals.is_empty() {
            let values: Vec<DVector<f64>> = runs
                .iter()
                .map(|r| {
                    DVector::from_iterator(
                        invariant_functionals.len(),
                        invariant_functionals.iter().map(|c| c.dot(r.states[k].tensions())),
                    )
                })
                .collect();
            report.functionals = report.functionals.max(spread(values.iter()).amax());
        }
        if edges > 0 {
            let t = spread(states.map(|s| s.tensions()));
            for (acc, x) in tension_spread.iter_mut().zip(t.iter()) {
                *acc = f64::max(*acc, *x);
            }
            if k + 1 == samples {
                final_tension_spread = t.iter().copied().collect();
            }
        }
    }

    Ok(GaugeComparison {
        policies: policies.iter().map(|p| p.name.clone()).collect(),
        end_states: runs.iter().map(|r| r.states.last().expect("nonempty").clone()).collect(),
        runs,
        invariant_functionals,
        invariant_report: report,
        tension_spread,
        final_tension_spread,
    })
}

/// Linear functionals of the tensions split into gauge-invariant ones (those
/// annihilating every self-stress) and the pure-gauge directions.
#[derive(Debug, Clone, PartialEq)]
pub struct TensionFunctionals {
    pub invariant: Vec<DVector<f64>>,
    pub pure_gauge: Vec<DVector<f64>>,
}

impl TensionFunctionals {
    /// Whether `c . s = 0` (relative to `|c| |s|`) for every self-stress `s`.
    pub fn is_invariant(&self, c: &DVector<f64>) -> bool {
        let norm = c.norm();
        norm == 0.0
            || self
                .pure_gauge
                .iter()
                .all(|s| c.dot(s).abs() <= 1e-10 * norm * s.norm())
    }
}

pub fn classify_tension_functionals(system: &TensionSystem) -> TensionFunctionals {
    TensionFunctionals {
        invariant: canonical_basis(system.range_basis()),
        pure_gauge: system.self_stress_basis.clone(),
    }
}

/// Policy keeping the tension of one rod constant: picks the self-stress
/// coefficient that cancels the rod's rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeFixPolicy {
    pub edge: usize,
}

impl GaugeFixPolicy {
    pub fn induced(&self, rates: &MultiplierRates) -> Vec<f64> {
        let mut xi = vec![0.0; rates.gauge_dimension()];
        if let Some(k) = rates.basis.iter().position(|s| s[self.edge].abs() > 1e-12) {
            xi[k] = -rates.particular[self.edge] / rates.basis[k][self.edge];
        }
        xi
    }
}

impl GaugePolicy for GaugeFixPolicy {
    fn coefficients(&self, _time: f64, _point: &PhasePoint, rates: &MultiplierRates) -> Vec<f64> {
        self.induced(rates)
    }

    fn describe(&self) -> String {
        format!("gauge-fix edge #{}", self.edge)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFixing {
    pub fixed_edge: usize,
    pub fixed_value: f64,
    /// The induced coefficient at the fixed point.
    pub induced_xi: f64,
    /// The input point with its tensions moved onto the fixing surface.
    pub point: PhasePoint,
    pub policy: GaugeFixPolicy,
}

/// Imposes `tension(fixed_edge) = fixed_value` and derives the policy that
/// keeps it there. Requires a one-dimensional self-stress space with a
/// nonzero component on the edge.
pub fn gauge_fix(framework: &RodFramework, point: &PhasePoint, fixed_edge: usize, fixed_value: f64) -> Result<GaugeFixing> {
    if fixed_edge >= framework.edge_count() {
        return Err(Error::UnknownEdge(format!("#{fixed_edge}")));
    }
    let label = framework.edge_label(fixed_edge);
    let not_fixable = |reason: String| Error::NotFixable {
        edge: label.clone(),
        reason,
    };
    let system = assemble_tension_system(framework, point.positions(), point.momenta())?;
    match system.gauge_dimension() {
        0 => return Err(not_fixable("gauge dimension is 0, tensions are already determined".into())),
        1 => {}
        k => {
            return Err(not_fixable(format!(
                "gauge dimension is {k}; a single rod condition cannot fix every coefficient"
            )))
        }
    }
    if system.self_stress_basis[0][fixed_edge].abs() <= 1e-12 {
        return Err(not_fixable("the self-stress does not act on this rod (fixing surface not transversal)".into()));
    }
    let coefficients = coefficients_for_edge_value(&system, fixed_edge, fixed_value)?;
    let tensions = solve_tensions(&system, &coefficients)?.tensions(&system);
    let fixed_point = point.clone().with_tensions(tensions)?;
    let rates = tangency_solve_multiplier_rates(framework, &fixed_point)?;
    let policy = GaugeFixPolicy { edge: fixed_edge };
    let induced_xi = policy.induced(&rates)[0];
    Ok(GaugeFixing {
        fixed_edge,
        fixed_value,
        induced_xi,
        point: fixed_point,
        policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{prepare_initial_data, PolicyShape};
    use crate::framework::reference_framework;
    use approx::assert_relative_eq;

    fn setup() -> (RodFramework, PhasePoint) {
        let (fw, cfg) = reference_framework(1.0, 1.0).unwrap();
        let p = prepare_initial_data(&fw, &cfg, 1.0, 0.0).unwrap();
        (fw, p)
    }

    #[test]
    fn classification_of_reference_functionals() {
        let (fw, p) = setup();
        let sys = assemble_tension_system(&fw, p.positions(), p.momenta()).unwrap();
        let f = classify_tension_functionals(&sys);
        assert_eq!(f.invariant.len() + f.pure_gauge.len(), 6);
        assert!(f.is_invariant(&DVector::from_vec(vec![1., 0., 0., 3., 0., 0.])));
        assert!(!f.is_invariant(&DVector::from_vec(vec![1., 0., 0., 0., 0., 0.])));
        // value on the family is m omega^2 whatever lambda is
        for lambda in [-1.0, 0.0, 2.5] {
            let c = coefficients_for_edge_value(&sys, 0, lambda).unwrap();
            let t = solve_tensions(&sys, &c).unwrap().tensions(&sys);
            assert_relative_eq!(t[0] + 3.0 * t[3], 1.0, epsilon = 1e-13);
        }

        let five = fw.without_edge("3-4").unwrap();
        let sys = assemble_tension_system(&five, p.positions(), p.momenta()).unwrap();
        let f = classify_tension_functionals(&sys);
        assert_eq!(f.invariant.len(), 5);
        assert!(f.is_invariant(&DVector::from_vec(vec![1., 0., 0., 0., 0.])));
    }

    #[test]
    fn fixing_inner_rod_gives_zero_xi() {
        let (fw, p) = setup();
        let fix = gauge_fix(&fw, &p, 0, 0.0).unwrap();
        assert!(fix.induced_xi.abs() < 1e-12);
        assert!(fix.point.tensions()[0].abs() < 1e-14);
        assert_relative_eq!(fix.point.tensions()[3], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn fixing_outer_rod_matches_family() {
        let (fw, p) = setup();
        let fix = gauge_fix(&fw, &p, 3, 1.0 / 3.0).unwrap();
        assert!((fix.point.tensions() - p.tensions()).amax() < 1e-13);
    }

    #[test]
    fn five_rods_cannot_be_fixed() {
        let (fw, p) = setup();
        let five = fw.without_edge("3-4").unwrap();
        let (_, cfg) = reference_framework(1.0, 1.0).unwrap();
        let p5 = prepare_initial_data(&five, &cfg, 1.0, 0.0).unwrap();
        assert!(matches!(gauge_fix(&five, &p5, 0, 0.0), Err(Error::NotFixable { .. })));
        assert!(gauge_fix(&fw, &p, 9, 0.0).is_err());
    }

    #[test]
    fn single_policy_has_no_spread() {
        let (fw, p) = setup();
        let cmp = gauge_orbit_sample(&fw, &p, &[NamedPolicy::new("zero", PolicyShape::ZERO)], 0.1, 0.01).unwrap();
        assert_eq!(cmp.invariant_report, InvariantReport::default());
        assert!(cmp.tension_spread.iter().all(|s| *s == 0.0));
        assert!(gauge_orbit_sample(&fw, &p, &[], 0.1, 0.01).is_err());
    }
}
