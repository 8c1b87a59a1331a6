//! Classical RK4 on (positions, momenta, tensions) with a projection back onto
//! the constraint manifold after every step.

use nalgebra::DVector;

use crate::constraint_chain::{particle_forces, residuals, velocities};
use crate::dynamics::projection::project_with;
use crate::dynamics::{hamiltonian, multiplier_rates_unchecked, GaugePolicy};
use crate::error::{Error, Result};
use crate::framework::{PhasePoint, RodFramework};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone)]
pub struct IntegrationOptions {
    pub step: f64,
    pub t_end: f64,
    pub tolerances: Tolerances,
    /// Record every n-th step (the final state is always recorded).
    pub record_every: usize,
}

impl IntegrationOptions {
    pub fn new(t_end: f64, step: f64) -> Self {
        Self {
            step,
            t_end,
            tolerances: Tolerances::default(),
            record_every: 1,
        }
    }
}

/// Observables recorded alongside each state.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub energy: f64,
    pub c1_max: f64,
    pub c2_max: f64,
    pub c3_max: f64,
    /// Total rod force on each particle (flattened like the positions).
    pub forces: DVector<f64>,
}

impl Sample {
    pub fn observe(framework: &RodFramework, point: &PhasePoint) -> Self {
        let [_, c1, c2, c3] = residuals(framework, point).max_abs();
        Self {
            energy: hamiltonian(framework, point),
            c1_max: c1,
            c2_max: c2,
            c3_max: c3,
            forces: particle_forces(framework, point.positions(), point.tensions()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &PhasePoint)> {
        self.times.last().copied().zip(self.states.last())
    }

    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples.first().map_or(0.0, |s| s.energy);
        self.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max)
    }

    /// Largest of the c1, c2, c3 residuals over all samples.
    pub fn constraint_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.c1_max.max(s.c2_max).max(s.c3_max))
            .fold(0.0, f64::max)
    }
}

struct Derivative {
    dq: DVector<f64>,
    dp: DVector<f64>,
    dl: DVector<f64>,
}

fn stage(
    framework: &RodFramework,
    policy: &dyn GaugePolicy,
    t: f64,
    q: DVector<f64>,
    p: DVector<f64>,
    l: DVector<f64>,
    tol: &Tolerances,
) -> Result<Derivative> {
    let point = PhasePoint::from_parts_unchecked(q, p, l);
    let (rates, _) = multiplier_rates_unchecked(framework, &point, tol)?;
    let xi = policy.coefficients(t, &point, &rates);
    Ok(Derivative {
        dq: velocities(framework, point.momenta()),
        dp: particle_forces(framework, point.positions(), point.tensions()),
        dl: rates.rates(&xi)?,
    })
}

pub fn integrate(
    framework: &RodFramework,
    initial: &PhasePoint,
    policy: &dyn GaugePolicy,
    t_end: f64,
    step: f64,
) -> Result<Trajectory> {
    integrate_with(framework, initial, policy, &IntegrationOptions::new(t_end, step))
}

/// Integrates from `t = 0` to `t_end`. The last step is shortened so the
/// final sample lands exactly on `t_end`.
pub fn integrate_with(
    framework: &RodFramework,
    initial: &PhasePoint,
    policy: &dyn GaugePolicy,
    options: &IntegrationOptions,
) -> Result<Trajectory> {
    let h = options.step;
    let t_end = options.t_end;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
    }
    let tol = &options.tolerances;
    let every = options.record_every.max(1);
    let at_step = |step: usize| {
        move |e: Error| match e {
            Error::ProjectionFailed {
                residual,
                iterations,
                ..
            } => Error::ProjectionFailed {
                step: Some(step),
                residual,
                iterations,
            },
            Error::LengthConstraintViolated { residual, .. } => Error::ProjectionFailed {
                step: Some(step),
                residual,
                iterations: 0,
            },
            other => other,
        }
    };

    let mut state = project_with(framework, initial, tol).map_err(at_step(0))?;
    let steps = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
    let mut trajectory = Trajectory {
        times: Vec::with_capacity(steps / every + 2),
        states: Vec::with_capacity(steps / every + 2),
        samples: Vec::with_capacity(steps / every + 2),
    };
    trajectory.times.push(0.0);
    trajectory.samples.push(Sample::observe(framework, &state));
    trajectory.states.push(state.clone());

    for n in 0..steps {
        let t = n as f64 * h;
        let t_next = if n + 1 == steps { t_end } else { (n + 1) as f64 * h };
        let dt = t_next - t;
        let q = state.positions();
        let p = state.momenta();
        let l = state.tensions();

        let k1 = stage(framework, policy, t, q.clone(), p.clone(), l.clone(), tol)?;
        let k2 = stage(
            framework,
            policy,
            t + dt / 2.0,
            q + &k1.dq * (dt / 2.0),
            p + &k1.dp * (dt / 2.0),
            l + &k1.dl * (dt / 2.0),
            tol,
        )?;
        let k3 = stage(
            framework,
            policy,
            t + dt / 2.0,
            q + &k2.dq * (dt / 2.0),
            p + &k2.dp * (dt / 2.0),
            l + &k2.dl * (dt / 2.0),
            tol,
        )?;
        let k4 = stage(
            framework,
            policy,
            t_next,
            q + &k3.dq * dt,
            p + &k3.dp * dt,
            l + &k3.dl * dt,
            tol,
        )?;
        let w = dt / 6.0;
        let q_new = q + (&k1.dq + &k2.dq * 2.0 + &k3.dq * 2.0 + &k4.dq) * w;
        let p_new = p + (&k1.dp + &k2.dp * 2.0 + &k3.dp * 2.0 + &k4.dp) * w;
        let l_new = l + (&k1.dl + &k2.dl * 2.0 + &k3.dl * 2.0 + &k4.dl) * w;

        let raw = PhasePoint::from_parts_unchecked(q_new, p_new, l_new);
        state = project_with(framework, &raw, tol).map_err(at_step(n + 1))?;

        if (n + 1) % every == 0 || n + 1 == steps {
            trajectory.times.push(t_next);
            trajectory.samples.push(Sample::observe(framework, &state));
            trajectory.states.push(state.clone());
        }
    }
    Ok(trajectory)
}
