//! Reduced phase space of the four-mass system: centre of mass, orientation
//! and their conjugate momenta.
//!
//! The orientation is the polar angle of mass 2 seen from the centre of mass.
//! The moment of inertia is `3 m l^2` (three masses at distance `l`), so
//! `H_R = (p_x^2 + p_y^2) / (8m) + p_theta^2 / (6 m l^2)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::framework::{center_of_mass, PhasePoint, RodFramework};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub x: f64,
    pub y: f64,
    /// In `(-pi, pi]`.
    pub theta: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_theta: f64,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Mass `m` and centre-to-corner rod length `l` of a framework with the
/// reference topology; errors for any other shape.
pub fn reference_parameters(framework: &RodFramework) -> Result<(f64, f64)> {
    let wrong = |msg: &str| Error::WrongShape(msg.to_string());
    if framework.vertex_count() != 4 || framework.edge_count() != 6 {
        return Err(wrong("expected 4 masses joined by 6 rods"));
    }
    let m = framework.mass(0);
    if framework.vertices().iter().any(|v| (v.mass - m).abs() > 1e-12 * m) {
        return Err(wrong("masses must be equal"));
    }
    // complete graph on 4 vertices, edges sorted: the first three leave vertex 0
    let edges = framework.edges();
    let ell = edges[0].rest_length;
    let outer = ell * 3f64.sqrt();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b;
    if !edges[..3].iter().all(|e| e.ends[0] == 0 && close(e.rest_length, ell))
        || !edges[3..].iter().all(|e| close(e.rest_length, outer))
    {
        return Err(wrong("rods from the first mass must share a length l, the others must be l*sqrt(3)"));
    }
    Ok((m, ell))
}

pub fn reduce(framework: &RodFramework, point: &PhasePoint) -> Result<ReducedState> {
    reference_parameters(framework)?;
    let q = point.positions();
    let p = point.momenta();
    let c = center_of_mass(framework, q);
    let mut p_x = 0.0;
    let mut p_y = 0.0;
    let mut p_theta = 0.0;
    for i in 0..4 {
        let (rx, ry) = (q[2 * i] - c[0], q[2 * i + 1] - c[1]);
        p_x += p[2 * i];
        p_y += p[2 * i + 1];
        p_theta += rx * p[2 * i + 1] - ry * p[2 * i];
    }
    let theta = wrap_angle((q[3] - c[1]).atan2(q[2] - c[0]));
    Ok(ReducedState {
        x: c[0],
        y: c[1],
        theta,
        p_x,
        p_y,
        p_theta,
    })
}

pub fn reduced_hamiltonian(state: &ReducedState, m: f64, ell: f64) -> f64 {
    (state.p_x * state.p_x + state.p_y * state.p_y) / (8.0 * m)
        + state.p_theta * state.p_theta / (6.0 * m * ell * ell)
}

/// Exact flow of the reduced Hamiltonian over a time `t`.
pub fn reduced_flow(state: &ReducedState, m: f64, ell: f64, t: f64) -> ReducedState {
    ReducedState {
        x: state.x + t * state.p_x / (4.0 * m),
        y: state.y + t * state.p_y / (4.0 * m),
        theta: wrap_angle(state.theta + t * state.p_theta / (3.0 * m * ell * ell)),
        ..*state
    }
}

/// Componentwise distance with the angle compared on the circle.
pub fn reduced_distance(a: &ReducedState, b: &ReducedState) -> f64 {
    [
        a.x - b.x,
        a.y - b.y,
        wrap_angle(a.theta - b.theta),
        a.p_x - b.p_x,
        a.p_y - b.p_y,
        a.p_theta - b.p_theta,
    ]
    .iter()
    .fold(0.0, |acc, d| acc.max(d.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{hamiltonian, prepare_initial_data};
    use crate::framework::{reference_framework, Configuration};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn rotating_point_reduces() {
        let (fw, cfg) = reference_framework(1.0, 1.0).unwrap();
        let point = prepare_initial_data(&fw, &cfg, 1.0, 0.0).unwrap();
        let r = reduce(&fw, &point).unwrap();
        assert!(r.x.abs() < 1e-15 && r.y.abs() < 1e-15);
        assert_relative_eq!(r.theta, PI / 2.0);
        assert!(r.p_x.abs() < 1e-15 && r.p_y.abs() < 1e-15);
        assert_relative_eq!(r.p_theta, 3.0, epsilon = 1e-14);
        assert_relative_eq!(reduced_hamiltonian(&r, 1.0, 1.0), 1.5, epsilon = 1e-14);
        assert_relative_eq!(reduced_hamiltonian(&r, 1.0, 1.0), hamiltonian(&fw, &point), epsilon = 1e-14);

        let back = reduced_flow(&r, 1.0, 1.0, 2.0 * PI);
        assert!(reduced_distance(&back, &r) < 1e-14);
    }

    #[test]
    fn translation_moves_only_the_centre() {
        let (fw, cfg) = reference_framework(1.0, 1.0).unwrap();
        let shifted = DVector::from_fn(8, |k, _| cfg.coords()[k] + if k % 2 == 0 { 1.0 } else { 2.0 });
        let shifted = Configuration::new(&fw, shifted).unwrap();
        let point = PhasePoint::at_rest(&fw, &shifted).unwrap();
        let r = reduce(&fw, &point).unwrap();
        assert_relative_eq!(r.x, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.y, 2.0, epsilon = 1e-15);
        assert_relative_eq!(r.theta, PI / 2.0, epsilon = 1e-15);
        assert_eq!([r.p_x, r.p_y, r.p_theta], [0.0; 3]);
    }

    #[test]
    fn reduced_energy_and_flow() {
        let s = ReducedState {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
            p_x: 4.0,
            p_y: 0.0,
            p_theta: 0.0,
        };
        assert_eq!(reduced_hamiltonian(&s, 1.0, 1.0), 2.0);
        let later = reduced_flow(&s, 1.0, 1.0, 0.75);
        assert_relative_eq!(later.x, 0.75);
        let still = ReducedState { p_x: 0.0, ..s };
        assert_eq!(reduced_flow(&still, 1.0, 1.0, 5.0), still);
        assert_eq!(reduced_hamiltonian(&still, 1.0, 1.0), 0.0);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let (fw, cfg) = reference_framework(1.0, 1.0).unwrap();
        let five = fw.without_edge("3-4").unwrap();
        let point = PhasePoint::at_rest(&five, &cfg).unwrap();
        assert!(matches!(reduce(&five, &point), Err(Error::WrongShape(_))));
    }

    #[test]
    fn angle_wrapping() {
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0);
        assert_relative_eq!(wrap_angle(0.1 + 4.0 * PI), 0.1, epsilon = 1e-14);
    }
}
