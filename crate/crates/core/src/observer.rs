//! Velocity observers for the two decoupled subsystems.
//!
//! Both subsystems share the gains `(k_o1, k_o2)`:
//!
//! ```text
//! x̂̇₁ = −k_o1 (x̂₁ − x₁) + ẑ₁     ẑ̇₁ = −k_o2 (x̂₁ − x₁) + u₁
//! x̂̇₂ = −k_o1 (x̂₂ − x₂) + ẑ₂     ẑ̇₂ = −k_o2 (x̂₂ − x₂) + δ ẑ₁² + D₂₁u₁ + D₂₂u₂
//! ```
//!
//! The observer sees the reconstructed `x`, the joint angles and its own
//! input. It never sees the true `z`.

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::ManipulatorParams;
use crate::linalg::{sub2, Mat2, Vec2};
use crate::transform::{d_matrix, delta};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ObserverState {
    pub xhat: Vec2,
    pub zhat: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ObserverErrors {
    pub xtilde: Vec2,
    pub ztilde: Vec2,
}

impl ObserverErrors {
    pub fn between(obs: &ObserverState, x: Vec2, z: Vec2) -> Self {
        ObserverErrors {
            xtilde: sub2(obs.xhat, x),
            ztilde: sub2(obs.zhat, z),
        }
    }
}

/// Observer gains. Kept separate from the controller gains so the
/// derivative below cannot depend on anything else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains {
    pub ko1: f64,
    pub ko2: f64,
}

/// `(x̂̇, ẑ̇)`.
pub fn observer_derivative(
    params: &ManipulatorParams,
    obs: &ObserverState,
    x_measured: Vec2,
    q: Vec2,
    u: Vec2,
    gains: ObserverGains,
) -> (Vec2, Vec2) {
    let xt = sub2(obs.xhat, x_measured);
    let d = d_matrix(params, q).0;
    let zh1 = obs.zhat[0];
    let xhat_dot = [
        -gains.ko1 * xt[0] + obs.zhat[0],
        -gains.ko1 * xt[1] + obs.zhat[1],
    ];
    let zhat_dot = [
        -gains.ko2 * xt[0] + u[0],
        -gains.ko2 * xt[1] + delta(params, q[1]) * zh1 * zh1 + d[1][0] * u[0] + d[1][1] * u[1],
    ];
    (xhat_dot, zhat_dot)
}

/// Error-dynamics matrix shared by both subsystems and its spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorMatrix {
    pub matrix: Mat2Rows,
    #[serde(serialize_with = "serialize_complex_pair")]
    pub eigenvalues: [Complex64; 2],
    pub hurwitz: bool,
}

/// Row view for serialization.
pub type Mat2Rows = [[f64; 2]; 2];

fn serialize_complex_pair<S: serde::Serializer>(
    v: &[Complex64; 2],
    s: S,
) -> Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
    pairs.serialize(s)
}

/// `Ã = [[−k_o1, 1], [−k_o2, 0]]`, characteristic polynomial
/// `λ² + k_o1 λ + k_o2`.
pub fn error_matrix(gains: ObserverGains) -> ErrorMatrix {
    let m = Mat2::new(-gains.ko1, 1.0, -gains.ko2, 0.0);
    let tr = m.trace();
    let det = m.det();
    let disc = Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
    let mut eigenvalues = [(tr - disc) / 2.0, (tr + disc) / 2.0];
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ErrorMatrix {
        matrix: m.0,
        eigenvalues,
        hurwitz: eigenvalues.iter().all(|e| e.re < 0.0),
    }
}

/// Coefficient `h = δ(q₂)(z̃₁ + 2z₁)` through which subsystem 1's error
/// drives subsystem 2's.
pub fn cascade_gain(params: &ManipulatorParams, ztilde1: f64, z1: f64, q2: f64) -> f64 {
    delta(params, q2) * (ztilde1 + 2.0 * z1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{transformed_derivative, TransformedState};

    fn p() -> ManipulatorParams {
        ManipulatorParams::reference()
    }

    const GAINS: ObserverGains = ObserverGains { ko1: 3.0, ko2: 5.0 };

    #[test]
    fn exact_observer_matches_plant() {
        let plant = TransformedState {
            q: [0.3, 1.2],
            z: [0.7, -0.4],
            x: [1.5, 0.2],
        };
        let u = [0.25, -1.5];
        let obs = ObserverState {
            xhat: plant.x,
            zhat: plant.z,
        };
        let (xd, zd) = transformed_derivative(&p(), &plant, u);
        let (xhd, zhd) = observer_derivative(&p(), &obs, plant.x, plant.q, u, GAINS);
        assert_eq!(xd, xhd);
        assert!((zd[0] - zhd[0]).abs() < 1e-15 && (zd[1] - zhd[1]).abs() < 1e-14);
    }

    #[test]
    fn position_error_pulls_back() {
        let obs = ObserverState {
            xhat: [1.0, 0.0],
            zhat: [0.4, 0.0],
        };
        let (xhd, _) = observer_derivative(&p(), &obs, [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], GAINS);
        assert_eq!(xhd[0], 0.4 - 3.0);
    }

    #[test]
    fn reference_spectrum() {
        let e = error_matrix(GAINS);
        assert!(e.hurwitz);
        let im = (20.0_f64 - 9.0).sqrt() / 2.0;
        assert!((e.eigenvalues[0].re + 1.5).abs() < 1e-15);
        assert!((e.eigenvalues[0].im + im).abs() < 1e-15);
        assert!((e.eigenvalues[1].im - im).abs() < 1e-15);
    }

    #[test]
    fn repeated_and_boundary_spectra() {
        let e = error_matrix(ObserverGains { ko1: 2.0, ko2: 1.0 });
        assert!(e.hurwitz);
        for l in e.eigenvalues {
            assert_eq!(l, Complex64::new(-1.0, 0.0));
        }
        let e = error_matrix(ObserverGains { ko1: 2.0, ko2: 0.0 });
        assert!(!e.hurwitz);
        assert_eq!(e.eigenvalues[1].re, 0.0);
    }

    #[test]
    fn cascade_gain_examples() {
        assert_eq!(cascade_gain(&p(), 0.0, 0.0, 1.0), 0.0);
        assert_eq!(cascade_gain(&p(), 3.0, -2.0, 0.0), 0.0);
        let h = cascade_gain(&p(), 0.5, 1.0, 0.8);
        assert_eq!(h, delta(&p(), 0.8) * 2.5);
    }
}
