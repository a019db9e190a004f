//! Velocity change of coordinates `z = T(q) q̇` that removes the cross
//! velocity terms from the arm dynamics, and the reconstructed position-like
//! state `x` with `ẋ = z`.
//!
//! With the upper-triangular choice
//!
//! ```text
//! T(q) = [M₁₁  M₁₂ ]      T₂₂ = sqrt(det M / M₁₁)
//!        [0    T₂₂ ]
//! ```
//!
//! the arm becomes
//!
//! ```text
//! q̇ = A(q) z,   ż = f(q, z) + D(q) u,   u = τ − G(q)
//! f = [0, δ(q₂) z₁²]
//! ```
//!
//! with `A = T⁻¹`, `D = T M⁻¹` and
//! `δ(q₂) = −O₂ sin q₂ / (sqrt(M₁₁ det M) · M₁₁)`. Every matrix depends on
//! `q₂` alone.

use crate::dynamics::{JointState, ManipulatorParams, SWEEP_STEP};
use crate::linalg::{add2, Mat2, Vec2};
use crate::quadrature;

/// `T₂₂(q₂) = sqrt(det M / M₁₁)`.
pub fn t22(params: &ManipulatorParams, q2: f64) -> f64 {
    (params.inertia_det(q2) / params.m11(q2)).sqrt()
}

/// Closed-form `∂T₂₂/∂q₂`.
pub fn t22_derivative(params: &ManipulatorParams, q2: f64) -> f64 {
    let o = params.lumped();
    let (s, c) = q2.sin_cos();
    let m11 = params.m11(q2);
    let det = params.inertia_det(q2);
    let ddet = 2.0 * o[1] * o[1] * c * s;
    let dm11 = -2.0 * o[1] * s;
    (ddet * m11 - det * dm11) / (2.0 * t22(params, q2) * m11 * m11)
}

pub fn transform_matrix(params: &ManipulatorParams, q: Vec2) -> Mat2 {
    let q2 = q[1];
    Mat2::new(params.m11(q2), params.m12(q2), 0.0, t22(params, q2))
}

/// Residual of the condition that removes the `q̇₁q̇₂` term from `ż₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeResidual {
    /// `∂T₂₂/∂q₂` minus the required coefficient of `q̇₂²`.
    pub residual: f64,
    /// `∂T₂₂/∂q₁`, which must vanish for the cross term to drop out.
    pub dt22_dq1: f64,
}

/// Coefficient `(T₂₂ / det M) · O₂ sin q₂ · M₁₂ (M₁₁ − M₁₂) / M₁₁` that
/// `∂T₂₂/∂q₂` has to equal.
pub fn pde_rhs(params: &ManipulatorParams, q2: f64) -> f64 {
    let o = params.lumped();
    let m11 = params.m11(q2);
    let m12 = params.m12(q2);
    t22(params, q2) / params.inertia_det(q2) * o[1] * q2.sin() * m12 * (m11 - m12) / m11
}

pub fn pde_residual(params: &ManipulatorParams, q2: f64) -> PdeResidual {
    PdeResidual {
        residual: t22_derivative(params, q2) - pde_rhs(params, q2),
        // T₂₂ has no q₁ argument at all.
        dt22_dq1: 0.0,
    }
}

/// Same residual with the derivatives replaced by central differences of
/// step `h`, evaluated through [`transform_matrix`] at full `q`.
pub fn pde_residual_fd(params: &ManipulatorParams, q2: f64, h: f64) -> PdeResidual {
    let q1 = 0.731;
    let t = |a: f64, b: f64| transform_matrix(params, [a, b]).0[1][1];
    let d2 = (t(q1, q2 + h) - t(q1, q2 - h)) / (2.0 * h);
    let d1 = (t(q1 + h, q2) - t(q1 - h, q2)) / (2.0 * h);
    PdeResidual {
        residual: d2 - pde_rhs(params, q2),
        dt22_dq1: d1,
    }
}

/// `sqrt(M₁₁ det M)`, shared by `A`, `D` and `δ`.
fn root_m11_det(params: &ManipulatorParams, q2: f64) -> f64 {
    (params.m11(q2) * params.inertia_det(q2)).sqrt()
}

/// `A(q) = T(q)⁻¹`, so that `q̇ = A z`.
pub fn a_matrix(params: &ManipulatorParams, q: Vec2) -> Mat2 {
    let q2 = q[1];
    let m11 = params.m11(q2);
    Mat2::new(
        1.0 / m11,
        -params.m12(q2) / root_m11_det(params, q2),
        0.0,
        (m11 / params.inertia_det(q2)).sqrt(),
    )
}

/// `D(q) = T(q) M(q)⁻¹`, the input matrix of the transformed system.
pub fn d_matrix(params: &ManipulatorParams, q: Vec2) -> Mat2 {
    let q2 = q[1];
    Mat2::new(
        1.0,
        0.0,
        -params.m12(q2) / root_m11_det(params, q2),
        (params.m11(q2) / params.inertia_det(q2)).sqrt(),
    )
}

/// `D(q)⁻¹` in closed form: `D` is lower triangular with unit `D₁₁`.
pub fn d_inverse(params: &ManipulatorParams, q: Vec2) -> Mat2 {
    let d = d_matrix(params, q).0;
    Mat2::new(1.0, 0.0, -d[1][0] / d[1][1], 1.0 / d[1][1])
}

pub fn delta(params: &ManipulatorParams, q2: f64) -> f64 {
    -params.lumped()[1] * q2.sin() / (root_m11_det(params, q2) * params.m11(q2))
}

/// `f(q, z) = [0, δ(q₂) z₁²]`.
pub fn drift(params: &ManipulatorParams, q: Vec2, z: Vec2) -> Vec2 {
    [0.0, delta(params, q[1]) * z[0] * z[0]]
}

/// Everything the transformed system needs at one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformMatrices {
    pub t: Mat2,
    pub a: Mat2,
    pub d: Mat2,
    pub delta: f64,
}

impl TransformMatrices {
    pub fn at(params: &ManipulatorParams, q: Vec2) -> Self {
        TransformMatrices {
            t: transform_matrix(params, q),
            a: a_matrix(params, q),
            d: d_matrix(params, q),
            delta: delta(params, q[1]),
        }
    }
}

/// Numeric supremum of `|δ|` next to the closed-form value quoted for it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DeltaBound {
    /// Max of `|δ(q₂)|` over a `q₂` sweep at [`SWEEP_STEP`]. Authoritative.
    pub delta_bar: f64,
    /// `O₂ / sqrt(km) · (O₁ − 2O₂)^(2/3)`, reported for comparison only.
    pub closed_form: f64,
}

pub fn delta_bar(params: &ManipulatorParams) -> DeltaBound {
    let steps = (std::f64::consts::PI / SWEEP_STEP).ceil() as usize;
    let sup = (0..=steps)
        .map(|k| delta(params, (k as f64 * SWEEP_STEP).min(std::f64::consts::PI)).abs())
        .fold(0.0, f64::max);
    DeltaBound {
        delta_bar: sup,
        closed_form: delta_bar_closed_form(params.lumped(), params.km()),
    }
}

pub fn delta_bar_closed_form(o: [f64; 5], km: f64) -> f64 {
    o[1] / km.sqrt() * (o[0] - 2.0 * o[1]).powf(2.0 / 3.0)
}

/// `x₂(q₂) = ∫₀^{q₂} T₂₂(s) ds`.
pub fn x2_of(params: &ManipulatorParams, q2: f64) -> f64 {
    quadrature::integrate(|s| t22(params, s), 0.0, q2)
}

/// Initial reconstructed state at configuration `q`.
///
/// `x₁` is the line integral of `M₁₁(q₂)dq₁ + M₁₂(q₂)dq₂` from the origin,
/// first along `q₂` then along `q₁`; the form is not closed, so later values
/// come from [`x_path_update`] or from integrating `ẋ = z`.
pub fn x_initial(params: &ManipulatorParams, q: Vec2) -> Vec2 {
    let o = params.lumped();
    let [q1, q2] = q;
    [
        params.m11(q2) * q1 + o[2] * q2 + o[1] * q2.sin(),
        x2_of(params, q2),
    ]
}

/// Inverse of [`x_initial`]. `x₂` is strictly increasing in `q₂`, so the
/// inverse is unique; it is found by safeguarded Newton.
pub fn q_from_x_initial(params: &ManipulatorParams, x: Vec2) -> Vec2 {
    let target = x[1];
    // T₂₂ is bounded above by sqrt(O₃), below by sqrt(min det / max M₁₁).
    let o = params.lumped();
    let slope_lo = ((o[0] * o[2] - o[2] * o[2] - o[1] * o[1]) / (o[0] + 2.0 * o[1])).sqrt();
    let mut lo = -target.abs() / slope_lo - 1.0;
    let mut hi = target.abs() / slope_lo + 1.0;
    let mut q2 = target / o[2].sqrt();
    for _ in 0..200 {
        let f = x2_of(params, q2) - target;
        if f.abs() < 1e-14 * (1.0 + target.abs()) {
            break;
        }
        if f > 0.0 {
            hi = hi.min(q2);
        } else {
            lo = lo.max(q2);
        }
        let mut next = q2 - f / t22(params, q2);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - q2).abs() < 1e-15 {
            q2 = next;
            break;
        }
        q2 = next;
    }
    let q1 = (x[0] - o[2] * q2 - o[1] * q2.sin()) / params.m11(q2);
    [q1, q2]
}

/// Advances the reconstructed `x` from one position sample to the next
/// using positions only: a midpoint rule for the non-exact `x₁` form and
/// quadrature for `x₂`.
pub fn x_path_update(params: &ManipulatorParams, x_prev: Vec2, q_prev: Vec2, q_next: Vec2) -> Vec2 {
    let mid_q2 = 0.5 * (q_prev[1] + q_next[1]);
    let dq1 = q_next[0] - q_prev[0];
    let dq2 = q_next[1] - q_prev[1];
    [
        x_prev[0] + params.m11(mid_q2) * dq1 + params.m12(mid_q2) * dq2,
        x_prev[1] + quadrature::integrate(|s| t22(params, s), q_prev[1], q_next[1]),
    ]
}

/// Arm state in transformed coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransformedState {
    pub q: Vec2,
    pub z: Vec2,
    pub x: Vec2,
}

impl TransformedState {
    /// Maps a joint-space state, seeding `x` from [`x_initial`].
    pub fn from_joint(params: &ManipulatorParams, joint: &JointState) -> Self {
        TransformedState {
            q: joint.q,
            z: transform_matrix(params, joint.q).mul_vec(joint.qdot),
            x: x_initial(params, joint.q),
        }
    }

    pub fn joint_rates(&self, params: &ManipulatorParams) -> Vec2 {
        a_matrix(params, self.q).mul_vec(self.z)
    }
}

/// `(ẋ, ż)` of the decoupled system:
/// `ẋ₁ = z₁, ż₁ = u₁, ẋ₂ = z₂, ż₂ = δ z₁² + D₂₁u₁ + D₂₂u₂`.
pub fn transformed_derivative(
    params: &ManipulatorParams,
    state: &TransformedState,
    u: Vec2,
) -> (Vec2, Vec2) {
    let zdot = add2(
        drift(params, state.q, state.z),
        d_matrix(params, state.q).mul_vec(u),
    );
    (state.z, zdot)
}

/// `τ = u + G(q)`.
pub fn input_to_torque(params: &ManipulatorParams, q: Vec2, u: Vec2) -> Vec2 {
    add2(u, params.gravity_torque(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sub2;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn p() -> ManipulatorParams {
        ManipulatorParams::reference()
    }

    #[test]
    fn transform_at_straight_arm() {
        let t = transform_matrix(&p(), [0.0, 0.0]);
        let det: f64 = 0.1507 * 0.012 - 0.036 * 0.036;
        assert!((det - 0.000_512_4).abs() < 1e-15);
        let want = Mat2::new(0.1507, 0.036, 0.0, (det / 0.1507_f64).sqrt());
        assert!(t.max_abs_diff(&want) < 1e-15);
        assert!((t.0[1][1] - 0.058_310).abs() < 1e-5);
    }

    #[test]
    fn transform_is_even_with_positive_determinant() {
        for k in -50..=50 {
            let q2 = k as f64 * 0.13;
            let t = transform_matrix(&p(), [0.2, q2]);
            assert_eq!(t, transform_matrix(&p(), [0.2, -q2]));
            assert_eq!(t.0[1][0], 0.0);
            assert!(t.det() > 0.0);
            assert!((t.det() - t.0[0][0] * t.0[1][1]).abs() < 1e-18);
        }
    }

    #[test]
    fn pde_residual_vanishes_at_zero() {
        let r = pde_residual(&p(), 0.0);
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.dt22_dq1, 0.0);
    }

    #[test]
    fn pde_residual_fd_agrees() {
        for k in 0..40 {
            let q2 = -PI + k as f64 * 0.157;
            let fd = pde_residual_fd(&p(), q2, 1e-6);
            assert!(fd.residual.abs() < 1e-5, "{q2}: {fd:?}");
            assert!(fd.dt22_dq1.abs() < 1e-12);
        }
    }

    #[test]
    fn a_inverts_t_and_d_matches_definition() {
        for k in 0..200 {
            let q = [0.1 * k as f64, -7.0 + 0.07 * k as f64];
            let t = transform_matrix(&p(), q);
            assert!((a_matrix(&p(), q) * t).max_abs_diff(&Mat2::IDENTITY) < 1e-12);
            let d_def = t * p().inertia(q).inverse().unwrap();
            assert!(d_matrix(&p(), q).max_abs_diff(&d_def) < 1e-12);
            assert!((d_inverse(&p(), q) * d_matrix(&p(), q)).max_abs_diff(&Mat2::IDENTITY) < 1e-12);
        }
    }

    #[test]
    fn delta_is_odd() {
        assert_eq!(delta(&p(), 0.0), 0.0);
        for q2 in [0.3, 1.0, 2.9, 5.5] {
            assert_eq!(delta(&p(), -q2), -delta(&p(), q2));
        }
    }

    #[test]
    fn delta_at_quarter_turn() {
        // M₁₁(π/2) = O₁, det M(π/2) = O₁O₃ − O₃²; cos(π/2) ≈ 6e-17 only
        // perturbs the last few bits
        let (o1, o2, o3) = (0.1027_f64, 0.024_f64, 0.012_f64);
        let want = -o2 / ((o1 * (o1 * o3 - o3 * o3)).sqrt() * o1);
        assert!((delta(&p(), FRAC_PI_2) - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn drift_shape() {
        let f = drift(&p(), [0.0, 1.1], [2.0, -5.0]);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], delta(&p(), 1.1) * 4.0);
    }

    #[test]
    fn delta_bound_dominates_samples() {
        let b = delta_bar(&p());
        assert!(b.delta_bar >= delta(&p(), FRAC_PI_2).abs());
        assert!(b.closed_form > 0.0);
        assert_eq!(delta_bar_closed_form([0.1, 0.0, 0.01, 0.1, 0.1], 0.05), 0.0);
    }

    #[test]
    fn x_initial_examples() {
        assert_eq!(x_initial(&p(), [0.0, 0.0]), [0.0, 0.0]);
        let x = x_initial(&p(), [1.0, 0.0]);
        assert!((x[0] - 0.1507).abs() < 1e-15 && x[1] == 0.0);
        let mut last = f64::NEG_INFINITY;
        for k in -30..=30 {
            let x2 = x2_of(&p(), 0.25 * k as f64);
            assert!(x2 > last);
            last = x2;
        }
    }

    #[test]
    fn x_initial_inverts() {
        for x in [[0.0, 0.0], [3.0, -3.0], [-2.5, 1.7], [40.0, -35.0]] {
            let q = q_from_x_initial(&p(), x);
            let back = x_initial(&p(), q);
            assert!(
                (back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12,
                "{x:?}"
            );
        }
    }

    #[test]
    fn path_update_examples() {
        let x = [0.4, -0.2];
        assert_eq!(x_path_update(&p(), x, [0.3, 0.9], [0.3, 0.9]), x);
        let moved = x_path_update(&p(), [0.0, 0.0], [0.0, 0.8], [1.0, 0.8]);
        assert!((moved[0] - p().m11(0.8)).abs() < 1e-15);
        assert_eq!(moved[1], 0.0);
    }

    #[test]
    fn transformed_derivative_examples() {
        let s = TransformedState {
            q: [0.2, 0.7],
            z: [0.0, 0.0],
            x: [1.0, 1.0],
        };
        let (xd, zd) = transformed_derivative(&p(), &s, [0.0, 0.0]);
        assert_eq!((xd, zd), ([0.0, 0.0], [0.0, 0.0]));
        let s = TransformedState { z: [1.0, 0.0], ..s };
        let (_, zd) = transformed_derivative(&p(), &s, [0.0, 0.0]);
        assert_eq!(zd[1], delta(&p(), 0.7));
        assert_eq!(zd[0], 0.0);
    }

    #[test]
    fn torque_mapping() {
        let q = [0.3, -0.4];
        assert_eq!(input_to_torque(&p(), q, [0.0, 0.0]), p().gravity_torque(q));
        let u = sub2([0.0, 0.0], p().gravity_torque(q));
        assert_eq!(input_to_torque(&p(), q, u), [0.0, 0.0]);
    }
}
