//! Reference trajectory broadcast by the leader.
//!
//! The trajectory `[2t, sin t]` can be read in two coordinate systems:
//!
//! * [`LeaderKind::Transformed`] (default): `x₀ = [2t, sin t]`,
//!   `z₀ = [2, cos t]`, `ż₀ = [0, −sin t]`. The leader's joint angles are
//!   recovered by integrating `q̇₀ = A(q₀) z₀` from `q₀(0) = 0`.
//! * [`LeaderKind::Joint`]: `q₀ = [2t, sin t]`. Then `z₀ = T(q₀) q̇₀` and
//!   `x₀` is the line integral of `z₀` along that path, which has a closed
//!   form up to the periodic integral `∫ cos(sin s) ds`.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dynamics::ManipulatorParams;
use crate::linalg::{add2, norm2, Vec2};
use crate::quadrature;
use crate::transform::{a_matrix, t22_derivative, transform_matrix, x2_of};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaderKind {
    #[default]
    Transformed,
    Joint,
}

/// Leader position, velocity and acceleration in transformed coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LeaderSample {
    pub x0: Vec2,
    pub z0: Vec2,
    pub z0dot: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderModel {
    pub kind: LeaderKind,
    pub params: ManipulatorParams,
    /// Claimed bound on `‖ż₀‖`.
    pub zbar0: f64,
}

impl LeaderModel {
    pub fn new(kind: LeaderKind, params: ManipulatorParams, zbar0: f64) -> Self {
        LeaderModel {
            kind,
            params,
            zbar0,
        }
    }

    pub fn sample(&self, t: f64) -> LeaderSample {
        match self.kind {
            LeaderKind::Transformed => LeaderSample {
                x0: [2.0 * t, t.sin()],
                z0: [2.0, t.cos()],
                z0dot: [0.0, -t.sin()],
            },
            LeaderKind::Joint => self.joint_sample(t),
        }
    }

    fn joint_sample(&self, t: f64) -> LeaderSample {
        let p = &self.params;
        let o = p.lumped();
        let (s, c) = t.sin_cos();
        let q = [2.0 * t, s];
        let qd = [2.0, c];
        let qdd = [0.0, -s];
        let tm = transform_matrix(p, q);
        let z0 = tm.mul_vec(qd);
        // dT/dt = (∂T/∂q₂) q̇₂
        let sq = s.sin();
        let dt11 = -2.0 * o[1] * sq * qd[1];
        let dt12 = -o[1] * sq * qd[1];
        let dt22 = t22_derivative(p, s) * qd[1];
        let z0dot = add2([dt11 * qd[0] + dt12 * qd[1], dt22 * qd[1]], tm.mul_vec(qdd));
        let x1 = 2.0 * o[0] * t + 4.0 * o[1] * cos_sin_integral(t) + o[2] * s + o[1] * sq;
        LeaderSample {
            x0: [x1, x2_of(p, s)],
            z0,
            z0dot,
        }
    }

    /// Joint angles at `t = 0`.
    pub fn initial_q(&self) -> Vec2 {
        [0.0, 0.0]
    }

    /// `q̇₀` given the current integrated `q₀`.
    pub fn q_rate(&self, t: f64, q0: Vec2) -> Vec2 {
        match self.kind {
            LeaderKind::Transformed => a_matrix(&self.params, q0).mul_vec(self.sample(t).z0),
            LeaderKind::Joint => [2.0, t.cos()],
        }
    }

    /// Joint angles in closed form, when the interpretation provides one.
    pub fn joint_angles(&self, t: f64) -> Option<Vec2> {
        match self.kind {
            LeaderKind::Transformed => None,
            LeaderKind::Joint => Some([2.0 * t, t.sin()]),
        }
    }

    /// Largest sampled `‖ż₀‖` on `[0, t_end]`.
    pub fn acceleration_sup(&self, t_end: f64, step: f64) -> f64 {
        let n = (t_end / step).ceil().max(1.0) as usize;
        (0..=n)
            .map(|k| norm2(self.sample((k as f64 * step).min(t_end)).z0dot))
            .fold(0.0, f64::max)
    }

    /// Sampled check of `sup ‖ż₀‖ ≤ z̄₀`.
    pub fn audit(&self, t_end: f64, step: f64) -> LeaderAudit {
        let sup = self.acceleration_sup(t_end, step);
        LeaderAudit {
            sampled_sup: sup,
            zbar0: self.zbar0,
            ok: sup <= self.zbar0 + 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeaderAudit {
    pub sampled_sup: f64,
    pub zbar0: f64,
    pub ok: bool,
}

/// `C(t) = ∫₀ᵗ cos(sin s) ds`, using its `2π` periodicity.
pub fn cos_sin_integral(t: f64) -> f64 {
    static PERIOD: OnceLock<f64> = OnceLock::new();
    let full = *PERIOD.get_or_init(|| quadrature::integrate(|s| s.sin().cos(), 0.0, TAU));
    let k = (t / TAU).floor();
    let rest = t - k * TAU;
    k * full + quadrature::integrate(|s| s.sin().cos(), 0.0, rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{FnSystem, Rk4};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn model(kind: LeaderKind) -> LeaderModel {
        LeaderModel::new(kind, ManipulatorParams::reference(), 1.0)
    }

    #[test]
    fn transformed_samples() {
        let m = model(LeaderKind::Transformed);
        let s = m.sample(0.0);
        assert_eq!(s.x0, [0.0, 0.0]);
        assert_eq!(s.z0, [2.0, 1.0]);
        assert_eq!(s.z0dot[1], 0.0);
        let s = m.sample(FRAC_PI_2);
        assert_eq!(s.x0, [PI, 1.0]);
        assert_eq!(s.z0dot, [0.0, -1.0]);
        let sup = m.acceleration_sup(100.0, 1e-3);
        assert!((sup - 1.0).abs() < 1e-6 && sup <= 1.0);
        assert!(m.audit(100.0, 1e-3).ok);
    }

    #[test]
    fn period_integral_matches_bessel_value() {
        // 2π J₀(1)
        let j0_1 = 0.765_197_686_557_966_6;
        assert!((cos_sin_integral(TAU) - TAU * j0_1).abs() < 1e-13);
        let direct = quadrature::integrate(|s| s.sin().cos(), 0.0, 23.4);
        assert!((cos_sin_integral(23.4) - direct).abs() < 1e-12);
    }

    #[test]
    fn joint_leader_is_self_consistent() {
        let m = model(LeaderKind::Joint);
        let p = ManipulatorParams::reference();
        assert_eq!(m.sample(0.0).x0, [0.0, 0.0]);
        // ẋ₀ = z₀ and ż₀ against central differences
        let h = 1e-5;
        for t in [0.3, 1.7, 4.0] {
            let (a, b, c) = (m.sample(t - h), m.sample(t), m.sample(t + h));
            for k in 0..2 {
                assert!(((c.x0[k] - a.x0[k]) / (2.0 * h) - b.z0[k]).abs() < 1e-8);
                assert!(((c.z0[k] - a.z0[k]) / (2.0 * h) - b.z0dot[k]).abs() < 1e-7);
            }
            let q = m.joint_angles(t).unwrap();
            let z = transform_matrix(&p, q).mul_vec(m.q_rate(t, q));
            assert!((z[0] - b.z0[0]).abs() < 1e-14 && (z[1] - b.z0[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn joint_leader_acceleration_is_small() {
        let m = model(LeaderKind::Joint);
        let sup = m.acceleration_sup(10.0, 1e-3);
        assert!(sup > 0.0 && m.audit(10.0, 1e-3).ok);
    }

    #[test]
    fn transformed_leader_joint_angles_integrate() {
        let m = model(LeaderKind::Transformed);
        let sys = FnSystem {
            dim: 2,
            f: |t: f64, y: &[f64], d: &mut [f64]| {
                let r = m.q_rate(t, [y[0], y[1]]);
                d[0] = r[0];
                d[1] = r[1];
            },
        };
        let mut rk = Rk4::new(2);
        let mut q = m.initial_q();
        let dt = 1e-3;
        for k in 0..2000 {
            rk.step(&sys, k as f64 * dt, &mut q, dt);
        }
        // x₂ depends on q₂ alone
        let x2 = x2_of(&m.params, q[1]);
        assert!((x2 - 2.0_f64.sin()).abs() < 1e-9);
    }
}
