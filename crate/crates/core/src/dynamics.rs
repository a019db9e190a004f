//! Rigid-body model of a planar two-link revolute arm.
//!
//! Everything is expressed through the five lumped parameters `O₁..O₅`:
//!
//! ```text
//! M(q) = [O₁ + 2O₂cos q₂   O₃ + O₂cos q₂]
//!        [O₃ + O₂cos q₂    O₃           ]
//! C(q, q̇) = [-O₂ sin q₂ q̇₂   -O₂ sin q₂ (q̇₁ + q̇₂)]
//!           [ O₂ sin q₂ q̇₁    0                  ]
//! G(q) = [O₄ g cos q₁ + O₅ g cos(q₁ + q₂),  O₅ g cos(q₁ + q₂)]
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{sub2, Mat2, Vec2};

/// Grid step used when sweeping `q₂` for eigenvalue and supremum bounds.
pub const SWEEP_STEP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("physical parameter `{name}` must be finite and strictly positive, got {value}")]
    NonPositivePhysical { name: &'static str, value: f64 },
    #[error("lumped parameter O{index} must be finite and strictly positive, got {value}")]
    NonPositiveLumped { index: usize, value: f64 },
    #[error("inertia is not positive definite for every q: O1 - 2*O2 = {margin} (needs > 0)")]
    InertiaIndefinite { margin: f64 },
    #[error("inertia is singular at q2 = 0 or pi: minimum determinant {det} (needs > 0)")]
    SingularInertia { det: f64 },
}

/// Masses, lengths and inertias of the two links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub lc1: f64,
    pub lc2: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    pub g: f64,
}

impl PhysicalParams {
    /// The two-link arm used throughout the reproduction scenario.
    pub const REFERENCE: PhysicalParams = PhysicalParams {
        m1: 0.5,
        m2: 0.4,
        l1: 0.4,
        l2: 0.3,
        lc1: 0.2,
        lc2: 0.15,
        j1: 0.0067,
        j2: 0.003,
        g: 9.8,
    };

    /// Order `[m1, m2, l1, l2, lc1, lc2, J1, J2, g]`.
    pub fn from_array(v: [f64; 9]) -> Self {
        PhysicalParams {
            m1: v[0],
            m2: v[1],
            l1: v[2],
            l2: v[3],
            lc1: v[4],
            lc2: v[5],
            j1: v[6],
            j2: v[7],
            g: v[8],
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let fields = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("lc1", self.lc1),
            ("lc2", self.lc2),
            ("J1", self.j1),
            ("J2", self.j2),
            ("g", self.g),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::NonPositivePhysical { name, value });
            }
        }
        Ok(())
    }

    /// The lumped vector `O`, without any validation.
    pub fn lumped(&self) -> [f64; 5] {
        [
            self.m1 * self.lc1 * self.lc1
                + self.m2 * (self.l1 * self.l1 + self.lc2 * self.lc2)
                + self.j1
                + self.j2,
            self.m2 * self.l1 * self.lc2,
            self.m2 * self.lc2 * self.lc2 + self.j2,
            self.m1 * self.lc1 + self.m2 * self.l1,
            self.m2 * self.lc2,
        ]
    }
}

/// Joint angles and rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointState {
    pub q: Vec2,
    pub qdot: Vec2,
}

/// Validated lumped parameters of one arm, with the inertia eigenvalue
/// bounds `km ≤ λ(M(q)) ≤ kM`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManipulatorParams {
    o: [f64; 5],
    gravity: f64,
    km: f64,
    k_max: f64,
}

impl ManipulatorParams {
    pub fn from_physical(p: &PhysicalParams) -> Result<Self, ParamError> {
        p.validate()?;
        Self::from_lumped(p.lumped(), p.g)
    }

    /// Builds directly from `O` and `g`. Rejects non-positive entries and
    /// any `O` for which `M(q)` is not positive definite for every `q`.
    pub fn from_lumped(o: [f64; 5], gravity: f64) -> Result<Self, ParamError> {
        if !(gravity.is_finite() && gravity > 0.0) {
            return Err(ParamError::NonPositivePhysical {
                name: "g",
                value: gravity,
            });
        }
        for (i, &v) in o.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(ParamError::NonPositiveLumped {
                    index: i + 1,
                    value: v,
                });
            }
        }
        let margin = o[0] - 2.0 * o[1];
        if margin <= 0.0 {
            return Err(ParamError::InertiaIndefinite { margin });
        }
        // det M = O₁O₃ − O₃² − O₂²cos²q₂, smallest at cos²q₂ = 1
        let min_det = o[0] * o[2] - o[2] * o[2] - o[1] * o[1];
        if min_det <= 0.0 {
            return Err(ParamError::SingularInertia { det: min_det });
        }
        let mut params = ManipulatorParams {
            o,
            gravity,
            km: 0.0,
            k_max: 0.0,
        };
        let (km, k_max) = params.inertia_bounds();
        params.km = km;
        params.k_max = k_max;
        Ok(params)
    }

    pub fn reference() -> Self {
        Self::from_physical(&PhysicalParams::REFERENCE).expect("reference parameters are valid")
    }

    pub fn lumped(&self) -> [f64; 5] {
        self.o
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    /// Smallest inertia eigenvalue over all configurations.
    pub fn km(&self) -> f64 {
        self.km
    }

    /// Largest inertia eigenvalue over all configurations.
    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    /// Returns a copy whose inertial parameters are scaled by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self, ParamError> {
        let mut o = self.o;
        for v in &mut o {
            *v *= c;
        }
        Self::from_lumped(o, self.gravity)
    }

    pub fn m11(&self, q2: f64) -> f64 {
        self.o[0] + 2.0 * self.o[1] * q2.cos()
    }

    pub fn m12(&self, q2: f64) -> f64 {
        self.o[2] + self.o[1] * q2.cos()
    }

    pub fn m22(&self) -> f64 {
        self.o[2]
    }

    /// `det M(q₂)`, in closed form.
    pub fn inertia_det(&self, q2: f64) -> f64 {
        let c = q2.cos();
        self.o[0] * self.o[2] - self.o[2] * self.o[2] - self.o[1] * self.o[1] * c * c
    }

    pub fn inertia(&self, q: Vec2) -> Mat2 {
        let m12 = self.m12(q[1]);
        Mat2::new(self.m11(q[1]), m12, m12, self.m22())
    }

    pub fn coriolis(&self, q: Vec2, qdot: Vec2) -> Mat2 {
        let h = self.o[1] * q[1].sin();
        Mat2::new(-h * qdot[1], -h * (qdot[0] + qdot[1]), h * qdot[0], 0.0)
    }

    pub fn gravity_torque(&self, q: Vec2) -> Vec2 {
        let g = self.gravity;
        let c12 = (q[0] + q[1]).cos();
        [
            self.o[3] * g * q[0].cos() + self.o[4] * g * c12,
            self.o[4] * g * c12,
        ]
    }

    /// `q̈ = M⁻¹(τ − C q̇ − G)` with the 2×2 inverse in closed form.
    pub fn forward_dynamics(&self, state: &JointState, tau: Vec2) -> Vec2 {
        let m = self.inertia(state.q);
        let cqd = self.coriolis(state.q, state.qdot).mul_vec(state.qdot);
        let rhs = sub2(sub2(tau, cqd), self.gravity_torque(state.q));
        m.inverse()
            .expect("inertia is nonsingular under parameter invariants")
            .mul_vec(rhs)
    }

    /// ½ q̇ᵀ M(q) q̇.
    pub fn kinetic_energy(&self, state: &JointState) -> f64 {
        let mq = self.inertia(state.q).mul_vec(state.qdot);
        0.5 * (state.qdot[0] * mq[0] + state.qdot[1] * mq[1])
    }

    /// Eigenvalue extremes of `M(q₂)` over a `q₂` sweep of `[0, π]` at
    /// [`SWEEP_STEP`]. `M` is even and 2π-periodic in `q₂`, so the half
    /// period covers every configuration.
    pub fn inertia_bounds(&self) -> (f64, f64) {
        let steps = (std::f64::consts::PI / SWEEP_STEP).ceil() as usize;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..=steps {
            let q2 = (k as f64 * SWEEP_STEP).min(std::f64::consts::PI);
            let [a, b] = self.inertia([0.0, q2]).sym_eigenvalues();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn reference() -> ManipulatorParams {
        ManipulatorParams::reference()
    }

    #[test]
    fn lumped_parameters_of_reference_arm() {
        let o = PhysicalParams::REFERENCE.lumped();
        let want = [0.1027, 0.024, 0.012, 0.26, 0.06];
        for (a, b) in o.iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{o:?}");
        }
    }

    #[test]
    fn massless_second_link_is_rejected() {
        let mut p = PhysicalParams::REFERENCE;
        p.m2 = 0.0;
        assert!(matches!(
            ManipulatorParams::from_physical(&p),
            Err(ParamError::NonPositivePhysical { name: "m2", .. })
        ));
        // The lumped route reports the vanishing O entry instead.
        assert!(matches!(
            ManipulatorParams::from_lumped([0.0297, 0.0, 0.003, 0.1, 0.0], 9.8),
            Err(ParamError::NonPositiveLumped { index: 2, .. })
        ));
    }

    #[test]
    fn boundary_of_positive_definiteness_is_rejected() {
        let err = ManipulatorParams::from_lumped([0.048, 0.024, 0.012, 0.26, 0.06], 9.8);
        assert_eq!(err, Err(ParamError::InertiaIndefinite { margin: 0.0 }));
    }

    #[test]
    fn inertia_at_straight_arm() {
        let m = reference().inertia([0.3, 0.0]);
        assert!(m.max_abs_diff(&Mat2::new(0.1507, 0.036, 0.036, 0.012)) < 1e-15);
        let m = reference().inertia([0.0, FRAC_PI_2]);
        assert!((m.0[0][1] - 0.012).abs() < 1e-15);
        assert_eq!(
            reference().inertia([0.0, 0.7]),
            reference().inertia([0.0, -0.7])
        );
    }

    #[test]
    fn coriolis_examples() {
        let p = reference();
        assert_eq!(p.coriolis([1.0, 0.0], [3.0, -2.0]), Mat2::ZERO);
        assert!(p.coriolis([1.0, 0.4], [0.0, 0.0]).max_abs_diff(&Mat2::ZERO) == 0.0);
        let c = p.coriolis([0.0, FRAC_PI_2], [1.0, 1.0]);
        assert!(c.max_abs_diff(&Mat2::new(-0.024, -0.048, 0.024, 0.0)) < 1e-15);
    }

    #[test]
    fn gravity_examples() {
        let p = reference();
        let g = p.gravity_torque([FRAC_PI_2, 0.0]);
        assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
        let g = p.gravity_torque([0.0, 0.0]);
        assert!((g[0] - 3.136).abs() < 1e-12 && (g[1] - 0.588).abs() < 1e-12);
        // cos(π − q₁) = −cos q₁ on the first term of the first entry
        let q1 = 0.37;
        let first = |q: f64| p.lumped()[3] * p.gravity() * q.cos();
        assert!((first(q1) + first(PI - q1)).abs() < 1e-15);
    }

    #[test]
    fn forward_dynamics_examples() {
        let p = reference();
        let rest = JointState {
            q: [0.4, -1.1],
            qdot: [0.0, 0.0],
        };
        let qdd = p.forward_dynamics(&rest, p.gravity_torque(rest.q));
        assert!(qdd[0].abs() < 1e-12 && qdd[1].abs() < 1e-12);

        let moving = JointState {
            q: [0.4, -1.1],
            qdot: [0.8, -2.0],
        };
        let tau = crate::linalg::add2(
            p.coriolis(moving.q, moving.qdot).mul_vec(moving.qdot),
            p.gravity_torque(moving.q),
        );
        let qdd = p.forward_dynamics(&moving, tau);
        assert!(qdd[0].abs() < 1e-11 && qdd[1].abs() < 1e-11);

        // M(0)⁻¹[1, 0] with det 0.0005124
        let zero = JointState::default();
        let tau = crate::linalg::add2(p.gravity_torque(zero.q), [1.0, 0.0]);
        let qdd = p.forward_dynamics(&zero, tau);
        let det = 0.1507 * 0.012 - 0.036 * 0.036;
        assert!((qdd[0] - 0.012 / det).abs() < 1e-9);
        assert!((qdd[1] + 0.036 / det).abs() < 1e-9);
    }

    #[test]
    fn bounds_bracket_straight_arm_and_scale_linearly() {
        let p = reference();
        let [a, b] = p.inertia([0.0, 0.0]).sym_eigenvalues();
        assert!(p.km() <= a && a <= p.k_max());
        assert!(p.km() <= b && b <= p.k_max());
        assert!(p.km() > 0.0);
        let scaled = p.scaled(3.0).unwrap();
        assert!((scaled.km() - 3.0 * p.km()).abs() < 1e-15);
        assert!((scaled.k_max() - 3.0 * p.k_max()).abs() < 1e-15);
    }

    #[test]
    fn reference_bounds_regression() {
        // frozen from the 1e-3 sweep; kM sits at q₂ = 0, km at q₂ = π
        let p = reference();
        assert!(
            (p.k_max() - 0.159_487_203_046_948_13).abs() < 1e-12,
            "{}",
            p.k_max()
        );
        assert!(
            (p.km() - 0.003_212_796_953_051_868_7).abs() < 1e-12,
            "{}",
            p.km()
        );
    }
}
