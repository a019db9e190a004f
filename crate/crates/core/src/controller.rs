//! Distributed output-feedback tracking law.
//!
//! Each follower combines its own estimates with what its in-neighbours
//! (and, if linked, the leader) broadcast:
//!
//! ```text
//! x_ir = Σ a_ij (x_i − x_j) + b_i (x_i − x₀)
//! z_ir = Σ a_ij (ẑ_i − ẑ_j) + b_i (ẑ_i − z₀)
//! s_i  = z_ir + κ x_ir
//! u_i  = D⁻¹(q_i) (k_c1 x̃_i − k_c2 s_i − k_c3 sign(s_i) − f(q_i, ẑ_i))
//! ```

use serde::{Deserialize, Serialize};

use crate::dynamics::ManipulatorParams;
use crate::linalg::{add2, axpy2, scale2, sub2, Vec2};
use crate::transform::{d_inverse, drift};

/// What one follower broadcasts to the followers listening to it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NeighborSignal {
    pub x: Vec2,
    pub zhat: Vec2,
}

/// What the leader broadcasts to followers linked to it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LeaderSignal {
    pub x0: Vec2,
    pub z0: Vec2,
}

/// Everything follower `i` may use: its own reconstructed position and
/// estimates, one signal per in-neighbour, and the leader's signal iff
/// `b_i = 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborView {
    pub x: Vec2,
    pub xhat: Vec2,
    pub zhat: Vec2,
    pub neighbors: Vec<NeighborSignal>,
    pub leader: Option<LeaderSignal>,
}

/// `(x_ir, z_ir)`.
pub fn local_differences(view: &NeighborView) -> (Vec2, Vec2) {
    let mut xr = [0.0, 0.0];
    let mut zr = [0.0, 0.0];
    for nb in &view.neighbors {
        xr = add2(xr, sub2(view.x, nb.x));
        zr = add2(zr, sub2(view.zhat, nb.zhat));
    }
    if let Some(leader) = &view.leader {
        xr = add2(xr, sub2(view.x, leader.x0));
        zr = add2(zr, sub2(view.zhat, leader.z0));
    }
    (xr, zr)
}

pub fn sliding_variable(x_ir: Vec2, z_ir: Vec2, kappa: f64) -> Vec2 {
    axpy2(z_ir, kappa, x_ir)
}

/// How the discontinuous switching term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignMode {
    /// Componentwise sign with `sign(0) = 0`.
    Exact,
    /// Componentwise `tanh(s / ε)`.
    BoundaryLayer { epsilon: f64 },
}

impl Default for SignMode {
    fn default() -> Self {
        SignMode::BoundaryLayer { epsilon: 0.01 }
    }
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn signum(s: Vec2, mode: SignMode) -> Vec2 {
    match mode {
        SignMode::Exact => [sign0(s[0]), sign0(s[1])],
        SignMode::BoundaryLayer { epsilon } => [(s[0] / epsilon).tanh(), (s[1] / epsilon).tanh()],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGains {
    pub kc1: f64,
    pub kc2: f64,
    pub kc3: f64,
}

/// The bracket `k_c1 x̃ − k_c2 s − k_c3 sign(s)` that `D u + f(q, ẑ)` is
/// made to equal.
pub fn commanded_acceleration(xtilde: Vec2, s: Vec2, gains: ControlGains, mode: SignMode) -> Vec2 {
    let sw = signum(s, mode);
    sub2(
        sub2(scale2(xtilde, gains.kc1), scale2(s, gains.kc2)),
        scale2(sw, gains.kc3),
    )
}

/// Input `u_i` in transformed coordinates; `τ_i = u_i + G(q_i)`.
pub fn control_input(
    params: &ManipulatorParams,
    q: Vec2,
    xtilde: Vec2,
    s: Vec2,
    zhat: Vec2,
    gains: ControlGains,
    mode: SignMode,
) -> Vec2 {
    let v = sub2(
        commanded_acceleration(xtilde, s, gains, mode),
        drift(params, q, zhat),
    );
    d_inverse(params, q).mul_vec(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::d_matrix;

    const GAINS: ControlGains = ControlGains {
        kc1: 5.0,
        kc2: 6.0,
        kc3: 3.0,
    };

    #[test]
    fn consensus_gives_zero_differences() {
        let view = NeighborView {
            x: [1.0, 2.0],
            xhat: [1.0, 2.0],
            zhat: [0.5, -0.5],
            neighbors: vec![NeighborSignal {
                x: [1.0, 2.0],
                zhat: [0.5, -0.5],
            }],
            leader: Some(LeaderSignal {
                x0: [1.0, 2.0],
                z0: [0.5, -0.5],
            }),
        };
        assert_eq!(local_differences(&view), ([0.0, 0.0], [0.0, 0.0]));
    }

    #[test]
    fn single_follower_leader_offset() {
        let view = NeighborView {
            x: [1.0, 0.0],
            leader: Some(LeaderSignal::default()),
            ..Default::default()
        };
        assert_eq!(local_differences(&view).0, [1.0, 0.0]);
    }

    #[test]
    fn sliding_surface() {
        assert_eq!(sliding_variable([0.0, 0.0], [0.0, 0.0], 2.0), [0.0, 0.0]);
        let xr = [0.3, -1.2];
        let zr = scale2(xr, -2.0);
        assert_eq!(sliding_variable(xr, zr, 2.0), [0.0, 0.0]);
    }

    #[test]
    fn signum_modes() {
        let bl = SignMode::BoundaryLayer { epsilon: 0.01 };
        assert_eq!(signum([0.0, 0.0], SignMode::Exact), [0.0, 0.0]);
        assert_eq!(signum([0.0, 0.0], bl), [0.0, 0.0]);
        assert_eq!(signum([2.0, -3.0], SignMode::Exact), [1.0, -1.0]);
        let s = [0.05, -0.002];
        let mut last = 0.0;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            let v = signum(s, SignMode::BoundaryLayer { epsilon: eps });
            let err = (v[0] - 1.0).abs() + (v[1] + 1.0).abs();
            if eps < 1e-1 {
                assert!(err <= last);
            }
            last = err;
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn zero_error_zero_input() {
        let p = ManipulatorParams::reference();
        for mode in [SignMode::Exact, SignMode::default()] {
            let u = control_input(&p, [0.3, 0.0], [0.0; 2], [0.0; 2], [1.0, 2.0], GAINS, mode);
            assert_eq!(u, [0.0, 0.0]);
            let u = control_input(&p, [0.3, 1.0], [0.0; 2], [0.0; 2], [0.0, 2.0], GAINS, mode);
            assert_eq!(u, [0.0, 0.0]);
        }
    }

    #[test]
    fn input_round_trip() {
        let p = ManipulatorParams::reference();
        let (q, xt, s, zh) = ([0.1, 2.2], [0.3, -0.2], [0.04, -1.5], [1.3, 0.4]);
        for mode in [SignMode::Exact, SignMode::default()] {
            let u = control_input(&p, q, xt, s, zh, GAINS, mode);
            let lhs = add2(d_matrix(&p, q).mul_vec(u), drift(&p, q, zh));
            let rhs = commanded_acceleration(xt, s, GAINS, mode);
            assert!((lhs[0] - rhs[0]).abs() < 1e-12 && (lhs[1] - rhs[1]).abs() < 1e-12);
        }
    }
}
