//! Closed-loop simulation of the leader and its followers.
//!
//! Each follower's plant is integrated in transformed coordinates
//! `(q, z, x)` with `q̇ = A(q)z`, alongside its observer `(x̂, ẑ)`. The
//! controller and observer never read `z` or the integrated `x`: they get
//! `x` rebuilt from joint-angle samples ([`XSource::Reconstructed`]) or,
//! for diagnostics, the integrated `x` itself ([`XSource::Exact`]).
//!
//! One step is classical RK4 over the stacked state; inputs are recomputed
//! at every stage from that stage's snapshot of all agents.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{
    control_input, local_differences, sliding_variable, ControlGains, LeaderSignal, NeighborSignal,
    NeighborView, SignMode,
};
use crate::dynamics::{JointState, ManipulatorParams};
use crate::integrator::{OdeSystem, Rk4};
use crate::leader::{LeaderAudit, LeaderKind, LeaderModel};
use crate::linalg::{norm_inf2, sub2, Vec2};
use crate::network::{
    gain_bounds, pq_certificate, GainReport, GainSet, NetworkError, PqCertificate, Topology,
};
use crate::observer::{observer_derivative, ObserverGains, ObserverState};
use crate::transform::{
    a_matrix, input_to_torque, q_from_x_initial, transform_matrix, transformed_derivative,
    x_path_update, TransformedState,
};

/// Values per follower in the flat ODE state: `q, z, x, x̂, ẑ`.
pub const AGENT_DIM: usize = 10;

/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("expected {expected} parameter sets (one per follower), got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("dt must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("t_end ({t_end}) must be finite and at least dt ({dt})")]
    BadHorizon { t_end: f64, dt: f64 },
    #[error("decimation must be at least 1")]
    BadDecimation,
    #[error("boundary layer epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("init `{name}` must be finite and non-negative, got {value}")]
    BadRange { name: &'static str, value: f64 },
    #[error("expected {expected} explicit initial states, got {got}")]
    InitCount { expected: usize, got: usize },
    #[error(transparent)]
    Gains(#[from] NetworkError),
    #[error("divergence at t = {t:.6}: follower {agent} {what} is {value}")]
    Diverged {
        t: f64,
        agent: usize,
        what: &'static str,
        value: f64,
    },
}

/// Where the controller and observer get `x` from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XSource {
    /// Rebuilt from successive joint-angle samples.
    #[default]
    Reconstructed,
    /// The integrated plant coordinate. Not measurable on hardware.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentInit {
    pub x: Vec2,
    pub z: Vec2,
    #[serde(default)]
    pub zhat: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialConditions {
    /// `x_i(0)` and `z_i(0)` uniform on `[−r, r]²`, drawn per follower in
    /// the order `x₁, x₂, z₁, z₂`; `ẑ_i(0) = 0`.
    Random {
        x_range: f64,
        z_range: f64,
        seed: u64,
    },
    Explicit(Vec<AgentInit>),
}

/// Uniform draw on `[−r, r]` from the top 53 bits of one SplitMix64 output.
pub fn uniform_symmetric(rng: &mut SplitMix64, r: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    r * (2.0 * u - 1.0)
}

impl InitialConditions {
    pub fn resolve(&self, n: usize) -> Result<Vec<AgentInit>, EngineError> {
        match self {
            InitialConditions::Random {
                x_range,
                z_range,
                seed,
            } => {
                for (name, value) in [("x_range", *x_range), ("z_range", *z_range)] {
                    if !(value.is_finite() && value >= 0.0) {
                        return Err(EngineError::BadRange { name, value });
                    }
                }
                let mut rng = SplitMix64::seed_from_u64(*seed);
                Ok((0..n)
                    .map(|_| {
                        let x = [
                            uniform_symmetric(&mut rng, *x_range),
                            uniform_symmetric(&mut rng, *x_range),
                        ];
                        let z = [
                            uniform_symmetric(&mut rng, *z_range),
                            uniform_symmetric(&mut rng, *z_range),
                        ];
                        AgentInit {
                            x,
                            z,
                            zhat: [0.0; 2],
                        }
                    })
                    .collect())
            }
            InitialConditions::Explicit(v) => {
                if v.len() != n {
                    return Err(EngineError::InitCount {
                        expected: n,
                        got: v.len(),
                    });
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// One parameter set per follower.
    pub params: Vec<ManipulatorParams>,
    pub leader: LeaderModel,
    pub topology: Topology,
    /// `gains.zbar0` is the bound the gain check uses; the leader audit
    /// uses `leader.zbar0`.
    pub gains: GainSet,
    pub sign_mode: SignMode,
    pub dt: f64,
    pub t_end: f64,
    pub decimation: usize,
    pub init: InitialConditions,
    pub x_source: XSource,
}

impl ScenarioConfig {
    /// Four reference arms on the graph with edges `0→1, 1→2, 3→1, 2→4,
    /// 4→3`, reference gains, `dt = 10⁻³`, `t_end = 30`.
    pub fn reference(seed: u64) -> Self {
        let p = ManipulatorParams::reference();
        ScenarioConfig {
            params: vec![p; 4],
            leader: LeaderModel::new(LeaderKind::Transformed, p, 1.0),
            topology: Topology::from_edges(4, &[(0, 1), (1, 2), (3, 1), (2, 4), (4, 3)])
                .expect("static graph"),
            gains: GainSet::REFERENCE,
            sign_mode: SignMode::default(),
            dt: 1e-3,
            t_end: 30.0,
            decimation: 10,
            init: InitialConditions::Random {
                x_range: 3.0,
                z_range: 3.0,
                seed,
            },
            x_source: XSource::Reconstructed,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.topology.len()
    }

    /// Number of RK4 steps covering `[0, t_end]`.
    pub fn n_steps(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let n = self.n_agents();
        if self.params.len() != n {
            return Err(EngineError::ParamCount {
                expected: n,
                got: self.params.len(),
            });
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(EngineError::BadStep(self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt * (1.0 - 1e-12)) {
            return Err(EngineError::BadHorizon {
                t_end: self.t_end,
                dt: self.dt,
            });
        }
        if self.decimation == 0 {
            return Err(EngineError::BadDecimation);
        }
        if let SignMode::BoundaryLayer { epsilon } = self.sign_mode {
            if !(epsilon.is_finite() && epsilon > 0.0) {
                return Err(EngineError::BadEpsilon(epsilon));
            }
        }
        self.gains.validate()?;
        self.init.resolve(n)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AgentState {
    pub q: Vec2,
    pub z: Vec2,
    /// Integrated plant coordinate.
    pub x: Vec2,
    pub xhat: Vec2,
    pub zhat: Vec2,
    /// What the follower believes `x` to be.
    pub x_meas: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub step: usize,
    pub t: f64,
    pub agents: Vec<AgentState>,
    /// Leader joint angles.
    pub leader_q: Vec2,
}

impl World {
    pub fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.agents.len() * AGENT_DIM + 2);
        for a in &self.agents {
            y.extend_from_slice(&a.q);
            y.extend_from_slice(&a.z);
            y.extend_from_slice(&a.x);
            y.extend_from_slice(&a.xhat);
            y.extend_from_slice(&a.zhat);
        }
        y.extend_from_slice(&self.leader_q);
        y
    }
}

/// Per-follower signals at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AgentOutput {
    pub x_ir: Vec2,
    pub z_ir: Vec2,
    pub s: Vec2,
    pub xtilde: Vec2,
    pub u: Vec2,
    pub tau: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct StageAgent {
    q: Vec2,
    z: Vec2,
    x: Vec2,
    xhat: Vec2,
    zhat: Vec2,
}

fn unpack(y: &[f64], i: usize) -> StageAgent {
    let b = &y[i * AGENT_DIM..(i + 1) * AGENT_DIM];
    StageAgent {
        q: [b[0], b[1]],
        z: [b[2], b[3]],
        x: [b[4], b[5]],
        xhat: [b[6], b[7]],
        zhat: [b[8], b[9]],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentRecord {
    pub q: Vec2,
    pub z: Vec2,
    pub x: Vec2,
    pub xhat: Vec2,
    pub zhat: Vec2,
    pub u: Vec2,
    pub tau: Vec2,
    pub s: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderRecord {
    pub q0: Vec2,
    pub z0: Vec2,
    pub x0: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRow {
    pub t: f64,
    pub agents: Vec<AgentRecord>,
    pub leader: LeaderRecord,
}

/// Decimated samples on a uniform grid. The `x` column is the follower's
/// own (reconstructed) `x`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrajectoryLog {
    pub n_agents: usize,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    fn series(&self, f: impl Fn(&LogRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    /// `‖q_i − q₀‖∞`.
    pub fn q_error(&self, i: usize) -> Vec<f64> {
        self.series(|r| norm_inf2(sub2(r.agents[i].q, r.leader.q0)))
    }

    /// `‖z_i − z₀‖∞`.
    pub fn z_error(&self, i: usize) -> Vec<f64> {
        self.series(|r| norm_inf2(sub2(r.agents[i].z, r.leader.z0)))
    }

    /// `‖x_i − x₀‖∞`.
    pub fn x_error(&self, i: usize) -> Vec<f64> {
        self.series(|r| norm_inf2(sub2(r.agents[i].x, r.leader.x0)))
    }

    /// `‖x̃_i‖∞`.
    pub fn xtilde_norm(&self, i: usize) -> Vec<f64> {
        self.series(|r| norm_inf2(sub2(r.agents[i].xhat, r.agents[i].x)))
    }

    /// `‖z̃_i‖∞`.
    pub fn ztilde_norm(&self, i: usize) -> Vec<f64> {
        self.series(|r| norm_inf2(sub2(r.agents[i].zhat, r.agents[i].z)))
    }

    /// Euclidean `‖(x̃_i, z̃_i)‖`.
    pub fn observer_error(&self, i: usize) -> Vec<f64> {
        self.series(|r| {
            let a = &r.agents[i];
            let xt = sub2(a.xhat, a.x);
            let zt = sub2(a.zhat, a.z);
            (xt[0] * xt[0] + xt[1] * xt[1] + zt[0] * zt[0] + zt[1] * zt[1]).sqrt()
        })
    }

    /// `‖τ_i‖∞`.
    pub fn torque_norm(&self, i: usize) -> Vec<f64> {
        self.series(|r| norm_inf2(r.agents[i].tau))
    }
}

/// Facts about a run that are not part of the trajectory itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunDiagnostics {
    pub steps: usize,
    pub certificate: Option<PqCertificate>,
    pub certificate_error: Option<String>,
    pub gain_report: Option<GainReport>,
    pub leader_audit: LeaderAudit,
    /// Per follower, the largest gap between reconstructed and integrated
    /// `x` over the run.
    pub reconstruction_gap: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub log: TrajectoryLog,
    pub diagnostics: RunDiagnostics,
    pub final_world: World,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    certificate: Result<PqCertificate, NetworkError>,
}

impl Simulation {
    /// Validates the scenario. A graph without a spanning tree is not an
    /// error here; it shows up in [`RunDiagnostics`].
    pub fn new(config: ScenarioConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let certificate = pq_certificate(&config.topology);
        Ok(Simulation {
            config,
            certificate,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn certificate(&self) -> Result<&PqCertificate, &NetworkError> {
        self.certificate.as_ref()
    }

    pub fn gain_report(&self) -> Option<GainReport> {
        let cert = self.certificate.as_ref().ok()?;
        gain_bounds(cert, &self.config.gains).ok()
    }

    pub fn initial_world(&self) -> Result<World, EngineError> {
        let inits = self.config.init.resolve(self.config.n_agents())?;
        let agents = inits
            .iter()
            .zip(&self.config.params)
            .map(|(init, p)| AgentState {
                q: q_from_x_initial(p, init.x),
                z: init.z,
                x: init.x,
                xhat: init.x,
                zhat: init.zhat,
                x_meas: init.x,
            })
            .collect();
        Ok(World {
            step: 0,
            t: 0.0,
            agents,
            leader_q: self.config.leader.initial_q(),
        })
    }

    fn observer_gains(&self) -> ObserverGains {
        ObserverGains {
            ko1: self.config.gains.ko1,
            ko2: self.config.gains.ko2,
        }
    }

    fn control_gains(&self) -> ControlGains {
        let g = &self.config.gains;
        ControlGains {
            kc1: g.kc1,
            kc2: g.kc2,
            kc3: g.kc3,
        }
    }

    /// Inputs for all followers from one snapshot. `x` is what each
    /// follower measures; the other slices are the snapshot's estimates.
    pub fn control_all(
        &self,
        t: f64,
        q: &[Vec2],
        x: &[Vec2],
        xhat: &[Vec2],
        zhat: &[Vec2],
    ) -> Vec<AgentOutput> {
        let top = &self.config.topology;
        let leader = self.config.leader.sample(t);
        let cg = self.control_gains();
        (0..top.len())
            .map(|i| {
                let view = NeighborView {
                    x: x[i],
                    xhat: xhat[i],
                    zhat: zhat[i],
                    neighbors: top
                        .neighbors(i)
                        .map(|j| NeighborSignal {
                            x: x[j],
                            zhat: zhat[j],
                        })
                        .collect(),
                    leader: (top.b(i) > 0.0).then_some(LeaderSignal {
                        x0: leader.x0,
                        z0: leader.z0,
                    }),
                };
                let (x_ir, z_ir) = local_differences(&view);
                let s = sliding_variable(x_ir, z_ir, self.config.gains.kappa);
                let xtilde = sub2(xhat[i], x[i]);
                let p = &self.config.params[i];
                let u = control_input(p, q[i], xtilde, s, zhat[i], cg, self.config.sign_mode);
                AgentOutput {
                    x_ir,
                    z_ir,
                    s,
                    xtilde,
                    u,
                    tau: input_to_torque(p, q[i], u),
                }
            })
            .collect()
    }

    /// Signals at a step boundary.
    pub fn outputs(&self, world: &World) -> Vec<AgentOutput> {
        let q: Vec<Vec2> = world.agents.iter().map(|a| a.q).collect();
        let x: Vec<Vec2> = world.agents.iter().map(|a| self.measured(a)).collect();
        let xhat: Vec<Vec2> = world.agents.iter().map(|a| a.xhat).collect();
        let zhat: Vec<Vec2> = world.agents.iter().map(|a| a.zhat).collect();
        self.control_all(world.t, &q, &x, &xhat, &zhat)
    }

    fn measured(&self, a: &AgentState) -> Vec2 {
        match self.config.x_source {
            XSource::Reconstructed => a.x_meas,
            XSource::Exact => a.x,
        }
    }

    /// Right-hand side of the stacked closed loop at stage state `y`.
    /// `start` is the world at the beginning of the step; reconstructed
    /// measurements continue from its `x_meas` along the stage's joint
    /// angles.
    pub fn derivative(&self, t: f64, y: &[f64], start: &World, dy: &mut [f64]) {
        let n = self.config.n_agents();
        let stage: Vec<StageAgent> = (0..n).map(|i| unpack(y, i)).collect();
        let x: Vec<Vec2> = stage
            .iter()
            .enumerate()
            .map(|(i, a)| match self.config.x_source {
                XSource::Exact => a.x,
                XSource::Reconstructed => {
                    let s = &start.agents[i];
                    if a.q == s.q {
                        s.x_meas
                    } else {
                        x_path_update(&self.config.params[i], s.x_meas, s.q, a.q)
                    }
                }
            })
            .collect();
        let q: Vec<Vec2> = stage.iter().map(|a| a.q).collect();
        let xhat: Vec<Vec2> = stage.iter().map(|a| a.xhat).collect();
        let zhat: Vec<Vec2> = stage.iter().map(|a| a.zhat).collect();
        let out = self.control_all(t, &q, &x, &xhat, &zhat);
        let og = self.observer_gains();

        for (i, a) in stage.iter().enumerate() {
            let p = &self.config.params[i];
            let qdot = a_matrix(p, a.q).mul_vec(a.z);
            let plant = TransformedState {
                q: a.q,
                z: a.z,
                x: a.x,
            };
            let (xdot, zdot) = transformed_derivative(p, &plant, out[i].u);
            let obs = ObserverState {
                xhat: a.xhat,
                zhat: a.zhat,
            };
            let (xhd, zhd) = observer_derivative(p, &obs, x[i], a.q, out[i].u, og);
            let d = &mut dy[i * AGENT_DIM..(i + 1) * AGENT_DIM];
            d[0..2].copy_from_slice(&qdot);
            d[2..4].copy_from_slice(&zdot);
            d[4..6].copy_from_slice(&xdot);
            d[6..8].copy_from_slice(&xhd);
            d[8..10].copy_from_slice(&zhd);
        }
        let l = &y[n * AGENT_DIM..];
        let rate = self.config.leader.q_rate(t, [l[0], l[1]]);
        dy[n * AGENT_DIM..].copy_from_slice(&rate);
    }

    /// One RK4 step.
    pub fn step(&self, world: &World) -> Result<World, EngineError> {
        let mut rk = Rk4::new(world.agents.len() * AGENT_DIM + 2);
        self.step_with(&mut rk, world)
    }

    fn step_with(&self, rk: &mut Rk4, world: &World) -> Result<World, EngineError> {
        let dt = self.config.dt;
        let mut y = world.pack();
        let sys = StageSystem {
            sim: self,
            start: world,
        };
        rk.step(&sys, world.t, &mut y, dt);

        let step = world.step + 1;
        let t = step as f64 * dt;
        let n = world.agents.len();
        let mut agents = Vec::with_capacity(n);
        for (i, old) in world.agents.iter().enumerate() {
            let a = unpack(&y, i);
            let x_meas = match self.config.x_source {
                XSource::Exact => a.x,
                XSource::Reconstructed => {
                    x_path_update(&self.config.params[i], old.x_meas, old.q, a.q)
                }
            };
            let next = AgentState {
                q: a.q,
                z: a.z,
                x: a.x,
                xhat: a.xhat,
                zhat: a.zhat,
                x_meas,
            };
            check_finite(t, i, &next)?;
            agents.push(next);
        }
        let l = &y[n * AGENT_DIM..];
        Ok(World {
            step,
            t,
            agents,
            leader_q: [l[0], l[1]],
        })
    }

    fn record(&self, world: &World) -> LogRow {
        let out = self.outputs(world);
        let leader = self.config.leader.sample(world.t);
        LogRow {
            t: world.t,
            agents: world
                .agents
                .iter()
                .zip(&out)
                .map(|(a, o)| AgentRecord {
                    q: a.q,
                    z: a.z,
                    x: self.measured(a),
                    xhat: a.xhat,
                    zhat: a.zhat,
                    u: o.u,
                    tau: o.tau,
                    s: o.s,
                })
                .collect(),
            leader: LeaderRecord {
                q0: world.leader_q,
                z0: leader.z0,
                x0: leader.x0,
            },
        }
    }

    /// Integrates `[0, t_end]`, logging every `decimation` steps and the
    /// final step.
    pub fn run(&self) -> Result<RunOutput, EngineError> {
        let cfg = &self.config;
        let steps = cfg.n_steps();
        let mut world = self.initial_world()?;
        let n = world.agents.len();
        let mut rk = Rk4::new(n * AGENT_DIM + 2);
        let mut rows = Vec::with_capacity(steps / cfg.decimation + 2);
        let mut gap = vec![0.0_f64; n];
        rows.push(self.record(&world));
        for k in 1..=steps {
            world = self.step_with(&mut rk, &world)?;
            for (g, a) in gap.iter_mut().zip(&world.agents) {
                *g = g.max(norm_inf2(sub2(a.x_meas, a.x)));
            }
            if k % cfg.decimation == 0 || k == steps {
                rows.push(self.record(&world));
            }
        }
        let audit_step = cfg.dt.max(1e-3);
        let diagnostics = RunDiagnostics {
            steps,
            certificate: self.certificate.as_ref().ok().cloned(),
            certificate_error: self.certificate.as_ref().err().map(|e| e.to_string()),
            gain_report: self.gain_report(),
            leader_audit: cfg.leader.audit(cfg.t_end, audit_step),
            reconstruction_gap: gap,
        };
        if !diagnostics.leader_audit.ok {
            log::warn!(
                "sampled leader acceleration {} exceeds zbar0 = {}",
                diagnostics.leader_audit.sampled_sup,
                diagnostics.leader_audit.zbar0
            );
        }
        Ok(RunOutput {
            log: TrajectoryLog { n_agents: n, rows },
            diagnostics,
            final_world: world,
        })
    }
}

fn check_finite(t: f64, agent: usize, a: &AgentState) -> Result<(), EngineError> {
    for (what, v) in [
        ("q", a.q),
        ("z", a.z),
        ("x", a.x),
        ("xhat", a.xhat),
        ("zhat", a.zhat),
        ("x_meas", a.x_meas),
    ] {
        for value in v {
            if !(value.is_finite() && value.abs() <= DIVERGENCE_LIMIT) {
                return Err(EngineError::Diverged {
                    t,
                    agent,
                    what,
                    value,
                });
            }
        }
    }
    Ok(())
}

struct StageSystem<'a> {
    sim: &'a Simulation,
    start: &'a World,
}

impl OdeSystem for StageSystem<'_> {
    fn dim(&self) -> usize {
        self.start.agents.len() * AGENT_DIM + 2
    }

    fn derivative(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        self.sim.derivative(t, y, self.start, dydt)
    }
}

/// Largest disagreement between the joint-space model driven by
/// `τ = u + G(q)` and the transformed model driven by `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub max_q_deviation: f64,
    pub max_z_deviation: f64,
    pub max_deviation: f64,
    pub steps: usize,
}

/// Integrates both representations from the same initial condition with
/// RK4 and compares `q` and `z = T(q)q̇` after every step.
pub fn equivalence_oracle(
    params: &ManipulatorParams,
    input: impl Fn(f64) -> Vec2,
    initial: JointState,
    t_end: f64,
    dt: f64,
) -> EquivalenceReport {
    let sys = crate::integrator::FnSystem {
        dim: 8,
        f: |t: f64, y: &[f64], d: &mut [f64]| {
            let u = input(t);
            let joint = JointState {
                q: [y[0], y[1]],
                qdot: [y[2], y[3]],
            };
            let tau = input_to_torque(params, joint.q, u);
            let qdd = params.forward_dynamics(&joint, tau);
            d[0..2].copy_from_slice(&joint.qdot);
            d[2..4].copy_from_slice(&qdd);

            let q = [y[4], y[5]];
            let z = [y[6], y[7]];
            let plant = TransformedState { q, z, x: [0.0; 2] };
            let (_, zdot) = transformed_derivative(params, &plant, u);
            d[4..6].copy_from_slice(&a_matrix(params, q).mul_vec(z));
            d[6..8].copy_from_slice(&zdot);
        },
    };
    let z0 = transform_matrix(params, initial.q).mul_vec(initial.qdot);
    let mut y = [
        initial.q[0],
        initial.q[1],
        initial.qdot[0],
        initial.qdot[1],
        initial.q[0],
        initial.q[1],
        z0[0],
        z0[1],
    ];
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut rk = Rk4::new(8);
    let mut max_q: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    for k in 0..steps {
        rk.step(&sys, k as f64 * dt, &mut y, dt);
        let q = [y[0], y[1]];
        let z_joint = transform_matrix(params, q).mul_vec([y[2], y[3]]);
        max_q = max_q.max(norm_inf2(sub2(q, [y[4], y[5]])));
        max_z = max_z.max(norm_inf2(sub2(z_joint, [y[6], y[7]])));
    }
    EquivalenceReport {
        max_q_deviation: max_q,
        max_z_deviation: max_z,
        max_deviation: max_q.max(max_z),
        steps,
    }
}
