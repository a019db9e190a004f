//! Simulation and analysis of leader-follower tracking for networked
//! two-link manipulators that only measure joint angles.

pub mod config;
pub mod controller;
pub mod dynamics;
pub mod engine;
pub mod integrator;
pub mod leader;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod observer;
pub mod output;
pub mod quadrature;
pub mod transform;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/arm.md")]
    mod arm {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/control.md")]
    mod control {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
