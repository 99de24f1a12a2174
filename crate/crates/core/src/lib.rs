//! Reinforcement learning under a price on attention.
//!
//! Actors observe through noisy channels whose mutual information is charged
//! against reward. The guide in `book/` walks through each module.

pub mod error;
pub mod mi;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
pub mod policy;
pub mod trainer;
pub mod contract;
pub mod team;
pub mod metrics;
pub mod experiments;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/mutual-information.md")]
    pub struct MutualInformation;
    #[doc = include_str!("../../../book/src/actor.md")]
    pub struct Actor;
    #[doc = include_str!("../../../book/src/training.md")]
    pub struct Training;
    #[doc = include_str!("../../../book/src/contract.md")]
    pub struct Contract;
    #[doc = include_str!("../../../book/src/team.md")]
    pub struct Team;
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub struct Metrics;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
}
