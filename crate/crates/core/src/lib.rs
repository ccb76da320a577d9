//! Discrete-time simulator of learned dynamic service placement in a
//! vehicular edge network, with a Sybil identity-theft adversary that
//! poisons the delay-feedback channel the placement agent learns from.
//!
//! The crate is organised the way the simulation flows:
//!
//! * [`scenario`] static configuration (services, edge nodes, hyperparameters)
//! * [`mobility`] vehicle trajectories (taxi traces or synthetic) and requests
//! * [`netmodel`] association, ground-truth delay, edge utilization
//! * [`actor`] placement optimizer and its exhaustive small-instance oracle
//! * [`critic`] quality-value network with replay memory
//! * [`adversary`] identity compromise, Sybil deployment, feedback poisoning
//! * [`agent`] the per-tick control loop
//! * [`metrics`] evaluation metrics over tick logs
//! * [`experiment`] multi-seed sweeps and result export

pub mod actor;
pub mod adversary;
pub mod agent;
pub mod critic;
pub mod experiment;
pub mod geo;
pub mod metrics;
pub mod mobility;
pub mod netmodel;
pub mod scenario;
pub mod seed;

pub use geo::{Area, Point};
pub use scenario::ScenarioConfig;

pub type ServiceId = u32;
pub type EdgeId = u32;
pub type VehicleId = u32;
/// Simulation time unit, 1-based.
pub type Tick = u32;
