//! Authentication planning for XOR network coding under pollution attacks.
//!
//! Given a network DAG and per-link attack probabilities, the crate computes
//! analytically how pollution spreads under each relay authentication
//! strategy, what each strategy costs in energy, and which strategy is
//! optimal. A seeded Monte Carlo simulator replays the same behaviour trial
//! by trial and serves as an oracle for the analytic model.

pub mod analytics;
pub mod generate;
pub mod graph;
pub mod io;
pub mod optimizer;
pub mod simulator;
pub mod strategy;

pub use analytics::{
    butterfly_throughput_closed_form, energy, evaluate, propagate, throughput, AnalyticsError, EnergyBreakdown,
    EnergyConstants, PropagationState,
};
pub use graph::{butterfly, build_network, make_attack, AttackTopology, GraphError, NetworkGraph, NodeId, NodeRole, RoleHint};
pub use optimizer::{
    enumerate_strategies, optimize_energy, optimize_energy_best_throughput, sweep, Objective, OptimizationResult,
    OptimizeError, SearchOptions, SweepRow,
};
pub use simulator::{simulate, simulate_trial, SimulationConfig, SimulationError, SimulationResult};
pub use strategy::{MacMode, NetworkStrategy, NodeStrategy, StrategyError};
