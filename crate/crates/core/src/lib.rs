//! Rollout sampling policy iteration for finite-horizon decentralized POMDPs.
//!
//! The solver keeps `N` stochastic nodes per layer and agent, samples a belief
//! per node from heuristic trajectories, and improves nodes backward from the
//! last layer by alternating best responses estimated with a simulator.
//!
//! Everything is generic over the scalar type; [`f64`] aliases live at the
//! crate root and [`single`] holds the `f32` ones.

pub mod domains;
pub mod error;
pub mod exact;
pub mod improve;
pub mod instrument;
pub mod model;
pub mod policy;
pub mod rollout;
pub mod sampling;
pub mod scalar;
pub mod streams;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Belief = model::Belief<f64>;
pub type ExplicitModel = model::ExplicitModel<f64>;
pub type JointPolicy = policy::JointPolicy<f64>;
pub type PolicyNode = policy::PolicyNode<f64>;
pub type PhiMatrix = improve::PhiMatrix<f64>;
pub type SelectionSolution = improve::SelectionSolution<f64>;
pub type RolloutEstimate = rollout::RolloutEstimate<f64>;
pub type ValueRange = model::ValueRange<f64>;
pub type BeliefTable = sampling::BeliefTable<f64>;
pub type Portfolio = sampling::Portfolio<f64>;
pub type SolveOutcome = improve::SolveOutcome<f64>;

pub mod single {
    //! `f32` aliases.
    use crate::{improve, model, policy, rollout, sampling};

    pub type Belief = model::Belief<f32>;
    pub type ExplicitModel = model::ExplicitModel<f32>;
    pub type JointPolicy = policy::JointPolicy<f32>;
    pub type PolicyNode = policy::PolicyNode<f32>;
    pub type PhiMatrix = improve::PhiMatrix<f32>;
    pub type RolloutEstimate = rollout::RolloutEstimate<f32>;
    pub type Portfolio = sampling::Portfolio<f32>;
    pub type SolveOutcome = improve::SolveOutcome<f32>;
}
