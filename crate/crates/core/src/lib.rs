//! Simulation and verification toolkit for free-arm linked-state linear-optics
//! quantum computation.
//!
//! - [`analytics`]: exact closed-form resource counts.
//! - [`walker`]: seeded Monte Carlo of chain growth and weaving.
//! - [`statevec`]: qubit-level state-vector model of chains, weaving and
//!   teleportation-driven evolution.
//! - [`fock`]: sparse Fock-space model of the KLM teleportation and `CZ_(n)`.

pub mod analytics;
pub mod fock;
pub mod rational;
pub mod statevec;
pub mod walker;

pub use analytics::GateOrder;
pub use rational::Rational;
