//! Self-repelling polymers on the hypercubic lattice.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: points, symmetric step sets, walks and their symmetry actions;
//! * [`model`]: the repulsion potential, jump distribution and the weight of a walk;
//! * [`enumerate`]: exhaustive weighted enumeration of walks and bridges, with sharding;
//! * [`decompose`]: renewal times, bridge decompositions, crossings, zigzags, diamonds;
//! * [`transform`]: the unfolding and stickbreaking surgeries;
//! * [`montecarlo`]: exact and Markov-chain sampling, renewal processes, diagnostics;
//! * [`cli`]: configuration files, subcommands and report emission.

pub mod cli;
pub mod decompose;
pub mod enumerate;
mod error;
pub mod lattice;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod par;
pub mod transform;

pub use error::{Error, Result};
pub use lattice::{LatticeVector, StepSet, Symmetry, Walk};
pub use model::{JumpDistribution, LogWeight, Model, Potential, PotentialKind};
