//! Simulation and verification toolkit for the ferromagnetic q-state Potts
//! model on random d-regular graphs.
//!
//! The crate is organised around the objects the model is built from:
//!
//! - [`rgraph`]: random regular multigraphs via the pairing model, planted
//!   sampling given colour/edge statistics, component statistics.
//! - [`meanfield`]: scalar and graph-level Belief Propagation, the Bethe
//!   functional, first/second-moment rate functionals and the three
//!   thresholds `beta_u < beta_c < beta_h`.
//! - [`gibbs_exact`]: exact Boltzmann computations on tiny graphs by full
//!   state enumeration (partition functions, Glauber kernel, bottleneck
//!   ratios, the Nishimori identity).
//! - [`dynamics`]: Glauber and Swendsen-Wang chains at desk scale with
//!   escape-time experiments seeded from the planted model.
//! - [`percolation`]: bond percolation in the binomial- and exact-edge
//!   models together with the branching-process predictions.
//! - [`broadcast`]: Potts broadcasting on the d-regular tree and Monte
//!   Carlo estimation of the non-reconstruction distance.
//!
//! Colours are `0`-based indices in `0..q` throughout. All randomised
//! operations take an explicit RNG; experiment drivers derive one
//! independent ChaCha stream per trial from a single master seed (see
//! [`seeding`]), so results do not depend on worker scheduling.

pub mod broadcast;
pub mod dist;
pub mod dynamics;
pub mod error;
pub mod gibbs_exact;
pub mod meanfield;
pub mod percolation;
pub mod phase;
pub mod rgraph;
pub mod seeding;

pub use dist::{ColourDistribution, EdgeDistribution};
pub use error::{Error, Result};
pub use rgraph::{Colour, Configuration, MultiGraph};
