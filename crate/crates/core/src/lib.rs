//! Translation-invariant Gibbs measures of the hard-core model with countably
//! many spin values on the Cayley tree of order two.
//!
//! The admissibility graph is a hub at spin 0 plus self-loops at one or two
//! nonzero spins. The crate solves the boundary-law equations, counts the
//! measures across parameter regimes, builds the Markov kernel of each
//! measure with its stationary law, and samples finite trees from it.
//!
//! Everything numeric is generic over [`Scalar`] (`f64` and `f32`); the
//! aliases below fix `f64`.

pub mod boundary_law;
pub mod branch;
pub mod chain;
pub mod error;
pub mod model;
pub mod oracle;
pub mod regime;
pub mod roots;
pub mod sampler;
pub mod scalar;
pub mod solve;
pub mod three_loop;
pub mod two_loop;

pub use error::{Error, Result};
pub use model::{AdmissibilityGraph, Branch, State};
pub use regime::CaseLabel;
pub use scalar::Scalar;

pub type Spec = model::ActivitySpec<f64>;
pub type Solution = model::BoundaryLawSolution<f64>;
pub type Report = regime::RegimeReport<f64>;
pub type TwoLoop = two_loop::TwoLoopProblem<f64>;
pub type ThreeLoop = three_loop::ThreeLoopProblem<f64>;
pub type Kernel = chain::TransitionMatrix<f64>;
pub type Stationary = chain::StationaryDistribution<f64>;
pub type System = boundary_law::ReducedSystem<f64>;
