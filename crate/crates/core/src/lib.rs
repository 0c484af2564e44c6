//! Numerical engine for the world-continuum picture of non-relativistic
//! quantum mechanics.
//!
//! A wavefunction is propagated with a split-operator Schrödinger solver
//! ([`propagator`]); its density and current ([`hydrodynamics`]) define a
//! continuum of Bohmian trajectories, each one a *world* ([`worlds`]).
//! Amounts of worlds in regions of configuration space ([`measure`]) give
//! the Born rule for the pointer model of [`measurement`], and finite
//! ensembles ([`miw`]) show how sampled worlds approach the continuum.
//!
//! Configuration spaces are one- or two-dimensional periodic boxes
//! ([`configspace::Grid`]).

pub mod configspace;
pub mod error;
pub mod hydrodynamics;
pub mod interp;
pub mod measure;
pub mod measurement;
pub mod miw;
pub mod propagator;
pub mod spectral;
pub mod worlds;

pub use configspace::{Grid, PhysicsParams, Potential, StateRecipe, WaveField};
pub use error::{Error, Result};
pub use propagator::FrameStore;

pub use num_complex::Complex64;

/// Configuration spaces have at most two coordinates.
pub const MAX_DIM: usize = 2;

/// A configuration point. Only the first `grid.dim()` entries are meaningful.
pub type Point = [f64; MAX_DIM];
