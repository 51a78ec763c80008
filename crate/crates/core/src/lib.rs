//! Numerical harmonic analysis on discretized product spaces.
//!
//! The crate realizes a mixed-homogeneity symbol class and its operator
//! calculus on periodic grids: nonisotropic dyadic frequency decompositions,
//! pseudodifferential application and kernel realization, seminorm
//! membership checks, and a set of experiment drivers that measure the
//! quantitative estimates the calculus is supposed to satisfy.
//!
//! Layout of the crate:
//!
//! * [`layout`]: product grids, fields, and the unitary DFT between the
//!   physical and frequency sides.
//! * [`cutoffs`]: the smooth radial profile and bump underlying every
//!   partition and window.
//! * [`dyadic`]: nonisotropic dilations, piece tables, scale-separation
//!   bookkeeping, and support geometry.
//! * [`symbols`]: the symbol families, seminorm estimation, and tabulated
//!   symbols.
//! * [`operators`]: operator application, adjoints, kernel realization,
//!   composition probing, the strong maximal function, and operator norms.
//! * [`estimates`]: experiment drivers producing typed pass/fail reports.
//! * [`fitting`]: shared regression and verdict plumbing.
//! * [`random`]: seeded deterministic draws.

pub mod cutoffs;
pub mod dyadic;
pub mod error;
pub mod estimates;
pub mod fitting;
pub mod layout;
pub mod operators;
pub mod random;
pub mod symbols;

pub use error::{Error, Result};
pub use layout::{forward_dft, inverse_dft, Domain, Field, ProductLayout, QExponent};

/// Default cap on total grid points, shared by every entry point that
/// constructs layouts from user input.
pub const DEFAULT_POINT_CAP: usize = 1 << 22;
