//! Equally weighted Dirac mixtures that reproduce a truncated table of power
//! moments exactly, regularized by the Shannon entropy of a companion density
//! that is uniform on disjoint spheres around the Dirac locations.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the
//! command-line frontend live in the `dmix` crate.
//!
//! Layout:
//!
//! - [`multiindex`]: exponent vectors, graded-lexicographic enumeration, moment counts.
//! - [`moments`]: moment tables, Dirac mixtures, closed-form Gaussian and mixture moments.
//! - [`pwc`]: the disjoint-sphere density, its entropy, and max-entropy radii for fixed locations.
//! - [`solver`]: augmented-Lagrangian maximizer, Levenberg–Marquardt, finite differences.
//! - [`dma`]: problem assembly for the three determinedness cases and the symmetric mode.
//! - [`eval`]: empirical CDFs, Cramér–von Mises distance, experiment presets.
#![no_std]

extern crate alloc;

pub mod dma;
mod error;
pub mod eval;
mod math;
pub mod moments;
pub mod multiindex;
pub mod pwc;
pub mod solver;

pub use error::{Error, Result};
