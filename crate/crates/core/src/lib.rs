//! Numerical laboratory for Toeplitz operators on Paley-Wiener spaces.

pub mod cli;
pub mod commutator;
pub mod error;
pub mod factorize;
pub mod grid;
pub mod nehari;
pub mod pwspace;
pub mod split;
pub mod toeplitz;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Boundary, Grid, SampledFunction, Spectrum, C64};
pub use pwspace::{Band, BandlimitedFunction};
