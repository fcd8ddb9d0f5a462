//! Spectral toolkit for the chiral continuum model of twisted bilayer
//! graphene: operator discretization, resonant-set eigenproblems, flat-band
//! verification, trace identities, theta-function eigenfunctions, and
//! a-posteriori certification of the leading magic angles.

pub mod bands;
pub mod certify;
pub mod error;
pub mod fourier_ops;
pub mod lattice;
pub mod magic;
pub mod potential;
pub mod spectral;
pub mod theta;
pub mod traces;

pub use error::{Error, Result};
