//! Spectral-localizer index computations for finite tight-binding models.
//!
//! The pipeline is: build a model on a [`lattice::Pattern`], optionally add
//! disorder and flatten it ([`operators`]), assemble a localizer against the
//! position Dirac operator ([`dirac`], [`localizer`]) and read off its
//! signature or Pfaffian sign ([`linalg`]). [`experiments`] drives ensembles
//! of such runs.

pub mod error;
pub mod clifford;
pub mod dirac;
pub mod experiments;
pub mod lattice;
pub mod linalg;
pub mod localizer;
pub mod operators;
pub mod selfcheck;
pub mod cli;
