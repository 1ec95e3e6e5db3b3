//! Simulation and reconstruction of continuous-time quantum walks in
//! evanescently coupled waveguide arrays.
//!
//! The walk inside a uniform array depends on the coupling rate `γ` and the
//! propagation distance `z` only through their product, so the evolution can
//! be mapped on a chip of fixed length by tuning `γ` (by stretching the chip
//! or changing wavelength) and recording the end face. Everything here is
//! expressed in the normalized propagation coordinate `ξ = 2γz/π`, the
//! distance in units of the coupling length.
//!
//! * [`lattice`]: geometry, strain and wavelength coupling models.
//! * [`evolution`]: propagator `exp(izC)` and one/two-photon observables.
//! * [`calibration`]: recovering `ξ` from reference-pair readings.
//! * [`reconstruction`]: stacking end-face snapshots and scoring fidelity.
//! * [`experiment`]: seeded synthetic measurement campaigns.
//! * [`io`]: CSV, PGM and JSON file formats.

pub mod calibration;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod io;
pub mod lattice;
pub mod reconstruction;

pub use error::{Error, Result};
