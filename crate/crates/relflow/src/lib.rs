//! Numerics toolkit for the barotropic compressible Navier-Stokes system with
//! general convex dissipation potentials.
//!
//! The crate builds 1-D finite-volume "weak" solutions with a discrete energy
//! ledger, transports reference densities along characteristics of a prescribed
//! velocity field, and certifies weak-strong agreement through a relative-energy
//! (Bregman) functional closed by a Gronwall monitor.

pub mod config;
pub mod constitutive;
pub mod defects;
pub mod relenergy;
pub mod scenarios;
pub mod solver1d;
pub mod transport;
