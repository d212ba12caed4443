//! Simulator and gate compiler for the quantum abacus: a particle in a
//! harmonic trap with a tunable U(2) point interaction at the origin, where
//! single-qubit operations are realized by half-period time evolution.
//!
//! Modules, bottom-up:
//! - [`su2core`]: two-by-two unitary algebra and the Bloch-step decomposition.
//! - [`oscillator`]: Hermite functions, two-component eigenbases, grids.
//! - [`pointint`]: the connection condition, scattering, Robin spectra.
//! - [`evolve`]: modal and Crank–Nicolson engines, schedules.
//! - [`abacus`]: qubit preparation, readout, compilation, classical bead, CNOT.
//! - [`io`]: file formats (schedules, programs, CSV tables).
//! - [`verify`]: the acceptance checks, shared by tests and the CLI.

pub mod abacus;
pub mod error;
pub mod evolve;
pub mod io;
pub mod numeric;
pub mod oscillator;
pub mod pointint;
pub mod su2core;
pub mod verify;

pub use error::{AbacusError, Result};
pub use numeric::{Tolerances, C64};
pub use su2core::{GateClass, UnitaryGate};
