//! Photonic-device simulation and rubidium spectroscopy toolkit.
//!
//! Modules, bottom up: [`materials`] and [`geometry`] describe structures,
//! [`modesolver`] finds guided modes, [`fdtd`] propagates fields in 2-D,
//! [`devices`] builds the bridge and grating studies on top of both, and
//! [`spectroscopy`] models rubidium D2 absorption. [`cli`] wires everything
//! to config files.

pub mod error;
pub mod geometry;
pub mod materials;
pub mod modesolver;
pub mod fdtd;
pub mod devices;
pub mod spectroscopy;
pub mod cli;

pub use error::{Error, ErrorKind, Result};
