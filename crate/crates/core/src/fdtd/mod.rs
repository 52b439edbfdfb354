//! Two-dimensional FDTD for the TE polarization (`Ez`, `Hx`, `Hy`).
//!
//! Units: lengths and times in nm with `c = 1`; vacuum impedance 1. The
//! geometry map covers the whole computational domain; its outer
//! `pml_thickness / dx` cells on each absorbing side form the PML, so
//! structures meant to run into the absorber must be drawn into it (see
//! [`pad_for_pml`]).

mod engine;
mod farfield;
mod monitor;
mod source;

use std::fmt::Write as _;

pub use engine::{run, RunOutput, Snapshot};
pub use farfield::{near_to_far, near_to_far_with, FarField};
pub use monitor::{FieldLineRecord, FluxRecord, Line, ModeRecord, MonitorSpec};
pub use source::{mode_source, ModeProfile, ModeSource, PlaneSource, Source};

use crate::error::{Error, Result};
use crate::geometry::IndexMap2D;

/// Treatment of the top and bottom domain edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YBoundary {
    #[default]
    Pml,
    /// Wraps around; used for plane-wave checks.
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdtdConfig {
    pub dx_nm: f64,
    pub dy_nm: f64,
    /// `c dt / min(dx, dy)`, before rounding `dt` down so that a carrier
    /// period is a whole number of steps.
    pub courant_factor: f64,
    /// Carrier periods simulated after the ramp.
    pub run_time: f64,
    pub pml_thickness_nm: f64,
    pub pml_grading_order: u32,
    /// Target normal-incidence PML reflection used to set the loss profile.
    pub pml_reflection: f64,
    pub source_ramp: f64,
    /// Periods at the end of the run over which phasors are accumulated.
    pub dft_window: usize,
    /// Periods at the end of the run checked for steady state.
    pub steady_window: usize,
    /// Extra monitor wavelengths besides the carrier.
    pub extra_wavelengths_nm: Vec<f64>,
    /// Store an `Ez` snapshot every this many periods.
    pub snapshot_every: Option<usize>,
    pub y_boundary: YBoundary,
}

impl Default for FdtdConfig {
    fn default() -> Self {
        Self {
            dx_nm: 20.0,
            dy_nm: 20.0,
            courant_factor: 0.65,
            run_time: 300.0,
            pml_thickness_nm: 500.0,
            pml_grading_order: 3,
            pml_reflection: 1e-8,
            source_ramp: 10.0,
            dft_window: 10,
            steady_window: 50,
            extra_wavelengths_nm: Vec::new(),
            snapshot_every: None,
            y_boundary: YBoundary::Pml,
        }
    }
}

/// Margin kept below the 2-D Courant limit.
pub const STABILITY_MARGIN: f64 = 0.01;
pub const MIN_CELLS_PER_WAVELENGTH: f64 = 15.0;
pub const MIN_PML_CELLS: usize = 10;

impl FdtdConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.dx_nm > 0.0 && self.dy_nm > 0.0) {
            errs.push(format!("grid spacings must be positive (dx={}, dy={})", self.dx_nm, self.dy_nm));
        }
        if !(self.courant_factor > 0.0 && self.courant_factor <= 1.0) {
            errs.push(format!("courant_factor {} outside (0, 1]", self.courant_factor));
        } else if self.dx_nm > 0.0 && self.dy_nm > 0.0 && self.stability_number() > 1.0 - STABILITY_MARGIN {
            errs.push(format!(
                "courant_factor {} violates the 2-D stability bound (c dt sqrt(1/dx^2 + 1/dy^2) = {:.4} > {})",
                self.courant_factor,
                self.stability_number(),
                1.0 - STABILITY_MARGIN
            ));
        }
        if !(self.run_time >= 0.0) {
            errs.push(format!("run_time {} must be >= 0", self.run_time));
        }
        if !(self.source_ramp >= 0.0) {
            errs.push(format!("source_ramp {} must be >= 0", self.source_ramp));
        }
        if self.dx_nm > 0.0 && self.pml_cells() < MIN_PML_CELLS {
            errs.push(format!(
                "pml_thickness {} nm is {} cells, need at least {MIN_PML_CELLS}",
                self.pml_thickness_nm,
                self.pml_cells()
            ));
        }
        if !(self.pml_reflection > 0.0 && self.pml_reflection < 1.0) {
            errs.push(format!("pml_reflection {} outside (0, 1)", self.pml_reflection));
        }
        if self.dft_window == 0 {
            errs.push("dft_window must be at least one period".into());
        }
        if self.extra_wavelengths_nm.iter().any(|w| !(*w > 0.0)) {
            errs.push("extra wavelengths must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    fn stability_number(&self) -> f64 {
        let dt = self.courant_factor * self.dx_nm.min(self.dy_nm);
        dt * (1.0 / (self.dx_nm * self.dx_nm) + 1.0 / (self.dy_nm * self.dy_nm)).sqrt()
    }

    /// PML cells on each absorbing side (rounded to the x spacing).
    pub fn pml_cells(&self) -> usize {
        (self.pml_thickness_nm / self.dx_nm).round().max(0.0) as usize
    }

    fn pml_cells_y(&self) -> usize {
        (self.pml_thickness_nm / self.dy_nm).round().max(0.0) as usize
    }

    /// Steps per carrier period and the matching time step.
    pub fn time_step(&self, wavelength_nm: f64) -> (usize, f64) {
        let dt0 = self.courant_factor * self.dx_nm.min(self.dy_nm);
        let steps = (wavelength_nm / dt0).ceil().max(1.0) as usize;
        (steps, wavelength_nm / steps as f64)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dx_nm = {}", self.dx_nm);
        let _ = writeln!(s, "dy_nm = {}", self.dy_nm);
        let _ = writeln!(s, "courant_factor = {}", self.courant_factor);
        let _ = writeln!(s, "run_time_periods = {}", self.run_time);
        let _ = writeln!(s, "pml_thickness_nm = {}", self.pml_thickness_nm);
        let _ = writeln!(s, "pml_grading_order = {}", self.pml_grading_order);
        let _ = writeln!(s, "pml_reflection = {:e}", self.pml_reflection);
        let _ = writeln!(s, "source_ramp_periods = {}", self.source_ramp);
        let _ = writeln!(s, "dft_window_periods = {}", self.dft_window);
        let _ = writeln!(s, "steady_window_periods = {}", self.steady_window);
        let _ = writeln!(s, "y_boundary = {:?}", self.y_boundary);
        s
    }
}

/// Checks that interior (non-PML) cells resolve the shortest material
/// wavelength with at least [`MIN_CELLS_PER_WAVELENGTH`] cells.
pub fn check_resolution(geometry: &IndexMap2D, config: &FdtdConfig, wavelength_nm: f64) -> Result<()> {
    let px = config.pml_cells();
    let py = match config.y_boundary {
        YBoundary::Pml => config.pml_cells_y(),
        YBoundary::Periodic => 0,
    };
    let mut n_max = 1.0f64;
    for i in px..geometry.nx.saturating_sub(px) {
        for j in py..geometry.ny.saturating_sub(py) {
            n_max = n_max.max(geometry.get(i, j));
        }
    }
    let cells = wavelength_nm / n_max / geometry.dx_nm.max(geometry.dy_nm);
    if cells < MIN_CELLS_PER_WAVELENGTH {
        return Err(Error::Resolution(format!(
            "{cells:.1} cells per wavelength in n = {n_max:.4} (need {MIN_CELLS_PER_WAVELENGTH})"
        )));
    }
    Ok(())
}

/// Extends an interior map by `cells_x` columns on each side and `cells_y`
/// rows top and bottom, repeating the edge cells.
pub fn pad_for_pml(interior: &IndexMap2D, cells_x: usize, cells_y: usize) -> IndexMap2D {
    let (nx, ny) = (interior.nx + 2 * cells_x, interior.ny + 2 * cells_y);
    IndexMap2D::from_fn(nx, ny, interior.dx_nm, interior.dy_nm, |i, j| {
        let ii = i.saturating_sub(cells_x).min(interior.nx - 1);
        let jj = j.saturating_sub(cells_y).min(interior.ny - 1);
        interior.get(ii, jj)
    })
    .expect("padding keeps indices valid")
}

/// Structured run metadata for the sidecar file.
#[derive(Debug, Clone)]
pub struct RunMetadata {
    pub config: FdtdConfig,
    pub wavelength_nm: f64,
    pub nx: usize,
    pub ny: usize,
    pub dt_nm: f64,
    pub steps_per_period: usize,
    pub total_steps: usize,
    pub elapsed_s: f64,
    /// Monitor powers varied by less than 0.5% over the steady window.
    pub converged: bool,
    pub max_variation: f64,
    pub threads: usize,
}

impl RunMetadata {
    pub fn to_text(&self) -> String {
        let mut s = String::from("[run]\n");
        let _ = writeln!(s, "wavelength_nm = {}", self.wavelength_nm);
        let _ = writeln!(s, "nx = {}", self.nx);
        let _ = writeln!(s, "ny = {}", self.ny);
        let _ = writeln!(s, "dt_nm = {}", self.dt_nm);
        let _ = writeln!(s, "steps_per_period = {}", self.steps_per_period);
        let _ = writeln!(s, "total_steps = {}", self.total_steps);
        let _ = writeln!(s, "elapsed_s = {:.3}", self.elapsed_s);
        let _ = writeln!(s, "converged = {}", self.converged);
        let _ = writeln!(s, "max_variation = {:e}", self.max_variation);
        let _ = writeln!(s, "threads = {}", self.threads);
        s.push_str("[config]\n");
        s.push_str(&self.config.to_text());
        s
    }
}
