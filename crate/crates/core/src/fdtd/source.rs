use std::f64::consts::PI;

use super::FdtdConfig;
use crate::error::{Error, Result};
use crate::geometry::IndexMap2D;
use crate::modesolver::{modes_1d, ModeSolution, Polarization};

/// Transverse `Ez` profile of a guided mode on one grid column, matched to
/// the discrete dispersion of the Yee grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfile {
    pub column: usize,
    /// First row of the profile.
    pub j0: usize,
    /// Unit-norm samples (`sum u^2 = 1`).
    pub profile: Vec<f64>,
    /// Effective index of the discrete mode.
    pub n_eff: f64,
    /// Propagation constant on the grid, 1/nm.
    pub beta: f64,
    /// `-Hy / Ez` of a forward wave, after averaging `Hy` onto the `Ez` column.
    pub admittance: f64,
}

/// Numerically dispersed vacuum wavenumber of the Yee scheme.
pub(crate) fn k_tilde(wavelength_nm: f64, dt: f64) -> f64 {
    let w = 2.0 * PI / wavelength_nm;
    2.0 * (0.5 * w * dt).sin() / dt
}

impl ModeProfile {
    /// Guided mode number `order` (0 = fundamental) of the cells
    /// `rows` of column `column`.
    pub fn discrete(
        geometry: &IndexMap2D,
        config: &FdtdConfig,
        wavelength_nm: f64,
        column: usize,
        rows: std::ops::Range<usize>,
        order: usize,
    ) -> Result<Self> {
        if column >= geometry.nx || rows.end > geometry.ny || rows.start >= rows.end {
            return Err(Error::Geometry(format!(
                "mode line column {column} rows {rows:?} outside the {} x {} grid",
                geometry.nx, geometry.ny
            )));
        }
        check_grid(geometry, config)?;
        let (_, dt) = config.time_step(wavelength_nm);
        let kt = k_tilde(wavelength_nm, dt);
        let col = &geometry.column(column)[rows.clone()];
        let n_max = col.iter().copied().fold(1.0, f64::max);
        let n_min = col[0].max(col[col.len() - 1]);
        let modes = modes_1d(col, config.dy_nm, kt, Polarization::TE, n_min, n_max);
        let m = modes.into_iter().nth(order).ok_or_else(|| {
            Error::NoGuidedMode(format!("column {column} has no guided mode of order {order}"))
        })?;
        Ok(Self::from_parts(column, rows.start, m.field, m.beta_sq, wavelength_nm, config))
    }

    fn from_parts(column: usize, j0: usize, profile: Vec<f64>, beta_t_sq: f64, wavelength_nm: f64, config: &FdtdConfig) -> Self {
        let (_, dt) = config.time_step(wavelength_nm);
        let dx = config.dx_nm;
        let bt = beta_t_sq.max(0.0).sqrt();
        let beta = 2.0 / dx * (0.5 * bt * dx).min(1.0).asin();
        let admittance = (0.5 * beta * dx).cos() * bt / k_tilde(wavelength_nm, dt);
        Self {
            column,
            j0,
            profile,
            n_eff: beta * wavelength_nm / (2.0 * PI),
            beta,
            admittance,
        }
    }

    /// Uses the field of a 1-D mode solution (slab solve with `dy` equal to
    /// the FDTD spacing) placed so its first sample lands on row `j0`.
    pub fn from_mode(
        mode: &ModeSolution,
        geometry: &IndexMap2D,
        config: &FdtdConfig,
        column: usize,
        j0: usize,
    ) -> Result<Self> {
        check_grid(geometry, config)?;
        if mode.index.nx != 1 || (mode.index.dy_nm - config.dy_nm).abs() > 1e-9 * config.dy_nm {
            return Err(Error::Resolution(format!(
                "mode grid ({} columns, dy {} nm) does not match the FDTD line (1 column, dy {} nm)",
                mode.index.nx, mode.index.dy_nm, config.dy_nm
            )));
        }
        let n = mode.field.len();
        if column >= geometry.nx || j0 + n > geometry.ny {
            return Err(Error::Geometry(format!("mode of {n} rows at row {j0} leaves the grid")));
        }
        let mut u = mode.field.clone();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
        // Rayleigh quotient of the grid operator fixes the discrete beta.
        let (_, dt) = config.time_step(mode.wavelength_nm);
        let kt = k_tilde(mode.wavelength_nm, dt);
        let col = &geometry.column(column)[j0..j0 + n];
        let h2 = 1.0 / (config.dy_nm * config.dy_nm);
        let mut q = 0.0;
        for k in 0..n {
            let up = if k + 1 < n { u[k + 1] } else { 0.0 };
            let dn = if k > 0 { u[k - 1] } else { 0.0 };
            q += u[k] * ((up - 2.0 * u[k] + dn) * h2 + kt * kt * col[k] * col[k] * u[k]);
        }
        Ok(Self::from_parts(column, j0, u, q, mode.wavelength_nm, config))
    }

    /// Uniform profile of a normally incident plane wave in index
    /// `n_medium` over `rows` (periodic y boundary).
    pub fn plane(column: usize, rows: std::ops::Range<usize>, n_medium: f64, wavelength_nm: f64, config: &FdtdConfig) -> Self {
        let len = rows.len().max(1);
        let (_, dt) = config.time_step(wavelength_nm);
        let kt = k_tilde(wavelength_nm, dt) * n_medium;
        let u = vec![1.0 / (len as f64).sqrt(); len];
        Self::from_parts(column, rows.start, u, kt * kt, wavelength_nm, config)
    }

    /// Copy of the profile moved to another column.
    pub fn at_column(&self, column: usize) -> Self {
        Self { column, ..self.clone() }
    }

    pub fn rows(&self) -> std::ops::Range<usize> {
        self.j0..self.j0 + self.profile.len()
    }
}

fn check_grid(geometry: &IndexMap2D, config: &FdtdConfig) -> Result<()> {
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b;
    if !same(geometry.dx_nm, config.dx_nm) || !same(geometry.dy_nm, config.dy_nm) {
        return Err(Error::Resolution(format!(
            "geometry grid {} x {} nm differs from the FDTD grid {} x {} nm",
            geometry.dx_nm, geometry.dy_nm, config.dx_nm, config.dy_nm
        )));
    }
    Ok(())
}

/// Soft line current exciting one guided mode in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSource {
    pub mode: ModeProfile,
    pub wavelength_nm: f64,
    pub amplitude: f64,
}

/// Uniform soft line current along a full column; a plane wave along x
/// when the y boundary is periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSource {
    pub column: usize,
    pub wavelength_nm: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Mode(ModeSource),
    Plane(PlaneSource),
}

impl Source {
    pub fn wavelength_nm(&self) -> f64 {
        match self {
            Source::Mode(s) => s.wavelength_nm,
            Source::Plane(s) => s.wavelength_nm,
        }
    }

    pub(crate) fn amplitude(&self) -> f64 {
        match self {
            Source::Mode(s) => s.amplitude * s.mode.profile.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            Source::Plane(s) => s.amplitude,
        }
    }

    pub(crate) fn column(&self) -> usize {
        match self {
            Source::Mode(s) => s.mode.column,
            Source::Plane(s) => s.column,
        }
    }

    /// `(row, weight)` pairs of the current line.
    pub(crate) fn weights(&self, ny: usize) -> Vec<(usize, f64)> {
        match self {
            Source::Mode(s) => s.mode.rows().zip(s.mode.profile.iter().map(|u| u * s.amplitude)).collect(),
            Source::Plane(s) => (0..ny).map(|j| (j, s.amplitude)).collect(),
        }
    }
}

/// Fundamental-mode source on `rows` of `column`.
pub fn mode_source(
    geometry: &IndexMap2D,
    config: &FdtdConfig,
    wavelength_nm: f64,
    column: usize,
    rows: std::ops::Range<usize>,
    amplitude: f64,
) -> Result<Source> {
    let mode = ModeProfile::discrete(geometry, config, wavelength_nm, column, rows, 0)?;
    Ok(Source::Mode(ModeSource {
        mode,
        wavelength_nm,
        amplitude,
    }))
}
