//! Guided-mode solvers: an analytic transfer-matrix slab solver, 1-D and
//! 2-D finite-difference solvers, evanescent decay lengths and staircase
//! taper losses.

mod fd;
pub mod linalg;
mod slab;
mod taper;

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::IndexMap2D;

pub use fd::{
    auto_window, eim_lateral_index, modes_1d, solve_cross_section, solve_cross_section_with,
    solve_slab_fd, CrossSectionOptions, Formulation, LateralBoundary, Mode1d,
};
pub use slab::{slab_residual, solve_slab};
pub use taper::{taper_loss, taper_loss_with, TaperMethod, TaperProfile, TaperShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Polarization {
    #[default]
    TE,
    TM,
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarization::TE => "TE",
            Polarization::TM => "TM",
        })
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TE" => Ok(Polarization::TE),
            "TM" => Ok(Polarization::TM),
            _ => Err(Error::InvalidInput(format!("unknown polarization `{s}`"))),
        }
    }
}

/// A guided mode.
///
/// `field` holds the dominant transverse component on the grid of `index`
/// (same layout, `y` fastest). Slab modes use a single column (`nx == 1`).
/// For TE slab modes the field is `E`, for TM slab modes it is `H`; for
/// cross-sections it is `Ex` (quasi-TE) or `Ey` (quasi-TM).
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub n_eff: f64,
    pub polarization: Polarization,
    pub wavelength_nm: f64,
    pub index: IndexMap2D,
    /// Position of the first sample's cell center, in structure coordinates.
    pub origin_nm: (f64, f64),
    pub field: Vec<f64>,
    /// Dispersion residual (slab) or relative eigen-residual (numeric).
    pub residual: f64,
}

impl ModeSolution {
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.wavelength_nm
    }

    pub fn norm(&self) -> f64 {
        self.field.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Normalized discrete inner product with another mode on the same grid.
    pub fn overlap(&self, other: &ModeSolution) -> Result<f64> {
        if self.field.len() != other.field.len() {
            return Err(Error::InvalidInput(format!(
                "mode grids differ ({} vs {} samples)",
                self.field.len(),
                other.field.len()
            )));
        }
        let dot: f64 = self.field.iter().zip(&other.field).map(|(a, b)| a * b).sum();
        Ok(dot / (self.norm() * other.norm()))
    }

    /// Fraction of `|field|^2` in cells whose index is below `threshold`.
    pub fn power_fraction_below_index(&self, threshold: f64) -> f64 {
        let total: f64 = self.field.iter().map(|v| v * v).sum();
        let part: f64 = self
            .field
            .iter()
            .zip(self.index.values())
            .filter(|(_, &n)| n < threshold)
            .map(|(v, _)| v * v)
            .sum();
        part / total
    }

    /// Fraction of `|field|^2` in vacuum cells.
    pub fn vacuum_fraction(&self) -> f64 {
        self.power_fraction_below_index(1.0 + 1e-9)
    }

    /// Largest `|field|` on the outer ring of the grid divided by the peak.
    pub fn boundary_ratio(&self) -> f64 {
        boundary_ratio(&self.field, self.index.nx, self.index.ny)
    }

    /// CSV grid: `y_nm,field` for slab modes, `x_nm,y_nm,field` otherwise.
    pub fn to_csv(&self) -> String {
        let (nx, ny) = (self.index.nx, self.index.ny);
        let (dx, dy) = (self.index.dx_nm, self.index.dy_nm);
        let mut out = format!(
            "# n_eff={:.10} polarization={} wavelength_nm={}\n",
            self.n_eff, self.polarization, self.wavelength_nm
        );
        if nx == 1 {
            out.push_str("y_nm,field\n");
            for j in 0..ny {
                let _ = writeln!(out, "{},{:e}", self.origin_nm.1 + j as f64 * dy, self.field[j]);
            }
        } else {
            out.push_str("x_nm,y_nm,field\n");
            for i in 0..nx {
                for j in 0..ny {
                    let _ = writeln!(
                        out,
                        "{},{},{:e}",
                        self.origin_nm.0 + i as f64 * dx,
                        self.origin_nm.1 + j as f64 * dy,
                        self.field[i * ny + j]
                    );
                }
            }
        }
        out
    }
}

pub(crate) fn boundary_ratio(field: &[f64], nx: usize, ny: usize) -> f64 {
    let peak = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let mut edge = 0.0f64;
    for i in 0..nx {
        for j in 0..ny {
            let on_edge = j == 0 || j + 1 == ny || (nx > 1 && (i == 0 || i + 1 == nx));
            if on_edge {
                edge = edge.max(field[i * ny + j].abs());
            }
        }
    }
    edge / peak
}

/// 1/e field decay length into vacuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayLength {
    Finite(f64),
    /// Longer than [`UNBOUNDED_DECAY_NM`].
    Unbounded,
}

pub const UNBOUNDED_DECAY_NM: f64 = 1e6;

impl DecayLength {
    pub fn finite(self) -> Option<f64> {
        match self {
            DecayLength::Finite(d) => Some(d),
            DecayLength::Unbounded => None,
        }
    }
}

/// `1 / (k0 sqrt(n_eff^2 - 1))` for a mode evanescent against vacuum.
pub fn evanescent_decay_length(mode: &ModeSolution) -> Result<DecayLength> {
    decay_length(mode.n_eff, mode.wavelength_nm)
}

pub fn decay_length(n_eff: f64, wavelength_nm: f64) -> Result<DecayLength> {
    if !(n_eff > 1.0) {
        return Err(Error::NotEvanescent(n_eff));
    }
    let d = wavelength_nm / (2.0 * PI * (n_eff * n_eff - 1.0).sqrt());
    Ok(if d > UNBOUNDED_DECAY_NM || !d.is_finite() {
        DecayLength::Unbounded
    } else {
        DecayLength::Finite(d)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_length_closed_form() {
        let d = decay_length(2f64.sqrt(), 780.0).unwrap().finite().unwrap();
        assert!((d - 780.0 / (2.0 * PI)).abs() < 1e-9);
        assert!((d - 124.14).abs() < 0.01);
        assert_eq!(decay_length(1.0 + 1e-14, 780.0).unwrap(), DecayLength::Unbounded);
        assert!(matches!(decay_length(1.0, 780.0), Err(Error::NotEvanescent(_))));
        assert!(decay_length(0.9, 780.0).is_err());
    }
}
