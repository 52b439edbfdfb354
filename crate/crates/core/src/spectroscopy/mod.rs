//! Rubidium D2 absorption: thermal vapor, a cold ensemble on top of it,
//! saturated absorption and an evanescent waveguide probe.
//!
//! Detunings are in Hz from the hyperfine-free Rb85 D2 line center
//! ([`REFERENCE_LINE`]). All spectra are weak-probe Beer-Lambert except the
//! explicit pump term of [`satabs_spectrum`].

mod grid;
mod lines;
mod spectra;
mod voigt;

use std::fmt::Write as _;

pub use grid::{adaptive_grid, default_grid, uniform_grid, DEFAULT_HALF_SPAN_HZ};
pub use lines::{
    doppler_fwhm, load_line_data, most_probable_speed, parse_line_data, AtomLineData, Isotope, IsotopeSelection,
    Transition, AMU, C_LIGHT, K_B, PA_PER_TORR,
};
pub use spectra::{
    evanescent_spectrum, evanescent_spectrum_with, mot_probe_spectrum, reference_frequency_hz, satabs_features,
    satabs_spectrum, transit_width, transition_detuning, vapor_absorption_spectrum, EvanescentProbe, FeatureKind,
    SatabsFeature,
};
pub use voigt::{faddeeva, lorentz_peak, voigt};

use crate::error::{Error, Result};

pub const REFERENCE_LINE: &str = "Rb85 D2 hyperfine-free center";
pub const SPECTRUM_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct VaporConfig {
    pub temperature_k: f64,
    /// Alkali partial pressure.
    pub pressure_torr: f64,
    pub path_length_mm: f64,
    pub isotopes: IsotopeSelection,
}

impl Default for VaporConfig {
    fn default() -> Self {
        Self {
            temperature_k: 300.0,
            pressure_torr: 1e-7,
            path_length_mm: 18.0,
            isotopes: IsotopeSelection::Natural,
        }
    }
}

impl VaporConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.temperature_k > 0.0 && self.temperature_k.is_finite()) {
            errs.push(format!("vapor temperature {} K must be positive", self.temperature_k));
        }
        if !(self.pressure_torr >= 0.0 && self.pressure_torr.is_finite()) {
            errs.push(format!("vapor pressure {} Torr must be non-negative", self.pressure_torr));
        }
        if !(self.path_length_mm >= 0.0 && self.path_length_mm.is_finite()) {
            errs.push(format!("path length {} mm must be non-negative", self.path_length_mm));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// `P / (k_B T)`, m^-3.
    pub fn number_density(&self) -> f64 {
        self.pressure_torr * PA_PER_TORR / (K_B * self.temperature_k)
    }
}

/// Defaults are typical MOT magnitudes, not measured values.
#[derive(Debug, Clone, PartialEq)]
pub struct ColdEnsembleConfig {
    pub temperature_k: f64,
    pub column_density_per_m2: f64,
    /// Shift of every cold-atom line from its vapor position.
    pub center_detuning_hz: f64,
    pub isotope: Isotope,
}

impl Default for ColdEnsembleConfig {
    fn default() -> Self {
        Self {
            temperature_k: 150e-6,
            column_density_per_m2: 1e13,
            center_detuning_hz: 0.0,
            isotope: Isotope::Rb85,
        }
    }
}

impl ColdEnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.temperature_k > 0.0 && self.temperature_k.is_finite()) {
            errs.push(format!("cold temperature {} K must be positive", self.temperature_k));
        }
        if !(self.column_density_per_m2 >= 0.0 && self.column_density_per_m2.is_finite()) {
            errs.push(format!("column density {} m^-2 must be non-negative", self.column_density_per_m2));
        }
        if !self.center_detuning_hz.is_finite() {
            errs.push("cold center detuning must be finite".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

/// Probe transmission on a detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub reference: String,
    pub detuning_hz: Vec<f64>,
    /// In `(0, 1]`.
    pub transmission: Vec<f64>,
    /// Echo of the inputs, in insertion order.
    pub metadata: Vec<(String, String)>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.detuning_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detuning_hz.is_empty()
    }

    pub fn optical_depth(&self) -> Vec<f64> {
        self.transmission.iter().map(|t| -t.ln()).collect()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Linear interpolation; clamps outside the grid.
    pub fn transmission_at(&self, detuning_hz: f64) -> f64 {
        let x = &self.detuning_hz;
        let k = x.partition_point(|&v| v < detuning_hz);
        if k == 0 {
            return self.transmission[0];
        }
        if k == x.len() {
            return self.transmission[k - 1];
        }
        let t = (detuning_hz - x[k - 1]) / (x[k] - x[k - 1]);
        self.transmission[k - 1] * (1.0 - t) + self.transmission[k] * t
    }

    /// `# key = value` header, then `detuning_hz,transmission`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# schema_version = {SPECTRUM_SCHEMA_VERSION}\n# reference = {}\n", self.reference);
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k} = {v}");
        }
        s.push_str("detuning_hz,transmission\n");
        for (d, t) in self.detuning_hz.iter().zip(&self.transmission) {
            let _ = writeln!(s, "{d},{t:e}");
        }
        s
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("detuning grid is empty".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("detuning grid has non-finite values".into()));
    }
    if let Some(k) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!(
            "detuning grid not strictly increasing at index {} ({} then {})",
            k + 1,
            grid[k],
            grid[k + 1]
        )));
    }
    Ok(())
}
