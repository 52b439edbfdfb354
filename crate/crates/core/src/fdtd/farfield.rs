use std::f64::consts::PI;

use nalgebra::Complex;

use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Angular power distribution in a homogeneous half-space. Angles are from
/// the line normal, positive toward +x.
#[derive(Debug, Clone, PartialEq)]
pub struct FarField {
    pub angles_deg: Vec<f64>,
    /// Relative power per unit angle, peak normalized to 1.
    pub power: Vec<f64>,
    /// Peak angle refined by a parabola through the three highest samples.
    pub peak_angle_deg: f64,
    pub resolution_deg: f64,
}

impl FarField {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("angle_deg,power\n");
        for (a, p) in self.angles_deg.iter().zip(&self.power) {
            s.push_str(&format!("{a},{p:e}\n"));
        }
        s
    }

    /// Fraction of the power within `half_width_deg` of the peak.
    pub fn fraction_near_peak(&self, half_width_deg: f64) -> f64 {
        let total: f64 = self.power.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        self.angles_deg
            .iter()
            .zip(&self.power)
            .filter(|(a, _)| (*a - self.peak_angle_deg).abs() <= half_width_deg)
            .map(|(_, p)| p)
            .sum::<f64>()
            / total
    }
}

/// Required angular resolution.
pub const MAX_RESOLUTION_DEG: f64 = 1.0;
pub const DEFAULT_ANGLE_STEP_DEG: f64 = 0.05;

/// Far-field pattern of complex `Ez` samples taken on a straight line in a
/// medium of index `n_medium`, on a 0.05 degree grid.
pub fn near_to_far(positions_nm: &[f64], field: &[C64], wavelength_nm: f64, n_medium: f64) -> Result<FarField> {
    near_to_far_with(positions_nm, field, wavelength_nm, n_medium, DEFAULT_ANGLE_STEP_DEG)
}

pub fn near_to_far_with(
    positions_nm: &[f64],
    field: &[C64],
    wavelength_nm: f64,
    n_medium: f64,
    step_deg: f64,
) -> Result<FarField> {
    if positions_nm.len() != field.len() || positions_nm.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need matching position and field samples (got {} and {})",
            positions_nm.len(),
            field.len()
        )));
    }
    if !(wavelength_nm > 0.0 && n_medium >= 1.0 && step_deg > 0.0) {
        return Err(Error::InvalidInput("wavelength, medium index or angle step out of range".into()));
    }
    let d = positions_nm[1] - positions_nm[0];
    let length = d * positions_nm.len() as f64;
    let resolution_rad = wavelength_nm / (n_medium * length);
    let resolution_deg = resolution_rad.to_degrees();
    if resolution_deg > MAX_RESOLUTION_DEG {
        return Err(Error::LineTooShort {
            length_nm: length,
            resolution_deg,
            required_nm: wavelength_nm / (n_medium * MAX_RESOLUTION_DEG.to_radians()),
        });
    }
    let k = 2.0 * PI * n_medium / wavelength_nm;
    let steps = (90.0 / step_deg).floor() as i64;
    let angles_deg: Vec<f64> = (-steps..=steps).map(|s| s as f64 * step_deg).collect();
    let mut power: Vec<f64> = angles_deg
        .iter()
        .map(|a| {
            let th = a.to_radians();
            let kx = k * th.sin();
            let f: C64 = positions_nm
                .iter()
                .zip(field)
                .map(|(x, e)| e * C64::from_polar(1.0, -kx * x))
                .sum();
            f.norm_sqr() * th.cos().powi(2)
        })
        .collect();
    let peak = power.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        power.iter_mut().for_each(|p| *p /= peak);
    }
    let imax = power
        .iter()
        .enumerate()
        .fold(0, |b, (i, p)| if *p > power[b] { i } else { b });
    let mut peak_angle = angles_deg[imax];
    if imax > 0 && imax + 1 < power.len() {
        let (l, c, r) = (power[imax - 1], power[imax], power[imax + 1]);
        let den = l - 2.0 * c + r;
        if den < 0.0 {
            peak_angle += 0.5 * step_deg * (l - r) / den;
        }
    }
    Ok(FarField {
        angles_deg,
        power,
        peak_angle_deg: peak_angle,
        resolution_deg,
    })
}
