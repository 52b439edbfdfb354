//! Staircase estimate of the power lost in a width taper.

use std::f64::consts::PI;

use super::fd::{eim_lateral_index, modes_1d, solve_cross_section_with, CrossSectionOptions};
use super::{Polarization, ModeSolution};
use crate::error::{Error, Result};
use crate::geometry::WaveguideCrossSection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaperShape {
    #[default]
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaperProfile {
    pub start_width_nm: f64,
    pub end_width_nm: f64,
    pub length_um: f64,
    pub shape: TaperShape,
    pub n_segments: usize,
}

impl TaperProfile {
    pub fn new(start_width_nm: f64, end_width_nm: f64, length_um: f64, n_segments: usize) -> Result<Self> {
        if !(start_width_nm > 0.0 && end_width_nm > 0.0) {
            return Err(Error::Geometry(format!(
                "taper widths must be positive, got {start_width_nm} and {end_width_nm}"
            )));
        }
        if !(length_um >= 0.0) {
            return Err(Error::Geometry(format!("taper length {length_um} um is negative")));
        }
        if n_segments == 0 {
            return Err(Error::InvalidInput("taper needs at least one segment".into()));
        }
        Ok(Self {
            start_width_nm,
            end_width_nm,
            length_um,
            shape: TaperShape::Linear,
            n_segments,
        })
    }

    /// The `n_segments + 1` widths of the staircase, start to end.
    pub fn widths(&self) -> Vec<f64> {
        let n = self.n_segments;
        (0..=n)
            .map(|k| match self.shape {
                TaperShape::Linear => {
                    if k == n {
                        self.end_width_nm
                    } else {
                        self.start_width_nm + (self.end_width_nm - self.start_width_nm) * k as f64 / n as f64
                    }
                }
            })
            .collect()
    }
}

/// How local modes are computed.
#[derive(Debug, Clone, Default)]
pub enum TaperMethod {
    /// Vertical slab collapse followed by a lateral 1-D solve per width.
    #[default]
    EffectiveIndex,
    /// Full 2-D cross-section solve per width on a common window.
    CrossSection(CrossSectionOptions),
}

const EIM_DX_NM: f64 = 5.0;

/// `1 - prod overlap^2` over consecutive fundamental quasi-TE modes of the
/// staircase, with the default effective-index method.
pub fn taper_loss(cs_template: &WaveguideCrossSection, taper: &TaperProfile, wavelength_nm: f64) -> Result<f64> {
    taper_loss_with(cs_template, taper, wavelength_nm, &TaperMethod::default())
}

pub fn taper_loss_with(
    cs_template: &WaveguideCrossSection,
    taper: &TaperProfile,
    wavelength_nm: f64,
    method: &TaperMethod,
) -> Result<f64> {
    if taper.n_segments == 0 {
        return Err(Error::InvalidInput("taper needs at least one segment".into()));
    }
    let widths = taper.widths();
    let fields = match method {
        TaperMethod::EffectiveIndex => eim_fields(cs_template, &widths, wavelength_nm)?,
        TaperMethod::CrossSection(opts) => cross_section_fields(cs_template, &widths, wavelength_nm, opts)?,
    };
    let mut transmitted = 1.0;
    for k in 0..widths.len() - 1 {
        if widths[k] == widths[k + 1] {
            continue;
        }
        let (a, b) = (&fields[k], &fields[k + 1]);
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>();
        transmitted *= dot * dot / (na * nb);
    }
    Ok(1.0 - transmitted)
}

fn eim_fields(cs: &WaveguideCrossSection, widths: &[f64], wavelength_nm: f64) -> Result<Vec<Vec<f64>>> {
    let (n_core, n_side) = eim_lateral_index(cs, wavelength_nm, Polarization::TE)?;
    let k0 = 2.0 * PI / wavelength_nm;
    let narrowest = widths.iter().copied().fold(f64::INFINITY, f64::min);
    let widest = widths.iter().copied().fold(0.0, f64::max);
    // Decay length of the narrowest lateral mode sets the window.
    let narrow = lateral_modes(n_core, n_side, narrowest, narrowest + 4000.0, k0);
    let Some(first) = narrow.first() else {
        return Err(Error::NoGuidedMode(format!("no lateral mode at width {narrowest} nm")));
    };
    let decay = 1.0 / (k0 * (first.0 * first.0 - n_side * n_side).sqrt());
    let window = widest + 2.0 * 12.0 * decay;
    widths
        .iter()
        .map(|&w| {
            lateral_modes(n_core, n_side, w, window, k0)
                .into_iter()
                .next()
                .map(|m| m.1)
                .ok_or_else(|| Error::NoGuidedMode(format!("no lateral mode at width {w} nm")))
        })
        .collect()
}

/// Lateral TM-like modes (field normal to the side walls) of a core of width
/// `w` centered in a window, with edge cells permittivity-averaged.
fn lateral_modes(n_core: f64, n_side: f64, w: f64, window: f64, k0: f64) -> Vec<(f64, Vec<f64>)> {
    let nx = (window / EIM_DX_NM).ceil() as usize;
    let mid = 0.5 * nx as f64 * EIM_DX_NM;
    let (a, b) = (mid - 0.5 * w, mid + 0.5 * w);
    let idx: Vec<f64> = (0..nx)
        .map(|i| {
            let (x0, x1) = (i as f64 * EIM_DX_NM, (i + 1) as f64 * EIM_DX_NM);
            let fill = ((x1.min(b) - x0.max(a)) / EIM_DX_NM).clamp(0.0, 1.0);
            (fill * n_core * n_core + (1.0 - fill) * n_side * n_side).sqrt()
        })
        .collect();
    modes_1d(&idx, EIM_DX_NM, k0, Polarization::TM, n_side, n_core)
        .into_iter()
        .map(|m| (m.n_eff, m.field))
        .collect()
}

fn cross_section_fields(
    cs: &WaveguideCrossSection,
    widths: &[f64],
    wavelength_nm: f64,
    opts: &CrossSectionOptions,
) -> Result<Vec<Vec<f64>>> {
    let mut opts = opts.clone();
    if opts.window_nm.is_none() {
        // One window for all widths: the widest core with the narrowest margins.
        let narrow = widths.iter().copied().fold(f64::INFINITY, f64::min);
        let wide = widths.iter().copied().fold(0.0, f64::max);
        let (w, h) = super::fd::auto_window(&cs.with_width(narrow)?, wavelength_nm, Polarization::TE)?;
        opts.window_nm = Some((w - narrow + wide, h));
    }
    opts.n_modes = 1;
    widths
        .iter()
        .map(|&w| {
            let m: Vec<ModeSolution> = solve_cross_section_with(&cs.with_width(w)?, wavelength_nm, Polarization::TE, &opts)?;
            m.into_iter()
                .next()
                .map(|m| m.field)
                .ok_or_else(|| Error::NoGuidedMode(format!("no guided mode at width {w} nm")))
        })
        .collect()
}
