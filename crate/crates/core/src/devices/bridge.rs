use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fdtd::{run, FdtdConfig, ModeProfile, MonitorSpec, RunMetadata, Source, ModeSource};
use crate::geometry::{IndexMap2D, LayerStack, WaveguideCrossSection};
use crate::materials::Material;
use crate::modesolver::{eim_lateral_index, Polarization};

/// Wide channel waveguide whose sidewalls are removed over `wall_length_um`,
/// leaving a laterally unbounded slab under the vacuum wall.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeSpec {
    pub waveguide_width_nm: f64,
    pub wall_length_um: f64,
    pub wavelength_nm: f64,
    /// Vertical structure; its width is replaced by `waveguide_width_nm`.
    pub cross_section: WaveguideCrossSection,
}

/// 4 um thermal oxide, 200 nm SiN core, 1200 nm oxide cladding, vacuum
/// above; oxide beside the core.
pub fn chip_stack(wavelength_nm: f64) -> Result<LayerStack> {
    LayerStack::from_names(&[("SiO2", 4000.0), ("Si3N4", 200.0), ("SiO2", 1200.0)], "vacuum", wavelength_nm)
}

pub fn chip_waveguide(width_nm: f64, wavelength_nm: f64) -> Result<WaveguideCrossSection> {
    WaveguideCrossSection::new(
        chip_stack(wavelength_nm)?,
        width_nm,
        1,
        Material::lookup("SiO2", wavelength_nm)?,
        Material::vacuum(),
    )
}

impl BridgeSpec {
    pub fn new(waveguide_width_nm: f64, wall_length_um: f64, wavelength_nm: f64) -> Result<Self> {
        let spec = Self {
            waveguide_width_nm,
            wall_length_um,
            wavelength_nm,
            cross_section: chip_waveguide(waveguide_width_nm.max(1.0), wavelength_nm)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn chip(wall_length_um: f64) -> Result<Self> {
        Self::new(5000.0, wall_length_um, 780.0)
    }

    pub fn with_wall_length(&self, wall_length_um: f64) -> Self {
        Self {
            wall_length_um,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.wall_length_um >= 0.0) || !self.wall_length_um.is_finite() {
            errs.push(format!("wall_length_um must be >= 0, got {}", self.wall_length_um));
        }
        if !(self.waveguide_width_nm > 0.0) {
            errs.push(format!("waveguide_width_nm must be positive, got {}", self.waveguide_width_nm));
        }
        if !(self.wavelength_nm > 0.0) {
            errs.push(format!("wavelength_nm must be positive, got {}", self.wavelength_nm));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

/// Placement of the bridge inside the top-view domain (PML excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeLayout {
    pub lead_in_nm: f64,
    pub lead_out_nm: f64,
    /// Slab-index margin between the waveguide edge and the PML, each side.
    pub lateral_margin_nm: f64,
    /// Run the mirror-image structure (light enters from the far side).
    pub reversed: bool,
}

impl Default for BridgeLayout {
    fn default() -> Self {
        Self {
            lead_in_nm: 2000.0,
            lead_out_nm: 3000.0,
            lateral_margin_nm: 1500.0,
            reversed: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BridgeRun {
    pub efficiency: f64,
    pub input_power: f64,
    pub output_power: f64,
    /// Backward modal power at the input over the forward one.
    pub reflection: f64,
    pub core_index: f64,
    pub clad_index: f64,
    pub meta: RunMetadata,
}

/// Output over input fundamental-mode power.
pub fn bridge_transmission(spec: &BridgeSpec, config: &FdtdConfig) -> Result<f64> {
    Ok(bridge_transmission_with(spec, config, &BridgeLayout::default())?.efficiency)
}

/// Top-view index map (whole domain, PML included) and the slab indices
/// `(guided, beside the guide)`.
pub fn bridge_geometry(spec: &BridgeSpec, config: &FdtdConfig, layout: &BridgeLayout) -> Result<(IndexMap2D, f64, f64)> {
    spec.validate()?;
    let cs = spec.cross_section.with_width(spec.waveguide_width_nm)?;
    let (n_core, n_clad) = eim_lateral_index(&cs, spec.wavelength_nm, Polarization::TE)?;
    let (dx, dy) = (config.dx_nm, config.dy_nm);
    let pml = config.pml_thickness_nm;
    let wall = spec.wall_length_um * 1000.0;
    let length = 2.0 * pml + layout.lead_in_nm + wall + layout.lead_out_nm;
    let height = 2.0 * pml + 2.0 * layout.lateral_margin_nm + spec.waveguide_width_nm;
    let nx = (length / dx).round() as usize;
    let ny = (height / dy).round() as usize;
    let (x0, x1) = (pml + layout.lead_in_nm, pml + layout.lead_in_nm + wall);
    let (y0, y1) = (0.5 * (height - spec.waveguide_width_nm), 0.5 * (height + spec.waveguide_width_nm));
    let map = IndexMap2D::from_fn(nx, ny, dx, dy, |i, j| {
        let (x, y) = ((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy);
        if (x >= x0 && x < x1) || (y >= y0 && y < y1) {
            n_core
        } else {
            n_clad
        }
    })?;
    let map = if layout.reversed { map.flipped_x() } else { map };
    Ok((map, n_core, n_clad))
}

pub fn bridge_transmission_with(spec: &BridgeSpec, config: &FdtdConfig, layout: &BridgeLayout) -> Result<BridgeRun> {
    config.validate()?;
    let (map, n_core, n_clad) = bridge_geometry(spec, config, layout)?;
    let px = config.pml_cells();
    let py = (config.pml_thickness_nm / config.dy_nm).round() as usize;
    let rows = py..map.ny - py;
    let src_col = px + 10;
    let in_col = src_col + 25;
    let out_col = map.nx - px - 25;
    if in_col >= out_col {
        return Err(Error::Geometry("bridge domain too short for its monitors".into()));
    }
    let mode = ModeProfile::discrete(&map, config, spec.wavelength_nm, src_col, rows, 0)?;
    let source = Source::Mode(ModeSource {
        mode: mode.clone(),
        wavelength_nm: spec.wavelength_nm,
        amplitude: 1.0,
    });
    let monitors = vec![
        MonitorSpec::Mode { id: "input".into(), mode: mode.at_column(in_col) },
        MonitorSpec::Mode { id: "output".into(), mode: mode.at_column(out_col) },
    ];
    let out = run(&map, &[source], &monitors, config)?;
    let (a, b) = (out.mode("input").expect("monitor"), out.mode("output").expect("monitor"));
    if !(a.forward_power > 0.0) {
        return Err(Error::Numerical("no power reached the input monitor".into()));
    }
    Ok(BridgeRun {
        efficiency: b.forward_power / a.forward_power,
        input_power: a.forward_power,
        output_power: b.forward_power,
        reflection: a.backward_power / a.forward_power,
        core_index: n_core,
        clad_index: n_clad,
        meta: out.meta,
    })
}

/// Efficiency against wall length.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionCurve {
    /// `(wall length um, efficiency)`, sorted by length.
    pub points: Vec<(f64, f64)>,
    /// Steady-state flag of each point's run.
    pub converged: Vec<bool>,
}

/// Efficiencies above 1 by less than this are numerical overshoot.
pub const OVERSHOOT_TOLERANCE: f64 = 0.02;

impl TransmissionCurve {
    /// Indices of points above 1 (tolerated up to [`OVERSHOOT_TOLERANCE`]).
    pub fn overshoots(&self) -> Vec<usize> {
        self.points.iter().enumerate().filter(|(_, p)| p.1 > 1.0).map(|(i, _)| i).collect()
    }

    /// Largest rise of efficiency between consecutive lengths (0 when
    /// non-increasing).
    pub fn max_rise(&self) -> f64 {
        self.points.windows(2).map(|w| w[1].1 - w[0].1).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("wall_length_um,efficiency,converged\n");
        for (p, c) in self.points.iter().zip(&self.converged) {
            let _ = writeln!(s, "{},{:.9},{}", p.0, p.1, c);
        }
        s
    }
}

/// One run per length, in parallel; output sorted by length.
pub fn bridge_sweep(lengths_um: &[f64], spec: &BridgeSpec, config: &FdtdConfig) -> Result<TransmissionCurve> {
    if lengths_um.is_empty() {
        return Err(Error::InvalidInput("bridge sweep needs at least one wall length".into()));
    }
    let bad: Vec<String> = lengths_um
        .iter()
        .filter(|l| !(**l >= 0.0) || !l.is_finite())
        .map(|l| format!("wall length {l} um must be >= 0"))
        .collect();
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    let runs: Vec<Result<BridgeRun>> = lengths_um
        .par_iter()
        .map(|&l| bridge_transmission_with(&spec.with_wall_length(l), config, &BridgeLayout::default()))
        .collect();
    let mut pts = Vec::with_capacity(runs.len());
    for (l, r) in lengths_um.iter().zip(runs) {
        let r = r?;
        if r.efficiency > 1.0 + OVERSHOOT_TOLERANCE || r.efficiency < 0.0 {
            return Err(Error::Numerical(format!(
                "efficiency {} at {l} um is outside [0, {}]",
                r.efficiency,
                1.0 + OVERSHOOT_TOLERANCE
            )));
        }
        pts.push((*l, r.efficiency, r.meta.converged));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(TransmissionCurve {
        points: pts.iter().map(|p| (p.0, p.1)).collect(),
        converged: pts.iter().map(|p| p.2).collect(),
    })
}
