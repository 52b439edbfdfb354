//! Run configuration files.
//!
//! A config is TOML. Top-level keys: `command`, `out_dir`, `workers`,
//! `seed`; an optional `[fdtd]` table; and one table named after the
//! command (`[mode]`, `[taper]`, `[bridge-sweep]`, `[grating]`,
//! `[design-search]`, `[spectrum]`). Every key carries its unit in its name.
//! Unknown keys are rejected; missing keys take the defaults below.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::devices::{BridgeLayout, GratingOptions};
use crate::error::{Error, Result};
use crate::fdtd::FdtdConfig;
use crate::geometry::{GratingSpec, Layer, LayerStack, WaveguideCrossSection};
use crate::materials::Material;
use crate::modesolver::Polarization;
use crate::spectroscopy::{Isotope, IsotopeSelection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Mode,
    Taper,
    BridgeSweep,
    Grating,
    DesignSearch,
    Spectrum,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Mode => "mode",
            CommandName::Taper => "taper",
            CommandName::BridgeSweep => "bridge-sweep",
            CommandName::Grating => "grating",
            CommandName::DesignSearch => "design-search",
            CommandName::Spectrum => "spectrum",
        }
    }
}

impl std::str::FromStr for CommandName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <Self as clap::ValueEnum>::from_str(s, false).map_err(|_| Error::InvalidInput(format!("unknown command `{s}`")))
    }
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdtdSection {
    pub dx_nm: f64,
    pub dy_nm: f64,
    pub courant_factor: f64,
    pub run_time_periods: f64,
    pub pml_thickness_nm: f64,
    pub pml_grading_order: u32,
    pub pml_reflection: f64,
    pub source_ramp_periods: f64,
    pub dft_window_periods: usize,
    pub steady_window_periods: usize,
    pub extra_wavelengths_nm: Vec<f64>,
}

impl Default for FdtdSection {
    fn default() -> Self {
        let c = FdtdConfig::default();
        Self {
            dx_nm: c.dx_nm,
            dy_nm: c.dy_nm,
            courant_factor: c.courant_factor,
            run_time_periods: c.run_time,
            pml_thickness_nm: c.pml_thickness_nm,
            pml_grading_order: c.pml_grading_order,
            pml_reflection: c.pml_reflection,
            source_ramp_periods: c.source_ramp,
            dft_window_periods: c.dft_window,
            steady_window_periods: c.steady_window,
            extra_wavelengths_nm: c.extra_wavelengths_nm,
        }
    }
}

impl FdtdSection {
    pub fn to_config(&self) -> FdtdConfig {
        FdtdConfig {
            dx_nm: self.dx_nm,
            dy_nm: self.dy_nm,
            courant_factor: self.courant_factor,
            run_time: self.run_time_periods,
            pml_thickness_nm: self.pml_thickness_nm,
            pml_grading_order: self.pml_grading_order,
            pml_reflection: self.pml_reflection,
            source_ramp: self.source_ramp_periods,
            dft_window: self.dft_window_periods,
            steady_window: self.steady_window_periods,
            extra_wavelengths_nm: self.extra_wavelengths_nm.clone(),
            ..FdtdConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    pub material: String,
    pub thickness_nm: f64,
}

fn layers(spec: &[(&str, f64)]) -> Vec<LayerEntry> {
    spec.iter()
        .map(|&(m, t)| LayerEntry {
            material: m.into(),
            thickness_nm: t,
        })
        .collect()
}

fn build_stack(entries: &[LayerEntry], cover: &str, wavelength_nm: f64) -> Result<LayerStack> {
    let mut ls = Vec::with_capacity(entries.len());
    for e in entries {
        ls.push(Layer::new(Material::lookup(&e.material, wavelength_nm)?, e.thickness_nm));
    }
    LayerStack::new(ls, Material::lookup(cover, wavelength_nm)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Slab,
    Ridge,
}

/// Guided modes of a slab or a ridge. Ridge defaults: the 400 x 200 nm SiN
/// core buried in oxide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeParams {
    pub structure: Structure,
    pub layers: Vec<LayerEntry>,
    pub cover: String,
    pub wavelength_nm: f64,
    pub polarization: String,
    /// Ridge only.
    pub core_layer: usize,
    pub width_nm: f64,
    pub side_material: String,
    pub window_width_nm: f64,
    pub window_height_nm: f64,
    pub dx_nm: f64,
    pub dy_nm: f64,
}

impl Default for ModeParams {
    fn default() -> Self {
        Self {
            structure: Structure::Ridge,
            layers: layers(&[("SiO2", 3000.0), ("Si3N4", 200.0)]),
            cover: "SiO2".into(),
            wavelength_nm: 780.0,
            polarization: "TE".into(),
            core_layer: 1,
            width_nm: 400.0,
            side_material: "SiO2".into(),
            window_width_nm: 3600.0,
            window_height_nm: 3200.0,
            dx_nm: 20.0,
            dy_nm: 10.0,
        }
    }
}

impl ModeParams {
    pub fn stack(&self) -> Result<LayerStack> {
        build_stack(&self.layers, &self.cover, self.wavelength_nm)
    }

    pub fn cross_section(&self) -> Result<WaveguideCrossSection> {
        WaveguideCrossSection::new(
            self.stack()?,
            self.width_nm,
            self.core_layer,
            Material::lookup(&self.side_material, self.wavelength_nm)?,
            Material::lookup(&self.cover, self.wavelength_nm)?,
        )
    }

    pub fn polarization(&self) -> Result<Polarization> {
        self.polarization.parse()
    }

    fn check(&self, errs: &mut Vec<String>) {
        collect(errs, "mode", self.polarization().map(|_| ()));
        match self.structure {
            Structure::Slab => collect(errs, "mode", self.stack().map(|_| ())),
            Structure::Ridge => {
                collect(errs, "mode", self.cross_section().map(|_| ()));
                for (k, v) in [
                    ("window_width_nm", self.window_width_nm),
                    ("window_height_nm", self.window_height_nm),
                    ("dx_nm", self.dx_nm),
                    ("dy_nm", self.dy_nm),
                ] {
                    positive(errs, "mode", k, v);
                }
            }
        }
    }
}

/// Width taper on a ridge template; defaults to the 400 nm to 5 um taper
/// over 500 um.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaperParams {
    pub layers: Vec<LayerEntry>,
    pub cover: String,
    pub core_layer: usize,
    pub side_material: String,
    pub wavelength_nm: f64,
    pub start_width_nm: f64,
    pub end_width_nm: f64,
    pub length_um: f64,
    pub segments: usize,
}

impl Default for TaperParams {
    fn default() -> Self {
        Self {
            layers: layers(&[("SiO2", 4000.0), ("Si3N4", 200.0), ("SiO2", 1200.0)]),
            cover: "vacuum".into(),
            core_layer: 1,
            side_material: "SiO2".into(),
            wavelength_nm: 780.0,
            start_width_nm: 400.0,
            end_width_nm: 5000.0,
            length_um: 500.0,
            segments: 64,
        }
    }
}

impl TaperParams {
    pub fn template(&self) -> Result<WaveguideCrossSection> {
        WaveguideCrossSection::new(
            build_stack(&self.layers, &self.cover, self.wavelength_nm)?,
            self.start_width_nm,
            self.core_layer,
            Material::lookup(&self.side_material, self.wavelength_nm)?,
            Material::lookup(&self.cover, self.wavelength_nm)?,
        )
    }

    fn check(&self, errs: &mut Vec<String>) {
        collect(errs, "taper", self.template().map(|_| ()));
        positive(errs, "taper", "end_width_nm", self.end_width_nm);
        if !(self.length_um >= 0.0) {
            errs.push(format!("taper.length_um = {} must be >= 0", self.length_um));
        }
        if self.segments == 0 {
            errs.push("taper.segments must be at least 1".into());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeParams {
    pub wall_lengths_um: Vec<f64>,
    pub waveguide_width_nm: f64,
    pub wavelength_nm: f64,
    pub lead_in_nm: f64,
    pub lead_out_nm: f64,
    pub lateral_margin_nm: f64,
}

impl Default for BridgeParams {
    fn default() -> Self {
        let l = BridgeLayout::default();
        let spec = crate::devices::BridgeSpec::chip(0.0).expect("default bridge");
        Self {
            wall_lengths_um: vec![0.0, 2.0, 4.0, 5.0, 7.0, 10.0],
            waveguide_width_nm: spec.waveguide_width_nm,
            wavelength_nm: spec.wavelength_nm,
            lead_in_nm: l.lead_in_nm,
            lead_out_nm: l.lead_out_nm,
            lateral_margin_nm: l.lateral_margin_nm,
        }
    }
}

impl BridgeParams {
    pub fn layout(&self) -> BridgeLayout {
        BridgeLayout {
            lead_in_nm: self.lead_in_nm,
            lead_out_nm: self.lead_out_nm,
            lateral_margin_nm: self.lateral_margin_nm,
            reversed: false,
        }
    }

    fn check(&self, errs: &mut Vec<String>) {
        if self.wall_lengths_um.is_empty() {
            errs.push("bridge-sweep.wall_lengths_um must list at least one length".into());
        }
        for (k, l) in self.wall_lengths_um.iter().enumerate() {
            if !(*l >= 0.0 && l.is_finite()) {
                errs.push(format!("bridge-sweep.wall_lengths_um[{k}] = {l} must be >= 0"));
            }
        }
        positive(errs, "bridge-sweep", "waveguide_width_nm", self.waveguide_width_nm);
        positive(errs, "bridge-sweep", "wavelength_nm", self.wavelength_nm);
        for (k, v) in [
            ("lead_in_nm", self.lead_in_nm),
            ("lead_out_nm", self.lead_out_nm),
            ("lateral_margin_nm", self.lateral_margin_nm),
        ] {
            positive(errs, "bridge-sweep", k, v);
        }
    }
}

/// Grating structure shared by `grating` and `design-search`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GratingParams {
    pub layers: Vec<LayerEntry>,
    pub cover: String,
    pub pitch_nm: f64,
    pub tooth_width_nm: f64,
    pub tooth_thickness_nm: f64,
    pub tooth_material: String,
    pub n_periods: usize,
    pub wavelength_nm: f64,
    /// Empty for none.
    pub substrate: String,
    pub lead_in_nm: f64,
    pub lead_out_nm: f64,
    pub cover_gap_nm: f64,
    pub skip_periods: usize,
    pub emission_threshold: f64,
    pub snapshot: bool,
}

impl Default for GratingParams {
    fn default() -> Self {
        let o = GratingOptions::default();
        Self {
            layers: layers(&[("SiO2", 4000.0), ("Si3N4", 200.0), ("SiO2", 1200.0)]),
            cover: "vacuum".into(),
            pitch_nm: 510.0,
            tooth_width_nm: 301.0,
            tooth_thickness_nm: 100.0,
            tooth_material: "HfO2".into(),
            n_periods: 90,
            wavelength_nm: 780.0,
            substrate: o.substrate.unwrap_or_default(),
            lead_in_nm: o.lead_in_nm,
            lead_out_nm: o.lead_out_nm,
            cover_gap_nm: o.cover_gap_nm,
            skip_periods: o.skip_periods,
            emission_threshold: o.emission_threshold,
            snapshot: o.snapshot,
        }
    }
}

impl GratingParams {
    pub fn stack(&self) -> Result<LayerStack> {
        build_stack(&self.layers, &self.cover, self.wavelength_nm)
    }

    pub fn grating(&self) -> Result<GratingSpec> {
        GratingSpec::new(
            self.pitch_nm,
            self.tooth_width_nm,
            self.tooth_thickness_nm,
            Material::lookup(&self.tooth_material, self.wavelength_nm)?,
            self.n_periods,
        )
    }

    pub fn options(&self) -> GratingOptions {
        GratingOptions {
            substrate: (!self.substrate.is_empty()).then(|| self.substrate.clone()),
            lead_in_nm: self.lead_in_nm,
            lead_out_nm: self.lead_out_nm,
            cover_gap_nm: self.cover_gap_nm,
            skip_periods: self.skip_periods,
            emission_threshold: self.emission_threshold,
            snapshot: self.snapshot,
        }
    }

    fn check(&self, section: &str, errs: &mut Vec<String>) {
        collect(errs, section, self.stack().map(|_| ()));
        if self.n_periods == 0 {
            errs.push(format!("{section}.n_periods = 0 must be at least 1"));
        } else {
            collect(errs, section, self.grating().map(|_| ()));
        }
        if !self.substrate.is_empty() {
            collect(errs, section, Material::lookup(&self.substrate, self.wavelength_nm).map(|_| ()));
        }
        for (k, v) in [
            ("lead_in_nm", self.lead_in_nm),
            ("lead_out_nm", self.lead_out_nm),
            ("cover_gap_nm", self.cover_gap_nm),
        ] {
            positive(errs, section, k, v);
        }
        if !(self.emission_threshold >= 0.0) {
            errs.push(format!("{section}.emission_threshold must be >= 0"));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignParams {
    pub target_angle_deg: f64,
    pub target_decay_per_mm: f64,
    pub angle_weight: f64,
    pub decay_weight: f64,
    pub angle_scale_deg: f64,
    pub decay_scale_per_mm: f64,
    pub pitch_nm: [f64; 2],
    pub fill: [f64; 2],
    pub thickness_nm: [f64; 2],
    pub budget: usize,
    /// Narrowest tooth or gap; 0 uses two grid cells.
    pub min_feature_nm: f64,
    /// Standard deviations of Gaussian noise added to each evaluation,
    /// drawn from `seed` and the candidate parameters.
    pub noise_angle_deg: f64,
    pub noise_decay_per_mm: f64,
    pub grating: GratingParams,
}

impl Default for DesignParams {
    fn default() -> Self {
        Self {
            target_angle_deg: 15.0,
            target_decay_per_mm: 8.3,
            angle_weight: 1.0,
            decay_weight: 1.0,
            angle_scale_deg: 1.0,
            decay_scale_per_mm: 1.0,
            pitch_nm: [459.0, 561.0],
            fill: [0.531, 0.649],
            thickness_nm: [90.0, 110.0],
            budget: 20,
            min_feature_nm: 0.0,
            noise_angle_deg: 0.0,
            noise_decay_per_mm: 0.0,
            grating: GratingParams::default(),
        }
    }
}

impl DesignParams {
    fn check(&self, errs: &mut Vec<String>) {
        self.grating.check("design-search.grating", errs);
        if self.budget == 0 {
            errs.push("design-search.budget must be at least 1".into());
        }
        for (k, [lo, hi]) in [("pitch_nm", self.pitch_nm), ("fill", self.fill), ("thickness_nm", self.thickness_nm)] {
            if !(lo <= hi) {
                errs.push(format!("design-search.{k} = [{lo}, {hi}] is empty"));
            }
        }
        for (k, v) in [
            ("angle_scale_deg", self.angle_scale_deg),
            ("decay_scale_per_mm", self.decay_scale_per_mm),
        ] {
            positive(errs, "design-search", k, v);
        }
        for (k, v) in [
            ("angle_weight", self.angle_weight),
            ("decay_weight", self.decay_weight),
            ("min_feature_nm", self.min_feature_nm),
            ("noise_angle_deg", self.noise_angle_deg),
            ("noise_decay_per_mm", self.noise_decay_per_mm),
        ] {
            if !(v >= 0.0) {
                errs.push(format!("design-search.{k} = {v} must be >= 0"));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    Vapor,
    Mot,
    Satabs,
    Evanescent,
}

impl SpectrumKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectrumKind::Vapor => "vapor",
            SpectrumKind::Mot => "mot",
            SpectrumKind::Satabs => "satabs",
            SpectrumKind::Evanescent => "evanescent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VaporSection {
    pub temperature_k: f64,
    pub pressure_torr: f64,
    pub path_length_mm: f64,
    /// `natural`, `Rb85` or `Rb87`.
    pub isotopes: String,
}

impl Default for VaporSection {
    fn default() -> Self {
        Self {
            temperature_k: 300.0,
            pressure_torr: 1e-7,
            path_length_mm: 18.0,
            isotopes: "natural".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColdSection {
    pub temperature_k: f64,
    pub column_density_per_m2: f64,
    pub center_detuning_hz: f64,
    pub isotope: String,
}

impl Default for ColdSection {
    fn default() -> Self {
        Self {
            temperature_k: 150e-6,
            column_density_per_m2: 1e13,
            center_detuning_hz: 0.0,
            isotope: "Rb85".into(),
        }
    }
}

/// Evanescent probe: the fundamental TE mode of a slab stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub layers: Vec<LayerEntry>,
    pub cover: String,
    pub wavelength_nm: f64,
    pub interaction_length_mm: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            layers: layers(&[("SiO2", 3000.0), ("Si3N4", 200.0)]),
            cover: "vacuum".into(),
            wavelength_nm: 780.0,
            interaction_length_mm: 5.0,
        }
    }
}

impl ProbeSection {
    pub fn stack(&self) -> Result<LayerStack> {
        build_stack(&self.layers, &self.cover, self.wavelength_nm)
    }
}

/// `step_hz = 0` selects the adaptive grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub half_span_hz: f64,
    pub step_hz: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            half_span_hz: crate::spectroscopy::DEFAULT_HALF_SPAN_HZ,
            step_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumParams {
    pub kind: SpectrumKind,
    pub pump_saturation: f64,
    pub vapor: VaporSection,
    pub cold: ColdSection,
    pub probe: ProbeSection,
    pub grid: GridSection,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            kind: SpectrumKind::Vapor,
            pump_saturation: 1.0,
            vapor: VaporSection::default(),
            cold: ColdSection::default(),
            probe: ProbeSection::default(),
            grid: GridSection::default(),
        }
    }
}

impl SpectrumParams {
    pub fn vapor(&self) -> Result<crate::spectroscopy::VaporConfig> {
        Ok(crate::spectroscopy::VaporConfig {
            temperature_k: self.vapor.temperature_k,
            pressure_torr: self.vapor.pressure_torr,
            path_length_mm: self.vapor.path_length_mm,
            isotopes: self.vapor.isotopes.parse::<IsotopeSelection>()?,
        })
    }

    pub fn cold(&self) -> Result<crate::spectroscopy::ColdEnsembleConfig> {
        Ok(crate::spectroscopy::ColdEnsembleConfig {
            temperature_k: self.cold.temperature_k,
            column_density_per_m2: self.cold.column_density_per_m2,
            center_detuning_hz: self.cold.center_detuning_hz,
            isotope: self.cold.isotope.parse::<Isotope>()?,
        })
    }

    fn check(&self, errs: &mut Vec<String>) {
        collect(errs, "spectrum.vapor", self.vapor().and_then(|v| v.validate()));
        if self.kind == SpectrumKind::Mot {
            collect(errs, "spectrum.cold", self.cold().and_then(|c| c.validate()));
        }
        if self.kind == SpectrumKind::Satabs && !(self.pump_saturation >= 0.0) {
            errs.push(format!("spectrum.pump_saturation = {} must be >= 0", self.pump_saturation));
        }
        if self.kind == SpectrumKind::Evanescent {
            collect(errs, "spectrum.probe", self.probe.stack().map(|_| ()));
            if !(self.probe.interaction_length_mm >= 0.0) {
                errs.push("spectrum.probe.interaction_length_mm must be >= 0".into());
            }
        }
        positive(errs, "spectrum.grid", "half_span_hz", self.grid.half_span_hz);
        if !(self.grid.step_hz >= 0.0) {
            errs.push("spectrum.grid.step_hz must be >= 0".into());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Mode(ModeParams),
    Taper(TaperParams),
    BridgeSweep(BridgeParams),
    Grating(GratingParams),
    DesignSearch(DesignParams),
    Spectrum(SpectrumParams),
}

impl Job {
    pub fn command(&self) -> CommandName {
        match self {
            Job::Mode(_) => CommandName::Mode,
            Job::Taper(_) => CommandName::Taper,
            Job::BridgeSweep(_) => CommandName::BridgeSweep,
            Job::Grating(_) => CommandName::Grating,
            Job::DesignSearch(_) => CommandName::DesignSearch,
            Job::Spectrum(_) => CommandName::Spectrum,
        }
    }

    pub fn default_for(command: CommandName) -> Self {
        match command {
            CommandName::Mode => Job::Mode(Default::default()),
            CommandName::Taper => Job::Taper(Default::default()),
            CommandName::BridgeSweep => Job::BridgeSweep(Default::default()),
            CommandName::Grating => Job::Grating(Default::default()),
            CommandName::DesignSearch => Job::DesignSearch(Default::default()),
            CommandName::Spectrum => Job::Spectrum(Default::default()),
        }
    }
}

/// A validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// 0 uses every available core.
    pub workers: usize,
    pub seed: u64,
    pub fdtd: FdtdSection,
    pub job: Job,
}

pub const DEFAULT_OUT_DIR: &str = "picatom-out";

/// On-disk shape of a config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fdtd: Option<FdtdSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taper: Option<TaperParams>,
    #[serde(rename = "bridge-sweep", skip_serializing_if = "Option::is_none")]
    pub bridge_sweep: Option<BridgeParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grating: Option<GratingParams>,
    #[serde(rename = "design-search", skip_serializing_if = "Option::is_none")]
    pub design_search: Option<DesignParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumParams>,
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<CommandName>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    /// `dotted.key=value` assignments applied to the file before parsing.
    pub set: Vec<String>,
}

impl RunConfig {
    /// The fully defaulted config for `command`.
    pub fn defaults(command: CommandName) -> Self {
        Self {
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
            workers: 0,
            seed: 0,
            fdtd: FdtdSection::default(),
            job: Job::default_for(command),
        }
    }

    pub fn command(&self) -> CommandName {
        self.job.command()
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        collect(&mut errs, "fdtd", self.fdtd.to_config().validate());
        match &self.job {
            Job::Mode(p) => p.check(&mut errs),
            Job::Taper(p) => p.check(&mut errs),
            Job::BridgeSweep(p) => p.check(&mut errs),
            Job::Grating(p) => p.check("grating", &mut errs),
            Job::DesignSearch(p) => p.check(&mut errs),
            Job::Spectrum(p) => p.check(&mut errs),
        }
        if self.out_dir.as_os_str().is_empty() {
            errs.push("out_dir must not be empty".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn to_file(&self) -> ConfigFile {
        let mut f = ConfigFile {
            command: Some(self.command()),
            out_dir: Some(self.out_dir.clone()),
            workers: Some(self.workers),
            seed: Some(self.seed),
            fdtd: Some(self.fdtd.clone()),
            ..Default::default()
        };
        match &self.job {
            Job::Mode(p) => f.mode = Some(p.clone()),
            Job::Taper(p) => f.taper = Some(p.clone()),
            Job::BridgeSweep(p) => f.bridge_sweep = Some(p.clone()),
            Job::Grating(p) => f.grating = Some(p.clone()),
            Job::DesignSearch(p) => f.design_search = Some(p.clone()),
            Job::Spectrum(p) => f.spectrum = Some(p.clone()),
        }
        f
    }

    /// TOML text that [`parse_config_str`] turns back into `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }
}

/// Parses, applies overrides, fills defaults and validates.
pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    if overrides.set.is_empty() {
        return from_file(file, overrides);
    }
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| toml_error(text, &e))?;
    for s in &overrides.set {
        apply_set(&mut table, s)?;
    }
    let file: ConfigFile = table.try_into().map_err(|e: toml::de::Error| {
        Error::InvalidInput(format!("--set {}: {}", overrides.set.join(" --set "), e.message()))
    })?;
    from_file(file, overrides)
}

pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}

fn from_file(f: ConfigFile, o: &Overrides) -> Result<RunConfig> {
    let command = match (o.command, f.command) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Validation(vec![format!(
                "command `{a}` on the command line disagrees with `command = \"{b}\"` in the config"
            )]))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(Error::Validation(vec!["no command given".into()])),
    };
    let mut stray = Vec::new();
    let mut check = |name: CommandName, present: bool| {
        if present && name != command {
            stray.push(format!("section [{name}] does not apply to command `{command}`"));
        }
    };
    check(CommandName::Mode, f.mode.is_some());
    check(CommandName::Taper, f.taper.is_some());
    check(CommandName::BridgeSweep, f.bridge_sweep.is_some());
    check(CommandName::Grating, f.grating.is_some());
    check(CommandName::DesignSearch, f.design_search.is_some());
    check(CommandName::Spectrum, f.spectrum.is_some());
    if !stray.is_empty() {
        return Err(Error::Validation(stray));
    }
    let job = match command {
        CommandName::Mode => Job::Mode(f.mode.unwrap_or_default()),
        CommandName::Taper => Job::Taper(f.taper.unwrap_or_default()),
        CommandName::BridgeSweep => Job::BridgeSweep(f.bridge_sweep.unwrap_or_default()),
        CommandName::Grating => Job::Grating(f.grating.unwrap_or_default()),
        CommandName::DesignSearch => Job::DesignSearch(f.design_search.unwrap_or_default()),
        CommandName::Spectrum => Job::Spectrum(f.spectrum.unwrap_or_default()),
    };
    let cfg = RunConfig {
        out_dir: o.out_dir.clone().or(f.out_dir).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        workers: o.workers.or(f.workers).unwrap_or(0),
        seed: o.seed.or(f.seed).unwrap_or(0),
        fdtd: f.fdtd.unwrap_or_default(),
        job,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    Error::Parse {
        line,
        message: e.message().to_string(),
    }
}

/// `a.b.c=value`; the value is read as TOML, or as a bare string if that
/// fails.
fn apply_set(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidInput(format!("--set `{assignment}` is not key=value")))?;
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidInput(format!("--set `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn collect(errs: &mut Vec<String>, section: &str, r: Result<()>) {
    match r {
        Ok(()) => {}
        Err(Error::Validation(v)) => errs.extend(v.into_iter().map(|m| format!("{section}: {m}"))),
        Err(e) => errs.push(format!("{section}: {e}")),
    }
}

fn positive(errs: &mut Vec<String>, section: &str, key: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errs.push(format!("{section}.{key} = {v} must be positive"));
    }
}
