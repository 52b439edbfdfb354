use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Complex;

use super::fit::{fit_decay, grating_angle_analytic, DecayFit};
use crate::error::{Error, Result};
use crate::fdtd::{near_to_far, run, FarField, FdtdConfig, Line, ModeProfile, MonitorSpec, ModeSource, RunMetadata, Snapshot, Source};
use crate::geometry::{rasterize_grating_section_with, CellRule, GratingSpec, Layer, LayerStack, SectionWindow};
use crate::materials::Material;

/// Side-view layout around the grating.
#[derive(Debug, Clone, PartialEq)]
pub struct GratingOptions {
    /// Material name of the half-space under the stack, drawn inside the
    /// bottom PML; `None` continues the bottom layer.
    pub substrate: Option<String>,
    pub lead_in_nm: f64,
    /// Minimum lead-out; extended when the far-field line would be too short.
    pub lead_out_nm: f64,
    /// Cover medium between the top layer and the top PML.
    pub cover_gap_nm: f64,
    /// Leading periods left out of the decay fit.
    pub skip_periods: usize,
    /// Upward fraction below which no emission is reported.
    pub emission_threshold: f64,
    /// Store a field snapshot at the end of the run.
    pub snapshot: bool,
}

impl Default for GratingOptions {
    fn default() -> Self {
        Self {
            substrate: Some("Si".into()),
            lead_in_nm: 2000.0,
            lead_out_nm: 2000.0,
            cover_gap_nm: 1200.0,
            skip_periods: 2,
            emission_threshold: 1e-3,
            snapshot: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GratingResult {
    /// Far-field peak from the normal, positive along propagation; `None`
    /// when the grating does not radiate measurably upward.
    pub emission_angle_deg: Option<f64>,
    /// Field decay factor, 1/mm.
    pub decay_factor: f64,
    pub decay_fit: DecayFit,
    pub upward_fraction: f64,
    pub downward_fraction: f64,
    pub transmitted_fraction: f64,
    pub reflected_fraction: f64,
    /// Bloch index from the guided field's phase advance per period.
    pub n_eff_extracted: f64,
    pub n_eff_unperturbed: f64,
    /// Grating equation (order 1) at the extracted index.
    pub analytic_angle_deg: Option<f64>,
    pub far_field: FarField,
    /// `(position mm, |E|)` at the core center, one per period.
    pub samples: Vec<(f64, f64)>,
    pub dx_nm: f64,
    pub snapshot: Option<Snapshot>,
    pub meta: RunMetadata,
}

impl GratingResult {
    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "emission_angle_deg = {}", opt(self.emission_angle_deg));
        let _ = writeln!(s, "analytic_angle_deg = {}", opt(self.analytic_angle_deg));
        let _ = writeln!(s, "decay_factor_per_mm = {:.4}", self.decay_factor);
        let _ = writeln!(s, "decay_fit_r_squared = {:.6}", self.decay_fit.r_squared);
        let _ = writeln!(s, "decay_fit_samples = {}", self.decay_fit.n_samples);
        let _ = writeln!(s, "n_eff_extracted = {:.6}", self.n_eff_extracted);
        let _ = writeln!(s, "n_eff_unperturbed = {:.6}", self.n_eff_unperturbed);
        let _ = writeln!(s, "upward_fraction = {:.6}", self.upward_fraction);
        let _ = writeln!(s, "downward_fraction = {:.6}", self.downward_fraction);
        let _ = writeln!(s, "transmitted_fraction = {:.6}", self.transmitted_fraction);
        let _ = writeln!(s, "reflected_fraction = {:.6}", self.reflected_fraction);
        let _ = writeln!(s, "far_field_resolution_deg = {:.4}", self.far_field.resolution_deg);
        let _ = writeln!(s, "dx_nm = {}", self.dx_nm);
        let _ = writeln!(s, "converged = {}", self.meta.converged);
        s
    }

    pub fn samples_csv(&self) -> String {
        let mut s = String::from("position_mm,field_amplitude\n");
        for (z, a) in &self.samples {
            let _ = writeln!(s, "{z},{a:e}");
        }
        s
    }
}

/// Grid spacing no larger than `dx` that fits a whole number of cells in a pitch.
pub fn grating_dx(pitch_nm: f64, dx_nm: f64) -> f64 {
    pitch_nm / (pitch_nm / dx_nm).ceil()
}

pub fn analyze_grating(stack: &LayerStack, grating: &GratingSpec, wavelength_nm: f64, config: &FdtdConfig) -> Result<GratingResult> {
    analyze_grating_with(stack, grating, wavelength_nm, config, &GratingOptions::default())
}

/// The core is the highest-index layer of `stack`; teeth sit on it.
pub fn analyze_grating_with(
    stack: &LayerStack,
    grating: &GratingSpec,
    wavelength_nm: f64,
    config: &FdtdConfig,
    opts: &GratingOptions,
) -> Result<GratingResult> {
    if opts.skip_periods + super::fit::MIN_FIT_SAMPLES > grating.n_periods {
        return Err(Error::InvalidInput(format!(
            "{} periods leave fewer than {} samples after skipping {}",
            grating.n_periods,
            super::fit::MIN_FIT_SAMPLES,
            opts.skip_periods
        )));
    }
    let dx = grating_dx(grating.pitch_nm, config.dx_nm);
    let config = FdtdConfig {
        dx_nm: dx,
        ..config.clone()
    };
    config.validate()?;
    let dy = config.dy_nm;
    let pml = config.pml_thickness_nm;
    let px = config.pml_cells();
    let py = (pml / dy).round() as usize;
    let cpp = (grating.pitch_nm / dx).round() as usize;

    // Stack with the substrate in the bottom PML and the cover gap above.
    let core = stack
        .layers()
        .iter()
        .enumerate()
        .fold(0, |b, (i, l)| if l.material.refractive_index > stack.layers()[b].material.refractive_index { i } else { b });
    let mut layers = Vec::new();
    let bottom = match &opts.substrate {
        Some(name) => Material::lookup(name, wavelength_nm)?,
        None => stack.layers()[0].material.clone(),
    };
    layers.push(Layer::new(bottom, pml));
    layers.extend(stack.layers().iter().cloned());
    let full = LayerStack::new(layers, stack.cover().clone())?;
    let core_layer = core + 1;
    let (core_lo, core_hi) = full.bounds()[core_layer];
    let top_of_stack = full.total_height();

    // Lead-out long enough for a 1 degree far-field line in the cover.
    let n_cover = stack.cover().refractive_index;
    let required = wavelength_nm / (n_cover * 1f64.to_radians());
    let inner = opts.lead_in_nm + grating.length_nm() + opts.lead_out_nm;
    let lead_out = opts.lead_out_nm + (required * 1.02 - inner).max(0.0);
    let window = SectionWindow {
        lead_in_nm: pml + opts.lead_in_nm,
        lead_out_nm: lead_out + pml,
        height_nm: top_of_stack + opts.cover_gap_nm + pml,
    };
    let map = rasterize_grating_section_with(&full, core_layer, grating, dx, dy, &window, CellRule::Averaged)?;
    let (nx, ny) = (map.nx, map.ny);

    let row_of = |y: f64| (y / dy).floor() as usize;
    let g0 = (window.lead_in_nm / dx).round() as usize;
    let g1 = g0 + cpp * grating.n_periods;
    let src_col = px + 10;
    let in_col = src_col + 20;
    let left_col = in_col + 5;
    if left_col + 5 >= g0 || g1 + 10 >= nx - px {
        return Err(Error::Geometry("grating leads too short for the monitors".into()));
    }
    let right_col = g1 + 10;
    let bot_row = py + 5;
    let top_row = ny - py - 5;
    let ff_row = row_of(top_of_stack + wavelength_nm.min(opts.cover_gap_nm - 2.0 * dy));
    if ff_row >= top_row || row_of(top_of_stack) + 1 >= ff_row {
        return Err(Error::Geometry("cover gap too small for the far-field line".into()));
    }
    let core_rows = (row_of(core_lo + 0.5 * dy), row_of(core_hi - 0.5 * dy));
    let mid = row_of(0.5 * (core_lo + core_hi));
    let core_row_pair = if (core_rows.1 - core_rows.0) % 2 == 1 { (mid - 1, mid) } else { (mid, mid) };

    let mode = ModeProfile::discrete(&map, &config, wavelength_nm, src_col, py..ny - py, 0)?;
    let source = Source::Mode(ModeSource {
        mode: mode.clone(),
        wavelength_nm,
        amplitude: 1.0,
    });
    let vline = |i| Line::Vertical { i, j0: bot_row, j1: top_row + 1 };
    let hline = |j| Line::Horizontal { j, i0: left_col, i1: right_col + 1 };
    let monitors = vec![
        MonitorSpec::Mode { id: "input".into(), mode: mode.at_column(in_col) },
        MonitorSpec::Flux { id: "left".into(), line: vline(left_col) },
        MonitorSpec::Flux { id: "right".into(), line: vline(right_col) },
        MonitorSpec::Flux { id: "bottom".into(), line: hline(bot_row) },
        MonitorSpec::Flux { id: "top".into(), line: hline(top_row) },
        MonitorSpec::Field { id: "near".into(), line: Line::Horizontal { j: ff_row, i0: px, i1: nx - px } },
        MonitorSpec::Field { id: "core_a".into(), line: Line::Horizontal { j: core_row_pair.0, i0: g0, i1: g1 } },
        MonitorSpec::Field { id: "core_b".into(), line: Line::Horizontal { j: core_row_pair.1, i0: g0, i1: g1 } },
    ];
    let config_run = FdtdConfig {
        snapshot_every: if opts.snapshot { Some((config.source_ramp + config.run_time).ceil() as usize) } else { None },
        ..config.clone()
    };
    let out = run(&map, &[source], &monitors, &config_run)?;

    let p_in = out.mode("input").expect("monitor").forward_power;
    if !(p_in > 0.0) {
        return Err(Error::Numerical("no guided power reached the grating".into()));
    }
    let flux = |id: &str| out.flux(id).expect("monitor");
    let up = flux("top").max(0.0);
    let down = (-flux("bottom")).max(0.0);
    let trans = flux("right").max(0.0);
    let refl = (p_in - flux("left")).max(0.0);
    let total = up + down + trans + refl;

    let near = out.field("near").expect("monitor");
    let far_field = near_to_far(&near.positions_nm, &near.ez, wavelength_nm, n_cover)?;
    let upward_fraction = up / total;
    let emission_angle_deg = (upward_fraction >= opts.emission_threshold).then_some(far_field.peak_angle_deg);

    // One core-center sample per period at mid-period.
    let (ca, cb) = (out.field("core_a").expect("monitor"), out.field("core_b").expect("monitor"));
    let phasors: Vec<(f64, Complex<f64>)> = (0..grating.n_periods)
        .map(|k| {
            let i = k * cpp + cpp / 2;
            let x_mm = (g0 + i) as f64 * dx * 1e-6;
            (x_mm, 0.5 * (ca.ez[i] + cb.ez[i]))
        })
        .collect();
    let samples: Vec<(f64, f64)> = phasors.iter().map(|(z, e)| (*z, e.norm())).collect();
    let decay_fit = fit_decay(&samples[opts.skip_periods..])?;

    // Phase advance per period, unwrapped, gives the Bloch index.
    let used = &phasors[opts.skip_periods..];
    let mut phase = vec![used[0].1.arg()];
    for w in used.windows(2) {
        let d = (w[1].1 / w[0].1).arg();
        phase.push(phase.last().unwrap() + d);
    }
    let n = phase.len() as f64;
    let km = (n - 1.0) / 2.0;
    let pm = phase.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, p) in phase.iter().enumerate() {
        sxy += (k as f64 - km) * (p - pm);
        sxx += (k as f64 - km).powi(2);
    }
    let per_period = sxy / sxx;
    let k0 = 2.0 * PI / wavelength_nm;
    let g = 2.0 * PI / grating.pitch_nm;
    let beta0 = per_period / grating.pitch_nm;
    let m = ((k0 * mode.n_eff - beta0) / g).round();
    let n_eff_extracted = (beta0 + m * g) / k0;
    let analytic_angle_deg = grating_angle_analytic(n_eff_extracted, grating.pitch_nm, wavelength_nm, 1)?;

    Ok(GratingResult {
        emission_angle_deg,
        decay_factor: decay_fit.decay_per_mm.max(0.0),
        decay_fit,
        upward_fraction,
        downward_fraction: down / total,
        transmitted_fraction: trans / total,
        reflected_fraction: refl / total,
        n_eff_extracted,
        n_eff_unperturbed: mode.n_eff,
        analytic_angle_deg,
        far_field,
        samples,
        dx_nm: dx,
        snapshot: out.snapshots.into_iter().last(),
        meta: out.meta,
    })
}

/// The reference grating stack: 4 um thermal oxide, 200 nm SiN, 1200 nm top
/// oxide, vacuum cover.
pub fn chip_grating(n_periods: usize, wavelength_nm: f64) -> Result<(LayerStack, GratingSpec)> {
    let stack = super::bridge::chip_stack(wavelength_nm)?;
    let g = GratingSpec::new(510.0, 301.0, 100.0, Material::lookup("HfO2", wavelength_nm)?, n_periods)?;
    Ok((stack, g))
}
