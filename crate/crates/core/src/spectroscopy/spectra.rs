use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;

use super::lines::{doppler_fwhm, load_line_data, most_probable_speed, AtomLineData, Isotope, IsotopeSelection};
use super::voigt::{lorentz_peak, voigt};
use super::{check_grid, ColdEnsembleConfig, Spectrum, VaporConfig, REFERENCE_LINE};
use crate::error::{Error, Result};
use crate::modesolver::{evanescent_decay_length, DecayLength, ModeSolution};

/// Absolute frequency of the detuning origin, Hz.
pub fn reference_frequency_hz() -> f64 {
    static F: OnceLock<f64> = OnceLock::new();
    *F.get_or_init(|| {
        load_line_data(IsotopeSelection::Single(Isotope::Rb85))
            .map(|d| d[0].d2_center_hz)
            .expect("bundled line data is valid")
    })
}

/// Detuning of a transition from the reference, Hz.
pub fn transition_detuning(line: &AtomLineData, offset_hz: f64) -> f64 {
    (line.d2_center_hz - reference_frequency_hz()) + offset_hz
}

/// One absorption line ready for evaluation.
struct Line {
    detuning: f64,
    /// Integrated cross-section times population weight, m^2 Hz.
    strength: f64,
    gauss: f64,
    lorentz: f64,
}

/// Lines sharing an isotope and ground level.
struct Group {
    isotope: Isotope,
    ground_f: u32,
    lines: Vec<Line>,
}

struct Widths {
    doppler_scale: f64,
    extra_lorentz: f64,
    shift: f64,
}

fn build_groups(
    lines: &[(&AtomLineData, f64)],
    temperature_k: f64,
    widths: impl Fn(&AtomLineData) -> Widths,
) -> Result<Vec<Group>> {
    let mut out = Vec::new();
    for &(d, weight) in lines {
        let w = widths(d);
        let gauss = doppler_fwhm(d, temperature_k)? * w.doppler_scale;
        for (f, ts) in d.manifolds() {
            out.push(Group {
                isotope: d.isotope,
                ground_f: f,
                lines: ts
                    .iter()
                    .map(|t| Line {
                        detuning: transition_detuning(d, t.offset_hz) + w.shift,
                        strength: weight * d.integrated_cross_section(t),
                        gauss,
                        lorentz: d.natural_linewidth_hz + w.extra_lorentz,
                    })
                    .collect(),
            });
        }
    }
    Ok(out)
}

fn group_cross_section(g: &Group, nu: f64) -> f64 {
    g.lines.iter().map(|l| l.strength * voigt(nu - l.detuning, l.gauss, l.lorentz)).sum()
}

/// `scale * sum_g sigma_g(nu) * factor_g(nu)`, evaluated in parallel.
fn optical_depth(grid: &[f64], groups: &[Group], scale: f64, factor: impl Fn(usize, f64) -> f64 + Sync) -> Vec<f64> {
    grid.par_iter()
        .map(|&nu| {
            let mut s = 0.0;
            for (k, g) in groups.iter().enumerate() {
                s += group_cross_section(g, nu) * factor(k, nu);
            }
            scale * s
        })
        .collect()
}

fn transmission(od: &[f64]) -> Vec<f64> {
    od.iter().map(|&d| (-d).exp().clamp(f64::MIN_POSITIVE, 1.0)).collect()
}

/// Lines in `selection` with abundance weights renormalized over it.
fn select<'a>(lines: &'a [AtomLineData], selection: IsotopeSelection) -> Result<Vec<(&'a AtomLineData, f64)>> {
    let chosen: Vec<&AtomLineData> = lines
        .iter()
        .filter(|d| match selection {
            IsotopeSelection::Natural => true,
            IsotopeSelection::Single(i) => d.isotope == i,
        })
        .collect();
    if chosen.is_empty() {
        return Err(Error::UnknownIsotope(format!("{selection} (not among the loaded lines)")));
    }
    let total: f64 = chosen.iter().map(|d| d.natural_abundance).sum();
    Ok(chosen.into_iter().map(|d| (d, d.natural_abundance / total)).collect())
}

fn vapor_meta(kind: &str, vapor: &VaporConfig, grid: &[f64]) -> Vec<(String, String)> {
    vec![
        ("kind".into(), kind.into()),
        ("vapor.temperature_k".into(), vapor.temperature_k.to_string()),
        ("vapor.pressure_torr".into(), vapor.pressure_torr.to_string()),
        ("vapor.path_length_mm".into(), vapor.path_length_mm.to_string()),
        ("vapor.isotopes".into(), vapor.isotopes.to_string()),
        ("vapor.number_density_m3".into(), vapor.number_density().to_string()),
        ("grid.points".into(), grid.len().to_string()),
    ]
}

fn vapor_od(vapor: &VaporConfig, lines: &[AtomLineData], grid: &[f64]) -> Result<Vec<f64>> {
    vapor.validate()?;
    check_grid(grid)?;
    let sel = select(lines, vapor.isotopes)?;
    let groups = build_groups(&sel, vapor.temperature_k, |_| Widths {
        doppler_scale: 1.0,
        extra_lorentz: 0.0,
        shift: 0.0,
    })?;
    Ok(optical_depth(grid, &groups, vapor.number_density() * vapor.path_length_mm * 1e-3, |_, _| 1.0))
}

/// Thermal vapor, Voigt lines (Doppler and natural widths), Beer-Lambert.
pub fn vapor_absorption_spectrum(vapor: &VaporConfig, lines: &[AtomLineData], grid: &[f64]) -> Result<Spectrum> {
    let od = vapor_od(vapor, lines, grid)?;
    Ok(Spectrum {
        reference: REFERENCE_LINE.into(),
        detuning_hz: grid.to_vec(),
        transmission: transmission(&od),
        metadata: vapor_meta("vapor", vapor, grid),
    })
}

/// Thermal vapor plus a cold ensemble of `cold.isotope` with the given
/// column density. A zero column density leaves the thermal result untouched.
pub fn mot_probe_spectrum(
    vapor: &VaporConfig,
    cold: &ColdEnsembleConfig,
    lines: &[AtomLineData],
    grid: &[f64],
) -> Result<Spectrum> {
    cold.validate()?;
    let mut od = vapor_od(vapor, lines, grid)?;
    let sel = select(lines, IsotopeSelection::Single(cold.isotope))?;
    if cold.column_density_per_m2 > 0.0 {
        let groups = build_groups(&[(sel[0].0, 1.0)], cold.temperature_k, |_| Widths {
            doppler_scale: 1.0,
            extra_lorentz: 0.0,
            shift: cold.center_detuning_hz,
        })?;
        let cold_od = optical_depth(grid, &groups, cold.column_density_per_m2, |_, _| 1.0);
        od.iter_mut().zip(&cold_od).for_each(|(a, b)| *a += b);
    }
    let mut metadata = vapor_meta("mot_probe", vapor, grid);
    metadata.extend([
        ("cold.temperature_k".into(), cold.temperature_k.to_string()),
        ("cold.column_density_per_m2".into(), cold.column_density_per_m2.to_string()),
        ("cold.center_detuning_hz".into(), cold.center_detuning_hz.to_string()),
        ("cold.isotope".into(), cold.isotope.to_string()),
    ]);
    Ok(Spectrum {
        reference: REFERENCE_LINE.into(),
        detuning_hz: grid.to_vec(),
        transmission: transmission(&od),
        metadata,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Lamb { f_prime: u32 },
    Crossover { f_prime_a: u32, f_prime_b: u32 },
}

/// A saturated-absorption dip.
#[derive(Debug, Clone, PartialEq)]
pub struct SatabsFeature {
    pub isotope: Isotope,
    pub ground_f: u32,
    pub kind: FeatureKind,
    pub detuning_hz: f64,
    /// Relative hole depth: the strength factor for a Lamb dip, the
    /// geometric mean of the two for a crossover.
    pub weight: f64,
}

/// Lamb dips at every transition and crossovers at the midpoint of every
/// pair sharing a ground level, grouped by isotope and ground level.
pub fn satabs_features(lines: &[AtomLineData]) -> Result<Vec<SatabsFeature>> {
    let mut out = Vec::new();
    for d in lines {
        for (f, ts) in d.manifolds() {
            for t in &ts {
                out.push(SatabsFeature {
                    isotope: d.isotope,
                    ground_f: f,
                    kind: FeatureKind::Lamb { f_prime: t.f_prime },
                    detuning_hz: transition_detuning(d, t.offset_hz),
                    weight: t.strength,
                });
            }
            for (i, a) in ts.iter().enumerate() {
                for b in &ts[i + 1..] {
                    out.push(SatabsFeature {
                        isotope: d.isotope,
                        ground_f: f,
                        kind: FeatureKind::Crossover {
                            f_prime_a: a.f_prime,
                            f_prime_b: b.f_prime,
                        },
                        detuning_hz: transition_detuning(d, 0.5 * (a.offset_hz + b.offset_hz)),
                        weight: (a.strength * b.strength).sqrt(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Pumped vapor: each Doppler group's optical depth is reduced by
/// `s/(1+s) * sum_k w_k L_k(nu)` (floored at zero), with `L_k` peak-normalized
/// Lorentzians of FWHM `Gamma sqrt(1+s)` at the group's [`satabs_features`].
pub fn satabs_spectrum(
    vapor: &VaporConfig,
    lines: &[AtomLineData],
    pump_saturation: f64,
    grid: &[f64],
) -> Result<Spectrum> {
    if !(pump_saturation >= 0.0 && pump_saturation.is_finite()) {
        return Err(Error::InvalidInput(format!("pump saturation {pump_saturation} must be non-negative")));
    }
    vapor.validate()?;
    check_grid(grid)?;
    let sel = select(lines, vapor.isotopes)?;
    let groups = build_groups(&sel, vapor.temperature_k, |_| Widths {
        doppler_scale: 1.0,
        extra_lorentz: 0.0,
        shift: 0.0,
    })?;
    let selected: Vec<AtomLineData> = sel.iter().map(|(d, _)| (*d).clone()).collect();
    let features = satabs_features(&selected)?;
    let r = pump_saturation / (1.0 + pump_saturation);
    let dips: Vec<Vec<(f64, f64, f64)>> = groups
        .iter()
        .map(|g| {
            let gamma = sel.iter().find(|(d, _)| d.isotope == g.isotope).map_or(0.0, |(d, _)| d.natural_linewidth_hz);
            let width = gamma * (1.0 + pump_saturation).sqrt();
            features
                .iter()
                .filter(|f| f.isotope == g.isotope && f.ground_f == g.ground_f)
                .map(|f| (f.detuning_hz, f.weight, width))
                .collect()
        })
        .collect();
    let od = optical_depth(grid, &groups, vapor.number_density() * vapor.path_length_mm * 1e-3, |k, nu| {
        let hole: f64 = dips[k].iter().map(|&(c, w, fw)| w * lorentz_peak(nu - c, fw)).sum();
        (1.0 - r * hole).max(0.0)
    });
    let mut metadata = vapor_meta("satabs", vapor, grid);
    metadata.push(("pump_saturation".into(), pump_saturation.to_string()));
    metadata.push(("satabs.features".into(), features.len().to_string()));
    Ok(Spectrum {
        reference: REFERENCE_LINE.into(),
        detuning_hz: grid.to_vec(),
        transmission: transmission(&od),
        metadata,
    })
}

/// Guided-mode parameters that set the evanescent interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvanescentProbe {
    pub n_eff: f64,
    pub decay_length: DecayLength,
    /// Fraction of the mode power in vacuum.
    pub vacuum_fraction: f64,
    pub interaction_length_mm: f64,
}

impl EvanescentProbe {
    pub fn from_mode(mode: &ModeSolution, interaction_length_mm: f64) -> Result<Self> {
        Ok(Self {
            n_eff: mode.n_eff,
            decay_length: evanescent_decay_length(mode)?,
            vacuum_fraction: mode.vacuum_fraction(),
            interaction_length_mm,
        })
    }

    fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.n_eff >= 1.0 && self.n_eff.is_finite()) {
            errs.push(format!("probe n_eff {} must be at least 1", self.n_eff));
        }
        if !(0.0..=1.0).contains(&self.vacuum_fraction) {
            errs.push(format!("vacuum fraction {} must lie in [0, 1]", self.vacuum_fraction));
        }
        if !(self.interaction_length_mm >= 0.0 && self.interaction_length_mm.is_finite()) {
            errs.push(format!("interaction length {} mm must be non-negative", self.interaction_length_mm));
        }
        if let DecayLength::Finite(d) = self.decay_length {
            if !(d > 0.0) {
                errs.push(format!("decay length {d} nm must be positive"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

/// Transit-time FWHM `v_mp / (2 pi d)`, Hz; zero for an unbounded tail.
pub fn transit_width(line: &AtomLineData, temperature_k: f64, decay_length: DecayLength) -> f64 {
    match decay_length {
        DecayLength::Finite(d_nm) => most_probable_speed(line, temperature_k) / (2.0 * PI * d_nm * 1e-9),
        DecayLength::Unbounded => 0.0,
    }
}

/// Vapor probed by a guided mode over `interaction_length_mm`.
pub fn evanescent_spectrum(
    mode: &ModeSolution,
    vapor: &VaporConfig,
    lines: &[AtomLineData],
    grid: &[f64],
    interaction_length_mm: f64,
) -> Result<Spectrum> {
    let probe = EvanescentProbe::from_mode(mode, interaction_length_mm)?;
    evanescent_spectrum_with(&probe, vapor, lines, grid)
}

/// Doppler widths scaled by `n_eff`, Lorentz widths increased by the
/// transit term, optical depth `alpha * vacuum_fraction * interaction_length`.
/// The vapor path length is not used.
pub fn evanescent_spectrum_with(
    probe: &EvanescentProbe,
    vapor: &VaporConfig,
    lines: &[AtomLineData],
    grid: &[f64],
) -> Result<Spectrum> {
    probe.validate()?;
    vapor.validate()?;
    check_grid(grid)?;
    let sel = select(lines, vapor.isotopes)?;
    let groups = build_groups(&sel, vapor.temperature_k, |d| Widths {
        doppler_scale: probe.n_eff,
        extra_lorentz: transit_width(d, vapor.temperature_k, probe.decay_length),
        shift: 0.0,
    })?;
    let scale = vapor.number_density() * probe.vacuum_fraction * probe.interaction_length_mm * 1e-3;
    let od = optical_depth(grid, &groups, scale, |_, _| 1.0);
    let mut metadata = vapor_meta("evanescent", vapor, grid);
    metadata.extend([
        ("probe.n_eff".into(), probe.n_eff.to_string()),
        (
            "probe.decay_length_nm".into(),
            probe.decay_length.finite().map_or("unbounded".into(), |d| d.to_string()),
        ),
        ("probe.vacuum_fraction".into(), probe.vacuum_fraction.to_string()),
        ("probe.interaction_length_mm".into(), probe.interaction_length_mm.to_string()),
    ]);
    if let Some((d, _)) = sel.first() {
        metadata.push((
            "probe.transit_width_hz".into(),
            transit_width(d, vapor.temperature_k, probe.decay_length).to_string(),
        ));
    }
    Ok(Spectrum {
        reference: REFERENCE_LINE.into(),
        detuning_hz: grid.to_vec(),
        transmission: transmission(&od),
        metadata,
    })
}
