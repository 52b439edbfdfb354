use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const K_B: f64 = 1.380_649e-23;
pub const C_LIGHT: f64 = 299_792_458.0;
pub const AMU: f64 = 1.660_539_066_60e-27;
pub const PA_PER_TORR: f64 = 101_325.0 / 760.0;

const BUNDLED: &str = include_str!("../../data/rb_d2.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Isotope {
    Rb85,
    Rb87,
}

impl fmt::Display for Isotope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Isotope::Rb85 => "Rb85",
            Isotope::Rb87 => "Rb87",
        })
    }
}

impl FromStr for Isotope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Rb85" | "rb85" | "85Rb" => Ok(Isotope::Rb85),
            "Rb87" | "rb87" | "87Rb" => Ok(Isotope::Rb87),
            _ => Err(Error::UnknownIsotope(s.to_string())),
        }
    }
}

/// Which isotopes a vapor contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsotopeSelection {
    #[default]
    Natural,
    Single(Isotope),
}

impl fmt::Display for IsotopeSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IsotopeSelection::Natural => f.write_str("natural"),
            IsotopeSelection::Single(i) => write!(f, "{i}"),
        }
    }
}

impl FromStr for IsotopeSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "natural" {
            Ok(IsotopeSelection::Natural)
        } else {
            Ok(IsotopeSelection::Single(s.parse()?))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub f: u32,
    pub f_prime: u32,
    /// Hyperfine strength factor; those of one ground level sum to 1.
    pub strength: f64,
    /// From the isotope's hyperfine-free line center, Hz.
    pub offset_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomLineData {
    pub isotope: Isotope,
    pub natural_abundance: f64,
    /// Fraction within the loaded selection.
    pub abundance: f64,
    pub atomic_mass_kg: f64,
    pub nuclear_spin: f64,
    pub d2_center_hz: f64,
    pub ground: Vec<(u32, f64)>,
    pub excited: Vec<(u32, f64)>,
    pub transitions: Vec<Transition>,
    /// Natural FWHM, Hz.
    pub natural_linewidth_hz: f64,
}

impl AtomLineData {
    /// Thermal-equilibrium fraction of atoms in ground level `f`.
    pub fn ground_fraction(&self, f: u32) -> f64 {
        (2.0 * f as f64 + 1.0) / (2.0 * (2.0 * self.nuclear_spin + 1.0))
    }

    pub fn ground_splitting_hz(&self) -> f64 {
        let lo = self.ground.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        let hi = self.ground.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    pub fn wavelength_m(&self) -> f64 {
        C_LIGHT / self.d2_center_hz
    }

    /// Line-integrated absorption cross-section of a transition for
    /// unpolarized atoms, `m^2 Hz`, including the ground-level fraction:
    /// `lambda^2/(8 pi) (2J'+1)/(2J+1) Gamma p_F S_FF'`.
    pub fn integrated_cross_section(&self, t: &Transition) -> f64 {
        let lam = self.wavelength_m();
        let gamma = 2.0 * std::f64::consts::PI * self.natural_linewidth_hz;
        lam * lam / (8.0 * std::f64::consts::PI) * 2.0 * gamma * self.ground_fraction(t.f) * t.strength
    }

    /// Ground levels with their transitions.
    pub fn manifolds(&self) -> Vec<(u32, Vec<&Transition>)> {
        self.ground
            .iter()
            .map(|&(f, _)| (f, self.transitions.iter().filter(|t| t.f == f).collect()))
            .collect()
    }
}

/// Loads the bundled D2 data for the selected isotopes; abundances are
/// renormalized over the selection.
pub fn load_line_data(selection: IsotopeSelection) -> Result<Vec<AtomLineData>> {
    let all = parse_line_data(BUNDLED)?;
    let mut out: Vec<AtomLineData> = match selection {
        IsotopeSelection::Natural => all,
        IsotopeSelection::Single(i) => all.into_iter().filter(|d| d.isotope == i).collect(),
    };
    if out.is_empty() {
        return Err(Error::UnknownIsotope(selection.to_string()));
    }
    let total: f64 = out.iter().map(|d| d.natural_abundance).sum();
    for d in &mut out {
        d.abundance = d.natural_abundance / total;
    }
    Ok(out)
}

/// Parses a line-data table in the bundled format.
pub fn parse_line_data(text: &str) -> Result<Vec<AtomLineData>> {
    let mut out: Vec<AtomLineData> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |m: String| Error::Parse { line: n + 1, message: m };
        let f: Vec<&str> = line.split_whitespace().collect();
        let num = |k: usize| -> Result<f64> {
            f.get(k)
                .ok_or_else(|| perr(format!("missing field {k}")))?
                .parse::<f64>()
                .map_err(|e| perr(format!("field {k}: {e}")))
        };
        let int = |k: usize| -> Result<u32> {
            f.get(k)
                .ok_or_else(|| perr(format!("missing field {k}")))?
                .parse::<u32>()
                .map_err(|e| perr(format!("field {k}: {e}")))
        };
        let iso: Isotope = f.get(1).ok_or_else(|| perr("missing isotope".into()))?.parse()?;
        if f[0] == "isotope" {
            out.push(AtomLineData {
                isotope: iso,
                atomic_mass_kg: num(2)? * AMU,
                natural_abundance: num(3)?,
                abundance: num(3)?,
                nuclear_spin: num(4)?,
                d2_center_hz: num(5)?,
                natural_linewidth_hz: num(6)?,
                ground: Vec::new(),
                excited: Vec::new(),
                transitions: Vec::new(),
            });
            continue;
        }
        let Some(d) = out.iter_mut().find(|d| d.isotope == iso) else {
            return Err(perr(format!("{iso} used before its isotope record")));
        };
        match f[0] {
            "ground" => d.ground.push((int(2)?, num(3)?)),
            "excited" => d.excited.push((int(2)?, num(3)?)),
            "transition" => d.transitions.push(Transition {
                f: int(2)?,
                f_prime: int(3)?,
                offset_hz: num(4)?,
                strength: num(5)?,
            }),
            other => return Err(perr(format!("unknown record `{other}`"))),
        }
    }
    for d in &out {
        check(d)?;
    }
    Ok(out)
}

fn check(d: &AtomLineData) -> Result<()> {
    let bad = |m: String| Error::InvalidInput(format!("{} line data: {m}", d.isotope));
    for t in &d.transitions {
        if t.f.abs_diff(t.f_prime) > 1 {
            return Err(bad(format!("F={} -> F'={} violates |F - F'| <= 1", t.f, t.f_prime)));
        }
        if !(t.strength >= 0.0) {
            return Err(bad(format!("negative strength for F={} -> F'={}", t.f, t.f_prime)));
        }
        let g = d.ground.iter().find(|g| g.0 == t.f).ok_or_else(|| bad(format!("no ground level F={}", t.f)))?;
        let e = d
            .excited
            .iter()
            .find(|e| e.0 == t.f_prime)
            .ok_or_else(|| bad(format!("no excited level F'={}", t.f_prime)))?;
        if (e.1 - g.1 - t.offset_hz).abs() > 1.0 {
            return Err(bad(format!("offset of F={} -> F'={} disagrees with its levels", t.f, t.f_prime)));
        }
    }
    for (f, ts) in d.manifolds() {
        let s: f64 = ts.iter().map(|t| t.strength).sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(bad(format!("strengths from F={f} sum to {s}, not 1")));
        }
    }
    Ok(())
}

/// `f0 sqrt(8 ln2 k_B T / (m c^2))`, Hz.
pub fn doppler_fwhm(line: &AtomLineData, temperature_k: f64) -> Result<f64> {
    if !(temperature_k > 0.0) {
        return Err(Error::InvalidInput(format!("temperature {temperature_k} K must be positive")));
    }
    Ok(line.d2_center_hz
        * (8.0 * 2f64.ln() * K_B * temperature_k / (line.atomic_mass_kg * C_LIGHT * C_LIGHT)).sqrt())
}

/// Most probable thermal speed `sqrt(2 k_B T / m)`, m/s.
pub fn most_probable_speed(line: &AtomLineData, temperature_k: f64) -> f64 {
    (2.0 * K_B * temperature_k / line.atomic_mass_kg).sqrt()
}
