use nalgebra::Complex;

use super::source::ModeProfile;

type C64 = Complex<f64>;

/// A grid line of `Ez` nodes. Ranges are half-open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Line {
    /// Column `i`, rows `j0..j1`; flux counted along +x.
    Vertical { i: usize, j0: usize, j1: usize },
    /// Row `j`, columns `i0..i1`; flux counted along +y.
    Horizontal { j: usize, i0: usize, i1: usize },
}

impl Line {
    pub fn len(&self) -> usize {
        match *self {
            Line::Vertical { j0, j1, .. } => j1.saturating_sub(j0),
            Line::Horizontal { i0, i1, .. } => i1.saturating_sub(i0),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid nodes along the line.
    pub(crate) fn nodes(&self) -> Vec<(usize, usize)> {
        match *self {
            Line::Vertical { i, j0, j1 } => (j0..j1).map(|j| (i, j)).collect(),
            Line::Horizontal { j, i0, i1 } => (i0..i1).map(|i| (i, j)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MonitorSpec {
    /// Time-averaged Poynting flux through a line.
    Flux { id: String, line: Line },
    /// Forward and backward amplitudes of one guided mode.
    Mode { id: String, mode: ModeProfile },
    /// Complex `Ez` and tangential `H` along a line (for far-field work).
    Field { id: String, line: Line },
}

impl MonitorSpec {
    pub fn id(&self) -> &str {
        match self {
            MonitorSpec::Flux { id, .. } | MonitorSpec::Mode { id, .. } | MonitorSpec::Field { id, .. } => id,
        }
    }

    pub(crate) fn line(&self) -> Line {
        match self {
            MonitorSpec::Flux { line, .. } | MonitorSpec::Field { line, .. } => line.clone(),
            MonitorSpec::Mode { mode, .. } => Line::Vertical {
                i: mode.column,
                j0: mode.j0,
                j1: mode.j0 + mode.profile.len(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxRecord {
    pub id: String,
    pub line: Line,
    /// Carrier first, then the extra wavelengths.
    pub wavelengths_nm: Vec<f64>,
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRecord {
    pub id: String,
    pub column: usize,
    pub forward: C64,
    pub backward: C64,
    pub forward_power: f64,
    pub backward_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldLineRecord {
    pub id: String,
    pub line: Line,
    /// Node positions along the line, nm from the domain origin.
    pub positions_nm: Vec<f64>,
    pub ez: Vec<C64>,
    /// `Hy` on vertical lines, `Hx` on horizontal ones.
    pub h: Vec<C64>,
}

/// Time-averaged flux from phasors on a line of spacing `d`.
pub(crate) fn flux(line: &Line, ez: &[C64], h: &[C64], d: f64) -> f64 {
    let sign = match line {
        Line::Vertical { .. } => -1.0,
        Line::Horizontal { .. } => 1.0,
    };
    sign * 0.5 * d * ez.iter().zip(h).map(|(e, h)| (e * h.conj()).re).sum::<f64>()
}

/// Forward and backward modal amplitudes and powers.
pub(crate) fn modal(mode: &ModeProfile, ez: &[C64], hy: &[C64], dy: f64) -> (C64, C64, f64, f64) {
    let ep: C64 = mode.profile.iter().zip(ez).map(|(u, e)| e * *u).sum();
    let hp: C64 = mode.profile.iter().zip(hy).map(|(u, h)| h * *u).sum();
    let y = mode.admittance;
    let fwd = 0.5 * (ep - hp / y);
    let bwd = 0.5 * (ep + hp / y);
    (fwd, bwd, 0.5 * y * fwd.norm_sqr() * dy, 0.5 * y * bwd.norm_sqr() * dy)
}
