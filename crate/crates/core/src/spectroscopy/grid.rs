use std::collections::BTreeSet;

use super::lines::AtomLineData;
use super::spectra::satabs_features;
use crate::error::{Error, Result};

pub const DEFAULT_HALF_SPAN_HZ: f64 = 6e9;

// Every grid point sits on this lattice, so merged point sets dedupe exactly.
const LATTICE_HZ: f64 = 1e4;
const COARSE_STEP: i64 = 100;
// (half width, step) in lattice units, finest last.
const BANDS: [(i64, i64); 2] = [(3000, 10), (100, 1)];

/// `start, start + step, ...` up to and including `stop` (within step/1e6).
pub fn uniform_grid(start_hz: f64, stop_hz: f64, step_hz: f64) -> Result<Vec<f64>> {
    if !(step_hz > 0.0 && start_hz.is_finite() && stop_hz.is_finite() && stop_hz >= start_hz) {
        return Err(Error::InvalidInput(format!(
            "grid [{start_hz}, {stop_hz}] with step {step_hz} is invalid"
        )));
    }
    let n = ((stop_hz - start_hz) / step_hz + 1e-6).floor() as usize + 1;
    Ok((0..n).map(|k| start_hz + k as f64 * step_hz).collect())
}

/// 1 MHz spacing over `[-half_span, half_span]`, refined to 100 kHz within
/// 30 MHz and 10 kHz within 1 MHz of each center.
pub fn adaptive_grid(half_span_hz: f64, centers_hz: &[f64]) -> Result<Vec<f64>> {
    if !(half_span_hz > 0.0 && half_span_hz.is_finite()) {
        return Err(Error::InvalidInput(format!("grid half span {half_span_hz} Hz must be positive")));
    }
    let h = (half_span_hz / LATTICE_HZ).round() as i64;
    let mut pts: BTreeSet<i64> = (-h..=h).step_by(COARSE_STEP as usize).collect();
    pts.insert(h);
    for &c in centers_hz {
        if !c.is_finite() {
            continue;
        }
        let c = (c / LATTICE_HZ).round() as i64;
        for (half, step) in BANDS {
            let lo = (c - half).max(-h);
            let hi = (c + half).min(h);
            let mut k = lo;
            while k <= hi {
                pts.insert(k);
                k += step;
            }
        }
    }
    Ok(pts.into_iter().map(|k| k as f64 * LATTICE_HZ).collect())
}

/// ±6 GHz, refined around every transition and crossover of `lines`.
pub fn default_grid(lines: &[AtomLineData]) -> Result<Vec<f64>> {
    let centers: Vec<f64> = satabs_features(lines)?.iter().map(|f| f.detuning_hz).collect();
    adaptive_grid(DEFAULT_HALF_SPAN_HZ, &centers)
}
