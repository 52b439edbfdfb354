use crate::error::{Error, Result};

/// Least-squares fit of `ln(amplitude) = a - decay * z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Field decay factor, 1/mm.
    pub decay_per_mm: f64,
    /// `ln` of the amplitude extrapolated to `z = 0`.
    pub intercept: f64,
    pub r_squared: f64,
    pub n_samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 5;

/// Fits `(position mm, field amplitude)` samples. A perfectly flat set has
/// `R^2 = 1`.
pub fn fit_decay(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "need at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if let Some((z, a)) = samples.iter().find(|(z, a)| !(*a > 0.0) || !a.is_finite() || !z.is_finite()) {
        return Err(Error::Fit(format!("non-positive or non-finite sample ({z}, {a})")));
    }
    let n = samples.len() as f64;
    let zm = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let ym = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let (mut szz, mut szy, mut syy) = (0.0, 0.0, 0.0);
    for &(z, a) in samples {
        let (dz, dy) = (z - zm, a.ln() - ym);
        szz += dz * dz;
        szy += dz * dy;
        syy += dy * dy;
    }
    if !(szz > 0.0) || szz <= 1e-24 * samples.iter().map(|s| s.0 * s.0).sum::<f64>() {
        return Err(Error::Fit("all sample positions coincide".into()));
    }
    let slope = szy / szz;
    let ss_res = (syy - slope * szy).max(0.0);
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(DecayFit {
        decay_per_mm: -slope,
        intercept: ym - slope * zm,
        r_squared,
        n_samples: samples.len(),
    })
}

/// Emission angle in degrees from `sin(theta) = n_eff - order * wavelength / pitch`.
/// `Ok(None)` when that order does not radiate.
pub fn grating_angle_analytic(n_eff: f64, pitch_nm: f64, wavelength_nm: f64, order: i32) -> Result<Option<f64>> {
    if order == 0 {
        return Err(Error::InvalidInput("grating order must be nonzero".into()));
    }
    if !(pitch_nm > 0.0 && wavelength_nm > 0.0 && n_eff.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "invalid grating inputs n_eff={n_eff}, pitch={pitch_nm}, wavelength={wavelength_nm}"
        )));
    }
    let s = n_eff - order as f64 * wavelength_nm / pitch_nm;
    if s.abs() > 1.0 {
        return Ok(None);
    }
    Ok(Some(s.asin().to_degrees()))
}
