//! Analytic multilayer slab modes from the transfer-matrix dispersion relation.

use std::f64::consts::PI;

use super::{ModeSolution, Polarization};
use crate::error::{Error, Result};
use crate::geometry::{IndexMap2D, LayerStack};

const SCAN_POINTS: usize = 8000;
const SAMPLE_DY_NM: f64 = 5.0;
const MAX_SAMPLES: usize = 40_000;

/// `cos(sqrt(a) t)` continued analytically to `a <= 0`.
fn c_fn(a: f64, t: f64) -> f64 {
    if a > 0.0 {
        (a.sqrt() * t).cos()
    } else if a < 0.0 {
        ((-a).sqrt() * t).cosh()
    } else {
        1.0
    }
}

/// `sin(sqrt(a) t) / sqrt(a)` continued analytically to `a <= 0`.
fn s_fn(a: f64, t: f64) -> f64 {
    if a > 0.0 {
        let k = a.sqrt();
        (k * t).sin() / k
    } else if a < 0.0 {
        let g = (-a).sqrt();
        (g * t).sinh() / g
    } else {
        t
    }
}

struct Problem {
    k0: f64,
    pol: Polarization,
    n_sub: f64,
    n_cover: f64,
    /// Finite layers above the substrate: (index, thickness).
    inner: Vec<(f64, f64)>,
    /// Reference `n^2`; trial modes are parameterized by
    /// `u = n_eff^2 - n_ref^2` so that roots near the top of the spectrum
    /// keep full relative precision.
    n_ref_sq: f64,
    /// Upper bound on the cover's `gamma / weight` over guided trial modes;
    /// scales the residual so it stays well conditioned near cover cutoff.
    q_ref: f64,
}

impl Problem {
    fn new(stack: &LayerStack, wavelength_nm: f64, pol: Polarization) -> Self {
        let layers = stack.layers();
        let inner: Vec<(f64, f64)> = layers[1..]
            .iter()
            .map(|l| (l.material.refractive_index, l.thickness_nm))
            .collect();
        let n_sub = layers[0].material.refractive_index;
        let n_cover = stack.cover().refractive_index;
        let n_ref = inner.iter().map(|l| l.0).fold(n_sub.max(n_cover), f64::max);
        let k0 = 2.0 * PI / wavelength_nm;
        let w_cover = match pol {
            Polarization::TE => 1.0,
            Polarization::TM => n_cover * n_cover,
        };
        let span = (n_ref - n_cover) * (n_ref + n_cover);
        let q_ref = if span > 0.0 { k0 * span.sqrt() } else { k0 } / w_cover;
        Self {
            k0,
            pol,
            n_sub,
            n_cover,
            inner,
            n_ref_sq: n_ref * n_ref,
            q_ref,
        }
    }

    fn n_eff(&self, u: f64) -> f64 {
        (self.n_ref_sq + u).sqrt()
    }

    fn u_of(&self, n_eff: f64) -> f64 {
        (n_eff - self.n_ref_sq.sqrt()) * (n_eff + self.n_ref_sq.sqrt())
    }

    fn weight(&self, n: f64) -> f64 {
        match self.pol {
            Polarization::TE => 1.0,
            Polarization::TM => n * n,
        }
    }

    /// `k0^2 (n^2 - n_eff^2)` evaluated without cancellation against `u`.
    fn a(&self, n: f64, u: f64) -> f64 {
        self.k0 * self.k0 * ((n * n - self.n_ref_sq) - u)
    }

    fn gamma(&self, n: f64, u: f64) -> f64 {
        (-self.a(n, u)).max(0.0).sqrt()
    }

    /// `(psi, q)` at the bottom of the first finite layer, `q = psi' / weight`.
    fn start(&self, u: f64) -> (f64, f64) {
        (1.0, self.gamma(self.n_sub, u) / self.weight(self.n_sub))
    }

    fn step(&self, n: f64, t: f64, u: f64, (psi, q): (f64, f64)) -> (f64, f64) {
        let a = self.a(n, u);
        let p = self.weight(n);
        let (c, s) = (c_fn(a, t), s_fn(a, t));
        (psi * c + p * q * s, -psi * (a / p) * s + q * c)
    }

    fn residual(&self, u: f64) -> f64 {
        let mut v = self.start(u);
        for &(n, t) in &self.inner {
            v = self.step(n, t, u, v);
            let scale = v.0.abs().max(v.1.abs());
            if scale > 1e100 || (scale < 1e-100 && scale > 0.0) {
                v = (v.0 / scale, v.1 / scale);
            }
        }
        let gc = self.gamma(self.n_cover, u) / self.weight(self.n_cover);
        let r = self.q_ref * v.0;
        (gc * v.0 + v.1) / (r * r + v.1 * v.1).sqrt()
    }

    fn field_at(&self, u: f64, y: f64) -> f64 {
        if y < 0.0 {
            return (self.gamma(self.n_sub, u) * y).exp();
        }
        let mut v = self.start(u);
        let mut y0 = 0.0;
        for &(n, t) in &self.inner {
            if y < y0 + t {
                return self.step(n, y - y0, u, v).0;
            }
            v = self.step(n, t, u, v);
            y0 += t;
        }
        v.0 * (-self.gamma(self.n_cover, u) * (y - y0)).exp()
    }
}

/// Normalized dispersion residual of a slab at trial index `n_eff`.
///
/// Zero exactly at guided modes; bounded by `sqrt(2)` in magnitude and free
/// of poles.
pub fn slab_residual(stack: &LayerStack, wavelength_nm: f64, pol: Polarization, n_eff: f64) -> f64 {
    let p = Problem::new(stack, wavelength_nm, pol);
    p.residual(p.u_of(n_eff))
}

/// All guided modes of a layer stack, largest `n_eff` first.
///
/// The bottom layer and the cover are semi-infinite. An empty list means the
/// stack guides nothing.
pub fn solve_slab(stack: &LayerStack, wavelength_nm: f64, pol: Polarization) -> Result<Vec<ModeSolution>> {
    if !(wavelength_nm > 0.0) || !wavelength_nm.is_finite() {
        return Err(Error::InvalidInput(format!("wavelength {wavelength_nm} nm")));
    }
    let prob = Problem::new(stack, wavelength_nm, pol);
    let n_lo = prob.n_sub.max(prob.n_cover);
    let n_hi = prob.inner.iter().map(|l| l.0).fold(n_lo, f64::max);
    if n_hi <= n_lo {
        return Ok(Vec::new());
    }
    // Scan uniformly in n_eff^2, where mode spacing is roughly uniform.
    let u_lo = prob.u_of(n_lo);
    let at = |k: usize| u_lo * (1.0 - k as f64 / SCAN_POINTS as f64);
    let eps = 1e-13 * n_hi * n_hi;
    let mut roots = Vec::new();
    let mut prev_u = u_lo + eps;
    let mut prev_r = prob.residual(prev_u);
    for k in 1..=SCAN_POINTS {
        let u = if k == SCAN_POINTS { -f64::MIN_POSITIVE } else { at(k) };
        let r = prob.residual(u);
        if r == 0.0 {
            roots.push(u);
        } else if prev_r != 0.0 && r.signum() != prev_r.signum() {
            roots.push(bisect(&prob, prev_u, u, prev_r));
        }
        prev_u = u;
        prev_r = r;
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    Ok(roots
        .into_iter()
        .map(|u| sample_mode(&prob, stack, wavelength_nm, u))
        .collect())
}

fn bisect(prob: &Problem, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let fm = prob.residual(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    if prob.residual(a).abs() <= prob.residual(b).abs() {
        a
    } else {
        b
    }
}

fn sample_mode(prob: &Problem, stack: &LayerStack, wavelength_nm: f64, u: f64) -> ModeSolution {
    let n_eff = prob.n_eff(u);
    let height = stack.total_height() - stack.layers()[0].thickness_nm;
    let decay = |n: f64| 1.0 / prob.gamma(n, u).max(1e-12);
    let below = (8.0 * decay(prob.n_sub)).min(20_000.0);
    let above = (8.0 * decay(prob.n_cover)).min(20_000.0);
    let span = below + height + above;
    let dy = SAMPLE_DY_NM.max(span / MAX_SAMPLES as f64);
    let ny = (span / dy).ceil() as usize;
    let y0 = -below + 0.5 * dy;
    let mut field: Vec<f64> = (0..ny).map(|j| prob.field_at(u, y0 + j as f64 * dy)).collect();
    let norm = super::linalg::normalize(&mut field);
    debug_assert!(norm > 0.0);
    let peak = field.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
    if peak < 0.0 {
        field.iter_mut().for_each(|v| *v = -*v);
    }
    // Stack coordinates have the substrate top at y = 0.
    let t0 = stack.layers()[0].thickness_nm;
    let index = IndexMap2D::from_fn(1, ny, 1.0, dy, |_, j| stack.index_at(y0 + j as f64 * dy + t0))
        .expect("stack indices are >= 1");
    ModeSolution {
        n_eff,
        polarization: prob.pol,
        wavelength_nm,
        index,
        origin_nm: (0.0, y0 + t0),
        field,
        residual: prob.residual(u).abs(),
    }
}
