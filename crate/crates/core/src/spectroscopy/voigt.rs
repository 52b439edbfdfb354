use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::Complex;

type C64 = Complex<f64>;

const N: usize = 32;

/// Weideman's rational-series coefficients, highest degree first.
fn coefficients() -> &'static (f64, [f64; N]) {
    static C: OnceLock<(f64, [f64; N])> = OnceLock::new();
    C.get_or_init(|| {
        let m = 2 * N;
        let l = (N as f64 / 2f64.sqrt()).sqrt();
        // f_k for k = -M..M-1 (f_{-M} = 0), even in k.
        let f = |k: i64| -> f64 {
            if k == -(m as i64) {
                return 0.0;
            }
            let t = l * (k as f64 * PI / m as f64 / 2.0).tan();
            (-t * t).exp() * (l * l + t * t)
        };
        let mut a = [0.0; N];
        for (n, slot) in (1..=N).zip(a.iter_mut().rev()) {
            let mut s = 0.0;
            for k in -(m as i64)..(m as i64) {
                s += f(k) * (PI * n as f64 * k as f64 / m as f64).cos();
            }
            *slot = s / (2 * m) as f64;
        }
        (l, a)
    })
}

/// Faddeeva function `w(z) = exp(-z^2) erfc(-iz)` for `Im z >= 0`.
pub fn faddeeva(z: C64) -> C64 {
    debug_assert!(z.im >= 0.0);
    let (l, a) = coefficients();
    let i = C64::i();
    let lz = C64::new(*l, 0.0) - i * z;
    let zz = (C64::new(*l, 0.0) + i * z) / lz;
    let mut p = C64::new(0.0, 0.0);
    for c in a {
        p = p * zz + c;
    }
    2.0 * p / (lz * lz) + 1.0 / (PI.sqrt() * lz)
}

/// Area-normalized Voigt profile at offset `x` (Hz) for a Gaussian of FWHM
/// `gauss_fwhm` and a Lorentzian of FWHM `lorentz_fwhm`.
pub fn voigt(x: f64, gauss_fwhm: f64, lorentz_fwhm: f64) -> f64 {
    let gamma = 0.5 * lorentz_fwhm;
    if gauss_fwhm <= 0.0 {
        return gamma / (PI * (x * x + gamma * gamma));
    }
    let sigma = gauss_fwhm / (8.0 * 2f64.ln()).sqrt();
    let s2 = sigma * 2f64.sqrt();
    faddeeva(C64::new(x / s2, gamma / s2)).re / (sigma * (2.0 * PI).sqrt())
}

/// Lorentzian normalized to 1 at its center.
pub fn lorentz_peak(x: f64, fwhm: f64) -> f64 {
    let h = 0.5 * fwhm;
    h * h / (x * x + h * h)
}
