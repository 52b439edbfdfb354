use std::f64::consts::PI;

use picatom::geometry::LayerStack;
use picatom::modesolver::{decay_length, solve_slab, DecayLength, Polarization};
use picatom::spectroscopy::*;
use picatom::Error;
use proptest::prelude::*;

fn natural() -> Vec<AtomLineData> {
    load_line_data(IsotopeSelection::Natural).unwrap()
}

fn rb(iso: Isotope) -> AtomLineData {
    load_line_data(IsotopeSelection::Single(iso)).unwrap().remove(0)
}

fn gauss(x: f64, fwhm: f64) -> f64 {
    let s = fwhm / (8.0 * 2f64.ln()).sqrt();
    (-(x * x) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
}

fn lorentz(x: f64, fwhm: f64) -> f64 {
    let h = fwhm / 2.0;
    h / (PI * (x * x + h * h))
}

/// Gaussian convolved with a Lorentzian by Simpson's rule over the
/// Gaussian's support.
fn convolved(x: f64, g: f64, l: f64) -> f64 {
    let half = 14.0 * g;
    let n = 40_000;
    let h = 2.0 * half / n as f64;
    let f = |t: f64| gauss(t, g) * lorentz(x - t, l);
    let mut s = f(-half) + f(half);
    for k in 1..n {
        s += f(-half + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn bundled_line_data() {
    let lines = natural();
    assert_eq!(lines.len(), 2);
    let sum: f64 = lines.iter().map(|d| d.abundance).sum();
    assert!((sum - 1.0).abs() < 1e-9);
    let r85 = rb(Isotope::Rb85);
    let r87 = rb(Isotope::Rb87);
    assert!((r85.ground_splitting_hz() - 3.035_732_439e9).abs() < 1e3);
    assert!((r87.ground_splitting_hz() - 6.834_682_610_904e9).abs() < 1e3);
    assert!((r85.abundance - 1.0).abs() < 1e-15);
    assert!((lines[0].abundance - 0.7217).abs() < 1e-3 && (lines[1].abundance - 0.2783).abs() < 1e-3);
    for d in &lines {
        assert_eq!(d.transitions.len(), 6);
        for t in &d.transitions {
            assert!(t.f.abs_diff(t.f_prime) <= 1);
            assert!(t.strength >= 0.0);
        }
    }
    assert!(matches!("Rb86".parse::<Isotope>(), Err(Error::UnknownIsotope(_))));
    assert!("natural".parse::<IsotopeSelection>().is_ok());
}

#[test]
fn malformed_line_data_is_rejected() {
    let head = "isotope Rb85 84.9 1.0 2.5 384230406373000 6066600\nground Rb85 2 0\nground Rb85 3 100\n";
    let bad_rule = format!("{head}excited Rb85 4 50\ntransition Rb85 2 4 50 1\n");
    assert!(parse_line_data(&bad_rule).is_err());
    let bad_sum = format!("{head}excited Rb85 3 50\ntransition Rb85 2 3 50 0.5\n");
    assert!(parse_line_data(&bad_sum).is_err());
    let bad_offset = format!("{head}excited Rb85 3 50\ntransition Rb85 2 3 70 1\n");
    assert!(parse_line_data(&bad_offset).is_err());
    assert!(matches!(parse_line_data("bogus Rb85 1\n"), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn doppler_width() {
    let d = rb(Isotope::Rb85);
    // Hand evaluation: m = 84.9118 u, f0 = 384.2304 THz, T = 300 K.
    let hand = 384.2304e12 * (8.0 * 0.693_147 * 1.380_649e-23 * 300.0 / (84.9118 * 1.660_539e-27 * 2.997_925e8f64.powi(2))).sqrt();
    let w = doppler_fwhm(&d, 300.0).unwrap();
    assert!((w / hand - 1.0).abs() < 5e-3, "{w} vs {hand}");
    assert!((w - 0.5173e9).abs() < 1e6);
    let w4 = doppler_fwhm(&d, 1200.0).unwrap();
    assert!((w4 / w - 2.0).abs() < 1e-12);
    let mut prev = f64::INFINITY;
    for t in [10.0, 1.0, 1e-2, 1e-4, 1e-6, 1e-10] {
        let v = doppler_fwhm(&d, t).unwrap();
        assert!(v < prev);
        prev = v;
    }
    assert!(prev < 1e4);
    assert!(doppler_fwhm(&d, 0.0).is_err());
}

#[test]
fn voigt_limits() {
    let g = 500e6;
    let peak_g = gauss(0.0, g);
    let mut worst: f64 = 0.0;
    for k in -400..=400 {
        let x = k as f64 * 5e6;
        worst = worst.max((voigt(x, g, 1e-9 * g) - gauss(x, g)).abs());
    }
    assert!(worst < 1e-6 * peak_g, "gaussian limit {}", worst / peak_g);

    let l = 6e6;
    let peak_l = lorentz(0.0, l);
    let mut worst: f64 = 0.0;
    for k in -400..=400 {
        let x = k as f64 * 0.1e6;
        worst = worst.max((voigt(x, 1e-9 * l, l) - lorentz(x, l)).abs());
        assert_eq!(voigt(x, 0.0, l), lorentz(x, l));
    }
    assert!(worst < 1e-6 * peak_l, "lorentzian limit {}", worst / peak_l);
}

#[test]
fn voigt_matches_numerical_convolution() {
    for (g, l) in [(500e6, 6e6), (10e6, 6e6), (1e6, 6e6), (6e6, 300e6)] {
        let peak = voigt(0.0, g, l);
        let mut worst: f64 = 0.0;
        for k in -60..=60 {
            let x = k as f64 * (g + l) / 20.0;
            worst = worst.max((voigt(x, g, l) - convolved(x, g, l)).abs());
        }
        assert!(worst < 1e-6 * peak, "g={g} l={l}: {}", worst / peak);
    }
}

#[test]
fn vapor_trivial_limits() {
    let lines = natural();
    let grid = uniform_grid(-6e9, 6e9, 5e6).unwrap();
    let empty = VaporConfig { pressure_torr: 0.0, ..Default::default() };
    let s = vapor_absorption_spectrum(&empty, &lines, &grid).unwrap();
    assert!(s.transmission.iter().all(|&t| t == 1.0));

    let v = VaporConfig::default();
    let a = vapor_absorption_spectrum(&v, &lines, &grid).unwrap();
    let b = vapor_absorption_spectrum(&VaporConfig { path_length_mm: 36.0, ..v.clone() }, &lines, &grid).unwrap();
    for (x, y) in a.transmission.iter().zip(&b.transmission) {
        assert!((x * x - y).abs() <= 1e-12 * y);
    }
    assert!(a.transmission.iter().all(|&t| t > 0.0 && t <= 1.0));
    assert!(vapor_absorption_spectrum(&v, &lines, &[1.0, 1.0]).is_err());
    assert!(vapor_absorption_spectrum(&VaporConfig { temperature_k: -1.0, ..v }, &lines, &grid).is_err());
}

/// Local minima of the transmission with their depth, deepest first.
fn minima(s: &Spectrum) -> Vec<(f64, f64)> {
    let t = &s.transmission;
    let mut out: Vec<(f64, f64)> = (1..t.len() - 1)
        .filter(|&k| t[k] < t[k - 1] && t[k] <= t[k + 1])
        .map(|k| (s.detuning_hz[k], t[k]))
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out
}

#[test]
fn natural_vapor_shows_two_isotopes() {
    let lines = natural();
    let grid = default_grid(&lines).unwrap();
    let s = vapor_absorption_spectrum(&VaporConfig::default(), &lines, &grid).unwrap();
    // Absorption near each isotope's strongest transition.
    for (iso, f, fp) in [(Isotope::Rb85, 3, 4), (Isotope::Rb87, 2, 3)] {
        let d = lines.iter().find(|d| d.isotope == iso).unwrap();
        let t = d.transitions.iter().find(|t| t.f == f && t.f_prime == fp).unwrap();
        let x = transition_detuning(d, t.offset_hz);
        assert!(s.transmission_at(x) < 0.999, "{iso} shows no absorption");
    }
    let m = minima(&s);
    assert!(m.len() >= 4, "{m:?}");
    let gap = (m[0].0 - m[1].0).abs();
    assert!(gap > 1e9 && gap < 8e9, "gap {gap}");
    assert!(s.to_csv().starts_with("# schema_version = 1\n"));
    assert_eq!(s.meta("kind"), Some("vapor"));
}

#[test]
fn mot_probe() {
    let lines = natural();
    let grid = default_grid(&lines).unwrap();
    let vapor = VaporConfig::default();
    let thermal = vapor_absorption_spectrum(&vapor, &lines, &grid).unwrap();
    let off = ColdEnsembleConfig { column_density_per_m2: 0.0, ..Default::default() };
    let s0 = mot_probe_spectrum(&vapor, &off, &lines, &grid).unwrap();
    assert_eq!(s0.transmission, thermal.transmission);
    assert_eq!(s0.detuning_hz, thermal.detuning_hz);

    let cold = ColdEnsembleConfig::default();
    let d = rb(Isotope::Rb85);
    let centers: Vec<f64> = d.transitions.iter().map(|t| transition_detuning(&d, t.offset_hz)).collect();
    let mut at = centers.clone();
    at.sort_by(f64::total_cmp);
    let on = mot_probe_spectrum(&vapor, &cold, &lines, &at).unwrap();
    let th = vapor_absorption_spectrum(&vapor, &lines, &at).unwrap();
    for (a, b) in on.transmission.iter().zip(&th.transmission) {
        assert!(a < b);
    }

    // Width of the cold F=3 -> F'=4 feature in optical depth.
    let c = centers[5];
    let fine = uniform_grid(c - 30e6, c + 30e6, 10e3).unwrap();
    let on = mot_probe_spectrum(&vapor, &cold, &lines, &fine).unwrap();
    let th = vapor_absorption_spectrum(&vapor, &lines, &fine).unwrap();
    let od: Vec<f64> = on.optical_depth().iter().zip(th.optical_depth()).map(|(a, b)| a - b).collect();
    let w = fwhm(&fine, &od);
    assert!((w / d.natural_linewidth_hz - 1.0).abs() < 0.2, "cold width {w}");
    assert!(w < 0.1 * doppler_fwhm(&d, 300.0).unwrap());
}

/// Full width at half maximum of a single-peaked sampled curve.
fn fwhm(x: &[f64], y: &[f64]) -> f64 {
    let (k, &peak) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let half = peak / 2.0;
    let cross = |range: Box<dyn Iterator<Item = usize>>, step: isize| -> f64 {
        for i in range {
            let j = (i as isize + step) as usize;
            if y[j] < half {
                return x[i] + (x[j] - x[i]) * (y[i] - half) / (y[i] - y[j]);
            }
        }
        f64::NAN
    };
    let right = cross(Box::new(k..x.len() - 1), 1);
    let left = cross(Box::new((1..=k).rev()), -1);
    right - left
}

#[test]
fn satabs_structure() {
    let lines = natural();
    let grid = default_grid(&lines).unwrap();
    let vapor = VaporConfig::default();
    let thermal = vapor_absorption_spectrum(&vapor, &lines, &grid).unwrap();
    let s0 = satabs_spectrum(&vapor, &lines, 0.0, &grid).unwrap();
    assert_eq!(s0.transmission, thermal.transmission);
    assert!(satabs_spectrum(&vapor, &lines, -1.0, &grid).is_err());

    let feats = satabs_features(&lines).unwrap();
    let sat = satabs_spectrum(&vapor, &lines, 1.0, &grid).unwrap();
    for d in &lines {
        for (f, ts) in d.manifolds() {
            let n = ts.len();
            let expect = n + n * (n - 1) / 2;
            let group: Vec<f64> = feats
                .iter()
                .filter(|x| x.isotope == d.isotope && x.ground_f == f)
                .map(|x| x.detuning_hz)
                .collect();
            assert_eq!(group.len(), expect);
            // Count bumps in the transmission excess around this group.
            let lo = group.iter().cloned().fold(f64::INFINITY, f64::min) - 100e6;
            let hi = group.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 100e6;
            let idx: Vec<usize> = (0..grid.len()).filter(|&k| grid[k] > lo && grid[k] < hi).collect();
            let ex: Vec<f64> = idx.iter().map(|&k| sat.transmission[k] - thermal.transmission[k]).collect();
            let peaks: Vec<f64> = (1..ex.len() - 1)
                .filter(|&k| ex[k] > ex[k - 1] && ex[k] >= ex[k + 1])
                .map(|k| grid[idx[k]])
                .collect();
            assert_eq!(peaks.len(), expect, "{} F={f}: {peaks:?}", d.isotope);
            for p in &peaks {
                assert!(group.iter().any(|c| (c - p).abs() <= 0.2e6), "{} F={f} bump at {p}", d.isotope);
            }
        }
    }

    // Rb85 F=3: dips at the transitions and their midpoints.
    let d = rb(Isotope::Rb85);
    let off: Vec<f64> = d.transitions.iter().filter(|t| t.f == 3).map(|t| transition_detuning(&d, t.offset_hz)).collect();
    let mut expect = off.clone();
    for i in 0..3 {
        for j in i + 1..3 {
            expect.push(0.5 * (off[i] + off[j]));
        }
    }
    let mut got: Vec<f64> = feats.iter().filter(|x| x.isotope == Isotope::Rb85 && x.ground_f == 3).map(|x| x.detuning_hz).collect();
    expect.sort_by(f64::total_cmp);
    got.sort_by(f64::total_cmp);
    for (a, b) in expect.iter().zip(&got) {
        assert!((a - b).abs() < 1e-3);
    }
}

#[test]
fn satabs_depth_scales_with_saturation() {
    let lines = natural();
    let d = rb(Isotope::Rb87);
    let t = d.transitions.iter().find(|t| t.f == 2 && t.f_prime == 3).unwrap();
    let x = [transition_detuning(&d, t.offset_hz)];
    let vapor = VaporConfig::default();
    let base = vapor_absorption_spectrum(&vapor, &lines, &x).unwrap().optical_depth()[0];
    let hole = |s: f64| base - satabs_spectrum(&vapor, &lines, s, &x).unwrap().optical_depth()[0];
    let ratio = hole(3.0) / hole(1.0);
    assert!((ratio - 1.5).abs() < 0.015, "{ratio}");
}

fn vacuum_slab_mode() -> picatom::modesolver::ModeSolution {
    let stack = LayerStack::from_names(&[("SiO2", 3000.0), ("Si3N4", 200.0)], "vacuum", 780.0).unwrap();
    solve_slab(&stack, 780.0, Polarization::TE).unwrap().remove(0)
}

#[test]
fn evanescent_probe() {
    let lines = natural();
    let grid = uniform_grid(-6e9, 6e9, 4e6).unwrap();
    let vapor = VaporConfig::default();

    let limit = EvanescentProbe {
        n_eff: 1.0,
        decay_length: DecayLength::Unbounded,
        vacuum_fraction: 1.0,
        interaction_length_mm: vapor.path_length_mm,
    };
    let a = evanescent_spectrum_with(&limit, &vapor, &lines, &grid).unwrap();
    let b = vapor_absorption_spectrum(&vapor, &lines, &grid).unwrap();
    assert_eq!(a.transmission, b.transmission);

    // Doppler axis scaled by n: same as a vapor at n^2 T with the density held.
    let n = 1.4;
    let probe = EvanescentProbe { n_eff: n, ..limit };
    let a = evanescent_spectrum_with(&probe, &vapor, &lines, &grid).unwrap();
    let hot = VaporConfig {
        temperature_k: vapor.temperature_k * n * n,
        pressure_torr: vapor.pressure_torr * n * n,
        ..vapor.clone()
    };
    let b = vapor_absorption_spectrum(&hot, &lines, &grid).unwrap();
    for (x, y) in a.optical_depth().iter().zip(b.optical_depth()) {
        assert!((x - y).abs() <= 1e-9 * y.max(1e-12), "{x} {y}");
    }

    // Transit width for a 120 nm tail at 300 K.
    let d = rb(Isotope::Rb85);
    let v_mp = (2.0f64 * 1.380_649e-23 * 300.0 / (84.911_789_732 * 1.660_539_066_6e-27)).sqrt();
    let gt = transit_width(&d, 300.0, DecayLength::Finite(120.0));
    assert!((gt / (v_mp / (2.0 * PI * 120e-9)) - 1.0).abs() < 1e-12);
    assert!(gt > 1e8 && gt < 1e9);
    assert!(gt > d.natural_linewidth_hz);

    let mode = vacuum_slab_mode();
    let s = evanescent_spectrum(&mode, &vapor, &lines, &grid, 5.0).unwrap();
    assert!(s.transmission.iter().all(|&t| t > 0.0 && t <= 1.0));
    assert!(s.transmission.iter().any(|&t| t < 1.0));
    let dl: f64 = s.meta("probe.decay_length_nm").unwrap().parse().unwrap();
    assert!((DecayLength::Finite(dl) == decay_length(mode.n_eff, 780.0).unwrap()));

    let empty = VaporConfig { pressure_torr: 0.0, ..vapor.clone() };
    let s = evanescent_spectrum(&mode, &empty, &lines, &grid, 5.0).unwrap();
    assert!(s.transmission.iter().all(|&t| t == 1.0));

    let mut fake = mode.clone();
    fake.n_eff = 0.95;
    assert!(matches!(evanescent_spectrum(&fake, &vapor, &lines, &grid, 5.0), Err(Error::NotEvanescent(_))));
}

fn small_grid() -> Vec<f64> {
    uniform_grid(-4.5e9, 4.5e9, 60e6).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transmission_monotone_in_pressure(t in 200.0f64..450.0, p in 0.0f64..1e-5, k in 1.0f64..4.0) {
        let lines = natural();
        let grid = small_grid();
        let v = VaporConfig { temperature_k: t, pressure_torr: p, ..Default::default() };
        let a = vapor_absorption_spectrum(&v, &lines, &grid).unwrap();
        let b = vapor_absorption_spectrum(&VaporConfig { pressure_torr: p * k, ..v }, &lines, &grid).unwrap();
        for (x, y) in a.transmission.iter().zip(&b.transmission) {
            prop_assert!(*x > 0.0 && *x <= 1.0);
            prop_assert!(y <= x);
        }
    }

    #[test]
    fn transmission_monotone_in_path(len in 0.0f64..100.0, extra in 0.0f64..100.0) {
        let lines = natural();
        let grid = small_grid();
        let v = VaporConfig { path_length_mm: len, pressure_torr: 1e-6, ..Default::default() };
        let a = vapor_absorption_spectrum(&v, &lines, &grid).unwrap();
        let b = vapor_absorption_spectrum(&VaporConfig { path_length_mm: len + extra, ..v }, &lines, &grid).unwrap();
        for (x, y) in a.transmission.iter().zip(&b.transmission) {
            prop_assert!(*y > 0.0 && y <= x);
        }
    }

    #[test]
    fn transmission_monotone_in_column_density(n in 0.0f64..1e14, k in 1.0f64..10.0, shift in -50e6f64..50e6) {
        let lines = natural();
        let grid = small_grid();
        let v = VaporConfig::default();
        let c = ColdEnsembleConfig { column_density_per_m2: n, center_detuning_hz: shift, ..Default::default() };
        let a = mot_probe_spectrum(&v, &c, &lines, &grid).unwrap();
        let b = mot_probe_spectrum(&v, &ColdEnsembleConfig { column_density_per_m2: n * k + 1.0, ..c }, &lines, &grid).unwrap();
        for (x, y) in a.transmission.iter().zip(&b.transmission) {
            prop_assert!(*y > 0.0 && y <= x);
        }
    }

    #[test]
    fn satabs_never_below_doppler(s in 0.0f64..20.0) {
        let lines = natural();
        let grid = small_grid();
        let v = VaporConfig::default();
        let a = vapor_absorption_spectrum(&v, &lines, &grid).unwrap();
        let b = satabs_spectrum(&v, &lines, s, &grid).unwrap();
        for (x, y) in a.transmission.iter().zip(&b.transmission) {
            prop_assert!(y >= x && *y <= 1.0);
        }
    }
}
