use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::Complex;
use rayon::prelude::*;

use super::monitor::{flux, modal, FieldLineRecord, FluxRecord, Line, ModeRecord, MonitorSpec};
use super::source::Source;
use super::{check_resolution, FdtdConfig, RunMetadata, YBoundary};
use crate::error::{Error, Result};
use crate::geometry::IndexMap2D;

type C64 = Complex<f64>;

/// Instantaneous `Ez` over the whole grid.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub period: usize,
    pub nx: usize,
    pub ny: usize,
    pub dx_nm: f64,
    pub dy_nm: f64,
    pub ez: Vec<f32>,
}

impl Snapshot {
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.ez[i * self.ny + j]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.ez.len() * 24);
        let _ = writeln!(s, "# period={}", self.period);
        s.push_str("x_nm,y_nm,ez\n");
        for i in 0..self.nx {
            for j in 0..self.ny {
                let _ = writeln!(
                    s,
                    "{},{},{:e}",
                    (i as f64 + 0.5) * self.dx_nm,
                    (j as f64 + 0.5) * self.dy_nm,
                    self.get(i, j)
                );
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub flux: Vec<FluxRecord>,
    pub modes: Vec<ModeRecord>,
    pub fields: Vec<FieldLineRecord>,
    pub snapshots: Vec<Snapshot>,
    pub meta: RunMetadata,
}

impl RunOutput {
    /// Carrier power through flux monitor `id`.
    pub fn flux(&self, id: &str) -> Option<f64> {
        self.flux.iter().find(|f| f.id == id).map(|f| f.power[0])
    }

    pub fn mode(&self, id: &str) -> Option<&ModeRecord> {
        self.modes.iter().find(|m| m.id == id)
    }

    pub fn field(&self, id: &str) -> Option<&FieldLineRecord> {
        self.fields.iter().find(|f| f.id == id)
    }
}

/// Loss-rate profile `s(x)` sampled at positions given in cell units.
struct Pml {
    cells: usize,
    n: usize,
    s_max: f64,
    order: i32,
}

impl Pml {
    fn rate(&self, x: f64) -> f64 {
        if self.cells == 0 {
            return 0.0;
        }
        let c = self.cells as f64;
        let depth = (c - x).max(x - (self.n as f64 - c)).max(0.0) / c;
        self.s_max * depth.min(1.0).powi(self.order)
    }

    /// `(a, b)` for `f <- a f + b * rhs` at each position, with `b = dt/(1 + s dt/2) / d`.
    fn coefficients(&self, positions: impl Iterator<Item = f64>, dt: f64, d: f64) -> (Vec<f32>, Vec<f32>) {
        positions
            .map(|x| {
                let s = self.rate(x);
                let den = 1.0 + 0.5 * s * dt;
                (((1.0 - 0.5 * s * dt) / den) as f32, (dt / den / d) as f32)
            })
            .unzip()
    }
}

struct Probe {
    e: Vec<usize>,
    /// Two H samples averaged onto each `Ez` node.
    h: Vec<(usize, usize)>,
    h_is_hx: bool,
}

impl Probe {
    fn new(line: &Line, nx: usize, ny: usize, periodic_y: bool) -> Result<Self> {
        let nodes = line.nodes();
        if nodes.is_empty() {
            return Err(Error::InvalidInput("monitor line is empty".into()));
        }
        let bad = |i: usize, j: usize| Error::Geometry(format!("monitor node ({i}, {j}) outside the usable grid"));
        let mut e = Vec::with_capacity(nodes.len());
        let mut h = Vec::with_capacity(nodes.len());
        let h_is_hx = matches!(line, Line::Horizontal { .. });
        for &(i, j) in &nodes {
            if i >= nx || j >= ny {
                return Err(bad(i, j));
            }
            e.push(i * ny + j);
            if h_is_hx {
                let jm = if j > 0 {
                    j - 1
                } else if periodic_y {
                    ny - 1
                } else {
                    return Err(bad(i, j));
                };
                if !periodic_y && j + 1 >= ny {
                    return Err(bad(i, j));
                }
                h.push((i * ny + jm, i * ny + j));
            } else {
                if i == 0 || i + 1 >= nx {
                    return Err(bad(i, j));
                }
                h.push(((i - 1) * ny + j, i * ny + j));
            }
        }
        Ok(Self { e, h, h_is_hx })
    }
}

struct Fields {
    nx: usize,
    ny: usize,
    periodic: bool,
    ezx: Vec<f32>,
    ezy: Vec<f32>,
    hx: Vec<f32>,
    hy: Vec<f32>,
    inv_eps: Vec<f32>,
    // x-profile coefficients (Ez at i + 1/2, Hy at i + 1), y-profile likewise.
    aex: Vec<f32>,
    bex: Vec<f32>,
    ahy: Vec<f32>,
    bhy: Vec<f32>,
    aey: Vec<f32>,
    bey: Vec<f32>,
    ahx: Vec<f32>,
    bhx: Vec<f32>,
}

impl Fields {
    #[inline]
    fn ez(&self, k: usize) -> f32 {
        self.ezx[k] + self.ezy[k]
    }

    fn update_h(&mut self) {
        let (nx, ny, periodic) = (self.nx, self.ny, self.periodic);
        let (ezx, ezy) = (&self.ezx, &self.ezy);
        let (ahx, bhx, ahy, bhy) = (&self.ahx, &self.bhx, &self.ahy, &self.bhy);
        self.hx
            .par_chunks_mut(ny)
            .zip(self.hy.par_chunks_mut(ny))
            .enumerate()
            .for_each(|(i, (hx, hy))| {
                let ex = &ezx[i * ny..(i + 1) * ny];
                let ey = &ezy[i * ny..(i + 1) * ny];
                for j in 0..ny - 1 {
                    let d = (ex[j + 1] + ey[j + 1]) - (ex[j] + ey[j]);
                    hx[j] = ahx[j] * hx[j] - bhx[j] * d;
                }
                if periodic {
                    let d = (ex[0] + ey[0]) - (ex[ny - 1] + ey[ny - 1]);
                    hx[ny - 1] = ahx[ny - 1] * hx[ny - 1] - bhx[ny - 1] * d;
                }
                if i + 1 < nx {
                    let nxp = &ezx[(i + 1) * ny..(i + 2) * ny];
                    let nyp = &ezy[(i + 1) * ny..(i + 2) * ny];
                    let (a, b) = (ahy[i], bhy[i]);
                    for j in 0..ny {
                        let d = (nxp[j] + nyp[j]) - (ex[j] + ey[j]);
                        hy[j] = a * hy[j] + b * d;
                    }
                }
            });
    }

    fn update_e(&mut self) {
        let (ny, periodic) = (self.ny, self.periodic);
        let (hx, hy, inv) = (&self.hx, &self.hy, &self.inv_eps);
        let (aex, bex, aey, bey) = (&self.aex, &self.bex, &self.aey, &self.bey);
        self.ezx
            .par_chunks_mut(ny)
            .zip(self.ezy.par_chunks_mut(ny))
            .enumerate()
            .for_each(|(i, (ex, ey))| {
                let inv = &inv[i * ny..(i + 1) * ny];
                let hyc = &hy[i * ny..(i + 1) * ny];
                let (a, b) = (aex[i], bex[i]);
                if i > 0 {
                    let hym = &hy[(i - 1) * ny..i * ny];
                    for j in 0..ny {
                        ex[j] = a * ex[j] + b * inv[j] * (hyc[j] - hym[j]);
                    }
                } else {
                    for j in 0..ny {
                        ex[j] = a * ex[j] + b * inv[j] * hyc[j];
                    }
                }
                let hxc = &hx[i * ny..(i + 1) * ny];
                let below = if periodic { hxc[ny - 1] } else { 0.0 };
                ey[0] = aey[0] * ey[0] - bey[0] * inv[0] * (hxc[0] - below);
                for j in 1..ny {
                    ey[j] = aey[j] * ey[j] - bey[j] * inv[j] * (hxc[j] - hxc[j - 1]);
                }
            });
    }

    fn max_abs_ez(&self) -> f32 {
        self.ezx
            .iter()
            .zip(&self.ezy)
            .map(|(a, b)| (a + b).abs())
            .fold(0.0f32, |m, v| if v.is_nan() || m.is_nan() { f32::NAN } else { m.max(v) })
    }
}

fn ramp(t: f64, ramp_time: f64) -> f64 {
    if t >= ramp_time || ramp_time <= 0.0 {
        1.0
    } else {
        (0.5 * PI * t / ramp_time).sin().powi(2)
    }
}

/// Runs a CW simulation of `geometry` (whole domain including PML cells)
/// driven by `sources`, all at the same carrier wavelength.
pub fn run(geometry: &IndexMap2D, sources: &[Source], monitors: &[MonitorSpec], config: &FdtdConfig) -> Result<RunOutput> {
    let started = Instant::now();
    config.validate()?;
    let Some(first) = sources.first() else {
        return Err(Error::InvalidInput("at least one source is required".into()));
    };
    let wavelength = first.wavelength_nm();
    if !(wavelength > 0.0) || sources.iter().any(|s| s.wavelength_nm() != wavelength) {
        return Err(Error::InvalidInput("sources must share one positive carrier wavelength".into()));
    }
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b;
    if !same(geometry.dx_nm, config.dx_nm) || !same(geometry.dy_nm, config.dy_nm) {
        return Err(Error::Resolution(format!(
            "geometry grid {} x {} nm differs from the FDTD grid {} x {} nm",
            geometry.dx_nm, geometry.dy_nm, config.dx_nm, config.dy_nm
        )));
    }
    check_resolution(geometry, config, wavelength)?;
    let (nx, ny) = (geometry.nx, geometry.ny);
    let periodic = config.y_boundary == YBoundary::Periodic;
    let px = config.pml_cells();
    let py = if periodic { 0 } else { (config.pml_thickness_nm / config.dy_nm).round() as usize };
    if nx <= 2 * px + 2 || ny <= 2 * py + 2 {
        return Err(Error::Geometry(format!("{nx} x {ny} grid leaves no interior inside the PML")));
    }
    for s in sources {
        let c = s.column();
        if c < px || c >= nx - px || s.weights(ny).iter().any(|(j, _)| *j >= ny) {
            return Err(Error::Geometry(format!("source at column {c} is outside the interior")));
        }
    }

    let (ppp, dt) = config.time_step(wavelength);
    let omega = 2.0 * PI / wavelength;
    let ramp_time = config.source_ramp * wavelength;
    let total_periods = (config.source_ramp + config.run_time).ceil() as usize;
    let total_steps = total_periods * ppp;

    let order = config.pml_grading_order as i32;
    let s_max = |cells: usize, d: f64| {
        (order as f64 + 1.0) * (1.0 / config.pml_reflection).ln() / (2.0 * cells.max(1) as f64 * d)
    };
    let pml_x = Pml { cells: px, n: nx, s_max: s_max(px, config.dx_nm), order };
    let pml_y = Pml { cells: py, n: ny, s_max: s_max(py, config.dy_nm), order };
    let (aex, bex) = pml_x.coefficients((0..nx).map(|i| i as f64 + 0.5), dt, config.dx_nm);
    let (ahy, bhy) = pml_x.coefficients((0..nx).map(|i| i as f64 + 1.0), dt, config.dx_nm);
    let (aey, bey) = pml_y.coefficients((0..ny).map(|j| j as f64 + 0.5), dt, config.dy_nm);
    let (ahx, bhx) = pml_y.coefficients((0..ny).map(|j| j as f64 + 1.0), dt, config.dy_nm);
    let mut f = Fields {
        nx,
        ny,
        periodic,
        ezx: vec![0.0; nx * ny],
        ezy: vec![0.0; nx * ny],
        hx: vec![0.0; nx * ny],
        hy: vec![0.0; nx * ny],
        inv_eps: geometry.values().iter().map(|n| (1.0 / (n * n)) as f32).collect(),
        aex,
        bex,
        ahy,
        bhy,
        aey,
        bey,
        ahx,
        bhx,
    };

    let probes = monitors
        .iter()
        .map(|m| Probe::new(&m.line(), nx, ny, periodic))
        .collect::<Result<Vec<_>>>()?;
    let omegas: Vec<f64> = std::iter::once(omega)
        .chain(config.extra_wavelengths_nm.iter().map(|w| 2.0 * PI / w))
        .collect();
    let nf = omegas.len();
    // Per-period phasor accumulators, indexed [monitor][freq * len + k].
    let mut acc_e: Vec<Vec<C64>> = probes.iter().map(|p| vec![C64::default(); nf * p.e.len()]).collect();
    let mut acc_h = acc_e.clone();
    let mut window_e = acc_e.clone();
    let mut window_h = acc_e.clone();
    let steady_window = config.steady_window.min(config.run_time.floor() as usize);
    let record_from = total_periods.saturating_sub(config.dft_window.max(steady_window));
    let window_from = total_periods.saturating_sub(config.dft_window);
    let mut history: Vec<Vec<f64>> = vec![Vec::new(); monitors.len()];
    let norm = 2.0 / (ppp as f64);

    let injections: Vec<(usize, Vec<(usize, f32)>)> = sources
        .iter()
        .map(|s| {
            let i = s.column();
            let w = s.weights(ny).into_iter().map(|(j, w)| (i * ny + j, (w * dt) as f32)).collect();
            (i, w)
        })
        .collect();
    let amp_scale = sources.iter().map(|s| s.amplitude().abs()).fold(0.0, f64::max);

    let mut snapshots = Vec::new();
    for n in 0..total_steps {
        let period = n / ppp;
        let recording = period >= record_from;
        let th = (n as f64 + 0.5) * dt;
        f.update_h();
        if recording {
            for (p, probe) in probes.iter().enumerate() {
                let acc = &mut acc_h[p];
                let h = if probe.h_is_hx { &f.hx } else { &f.hy };
                for (q, w) in omegas.iter().enumerate() {
                    let ph = C64::from_polar(norm, w * th);
                    let off = q * probe.h.len();
                    for (k, &(a, b)) in probe.h.iter().enumerate() {
                        acc[off + k] += ph * (0.5 * (h[a] as f64 + h[b] as f64));
                    }
                }
            }
        }
        f.update_e();
        let j = ramp(th, ramp_time) * (omega * th).sin();
        for (_, inj) in &injections {
            for &(k, w) in inj {
                f.ezx[k] += w * f.inv_eps[k] * j as f32;
            }
        }
        let te = (n + 1) as f64 * dt;
        if recording {
            for (p, probe) in probes.iter().enumerate() {
                let acc = &mut acc_e[p];
                for (q, w) in omegas.iter().enumerate() {
                    let ph = C64::from_polar(norm, w * te);
                    let off = q * probe.e.len();
                    for (k, &idx) in probe.e.iter().enumerate() {
                        acc[off + k] += ph * f.ez(idx) as f64;
                    }
                }
            }
        }
        if (n + 1) % ppp == 0 {
            let m = f.max_abs_ez();
            if !m.is_finite() || m as f64 > 1e6 * amp_scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Instability {
                    step: n + 1,
                    reason: if m.is_finite() {
                        format!("|Ez| = {m:e} exceeds 1e6 x the source amplitude")
                    } else {
                        "non-finite field".into()
                    },
                });
            }
            if recording {
                for (p, (m, probe)) in monitors.iter().zip(&probes).enumerate() {
                    let len = probe.e.len();
                    let (e, h) = (&acc_e[p][..len], &acc_h[p][..len]);
                    let power = match m {
                        MonitorSpec::Flux { line, .. } => Some(flux(line, e, h, spacing(line, config))),
                        MonitorSpec::Mode { mode, .. } => {
                            let (_, _, pf, pb) = modal(mode, e, h, config.dy_nm);
                            Some(pf + pb)
                        }
                        MonitorSpec::Field { .. } => None,
                    };
                    if let (Some(pw), true) = (power, period >= total_periods - steady_window) {
                        history[p].push(pw);
                    }
                    if period >= window_from {
                        let scale = 1.0 / config.dft_window as f64;
                        for (w, a) in window_e[p].iter_mut().zip(&acc_e[p]) {
                            *w += a * scale;
                        }
                        for (w, a) in window_h[p].iter_mut().zip(&acc_h[p]) {
                            *w += a * scale;
                        }
                    }
                    acc_e[p].iter_mut().for_each(|a| *a = C64::default());
                    acc_h[p].iter_mut().for_each(|a| *a = C64::default());
                }
            }
            if let Some(every) = config.snapshot_every {
                if every > 0 && (period + 1) % every == 0 {
                    snapshots.push(Snapshot {
                        period: period + 1,
                        nx,
                        ny,
                        dx_nm: config.dx_nm,
                        dy_nm: config.dy_nm,
                        ez: (0..nx * ny).map(|k| f.ez(k)).collect(),
                    });
                }
            }
        }
    }

    let (converged, max_variation) = steady_state(&history);
    let mut wavelengths = vec![wavelength];
    wavelengths.extend(&config.extra_wavelengths_nm);
    let mut out = RunOutput {
        flux: Vec::new(),
        modes: Vec::new(),
        fields: Vec::new(),
        snapshots,
        meta: RunMetadata {
            config: config.clone(),
            wavelength_nm: wavelength,
            nx,
            ny,
            dt_nm: dt,
            steps_per_period: ppp,
            total_steps,
            elapsed_s: 0.0,
            converged,
            max_variation,
            threads: rayon::current_num_threads(),
        },
    };
    for (p, (m, probe)) in monitors.iter().zip(&probes).enumerate() {
        let len = probe.e.len();
        let (e, h) = (&window_e[p], &window_h[p]);
        match m {
            MonitorSpec::Flux { id, line } => out.flux.push(FluxRecord {
                id: id.clone(),
                line: line.clone(),
                wavelengths_nm: wavelengths.clone(),
                power: (0..nf)
                    .map(|q| flux(line, &e[q * len..(q + 1) * len], &h[q * len..(q + 1) * len], spacing(line, config)))
                    .collect(),
            }),
            MonitorSpec::Mode { id, mode } => {
                let (fw, bw, pf, pb) = modal(mode, &e[..len], &h[..len], config.dy_nm);
                out.modes.push(ModeRecord {
                    id: id.clone(),
                    column: mode.column,
                    forward: fw,
                    backward: bw,
                    forward_power: pf,
                    backward_power: pb,
                });
            }
            MonitorSpec::Field { id, line } => out.fields.push(FieldLineRecord {
                id: id.clone(),
                line: line.clone(),
                positions_nm: line
                    .nodes()
                    .iter()
                    .map(|&(i, j)| match line {
                        Line::Vertical { .. } => (j as f64 + 0.5) * config.dy_nm,
                        Line::Horizontal { .. } => (i as f64 + 0.5) * config.dx_nm,
                    })
                    .collect(),
                ez: e[..len].to_vec(),
                h: h[..len].to_vec(),
            }),
        }
    }
    out.meta.elapsed_s = started.elapsed().as_secs_f64();
    Ok(out)
}

fn spacing(line: &Line, config: &FdtdConfig) -> f64 {
    match line {
        Line::Vertical { .. } => config.dy_nm,
        Line::Horizontal { .. } => config.dx_nm,
    }
}

/// Largest relative spread of per-period monitor powers; monitors carrying
/// less than 1e-6 of the strongest one are ignored.
fn steady_state(history: &[Vec<f64>]) -> (bool, f64) {
    let peak = history.iter().flatten().fold(0.0f64, |m, p| m.max(p.abs()));
    if peak == 0.0 {
        let any = history.iter().any(|h| !h.is_empty());
        return (any, 0.0);
    }
    let mut worst = 0.0f64;
    let mut seen = false;
    for h in history {
        if h.is_empty() {
            continue;
        }
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        if mean.abs() < 1e-6 * peak {
            continue;
        }
        seen = true;
        let (lo, hi) = h.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &p| (l.min(p), u.max(p)));
        worst = worst.max((hi - lo) / mean.abs());
    }
    (seen && worst < 0.005, worst)
}
