//! Finite-difference mode solvers.
//!
//! The 1-D solver handles single columns (slabs, FDTD source planes). The 2-D
//! solver discretizes the semi-vectorial wave equation on a five-point
//! stencil and extracts the modes nearest the top of the spectrum by
//! shift-and-invert subspace iteration on a banded LU factorization.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::linalg::{normalize, BandMatrix, SymTridiagonal};
use super::{boundary_ratio, solve_slab, ModeSolution, Polarization};
use crate::error::{Error, Result};
use crate::geometry::{
    rasterize_cross_section, CellRule, IndexMap2D, Layer, LayerStack, WaveguideCrossSection,
};
use crate::materials::Material;

/// A mode of a 1-D index profile.
#[derive(Debug, Clone)]
pub struct Mode1d {
    pub n_eff: f64,
    /// Eigenvalue `beta^2` of the discrete operator.
    pub beta_sq: f64,
    /// Unit-norm field, positive peak.
    pub field: Vec<f64>,
}

fn interface_eps(a: f64, b: f64) -> f64 {
    0.5 * (a * a + b * b)
}

/// Symmetric tridiagonal form of the 1-D operator with Dirichlet ends.
///
/// TE: `d^2/dy^2 + k^2 n^2`. TM: `d/dy (1/n^2) d/dy (n^2 .) + k^2 n^2`,
/// symmetrized by the similarity `diag(n)`.
fn operator_1d(indices: &[f64], d: f64, k: f64, pol: Polarization) -> SymTridiagonal {
    let n = indices.len();
    let h2 = 1.0 / (d * d);
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    match pol {
        Polarization::TE => {
            for i in 0..n {
                diag[i] = -2.0 * h2 + k * k * indices[i] * indices[i];
            }
            off.iter_mut().for_each(|o| *o = h2);
        }
        Polarization::TM => {
            for i in 0..n {
                let ni = indices[i];
                let ml = if i > 0 { interface_eps(indices[i - 1], ni) } else { ni * ni };
                let mr = if i + 1 < n { interface_eps(ni, indices[i + 1]) } else { ni * ni };
                diag[i] = -ni * ni * (1.0 / ml + 1.0 / mr) * h2 + k * k * ni * ni;
                if i + 1 < n {
                    off[i] = ni * indices[i + 1] / mr * h2;
                }
            }
        }
    }
    SymTridiagonal::new(diag, off)
}

/// Modes of a 1-D index profile on cell centers spaced `d`, Dirichlet ends,
/// with `n_min < n_eff < n_max`, largest first. `k` is the wavenumber used
/// in the operator (the vacuum `k0`, or a numerically dispersed value for
/// FDTD sources).
pub fn modes_1d(
    indices: &[f64],
    d: f64,
    k: f64,
    pol: Polarization,
    n_min: f64,
    n_max: f64,
) -> Vec<Mode1d> {
    if indices.is_empty() {
        return Vec::new();
    }
    let t = operator_1d(indices, d, k, pol);
    let (lo, hi) = ((k * n_min).powi(2), (k * n_max).powi(2));
    t.eigenvalues_in(lo, hi)
        .into_iter()
        .map(|lam| {
            let mut v = t.eigenvector(lam);
            if pol == Polarization::TM {
                for (x, n) in v.iter_mut().zip(indices) {
                    *x /= n;
                }
                normalize(&mut v);
            }
            Mode1d {
                n_eff: lam.sqrt() / k,
                beta_sq: lam,
                field: v,
            }
        })
        .collect()
}

/// Finite-difference slab modes on the window `[y_lo, y_hi)` of stack
/// coordinates, sampled every `dy_nm`. Guided means `n_eff` above both end
/// cells' indices.
pub fn solve_slab_fd(
    stack: &LayerStack,
    wavelength_nm: f64,
    pol: Polarization,
    dy_nm: f64,
    window_nm: (f64, f64),
) -> Result<Vec<ModeSolution>> {
    let (y_lo, y_hi) = window_nm;
    if !(dy_nm > 0.0) || !(y_hi > y_lo) {
        return Err(Error::InvalidInput(format!(
            "bad slab window [{y_lo}, {y_hi}) with dy={dy_nm}"
        )));
    }
    let ny = (((y_hi - y_lo) / dy_nm) - 1e-9).ceil() as usize;
    let index = IndexMap2D::from_fn(1, ny, 1.0, dy_nm, |_, j| {
        stack.index_at(y_lo + (j as f64 + 0.5) * dy_nm)
    })?;
    let col = index.column(0);
    let k0 = 2.0 * PI / wavelength_nm;
    let n_min = col[0].max(col[ny - 1]);
    let n_max = index.max_index();
    Ok(modes_1d(col, dy_nm, k0, pol, n_min, n_max)
        .into_iter()
        .map(|m| ModeSolution {
            n_eff: m.n_eff,
            polarization: pol,
            wavelength_nm,
            index: index.clone(),
            origin_nm: (0.0, y_lo + 0.5 * dy_nm),
            field: m.field,
            residual: 0.0,
        })
        .collect())
}

/// Discretization of the transverse operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulation {
    /// Dominant field component with interface weighting across the
    /// direction it points in. The operator is not symmetric.
    #[default]
    SemiVectorial,
    /// Plain Helmholtz operator; symmetric, modes exactly orthogonal.
    Scalar,
}

/// Boundary condition on the left and right window edges. Top and bottom
/// are always Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LateralBoundary {
    #[default]
    Dirichlet,
    /// Zero normal derivative; a laterally uniform structure then reduces
    /// exactly to the 1-D slab problem.
    Neumann,
}

#[derive(Debug, Clone)]
pub struct CrossSectionOptions {
    pub dx_nm: f64,
    pub dy_nm: f64,
    /// Window `(width, height)`; `None` picks one with [`auto_window`].
    pub window_nm: Option<(f64, f64)>,
    pub n_modes: usize,
    pub formulation: Formulation,
    pub lateral: LateralBoundary,
    pub cell_rule: CellRule,
    /// Solve the transposed operator (left eigenvectors of the
    /// semi-vectorial problem).
    pub adjoint: bool,
    pub max_iterations: usize,
    /// Relative eigen-residual `|A x - lambda x| / |lambda|` to reach.
    pub tolerance: f64,
}

impl Default for CrossSectionOptions {
    fn default() -> Self {
        Self {
            dx_nm: 20.0,
            dy_nm: 10.0,
            window_nm: None,
            n_modes: 5,
            formulation: Formulation::SemiVectorial,
            lateral: LateralBoundary::Dirichlet,
            cell_rule: CellRule::Center,
            adjoint: false,
            max_iterations: 400,
            tolerance: 1e-10,
        }
    }
}

/// Effective indices `(core, side)` of the vertical slabs through and beside
/// the core.
///
/// Where the side slab guides nothing, its effective index is taken as the
/// largest index it touches around the core layer.
pub fn eim_lateral_index(cs: &WaveguideCrossSection, wavelength_nm: f64, pol: Polarization) -> Result<(f64, f64)> {
    let core = solve_slab(&cs.core_stack(), wavelength_nm, pol)?;
    let Some(core) = core.first() else {
        return Err(Error::NoGuidedMode(format!(
            "vertical slab through the core guides no {pol} mode"
        )));
    };
    let side_stack = cs.side_stack();
    let side = match solve_slab(&side_stack, wavelength_nm, pol)?.first() {
        Some(m) => m.n_eff,
        None => cs.adjacent_indices().into_iter().fold(1.0, f64::max),
    };
    Ok((core.n_eff, side))
}

/// Effective-index estimate of the fundamental `n_eff` of a cross-section.
fn eim_estimate(cs: &WaveguideCrossSection, wavelength_nm: f64, pol: Polarization) -> Result<f64> {
    let (n_core, n_side) = eim_lateral_index(cs, wavelength_nm, pol)?;
    let lateral_pol = match pol {
        Polarization::TE => Polarization::TM,
        Polarization::TM => Polarization::TE,
    };
    let side = Material::new("eim-side", n_side)?;
    let lateral = LayerStack::new(
        vec![
            Layer::new(side.clone(), 1.0),
            Layer::new(Material::new("eim-core", n_core)?, cs.core_width_nm),
        ],
        side,
    )?;
    Ok(solve_slab(&lateral, wavelength_nm, lateral_pol)?
        .first()
        .map(|m| m.n_eff)
        .unwrap_or(n_side))
}

fn guided_cutoff(cs: &WaveguideCrossSection) -> f64 {
    cs.adjacent_indices().into_iter().fold(1.0, f64::max)
}

fn decay_estimate(cs: &WaveguideCrossSection, wavelength_nm: f64, n_eff: f64) -> f64 {
    let k0 = 2.0 * PI / wavelength_nm;
    let cut = guided_cutoff(cs);
    1.0 / (k0 * (n_eff * n_eff - cut * cut).max(1e-12).sqrt())
}

/// A window leaving eight estimated decay lengths around the core, rounded
/// up to 100 nm.
pub fn auto_window(cs: &WaveguideCrossSection, wavelength_nm: f64, pol: Polarization) -> Result<(f64, f64)> {
    let n_est = eim_estimate(cs, wavelength_nm, pol)?;
    let margin = 8.0 * decay_estimate(cs, wavelength_nm, n_est);
    let (c0, c1) = cs.core_bounds();
    let round = |v: f64| (v / 100.0).ceil() * 100.0;
    Ok((round(cs.core_width_nm + 2.0 * margin), round(c1 - c0 + 2.0 * margin)))
}

/// Guided modes of a channel waveguide in a `window_nm` (width, height)
/// window with default options otherwise.
pub fn solve_cross_section(
    cs: &WaveguideCrossSection,
    wavelength_nm: f64,
    pol: Polarization,
    window_nm: (f64, f64),
    dx_nm: f64,
    dy_nm: f64,
) -> Result<Vec<ModeSolution>> {
    let opts = CrossSectionOptions {
        dx_nm,
        dy_nm,
        window_nm: Some(window_nm),
        ..Default::default()
    };
    solve_cross_section_with(cs, wavelength_nm, pol, &opts)
}

/// Five-point stencil coefficients per cell, natural `(i, j)` layout.
struct Stencil {
    nx: usize,
    ny: usize,
    diag: Vec<f64>,
    xm: Vec<f64>,
    xp: Vec<f64>,
    ym: Vec<f64>,
    yp: Vec<f64>,
}

impl Stencil {
    fn build(
        map: &IndexMap2D,
        k0: f64,
        pol: Polarization,
        form: Formulation,
        lateral: LateralBoundary,
    ) -> Self {
        let (nx, ny) = (map.nx, map.ny);
        let n = nx * ny;
        let mut s = Stencil {
            nx,
            ny,
            diag: vec![0.0; n],
            xm: vec![0.0; n],
            xp: vec![0.0; n],
            ym: vec![0.0; n],
            yp: vec![0.0; n],
        };
        let weighted_x = form == Formulation::SemiVectorial && pol == Polarization::TE;
        let weighted_y = form == Formulation::SemiVectorial && pol == Polarization::TM;
        let hx = 1.0 / (map.dx_nm * map.dx_nm);
        let hy = 1.0 / (map.dy_nm * map.dy_nm);
        let neumann = lateral == LateralBoundary::Neumann;
        for i in 0..nx {
            for j in 0..ny {
                let p = i * ny + j;
                let ni = map.get(i, j);
                let mut d = k0 * k0 * ni * ni;
                // x direction
                for (side, nb) in [(-1i64, (i > 0).then(|| i - 1)), (1, (i + 1 < nx).then(|| i + 1))] {
                    match (nb, weighted_x) {
                        (Some(_), false) => {
                            d -= hx;
                            if side < 0 { s.xm[p] = hx } else { s.xp[p] = hx }
                        }
                        (Some(q), true) => {
                            let nq = map.get(q, j);
                            let m = interface_eps(ni, nq);
                            d -= ni * ni / m * hx;
                            let c = nq * nq / m * hx;
                            if side < 0 { s.xm[p] = c } else { s.xp[p] = c }
                        }
                        (None, _) => {
                            if !neumann {
                                d -= hx;
                            }
                        }
                    }
                }
                // y direction, always Dirichlet
                for (side, nb) in [(-1i64, (j > 0).then(|| j - 1)), (1, (j + 1 < ny).then(|| j + 1))] {
                    match (nb, weighted_y) {
                        (Some(_), false) => {
                            d -= hy;
                            if side < 0 { s.ym[p] = hy } else { s.yp[p] = hy }
                        }
                        (Some(q), true) => {
                            let nq = map.get(i, q);
                            let m = interface_eps(ni, nq);
                            d -= ni * ni / m * hy;
                            let c = nq * nq / m * hy;
                            if side < 0 { s.ym[p] = c } else { s.yp[p] = c }
                        }
                        (None, _) => d -= hy,
                    }
                }
                s.diag[p] = d;
            }
        }
        s
    }

    fn transpose(&self) -> Self {
        let (nx, ny) = (self.nx, self.ny);
        let n = nx * ny;
        let mut t = Stencil {
            nx,
            ny,
            diag: self.diag.clone(),
            xm: vec![0.0; n],
            xp: vec![0.0; n],
            ym: vec![0.0; n],
            yp: vec![0.0; n],
        };
        for i in 0..nx {
            for j in 0..ny {
                let p = i * ny + j;
                if i > 0 {
                    t.xm[p] = self.xp[p - ny];
                }
                if i + 1 < nx {
                    t.xp[p] = self.xm[p + ny];
                }
                if j > 0 {
                    t.ym[p] = self.yp[p - 1];
                }
                if j + 1 < ny {
                    t.yp[p] = self.ym[p + 1];
                }
            }
        }
        t
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let ny = self.ny;
        for p in 0..x.len() {
            let mut v = self.diag[p] * x[p];
            if self.xm[p] != 0.0 {
                v += self.xm[p] * x[p - ny];
            }
            if self.xp[p] != 0.0 {
                v += self.xp[p] * x[p + ny];
            }
            if self.ym[p] != 0.0 {
                v += self.ym[p] * x[p - 1];
            }
            if self.yp[p] != 0.0 {
                v += self.yp[p] * x[p + 1];
            }
            y[p] = v;
        }
    }

    /// Banded `A - sigma I` with the shorter axis running fastest.
    fn shifted_band(&self, sigma: f64) -> (BandMatrix, Ordering) {
        let ord = Ordering::new(self.nx, self.ny);
        let mut b = BandMatrix::zeros(self.nx * self.ny, ord.bw);
        for i in 0..self.nx {
            for j in 0..self.ny {
                let p = i * self.ny + j;
                let r = ord.map(i, j);
                b.add(r, r, self.diag[p] - sigma);
                if i > 0 {
                    b.add(r, ord.map(i - 1, j), self.xm[p]);
                }
                if i + 1 < self.nx {
                    b.add(r, ord.map(i + 1, j), self.xp[p]);
                }
                if j > 0 {
                    b.add(r, ord.map(i, j - 1), self.ym[p]);
                }
                if j + 1 < self.ny {
                    b.add(r, ord.map(i, j + 1), self.yp[p]);
                }
            }
        }
        (b, ord)
    }
}

/// Unknown numbering for the banded system.
struct Ordering {
    nx: usize,
    ny: usize,
    bw: usize,
    x_fastest: bool,
}

impl Ordering {
    fn new(nx: usize, ny: usize) -> Self {
        let x_fastest = nx < ny;
        Self {
            nx,
            ny,
            bw: if x_fastest { nx } else { ny },
            x_fastest,
        }
    }

    #[inline]
    fn map(&self, i: usize, j: usize) -> usize {
        if self.x_fastest {
            j * self.nx + i
        } else {
            i * self.ny + j
        }
    }

    #[cfg(test)]
    fn to_band(&self, natural: &[f64]) -> Vec<f64> {
        if !self.x_fastest {
            return natural.to_vec();
        }
        let mut out = vec![0.0; natural.len()];
        for i in 0..self.nx {
            for j in 0..self.ny {
                out[self.map(i, j)] = natural[i * self.ny + j];
            }
        }
        out
    }

    #[cfg(test)]
    fn to_natural(&self, band: &[f64]) -> Vec<f64> {
        if !self.x_fastest {
            return band.to_vec();
        }
        let mut out = vec![0.0; band.len()];
        for i in 0..self.nx {
            for j in 0..self.ny {
                out[i * self.ny + j] = band[self.map(i, j)];
            }
        }
        out
    }
}

/// Largest eigenvalue of the vertical 1-D operator over all distinct columns.
fn column_bound(map: &IndexMap2D, k0: f64, pol: Polarization, form: Formulation) -> f64 {
    let col_pol = if form == Formulation::SemiVectorial { pol } else { Polarization::TE };
    let mut seen: Vec<&[f64]> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for i in 0..map.nx {
        let c = map.column(i);
        if seen.iter().any(|s| *s == c) {
            continue;
        }
        seen.push(c);
        let t = operator_1d(c, map.dy_nm, k0, col_pol);
        best = best.max(t.eigenvalue_from_top(0));
    }
    best
}

/// Guided modes of a channel waveguide.
pub fn solve_cross_section_with(
    cs: &WaveguideCrossSection,
    wavelength_nm: f64,
    pol: Polarization,
    opts: &CrossSectionOptions,
) -> Result<Vec<ModeSolution>> {
    if !(opts.dx_nm > 0.0 && opts.dy_nm > 0.0) {
        return Err(Error::Geometry(format!(
            "grid spacings must be positive, got dx={}, dy={}",
            opts.dx_nm, opts.dy_nm
        )));
    }
    if opts.n_modes == 0 {
        return Err(Error::InvalidInput("n_modes must be at least 1".into()));
    }
    let k0 = 2.0 * PI / wavelength_nm;
    let cut = guided_cutoff(cs);
    let (width, height) = match opts.window_nm {
        Some(w) => w,
        None => auto_window(cs, wavelength_nm, pol)?,
    };

    // Margin precheck against the slab estimate of the decay length.
    let slab = solve_slab(&cs.core_stack(), wavelength_nm, pol)?;
    let Some(slab0) = slab.first() else {
        return Err(Error::NoGuidedMode(format!(
            "the vertical slab through the core guides no {pol} mode"
        )));
    };
    let decay = decay_estimate(cs, wavelength_nm, slab0.n_eff);
    let (c0, c1) = cs.core_bounds();
    let v_margin = 0.5 * (height - (c1 - c0));
    let laterally_uniform = opts.lateral == LateralBoundary::Neumann && cs.core_width_nm >= width;
    let h_margin = 0.5 * (width - cs.core_width_nm);
    if v_margin < 3.0 * decay || (!laterally_uniform && h_margin < 3.0 * decay) {
        return Err(Error::WindowTooSmall(format!(
            "margins {h_margin:.0} nm (lateral) and {v_margin:.0} nm (vertical) are below 3 decay lengths ({:.0} nm)",
            3.0 * decay
        )));
    }

    let (map, y_offset) = rasterize_cross_section(cs, width, height, opts.dx_nm, opts.dy_nm, opts.cell_rule)?;
    let mut stencil = Stencil::build(&map, k0, pol, opts.formulation, opts.lateral);
    if opts.adjoint {
        stencil = stencil.transpose();
    }
    let lam_cut = (k0 * cut).powi(2);
    let lam_top = column_bound(&map, k0, pol, opts.formulation);
    if lam_top <= lam_cut {
        return Ok(Vec::new());
    }
    // Shift just above the effective-index estimate of the fundamental;
    // the column bound caps it from above.
    // A laterally uniform window has the column bound as its top eigenvalue.
    let estimate = if laterally_uniform { None } else { eim_estimate(cs, wavelength_nm, pol).ok() };
    let sigma = match estimate {
        Some(n_est) if (k0 * n_est).powi(2) < lam_top => {
            let lam_est = (k0 * n_est).powi(2);
            lam_est + 0.1 * (lam_top - lam_est)
        }
        _ => lam_top + 1e-3 * (lam_top - lam_cut),
    };
    let pairs = subspace_iteration(&stencil, sigma, lam_cut, opts)?;

    let mut modes = Vec::new();
    for (rank, (lam, vec, resid)) in pairs.into_iter().enumerate() {
        if lam <= lam_cut {
            break;
        }
        let mut field = vec;
        normalize(&mut field);
        let peak = field.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
        if peak < 0.0 {
            field.iter_mut().for_each(|v| *v = -*v);
        }
        let ratio = boundary_ratio(&field, map.nx, map.ny);
        if ratio >= 1e-3 && !(laterally_uniform && vertical_ratio(&field, map.nx, map.ny) < 1e-3) {
            if rank == 0 {
                return Err(Error::WindowTooSmall(format!(
                    "fundamental mode reaches {ratio:.2e} of its peak at the window edge (need < 1e-3); enlarge the {width:.0} x {height:.0} nm window"
                )));
            }
            continue;
        }
        modes.push(ModeSolution {
            n_eff: lam.sqrt() / k0,
            polarization: pol,
            wavelength_nm,
            index: map.clone(),
            origin_nm: (
                -0.5 * width + 0.5 * opts.dx_nm,
                y_offset + 0.5 * opts.dy_nm,
            ),
            field,
            residual: resid,
        });
        if modes.len() == opts.n_modes {
            break;
        }
    }
    Ok(modes)
}

fn vertical_ratio(field: &[f64], nx: usize, ny: usize) -> f64 {
    let peak = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut edge = 0.0f64;
    for i in 0..nx {
        edge = edge.max(field[i * ny].abs()).max(field[i * ny + ny - 1].abs());
    }
    edge / peak
}

/// Deterministic pseudo-random start vectors.
fn start_block(n: usize, p: usize) -> DMatrix<f64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    DMatrix::from_fn(n, p, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    })
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Eigenvector of a small general matrix for a real eigenvalue by two steps
/// of inverse iteration.
fn small_eigenvector(h: &DMatrix<f64>, lam: f64, seed: usize) -> DVector<f64> {
    let p = h.nrows();
    let scale = h.norm().max(1e-300);
    let shifted = h - DMatrix::identity(p, p) * (lam + 1e-12 * scale);
    let lu = shifted.lu();
    let mut y = DVector::from_fn(p, |i, _| if i == seed { 1.0 } else { 0.1 / (1.0 + i as f64) });
    for _ in 0..3 {
        match lu.solve(&y) {
            Some(z) if z.iter().all(|v| v.is_finite()) => {
                let n = z.norm();
                y = z / n;
            }
            _ => break,
        }
    }
    y
}

/// Returns `(lambda, natural-layout vector, relative residual)` for the
/// Ritz pairs nearest `sigma`, sorted by `lambda` descending.
fn subspace_iteration(
    a: &Stencil,
    sigma: f64,
    lam_cut: f64,
    opts: &CrossSectionOptions,
) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    let n = a.nx * a.ny;
    let p = (opts.n_modes + 5).min(n);
    let (band, ord) = a.shifted_band(sigma);
    let lu = band.factor()?;
    let band_pos: Vec<usize> = (0..n).map(|idx| ord.map(idx / a.ny, idx % a.ny)).collect();
    let mut q = orthonormalize(start_block(n, p));
    let mut aq = DMatrix::<f64>::zeros(n, p);
    let mut last_resid = f64::INFINITY;
    let mut buf = vec![0.0; n];
    for it in 0..opts.max_iterations {
        // Power step with the inverse.
        let mut blk = vec![0.0; n * p];
        for c in 0..p {
            for (idx, v) in q.column(c).iter().enumerate() {
                blk[band_pos[idx] * p + c] = *v;
            }
        }
        lu.solve_block(&mut blk, p);
        let z = DMatrix::<f64>::from_fn(n, p, |idx, c| blk[band_pos[idx] * p + c]);
        q = orthonormalize(z);
        // Rayleigh-Ritz on A.
        for c in 0..p {
            let col: Vec<f64> = q.column(c).iter().copied().collect();
            a.apply(&col, &mut buf);
            aq.column_mut(c).copy_from_slice(&buf);
        }
        let h = q.transpose() * &aq;
        let eig = h.clone().complex_eigenvalues();
        let mut order: Vec<(f64, usize)> = eig.iter().enumerate().map(|(i, c)| (c.re, i)).collect();
        order.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut pairs = Vec::with_capacity(p);
        let mut worst = 0.0f64;
        let mut ritz = DMatrix::<f64>::zeros(n, p);
        for (k, &(lam, _)) in order.iter().enumerate() {
            let y = small_eigenvector(&h, lam, k);
            let x = &q * &y;
            let ax = &aq * &y;
            let xn = x.norm();
            let r = (&ax - &x * lam).norm() / (xn * lam.abs().max(1e-300));
            ritz.column_mut(k).copy_from(&(&x / xn));
            if k < opts.n_modes && lam > lam_cut {
                worst = worst.max(r);
            }
            pairs.push((lam, x.iter().copied().collect::<Vec<f64>>(), r));
        }
        last_resid = worst;
        if it >= 2 && worst < opts.tolerance {
            pairs.truncate(opts.n_modes.max(1) + 4);
            return Ok(pairs);
        }
        // Continue from the Ritz vectors.
        q = orthonormalize(ritz);
    }
    Err(Error::EigenNonConvergence {
        iterations: opts.max_iterations,
        residual: last_resid,
    })
}
