//! Layer stacks, waveguide cross-sections and grating sections, and their
//! rasterization onto rectangular index grids.
//!
//! Coordinates are in nm. `x` is the horizontal grid axis (lateral for a
//! cross-section, propagation for a longitudinal section) and `y` is height,
//! measured from the bottom of the lowest layer. Cells take the index of the
//! material at their center unless subpixel averaging is requested.

use crate::error::{Error, Result};
use crate::materials::Material;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub material: Material,
    pub thickness_nm: f64,
}

impl Layer {
    pub fn new(material: Material, thickness_nm: f64) -> Self {
        Self {
            material,
            thickness_nm,
        }
    }
}

/// Contiguous layers listed bottom to top, with a semi-infinite cover above.
///
/// The bottom layer is treated as the substrate: mode solvers extend it
/// downward without limit, rasterizers fill everything below the stack with it.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<Layer>,
    cover: Material,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>, cover: Material) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Geometry("layer stack is empty".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if !(l.thickness_nm > 0.0) || !l.thickness_nm.is_finite() {
                return Err(Error::Geometry(format!(
                    "layer {i} ({}) has non-positive thickness {}",
                    l.material.name, l.thickness_nm
                )));
            }
        }
        Ok(Self { layers, cover })
    }

    /// Builds a stack from `(material name, thickness)` pairs using the
    /// built-in material table.
    pub fn from_names(layers: &[(&str, f64)], cover: &str, wavelength_nm: f64) -> Result<Self> {
        let layers = layers
            .iter()
            .map(|&(name, t)| Ok(Layer::new(Material::lookup(name, wavelength_nm)?, t)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, Material::lookup(cover, wavelength_nm)?)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn cover(&self) -> &Material {
        &self.cover
    }

    pub fn total_height(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_nm).sum()
    }

    /// `[bottom, top)` of every layer.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut y = 0.0;
        self.layers
            .iter()
            .map(|l| {
                let b = (y, y + l.thickness_nm);
                y += l.thickness_nm;
                b
            })
            .collect()
    }

    /// Index at height `y`; below zero is substrate, at or above the top is cover.
    pub fn index_at(&self, y: f64) -> f64 {
        if y < 0.0 {
            return self.layers[0].material.refractive_index;
        }
        let mut top = 0.0;
        for l in &self.layers {
            top += l.thickness_nm;
            if y < top {
                return l.material.refractive_index;
            }
        }
        self.cover.refractive_index
    }

    pub fn with_cover(&self, cover: Material) -> Self {
        Self {
            layers: self.layers.clone(),
            cover,
        }
    }

    /// Same stack with the material of layer `i` replaced.
    pub fn with_layer_material(&self, i: usize, material: Material) -> Self {
        let mut s = self.clone();
        s.layers[i].material = material;
        s
    }

    pub fn max_index(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.material.refractive_index)
            .fold(self.cover.refractive_index, f64::max)
    }
}

/// Channel waveguide: one layer of the stack is patterned to `core_width_nm`
/// and flanked by `side_material`; `top_material` fills the half-space above
/// the stack.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveguideCrossSection {
    pub stack: LayerStack,
    pub core_width_nm: f64,
    pub core_layer: usize,
    pub side_material: Material,
    pub top_material: Material,
}

impl WaveguideCrossSection {
    pub fn new(
        stack: LayerStack,
        core_width_nm: f64,
        core_layer: usize,
        side_material: Material,
        top_material: Material,
    ) -> Result<Self> {
        if !(core_width_nm > 0.0) {
            return Err(Error::Geometry(format!(
                "core width must be positive, got {core_width_nm}"
            )));
        }
        let Some(core) = stack.layers().get(core_layer) else {
            return Err(Error::Geometry(format!(
                "core layer {core_layer} out of range for a {}-layer stack",
                stack.layers().len()
            )));
        };
        if core.material.refractive_index <= side_material.refractive_index {
            return Err(Error::Geometry(format!(
                "core index {} must exceed side index {}",
                core.material.refractive_index, side_material.refractive_index
            )));
        }
        Ok(Self {
            stack,
            core_width_nm,
            core_layer,
            side_material,
            top_material,
        })
    }

    pub fn with_width(&self, core_width_nm: f64) -> Result<Self> {
        Self::new(
            self.stack.clone(),
            core_width_nm,
            self.core_layer,
            self.side_material.clone(),
            self.top_material.clone(),
        )
    }

    pub fn core_index(&self) -> f64 {
        self.stack.layers()[self.core_layer].material.refractive_index
    }

    pub fn core_bounds(&self) -> (f64, f64) {
        self.stack.bounds()[self.core_layer]
    }

    /// Vertical stack through the center of the core.
    pub fn core_stack(&self) -> LayerStack {
        self.stack.with_cover(self.top_material.clone())
    }

    /// Vertical stack beside the core.
    pub fn side_stack(&self) -> LayerStack {
        self.stack
            .with_layer_material(self.core_layer, self.side_material.clone())
            .with_cover(self.top_material.clone())
    }

    /// Indices of the media that touch the core. A guided mode must have an
    /// effective index above all of them.
    pub fn adjacent_indices(&self) -> Vec<f64> {
        let layers = self.stack.layers();
        let below = if self.core_layer == 0 {
            layers[0].material.refractive_index
        } else {
            layers[self.core_layer - 1].material.refractive_index
        };
        let above = layers
            .get(self.core_layer + 1)
            .map(|l| l.material.refractive_index)
            .unwrap_or(self.top_material.refractive_index);
        vec![below, above, self.side_material.refractive_index]
    }
}

/// Periodic rectangular teeth sitting on top of a waveguide core.
#[derive(Debug, Clone, PartialEq)]
pub struct GratingSpec {
    pub pitch_nm: f64,
    pub tooth_width_nm: f64,
    pub tooth_thickness_nm: f64,
    pub tooth_material: Material,
    pub n_periods: usize,
}

impl GratingSpec {
    pub fn new(
        pitch_nm: f64,
        tooth_width_nm: f64,
        tooth_thickness_nm: f64,
        tooth_material: Material,
        n_periods: usize,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        if !(pitch_nm > 0.0) {
            problems.push(format!("pitch must be positive, got {pitch_nm}"));
        }
        if !(tooth_width_nm >= 0.0 && tooth_width_nm <= pitch_nm) {
            problems.push(format!(
                "tooth width {tooth_width_nm} must lie in [0, pitch={pitch_nm}]"
            ));
        }
        if !(tooth_thickness_nm > 0.0) {
            problems.push(format!(
                "tooth thickness must be positive, got {tooth_thickness_nm}"
            ));
        }
        if n_periods == 0 {
            problems.push("grating needs at least one period".into());
        }
        if !problems.is_empty() {
            return Err(Error::Geometry(problems.join("; ")));
        }
        Ok(Self {
            pitch_nm,
            tooth_width_nm,
            tooth_thickness_nm,
            tooth_material,
            n_periods,
        })
    }

    pub fn fill_factor(&self) -> f64 {
        self.tooth_width_nm / self.pitch_nm
    }

    pub fn length_nm(&self) -> f64 {
        self.pitch_nm * self.n_periods as f64
    }
}

/// Refractive index sampled on an `nx` by `ny` grid of cells. Storage is
/// column-major in the sense that `y` varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap2D {
    pub nx: usize,
    pub ny: usize,
    pub dx_nm: f64,
    pub dy_nm: f64,
    values: Vec<f64>,
}

impl IndexMap2D {
    pub fn from_fn(
        nx: usize,
        ny: usize,
        dx_nm: f64,
        dy_nm: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_spacing(dx_nm, dy_nm)?;
        if nx == 0 || ny == 0 {
            return Err(Error::Geometry(format!("empty grid {nx} x {ny}")));
        }
        let mut values = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                values.push(f(i, j));
            }
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= 1.0)) {
            return Err(Error::Geometry(format!("cell index {bad} below 1")));
        }
        Ok(Self {
            nx,
            ny,
            dx_nm,
            dy_nm,
            values,
        })
    }

    pub fn uniform(nx: usize, ny: usize, dx_nm: f64, dy_nm: f64, n: f64) -> Result<Self> {
        Self::from_fn(nx, ny, dx_nm, dy_nm, |_, _| n)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ny + j]
    }

    pub fn set(&mut self, i: usize, j: usize, n: f64) {
        assert!(n >= 1.0, "refractive index below 1");
        self.values[i * self.ny + j] = n;
    }

    /// Cells of column `i`, bottom to top.
    pub fn column(&self, i: usize) -> &[f64] {
        &self.values[i * self.ny..(i + 1) * self.ny]
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        (0..self.nx).map(|i| self.get(i, j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn width_nm(&self) -> f64 {
        self.nx as f64 * self.dx_nm
    }

    pub fn height_nm(&self) -> f64 {
        self.ny as f64 * self.dy_nm
    }

    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx_nm
    }

    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy_nm
    }

    /// Mirror image along x.
    pub fn flipped_x(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.nx {
            let src = self.column(self.nx - 1 - i);
            out.values[i * self.ny..(i + 1) * self.ny].copy_from_slice(src);
        }
        out
    }

    /// Distinct index values, sorted.
    pub fn distinct_indices(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn max_index(&self) -> f64 {
        self.values.iter().copied().fold(1.0, f64::max)
    }
}

fn check_spacing(dx: f64, dy: f64) -> Result<()> {
    if !(dx > 0.0 && dy > 0.0) || !dx.is_finite() || !dy.is_finite() {
        return Err(Error::Geometry(format!(
            "grid spacings must be positive, got dx={dx}, dy={dy}"
        )));
    }
    Ok(())
}

/// How cells are assigned an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellRule {
    /// Index of the material at the cell center.
    #[default]
    Center,
    /// Permittivity averaged over an 8 x 8 sub-sample of the cell.
    Averaged,
}

const SUBSAMPLES: usize = 8;

fn raster(
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    rule: CellRule,
    index_at: impl Fn(f64, f64) -> f64,
) -> Result<IndexMap2D> {
    IndexMap2D::from_fn(nx, ny, dx, dy, |i, j| match rule {
        CellRule::Center => index_at((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy),
        CellRule::Averaged => {
            let mut eps = 0.0;
            for a in 0..SUBSAMPLES {
                for b in 0..SUBSAMPLES {
                    let x = (i as f64 + (a as f64 + 0.5) / SUBSAMPLES as f64) * dx;
                    let y = (j as f64 + (b as f64 + 0.5) / SUBSAMPLES as f64) * dy;
                    eps += index_at(x, y).powi(2);
                }
            }
            (eps / (SUBSAMPLES * SUBSAMPLES) as f64).sqrt()
        }
    })
}

fn cell_count(extent: f64, spacing: f64) -> usize {
    // Tolerate round-off so that 4000 nm / 20 nm is 200 cells, not 201.
    ((extent / spacing) - 1e-9).ceil().max(1.0) as usize
}

/// Laterally uniform stack on a `domain_width_nm` by `domain_height_nm`
/// window starting at the bottom of the stack. Cells above the stack take the
/// cover index.
pub fn rasterize_stack(
    stack: &LayerStack,
    dx_nm: f64,
    dy_nm: f64,
    domain_width_nm: f64,
    domain_height_nm: f64,
) -> Result<IndexMap2D> {
    rasterize_stack_with(stack, dx_nm, dy_nm, domain_width_nm, domain_height_nm, CellRule::Center)
}

pub fn rasterize_stack_with(
    stack: &LayerStack,
    dx_nm: f64,
    dy_nm: f64,
    domain_width_nm: f64,
    domain_height_nm: f64,
    rule: CellRule,
) -> Result<IndexMap2D> {
    check_spacing(dx_nm, dy_nm)?;
    if domain_height_nm < stack.total_height() {
        return Err(Error::Geometry(format!(
            "domain height {domain_height_nm} nm is below stack height {} nm",
            stack.total_height()
        )));
    }
    let nx = cell_count(domain_width_nm, dx_nm);
    let ny = cell_count(domain_height_nm, dy_nm);
    raster(nx, ny, dx_nm, dy_nm, rule, |_, y| stack.index_at(y))
}

/// Lead-in, lead-out and height of a longitudinal grating section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionWindow {
    pub lead_in_nm: f64,
    pub lead_out_nm: f64,
    pub height_nm: f64,
}

impl SectionWindow {
    pub fn width_nm(&self, grating: &GratingSpec) -> f64 {
        self.lead_in_nm + grating.length_nm() + self.lead_out_nm
    }
}

/// Propagation-by-height index map of a grating. Teeth occupy the first
/// `tooth_thickness_nm` above layer `core_layer`, displacing whatever lies
/// there, starting `lead_in_nm` from the left edge.
pub fn rasterize_grating_section(
    stack: &LayerStack,
    core_layer: usize,
    grating: &GratingSpec,
    dx_nm: f64,
    dy_nm: f64,
    window: &SectionWindow,
) -> Result<IndexMap2D> {
    rasterize_grating_section_with(stack, core_layer, grating, dx_nm, dy_nm, window, CellRule::Center)
}

pub fn rasterize_grating_section_with(
    stack: &LayerStack,
    core_layer: usize,
    grating: &GratingSpec,
    dx_nm: f64,
    dy_nm: f64,
    window: &SectionWindow,
    rule: CellRule,
) -> Result<IndexMap2D> {
    check_spacing(dx_nm, dy_nm)?;
    if dx_nm > grating.pitch_nm / 8.0 {
        return Err(Error::Resolution(format!(
            "dx = {dx_nm} nm exceeds pitch/8 = {} nm",
            grating.pitch_nm / 8.0
        )));
    }
    if grating.tooth_width_nm > 0.0 && grating.tooth_width_nm < 2.0 * dx_nm {
        return Err(Error::Resolution(format!(
            "tooth width {} nm is under two cells of {dx_nm} nm",
            grating.tooth_width_nm
        )));
    }
    let bounds = stack.bounds();
    let Some(&(_, core_top)) = bounds.get(core_layer) else {
        return Err(Error::Geometry(format!("core layer {core_layer} out of range")));
    };
    let tooth_top = core_top + grating.tooth_thickness_nm;
    if window.height_nm < stack.total_height().max(tooth_top) {
        return Err(Error::Geometry(format!(
            "section height {} nm does not contain the stack",
            window.height_nm
        )));
    }
    let x0 = window.lead_in_nm;
    let x1 = x0 + grating.length_nm();
    let n_tooth = grating.tooth_material.refractive_index;
    let in_tooth = |x: f64, y: f64| {
        if grating.tooth_width_nm <= 0.0 || y < core_top || y >= tooth_top || x < x0 || x >= x1 {
            return false;
        }
        (x - x0).rem_euclid(grating.pitch_nm) < grating.tooth_width_nm
    };
    let nx = cell_count(window.width_nm(grating), dx_nm);
    let ny = cell_count(window.height_nm, dy_nm);
    raster(nx, ny, dx_nm, dy_nm, rule, |x, y| {
        if in_tooth(x, y) {
            n_tooth
        } else {
            stack.index_at(y)
        }
    })
}

/// Cross-section map with the core centered laterally and the core layer
/// centered vertically in a `width_nm` by `height_nm` window.
///
/// Returns the map and the height of the window bottom in stack coordinates.
pub fn rasterize_cross_section(
    cs: &WaveguideCrossSection,
    width_nm: f64,
    height_nm: f64,
    dx_nm: f64,
    dy_nm: f64,
    rule: CellRule,
) -> Result<(IndexMap2D, f64)> {
    check_spacing(dx_nm, dy_nm)?;
    let nx = cell_count(width_nm, dx_nm);
    let ny = cell_count(height_nm, dy_nm);
    let (c0, c1) = cs.core_bounds();
    // Snap the window so the core layer boundaries fall on cell faces when
    // the thickness is a whole number of cells.
    let core_cells = ((c1 - c0) / dy_nm).round() as usize;
    let below_cells = (ny.saturating_sub(core_cells)) / 2;
    let y_offset = c0 - below_cells as f64 * dy_nm;
    let x_mid = nx as f64 * dx_nm / 2.0;
    let half = cs.core_width_nm / 2.0;
    let core_n = cs.core_index();
    let side_n = cs.side_material.refractive_index;
    let top_n = cs.top_material.refractive_index;
    let stack_top = cs.stack.total_height();
    let map = raster(nx, ny, dx_nm, dy_nm, rule, |x, y| {
        let ys = y + y_offset;
        if ys >= stack_top {
            top_n
        } else if ys >= c0 && ys < c1 {
            if (x - x_mid).abs() < half {
                core_n
            } else {
                side_n
            }
        } else {
            cs.stack.index_at(ys)
        }
    })?;
    Ok((map, y_offset))
}
