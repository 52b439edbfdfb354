use std::fmt::Write as _;

use rayon::prelude::*;

use super::grating::{analyze_grating, grating_dx};
use crate::error::{Error, Result};
use crate::fdtd::FdtdConfig;
use crate::geometry::{GratingSpec, LayerStack};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignTargets {
    pub angle_deg: f64,
    pub decay_per_mm: f64,
    pub angle_weight: f64,
    pub decay_weight: f64,
    /// Angle error that counts as one unit of objective.
    pub angle_scale_deg: f64,
    pub decay_scale_per_mm: f64,
}

impl DesignTargets {
    pub fn new(angle_deg: f64, decay_per_mm: f64) -> Self {
        Self {
            angle_deg,
            decay_per_mm,
            angle_weight: 1.0,
            decay_weight: 1.0,
            angle_scale_deg: 1.0,
            decay_scale_per_mm: 1.0,
        }
    }

    /// Angle error used when nothing radiates.
    pub const MISSING_ANGLE_ERROR_DEG: f64 = 90.0;

    pub fn objective(&self, angle_deg: Option<f64>, decay_per_mm: f64) -> f64 {
        let da = angle_deg.map_or(Self::MISSING_ANGLE_ERROR_DEG, |a| a - self.angle_deg) / self.angle_scale_deg;
        let dd = (decay_per_mm - self.decay_per_mm) / self.decay_scale_per_mm;
        self.angle_weight * da * da + self.decay_weight * dd * dd
    }
}

/// Closed ranges; a range with `lo == hi` pins that parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignBounds {
    pub pitch_nm: (f64, f64),
    pub fill: (f64, f64),
    pub thickness_nm: (f64, f64),
}

impl DesignBounds {
    /// `center * (1 -+ rel)` for every parameter.
    pub fn around(pitch_nm: f64, fill: f64, thickness_nm: f64, rel: f64) -> Self {
        let r = |c: f64| (c * (1.0 - rel), c * (1.0 + rel));
        Self {
            pitch_nm: r(pitch_nm),
            fill: r(fill),
            thickness_nm: r(thickness_nm),
        }
    }

    fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (name, (lo, hi)) in [("pitch_nm", self.pitch_nm), ("fill", self.fill), ("thickness_nm", self.thickness_nm)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                errs.push(format!("{name} range [{lo}, {hi}] is empty"));
            }
        }
        if !(self.fill.0 >= 0.0 && self.fill.1 <= 1.0) {
            errs.push(format!("fill range [{}, {}] must lie in [0, 1]", self.fill.0, self.fill.1));
        }
        if !(self.pitch_nm.0 > 0.0 && self.thickness_nm.0 > 0.0) {
            errs.push("pitch and thickness ranges must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    fn ranges(&self) -> [(f64, f64); 3] {
        [self.pitch_nm, self.fill, self.thickness_nm]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub pitch_nm: f64,
    pub fill: f64,
    pub thickness_nm: f64,
    pub angle_deg: Option<f64>,
    pub decay_per_mm: f64,
    /// `+inf` when the evaluation failed.
    pub objective: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DesignResult {
    pub best: GratingSpec,
    pub best_evaluation: Evaluation,
    pub targets: DesignTargets,
    /// Every evaluation, in the order made.
    pub log: Vec<Evaluation>,
}

impl DesignResult {
    /// Achieved minus target, `None` for the angle when nothing radiates.
    pub fn gap(&self) -> (Option<f64>, f64) {
        let e = &self.best_evaluation;
        (
            e.angle_deg.map(|a| a - self.targets.angle_deg),
            e.decay_per_mm - self.targets.decay_per_mm,
        )
    }

    pub fn gap_report(&self) -> String {
        let e = &self.best_evaluation;
        let (ga, gd) = self.gap();
        let mut s = String::new();
        let _ = writeln!(s, "target_angle_deg = {}", self.targets.angle_deg);
        let _ = writeln!(s, "achieved_angle_deg = {}", e.angle_deg.map_or("none".into(), |a| format!("{a:.4}")));
        let _ = writeln!(s, "angle_gap_deg = {}", ga.map_or("no radiated order".into(), |g| format!("{g:.4}")));
        let _ = writeln!(s, "target_decay_per_mm = {}", self.targets.decay_per_mm);
        let _ = writeln!(s, "achieved_decay_per_mm = {:.4}", e.decay_per_mm);
        let _ = writeln!(s, "decay_gap_per_mm = {gd:.4}");
        let _ = writeln!(s, "objective = {:.6}", e.objective);
        let _ = writeln!(s, "pitch_nm = {:.3}", e.pitch_nm);
        let _ = writeln!(s, "fill = {:.5}", e.fill);
        let _ = writeln!(s, "thickness_nm = {:.3}", e.thickness_nm);
        let _ = writeln!(s, "evaluations = {}", self.log.len());
        s
    }

    pub fn log_csv(&self) -> String {
        let mut s = String::from("pitch_nm,fill,thickness_nm,angle_deg,decay_per_mm,objective,error\n");
        for e in &self.log {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                e.pitch_nm,
                e.fill,
                e.thickness_nm,
                e.angle_deg.map_or(String::new(), |a| a.to_string()),
                e.decay_per_mm,
                e.objective,
                e.error.as_deref().unwrap_or("").replace(',', ";")
            );
        }
        s
    }
}

/// Search with FDTD grating analysis as the evaluator.
#[allow(clippy::too_many_arguments)]
pub fn design_search(
    targets: &DesignTargets,
    bounds: &DesignBounds,
    budget: usize,
    stack: &LayerStack,
    template: &GratingSpec,
    wavelength_nm: f64,
    config: &FdtdConfig,
) -> Result<DesignResult> {
    let min_feature = 2.0 * config.dx_nm;
    design_search_with(targets, bounds, budget, template, min_feature, |g| {
        let r = analyze_grating(stack, g, wavelength_nm, config)?;
        Ok((r.emission_angle_deg, r.decay_factor))
    })
}

type Point = [f64; 3];

fn spec_of(template: &GratingSpec, p: &Point) -> Result<GratingSpec> {
    GratingSpec::new(p[0], p[1] * p[0], p[2], template.tooth_material.clone(), template.n_periods)
}

/// Teeth and gaps at least `min_feature` wide, pitch at least eight cells.
fn feasible(p: &Point, min_feature: f64) -> bool {
    let (pitch, tooth) = (p[0], p[1] * p[0]);
    let dx = grating_dx(pitch, 0.5 * min_feature);
    pitch >= 8.0 * dx && (tooth == 0.0 || tooth >= min_feature) && pitch - tooth >= min_feature.min(pitch) && p[2] > 0.0
}

/// Coarse grid over the free parameters, then coordinate descent with
/// step halving, never exceeding `budget` evaluations. Candidates are
/// evaluated in parallel; the log order depends only on the inputs.
pub fn design_search_with<F>(
    targets: &DesignTargets,
    bounds: &DesignBounds,
    budget: usize,
    template: &GratingSpec,
    min_feature_nm: f64,
    evaluate: F,
) -> Result<DesignResult>
where
    F: Fn(&GratingSpec) -> Result<(Option<f64>, f64)> + Sync,
{
    bounds.validate()?;
    if budget == 0 {
        return Err(Error::InvalidInput("design search budget must be at least 1".into()));
    }
    let ranges = bounds.ranges();
    let free: Vec<usize> = (0..3).filter(|&d| ranges[d].1 > ranges[d].0).collect();
    let mut g = 1usize;
    if !free.is_empty() {
        while (g + 1).pow(free.len() as u32) <= budget / 2 {
            g += 1;
        }
    }
    let axis = |d: usize| -> Vec<f64> {
        let (lo, hi) = ranges[d];
        if g == 1 || hi == lo {
            vec![0.5 * (lo + hi)]
        } else {
            (0..g).map(|k| lo + (hi - lo) * k as f64 / (g - 1) as f64).collect()
        }
    };
    let mut grid = Vec::new();
    for a in axis(0) {
        for b in axis(1) {
            for c in axis(2) {
                grid.push([a, b, c]);
            }
        }
    }
    grid.retain(|p| feasible(p, min_feature_nm));
    if grid.is_empty() {
        return Err(Error::EmptyFeasibleSet(format!(
            "no coarse-grid candidate satisfies the {min_feature_nm} nm minimum feature within the bounds"
        )));
    }
    grid.truncate(budget);

    let run_batch = |pts: &[Point]| -> Vec<Evaluation> {
        pts.par_iter()
            .map(|p| {
                let res = spec_of(template, p).and_then(|s| evaluate(&s));
                match res {
                    Ok((angle, decay)) => Evaluation {
                        pitch_nm: p[0],
                        fill: p[1],
                        thickness_nm: p[2],
                        angle_deg: angle,
                        decay_per_mm: decay,
                        objective: targets.objective(angle, decay),
                        error: None,
                    },
                    Err(e) => Evaluation {
                        pitch_nm: p[0],
                        fill: p[1],
                        thickness_nm: p[2],
                        angle_deg: None,
                        decay_per_mm: f64::NAN,
                        objective: f64::INFINITY,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    };
    let mut log = run_batch(&grid);
    let mut seen: Vec<Point> = grid.clone();

    let best_index = |log: &[Evaluation]| {
        log.iter()
            .enumerate()
            .fold(0, |b, (i, e)| if e.objective < log[b].objective { i } else { b })
    };
    let mut current = {
        let e = &log[best_index(&log)];
        [e.pitch_nm, e.fill, e.thickness_nm]
    };
    let mut current_obj = log[best_index(&log)].objective;
    let mut steps: Vec<f64> = (0..3)
        .map(|d| {
            let w = ranges[d].1 - ranges[d].0;
            if g >= 2 { w / (2.0 * (g - 1) as f64) } else { w / 4.0 }
        })
        .collect();
    let mut halvings = 0;
    while log.len() < budget && !free.is_empty() && halvings < 8 {
        let mut improved = false;
        for &d in &free {
            if log.len() >= budget {
                break;
            }
            let mut cands = Vec::new();
            for sign in [-1.0, 1.0] {
                let mut p = current;
                p[d] = (p[d] + sign * steps[d]).clamp(ranges[d].0, ranges[d].1);
                let dup = seen.iter().any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs())));
                if !dup && feasible(&p, min_feature_nm) {
                    cands.push(p);
                }
            }
            cands.truncate(budget - log.len());
            if cands.is_empty() {
                continue;
            }
            let evals = run_batch(&cands);
            seen.extend(cands.iter().copied());
            for (p, e) in cands.iter().zip(&evals) {
                if e.objective < current_obj {
                    current_obj = e.objective;
                    current = *p;
                    improved = true;
                }
            }
            log.extend(evals);
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s *= 0.5);
            halvings += 1;
        }
    }

    let bi = best_index(&log);
    let best_evaluation = log[bi].clone();
    if !best_evaluation.objective.is_finite() {
        return Err(Error::EmptyFeasibleSet(format!(
            "all {} candidates failed; first error: {}",
            log.len(),
            log[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    let best = spec_of(template, &[best_evaluation.pitch_nm, best_evaluation.fill, best_evaluation.thickness_nm])?;
    Ok(DesignResult {
        best,
        best_evaluation,
        targets: *targets,
        log,
    })
}
