use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{
    BridgeParams, ConfigFile, DesignParams, GratingParams, Job, ModeParams, RunConfig, SpectrumKind, SpectrumParams,
    Structure, TaperParams,
};
use crate::devices::{analyze_grating_with, bridge_transmission_with, design_search_with, BridgeSpec, DesignBounds, DesignTargets};
use crate::error::{Error, Result};
use crate::fdtd::FdtdConfig;
use crate::modesolver::{
    evanescent_decay_length, solve_cross_section, solve_slab, taper_loss, DecayLength, Polarization, TaperProfile,
};
use crate::spectroscopy::{
    adaptive_grid, evanescent_spectrum, load_line_data, mot_probe_spectrum, satabs_features, satabs_spectrum,
    uniform_grid, vapor_absorption_spectrum, IsotopeSelection,
};

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";

/// One unit of parallel work and how it ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobRecord {
    pub index: usize,
    pub label: String,
    pub status: String,
    pub elapsed_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl JobRecord {
    fn new<T>(index: usize, label: String, elapsed_s: f64, r: &Result<T>, converged: Option<bool>) -> Self {
        Self {
            index,
            label,
            status: if r.is_ok() { "ok" } else { "error" }.into(),
            elapsed_s,
            converged: if r.is_ok() { converged } else { None },
            error: r.as_ref().err().map(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestHeader {
    pub toolkit: String,
    pub version: String,
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub workers: usize,
    pub elapsed_s: f64,
    pub outputs: Vec<String>,
}

/// Written once per invocation as `manifest.toml`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub manifest: ManifestHeader,
    pub jobs: Vec<JobRecord>,
    pub config: ConfigFile,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// Files written under the output directory.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// CSV body behind the schema header.
    fn csv(&mut self, name: &str, command: &str, body: &str) -> Result<()> {
        self.write(name, &format!("# schema_version = {CSV_SCHEMA_VERSION}\n# command = {command}\n{body}"))
    }
}

/// Result of [`execute`].
#[derive(Debug, Clone)]
pub struct Execution {
    pub exit_code: i32,
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

/// Runs the job, writes outputs and the manifest into `config.out_dir`.
/// Driver failures are recorded in the manifest and mapped to the exit code;
/// only failures to write the output directory itself return `Err`.
pub fn execute(config: &RunConfig) -> Result<Execution> {
    let start = Instant::now();
    std::fs::create_dir_all(&config.out_dir)?;
    let mut out = Outputs {
        dir: config.out_dir.clone(),
        written: Vec::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {} workers: {e}", config.workers)))?;
    let workers = pool.current_num_threads();
    let mut jobs = Vec::new();
    let result = pool.install(|| dispatch(config, &mut out, &mut jobs));
    let (status, exit_code, error_kind, error) = match &result {
        Ok(()) => ("ok", 0, None, None),
        Err(e) => (
            "error",
            e.exit_code(),
            Some(format!("{:?}", e.kind()).to_lowercase()),
            Some(e.to_string()),
        ),
    };
    if let Err(Error::Io(e)) = result {
        return Err(Error::Io(e));
    }
    let manifest = RunManifest {
        manifest: ManifestHeader {
            toolkit: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: config.command().to_string(),
            status: status.into(),
            exit_code,
            error_kind,
            error,
            workers,
            elapsed_s: start.elapsed().as_secs_f64(),
            outputs: out.written.clone(),
        },
        jobs,
        config: config.to_file(),
    };
    let manifest_path = config.out_dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, manifest.to_toml())?;
    Ok(Execution {
        exit_code,
        manifest,
        manifest_path,
    })
}

/// The `[config]` table of a manifest, parsed back into a run config.
pub fn config_from_manifest(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        line: 0,
        message: e.message().to_string(),
    })?;
    let cfg = table
        .remove("config")
        .ok_or_else(|| Error::InvalidInput(format!("{} has no [config] table", path.display())))?;
    let cfg = toml::to_string(&cfg).expect("table serializes");
    super::config::parse_config_str(&cfg, &Default::default())
}

fn dispatch(config: &RunConfig, out: &mut Outputs, jobs: &mut Vec<JobRecord>) -> Result<()> {
    let fdtd = config.fdtd.to_config();
    match &config.job {
        Job::Mode(p) => run_mode(p, out, jobs),
        Job::Taper(p) => run_taper(p, out, jobs),
        Job::BridgeSweep(p) => run_bridge(p, &fdtd, out, jobs),
        Job::Grating(p) => run_grating(p, &fdtd, out, jobs),
        Job::DesignSearch(p) => run_design(p, &fdtd, config.seed, out, jobs),
        Job::Spectrum(p) => run_spectrum(p, out, jobs),
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (Result<T>, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64())
}

fn run_mode(p: &ModeParams, out: &mut Outputs, jobs: &mut Vec<JobRecord>) -> Result<()> {
    let pol = p.polarization()?;
    let (modes, secs) = timed(|| match p.structure {
        Structure::Slab => solve_slab(&p.stack()?, p.wavelength_nm, pol),
        Structure::Ridge => solve_cross_section(
            &p.cross_section()?,
            p.wavelength_nm,
            pol,
            (p.window_width_nm, p.window_height_nm),
            p.dx_nm,
            p.dy_nm,
        ),
    }
    .and_then(|m| {
        if m.is_empty() {
            Err(Error::NoGuidedMode(format!("no {pol} mode at {} nm", p.wavelength_nm)))
        } else {
            Ok(m)
        }
    }));
    jobs.push(JobRecord::new(0, format!("{:?} modes", p.structure).to_lowercase(), secs, &modes, None));
    let modes = modes?;
    let mut s = String::from("index,n_eff,polarization,decay_length_nm,vacuum_fraction,residual\n");
    for (k, m) in modes.iter().enumerate() {
        let decay = match evanescent_decay_length(m) {
            Ok(DecayLength::Finite(d)) => d.to_string(),
            Ok(DecayLength::Unbounded) => "unbounded".into(),
            Err(_) => String::new(),
        };
        let _ = writeln!(s, "{k},{},{},{decay},{},{:e}", m.n_eff, m.polarization, m.vacuum_fraction() + 0.0, m.residual);
    }
    out.csv("modes.csv", "mode", &s)?;
    for (k, m) in modes.iter().enumerate() {
        out.csv(&format!("mode_{k}.csv"), "mode", &m.to_csv())?;
    }
    Ok(())
}

fn run_taper(p: &TaperParams, out: &mut Outputs, jobs: &mut Vec<JobRecord>) -> Result<()> {
    let (loss, secs) = timed(|| {
        let t = TaperProfile::new(p.start_width_nm, p.end_width_nm, p.length_um, p.segments)?;
        taper_loss(&p.template()?, &t, p.wavelength_nm)
    });
    jobs.push(JobRecord::new(0, "taper".into(), secs, &loss, None));
    let loss = loss?;
    let s = format!(
        "start_width_nm,end_width_nm,length_um,segments,loss\n{},{},{},{},{:e}\n",
        p.start_width_nm, p.end_width_nm, p.length_um, p.segments, loss
    );
    out.csv("taper.csv", "taper", &s)
}

fn run_bridge(p: &BridgeParams, fdtd: &FdtdConfig, out: &mut Outputs, jobs: &mut Vec<JobRecord>) -> Result<()> {
    let spec = BridgeSpec::new(p.waveguide_width_nm, 0.0, p.wavelength_nm)?;
    let layout = p.layout();
    let runs: Vec<_> = p
        .wall_lengths_um
        .par_iter()
        .map(|&l| timed(|| bridge_transmission_with(&spec.with_wall_length(l), fdtd, &layout)))
        .collect();
    let mut s = String::from("wall_length_um,efficiency,reflection,converged\n");
    let mut first_err = None;
    for (k, (l, (r, secs))) in p.wall_lengths_um.iter().zip(runs).enumerate() {
        jobs.push(JobRecord::new(
            k,
            format!("wall_length_um={l}"),
            secs,
            &r,
            r.as_ref().ok().map(|r| r.meta.converged),
        ));
        match r {
            Ok(r) => {
                let _ = writeln!(s, "{l},{:.12},{:e},{}", r.efficiency, r.reflection, r.meta.converged);
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    out.csv("bridge_sweep.csv", "bridge-sweep", &s)?;
    first_err.map_or(Ok(()), Err)
}

fn run_grating(p: &GratingParams, fdtd: &FdtdConfig, out: &mut Outputs, jobs: &mut Vec<JobRecord>) -> Result<()> {
    let (r, secs) = timed(|| analyze_grating_with(&p.stack()?, &p.grating()?, p.wavelength_nm, fdtd, &p.options()));
    jobs.push(JobRecord::new(0, "grating".into(), secs, &r, r.as_ref().ok().map(|r| r.meta.converged)));
    let r = r?;
    let mut s = String::from("quantity,value\n");
    for line in r.to_report().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            let _ = writeln!(s, "{},{}", k.trim(), v.trim());
        }
    }
    out.csv("grating_summary.csv", "grating", &s)?;
    out.csv("grating_samples.csv", "grating", &r.samples_csv())?;
    out.csv("far_field.csv", "grating", &r.far_field.to_csv())?;
    if let Some(snap) = &r.snapshot {
        out.csv(&format!("snapshot_{}.csv", snap.period), "grating", &snap.to_csv())?;
    }
    Ok(())
}

fn candidate_key(g: &crate::geometry::GratingSpec) -> [u64; 3] {
    [g.pitch_nm.to_bits(), g.tooth_width_nm.to_bits(), g.tooth_thickness_nm.to_bits()]
}

/// Gaussian noise for one candidate evaluation; a pure function of the run
/// seed and the candidate, so results do not depend on evaluation order.
fn evaluation_noise(seed: u64, key: [u64; 3], salt: u64, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    let mut bytes = [0u8; 32];
    for (chunk, word) in bytes.chunks_mut(8).zip([seed, key[0], key[1], key[2]]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(bytes);
    rng.set_stream(salt);
    Normal::new(0.0, sd).expect("finite sd").sample(&mut rng)
}

fn run_design(p: &DesignParams, fdtd: &FdtdConfig, seed: u64, out: &mut Outputs, jobs: &mut Vec<JobRecord>) -> Result<()> {
    let stack = p.grating.stack()?;
    let template = p.grating.grating()?;
    let opts = p.grating.options();
    let targets = DesignTargets {
        angle_deg: p.target_angle_deg,
        decay_per_mm: p.target_decay_per_mm,
        angle_weight: p.angle_weight,
        decay_weight: p.decay_weight,
        angle_scale_deg: p.angle_scale_deg,
        decay_scale_per_mm: p.decay_scale_per_mm,
    };
    let bounds = DesignBounds {
        pitch_nm: (p.pitch_nm[0], p.pitch_nm[1]),
        fill: (p.fill[0], p.fill[1]),
        thickness_nm: (p.thickness_nm[0], p.thickness_nm[1]),
    };
    let min_feature = if p.min_feature_nm > 0.0 { p.min_feature_nm } else { 2.0 * fdtd.dx_nm };
    let timings: Mutex<Vec<([u64; 3], f64, Option<bool>)>> = Mutex::new(Vec::new());
    let noise = |key: [u64; 3], sd: f64, salt: u64| evaluation_noise(seed, key, salt, sd);
    let result = design_search_with(&targets, &bounds, p.budget, &template, min_feature, |g| {
        let key = candidate_key(g);
        let (r, secs) = timed(|| analyze_grating_with(&stack, g, p.grating.wavelength_nm, fdtd, &opts));
        timings
            .lock()
            .expect("timing log")
            .push((key, secs, r.as_ref().ok().map(|r| r.meta.converged)));
        let r = r?;
        let angle = r.emission_angle_deg.map(|a| a + noise(key, p.noise_angle_deg, 0));
        Ok((angle, r.decay_factor + noise(key, p.noise_decay_per_mm, 1)))
    });
    let timings = timings.into_inner().expect("timing log");
    let r = match result {
        Ok(r) => r,
        Err(e) => {
            for (k, (_, secs, conv)) in timings.iter().enumerate() {
                jobs.push(JobRecord {
                    index: k,
                    label: format!("candidate {k}"),
                    status: "unknown".into(),
                    elapsed_s: *secs,
                    converged: *conv,
                    error: None,
                });
            }
            return Err(e);
        }
    };
    for (k, e) in r.log.iter().enumerate() {
        let g = crate::geometry::GratingSpec {
            pitch_nm: e.pitch_nm,
            tooth_width_nm: e.fill * e.pitch_nm,
            tooth_thickness_nm: e.thickness_nm,
            ..template.clone()
        };
        let hit = timings.iter().find(|t| t.0 == candidate_key(&g));
        jobs.push(JobRecord {
            index: k,
            label: format!("pitch_nm={:.3} fill={:.5} thickness_nm={:.3}", e.pitch_nm, e.fill, e.thickness_nm),
            status: if e.error.is_none() { "ok" } else { "error" }.into(),
            elapsed_s: hit.map_or(0.0, |t| t.1),
            converged: hit.and_then(|t| t.2),
            error: e.error.clone(),
        });
    }
    out.csv("design_log.csv", "design-search", &r.log_csv())?;
    let mut s = String::from("quantity,value\n");
    for line in r.gap_report().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            let _ = writeln!(s, "{},{}", k.trim(), v.trim());
        }
    }
    out.csv("design_best.csv", "design-search", &s)
}

fn run_spectrum(p: &SpectrumParams, out: &mut Outputs, jobs: &mut Vec<JobRecord>) -> Result<()> {
    let (r, secs) = timed(|| {
        let lines = load_line_data(IsotopeSelection::Natural)?;
        let vapor = p.vapor()?;
        let cold = p.cold()?;
        let h = p.grid.half_span_hz;
        let grid = if p.grid.step_hz > 0.0 {
            uniform_grid(-h, h, p.grid.step_hz)?
        } else {
            let mut centers: Vec<f64> = satabs_features(&lines)?.iter().map(|f| f.detuning_hz).collect();
            if p.kind == SpectrumKind::Mot {
                let shifted: Vec<f64> = centers.iter().map(|c| c + cold.center_detuning_hz).collect();
                centers.extend(shifted);
            }
            adaptive_grid(h, &centers)?
        };
        let spectrum = match p.kind {
            SpectrumKind::Vapor => vapor_absorption_spectrum(&vapor, &lines, &grid)?,
            SpectrumKind::Mot => mot_probe_spectrum(&vapor, &cold, &lines, &grid)?,
            SpectrumKind::Satabs => satabs_spectrum(&vapor, &lines, p.pump_saturation, &grid)?,
            SpectrumKind::Evanescent => {
                let modes = solve_slab(&p.probe.stack()?, p.probe.wavelength_nm, Polarization::TE)?;
                let mode = modes
                    .first()
                    .ok_or_else(|| Error::NoGuidedMode("probe stack guides no TE mode".into()))?;
                evanescent_spectrum(mode, &vapor, &lines, &grid, p.probe.interaction_length_mm)?
            }
        };
        let features = if p.kind == SpectrumKind::Satabs {
            let sel: Vec<_> = lines
                .iter()
                .filter(|d| match vapor.isotopes {
                    IsotopeSelection::Natural => true,
                    IsotopeSelection::Single(i) => d.isotope == i,
                })
                .cloned()
                .collect();
            Some(satabs_features(&sel)?)
        } else {
            None
        };
        Ok((spectrum, features))
    });
    jobs.push(JobRecord::new(0, format!("{} spectrum", p.kind.as_str()), secs, &r, None));
    let (spectrum, features) = r?;
    let csv = spectrum.to_csv();
    let (first, rest) = csv.split_once('\n').unwrap_or((&csv, ""));
    out.write("spectrum.csv", &format!("{first}\n# command = spectrum\n{rest}"))?;
    if let Some(f) = features {
        let mut s = String::from("isotope,ground_f,kind,f_prime_a,f_prime_b,detuning_hz,weight\n");
        for x in &f {
            let (kind, a, b) = match x.kind {
                crate::spectroscopy::FeatureKind::Lamb { f_prime } => ("lamb", f_prime, f_prime),
                crate::spectroscopy::FeatureKind::Crossover { f_prime_a, f_prime_b } => ("crossover", f_prime_a, f_prime_b),
            };
            let _ = writeln!(s, "{},{},{kind},{a},{b},{},{}", x.isotope, x.ground_f, x.detuning_hz, x.weight);
        }
        out.csv("satabs_features.csv", "spectrum", &s)?;
    }
    Ok(())
}
