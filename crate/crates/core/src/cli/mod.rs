//! Command-line front end: config parsing, job dispatch, CSV outputs and
//! run manifests.
//!
//! ```text
//! picatom <mode|taper|bridge-sweep|grating|design-search|spectrum>
//!         [--config FILE] [--out DIR] [--workers N] [--seed N] [--set KEY=VALUE]...
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error.

mod config;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use config::{
    parse_config, parse_config_str, BridgeParams, ColdSection, CommandName, ConfigFile, DesignParams, FdtdSection,
    GratingParams, GridSection, Job, LayerEntry, ModeParams, Overrides, ProbeSection, RunConfig, SpectrumKind,
    SpectrumParams, Structure, TaperParams, VaporSection, DEFAULT_OUT_DIR,
};
pub use run::{
    config_from_manifest, execute, Execution, JobRecord, ManifestHeader, RunManifest, CSV_SCHEMA_VERSION,
    MANIFEST_FILE,
};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "picatom", version, about = "Photonic bridge, grating and rubidium spectroscopy simulations")]
pub struct Cli {
    pub command: CommandName,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Seed for design-search evaluation noise.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override one config key, e.g. `--set bridge-sweep.wall_lengths_um=[0,7]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Parses `args` (program name first), runs, and returns the exit code.
/// Errors go to stderr as one `error[kind] code=N: message` line.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let overrides = Overrides {
        command: Some(cli.command),
        out_dir: cli.out,
        workers: cli.workers,
        seed: cli.seed,
        set: cli.set,
    };
    let result = parse_config(cli.config.as_deref(), &overrides).and_then(|cfg| execute(&cfg));
    match result {
        Ok(ex) => {
            if let Some(msg) = &ex.manifest.manifest.error {
                report(ex.exit_code, ex.manifest.manifest.error_kind.as_deref().unwrap_or("unknown"), msg);
            } else {
                println!("{}", ex.manifest_path.display());
            }
            ex.exit_code
        }
        Err(e) => {
            report(e.exit_code(), &format!("{:?}", e.kind()).to_lowercase(), &error_text(&e));
            e.exit_code()
        }
    }
}

fn error_text(e: &Error) -> String {
    e.to_string().replace('\n', " ")
}

fn report(code: i32, kind: &str, msg: &str) {
    eprintln!("error[{kind}] code={code}: {}", msg.replace('\n', " "));
}
