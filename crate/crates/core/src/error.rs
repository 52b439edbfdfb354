use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("wavelength {wavelength_nm} nm outside table range [{min_nm}, {max_nm}] nm for `{material}`")]
    WavelengthOutOfRange {
        material: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("mode window too small: {0}")]
    WindowTooSmall(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("no guided mode: {0}")]
    NoGuidedMode(String),

    #[error("no evanescent confinement against vacuum (n_eff = {0})")]
    NotEvanescent(f64),

    #[error("FDTD instability at step {step}: {reason}")]
    Instability { step: usize, reason: String },

    #[error("far-field line too short: {length_nm:.0} nm gives {resolution_deg:.2} deg resolution, need at least {required_nm:.0} nm")]
    LineTooShort {
        length_nm: f64,
        resolution_deg: f64,
        required_nm: f64,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("unknown isotope `{0}`")]
    UnknownIsotope(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no feasible candidate: {0}")]
    EmptyFeasibleSet(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Broad failure class, used for process exit codes and the FFI status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::UnknownMaterial(_)
            | Error::WavelengthOutOfRange { .. }
            | Error::Geometry(_)
            | Error::Resolution(_)
            | Error::WindowTooSmall(_)
            | Error::UnknownIsotope(_)
            | Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::Validation(_) => ErrorKind::Config,
            Error::EigenNonConvergence { .. }
            | Error::NoGuidedMode(_)
            | Error::NotEvanescent(_)
            | Error::Instability { .. }
            | Error::LineTooShort { .. }
            | Error::Fit(_)
            | Error::Numerical(_)
            | Error::EmptyFeasibleSet(_) => ErrorKind::Numerical,
            Error::Io(_) => ErrorKind::Io,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Io => 4,
        }
    }
}
