//! Device studies built on the mode solver and FDTD: the sidewall-free
//! bridge under the vacuum wall, grating emission, and grating design search.

mod bridge;
mod fit;
mod grating;
mod search;

pub use bridge::{
    bridge_geometry, bridge_sweep, bridge_transmission, bridge_transmission_with, chip_stack, chip_waveguide,
    BridgeLayout, BridgeRun, BridgeSpec, TransmissionCurve, OVERSHOOT_TOLERANCE,
};
pub use fit::{fit_decay, grating_angle_analytic, DecayFit, MIN_FIT_SAMPLES};
pub use grating::{analyze_grating, analyze_grating_with, grating_dx, chip_grating, GratingOptions, GratingResult};
pub use search::{design_search, design_search_with, DesignBounds, DesignResult, DesignTargets, Evaluation};
