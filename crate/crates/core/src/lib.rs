//! Delayed-resonator (DR) design and verification for linear mass-spring-damper chains.
//!
//! The crate covers the full pipeline for non-collocated vibration absorption with a
//! position-feedback delayed resonator `u(t) = g x_a(t - tau)`:
//!
//! - [`chain`]: chain description and assembly of the second-order model `M x'' + C x' + K x = B_f f + B_u u`.
//! - [`substructure`]: closed-loop characteristic matrix, resonant/target/vibrating split and the
//!   executable check that resonant-substructure poles are transfer-function zeros.
//! - [`tuning`]: gain/delay families that put a resonant root pair at `+-j omega`.
//! - [`spectrum`]: rightmost characteristic roots, spectral abscissa and admissibility sweeps.
//! - [`response`]: disturbance-to-target frequency responses.
//! - [`sim`]: fixed-step time-domain simulation with a delay buffer.
//!
//! Internally everything is SI with angular frequency in rad/s. Hz only appears at the
//! boundaries (sweep grids, scenario files, CLI flags) and is converted there.

pub mod chain;
pub mod linalg;
pub mod response;
pub mod roots;
pub mod sim;
pub mod spectrum;
pub mod substructure;
pub mod sweep;
pub mod system;
pub mod tuning;

pub use chain::{build_system, harmonic_force, Absorber, ChainModel, ModelError, SecondOrderSystem};
pub use num_complex::Complex64;
pub use response::{response_curve, transfer_at, vshape_sensitivity, FrequencyResponseCurve};
pub use sim::{simulate, steady_state_amplitude, Scenario, SimulationTrace};
pub use spectrum::{spectrum, SpectrumOptions, SpectrumReport};
pub use substructure::{check_proposition1, decompose, eval_char_matrix, log_det_char, RsDecomposition};
pub use sweep::{sweep_admissible, SweepConfig, SweepResult};
pub use system::DelayQuadratic;
pub use tuning::{enumerate_tunings, resonance_ratio, tune, DrTuning, Family};

/// Converts a frequency in Hz to rad/s.
pub fn hz_to_rad(hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * hz
}

/// Converts a frequency in rad/s to Hz.
pub fn rad_to_hz(omega: f64) -> f64 {
    omega / (2.0 * std::f64::consts::PI)
}
