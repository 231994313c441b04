//! Disturbance-to-target frequency response `P(j omega) = E_n^T R(j omega)^{-1} B_f`.

use crate::chain::{ModelError, SecondOrderSystem};
use crate::linalg;
use crate::tuning::DrTuning;
use crate::{hz_to_rad, rad_to_hz};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResponseError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("characteristic matrix is singular at {omega} rad/s ({hz:.6} Hz): closed-loop pole on the axis")]
    PoleHit { omega: f64, hz: f64 },
    #[error("frequency grid must be strictly increasing and positive")]
    Grid,
    #[error("detuning offset must be > 0 Hz, got {0}")]
    Offset(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Feedback {
    Passive,
    Tuned { g: f64, tau: f64 },
}

impl Feedback {
    pub fn new(g: f64, tau: f64) -> Self {
        if g == 0.0 {
            Feedback::Passive
        } else {
            Feedback::Tuned { g, tau }
        }
    }

    pub fn params(&self) -> (f64, f64) {
        match *self {
            Feedback::Passive => (0.0, 0.0),
            Feedback::Tuned { g, tau } => (g, tau),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Feedback::Passive => "passive",
            Feedback::Tuned { .. } => "tuned",
        }
    }
}

/// Amplitude response on a Hz grid; `None` marks points where the closed loop has a pole.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyResponseCurve {
    pub grid_hz: Vec<f64>,
    /// m/N
    pub magnitude: Vec<Option<f64>>,
    pub target: usize,
    pub feedback: Feedback,
}

impl FrequencyResponseCurve {
    /// Frequencies (Hz) of interior local minima of the magnitude.
    pub fn local_minima(&self) -> Vec<f64> {
        let m = &self.magnitude;
        (1..m.len().saturating_sub(1))
            .filter(|&i| match (m[i - 1], m[i], m[i + 1]) {
                (Some(a), Some(b), Some(c)) => b < a && b <= c,
                _ => false,
            })
            .map(|i| self.grid_hz[i])
            .collect()
    }
}

/// `points` logarithmically spaced frequencies from `start_hz` to `stop_hz` inclusive.
pub fn log_grid(start_hz: f64, stop_hz: f64, points: usize) -> Vec<f64> {
    assert!(start_hz > 0.0 && stop_hz > start_hz && points >= 2);
    let (a, b) = (start_hz.ln(), stop_hz.ln());
    (0..points)
        .map(|i| {
            if i + 1 == points {
                stop_hz
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// `P(j omega)` for target mass `n` by a single complex solve.
pub fn transfer_at(sys: &SecondOrderSystem, n: usize, g: f64, tau: f64, omega: f64) -> Result<Complex64, ResponseError> {
    let d = sys.d();
    if n == 0 || n > d {
        return Err(ModelError::Index { field: "n", value: n, d }.into());
    }
    let q = sys.closed_loop();
    let r = q.eval(g, tau, Complex64::new(0.0, omega));
    let dim = sys.dim();
    let scale = (0..dim * dim)
        .map(|i| {
            q.mass[i].abs() * omega * omega
                + q.damping[i].abs() * omega
                + q.stiffness[i].abs()
                + g.abs() * (q.input[i % dim] * q.sensor[i / dim]).abs()
        })
        .fold(0.0, f64::max);
    let rhs = DVector::from_iterator(dim, sys.b_f.iter().map(|&x| Complex64::new(x, 0.0)));
    let x = linalg::solve_scaled(&r, &rhs, scale).ok_or(ResponseError::PoleHit { omega, hz: rad_to_hz(omega) })?;
    Ok(x[n])
}

pub fn response_curve(
    sys: &SecondOrderSystem,
    n: usize,
    g: f64,
    tau: f64,
    grid_hz: &[f64],
) -> Result<FrequencyResponseCurve, ResponseError> {
    if grid_hz.iter().any(|f| !(*f > 0.0)) || grid_hz.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ResponseError::Grid);
    }
    let magnitude = grid_hz
        .iter()
        .map(|&f| match transfer_at(sys, n, g, tau, hz_to_rad(f)) {
            Ok(p) => Ok(Some(p.norm())),
            Err(ResponseError::PoleHit { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FrequencyResponseCurve { grid_hz: grid_hz.to_vec(), magnitude, target: n, feedback: Feedback::new(g, tau) })
}

/// Worst `|P(j(omega +- delta))| / |P_passive(j omega)|` for a tuning designed at `omega`.
///
/// Quantifies how quickly suppression degrades when the excitation drifts off the design
/// frequency.
pub fn vshape_sensitivity(
    sys: &SecondOrderSystem,
    n: usize,
    tuning: &DrTuning,
    delta_hz: f64,
) -> Result<f64, ResponseError> {
    if !(delta_hz > 0.0) {
        return Err(ResponseError::Offset(delta_hz));
    }
    let w = tuning.omega;
    let passive = transfer_at(sys, n, 0.0, 0.0, w)?.norm();
    let dw = hz_to_rad(delta_hz);
    let mut worst = 0.0f64;
    for off in [w - dw, w + dw] {
        if off > 0.0 {
            worst = worst.max(transfer_at(sys, n, tuning.g, tuning.tau, off)?.norm());
        }
    }
    Ok(worst / passive)
}
