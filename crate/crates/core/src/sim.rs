//! Time-domain simulation of the chain with harmonic forcing and scheduled DR feedback.
//!
//! Integrates `M x'' + C x' + K x = B_f f(t) + B_u u(t)` with `u(t) = g x_a(t - tau)` inside
//! active segments and `u = 0` elsewhere. Classical RK4 at a fixed step; the delayed
//! absorber position is read from a buffer of past steps by cubic Hermite interpolation
//! (positions and velocities are both stored, so the interpolant is C1).

use crate::chain::{build_system, ChainModel, ModelError, SecondOrderSystem};
use crate::hz_to_rad;
use crate::substructure::decompose;
use crate::tuning::{tune, Family, TuningError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DIVERGENCE_LIMIT: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Forcing {
    /// N
    pub amplitude: f64,
    pub freq_hz: f64,
    /// s
    #[serde(default)]
    pub t_on: f64,
    /// s; `None` keeps the force on until the end
    #[serde(default)]
    pub t_off: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Control {
    Passive,
    /// Explicit gain (N/m) and delay (s).
    Gain { g: f64, tau: f64 },
    /// Tune on the spot for target `n`; `freq_hz` defaults to the forcing frequency.
    Tune {
        n: usize,
        family: Family,
        #[serde(default)]
        k: u32,
        #[serde(default)]
        freq_hz: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub control: Control,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default)]
    pub positions: Vec<f64>,
    #[serde(default)]
    pub velocities: Vec<f64>,
}

fn default_dt() -> f64 {
    1e-4
}

fn default_record_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Inline chain; when absent the caller supplies the model.
    #[serde(default)]
    pub chain: Option<ChainModel>,
    pub force: Forcing,
    #[serde(default)]
    pub segments: Vec<Segment>,
    /// s
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// m; 0 disables quantization
    #[serde(default)]
    pub sensor_quantization: f64,
    /// Feed the quantized absorber position back instead of the exact one.
    #[serde(default)]
    pub quantized_feedback: bool,
    #[serde(default)]
    pub initial: InitialState,
    /// Keep every n-th step in the trace.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// The inline chain, assembled.
    pub fn system(&self) -> Result<Option<SecondOrderSystem>, ModelError> {
        self.chain.as_ref().map(build_system).transpose()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("segment {segment}: {source}")]
    Tuning { segment: usize, source: TuningError },
    #[error("segment {segment}: degenerate: zero gain (the substructure already resonates at the design frequency)")]
    Degenerate { segment: usize },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("segment {segment}: dt = {dt} s exceeds tau/10 = {limit} s")]
    StepGuard { segment: usize, dt: f64, limit: f64 },
    #[error("divergence at t = {t:.4} s: |x| of coordinate {coordinate} exceeded {DIVERGENCE_LIMIT} m")]
    Divergence { t: f64, coordinate: usize },
    #[error("amplitude window: {0}")]
    Window(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResolvedSegment {
    pub id: u32,
    pub t_start: f64,
    pub t_end: f64,
    pub g: f64,
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub segment: u32,
    pub kind: EventKind,
}

/// Uniformly sampled output. `positions[i]` is coordinate `i` (0 is the absorber).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub time: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    /// 1-based index of the scheduled segment in force, 0 outside all segments.
    pub segment_id: Vec<u32>,
    pub events: Vec<Event>,
    pub segments: Vec<ResolvedSegment>,
    pub forcing_hz: f64,
    pub dt: f64,
}

impl SimulationTrace {
    pub fn coordinate(&self, i: usize) -> &[f64] {
        &self.positions[i]
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

/// Turns the schedule into explicit `(g, tau)` pairs and checks the scenario invariants.
pub fn resolve_segments(sys: &SecondOrderSystem, sc: &Scenario) -> Result<Vec<ResolvedSegment>, SimError> {
    if !(sc.dt > 0.0) || !sc.dt.is_finite() {
        return Err(SimError::Invalid(format!("dt must be > 0, got {}", sc.dt)));
    }
    if !(sc.duration > 0.0) || !sc.duration.is_finite() {
        return Err(SimError::Invalid(format!("duration must be > 0, got {}", sc.duration)));
    }
    if sc.record_every == 0 {
        return Err(SimError::Invalid("record_every must be >= 1".into()));
    }
    if !(sc.sensor_quantization >= 0.0) {
        return Err(SimError::Invalid(format!("sensor_quantization must be >= 0, got {}", sc.sensor_quantization)));
    }
    let f = &sc.force;
    if !f.amplitude.is_finite() || !(f.freq_hz >= 0.0) || !f.t_on.is_finite() {
        return Err(SimError::Invalid("force needs finite amplitude, freq_hz >= 0 and finite t_on".into()));
    }
    if let Some(off) = f.t_off {
        if !(off >= f.t_on) {
            return Err(SimError::Invalid(format!("force t_off {off} precedes t_on {}", f.t_on)));
        }
    }
    let dim = sys.dim();
    for (name, v) in [("positions", &sc.initial.positions), ("velocities", &sc.initial.velocities)] {
        if !v.is_empty() && v.len() != dim {
            return Err(SimError::Invalid(format!("initial {name} needs {dim} entries, got {}", v.len())));
        }
    }

    let mut out = Vec::with_capacity(sc.segments.len());
    let mut prev_end = f64::NEG_INFINITY;
    for (i, seg) in sc.segments.iter().enumerate() {
        let id = i as u32 + 1;
        if !(seg.t_end > seg.t_start) || seg.t_start < 0.0 {
            return Err(SimError::Invalid(format!(
                "segment {id}: need 0 <= t_start < t_end, got [{}, {}]",
                seg.t_start, seg.t_end
            )));
        }
        if seg.t_start < prev_end {
            return Err(SimError::Invalid(format!("segment {id} overlaps or precedes segment {}", id - 1)));
        }
        prev_end = seg.t_end;
        let (g, tau) = match &seg.control {
            Control::Passive => (0.0, 0.0),
            Control::Gain { g, tau } => {
                if !g.is_finite() || !(*tau >= 0.0) || !tau.is_finite() {
                    return Err(SimError::Invalid(format!("segment {id}: need finite g and tau >= 0")));
                }
                (*g, *tau)
            }
            Control::Tune { n, family, k, freq_hz } => {
                let rs = decompose(sys, *n)?;
                let hz = freq_hz.unwrap_or(f.freq_hz);
                let t = tune(&rs, hz_to_rad(hz), *family, *k).map_err(|source| SimError::Tuning { segment: i + 1, source })?;
                if t.degenerate {
                    return Err(SimError::Degenerate { segment: i + 1 });
                }
                (t.g, t.tau)
            }
        };
        if g != 0.0 && tau > 0.0 && sc.dt > tau / 10.0 {
            return Err(SimError::StepGuard { segment: i + 1, dt: sc.dt, limit: tau / 10.0 });
        }
        out.push(ResolvedSegment { id, t_start: seg.t_start, t_end: seg.t_end, g, tau });
    }
    Ok(out)
}

/// Past absorber positions and velocities at every step.
struct DelayBuffer {
    dt: f64,
    x0: f64,
    x: Vec<f64>,
    v: Vec<f64>,
}

impl DelayBuffer {
    /// `x_a(t)` for `t` not later than the newest stored step.
    fn at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.x0;
        }
        let pos = t / self.dt;
        let i = (pos.floor() as usize).min(self.x.len() - 1);
        if i + 1 >= self.x.len() {
            return self.x[self.x.len() - 1];
        }
        let h = self.dt;
        let s = pos - i as f64;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.x[i] + h10 * h * self.v[i] + h01 * self.x[i + 1] + h11 * h * self.v[i + 1]
    }
}

fn quantize(x: f64, q: f64) -> f64 {
    if q > 0.0 {
        q * (x / q).round()
    } else {
        x
    }
}

struct Plant {
    dim: usize,
    minv_k: DMatrix<f64>,
    minv_c: DMatrix<f64>,
    minv_bf: DVector<f64>,
    minv_bu: DVector<f64>,
}

impl Plant {
    fn new(sys: &SecondOrderSystem) -> Result<Self, SimError> {
        let minv = sys
            .mass
            .clone()
            .try_inverse()
            .ok_or_else(|| SimError::Invalid("mass matrix is singular".into()))?;
        Ok(Plant {
            dim: sys.dim(),
            minv_k: &minv * &sys.stiffness,
            minv_c: &minv * &sys.damping,
            minv_bf: &minv * &sys.b_f,
            minv_bu: &minv * &sys.b_u,
        })
    }

    /// Time derivative of `[x; v]` for given force and control values.
    fn rhs(&self, y: &DVector<f64>, f: f64, u: f64) -> DVector<f64> {
        let n = self.dim;
        let x = y.rows(0, n);
        let v = y.rows(n, n);
        let acc = &self.minv_bf * f + &self.minv_bu * u - &self.minv_c * v - &self.minv_k * x;
        let mut dy = DVector::zeros(2 * n);
        dy.rows_mut(0, n).copy_from(&v);
        dy.rows_mut(n, n).copy_from(&acc);
        dy
    }
}

/// Runs the scenario on `sys`.
pub fn simulate(sys: &SecondOrderSystem, sc: &Scenario) -> Result<SimulationTrace, SimError> {
    let segments = resolve_segments(sys, sc)?;
    let plant = Plant::new(sys)?;
    let dim = sys.dim();
    let dt = sc.dt;
    let steps = (sc.duration / dt).round() as usize;
    let omega = hz_to_rad(sc.force.freq_hz);
    let half = 0.5 * dt;
    let t_on = sc.force.t_on;
    let t_off = sc.force.t_off.unwrap_or(f64::INFINITY);
    let q = sc.sensor_quantization;

    let mut y = DVector::zeros(2 * dim);
    for (i, &x) in sc.initial.positions.iter().enumerate() {
        y[i] = x;
    }
    for (i, &v) in sc.initial.velocities.iter().enumerate() {
        y[dim + i] = v;
    }
    let mut buf = DelayBuffer { dt, x0: y[0], x: Vec::with_capacity(steps + 1), v: Vec::with_capacity(steps + 1) };
    buf.x.push(y[0]);
    buf.v.push(y[dim]);

    let n_rec = steps / sc.record_every + 1;
    let mut trace = SimulationTrace {
        time: Vec::with_capacity(n_rec),
        positions: vec![Vec::with_capacity(n_rec); dim],
        velocities: vec![Vec::with_capacity(n_rec); dim],
        u: Vec::with_capacity(n_rec),
        f: Vec::with_capacity(n_rec),
        segment_id: Vec::with_capacity(n_rec),
        events: Vec::new(),
        segments: segments.clone(),
        forcing_hz: sc.force.freq_hz,
        dt: dt * sc.record_every as f64,
    };
    for s in &segments {
        trace.events.push(Event { t: s.t_start, segment: s.id, kind: EventKind::On });
        trace.events.push(Event { t: s.t_end, segment: s.id, kind: EventKind::Off });
    }

    // Switching is decided at step starts, so the right-hand side is smooth within a step.
    let active_at = |t: f64| segments.iter().find(|s| t >= s.t_start - half && t < s.t_end - half);
    let force_on = |t: f64| t >= t_on - half && t < t_off - half;
    let delayed = |buf: &DelayBuffer, t: f64, tau: f64, x_now: f64| {
        let x = if tau > 0.0 { buf.at(t - tau) } else { x_now };
        if sc.quantized_feedback {
            quantize(x, q)
        } else {
            x
        }
    };

    for n in 0..=steps {
        let t = n as f64 * dt;
        let seg = active_at(t);
        let (g, tau) = seg.map_or((0.0, 0.0), |s| (s.g, s.tau));
        let amp = if force_on(t) { sc.force.amplitude } else { 0.0 };
        let force = |t: f64| amp * (omega * t).cos();
        let control = |buf: &DelayBuffer, t: f64, x_a: f64| if g == 0.0 { 0.0 } else { g * delayed(buf, t, tau, x_a) };

        if n % sc.record_every == 0 {
            trace.time.push(t);
            for i in 0..dim {
                trace.positions[i].push(quantize(y[i], q));
                trace.velocities[i].push(y[dim + i]);
            }
            trace.u.push(control(&buf, t, y[0]));
            trace.f.push(force(t));
            trace.segment_id.push(seg.map_or(0, |s| s.id));
        }
        if n == steps {
            break;
        }

        let k1 = plant.rhs(&y, force(t), control(&buf, t, y[0]));
        let y2 = &y + &k1 * half;
        let k2 = plant.rhs(&y2, force(t + half), control(&buf, t + half, y2[0]));
        let y3 = &y + &k2 * half;
        let k3 = plant.rhs(&y3, force(t + half), control(&buf, t + half, y3[0]));
        let y4 = &y + &k3 * dt;
        let k4 = plant.rhs(&y4, force(t + dt), control(&buf, t + dt, y4[0]));
        y += (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);

        if let Some(i) = (0..dim).find(|&i| !(y[i].abs() <= DIVERGENCE_LIMIT)) {
            return Err(SimError::Divergence { t: t + dt, coordinate: i });
        }
        buf.x.push(y[0]);
        buf.v.push(y[dim]);
    }
    Ok(trace)
}

/// Half the peak-to-peak of coordinate `coord` over `window` (s), after dropping the
/// first third of the window as transient.
pub fn steady_state_amplitude(trace: &SimulationTrace, coord: usize, window: (f64, f64)) -> Result<f64, SimError> {
    let (a, b) = window;
    if coord >= trace.positions.len() {
        return Err(SimError::Window(format!("coordinate {coord} not in trace")));
    }
    let (Some(&t0), Some(&t1)) = (trace.time.first(), trace.time.last()) else {
        return Err(SimError::Window("empty trace".into()));
    };
    let slack = 1e-9 * (1.0 + t1.abs());
    if !(b > a) || a < t0 - slack || b > t1 + slack {
        return Err(SimError::Window(format!("[{a}, {b}] not inside trace span [{t0}, {t1}]")));
    }
    if trace.forcing_hz > 0.0 && (b - a) * trace.forcing_hz < 3.0 - 1e-9 {
        return Err(SimError::Window(format!(
            "window of {} s is shorter than 3 forcing periods ({} s)",
            b - a,
            3.0 / trace.forcing_hz
        )));
    }
    let start = a + (b - a) / 3.0;
    let xs = &trace.positions[coord];
    let (lo, hi) = trace
        .time
        .iter()
        .zip(xs)
        .filter(|(t, _)| **t >= start - slack && **t <= b + slack)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &x)| (lo.min(x), hi.max(x)));
    if lo > hi {
        return Err(SimError::Window("no samples in window".into()));
    }
    Ok(0.5 * (hi - lo))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Active,
    Passive,
}

/// A stretch of the schedule with constant feedback, reduced to its last `tail` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeWindow {
    pub regime: Regime,
    /// Segment id for active windows.
    pub segment: Option<u32>,
    pub t_start: f64,
    pub t_end: f64,
}

/// Windows covering the last `tail` seconds of every forced stretch with constant feedback:
/// each active segment and each passive gap between force onset, segments and the end of
/// the trace (or force turn-off).
pub fn regime_windows(trace: &SimulationTrace, t_on: f64, t_off: Option<f64>, tail: f64) -> Vec<RegimeWindow> {
    let end = trace.time.last().copied().unwrap_or(0.0).min(t_off.unwrap_or(f64::INFINITY));
    let mut stretches = Vec::new();
    let mut cursor = t_on;
    for s in trace.segments.iter().filter(|s| s.g != 0.0) {
        if s.t_start > cursor {
            stretches.push((Regime::Passive, None, cursor, s.t_start.min(end)));
        }
        stretches.push((Regime::Active, Some(s.id), s.t_start.max(t_on), s.t_end.min(end)));
        cursor = cursor.max(s.t_end);
    }
    if end > cursor {
        stretches.push((Regime::Passive, None, cursor, end));
    }
    stretches
        .into_iter()
        .filter(|(_, _, a, b)| b > a)
        .map(|(regime, segment, a, b)| RegimeWindow { regime, segment, t_start: (b - tail).max(a), t_end: b })
        .collect()
}
