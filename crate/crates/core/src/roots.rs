//! Root counting and polishing for scalar analytic functions given in log-determinant form.
//!
//! Counting uses the argument principle on rectangle boundaries with adaptive edge
//! subdivision; polishing is Newton with a central finite-difference derivative taken on
//! ratios `f(s +- h) / f(s)`, so magnitudes never leave floating range.

use crate::linalg::{wrap_angle, LogDet};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Axis-aligned rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn contains(&self, s: Complex64) -> bool {
        s.re > self.re_min && s.re < self.re_max && s.im > self.im_min && s.im < self.im_max
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContourError {
    #[error("characteristic function vanishes on the contour at {at}")]
    RootOnContour { at: Complex64 },
    #[error("phase could not be resolved near {at} (root too close to the contour)")]
    Unresolved { at: Complex64 },
    #[error("winding number {winding} is not a non-negative integer")]
    BadWinding { winding: f64 },
}

const INITIAL_PIECES: usize = 24;
const MAX_DEPTH: u32 = 40;

/// Number of zeros of `f` inside `rect`, counted with multiplicity.
pub fn count_zeros<F>(f: &F, rect: &Rect) -> Result<usize, ContourError>
where
    F: Fn(Complex64) -> LogDet,
{
    let corners = rect.corners();
    let mut total = 0.0;
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        let mut prev = a;
        let mut prev_phase = phase_at(f, a)?;
        for i in 1..=INITIAL_PIECES {
            let t = i as f64 / INITIAL_PIECES as f64;
            let next = a + (b - a) * t;
            let next_phase = phase_at(f, next)?;
            total += phase_increment(f, prev, prev_phase, next, next_phase, 0)?;
            prev = next;
            prev_phase = next_phase;
        }
    }
    let winding = total / (2.0 * PI);
    let count = winding.round();
    if (winding - count).abs() > 0.05 || count < 0.0 {
        return Err(ContourError::BadWinding { winding });
    }
    Ok(count as usize)
}

fn phase_at<F>(f: &F, s: Complex64) -> Result<f64, ContourError>
where
    F: Fn(Complex64) -> LogDet,
{
    let v = f(s);
    if v.is_root_hit() || !v.log_abs.is_finite() {
        return Err(ContourError::RootOnContour { at: s });
    }
    Ok(v.phase)
}

fn phase_increment<F>(
    f: &F,
    a: Complex64,
    pa: f64,
    b: Complex64,
    pb: f64,
    depth: u32,
) -> Result<f64, ContourError>
where
    F: Fn(Complex64) -> LogDet,
{
    let whole = wrap_angle(pb - pa);
    let mid = (a + b) * 0.5;
    let pm = phase_at(f, mid)?;
    let first = wrap_angle(pm - pa);
    let second = wrap_angle(pb - pm);
    let resolved = whole.abs() < PI / 2.0
        && first.abs() < PI / 2.0
        && second.abs() < PI / 2.0
        && (first + second - whole).abs() < 1e-9;
    if resolved {
        return Ok(whole);
    }
    if depth >= MAX_DEPTH || (b - a).norm() <= 1e-13 * (1.0 + a.norm()) {
        return Err(ContourError::Unresolved { at: mid });
    }
    Ok(phase_increment(f, a, pa, mid, pm, depth + 1)? + phase_increment(f, mid, pm, b, pb, depth + 1)?)
}

/// Newton iteration on `f` from `s0`. Returns `None` only on breakdown (non-finite
/// iterates or a vanishing difference quotient).
///
/// The derivative uses step `h = 1e-6 (1 + |s|)`.
pub fn newton_polish<F>(f: &F, s0: Complex64, max_iter: usize) -> Option<Complex64>
where
    F: Fn(Complex64) -> LogDet,
{
    let mut s = s0;
    for _ in 0..max_iter {
        let here = f(s);
        if here.is_root_hit() {
            return Some(s);
        }
        let h = 1e-6 * (1.0 + s.norm());
        let plus = f(s + h);
        let minus = f(s - h);
        let slope = plus.ratio(&here) - minus.ratio(&here);
        if !slope.re.is_finite() || !slope.im.is_finite() || slope.norm() == 0.0 {
            return None;
        }
        let step = -2.0 * h / slope;
        s += step;
        if !s.re.is_finite() || !s.im.is_finite() || s.norm() > 1e8 {
            return None;
        }
        if step.norm() <= 4e-15 * (1.0 + s.norm()) {
            return Some(s);
        }
    }
    // callers judge the final residual
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::log_det;
    use nalgebra::DMatrix;

    fn poly(roots: Vec<Complex64>) -> impl Fn(Complex64) -> LogDet {
        move |s| {
            let v = roots.iter().fold(Complex64::new(1.0, 0.0), |acc, r| acc * (s - r));
            log_det(&DMatrix::from_element(1, 1, v))
        }
    }

    #[test]
    fn counts_polynomial_zeros() {
        let f = poly(vec![
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(-0.5, 3.0),
            Complex64::new(5.0, 0.2),
        ]);
        let rect = Rect { re_min: -1.0, re_max: 1.0, im_min: -2.0, im_max: 4.0 };
        assert_eq!(count_zeros(&f, &rect).unwrap(), 3);
        let rect = Rect { re_min: -1.0, re_max: 6.0, im_min: -2.0, im_max: 4.0 };
        assert_eq!(count_zeros(&f, &rect).unwrap(), 4);
        let rect = Rect { re_min: 1.0, re_max: 2.0, im_min: -2.0, im_max: 4.0 };
        assert_eq!(count_zeros(&f, &rect).unwrap(), 0);
    }

    #[test]
    fn double_root_counts_twice() {
        let f = poly(vec![Complex64::new(0.3, 0.3), Complex64::new(0.3, 0.3)]);
        let rect = Rect { re_min: -1.0, re_max: 1.0, im_min: -1.0, im_max: 1.0 };
        assert_eq!(count_zeros(&f, &rect).unwrap(), 2);
    }

    #[test]
    fn root_on_corner_is_reported() {
        let f = poly(vec![Complex64::new(1.0, 1.0)]);
        let rect = Rect { re_min: -1.0, re_max: 1.0, im_min: -1.0, im_max: 1.0 };
        assert!(matches!(count_zeros(&f, &rect), Err(ContourError::RootOnContour { .. })));
    }

    #[test]
    fn newton_converges() {
        let target = Complex64::new(-0.25, 26.0);
        let f = poly(vec![target, target.conj(), Complex64::new(-3.0, 0.0)]);
        let s = newton_polish(&f, Complex64::new(0.0, 25.0), 60).unwrap();
        assert!((s - target).norm() < 1e-12, "{s}");
    }

    #[test]
    fn newton_transcendental() {
        // s + 1 - exp(-s) has the root s = 0 only on the real line near the start
        let f = |s: Complex64| {
            let v = s + 1.0 - (-s).exp();
            log_det(&DMatrix::from_element(1, 1, v))
        };
        let s = newton_polish(&f, Complex64::new(0.2, 0.1), 60).unwrap();
        assert!(s.norm() < 1e-12, "{s}");
    }
}
