//! Small dense complex helpers: pivoted LU with logarithmic determinant accumulation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Determinant in polar, log-scaled form.
///
/// `log_abs` is `-inf` when elimination hit an exactly zero pivot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDet {
    pub log_abs: f64,
    /// Argument in (-pi, pi].
    pub phase: f64,
    /// Sum of `ln ||row_i||_2`, by default of the factored matrix (Hadamard bound of `|det|`).
    pub log_row_scale: f64,
}

impl LogDet {
    pub fn is_root_hit(&self) -> bool {
        self.log_abs == f64::NEG_INFINITY
    }

    /// `ln(|det| / prod ||row_i||)`, always `<= 0` up to rounding.
    pub fn normalized_log_abs(&self) -> f64 {
        self.log_abs - self.log_row_scale
    }

    /// `|det| / prod ||row_i||` in [0, 1].
    pub fn normalized_abs(&self) -> f64 {
        self.normalized_log_abs().exp()
    }

    /// The determinant itself; overflows to infinity if it is out of range.
    pub fn value(&self) -> Complex64 {
        if self.is_root_hit() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.log_abs.exp(), self.phase)
    }

    /// `det(self) / det(other)` computed without forming either determinant.
    pub fn ratio(&self, other: &LogDet) -> Complex64 {
        Complex64::from_polar((self.log_abs - other.log_abs).exp(), self.phase - other.phase)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

fn log_row_scale(a: &DMatrix<Complex64>) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().ln())
        .sum()
}

/// Log-determinant by Gaussian elimination with partial pivoting.
pub fn log_det(a: &DMatrix<Complex64>) -> LogDet {
    log_det_with_scale(a, log_row_scale(a))
}

/// Like [`log_det`], but normalized by caller-supplied row magnitudes, e.g. the sizes of
/// the terms summed into each row before cancellation.
pub fn log_det_rows(a: &DMatrix<Complex64>, row_norms: &[f64]) -> LogDet {
    assert_eq!(row_norms.len(), a.nrows());
    log_det_with_scale(a, row_norms.iter().map(|r| r.ln()).sum())
}

fn log_det_with_scale(a: &DMatrix<Complex64>, scale: f64) -> LogDet {
    assert!(a.is_square(), "log_det needs a square matrix");
    let n = a.nrows();
    let mut lu = a.clone();
    let mut log_abs = 0.0;
    let mut phase = 0.0;
    for col in 0..n {
        let (piv, piv_abs) = (col..n)
            .map(|r| (r, lu[(r, col)].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs == 0.0 {
            return LogDet { log_abs: f64::NEG_INFINITY, phase: 0.0, log_row_scale: scale };
        }
        if piv != col {
            lu.swap_rows(piv, col);
            phase += PI;
        }
        let p = lu[(col, col)];
        log_abs += piv_abs.ln();
        phase += p.arg();
        for r in (col + 1)..n {
            let factor = lu[(r, col)] / p;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in (col + 1)..n {
                let v = lu[(col, c)];
                lu[(r, c)] -= factor * v;
            }
        }
    }
    LogDet { log_abs, phase: wrap_angle(phase), log_row_scale: scale }
}

/// Solves `a x = b` by LU; `None` if `a` is numerically singular.
///
/// Singularity is judged relative to the largest absolute entry of `a`.
pub fn solve(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    solve_scaled(a, b, scale)
}

/// Like [`solve`], but singularity is judged against a caller-supplied magnitude, e.g. the
/// size of the terms that cancelled to form `a`.
pub fn solve_scaled(a: &DMatrix<Complex64>, b: &DVector<Complex64>, scale: f64) -> Option<DVector<Complex64>> {
    if scale == 0.0 {
        return None;
    }
    let lu = a.clone().lu();
    let min_pivot = lu.u().diagonal().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-13 * scale {
        return None;
    }
    lu.solve(b)
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}
