//! Quadratic matrix pencils with one rank-one delayed position feedback:
//! `Q(s) = M s^2 + C s + K - g b e^T exp(-s tau)`.
//!
//! Both the overall closed loop (with `B_u`, `E_a`) and the resonant substructure
//! (with the leading slices `b_u`, `e_a`) are instances of this form.

use crate::linalg::{self, LogDet};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct DelayQuadratic {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Column through which the feedback enters.
    pub input: DVector<f64>,
    /// Row selecting the fed-back coordinate.
    pub sensor: DVector<f64>,
}

impl DelayQuadratic {
    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    /// Evaluates `Q(s; g, tau)`.
    pub fn eval(&self, g: f64, tau: f64, s: Complex64) -> DMatrix<Complex64> {
        let n = self.dim();
        let delayed = g * (-s * tau).exp();
        let s2 = s * s;
        DMatrix::from_fn(n, n, |i, j| {
            s2 * self.mass[(i, j)] + s * self.damping[(i, j)] + self.stiffness[(i, j)]
                - delayed * (self.input[i] * self.sensor[j])
        })
    }

    /// `ln det Q(s)`, normalized by [`Self::term_row_norms`] so that the normalized
    /// modulus measures cancellation even for 1x1 blocks.
    pub fn log_det(&self, g: f64, tau: f64, s: Complex64) -> LogDet {
        linalg::log_det_rows(&self.eval(g, tau, s), &self.term_row_norms(g, tau, s))
    }

    /// Per row, the 2-norm of the entrywise sums of term moduli
    /// `|m_ij| |s|^2 + |c_ij| |s| + |k_ij| + |g b_i e_j| |exp(-s tau)|`.
    pub fn term_row_norms(&self, g: f64, tau: f64, s: Complex64) -> Vec<f64> {
        let n = self.dim();
        let (a, a2) = (s.norm(), s.norm_sqr());
        let delayed = g.abs() * (-s.re * tau).exp();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let t = self.mass[(i, j)].abs() * a2
                            + self.damping[(i, j)].abs() * a
                            + self.stiffness[(i, j)].abs()
                            + delayed * (self.input[i] * self.sensor[j]).abs();
                        t * t
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Matrices of the delay-free pencil with the feedback folded into stiffness.
    pub fn undelayed_stiffness(&self, g: f64) -> DMatrix<f64> {
        &self.stiffness - g * &self.input * self.sensor.transpose()
    }

    /// Radius bound for characteristic roots in the half-plane `Re s >= re_min`.
    ///
    /// With `y = M^{1/2} x`, a root satisfies
    /// `|s|^2 <= ||C~|| |s| + ||K~|| + |g| ||M^{-1/2} b|| ||M^{-1/2} e|| exp(-re_min tau)`
    /// (the exponential is capped below at 1), so `|s|` is bounded by the positive root
    /// of the corresponding quadratic.
    pub fn envelope_radius(&self, g: f64, tau: f64, re_min: f64) -> f64 {
        let inv_sqrt: Vec<f64> = self.mass.diagonal().iter().map(|m| 1.0 / m.sqrt()).collect();
        let scaled = |a: &DMatrix<f64>| {
            DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * inv_sqrt[i] * inv_sqrt[j])
        };
        let sym_norm = |a: DMatrix<f64>| {
            a.symmetric_eigenvalues().iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
        };
        let c_norm = sym_norm(scaled(&self.damping));
        let k_norm = sym_norm(scaled(&self.stiffness));
        let b_norm = self.input.iter().zip(&inv_sqrt).map(|(b, w)| (b * w).powi(2)).sum::<f64>().sqrt();
        let e_norm = self.sensor.iter().zip(&inv_sqrt).map(|(e, w)| (e * w).powi(2)).sum::<f64>().sqrt();
        let growth = (-re_min * tau).exp().max(1.0);
        let b = k_norm + g.abs() * b_norm * e_norm * growth;
        0.5 * (c_norm + (c_norm * c_norm + 4.0 * b).sqrt())
    }

    /// First-order companion matrix of the delay-free pencil with stiffness `k_eff`.
    pub(crate) fn companion(&self, k_eff: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let minv: Vec<f64> = self.mass.diagonal().iter().map(|m| 1.0 / m).collect();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            a[(i, n + i)] = 1.0;
            for j in 0..n {
                a[(n + i, j)] = -minv[i] * k_eff[(i, j)];
                a[(n + i, n + j)] = -minv[i] * self.damping[(i, j)];
            }
        }
        a
    }
}
