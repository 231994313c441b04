//! Closed-loop characteristic matrix and its resonant / target / vibrating block split.
//!
//! For target index `n` (1-based mass index, row `n`), rows `0..n` form the resonant
//! substructure (absorber plus `m_1 .. m_{n-1}`), row `n` is the target and rows
//! `n+1..=d` the vibrating substructure. Because the chain is tridiagonal, the
//! resonant and vibrating blocks never couple directly.

use crate::chain::{check_deployment, ModelError, SecondOrderSystem};
use crate::linalg::{self, LogDet};
use crate::roots::{count_zeros, newton_polish, ContourError, Rect};
use crate::system::DelayQuadratic;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::ops::Range;
use thiserror::Error;

impl SecondOrderSystem {
    /// Closed loop `M s^2 + C s + K - g B_u E_a^T e^{-s tau}` as a delay pencil.
    pub fn closed_loop(&self) -> DelayQuadratic {
        DelayQuadratic {
            mass: self.mass.clone(),
            damping: self.damping.clone(),
            stiffness: self.stiffness.clone(),
            input: self.b_u.clone(),
            sensor: self.e_a(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharMatrixEval {
    pub s: Complex64,
    pub value: DMatrix<Complex64>,
}

pub fn eval_char_matrix(sys: &SecondOrderSystem, g: f64, tau: f64, s: Complex64) -> CharMatrixEval {
    CharMatrixEval { s, value: sys.closed_loop().eval(g, tau, s) }
}

/// `log |det R(s)|` and `arg det R(s)`; a zero pivot is reported through [`LogDet::is_root_hit`].
pub fn log_det_char(sys: &SecondOrderSystem, g: f64, tau: f64, s: Complex64) -> LogDet {
    sys.closed_loop().log_det(g, tau, s)
}

/// Leading `n x n` blocks of the model for target index `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RsDecomposition {
    pub n: usize,
    pub mass_r: DMatrix<f64>,
    pub damping_r: DMatrix<f64>,
    pub stiffness_r: DMatrix<f64>,
    pub b_u: DVector<f64>,
    pub e_a: DVector<f64>,
    /// Row of the target coordinate in the full matrices (equals `n`).
    pub target_row: usize,
    pub vibrating_rows: Range<usize>,
}

impl RsDecomposition {
    pub fn resonant_system(&self) -> DelayQuadratic {
        DelayQuadratic {
            mass: self.mass_r.clone(),
            damping: self.damping_r.clone(),
            stiffness: self.stiffness_r.clone(),
            input: self.b_u.clone(),
            sensor: self.e_a.clone(),
        }
    }

    /// `A_R(s; 0, 0) = M_R s^2 + C_R s + K_R`, the passive resonant block.
    pub fn passive_block(&self, s: Complex64) -> DMatrix<Complex64> {
        self.resonant_system().eval(0.0, 0.0, s)
    }
}

pub fn decompose(sys: &SecondOrderSystem, n: usize) -> Result<RsDecomposition, ModelError> {
    let d = sys.d();
    if n == 0 || n > d {
        return Err(ModelError::Index { field: "n", value: n, d });
    }
    check_deployment(sys.p, n, sys.dist)?;
    let lead = |a: &DMatrix<f64>| a.view((0, 0), (n, n)).into_owned();
    Ok(RsDecomposition {
        n,
        mass_r: lead(&sys.mass),
        damping_r: lead(&sys.damping),
        stiffness_r: lead(&sys.stiffness),
        b_u: sys.b_u.rows(0, n).into_owned(),
        e_a: sys.e_a().rows(0, n).into_owned(),
        target_row: n,
        vibrating_rows: (n + 1)..(d + 1),
    })
}

/// Bordered matrix `[[R(s), -B_f], [E_T^T, 0]]` whose determinant `z(s)` vanishes exactly at
/// transfer-function zeros.
pub fn bordered_matrix(sys: &SecondOrderSystem, n: usize, g: f64, tau: f64, s: Complex64) -> DMatrix<Complex64> {
    let r = eval_char_matrix(sys, g, tau, s).value;
    let dim = sys.dim();
    let mut z = DMatrix::zeros(dim + 1, dim + 1);
    z.view_mut((0, 0), (dim, dim)).copy_from(&r);
    for i in 0..dim {
        z[(i, dim)] = Complex64::new(-sys.b_f[i], 0.0);
    }
    z[(dim, n)] = Complex64::new(1.0, 0.0);
    z
}

/// `ln z(s)` normalized by the term magnitudes of each bordered row.
pub fn bordered_log_det(sys: &SecondOrderSystem, n: usize, g: f64, tau: f64, s: Complex64) -> LogDet {
    let mut rows: Vec<f64> = sys
        .closed_loop()
        .term_row_norms(g, tau, s)
        .iter()
        .zip(sys.b_f.iter())
        .map(|(r, b)| r.hypot(*b))
        .collect();
    rows.push(1.0);
    linalg::log_det_rows(&bordered_matrix(sys, n, g, tau, s), &rows)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Prop1Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("root search in {rect:?} found {found} of {counted} roots")]
    Incomplete { rect: Rect, counted: usize, found: usize },
    #[error("root counting failed: {0}")]
    Contour(#[from] ContourError),
}

#[derive(Clone, Debug, Serialize)]
pub struct Prop1Report {
    pub n: usize,
    pub g: f64,
    pub tau: f64,
    pub omega: f64,
    pub rect: Rect,
    /// Roots of `det A_R` found in the rectangle and its mirror image.
    pub roots: Vec<Complex64>,
    /// `|z(root)|` normalized by the product of the bordered row term magnitudes.
    pub normalized_z: Vec<f64>,
    pub max_normalized_z: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Locates roots of `det A_R(s; g, tau)` in a box around `j omega` and checks each is a
/// zero of the disturbance-to-target transfer via the bordered determinant.
pub fn check_proposition1(
    sys: &SecondOrderSystem,
    n: usize,
    g: f64,
    tau: f64,
    omega: f64,
    tol: f64,
) -> Result<Prop1Report, Prop1Error> {
    let rs = decompose(sys, n)?.resonant_system();
    let f = |s: Complex64| rs.log_det(g, tau, s);
    let half = (0.1 * omega).max(1.0);
    let mut shrink = 1.0;
    let mut last_err = None;
    for _ in 0..4 {
        let h = half * shrink;
        let rect = Rect { re_min: -h, re_max: h, im_min: omega - h, im_max: omega + h };
        match locate_roots(&f, &rect) {
            Ok(upper) => {
                let roots: Vec<Complex64> = upper.iter().flat_map(|r| [*r, r.conj()]).collect();
                let normalized_z: Vec<f64> = roots
                    .iter()
                    .map(|&s| bordered_log_det(sys, n, g, tau, s).normalized_abs())
                    .collect();
                let max_normalized_z = normalized_z.iter().copied().fold(0.0, f64::max);
                return Ok(Prop1Report {
                    n,
                    g,
                    tau,
                    omega,
                    rect,
                    roots,
                    normalized_z,
                    max_normalized_z,
                    tol,
                    passed: max_normalized_z <= tol,
                });
            }
            Err(Prop1Error::Contour(e)) => {
                last_err = Some(Prop1Error::Contour(e));
                shrink *= 0.93;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran"))
}

fn locate_roots<F>(f: &F, rect: &Rect) -> Result<Vec<Complex64>, Prop1Error>
where
    F: Fn(Complex64) -> LogDet,
{
    let counted = count_zeros(f, rect)?;
    let mut found: Vec<Complex64> = Vec::new();
    let centre = Complex64::new(0.5 * (rect.re_min + rect.re_max), 0.5 * (rect.im_min + rect.im_max));
    let mut seeds = vec![centre];
    let grid = 5;
    for i in 0..grid {
        for j in 0..grid {
            let x = rect.re_min + (rect.re_max - rect.re_min) * (i as f64 + 0.5) / grid as f64;
            let y = rect.im_min + (rect.im_max - rect.im_min) * (j as f64 + 0.5) / grid as f64;
            seeds.push(Complex64::new(x, y));
        }
    }
    for seed in seeds {
        if found.len() >= counted {
            break;
        }
        if let Some(r) = newton_polish(f, seed, 80) {
            let ok = rect.contains(r) && f(r).normalized_abs() <= 1e-8;
            if ok && !found.iter().any(|q| (q - r).norm() <= 1e-7 * (1.0 + r.norm())) {
                found.push(r);
            }
        }
    }
    if found.len() != counted {
        return Err(Prop1Error::Incomplete { rect: *rect, counted, found: found.len() });
    }
    Ok(found)
}
