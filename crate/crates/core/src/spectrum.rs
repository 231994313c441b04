//! Rightmost characteristic roots and spectral abscissa of `det Q(s; g, tau) = 0`.
//!
//! Pipeline:
//! 1. First-order form `y' = A0 y + g (M^-1 b) e^T x(t - tau)` of dimension `2 dim`.
//!    Only the scalar `e^T x` is delayed, so its history `psi(theta) = e^T x(t + theta)`,
//!    `theta in [-tau, 0]`, is the only infinite-dimensional part of the state.
//! 2. Pseudospectral collocation of the generator: `psi` is represented on `N + 1`
//!    Chebyshev points (`psi_0 = e^T x`) and `d psi / dt = d psi / d theta` is enforced at
//!    the other `N`. Eigenvalues of the resulting `(2 dim + N)`-square matrix approximate
//!    the rightmost roots.
//! 3. Newton polish of every candidate on `det Q(s)`.
//! 4. Orders `N = 20, 40, ...` until two successive polished root sets agree.
//! 5. Argument-principle count on `[alpha - margin, re_max] x [-rho, rho]`, where `rho`
//!    bounds every root with real part above `alpha - margin`
//!    (see [`DelayQuadratic::envelope_radius`]); the count must equal the number of
//!    reported roots in that box.

use crate::linalg::LogDet;
use crate::roots::{count_zeros, newton_polish, ContourError, Rect};
use crate::system::DelayQuadratic;
use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumOptions {
    /// Right edge of the search region, rad/s.
    pub re_max: f64,
    /// Width of the certified strip left of the abscissa, rad/s.
    pub margin: f64,
    pub order_start: usize,
    pub order_max: usize,
    /// Largest allowed change of a root between successive orders.
    pub agreement_tol: f64,
    /// Largest allowed normalized `|det Q|` at a reported root.
    pub residual_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            re_max: 50.0,
            margin: 1.0,
            order_start: 20,
            order_max: 160,
            agreement_tol: 1e-6,
            residual_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Roots with real part in `(re_min, re_max)`, closed under conjugation, sorted by real
    /// part descending.
    pub roots: Vec<Complex64>,
    /// Largest real part among `roots`; `-inf` if none were found.
    pub abscissa: f64,
    /// Collocation order of the accepted root set (0 for delay-free problems).
    pub discretization_order: usize,
    pub converged: bool,
    /// Normalized `|det Q(root)|` per root.
    pub residuals: Vec<f64>,
    /// Certified rectangle and its argument-principle count.
    pub rect: Option<Rect>,
    pub counted: Option<usize>,
    /// Bound on `|s|` for roots inside the certified strip.
    pub envelope_radius: f64,
    /// True if the envelope excludes roots with real part beyond `re_max`.
    pub right_side_certified: bool,
    /// Why `converged` is false.
    pub note: Option<String>,
}

impl SpectrumReport {
    pub fn upper_roots(&self) -> impl Iterator<Item = &Complex64> {
        self.roots.iter().filter(|r| r.im >= 0.0)
    }
}

/// Chebyshev points `x_j = cos(j pi / N)` and the differentiation matrix on them.
pub fn chebyshev_differentiation(order: usize) -> (Vec<f64>, DMatrix<f64>) {
    assert!(order >= 1);
    let n = order;
    let x: Vec<f64> = (0..=n).map(|j| (j as f64 * PI / n as f64).cos()).collect();
    let c = |j: usize| {
        let base = if j == 0 || j == n { 2.0 } else { 1.0 };
        if j % 2 == 0 {
            base
        } else {
            -base
        }
    };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
                row_sum += d[(i, j)];
            }
        }
        d[(i, i)] = -row_sum;
    }
    (x, d)
}

/// Collocated generator for the delayed system with `order` history nodes.
pub fn generator_matrix(sys: &DelayQuadratic, g: f64, tau: f64, order: usize) -> DMatrix<f64> {
    assert!(tau > 0.0, "generator_matrix needs a positive delay");
    let n = sys.dim();
    let minv = sys.mass.clone().try_inverse().expect("mass matrix must be invertible");
    let stiff = &minv * &sys.stiffness;
    let damp = &minv * &sys.damping;
    let feed = &minv * &sys.input * g;
    let size = 2 * n + order;
    let mut a = DMatrix::zeros(size, size);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        for j in 0..n {
            a[(n + i, j)] = -stiff[(i, j)];
            a[(n + i, n + j)] = -damp[(i, j)];
        }
        a[(n + i, size - 1)] = feed[i];
    }
    let (_, d) = chebyshev_differentiation(order);
    let scale = 2.0 / tau;
    for i in 1..=order {
        let row = 2 * n + i - 1;
        for j in 0..n {
            a[(row, j)] = scale * d[(i, 0)] * sys.sensor[j];
        }
        for j in 1..=order {
            a[(row, 2 * n + j - 1)] = scale * d[(i, j)];
        }
    }
    a
}

fn eigenvalues(mut a: DMatrix<f64>) -> Option<Vec<Complex64>> {
    balance_parlett_reinsch(&mut a);
    let schur = Schur::try_new(a, f64::EPSILON, 20_000)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues of the delay-free pencil `M s^2 + C s + (K - g b e^T)`.
pub fn delay_free_eigenvalues(sys: &DelayQuadratic, g: f64) -> Option<Vec<Complex64>> {
    eigenvalues(sys.companion(&sys.undelayed_stiffness(g)))
}

fn is_delay_free(g: f64, tau: f64) -> bool {
    g == 0.0 || tau == 0.0
}

struct Polisher<'a> {
    sys: &'a DelayQuadratic,
    g: f64,
    tau: f64,
    residual_tol: f64,
}

impl Polisher<'_> {
    fn log_det(&self, s: Complex64) -> LogDet {
        if is_delay_free(self.g, self.tau) {
            self.sys.log_det(self.g, 0.0, s)
        } else {
            self.sys.log_det(self.g, self.tau, s)
        }
    }

    fn residual(&self, s: Complex64) -> f64 {
        let ld = self.log_det(s);
        if ld.is_root_hit() {
            0.0
        } else {
            ld.normalized_abs()
        }
    }

    /// Polished roots in the closed upper half-plane, deduplicated.
    fn polish(&self, candidates: &[Complex64], cutoff: f64) -> Vec<Complex64> {
        let f = |s: Complex64| self.log_det(s);
        let mut out: Vec<Complex64> = Vec::new();
        for &c in candidates {
            if c.re < cutoff || !c.re.is_finite() || !c.im.is_finite() {
                continue;
            }
            let start = if c.im < 0.0 { c.conj() } else { c };
            let Some(mut r) = newton_polish(&f, start, 60) else { continue };
            if r.im < 0.0 {
                r = r.conj();
            }
            if r.im.abs() <= 1e-9 * (1.0 + r.norm()) {
                let real = Complex64::new(r.re, 0.0);
                if self.residual(real) <= self.residual_tol {
                    r = real;
                }
            }
            if self.residual(r) > self.residual_tol {
                continue;
            }
            if !out.iter().any(|q| (q - r).norm() <= 1e-7 * (1.0 + r.norm())) {
                out.push(r);
            }
        }
        out
    }
}

fn candidates(sys: &DelayQuadratic, g: f64, tau: f64, order: usize) -> Option<Vec<Complex64>> {
    if is_delay_free(g, tau) {
        delay_free_eigenvalues(sys, g)
    } else {
        eigenvalues(generator_matrix(sys, g, tau, order))
    }
}

fn root_sets_agree(a: &[Complex64], b: &[Complex64], left: f64, tol: f64) -> bool {
    let pick = |v: &[Complex64]| v.iter().copied().filter(|r| r.re > left).collect::<Vec<_>>();
    let (a, b) = (pick(a), pick(b));
    a.len() == b.len()
        && a.iter().all(|r| b.iter().any(|q| (q - r).norm() <= tol * (1.0 + r.norm())))
}

fn abscissa_of(upper: &[Complex64], re_max: f64) -> f64 {
    upper.iter().filter(|r| r.re < re_max).map(|r| r.re).fold(f64::NEG_INFINITY, f64::max)
}

fn full_count(upper: &[Complex64], rect: &Rect) -> usize {
    upper.iter().filter(|r| rect.contains(**r)).map(|r| if r.im > 0.0 { 2 } else { 1 }).sum()
}

/// Left edge at or below `left` that keeps `clearance` from every known root's real part.
fn clear_edge(upper: &[Complex64], mut left: f64, clearance: f64) -> f64 {
    let mut re: Vec<f64> = upper.iter().map(|r| r.re).filter(|r| r.is_finite()).collect();
    re.sort_by(|a, b| b.total_cmp(a));
    for r in re {
        if (r - left).abs() < clearance {
            left = r - clearance;
        }
    }
    left
}

enum Certificate {
    Counted(Rect, usize),
    Mismatch(Rect, usize, usize),
    Failed(ContourError),
}

/// Certifies the strip left of `alpha`. The left edge is kept clear of the polished roots
/// (a root hugging the contour concentrates the phase swing into a sliver the sampler can
/// step over) and is moved further out if the count still disagrees or a root sits on it.
fn certify(pol: &Polisher<'_>, alpha: f64, upper: &[Complex64], opts: &SpectrumOptions) -> (Certificate, f64) {
    let f = |s: Complex64| pol.log_det(s);
    let clearance = 0.1 * opts.margin;
    let mut left = alpha - opts.margin;
    let mut last = None;
    let mut rho = 0.0;
    for attempt in 0..4 {
        left = clear_edge(upper, left, clearance);
        rho = pol.sys.envelope_radius(pol.g, pol.tau, left) * 1.01 + 1.0;
        let rect = Rect { re_min: left, re_max: opts.re_max, im_min: -rho, im_max: rho };
        match count_zeros(&f, &rect) {
            Ok(c) => {
                let expected = full_count(upper, &rect);
                if c == expected {
                    return (Certificate::Counted(rect, c), rho);
                }
                last = Some(Certificate::Mismatch(rect, c, expected));
            }
            Err(e) => last = Some(Certificate::Failed(e)),
        }
        left -= opts.margin * 0.137 * (attempt + 1) as f64;
    }
    (last.expect("at least one attempt"), rho)
}

/// Rightmost roots of `det Q(s; g, tau) = 0` with certification.
pub fn spectrum(sys: &DelayQuadratic, g: f64, tau: f64, opts: &SpectrumOptions) -> SpectrumReport {
    assert!(tau >= 0.0 && tau.is_finite(), "delay must be finite and >= 0");
    let pol = Polisher { sys, g, tau, residual_tol: opts.residual_tol };
    let delay_free = is_delay_free(g, tau);
    let mut order = if delay_free { 0 } else { opts.order_start.max(2) };
    let mut previous: Option<Vec<Complex64>> = None;
    let mut note: Option<String>;
    let mut best: Option<(Vec<Complex64>, usize)> = None;
    loop {
        let Some(cands) = candidates(sys, g, tau, order) else {
            note = Some(format!("eigenvalue iteration failed at order {order}"));
            break;
        };
        let rightmost = cands.iter().filter(|c| c.re.is_finite()).map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let cutoff = rightmost.min(opts.re_max) - opts.margin - 30.0;
        let upper = pol.polish(&cands, cutoff);
        let alpha = abscissa_of(&upper, opts.re_max);
        best = Some((upper.clone(), order));
        let settled = delay_free
            || previous
                .as_ref()
                .is_some_and(|prev| root_sets_agree(prev, &upper, alpha - opts.margin, opts.agreement_tol));
        if settled && alpha.is_finite() {
            let (cert, rho) = certify(&pol, alpha, &upper, opts);
            match cert {
                Certificate::Counted(rect, counted) => {
                    return finish(&pol, upper, order, true, Some(rect), Some(counted), rho, opts, None);
                }
                Certificate::Mismatch(rect, counted, expected) => {
                    note = Some(format!("argument principle counts {counted} roots in {rect:?}, found {expected}"));
                }
                Certificate::Failed(e) => note = Some(format!("certification failed: {e}")),
            }
        } else if !alpha.is_finite() {
            note = Some(format!("no root polished at order {order}"));
        } else {
            note = Some(format!("root sets differ between orders {} and {order}", order / 2));
        }
        if delay_free || order * 2 > opts.order_max {
            break;
        }
        previous = Some(upper);
        order *= 2;
    }
    let (upper, order) = best.unwrap_or_default();
    let alpha = abscissa_of(&upper, opts.re_max);
    let rho = if alpha.is_finite() { sys.envelope_radius(g, tau, alpha - opts.margin) } else { f64::INFINITY };
    finish(&pol, upper, order, false, None, None, rho, opts, note)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    pol: &Polisher<'_>,
    upper: Vec<Complex64>,
    order: usize,
    converged: bool,
    rect: Option<Rect>,
    counted: Option<usize>,
    rho: f64,
    opts: &SpectrumOptions,
    note: Option<String>,
) -> SpectrumReport {
    let alpha = abscissa_of(&upper, opts.re_max);
    let left = rect.map(|r| r.re_min).unwrap_or(alpha - opts.margin);
    let mut roots: Vec<Complex64> = upper
        .iter()
        .filter(|r| r.re > left && r.re < opts.re_max)
        .flat_map(|&r| if r.im > 0.0 { vec![r, r.conj()] } else { vec![r] })
        .collect();
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let residuals = roots.iter().map(|&r| pol.residual(r)).collect();
    let right_bound = pol.sys.envelope_radius(pol.g, pol.tau, opts.re_max);
    SpectrumReport {
        roots,
        abscissa: alpha,
        discretization_order: order,
        converged,
        residuals,
        rect,
        counted,
        envelope_radius: rho,
        right_side_certified: right_bound < opts.re_max,
        note,
    }
}

/// Delay-free spectrum from the mass-symmetrized linearization
/// `[[0, I], [-M^-1/2 K_g M^-1/2, -M^-1/2 C M^-1/2]]`, a second route to the eigenvalues
/// that [`spectrum`] gets from the plain companion form.
pub fn symmetrized_eigenvalues(sys: &DelayQuadratic, g: f64) -> Option<Vec<Complex64>> {
    let n = sys.dim();
    let w: Vec<f64> = sys.mass.diagonal().iter().map(|m| 1.0 / m.sqrt()).collect();
    let k = sys.undelayed_stiffness(g);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        for j in 0..n {
            a[(n + i, j)] = -w[i] * k[(i, j)] * w[j];
            a[(n + i, n + j)] = -w[i] * sys.damping[(i, j)] * w[j];
        }
    }
    eigenvalues(a)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DelayFreeCheck {
    pub g: f64,
    /// Largest `|root - nearest oracle eigenvalue| / (1 + |root|)`.
    pub max_deviation: f64,
    pub reported: usize,
    /// Oracle eigenvalues inside the certified rectangle.
    pub expected: usize,
    pub passed: bool,
}

/// Compares [`spectrum`] at `tau = 0` with [`symmetrized_eigenvalues`].
pub fn check_delay_free(sys: &DelayQuadratic, g: f64, opts: &SpectrumOptions, tol: f64) -> DelayFreeCheck {
    let rep = spectrum(sys, g, 0.0, opts);
    let oracle = symmetrized_eigenvalues(sys, g).unwrap_or_default();
    let max_deviation = rep
        .roots
        .iter()
        .map(|r| oracle.iter().map(|q| (q - r).norm()).fold(f64::INFINITY, f64::min) / (1.0 + r.norm()))
        .fold(0.0, f64::max);
    let expected = rep.rect.map_or(0, |rect| oracle.iter().filter(|q| rect.contains(**q)).count());
    DelayFreeCheck {
        g,
        max_deviation,
        reported: rep.roots.len(),
        expected,
        passed: rep.converged && !oracle.is_empty() && max_deviation <= tol && expected == rep.roots.len(),
    }
}
