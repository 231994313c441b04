//! Reference computations shared by the integration tests.
//!
//! Everything here is written against plain `Vec` storage and textbook algorithms so it
//! shares no numerical code with the library.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ncva_core::{build_system, ChainModel, Complex64, SecondOrderSystem};
use rand::Rng;
use std::f64::consts::PI;

pub type C = Complex64;
pub type CMat = Vec<Vec<C>>;

/// Reference tuning sets: (target, Hz, branch k, g, tau).
pub const REFERENCE_SETS: [(usize, f64, u32, f64, f64); 6] = [
    (1, 4.2, 1, -65.34, 0.3263),
    (2, 4.2, 0, -124.14, 0.0165),
    (3, 4.2, 0, -302.47, 0.0146),
    (1, 8.3, 0, -1011.59, 0.0018),
    (2, 8.3, 0, -688.13, 0.0073),
    (3, 8.3, 0, -956.08, 0.0040),
];

pub fn three_cart() -> SecondOrderSystem {
    build_system(&ChainModel::three_cart_setup()).unwrap()
}

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Random chain with `d` masses, every damper strictly positive, `p <= n <= dist`.
pub fn random_chain<R: Rng>(rng: &mut R, d: usize) -> (ChainModel, usize) {
    let p = rng.random_range(1..=d);
    let n = rng.random_range(p..=d);
    let dist = rng.random_range(n..=d);
    let model = ChainModel {
        masses: (0..d).map(|_| rng.random_range(0.2..2.0)).collect(),
        stiffnesses: (0..=d).map(|_| rng.random_range(200.0..1500.0)).collect(),
        dampings: (0..=d).map(|_| rng.random_range(0.2..6.0)).collect(),
        absorber: ncva_core::Absorber {
            m: rng.random_range(0.2..1.0),
            k: rng.random_range(200.0..800.0),
            c: rng.random_range(0.2..3.0),
        },
        p,
        n: Some(n),
        dist: Some(dist),
    };
    (model, n)
}

pub fn lin_sys_dim(sys: &SecondOrderSystem) -> usize {
    sys.mass.nrows()
}

/// `M s^2 + C s + K - g b_u e_a^T e^{-s tau}` entry by entry, restricted to the leading `dim` rows.
pub fn char_matrix(sys: &SecondOrderSystem, dim: usize, g: f64, tau: f64, s: C) -> CMat {
    let delay = (-s * tau).exp();
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let mut v = s * s * sys.mass[(i, j)] + s * sys.damping[(i, j)] + sys.stiffness[(i, j)];
                    if j == 0 {
                        v -= delay * g * sys.b_u[i];
                    }
                    v
                })
                .collect()
        })
        .collect()
}

/// Row norms of the entrywise term moduli of [`char_matrix`].
pub fn term_rows(sys: &SecondOrderSystem, dim: usize, g: f64, tau: f64, s: C) -> Vec<f64> {
    let delay = (-s.re * tau).exp();
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let mut v = sys.mass[(i, j)].abs() * s.norm_sqr()
                        + sys.damping[(i, j)].abs() * s.norm()
                        + sys.stiffness[(i, j)].abs();
                    if j == 0 {
                        v += g.abs() * sys.b_u[i].abs() * delay;
                    }
                    v * v
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(a: &CMat) -> C {
    let n = a.len();
    let mut m = a.clone();
    let mut d = c(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm())).unwrap();
        if m[piv][col] == c(0.0, 0.0) {
            return c(0.0, 0.0);
        }
        if piv != col {
            m.swap(piv, col);
            d = -d;
        }
        d *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..n {
                let t = m[col][k];
                m[r][k] -= f * t;
            }
        }
    }
    d
}

/// Laplace expansion along the first row.
pub fn det_cofactor(a: &CMat) -> C {
    let n = a.len();
    if n == 1 {
        return a[0][0];
    }
    let mut total = c(0.0, 0.0);
    for j in 0..n {
        let minor: CMat = a[1..].iter().map(|row| row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v).collect()).collect();
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        total += a[0][j] * det_cofactor(&minor) * sign;
    }
    total
}

/// Solves `a x = b` by Gauss-Jordan elimination with partial pivoting.
pub fn solve(a: &CMat, b: &[C]) -> Vec<C> {
    let n = a.len();
    let mut m: CMat = a.iter().zip(b).map(|(row, bi)| row.iter().copied().chain([*bi]).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm())).unwrap();
        m.swap(piv, col);
        let p = m[col][col];
        for k in col..=n {
            m[col][k] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                for k in col..=n {
                    let t = m[col][k];
                    m[r][k] -= f * t;
                }
            }
        }
    }
    m.iter().map(|row| row[n]).collect()
}

/// Disturbance-to-coordinate transfer by Cramer's rule: replace column `n` with `b_f`.
pub fn transfer_cramer(sys: &SecondOrderSystem, n: usize, g: f64, tau: f64, omega: f64) -> C {
    let dim = lin_sys_dim(sys);
    let s = c(0.0, omega);
    let r = char_matrix(sys, dim, g, tau, s);
    let mut rn = r.clone();
    for i in 0..dim {
        rn[i][n] = c(sys.b_f[i], 0.0);
    }
    det(&rn) / det(&r)
}

/// `|z(s)|` of the bordered matrix `[[R, -b_f], [e_n^T, 0]]` over the product of its row term norms.
pub fn normalized_bordered(sys: &SecondOrderSystem, n: usize, g: f64, tau: f64, s: C) -> f64 {
    let dim = lin_sys_dim(sys);
    let mut z = char_matrix(sys, dim, g, tau, s);
    let rows = term_rows(sys, dim, g, tau, s);
    for (i, row) in z.iter_mut().enumerate() {
        row.push(c(-sys.b_f[i], 0.0));
    }
    let mut last = vec![c(0.0, 0.0); dim + 1];
    last[n] = c(1.0, 0.0);
    z.push(last);
    let scale: f64 = rows.iter().zip(sys.b_f.iter()).map(|(r, b)| r.hypot(*b)).product();
    det(&z).norm() / scale
}

/// Normalized characteristic residual `|det R(s)| / prod(row term norms)` on the leading `dim` rows.
pub fn normalized_char(sys: &SecondOrderSystem, dim: usize, g: f64, tau: f64, s: C) -> f64 {
    let rows = term_rows(sys, dim, g, tau, s);
    det(&char_matrix(sys, dim, g, tau, s)).norm() / rows.iter().product::<f64>()
}

/// Roots of `det(M s^2 + C s + K - g b_u e_a^T)` (the undelayed loop) on the leading `dim` rows.
///
/// The determinant polynomial is recovered by a discrete Fourier transform of samples on a
/// circle, its roots located with Aberth-Ehrlich iterations and each one polished by Newton
/// on the matrix determinant using `f'/f = tr(P^-1 P')`.
pub fn delay_free_roots(sys: &SecondOrderSystem, dim: usize, g: f64) -> Vec<C> {
    let deg = 2 * dim;
    let p = |s: C| char_matrix(sys, dim, g, 0.0, s);
    let k0 = det(&p(c(0.0, 0.0))).norm();
    let m0: f64 = (0..dim).map(|i| sys.mass[(i, i)]).product();
    let r = if k0 > 0.0 { (k0 / m0).powf(1.0 / deg as f64) } else { 1.0 };
    let nsamp = deg + 9;
    let samples: Vec<C> = (0..nsamp).map(|j| det(&p(C::from_polar(r, 2.0 * PI * j as f64 / nsamp as f64)))).collect();
    let coeffs: Vec<C> = (0..=deg)
        .map(|k| {
            samples
                .iter()
                .enumerate()
                .map(|(j, v)| v * C::from_polar(1.0, -2.0 * PI * (j * k) as f64 / nsamp as f64))
                .sum::<C>()
                / nsamp as f64
        })
        .collect();
    let scaled = aberth(&coeffs);
    scaled.into_iter().map(|w| newton_det(sys, dim, g, w * r)).collect()
}

fn horner(coeffs: &[C], w: C) -> (C, C) {
    let mut v = c(0.0, 0.0);
    let mut dv = c(0.0, 0.0);
    for a in coeffs.iter().rev() {
        dv = dv * w + v;
        v = v * w + a;
    }
    (v, dv)
}

/// All roots of `sum coeffs[k] w^k`.
fn aberth(coeffs: &[C]) -> Vec<C> {
    let deg = coeffs.len() - 1;
    let mut w: Vec<C> = (0..deg).map(|k| C::from_polar(1.0, 2.0 * PI * (k as f64 + 0.25) / deg as f64)).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..deg {
            let (v, dv) = horner(coeffs, w[k]);
            let ratio = v / dv;
            let repulse: C = (0..deg).filter(|&j| j != k).map(|j| 1.0 / (w[k] - w[j])).sum();
            let step = ratio / (1.0 - ratio * repulse);
            w[k] -= step;
            moved = moved.max(step.norm() / (1.0 + w[k].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    w
}

fn newton_det(sys: &SecondOrderSystem, dim: usize, g: f64, mut s: C) -> C {
    for _ in 0..50 {
        let p = char_matrix(sys, dim, g, 0.0, s);
        let dp: CMat = (0..dim)
            .map(|i| (0..dim).map(|j| s * 2.0 * sys.mass[(i, j)] + sys.damping[(i, j)]).collect())
            .collect();
        // tr(P^-1 P') column by column
        let mut trace = c(0.0, 0.0);
        for j in 0..dim {
            let col: Vec<C> = (0..dim).map(|i| dp[i][j]).collect();
            trace += solve(&p, &col)[j];
        }
        if !trace.is_finite() || trace.norm() == 0.0 {
            break;
        }
        let step = 1.0 / trace;
        s -= step;
        if step.norm() <= 1e-15 * (1.0 + s.norm()) {
            break;
        }
    }
    s
}

/// Zeros of `f` inside the rectangle `[re0, re1] x [im0, im1]` from the winding of `f` along
/// its boundary. Edges are bisected until consecutive samples differ in phase by under 0.3 rad.
pub fn winding_count<F: Fn(C) -> C>(f: &F, re0: f64, re1: f64, im0: f64, im1: f64) -> i64 {
    let corners = [c(re0, im0), c(re1, im0), c(re1, im1), c(re0, im1)];
    let mut total = 0.0;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let pieces = 400;
        for i in 0..pieces {
            let s0 = a + (b - a) * (i as f64 / pieces as f64);
            let s1 = a + (b - a) * ((i + 1) as f64 / pieces as f64);
            total += edge_phase(f, s0, s1, 0);
        }
    }
    (total / (2.0 * PI)).round() as i64
}

fn edge_phase<F: Fn(C) -> C>(f: &F, a: C, b: C, depth: u32) -> f64 {
    let d = (f(b) / f(a)).arg();
    if d.abs() < 0.3 || depth > 30 {
        return d;
    }
    let mid = (a + b) * 0.5;
    edge_phase(f, a, mid, depth + 1) + edge_phase(f, mid, b, depth + 1)
}

/// Harmonic forcing `amplitude cos(omega t)` with the delayed feedback switched on from `t = 0`.
pub struct StepsProblem<'a> {
    pub sys: &'a SecondOrderSystem,
    pub g: f64,
    pub tau: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
}

impl StepsProblem<'_> {
    fn first_order(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let n = self.sys.mass.nrows();
        let minv = self.sys.mass.clone().try_inverse().unwrap();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        a.view_mut((0, n), (n, n)).fill_with_identity();
        a.view_mut((n, 0), (n, n)).copy_from(&(-&minv * &self.sys.stiffness));
        a.view_mut((n, n), (n, n)).copy_from(&(-&minv * &self.sys.damping));
        let mut bf = DVector::zeros(2 * n);
        bf.rows_mut(n, n).copy_from(&(&minv * &self.sys.b_f));
        let mut bu = DVector::zeros(2 * n);
        bu.rows_mut(n, n).copy_from(&(&minv * &self.sys.b_u));
        (a, bf, bu)
    }

    /// Augmented generator on the `m`-th delay interval. Block `i` holds `y(s + i tau)` for
    /// local time `s` in `[0, tau]`; the trailing entries are `cos(omega s)`, `sin(omega s)`
    /// and the constant 1 carrying the pre-start history of `x_a`.
    fn interval_generator(&self, m: usize) -> DMatrix<f64> {
        let (a, bf, bu) = self.first_order();
        let ns = a.nrows();
        let dim = m * ns + 3;
        let (ic, is, ione) = (m * ns, m * ns + 1, m * ns + 2);
        let mut l = DMatrix::zeros(dim, dim);
        for i in 0..m {
            let o = i * ns;
            l.view_mut((o, o), (ns, ns)).copy_from(&a);
            let phase = self.omega * i as f64 * self.tau;
            for r in 0..ns {
                l[(o + r, ic)] += self.amplitude * bf[r] * phase.cos();
                l[(o + r, is)] -= self.amplitude * bf[r] * phase.sin();
                if i == 0 {
                    l[(o + r, ione)] += self.g * bu[r] * self.x0[0];
                } else {
                    l[(o + r, (i - 1) * ns)] += self.g * bu[r];
                }
            }
        }
        l[(ic, is)] = -self.omega;
        l[(is, ic)] = self.omega;
        l
    }

    fn initial(&self) -> DVector<f64> {
        let n = self.sys.mass.nrows();
        let mut y = DVector::zeros(2 * n);
        for i in 0..n {
            y[i] = self.x0[i];
            y[n + i] = self.v0[i];
        }
        y
    }

    /// Exact states at `t` for each requested time (positions then velocities).
    pub fn states(&self, times: &[f64]) -> Vec<DVector<f64>> {
        let ns = 2 * self.sys.mass.nrows();
        let t_max = times.iter().copied().fold(0.0, f64::max);
        let intervals = (t_max / self.tau).floor() as usize + 1;
        let mut nodes = vec![self.initial()];
        let mut gens = Vec::new();
        for m in 1..=intervals {
            let l = self.interval_generator(m);
            if m < intervals {
                let z = (&l * self.tau).exp() * self.packed(&nodes);
                nodes.push(z.rows((m - 1) * ns, ns).into_owned());
            }
            gens.push(l);
        }
        times
            .iter()
            .map(|&t| {
                let m = ((t / self.tau).floor() as usize).min(intervals - 1) + 1;
                let s = t - (m - 1) as f64 * self.tau;
                let z = (&gens[m - 1] * s).exp() * self.packed(&nodes[..m]);
                z.rows((m - 1) * ns, ns).into_owned()
            })
            .collect()
    }

    fn packed(&self, nodes: &[DVector<f64>]) -> DVector<f64> {
        let ns = nodes[0].len();
        let mut z = DVector::zeros(nodes.len() * ns + 3);
        for (i, y) in nodes.iter().enumerate() {
            z.rows_mut(i * ns, ns).copy_from(y);
        }
        let k = nodes.len() * ns;
        z[k] = 1.0;
        z[k + 2] = 1.0;
        z
    }
}
