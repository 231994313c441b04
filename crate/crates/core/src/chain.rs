//! Chain description and assembly of the second-order model.
//!
//! Row/column ordering is `[x_a, x_1, ..., x_d]`: index 0 is always the absorber and
//! index `i` is primary mass `m_i`. Mass indices in [`ChainModel`] are 1-based, matching
//! the physical numbering of the chain.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("chain must contain at least one mass")]
    EmptyChain,
    #[error("{field}: expected {expected} entries, found {found}")]
    Length { field: &'static str, expected: usize, found: usize },
    #[error("{field}[{index}]: {reason} (got {value})")]
    Value { field: &'static str, index: usize, value: f64, reason: &'static str },
    #[error("absorber.{field}: {reason} (got {value})")]
    Absorber { field: &'static str, value: f64, reason: &'static str },
    #[error("absorber is not coupled to the chain: k_a and c_a are both zero")]
    Uncoupled,
    #[error("{field}: index {value} outside 1..={d}")]
    Index { field: &'static str, value: usize, d: usize },
    #[error(
        "deployment restriction violated: need p <= n <= dist, got p={p}, n={n}, dist={dist} \
         (no resonant substructure exists between the absorber and the target)"
    )]
    Deployment { p: usize, n: usize, dist: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Absorber {
    /// kg
    pub m: f64,
    /// N/m
    pub k: f64,
    /// N s/m
    pub c: f64,
}

/// Physical description of a `d`-mass chain with one absorber.
///
/// Both chain ends are attached to a rigid frame: `stiffnesses[0]`/`dampings[0]` connect
/// `m_1` to the frame and `stiffnesses[d]`/`dampings[d]` connect `m_d` to the frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainModel {
    pub masses: Vec<f64>,
    pub stiffnesses: Vec<f64>,
    pub dampings: Vec<f64>,
    pub absorber: Absorber,
    /// Mass carrying the absorber (1-based).
    pub p: usize,
    /// Mass to silence (1-based). Defaults to `p`.
    #[serde(default)]
    pub n: Option<usize>,
    /// Mass where the disturbance enters (1-based). Defaults to `d`.
    #[serde(default)]
    pub dist: Option<usize>,
}

impl ChainModel {
    /// The identified three-cart laboratory setup (DR on `m_1`, force on `m_3`).
    pub fn three_cart_setup() -> Self {
        ChainModel {
            masses: vec![1.175, 0.509, 0.705],
            stiffnesses: vec![1001.0, 749.0, 711.0, 950.0],
            dampings: vec![4.35, 0.85, 1.85, 4.95],
            absorber: Absorber { m: 0.520, k: 407.0, c: 1.80 },
            p: 1,
            n: Some(1),
            dist: Some(3),
        }
    }

    pub fn d(&self) -> usize {
        self.masses.len()
    }

    pub fn target(&self) -> usize {
        self.n.unwrap_or(self.p)
    }

    pub fn disturbance(&self) -> usize {
        self.dist.unwrap_or(self.d())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let model: ChainModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let d = self.d();
        if d == 0 {
            return Err(ModelError::EmptyChain);
        }
        for (field, v) in [("stiffnesses", &self.stiffnesses), ("dampings", &self.dampings)] {
            if v.len() != d + 1 {
                return Err(ModelError::Length { field, expected: d + 1, found: v.len() });
            }
        }
        for (i, &m) in self.masses.iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(ModelError::Value { field: "masses", index: i, value: m, reason: "must be finite and > 0" });
            }
        }
        for (field, v) in [("stiffnesses", &self.stiffnesses), ("dampings", &self.dampings)] {
            for (i, &x) in v.iter().enumerate() {
                if !(x >= 0.0) || !x.is_finite() {
                    return Err(ModelError::Value { field, index: i, value: x, reason: "must be finite and >= 0" });
                }
            }
        }
        let a = self.absorber;
        if !(a.m > 0.0) || !a.m.is_finite() {
            return Err(ModelError::Absorber { field: "m", value: a.m, reason: "must be finite and > 0" });
        }
        for (field, x) in [("k", a.k), ("c", a.c)] {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(ModelError::Absorber { field, value: x, reason: "must be finite and >= 0" });
            }
        }
        if a.k == 0.0 && a.c == 0.0 {
            return Err(ModelError::Uncoupled);
        }
        for (field, idx) in [("p", self.p), ("n", self.target()), ("dist", self.disturbance())] {
            if idx == 0 || idx > d {
                return Err(ModelError::Index { field, value: idx, d });
            }
        }
        check_deployment(self.p, self.target(), self.disturbance())
    }
}

pub(crate) fn check_deployment(p: usize, n: usize, dist: usize) -> Result<(), ModelError> {
    if p <= n && n <= dist {
        Ok(())
    } else {
        Err(ModelError::Deployment { p, n, dist })
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid chain config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid chain config: {0}")]
    Model(#[from] ModelError),
}

/// Matrices and input/selector vectors of `M x'' + C x' + K x = B_f f + B_u u`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderSystem {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub b_f: DVector<f64>,
    pub b_u: DVector<f64>,
    pub p: usize,
    pub dist: usize,
}

impl SecondOrderSystem {
    /// Number of primary masses.
    pub fn d(&self) -> usize {
        self.mass.nrows() - 1
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    /// `E_a`: selects the absorber coordinate.
    pub fn e_a(&self) -> DVector<f64> {
        self.selector(0)
    }

    /// `E_i`: selects primary mass `i` (1-based), i.e. row `i`.
    pub fn e_mass(&self, i: usize) -> DVector<f64> {
        assert!(i >= 1 && i <= self.d(), "mass index {i} outside 1..={}", self.d());
        self.selector(i)
    }

    fn selector(&self, row: usize) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim());
        e[row] = 1.0;
        e
    }
}

/// Assembles `M`, `C`, `K`, `B_f`, `B_u` by the parallel-spring interconnection rules.
///
/// Mass `i` has diagonal stiffness `k_i + k_{i+1}` (plus `k_a` at `i = p`) and couples to its
/// neighbours through `-k_i`, `-k_{i+1}`; the absorber row couples only to row `p`.
pub fn build_system(model: &ChainModel) -> Result<SecondOrderSystem, ModelError> {
    model.validate()?;
    let d = model.d();
    let dim = d + 1;
    let mut mass = DMatrix::zeros(dim, dim);
    mass[(0, 0)] = model.absorber.m;
    for (i, &m) in model.masses.iter().enumerate() {
        mass[(i + 1, i + 1)] = m;
    }
    let damping = assemble_springs(&model.dampings, model.absorber.c, model.p);
    let stiffness = assemble_springs(&model.stiffnesses, model.absorber.k, model.p);
    let mut b_f = DVector::zeros(dim);
    b_f[model.disturbance()] = 1.0;
    let mut b_u = DVector::zeros(dim);
    b_u[0] = 1.0;
    b_u[model.p] = -1.0;
    Ok(SecondOrderSystem { mass, damping, stiffness, b_f, b_u, p: model.p, dist: model.disturbance() })
}

fn assemble_springs(chain: &[f64], absorber: f64, p: usize) -> DMatrix<f64> {
    let d = chain.len() - 1;
    let mut a = DMatrix::zeros(d + 1, d + 1);
    for i in 1..=d {
        a[(i, i)] = chain[i - 1] + chain[i];
        if i < d {
            a[(i, i + 1)] = -chain[i];
            a[(i + 1, i)] = -chain[i];
        }
    }
    a[(0, 0)] += absorber;
    a[(p, p)] += absorber;
    a[(0, p)] -= absorber;
    a[(p, 0)] -= absorber;
    a
}

/// Harmonic disturbance `F cos(omega t)`.
pub fn harmonic_force(amplitude: f64, omega: f64, t: f64) -> f64 {
    amplitude * (omega * t).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn three_cart_rows_for_x1() {
        let sys = build_system(&ChainModel::three_cart_setup()).unwrap();
        let k_row: Vec<f64> = sys.stiffness.row(1).iter().copied().collect();
        assert_eq!(k_row, vec![-407.0, 1001.0 + 749.0 + 407.0, -749.0, 0.0]);
        let c_row: Vec<f64> = sys.damping.row(1).iter().copied().collect();
        let expected = [-1.80, 4.35 + 0.85 + 1.80, -0.85, 0.0];
        for (a, b) in c_row.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(sys.b_u.as_slice(), &[1.0, -1.0, 0.0, 0.0]);
        assert_eq!(sys.b_f.as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(sys.stiffness[(3, 3)], 711.0 + 950.0);
        assert_eq!(sys.mass.diagonal().as_slice(), &[0.520, 1.175, 0.509, 0.705]);
    }

    #[test]
    fn single_mass_chain() {
        let model = ChainModel {
            masses: vec![2.0],
            stiffnesses: vec![10.0, 20.0],
            dampings: vec![0.1, 0.2],
            absorber: Absorber { m: 0.5, k: 3.0, c: 0.0 },
            p: 1,
            n: Some(1),
            dist: None,
        };
        let sys = build_system(&model).unwrap();
        assert_eq!(sys.mass, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]));
        assert_eq!(sys.stiffness, DMatrix::from_row_slice(2, 2, &[3.0, -3.0, -3.0, 33.0]));
        assert_eq!(sys.dist, 1);
    }

    #[test]
    fn rejects_bad_models() {
        let mut m = ChainModel::three_cart_setup();
        m.masses[1] = 0.0;
        assert!(matches!(build_system(&m), Err(ModelError::Value { field: "masses", index: 1, .. })));

        let mut m = ChainModel::three_cart_setup();
        m.p = 2;
        m.n = Some(1);
        assert!(matches!(build_system(&m), Err(ModelError::Deployment { p: 2, n: 1, .. })));

        let mut m = ChainModel::three_cart_setup();
        m.absorber.k = 0.0;
        m.absorber.c = 0.0;
        assert_eq!(build_system(&m), Err(ModelError::Uncoupled));

        let mut m = ChainModel::three_cart_setup();
        m.stiffnesses.pop();
        assert!(matches!(m.validate(), Err(ModelError::Length { field: "stiffnesses", .. })));

        let mut m = ChainModel::three_cart_setup();
        m.absorber.m = -1.0;
        assert!(matches!(m.validate(), Err(ModelError::Absorber { field: "m", .. })));
    }

    #[test]
    fn json_config_roundtrip_and_errors() {
        let text = r#"{"masses":[1.175,0.509,0.705],"stiffnesses":[1001,749,711,950],
            "dampings":[4.35,0.85,1.85,4.95],"absorber":{"m":0.52,"k":407,"c":1.8},"p":1,"n":2,"dist":3}"#;
        let m = ChainModel::from_json(text).unwrap();
        assert_eq!(m.target(), 2);
        let bad = text.replace("0.509", "-0.509");
        let err = ChainModel::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("masses[1]"), "{err}");
        let typo = text.replace("\"dist\"", "\"dst\"");
        assert!(ChainModel::from_json(&typo).is_err());
    }

    #[test]
    fn selectors_pick_physical_coordinates() {
        let sys = build_system(&ChainModel::three_cart_setup()).unwrap();
        let x = DVector::from_vec(vec![10.0, 11.0, 12.0, 13.0]);
        assert_eq!(sys.e_a().dot(&x), 10.0);
        for i in 1..=3 {
            assert_eq!(sys.e_mass(i).dot(&x), 10.0 + i as f64);
        }
    }

    #[test]
    fn harmonic_force_values() {
        let w = 2.0 * PI * 4.2;
        assert_eq!(harmonic_force(3.0, w, 0.0), 3.0);
        assert_eq!(harmonic_force(0.0, w, 1.234), 0.0);
        let quarter = 0.25 / 4.2;
        assert!(harmonic_force(3.0, w, quarter).abs() < 1e-12);
    }
}
