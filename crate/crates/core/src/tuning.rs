//! Gain/delay tuning that assigns a resonant root pair `+-j omega` to the resonant substructure.
//!
//! Applying the rank-one determinant identity to
//! `det(A_R(s) - g b_u e_a^T e^{-s tau}) = 0` at `s = j omega` gives
//! `g e^{-j omega tau} = q(j omega) = 1 / (e_a^T A_R(j omega)^{-1} b_u)`,
//! where `A_R` is the passive resonant block. Every `(g, tau)` with that product works;
//! they come in a positive-gain and a negative-gain family, each periodic in `tau`
//! with period `2 pi / omega`.

use crate::linalg;
use crate::rad_to_hz;
use crate::substructure::RsDecomposition;
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Positive,
    Negative,
}

impl Family {
    pub fn short(self) -> &'static str {
        match self {
            Family::Positive => "pos",
            Family::Negative => "neg",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pos" | "positive" | "+" => Ok(Family::Positive),
            "neg" | "negative" | "-" => Ok(Family::Negative),
            other => Err(format!("unknown family '{other}' (expected pos or neg)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuningError {
    #[error("design frequency must be finite and > 0 rad/s, got {0}")]
    Frequency(f64),
    #[error("passive RS resonance at {omega} rad/s: the passive resonant block is singular")]
    PassiveResonance { omega: f64 },
    #[error("no finite gain assigns a root at {omega} rad/s (e_a^T A_R^-1 b_u vanishes)")]
    InfiniteGain { omega: f64 },
}

/// One solution `(g, tau)` of the resonance condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrTuning {
    /// N/m
    pub g: f64,
    /// s; meaningless when `degenerate`
    pub tau: f64,
    pub family: Family,
    pub k: u32,
    /// Branch index that was asked for; differs from `k` when that branch had `tau < 0`.
    pub requested_k: u32,
    /// rad/s
    pub omega: f64,
    /// `|1 - g e_a^T A_R(j omega)^{-1} b_u e^{-j omega tau}|`
    pub residual: f64,
    /// The passive substructure already resonates at `omega`: `g = 0`, `tau` indeterminate.
    pub degenerate: bool,
}

impl DrTuning {
    pub fn omega_hz(&self) -> f64 {
        rad_to_hz(self.omega)
    }
}

fn check_omega(omega: f64) -> Result<(), TuningError> {
    if omega.is_finite() && omega > 0.0 {
        Ok(())
    } else {
        Err(TuningError::Frequency(omega))
    }
}

/// Largest `|m| w^2 + |c| w + |k|` over the resonant block entries.
fn term_scale(rs: &RsDecomposition, omega: f64) -> f64 {
    (0..rs.n * rs.n)
        .map(|i| rs.mass_r[i].abs() * omega * omega + rs.damping_r[i].abs() * omega + rs.stiffness_r[i].abs())
        .fold(0.0, f64::max)
}

/// `e_a^T A_R(j omega)^{-1} b_u` by one complex solve.
fn inverse_ratio(rs: &RsDecomposition, omega: f64) -> Result<Complex64, TuningError> {
    let a = rs.passive_block(Complex64::new(0.0, omega));
    let b = DVector::from_iterator(rs.n, rs.b_u.iter().map(|&x| Complex64::new(x, 0.0)));
    let x = linalg::solve_scaled(&a, &b, term_scale(rs, omega)).ok_or(TuningError::PassiveResonance { omega })?;
    Ok(rs.e_a.iter().zip(x.iter()).map(|(e, xi)| xi * *e).sum())
}

/// `q(j omega)` such that `g e^{-j omega tau} = q` places a root at `j omega`.
pub fn resonance_ratio(rs: &RsDecomposition, omega: f64) -> Result<Complex64, TuningError> {
    check_omega(omega)?;
    let inv = inverse_ratio(rs, omega)?;
    if inv.norm() == 0.0 {
        return Err(TuningError::InfiniteGain { omega });
    }
    Ok(1.0 / inv)
}

/// Residual of the resonance condition at `s = j omega`, evaluated independently of `q`.
pub fn tuning_residual(rs: &RsDecomposition, g: f64, tau: f64, omega: f64) -> f64 {
    match inverse_ratio(rs, omega) {
        Ok(inv) => (1.0 - g * inv * Complex64::from_polar(1.0, -omega * tau)).norm(),
        Err(_) => if g == 0.0 { 0.0 } else { f64::INFINITY },
    }
}

fn branch_delay(q: Complex64, omega: f64, family: Family, k: u32) -> f64 {
    let arg = principal_arg(q);
    let offset = match family {
        Family::Positive => -arg,
        Family::Negative => PI - arg,
    };
    (offset + 2.0 * PI * k as f64) / omega
}

/// Argument in (-pi, pi].
fn principal_arg(q: Complex64) -> f64 {
    let a = q.arg();
    if a == -PI {
        PI
    } else {
        a
    }
}

fn first_admissible_k(q: Complex64, omega: f64, family: Family) -> u32 {
    if branch_delay(q, omega, family, 0) < 0.0 {
        1
    } else {
        0
    }
}

/// Gain and delay of branch `k` in the given family.
///
/// A branch with negative delay is replaced by the first branch with `tau >= 0`;
/// `requested_k` keeps the original index.
pub fn tune(rs: &RsDecomposition, omega: f64, family: Family, k: u32) -> Result<DrTuning, TuningError> {
    check_omega(omega)?;
    let q = match resonance_ratio(rs, omega) {
        Ok(q) => q,
        Err(TuningError::PassiveResonance { .. }) => return Ok(degenerate(omega, family, k)),
        Err(e) => return Err(e),
    };
    if q.norm() <= 1e-12 * term_scale(rs, omega) {
        return Ok(degenerate(omega, family, k));
    }
    let k_used = k.max(first_admissible_k(q, omega, family));
    let tau = branch_delay(q, omega, family, k_used);
    let g = match family {
        Family::Positive => q.norm(),
        Family::Negative => -q.norm(),
    };
    Ok(DrTuning {
        g,
        tau,
        family,
        k: k_used,
        requested_k: k,
        omega,
        residual: tuning_residual(rs, g, tau, omega),
        degenerate: false,
    })
}

fn degenerate(omega: f64, family: Family, k: u32) -> DrTuning {
    DrTuning { g: 0.0, tau: 0.0, family, k, requested_k: k, omega, residual: 0.0, degenerate: true }
}

/// The `k_max + 1` smallest-delay branches of each family, sorted by delay.
pub fn enumerate_tunings(rs: &RsDecomposition, omega: f64, k_max: u32) -> Result<Vec<DrTuning>, TuningError> {
    let q = resonance_ratio(rs, omega);
    let mut out = Vec::with_capacity(2 * (k_max as usize + 1));
    for family in [Family::Positive, Family::Negative] {
        let k0 = match q {
            Ok(q) => first_admissible_k(q, omega, family),
            Err(TuningError::PassiveResonance { .. }) => 0,
            Err(e) => return Err(e),
        };
        for k in k0..=k0 + k_max {
            out.push(tune(rs, omega, family, k)?);
        }
    }
    out.sort_by(|a, b| a.tau.total_cmp(&b.tau).then(a.family.cmp(&b.family)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_system, ChainModel};
    use crate::hz_to_rad;
    use crate::substructure::decompose;

    fn rs(n: usize) -> RsDecomposition {
        decompose(&build_system(&ChainModel::three_cart_setup()).unwrap(), n).unwrap()
    }

    #[test]
    fn collocated_ratio_is_scalar_dynamic_stiffness() {
        let w = hz_to_rad(4.2);
        let q = resonance_ratio(&rs(1), w).unwrap();
        let want = Complex64::new(407.0 - 0.520 * w * w, 1.80 * w);
        assert!((q - want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn family_relations_and_periodicity() {
        let w = hz_to_rad(6.1);
        let r = rs(2);
        for family in [Family::Positive, Family::Negative] {
            let t1 = tune(&r, w, family, 1).unwrap();
            let t2 = tune(&r, w, family, 2).unwrap();
            assert!((t2.tau - t1.tau - 2.0 * PI / w).abs() < 1e-12);
            assert!(t1.residual < 1e-10);
        }
        let p = tune(&r, w, Family::Positive, 1).unwrap();
        let n = tune(&r, w, Family::Negative, 1).unwrap();
        assert_eq!(p.g, -n.g);
        let gap = (n.tau - p.tau).rem_euclid(2.0 * PI / w);
        let half = PI / w;
        assert!((gap - half).abs() < 1e-12, "gap {gap} half {half}");
    }

    #[test]
    fn negative_delay_branch_is_skipped() {
        // at 4.2 Hz the collocated q has arg in (0, pi), so positive k=0 would need tau < 0
        let w = hz_to_rad(4.2);
        let t = tune(&rs(1), w, Family::Positive, 0).unwrap();
        assert_eq!(t.requested_k, 0);
        assert_eq!(t.k, 1);
        assert!(t.tau >= 0.0);
    }

    #[test]
    fn enumerate_counts() {
        let w = hz_to_rad(4.2);
        let all = enumerate_tunings(&rs(1), w, 0).unwrap();
        assert_eq!(all.len(), 2);
        let all = enumerate_tunings(&rs(1), w, 1).unwrap();
        assert_eq!(all.len(), 4);
        assert!(all.windows(2).all(|p| p[0].tau <= p[1].tau));
    }

    #[test]
    fn undamped_absorber_at_its_frequency_is_degenerate() {
        let mut model = ChainModel::three_cart_setup();
        model.absorber.c = 0.0;
        let r = decompose(&build_system(&model).unwrap(), 1).unwrap();
        let wa = (407.0f64 / 0.520).sqrt();
        let t = tune(&r, wa, Family::Negative, 0).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.g, 0.0);
    }

    #[test]
    fn rejects_bad_frequency() {
        assert_eq!(tune(&rs(1), 0.0, Family::Negative, 0), Err(TuningError::Frequency(0.0)));
    }

    #[test]
    fn family_parsing() {
        assert_eq!("neg".parse::<Family>().unwrap(), Family::Negative);
        assert_eq!("Positive".parse::<Family>().unwrap(), Family::Positive);
        assert!("x".parse::<Family>().is_err());
    }
}
