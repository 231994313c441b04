//! Frequency sweeps of the tuned closed loop: for each grid frequency, tune the DR on a
//! branch, compute the spectral abscissas of the resonant substructure (`alpha_rs`) and of
//! the overall system (`alpha_os`), and classify the point as admissible when
//! `alpha_os < 0` and `|alpha_rs| <= marginal_tol`.

use crate::chain::{ModelError, SecondOrderSystem};
use crate::hz_to_rad;
use crate::spectrum::{spectrum, SpectrumOptions};
use crate::substructure::{decompose, RsDecomposition};
use crate::system::DelayQuadratic;
use crate::tuning::{tune, Family};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub step_hz: f64,
    pub families: Vec<Family>,
    pub ks: Vec<u32>,
    /// Interval endpoints are refined by bisection to within this many Hz.
    pub resolution_hz: f64,
    /// `|alpha_rs|` at or below this (rad/s) counts as marginally stable.
    pub marginal_tol: f64,
    pub spectrum: SpectrumOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            start_hz: 2.0,
            stop_hz: 12.0,
            step_hz: 0.05,
            families: vec![Family::Negative],
            ks: vec![0, 1],
            resolution_hz: 0.01,
            marginal_tol: 1e-6,
            spectrum: SpectrumOptions::default(),
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<f64> {
        let count = ((self.stop_hz - self.start_hz) / self.step_hz).round() as usize + 1;
        (0..count)
            .map(|i| {
                let f = self.start_hz + i as f64 * self.step_hz;
                ((f * 1e9).round() / 1e9).min(self.stop_hz)
            })
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid sweep grid: {0}")]
    Grid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub omega_hz: f64,
    pub family: Family,
    pub k: u32,
    pub g: f64,
    pub tau: f64,
    pub alpha_rs: Option<f64>,
    pub alpha_os: Option<f64>,
    pub admissible: bool,
    /// Set when the point could not be evaluated.
    pub gap: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchSweep {
    pub family: Family,
    pub k: u32,
    pub points: Vec<SweepPoint>,
    pub intervals: Vec<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub n: usize,
    pub grid_hz: Vec<f64>,
    pub branches: Vec<BranchSweep>,
}

impl SweepResult {
    pub fn branch(&self, family: Family, k: u32) -> Option<&BranchSweep> {
        self.branches.iter().find(|b| b.family == family && b.k == k)
    }
}

struct Context<'a> {
    overall: DelayQuadratic,
    rs: RsDecomposition,
    resonant: DelayQuadratic,
    cfg: &'a SweepConfig,
}

/// Tunes on one branch at `f_hz` and classifies stability.
pub fn evaluate_point(
    sys: &SecondOrderSystem,
    n: usize,
    f_hz: f64,
    family: Family,
    k: u32,
    cfg: &SweepConfig,
) -> Result<SweepPoint, ModelError> {
    let rs = decompose(sys, n)?;
    let ctx = Context { overall: sys.closed_loop(), resonant: rs.resonant_system(), rs, cfg };
    Ok(ctx.point(f_hz, family, k))
}

impl Context<'_> {
    fn point(&self, f_hz: f64, family: Family, k: u32) -> SweepPoint {
        let mut p = SweepPoint {
            omega_hz: f_hz,
            family,
            k,
            g: f64::NAN,
            tau: f64::NAN,
            alpha_rs: None,
            alpha_os: None,
            admissible: false,
            gap: None,
        };
        let tuning = match tune(&self.rs, hz_to_rad(f_hz), family, k) {
            Ok(t) if !t.degenerate => t,
            Ok(_) => {
                p.gap = Some("degenerate tuning".into());
                return p;
            }
            Err(e) => {
                p.gap = Some(e.to_string());
                return p;
            }
        };
        p.g = tuning.g;
        p.tau = tuning.tau;
        // Branch index may have been bumped to keep tau >= 0.
        p.k = tuning.k;
        let rs_rep = spectrum(&self.resonant, tuning.g, tuning.tau, &self.cfg.spectrum);
        let os_rep = spectrum(&self.overall, tuning.g, tuning.tau, &self.cfg.spectrum);
        if rs_rep.converged {
            p.alpha_rs = Some(rs_rep.abscissa);
        }
        if os_rep.converged {
            p.alpha_os = Some(os_rep.abscissa);
        }
        match (p.alpha_rs, p.alpha_os) {
            (Some(a_rs), Some(a_os)) => p.admissible = a_os < 0.0 && a_rs.abs() <= self.cfg.marginal_tol,
            _ => {
                let note = [rs_rep.note, os_rep.note].into_iter().flatten().collect::<Vec<_>>().join("; ");
                p.gap = Some(format!("spectrum not converged: {note}"));
            }
        }
        p
    }

    fn admissible(&self, f_hz: f64, family: Family, k: u32) -> bool {
        self.point(f_hz, family, k).admissible
    }

    /// Bisects between an admissible and a non-admissible frequency.
    fn refine(&self, mut inside: f64, mut outside: f64, family: Family, k: u32) -> f64 {
        while (outside - inside).abs() > 2.0 * self.cfg.resolution_hz {
            let mid = 0.5 * (inside + outside);
            if self.admissible(mid, family, k) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    }

    fn intervals(&self, points: &[SweepPoint], family: Family, k: u32) -> Vec<Interval> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < points.len() {
            if !points[i].admissible {
                i += 1;
                continue;
            }
            let start = i;
            while i + 1 < points.len() && points[i + 1].admissible {
                i += 1;
            }
            let lo = if start == 0 {
                points[0].omega_hz
            } else {
                self.refine(points[start].omega_hz, points[start - 1].omega_hz, family, k)
            };
            let hi = if i + 1 == points.len() {
                points[i].omega_hz
            } else {
                self.refine(points[i].omega_hz, points[i + 1].omega_hz, family, k)
            };
            out.push(Interval { lo, hi });
            i += 1;
        }
        out
    }
}

/// Sweeps every requested `(family, k)` branch for target `n`.
///
/// Grid points are evaluated in parallel; results are merged in grid order, so the output
/// does not depend on the thread count.
pub fn sweep_admissible(sys: &SecondOrderSystem, n: usize, cfg: &SweepConfig) -> Result<SweepResult, SweepError> {
    if !(cfg.step_hz > 0.0) || !(cfg.start_hz > 0.0) || !(cfg.stop_hz >= cfg.start_hz) {
        return Err(SweepError::Grid(format!(
            "need 0 < start <= stop and step > 0, got start={}, stop={}, step={}",
            cfg.start_hz, cfg.stop_hz, cfg.step_hz
        )));
    }
    let rs = decompose(sys, n)?;
    let ctx = Context { overall: sys.closed_loop(), resonant: rs.resonant_system(), rs, cfg };
    let grid = cfg.grid();
    let mut branches = Vec::new();
    for &family in &cfg.families {
        for &k in &cfg.ks {
            let points: Vec<SweepPoint> = grid.par_iter().map(|&f| ctx.point(f, family, k)).collect();
            let intervals = ctx.intervals(&points, family, k);
            branches.push(BranchSweep { family, k, points, intervals });
        }
    }
    Ok(SweepResult { n, grid_hz: grid, branches })
}

/// Intersection of two sorted, disjoint interval lists.
pub fn intersect(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].lo.max(b[j].lo);
        let hi = a[i].hi.min(b[j].hi);
        if lo <= hi {
            out.push(Interval { lo, hi });
        }
        if a[i].hi < b[j].hi {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Intersection across several targets, each contributing one branch's interval list.
pub fn intersect_all<'a, I>(lists: I) -> Vec<Interval>
where
    I: IntoIterator<Item = &'a [Interval]>,
{
    let mut it = lists.into_iter();
    let Some(first) = it.next() else { return Vec::new() };
    it.fold(first.to_vec(), |acc, next| intersect(&acc, next))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi }
    }

    #[test]
    fn grid_has_expected_points() {
        let g = SweepConfig::default().grid();
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 2.0);
        assert_eq!(g[200], 12.0);
        assert_eq!(g[43], 4.15);
    }

    #[test]
    fn interval_intersection() {
        let a = [iv(4.27, 12.0)];
        let b = [iv(3.57, 5.28), iv(8.26, 12.0)];
        let c = [iv(3.31, 4.26), iv(6.75, 8.61), iv(10.17, 12.0)];
        let out = intersect_all([&a[..], &b[..], &c[..]]);
        assert_eq!(out, vec![iv(8.26, 8.61), iv(10.17, 12.0)]);
        assert!(intersect(&[iv(1.0, 2.0)], &[iv(3.0, 4.0)]).is_empty());
        assert!(intersect_all(std::iter::empty()).is_empty());
    }
}
