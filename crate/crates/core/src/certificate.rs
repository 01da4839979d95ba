//! A-posteriori rank-1 certificate.
//!
//! For a planned position `p` with second moment `X_p` and a disk `(c, r)`:
//!
//! ```text
//! Δ = tr(X_p) − ‖p‖²                    trace gap
//! η = tr(X_p) − 2cᵀp + ‖c‖² − r²        lifted margin
//! η − Δ = ‖p − c‖² − r²                 true squared clearance
//! ```
//!
//! so `η ≥ 0` together with `|Δ| ≤ η` proves `p` lies outside the disk.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::solver::Solution;

/// Default certification tolerance in squared-distance units.
pub const DEFAULT_TOL: f64 = 1e-2;

/// Plan stage whose state the certificate checks: the first state the
/// applied input influences. Stage 0 is the measured state and is always an
/// exact lift.
pub const CERTIFIED_STAGE: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: &[f64], radius: f64) -> Self {
        Self { center: DVector::from_column_slice(center), radius }
    }

    /// Signed distance from `p` to the disk boundary (negative inside).
    pub fn clearance(&self, p: &DVector<f64>) -> f64 {
        (p - &self.center).norm() - self.radius
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub delta: f64,
    pub eta_min: f64,
    pub margins: Vec<f64>,
    pub certified: bool,
    pub tol: f64,
}

pub fn trace_gap(p: &DVector<f64>, xp: &DMatrix<f64>) -> f64 {
    xp.trace() - p.norm_squared()
}

pub fn lifted_margin(p: &DVector<f64>, xp: &DMatrix<f64>, c: &DVector<f64>, r: f64) -> f64 {
    xp.trace() - 2.0 * c.dot(p) + c.norm_squared() - r * r
}

pub fn certify(p: &DVector<f64>, xp: &DMatrix<f64>, obstacles: &[Disk], tol: f64) -> CertificateReport {
    let delta = trace_gap(p, xp);
    let margins: Vec<f64> = obstacles
        .iter()
        .map(|o| lifted_margin(p, xp, &o.center, o.radius))
        .collect();
    let eta_min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let certified = if margins.is_empty() {
        delta.is_finite()
    } else {
        eta_min >= -tol && delta.abs() <= eta_min + tol
    };
    CertificateReport { delta, eta_min, margins, certified, tol }
}

/// Certificate for every stage of a plan, given per-stage obstacle lists.
pub fn certify_horizon(solution: &Solution, obstacles: &[Vec<Disk>], tol: f64) -> Vec<CertificateReport> {
    solution
        .positions
        .iter()
        .zip(&solution.position_moments)
        .enumerate()
        .map(|(k, (p, xp))| {
            let obs = obstacles.get(k).map(Vec::as_slice).unwrap_or(&[]);
            certify(p, xp, obs, tol)
        })
        .collect()
}

/// Applies the first planned input if the plan is certified at
/// [`CERTIFIED_STAGE`], otherwise the fallback input.
pub fn safe_step(
    solution: &Solution,
    obstacles: &[Disk],
    u_fallback: &DVector<f64>,
    tol: f64,
) -> (DVector<f64>, CertificateReport) {
    let k = CERTIFIED_STAGE.min(solution.positions.len().saturating_sub(1));
    let report = certify(&solution.positions[k], &solution.position_moments[k], obstacles, tol);
    let u = if report.certified { solution.u[0].clone() } else { u_fallback.clone() };
    (u, report)
}

/// Brake toward zero velocity as hard as the input box allows. Assumes the
/// double-integrator layout `x = (p, v)` with one input per axis.
pub fn brake_input(x: &DVector<f64>, dt: f64, u_lo: &DVector<f64>, u_hi: &DVector<f64>) -> DVector<f64> {
    let d = u_lo.len();
    DVector::from_fn(d, |i, _| (-x[d + i] / dt).clamp(u_lo[i], u_hi[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn m(r: usize, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, r, x)
    }

    #[test]
    fn gap_and_margin_examples() {
        assert_eq!(trace_gap(&v(&[1.0, 2.0]), &m(2, &[1.0, 2.0, 2.0, 4.0])), 0.0);
        assert_eq!(trace_gap(&v(&[1.0, 2.0]), &m(2, &[2.0, 2.0, 2.0, 4.0])), 1.0);
        assert_eq!(trace_gap(&v(&[0.0, 0.0]), &DMatrix::zeros(2, 2)), 0.0);
        assert_eq!(lifted_margin(&v(&[0.0, 0.0]), &DMatrix::zeros(2, 2), &v(&[3.0, 0.0]), 1.0), 8.0);
        let p = v(&[4.0, 0.0]);
        let exact = &p * p.transpose();
        assert!(lifted_margin(&p, &exact, &v(&[3.0, 0.0]), 1.0).abs() < 1e-14);
    }

    fn report_for(delta: f64, eta: f64, tol: f64) -> bool {
        // p = 0, X_p = diag(delta, 0) puts Δ = delta; choose a disk with η = eta.
        let p = v(&[0.0, 0.0]);
        let xp = m(2, &[delta, 0.0, 0.0, 0.0]);
        let c = v(&[2.0, 0.0]);
        let r = (delta + 4.0 - eta).sqrt();
        let rep = certify(&p, &xp, &[Disk { center: c, radius: r }], tol);
        assert!((rep.eta_min - eta).abs() < 1e-12);
        rep.certified
    }

    #[test]
    fn certification_rule() {
        assert!(report_for(0.5, 1.0, 0.0));
        assert!(!report_for(2.0, 1.0, 0.0));
        assert!(!report_for(0.0, -0.1, 0.0));
        assert!(report_for(0.0, -0.005, DEFAULT_TOL));
    }

    #[test]
    fn empty_obstacle_set_is_vacuous() {
        let rep = certify(&v(&[1.0, 1.0]), &m(2, &[5.0, 0.0, 0.0, 5.0]), &[], 0.0);
        assert!(rep.certified);
        assert_eq!(rep.eta_min, f64::INFINITY);
        let rep = certify(&v(&[1.0, 1.0]), &m(2, &[f64::NAN, 0.0, 0.0, 5.0]), &[], 0.0);
        assert!(!rep.certified);
    }

    #[test]
    fn brake_clamps() {
        let x = v(&[0.0, 0.0, 1.0, -0.01]);
        let lo = v(&[-2.0, -2.0]);
        let hi = v(&[2.0, 2.0]);
        let u = brake_input(&x, 0.04, &lo, &hi);
        assert_eq!(u[0], -2.0);
        assert!((u[1] - 0.25).abs() < 1e-12);
    }
}
