//! Steady-state Riccati quantities and the cached affine sweeps.
//!
//! Conventions follow the usual LQR form `½xᵀQx + qᵀx + ½uᵀRu + rᵀu`:
//!
//! ```text
//! K  = (R + BᵀPB)⁻¹ BᵀPA        C1 = (R + BᵀPB)⁻¹        C2 = (A − BK)ᵀ
//! d_k = C1 (Bᵀ p_{k+1} + r_k)   p_k = q_k + C2 p_{k+1} − Kᵀ r_k,   p_N = q_N
//! u_k = −K x_k − d_k
//! ```

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_spectral_norm;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiccatiCache {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub k_inf: DMatrix<f64>,
    pub p_inf: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    bt: DMatrix<f64>,
    kt: DMatrix<f64>,
    pub horizon: usize,
    /// Relative spectral-norm change of the last fixed-point step.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Default)]
pub struct LinearCostSweep {
    pub q: Vec<DVector<f64>>,
    pub r: Vec<DVector<f64>>,
    pub d: Vec<DVector<f64>>,
    pub p: Vec<DVector<f64>>,
}

fn factor(m: DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or(Error::Singular(what))
}

/// One step of the P recursion, returning the new P and its gain.
pub fn riccati_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let pb = p * b;
    let gram = factor(r + b.transpose() * &pb, "R + BᵀPB")?;
    let k = gram.solve(&(pb.transpose() * a));
    let mut next = q + a.transpose() * p * (a - b * &k);
    crate::linalg::symmetrize(&mut next);
    Ok((next, k))
}

impl RiccatiCache {
    /// Iterates the P recursion from `qf` until the relative spectral-norm
    /// change drops below `tol`.
    pub fn compute(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
        qf: &DMatrix<f64>,
        horizon: usize,
        tol: f64,
        max_iter: usize,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) || qf.shape() != (n, n) {
            return Err(Error::Dimension("riccati: inconsistent system/cost shapes".into()));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let sqrt_n = (n as f64).sqrt();
        let mut p = qf.clone();
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        for it in 1..=max_iter {
            let (next, _) = riccati_step(a, b, q, r, &p)?;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("riccati iteration"));
            }
            let diff = &next - &p;
            let (df, pf) = (diff.norm(), next.norm());
            p = next;
            iterations = it;
            // ‖·‖₂ ≤ ‖·‖_F and ‖P‖₂ ≥ ‖P‖_F/√n, so this implies the spectral test
            if df <= tol * (pf / sqrt_n).max(1.0) {
                residual = sym_spectral_norm(&diff) / sym_spectral_norm(&p).max(1.0);
                break;
            }
            if it == max_iter {
                residual = sym_spectral_norm(&diff) / sym_spectral_norm(&p).max(1.0);
            }
        }
        if residual > tol {
            return Err(Error::NonConvergence { residual });
        }
        Self::from_value(a, b, r, p, horizon, residual, iterations)
    }

    /// Assembles the cached matrices around a given cost-to-go.
    pub fn from_value(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        r: &DMatrix<f64>,
        p: DMatrix<f64>,
        horizon: usize,
        residual: f64,
        iterations: usize,
    ) -> Result<Self> {
        let pb = &p * b;
        let gram = factor(r + b.transpose() * &pb, "R + BᵀPB")?;
        let k_inf = gram.solve(&(pb.transpose() * a));
        let c1 = gram.inverse();
        let c2 = (a - b * &k_inf).transpose();
        Ok(Self {
            bt: b.transpose(),
            kt: k_inf.transpose(),
            a: a.clone(),
            b: b.clone(),
            k_inf,
            p_inf: p,
            c1,
            c2,
            horizon,
            residual,
            iterations,
        })
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    /// Spectral radius of `A − BK`.
    pub fn closed_loop_spectral_radius(&self) -> f64 {
        let cl = &self.a - &self.b * &self.k_inf;
        cl.complex_eigenvalues().iter().fold(0.0, |m: f64, z| m.max(z.norm()))
    }

    /// Backward sweep into caller-owned buffers. `q` has `N + 1` entries,
    /// `r`, `d` have `N`, `p` has `N + 1`.
    pub fn backward_into(
        &self,
        q: &[DVector<f64>],
        r: &[DVector<f64>],
        d: &mut [DVector<f64>],
        p: &mut [DVector<f64>],
        scratch: &mut DVector<f64>,
    ) {
        let n = r.len();
        p[n].copy_from(&q[n]);
        for k in (0..n).rev() {
            let (head, tail) = p.split_at_mut(k + 1);
            let next = &tail[0];
            // scratch = Bᵀ p_{k+1} + r_k
            scratch.copy_from(&r[k]);
            scratch.gemv(1.0, &self.bt, next, 1.0);
            d[k].gemv(1.0, &self.c1, scratch, 0.0);
            let pk = &mut head[k];
            pk.copy_from(&q[k]);
            pk.gemv(1.0, &self.c2, next, 1.0);
            pk.gemv(-1.0, &self.kt, &r[k], 1.0);
        }
    }

    pub fn backward_pass(&self, q: &[DVector<f64>], r: &[DVector<f64>]) -> Result<LinearCostSweep> {
        let n = r.len();
        if q.len() != n + 1 {
            return Err(Error::Dimension(format!("need {} state costs, got {}", n + 1, q.len())));
        }
        if q.iter().any(|v| v.len() != self.nx()) || r.iter().any(|v| v.len() != self.nu()) {
            return Err(Error::Dimension("linear cost length mismatch".into()));
        }
        let mut d = vec![DVector::zeros(self.nu()); n];
        let mut p = vec![DVector::zeros(self.nx()); n + 1];
        let mut scratch = DVector::zeros(self.nu());
        self.backward_into(q, r, &mut d, &mut p, &mut scratch);
        Ok(LinearCostSweep { q: q.to_vec(), r: r.to_vec(), d, p })
    }

    /// Forward rollout `u_k = −K x_k − d_k`, `x_{k+1} = A x_k + B u_k`.
    pub fn rollout_into(&self, d: &[DVector<f64>], xs: &mut [DVector<f64>], us: &mut [DVector<f64>]) {
        for k in 0..d.len() {
            let (head, tail) = xs.split_at_mut(k + 1);
            let x = &head[k];
            let u = &mut us[k];
            u.copy_from(&d[k]);
            u.gemv(-1.0, &self.k_inf, x, -1.0);
            let next = &mut tail[0];
            next.gemv(1.0, &self.a, x, 0.0);
            next.gemv(1.0, &self.b, u, 1.0);
        }
    }

    pub fn forward_rollout(
        &self,
        sweep: &LinearCostSweep,
        x0: &DVector<f64>,
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let n = sweep.d.len();
        let mut xs = vec![DVector::zeros(self.nx()); n + 1];
        let mut us = vec![DVector::zeros(self.nu()); n];
        xs[0].copy_from(x0);
        self.rollout_into(&sweep.d, &mut xs, &mut us);
        (xs, us)
    }
}
