//! Moment-matrix assembly, the projections used by the slack updates, and the
//! adjoint that pulls a PSD consensus target back onto lifted linear costs.
//!
//! The moment matrix is laid out as
//!
//! ```text
//!     [ 1   xᵀ   uᵀ ]
//! M = [ x   X    XU ]
//!     [ u   UX   UU ]
//! ```
//!
//! In position-only mode only the `(1 + d)` block `[1 pᵀ; p X_p]` is projected.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eig::sym_eigen;
use crate::error::{Error, Result};
use crate::lifting::LiftedSystem;
use crate::linalg::{svec_len, symmetrize};

/// Side of the full moment matrix.
pub fn moment_size(lifted: &LiftedSystem) -> usize {
    1 + lifted.nx() + lifted.nu()
}

/// Places the lifted variables into M without symmetrizing, so every entry
/// of x̄ and ū appears exactly where it is stored (x, u twice, the rest once).
pub fn raw_moment(lifted: &LiftedSystem, x_bar: &DVector<f64>, u_bar: &DVector<f64>) -> DMatrix<f64> {
    let (n, m) = (lifted.nx(), lifted.nu());
    let p = 1 + n + m;
    let mut out = DMatrix::zeros(p, p);
    out[(0, 0)] = 1.0;
    for i in 0..n {
        out[(0, 1 + i)] = x_bar[i];
        out[(1 + i, 0)] = x_bar[i];
        for j in 0..n {
            out[(1 + i, 1 + j)] = x_bar[lifted.xx(i, j)];
        }
        for j in 0..m {
            out[(1 + i, 1 + n + j)] = u_bar[lifted.xu(i, j)];
            out[(1 + n + j, 1 + i)] = u_bar[lifted.ux(j, i)];
        }
    }
    for i in 0..m {
        out[(0, 1 + n + i)] = u_bar[i];
        out[(1 + n + i, 0)] = u_bar[i];
        for j in 0..m {
            out[(1 + n + i, 1 + n + j)] = u_bar[lifted.uu(i, j)];
        }
    }
    out
}

/// Symmetrized moment matrix; the XU and UXᵀ slots are averaged.
pub fn assemble_moment(lifted: &LiftedSystem, x_bar: &DVector<f64>, u_bar: &DVector<f64>) -> DMatrix<f64> {
    let mut m = raw_moment(lifted, x_bar, u_bar);
    symmetrize(&mut m);
    m
}

/// Rows/columns of the full moment matrix that form the position block.
pub fn position_block_indices(lifted: &LiftedSystem) -> Vec<usize> {
    std::iter::once(0).chain(lifted.pos_rows.iter().map(|&r| 1 + r)).collect()
}

/// `[1 pᵀ; p X_p]`, symmetrized.
pub fn assemble_position_moment(lifted: &LiftedSystem, x_bar: &DVector<f64>) -> DMatrix<f64> {
    let d = lifted.d;
    let mut out = DMatrix::zeros(1 + d, 1 + d);
    out[(0, 0)] = 1.0;
    let p = lifted.position(x_bar);
    let xp = lifted.position_moment(x_bar);
    for i in 0..d {
        out[(0, 1 + i)] = p[i];
        out[(1 + i, 0)] = p[i];
        for j in 0..d {
            out[(1 + i, 1 + j)] = xp[(i, j)];
        }
    }
    out
}

/// Frobenius projection onto the PSD cone by clamping eigenvalues.
pub fn project_psd(y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PSD projection input"));
    }
    let mut s = y.clone();
    symmetrize(&mut s);
    Ok(project_psd_symmetric(&s))
}

/// [`project_psd`] for an input already known to be symmetric and finite.
pub fn project_psd_symmetric(y: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(y);
    if vals.iter().all(|&l| l >= 0.0) {
        return y.clone();
    }
    let n = y.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &l) in vals.iter().enumerate() {
        if l > 0.0 {
            let v = vecs.column(k);
            out.ger(l, &v, &v, 1.0);
        }
    }
    symmetrize(&mut out);
    out
}

/// PSD projection carried out on svec-stored data.
pub fn project_psd_svec(v: &[f64]) -> Result<DVector<f64>> {
    let y = crate::linalg::smat(v)?;
    Ok(crate::linalg::svec(&project_psd(&y)?))
}

pub fn project_box(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    v.zip_zip_map(lo, hi, |x, l, h| x.clamp(l, h))
}

/// Slack for a scalar inequality `g >= 0`.
pub fn project_obstacle_slack(g: f64) -> f64 {
    g.max(0.0)
}

/// Euclidean projection onto `{v : aᵀv + b >= 0}`.
pub fn project_halfspace(w: &DVector<f64>, a: &DVector<f64>, b: f64) -> DVector<f64> {
    let g = a.dot(w) + b;
    if g >= 0.0 {
        return w.clone();
    }
    let aa = a.norm_squared();
    if aa == 0.0 {
        return w.clone();
    }
    w - a * (g / aa)
}

/// Halfspace `aᵀξ + b >= 0` on `ξ = (p, diag X_p)` encoding the lifted disk
/// constraint `tr(X_p) − 2cᵀp + ‖c‖² − r² >= 0`.
pub fn disk_halfspace(center: &DVector<f64>, radius: f64) -> (DVector<f64>, f64) {
    let d = center.len();
    let a = DVector::from_fn(2 * d, |i, _| if i < d { -2.0 * center[i] } else { 1.0 });
    (a, center.norm_squared() - radius * radius)
}

/// Linear costs `(Δq, Δr)` with `−ρ⟨T, M(x̄, ū)⟩ = Δqᵀx̄ + Δrᵀū + const`,
/// accumulated into `dq`, `dr`. `T` is a full-size symmetric target.
pub fn adjoint_moment_into(
    t: &DMatrix<f64>,
    lifted: &LiftedSystem,
    rho: f64,
    dq: &mut DVector<f64>,
    dr: &mut DVector<f64>,
) {
    let (n, m) = (lifted.nx(), lifted.nu());
    for i in 0..n {
        dq[i] -= rho * (t[(0, 1 + i)] + t[(1 + i, 0)]);
        for j in 0..n {
            dq[lifted.xx(i, j)] -= rho * t[(1 + i, 1 + j)];
        }
        for j in 0..m {
            dr[lifted.xu(i, j)] -= rho * t[(1 + i, 1 + n + j)];
            dr[lifted.ux(j, i)] -= rho * t[(1 + n + j, 1 + i)];
        }
    }
    for i in 0..m {
        dr[i] -= rho * (t[(0, 1 + n + i)] + t[(1 + n + i, 0)]);
        for j in 0..m {
            dr[lifted.uu(i, j)] -= rho * t[(1 + n + i, 1 + n + j)];
        }
    }
}

pub fn adjoint_moment(t: &DMatrix<f64>, lifted: &LiftedSystem, rho: f64) -> (DVector<f64>, DVector<f64>) {
    let mut dq = DVector::zeros(lifted.n_bar_x);
    let mut dr = DVector::zeros(lifted.n_bar_u);
    adjoint_moment_into(t, lifted, rho, &mut dq, &mut dr);
    (dq, dr)
}

/// `(ρ/2)‖M(x̄, ū) − T‖_F²` with M placed unsymmetrized.
pub fn moment_penalty(
    lifted: &LiftedSystem,
    x_bar: &DVector<f64>,
    u_bar: &DVector<f64>,
    t: &DMatrix<f64>,
    rho: f64,
) -> f64 {
    0.5 * rho * (raw_moment(lifted, x_bar, u_bar) - t).norm_squared()
}

/// Analytic gradient of [`moment_penalty`]: `ρ W z + adjoint(T)`.
pub fn moment_penalty_gradient(
    lifted: &LiftedSystem,
    x_bar: &DVector<f64>,
    u_bar: &DVector<f64>,
    t: &DMatrix<f64>,
    rho: f64,
) -> (DVector<f64>, DVector<f64>) {
    let (w_x, w_u) = crate::lifting::multiplicities(lifted);
    let (mut gx, mut gu) = adjoint_moment(t, lifted, rho);
    gx += rho * w_x.component_mul(x_bar);
    gu += rho * w_u.component_mul(u_bar);
    (gx, gu)
}

/// PSD slack and scaled dual, both svec-stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdSlackPair {
    pub s: DVector<f64>,
    pub h: DVector<f64>,
}

impl PsdSlackPair {
    pub fn zeros(p: usize) -> Self {
        Self { s: DVector::zeros(svec_len(p)), h: DVector::zeros(svec_len(p)) }
    }

    pub fn side(&self) -> usize {
        crate::linalg::svec_side(self.s.len()).unwrap_or(0)
    }
}
