//! Lifted state/input spaces and the costs and dynamics defined on them.
//!
//! Layout (column-major `vec` throughout):
//!
//! ```text
//! x̄ = [x; vec(X)]                                  X  = x xᵀ   (n × n)
//! ū = [u; vec(XU); vec(UX); vec(UU)]               XU = x uᵀ   (n × m)
//! ```
//!
//! With `Ā = diag(A, A⊗A)` and
//! `B̄ = [B 0 0 0; 0 B⊗A A⊗B B⊗B]`, a rank-consistent lift propagates exactly:
//! `Ā lift(x) + B̄ lift(x, u) = lift(Ax + Bu)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, vec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub dt: f64,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, dt: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::Dimension(format!("A must be square, got {:?}", a.shape())));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "B is {:?} but A is {:?}",
                b.shape(),
                a.shape()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("system matrices"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { a, b, dt })
    }

    /// Exactly discretized `d`-axis double integrator with state `(p, v)`.
    pub fn double_integrator(d: usize, dt: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("double integrator needs d >= 1".into()));
        }
        let n = 2 * d;
        let mut a = DMatrix::identity(n, n);
        let mut b = DMatrix::zeros(n, d);
        for i in 0..d {
            a[(i, d + i)] = dt;
            b[(i, i)] = 0.5 * dt * dt;
            b[(d + i, i)] = dt;
        }
        Self::new(a, b, dt)
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
}

/// `[x; vec(x xᵀ)]`.
pub fn lift_state(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut out = DVector::zeros(n + n * n);
    out.rows_mut(0, n).copy_from(x);
    for j in 0..n {
        for i in 0..n {
            out[n + i + j * n] = x[i] * x[j];
        }
    }
    out
}

/// `[u; vec(x uᵀ); vec(u xᵀ); vec(u uᵀ)]`.
pub fn exact_lifted_input(x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    let xu = x * u.transpose();
    let ux = u * x.transpose();
    let uu = u * u.transpose();
    let mut out = Vec::with_capacity(u.len() + xu.len() * 2 + uu.len());
    out.extend_from_slice(u.as_slice());
    out.extend_from_slice(vec(&xu).as_slice());
    out.extend_from_slice(vec(&ux).as_slice());
    out.extend_from_slice(vec(&uu).as_slice());
    DVector::from_vec(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LiftedSystem {
    pub base: LinearSystem,
    pub a_bar: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    pub c_x: DMatrix<f64>,
    pub c_u: DMatrix<f64>,
    pub c_p: DMatrix<f64>,
    pub pos_rows: Vec<usize>,
    pub d: usize,
    pub n_bar_x: usize,
    pub n_bar_u: usize,
}

impl LiftedSystem {
    pub fn new(base: LinearSystem, pos_rows: &[usize]) -> Result<Self> {
        let n = base.nx();
        let m = base.nu();
        let d = pos_rows.len();
        if d == 0 || d > n {
            return Err(Error::Config(format!("need 1..={n} position rows, got {d}")));
        }
        let mut seen = vec![false; n];
        for &r in pos_rows {
            if r >= n || seen[r] {
                return Err(Error::Config(format!("invalid position rows {pos_rows:?} for n_x = {n}")));
            }
            seen[r] = true;
        }

        let n_bar_x = n + n * n;
        let n_bar_u = m + 2 * n * m + m * m;
        let (a, b) = (&base.a, &base.b);

        let mut a_bar = DMatrix::zeros(n_bar_x, n_bar_x);
        a_bar.view_mut((0, 0), (n, n)).copy_from(a);
        a_bar.view_mut((n, n), (n * n, n * n)).copy_from(&kron(a, a));

        let mut b_bar = DMatrix::zeros(n_bar_x, n_bar_u);
        b_bar.view_mut((0, 0), (n, m)).copy_from(b);
        b_bar.view_mut((n, m), (n * n, n * m)).copy_from(&kron(b, a));
        b_bar.view_mut((n, m + n * m), (n * n, n * m)).copy_from(&kron(a, b));
        b_bar.view_mut((n, m + 2 * n * m), (n * n, m * m)).copy_from(&kron(b, b));

        let mut c_x = DMatrix::zeros(n, n_bar_x);
        c_x.view_mut((0, 0), (n, n)).fill_with_identity();
        let mut c_u = DMatrix::zeros(m, n_bar_u);
        c_u.view_mut((0, 0), (m, m)).fill_with_identity();
        let mut c_p = DMatrix::zeros(d, n_bar_x);
        for (i, &r) in pos_rows.iter().enumerate() {
            c_p[(i, r)] = 1.0;
        }

        Ok(Self {
            base,
            a_bar,
            b_bar,
            c_x,
            c_u,
            c_p,
            pos_rows: pos_rows.to_vec(),
            d,
            n_bar_x,
            n_bar_u,
        })
    }

    /// Lifted double integrator with positions in the first `d` state rows.
    pub fn double_integrator(d: usize, dt: f64) -> Result<Self> {
        let pos: Vec<usize> = (0..d).collect();
        Self::new(LinearSystem::double_integrator(d, dt)?, &pos)
    }

    pub fn nx(&self) -> usize {
        self.base.nx()
    }

    pub fn nu(&self) -> usize {
        self.base.nu()
    }

    /// Index of `X[i, j]` in x̄.
    pub fn xx(&self, i: usize, j: usize) -> usize {
        let n = self.nx();
        n + i + j * n
    }

    /// Index of `XU[i, j]` in ū.
    pub fn xu(&self, i: usize, j: usize) -> usize {
        let (n, m) = (self.nx(), self.nu());
        m + i + j * n
    }

    /// Index of `UX[i, j]` in ū.
    pub fn ux(&self, i: usize, j: usize) -> usize {
        let (n, m) = (self.nx(), self.nu());
        m + n * m + i + j * m
    }

    /// Index of `UU[i, j]` in ū.
    pub fn uu(&self, i: usize, j: usize) -> usize {
        let (n, m) = (self.nx(), self.nu());
        m + 2 * n * m + i + j * m
    }

    pub fn lift_state(&self, x: &DVector<f64>) -> DVector<f64> {
        lift_state(x)
    }

    pub fn exact_lifted_input(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        exact_lifted_input(x, u)
    }

    pub fn propagate(&self, x_bar: &DVector<f64>, u_bar: &DVector<f64>) -> DVector<f64> {
        &self.a_bar * x_bar + &self.b_bar * u_bar
    }

    pub fn state(&self, x_bar: &DVector<f64>) -> DVector<f64> {
        x_bar.rows(0, self.nx()).into_owned()
    }

    pub fn input(&self, u_bar: &DVector<f64>) -> DVector<f64> {
        u_bar.rows(0, self.nu()).into_owned()
    }

    pub fn position(&self, x_bar: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.d, self.pos_rows.iter().map(|&r| x_bar[r]))
    }

    /// The `d × d` position block of X, symmetrized.
    pub fn position_moment(&self, x_bar: &DVector<f64>) -> DMatrix<f64> {
        let rows = &self.pos_rows;
        DMatrix::from_fn(self.d, self.d, |i, j| {
            0.5 * (x_bar[self.xx(rows[i], rows[j])] + x_bar[self.xx(rows[j], rows[i])])
        })
    }

    /// Indices of `(p, diag X_p)` inside x̄: the coordinates a lifted disk
    /// constraint reads.
    pub fn margin_coords(&self) -> Vec<usize> {
        let mut out = self.pos_rows.clone();
        out.extend(self.pos_rows.iter().map(|&r| self.xx(r, r)));
        out
    }

    /// Full-state embedding of a position offset.
    pub fn position_offset(&self, s: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.nx());
        for (a, &r) in self.pos_rows.iter().enumerate() {
            out[r] = s[a];
        }
        out
    }

    /// True when moving every position by a constant commutes with the
    /// dynamics (`A σ = σ` for position offsets), as for integrator chains.
    pub fn translation_invariant(&self) -> bool {
        let a = &self.base.a;
        self.pos_rows.iter().all(|&r| {
            (0..self.nx()).all(|i| {
                let want = if i == r { 1.0 } else { 0.0 };
                (a[(i, r)] - want).abs() <= 1e-12
            })
        })
    }

    /// Lifted state in coordinates whose origin sits at position `s`:
    /// `x − σ` and `X − σxᵀ − xσᵀ + σσᵀ`.
    pub fn translate_state(&self, x_bar: &mut DVector<f64>, s: &DVector<f64>) {
        let n = self.nx();
        let sig = self.position_offset(s);
        let x = x_bar.rows(0, n).into_owned();
        for j in 0..n {
            for i in 0..n {
                x_bar[self.xx(i, j)] += -sig[i] * x[j] - x[i] * sig[j] + sig[i] * sig[j];
            }
        }
        x_bar.rows_mut(0, n).axpy(-1.0, &sig, 1.0);
    }

    /// Lifted input under the same change of origin: `XU − σuᵀ`, `UX − uσᵀ`.
    pub fn translate_input(&self, u_bar: &mut DVector<f64>, s: &DVector<f64>) {
        let (n, m) = (self.nx(), self.nu());
        let sig = self.position_offset(s);
        let u = u_bar.rows(0, m).into_owned();
        for j in 0..m {
            for i in 0..n {
                u_bar[self.xu(i, j)] -= sig[i] * u[j];
                u_bar[self.ux(j, i)] -= u[j] * sig[i];
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PsdBlock {
    /// The whole `(1 + n_x + n_u)` moment matrix.
    #[default]
    Full,
    /// Only the `(1 + d)` block `[1 pᵀ; p X_p]`.
    PositionOnly,
}

/// How the tracking cost is written in lifted coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CostForm {
    /// `xᵀQx` on the physical coordinates only.
    Physical,
    /// `tr(Q X)` on every coordinate covered by the PSD block, so that the
    /// relaxation pays for spread in the second moments. Identical to the
    /// physical form on rank-1 lifts.
    #[default]
    Moment,
}

/// Penalty weights folded into the cached Hessians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    pub rho_psd: f64,
    pub rho_box: f64,
    pub rho_obs: f64,
    /// Lifted input cuts `UU_ii <= (lo + hi) u_i - lo hi` as an extra
    /// consensus family.
    pub input_cuts: bool,
}

impl Augmentation {
    pub fn none() -> Self {
        Self { rho_psd: 0.0, rho_box: 0.0, rho_obs: 0.0, input_cuts: false }
    }
}

/// Lifted cost. The objective is `Σ x̄ᵀQ̄x̄ + ūᵀR̄ū + q_refᵀx̄ + r_refᵀū`
/// plus the terminal `x̄ᵀQ̄_f x̄ + qf_refᵀx̄`, with no ½ factor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LiftedCost {
    pub q_bar: DMatrix<f64>,
    pub r_bar: DMatrix<f64>,
    pub qf_bar: DMatrix<f64>,
    pub w_x: DVector<f64>,
    pub w_u: DVector<f64>,
    pub q_ref: DVector<f64>,
    pub r_ref: DVector<f64>,
    pub qf_ref: DVector<f64>,
    /// `Q̄ + (ρ_psd/2)W_x + (ρ_obs/2)E_obs`.
    pub h_x: DMatrix<f64>,
    /// `R̄ + (ρ_psd/2)W_u + (ρ_box/2)E_box`.
    pub h_u: DMatrix<f64>,
    /// Terminal Hessian `Q̄_f + (ρ_obs/2)E_obs`.
    pub h_n: DMatrix<f64>,
    pub form: CostForm,
    pub block: PsdBlock,
}

/// PSD multiplicities: physical entries sit twice in the moment matrix,
/// lifted entries once.
pub fn multiplicities(lifted: &LiftedSystem) -> (DVector<f64>, DVector<f64>) {
    let (n, m) = (lifted.nx(), lifted.nu());
    let w_x = DVector::from_fn(lifted.n_bar_x, |i, _| if i < n { 2.0 } else { 1.0 });
    let w_u = DVector::from_fn(lifted.n_bar_u, |i, _| if i < m { 2.0 } else { 1.0 });
    (w_x, w_u)
}

fn check_psd(name: &str, q: &DMatrix<f64>, n: usize, strict: bool) -> Result<()> {
    if q.shape() != (n, n) {
        return Err(Error::Dimension(format!("{name} is {:?}, expected {n}x{n}", q.shape())));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost matrix"));
    }
    if (q - q.transpose()).abs().max() > 1e-9 * (1.0 + q.abs().max()) {
        return Err(Error::Config(format!("{name} must be symmetric")));
    }
    let (vals, _) = crate::eig::sym_eigen(q);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = 1e-12 * (1.0 + q.abs().max());
    if (strict && min <= floor) || (!strict && min < -floor) {
        let what = if strict { "positive definite" } else { "positive semidefinite" };
        return Err(Error::Config(format!("{name} must be {what} (min eigenvalue {min:.3e})")));
    }
    Ok(())
}

/// Splits a state weight into the part written on second moments and the part
/// kept as a physical quadratic. Position-only mode can only move the
/// position block; everything else, coupling included, stays physical.
fn split_weight(
    lifted: &LiftedSystem,
    q: &DMatrix<f64>,
    form: CostForm,
    block: PsdBlock,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = lifted.nx();
    let zero = DMatrix::zeros(n, n);
    match (form, block) {
        (CostForm::Physical, _) => Ok((q.clone(), zero)),
        (CostForm::Moment, PsdBlock::Full) => Ok((zero, q.clone())),
        (CostForm::Moment, PsdBlock::PositionOnly) => {
            let pos = &lifted.pos_rows;
            let mut phys = q.clone();
            let mut moment = zero;
            // only the position block has a PSD-constrained moment; coupling
            // terms stay physical
            for &i in pos {
                for &j in pos {
                    moment[(i, j)] = q[(i, j)];
                    phys[(i, j)] = 0.0;
                }
            }
            Ok((phys, moment))
        }
    }
}

/// Writes `zᵀ Q_phys z − 2 gᵀ Q z + tr(Q_mom X)` into lifted coordinates for
/// a state weight already split by [`split_weight`].
fn state_terms(
    lifted: &LiftedSystem,
    phys: &DMatrix<f64>,
    moment: &DMatrix<f64>,
    goal: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = lifted.nx();
    let mut quad = DMatrix::zeros(lifted.n_bar_x, lifted.n_bar_x);
    quad.view_mut((0, 0), (n, n)).copy_from(phys);
    let mut lin = DVector::zeros(lifted.n_bar_x);
    let full = phys + moment;
    lin.rows_mut(0, n).copy_from(&(-2.0 * &full * goal));
    for j in 0..n {
        for i in 0..n {
            lin[lifted.xx(i, j)] += moment[(i, j)];
        }
    }
    (quad, lin)
}

/// Builds the lifted tracking cost with the ADMM penalties folded into the
/// Hessians, so the cached Riccati quantities stay valid online.
pub fn build_lifted_cost(
    lifted: &LiftedSystem,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    qf: &DMatrix<f64>,
    goal: &DVector<f64>,
    aug: &Augmentation,
    form: CostForm,
    block: PsdBlock,
) -> Result<LiftedCost> {
    let (n, m) = (lifted.nx(), lifted.nu());
    check_psd("Q", q, n, false)?;
    check_psd("Qf", qf, n, false)?;
    check_psd("R", r, m, true)?;
    if goal.len() != n {
        return Err(Error::Dimension(format!("goal has {} entries, expected {n}", goal.len())));
    }
    for (name, v) in [("rho_psd", aug.rho_psd), ("rho_box", aug.rho_box), ("rho_obs", aug.rho_obs)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
        }
    }

    let (q_phys, q_mom) = split_weight(lifted, q, form, block)?;
    let (qf_phys, qf_mom) = split_weight(lifted, qf, form, block)?;
    let (q_bar, q_ref) = state_terms(lifted, &q_phys, &q_mom, goal);
    let (qf_bar, qf_ref) = state_terms(lifted, &qf_phys, &qf_mom, goal);

    let mut r_bar = DMatrix::zeros(lifted.n_bar_u, lifted.n_bar_u);
    let mut r_ref = DVector::zeros(lifted.n_bar_u);
    let inputs_in_moment = form == CostForm::Moment && block == PsdBlock::Full;
    if inputs_in_moment {
        for j in 0..m {
            for i in 0..m {
                r_ref[lifted.uu(i, j)] = r[(i, j)];
            }
        }
    } else {
        r_bar.view_mut((0, 0), (m, m)).copy_from(r);
    }

    let (w_x, w_u) = multiplicities(lifted);
    let mut e_obs = DVector::zeros(lifted.n_bar_x);
    for i in lifted.margin_coords() {
        e_obs[i] = 1.0;
    }
    let mut e_box = DVector::zeros(lifted.n_bar_u);
    for i in 0..m {
        e_box[i] = 1.0;
        if aug.input_cuts {
            e_box[i] += 1.0;
            e_box[lifted.uu(i, i)] += 1.0;
        }
    }

    let h_x = &q_bar
        + DMatrix::from_diagonal(&(0.5 * aug.rho_psd * &w_x + 0.5 * aug.rho_obs * &e_obs));
    let h_u = &r_bar
        + DMatrix::from_diagonal(&(0.5 * aug.rho_psd * &w_u + 0.5 * aug.rho_box * &e_box));
    let h_n = &qf_bar + DMatrix::from_diagonal(&(0.5 * aug.rho_obs * &e_obs));

    Ok(LiftedCost {
        q_bar,
        r_bar,
        qf_bar,
        w_x,
        w_u,
        q_ref,
        r_ref,
        qf_ref,
        h_x,
        h_u,
        h_n,
        form,
        block,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift_state(&dv(&[1.0, 2.0])).as_slice(), &[1.0, 2.0, 1.0, 2.0, 2.0, 4.0]);
        assert_eq!(lift_state(&dv(&[0.0, 0.0])), DVector::zeros(6));
        assert_eq!(exact_lifted_input(&dv(&[1.0]), &dv(&[2.0])).as_slice(), &[2.0, 2.0, 2.0, 4.0]);
        let z = exact_lifted_input(&dv(&[1.0, -3.0]), &dv(&[0.0]));
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lifted_trace_is_squared_norm() {
        let x = dv(&[0.3, -1.2, 2.5]);
        let xb = lift_state(&x);
        let tr: f64 = (0..3).map(|i| xb[3 + i + 3 * i]).sum();
        assert!((tr - x.norm_squared()).abs() < 1e-14);
    }

    #[test]
    fn scalar_and_identity_lifts() {
        let sys = LinearSystem::new(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 0.0),
            0.1,
        )
        .unwrap();
        let l = LiftedSystem::new(sys, &[0]).unwrap();
        assert_eq!(l.a_bar, DMatrix::from_diagonal(&dv(&[2.0, 4.0])));

        let sys = LinearSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 1, &[0.5, -1.0]),
            0.1,
        )
        .unwrap();
        let l = LiftedSystem::new(sys, &[0, 1]).unwrap();
        assert_eq!(l.a_bar, DMatrix::identity(6, 6));
        assert_eq!((l.n_bar_x, l.n_bar_u), (6, 1 + 4 + 1));
    }

    #[test]
    fn rejects_bad_position_rows() {
        let sys = LinearSystem::double_integrator(2, 0.1).unwrap();
        assert!(LiftedSystem::new(sys.clone(), &[]).is_err());
        assert!(LiftedSystem::new(sys.clone(), &[0, 0]).is_err());
        assert!(LiftedSystem::new(sys, &[0, 7]).is_err());
        assert!(LinearSystem::double_integrator(2, 0.0).is_err());
    }

    #[test]
    fn selectors_recover_physical_parts() {
        let l = LiftedSystem::double_integrator(2, 0.05).unwrap();
        let x = dv(&[1.0, -2.0, 0.5, 0.25]);
        let xb = lift_state(&x);
        assert_eq!(&l.c_x * &xb, x);
        assert_eq!(&l.c_p * &xb, dv(&[1.0, -2.0]));
        let xp = l.position_moment(&xb);
        assert!((xp.trace() - 5.0).abs() < 1e-15);
        let u = dv(&[0.1, 0.2]);
        assert_eq!(&l.c_u * exact_lifted_input(&x, &u), u);
    }

    #[test]
    fn index_helpers_match_layout() {
        let l = LiftedSystem::double_integrator(2, 0.05).unwrap();
        let x = dv(&[1.0, 2.0, 3.0, 4.0]);
        let u = dv(&[5.0, 7.0]);
        let xb = lift_state(&x);
        let ub = exact_lifted_input(&x, &u);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(xb[l.xx(i, j)], x[i] * x[j]);
            }
            for j in 0..2 {
                assert_eq!(ub[l.xu(i, j)], x[i] * u[j]);
                assert_eq!(ub[l.ux(j, i)], u[j] * x[i]);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(ub[l.uu(i, j)], u[i] * u[j]);
            }
        }
    }

    #[test]
    fn multiplicity_weights_scalar_case() {
        // 1x1 system: (ρ/2)‖M‖² = ½(1 + 2x² + 2u² + X² + XU² + UX² + UU²)
        let sys = LinearSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            1.0,
        )
        .unwrap();
        let l = LiftedSystem::new(sys, &[0]).unwrap();
        let (wx, wu) = multiplicities(&l);
        assert_eq!(wx.as_slice(), &[2.0, 1.0]);
        assert_eq!(wu.as_slice(), &[2.0, 1.0, 1.0, 1.0]);
    }

    fn di_cost(form: CostForm, block: PsdBlock, aug: Augmentation) -> (LiftedSystem, LiftedCost) {
        let l = LiftedSystem::double_integrator(2, 0.04).unwrap();
        let q = DMatrix::identity(4, 4);
        let r = DMatrix::identity(2, 2) * 0.1;
        let goal = dv(&[1.0, 2.0, 0.0, 0.0]);
        let c = build_lifted_cost(&l, &q, &r, &q, &goal, &aug, form, block).unwrap();
        (l, c)
    }

    #[test]
    fn physical_cost_without_augmentation() {
        let (l, c) = di_cost(CostForm::Physical, PsdBlock::Full, Augmentation::none());
        let top = c.q_bar.view((0, 0), (4, 4));
        assert_eq!(top, DMatrix::<f64>::identity(4, 4));
        assert_eq!(c.q_bar.rows(4, 16).abs().max(), 0.0);
        assert_eq!(c.h_x, c.q_bar);
        assert_eq!(c.q_ref.rows(0, 4), dv(&[-2.0, -4.0, 0.0, 0.0]));
        // the lifted input block is singular without the PSD penalty
        assert_eq!(c.h_u[(l.uu(0, 0), l.uu(0, 0))], 0.0);
    }

    #[test]
    fn moment_cost_matches_physical_on_rank_one_lifts() {
        let aug = Augmentation { rho_psd: 0.3, rho_box: 0.2, rho_obs: 0.1, input_cuts: true };
        let (l, phys) = di_cost(CostForm::Physical, PsdBlock::Full, aug);
        let (_, full) = di_cost(CostForm::Moment, PsdBlock::Full, aug);
        let (_, pos) = di_cost(CostForm::Moment, PsdBlock::PositionOnly, aug);
        let x = dv(&[0.3, -0.7, 1.1, 0.4]);
        let u = dv(&[0.5, -0.2]);
        let xb = lift_state(&x);
        let ub = exact_lifted_input(&x, &u);
        let eval = |c: &LiftedCost| {
            (xb.transpose() * &c.q_bar * &xb)[0]
                + (ub.transpose() * &c.r_bar * &ub)[0]
                + c.q_ref.dot(&xb)
                + c.r_ref.dot(&ub)
        };
        let a = eval(&phys);
        assert!((a - eval(&full)).abs() < 1e-12);
        assert!((a - eval(&pos)).abs() < 1e-12);
        // the penalty diagonals agree between forms
        let d_phys = &phys.h_u - &phys.r_bar;
        let d_full = &full.h_u - &full.r_bar;
        assert!((d_phys - d_full).abs().max() < 1e-15);
        assert!(full.h_u[(l.uu(1, 1), l.uu(1, 1))] > 0.0);
    }

    #[test]
    fn rejects_indefinite_weights() {
        let l = LiftedSystem::double_integrator(2, 0.04).unwrap();
        let q = DMatrix::identity(4, 4);
        let goal = DVector::zeros(4);
        let aug = Augmentation::none();
        let bad_r = DMatrix::from_diagonal(&dv(&[1.0, 0.0]));
        assert!(build_lifted_cost(&l, &q, &bad_r, &q, &goal, &aug, CostForm::Physical, PsdBlock::Full).is_err());
        let bad_q = DMatrix::from_diagonal(&dv(&[1.0, -1.0, 1.0, 1.0]));
        let r = DMatrix::identity(2, 2);
        assert!(build_lifted_cost(&l, &bad_q, &r, &q, &goal, &aug, CostForm::Physical, PsdBlock::Full).is_err());
        let mut coupled = q.clone();
        coupled[(0, 2)] = 0.1;
        coupled[(2, 0)] = 0.1;
        let split = build_lifted_cost(&l, &coupled, &r, &q, &goal, &aug, CostForm::Moment, PsdBlock::PositionOnly).unwrap();
        assert_eq!(split.q_bar[(0, 2)], 0.1);
        assert_eq!(split.q_bar[(0, 0)], 0.0);
        assert_eq!(split.q_bar[(2, 2)], 1.0);
    }
}
