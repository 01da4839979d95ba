//! Reconstructed comparison methods.
//!
//! `Lin` is the unlifted ADMM MPC with tangent half-spaces linearized about
//! the previous plan. `Hocbf` filters the nominal LQR input through
//! second-order barrier constraints. Both use the same dynamics, weights and
//! input box as the lifted solver.

use nalgebra::{DMatrix, DVector};
use tinysdp::riccati::RiccatiCache;
use tinysdp::solver::Weights;
use tinysdp::{Disk, LinearSystem};

use crate::error::Result;

/// Unlifted ADMM MPC with linearized keep-out half-spaces.
pub struct LinController {
    sys: LinearSystem,
    cache: RiccatiCache,
    /// Quadratic state weight in the `½xᵀQx` convention.
    q_half: DMatrix<f64>,
    goal: DVector<f64>,
    u_lo: DVector<f64>,
    u_hi: DVector<f64>,
    margin: f64,
    rho_obs: f64,
    rho_box: f64,
    max_iter: usize,
    eps: f64,
    horizon: usize,
    d: usize,
    xs: Vec<DVector<f64>>,
    us: Vec<DVector<f64>>,
    z: Vec<DVector<f64>>,
    y: Vec<DVector<f64>>,
    /// Per stage: one `(v, λ)` copy of the position per half-space.
    copies: Vec<Vec<(DVector<f64>, DVector<f64>)>>,
    planes: Vec<Vec<(DVector<f64>, f64)>>,
    q: Vec<DVector<f64>>,
    r: Vec<DVector<f64>>,
    dd: Vec<DVector<f64>>,
    p: Vec<DVector<f64>>,
    scratch: DVector<f64>,
    warm: bool,
    /// Stages skipped because the plan sat on an obstacle center.
    pub degenerate: usize,
}

pub struct LinParams {
    pub margin: f64,
    pub rho_obs: f64,
    pub rho_box: f64,
    pub max_iter: usize,
    pub eps: f64,
    pub horizon: usize,
}

impl LinController {
    pub fn new(sys: LinearSystem, weights: &Weights, goal: DVector<f64>, params: LinParams) -> Result<Self> {
        let n = sys.nx();
        let m = sys.nu();
        let d = m;
        let q_half = &weights.q * 2.0;
        let mut h = q_half.clone();
        for i in 0..d {
            h[(i, i)] += params.rho_obs;
        }
        let r_half = &weights.r * 2.0 + DMatrix::identity(m, m) * params.rho_box;
        let cache = RiccatiCache::compute(
            &sys.a,
            &sys.b,
            &h,
            &r_half,
            &h,
            params.horizon,
            tinysdp::riccati::DEFAULT_TOL,
            tinysdp::riccati::DEFAULT_MAX_ITER,
        )?;
        let nh = params.horizon;
        Ok(Self {
            sys,
            cache,
            q_half,
            goal,
            u_lo: weights.u_lo.clone(),
            u_hi: weights.u_hi.clone(),
            margin: params.margin,
            rho_obs: params.rho_obs,
            rho_box: params.rho_box,
            max_iter: params.max_iter,
            eps: params.eps,
            horizon: nh,
            d,
            xs: vec![DVector::zeros(n); nh + 1],
            us: vec![DVector::zeros(m); nh],
            z: vec![DVector::zeros(m); nh],
            y: vec![DVector::zeros(m); nh],
            copies: vec![Vec::new(); nh + 1],
            planes: vec![Vec::new(); nh + 1],
            q: vec![DVector::zeros(n); nh + 1],
            r: vec![DVector::zeros(m); nh],
            dd: vec![DVector::zeros(m); nh],
            p: vec![DVector::zeros(n); nh + 1],
            scratch: DVector::zeros(m),
            warm: false,
            degenerate: 0,
        })
    }

    fn cold_start(&mut self, x0: &DVector<f64>) {
        // straight-line guess from the current position toward the goal
        let n = self.horizon;
        for k in 0..=n {
            let s = k as f64 / n as f64;
            self.xs[k] = x0 + (&self.goal - x0) * s;
        }
        for k in 0..n {
            self.us[k].fill(0.0);
            self.z[k].fill(0.0);
            self.y[k].fill(0.0);
        }
        self.warm = true;
    }

    fn linearize(&mut self, obstacles: &[Vec<Disk>]) {
        let d = self.d;
        for k in 1..=self.horizon {
            let pbar = self.xs[k].rows(0, d).into_owned();
            let mut planes = Vec::with_capacity(obstacles[k].len());
            for o in &obstacles[k] {
                match tangent_halfspace(&pbar, o, self.margin) {
                    Some(plane) => planes.push(plane),
                    None => self.degenerate += 1,
                }
            }
            if self.copies[k].len() != planes.len().max(1) {
                self.copies[k] = vec![(pbar.clone(), DVector::zeros(d)); planes.len().max(1)];
            }
            self.planes[k] = planes;
        }
    }

    /// One MPC solve from `x0`; returns the first input and the iteration
    /// count.
    pub fn solve(&mut self, x0: &DVector<f64>, obstacles: &[Vec<Disk>]) -> (DVector<f64>, usize) {
        if !self.warm {
            self.cold_start(x0);
        }
        self.linearize(obstacles);
        let n = self.horizon;
        let d = self.d;
        let qg = &self.q_half * &self.goal;
        // P∞ includes the consensus weight, which is centered on the copies
        // rather than the goal
        let mut pg = &self.cache.p_inf * &self.goal;
        for i in 0..d {
            pg[i] -= self.rho_obs * self.goal[i];
        }
        let mut iters = 0;
        for _ in 0..self.max_iter {
            iters += 1;
            for k in 0..=n {
                self.q[k] = if k == n { -&pg } else { -&qg };
                if k >= 1 {
                    let w = self.rho_obs / self.copies[k].len() as f64;
                    for (v, lam) in &self.copies[k] {
                        for i in 0..d {
                            self.q[k][i] -= w * (v[i] - lam[i]);
                        }
                    }
                }
            }
            for k in 0..n {
                self.r[k] = (&self.z[k] - &self.y[k]) * -self.rho_box;
            }
            self.cache.backward_into(&self.q, &self.r, &mut self.dd, &mut self.p, &mut self.scratch);
            self.xs[0].copy_from(x0);
            self.cache.rollout_into(&self.dd, &mut self.xs, &mut self.us);

            let mut rp: f64 = 0.0;
            let mut rd: f64 = 0.0;
            for k in 0..n {
                for i in 0..d {
                    let u = self.us[k][i];
                    let z = (u + self.y[k][i]).clamp(self.u_lo[i], self.u_hi[i]);
                    rd = rd.max(self.rho_box * (z - self.z[k][i]).abs());
                    rp = rp.max((u - z).abs());
                    self.z[k][i] = z;
                    self.y[k][i] += u - z;
                }
            }
            for k in 1..=n {
                let pk = self.xs[k].rows(0, d).into_owned();
                for (j, (v, lam)) in self.copies[k].iter_mut().enumerate() {
                    let w = &pk + &*lam;
                    let vn = match self.planes[k].get(j) {
                        Some((a, b)) => {
                            let g = a.dot(&w) - b;
                            if g >= 0.0 {
                                w
                            } else {
                                w - a * g
                            }
                        }
                        None => w,
                    };
                    rd = rd.max(self.rho_obs * (&vn - &*v).amax());
                    rp = rp.max((&pk - &vn).amax());
                    *lam += &pk - &vn;
                    *v = vn;
                }
            }
            if rp <= self.eps && rd <= self.eps {
                break;
            }
        }
        let u0 = self.us[0].clone();
        self.shift();
        (u0, iters)
    }

    fn shift(&mut self) {
        fn shift<T: Clone>(v: &mut [T]) {
            if v.len() > 1 {
                v.rotate_left(1);
                let n = v.len();
                v[n - 1] = v[n - 2].clone();
            }
        }
        shift(&mut self.xs);
        shift(&mut self.us);
        shift(&mut self.z);
        shift(&mut self.y);
        shift(&mut self.copies[1..]);
        // keep the terminal guess dynamically consistent
        let n = self.horizon;
        self.xs[n] = self.sys.step(&self.xs[n - 1], &self.us[n - 1]);
    }
}

/// Half-space `aᵀp ≥ b` tangent to the disk grown by `margin`, facing the
/// linearization point `pbar`. `None` when `pbar` sits on the center.
pub fn tangent_halfspace(pbar: &DVector<f64>, disk: &Disk, margin: f64) -> Option<(DVector<f64>, f64)> {
    let diff = pbar - &disk.center;
    let norm = diff.norm();
    if norm < 1e-9 {
        return None;
    }
    let a = diff / norm;
    let b = a.dot(&disk.center) + disk.radius + margin;
    Some((a, b))
}

/// Second-order barrier filter around a clamped LQR input.
pub struct HocbfController {
    k: DMatrix<f64>,
    goal: DVector<f64>,
    u_lo: DVector<f64>,
    u_hi: DVector<f64>,
    margin: f64,
    alpha1: f64,
    alpha2: f64,
    dt: f64,
    d: usize,
    /// Steps where the filter QP had no solution and the nominal input was
    /// applied.
    pub infeasible: usize,
}

impl HocbfController {
    pub fn new(
        sys: &LinearSystem,
        weights: &Weights,
        goal: DVector<f64>,
        margin: f64,
        alpha1: f64,
        alpha2: f64,
    ) -> Result<Self> {
        let lqr = RiccatiCache::compute(
            &sys.a,
            &sys.b,
            &weights.q,
            &weights.r,
            &weights.q,
            1,
            tinysdp::riccati::DEFAULT_TOL,
            tinysdp::riccati::DEFAULT_MAX_ITER,
        )?;
        Ok(Self {
            k: lqr.k_inf,
            goal,
            u_lo: weights.u_lo.clone(),
            u_hi: weights.u_hi.clone(),
            margin,
            alpha1,
            alpha2,
            dt: sys.dt,
            d: sys.nu(),
            infeasible: 0,
        })
    }

    pub fn nominal(&self, x: &DVector<f64>) -> DVector<f64> {
        let u = -&self.k * (x - &self.goal);
        u.zip_zip_map(&self.u_lo, &self.u_hi, |v, l, h| v.clamp(l, h))
    }

    /// Rows `gᵀu ≥ β` of the barrier condition
    /// `ḧ + (α₁+α₂)ḣ + α₁α₂h ≥ 0` with `h = ‖p−c‖² − (r+margin)²`.
    pub fn constraints(&self, x: &DVector<f64>, now: &[Disk], next: &[Disk]) -> Vec<(DVector<f64>, f64)> {
        let d = self.d;
        let p = x.rows(0, d).into_owned();
        let v = x.rows(d, d).into_owned();
        let (a1, a2) = (self.alpha1, self.alpha2);
        now.iter()
            .zip(next)
            .map(|(o, o1)| {
                let cdot = (&o1.center - &o.center) / self.dt;
                let e = &p - &o.center;
                let w = &v - cdot;
                let rr = o.radius + self.margin;
                let h = e.norm_squared() - rr * rr;
                let hdot = 2.0 * e.dot(&w);
                (e * 2.0, -2.0 * w.norm_squared() - (a1 + a2) * hdot - a1 * a2 * h)
            })
            .collect()
    }

    pub fn filter(&mut self, x: &DVector<f64>, now: &[Disk], next: &[Disk]) -> DVector<f64> {
        let nominal = self.nominal(x);
        let rows = self.constraints(x, now, next);
        if rows.iter().all(|(g, b)| g.dot(&nominal) >= *b) {
            return nominal;
        }
        match project_polytope(&nominal, &rows, &self.u_lo, &self.u_hi) {
            Some(u) => u,
            None => {
                self.infeasible += 1;
                nominal
            }
        }
    }
}

/// Euclidean projection of `u0` onto `{u : gᵀu ≥ β for all rows, lo ≤ u ≤ hi}`
/// by Dykstra's alternating projections; `None` if the set looks empty.
pub fn project_polytope(
    u0: &DVector<f64>,
    rows: &[(DVector<f64>, f64)],
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Option<DVector<f64>> {
    let sets = rows.len() + 1;
    let mut u = u0.clone();
    let mut incr = vec![DVector::zeros(u0.len()); sets];
    for _ in 0..2000 {
        let prev = u.clone();
        for (s, inc) in incr.iter_mut().enumerate() {
            let w = &u + &*inc;
            let next = if s < rows.len() {
                let (g, b) = &rows[s];
                let gg = g.norm_squared();
                let viol = b - g.dot(&w);
                if viol > 0.0 && gg > 0.0 {
                    &w + g * (viol / gg)
                } else {
                    w.clone()
                }
            } else {
                w.zip_zip_map(lo, hi, |v, l, h| v.clamp(l, h))
            };
            *inc = &w - &next;
            u = next;
        }
        if (&u - &prev).amax() < 1e-12 {
            break;
        }
    }
    let tol = 1e-6;
    let feasible = rows.iter().all(|(g, b)| g.dot(&u) >= b - tol * (1.0 + b.abs()))
        && u.iter().zip(lo.iter().zip(hi.iter())).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol);
    feasible.then_some(u)
}
