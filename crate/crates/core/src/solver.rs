//! ADMM over the lifted MPC problem.
//!
//! Each iteration solves a lifted LQR problem with the cached Riccati sweep,
//! then projects three consensus families:
//!
//! * box: physical inputs against `[u_lo, u_hi]`,
//! * obstacle: per stage and disk, a copy of `ξ = (p, diag X_p)` against the
//!   lifted keep-out halfspace,
//! * PSD: the moment matrix against the PSD cone (or only its position block).
//!
//! Optional lifted input cuts `UU_ii <= (lo + hi) u_i − lo·hi` form a fourth
//! family sharing `rho_box`. All penalties are folded into the cached
//! Hessians, so only linear costs change online.
//!
//! The terminal stage has no PSD penalty. Its true cost is majorized around
//! the previous iterate using the cached `P∞`, which dominates the terminal
//! Hessian, so the cached sweep stays exact for the surrogate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use crate::certificate::Disk;
use crate::cones::{
    adjoint_moment_into, assemble_moment, disk_halfspace, moment_size, position_block_indices,
    project_halfspace, project_psd_symmetric, PsdSlackPair,
};
use crate::error::{Error, Result};
use crate::lifting::{
    build_lifted_cost, exact_lifted_input, lift_state, Augmentation, CostForm, LiftedCost,
    LiftedSystem, PsdBlock,
};
use crate::linalg::{smat_into, svec_into};
use crate::riccati::RiccatiCache;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rho_psd: f64,
    pub rho_box: f64,
    pub rho_obs: f64,
    /// Under-relaxation of the PSD dual step, in (0, 1].
    pub gamma_psd: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
    pub horizon: usize,
    pub psd_block: PsdBlock,
    pub cost_form: CostForm,
    pub input_cuts: bool,
    /// Added to every obstacle radius inside the solver only.
    pub obstacle_inflation: f64,
    /// Weight of the trace-gap penalty `tr(X_p) − ‖p‖²`, linearized at the
    /// previous iterate. Zero disables it.
    pub gap_weight: f64,
    /// ADMM over-relaxation factor in `(0, 2)`; 1 is plain ADMM.
    pub relaxation: f64,
    /// Iterate in coordinates centered on the measured position. Only
    /// applies to translation-invariant dynamics; results are mapped back.
    #[serde(default = "enabled")]
    pub recenter: bool,
    pub riccati_tol: f64,
    pub riccati_max_iter: usize,
}

fn enabled() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho_psd: 1.0,
            rho_box: 1.0,
            rho_obs: 100.0,
            gamma_psd: 1.0,
            eps_primal: 1e-3,
            eps_dual: 1e-3,
            max_iter: 200,
            horizon: 20,
            psd_block: PsdBlock::Full,
            cost_form: CostForm::Moment,
            input_cuts: true,
            obstacle_inflation: 0.0,
            gap_weight: 20.0,
            relaxation: 1.6,
            recenter: true,
            riccati_tol: crate::riccati::DEFAULT_TOL,
            riccati_max_iter: crate::riccati::DEFAULT_MAX_ITER,
        }
    }
}

impl SolverConfig {
    /// Embedded profile: five iterations and the `(1 + d)` position moment.
    pub fn hardware() -> Self {
        Self { max_iter: 5, psd_block: PsdBlock::PositionOnly, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_psd", self.rho_psd),
            ("rho_box", self.rho_box),
            ("rho_obs", self.rho_obs),
            ("eps_primal", self.eps_primal),
            ("eps_dual", self.eps_dual),
            ("riccati_tol", self.riccati_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma_psd > 0.0 && self.gamma_psd <= 1.0) {
            return Err(Error::Config(format!("gamma_psd must lie in (0, 1], got {}", self.gamma_psd)));
        }
        if self.max_iter == 0 || self.horizon == 0 {
            return Err(Error::Config("max_iter and horizon must be at least 1".into()));
        }
        if !(self.obstacle_inflation >= 0.0 && self.obstacle_inflation.is_finite()) {
            return Err(Error::Config("obstacle_inflation must be nonnegative".into()));
        }
        if !(self.gap_weight >= 0.0 && self.gap_weight.is_finite()) {
            return Err(Error::Config("gap_weight must be nonnegative".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::Config(format!("relaxation must lie in (0, 2), got {}", self.relaxation)));
        }
        Ok(())
    }

    pub fn augmentation(&self) -> Augmentation {
        Augmentation {
            rho_psd: self.rho_psd,
            rho_box: self.rho_box,
            rho_obs: self.rho_obs,
            input_cuts: self.input_cuts,
        }
    }
}

/// Tracking weights and input bounds of the physical problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Terminal weight; `None` uses the physical steady-state cost-to-go.
    pub qf: Option<DMatrix<f64>>,
    pub u_lo: DVector<f64>,
    pub u_hi: DVector<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub x_bar: Vec<DVector<f64>>,
    pub u_bar: Vec<DVector<f64>>,
    pub positions: Vec<DVector<f64>>,
    pub position_moments: Vec<DMatrix<f64>>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

impl Solution {
    /// Trace gap at every stage.
    pub fn trace_gaps(&self) -> Vec<f64> {
        self.positions
            .iter()
            .zip(&self.position_moments)
            .map(|(p, xp)| crate::certificate::trace_gap(p, xp))
            .collect()
    }
}

#[derive(Clone, Debug)]
struct ObstacleCopy {
    v: DVector<f64>,
    lam: DVector<f64>,
}

#[derive(Clone, Debug)]
struct StageObstacles {
    copies: Vec<ObstacleCopy>,
    /// Halfspaces `(a, b)`; empty means the copy is unconstrained.
    planes: Vec<(DVector<f64>, f64)>,
}

/// Per-instance iterates and scratch buffers.
#[derive(Clone, Debug)]
pub struct SolverWorkspace {
    pub xs: Vec<DVector<f64>>,
    pub us: Vec<DVector<f64>>,
    pub psd: Vec<PsdSlackPair>,
    pub z_u: Vec<DVector<f64>>,
    pub y_u: Vec<DVector<f64>>,
    /// Input-cut slack/dual per stage: `[u_0, UU_00, u_1, UU_11, ...]`.
    pub cut_v: Vec<DVector<f64>>,
    pub cut_l: Vec<DVector<f64>>,
    obstacles: Vec<StageObstacles>,
    q: Vec<DVector<f64>>,
    r: Vec<DVector<f64>>,
    d: Vec<DVector<f64>>,
    p: Vec<DVector<f64>>,
    scratch: DVector<f64>,
    m_full: DMatrix<f64>,
    t_full: DMatrix<f64>,
    s_full: DMatrix<f64>,
    anchor: DVector<f64>,
    /// World position of the working frame's origin.
    origin: DVector<f64>,
    /// Goal terms of the linear cost in the working frame.
    q_ref: DVector<f64>,
    qf_ref: DVector<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    initialized: bool,
}

impl SolverWorkspace {
    fn new(lifted: &LiftedSystem, n: usize) -> Self {
        let (nbx, nbu, m) = (lifted.n_bar_x, lifted.n_bar_u, lifted.nu());
        let p = moment_size(lifted);
        Self {
            xs: vec![DVector::zeros(nbx); n + 1],
            us: vec![DVector::zeros(nbu); n],
            psd: vec![PsdSlackPair::zeros(p); n],
            z_u: vec![DVector::zeros(m); n],
            y_u: vec![DVector::zeros(m); n],
            cut_v: vec![DVector::zeros(2 * m); n],
            cut_l: vec![DVector::zeros(2 * m); n],
            obstacles: vec![StageObstacles { copies: Vec::new(), planes: Vec::new() }; n + 1],
            q: vec![DVector::zeros(nbx); n + 1],
            r: vec![DVector::zeros(nbu); n],
            d: vec![DVector::zeros(nbu); n],
            p: vec![DVector::zeros(nbx); n + 1],
            scratch: DVector::zeros(nbu),
            m_full: DMatrix::zeros(p, p),
            t_full: DMatrix::zeros(p, p),
            s_full: DMatrix::zeros(p, p),
            anchor: DVector::zeros(nbx),
            origin: DVector::zeros(lifted.d),
            q_ref: DVector::zeros(nbx),
            qf_ref: DVector::zeros(nbx),
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            iterations: 0,
            initialized: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solver {
    pub lifted: LiftedSystem,
    pub cost: LiftedCost,
    pub cache: RiccatiCache,
    /// Physical LQR used for the terminal weight and cold starts.
    pub physical: RiccatiCache,
    pub weights: Weights,
    pub cfg: SolverConfig,
    goal: DVector<f64>,
    margin_idx: Vec<usize>,
    block_idx: Vec<usize>,
    recenter: bool,
    pub ws: SolverWorkspace,
}

/// `T M Tᵀ` with `T = I − σ̃ e₀ᵀ`, where `σ̃` places `sig` in the state
/// rows of the moment matrix.
fn shift_congruence(m: &mut DMatrix<f64>, sig: &DVector<f64>) {
    let p = m.ncols();
    for (i, &s) in sig.iter().enumerate() {
        for j in 0..p {
            m[(1 + i, j)] -= s * m[(0, j)];
        }
    }
    for (i, &s) in sig.iter().enumerate() {
        for j in 0..p {
            m[(j, 1 + i)] -= s * m[(j, 0)];
        }
    }
}

/// `T⁻ᵀ H T⁻¹` for the same `T`.
fn shift_dual_congruence(h: &mut DMatrix<f64>, sig: &DVector<f64>) {
    let p = h.ncols();
    for j in 0..p {
        let add: f64 = sig.iter().enumerate().map(|(i, &s)| s * h[(1 + i, j)]).sum();
        h[(0, j)] += add;
    }
    for j in 0..p {
        let add: f64 = sig.iter().enumerate().map(|(i, &s)| s * h[(j, 1 + i)]).sum();
        h[(j, 0)] += add;
    }
}

/// Physical steady-state LQR for `(A, B, Q, R)`.
pub fn physical_lqr(lifted: &LiftedSystem, q: &DMatrix<f64>, r: &DMatrix<f64>, cfg: &SolverConfig) -> Result<RiccatiCache> {
    let base = &lifted.base;
    RiccatiCache::compute(&base.a, &base.b, q, r, q, cfg.horizon, cfg.riccati_tol, cfg.riccati_max_iter)
}

/// Lifted cache for a given configuration. The goal does not enter.
pub fn lifted_cache(lifted: &LiftedSystem, weights: &Weights, cfg: &SolverConfig) -> Result<RiccatiCache> {
    cfg.validate()?;
    let physical = physical_lqr(lifted, &weights.q, &weights.r, cfg)?;
    let cost = cost_for(lifted, weights, &physical, cfg, &DVector::zeros(lifted.nx()))?;
    RiccatiCache::compute(
        &lifted.a_bar,
        &lifted.b_bar,
        &cost.h_x,
        &cost.h_u,
        &cost.h_n,
        cfg.horizon,
        cfg.riccati_tol,
        cfg.riccati_max_iter,
    )
}

fn cost_for(
    lifted: &LiftedSystem,
    weights: &Weights,
    physical: &RiccatiCache,
    cfg: &SolverConfig,
    goal: &DVector<f64>,
) -> Result<LiftedCost> {
    let qf = weights.qf.clone().unwrap_or_else(|| physical.p_inf.clone());
    build_lifted_cost(
        lifted,
        &weights.q,
        &weights.r,
        &qf,
        goal,
        &cfg.augmentation(),
        cfg.cost_form,
        cfg.psd_block,
    )
}

impl Solver {
    pub fn new(lifted: LiftedSystem, weights: Weights, cfg: SolverConfig, goal: DVector<f64>) -> Result<Self> {
        let cache = lifted_cache(&lifted, &weights, &cfg)?;
        Self::with_cache(lifted, weights, cfg, goal, cache)
    }

    /// Builds a solver around a previously computed lifted cache.
    pub fn with_cache(
        lifted: LiftedSystem,
        weights: Weights,
        cfg: SolverConfig,
        goal: DVector<f64>,
        cache: RiccatiCache,
    ) -> Result<Self> {
        cfg.validate()?;
        let m = lifted.nu();
        if weights.u_lo.len() != m || weights.u_hi.len() != m {
            return Err(Error::Dimension("input bounds must have n_u entries".into()));
        }
        if weights.u_lo.iter().zip(weights.u_hi.iter()).any(|(l, h)| !(l <= h)) {
            return Err(Error::Config("input bounds need lo <= hi".into()));
        }
        if cache.nx() != lifted.n_bar_x || cache.nu() != lifted.n_bar_u {
            return Err(Error::Dimension("cache does not match the lifted system".into()));
        }
        let physical = physical_lqr(&lifted, &weights.q, &weights.r, &cfg)?;
        let cost = cost_for(&lifted, &weights, &physical, &cfg, &goal)?;
        let margin_idx = lifted.margin_coords();
        let block_idx = position_block_indices(&lifted);
        let ws = SolverWorkspace::new(&lifted, cfg.horizon);
        let recenter = cfg.recenter && lifted.translation_invariant();
        Ok(Self { lifted, cost, cache, physical, weights, cfg, goal, margin_idx, block_idx, recenter, ws })
    }

    pub fn goal(&self) -> &DVector<f64> {
        &self.goal
    }

    /// Changes the tracked goal; the cache is unaffected.
    pub fn set_goal(&mut self, goal: DVector<f64>) -> Result<()> {
        self.cost = cost_for(&self.lifted, &self.weights, &self.physical, &self.cfg, &goal)?;
        self.goal = goal;
        Ok(())
    }

    /// Drops all warm-start state.
    pub fn reset(&mut self) {
        self.ws = SolverWorkspace::new(&self.lifted, self.cfg.horizon);
    }

    pub fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    /// Steady-state physical LQR rollout toward the goal, inputs clamped to
    /// the box when `clamp` is set.
    pub fn lqr_rollout(&self, x0: &DVector<f64>, clamp: bool) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        self.rollout_toward(x0, &self.goal, clamp)
    }

    fn rollout_toward(
        &self,
        x0: &DVector<f64>,
        goal: &DVector<f64>,
        clamp: bool,
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let base = &self.lifted.base;
        let mut xs = vec![x0.clone()];
        let mut us = Vec::with_capacity(self.cfg.horizon);
        for k in 0..self.cfg.horizon {
            let mut u = -&self.physical.k_inf * (&xs[k] - goal);
            if clamp {
                u = u.zip_zip_map(&self.weights.u_lo, &self.weights.u_hi, |v, l, h| v.clamp(l, h));
            }
            xs.push(base.step(&xs[k], &u));
            us.push(u);
        }
        (xs, us)
    }

    /// `x0` and the goal are in the working frame.
    fn cold_start(&mut self, x0: &DVector<f64>, goal: &DVector<f64>) {
        let (xs, us) = self.rollout_toward(x0, goal, true);
        let m = self.lifted.nu();
        let ws = &mut self.ws;
        let p = moment_size(&self.lifted);
        let mut mm = DMatrix::zeros(p, p);
        for k in 0..=self.cfg.horizon {
            ws.xs[k] = lift_state(&xs[k]);
        }
        for k in 0..self.cfg.horizon {
            ws.us[k] = exact_lifted_input(&xs[k], &us[k]);
            mm.copy_from(&assemble_moment(&self.lifted, &ws.xs[k], &ws.us[k]));
            svec_into(&mm, ws.psd[k].s.as_mut_slice());
            ws.psd[k].h.fill(0.0);
            ws.z_u[k].copy_from(&us[k]);
            ws.y_u[k].fill(0.0);
            for i in 0..m {
                ws.cut_v[k][2 * i] = us[k][i];
                ws.cut_v[k][2 * i + 1] = us[k][i] * us[k][i];
            }
            ws.cut_l[k].fill(0.0);
        }
        for stage in ws.obstacles.iter_mut() {
            stage.copies.clear();
            stage.planes.clear();
        }
        ws.anchor = ws.xs[self.cfg.horizon].clone();
        ws.initialized = true;
    }

    /// Installs the per-stage halfspaces and (re)initializes copies whose
    /// stage changed obstacle count.
    fn load_obstacles(&mut self, obstacles: &[Vec<Disk>]) {
        let infl = self.cfg.obstacle_inflation;
        for k in 1..=self.cfg.horizon {
            let disks = &obstacles[k];
            let planes: Vec<(DVector<f64>, f64)> = disks
                .iter()
                .map(|o| disk_halfspace(&o.center, o.radius + infl))
                .collect();
            let count = disks.len().max(1);
            let stage = &mut self.ws.obstacles[k];
            let changed = stage.copies.len() != count || stage.planes.is_empty() != planes.is_empty();
            if changed {
                let xi = DVector::from_iterator(
                    self.margin_idx.len(),
                    self.margin_idx.iter().map(|&i| self.ws.xs[k][i]),
                );
                let lam = DVector::zeros(xi.len());
                stage.copies = vec![ObstacleCopy { v: xi, lam }; count];
            }
            stage.planes = planes;
        }
    }

    fn check_inputs(&self, x: &DVector<f64>, obstacles: &[Vec<Disk>]) -> Result<()> {
        if x.len() != self.lifted.nx() {
            return Err(Error::Dimension(format!("state has {} entries, expected {}", x.len(), self.lifted.nx())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measured state"));
        }
        if obstacles.len() != self.cfg.horizon + 1 {
            return Err(Error::Dimension(format!(
                "need obstacle lists for {} stages, got {}",
                self.cfg.horizon + 1,
                obstacles.len()
            )));
        }
        let d = self.lifted.d;
        if obstacles.iter().flatten().any(|o| o.center.len() != d || !(o.radius > 0.0)) {
            return Err(Error::Dimension(format!("obstacles must be {d}-dimensional with positive radius")));
        }
        Ok(())
    }

    /// Runs ADMM from the current warm start.
    pub fn solve(&mut self, x_meas: &DVector<f64>, obstacles: &[Vec<Disk>]) -> Result<Solution> {
        self.check_inputs(x_meas, obstacles)?;
        let origin = if self.recenter {
            self.lifted.position(&lift_state(x_meas))
        } else {
            DVector::zeros(self.lifted.d)
        };
        let sigma = self.lifted.position_offset(&origin);
        let goal = &self.goal - &sigma;
        if self.ws.initialized {
            let delta = &origin - &self.ws.origin;
            if delta.iter().any(|v| *v != 0.0) {
                self.translate_warm_start(&delta);
            }
            self.ws.origin = origin;
        } else {
            self.ws.origin = origin;
            self.cold_start(&(x_meas - &sigma), &goal);
        }
        self.refresh_goal_terms(&sigma);
        let local: Vec<Vec<Disk>> = obstacles
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .map(|o| Disk { center: &o.center - &self.ws.origin, radius: o.radius })
                    .collect()
            })
            .collect();
        self.load_obstacles(&local);
        let x0 = lift_state(&(x_meas - &sigma));
        let mut converged = false;
        let mut iters = 0;
        for _ in 0..self.cfg.max_iter {
            iters += 1;
            self.primal_update(&x0);
            if self.ws.xs.iter().chain(self.ws.us.iter()).any(|v| v.iter().any(|x| !x.is_finite())) {
                return Err(Error::NonFinite("solver iterate"));
            }
            self.slack_dual_update();
            if self.ws.primal_residual <= self.cfg.eps_primal && self.ws.dual_residual <= self.cfg.eps_dual {
                converged = true;
                break;
            }
        }
        self.ws.iterations = iters;
        Ok(self.solution(converged))
    }

    /// Linear costs from goal terms and all consensus families, then the
    /// cached backward and forward sweeps.
    pub fn primal_update(&mut self, x0: &DVector<f64>) {
        let n = self.cfg.horizon;
        let m = self.lifted.nu();
        let cfg = &self.cfg;
        let ws = &mut self.ws;
        let p = ws.m_full.nrows();

        for k in 0..n {
            ws.q[k].copy_from(&ws.q_ref);
            ws.r[k].copy_from(&self.cost.r_ref);
            smat_into(ws.psd[k].s.as_slice(), &mut ws.t_full);
            smat_into(ws.psd[k].h.as_slice(), &mut ws.s_full);
            ws.t_full -= &ws.s_full;
            adjoint_moment_into(&ws.t_full, &self.lifted, cfg.rho_psd, &mut ws.q[k], &mut ws.r[k]);
            for i in 0..m {
                ws.r[k][i] -= cfg.rho_box * (ws.z_u[k][i] - ws.y_u[k][i]);
                if cfg.input_cuts {
                    ws.r[k][i] -= cfg.rho_box * (ws.cut_v[k][2 * i] - ws.cut_l[k][2 * i]);
                    let uu = self.lifted.uu(i, i);
                    ws.r[k][uu] -= cfg.rho_box * (ws.cut_v[k][2 * i + 1] - ws.cut_l[k][2 * i + 1]);
                }
            }
        }
        debug_assert_eq!(p, ws.t_full.nrows());

        // terminal surrogate: ∇f_N(x̂) − 2 P∞ x̂
        let xh = &ws.anchor;
        let qn = &mut ws.q[n];
        qn.copy_from(&ws.qf_ref);
        qn.gemv(2.0, &self.cost.h_n, xh, 1.0);
        qn.gemv(-2.0, &self.cache.p_inf, xh, 1.0);

        if cfg.gap_weight > 0.0 {
            let mu = cfg.gap_weight;
            for k in 1..=n {
                for &r in &self.lifted.pos_rows {
                    let prev = ws.xs[k][r];
                    ws.q[k][self.lifted.xx(r, r)] += mu;
                    ws.q[k][r] -= 2.0 * mu * prev;
                }
            }
        }

        for k in 1..=n {
            let stage = &ws.obstacles[k];
            let w = cfg.rho_obs / stage.copies.len() as f64;
            for c in &stage.copies {
                for (a, &i) in self.margin_idx.iter().enumerate() {
                    ws.q[k][i] -= w * (c.v[a] - c.lam[a]);
                }
            }
        }

        // the cache is in ½-form, the objective is not
        for v in ws.q.iter_mut().chain(ws.r.iter_mut()) {
            *v *= 0.5;
        }
        self.cache.backward_into(&ws.q, &ws.r, &mut ws.d, &mut ws.p, &mut ws.scratch);
        ws.xs[0].copy_from(x0);
        self.cache.rollout_into(&ws.d, &mut ws.xs, &mut ws.us);
        ws.anchor.copy_from(&ws.xs[n]);
    }

    /// Projections and scaled dual steps for every family; updates residuals.
    pub fn slack_dual_update(&mut self) {
        let n = self.cfg.horizon;
        let m = self.lifted.nu();
        let cfg = &self.cfg;
        let ws = &mut self.ws;
        let alpha = cfg.relaxation;
        let mut rp: f64 = 0.0;
        let mut rd: f64 = 0.0;

        for k in 0..n {
            // PSD
            ws.m_full.copy_from(&assemble_moment(&self.lifted, &ws.xs[k], &ws.us[k]));
            smat_into(ws.psd[k].h.as_slice(), &mut ws.t_full);
            smat_into(ws.psd[k].s.as_slice(), &mut ws.s_full);
            let m_hat = &ws.m_full * alpha + &ws.s_full * (1.0 - alpha);
            let y = &m_hat + &ws.t_full;
            let s_new = match cfg.psd_block {
                PsdBlock::Full => project_psd_symmetric(&y),
                PsdBlock::PositionOnly => {
                    let idx = &self.block_idx;
                    let sub = y.select_rows(idx.iter()).select_columns(idx.iter());
                    let proj = project_psd_symmetric(&sub);
                    let mut out = y.clone();
                    for (a, &i) in idx.iter().enumerate() {
                        for (b, &j) in idx.iter().enumerate() {
                            out[(i, j)] = proj[(a, b)];
                        }
                    }
                    out
                }
            };
            rd = rd.max(cfg.rho_psd * (&s_new - &ws.s_full).norm());
            rp = rp.max((&ws.m_full - &s_new).norm());
            let h_new = &ws.t_full + cfg.gamma_psd * (&m_hat - &s_new);
            svec_into(&s_new, ws.psd[k].s.as_mut_slice());
            svec_into(&h_new, ws.psd[k].h.as_mut_slice());

            // box
            let (lo, hi) = (&self.weights.u_lo, &self.weights.u_hi);
            for i in 0..m {
                let u = ws.us[k][i];
                let uh = alpha * u + (1.0 - alpha) * ws.z_u[k][i];
                let z = (uh + ws.y_u[k][i]).clamp(lo[i], hi[i]);
                rd = rd.max(cfg.rho_box * (z - ws.z_u[k][i]).abs());
                rp = rp.max((u - z).abs());
                ws.z_u[k][i] = z;
                ws.y_u[k][i] += uh - z;
            }

            // lifted input cuts: (lo + hi) u − UU − lo·hi >= 0
            if cfg.input_cuts {
                for i in 0..m {
                    let u = ws.us[k][i];
                    let uu = ws.us[k][self.lifted.uu(i, i)];
                    let (l0, l1) = (ws.cut_l[k][2 * i], ws.cut_l[k][2 * i + 1]);
                    let uh = alpha * u + (1.0 - alpha) * ws.cut_v[k][2 * i];
                    let uuh = alpha * uu + (1.0 - alpha) * ws.cut_v[k][2 * i + 1];
                    let (w0, w1) = (uh + l0, uuh + l1);
                    let (a0, a1, b) = (lo[i] + hi[i], -1.0, -lo[i] * hi[i]);
                    let g = a0 * w0 + a1 * w1 + b;
                    let (v0, v1) = if g >= 0.0 {
                        (w0, w1)
                    } else {
                        let s = g / (a0 * a0 + a1 * a1);
                        (w0 - s * a0, w1 - s * a1)
                    };
                    rd = rd.max(cfg.rho_box * (v0 - ws.cut_v[k][2 * i]).abs().max((v1 - ws.cut_v[k][2 * i + 1]).abs()));
                    rp = rp.max((u - v0).abs().max((uu - v1).abs()));
                    ws.cut_v[k][2 * i] = v0;
                    ws.cut_v[k][2 * i + 1] = v1;
                    ws.cut_l[k][2 * i] = l0 + uh - v0;
                    ws.cut_l[k][2 * i + 1] = l1 + uuh - v1;
                }
            }
        }

        // obstacle copies
        for k in 1..=n {
            let xi = DVector::from_iterator(self.margin_idx.len(), self.margin_idx.iter().map(|&i| ws.xs[k][i]));
            let stage = &mut ws.obstacles[k];
            for (j, c) in stage.copies.iter_mut().enumerate() {
                let xh = &xi * alpha + &c.v * (1.0 - alpha);
                let w = &xh + &c.lam;
                let v = match stage.planes.get(j) {
                    Some((a, b)) => project_halfspace(&w, a, *b),
                    None => w,
                };
                rd = rd.max(cfg.rho_obs * (&v - &c.v).amax());
                rp = rp.max((&xi - &v).amax());
                c.lam += &xh - &v;
                c.v = v;
            }
        }

        ws.primal_residual = rp;
        ws.dual_residual = rd;
    }

    /// Current primal and dual residuals.
    pub fn residuals(&self) -> (f64, f64) {
        (self.ws.primal_residual, self.ws.dual_residual)
    }

    /// Shifts slacks, duals and the primal guess one stage forward for the
    /// next MPC step; the last stage is duplicated. No-op before the first
    /// solve.
    pub fn warm_start_shift(&mut self) {
        let ws = &mut self.ws;
        if !ws.initialized {
            return;
        }
        fn shift<T: Clone>(v: &mut [T]) {
            if v.len() > 1 {
                v.rotate_left(1);
                let n = v.len();
                v[n - 1] = v[n - 2].clone();
            }
        }
        shift(&mut ws.xs);
        shift(&mut ws.us);
        shift(&mut ws.psd);
        shift(&mut ws.z_u);
        shift(&mut ws.y_u);
        shift(&mut ws.cut_v);
        shift(&mut ws.cut_l);
        // stage 0 holds no copies; shift stages 1..=N
        shift(&mut ws.obstacles[1..]);
    }

    /// Goal terms of the linear cost with the origin at `sigma`: the goal
    /// enters only as `−2 Q g` on the first-order block.
    fn refresh_goal_terms(&mut self, sigma: &DVector<f64>) {
        let n = self.lifted.nx();
        let ws = &mut self.ws;
        ws.q_ref.copy_from(&self.cost.q_ref);
        ws.qf_ref.copy_from(&self.cost.qf_ref);
        let qf = self.weights.qf.as_ref().unwrap_or(&self.physical.p_inf);
        ws.q_ref.rows_mut(0, n).gemv(2.0, &self.weights.q, sigma, 1.0);
        ws.qf_ref.rows_mut(0, n).gemv(2.0, qf, sigma, 1.0);
    }

    /// Moves every warm-start quantity to a frame whose origin is shifted by
    /// `delta`. Primal iterates and slacks follow the exact affine change of
    /// coordinates; duals follow its inverse transpose so that the
    /// Lagrangian pairing is preserved.
    fn translate_warm_start(&mut self, delta: &DVector<f64>) {
        let l = &self.lifted;
        let ws = &mut self.ws;
        for (x, u) in ws.xs.iter_mut().zip(ws.us.iter_mut()) {
            l.translate_input(u, delta);
            l.translate_state(x, delta);
        }
        if let Some(last) = ws.xs.last_mut() {
            l.translate_state(last, delta);
        }
        l.translate_state(&mut ws.anchor, delta);

        let sig = l.position_offset(delta);
        for pair in ws.psd.iter_mut() {
            // S ← T S Tᵀ and H ← T⁻ᵀ H T⁻¹ with T = I − σ̃ e₀ᵀ
            smat_into(pair.s.as_slice(), &mut ws.s_full);
            smat_into(pair.h.as_slice(), &mut ws.t_full);
            shift_congruence(&mut ws.s_full, &sig);
            shift_dual_congruence(&mut ws.t_full, &sig);
            svec_into(&ws.s_full, pair.s.as_mut_slice());
            svec_into(&ws.t_full, pair.h.as_mut_slice());
        }

        let d = l.d;
        for stage in ws.obstacles.iter_mut() {
            for c in stage.copies.iter_mut() {
                for a in 0..d {
                    let (s, p) = (delta[a], c.v[a]);
                    c.v[d + a] += -2.0 * s * p + s * s;
                    c.v[a] -= s;
                    c.lam[a] += 2.0 * s * c.lam[d + a];
                }
            }
        }
    }

    fn solution(&self, converged: bool) -> Solution {
        let ws = &self.ws;
        let l = &self.lifted;
        let back = -&ws.origin;
        let xs: Vec<DVector<f64>> = ws
            .xs
            .iter()
            .map(|x| {
                let mut x = x.clone();
                l.translate_state(&mut x, &back);
                x
            })
            .collect();
        let us: Vec<DVector<f64>> = ws
            .us
            .iter()
            .map(|u| {
                let mut u = u.clone();
                l.translate_input(&mut u, &back);
                u
            })
            .collect();
        Solution {
            x: xs.iter().map(|x| l.state(x)).collect(),
            u: us.iter().map(|u| l.input(u)).collect(),
            positions: xs.iter().map(|x| l.position(x)).collect(),
            position_moments: xs.iter().map(|x| l.position_moment(x)).collect(),
            x_bar: xs,
            u_bar: us,
            iterations: ws.iterations,
            primal_residual: ws.primal_residual,
            dual_residual: ws.dual_residual,
            converged,
        }
    }
}
