use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tinysdp::riccati::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use tinysdp::{Error, LiftedSystem, RiccatiCache};

fn s(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

#[test]
fn scalar_dare_is_the_golden_ratio() {
    // P = 1 + P − P²/(1 + P)  ⇒  P² − P − 1 = 0
    let c = RiccatiCache::compute(&s(1.0), &s(1.0), &s(1.0), &s(1.0), &s(1.0), 10, 1e-14, 100_000).unwrap();
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((c.p_inf[(0, 0)] - golden).abs() <= 1e-10);
    assert!((c.k_inf[(0, 0)] - golden / (1.0 + golden)).abs() <= 1e-10);
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.6..0.6)) + DMatrix::identity(n, n) * 0.5;
    let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    let lq = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = &lq * lq.transpose() + DMatrix::identity(n, n) * 0.5;
    let lr = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let r = &lr * lr.transpose() + DMatrix::identity(m, m) * 0.5;
    (a, b, q, r)
}

#[test]
fn cache_matches_long_backward_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (a, b, q, r) = random_problem(&mut rng, 2, 1);
        let cache = RiccatiCache::compute(&a, &b, &q, &r, &q, 10, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        // 10⁴ textbook steps P ← Q + AᵀPA − AᵀPB (R + BᵀPB)⁻¹ BᵀPA
        let mut p = q.clone();
        for _ in 0..10_000 {
            let g = (&r + b.transpose() * &p * &b).try_inverse().unwrap();
            p = &q + a.transpose() * &p * &a - a.transpose() * &p * &b * g * b.transpose() * &p * &a;
            p = (&p + p.transpose()) * 0.5;
        }
        let k = (&r + b.transpose() * &p * &b).try_inverse().unwrap() * b.transpose() * &p * &a;
        assert!((&cache.p_inf - &p).amax() <= 1e-8 * p.amax().max(1.0));
        assert!((&cache.k_inf - &k).amax() <= 1e-8 * k.amax().max(1.0));
        assert!(cache.closed_loop_spectral_radius() < 1.0);
    }
}

/// Dense KKT solve of the horizon-`N` problem with stage cost
/// `½xᵀQx + qᵀx + ½uᵀRu + rᵀu` and terminal `½xᵀP∞x + q_Nᵀx`.
fn kkt_oracle(
    cache: &RiccatiCache,
    q_mat: &DMatrix<f64>,
    r_mat: &DMatrix<f64>,
    q: &[DVector<f64>],
    r: &[DVector<f64>],
    x0: &DVector<f64>,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let (n, m, horizon) = (cache.nx(), cache.nu(), r.len());
    let nz = (horizon + 1) * n + horizon * m;
    let nc = (horizon + 1) * n;
    let xi = |k: usize| k * n;
    let ui = |k: usize| (horizon + 1) * n + k * m;
    let mut kkt = DMatrix::zeros(nz + nc, nz + nc);
    let mut rhs = DVector::zeros(nz + nc);
    for k in 0..=horizon {
        let h = if k == horizon { &cache.p_inf } else { q_mat };
        kkt.view_mut((xi(k), xi(k)), (n, n)).copy_from(h);
        rhs.rows_mut(xi(k), n).copy_from(&(-&q[k]));
    }
    for k in 0..horizon {
        kkt.view_mut((ui(k), ui(k)), (m, m)).copy_from(r_mat);
        rhs.rows_mut(ui(k), m).copy_from(&(-&r[k]));
    }
    // constraints: x_0 = x0, x_{k+1} − A x_k − B u_k = 0
    let mut g = DMatrix::zeros(nc, nz);
    g.view_mut((0, 0), (n, n)).fill_with_identity();
    rhs.rows_mut(nz, n).copy_from(x0);
    for k in 0..horizon {
        let row = (k + 1) * n;
        g.view_mut((row, xi(k + 1)), (n, n)).fill_with_identity();
        g.view_mut((row, xi(k)), (n, n)).copy_from(&(-&cache.a));
        g.view_mut((row, ui(k)), (n, m)).copy_from(&(-&cache.b));
    }
    kkt.view_mut((nz, 0), (nc, nz)).copy_from(&g);
    kkt.view_mut((0, nz), (nz, nc)).copy_from(&g.transpose());
    let sol = kkt.lu().solve(&rhs).unwrap();
    let xs = (0..=horizon).map(|k| sol.rows(xi(k), n).into_owned()).collect();
    let us = (0..horizon).map(|k| sol.rows(ui(k), m).into_owned()).collect();
    (xs, us)
}

fn check_sweep(cache: &RiccatiCache, q_mat: &DMatrix<f64>, r_mat: &DMatrix<f64>, horizon: usize, rng: &mut ChaCha8Rng) {
    let (n, m) = (cache.nx(), cache.nu());
    let q: Vec<DVector<f64>> = (0..=horizon).map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).collect();
    let r: Vec<DVector<f64>> = (0..horizon).map(|_| DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))).collect();
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let sweep = cache.backward_pass(&q, &r).unwrap();
    let (xs, us) = cache.forward_rollout(&sweep, &x0);
    let (xo, uo) = kkt_oracle(cache, q_mat, r_mat, &q, &r, &x0);
    for k in 0..=horizon {
        assert!((&xs[k] - &xo[k]).amax() <= 1e-6, "x[{k}]");
    }
    for k in 0..horizon {
        assert!((&us[k] - &uo[k]).amax() <= 1e-6, "u[{k}]");
    }
}

#[test]
fn sweep_matches_dense_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..30 {
        let n = 1 + trial % 6;
        let m = 1 + trial % 3;
        let horizon = 1 + trial % 5;
        let (a, b, q, r) = random_problem(&mut rng, n, m);
        let cache = RiccatiCache::compute(&a, &b, &q, &r, &q, horizon, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        check_sweep(&cache, &q, &r, horizon, &mut rng);
    }
}

#[test]
fn sweep_matches_dense_kkt_on_a_lifted_system() {
    // scalar double integrator: n̄_x = 2 + 4 = 6
    let l = LiftedSystem::double_integrator(1, 0.1).unwrap();
    let q = DMatrix::identity(l.n_bar_x, l.n_bar_x);
    let r = DMatrix::identity(l.n_bar_u, l.n_bar_u) * 0.5;
    let cache = RiccatiCache::compute(&l.a_bar, &l.b_bar, &q, &r, &q, 5, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    check_sweep(&cache, &q, &r, 5, &mut ChaCha8Rng::seed_from_u64(1));
}

#[test]
fn failures_are_reported() {
    // uncontrollable unstable mode
    let a = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.5]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let q = DMatrix::identity(2, 2);
    let r = s(1.0);
    match RiccatiCache::compute(&a, &b, &q, &r, &q, 5, DEFAULT_TOL, 200) {
        Err(Error::NonConvergence { residual }) => assert!(residual > DEFAULT_TOL),
        Err(Error::NonFinite(_)) => {}
        other => panic!("expected a failure, got {other:?}"),
    }
    assert!(matches!(
        RiccatiCache::compute(&a, &b, &q, &DMatrix::identity(2, 2), &q, 5, DEFAULT_TOL, 10),
        Err(Error::Dimension(_))
    ));
    assert!(matches!(
        RiccatiCache::compute(&s(1.0), &s(0.0), &s(1.0), &s(0.0), &s(1.0), 5, DEFAULT_TOL, 10),
        Err(Error::Singular(_))
    ));
    let cache = RiccatiCache::compute(&s(1.0), &s(1.0), &s(1.0), &s(1.0), &s(1.0), 3, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!(cache.backward_pass(&[DVector::zeros(1)], &[DVector::zeros(1)]).is_err());
}
