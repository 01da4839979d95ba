use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tinysdp::lifting::{lift_state, exact_lifted_input};
use tinysdp::{LiftedSystem, LinearSystem};

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.5..1.5))
}

/// `[x; vec(xxᵀ)]` built entry by entry.
fn state_oracle(x: &DVector<f64>) -> Vec<f64> {
    let n = x.len();
    let mut out = x.as_slice().to_vec();
    for j in 0..n {
        for i in 0..n {
            out.push(x[i] * x[j]);
        }
    }
    out
}

fn outer_vec(a: &DVector<f64>, b: &DVector<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for j in 0..b.len() {
        for i in 0..a.len() {
            out.push(a[i] * b[j]);
        }
    }
    out
}

fn input_oracle(x: &DVector<f64>, u: &DVector<f64>) -> Vec<f64> {
    let mut out = u.as_slice().to_vec();
    out.extend(outer_vec(x, u));
    out.extend(outer_vec(u, x));
    out.extend(outer_vec(u, u));
    out
}

#[test]
fn lift_propagate_commutes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..1000 {
        let n = 1 + trial % 3;
        let m = 1 + (trial / 3) % 2;
        let a = rand_mat(&mut rng, n, n);
        let b = rand_mat(&mut rng, n, m);
        let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let u = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
        let sys = LinearSystem::new(a.clone(), b.clone(), 0.1).unwrap();
        let lifted = LiftedSystem::new(sys, &[0]).unwrap();

        let xb = lift_state(&x);
        let ub = exact_lifted_input(&x, &u);
        assert_eq!(xb.as_slice(), state_oracle(&x).as_slice());
        assert_eq!(ub.as_slice(), input_oracle(&x, &u).as_slice());

        let next = &a * &x + &b * &u;
        let want = DVector::from_vec(state_oracle(&next));
        let got = lifted.propagate(&xb, &ub);
        let err = (got - &want).amax();
        assert!(err <= 1e-10 * want.amax().max(1.0), "n={n} m={m} err={err}");
    }
}

#[test]
fn double_integrator_is_exact_discretization() {
    let dt = 0.04;
    let sys = LinearSystem::double_integrator(2, dt).unwrap();
    let x = DVector::from_column_slice(&[1.0, -1.0, 0.5, 0.25]);
    let u = DVector::from_column_slice(&[2.0, -3.0]);
    let next = sys.step(&x, &u);
    // p + v dt + a dt²/2, v + a dt
    for i in 0..2 {
        let want_p = x[i] + x[2 + i] * dt + 0.5 * u[i] * dt * dt;
        let want_v = x[2 + i] + u[i] * dt;
        assert!((next[i] - want_p).abs() < 1e-15);
        assert!((next[2 + i] - want_v).abs() < 1e-15);
    }
}

#[test]
fn lifted_dimensions() {
    for d in 1..=3 {
        let l = LiftedSystem::double_integrator(d, 0.04).unwrap();
        let (n, m) = (2 * d, d);
        assert_eq!(l.n_bar_x, n + n * n);
        assert_eq!(l.n_bar_u, m + 2 * n * m + m * m);
        assert_eq!(l.a_bar.shape(), (l.n_bar_x, l.n_bar_x));
        assert_eq!(l.b_bar.shape(), (l.n_bar_x, l.n_bar_u));
        assert!(l.translation_invariant());
    }
    // a damped integrator is not translation invariant
    let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 1.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 0.1]);
    let l = LiftedSystem::new(LinearSystem::new(a, b, 0.1).unwrap(), &[0]).unwrap();
    assert!(!l.translation_invariant());
}

#[test]
fn translation_maps_rank_one_lifts_to_rank_one_lifts() {
    let l = LiftedSystem::double_integrator(2, 0.04).unwrap();
    let x = DVector::from_column_slice(&[1.0, 2.0, -0.5, 0.3]);
    let u = DVector::from_column_slice(&[0.7, -1.1]);
    let s = DVector::from_column_slice(&[0.4, -2.0]);
    let shifted = DVector::from_column_slice(&[0.6, 4.0, -0.5, 0.3]);
    let mut xb = lift_state(&x);
    let mut ub = exact_lifted_input(&x, &u);
    l.translate_state(&mut xb, &s);
    l.translate_input(&mut ub, &s);
    assert!((xb - DVector::from_vec(state_oracle(&shifted))).amax() < 1e-12);
    assert!((ub - DVector::from_vec(input_oracle(&shifted, &u))).amax() < 1e-12);
}

#[test]
fn invalid_systems_are_rejected() {
    assert!(LinearSystem::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 1), 0.1).is_err());
    assert!(LinearSystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(3, 1), 0.1).is_err());
    assert!(LinearSystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 1), 0.0).is_err());
    assert!(LinearSystem::double_integrator(0, 0.1).is_err());
    let sys = LinearSystem::double_integrator(1, 0.1).unwrap();
    assert!(LiftedSystem::new(sys.clone(), &[]).is_err());
    assert!(LiftedSystem::new(sys.clone(), &[5]).is_err());
    assert!(LiftedSystem::new(sys, &[0, 0]).is_err());
}
