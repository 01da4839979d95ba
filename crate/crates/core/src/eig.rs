//! Symmetric eigendecomposition for the small moment matrices.
//!
//! Sizes up to 3 use closed forms (the 3×3 path follows Eberly's robust
//! trigonometric solver); larger sizes use cyclic Jacobi rotations.

use nalgebra::{DMatrix, DVector};

const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigenvalues (ascending) and orthonormal eigenvectors (as columns) of a
/// symmetric matrix. Only the lower triangle is trusted.
pub fn sym_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    match n {
        0 => (DVector::zeros(0), DMatrix::zeros(0, 0)),
        1 => (DVector::from_element(1, a[(0, 0)]), DMatrix::identity(1, 1)),
        2 => eig2(a[(0, 0)], a[(1, 0)], a[(1, 1)]),
        3 => eig3(a),
        _ => jacobi(a),
    }
}

fn eig2(a: f64, b: f64, c: f64) -> (DVector<f64>, DMatrix<f64>) {
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let radius = half_diff.hypot(b);
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let (s, co) = theta.sin_cos();
    // (co, s) pairs with mean + radius
    let vals = DVector::from_column_slice(&[mean - radius, mean + radius]);
    let vecs = DMatrix::from_column_slice(2, 2, &[-s, co, co, s]);
    (vals, vecs)
}

type V3 = [f64; 3];

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn orthogonal_complement(w: V3) -> (V3, V3) {
    let u = if w[0].abs() > w[1].abs() {
        let inv = 1.0 / (w[0] * w[0] + w[2] * w[2]).sqrt();
        [-w[2] * inv, 0.0, w[0] * inv]
    } else {
        let inv = 1.0 / (w[1] * w[1] + w[2] * w[2]).sqrt();
        [0.0, w[2] * inv, -w[1] * inv]
    };
    (u, cross(w, u))
}

fn eigenvector_distinct(m: &[[f64; 3]; 3], eval: f64) -> V3 {
    let r0 = [m[0][0] - eval, m[0][1], m[0][2]];
    let r1 = [m[0][1], m[1][1] - eval, m[1][2]];
    let r2 = [m[0][2], m[1][2], m[2][2] - eval];
    let c01 = cross(r0, r1);
    let c02 = cross(r0, r2);
    let c12 = cross(r1, r2);
    let (d01, d02, d12) = (dot(c01, c01), dot(c02, c02), dot(c12, c12));
    let (best, d) = if d01 >= d02 && d01 >= d12 {
        (c01, d01)
    } else if d02 >= d12 {
        (c02, d02)
    } else {
        (c12, d12)
    };
    if d <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    scale(best, 1.0 / d.sqrt())
}

fn eigenvector_in_complement(m: &[[f64; 3]; 3], first: V3, eval: f64) -> V3 {
    let (u, v) = orthogonal_complement(first);
    let mul = |x: V3| -> V3 {
        [
            m[0][0] * x[0] + m[0][1] * x[1] + m[0][2] * x[2],
            m[0][1] * x[0] + m[1][1] * x[1] + m[1][2] * x[2],
            m[0][2] * x[0] + m[1][2] * x[1] + m[2][2] * x[2],
        ]
    };
    let au = mul(u);
    let av = mul(v);
    let mut m00 = dot(u, au) - eval;
    let mut m01 = dot(u, av);
    let mut m11 = dot(v, av) - eval;
    let (a00, a01, a11) = (m00.abs(), m01.abs(), m11.abs());
    let combine = |a: f64, b: f64| [a * u[0] - b * v[0], a * u[1] - b * v[1], a * u[2] - b * v[2]];
    if a00 >= a11 {
        if a00.max(a01) > 0.0 {
            if a00 >= a01 {
                m01 /= m00;
                m00 = 1.0 / (1.0 + m01 * m01).sqrt();
                m01 *= m00;
            } else {
                m00 /= m01;
                m01 = 1.0 / (1.0 + m00 * m00).sqrt();
                m00 *= m01;
            }
            combine(m01, m00)
        } else {
            u
        }
    } else if a11.max(a01) > 0.0 {
        if a11 >= a01 {
            m01 /= m11;
            m11 = 1.0 / (1.0 + m01 * m01).sqrt();
            m01 *= m11;
        } else {
            m11 /= m01;
            m01 = 1.0 / (1.0 + m11 * m11).sqrt();
            m11 *= m01;
        }
        combine(m11, m01)
    } else {
        u
    }
}

fn eig3(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (a00, a01, a02) = (a[(0, 0)], a[(1, 0)], a[(2, 0)]);
    let (a11, a12, a22) = (a[(1, 1)], a[(2, 1)], a[(2, 2)]);
    let max0 = [a00, a01, a02, a11, a12, a22]
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    if max0 == 0.0 {
        return (DVector::zeros(3), DMatrix::identity(3, 3));
    }
    let inv = 1.0 / max0;
    let m = [
        [a00 * inv, a01 * inv, a02 * inv],
        [a01 * inv, a11 * inv, a12 * inv],
        [a02 * inv, a12 * inv, a22 * inv],
    ];
    let norm_off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let (b00, b11, b22) = (m[0][0] - q, m[1][1] - q, m[2][2] - q);
    let p = ((b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * norm_off) / 6.0).sqrt();
    if p == 0.0 {
        let vals = DVector::from_element(3, q * max0);
        return (vals, DMatrix::identity(3, 3));
    }
    let c00 = b11 * b22 - m[1][2] * m[1][2];
    let c01 = m[0][1] * b22 - m[1][2] * m[0][2];
    let c02 = m[0][1] * m[1][2] - b11 * m[0][2];
    let det = (b00 * c00 - m[0][1] * c01 + m[0][2] * c02) / (p * p * p);
    let half_det = (0.5 * det).clamp(-1.0, 1.0);
    let angle = half_det.acos() / 3.0;
    let two_thirds_pi = 2.0 * std::f64::consts::FRAC_PI_3;
    let beta2 = angle.cos() * 2.0;
    let beta0 = (angle + two_thirds_pi).cos() * 2.0;
    let beta1 = -(beta0 + beta2);
    let evals = [q + p * beta0, q + p * beta1, q + p * beta2];

    let (e0, e1, e2);
    if half_det >= 0.0 {
        e2 = eigenvector_distinct(&m, evals[2]);
        e1 = eigenvector_in_complement(&m, e2, evals[1]);
        e0 = cross(e1, e2);
    } else {
        e0 = eigenvector_distinct(&m, evals[0]);
        e1 = eigenvector_in_complement(&m, e0, evals[1]);
        e2 = cross(e0, e1);
    }
    let vecs = DMatrix::from_column_slice(
        3,
        3,
        &[e0[0], e0[1], e0[2], e1[0], e1[1], e1[2], e2[0], e2[1], e2[2]],
    );
    // The trigonometric eigenvalues lose about half the digits when two of
    // them nearly coincide; a couple of Jacobi sweeps on the almost diagonal
    // VᵀAV restore full accuracy.
    let sym = DMatrix::from_fn(3, 3, |i, j| m[i][j]);
    let mut rotated = vecs.transpose() * &sym * &vecs;
    crate::linalg::symmetrize(&mut rotated);
    let (vals, vecs) = rotate_to_diagonal(rotated, vecs, 4);
    (vals * max0, vecs)
}

fn jacobi(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    for j in 0..n {
        for i in (j + 1)..n {
            m[(j, i)] = m[(i, j)];
        }
    }
    rotate_to_diagonal(m, DMatrix::identity(n, n), JACOBI_MAX_SWEEPS)
}

/// Cyclic Jacobi on a symmetric `m`, accumulating rotations into `v`.
fn rotate_to_diagonal(mut m: DMatrix<f64>, mut v: DMatrix<f64>, max_sweeps: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let scale = m.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
    if scale == 0.0 {
        return (DVector::zeros(n), v);
    }
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for j in 0..n {
            for i in (j + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= f64::EPSILON * scale * 1e-2 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        crate::linalg::symmetrize(&mut m);
        m
    }

    fn check(a: &DMatrix<f64>, tol: f64) {
        let (vals, vecs) = sym_eigen(a);
        let n = a.nrows();
        let recon = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((recon - a).abs().max() < tol, "reconstruction failed for {a}");
        let gram = vecs.transpose() * &vecs;
        assert!((gram - DMatrix::identity(n, n)).abs().max() < tol);
        for w in vals.as_slice().windows(2) {
            assert!(w[0] <= w[1] + tol);
        }
        // nalgebra as an independent reference for the spectrum
        let reference = a.clone().symmetric_eigen();
        let mut r: Vec<f64> = reference.eigenvalues.iter().copied().collect();
        r.sort_by(f64::total_cmp);
        for (x, y) in vals.iter().zip(r.iter()) {
            assert!((x - y).abs() < tol * (1.0 + y.abs()));
        }
    }

    #[test]
    fn random_matrices_all_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=8 {
            for _ in 0..200 {
                check(&random_sym(&mut rng, n), 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_spectra() {
        check(&DMatrix::identity(3, 3), 1e-12);
        check(&DMatrix::zeros(3, 3), 1e-12);
        check(&DMatrix::from_element(3, 3, 1.0), 1e-12);
        check(&DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 2.0, -1.0])), 1e-12);
        // rank one, the typical consistent moment matrix
        let v = DVector::from_column_slice(&[1.0, 0.3, -2.0]);
        check(&(&v * v.transpose()), 1e-12);
        let v5 = DVector::from_column_slice(&[1.0, 0.3, -2.0, 4.0, 0.0]);
        check(&(&v5 * v5.transpose()), 1e-11);
        check(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), 1e-14);
        check(&DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 3.0]), 1e-14);
    }
}
