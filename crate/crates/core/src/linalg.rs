//! Dense helpers for the lifted formulation: Kronecker products, column-major
//! vectorization and the √2-scaled half-vectorization of symmetric matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra * rb, ca * cb);
    for j in 0..ca {
        for i in 0..ra {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            let mut block = out.view_mut((i * rb, j * cb), (rb, cb));
            block.zip_apply(b, |o, v| *o = s * v);
        }
    }
    out
}

/// Column-major stacking of `m`.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "unvec: {} entries cannot fill a {rows}x{cols} matrix",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v))
}

/// `(m + mᵀ) / 2`, in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Length of the svec of a `p × p` symmetric matrix.
pub const fn svec_len(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Side length `p` with `p(p+1)/2 == len`, if any.
pub fn svec_side(len: usize) -> Option<usize> {
    let p = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (svec_len(p) == len).then_some(p)
}

/// Half-vectorization with off-diagonals scaled by √2, so that
/// `⟨A, B⟩_F = svec(A)ᵀ svec(B)` for symmetric `A`, `B`.
///
/// Only the lower triangle is read; symmetrize first if needed.
/// Entries are ordered column by column over the lower triangle.
pub fn svec(s: &DMatrix<f64>) -> DVector<f64> {
    let p = s.nrows();
    let mut out = DVector::zeros(svec_len(p));
    svec_into(s, out.as_mut_slice());
    out
}

pub fn svec_into(s: &DMatrix<f64>, out: &mut [f64]) {
    let p = s.nrows();
    debug_assert_eq!(out.len(), svec_len(p));
    let mut k = 0;
    for j in 0..p {
        out[k] = s[(j, j)];
        k += 1;
        for i in (j + 1)..p {
            out[k] = std::f64::consts::SQRT_2 * s[(i, j)];
            k += 1;
        }
    }
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64]) -> Result<DMatrix<f64>> {
    let p = svec_side(v.len()).ok_or_else(|| {
        Error::Dimension(format!("smat: length {} is not a triangular number", v.len()))
    })?;
    let mut out = DMatrix::zeros(p, p);
    smat_into(v, &mut out);
    Ok(out)
}

pub fn smat_into(v: &[f64], out: &mut DMatrix<f64>) {
    let p = out.nrows();
    debug_assert_eq!(v.len(), svec_len(p));
    let mut k = 0;
    for j in 0..p {
        out[(j, j)] = v[k];
        k += 1;
        for i in (j + 1)..p {
            let x = v[k] / std::f64::consts::SQRT_2;
            out[(i, j)] = x;
            out[(j, i)] = x;
            k += 1;
        }
    }
}

/// Frobenius inner product.
pub fn frobenius_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Largest absolute entry.
pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    let (vals, _) = crate::eig::sym_eigen(&s);
    vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_identity_and_scalar() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(kron(&i2, &i2), DMatrix::identity(4, 4));
        let a = DMatrix::from_element(1, 1, 2.0);
        let b = DMatrix::from_element(1, 1, 3.0);
        assert_eq!(kron(&a, &b)[(0, 0)], 6.0);
    }

    #[test]
    fn kron_block_layout() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let i2 = DMatrix::<f64>::identity(2, 2);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 2.0, 0.0, //
                0.0, 1.0, 0.0, 2.0, //
                3.0, 0.0, 4.0, 0.0, //
                0.0, 3.0, 0.0, 4.0,
            ],
        );
        assert_eq!(kron(&a, &i2), expected);
    }

    #[test]
    fn vec_is_column_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(vec(&m).as_slice(), &[1.0, 2.0, 2.0, 4.0]);
        let r = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(vec(&r).as_slice(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(unvec(vec(&r).as_slice(), 2, 3).unwrap(), r);
        assert_eq!(vec(&DMatrix::from_element(1, 1, 7.0)).as_slice(), &[7.0]);
        assert!(unvec(&[1.0, 2.0, 3.0], 2, 2).is_err());
    }

    #[test]
    fn svec_scales_off_diagonals() {
        let (a, b, c) = (1.5, -0.25, 3.0);
        let s = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        let v = svec(&s);
        assert_eq!(v.as_slice(), &[a, std::f64::consts::SQRT_2 * b, c]);
        assert!((smat(v.as_slice()).unwrap() - s).abs().max() < 1e-15);
    }

    #[test]
    fn svec_inner_product_ones() {
        let a = DMatrix::from_element(2, 2, 1.0);
        assert_eq!(frobenius_dot(&a, &a), 4.0);
        let v = svec(&a);
        assert!((v.dot(&v) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn smat_rejects_non_triangular_lengths() {
        assert!(smat(&[1.0, 2.0]).is_err());
        assert!(smat(&[1.0, 2.0, 3.0, 4.0]).is_err());
        assert_eq!(svec_side(28), Some(7));
        assert_eq!(svec_side(0), Some(0));
    }
}
