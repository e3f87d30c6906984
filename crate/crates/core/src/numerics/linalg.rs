use super::matrix::{dot, Matrix};
use super::svd::{complete_orthonormal, svd, SvdFactors};
use crate::error::{Error, Result};

/// Moore-Penrose pseudo-inverse, truncating singular values below the rank threshold.
pub fn pseudo_inverse(a: &Matrix) -> Result<Matrix> {
    let f = svd(a)?;
    Ok(pseudo_inverse_from(&f))
}

pub fn pseudo_inverse_from(f: &SvdFactors) -> Matrix {
    let r = f.rank();
    let u = &f.left_vectors;
    let v = &f.right_vectors;
    Matrix::from_fn(v.rows(), u.rows(), |i, j| {
        (0..r)
            .map(|l| v[(i, l)] * u[(j, l)] / f.singular_values[l])
            .sum()
    })
}

/// Orthogonal projector onto the column space of `f`, i.e. `F (F^T F)^+ F^T`.
pub fn orthogonal_projector(f: &Matrix) -> Result<Matrix> {
    let factors = svd(f)?;
    Ok(projector_from_basis(&factors.range_basis()))
}

/// `B B^T` for a matrix with orthonormal columns.
pub fn projector_from_basis(basis: &Matrix) -> Matrix {
    let k = basis.rows();
    let mut p = Matrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = dot(basis.row(i), basis.row(j));
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    p
}

/// Orthonormal basis (as columns) of the null space of `e`.
pub fn null_space_basis(e: &Matrix) -> Result<Matrix> {
    let n = e.cols();
    if e.rows() == 0 {
        return Ok(Matrix::identity(n));
    }
    // Row space of E = range of E^T.
    let f = svd(&e.transpose())?;
    let r = f.rank();
    let mut full = Matrix::zeros(n, n);
    for j in 0..r {
        full.set_column(j, &f.left_vectors.column(j));
    }
    let missing: Vec<usize> = (r..n).collect();
    complete_orthonormal(&mut full, &missing);
    Ok(full.select_columns(&missing))
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::invalid("cholesky needs a square matrix"));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::invalid(format!("matrix not positive definite at pivot {j}")));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the Cholesky factor `L`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for p in 0..i {
            s -= l[(i, p)] * y[p];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for p in (i + 1)..n {
            s -= l[(p, i)] * y[p];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solves a symmetric positive (semi)definite system, adding a growing
/// diagonal shift if the plain factorization breaks down.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if let Ok(l) = cholesky(a) {
        return Ok(cholesky_solve(&l, b));
    }
    let scale = (0..a.rows()).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 1e-14 * scale;
    for _ in 0..12 {
        let mut shifted = a.clone();
        for i in 0..a.rows() {
            shifted[(i, i)] += shift;
        }
        if let Ok(l) = cholesky(&shifted) {
            return Ok(cholesky_solve(&l, b));
        }
        shift *= 100.0;
    }
    Err(Error::invalid("linear system is not positive definite"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_deficient_diagonal() {
        let p = pseudo_inverse(&Matrix::diag(&[2.0, 0.0])).unwrap();
        assert!(p.sub(&Matrix::diag(&[0.5, 0.0])).max_abs() < 1e-15);
    }

    #[test]
    fn rank_one_projector() {
        let f = Matrix::column_vector(&[1.0, 1.0]);
        let p = orthogonal_projector(&f).unwrap();
        assert!(p.sub(&Matrix::from_fn(2, 2, |_, _| 0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn null_space_of_simplex_row() {
        let e = Matrix::from_fn(1, 4, |_, _| 1.0);
        let n = null_space_basis(&e).unwrap();
        assert_eq!(n.shape(), (4, 3));
        assert!(e.matmul(&n).max_abs() < 1e-14);
        let g = n.tr_matmul(&n);
        assert!(g.sub(&Matrix::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let x = solve_spd(&a, &[2.0, 1.0]).unwrap();
        let back = a.matvec(&x);
        assert!((back[0] - 2.0).abs() < 1e-14 && (back[1] - 1.0).abs() < 1e-14);
        assert!(cholesky(&Matrix::diag(&[1.0, -1.0])).is_err());
    }
}
