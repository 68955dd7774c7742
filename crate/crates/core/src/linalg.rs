//! Dense helpers for the small matrices used throughout the crate.
//!
//! Storage is `nalgebra`'s dynamically sized matrices. The symmetric
//! eigensolver is a cyclic Jacobi iteration, which is deterministic and more
//! than fast enough for n ≲ 20.
//!
//! Operators on the space of real symmetric matrices are represented in the
//! orthonormal basis {E_ii} ∪ {(E_ij + E_ji)/√2, i < j}, so the Frobenius
//! inner product of matrices becomes the Euclidean one in coordinates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Strict positivity threshold for the real embedding of S = Σ + iΘ/2.
pub const ADMISSIBILITY_TOL: f64 = 1e-10;

/// Eigenvalues of Σ below this are treated as a positivity failure when
/// forming Σ^{±1/2}.
pub const SQRT_EIGEN_FLOOR: f64 = 1e-14;

const JACOBI_MAX_SWEEPS: usize = 100;

/// The 2×2 symplectic unit [[0, 1], [-1, 0]].
pub fn j2() -> Matrix {
    Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// J ⊗ I_ν = [[0, I], [-I, 0]] of order 2ν.
pub fn symplectic(nu: usize) -> Matrix {
    let n = 2 * nu;
    let mut m = Matrix::zeros(n, n);
    for k in 0..nu {
        m[(k, nu + k)] = 1.0;
        m[(nu + k, k)] = -1.0;
    }
    m
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn antisymmetrize(m: &Matrix) -> Matrix {
    (m - m.transpose()) * 0.5
}

/// Largest entrywise deviation from symmetry, max |m_jk - m_kj|.
pub fn asymmetry(m: &Matrix) -> f64 {
    (m - m.transpose()).amax()
}

/// Largest entrywise deviation from antisymmetry, max |m_jk + m_kj|.
pub fn antisymmetry_defect(m: &Matrix) -> f64 {
    (m + m.transpose()).amax()
}

/// Frobenius inner product ⟨A, B⟩ = Tr(AᵀB).
pub fn frobenius_inner(a: &Matrix, b: &Matrix) -> f64 {
    a.dot(b)
}

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vector,
    /// Column k is the unit eigenvector for `values[k]`.
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigendecomposition of a real symmetric matrix.
///
/// The input is symmetrized before iterating; callers are expected to have
/// checked symmetry already.
pub fn jacobi_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut a = symmetrize(a);
    let mut v = Matrix::identity(n, n);
    let scale = a.norm();
    let mut converged = scale == 0.0;

    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let off = off_diagonal_norm(&a);
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > 1e-12 * scale {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

pub fn min_eigenvalue(a: &Matrix) -> Result<f64> {
    let eig = jacobi_eigen(a)?;
    Ok(eig.values.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Applies `f` to the spectrum of a symmetric positive definite matrix.
fn spectral_map(a: &Matrix, what: &str, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let eig = jacobi_eigen(a)?;
    if let Some(&lo) = eig.values.iter().find(|&&l| l < SQRT_EIGEN_FLOOR) {
        return Err(Error::Admissibility(format!(
            "{what}: matrix is not positive definite (eigenvalue {lo:e})"
        )));
    }
    let d = Matrix::from_diagonal(&eig.values.map(f));
    Ok(symmetrize(&(&eig.vectors * d * eig.vectors.transpose())))
}

pub fn sym_sqrt(a: &Matrix) -> Result<Matrix> {
    spectral_map(a, "square root", f64::sqrt)
}

pub fn sym_inv_sqrt(a: &Matrix) -> Result<Matrix> {
    spectral_map(a, "inverse square root", |l| 1.0 / l.sqrt())
}

pub fn sym_inverse(a: &Matrix) -> Result<Matrix> {
    spectral_map(a, "inverse", |l| 1.0 / l)
}

/// [[Σ, -Θ/2], [Θ/2, Σ]], the real form of the Hermitian matrix Σ + iΘ/2.
pub fn real_embedding(sigma: &Matrix, theta: &Matrix) -> Matrix {
    let n = sigma.nrows();
    let mut m = Matrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(sigma);
    m.view_mut((n, n), (n, n)).copy_from(sigma);
    m.view_mut((0, n), (n, n)).copy_from(&(theta * -0.5));
    m.view_mut((n, 0), (n, n)).copy_from(&(theta * 0.5));
    m
}

/// Smallest eigenvalue of the real embedding of Σ + iΘ/2.
pub fn admissibility_margin(sigma: &Matrix, theta: &Matrix) -> Result<f64> {
    min_eigenvalue(&real_embedding(sigma, theta))
}

pub fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Coordinates of a symmetric matrix in the orthonormal basis.
pub fn sym_to_coords(m: &Matrix) -> Vector {
    let n = m.nrows();
    let mut v = Vector::zeros(sym_dim(n));
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            v[idx] = if i == j {
                m[(i, i)]
            } else {
                std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)])
            };
            idx += 1;
        }
    }
    v
}

pub fn sym_from_coords(v: &Vector, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                m[(i, i)] = v[idx];
            } else {
                let x = v[idx] * std::f64::consts::FRAC_1_SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            idx += 1;
        }
    }
    m
}

/// Matrix of a linear map S_n → S_n in the orthonormal symmetric basis.
pub fn sym_operator_matrix(n: usize, op: impl Fn(&Matrix) -> Matrix) -> Matrix {
    let d = sym_dim(n);
    let mut m = Matrix::zeros(d, d);
    for b in 0..d {
        let mut e = Vector::zeros(d);
        e[b] = 1.0;
        let image = op(&sym_from_coords(&e, n));
        m.set_column(b, &sym_to_coords(&image));
    }
    m
}

/// Solves a square system by partial-pivot LU; `None` when singular.
pub fn lu_solve(a: &Matrix, b: &Vector) -> Option<Vector> {
    a.clone().lu().solve(b)
}

/// Kronecker product.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_reconstructs_and_orders() {
        let a = Matrix::from_row_slice(3, 3, &[4.0, 1.0, -2.0, 1.0, 2.0, 0.5, -2.0, 0.5, 3.0]);
        let eig = jacobi_eigen(&a).unwrap();
        let rec = &eig.vectors * Matrix::from_diagonal(&eig.values) * eig.vectors.transpose();
        assert!((rec - &a).amax() < 1e-13);
        let ortho = eig.vectors.transpose() * &eig.vectors - Matrix::identity(3, 3);
        assert!(ortho.amax() < 1e-14);
        assert!(eig.values[0] <= eig.values[1] && eig.values[1] <= eig.values[2]);
    }

    #[test]
    fn jacobi_diagonal_and_zero() {
        let eig = jacobi_eigen(&Matrix::zeros(4, 4)).unwrap();
        assert!(eig.values.iter().all(|&x| x == 0.0));
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, -1.0, 2.0]));
        let eig = jacobi_eigen(&d).unwrap();
        assert_eq!(eig.values.as_slice(), &[-1.0, 2.0, 3.0]);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let r = sym_sqrt(&a).unwrap();
        assert!((&r * &r - &a).amax() < 1e-14);
        let ri = sym_inv_sqrt(&a).unwrap();
        assert!((&ri * &a * &ri - Matrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn sqrt_rejects_singular() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(sym_sqrt(&a), Err(Error::Admissibility(_))));
    }

    #[test]
    fn symmetric_coordinates_are_isometric() {
        let x = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, -1.0, 0.5, 3.0, 0.5, 4.0]);
        let y = Matrix::from_row_slice(3, 3, &[0.2, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0]);
        let cx = sym_to_coords(&x);
        let cy = sym_to_coords(&y);
        assert!((cx.dot(&cy) - frobenius_inner(&x, &y)).abs() < 1e-13);
        assert!((sym_from_coords(&cx, 3) - &x).amax() < 1e-15);
    }

    #[test]
    fn embedding_of_vacuum_like_state() {
        // Σ = I/2, Θ = J: S = I/2 + iJ/2 is singular (pure state)
        let sigma = Matrix::identity(2, 2) * 0.5;
        let m = admissibility_margin(&sigma, &j2()).unwrap();
        assert!(m.abs() < 1e-15);
        let m = admissibility_margin(&Matrix::identity(2, 2), &j2()).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
    }

    #[test]
    fn symplectic_matches_kron() {
        assert_eq!(symplectic(3), kron(&j2(), &Matrix::identity(3, 3)));
    }
}
