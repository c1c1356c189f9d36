//! Small dense complex matrix helpers shared by every module.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| c(x, 0.0))
}

pub fn diag_complex(d: &[f64]) -> CMatrix {
    let n = d.len();
    let mut m = CMatrix::zeros(n, n);
    for (k, &x) in d.iter().enumerate() {
        m[(k, k)] = c(x, 0.0);
    }
    m
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Columns of the returned matrix are the eigenvectors.
pub fn hermitian_eigen_desc(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vecs)
}

/// Eigenvalues only, descending.
pub fn hermitian_eigenvalues_desc(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitize(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Frobenius norm of `U†U - 1`.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    frobenius(&(u.adjoint() * u - identity(u.nrows())))
}

pub fn determinant(u: &CMatrix) -> C64 {
    u.clone().determinant()
}

/// Nearest unitary in Frobenius norm, `U (U†U)^{-1/2}`.
pub fn polar_unitary(u: &CMatrix) -> CMatrix {
    let gram = u.adjoint() * u;
    let eig = SymmetricEigen::new(hermitize(&gram));
    let v = &eig.eigenvectors;
    let inv_sqrt = eig.eigenvalues.map(|x| c(1.0 / x.max(f64::MIN_POSITIVE).sqrt(), 0.0));
    let s = v * CMatrix::from_diagonal(&inv_sqrt) * v.adjoint();
    u * s
}
