//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Hermitian imaginary part `(M - M*) / 2i`.
pub fn im_part(m: &CMat) -> CMat {
    let adj = m.adjoint();
    (m - adj).map(|x| x * C64::new(0.0, -0.5))
}

/// Hermitian real part `(M + M*) / 2`.
pub fn re_part(m: &CMat) -> CMat {
    (m + m.adjoint()).map(|x| x * 0.5)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the Hermitian part is used.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = re_part(m);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Singular values, descending.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// 2-norm condition number of a real matrix; infinite when singular.
pub fn condition_number(m: &RMat) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn inverse(m: &CMat, what: &'static str) -> crate::Result<CMat> {
    m.clone().lu().try_inverse().ok_or(crate::LabError::Singular(what))
}

/// `log|det M|` via LU, finite for any invertible matrix.
pub fn log_abs_det(m: &CMat) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].norm().ln()).sum()
}

pub fn log_abs_det_real(m: &RMat) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].abs().ln()).sum()
}

/// The symplectic form `[[0, I], [-I, 0]]` of size `2l`.
pub fn symplectic_j(l: usize) -> CMat {
    let mut j = CMat::zeros(2 * l, 2 * l);
    for k in 0..l {
        j[(k, l + k)] = C64::new(1.0, 0.0);
        j[(l + k, k)] = C64::new(-1.0, 0.0);
    }
    j
}
