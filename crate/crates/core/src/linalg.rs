//! Small dense complex linear algebra helpers.

use nalgebra::{DMatrix, Matrix2, SMatrix};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `e^{iθ}`
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Largest element-wise modulus of `a - b`.
pub fn max_abs_diff<const R: usize, const C: usize>(
    a: &SMatrix<C64, R, C>,
    b: &SMatrix<C64, R, C>,
) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn dmax_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `max |(A†A - I)_{ij}|`, i.e. how far the columns of `a` are from orthonormal.
pub fn isometry_defect<const R: usize, const C: usize>(a: &SMatrix<C64, R, C>) -> f64 {
    let g = a.adjoint() * a;
    let mut worst = 0.0f64;
    for i in 0..C {
        for j in 0..C {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn dunitary_defect(a: &DMatrix<C64>) -> f64 {
    let n = a.ncols();
    let g = a.adjoint() * a;
    dmax_abs_diff(&g, &DMatrix::identity(n, n))
}

/// Closest unitary to `m` in Frobenius norm (the unitary factor of the polar
/// decomposition), computed from the SVD `m = W Σ V†` as `W V†`.
pub fn polar_unitary(m: &Mat2) -> Mat2 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    u * v_t
}

/// Phase-insensitive distance `min_φ ‖u − e^{iφ} v‖_F` between two 2×2 unitaries.
pub fn phase_distance(u: &Mat2, v: &Mat2) -> f64 {
    let overlap = (v.adjoint() * u).trace().norm();
    (4.0 - 2.0 * overlap).max(0.0).sqrt()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let sym = (m + m.adjoint()) * r(0.5);
    sym.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn pauli(n: usize) -> Mat2 {
    match n {
        0 => Mat2::identity(),
        1 => Mat2::new(ZERO, ONE, ONE, ZERO),
        2 => Mat2::new(ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO),
        3 => Mat2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index {n} out of range"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_of_scaled_unitary_recovers_it() {
        let u = Mat2::new(r(0.6), c(0.0, 0.8), c(0.0, 0.8), r(0.6));
        let p = polar_unitary(&(u * r(0.97)));
        assert!(max_abs_diff(&p, &u) < 1e-12);
    }

    #[test]
    fn phase_distance_ignores_global_phase() {
        let x = pauli(1);
        assert!(phase_distance(&(x * cis(1.3)), &x) < 1e-7);
        assert!((phase_distance(&x, &Mat2::identity()) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn min_eigenvalue_of_projector() {
        let mut m = DMatrix::<C64>::zeros(3, 3);
        m[(0, 0)] = ONE;
        assert!(hermitian_min_eigenvalue(&m).abs() < 1e-14);
        m[(1, 1)] = r(-0.5);
        assert!((hermitian_min_eigenvalue(&m) + 0.5).abs() < 1e-14);
    }
}
