//! Dense linear-algebra diagnostics.

use nalgebra::DMatrix;
use num_complex::Complex64;
use qflock_core::linalg::CMatrix;

fn to_dense(m: &CMatrix) -> DMatrix<Complex64> {
    let n = m.dim();
    DMatrix::from_row_slice(n, n, m.as_slice())
}

/// Trace distance `1/2 ||a - b||_1` of two Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.dim(), b.dim(), "trace distance of matrices with different dimensions");
    let mut d = to_dense(a) - to_dense(b);
    // Symmetrize away rounding so the Hermitian solver sees an exact input.
    let adj = d.adjoint();
    d = (d + adj) * Complex64::new(0.5, 0.0);
    let eig = d.symmetric_eigenvalues();
    0.5 * eig.iter().map(|x| x.abs()).sum::<f64>()
}
