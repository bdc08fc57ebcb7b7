//! Small shared linear-algebra helpers: covariance symmetrization and
//! Cholesky factorization with an escalating jitter ladder.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Replace A by (A + A')/2, killing quadrature asymmetry before Cholesky.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Lower Cholesky factor of a covariance matrix, adding eps*I with eps
/// growing tenfold from 1e-14 trace/m up to 1e-8 trace/m before failing.
///
/// Returns the factor and the jitter actually used.
pub fn cholesky_with_jitter(mat: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = mat.nrows();
    let scale = mat.trace() / n as f64;
    if let Some(chol) = nalgebra::Cholesky::new(mat.clone()) {
        return Ok((chol.unpack(), 0.0));
    }
    let mut eps = 1e-14 * scale;
    let max_jitter = 1e-8 * scale;
    while eps <= max_jitter * (1.0 + 1e-12) {
        let jittered = mat + DMatrix::identity(n, n) * eps;
        if let Some(chol) = nalgebra::Cholesky::new(jittered) {
            return Ok((chol.unpack(), eps));
        }
        eps *= 10.0;
    }
    Err(Error::Conditioning { max_jitter })
}
