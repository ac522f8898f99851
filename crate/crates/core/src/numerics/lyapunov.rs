use super::{frobenius, Mat};
use crate::error::{Error, Result};

/// Solves `A X + X Aᵀ + Q = 0` for symmetric `X`.
///
/// Uses the Kronecker form `(I ⊗ A + A ⊗ I) vec(X) = -vec(Q)` and a dense LU
/// solve, which is fine for n ≤ 32.
pub fn solve_lyapunov(a: &Mat, q: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension(format!(
            "lyapunov: A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let nn = n * n;
    let mut k = Mat::zeros(nn, nn);
    // column-major vec: index (i, j) -> i + n j
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for p in 0..n {
                // (A X)_{ij} = sum_p A_ip X_pj
                k[(row, p + n * j)] += a[(i, p)];
                // (X Aᵀ)_{ij} = sum_p X_ip A_jp
                k[(row, i + n * p)] += a[(j, p)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(nn, q.iter().map(|v| -v));
    let lu = k.clone().lu();
    let u = lu.u();
    let umax = u.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let umin = u.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let ratio = if umax > 0.0 { umin / umax } else { 0.0 };
    if ratio < 1e3 * f64::EPSILON {
        return Err(Error::SpectrumCollision(ratio));
    }
    let mut v = lu.solve(&rhs).ok_or(Error::SpectrumCollision(ratio))?;
    // one step of iterative refinement
    let r = &rhs - &k * &v;
    if let Some(dv) = lu.solve(&r) {
        v += dv;
    }
    let x = Mat::from_column_slice(n, n, v.as_slice());
    let x = (&x + x.transpose()) * 0.5;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SpectrumCollision(ratio));
    }
    Ok(x)
}

/// Relative residual `‖AX + XAᵀ + Q‖_F / max(1, ‖Q‖_F)`.
pub fn lyapunov_residual(a: &Mat, x: &Mat, q: &Mat) -> f64 {
    frobenius(&(a * x + x * a.transpose() + q)) / frobenius(q).max(1.0)
}
