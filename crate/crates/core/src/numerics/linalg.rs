use nalgebra::{Schur, SymmetricEigen, SVD};
use num_complex::Complex64;

use super::Mat;
use crate::error::{Error, Result};

/// Eigenvalues of a square matrix together with the largest real part.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
}

impl Spectrum {
    fn from_values(mut eigenvalues: Vec<Complex64>) -> Self {
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let max_real_part = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        Spectrum { eigenvalues, max_real_part }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

pub fn frobenius(a: &Mat) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn spectral_norm(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SVD::new(a.clone(), false, false).singular_values.max()
}

/// Diagonal similarity scaling by powers of two so that row and column
/// norms are comparable. Returns the scaled matrix and the scale vector.
pub fn balance(a: &Mat) -> (Mat, Vec<f64>) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut b = a.clone();
    let mut scale = vec![1.0; n];
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += b[(j, i)].abs();
                    r += b[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                scale[i] *= f;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
    (b, scale)
}

pub fn eigenvalues(a: &Mat) -> Result<Spectrum> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("eigenvalues need a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Spectrum { eigenvalues: vec![], max_real_part: f64::NEG_INFINITY });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNoConvergence { n, norm: f64::NAN });
    }
    let (b, _) = balance(a);
    let schur =
        Schur::try_new(b, f64::EPSILON, 100 * n.max(10)).ok_or(Error::EigenNoConvergence { n, norm: frobenius(a) })?;
    let ev = schur.complex_eigenvalues();
    Ok(Spectrum::from_values(ev.iter().copied().collect()))
}

/// `true` iff every eigenvalue has real part below `-tol`.
pub fn is_hurwitz(a: &Mat, tol: f64) -> Result<bool> {
    Ok(eigenvalues(a)?.max_real_part < -tol)
}

/// Smallest eigenvalue of the symmetric part of `s`.
pub fn min_sym_eig(s: &Mat) -> Result<f64> {
    if s.nrows() != s.ncols() {
        return Err(Error::Dimension(format!("expected square matrix, got {}x{}", s.nrows(), s.ncols())));
    }
    if s.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    let sym = (s + s.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym).eigenvalues.min())
}

pub fn is_psd(s: &Mat, tol: f64) -> Result<bool> {
    Ok(min_sym_eig(s)? >= -tol)
}

/// Numerical rank with threshold `rel_tol · σ_max`.
pub fn numerical_rank(a: &Mat, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = SVD::new(a.clone(), false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_rotation() {
        let s = eigenvalues(&Mat::identity(3, 3)).unwrap();
        assert!(s.eigenvalues.iter().all(|z| (z - 1.0).norm() < 1e-14));
        let r = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let s = eigenvalues(&r).unwrap();
        assert!((s.eigenvalues[0] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((s.eigenvalues[1] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!(!is_hurwitz(&r, 1e-9).unwrap());
        assert!(is_hurwitz(&(-Mat::identity(5, 5)), 1e-9).unwrap());
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(eigenvalues(&Mat::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn psd_examples() {
        assert!(is_psd(&Mat::zeros(3, 3), 1e-9).unwrap());
        assert!(!is_psd(&Mat::from_diagonal(&nalgebra::dvector![1.0, -1e-3]), 1e-9).unwrap());
    }

    #[test]
    fn balancing_preserves_spectrum_of_badly_scaled_matrix() {
        let a = Mat::from_row_slice(3, 3, &[-1.0, 1e6, 0.0, -1e-6, -2.0, 1e5, 0.0, -1e-5, -3.0]);
        let (b, d) = balance(&a);
        for i in 0..3 {
            for j in 0..3 {
                let back = b[(i, j)] * d[i] / d[j];
                assert!((back - a[(i, j)]).abs() <= 1e-15 * a[(i, j)].abs());
            }
        }
        let s = eigenvalues(&a).unwrap();
        let tr: f64 = s.eigenvalues.iter().map(|z| z.re).sum();
        assert!((tr + 6.0).abs() < 1e-9);
    }

    #[test]
    fn rank() {
        let a = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(numerical_rank(&a, 1e-10), 1);
        assert_eq!(numerical_rank(&Mat::zeros(2, 2), 1e-10), 0);
    }
}
