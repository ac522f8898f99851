use super::{Mat, Vector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step for the Jacobian.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 50, fd_step: 1e-6 }
    }
}

/// Central-difference Jacobian of `f` at `x` with absolute step `h`.
pub fn finite_diff_jacobian<F>(mut f: F, x: &Vector, h: f64) -> Mat
where
    F: FnMut(&Vector) -> Vector,
{
    let n = x.len();
    let f0 = f(x);
    let mut jac = Mat::zeros(f0.len(), n);
    let mut xp = x.clone();
    for j in 0..n {
        let orig = xp[j];
        xp[j] = orig + h;
        let fp = f(&xp);
        xp[j] = orig - h;
        let fm = f(&xp);
        xp[j] = orig;
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    jac
}

fn fd_jacobian_scaled<F>(f: &mut F, x: &Vector, rel: f64) -> Mat
where
    F: FnMut(&Vector) -> Vector,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.clone();
    for j in 0..n {
        let h = rel * x[j].abs().max(1.0);
        let orig = xp[j];
        xp[j] = orig + h;
        let fp = f(&xp);
        xp[j] = orig - h;
        let fm = f(&xp);
        xp[j] = orig;
        cols.push((fp - fm) / (2.0 * h));
    }
    Mat::from_columns(&cols)
}

/// Damped Newton iteration with a halving line search on `‖F‖∞`.
/// The Jacobian is taken from `jac` when given, otherwise by central
/// differences.
pub fn newton_solve<F>(
    mut f: F,
    jac: Option<&dyn Fn(&Vector) -> Mat>,
    x0: &Vector,
    opts: NewtonOptions,
) -> Result<Vector>
where
    F: FnMut(&Vector) -> Vector,
{
    let mut x = x0.clone();
    let mut fx = f(&x);
    let mut norm = fx.amax();
    for it in 0..opts.max_iter {
        if norm < opts.tol {
            return Ok(x);
        }
        let j = match jac {
            Some(jf) => jf(&x),
            None => fd_jacobian_scaled(&mut f, &x, opts.fd_step),
        };
        let dx = j.lu().solve(&(-&fx)).ok_or(Error::SingularJacobian(it))?;
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian(it));
        }
        let mut lambda = 1.0;
        loop {
            let xn = &x + &dx * lambda;
            let fxn = f(&xn);
            let nn = fxn.amax();
            if nn.is_finite() && (nn < norm || lambda < 1e-4) {
                x = xn;
                fx = fxn;
                norm = nn;
                break;
            }
            lambda *= 0.5;
        }
    }
    if norm < opts.tol {
        Ok(x)
    } else {
        Err(Error::NewtonNoConvergence { iters: opts.max_iter, residual: norm })
    }
}
