//! Averaged pH systems `ẋ = D(θ) H x + B u` with
//! `D(θ) = J − R + Σ θ_j (J_j − R_j)`.

use crate::error::{Error, Result};
use crate::numerics::{min_sym_eig, newton_solve, Mat, NewtonOptions, Vector};
use crate::ph::{skew_defect, PhSystem, DISSIPATION_TOL, SKEW_TOL};
use nalgebra::SVD;

/// Condition number above which `D(θ̄)` is treated as singular.
pub const COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedPhSystem {
    j: Mat,
    r: Mat,
    jj: Vec<Mat>,
    rj: Vec<Mat>,
    b: Mat,
    h: Mat,
    bounds: Vec<(f64, f64)>,
    discs: Vec<(usize, usize, f64)>,
}

/// Steady state `(x̄, θ̄, ū)` with its residual `‖D(θ̄)Hx̄ + Bū‖∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x_bar: Vector,
    pub theta_bar: Vector,
    pub u_bar: Vector,
    pub residual: f64,
    /// Condition number of `D(θ̄)`.
    pub condition: f64,
}

/// A value fixed during [`AveragedPhSystem::steady_state_from_setpoints`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pin {
    State(usize, f64),
    Param(usize, f64),
}

impl AveragedPhSystem {
    pub fn new(j: Mat, r: Mat, jj: Vec<Mat>, rj: Vec<Mat>, b: Mat, h: Mat, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let n = j.nrows();
        let k = jj.len();
        let sq = |name: &str, m: &Mat| -> Result<()> {
            if m.shape() != (n, n) {
                return Err(Error::Dimension(format!("{name} is {:?}, expected ({n}, {n})", m.shape())));
            }
            Ok(())
        };
        sq("J", &j)?;
        sq("R", &r)?;
        sq("H", &h)?;
        for (i, (a, c)) in jj.iter().zip(&rj).enumerate() {
            sq(&format!("J_{}", i + 1), a)?;
            sq(&format!("R_{}", i + 1), c)?;
        }
        if rj.len() != k || bounds.len() != k {
            return Err(Error::Dimension(format!(
                "{k} parameter matrices but {} dissipation matrices and {} bounds",
                rj.len(),
                bounds.len()
            )));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        Ok(AveragedPhSystem { j, r, jj, rj, b, h, bounds, discs: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.j.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn k(&self) -> usize {
        self.jj.len()
    }
    pub fn h(&self) -> &Mat {
        &self.h
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn j0(&self) -> &Mat {
        &self.j
    }
    pub fn r0(&self) -> &Mat {
        &self.r
    }
    pub fn j_param(&self, i: usize) -> &Mat {
        &self.jj[i]
    }
    pub fn r_param(&self, i: usize) -> &Mat {
        &self.rj[i]
    }
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// `D_j = J_j − R_j`.
    pub fn d_j(&self, i: usize) -> Mat {
        &self.jj[i] - &self.rj[i]
    }

    fn check_theta(&self, theta: &Vector) -> Result<()> {
        if theta.len() != self.k() {
            return Err(Error::Dimension(format!("θ has length {}, expected {}", theta.len(), self.k())));
        }
        Ok(())
    }

    fn check_x(&self, x: &Vector) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!("x has length {}, expected {}", x.len(), self.n())));
        }
        Ok(())
    }

    pub fn j_at(&self, theta: &Vector) -> Mat {
        let mut out = self.j.clone();
        for (t, a) in theta.iter().zip(&self.jj) {
            out += a * *t;
        }
        out
    }

    pub fn r_at(&self, theta: &Vector) -> Mat {
        let mut out = self.r.clone();
        for (t, a) in theta.iter().zip(&self.rj) {
            out += a * *t;
        }
        out
    }

    /// `D(θ)`; no clamping to the bounds.
    pub fn d_matrix(&self, theta: &Vector) -> Result<Mat> {
        self.check_theta(theta)?;
        Ok(self.j_at(theta) - self.r_at(theta))
    }

    /// `𝒟(x) = [D_1 H x, …, D_k H x]`.
    pub fn d_cal(&self, x: &Vector) -> Result<Mat> {
        self.check_x(x)?;
        let e = &self.h * x;
        let cols: Vec<Vector> = (0..self.k()).map(|i| self.d_j(i) * &e).collect();
        if cols.is_empty() {
            return Ok(Mat::zeros(self.n(), 0));
        }
        Ok(Mat::from_columns(&cols))
    }

    pub fn rhs(&self, x: &Vector, theta: &Vector, u: &Vector) -> Result<Vector> {
        self.check_x(x)?;
        if u.len() != self.m() {
            return Err(Error::Dimension(format!("u has length {}, expected {}", u.len(), self.m())));
        }
        Ok(self.d_matrix(theta)? * (&self.h * x) + &self.b * u)
    }

    /// Same vector field written as `(J − R) H x + 𝒟(x) θ + B u`.
    pub fn rhs_bilinear(&self, x: &Vector, theta: &Vector, u: &Vector) -> Result<Vector> {
        self.check_theta(theta)?;
        Ok((&self.j - &self.r) * (&self.h * x) + self.d_cal(x)? * theta + &self.b * u)
    }

    /// Adds a disc limit `θ_a² + θ_b² ≤ radius²` applied by [`clamp`](Self::clamp)
    /// after the box. The structural checks still use the full box.
    pub fn with_disc_limit(mut self, a: usize, b: usize, radius: f64) -> Result<Self> {
        let k = self.k();
        if a >= k || b >= k || a == b {
            return Err(Error::Dimension(format!("disc limit on ({a}, {b}) with {k} parameters")));
        }
        if !(radius > 0.0) {
            return Err(Error::Parameter(format!("disc radius must be positive, got {radius}")));
        }
        self.discs.push((a, b, radius));
        Ok(self)
    }

    pub fn disc_limits(&self) -> &[(usize, usize, f64)] {
        &self.discs
    }

    /// Saturates θ at the parameter box, then scales any limited pair radially
    /// back onto its disc. Returns whether clamping was active.
    pub fn clamp(&self, theta: &mut [f64]) -> bool {
        let mut active = false;
        for (t, (lo, hi)) in theta.iter_mut().zip(&self.bounds) {
            if *t < *lo {
                *t = *lo;
                active = true;
            } else if *t > *hi {
                *t = *hi;
                active = true;
            }
        }
        for &(a, b, r) in &self.discs {
            let norm = theta[a].hypot(theta[b]);
            if norm > r {
                // one ulp inside so the result passes `in_bounds` after rounding
                let s = r / norm * (1.0 - f64::EPSILON);
                theta[a] *= s;
                theta[b] *= s;
                active = true;
            }
        }
        active
    }

    pub fn in_bounds(&self, theta: &Vector) -> bool {
        theta.iter().zip(&self.bounds).all(|(t, (lo, hi))| *t >= *lo && *t <= *hi)
            && self.discs.iter().all(|&(a, b, r)| theta[a].hypot(theta[b]) <= r)
    }

    /// Checks skewness of all `J`-matrices, symmetry and definiteness of `H`,
    /// and that `R(θ)` is PSD at every corner of the parameter box.
    pub fn check_structure(&self) -> Result<()> {
        for (name, m) in std::iter::once(("J", &self.j)).chain(self.jj.iter().map(|m| ("J_j", m))) {
            let d = skew_defect(m);
            if d > SKEW_TOL {
                return Err(Error::Validation(format!("{name} is not skew (defect {d:.3e})")));
            }
        }
        if min_sym_eig(&self.h)? <= 0.0 || (&self.h - self.h.transpose()).amax() > SKEW_TOL * self.h.amax() {
            return Err(Error::Validation("H is not symmetric positive definite".into()));
        }
        let k = self.k();
        for mask in 0..(1usize << k) {
            let theta = Vector::from_iterator(
                k,
                (0..k).map(|i| if mask >> i & 1 == 1 { self.bounds[i].1 } else { self.bounds[i].0 }),
            );
            let r = self.r_at(&theta);
            if (&r - r.transpose()).amax() > SKEW_TOL * r.amax().max(1.0) {
                return Err(Error::Validation(format!("R(θ) not symmetric at corner {theta:?}")));
            }
            let ev = min_sym_eig(&r)?;
            if ev < -DISSIPATION_TOL {
                return Err(Error::Validation(format!(
                    "R(θ) not PSD at corner θ = {:?} (eigenvalue {ev:.3e})",
                    theta.as_slice()
                )));
            }
        }
        Ok(())
    }

    /// The system with θ frozen, as a generic pH system.
    pub fn frozen(&self, theta: &Vector) -> Result<PhSystem> {
        self.check_theta(theta)?;
        PhSystem::new(self.j_at(theta), self.r_at(theta), self.b.clone(), self.h.clone())
    }

    pub fn residual(&self, x: &Vector, theta: &Vector, u: &Vector) -> Result<f64> {
        Ok(self.rhs(x, theta, u)?.amax())
    }

    /// `x̄ = −H⁻¹ D(θ̄)⁻¹ B ū`.
    pub fn steady_state_from_theta(&self, theta_bar: &Vector, u_bar: &Vector) -> Result<Equilibrium> {
        let d = self.d_matrix(theta_bar)?;
        let sv = SVD::new(d.clone(), false, false).singular_values;
        let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
        if cond > COND_LIMIT {
            return Err(Error::Singular(format!(
                "D(θ̄) has condition number {cond:.3e}; pin set-points with steady_state_from_setpoints instead"
            )));
        }
        let bu = &self.b * u_bar;
        let lu = d.lu();
        let e = lu.solve(&(-&bu)).ok_or_else(|| Error::Singular("D(θ̄) is singular".into()))?;
        let x_bar = self.h.clone().lu().solve(&e).ok_or_else(|| Error::Singular("H is singular".into()))?;
        let residual = self.residual(&x_bar, theta_bar, u_bar)?;
        Ok(Equilibrium { x_bar, theta_bar: theta_bar.clone(), u_bar: u_bar.clone(), residual, condition: cond })
    }

    /// Solves `0 = D(θ̄) H x̄ + B ū` for the free components of `(x̄, θ̄)`
    /// when exactly `k` of them are pinned. `theta_guess` seeds Newton.
    pub fn steady_state_from_setpoints(
        &self,
        pins: &[Pin],
        u_bar: &Vector,
        theta_guess: &Vector,
    ) -> Result<Equilibrium> {
        let (n, k) = (self.n(), self.k());
        if pins.len() != k {
            return Err(Error::Parameter(format!("{} pins given, the system needs exactly k = {k}", pins.len())));
        }
        let mut theta0 = theta_guess.clone();
        let mut fixed = vec![None; n + k];
        for p in pins {
            match *p {
                Pin::State(i, v) if i < n => fixed[i] = Some(v),
                Pin::Param(i, v) if i < k => {
                    fixed[n + i] = Some(v);
                    theta0[i] = v;
                }
                _ => return Err(Error::Parameter(format!("pin {p:?} is out of range"))),
            }
        }
        if fixed.iter().filter(|f| f.is_some()).count() != k {
            return Err(Error::Parameter("repeated pin".into()));
        }
        let free: Vec<usize> = (0..n + k).filter(|&i| fixed[i].is_none()).collect();
        let x0 = self.steady_state_from_theta(&theta0, u_bar).map(|e| e.x_bar).unwrap_or_else(|_| Vector::zeros(n));
        let full0: Vec<f64> = x0.iter().chain(theta0.iter()).copied().collect();
        // scale unknowns to O(1)
        let scale: Vec<f64> = free.iter().map(|&i| full0[i].abs().max(if i < n { 1e-12 } else { 1.0 })).collect();
        let assemble = |z: &Vector| {
            let mut full = vec![0.0; n + k];
            for i in 0..n + k {
                if let Some(v) = fixed[i] {
                    full[i] = v;
                }
            }
            for (c, &i) in free.iter().enumerate() {
                full[i] = z[c] * scale[c];
            }
            (Vector::from_column_slice(&full[..n]), Vector::from_column_slice(&full[n..]))
        };
        let bu = &self.b * u_bar;
        let fscale = 1.0 + bu.amax();
        let z0 = Vector::from_iterator(free.len(), free.iter().zip(&scale).map(|(&i, s)| full0[i] / s));
        let f = |z: &Vector| {
            let (x, th) = assemble(z);
            (self.j_at(&th) - self.r_at(&th)) * (&self.h * x) / fscale + &bu / fscale
        };
        let z = newton_solve(f, None, &z0, NewtonOptions { tol: 1e-12, max_iter: 100, fd_step: 1e-7 })?;
        let (x_bar, theta_bar) = assemble(&z);
        let d = self.d_matrix(&theta_bar)?;
        let sv = SVD::new(d, false, false).singular_values;
        let condition = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
        let residual = self.residual(&x_bar, &theta_bar, u_bar)?;
        Ok(Equilibrium { x_bar, theta_bar, u_bar: u_bar.clone(), residual, condition })
    }
}

impl Equilibrium {
    /// Residual bound `1e-9 · (1 + ‖Bū‖∞)`.
    pub fn tolerance(&self, sys: &AveragedPhSystem) -> f64 {
        1e-9 * (1.0 + (sys.b() * &self.u_bar).amax())
    }
}

/// Bregman shift `𝒮(x) = ℋ(x − x̄)` of a quadratic Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedHamiltonian {
    pub h: Mat,
    pub x_bar: Vector,
}

impl ShiftedHamiltonian {
    pub fn new(h: &Mat, x_bar: &Vector) -> Self {
        ShiftedHamiltonian { h: h.clone(), x_bar: x_bar.clone() }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let d = x - &self.x_bar;
        0.5 * d.dot(&(&self.h * &d))
    }

    /// `ℋ(x) − ℋ(x̄) − (x − x̄)ᵀ ∇ℋ(x̄)`.
    pub fn value_bregman(&self, x: &Vector) -> f64 {
        let hx = |v: &Vector| 0.5 * v.dot(&(&self.h * v));
        hx(x) - hx(&self.x_bar) - (x - &self.x_bar).dot(&(&self.h * &self.x_bar))
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        &self.h * (x - &self.x_bar)
    }
}

/// Duty ratio of a modulation index, `d = (m + 1) / 2`.
pub fn modulation_to_duty(m: f64) -> f64 {
    (m + 1.0) / 2.0
}

pub fn duty_to_modulation(d: f64) -> f64 {
    2.0 * d - 1.0
}
