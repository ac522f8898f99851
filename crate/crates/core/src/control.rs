//! Controller constructions for averaged pH systems and their stability
//! certificates.
//!
//! With `s = H (x − x̄)` the plant obeys
//! `ẋ = D(θ) s + 𝒟(x̄)(θ − θ̄) + B(u − ū)`, which equals `D(θ) H x + B u`.
//! The variants differ in how θ is produced:
//!
//! | variant      | law                                              | state   |
//! |--------------|--------------------------------------------------|---------|
//! | `FixedTheta` | `θ = θ̄`                                          | `x`     |
//! | `PhP`        | `θ̇ = −𝒟ᵀ s − K_θ (θ − θ̄)`                        | `(x,θ)` |
//! | `PhDae`      | `θ = θ̄ − δ K_θ⁻¹ 𝒟ᵀ s`                           | `x`     |
//! | `PhPi`       | `θ = θ̄ + K_θ⁻¹(−δ 𝒟ᵀ s + ξ)`, `ξ̇ = −K_θ⁻¹ 𝒟ᵀ s` | `(x,ξ)` |
//! | `Bass`       | `θ = θ̄ − 𝒟ᵀ K̂⁻¹ (x − x̄)`                         | `x`     |

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::averaged::{AveragedPhSystem, Equilibrium};
use crate::error::{Error, Result};
use crate::numerics::{eigenvalues, min_sym_eig, numerical_rank, solve_lyapunov, spectral_norm, Mat, Spectrum, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    FixedTheta,
    PhP,
    PhDae,
    PhPi,
    Bass,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::FixedTheta => "fixed_theta",
            Variant::PhP => "ph_p",
            Variant::PhDae => "ph_dae",
            Variant::PhPi => "ph_pi",
            Variant::Bass => "bass",
        }
    }
}

/// How δ enters the algebraic θ-row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaPower {
    /// `θ − θ̄ = −δ K_θ⁻¹ 𝒟ᵀ s`.
    #[default]
    Single,
    /// `θ − θ̄ = −δ² K_θ⁻¹ 𝒟ᵀ s` (substituting `K_H = −δ𝒟ᵀ` into
    /// `θ − θ̄ = δ K_θ⁻¹ K_H s`).
    Squared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub k_theta: Mat,
    pub delta: f64,
    pub delta_power: DeltaPower,
    /// Set when `K_θ = γ I`.
    pub gamma: Option<f64>,
}

impl GainSet {
    /// `K_θ = γ I_k`.
    pub fn scalar(k: usize, gamma: f64, delta: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
        }
        let mut g = Self::new(Mat::identity(k, k) * gamma, delta)?;
        g.gamma = Some(gamma);
        Ok(g)
    }

    pub fn new(k_theta: Mat, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
        }
        if k_theta.nrows() != k_theta.ncols() {
            return Err(Error::Dimension("K_theta must be square".into()));
        }
        if (&k_theta - k_theta.transpose()).amax() > 1e-12 * k_theta.amax() {
            return Err(Error::Parameter("K_theta must be symmetric".into()));
        }
        if k_theta.nrows() > 0 && min_sym_eig(&k_theta)? <= 0.0 {
            return Err(Error::Parameter("K_theta must be positive definite".into()));
        }
        Ok(GainSet { k_theta, delta, delta_power: DeltaPower::Single, gamma: None })
    }

    pub fn with_delta_power(mut self, p: DeltaPower) -> Self {
        self.delta_power = p;
        self
    }

    pub fn delta_eff(&self) -> f64 {
        match self.delta_power {
            DeltaPower::Single => self.delta,
            DeltaPower::Squared => self.delta * self.delta,
        }
    }
}

/// Packing of the closed-loop state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n: usize,
    /// Number of controller states appended after `x` (θ for `PhP`, ξ for `PhPi`).
    pub extra: usize,
}

impl StateLayout {
    pub fn len(&self) -> usize {
        self.n + self.extra
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A controller bound to an averaged system and its equilibrium.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    variant: Variant,
    sys: AveragedPhSystem,
    eq: Equilibrium,
    gains: Option<GainSet>,
    dcal: Mat,
    k_inv: Mat,
    bass_k: Option<Mat>,
    /// Static feedback gain `θ − θ̄ = −L (x − x̄)` for `Bass`.
    bass_gain: Option<Mat>,
    layout: StateLayout,
    jacobian: Mat,
    spectrum: Spectrum,
    clamp: bool,
    // cached (J − R) H and D_j H
    d0h: Mat,
    djh: Vec<Mat>,
}

fn check_eq(sys: &AveragedPhSystem, eq: &Equilibrium) -> Result<()> {
    if eq.x_bar.len() != sys.n() || eq.theta_bar.len() != sys.k() || eq.u_bar.len() != sys.m() {
        return Err(Error::Dimension("equilibrium does not match the system".into()));
    }
    let res = sys.residual(&eq.x_bar, &eq.theta_bar, &eq.u_bar)?;
    if res > eq.tolerance(sys) {
        return Err(Error::Certificate(format!("equilibrium residual {res:.3e} too large")));
    }
    Ok(())
}

fn check_gains(sys: &AveragedPhSystem, g: &GainSet) -> Result<()> {
    if g.k_theta.nrows() != sys.k() {
        return Err(Error::Dimension(format!(
            "K_theta is {}x{}, expected k = {}",
            g.k_theta.nrows(),
            g.k_theta.ncols(),
            sys.k()
        )));
    }
    Ok(())
}

impl ClosedLoop {
    fn assemble(
        variant: Variant,
        sys: &AveragedPhSystem,
        eq: &Equilibrium,
        gains: Option<GainSet>,
        bass_k: Option<Mat>,
    ) -> Result<Self> {
        check_eq(sys, eq)?;
        if let Some(g) = &gains {
            check_gains(sys, g)?;
        }
        let (n, k) = (sys.n(), sys.k());
        let dcal = sys.d_cal(&eq.x_bar)?;
        let k_inv = match &gains {
            Some(g) => g.k_theta.clone().try_inverse().ok_or_else(|| Error::Singular("K_theta".into()))?,
            None => Mat::identity(k, k),
        };
        let bass_gain = match &bass_k {
            Some(kh) => {
                let inv = kh.clone().try_inverse().ok_or_else(|| Error::Singular("Bass K̂".into()))?;
                Some(dcal.transpose() * inv)
            }
            None => None,
        };
        let extra = match variant {
            Variant::PhP | Variant::PhPi => k,
            _ => 0,
        };
        let d0h = (sys.j0() - sys.r0()) * sys.h();
        let djh = (0..k).map(|j| sys.d_j(j) * sys.h()).collect();
        let mut cl = ClosedLoop {
            variant,
            sys: sys.clone(),
            eq: eq.clone(),
            gains,
            dcal,
            k_inv,
            bass_k,
            bass_gain,
            layout: StateLayout { n, extra },
            jacobian: Mat::zeros(0, 0),
            spectrum: Spectrum { eigenvalues: vec![], max_real_part: f64::NEG_INFINITY },
            clamp: false,
            d0h,
            djh,
        };
        cl.jacobian = cl.analytic_jacobian()?;
        cl.spectrum = cl.certified_spectrum()?;
        let z = cl.equilibrium_state();
        let r = cl.rhs(&z, &eq.u_bar)?.amax();
        if r > eq.tolerance(sys) {
            return Err(Error::Certificate(format!("closed-loop right-hand side at the equilibrium is {r:.3e}")));
        }
        if cl.spectrum.max_real_part >= 0.0 {
            return Err(Error::Certificate(format!(
                "{} closed loop is not Hurwitz: max real part {:.6e}",
                variant.name(),
                cl.spectrum.max_real_part
            )));
        }
        Ok(cl)
    }

    /// `θ = θ̄`. Requires `D(θ̄) H` Hurwitz.
    pub fn fixed_theta(sys: &AveragedPhSystem, eq: &Equilibrium) -> Result<Self> {
        Self::assemble(Variant::FixedTheta, sys, eq, None, None)
    }

    pub fn ph_p(sys: &AveragedPhSystem, eq: &Equilibrium, gains: GainSet) -> Result<Self> {
        Self::assemble(Variant::PhP, sys, eq, Some(gains), None)
    }

    pub fn ph_dae(sys: &AveragedPhSystem, eq: &Equilibrium, gains: GainSet) -> Result<Self> {
        Self::assemble(Variant::PhDae, sys, eq, Some(gains), None)
    }

    pub fn ph_pi(sys: &AveragedPhSystem, eq: &Equilibrium, gains: GainSet) -> Result<Self> {
        Self::assemble(Variant::PhPi, sys, eq, Some(gains), None)
    }

    /// Static Bass feedback designed on `A = D(θ̄) H`.
    pub fn bass(sys: &AveragedPhSystem, eq: &Equilibrium, alpha: Option<f64>) -> Result<Self> {
        check_eq(sys, eq)?;
        let a = sys.d_matrix(&eq.theta_bar)? * sys.h();
        let design = bass_design(&a, &sys.d_cal(&eq.x_bar)?, alpha)?;
        Self::assemble(Variant::Bass, sys, eq, None, Some(design.k_hat))
    }

    pub fn build(variant: Variant, sys: &AveragedPhSystem, eq: &Equilibrium, gains: GainSet) -> Result<Self> {
        match variant {
            Variant::FixedTheta => Self::fixed_theta(sys, eq),
            Variant::PhP => Self::ph_p(sys, eq, gains),
            Variant::PhDae => Self::ph_dae(sys, eq, gains),
            Variant::PhPi => Self::ph_pi(sys, eq, gains),
            Variant::Bass => Self::bass(sys, eq, None),
        }
    }

    /// Saturate θ at the parameter box inside [`rhs`](Self::rhs).
    pub fn with_clamping(mut self, on: bool) -> Self {
        self.clamp = on;
        self
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }
    pub fn system(&self) -> &AveragedPhSystem {
        &self.sys
    }
    pub fn equilibrium(&self) -> &Equilibrium {
        &self.eq
    }
    pub fn gains(&self) -> Option<&GainSet> {
        self.gains.as_ref()
    }
    pub fn layout(&self) -> StateLayout {
        self.layout
    }
    /// `𝒟(x̄)`.
    pub fn d_cal_bar(&self) -> &Mat {
        &self.dcal
    }
    pub fn bass_k(&self) -> Option<&Mat> {
        self.bass_k.as_ref()
    }
    pub fn jacobian(&self) -> &Mat {
        &self.jacobian
    }
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    fn delta_eff(&self) -> f64 {
        self.gains.as_ref().map_or(0.0, |g| g.delta_eff())
    }

    /// Extended state at the equilibrium (`ξ̄ = 0`).
    pub fn equilibrium_state(&self) -> Vector {
        self.extend(&self.eq.x_bar)
    }

    /// Extends a plant state with the controller state at rest.
    pub fn extend(&self, x: &Vector) -> Vector {
        let mut z = Vector::zeros(self.layout.len());
        z.rows_mut(0, self.layout.n).copy_from(x);
        if self.variant == Variant::PhP {
            z.rows_mut(self.layout.n, self.sys.k()).copy_from(&self.eq.theta_bar);
        }
        z
    }

    pub fn plant_state(&self, z: &Vector) -> Vector {
        z.rows(0, self.layout.n).into_owned()
    }

    /// Controller output θ before any clamping.
    pub fn theta(&self, z: &Vector) -> Vector {
        let n = self.layout.n;
        let k = self.sys.k();
        let x = z.rows(0, n);
        let s = self.sys.h() * (x - &self.eq.x_bar);
        match self.variant {
            Variant::FixedTheta => self.eq.theta_bar.clone(),
            Variant::PhP => z.rows(n, k).into_owned(),
            Variant::PhDae => &self.eq.theta_bar - &self.k_inv * (self.dcal.transpose() * s) * self.delta_eff(),
            Variant::PhPi => {
                let xi = z.rows(n, k);
                &self.eq.theta_bar + &self.k_inv * (self.dcal.transpose() * s * (-self.delta_eff()) + xi)
            }
            Variant::Bass => {
                let l = self.bass_gain.as_ref().expect("bass gain");
                &self.eq.theta_bar - l * (x - &self.eq.x_bar)
            }
        }
    }

    /// θ as applied to the plant (clamped when enabled).
    pub fn applied_theta(&self, z: &Vector) -> (Vector, bool) {
        let mut th = self.theta(z);
        let active = self.clamp && self.sys.clamp(th.as_mut_slice());
        (th, active)
    }

    /// Extended right-hand side for plant input `u`.
    pub fn rhs(&self, z: &Vector, u: &Vector) -> Result<Vector> {
        if z.len() != self.layout.len() || u.len() != self.sys.m() {
            return Err(Error::Dimension(format!(
                "closed-loop state/input lengths {}/{}, expected {}/{}",
                z.len(),
                u.len(),
                self.layout.len(),
                self.sys.m()
            )));
        }
        let mut out = Vector::zeros(z.len());
        self.rhs_into(z.as_slice(), u, out.as_mut_slice());
        Ok(out)
    }

    /// Allocation-light right-hand side used by the integrators.
    pub fn rhs_into(&self, z: &[f64], u: &Vector, out: &mut [f64]) {
        let n = self.layout.n;
        let k = self.sys.k();
        let zv = Vector::from_column_slice(z);
        let x = zv.rows(0, n);
        let (th, _) = self.applied_theta(&zv);
        let mut dx = &self.d0h * x + self.sys.b() * u;
        for j in 0..k {
            dx += &self.djh[j] * x * th[j];
        }
        out[..n].copy_from_slice(dx.as_slice());
        let s = || self.sys.h() * (x - &self.eq.x_bar);
        match self.variant {
            Variant::PhP => {
                let thr = zv.rows(n, k);
                let dth = -(self.dcal.transpose() * s())
                    - self.gains.as_ref().unwrap().k_theta.clone() * (thr - &self.eq.theta_bar);
                out[n..].copy_from_slice(dth.as_slice());
            }
            Variant::PhPi => {
                let dxi = -(&self.k_inv * (self.dcal.transpose() * s()));
                out[n..].copy_from_slice(dxi.as_slice());
            }
            _ => {}
        }
    }

    /// Lyapunov function of the closed loop:
    /// `𝒮` (fixed θ, DAE), `𝒮 + ½|θ − θ̄|²` (P), `𝒮 + ½|ξ|²` (PI),
    /// `½ (x − x̄)ᵀ K̂⁻¹ (x − x̄)` (Bass).
    pub fn storage(&self, z: &Vector) -> f64 {
        let n = self.layout.n;
        let dx = z.rows(0, n) - &self.eq.x_bar;
        let s = 0.5 * dx.dot(&(self.sys.h() * &dx));
        match self.variant {
            Variant::FixedTheta | Variant::PhDae => s,
            Variant::PhP => {
                let d = z.rows(n, self.sys.k()) - &self.eq.theta_bar;
                s + 0.5 * d.norm_squared()
            }
            Variant::PhPi => s + 0.5 * z.rows(n, self.sys.k()).norm_squared(),
            Variant::Bass => {
                let inv = self.bass_k.as_ref().unwrap().clone().try_inverse().unwrap();
                0.5 * dx.dot(&(inv * &dx))
            }
        }
    }

    fn analytic_jacobian(&self) -> Result<Mat> {
        let n = self.layout.n;
        let k = self.sys.k();
        let h = self.sys.h();
        let a = self.sys.d_matrix(&self.eq.theta_bar)? * h;
        let dt = &self.dcal;
        Ok(match self.variant {
            Variant::FixedTheta => a,
            Variant::PhP => {
                let mut m = Mat::zeros(n + k, n + k);
                m.view_mut((0, 0), (n, n)).copy_from(&a);
                m.view_mut((0, n), (n, k)).copy_from(dt);
                m.view_mut((n, 0), (k, n)).copy_from(&(-(dt.transpose() * h)));
                m.view_mut((n, n), (k, k)).copy_from(&(-self.gains.as_ref().unwrap().k_theta.clone()));
                m
            }
            Variant::PhDae => a - dt * &self.k_inv * dt.transpose() * h * self.delta_eff(),
            Variant::PhPi => {
                let mut m = Mat::zeros(n + k, n + k);
                let ad = a - dt * &self.k_inv * dt.transpose() * h * self.delta_eff();
                m.view_mut((0, 0), (n, n)).copy_from(&ad);
                m.view_mut((0, n), (n, k)).copy_from(&(dt * &self.k_inv));
                m.view_mut((n, 0), (k, n)).copy_from(&(-(&self.k_inv * dt.transpose() * h)));
                m
            }
            Variant::Bass => a - dt * self.bass_gain.as_ref().unwrap(),
        })
    }

    /// Central-difference Jacobian of [`rhs`](Self::rhs) at the equilibrium.
    pub fn numeric_jacobian(&self) -> Mat {
        let u = self.eq.u_bar.clone();
        let z0 = self.equilibrium_state();
        let n = z0.len();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let h = 1e-6 * z0[j].abs().max(1e-2 * z0.amax()).max(1e-12);
            let mut e = Vector::zeros(n);
            e[j] = 1.0;
            let f = |t: f64| self.rhs(&(&z0 + &e * t), &u).unwrap();
            cols.push((f(h) - f(-h)) / (2.0 * h));
        }
        Mat::from_columns(&cols)
    }

    fn certified_spectrum(&self) -> Result<Spectrum> {
        let mut spec = eigenvalues(&self.jacobian)?;
        if self.variant == Variant::PhPi {
            refine_slow_modes(&mut spec, &self.jacobian, self.layout.n);
        }
        Ok(spec)
    }

    /// `(Ĵ(x), R̂(x))` with `F(x) = Ĵ − R̂` the eliminated DAE coefficient
    /// (also used for PI with θ from `(x, ξ)`).
    pub fn eliminated_decomposition(&self, z: &Vector) -> (Mat, Mat) {
        let th = self.theta(z);
        let extra = &self.dcal * &self.k_inv * self.dcal.transpose() * self.delta_eff();
        (self.sys.j_at(&th), self.sys.r_at(&th) + extra)
    }

    /// Symmetric dissipation matrix of the closed loop at `z`.
    pub fn dissipation_matrix(&self, z: &Vector) -> Mat {
        let k = self.sys.k();
        let n = self.layout.n;
        match self.variant {
            Variant::PhP => {
                let th = self.theta(z);
                let mut m = Mat::zeros(n + k, n + k);
                m.view_mut((0, 0), (n, n)).copy_from(&self.sys.r_at(&th));
                let kt = &self.gains.as_ref().unwrap().k_theta;
                m.view_mut((n, n), (k, k)).copy_from(&((kt + kt.transpose()) * 0.5));
                m
            }
            Variant::PhDae | Variant::PhPi => self.eliminated_decomposition(z).1,
            _ => self.sys.r_at(&self.theta(z)),
        }
    }
}

/// Replaces the `k` smallest-magnitude eigenvalues of the PI Jacobian
/// `[[A, G], [−W, 0]]` by roots of `λ ∈ eig(W (A − λI)⁻¹ G)`.
/// These sit many decades below `‖A‖` for large gains.
fn refine_slow_modes(spec: &mut Spectrum, m: &Mat, n: usize) {
    let k = m.nrows() - n;
    if k == 0 {
        return;
    }
    let a = m.view((0, 0), (n, n)).into_owned();
    let g = m.view((0, n), (n, k)).into_owned();
    let w = -m.view((n, 0), (k, n)).into_owned();
    let fast_min = match eigenvalues(&a) {
        Ok(s) => s.eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min),
        Err(_) => return,
    };
    let mut idx: Vec<usize> = (0..spec.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| spec.eigenvalues[i].norm().total_cmp(&spec.eigenvalues[j].norm()));
    let slow: Vec<usize> = idx.into_iter().take(k).collect();
    if slow.iter().any(|&i| spec.eigenvalues[i].norm() > 1e-3 * fast_min) {
        return;
    }
    let ac = a.map(|v| Complex64::new(v, 0.0));
    let gc = g.map(|v| Complex64::new(v, 0.0));
    let wc = w.map(|v| Complex64::new(v, 0.0));
    for &i in &slow {
        let mut lam = spec.eigenvalues[i];
        for _ in 0..20 {
            let shifted = &ac - DMatrix::<Complex64>::identity(n, n) * lam;
            let Some(sol) = shifted.lu().solve(&gc) else { return };
            let t = &wc * sol;
            let Some(ev) = nalgebra::Schur::try_new(t, 1e-15, 1000).map(|s| s.eigenvalues()) else { return };
            let Some(ev) = ev else { return };
            let next = ev.iter().copied().min_by(|p, q| (p - lam).norm().total_cmp(&(q - lam).norm())).unwrap();
            let done = (next - lam).norm() <= 1e-14 * next.norm().max(1e-300);
            lam = next;
            if done {
                break;
            }
        }
        if lam.re.is_finite() {
            spec.eigenvalues[i] = lam;
        }
    }
    spec.max_real_part = spec.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
}

/// Result of [`extended_dissipation_check`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DissipationReport {
    pub min_eigenvalue: f64,
    /// `(sample index, smallest eigenvalue)` of each violating sample.
    pub violations: Vec<(usize, f64)>,
}

impl DissipationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the closed-loop dissipation matrix is PSD at each sample of
/// the extended state; violations are reported, not fatal.
pub fn extended_dissipation_check(cl: &ClosedLoop, samples: &[Vector]) -> Result<DissipationReport> {
    let mut rep = DissipationReport { min_eigenvalue: f64::INFINITY, violations: vec![] };
    for (i, z) in samples.iter().enumerate() {
        if z.len() != cl.layout().len() {
            return Err(Error::Dimension(format!("sample {i} has length {}", z.len())));
        }
        let m = cl.dissipation_matrix(z);
        let ev = min_sym_eig(&m)?;
        let tol = 1e-9 * m.amax().max(1.0);
        rep.min_eigenvalue = rep.min_eigenvalue.min(ev);
        if ev < -tol {
            rep.violations.push((i, ev));
        }
    }
    Ok(rep)
}

/// `rk[R, 𝒟] = n` with SVD threshold `1e-10 σ_max`.
pub fn rank_condition(r: &Mat, dcal: &Mat) -> Result<bool> {
    let n = r.nrows();
    if r.ncols() != n || dcal.nrows() != n {
        return Err(Error::Dimension("rank_condition: R must be n×n and 𝒟 n×k".into()));
    }
    let mut m = Mat::zeros(n, n + dcal.ncols());
    m.view_mut((0, 0), (n, n)).copy_from(r);
    m.view_mut((0, n), (n, dcal.ncols())).copy_from(dcal);
    Ok(numerical_rank(&m, 1e-10) == n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BassDesign {
    pub k_hat: Mat,
    pub alpha: f64,
    /// `‖(αI+A)K̂ + K̂(αI+A)ᵀ − 2𝒟𝒟ᵀ‖_F / max(1, ‖2𝒟𝒟ᵀ‖_F)`.
    pub residual: f64,
    /// Spectrum of `A − 𝒟𝒟ᵀK̂⁻¹`.
    pub closed_loop: Spectrum,
}

/// Solves `(αI + A) K̂ + K̂ (αI + A)ᵀ = 2 𝒟 𝒟ᵀ`; `α` defaults to `1.1 σ_max(A)`.
pub fn bass_design(a: &Mat, dcal: &Mat, alpha: Option<f64>) -> Result<BassDesign> {
    let n = a.nrows();
    if a.ncols() != n || dcal.nrows() != n {
        return Err(Error::Dimension("bass_design: A must be n×n and 𝒟 n×k".into()));
    }
    let smax = spectral_norm(a);
    let alpha = alpha.unwrap_or(1.1 * smax.max(f64::MIN_POSITIVE));
    if !(alpha > smax) {
        return Err(Error::Parameter(format!("alpha = {alpha} must exceed σ_max(A) = {smax}")));
    }
    // stabilizability on the closed right half-plane eigenvalues of A
    let spec = eigenvalues(a)?;
    let scale = a.amax().max(1.0);
    for lam in &spec.eigenvalues {
        if lam.re >= -1e-9 * scale {
            let mut m = DMatrix::<Complex64>::zeros(n, n + dcal.ncols());
            for i in 0..n {
                for j in 0..n {
                    let v = if i == j { *lam - a[(i, j)] } else { Complex64::new(-a[(i, j)], 0.0) };
                    m[(i, j)] = v;
                }
                for j in 0..dcal.ncols() {
                    m[(i, n + j)] = Complex64::new(dcal[(i, j)], 0.0);
                }
            }
            let sv = m.svd(false, false).singular_values;
            let smx = sv.max();
            let rank = sv.iter().filter(|&&s| s > 1e-10 * smx).count();
            if rank < n {
                return Err(Error::Stabilizability { omega: lam.im, rank, n });
            }
        }
    }
    let shifted = a + Mat::identity(n, n) * alpha;
    let q = dcal * dcal.transpose() * 2.0;
    let k_hat = solve_lyapunov(&(-&shifted), &q)?;
    let residual = crate::numerics::frobenius(&(&shifted * &k_hat + &k_hat * shifted.transpose() - &q))
        / crate::numerics::frobenius(&q).max(1.0);
    let ev = SymmetricEigen::new(k_hat.clone()).eigenvalues;
    if !(ev.min() > 1e-12 * ev.max().max(f64::MIN_POSITIVE)) {
        return Err(Error::Certificate(format!(
            "Bass solution is not positive definite (eigenvalues in [{:.3e}, {:.3e}]); (A, 𝒟) is likely not controllable",
            ev.min(),
            ev.max()
        )));
    }
    let inv = k_hat.clone().try_inverse().ok_or_else(|| Error::Singular("Bass K̂".into()))?;
    let closed_loop = eigenvalues(&(a - dcal * dcal.transpose() * inv))?;
    if closed_loop.max_real_part >= 0.0 {
        return Err(Error::Certificate(format!(
            "A − 𝒟𝒟ᵀK̂⁻¹ is not Hurwitz (max real part {:.6e})",
            closed_loop.max_real_part
        )));
    }
    Ok(BassDesign { k_hat, alpha, residual, closed_loop })
}

/// Structural template of a cascaded extension
///
/// ```text
/// 0   = K_H s − K_d (θ − θ̄) + K_ξ1 ξ₁ + K_ξ2 ξ₂
/// ξ̇₁ = K_ξ3 s
/// ξ̇₂ = K_ξ4 s + K_ξ5 ξ₁
/// ```
///
/// with user-supplied blocks. No stability certificate is attached.
#[derive(Debug, Clone)]
pub struct CascadeTemplate {
    pub sys: AveragedPhSystem,
    pub eq: Equilibrium,
    pub k_h: Mat,
    pub k_d: Mat,
    /// `K_ξ1 … K_ξ5`.
    pub k_xi: [Mat; 5],
}

impl CascadeTemplate {
    /// Sizes of `ξ₁` and `ξ₂`.
    pub fn xi_dims(&self) -> (usize, usize) {
        (self.k_xi[0].ncols(), self.k_xi[1].ncols())
    }

    pub fn theta(&self, z: &Vector) -> Result<Vector> {
        let n = self.sys.n();
        let (p1, p2) = self.xi_dims();
        let s = self.sys.h() * (z.rows(0, n) - &self.eq.x_bar);
        let rhs = &self.k_h * s + &self.k_xi[0] * z.rows(n, p1) + &self.k_xi[1] * z.rows(n + p1, p2);
        let d = self.k_d.clone().lu().solve(&rhs).ok_or_else(|| Error::Singular("K_d".into()))?;
        Ok(&self.eq.theta_bar + d)
    }

    pub fn rhs(&self, z: &Vector, u: &Vector) -> Result<Vector> {
        let n = self.sys.n();
        let (p1, p2) = self.xi_dims();
        if z.len() != n + p1 + p2 {
            return Err(Error::Dimension(format!("cascade state has length {}, expected {}", z.len(), n + p1 + p2)));
        }
        let x = z.rows(0, n).into_owned();
        let th = self.theta(z)?;
        let s = self.sys.h() * (&x - &self.eq.x_bar);
        let mut out = Vector::zeros(z.len());
        out.rows_mut(0, n).copy_from(&self.sys.rhs(&x, &th, u)?);
        out.rows_mut(n, p1).copy_from(&(&self.k_xi[2] * &s));
        out.rows_mut(n + p1, p2).copy_from(&(&self.k_xi[3] * &s + &self.k_xi[4] * z.rows(n, p1)));
        Ok(out)
    }
}

/// Unshifted dynamic extension with state-dependent `K_H(x) = −𝒟(x)ᵀ`:
/// `ẋ = D(θ) H x + B u`, `θ̇ = −𝒟(x)ᵀ H x − K_θ θ`. Only its structure
/// (skew/symmetric split) is guaranteed, not stability.
pub fn unshifted_extension_rhs(
    sys: &AveragedPhSystem,
    k_theta: &Mat,
    x: &Vector,
    theta: &Vector,
    u: &Vector,
) -> Result<(Vector, Vector)> {
    let dx = sys.rhs(x, theta, u)?;
    let dth = -(sys.d_cal(x)?.transpose() * (sys.h() * x)) - k_theta * theta;
    Ok((dx, dth))
}
