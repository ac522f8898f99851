//! The charging-station model: battery, bidirectional DC/DC converter,
//! π-line, DC bus, AC/DC converter, LCL filter and grid.
//!
//! State layout (index: symbol):
//!
//! | idx | state | alias |
//! |-----|-------|-------|
//! | 0 | φ_L | i_L = φ_L/L |
//! | 1 | Q_bat | v_bat = Q_bat/C |
//! | 2 | Q_bdc | v_bdc = Q_bdc/C_TL |
//! | 3 | φ_ind | i_ind = φ_ind/L_TL |
//! | 4 | Q_dc | v_dc = Q_dc/C_dc |
//! | 5, 6 | φ_sd, φ_sq | i_s = φ_s/L_fs |
//! | 7, 8 | Q_cd, Q_cq | v_c = Q_c/C_f |
//! | 9, 10 | φ_gd, φ_gq | i_g = φ_g/L_fg |
//!
//! Parameters `θ = (d_dc, m_d, m_q)`, inputs `u = (v_ev, v_gd, v_gq)`.
//! Bounds are `d_dc ∈ [0, 1]` and `m_d, m_q ∈ [−1, 1]`; when a simulation
//! saturates θ the pair `(m_d, m_q)` is further limited to the unit disc, the
//! range a three-leg bridge reaches with sinusoidal PWM.

mod cascade;
mod dq;
mod params;
mod quantity;

pub use cascade::{
    cascade_fixed_point, cascade_law, cascaded_pi_step, CascadeConfig, CascadeGains, CascadeLoop, CascadeMemory,
    CascadeOutput, Measurements,
};
pub use dq::{dq_forward, dq_inverse};
pub use params::{default_params, EvcsParams, DEFAULT_V_G_HAT, PARAM_KEYS};
pub use quantity::{resolve, state_alias, Quantity, QUANTITY_NAMES, STATE_NAMES};

use crate::averaged::{AveragedPhSystem, Equilibrium};
use crate::control::{ClosedLoop, DeltaPower, GainSet};
use crate::error::{Error, Result};
use crate::numerics::{Mat, Vector};

pub const N: usize = 11;
pub const K: usize = 3;
pub const M: usize = 3;

pub const PHI_L: usize = 0;
pub const Q_BAT: usize = 1;
pub const Q_BDC: usize = 2;
pub const PHI_IND: usize = 3;
pub const Q_DC: usize = 4;
pub const PHI_SD: usize = 5;
pub const PHI_SQ: usize = 6;
pub const Q_CD: usize = 7;
pub const Q_CQ: usize = 8;
pub const PHI_GD: usize = 9;
pub const PHI_GQ: usize = 10;

/// Steady-state duty ratio and modulation indexes `(d̄_dc, m̄_d, m̄_q)`.
pub const THETA_BAR: [f64; 3] = [5.0 / 9.0, 0.726, -0.018];

/// Ratio of the generic `−𝒟(x̄)ᵀ∇𝒮` entries to the printed scalar laws
/// `2(v_bdc ī_L − v̄_bdc i_L)`, `¾(ī_sd v_dc − v̄_dc i_sd)`, `¾(ī_sq v_dc − v̄_dc i_sq)`.
pub const PRINTED_LAW_FACTORS: [f64; 3] = [0.5, 1.0, 1.0];

/// Ratio of each generic `∇𝒮` entry (`H(x − x̄)`) to the hand-written list
/// `(i_L, 2v_bat, v_bdc, i_ind, 3/2 v_dc, i_s, v_c, i_g)` deviations.
pub const PRINTED_GRAD_FACTORS: [f64; N] = [1.0, 0.5, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];

fn split(d: &Mat) -> (Mat, Mat) {
    let j = (d - d.transpose()) * 0.5;
    let r = -(d + d.transpose()) * 0.5;
    (j, r)
}

fn omega_block(d: &mut Mat, at: usize, scale: f64) {
    d[(at, at + 1)] += scale;
    d[(at + 1, at)] -= scale;
}

fn filter_block(d: &mut Mat, p: &EvcsParams, s: usize, c: usize, g: usize) {
    for i in 0..2 {
        d[(s + i, s + i)] = -p.r_f;
        d[(s + i, c + i)] = -1.0;
        d[(s + i, g + i)] = p.r_f;
        d[(c + i, s + i)] = 1.0;
        d[(c + i, g + i)] = -1.0;
        d[(g + i, s + i)] = p.r_f;
        d[(g + i, c + i)] = 1.0;
        d[(g + i, g + i)] = -p.r_f;
    }
    omega_block(d, s, p.l_fs * p.omega);
    omega_block(d, c, p.c_f * p.omega);
    omega_block(d, g, p.l_fg * p.omega);
}

fn coupling(n: usize, a: usize, b: usize) -> Mat {
    let mut m = Mat::zeros(n, n);
    m[(a, b)] = 0.5;
    m[(b, a)] = -0.5;
    m
}

/// DC side with the line's shunt capacitor kept as its own state:
/// `x = (φ_L, Q_bat, Q_TL, Q_cap, φ_ind)`, `θ = d_dc`, `u = (v_ev, i_dc, v_dc)`.
pub fn build_dc_side(p: &EvcsParams) -> Result<AveragedPhSystem> {
    p.validate()?;
    let mut d = Mat::zeros(5, 5);
    d[(0, 1)] = -1.0;
    d[(1, 0)] = 1.0;
    d[(1, 1)] = -1.0 / p.r_bat;
    d[(2, 4)] = 0.5;
    d[(4, 2)] = -0.5;
    d[(3, 4)] = 1.0;
    d[(4, 3)] = -1.0;
    d[(4, 4)] = -p.r_tl;
    let (j, r) = split(&d);
    let h = Mat::from_diagonal(&Vector::from_vec(vec![1.0 / p.l, 1.0 / p.c, 2.0 / p.c_tl, 1.0 / p.c_dc, 1.0 / p.l_tl]));
    let mut b = Mat::zeros(5, 3);
    b[(1, 0)] = 1.0 / p.r_bat;
    b[(3, 1)] = 1.0;
    b[(4, 2)] = 1.0;
    AveragedPhSystem::new(j, r, vec![coupling(5, 0, 2)], vec![Mat::zeros(5, 5)], b, h, vec![(0.0, 1.0)])
}

/// AC side `x = (Q_dc, φ_s, Q_c, φ_g)`, `θ = (m_d, m_q)`, `u = (i_in, v_gd, v_gq)`
/// entering as `(⅔ i_in, −v_g)`.
pub fn build_ac_side(p: &EvcsParams) -> Result<AveragedPhSystem> {
    p.validate()?;
    let mut d = Mat::zeros(7, 7);
    filter_block(&mut d, p, 1, 3, 5);
    let (j, r) = split(&d);
    let h = Mat::from_diagonal(&Vector::from_vec(vec![
        1.5 / p.c_dc,
        1.0 / p.l_fs,
        1.0 / p.l_fs,
        1.0 / p.c_f,
        1.0 / p.c_f,
        1.0 / p.l_fg,
        1.0 / p.l_fg,
    ]));
    let mut b = Mat::zeros(7, 3);
    b[(0, 0)] = 2.0 / 3.0;
    b[(5, 1)] = -1.0;
    b[(6, 2)] = -1.0;
    AveragedPhSystem::new(
        j,
        r,
        vec![coupling(7, 1, 0), coupling(7, 2, 0)],
        vec![Mat::zeros(7, 7); 2],
        b,
        h,
        vec![(-1.0, 1.0); 2],
    )?
    .with_disc_limit(0, 1, 1.0)
}

/// AC-side outputs `(v_dc, i_gd, i_gq)` as physical quantities.
pub fn ac_outputs(p: &EvcsParams, x_ac: &Vector) -> [f64; 3] {
    [x_ac[0] / p.c_dc, x_ac[5] / p.l_fg, x_ac[6] / p.l_fg]
}

/// The 11-state station (shunt capacitor merged into `Q_dc`).
pub fn build_full(p: &EvcsParams) -> Result<AveragedPhSystem> {
    p.validate()?;
    let mut d = Mat::zeros(N, N);
    d[(PHI_L, Q_BAT)] = -1.0;
    d[(Q_BAT, PHI_L)] = 1.0;
    d[(Q_BAT, Q_BAT)] = -1.0 / p.r_bat;
    d[(Q_BDC, PHI_IND)] = 0.5;
    d[(PHI_IND, Q_BDC)] = -0.5;
    d[(PHI_IND, PHI_IND)] = -p.r_tl;
    d[(PHI_IND, Q_DC)] = 2.0 / 3.0;
    d[(Q_DC, PHI_IND)] = -2.0 / 3.0;
    filter_block(&mut d, p, PHI_SD, Q_CD, PHI_GD);
    let (j, r) = split(&d);
    let h = Mat::from_diagonal(&Vector::from_vec(vec![
        1.0 / p.l,
        1.0 / p.c,
        2.0 / p.c_tl,
        1.0 / p.l_tl,
        1.5 / p.c_dc,
        1.0 / p.l_fs,
        1.0 / p.l_fs,
        1.0 / p.c_f,
        1.0 / p.c_f,
        1.0 / p.l_fg,
        1.0 / p.l_fg,
    ]));
    let mut b = Mat::zeros(N, M);
    b[(Q_BAT, 0)] = 1.0 / p.r_bat;
    b[(PHI_GD, 1)] = -1.0;
    b[(PHI_GQ, 2)] = -1.0;
    AveragedPhSystem::new(
        j,
        r,
        vec![coupling(N, PHI_L, Q_BDC), coupling(N, PHI_SD, Q_DC), coupling(N, PHI_SQ, Q_DC)],
        vec![Mat::zeros(N, N); 3],
        b,
        h,
        vec![(0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
    )?
    .with_disc_limit(1, 2, 1.0)
}

/// Nominal input `ū = (v_ev, V̂_g, 0)`.
pub fn nominal_input(p: &EvcsParams) -> Vector {
    Vector::from_vec(vec![p.v_ev, p.v_g_hat, 0.0])
}

/// References for the station controllers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvcsSetpoints {
    pub v_bat_ref: f64,
    pub v_dc_ref: f64,
    pub i_bat_ref: f64,
    pub i_sq_ref: f64,
}

impl EvcsSetpoints {
    pub fn new(v_bat_ref: f64, v_dc_ref: f64, i_bat_ref: f64, i_sq_ref: f64) -> Result<Self> {
        let s = EvcsSetpoints { v_bat_ref, v_dc_ref, i_bat_ref, i_sq_ref };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.v_bat_ref, self.v_dc_ref, self.i_bat_ref, self.i_sq_ref];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("setpoints must be finite".into()));
        }
        if !(self.v_dc_ref > self.v_bat_ref && self.v_bat_ref > 0.0) {
            return Err(Error::Parameter(format!(
                "boost topology needs v_dc_ref > v_bat_ref > 0, got {} and {}",
                self.v_dc_ref, self.v_bat_ref
            )));
        }
        Ok(())
    }

    /// References read off a steady state.
    pub fn from_equilibrium(p: &EvcsParams, eq: &Equilibrium) -> Self {
        let x = &eq.x_bar;
        EvcsSetpoints {
            v_bat_ref: x[Q_BAT] / p.c,
            v_dc_ref: x[Q_DC] / p.c_dc,
            i_bat_ref: (x[Q_BAT] / p.c - p.v_ev) / p.r_bat,
            i_sq_ref: x[PHI_SQ] / p.l_fs,
        }
    }
}

/// Assembled station with its parameter set.
#[derive(Debug, Clone)]
pub struct EvcsModel {
    params: EvcsParams,
    sys: AveragedPhSystem,
}

impl EvcsModel {
    pub fn new(params: EvcsParams) -> Result<Self> {
        let sys = build_full(&params)?;
        Ok(EvcsModel { params, sys })
    }

    pub fn params(&self) -> &EvcsParams {
        &self.params
    }

    pub fn system(&self) -> &AveragedPhSystem {
        &self.sys
    }

    pub fn nominal_input(&self) -> Vector {
        nominal_input(&self.params)
    }

    /// Steady state at `θ̄` and `ū`.
    pub fn equilibrium_at(&self, theta_bar: &[f64; 3]) -> Result<Equilibrium> {
        self.sys.steady_state_from_theta(&Vector::from_row_slice(theta_bar), &self.nominal_input())
    }

    /// Steady state at [`THETA_BAR`].
    pub fn equilibrium(&self) -> Result<Equilibrium> {
        self.equilibrium_at(&THETA_BAR)
    }

    /// Grid amplitude `V̂_g` that puts the bus at `v_dc` for `θ̄`, all other
    /// parameters unchanged. The steady state is linear in `ū`, so two solves
    /// suffice.
    pub fn grid_amplitude_for_bus(&self, theta_bar: &[f64; 3], v_dc: f64) -> Result<f64> {
        let bus = |v: f64| -> Result<f64> {
            let mut p = self.params;
            p.v_g_hat = v;
            let u = nominal_input(&p);
            let eq = self.sys.steady_state_from_theta(&Vector::from_row_slice(theta_bar), &u)?;
            Ok(eq.x_bar[Q_DC] / p.c_dc)
        };
        let (a, b) = (bus(0.0)?, bus(1.0)?);
        if (b - a).abs() < f64::EPSILON * a.abs().max(1.0) {
            return Err(Error::Parameter("bus voltage does not depend on the grid amplitude".into()));
        }
        Ok((v_dc - a) / (b - a))
    }

    /// Evaluates a named quantity.
    pub fn quantity(&self, q: Quantity, x: &Vector, theta: &Vector) -> f64 {
        q.eval(&self.params, x, theta)
    }
}

/// pH P and pH PI controllers with `K_θ = γI₃`, checked entrywise against the
/// scalar laws written out for the station.
pub fn ph_controllers_evcs(
    model: &EvcsModel,
    eq: &Equilibrium,
    gamma: f64,
    delta: f64,
) -> Result<(ClosedLoop, ClosedLoop)> {
    ph_controllers_evcs_with(model, eq, gamma, delta, DeltaPower::Single)
}

pub fn ph_controllers_evcs_with(
    model: &EvcsModel,
    eq: &Equilibrium,
    gamma: f64,
    delta: f64,
    power: DeltaPower,
) -> Result<(ClosedLoop, ClosedLoop)> {
    let sys = model.system();
    let g = GainSet::scalar(K, gamma, delta)?.with_delta_power(power);
    let p_loop = ClosedLoop::ph_p(sys, eq, g.clone())?;
    let pi_loop = ClosedLoop::ph_pi(sys, eq, g.clone())?;
    check_printed_laws(model, eq, &p_loop, &pi_loop)?;
    Ok((p_loop, pi_loop))
}

/// Scalar power differences of the printed laws at plant state `x`.
pub fn printed_law_terms(p: &EvcsParams, eq: &Equilibrium, x: &Vector) -> [f64; 3] {
    let xb = &eq.x_bar;
    let i_l = |z: &Vector| z[PHI_L] / p.l;
    let v_bdc = |z: &Vector| z[Q_BDC] / p.c_tl;
    let v_dc = |z: &Vector| z[Q_DC] / p.c_dc;
    let i_s = |z: &Vector, i: usize| z[PHI_SD + i] / p.l_fs;
    [
        2.0 * (v_bdc(x) * i_l(xb) - v_bdc(xb) * i_l(x)),
        0.75 * (i_s(xb, 0) * v_dc(x) - v_dc(xb) * i_s(x, 0)),
        0.75 * (i_s(xb, 1) * v_dc(x) - v_dc(xb) * i_s(x, 1)),
    ]
}

fn check_samples(eq: &Equilibrium) -> Vec<Vector> {
    // deterministic spread of relative perturbations
    (1..=4)
        .map(|s| {
            Vector::from_iterator(
                N,
                eq.x_bar.iter().enumerate().map(|(i, v)| {
                    let w = ((i * 7 + s * 3) % 11) as f64 / 11.0 - 0.5;
                    v + w * 0.1 * (v.abs() + 1.0)
                }),
            )
        })
        .collect()
}

fn check_printed_laws(model: &EvcsModel, eq: &Equilibrium, p_loop: &ClosedLoop, pi_loop: &ClosedLoop) -> Result<()> {
    let p = model.params();
    let g = p_loop.gains().expect("gains");
    let gamma = g.k_theta[(0, 0)];
    let delta = pi_loop.gains().expect("gains").delta_eff();
    let u = &eq.u_bar;
    let mismatch = |what: &str, row: usize, got: f64, want: f64, scale: f64| -> Result<()> {
        if (got - want).abs() > 1e-9 * scale.max(1.0) {
            return Err(Error::Validation(format!(
                "{what} row {}: generic law gives {got:.12e}, printed form gives {want:.12e}",
                row + 1
            )));
        }
        Ok(())
    };
    for (si, x) in check_samples(eq).iter().enumerate() {
        let terms = printed_law_terms(p, eq, x);
        let scale = terms.iter().fold(0.0f64, |a, t| a.max(t.abs()));
        // P: θ̇ = f·printed − γ(θ − θ̄)
        let mut z = p_loop.extend(x);
        for j in 0..K {
            z[N + j] = eq.theta_bar[j] + 0.01 * (si as f64 + 1.0) * (j as f64 - 1.0);
        }
        let rz = p_loop.rhs(&z, u)?;
        for j in 0..K {
            let want = PRINTED_LAW_FACTORS[j] * terms[j] - gamma * (z[N + j] - eq.theta_bar[j]);
            mismatch("pH P", j, rz[N + j], want, scale.max(gamma))?;
        }
        // PI: 0 = δ·f·printed − γ(θ − θ̄) + ξ and ξ̇ = γ⁻¹ f·printed
        let mut z = pi_loop.extend(x);
        for j in 0..K {
            z[N + j] = 10.0 * (j as f64 - si as f64);
        }
        let th = pi_loop.theta(&z);
        let rz = pi_loop.rhs(&z, u)?;
        for j in 0..K {
            let alg = delta * PRINTED_LAW_FACTORS[j] * terms[j] - gamma * (th[j] - eq.theta_bar[j]) + z[N + j];
            mismatch("pH PI algebraic", j, alg, 0.0, scale * delta)?;
            mismatch("pH PI integrator", j, rz[N + j], PRINTED_LAW_FACTORS[j] * terms[j] / gamma, scale / gamma)?;
        }
    }
    Ok(())
}
