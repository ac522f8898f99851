//! Cascaded PI baseline: battery-voltage loop on the DC/DC converter, outer
//! DC-bus voltage loop and inner dq current loop on the inverter.

use super::{EvcsModel, EvcsParams, EvcsSetpoints, N, PHI_SD, PHI_SQ, Q_BAT, Q_CD, Q_CQ, Q_DC};
use crate::averaged::{Equilibrium, Pin};
use crate::error::{Error, Result};
use crate::numerics::{eigenvalues, finite_diff_jacobian, Mat, Spectrum, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeGains {
    pub kp_vc: f64,
    pub ki_vc: f64,
    pub kp_cc: f64,
    pub ki_cc: f64,
    pub kp_ev: f64,
    pub ki_ev: f64,
}

impl Default for CascadeGains {
    fn default() -> Self {
        CascadeGains { kp_vc: 0.64, ki_vc: 70.0, kp_cc: 1.0 / 6.0, ki_cc: 4.0 / 3.0, kp_ev: 1.5, ki_ev: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeConfig {
    pub gains: CascadeGains,
    /// Battery loop output is `2 d_dc` (true) rather than `d_dc`.
    pub halve_duty: bool,
    /// Decoupling inductance; `None` uses `L_fs`.
    pub l_fi: Option<f64>,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig { gains: CascadeGains::default(), halve_duty: true, l_fi: None }
    }
}

/// Integrator state `ξ₁..ξ₄` plus the rates of the previous sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeMemory {
    pub xi: [f64; 4],
    pub prev_rate: [f64; 4],
}

impl CascadeMemory {
    pub fn at_rest(xi: [f64; 4]) -> Self {
        CascadeMemory { xi, prev_rate: [0.0; 4] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeOutput {
    /// `(d_dc, m_d, m_q)` after clamping.
    pub theta: [f64; 3],
    pub clamped: bool,
}

/// `(v_bat, v_dc, i_sd, i_sq, v_cd, v_cq)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    pub v_bat: f64,
    pub v_dc: f64,
    pub i_sd: f64,
    pub i_sq: f64,
    pub v_cd: f64,
    pub v_cq: f64,
}

impl Measurements {
    pub fn from_state(p: &EvcsParams, x: &[f64]) -> Self {
        Measurements {
            v_bat: x[Q_BAT] / p.c,
            v_dc: x[Q_DC] / p.c_dc,
            i_sd: x[PHI_SD] / p.l_fs,
            i_sq: x[PHI_SQ] / p.l_fs,
            v_cd: x[Q_CD] / p.c_f,
            v_cq: x[Q_CQ] / p.c_f,
        }
    }
}

fn l_fi(cfg: &CascadeConfig, p: &EvcsParams) -> f64 {
    cfg.l_fi.unwrap_or(p.l_fs)
}

/// Rates `ξ̇₁..ξ̇₄` given the current `ξ`.
fn rates(cfg: &CascadeConfig, refs: &EvcsSetpoints, m: &Measurements, xi: &[f64; 4]) -> [f64; 4] {
    let g = &cfg.gains;
    [
        m.v_dc - refs.v_dc_ref,
        g.kp_vc * (refs.v_dc_ref - m.v_dc) + g.ki_vc * xi[0] - m.i_sd,
        refs.i_sq_ref - m.i_sq,
        refs.v_bat_ref - m.v_bat,
    ]
}

fn outputs(
    cfg: &CascadeConfig,
    p: &EvcsParams,
    refs: &EvcsSetpoints,
    m: &Measurements,
    xi: &[f64; 4],
    r: &[f64; 4],
) -> [f64; 3] {
    let g = &cfg.gains;
    let lw = l_fi(cfg, p) * p.omega;
    let half_bus = 0.5 * refs.v_dc_ref;
    let duty = g.kp_ev * (refs.v_bat_ref - m.v_bat) + g.ki_ev * xi[3];
    [
        if cfg.halve_duty { 0.5 * duty } else { duty },
        (g.kp_cc * r[1] + g.ki_cc * xi[1] - lw * m.i_sq + m.v_cd) / half_bus,
        (g.kp_cc * r[2] + g.ki_cc * xi[2] + lw * m.i_sd + m.v_cq) / half_bus,
    ]
}

/// Duty to `[0, 1]`; modulation vector to the unit disc.
fn clamp(theta: [f64; 3]) -> ([f64; 3], bool) {
    let mut c = [theta[0].clamp(0.0, 1.0), theta[1].clamp(-1.0, 1.0), theta[2].clamp(-1.0, 1.0)];
    let norm = c[1].hypot(c[2]);
    if norm > 1.0 {
        c[1] /= norm;
        c[2] /= norm;
    }
    (c, c != theta)
}

/// Continuous law: unclamped outputs and integrator rates.
pub fn cascade_law(
    cfg: &CascadeConfig,
    p: &EvcsParams,
    refs: &EvcsSetpoints,
    m: &Measurements,
    xi: &[f64; 4],
) -> ([f64; 3], [f64; 4]) {
    let r = rates(cfg, refs, m, xi);
    (outputs(cfg, p, refs, m, xi, &r), r)
}

/// One controller sample with trapezoidal integration over `dt`.
pub fn cascaded_pi_step(
    mem: &CascadeMemory,
    meas: &Measurements,
    refs: &EvcsSetpoints,
    p: &EvcsParams,
    cfg: &CascadeConfig,
    dt: f64,
) -> (CascadeOutput, CascadeMemory) {
    let mut xi = mem.xi;
    let mut r = [0.0; 4];
    // ξ₂'s rate depends on ξ₁, so integrate in that order
    for i in 0..4 {
        r[i] = rates(cfg, refs, meas, &xi)[i];
        xi[i] += 0.5 * dt * (r[i] + mem.prev_rate[i]);
    }
    let r2 = rates(cfg, refs, meas, &xi);
    let raw = outputs(cfg, p, refs, meas, &xi, &r2);
    let (theta, clamped) = clamp(raw);
    if clamped {
        log::debug!("cascaded PI output clamped: {raw:?} -> {theta:?}");
    }
    (CascadeOutput { theta, clamped }, CascadeMemory { xi, prev_rate: r })
}

/// Plant steady state pinned at the references and the integrator values
/// that hold it.
pub fn cascade_fixed_point(
    model: &EvcsModel,
    refs: &EvcsSetpoints,
    cfg: &CascadeConfig,
) -> Result<(Equilibrium, [f64; 4])> {
    refs.validate()?;
    let p = model.params();
    let pins = [
        Pin::State(Q_BAT, refs.v_bat_ref * p.c),
        Pin::State(Q_DC, refs.v_dc_ref * p.c_dc),
        Pin::State(PHI_SQ, refs.i_sq_ref * p.l_fs),
    ];
    let eq = model.system().steady_state_from_setpoints(
        &pins,
        &model.nominal_input(),
        &Vector::from_row_slice(&super::THETA_BAR),
    )?;
    let g = &cfg.gains;
    let m = Measurements::from_state(p, eq.x_bar.as_slice());
    let th = &eq.theta_bar;
    let lw = l_fi(cfg, p) * p.omega;
    let half_bus = 0.5 * refs.v_dc_ref;
    let xi = [
        m.i_sd / g.ki_vc,
        (half_bus * th[1] + lw * m.i_sq - m.v_cd) / g.ki_cc,
        (half_bus * th[2] - lw * m.i_sd - m.v_cq) / g.ki_cc,
        if cfg.halve_duty { 2.0 * th[0] } else { th[0] } / g.ki_ev,
    ];
    Ok((eq, xi))
}

/// The averaged plant under the continuous cascaded PI, state `(x, ξ₁..ξ₄)`.
#[derive(Debug, Clone)]
pub struct CascadeLoop {
    model: EvcsModel,
    cfg: CascadeConfig,
    refs: EvcsSetpoints,
    eq: Equilibrium,
    xi_bar: [f64; 4],
    clamp: bool,
    jacobian: Mat,
    spectrum: Spectrum,
}

impl CascadeLoop {
    pub fn new(model: &EvcsModel, refs: &EvcsSetpoints, cfg: CascadeConfig) -> Result<Self> {
        let (eq, xi_bar) = cascade_fixed_point(model, refs, &cfg)?;
        let mut cl = CascadeLoop {
            model: model.clone(),
            cfg,
            refs: *refs,
            eq,
            xi_bar,
            clamp: false,
            jacobian: Mat::zeros(0, 0),
            spectrum: Spectrum { eigenvalues: vec![], max_real_part: f64::NEG_INFINITY },
        };
        let z = cl.equilibrium_state();
        let u = cl.eq.u_bar.clone();
        let res = cl.rhs(&z, &u).amax();
        if res > 1e-6 * (1.0 + u.amax()) {
            return Err(Error::Certificate(format!("cascaded PI fixed point residual {res:.3e}")));
        }
        let f = |v: &Vector| cl.rhs(v, &u);
        cl.jacobian = finite_diff_jacobian(&f, &z, 1e-6);
        cl.spectrum = eigenvalues(&cl.jacobian)?;
        if cl.spectrum.max_real_part >= 0.0 {
            return Err(Error::Certificate(format!(
                "cascaded PI linearization is not Hurwitz: max real part {:.6e}",
                cl.spectrum.max_real_part
            )));
        }
        Ok(cl)
    }

    pub fn with_clamping(mut self, on: bool) -> Self {
        self.clamp = on;
        self
    }

    pub fn equilibrium(&self) -> &Equilibrium {
        &self.eq
    }

    pub fn model(&self) -> &EvcsModel {
        &self.model
    }

    pub fn setpoints(&self) -> &EvcsSetpoints {
        &self.refs
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.cfg
    }

    pub fn xi_bar(&self) -> [f64; 4] {
        self.xi_bar
    }

    pub fn jacobian(&self) -> &Mat {
        &self.jacobian
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn len(&self) -> usize {
        N + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn extend(&self, x: &Vector) -> Vector {
        let mut z = Vector::zeros(N + 4);
        z.rows_mut(0, N).copy_from(x);
        for i in 0..4 {
            z[N + i] = self.xi_bar[i];
        }
        z
    }

    pub fn equilibrium_state(&self) -> Vector {
        self.extend(&self.eq.x_bar)
    }

    pub fn memory_at_rest(&self) -> CascadeMemory {
        CascadeMemory::at_rest(self.xi_bar)
    }

    fn law(&self, z: &[f64]) -> ([f64; 3], [f64; 4]) {
        let m = Measurements::from_state(self.model.params(), z);
        let xi = [z[N], z[N + 1], z[N + 2], z[N + 3]];
        let (th, r) = cascade_law(&self.cfg, self.model.params(), &self.refs, &m, &xi);
        if self.clamp {
            (clamp(th).0, r)
        } else {
            (th, r)
        }
    }

    pub fn theta(&self, z: &Vector) -> Vector {
        Vector::from_row_slice(&self.law(z.as_slice()).0)
    }

    pub fn rhs(&self, z: &Vector, u: &Vector) -> Vector {
        let mut out = Vector::zeros(N + 4);
        self.rhs_into(z.as_slice(), u, out.as_mut_slice());
        out
    }

    pub fn rhs_into(&self, z: &[f64], u: &Vector, out: &mut [f64]) {
        let (th, r) = self.law(z);
        let x = Vector::from_column_slice(&z[..N]);
        let dx = self.model.system().rhs(&x, &Vector::from_row_slice(&th), u).expect("dimensions are fixed");
        out[..N].copy_from_slice(dx.as_slice());
        out[N..].copy_from_slice(&r);
    }
}
