//! PWM-switched station: carrier comparison, vertex-parameter dynamics and a
//! fixed-step integrator with the controller sampled once per carrier period.
//!
//! Switch convention: `s_dc = 2` (S₁ closed) selects model `j = 2`, i.e.
//! `θ₁ = 1`; `s_dc = 1` (S₂ closed, inductor freewheeling) selects `θ₁ = 0`.
//! Inverter legs are binary; leg `k` on means pole voltage `+½v_dc`, and the
//! leg pattern enters as `(m_d, m_q) = dq(2s_abc − 1, ωt)`.

use crate::averaged::AveragedPhSystem;
use crate::control::{ClosedLoop, Variant};
use crate::error::{Error, Result};
use crate::evcs::resolve;
use crate::evcs::{cascaded_pi_step, dq_forward, dq_inverse, CascadeLoop, CascadeMemory, Measurements, K, N};
use crate::numerics::{Mat, Vector};
use crate::sim::driver::{initial_plant_state, Controller, Prepared, Table};
use crate::sim::scenario::Scenario;
use nalgebra::SymmetricEigen;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Carrier {
    Triangle,
    Sawtooth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwmConfig {
    pub f_sw: f64,
    pub carrier: Carrier,
    pub steps_per_period: usize,
}

impl PwmConfig {
    pub fn new(f_sw: f64) -> Self {
        PwmConfig { f_sw, carrier: Carrier::Triangle, steps_per_period: 200 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_sw > 0.0) || !self.f_sw.is_finite() {
            return Err(Error::Parameter(format!("f_sw must be positive, got {}", self.f_sw)));
        }
        if self.steps_per_period < 50 {
            return Err(Error::Parameter(format!(
                "steps_per_period must be at least 50, got {}",
                self.steps_per_period
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.f_sw * self.steps_per_period as f64)
    }
}

/// Carrier in `[0, 1]`.
pub fn carrier_value(t: f64, cfg: &PwmConfig) -> f64 {
    let ph = (t * cfg.f_sw).rem_euclid(1.0);
    match cfg.carrier {
        Carrier::Triangle => 1.0 - (2.0 * ph - 1.0).abs(),
        Carrier::Sawtooth => ph,
    }
}

/// `true` selects model `j = 2`.
pub fn pwm_signal(d: f64, t: f64, cfg: &PwmConfig) -> bool {
    let d = d.clamp(0.0, 1.0);
    if d >= 1.0 {
        return true;
    }
    d > carrier_value(t, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchState {
    /// 1 or 2.
    pub s_dc: u8,
    pub s_abc: [bool; 3],
}

impl SwitchState {
    /// Switch positions for the commanded `(d_dc, m_d, m_q)` at time `t`,
    /// sampled at `t_carrier`.
    pub fn from_command(theta: &[f64; 3], angle: f64, t_carrier: f64, cfg: &PwmConfig) -> Self {
        let m_abc = dq_inverse((theta[1], theta[2]), angle);
        SwitchState {
            s_dc: if pwm_signal(theta[0], t_carrier, cfg) { 2 } else { 1 },
            s_abc: m_abc.map(|m| pwm_signal(0.5 * (m + 1.0), t_carrier, cfg)),
        }
    }

    /// Vertex parameter `θ_sw` at grid angle `angle`.
    pub fn theta(&self, angle: f64) -> [f64; 3] {
        let legs = self.s_abc.map(|s| if s { 1.0 } else { -1.0 });
        let (md, mq) = dq_forward(legs, angle);
        [if self.s_dc == 2 { 1.0 } else { 0.0 }, md, mq]
    }
}

/// `D(θ_sw) H x + B u`.
pub fn switched_rhs(sys: &AveragedPhSystem, x: &Vector, sw: &SwitchState, angle: f64, u: &Vector) -> Result<Vector> {
    sys.rhs(x, &Vector::from_row_slice(&sw.theta(angle)), u)
}

/// Dense `(J − R)H`, `D_j H` and `B` for allocation-free evaluation.
#[derive(Debug, Clone)]
pub struct FastPlant {
    d0h: Vec<f64>,
    djh: Vec<Vec<f64>>,
    bu: Vec<f64>,
}

impl FastPlant {
    pub fn new(sys: &AveragedPhSystem, u: &Vector) -> Self {
        let flat = |m: &Mat| -> Vec<f64> {
            (0..N).flat_map(|i| (0..N).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
        };
        FastPlant {
            d0h: flat(&((sys.j0() - sys.r0()) * sys.h())),
            djh: (0..K).map(|j| flat(&(sys.d_j(j) * sys.h()))).collect(),
            bu: (sys.b() * u).as_slice().to_vec(),
        }
    }

    pub fn rhs(&self, x: &[f64], theta: &[f64; 3], out: &mut [f64]) {
        for i in 0..N {
            let mut acc = self.bu[i];
            for j in 0..N {
                let mut a = self.d0h[i * N + j];
                for (k, th) in theta.iter().enumerate() {
                    a += th * self.djh[k][i * N + j];
                }
                acc += a * x[j];
            }
            out[i] = acc;
        }
    }
}

/// One classical RK4 step.
pub fn rk4_step(f: &mut impl FnMut(f64, &[f64], &mut [f64]), t: f64, x: &mut [f64], h: f64) {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(t, x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// A controller evaluated once per carrier period on averaged measurements.
#[derive(Debug, Clone)]
pub enum SampledController {
    Ph { cl: ClosedLoop, state: Vector, prev_rate: Vector },
    Cascade { cl: CascadeLoop, mem: CascadeMemory },
}

fn sym_exp_neg(k: &Mat, dt: f64) -> (Mat, Mat) {
    // e^{−K dt} and K⁻¹(I − e^{−K dt}) for symmetric positive definite K
    let e = SymmetricEigen::new(k.clone());
    let n = k.nrows();
    let mut ex = Mat::zeros(n, n);
    let mut phi = Mat::zeros(n, n);
    for i in 0..n {
        let l = e.eigenvalues[i];
        let v = e.eigenvectors.column(i);
        let vv = v * v.transpose();
        ex += &vv * (-l * dt).exp();
        phi += &vv * ((1.0 - (-l * dt).exp()) / l);
    }
    (ex, phi)
}

impl SampledController {
    pub fn new(c: &Controller) -> Self {
        match c {
            Controller::Ph(cl) => {
                let z = cl.equilibrium_state();
                let n = cl.layout().n;
                let extra = cl.layout().extra;
                SampledController::Ph {
                    cl: cl.clone(),
                    state: z.rows(n, extra).into_owned(),
                    prev_rate: Vector::zeros(extra),
                }
            }
            Controller::Cascade(cl) => SampledController::Cascade { cl: cl.clone(), mem: cl.memory_at_rest() },
        }
    }

    /// Command for the coming period from the averaged plant state `x`,
    /// then advances the controller memory by `dt`.
    pub fn sample(&mut self, x: &Vector, dt: f64) -> [f64; 3] {
        match self {
            SampledController::Ph { cl, state, prev_rate } => {
                let n = cl.layout().n;
                let mut z = Vector::zeros(cl.layout().len());
                z.rows_mut(0, n).copy_from(x);
                z.rows_mut(n, state.len()).copy_from(state);
                let (th, _) = cl.applied_theta(&z);
                let eq = cl.equilibrium();
                let s = cl.system().h() * (x - &eq.x_bar);
                let w = -(cl.d_cal_bar().transpose() * s);
                match cl.variant() {
                    Variant::PhP => {
                        let k = &cl.gains().expect("gains").k_theta;
                        let (ex, phi) = sym_exp_neg(k, dt);
                        *state = &eq.theta_bar + ex * (&*state - &eq.theta_bar) + phi * w;
                    }
                    Variant::PhPi => {
                        let kinv = cl.gains().expect("gains").k_theta.clone().try_inverse().expect("K invertible");
                        let rate = kinv * w;
                        *state += (&rate + &*prev_rate) * (0.5 * dt);
                        *prev_rate = rate;
                    }
                    _ => {}
                }
                [th[0], th[1], th[2]]
            }
            SampledController::Cascade { cl, mem } => {
                let p = cl_params(cl);
                let meas = Measurements::from_state(&p, x.as_slice());
                let (out, next) = cascaded_pi_step(mem, &meas, cl.setpoints(), &p, cl.config(), dt);
                *mem = next;
                out.theta
            }
        }
    }
}

fn cl_params(cl: &CascadeLoop) -> crate::evcs::EvcsParams {
    *cl.model().params()
}

/// Switched run: plant states every `stride` steps and the command in force.
#[derive(Debug, Clone)]
pub struct SwitchedRun {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub commands: Vec<[f64; 3]>,
    pub samples_per_period: usize,
    pub steps: usize,
}

/// Recording rate: 20 samples per period when the step count allows it.
fn record_stride(cfg: &PwmConfig) -> usize {
    if cfg.steps_per_period.is_multiple_of(20) {
        cfg.steps_per_period / 20
    } else {
        1
    }
}

pub fn simulate_switched(prep: &Prepared, sc: &Scenario) -> Result<SwitchedRun> {
    simulate_switched_with(prep, sc, &sc.pwm)
}

pub fn simulate_switched_with(prep: &Prepared, sc: &Scenario, cfg: &PwmConfig) -> Result<SwitchedRun> {
    cfg.validate()?;
    let p = *prep.model.params();
    let u = prep.eq.u_bar.clone();
    let plant = FastPlant::new(prep.model.system(), &u);
    let h = cfg.step();
    let period = 1.0 / cfg.f_sw;
    let periods = (sc.t_end * cfg.f_sw - 1e-9).ceil() as usize;
    let stride = record_stride(cfg);
    let mut ctrl = SampledController::new(&prep.controller);
    let mut x = initial_plant_state(prep, sc).as_slice().to_vec();
    let windows: Vec<(f64, f64, usize, f64)> = sc
        .disturbances
        .iter()
        .map(|d| {
            let (i, f) = crate::evcs::state_alias(&p, &d.quantity).expect("validated");
            (d.start, d.end, i, d.value / f)
        })
        .collect();
    let clamp_at = |t: f64| -> Vec<(usize, f64)> {
        windows.iter().filter(|w| w.0 <= t + 1e-12 && t + 1e-12 < w.1).map(|w| (w.2, w.3)).collect()
    };
    for (i, v) in clamp_at(0.0) {
        x[i] = v;
    }
    let mut cmd = ctrl.sample(&Vector::from_column_slice(&x), period);
    let mut run = SwitchedRun {
        times: vec![0.0],
        states: vec![Vector::from_column_slice(&x)],
        commands: vec![cmd],
        samples_per_period: cfg.steps_per_period / stride,
        steps: 0,
    };
    let spp = cfg.steps_per_period;
    for k in 0..periods {
        let mut mean = vec![0.0; N];
        for i in 0..spp {
            let step = k * spp + i;
            let t = step as f64 * h;
            let sw = SwitchState::from_command(&cmd, p.omega * (t + 0.5 * h), t + 0.5 * h, cfg);
            let clamps = clamp_at(t);
            let mut f = |tt: f64, s: &[f64], out: &mut [f64]| {
                plant.rhs(s, &sw.theta(p.omega * tt), out);
                for (ci, _) in &clamps {
                    out[*ci] = 0.0;
                }
            };
            rk4_step(&mut f, t, &mut x, h);
            let t1 = (step + 1) as f64 * h;
            for (ci, v) in clamp_at(t1) {
                x[ci] = v;
            }
            if x.iter().any(|v| !v.is_finite()) {
                let last = run.states.last().map(|s| s.as_slice().to_vec()).unwrap_or_default();
                return Err(Error::NonFinite { t: t1, state: last });
            }
            for (m, v) in mean.iter_mut().zip(&x) {
                *m += v / spp as f64;
            }
            run.steps += 1;
            if (i + 1) % stride == 0 {
                run.times.push(t1);
                run.states.push(Vector::from_column_slice(&x));
                run.commands.push(cmd);
            }
        }
        cmd = ctrl.sample(&Vector::from_column_slice(&mean), period);
        if let Some(c) = run.commands.last_mut() {
            *c = cmd;
        }
    }
    Ok(run)
}

/// Centered one-period boxcar (trapezoidal) mean of uniformly sampled rows.
/// Returns times shifted by half a period; one period shorter.
pub fn period_average(times: &[f64], rows: &[Vec<f64>], f_sw: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if times.len() != rows.len() || times.len() < 2 {
        return Err(Error::Dimension("period_average needs matching, non-trivial series".into()));
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(Error::Validation("period_average needs uniform sampling".into()));
        }
    }
    let per = 1.0 / (f_sw * dt);
    let m = per.round() as usize;
    if m == 0 || (per - m as f64).abs() > 1e-6 * per {
        return Err(Error::Validation(format!("sampling gives {per} samples per period, not an integer")));
    }
    if times.len() <= m {
        return Err(Error::Validation("series shorter than one period".into()));
    }
    let width = rows[0].len();
    let mut ot = vec![];
    let mut out = vec![];
    for i in 0..times.len() - m {
        let mut acc = vec![0.0; width];
        for j in 0..=m {
            let wgt = if j == 0 || j == m { 0.5 } else { 1.0 };
            for (a, v) in acc.iter_mut().zip(&rows[i + j]) {
                *a += wgt * v;
            }
        }
        for a in acc.iter_mut() {
            *a /= m as f64;
        }
        ot.push(times[i] + 0.5 * m as f64 * dt);
        out.push(acc);
    }
    Ok((ot, out))
}

/// Evaluates `outputs` along a switched run; θ is the sampled command.
pub fn tabulate_switched(prep: &Prepared, run: &SwitchedRun, outputs: &[String]) -> Result<Table> {
    let qs = outputs.iter().map(|o| resolve(o)).collect::<Result<Vec<_>>>()?;
    let mut names = vec!["t".to_string()];
    let mut units = vec!["s".to_string()];
    for q in &qs {
        names.push(q.name().to_string());
        units.push(q.unit().to_string());
    }
    let p = prep.model.params();
    let rows = run
        .times
        .iter()
        .zip(&run.states)
        .zip(&run.commands)
        .map(|((t, x), c)| {
            let th = Vector::from_row_slice(c);
            let mut r = vec![*t];
            r.extend(qs.iter().map(|q| q.eval(p, x, &th)));
            r
        })
        .collect();
    Ok(Table { names, units, rows })
}

/// [`period_average`] applied to every column of a table except time.
pub fn period_average_table(t: &Table, f_sw: f64) -> Result<Table> {
    let times = t.times();
    let rows: Vec<Vec<f64>> = t.rows.iter().map(|r| r[1..].to_vec()).collect();
    let (ta, ra) = period_average(&times, &rows, f_sw)?;
    let rows = ta.into_iter().zip(ra).map(|(tt, r)| std::iter::once(tt).chain(r).collect()).collect();
    Ok(Table { names: t.names.clone(), units: t.units.clone(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pwm_extremes_and_mean() {
        let cfg = PwmConfig::new(1e4);
        let h = cfg.step();
        for k in 0..1000 {
            let t = k as f64 * h * 0.37;
            assert!(!pwm_signal(0.0, t, &cfg));
            assert!(pwm_signal(1.0, t, &cfg));
        }
        let on = (0..200).filter(|i| pwm_signal(0.25, (*i as f64 + 0.5) * h, &cfg)).count();
        assert!(((on as f64 / 200.0) - 0.25).abs() <= 0.005);
    }

    #[test]
    fn boxcar_nulls_its_period() {
        let f = 1e4;
        let dt = 1.0 / (f * 20.0);
        let t: Vec<f64> = (0..200).map(|i| i as f64 * dt).collect();
        let rows: Vec<Vec<f64>> = t.iter().map(|x| vec![3.0 + (2.0 * std::f64::consts::PI * f * x).sin()]).collect();
        let (_, avg) = period_average(&t, &rows, f).unwrap();
        assert!(avg.iter().all(|r| (r[0] - 3.0).abs() < 1e-10));
    }

    #[test]
    fn non_uniform_rejected() {
        let t = [0.0, 1.0, 3.0];
        assert!(period_average(&t, &[vec![0.0], vec![0.0], vec![0.0]], 0.5).is_err());
    }
}
