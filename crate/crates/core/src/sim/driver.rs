//! Builds the model and controller a scenario asks for and runs the
//! averaged simulation.

use crate::averaged::Equilibrium;
use crate::control::{ClosedLoop, GainSet};
use crate::error::{Error, Result};
use crate::evcs::{
    ph_controllers_evcs_with, resolve, state_alias, CascadeConfig, CascadeLoop, EvcsModel, EvcsSetpoints, N,
};
use crate::numerics::{integrate_ode, OdeOptions, OdeStats, Spectrum, Vector};
use crate::sim::scenario::{ControllerKind, Scenario};

#[derive(Debug, Clone)]
pub enum Controller {
    Ph(ClosedLoop),
    Cascade(CascadeLoop),
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Ph(c) => c.variant().name(),
            Controller::Cascade(_) => "cascaded_pi",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Controller::Ph(c) => c.layout().len(),
            Controller::Cascade(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extend(&self, x: &Vector) -> Vector {
        match self {
            Controller::Ph(c) => c.extend(x),
            Controller::Cascade(c) => c.extend(x),
        }
    }

    pub fn equilibrium_state(&self) -> Vector {
        match self {
            Controller::Ph(c) => c.equilibrium_state(),
            Controller::Cascade(c) => c.equilibrium_state(),
        }
    }

    pub fn rhs_into(&self, z: &[f64], u: &Vector, out: &mut [f64]) {
        match self {
            Controller::Ph(c) => c.rhs_into(z, u, out),
            Controller::Cascade(c) => c.rhs_into(z, u, out),
        }
    }

    /// θ as applied to the plant.
    pub fn theta(&self, z: &Vector) -> Vector {
        match self {
            Controller::Ph(c) => c.applied_theta(z).0,
            Controller::Cascade(c) => c.theta(z),
        }
    }

    /// Closed-loop Lyapunov function, where one is known.
    pub fn storage(&self, z: &Vector) -> Option<f64> {
        match self {
            Controller::Ph(c) => Some(c.storage(z)),
            Controller::Cascade(_) => None,
        }
    }

    pub fn spectrum(&self) -> &Spectrum {
        match self {
            Controller::Ph(c) => c.spectrum(),
            Controller::Cascade(c) => c.spectrum(),
        }
    }
}

/// Model, steady state and controller for one scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: EvcsModel,
    pub eq: Equilibrium,
    pub setpoints: EvcsSetpoints,
    pub controller: Controller,
}

pub fn prepare(sc: &Scenario) -> Result<Prepared> {
    sc.validate()?;
    let model = EvcsModel::new(sc.params)?;
    let mut eq = model.equilibrium_at(&sc.theta_bar)?;
    let mut setpoints = EvcsSetpoints::from_equilibrium(model.params(), &eq);
    let o = &sc.setpoints;
    setpoints.v_bat_ref = o.v_bat_ref.unwrap_or(setpoints.v_bat_ref);
    setpoints.v_dc_ref = o.v_dc_ref.unwrap_or(setpoints.v_dc_ref);
    setpoints.i_bat_ref = o.i_bat_ref.unwrap_or(setpoints.i_bat_ref);
    setpoints.i_sq_ref = o.i_sq_ref.unwrap_or(setpoints.i_sq_ref);
    setpoints.validate()?;
    let c = &sc.controller;
    let sys = model.system();
    let gains = || GainSet::scalar(3, c.gamma, c.delta).map(|g| g.with_delta_power(c.delta_power));
    let controller = match c.kind {
        ControllerKind::FixedTheta => Controller::Ph(ClosedLoop::fixed_theta(sys, &eq)?),
        ControllerKind::PhP | ControllerKind::PhPi => {
            let (p, pi) = ph_controllers_evcs_with(&model, &eq, c.gamma, c.delta, c.delta_power)?;
            Controller::Ph(if c.kind == ControllerKind::PhP { p } else { pi }.with_clamping(c.clamp))
        }
        ControllerKind::PhDae => Controller::Ph(ClosedLoop::ph_dae(sys, &eq, gains()?)?.with_clamping(c.clamp)),
        ControllerKind::Bass => Controller::Ph(ClosedLoop::bass(sys, &eq, c.alpha)?.with_clamping(c.clamp)),
        ControllerKind::CascadedPi => {
            let cfg = CascadeConfig { halve_duty: c.halve_duty, ..CascadeConfig::default() };
            let cl = CascadeLoop::new(&model, &setpoints, cfg)?.with_clamping(c.clamp);
            eq = cl.equilibrium().clone();
            Controller::Cascade(cl)
        }
    };
    Ok(Prepared { model, eq, setpoints, controller })
}

/// Plant state at `x̄` plus the scenario's initial offsets.
pub fn initial_plant_state(prep: &Prepared, sc: &Scenario) -> Vector {
    let mut x = prep.eq.x_bar.clone();
    for (name, off) in &sc.initial {
        let (i, f) = state_alias(prep.model.params(), name).expect("validated");
        x[i] += off / f;
    }
    x
}

/// Sampled closed-loop trajectory (extended states).
#[derive(Debug, Clone)]
pub struct Run {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub stats: OdeStats,
}

fn merge(into: &mut OdeStats, s: &OdeStats) {
    into.accepted += s.accepted;
    into.rejected += s.rejected;
    into.rhs_evals += s.rhs_evals;
    into.h_min = if into.accepted == s.accepted { s.h_min } else { into.h_min.min(s.h_min) };
    into.h_max = into.h_max.max(s.h_max);
}

/// Uniform sample grid `k / rate` on `[0, t_end]`.
pub fn sample_grid(t_end: f64, rate: f64) -> Vec<f64> {
    let n = (t_end * rate + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 / rate).collect()
}

/// `(state index, clamp value)` pairs active on `[a, b)`.
pub(crate) fn active_clamps(prep: &Prepared, sc: &Scenario, a: f64, b: f64) -> Vec<(usize, f64)> {
    sc.disturbances
        .iter()
        .filter(|d| d.start <= a && b <= d.end)
        .map(|d| {
            let (i, f) = state_alias(prep.model.params(), &d.quantity).expect("validated");
            (i, d.value / f)
        })
        .collect()
}

/// Segment boundaries of the disturbance windows within `[0, t_end]`.
pub(crate) fn breakpoints(sc: &Scenario) -> Vec<f64> {
    let mut bp = vec![0.0, sc.t_end];
    for d in &sc.disturbances {
        bp.push(d.start);
        bp.push(d.end);
    }
    bp.sort_by(f64::total_cmp);
    bp.dedup();
    bp
}

/// Averaged closed loop under `u ≡ ū`, integrated segment by segment across
/// disturbance windows.
pub fn simulate_averaged(prep: &Prepared, sc: &Scenario) -> Result<Run> {
    let opts = OdeOptions { rel_tol: sc.rel_tol, abs_tol: sc.abs_tol, ..OdeOptions::default() };
    let grid = sample_grid(sc.t_end, sc.sample_rate);
    let u = prep.eq.u_bar.clone();
    let mut z = prep.controller.extend(&initial_plant_state(prep, sc)).as_slice().to_vec();
    let bp = breakpoints(sc);
    let mut run = Run { times: vec![], states: vec![], stats: OdeStats::default() };
    let mut gi = 0;
    for w in bp.windows(2) {
        let (a, b) = (w[0], w[1]);
        let last = b == sc.t_end;
        let clamps = active_clamps(prep, sc, a, b);
        for (i, v) in &clamps {
            z[*i] = *v;
        }
        let mut samples = vec![];
        while gi < grid.len() && (grid[gi] < b || (last && grid[gi] <= b)) {
            samples.push(grid[gi]);
            gi += 1;
        }
        let wanted = samples.len();
        if samples.last() != Some(&b) {
            samples.push(b);
        }
        let ctrl = &prep.controller;
        let rhs = |_t: f64, s: &[f64], out: &mut [f64]| {
            ctrl.rhs_into(s, &u, out);
            for (i, _) in &clamps {
                out[*i] = 0.0;
            }
        };
        let traj = integrate_ode(rhs, &z, (a, b), &samples, &opts)?;
        merge(&mut run.stats, &traj.stats);
        z = traj.last().ok_or_else(|| Error::Validation("empty segment".into()))?.to_vec();
        for (t, s) in traj.times.iter().zip(&traj.states).take(wanted) {
            run.times.push(*t);
            run.states.push(Vector::from_column_slice(s));
        }
    }
    Ok(run)
}

/// Named columns over a run, time first.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }
}

/// Evaluates `outputs` at every sample; θ is the applied parameter.
pub fn tabulate(prep: &Prepared, times: &[f64], states: &[Vector], outputs: &[String]) -> Result<Table> {
    let qs = outputs.iter().map(|o| resolve(o)).collect::<Result<Vec<_>>>()?;
    let mut names = vec!["t".to_string()];
    let mut units = vec!["s".to_string()];
    for q in &qs {
        names.push(q.name().to_string());
        units.push(q.unit().to_string());
    }
    let p = prep.model.params();
    let rows = times
        .iter()
        .zip(states)
        .map(|(t, z)| {
            let x = z.rows(0, N).into_owned();
            let th = prep.controller.theta(z);
            let mut r = vec![*t];
            r.extend(qs.iter().map(|q| q.eval(p, &x, &th)));
            r
        })
        .collect();
    Ok(Table { names, units, rows })
}
