use crate::error::{Error, Result};

/// Tolerances and limits for [`integrate_ode`].
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rel_tol: 1e-8, abs_tol: 1e-10, h0: None, h_max: f64::INFINITY, max_steps: 10_000_000 }
    }
}

/// Solver bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub h_min: f64,
    pub h_max: f64,
    /// Accepted step sizes, in order.
    pub steps: Vec<f64>,
    /// Scaled local error estimate of each accepted step (≤ 1).
    pub errors: Vec<f64>,
}

/// Time-stamped state samples with solver metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(|v| v.as_slice())
    }

    /// Appends `other`, dropping its first sample when it repeats our last time.
    pub fn append(&mut self, other: Trajectory) {
        let skip = match (self.times.last(), other.times.first()) {
            (Some(a), Some(b)) if a == b => 1,
            _ => 0,
        };
        self.times.extend(other.times.into_iter().skip(skip));
        self.states.extend(other.states.into_iter().skip(skip));
        self.stats.accepted += other.stats.accepted;
        self.stats.rejected += other.stats.rejected;
        self.stats.rhs_evals += other.stats.rhs_evals;
        self.stats.steps.extend(other.stats.steps);
        self.stats.errors.extend(other.stats.errors);
        self.stats.h_min =
            if self.stats.h_min == 0.0 { other.stats.h_min } else { self.stats.h_min.min(other.stats.h_min) };
        self.stats.h_max = self.stats.h_max.max(other.stats.h_max);
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn check_finite(t: f64, x: &[f64], dx: &[f64]) -> Result<()> {
    if dx.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t, state: x.to_vec() });
    }
    Ok(())
}

/// Integrates `ẋ = rhs(t, x)` over `t_span` with the Dormand–Prince 5(4)
/// pair and returns the solution at `samples` (dense output). With no
/// samples, every accepted step is recorded.
pub fn integrate_ode<F>(
    mut rhs: F,
    x0: &[f64],
    t_span: (f64, f64),
    samples: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let (t0, t1) = t_span;
    if !(t1 >= t0) {
        return Err(Error::Parameter(format!("empty time span [{t0}, {t1}]")));
    }
    let mut traj = Trajectory::default();
    let record_all = samples.is_empty();
    let mut next = 0usize;
    while next < samples.len() && samples[next] < t0 {
        next += 1;
    }
    let emit = |traj: &mut Trajectory, t: f64, x: Vec<f64>| {
        traj.times.push(t);
        traj.states.push(x);
    };

    let mut t = t0;
    let mut x = x0.to_vec();
    let mut k1 = vec![0.0; n];
    rhs(t, &x, &mut k1);
    traj.stats.rhs_evals += 1;
    check_finite(t, &x, &k1)?;

    if record_all {
        emit(&mut traj, t, x.clone());
    } else {
        while next < samples.len() && samples[next] == t0 {
            emit(&mut traj, t0, x.clone());
            next += 1;
        }
    }
    if t1 == t0 {
        return Ok(traj);
    }

    let sc = |a: f64, b: f64| opts.abs_tol + opts.rel_tol * a.abs().max(b.abs());
    let span = t1 - t0;
    let mut h = match opts.h0 {
        Some(h) => h,
        None => {
            // Hairer's starting step heuristic
            let d0 = (x.iter().map(|v| (v / sc(*v, *v)).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
            let d1 = (k1.iter().zip(&x).map(|(k, v)| (k / sc(*v, *v)).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            let h0 = h0.min(span);
            let xe: Vec<f64> = x.iter().zip(&k1).map(|(v, k)| v + h0 * k).collect();
            let mut f1 = vec![0.0; n];
            rhs(t + h0, &xe, &mut f1);
            traj.stats.rhs_evals += 1;
            let d2 = (f1.iter().zip(&k1).zip(&x).map(|((a, b), v)| ((a - b) / sc(*v, *v)).powi(2)).sum::<f64>()
                / n.max(1) as f64)
                .sqrt()
                / h0;
            let dm = d1.max(d2);
            let h1 = if dm <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dm).powf(0.2) };
            (100.0 * h0).min(h1)
        }
    };
    h = h.min(opts.h_max).min(span);

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut x1 = vec![0.0; n];
    let mut steps = 0usize;
    let mut last_rejected = false;

    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::StepUnderflow { t, h });
        }
        steps += 1;
        let last = t + h >= t1 || (t1 - (t + h)) < 1e-12 * span;
        if last {
            h = t1 - t;
        }
        if h <= 1e-14 * t.abs().max(span) {
            return Err(Error::StepUnderflow { t, h });
        }
        for i in 0..n {
            y[i] = x[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, &y, &mut k2);
        for i in 0..n {
            y[i] = x[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, &y, &mut k3);
        for i in 0..n {
            y[i] = x[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, &y, &mut k4);
        for i in 0..n {
            y[i] = x[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, &y, &mut k5);
        for i in 0..n {
            y[i] = x[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let tn = if last { t1 } else { t + h };
        rhs(tn, &y, &mut k6);
        for i in 0..n {
            x1[i] = x[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(tn, &x1, &mut k7);
        traj.stats.rhs_evals += 6;
        let mut err = 0.0;
        let mut finite = true;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let s = sc(x[i], x1[i]);
            err += (e / s) * (e / s);
            finite &= x1[i].is_finite() && k7[i].is_finite();
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !finite || !err.is_finite() {
            if h < 1e-12 * span {
                return Err(Error::NonFinite { t, state: x.clone() });
            }
            h *= 0.1;
            traj.stats.rejected += 1;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            // dense output on (t, tn]
            let emit_from = |traj: &mut Trajectory, next: &mut usize| {
                while *next < samples.len() && samples[*next] <= tn {
                    let s = (samples[*next] - t) / h;
                    let v: Vec<f64> = (0..n)
                        .map(|i| {
                            let r1 = x[i];
                            let r2 = x1[i] - x[i];
                            let r3 = h * k1[i] - r2;
                            let r4 = r2 - h * k7[i] - r3;
                            let r5 = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                            r1 + s * (r2 + (1.0 - s) * (r3 + s * (r4 + (1.0 - s) * r5)))
                        })
                        .collect();
                    traj.times.push(samples[*next]);
                    traj.states.push(if samples[*next] == tn { x1.clone() } else { v });
                    *next += 1;
                }
            };
            if !record_all {
                emit_from(&mut traj, &mut next);
            }
            traj.stats.accepted += 1;
            traj.stats.steps.push(h);
            traj.stats.errors.push(err);
            traj.stats.h_min = if traj.stats.accepted == 1 { h } else { traj.stats.h_min.min(h) };
            traj.stats.h_max = traj.stats.h_max.max(h);
            t = tn;
            std::mem::swap(&mut x, &mut x1);
            std::mem::swap(&mut k1, &mut k7);
            if record_all {
                emit(&mut traj, t, x.clone());
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            h = (h * fac).min(opts.h_max);
        } else {
            traj.stats.rejected += 1;
            last_rejected = true;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    Ok(traj)
}
