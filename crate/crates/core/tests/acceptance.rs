//! Acceptance checks, one line per criterion. Run with
//! `cargo test -p evcs-ph --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use evcs_ph::control::{bass_design, extended_dissipation_check, ClosedLoop, GainSet, Variant};
use evcs_ph::evcs::{build_full, default_params, EvcsModel, Quantity, N, Q_DC, THETA_BAR};
use evcs_ph::numerics::{
    eigenvalues, integrate_ode, is_hurwitz, lyapunov_residual, solve_lyapunov, Mat, OdeOptions, Vector,
};
use evcs_ph::ph::validate;
use evcs_ph::sim::metrics::{overshoot, settling_time, settling_time_after, sup_distance, SETTLING_BAND};
use evcs_ph::sim::{
    period_average_table, prepare, simulate_averaged, simulate_switched, tabulate, tabulate_switched, Scenario,
};
use num_complex::Complex64;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const RECOVERY: &str = "[model]
kind = averaged
t_end = 0.3
sample_rate = 1e5
[controller]
kind = ph_pi
gamma = 1e5
delta = 1
[initial]
i_L = 50
v_bat = 50
v_dc = 50
i_sq = 75
[outputs]
quantities = v_dc, i_gq
";

const BUS_SAG: &str = "[model]
kind = switched
t_end = 1.5
f_sw = 1e4
[controller]
kind = ph_pi
gamma = 3e6
delta = 1.5
[disturbance.1]
quantity = v_dc
start = 0.02
end = 0.12
value = 400
[outputs]
quantities = v_dc, v_bat, i_bat
";

fn scenario(base: &str, edits: &[(&str, &str)]) -> Scenario {
    let mut text = base.to_string();
    for (k, v) in edits {
        let (section, k) = k.split_once('.').expect("section.key");
        let from = text.find(&format!("[{section}]")).expect("section present");
        let key = format!("\n{k} = ");
        let start = text[from..].find(&key).map(|i| from + i + key.len()).expect("key present");
        let end = start + text[start..].find('\n').unwrap();
        text.replace_range(start..end, v);
    }
    Scenario::parse(&text).expect("scenario parses")
}

fn c1_structure() -> Outcome {
    let p = default_params();
    let sys = build_full(&p).map_err(err)?;
    let model = EvcsModel::new(p).map_err(err)?;
    let x_bar = model.equilibrium().map_err(err)?.x_bar;
    let mut rng = common::rng(1);
    let (mut skew, mut min_r) = (0.0f64, f64::INFINITY);
    for _ in 0..1000 {
        let theta =
            Vector::from_vec(vec![rng.gen_range(0.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)]);
        let x = Vector::from_fn(N, |i, _| x_bar[i] * rng.gen_range(-2.0..2.0));
        let rep = validate(&sys.frozen(&theta).map_err(err)?, &[x]).map_err(err)?;
        skew = skew.max(rep.worst_skew_j);
        min_r = min_r.min(rep.min_dissipation_eig);
    }
    ensure(skew <= 1e-9 && min_r >= -1e-9, format!("skew defect {skew:.2e}, min R eigenvalue {min_r:.2e}"))?;
    Ok(format!("1000 states: skew defect {skew:.1e}, min R eigenvalue {min_r:.1e}"))
}

fn c2_equilibrium() -> Outcome {
    let model = EvcsModel::new(default_params()).map_err(err)?;
    let eq = model.equilibrium().map_err(err)?;
    let p = model.params();
    let sys = model.system();
    let res = (sys.d_matrix(&eq.theta_bar).map_err(err)? * sys.h() * &eq.x_bar + sys.b() * &eq.u_bar).amax();
    let v = |q: Quantity| q.eval(p, &eq.x_bar, &eq.theta_bar);
    let v_dc = eq.x_bar[Q_DC] / p.c_dc;
    let v_bat = v(Quantity::Alias(1));
    let boost = (THETA_BAR[0] * v_dc - v_bat).abs() / v_bat;
    let v_sd = v(Quantity::VSd);
    let sd = (v_sd - 326.7).abs() / 326.7;
    ensure(res < 1e-9 && boost < 1e-3 && sd < 1e-3, format!("residual {res:.2e}, boost {boost:.2e}, v_sd {v_sd}"))?;
    Ok(format!("residual {res:.1e}, d*v_dc vs v_bat {:.3}%, v_sd = {v_sd:.3} V", 100.0 * boost))
}

fn c3_hurwitz() -> Outcome {
    let model = EvcsModel::new(default_params()).map_err(err)?;
    let eq = model.equilibrium().map_err(err)?;
    let sys = model.system();
    let d = sys.d_matrix(&eq.theta_bar).map_err(err)?;
    ensure(is_hurwitz(&d, 0.0).map_err(err)?, "D(θ̄) is not Hurwitz".into())?;
    let mut worst = f64::NEG_INFINITY;
    for gamma in [1e3, 1e5, 3e6] {
        for v in [Variant::FixedTheta, Variant::PhP, Variant::PhDae, Variant::PhPi] {
            let cl = ClosedLoop::build(v, sys, &eq, GainSet::scalar(3, gamma, 1.0).map_err(err)?)
                .map_err(|e| format!("{} at γ = {gamma:e}: {e}", v.name()))?;
            let re = eigenvalues(cl.jacobian()).map_err(err)?.max_real_part.max(cl.spectrum().max_real_part);
            ensure(re < 0.0, format!("{} at γ = {gamma:e}: max real part {re:e}", v.name()))?;
            worst = worst.max(re);
        }
    }
    Ok(format!("D(θ̄) Hurwitz; 12 closed loops, largest real part {worst:.2e}"))
}

fn c4_certificates() -> Outcome {
    let mut rng = common::rng(4);
    let mut built = 0;
    for case in 0..200 {
        let (sys, eq) = common::random_system(&mut rng);
        let k = sys.k();
        let gamma = 10f64.powf(rng.gen_range(-1.0..2.0));
        let delta = rng.gen_range(0.2..3.0);
        for v in [Variant::PhP, Variant::PhDae, Variant::PhPi] {
            let gains = GainSet::new(common::spd(&mut rng, k) * gamma, delta).map_err(err)?;
            let cl = ClosedLoop::build(v, &sys, &eq, gains).map_err(|e| format!("case {case} {}: {e}", v.name()))?;
            let z0 = cl.equilibrium_state();
            let r = cl.rhs(&z0, &eq.u_bar).map_err(err)?.amax();
            ensure(r < 1e-9, format!("case {case} {}: rhs at equilibrium {r:e}", v.name()))?;
            ensure(cl.spectrum().max_real_part < 0.0, format!("case {case} {}: not Hurwitz", v.name()))?;
            // near-equilibrium states whose θ stays admissible
            let mut scale = 1e-3 * z0.amax().max(1.0);
            let mut samples: Vec<Vector> = Vec::with_capacity(100);
            while samples.len() < 100 {
                let z = &z0 + Vector::from_fn(z0.len(), |_, _| rng.gen_range(-scale..scale));
                if sys.in_bounds(&cl.theta(&z)) {
                    samples.push(z);
                } else {
                    scale *= 0.9;
                }
            }
            let rep = extended_dissipation_check(&cl, &samples).map_err(err)?;
            ensure(
                rep.passed(),
                format!("case {case} {}: dissipation min eigenvalue {:e}", v.name(), rep.min_eigenvalue),
            )?;
            built += 1;
        }
    }
    Ok(format!("{built} controllers on 200 systems, zero failures"))
}

fn c5_lyapunov() -> Outcome {
    let mut notes = vec![];
    for kind in ["ph_p", "ph_dae", "ph_pi"] {
        let sc = scenario(RECOVERY, &[("controller.kind", kind)]);
        let prep = prepare(&sc).map_err(err)?;
        let run = simulate_averaged(&prep, &sc).map_err(err)?;
        let s: Vec<f64> = run.states.iter().map(|z| prep.controller.storage(z).unwrap()).collect();
        let tol = 1e-7 * s[0];
        let worst = s.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        ensure(worst <= tol, format!("{kind}: storage rose by {worst:e} (allowed {tol:e})"))?;
        let tab = tabulate(&prep, &run.times, &run.states, &sc.outputs).map_err(err)?;
        let ref_v = prep.setpoints.v_dc_ref;
        let ts = settling_time(&tab.times(), &tab.column("v_dc").unwrap(), ref_v, SETTLING_BAND * ref_v)
            .ok_or(format!("{kind}: v_dc never settles"))?;
        ensure(sc.t_end >= 4.0 * ts, format!("{kind}: horizon {} shorter than 4 settling times ({ts})", sc.t_end))?;
        let x_end = run.states.last().unwrap().rows(0, N).into_owned();
        let rel = (&x_end - &prep.eq.x_bar).norm() / prep.eq.x_bar.norm();
        ensure(rel < 1e-3, format!("{kind}: final error {rel:e}"))?;
        notes.push(format!("{kind} settles {:.1} ms, end error {rel:.1e}", ts * 1e3));
    }
    Ok(notes.join("; "))
}

/// `(overshoot of i_gq, settling time of v_dc)` on the deviation scenario.
fn recovery_metrics(kind: &str, gamma: f64, delta: f64) -> Result<(f64, f64), String> {
    let (g, d) = (format!("{gamma:e}"), format!("{delta}"));
    let sc = scenario(
        RECOVERY,
        &[("controller.kind", kind), ("controller.gamma", &g), ("controller.delta", &d), ("model.t_end", "0.2")],
    );
    let prep = prepare(&sc).map_err(err)?;
    let run = simulate_averaged(&prep, &sc).map_err(err)?;
    let tab = tabulate(&prep, &run.times, &run.states, &sc.outputs).map_err(err)?;
    let p = prep.model.params();
    let i_gq = Quantity::Alias(10).eval(p, &prep.eq.x_bar, &prep.eq.theta_bar);
    let v_dc = prep.setpoints.v_dc_ref;
    let ov = overshoot(&tab.column("i_gq").unwrap(), i_gq);
    let ts =
        settling_time(&tab.times(), &tab.column("v_dc").unwrap(), v_dc, SETTLING_BAND * v_dc).unwrap_or(f64::INFINITY);
    Ok((ov, ts))
}

fn c6_ranking() -> Outcome {
    let gamma = 3e6;
    let p = recovery_metrics("ph_p", gamma, 1.0)?;
    let dae = recovery_metrics("ph_dae", gamma, 1.0)?;
    let pi = recovery_metrics("ph_pi", gamma, 1.5)?;
    let fmt = |m: (f64, f64)| format!("{:.2} A/{:.2} ms", m.0, m.1 * 1e3);
    ensure(
        pi.0 < p.0.min(dae.0) && pi.1 < p.1.min(dae.1),
        format!("γ = 3e6: P {}, DAE {}, PI {}", fmt(p), fmt(dae), fmt(pi)),
    )?;
    let low = recovery_metrics("ph_pi", 1e5, 1.5)?;
    let low_p = recovery_metrics("ph_p", 1e5, 1.0)?;
    Ok(format!(
        "γ = 3e6: PI {} vs P {}, DAE {} (γ = 1e5 for reference: PI {}, P {})",
        fmt(pi),
        fmt(p),
        fmt(dae),
        fmt(low),
        fmt(low_p)
    ))
}

fn c7_bass() -> Outcome {
    let mut rng = common::rng(7);
    let (mut worst_res, mut worst_re) = (0.0f64, f64::NEG_INFINITY);
    for case in 0..100 {
        let (a, d) = common::random_pair(&mut rng);
        let des = bass_design(&a, &d, None).map_err(|e| format!("case {case}: {e}"))?;
        let inv = des.k_hat.clone().try_inverse().ok_or(format!("case {case}: K̂ singular"))?;
        let re = eigenvalues(&(&a - &d * d.transpose() * inv)).map_err(err)?.max_real_part;
        let shifted = &a + Mat::identity(a.nrows(), a.nrows()) * des.alpha;
        let res = lyapunov_residual(&(-&shifted), &des.k_hat, &(&d * d.transpose() * 2.0));
        ensure(res < 1e-10 && re < 0.0, format!("case {case}: residual {res:e}, max real part {re:e}"))?;
        worst_res = worst_res.max(res);
        worst_re = worst_re.max(re);
    }
    Ok(format!("100 pairs: worst residual {worst_res:.1e}, largest real part {worst_re:.2e}"))
}

/// Relative sup distance between the period-averaged switched run and the
/// equally averaged averaged-model run, max over `v_dc, v_bat, i_bat`.
fn fidelity(f_sw: f64) -> Result<f64, String> {
    let f = format!("{f_sw:e}");
    let sc = scenario(BUS_SAG, &[("model.f_sw", &f), ("model.t_end", "0.3")]);
    let prep = prepare(&sc).map_err(err)?;
    let sw = simulate_switched(&prep, &sc).map_err(err)?;
    let sw = period_average_table(&tabulate_switched(&prep, &sw, &sc.outputs).map_err(err)?, f_sw).map_err(err)?;
    let mut avg_sc = sc.clone();
    avg_sc.model = evcs_ph::sim::ModelKind::Averaged;
    avg_sc.sample_rate = 20.0 * f_sw;
    let avg = simulate_averaged(&prep, &avg_sc).map_err(err)?;
    let avg = period_average_table(&tabulate(&prep, &avg.times, &avg.states, &sc.outputs).map_err(err)?, f_sw)
        .map_err(err)?;
    let refs = [prep.setpoints.v_dc_ref, prep.setpoints.v_bat_ref, prep.setpoints.i_bat_ref];
    let mut d = 0.0f64;
    for (q, r) in ["v_dc", "v_bat", "i_bat"].iter().zip(refs) {
        let dist =
            sup_distance(&sw.times(), &sw.column(q).unwrap(), &avg.times(), &avg.column(q).unwrap()).map_err(err)?;
        d = d.max(dist / r.abs());
    }
    Ok(d)
}

fn c8_averaging() -> Outcome {
    let d: Vec<f64> = std::thread::scope(|s| {
        let hs: Vec<_> = [5e3, 1e4, 2e4].iter().map(|f| s.spawn(move || fidelity(*f))).collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect::<Result<Vec<_>, _>>()
    })?;
    ensure(d[1] < d[0] && d[2] < d[1], format!("distances {d:?} do not decrease"))?;
    Ok(format!("relative sup distance {:.4} / {:.4} / {:.4} at 5 / 10 / 20 kHz", d[0], d[1], d[2]))
}

/// Post-release settling times of `v_dc, v_bat, i_bat` (±2 %).
fn recovery(kind: &str) -> Result<[f64; 3], String> {
    let sc = scenario(BUS_SAG, &[("controller.kind", kind)]);
    let prep = prepare(&sc).map_err(err)?;
    let run = simulate_switched(&prep, &sc).map_err(err)?;
    let tab =
        period_average_table(&tabulate_switched(&prep, &run, &sc.outputs).map_err(err)?, sc.pwm.f_sw).map_err(err)?;
    let refs = [prep.setpoints.v_dc_ref, prep.setpoints.v_bat_ref, prep.setpoints.i_bat_ref];
    let mut out = [0.0; 3];
    for (i, (q, r)) in ["v_dc", "v_bat", "i_bat"].iter().zip(refs).enumerate() {
        out[i] = settling_time_after(&tab.times(), &tab.column(q).unwrap(), r, 0.02 * r.abs(), 0.12)
            .ok_or(format!("{kind}: {q} does not return to ±2 % of {r:.2}"))?;
    }
    Ok(out)
}

fn c9_disturbance() -> Outcome {
    let (pi, cas) = std::thread::scope(|s| {
        let a = s.spawn(|| recovery("ph_pi"));
        let b = s.spawn(|| recovery("cascaded_pi"));
        (a.join().unwrap(), b.join().unwrap())
    });
    let (pi, cas) = (pi?, cas?);
    let f = |t: [f64; 3]| format!("{:.3}/{:.3}/{:.3} s", t[0], t[1], t[2]);
    ensure(pi[0] <= cas[0], format!("pH PI v_dc settles at {:.3} s, cascaded at {:.3} s", pi[0], cas[0]))?;
    Ok(format!("v_dc/v_bat/i_bat in band from pH PI {}, cascaded PI {}", f(pi), f(cas)))
}

fn c10_kernels() -> Outcome {
    let mut rng = common::rng(10);
    let mut lyap = 0.0f64;
    let mut trace_det = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=12);
        let a = common::gaussian(&mut rng, n, n) - Mat::identity(n, n) * (n as f64);
        let q = common::spd(&mut rng, n);
        let x = solve_lyapunov(&a, &q).map_err(err)?;
        lyap = lyap.max(lyapunov_residual(&a, &x, &q));
        let m = common::gaussian(&mut rng, n, n);
        let ev = eigenvalues(&m).map_err(err)?.eigenvalues;
        let sum: Complex64 = ev.iter().sum();
        let prod: Complex64 = ev.iter().product();
        let tr = m.trace();
        let det = m.determinant();
        trace_det =
            trace_det.max((sum - tr).norm() / tr.abs().max(1.0)).max((prod - det).norm() / det.abs().max(1e-300));
    }
    ensure(lyap < 1e-10, format!("Lyapunov residual {lyap:e}"))?;
    ensure(trace_det < 1e-8, format!("trace/determinant defect {trace_det:e}"))?;

    let opts = OdeOptions { rel_tol: 1e-8, abs_tol: 1e-12, ..OdeOptions::default() };
    let mut ode = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(1..=8);
        let a = common::gaussian(&mut rng, n, n) - Mat::identity(n, n) * 0.5;
        let x0 = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let t1 = 2.0;
        let traj = integrate_ode(
            |_t, x, out| out.copy_from_slice((&a * Vector::from_column_slice(x)).as_slice()),
            x0.as_slice(),
            (0.0, t1),
            &[t1],
            &opts,
        )
        .map_err(err)?;
        let exact = (&a * t1).exp() * &x0;
        let got = Vector::from_column_slice(traj.last().unwrap());
        ode = ode.max((got - &exact).amax() / exact.amax().max(1e-3));
    }
    ensure(ode < 10.0 * opts.rel_tol, format!("ODE vs expm error {ode:e}"))?;

    let model = EvcsModel::new(default_params()).map_err(err)?;
    let eq = model.equilibrium().map_err(err)?;
    let mut jac = 0.0f64;
    let mut check = |cl: &ClosedLoop| {
        let a = cl.jacobian();
        let f = cl.numeric_jacobian();
        let e = (a - f).amax() / a.amax();
        jac = jac.max(e);
    };
    for gamma in [1e3, 1e5, 3e6] {
        for v in [Variant::FixedTheta, Variant::PhP, Variant::PhDae, Variant::PhPi] {
            check(
                &ClosedLoop::build(v, model.system(), &eq, GainSet::scalar(3, gamma, 1.5).map_err(err)?)
                    .map_err(err)?,
            );
        }
    }
    for _ in 0..20 {
        let (sys, e) = common::random_system(&mut rng);
        for v in [Variant::PhP, Variant::PhDae, Variant::PhPi] {
            check(&ClosedLoop::build(v, &sys, &e, GainSet::scalar(sys.k(), 2.0, 0.7).map_err(err)?).map_err(err)?);
        }
    }
    ensure(jac < 1e-6, format!("Jacobian vs finite differences {jac:e}"))?;
    Ok(format!("Lyapunov {lyap:.1e}, trace/det {trace_det:.1e}, ODE/expm {ode:.1e}, Jacobians {jac:.1e}"))
}

fn main() {
    let checks: [(u32, &str, Duration, fn() -> Outcome); 10] = [
        (1, "structural pH validity", Duration::from_secs(1), c1_structure),
        (2, "equilibrium reproduction", Duration::from_secs(1), c2_equilibrium),
        (3, "Hurwitz certificates", Duration::from_secs(5), c3_hurwitz),
        (4, "controller certificate suite", Duration::from_secs(60), c4_certificates),
        (5, "dissipation / Lyapunov decrease", Duration::from_secs(30), c5_lyapunov),
        (6, "controller ranking", Duration::from_secs(30), c6_ranking),
        (7, "Bass design", Duration::from_secs(30), c7_bass),
        (8, "averaging fidelity", Duration::from_secs(300), c8_averaging),
        (9, "disturbance rejection", Duration::from_secs(300), c9_disturbance),
        (10, "numerical kernel oracles", Duration::from_secs(60), c10_kernels),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (id, name, budget, f) in checks {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t0 = Instant::now();
        let out = f();
        let dt = t0.elapsed();
        let (ok, detail) = match out {
            Ok(d) if dt <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {detail} ({:.2} s, budget {} s)",
            if ok { "PASS" } else { "FAIL" },
            dt.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
