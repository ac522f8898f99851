mod common;

use evcs_ph::evcs::{
    build_full, default_params, dq_forward, dq_inverse, printed_law_terms, EvcsModel, N, PHI_L, PHI_SD, PHI_SQ,
    PRINTED_LAW_FACTORS, Q_BDC, Q_DC,
};
use evcs_ph::numerics::{integrate_ode, Mat, OdeOptions, Vector};
use evcs_ph::ph::PhSystem;
use evcs_ph::sim::csv::format_value;
use evcs_ph::sim::switched::{PwmConfig, SwitchState};
use evcs_ph::sim::Scenario;
use proptest::prelude::*;

fn station_state(scale: [f64; N]) -> Vector {
    let eq = EvcsModel::new(default_params()).unwrap().equilibrium().unwrap();
    Vector::from_fn(N, |i, _| eq.x_bar[i] * (1.0 + scale[i]))
}

fn unit11() -> impl Strategy<Value = [f64; N]> {
    proptest::array::uniform11(-1.0f64..1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn station_power_balance(s in unit11(), d in 0.0f64..1.0, md in -1.0f64..1.0, mq in -1.0f64..1.0,
                              u in proptest::array::uniform3(-600.0f64..600.0)) {
        let sys = build_full(&default_params()).unwrap();
        let th = Vector::from_vec(vec![d, md, mq]);
        let frozen = sys.frozen(&th).unwrap();
        let x = station_state(s);
        let u = Vector::from_row_slice(&u);
        let pb = frozen.power_balance(&x, &u).unwrap();
        prop_assert!(pb.holds(1e-9), "{pb:?}");
        // frozen and averaged right-hand sides agree
        let a = frozen.rhs(&x, &u).unwrap();
        let b = sys.rhs(&x, &th, &u).unwrap();
        prop_assert!((&a - &b).amax() <= 1e-9 * a.amax().max(1.0));
    }

    #[test]
    fn rhs_is_affine_in_theta(s in unit11(), t1 in proptest::array::uniform3(-1.0f64..1.0),
                              t2 in proptest::array::uniform3(-1.0f64..1.0), w in 0.0f64..1.0) {
        let sys = build_full(&default_params()).unwrap();
        let x = station_state(s);
        let u = Vector::from_vec(vec![490.0, 488.0, 0.0]);
        let (a, b) = (Vector::from_row_slice(&t1), Vector::from_row_slice(&t2));
        let mix = &a * w + &b * (1.0 - w);
        let lhs = sys.rhs(&x, &mix, &u).unwrap();
        let rhs = sys.rhs(&x, &a, &u).unwrap() * w + sys.rhs(&x, &b, &u).unwrap() * (1.0 - w);
        prop_assert!((&lhs - &rhs).amax() <= 1e-9 * lhs.amax().max(1.0));
        let bil = sys.rhs_bilinear(&x, &mix, &u).unwrap();
        prop_assert!((&lhs - &bil).amax() <= 1e-9 * lhs.amax().max(1.0));
    }

    #[test]
    fn d_cal_sparsity(s in unit11()) {
        let sys = build_full(&default_params()).unwrap();
        let x = station_state(s);
        let dc = sys.d_cal(&x).unwrap();
        let support = [[PHI_L, Q_BDC], [PHI_SD, Q_DC], [PHI_SQ, Q_DC]];
        for (j, rows) in support.iter().enumerate() {
            for i in 0..N {
                if !rows.contains(&i) {
                    prop_assert_eq!(dc[(i, j)], 0.0);
                }
            }
            // column j is D_j H x
            let col = sys.d_j(j) * sys.h() * &x;
            prop_assert!((dc.column(j) - col).amax() <= 1e-12 * dc.amax());
        }
    }

    #[test]
    fn printed_laws_match_the_generic_law(s in unit11()) {
        let model = EvcsModel::new(default_params()).unwrap();
        let eq = model.equilibrium().unwrap();
        let sys = model.system();
        let x = station_state(s);
        let dcal = sys.d_cal(&eq.x_bar).unwrap();
        let grad = sys.h() * (&x - &eq.x_bar);
        let generic = -(dcal.transpose() * grad);
        let printed = printed_law_terms(model.params(), &eq, &x);
        for j in 0..3 {
            let want = PRINTED_LAW_FACTORS[j] * printed[j];
            prop_assert!((generic[j] - want).abs() <= 1e-9 * want.abs().max(1.0), "row {j}: {} vs {want}", generic[j]);
        }
    }

    #[test]
    fn lossless_station_conserves_energy(s in unit11(), th in proptest::array::uniform3(-1.0f64..1.0)) {
        let sys = build_full(&default_params()).unwrap();
        let th = Vector::from_row_slice(&th);
        let j = sys.j_at(&th);
        let lossless = PhSystem::new(j.clone(), Mat::zeros(N, N), Mat::zeros(N, 1), sys.h().clone()).unwrap();
        let x0 = station_state(s);
        let u = Vector::zeros(1);
        let opts = OdeOptions { rel_tol: 1e-10, abs_tol: 1e-14, ..OdeOptions::default() };
        let traj = integrate_ode(
            |_t, x, out| out.copy_from_slice(lossless.rhs(&Vector::from_column_slice(x), &u).unwrap().as_slice()),
            x0.as_slice(),
            (0.0, 2e-3),
            &[1e-3, 2e-3],
            &opts,
        )
        .unwrap();
        let h0 = lossless.hamiltonian(&x0);
        for x in &traj.states {
            let h = lossless.hamiltonian(&Vector::from_column_slice(x));
            prop_assert!((h - h0).abs() <= 1e-6 * h0, "H drifted from {h0} to {h}");
        }
    }

    #[test]
    fn park_transform_preserves_power(v in proptest::array::uniform2(-500.0f64..500.0),
                                      i in proptest::array::uniform2(-300.0f64..300.0), angle in 0.0f64..7.0) {
        let va = dq_inverse((v[0], v[1]), angle);
        let ia = dq_inverse((i[0], i[1]), angle);
        let p_abc: f64 = va.iter().zip(&ia).map(|(a, b)| a * b).sum();
        let p_dq = 1.5 * (v[0] * i[0] + v[1] * i[1]);
        prop_assert!((p_abc - p_dq).abs() <= 1e-9 * p_dq.abs().max(1.0));
        let (d, q) = dq_forward(va, angle);
        prop_assert!((d - v[0]).abs() < 1e-9 && (q - v[1]).abs() < 1e-9);
    }

    #[test]
    fn clamp_lands_in_the_admissible_set(t in proptest::array::uniform3(-3.0f64..3.0)) {
        let sys = build_full(&default_params()).unwrap();
        let mut c = t;
        let active = sys.clamp(&mut c);
        let cv = Vector::from_row_slice(&c);
        prop_assert!(sys.in_bounds(&cv));
        prop_assert!((c[1].hypot(c[2])) <= 1.0 + 1e-12);
        let tv = Vector::from_row_slice(&t);
        prop_assert_eq!(active, !sys.in_bounds(&tv));
        if !active {
            prop_assert_eq!(c, t);
        }
        let mut again = c;
        prop_assert!(!sys.clamp(&mut again));
        prop_assert_eq!(again, c);
    }

    #[test]
    fn pwm_carrier_average_equals_the_command(d in 0.0f64..1.0, r in 0.0f64..0.95, phi in 0.0f64..std::f64::consts::TAU, angle in 0.0f64..std::f64::consts::TAU) {
        let cfg = PwmConfig::new(1e4);
        let theta = [d, r * phi.cos(), r * phi.sin()];
        let steps = 4000;
        let mut mean = [0.0; 3];
        for k in 0..steps {
            let t = (k as f64 + 0.5) / (steps as f64 * cfg.f_sw);
            let v = SwitchState::from_command(&theta, angle, t, &cfg).theta(angle);
            for i in 0..3 {
                mean[i] += v[i] / steps as f64;
            }
        }
        for i in 0..3 {
            prop_assert!((mean[i] - theta[i]).abs() < 2e-3, "channel {i}: {} vs {}", mean[i], theta[i]);
        }
    }

    #[test]
    fn csv_text_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
        let s = format_value(v);
        let back: f64 = s.parse().unwrap();
        prop_assert_eq!(format_value(back), s);
        prop_assert!((back - v).abs() <= 5e-12 * v.abs());
    }

    #[test]
    fn scenario_canonical_form_is_a_fixed_point(gamma in 1e2f64..1e7, delta in 0.1f64..5.0, t_end in 1e-3f64..1.0,
                                                off in -100.0f64..100.0, kind in 0usize..4) {
        let kinds = ["ph_p", "ph_dae", "ph_pi", "cascaded_pi"];
        let text = format!(
            "[model]\nkind = averaged\nt_end = {t_end}\n[controller]\nkind = {}\ngamma = {gamma}\ndelta = {delta}\n[initial]\nv_dc = {off}\n[outputs]\nquantities = v_dc, m_d\n",
            kinds[kind]
        );
        let sc = Scenario::parse(&text).unwrap();
        let canon = sc.canonical();
        let back = Scenario::parse(&canon).unwrap();
        prop_assert_eq!(back.canonical(), canon);
        prop_assert_eq!(back.hash(), sc.hash());
        prop_assert_eq!(back.controller.gamma.to_bits(), gamma.to_bits());
    }

    #[test]
    fn random_steady_states_are_stationary(seed in 0u64..10_000) {
        let mut rng = common::rng(seed);
        let (sys, eq) = common::random_system(&mut rng);
        let r = sys.rhs(&eq.x_bar, &eq.theta_bar, &eq.u_bar).unwrap();
        prop_assert!(r.amax() <= eq.tolerance(&sys));
    }
}
