mod common;

use evcs_ph::numerics::{Mat, Vector};
use evcs_ph::ph::{interconnect, validate, PhSystem, PortLabeling, PortRole};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_ph(rng: &mut ChaCha8Rng, n: usize, m: usize) -> PhSystem {
    let rank = rng.gen_range(0..=n);
    PhSystem::new(common::skew(rng, n), common::psd(rng, n, rank), common::gaussian(rng, n, m), common::spd(rng, n))
        .unwrap()
}

fn cols(b: &Mat, idx: std::ops::Range<usize>) -> Mat {
    b.columns(idx.start, idx.len()).into_owned()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// The composite equals the two subsystems driven by
    /// `u_{o,1} = −y_{i,2}` and `u_{i,2} = y_{o,1}`.
    #[test]
    fn composite_matches_the_coupled_subsystems(seed in 0u64..100_000) {
        let mut rng = common::rng(seed);
        let (n1, n2) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let (e1, e2, c) = (rng.gen_range(0..=2), rng.gen_range(0..=2), rng.gen_range(1..=2));
        let s1 = random_ph(&mut rng, n1, e1 + c);
        let s2 = random_ph(&mut rng, n2, c + e2);
        let p1 = PortLabeling {
            in_ports: (0..e1).map(|i| (i, PortRole::Voltage)).collect(),
            out_ports: (e1..e1 + c).map(|i| (i, PortRole::Current)).collect(),
        };
        let p2 = PortLabeling {
            in_ports: (0..c).map(|i| (i, PortRole::Voltage)).collect(),
            out_ports: (c..c + e2).map(|i| (i, PortRole::Voltage)).collect(),
        };
        let comp = interconnect(&s1, &p1, &s2, &p2).unwrap();
        prop_assert_eq!((comp.n(), comp.m()), (n1 + n2, e1 + e2));

        let x = Vector::from_fn(n1 + n2, |_, _| rng.gen_range(-1.0..1.0));
        let u = Vector::from_fn(e1 + e2, |_, _| rng.gen_range(-1.0..1.0));
        let (x1, x2) = (x.rows(0, n1).into_owned(), x.rows(n1, n2).into_owned());
        let zero = Vector::zeros(0);
        let b1 = s1.b_at(&zero.clone().resize_vertically(n1, 0.0));
        let b2 = s2.b_at(&zero.resize_vertically(n2, 0.0));
        let y_o1 = cols(&b1, e1..e1 + c).transpose() * s1.grad_hamiltonian(&x1);
        let y_i2 = cols(&b2, 0..c).transpose() * s2.grad_hamiltonian(&x2);
        let mut u1 = Vector::zeros(e1 + c);
        u1.rows_mut(0, e1).copy_from(&u.rows(0, e1));
        u1.rows_mut(e1, c).copy_from(&(-&y_i2));
        let mut u2 = Vector::zeros(c + e2);
        u2.rows_mut(0, c).copy_from(&y_o1);
        u2.rows_mut(c, e2).copy_from(&u.rows(e1, e2));

        let got = comp.rhs(&x, &u).unwrap();
        let mut want = Vector::zeros(n1 + n2);
        want.rows_mut(0, n1).copy_from(&s1.rhs(&x1, &u1).unwrap());
        want.rows_mut(n1, n2).copy_from(&s2.rhs(&x2, &u2).unwrap());
        prop_assert!((&got - &want).amax() <= 1e-12 * want.amax().max(1.0));

        // lossless coupling: only the external ports appear in the balance
        prop_assert!(comp.power_balance(&x, &u).unwrap().holds(1e-10));
        prop_assert!(validate(&comp, &[x]).unwrap().is_valid());
    }
}

#[test]
fn port_count_mismatch_is_a_dimension_error() {
    let mut rng = common::rng(3);
    let s1 = random_ph(&mut rng, 2, 2);
    let s2 = random_ph(&mut rng, 2, 1);
    let p1 = PortLabeling { in_ports: vec![], out_ports: vec![(0, PortRole::Current), (1, PortRole::Current)] };
    let p2 = PortLabeling { in_ports: vec![(0, PortRole::Voltage)], out_ports: vec![] };
    assert!(matches!(interconnect(&s1, &p1, &s2, &p2), Err(evcs_ph::Error::Dimension(_))));
}

#[test]
fn uncovered_input_is_rejected() {
    let mut rng = common::rng(4);
    let s = random_ph(&mut rng, 2, 2);
    let p1 = PortLabeling { in_ports: vec![], out_ports: vec![(0, PortRole::Current)] };
    let p2 = PortLabeling { in_ports: vec![(0, PortRole::Voltage)], out_ports: vec![(1, PortRole::Voltage)] };
    assert!(matches!(interconnect(&s, &p1, &s, &p2), Err(evcs_ph::Error::Coupling(_))));
}
