#![allow(dead_code)]

use evcs_ph::averaged::{AveragedPhSystem, Equilibrium};
use evcs_ph::control::rank_condition;
use evcs_ph::numerics::{Mat, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn skew(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let a = gaussian(rng, n, n);
    &a - a.transpose()
}

/// `L Lᵀ` with `L` of `rank` columns.
pub fn psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Mat {
    let l = gaussian(rng, n, rank);
    &l * l.transpose()
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    psd(rng, n, n) + Mat::identity(n, n) * 0.5
}

/// Random averaged system with `θ ∈ [0, 1]ᵏ`, a steady state at a random
/// interior `θ̄`, and `rk[R(θ̄), 𝒟(x̄)] = n`.
pub fn random_system(rng: &mut ChaCha8Rng) -> (AveragedPhSystem, Equilibrium) {
    loop {
        let n = rng.gen_range(2..=8usize);
        let k = rng.gen_range(1..=3usize);
        let r_rank = (n.saturating_sub(k)).max(1) + rng.gen_range(0..=k.min(n - 1));
        let j = skew(rng, n);
        let r = psd(rng, n, r_rank.min(n));
        let jj: Vec<Mat> = (0..k).map(|_| skew(rng, n)).collect();
        let rj: Vec<Mat> = (0..k).map(|i| if i % 2 == 0 { Mat::zeros(n, n) } else { psd(rng, n, 1) * 0.3 }).collect();
        let m = rng.gen_range(1..=n);
        let b = gaussian(rng, n, m);
        let h = spd(rng, n);
        let Ok(sys) = AveragedPhSystem::new(j, r, jj, rj, b, h, vec![(0.0, 1.0); k]) else { continue };
        let theta = Vector::from_fn(k, |_, _| rng.gen_range(0.2..0.8));
        let u = Vector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let Ok(eq) = sys.steady_state_from_theta(&theta, &u) else { continue };
        if eq.x_bar.amax() > 50.0 || eq.x_bar.amax() < 1e-2 {
            continue;
        }
        let dcal = sys.d_cal(&eq.x_bar).unwrap();
        // ξ only settles when 𝒟(x̄) is injective
        let sv = dcal.clone().svd(false, false).singular_values;
        if k <= n && sv.min() > 1e-3 * sv.max() && rank_condition(&sys.r_at(&theta), &dcal).unwrap() {
            return (sys, eq);
        }
    }
}

/// Random `(A, 𝒟)` with some unstable modes and a well-conditioned
/// controllability matrix.
pub fn random_pair(rng: &mut ChaCha8Rng) -> (Mat, Mat) {
    loop {
        let n = rng.gen_range(2..=8usize);
        let k = rng.gen_range(1..=3usize);
        let a = gaussian(rng, n, n) * 2.0 + Mat::identity(n, n) * rng.gen_range(-1.0..1.0);
        let d = gaussian(rng, n, k);
        let scaled = &a / a.norm();
        let mut kalman = Mat::zeros(n, n * k);
        let mut block = d.clone();
        for i in 0..n {
            kalman.view_mut((0, i * k), (n, k)).copy_from(&block);
            block = &scaled * block;
        }
        let sv = kalman.svd(false, false).singular_values;
        if sv.min() > 1e-4 * sv.max() {
            return (a, d);
        }
    }
}
