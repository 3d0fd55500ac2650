//! Independent oracles shared by the integration tests and the acceptance
//! binary.

#![allow(dead_code)]

use phsysid::autodiff::central_difference;
use phsysid::basis::build_polynomial_library;
use phsysid::dynamics::{canonical_structure, child_rng, generate_dataset, uniform_state, DataSpec, Pair};
use phsysid::integrators::{scheme_residual, Scheme};
use phsysid::models::{ForceModel, InitSpec, PhsiModel, TrainableModel};
use phsysid::training::{batch_gradient, loss, Penalties};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Counts exponent vectors in `[0, n]^d` by total degree, then returns
/// `(#{1 <= |e| <= n}, d * #{|e| <= n - 1})`.
pub fn brute_force_sizes(d: usize, n: usize) -> (usize, usize) {
    let mut by_degree = vec![0usize; d * n + 1];
    let mut e = vec![0usize; d];
    loop {
        by_degree[e.iter().sum::<usize>()] += 1;
        let mut i = 0;
        while i < d && e[i] == n {
            e[i] = 0;
            i += 1;
        }
        if i == d {
            break;
        }
        e[i] += 1;
    }
    let lib = by_degree[1..=n].iter().sum();
    let bsi = d * by_degree[..n].iter().sum::<usize>();
    (lib, bsi)
}

/// A non-autonomous cubic right-hand side with coefficients from `seed`.
pub fn cubic_probe(d: usize, seed: u64) -> impl Fn(&[f64], f64) -> Vec<f64> {
    let mut rng = child_rng(seed, 0x0b5e);
    let c: Vec<[f64; 4]> = (0..d).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
    move |x: &[f64], t: f64| {
        (0..d)
            .map(|i| {
                let y = x[(i + 1) % d];
                c[i][0] * x[i] * x[i] * x[i] + c[i][1] * x[i] * y + c[i][2] * y + c[i][3] * t * t * t
            })
            .collect()
    }
}

/// Largest `|r + r'|` where `r` is the scheme residual on `(x0, x1, t, dt)`
/// and `r'` the residual on the reversed step `(x1, x0, t + dt, -dt)`.
pub fn reversal_defect<G>(scheme: Scheme, g: &G, x0: &[f64], x1: &[f64], t: f64, dt: f64) -> f64
where
    G: Fn(&[f64], f64) -> Vec<f64>,
{
    let fwd = scheme_residual(scheme, g, x0, x1, t, dt).unwrap();
    let bwd = scheme_residual(scheme, g, x1, x0, t + dt, -dt).unwrap();
    fwd.iter().zip(&bwd).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max)
}

/// Sample std of `(e1 + e2) / 2` for independent `N(0, sigma)` draws.
pub fn midpoint_noise_std(sigma: f64, draws: usize, seed: u64) -> f64 {
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut rng = child_rng(seed, 0x5eed);
    let v: Vec<f64> = (0..draws).map(|_| 0.5 * (normal.sample(&mut rng) + normal.sample(&mut rng))).collect();
    let mean = v.iter().sum::<f64>() / draws as f64;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (draws - 1) as f64).sqrt()
}

/// Canonical Hamiltonian model with a random cubic Hamiltonian in `2 n`
/// variables; returns the largest `|∇Hᵀ ẋ|` over `points` random states.
pub fn conservation_defect(n: usize, seed: u64, points: usize) -> f64 {
    let d = 2 * n;
    let mut m = PhsiModel::new(
        &canonical_structure(n),
        build_polynomial_library(d, 3, false),
        Vec::new(),
        ForceModel::None,
        &InitSpec::default(),
        0,
    )
    .unwrap();
    let mut rng = child_rng(seed, 0xc0de);
    m.params.iter_mut().for_each(|v| *v = rng.random_range(-2.0..2.0));
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let x = uniform_state(&mut rng, d, -1.0, 1.0);
        let g = m.grad_hamiltonian(&x);
        let v = phsysid::dynamics::Dynamics::eval(&m, &x, 0.0);
        worst = worst.max(g.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().abs());
    }
    worst
}

/// Pairs from a short noise-free dataset of `system`.
pub fn probe_pairs(system: &phsysid::dynamics::OdeSystem, dt: f64, seed: u64) -> Vec<Pair> {
    let spec = DataSpec {
        n_traj: 2,
        t_end: 4.0 * dt,
        dt,
        seed,
        ..Default::default()
    };
    generate_dataset(system, &spec).unwrap().pairs()
}

/// Norm-wise relative error `max|reverse - numeric| / max|numeric|` of the
/// training loss gradient, with the parameters jittered by `seed`.
pub fn loss_gradient_error<M: TrainableModel>(model: &mut M, pairs: &[Pair], dt: f64, scheme: Scheme, seed: u64) -> f64 {
    let mut rng = child_rng(seed, 0x9a7);
    for v in model.params_mut() {
        *v += rng.random_range(-0.1..0.1);
    }
    let batch: Vec<&Pair> = pairs.iter().collect();
    let lambdas = Penalties {
        hamiltonian: 0.1,
        force: 0.01,
        damping: 0.0,
    };
    let (_, _, reverse) = batch_gradient(&*model, &batch, dt, scheme, lambdas, true).unwrap();
    let f = |p: &[f64]| loss(&*model, p, &batch, dt, scheme, lambdas, true).map_or(f64::NAN, |l| l.0);
    let numeric = central_difference(model.params(), 1e-6, f);
    let diff = reverse.iter().zip(&numeric).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = numeric.iter().map(|b| b.abs()).fold(0.0, f64::max);
    diff / scale
}
