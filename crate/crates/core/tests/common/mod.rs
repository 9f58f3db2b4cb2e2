#![allow(dead_code)]

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use urec::{Atom, UnitCircleMeasure, C};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> C {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C::new(re, im) / 2f64.sqrt()
}

/// Haar unitary: QR of a complex Ginibre matrix with the phases of `diag R` removed.
pub fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<C> {
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let ph = r[(j, j)] / r[(j, j)].norm();
        let col = q.column(j) * ph;
        q.set_column(j, &col);
    }
    q
}

pub fn random_state(rng: &mut ChaCha8Rng, d: usize) -> Vec<C> {
    let v: Vec<C> = (0..d).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / n).collect()
}

/// Weights summing to `total`, each at least `floor` (capped at half the mean).
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize, total: f64, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let floor = floor.min(total / (2 * n) as f64);
    let free = total - floor * n as f64;
    raw.iter().map(|w| floor + free * w / s).collect()
}

/// `n` angles with pairwise circular separation at least `sep`.
pub fn random_angles(rng: &mut ChaCha8Rng, n: usize, sep: f64) -> Vec<f64> {
    loop {
        let mut a: Vec<f64> = (0..n).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let ok = (0..n).all(|k| {
            let next = if k + 1 < n { a[k + 1] } else { a[0] + TAU };
            n == 1 || next - a[k] >= sep
        });
        if ok {
            return a;
        }
    }
}

pub fn random_atomic(rng: &mut ChaCha8Rng, n: usize) -> UnitCircleMeasure {
    let sep = (TAU / n as f64 / 3.0).min(0.3);
    let angles = random_angles(rng, n, sep);
    let w = random_weights(rng, n, 1.0, 0.02);
    UnitCircleMeasure::new(angles.into_iter().zip(w).map(|(angle, weight)| Atom { angle, weight }).collect(), None)
        .unwrap()
}

/// Coefficients `mu_0..mu_deg` of the density `|p(e^{it})|^2` for a random `p`, scaled to mass `mass`.
pub fn random_density_moments(rng: &mut ChaCha8Rng, deg: usize, mass: f64) -> Vec<C> {
    let c: Vec<C> = (0..=deg).map(|_| gaussian(rng)).collect();
    let norm: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    (0..=deg)
        .map(|n| (0..=deg - n).map(|j| c[j] * c[j + n].conj()).sum::<C>() * (mass / norm))
        .collect()
}

/// Atoms with total weight `1 - ac_mass` plus a random polynomial density.
pub fn random_mixed(rng: &mut ChaCha8Rng, n_atoms: usize, ac_mass: f64, deg: usize, floor: f64) -> UnitCircleMeasure {
    let angles = random_angles(rng, n_atoms, 0.3);
    let w = random_weights(rng, n_atoms, 1.0 - ac_mass, floor);
    let atoms = angles.into_iter().zip(w).map(|(angle, weight)| Atom { angle, weight }).collect();
    let ac = (ac_mass > 0.0).then(|| random_density_moments(rng, deg, ac_mass));
    UnitCircleMeasure::new(atoms, ac).unwrap()
}

pub fn random_disk_point(rng: &mut ChaCha8Rng, r_max: f64) -> C {
    C::from_polar(r_max * rng.random::<f64>().sqrt(), rng.random_range(0.0..TAU))
}

pub fn max_abs_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
