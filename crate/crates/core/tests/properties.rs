mod common;

use std::f64::consts::TAU;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use urec::cmv::{
    constant_coin_return, CmvMatrix, CoinedWalkSpec, HalfLineWalk, WalkDomain,
};
use urec::fourier::{coin_stieltjes_closed_form, fourier_moments, stieltjes_operator, MomentumSymbol, QuadratureConfig};
use urec::monitored::{
    expected_return_time, monitored_run, return_probability, return_time_variance, Evolution, Operator, TailPolicy,
    UnitarySystem,
};
use urec::renewal::{
    first_return_from_return, quantum_return_sequence, return_from_first_return, return_sequence,
    reversible_spectral, sjk_quantities, MarkovChain,
};
use urec::schur::{
    blaschke_zeros, in_circle_hull, inner_deviation, moments_from_schur_taylor, schur_taylor_from_moments,
    taylor_from_verblunsky, variance_from_zeros, verblunsky_from_taylor, winding_number, SchurRepresentation,
    VerblunskySequence, VerblunskyTail,
};
use urec::{Atom, Tolerances, UnitCircleMeasure, C};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn zero() -> C {
    C::new(0.0, 0.0)
}

/// Monitored run of the canonical system, doubling `N` until the survival is below `floor`.
fn converged_run(m: &UnitCircleMeasure, floor: f64) -> urec::monitored::ArrivalRecord {
    let sys = UnitarySystem::canonical(m, 1).unwrap();
    let mut n = 64;
    loop {
        let rec = monitored_run(&sys, n).unwrap();
        if rec.tail_survival() < floor || n >= 1 << 18 {
            return rec;
        }
        n *= 2;
    }
}

// ---- measures and transforms

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn transforms_map_disk_into_right_half_plane_and_disk(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n_atoms = r.random_range(0..4);
        let ac_mass = if n_atoms == 0 { 1.0 } else { r.random_range(0.0..0.9) };
        let m = random_mixed(&mut r, n_atoms, ac_mass, 4, 0.05);
        for _ in 0..50 {
            let z = random_disk_point(&mut r, 0.95);
            prop_assert!(m.caratheodory(z).unwrap().re > 0.0);
            prop_assert!(m.schur(z).unwrap().norm() < 1.0);
        }
    }

    #[test]
    fn caratheodory_is_twice_conjugate_stieltjes_minus_one(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_mixed(&mut r, 2, 0.5, 3, 0.05);
        for _ in 0..200 {
            let z = random_disk_point(&mut r, 0.99);
            let f = m.caratheodory(z).unwrap();
            let s = m.stieltjes(z.conj()).unwrap().conj();
            prop_assert!((f - (2.0 * s - 1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn fourier_reconstruction_is_idempotent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_mixed(&mut r, 0, 1.0, 5, 0.0);
        let mu = m.moments(5).mu;
        let entries: Vec<(i64, C)> = (0..=5i64)
            .flat_map(|n| {
                let v = mu[n as usize];
                if n == 0 { vec![(0, v)] } else { vec![(n, v), (-n, v.conj())] }
            })
            .collect();
        let back = UnitCircleMeasure::from_fourier_entries(vec![], &entries).unwrap();
        prop_assert!(max_abs_diff(&back.moments(20).mu, &m.moments(20).mu) < 1e-12);
    }

    #[test]
    fn moment_toeplitz_matrices_are_psd(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n_atoms = r.random_range(1..6);
        let m = random_mixed(&mut r, n_atoms, 0.3, 4, 0.02);
        let mom = m.moments(32);
        for order in [1, 4, 8, 16, 32] {
            prop_assert!(mom.min_toeplitz_eigenvalue(order) >= -1e-10);
        }
    }

    #[test]
    fn radial_atom_masses_match_weights(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=10);
        let m = random_atomic(&mut r, n);
        for a in m.atoms() {
            let got = m.atom_mass_at(a.position()).unwrap();
            prop_assert!((got - a.weight).abs() < 1e-3, "weight {} radial {}", a.weight, got);
        }
    }
}

// ---- monitored evolution

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn conservation_holds_at_every_step(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.random_range(1..=8);
        let sys = UnitarySystem::dense(random_unitary(&mut r, d), random_state(&mut r, d)).unwrap();
        let rec = monitored_run(&sys, 300).unwrap();
        prop_assert!(rec.conservation_defect() < 1e-10);
        prop_assert!(rec.s.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn amplitudes_are_basis_independent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.random_range(2..=8);
        let sys = UnitarySystem::dense(random_unitary(&mut r, d), random_state(&mut r, d)).unwrap();
        let v = random_unitary(&mut r, d);
        let a = monitored_run(&sys, 100).unwrap().a;
        let b = monitored_run(&sys.conjugated(&v).unwrap(), 100).unwrap().a;
        prop_assert!(max_abs_diff(&a, &b) < 1e-10);
    }

    #[test]
    fn recurrent_return_time_converges_to_an_integer(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=10);
        let m = random_atomic(&mut r, n);
        let rec = converged_run(&m, 1e-13);
        let tau = expected_return_time(&rec, TailPolicy::default()).unwrap();
        prop_assert!((tau.value - tau.value.round()).abs() < 1e-6);
        prop_assert_eq!(tau.integer_candidate, Some(n as i64));
    }

    #[test]
    fn every_cyclic_vector_of_an_atomic_measure_is_recurrent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=6);
        let m = random_atomic(&mut r, n);
        let phases: Vec<C> = m.atoms().iter().map(|a| a.position()).collect();
        for _ in 0..20 {
            let sys = UnitarySystem::new(Operator::Diagonal(phases.clone()), random_state(&mut r, n)).unwrap();
            let mut steps = 256;
            let rec = loop {
                let rec = monitored_run(&sys, steps).unwrap();
                if rec.tail_survival() < 1e-10 || steps >= 1 << 21 {
                    break rec;
                }
                steps *= 2;
            };
            let rp = return_probability(&rec);
            let slack = Tolerances::default().algebraic;
            prop_assert!(rp.lower <= 1.0 + slack && rp.upper >= 1.0 - slack);
            prop_assert!(rp.lower > 1.0 - 1e-8, "lower {}", rp.lower);
        }
    }
}

// ---- Schur functions

fn random_blaschke(r: &mut rand_chacha::ChaCha8Rng, max_deg: usize) -> (Vec<C>, C) {
    let d = r.random_range(0..=max_deg);
    let zeros = (0..d).map(|_| random_disk_point(r, 0.9)).collect();
    (zeros, C::from_polar(1.0, r.random_range(0.0..TAU)))
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn atomic_schur_functions_are_inner(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=8);
        let f = SchurRepresentation::from_atomic_measure(&random_atomic(&mut r, n)).unwrap();
        prop_assert!(inner_deviation(&f, 4096).unwrap() < 1e-9);
    }

    #[test]
    fn boundary_winding_is_additive_under_products(seed in any::<u64>()) {
        let mut r = rng(seed);
        let tol = Tolerances::default();
        let (zf, bf) = random_blaschke(&mut r, 5);
        let (zh, bh) = random_blaschke(&mut r, 5);
        let f = SchurRepresentation::blaschke(zf.clone(), bf).unwrap();
        let h = SchurRepresentation::blaschke(zh.clone(), bh).unwrap();
        let fh = SchurRepresentation::blaschke([zf.clone(), zh.clone()].concat(), bf * bh).unwrap();
        // winding_number counts e^{it} conj f(e^{-it}); the winding of f itself is one less
        let w = |g: &SchurRepresentation| winding_number(g, 64, &tol).unwrap() - 1;
        prop_assert_eq!(w(&fh), w(&f) + w(&h));
        prop_assert_eq!(w(&f), zf.len() as i64);
    }

    #[test]
    fn variance_from_zeros_matches_series(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=8);
        let m = random_atomic(&mut r, n);
        let f = SchurRepresentation::from_atomic_measure(&m).unwrap();
        let zeros = blaschke_zeros(&f, &Tolerances::default()).unwrap();
        prop_assert_eq!(zeros.len(), n - 1);
        let rec = converged_run(&m, 1e-15);
        let series = return_time_variance(&rec, TailPolicy::default()).unwrap().value;
        let closed = variance_from_zeros(&zeros).unwrap();
        prop_assert!((series - closed).abs() < 1e-6 * closed.max(1.0), "{} vs {}", series, closed);
    }

    #[test]
    fn zeros_lie_in_the_hull_of_the_atoms(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=10);
        let m = random_atomic(&mut r, n);
        let f = SchurRepresentation::from_atomic_measure(&m).unwrap();
        let pts: Vec<C> = m.atoms().iter().map(|a| a.position()).collect();
        for z in blaschke_zeros(&f, &Tolerances::default()).unwrap() {
            prop_assert!(in_circle_hull(&pts, z, 1e-9), "zero {} outside hull", z);
        }
    }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn taylor_verblunsky_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n_atoms = r.random_range(0..4);
        let ac = r.random_range(0.3..1.0);
        let m = random_mixed(&mut r, n_atoms, if n_atoms == 0 { 1.0 } else { ac }, 3, 0.05);
        let k = 12;
        let c = schur_taylor_from_moments(&m.moments(k), k).unwrap();
        let ext = verblunsky_from_taylor(&c, k, &Tolerances::default()).unwrap();
        let back = taylor_from_verblunsky(&ext.sequence, k);
        prop_assert!(max_abs_diff(&c, &back) < 1e-8, "{}", max_abs_diff(&c, &back));
        let mom = moments_from_schur_taylor(&back);
        prop_assert!(max_abs_diff(&mom.mu, &m.moments(k).mu) < 1e-8);
    }
}

#[test]
fn variance_grows_as_an_atom_fades() {
    let mut r = rng(7);
    for _ in 0..10 {
        let angles = random_angles(&mut r, 3, 0.5);
        let var = |eps: f64| {
            let w = [eps, (1.0 - eps) / 2.0, (1.0 - eps) / 2.0];
            let atoms = angles.iter().zip(w).map(|(&angle, weight)| Atom { angle, weight }).collect();
            let m = UnitCircleMeasure::new(atoms, None).unwrap();
            let f = SchurRepresentation::from_atomic_measure(&m).unwrap();
            variance_from_zeros(&blaschke_zeros(&f, &Tolerances::default()).unwrap()).unwrap()
        };
        let v: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&e| var(e)).collect();
        assert!(v[0] < v[1] && v[1] < v[2], "{v:?}");
    }
}

// ---- renewal

fn random_chain(r: &mut rand_chacha::ChaCha8Rng, n: usize, symmetric: bool) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if !symmetric || j >= i {
                let v = r.random_range(0.05..1.0);
                w[i][j] = v;
                if symmetric {
                    w[j][i] = v;
                }
            }
        }
    }
    w.iter().map(|row| {
        let s: f64 = row.iter().sum();
        row.iter().map(|x| x / s).collect()
    }).collect()
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn renewal_inversion_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=6);
        let chain = MarkovChain::from_dense(&random_chain(&mut r, n, false), 0).unwrap();
        let p = return_sequence(&chain, 200).p;
        let back = return_from_first_return(&first_return_from_return(&p));
        prop_assert!(p.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn markov_first_returns_are_probabilities(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=6);
        let chain = MarkovChain::from_dense(&random_chain(&mut r, n, false), 0).unwrap();
        let q = first_return_from_return(&return_sequence(&chain, 300).p);
        prop_assert!(q.iter().all(|&x| x >= -1e-12));
        prop_assert!(q.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn spectral_return_time_matches_renewal_series(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=6);
        let chain = MarkovChain::from_dense(&random_chain(&mut r, n, true), 0).unwrap();
        let pi = chain.stationary().unwrap();
        let tau_c = reversible_spectral(&chain, &pi).unwrap().tau_c.unwrap();
        let q = first_return_from_return(&return_sequence(&chain, 3000).p);
        let series: f64 = q.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
        prop_assert!((tau_c - series).abs() < 1e-8, "{} vs {}", tau_c, series);
        prop_assert!((tau_c - 1.0 / pi[0]).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(config(20))]

    #[test]
    fn an_atom_makes_sjk_return_time_finite(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n_atoms = r.random_range(1..=4);
        let ac = r.random_range(0.0..0.5);
        let m = random_mixed(&mut r, n_atoms, ac, 3, 0.05);
        let n_max = 10_000;
        let mom = m.moments(n_max);
        let sjk = sjk_quantities(&quantum_return_sequence(&mom)).unwrap();
        prop_assert!(!sjk.tau_is_lower_bound);
        prop_assert!(sjk.tau_sjk.is_finite());
        let tail: f64 = sjk.q_sjk.iter().enumerate().skip(n_max / 2).map(|(k, q)| k as f64 * q).sum();
        prop_assert!(tail < 1e-8, "tail {}", tail);
        // Wiener average of |mu_n|^2 tends to the sum of squared atom weights
        let target: f64 = m.atoms().iter().map(|a| a.weight * a.weight).sum();
        let avg = |n: usize| mom.mu[1..=n].iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64;
        prop_assert!((avg(n_max) - target).abs() < 0.02, "{} vs {}", avg(n_max), target);
        prop_assert!((avg(n_max) - avg(n_max / 2)).abs() < 0.01);
    }
}

// ---- CMV and walks

fn random_gammas(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<C> {
    (0..n).map(|_| random_disk_point(r, 0.95)).collect()
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn cmv_interior_columns_are_orthonormal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(3..=30);
        let c = CmvMatrix::from_verblunsky(&random_gammas(&mut r, dim), dim).unwrap();
        let k = c.interior_columns();
        for i in 0..k {
            for j in 0..k {
                let ip: C = (0..dim).map(|row| c.entry(row, i).conj() * c.entry(row, j)).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((ip - want).norm() < 1e-12);
            }
        }
        prop_assert!(c.bandwidth() <= 5);
    }

    #[test]
    fn cmv_moments_match_verblunsky_measure(seed in any::<u64>()) {
        let mut r = rng(seed);
        let window = r.random_range(1..=10);
        let mut gamma = random_gammas(&mut r, window);
        let n_max = 32;
        let dim = 2 * n_max + 8;
        gamma.resize(dim, zero());
        let c = CmvMatrix::from_verblunsky(&gamma, dim).unwrap();
        let seq = VerblunskySequence::new(gamma[..window].to_vec(), VerblunskyTail::Zero).unwrap();
        let mu = moments_from_schur_taylor(&taylor_from_verblunsky(&seq, n_max)).mu;
        let mut psi = vec![zero(); dim];
        psi[0] = C::new(1.0, 0.0);
        let mut next = psi.clone();
        for (n, want) in mu.iter().enumerate() {
            prop_assert!((psi[0] - want).norm() < 1e-8, "n = {}: {} vs {}", n, psi[0], want);
            c.apply(&psi, &mut next);
            std::mem::swap(&mut psi, &mut next);
        }
    }

    #[test]
    fn even_walk_iterates_are_shifted_odd_iterates(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sites = r.random_range(2..=12);
        let walk = CoinedWalkSpec::new(WalkDomain::HalfLine, random_gammas(&mut r, sites), None).unwrap();
        let gamma = walk.verblunsky(2 * sites).unwrap();
        let taylor_from = |k: usize, len: usize| {
            let seq = VerblunskySequence::new(gamma[k..].to_vec(), VerblunskyTail::Zero).unwrap();
            taylor_from_verblunsky(&seq, len)
        };
        for x in 1..sites {
            let odd = taylor_from(2 * x - 1, 21);
            let even = taylor_from(2 * x, 20);
            prop_assert!(odd[0].norm() < 1e-14);
            prop_assert!(max_abs_diff(&odd[1..], &even) < 1e-10);
        }
    }
}

#[test]
fn line_return_is_below_half_line_return() {
    for k in 1..=9 {
        for phase in [0.0, 1.3, -2.2] {
            let g = C::from_polar(0.1 * k as f64, phase);
            let line = constant_coin_return(g, WalkDomain::Line).unwrap();
            let half = constant_coin_return(g, WalkDomain::HalfLine).unwrap();
            assert!(line < half, "|gamma| = {}: {line} vs {half}", g.norm());
        }
    }
}

#[test]
fn constant_coin_return_lies_in_simulation_bracket() {
    for g in [C::new(0.3, 0.0), C::from_polar(0.6, 0.7), C::new(0.9, 0.0)] {
        let walk = CoinedWalkSpec::constant(WalkDomain::HalfLine, g).unwrap();
        let n = 2000;
        let ev = HalfLineWalk::for_run(&walk, 0, n).unwrap();
        let mut phi = vec![zero(); ev.dim()];
        phi[0] = C::new(1.0, 0.0);
        let sys = UnitarySystem::new(Operator::Custom(std::sync::Arc::new(ev)), phi).unwrap();
        let rp = return_probability(&monitored_run(&sys, n).unwrap());
        let exact = constant_coin_return(g, WalkDomain::HalfLine).unwrap();
        assert!(rp.lower <= exact + 1e-12 && exact <= rp.upper, "{} not in [{}, {}]", exact, rp.lower, rp.upper);
    }
}

// ---- momentum space

proptest! {
    #![proptest_config(config(4))]

    #[test]
    fn stieltjes_quadrature_matches_closed_form(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = C::from_polar(r.random_range(0.05..0.95), r.random_range(0.0..TAU));
        let sym = MomentumSymbol::coin_walk(g).unwrap();
        for _ in 0..25 {
            let z = random_disk_point(&mut r, 0.9);
            let q = stieltjes_operator(&sym, z, &QuadratureConfig::default()).unwrap();
            let c = coin_stieltjes_closed_form(g, z).unwrap();
            let d = q.m.iter().zip(c.m.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(d < 1e-10, "z = {}: {}", z, d);
            // off-diagonal entries make M(z) state dependent
            prop_assert!(z.norm() < 1e-3 || q.m[(0, 1)].norm() > 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn stieltjes_series_coefficients_are_fourier_moments(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = C::from_polar(r.random_range(0.05..0.95), r.random_range(0.0..TAU));
        let phi = random_state(&mut r, 2);
        let sym = MomentumSymbol::coin_walk(g).unwrap();
        let mu = fourier_moments(&sym, &phi, 20).unwrap().mu;
        // Cauchy coefficients of <phi|M(z) phi> on |z| = rad
        let (k, rad) = (128usize, 0.7);
        let vals: Vec<C> = (0..k)
            .map(|j| {
                let z = C::from_polar(rad, TAU * j as f64 / k as f64);
                let m = coin_stieltjes_closed_form(g, z).unwrap().m;
                let v = nalgebra::DVector::from_column_slice(&phi);
                (v.adjoint() * m * &v)[(0, 0)]
            })
            .collect();
        for (n, want) in mu.iter().enumerate() {
            let c: C = vals
                .iter()
                .enumerate()
                .map(|(j, v)| v * C::from_polar(1.0, -TAU * (j * n) as f64 / k as f64))
                .sum::<C>()
                / (k as f64 * rad.powi(n as i32));
            prop_assert!((c - want).norm() < 1e-8, "n = {}: {} vs {}", n, c, want);
        }
    }
}

#[test]
fn fourier_route_matches_line_closed_form() {
    for g in [C::new(0.3, 0.0), C::from_polar(0.5, 0.9), C::new(0.8, 0.0)] {
        let sym = MomentumSymbol::coin_walk(g).unwrap();
        let up = [C::new(1.0, 0.0), zero()];
        let r = urec::fourier::fourier_return_probability(&sym, &up, 1500).unwrap();
        let exact = constant_coin_return(g, WalkDomain::Line).unwrap();
        assert!((r.value - exact).abs() < 1e-6, "|gamma| = {}: {} vs {exact}", g.norm(), r.value);
    }
}
