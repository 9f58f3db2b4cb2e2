//! Translation-invariant walks in momentum space: the symbol `U(p)`, the
//! Stieltjes operator `M(z) = ∫ dp (1 - z U(p))^{-1}`, state-dependent Schur
//! functions and return probabilities.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::measure::MomentSequence;
use crate::poly::{self, C};
use crate::quadrature::{circle_mean_with_breakpoints, Quadrature};
use crate::schur::SchurFunction;

/// `U(p) = sum_o A_o e^{i o·p}` on a lattice of dimension `s` with fiber `C^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSymbol {
    lattice_dim: usize,
    fiber_dim: usize,
    terms: Vec<(Vec<i64>, DMatrix<C>)>,
}

/// JSON form: trigonometric-polynomial matrix entries as lists of
/// `(offset, coefficient)` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolJson {
    pub lattice_dim: usize,
    pub fiber_dim: usize,
    pub entries: Vec<EntryJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryJson {
    pub row: usize,
    pub col: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    pub offset: Vec<i64>,
    pub coeff: C,
}

impl MomentumSymbol {
    pub fn new(lattice_dim: usize, fiber_dim: usize, terms: Vec<(Vec<i64>, DMatrix<C>)>) -> Result<Self> {
        Self::with_tolerances(lattice_dim, fiber_dim, terms, &Tolerances::default())
    }

    /// Checks unitarity of `U(p)` on a tensor grid of 16 points per dimension.
    pub fn with_tolerances(
        lattice_dim: usize,
        fiber_dim: usize,
        mut terms: Vec<(Vec<i64>, DMatrix<C>)>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if lattice_dim == 0 || fiber_dim == 0 {
            return Err(Error::Domain("lattice and fiber dimensions must be positive".into()));
        }
        for (o, a) in &terms {
            if o.len() != lattice_dim || a.nrows() != fiber_dim || a.ncols() != fiber_dim {
                return Err(Error::Domain(format!("term with offset {o:?} has inconsistent shape")));
            }
        }
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Vec<i64>, DMatrix<C>)> = Vec::new();
        for (o, a) in terms {
            match merged.last_mut() {
                Some((o0, a0)) if *o0 == o => *a0 += a,
                _ => merged.push((o, a)),
            }
        }
        let symbol = Self { lattice_dim, fiber_dim, terms: merged };
        let grid = 16usize;
        let total = grid.pow(lattice_dim as u32);
        for idx in 0..total {
            let p = symbol.grid_point(idx, grid, 0.37);
            let u = symbol.eval(&p);
            let defect = (u.adjoint() * &u - DMatrix::<C>::identity(fiber_dim, fiber_dim))
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            if defect > tol.unitarity {
                return Err(Error::invariant(format!("U(p) not unitary at p = {p:?}: defect {defect:e}"), tol.unitarity));
            }
        }
        Ok(symbol)
    }

    /// The coined walk `diag(e^{ip}, e^{-ip}) · [[ρ, -γ], [conj γ, ρ]]`.
    pub fn coin_walk(gamma: C) -> Result<Self> {
        if !(gamma.norm() < 1.0) {
            return Err(Error::Domain(format!("|gamma| = {} must be < 1", gamma.norm())));
        }
        let rho = C::new((1.0 - gamma.norm_sqr()).sqrt(), 0.0);
        let z = C::new(0.0, 0.0);
        let right = DMatrix::from_row_slice(2, 2, &[rho, -gamma, z, z]);
        let left = DMatrix::from_row_slice(2, 2, &[z, z, gamma.conj(), rho]);
        Self::new(1, 2, vec![(vec![1], right), (vec![-1], left)])
    }

    pub fn constant(u: DMatrix<C>, lattice_dim: usize) -> Result<Self> {
        let k = u.nrows();
        Self::new(lattice_dim, k, vec![(vec![0; lattice_dim], u)])
    }

    pub fn from_json(j: &SymbolJson) -> Result<Self> {
        let mut terms: Vec<(Vec<i64>, DMatrix<C>)> = Vec::new();
        for e in &j.entries {
            if e.row >= j.fiber_dim || e.col >= j.fiber_dim {
                return Err(Error::Domain(format!("entry ({}, {}) outside fiber dimension {}", e.row, e.col, j.fiber_dim)));
            }
            for t in &e.terms {
                let mut a = DMatrix::zeros(j.fiber_dim, j.fiber_dim);
                a[(e.row, e.col)] = t.coeff;
                terms.push((t.offset.clone(), a));
            }
        }
        Self::new(j.lattice_dim, j.fiber_dim, terms)
    }

    pub fn to_json(&self) -> SymbolJson {
        let mut entries = Vec::new();
        for row in 0..self.fiber_dim {
            for col in 0..self.fiber_dim {
                let terms: Vec<TermJson> = self
                    .terms
                    .iter()
                    .filter(|(_, a)| a[(row, col)].norm() != 0.0)
                    .map(|(o, a)| TermJson { offset: o.clone(), coeff: a[(row, col)] })
                    .collect();
                if !terms.is_empty() {
                    entries.push(EntryJson { row, col, terms });
                }
            }
        }
        SymbolJson { lattice_dim: self.lattice_dim, fiber_dim: self.fiber_dim, entries }
    }

    pub fn lattice_dim(&self) -> usize {
        self.lattice_dim
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    /// Largest `|offset|` in any coordinate.
    pub fn degree(&self) -> usize {
        self.terms.iter().flat_map(|(o, _)| o.iter().map(|x| x.unsigned_abs() as usize)).max().unwrap_or(0)
    }

    pub fn eval(&self, p: &[f64]) -> DMatrix<C> {
        let mut u = DMatrix::zeros(self.fiber_dim, self.fiber_dim);
        for (o, a) in &self.terms {
            let phase: f64 = o.iter().zip(p).map(|(k, x)| *k as f64 * x).sum();
            u += a * C::from_polar(1.0, phase);
        }
        u
    }

    fn grid_point(&self, mut idx: usize, m: usize, shift: f64) -> Vec<f64> {
        (0..self.lattice_dim)
            .map(|_| {
                let j = idx % m;
                idx /= m;
                TAU * (j as f64 + shift) / m as f64
            })
            .collect()
    }
}

/// `M(z)` and `M1(z) = ∫ U (1 - zU)^{-1}`, so that `M = 1 + z M1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StieltjesOperatorValue {
    pub z: C,
    pub m: DMatrix<C>,
    pub m1: DMatrix<C>,
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    pub start: usize,
    pub tol: f64,
    pub max_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { start: 16, tol: 1e-10, max_nodes: 1 << 22 }
    }
}

/// Largest `|z|` accepted for Stieltjes operator quadrature.
pub const MAX_RADIUS: f64 = 1.0 - 1e-6;

const CHUNK: usize = 256;

fn grid_average(symbol: &MomentumSymbol, z: C, m: usize) -> Result<(DMatrix<C>, DMatrix<C>)> {
    let k = symbol.fiber_dim;
    let total = m.pow(symbol.lattice_dim as u32);
    let chunks: Vec<Result<(DMatrix<C>, DMatrix<C>)>> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = DMatrix::<C>::zeros(k, k);
            let mut acc1 = DMatrix::<C>::zeros(k, k);
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let p = symbol.grid_point(idx, m, 0.0);
                let u = symbol.eval(&p);
                let a = DMatrix::<C>::identity(k, k) - &u * z;
                let inv = a.try_inverse().ok_or_else(|| Error::Resolution {
                    what: format!("resolvent singular at p = {p:?}, z = {z}"),
                    refinements: 0,
                })?;
                acc1 += &u * &inv;
                acc += inv;
            }
            Ok((acc, acc1))
        })
        .collect();
    let mut m0 = DMatrix::<C>::zeros(k, k);
    let mut m1 = DMatrix::<C>::zeros(k, k);
    for c in chunks {
        let (a, b) = c?;
        m0 += a;
        m1 += b;
    }
    let w = 1.0 / total as f64;
    Ok((m0 * C::new(w, 0.0), m1 * C::new(w, 0.0)))
}

/// Trapezoidal tensor quadrature of the resolvent, doubled per dimension
/// until the entrywise change drops below `config.tol`.
pub fn stieltjes_operator(symbol: &MomentumSymbol, z: C, config: &QuadratureConfig) -> Result<StieltjesOperatorValue> {
    if z.norm() > MAX_RADIUS {
        return Err(Error::Domain(format!("|z| = {} exceeds the quadrature cap {MAX_RADIUS}", z.norm())));
    }
    let mut m = config.start.max(2);
    let (mut prev, mut prev1) = grid_average(symbol, z, m)?;
    let mut refinements = 0;
    loop {
        if (2 * m).pow(symbol.lattice_dim as u32) > config.max_nodes {
            return Err(Error::Resolution {
                what: format!("Stieltjes operator at z = {z} did not converge with {m} nodes per dimension"),
                refinements,
            });
        }
        m *= 2;
        refinements += 1;
        let (cur, cur1) = grid_average(symbol, z, m)?;
        let change = (&cur - &prev).iter().chain((&cur1 - &prev1).iter()).map(|c| c.norm()).fold(0.0, f64::max);
        if change < config.tol {
            return Ok(StieltjesOperatorValue { z, m: cur, m1: cur1, nodes: m.pow(symbol.lattice_dim as u32) });
        }
        prev = cur;
        prev1 = cur1;
    }
}

fn check_state(phi: &[C], k: usize) -> Result<DVector<C>> {
    if phi.len() != k {
        return Err(Error::Domain(format!("state has {} components for fiber dimension {k}", phi.len())));
    }
    let n = phi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if (n - 1.0).abs() > Tolerances::default().state_norm {
        return Err(Error::invariant(format!("||phi|| = {n}"), Tolerances::default().state_norm));
    }
    Ok(DVector::from_column_slice(phi))
}

fn schur_from_operators(m: &DMatrix<C>, m1: &DMatrix<C>, phi: &DVector<C>) -> C {
    // f(z) = conj<phi|M1(conj z)phi> / conj<phi|M(conj z)phi>
    let mu = (phi.adjoint() * m * phi)[(0, 0)];
    let g = (phi.adjoint() * m1 * phi)[(0, 0)];
    g.conj() / mu.conj()
}

/// Schur function of the state localized at the origin with internal vector `phi`.
pub fn schur_from_state(symbol: &MomentumSymbol, phi: &[C], z: C, config: &QuadratureConfig) -> Result<C> {
    let phi = check_state(phi, symbol.fiber_dim)?;
    if z.norm() >= 1.0 {
        return Err(Error::Domain(format!("|z| = {} must be < 1", z.norm())));
    }
    let s = stieltjes_operator(symbol, z.conj(), config)?;
    Ok(schur_from_operators(&s.m, &s.m1, &phi))
}

/// Evaluable Schur function of a localized state, by resolvent quadrature.
pub struct StateSchur<'a> {
    pub symbol: &'a MomentumSymbol,
    pub phi: Vec<C>,
    pub config: QuadratureConfig,
}

impl SchurFunction for StateSchur<'_> {
    fn eval(&self, z: C) -> Result<C> {
        schur_from_state(self.symbol, &self.phi, z, &self.config)
    }
}

/// Principal-branch product form of `sqrt((1 - z^2)^2 + 4|γ|^2 z^2)`.
fn coin_discriminant_sqrt(g: f64, z: C) -> C {
    let rho = (1.0 - g * g).sqrt();
    [C::new(rho, g), C::new(rho, -g), C::new(-rho, g), C::new(-rho, -g)]
        .iter()
        .map(|zk| (1.0 - z / zk).sqrt())
        .product()
}

/// Closed-form `M(z)` and `M1(z)` for [`MomentumSymbol::coin_walk`], valid on
/// the closed disk, written without the cancelling differences of the
/// residue formula.
pub fn coin_stieltjes_closed_form(gamma: C, z: C) -> Result<StieltjesOperatorValue> {
    let g = gamma.norm();
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::Domain(format!("closed form needs 0 < |gamma| < 1, got {g}")));
    }
    if z.norm() > 1.0 + 1e-14 {
        return Err(Error::Domain(format!("|z| = {} must be <= 1", z.norm())));
    }
    let rho = (1.0 - g * g).sqrt();
    let s = coin_discriminant_sqrt(g, z);
    let z2 = z * z;
    let plus = 1.0 + z2 + s;
    let minus = 1.0 - z2 + s;
    if (s * plus * minus).norm() == 0.0 {
        return Err(Error::Pole(format!("closed-form Stieltjes operator singular at {z}")));
    }
    let d1 = -2.0 * g * g * z / (s * minus);
    let up = -2.0 * gamma * rho * z / (s * plus);
    let down = 2.0 * gamma.conj() * rho * z / (s * plus);
    let m1 = DMatrix::from_row_slice(2, 2, &[d1, up, down, d1]);
    let m = DMatrix::<C>::identity(2, 2) + &m1 * z;
    Ok(StieltjesOperatorValue { z, m, m1, nodes: 0 })
}

/// Closed-form Schur function of a localized state of the coin walk.
#[derive(Debug, Clone)]
pub struct CoinStateSchur {
    gamma: C,
    phi: DVector<C>,
}

impl CoinStateSchur {
    pub fn new(gamma: C, phi: &[C]) -> Result<Self> {
        Ok(Self { gamma, phi: check_state(phi, 2)? })
    }
}

impl SchurFunction for CoinStateSchur {
    fn eval(&self, z: C) -> Result<C> {
        let s = coin_stieltjes_closed_form(self.gamma, z.conj())?;
        Ok(schur_from_operators(&s.m, &s.m1, &self.phi))
    }
}

/// `‖f_phi‖^2` for the coin walk from the closed form, Gauss–Legendre split at the band edges.
pub fn coin_state_return(gamma: C, phi: &[C], nodes: usize) -> Result<Quadrature> {
    let f = CoinStateSchur::new(gamma, phi)?;
    let eta = gamma.norm().asin();
    let edges = [eta, std::f64::consts::PI - eta, std::f64::consts::PI + eta, -eta];
    let q = circle_mean_with_breakpoints(
        |t| f.eval(C::from_polar(1.0, t)).map_or(f64::NAN, |v| v.norm_sqr()),
        &edges,
        nodes,
    );
    if !q.value.is_finite() {
        return Err(Error::EstimationFailure {
            what: "closed-form state Schur function on the circle".into(),
            diagnostics: "non-finite boundary value".into(),
        });
    }
    Ok(q)
}

/// Matrix moments `W_n = ∫ dp U(p)^n`, `n = 0..=n_max`, exact by the
/// trapezoidal rule with more nodes per dimension than the degree of `U^n`.
pub fn matrix_moments(symbol: &MomentumSymbol, n_max: usize) -> Result<Vec<DMatrix<C>>> {
    let k = symbol.fiber_dim;
    let m = symbol.degree() * n_max + 1;
    let total = m
        .checked_pow(symbol.lattice_dim as u32)
        .filter(|t| t.saturating_mul(n_max.max(1)) <= 1 << 34)
        .ok_or_else(|| Error::Resolution { what: format!("moment grid with {m} nodes per dimension is too large"), refinements: 0 })?;
    let chunks: Vec<Vec<DMatrix<C>>> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![DMatrix::<C>::zeros(k, k); n_max + 1];
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let u = symbol.eval(&symbol.grid_point(idx, m, 0.0));
                let mut power = DMatrix::<C>::identity(k, k);
                acc[0] += &power;
                for slot in acc.iter_mut().skip(1) {
                    power = &u * power;
                    *slot += &power;
                }
            }
            acc
        })
        .collect();
    let mut out = vec![DMatrix::<C>::zeros(k, k); n_max + 1];
    for acc in chunks {
        for (o, a) in out.iter_mut().zip(acc) {
            *o += a;
        }
    }
    let w = C::new(1.0 / total as f64, 0.0);
    Ok(out.into_iter().map(|x| x * w).collect())
}

/// `mu_n = <phi|W_n phi>`.
pub fn state_moments(w: &[DMatrix<C>], phi: &[C]) -> Result<MomentSequence> {
    let k = w.first().map_or(0, |m| m.nrows());
    let phi = check_state(phi, k)?;
    Ok(MomentSequence { mu: w.iter().map(|m| (phi.adjoint() * m * &phi)[(0, 0)]).collect() })
}

pub fn fourier_moments(symbol: &MomentumSymbol, phi: &[C], n_max: usize) -> Result<MomentSequence> {
    state_moments(&matrix_moments(symbol, n_max)?, phi)
}

/// First-arrival amplitudes from moments through `a_hat = 1 - 1/mu_hat`.
pub fn amplitudes_from_moments(moments: &MomentSequence) -> Result<Vec<C>> {
    let n = moments.truncation();
    let inv = poly::series_div(&[C::new(1.0, 0.0)], &moments.mu, n + 1)?;
    Ok(inv.iter().skip(1).map(|c| -c).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierReturn {
    /// `(4 S(2N) - S(N)) / 3`, assuming a tail `Σ_{n>N} |a_n|^2 ≈ c N^{-2}`.
    pub value: f64,
    /// `S(2N) = Σ_{n <= 2N} |a_n|^2`, a rigorous lower bound.
    pub partial: f64,
    /// `|value - partial|`.
    pub extrapolation: f64,
    pub n: usize,
}

fn extrapolated_return(a: &[C], n: usize) -> FourierReturn {
    let s_n: f64 = a[..n].iter().map(|x| x.norm_sqr()).sum();
    let s_2n: f64 = s_n + a[n..2 * n].iter().map(|x| x.norm_sqr()).sum::<f64>();
    let value = (4.0 * s_2n - s_n) / 3.0;
    FourierReturn { value, partial: s_2n, extrapolation: (value - s_2n).abs(), n }
}

/// Return probability of a localized state from exact moments, renewal
/// inversion and Richardson extrapolation in the truncation.
pub fn fourier_return_probability(symbol: &MomentumSymbol, phi: &[C], n: usize) -> Result<FourierReturn> {
    let mom = fourier_moments(symbol, phi, 2 * n)?;
    Ok(extrapolated_return(&amplitudes_from_moments(&mom)?, n))
}

/// `θ ↦ R` for `phi = (1, e^{iθ})/√2`, sharing the matrix moments across `θ`.
pub fn phase_scan(symbol: &MomentumSymbol, thetas: &[f64], n: usize) -> Result<Vec<(f64, FourierReturn)>> {
    if symbol.fiber_dim != 2 {
        return Err(Error::Domain("phase scan needs a two-dimensional fiber".into()));
    }
    let w = matrix_moments(symbol, 2 * n)?;
    thetas
        .par_iter()
        .map(|&t| {
            let phi = superposition(t);
            let a = amplitudes_from_moments(&state_moments(&w, &phi)?)?;
            Ok((t, extrapolated_return(&a, n)))
        })
        .collect()
}

/// The same scan for the coin walk through the closed-form Schur function.
pub fn coin_phase_scan(gamma: C, thetas: &[f64], nodes: usize) -> Result<Vec<(f64, Quadrature)>> {
    thetas.par_iter().map(|&t| coin_state_return(gamma, &superposition(t), nodes).map(|q| (t, q))).collect()
}

pub fn superposition(theta: f64) -> [C; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [C::new(s, 0.0), C::from_polar(s, theta)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmv::{constant_coin_return, WalkDomain};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn up() -> [C; 2] {
        [C::new(1.0, 0.0), C::new(0.0, 0.0)]
    }

    fn down() -> [C; 2] {
        [C::new(0.0, 0.0), C::new(1.0, 0.0)]
    }

    #[test]
    fn non_unitary_symbol_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[C::new(1.0, 0.0), C::new(0.5, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0)]);
        assert!(MomentumSymbol::new(1, 2, vec![(vec![1], a)]).is_err());
    }

    #[test]
    fn constant_symbol() {
        let u0 = DMatrix::from_row_slice(2, 2, &[C::new(0.0, 1.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(-1.0, 0.0)]);
        let sym = MomentumSymbol::constant(u0.clone(), 1).unwrap();
        let z = C::new(0.3, 0.4);
        let s = stieltjes_operator(&sym, z, &QuadratureConfig::default()).unwrap();
        let expect = (DMatrix::<C>::identity(2, 2) - &u0 * z).try_inverse().unwrap();
        assert!((s.m - expect).iter().all(|c| c.norm() < 1e-14));
        let m0 = stieltjes_operator(&sym, C::new(0.0, 0.0), &QuadratureConfig::default()).unwrap();
        assert!((m0.m - DMatrix::<C>::identity(2, 2)).iter().all(|c| c.norm() < 1e-15));
        // eigenvector: f = conj(eigenvalue)
        let f = schur_from_state(&sym, &up(), C::new(0.2, 0.1), &QuadratureConfig::default()).unwrap();
        assert!((f - C::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let g = C::from_polar(0.6, 0.5);
        let sym = MomentumSymbol::coin_walk(g).unwrap();
        for z in [C::new(0.5, 0.2), C::new(-0.3, -0.7), C::new(0.0, 0.9)] {
            let q = stieltjes_operator(&sym, z, &QuadratureConfig::default()).unwrap();
            let c = coin_stieltjes_closed_form(g, z).unwrap();
            let d = (&q.m - &c.m).iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert!(d < 1e-10, "z = {z}: {d}");
            assert!((q.m[(0, 1)]).norm() > 1e-3);
        }
        assert!(stieltjes_operator(&sym, C::new(0.9999999, 0.0), &QuadratureConfig::default()).is_err());
    }

    #[test]
    fn basis_states_give_line_return() {
        let g = C::new(FRAC_1_SQRT_2, 0.0);
        let exact = 8.0 / PI - 2.0;
        for phi in [up(), down()] {
            let q = coin_state_return(g, &phi, 96).unwrap();
            assert!((q.value - exact).abs() < 1e-12, "{}", q.value);
        }
    }

    #[test]
    fn moments_route_matches_closed_form() {
        let g = C::new(FRAC_1_SQRT_2, 0.0);
        let sym = MomentumSymbol::coin_walk(g).unwrap();
        let r = fourier_return_probability(&sym, &up(), 1000).unwrap();
        let exact = constant_coin_return(g, WalkDomain::Line).unwrap();
        assert!((r.value - exact).abs() < 1e-8, "{} vs {exact}", r.value);
        assert!(r.partial <= exact);
    }

    #[test]
    fn phase_scan_is_periodic_and_varies() {
        let g = C::new(FRAC_1_SQRT_2, 0.0);
        let scan = coin_phase_scan(g, &[0.3, 0.3 + TAU, 1.2, 2.5], 96).unwrap();
        assert!((scan[0].1.value - scan[1].1.value).abs() < 1e-12);
        let spread = scan.iter().map(|s| s.1.value).fold(f64::NEG_INFINITY, f64::max)
            - scan.iter().map(|s| s.1.value).fold(f64::INFINITY, f64::min);
        assert!(spread > 1e-3);
    }

    #[test]
    fn symbol_json_round_trip() {
        let sym = MomentumSymbol::coin_walk(C::new(0.3, 0.2)).unwrap();
        let j = serde_json::to_string(&sym.to_json()).unwrap();
        let back = MomentumSymbol::from_json(&serde_json::from_str(&j).unwrap()).unwrap();
        assert_eq!(sym, back);
    }
}
