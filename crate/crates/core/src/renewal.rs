//! Classical renewal theory for Markov chains and the SJK comparison
//! quantities built from `p_n = |<phi|U^n phi>|^2`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::MomentSequence;

/// Row-stochastic chain stored by sparse rows. Rows of `boundary` states
/// may be sub-stochastic: the missing mass leaks out of a truncated window.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    rows: Vec<Vec<(usize, f64)>>,
    origin: usize,
    boundary: Vec<usize>,
}

/// JSON form `{"P": [[...]], "origin": 0, "pi": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default)]
    pub origin: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
}

const ROW_TOL: f64 = 1e-12;

impl MarkovChain {
    pub fn from_dense(p: &[Vec<f64>], origin: usize) -> Result<Self> {
        let n = p.len();
        let rows = p
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if row.len() != n {
                    return Err(Error::Domain(format!("row {i} has length {} in a {n}-state chain", row.len())));
                }
                Ok(row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows, origin, Vec::new())
    }

    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, origin: usize, boundary: Vec<usize>) -> Result<Self> {
        let n = rows.len();
        if origin >= n {
            return Err(Error::Domain(format!("origin {origin} outside {n} states")));
        }
        for (i, row) in rows.iter().enumerate() {
            if let Some(&(j, v)) = row.iter().find(|(j, v)| *j >= n || !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::invariant(format!("entry P[{i}][{j}] = {v} invalid"), ROW_TOL));
            }
            let sum: f64 = row.iter().map(|(_, v)| v).sum();
            let ok = if boundary.contains(&i) { sum <= 1.0 + ROW_TOL } else { (sum - 1.0).abs() <= ROW_TOL };
            if !ok {
                return Err(Error::invariant(format!("row {i} sums to {sum}"), ROW_TOL));
            }
        }
        Ok(Self { rows, origin, boundary })
    }

    pub fn from_spec(spec: &ChainSpec) -> Result<Self> {
        Self::from_dense(&spec.p, spec.origin)
    }

    /// Nearest-neighbour walk on `-window..=window`, stepping right with
    /// probability `right`; mass stepping past the ends is lost.
    pub fn biased_walk(window: usize, right: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&right) {
            return Err(Error::Domain(format!("step probability {right} outside [0, 1]")));
        }
        let n = 2 * window + 1;
        let rows = (0..n)
            .map(|i| {
                let mut r = Vec::with_capacity(2);
                if i > 0 {
                    r.push((i - 1, 1.0 - right));
                }
                if i + 1 < n {
                    r.push((i + 1, right));
                }
                r
            })
            .collect();
        Self::from_rows(rows, window, vec![0, n - 1])
    }

    pub fn symmetric_walk(window: usize) -> Result<Self> {
        Self::biased_walk(window, 0.5)
    }

    pub fn states(&self) -> usize {
        self.rows.len()
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.states();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Stationary distribution from `(P^T - 1) pi = 0`, `sum pi = 1`.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.states();
        let mut a = self.dense().transpose() - DMatrix::identity(n, n);
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let pi = a.lu().solve(&rhs).ok_or_else(|| Error::IllConditioned {
            what: "stationary distribution is not unique".into(),
            tol: 0.0,
        })?;
        Ok(pi.iter().copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSequence {
    /// `p_0..p_N`.
    pub p: Vec<f64>,
    /// Mass lost through truncation boundaries after `N` steps.
    pub leakage: f64,
    pub warning: Option<String>,
}

/// `p_n = (P^n)_{00}` by propagating a single row vector.
pub fn return_sequence(chain: &MarkovChain, n_max: usize) -> ReturnSequence {
    let n = chain.states();
    let mut v = vec![0.0; n];
    v[chain.origin] = 1.0;
    let mut next = vec![0.0; n];
    let mut p = Vec::with_capacity(n_max + 1);
    p.push(1.0);
    for _ in 0..n_max {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in chain.rows.iter().enumerate() {
            let vi = v[i];
            if vi != 0.0 {
                for &(j, w) in row {
                    next[j] += vi * w;
                }
            }
        }
        std::mem::swap(&mut v, &mut next);
        p.push(v[chain.origin]);
    }
    let leakage = (1.0 - v.iter().sum::<f64>()).max(0.0);
    let warning = (leakage > ROW_TOL).then(|| format!("truncation boundary absorbed probability {leakage:e}"));
    ReturnSequence { p, leakage, warning }
}

/// `q_n = p_n - sum_{k=1}^{n-1} q_k p_{n-k}`, `q_0 = 0`; negative values are kept.
pub fn first_return_from_return(p: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; p.len()];
    for n in 1..p.len() {
        let conv: f64 = (1..n).map(|k| q[k] * p[n - k]).sum();
        q[n] = p[n] - conv;
    }
    q
}

/// Inverse of [`first_return_from_return`]: `p_n = sum_{k=1}^{n} q_k p_{n-k}`, `p_0 = 1`.
pub fn return_from_first_return(q: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; q.len()];
    if !p.is_empty() {
        p[0] = 1.0;
    }
    for n in 1..q.len() {
        p[n] = (1..=n).map(|k| q[k] * p[n - k]).sum();
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyaConfig {
    /// Relative size of `S(N) - S(N/2)` below which the sum counts as converged.
    pub tail_tol: f64,
    /// Minimum `S(N)/S(N/2) - 1` that counts as divergence.
    pub growth_min: f64,
}

impl Default for PolyaConfig {
    fn default() -> Self {
        Self { tail_tol: 1e-12, growth_min: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolyaOutcome {
    Recurrent { partial_sum: f64, growth_ratio: f64 },
    /// `R^C = 1 - 1/sum p_n`.
    Transient { partial_sum: f64, return_probability: f64 },
    Inconclusive { partial_sum: f64, growth_ratio: f64 },
}

/// Recurrence iff `sum p_n` diverges, judged from the partial sums at `N/2` and `N`.
pub fn polya_classify(p: &[f64], config: &PolyaConfig) -> PolyaOutcome {
    let n = p.len().saturating_sub(1);
    let full: f64 = p.iter().sum();
    let half: f64 = p.iter().take(n / 2 + 1).sum();
    let growth_ratio = full / half;
    if full - half <= config.tail_tol * full {
        PolyaOutcome::Transient { partial_sum: full, return_probability: 1.0 - 1.0 / full }
    } else if growth_ratio >= 1.0 + config.growth_min {
        PolyaOutcome::Recurrent { partial_sum: full, growth_ratio }
    } else {
        PolyaOutcome::Inconclusive { partial_sum: full, growth_ratio }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReversibleSpectrum {
    pub eigenvalues: Vec<f64>,
    /// `p_n = sum w_i lambda_i^n`.
    pub weights: Vec<f64>,
    pub mass_at_one: f64,
    /// `1/m({1})` when the mass is positive.
    pub tau_c: Option<f64>,
}

/// Spectral measure of the origin for a reversible chain, from the
/// symmetrization `D^{1/2} P D^{-1/2}` with `D = diag(pi)`.
pub fn reversible_spectral(chain: &MarkovChain, pi: &[f64]) -> Result<ReversibleSpectrum> {
    let n = chain.states();
    if pi.len() != n {
        return Err(Error::Domain(format!("pi has {} entries for {n} states", pi.len())));
    }
    if let Some((i, v)) = pi.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Domain(format!("pi[{i}] = {v} must be positive")));
    }
    let p = chain.dense();
    for i in 0..n {
        for j in 0..n {
            let d = (pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs();
            if d > 1e-10 {
                return Err(Error::invariant(format!("detailed balance fails for pair ({i}, {j}): defect {d:e}"), 1e-10));
            }
        }
    }
    let a = DMatrix::from_fn(n, n, |i, j| (pi[i] / pi[j]).sqrt() * p[(i, j)]);
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let o = chain.origin;
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let weights: Vec<f64> = (0..n).map(|k| eig.eigenvectors[(o, k)].powi(2)).collect();
    let mass_at_one: f64 =
        eigenvalues.iter().zip(&weights).filter(|(l, _)| (*l - 1.0).abs() < 1e-10).map(|(_, w)| w).sum();
    let tau_c = (mass_at_one > 0.0).then(|| 1.0 / mass_at_one);
    Ok(ReversibleSpectrum { eigenvalues, weights, mass_at_one, tau_c })
}

/// `p_n = |mu_n|^2` for `n = 0..N`.
pub fn quantum_return_sequence(moments: &MomentSequence) -> Vec<f64> {
    moments.mu.iter().map(|m| m.norm_sqr()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SjkQuantities {
    /// `1 - prod (1 - p_n)` over the summed range.
    pub r_sjk: f64,
    /// `s_n = prod_{k <= n} (1 - p_k)`, `s_0 = 1`.
    pub survival: Vec<f64>,
    /// `q^SJK_n = p_n prod_{k < n} (1 - p_k)`, `q_0 = 0`.
    pub q_sjk: Vec<f64>,
    /// `sum n q^SJK_n`.
    pub tau_sjk: f64,
    /// The product never fell below the cutoff: `tau_sjk` is only a lower bound.
    pub tau_is_lower_bound: bool,
}

const SJK_PRODUCT_CUTOFF: f64 = 1e-14;

/// SJK return statistics of a quantum return sequence `p_0..p_N` (`p_0` is ignored).
pub fn sjk_quantities(p: &[f64]) -> Result<SjkQuantities> {
    if let Some((n, v)) = p.iter().enumerate().skip(1).find(|(_, v)| !(0.0..=1.0 + 1e-12).contains(*v)) {
        return Err(Error::Domain(format!("p_{n} = {v} outside [0, 1]")));
    }
    let mut survival = vec![1.0];
    let mut q_sjk = vec![0.0];
    let mut tau = 0.0;
    let mut lower = true;
    for (n, &pn) in p.iter().enumerate().skip(1) {
        let pn = pn.min(1.0);
        let prev = *survival.last().unwrap();
        let q = pn * prev;
        q_sjk.push(q);
        survival.push(prev * (1.0 - pn));
        tau += n as f64 * q;
        if *survival.last().unwrap() < SJK_PRODUCT_CUTOFF {
            lower = false;
            break;
        }
    }
    Ok(SjkQuantities { r_sjk: 1.0 - survival.last().unwrap(), survival, q_sjk, tau_sjk: tau, tau_is_lower_bound: lower })
}

/// `sum_{n <= m} n q_n = sum_{n < m} s_n - m s_m`, the survival form of the truncated mean.
pub fn tau_from_survival(survival: &[f64]) -> f64 {
    let m = survival.len() - 1;
    survival[..m].iter().sum::<f64>() - m as f64 * survival[m]
}

/// `1 / sum m_k^2` from atom weights.
pub fn tau_tilde(weights: &[f64]) -> Result<f64> {
    let s: f64 = weights.iter().map(|w| w * w).sum();
    if s <= 0.0 {
        return Err(Error::Domain("no atoms: tau tilde is infinite".into()));
    }
    Ok(1.0 / s)
}

/// `1 / ((1/N) sum_{1 <= n <= N} p_n)`, converging to [`tau_tilde`] by Wiener's theorem.
pub fn tau_tilde_cesaro(p: &[f64]) -> f64 {
    let n = p.len() - 1;
    let mean = p[1..].iter().sum::<f64>() / n as f64;
    1.0 / mean
}
