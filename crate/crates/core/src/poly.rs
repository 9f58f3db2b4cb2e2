//! Dense complex polynomials and truncated power series.
//!
//! Coefficients are stored in ascending order of powers throughout.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C = Complex64;

pub fn eval(coeffs: &[C], z: C) -> C {
    coeffs.iter().rev().fold(C::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// `sum |c_k| |z|^k`, the natural scale for judging a residual `eval(coeffs, z)`.
pub fn eval_scale(coeffs: &[C], z: C) -> f64 {
    let r = z.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

pub fn derivative(coeffs: &[C]) -> Vec<C> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

pub fn mul(a: &[C], b: &[C]) -> Vec<C> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![C::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `a + s * b`, padded to the longer length.
pub fn axpy(a: &[C], s: C, b: &[C]) -> Vec<C> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| {
            a.get(k).copied().unwrap_or_default() + s * b.get(k).copied().unwrap_or_default()
        })
        .collect()
}

/// Drops trailing coefficients that are negligible relative to the largest one.
pub fn trim(coeffs: &mut Vec<C>, rel: f64) {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm() <= rel * scale) {
        coeffs.pop();
    }
}

/// Product `prod (z - r_k)` in ascending coefficients.
pub fn from_roots(roots: &[C]) -> Vec<C> {
    roots
        .iter()
        .fold(vec![C::new(1.0, 0.0)], |acc, &r| mul(&acc, &[-r, C::new(1.0, 0.0)]))
}

/// First `n` coefficients of `a * b`.
pub fn series_mul(a: &[C], b: &[C], n: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); n];
    for k in 0..n {
        let mut acc = C::new(0.0, 0.0);
        for j in 0..=k {
            if let (Some(&x), Some(&y)) = (a.get(j), b.get(k - j)) {
                acc += x * y;
            }
        }
        out[k] = acc;
    }
    out
}

/// First `n` coefficients of `num / den`; requires `den[0] != 0`.
pub fn series_div(num: &[C], den: &[C], n: usize) -> Result<Vec<C>> {
    let d0 = den.first().copied().unwrap_or_default();
    if d0.norm() == 0.0 {
        return Err(Error::Domain("power-series division by a series with zero constant term".into()));
    }
    let mut out = vec![C::new(0.0, 0.0); n];
    for k in 0..n {
        let mut acc = num.get(k).copied().unwrap_or_default();
        for j in 1..=k.min(den.len().saturating_sub(1)) {
            acc -= den[j] * out[k - j];
        }
        out[k] = acc / d0;
    }
    Ok(out)
}

/// Roots of the polynomial via eigenvalues of its companion matrix, each
/// polished by Newton steps that are kept only when they reduce the residual.
pub fn roots(coeffs: &[C]) -> Result<Vec<C>> {
    let mut c = coeffs.to_vec();
    trim(&mut c, 1e-14);
    let degree = c.len().saturating_sub(1);
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = c[degree];
    // Exact zero roots are split off so the companion matrix stays well scaled.
    let zeros_at_origin = c.iter().take_while(|x| x.norm() == 0.0).count();
    let reduced: Vec<C> = c[zeros_at_origin..].iter().map(|&x| x / lead).collect();
    let m = reduced.len() - 1;
    let mut out = vec![C::new(0.0, 0.0); zeros_at_origin];
    if m > 0 {
        let mut comp = DMatrix::<C>::zeros(m, m);
        for i in 1..m {
            comp[(i, i - 1)] = C::new(1.0, 0.0);
        }
        for i in 0..m {
            comp[(i, m - 1)] = -reduced[i];
        }
        let eig = Schur::new(comp)
            .eigenvalues()
            .ok_or_else(|| Error::EstimationFailure {
                what: "companion matrix eigenvalues".into(),
                diagnostics: format!("Schur decomposition failed for degree {m}"),
            })?;
        out.extend(eig.iter().copied());
    }
    let dc = derivative(&c);
    for z in out.iter_mut() {
        for _ in 0..3 {
            let p = eval(&c, *z);
            let dp = eval(&dc, *z);
            if dp.norm() == 0.0 {
                break;
            }
            let cand = *z - p / dp;
            if eval(&c, cand).norm() < p.norm() {
                *z = cand;
            } else {
                break;
            }
        }
    }
    Ok(out)
}
