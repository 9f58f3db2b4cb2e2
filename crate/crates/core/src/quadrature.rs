//! Quadrature on the circle.
//!
//! Smooth periodic integrands use the equispaced trapezoidal rule with
//! dyadic refinement (nested grids, so each level reuses the previous
//! samples). Integrands with square-root branch points at known angles use
//! Gauss–Legendre on each arc after a cosine substitution that clusters
//! nodes at the arc ends and removes the endpoint singularity.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Result of an adaptive quadrature: value, final node count, and the
/// difference between the last two refinement levels.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub nodes: usize,
    pub error_estimate: f64,
}

/// `(1/2pi) * integral over [0, 2pi)` of a periodic function, trapezoidal rule
/// with `m` nodes.
pub fn periodic_mean<F: Fn(f64) -> f64>(f: F, m: usize) -> f64 {
    let h = TAU / m as f64;
    (0..m).map(|j| f(j as f64 * h)).sum::<f64>() / m as f64
}

/// Trapezoidal periodic mean refined by doubling until two successive levels
/// agree to `tol * max(1, |value|)`.
pub fn adaptive_periodic_mean<F: Fn(f64) -> f64>(
    f: F,
    start: usize,
    tol: f64,
    max_nodes: usize,
) -> Result<Quadrature> {
    let mut m = start.max(4);
    let mut sum: f64 = (0..m).map(|j| f(j as f64 * TAU / m as f64)).sum();
    let mut prev = sum / m as f64;
    let mut refinements = 0;
    while 2 * m <= max_nodes {
        let h = TAU / (2 * m) as f64;
        sum += (0..m).map(|j| f((2 * j + 1) as f64 * h)).sum::<f64>();
        m *= 2;
        refinements += 1;
        let cur = sum / m as f64;
        let err = (cur - prev).abs();
        if err <= tol * cur.abs().max(1.0) {
            return Ok(Quadrature { value: cur, nodes: m, error_estimate: err });
        }
        prev = cur;
    }
    Err(Error::Resolution {
        what: format!("periodic trapezoid did not reach tolerance {tol:e} (last value {prev})"),
        refinements,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn arc_integral<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    // t = a + (b - a)(1 - cos(pi s))/2 on s in [0, 1]
    let half = 0.5 * (b - a);
    nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| {
            let s = 0.5 * (x + 1.0);
            let t = a + half * (1.0 - (PI * s).cos());
            let jac = half * PI * (PI * s).sin() * 0.5;
            w * jac * f(t)
        })
        .sum()
}

/// `(1/2pi) * integral over the circle` of `f(t)`, split into arcs at the given
/// breakpoints (angles, any range). `n` Gauss nodes per arc; the error estimate
/// compares against `n/2` nodes.
pub fn circle_mean_with_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    n: usize,
) -> Quadrature {
    let mut b: Vec<f64> = breakpoints.iter().map(|t| t.rem_euclid(TAU)).collect();
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    if b.is_empty() {
        b.push(0.0);
    }
    let first = b[0];
    b.push(first + TAU);
    let (xn, wn) = gauss_legendre(n);
    let (xh, wh) = gauss_legendre((n / 2).max(2));
    let mut fine = 0.0;
    let mut coarse = 0.0;
    for w in b.windows(2) {
        fine += arc_integral(&f, w[0], w[1], &xn, &wn);
        coarse += arc_integral(&f, w[0], w[1], &xh, &wh);
    }
    Quadrature {
        value: fine / TAU,
        nodes: n * (b.len() - 1),
        error_estimate: ((fine - coarse) / TAU).abs(),
    }
}

/// Repeated Richardson extrapolation for samples taken at step sizes that
/// halve from one sample to the next, with error expansion in integer powers
/// of the step. Returns the most extrapolated value and the difference to the
/// previous entry of the same column.
pub fn richardson_halving(samples: &[f64], levels: usize) -> (f64, f64) {
    let mut table: Vec<f64> = samples.to_vec();
    let levels = levels.min(samples.len().saturating_sub(2));
    for j in 1..=levels {
        let factor = 2f64.powi(j as i32);
        table = table
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
    }
    let n = table.len();
    if n == 1 {
        return (table[0], f64::INFINITY);
    }
    (table[n - 1], (table[n - 1] - table[n - 2]).abs())
}
