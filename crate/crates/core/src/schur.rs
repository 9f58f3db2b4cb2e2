//! Schur functions: representations, the Schur algorithm, zeros, winding
//! numbers, variance from zeros and Toeplitz feasibility of amplitude data.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::measure::{CaratheodoryFunction, MomentSequence, UnitCircleMeasure};
use crate::poly::{self, C};

/// An analytic self-map of the disk that can be evaluated pointwise.
pub trait SchurFunction {
    fn eval(&self, z: C) -> Result<C>;
}

impl SchurFunction for UnitCircleMeasure {
    fn eval(&self, z: C) -> Result<C> {
        if z.norm() < 1.0 {
            self.schur(z)
        } else {
            self.schur_on_circle(z.arg())
        }
    }
}

impl<S: SchurFunction + ?Sized> SchurFunction for &S {
    fn eval(&self, z: C) -> Result<C> {
        (**self).eval(z)
    }
}

/// Carathéodory function `(1 + z f)/(1 - z f)` of a Schur function.
pub struct CaratheodoryOf<S>(pub S);

impl<S: SchurFunction> CaratheodoryFunction for CaratheodoryOf<S> {
    fn caratheodory_at(&self, z: C) -> Result<C> {
        let zf = z * self.0.eval(z)?;
        Ok((1.0 + zf) / (1.0 - zf))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VerblunskyTail {
    /// `f_K = 0`.
    Zero,
    /// The last `period` listed parameters repeat forever.
    Periodic(usize),
    /// `f_K` is the given unimodular constant (finite Blaschke product).
    Terminal(C),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerblunskySequence {
    pub gamma: Vec<C>,
    pub tail: VerblunskyTail,
}

impl VerblunskySequence {
    pub fn new(gamma: Vec<C>, tail: VerblunskyTail) -> Result<Self> {
        if let Some((k, g)) = gamma.iter().enumerate().find(|(_, g)| !(g.norm() < 1.0)) {
            return Err(Error::Domain(format!("|gamma_{k}| = {} must be < 1", g.norm())));
        }
        match tail {
            VerblunskyTail::Periodic(p) if p == 0 || p > gamma.len() => {
                return Err(Error::Domain(format!("period {p} incompatible with {} parameters", gamma.len())));
            }
            VerblunskyTail::Terminal(u) if (u.norm() - 1.0).abs() > 1e-10 => {
                return Err(Error::Domain(format!("terminal value {u} is not unimodular")));
            }
            _ => {}
        }
        Ok(Self { gamma, tail })
    }

    pub fn rho(&self) -> Vec<f64> {
        self.gamma.iter().map(|g| (1.0 - g.norm_sqr()).sqrt()).collect()
    }

    /// `gamma_k` for any `k`, following the tail; `None` past a terminal value.
    pub fn get(&self, k: usize) -> Option<C> {
        let n = self.gamma.len();
        if k < n {
            return Some(self.gamma[k]);
        }
        match self.tail {
            VerblunskyTail::Zero => Some(C::new(0.0, 0.0)),
            VerblunskyTail::Periodic(p) => Some(self.gamma[n - p + (k - n) % p]),
            VerblunskyTail::Terminal(_) => None,
        }
    }

    pub fn eval(&self, z: C) -> Result<C> {
        let mut f = match self.tail {
            VerblunskyTail::Zero => C::new(0.0, 0.0),
            VerblunskyTail::Terminal(u) => u,
            VerblunskyTail::Periodic(p) => {
                let n = self.gamma.len();
                periodic_fixed_point(&self.gamma[n - p..], z)?
            }
        };
        for g in self.gamma.iter().rev() {
            f = inverse_schur_step(*g, z, f);
        }
        Ok(f)
    }
}

/// `(gamma + z w)/(1 + conj(gamma) z w)`.
pub fn inverse_schur_step(gamma: C, z: C, w: C) -> C {
    let zw = z * w;
    (gamma + zw) / (1.0 + gamma.conj() * zw)
}

/// Fixed point in the closed disk of the composed Möbius map of one period.
fn periodic_fixed_point(period: &[C], z: C) -> Result<C> {
    // compose w -> (g + z w)/(1 + conj(g) z w) as 2x2 matrices, outermost first
    let mut m = [[C::new(1.0, 0.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::new(1.0, 0.0)]];
    for g in period {
        let step = [[z, *g], [g.conj() * z, C::new(1.0, 0.0)]];
        m = [
            [m[0][0] * step[0][0] + m[0][1] * step[1][0], m[0][0] * step[0][1] + m[0][1] * step[1][1]],
            [m[1][0] * step[0][0] + m[1][1] * step[1][0], m[1][0] * step[0][1] + m[1][1] * step[1][1]],
        ];
    }
    let [[a, b], [c, d]] = m;
    // c w^2 + (d - a) w - b = 0
    let scale = a.norm().max(b.norm()).max(c.norm()).max(d.norm());
    if c.norm() <= 1e-14 * scale {
        let denom = d - a;
        if denom.norm() == 0.0 {
            return Err(Error::Branch(format!("{z}: degenerate periodic fixed point")));
        }
        return Ok(b / denom);
    }
    let p = d - a;
    let disc = (p * p + 4.0 * b * c).sqrt();
    let q = if (p.conj() * disc).re >= 0.0 { -(p + disc) / 2.0 } else { -(p - disc) / 2.0 };
    let candidates = [q / c, if q.norm() > 0.0 { -b / q } else { C::new(0.0, 0.0) }];
    let w = if candidates[0].norm() <= candidates[1].norm() { candidates[0] } else { candidates[1] };
    if w.norm() > 1.0 + 1e-8 {
        return Err(Error::Branch(format!("{z}: no fixed point inside the disk")));
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchurRepresentation {
    Rational { num: Vec<C>, den: Vec<C> },
    Blaschke { zeros: Vec<C>, beta: C },
    Taylor { coeffs: Vec<C> },
    Verblunsky(VerblunskySequence),
}

impl SchurFunction for SchurRepresentation {
    fn eval(&self, z: C) -> Result<C> {
        match self {
            SchurRepresentation::Rational { num, den } => {
                let p = poly::eval(den, z);
                if p.norm() <= 1e-14 * poly::eval_scale(den, z) {
                    return Err(Error::Pole(format!("denominator vanishes at {z}")));
                }
                Ok(poly::eval(num, z) / p)
            }
            SchurRepresentation::Blaschke { zeros, beta } => {
                let mut v = *beta;
                for a in zeros {
                    let d = 1.0 - a.conj() * z;
                    if d.norm() == 0.0 {
                        return Err(Error::Pole(format!("Blaschke factor pole at {z}")));
                    }
                    v *= (a - z) / d;
                }
                Ok(v)
            }
            SchurRepresentation::Taylor { coeffs } => Ok(poly::eval(coeffs, z)),
            SchurRepresentation::Verblunsky(v) => v.eval(z),
        }
    }
}

impl SchurRepresentation {
    pub fn blaschke(zeros: Vec<C>, beta: C) -> Result<Self> {
        if let Some(a) = zeros.iter().find(|a| !(a.norm() < 1.0)) {
            return Err(Error::Domain(format!("Blaschke zero {a} is not inside the disk")));
        }
        if (beta.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("Blaschke prefactor {beta} is not unimodular")));
        }
        Ok(SchurRepresentation::Blaschke { zeros, beta })
    }

    pub fn rational(mut num: Vec<C>, mut den: Vec<C>) -> Result<Self> {
        poly::trim(&mut num, 1e-15);
        poly::trim(&mut den, 1e-15);
        if den.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::Domain("zero denominator".into()));
        }
        Ok(SchurRepresentation::Rational { num, den })
    }

    /// Rational inner Schur function `R/P` of a finite-atom measure with
    /// `R = sum m_i conj(u_i) prod_{j != i}(1 - conj(u_j) z)` and
    /// `P = sum m_i prod_{j != i}(1 - conj(u_j) z)`.
    pub fn from_atomic_measure(measure: &UnitCircleMeasure) -> Result<Self> {
        if !measure.is_finite_atomic() {
            return Err(Error::Domain("measure has an absolutely continuous part".into()));
        }
        let atoms = measure.atoms();
        let conj_pos: Vec<C> = atoms.iter().map(|a| a.position().conj()).collect();
        let mut num = vec![C::new(0.0, 0.0); atoms.len()];
        let mut den = vec![C::new(0.0, 0.0); atoms.len()];
        for (i, a) in atoms.iter().enumerate() {
            let mut term = vec![C::new(a.weight, 0.0)];
            for (j, ub) in conj_pos.iter().enumerate() {
                if j != i {
                    term = poly::mul(&term, &[C::new(1.0, 0.0), -ub]);
                }
            }
            for (k, t) in term.iter().enumerate() {
                den[k] += t;
                num[k] += t * conj_pos[i];
            }
        }
        Self::rational(num, den)
    }

    /// Taylor coefficients `c_0..c_{n-1}` at the origin.
    pub fn taylor_coefficients(&self, n: usize) -> Result<Vec<C>> {
        match self {
            SchurRepresentation::Rational { num, den } => poly::series_div(num, den, n),
            SchurRepresentation::Blaschke { zeros, beta } => {
                let mut num = vec![*beta];
                let mut den = vec![C::new(1.0, 0.0)];
                for a in zeros {
                    num = poly::mul(&num, &[*a, C::new(-1.0, 0.0)]);
                    den = poly::mul(&den, &[C::new(1.0, 0.0), -a.conj()]);
                }
                poly::series_div(&num, &den, n)
            }
            SchurRepresentation::Taylor { coeffs } => {
                let mut c = coeffs.clone();
                c.resize(n, C::new(0.0, 0.0));
                Ok(c)
            }
            SchurRepresentation::Verblunsky(v) => Ok(taylor_from_verblunsky(v, n)),
        }
    }

    /// Blaschke form of an inner rational function.
    pub fn to_blaschke(&self, tol: &Tolerances) -> Result<Self> {
        match self {
            SchurRepresentation::Blaschke { .. } => Ok(self.clone()),
            SchurRepresentation::Rational { .. } => {
                let zeros = blaschke_zeros(self, tol)?;
                let b = SchurRepresentation::Blaschke { zeros, beta: C::new(1.0, 0.0) };
                let probe = (0..8)
                    .map(|k| C::from_polar(0.5, 0.7 * k as f64))
                    .max_by(|x, y| {
                        let bx = b.eval(*x).map(|v| v.norm()).unwrap_or(0.0);
                        let by = b.eval(*y).map(|v| v.norm()).unwrap_or(0.0);
                        bx.partial_cmp(&by).unwrap()
                    })
                    .unwrap();
                let beta = self.eval(probe)? / b.eval(probe)?;
                let SchurRepresentation::Blaschke { zeros, .. } = b else { unreachable!() };
                Ok(SchurRepresentation::Blaschke { zeros, beta: beta / beta.norm() })
            }
            _ => Err(Error::Domain("only rational and Blaschke forms have a finite Blaschke factorization".into())),
        }
    }
}

/// JSON form of [`SchurRepresentation`], tagged by `"type"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchurSpec {
    Rational { num: Vec<C>, den: Vec<C> },
    Blaschke { zeros: Vec<C>, beta: C },
    Taylor { coeffs: Vec<C> },
    Verblunsky {
        gamma: Vec<C>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        terminal: Option<C>,
    },
}

impl TryFrom<SchurSpec> for SchurRepresentation {
    type Error = Error;

    fn try_from(spec: SchurSpec) -> Result<Self> {
        match spec {
            SchurSpec::Rational { num, den } => SchurRepresentation::rational(num, den),
            SchurSpec::Blaschke { zeros, beta } => SchurRepresentation::blaschke(zeros, beta),
            SchurSpec::Taylor { coeffs } => Ok(SchurRepresentation::Taylor { coeffs }),
            SchurSpec::Verblunsky { gamma, period, terminal } => {
                let tail = match (period, terminal) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Domain("verblunsky tail cannot be both periodic and terminal".into()))
                    }
                    (Some(p), None) => VerblunskyTail::Periodic(p),
                    (None, Some(u)) => VerblunskyTail::Terminal(u),
                    (None, None) => VerblunskyTail::Zero,
                };
                Ok(SchurRepresentation::Verblunsky(VerblunskySequence::new(gamma, tail)?))
            }
        }
    }
}

impl From<&SchurRepresentation> for SchurSpec {
    fn from(rep: &SchurRepresentation) -> Self {
        match rep {
            SchurRepresentation::Rational { num, den } => SchurSpec::Rational { num: num.clone(), den: den.clone() },
            SchurRepresentation::Blaschke { zeros, beta } => SchurSpec::Blaschke { zeros: zeros.clone(), beta: *beta },
            SchurRepresentation::Taylor { coeffs } => SchurSpec::Taylor { coeffs: coeffs.clone() },
            SchurRepresentation::Verblunsky(v) => {
                let (period, terminal) = match v.tail {
                    VerblunskyTail::Zero => (None, None),
                    VerblunskyTail::Periodic(p) => (Some(p), None),
                    VerblunskyTail::Terminal(u) => (None, Some(u)),
                };
                SchurSpec::Verblunsky { gamma: v.gamma.clone(), period, terminal }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchurStep {
    Continue { gamma: C, next: SchurRepresentation },
    /// `|f(0)| = 1`: `f` is the unimodular constant `gamma`.
    Terminated { gamma: C },
}

fn max_modulus_on_circle<S: SchurFunction + ?Sized>(f: &S, radius: f64, m: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..m {
        worst = worst.max(f.eval(C::from_polar(radius, TAU * j as f64 / m as f64))?.norm());
    }
    Ok(worst)
}

/// One step of the Schur algorithm, `f_1 = (1/z)(f - gamma)/(1 - conj(gamma) f)`.
pub fn schur_step(f: &SchurRepresentation, tol: &Tolerances) -> Result<SchurStep> {
    let gamma = f.eval(C::new(0.0, 0.0))?;
    if gamma.norm() > 1.0 + tol.algebraic {
        return Err(Error::invariant(format!("|f(0)| = {} exceeds 1", gamma.norm()), tol.algebraic));
    }
    if 1.0 - gamma.norm() < tol.verblunsky_termination {
        return Ok(SchurStep::Terminated { gamma: gamma / gamma.norm() });
    }
    let next = match f {
        SchurRepresentation::Rational { num, den } => rational_step(num, den, gamma)?,
        SchurRepresentation::Blaschke { zeros, beta } => {
            let num = poly::from_roots(zeros).iter().map(|c| c * beta * if zeros.len() % 2 == 0 { 1.0 } else { -1.0 }).collect::<Vec<_>>();
            let den = zeros
                .iter()
                .fold(vec![C::new(1.0, 0.0)], |acc, a| poly::mul(&acc, &[C::new(1.0, 0.0), -a.conj()]));
            rational_step(&num, &den, gamma)?
        }
        SchurRepresentation::Taylor { coeffs } => {
            if coeffs.len() < 2 {
                SchurRepresentation::Taylor { coeffs: vec![C::new(0.0, 0.0)] }
            } else {
                let shifted: Vec<C> = coeffs[1..].to_vec();
                let den: Vec<C> = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| if k == 0 { 1.0 - gamma.conj() * c } else { -gamma.conj() * c })
                    .collect();
                SchurRepresentation::Taylor { coeffs: poly::series_div(&shifted, &den, coeffs.len() - 1)? }
            }
        }
        SchurRepresentation::Verblunsky(v) => {
            let next = if v.gamma.is_empty() {
                v.clone()
            } else {
                let tail = match v.tail {
                    VerblunskyTail::Periodic(p) => {
                        let mut g = v.gamma[1..].to_vec();
                        if g.len() < p {
                            g.push(v.gamma[0]);
                        }
                        return Ok(SchurStep::Continue {
                            gamma,
                            next: SchurRepresentation::Verblunsky(VerblunskySequence { gamma: g, tail: VerblunskyTail::Periodic(p) }),
                        });
                    }
                    ref t => t.clone(),
                };
                VerblunskySequence { gamma: v.gamma[1..].to_vec(), tail }
            };
            if next.gamma.is_empty() {
                if let VerblunskyTail::Terminal(u) = next.tail {
                    return Ok(SchurStep::Continue { gamma, next: SchurRepresentation::Taylor { coeffs: vec![u] } });
                }
            }
            SchurRepresentation::Verblunsky(next)
        }
    };
    if matches!(next, SchurRepresentation::Rational { .. }) {
        let m = max_modulus_on_circle(&next, 0.95, 64)?;
        if m > 1.0 + 1e-8 {
            return Err(Error::invariant(format!("Schur iterate leaves the disk: max |f_1| = {m} on |z| = 0.95"), 1e-8));
        }
    }
    Ok(SchurStep::Continue { gamma, next })
}

fn rational_step(num: &[C], den: &[C], gamma: C) -> Result<SchurRepresentation> {
    // (R - gamma P)/z over (P - conj(gamma) R)
    let mut top = poly::axpy(num, -gamma, den);
    top[0] = C::new(0.0, 0.0);
    let top: Vec<C> = if top.len() > 1 { top[1..].to_vec() } else { vec![C::new(0.0, 0.0)] };
    let bottom = poly::axpy(den, -gamma.conj(), num);
    SchurRepresentation::rational(top, bottom)
}

/// Outcome of Verblunsky extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct VerblunskyExtraction {
    pub sequence: VerblunskySequence,
    /// Index `k` and value at which `|gamma_k| = 1` was met (finite Blaschke product of degree `k`).
    pub termination: Option<(usize, C)>,
}

/// First `k_max` Verblunsky parameters of the Schur function with Taylor
/// coefficients `c` (requires `c.len() >= k_max`).
pub fn verblunsky_from_taylor(c: &[C], k_max: usize, tol: &Tolerances) -> Result<VerblunskyExtraction> {
    if c.len() < k_max {
        return Err(Error::Domain(format!("{} Taylor coefficients cannot determine {k_max} parameters", c.len())));
    }
    let mut f = SchurRepresentation::Taylor { coeffs: c.to_vec() };
    let mut gamma = Vec::with_capacity(k_max);
    for k in 0..k_max {
        match schur_step(&f, tol)? {
            SchurStep::Continue { gamma: g, next } => {
                gamma.push(g);
                f = next;
            }
            SchurStep::Terminated { gamma: u } => {
                return Ok(VerblunskyExtraction {
                    sequence: VerblunskySequence { gamma, tail: VerblunskyTail::Terminal(u) },
                    termination: Some((k, u)),
                });
            }
        }
    }
    Ok(VerblunskyExtraction { sequence: VerblunskySequence { gamma, tail: VerblunskyTail::Zero }, termination: None })
}

/// First `n` Taylor coefficients of the Schur function with the given parameters.
pub fn taylor_from_verblunsky(seq: &VerblunskySequence, n: usize) -> Vec<C> {
    if n == 0 {
        return Vec::new();
    }
    let mut gammas = Vec::with_capacity(n);
    let mut start = vec![C::new(0.0, 0.0)];
    for k in 0..n {
        match seq.get(k) {
            Some(g) => gammas.push(g),
            None => {
                if let VerblunskyTail::Terminal(u) = seq.tail {
                    start = vec![u];
                }
                break;
            }
        }
    }
    let mut f = start;
    for g in gammas.iter().rev() {
        let mut zf = vec![C::new(0.0, 0.0)];
        zf.extend(f.iter().take(n - 1));
        let num: Vec<C> = zf.iter().enumerate().map(|(k, c)| if k == 0 { g + c } else { *c }).collect();
        let den: Vec<C> = zf
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 { 1.0 + g.conj() * c } else { g.conj() * c })
            .collect();
        f = poly::series_div(&num, &den, n).expect("constant term is 1");
    }
    f.resize(n, C::new(0.0, 0.0));
    f
}

/// Taylor coefficients `c_0..c_{n-1}` of the Schur function from moments
/// `mu_0..mu_n`, via `f = ((b - 1)/z) / b` with `b = sum conj(mu_k) z^k`.
pub fn schur_taylor_from_moments(moments: &MomentSequence, n: usize) -> Result<Vec<C>> {
    if moments.truncation() < n {
        return Err(Error::Domain(format!("need moments up to order {n}")));
    }
    let b: Vec<C> = moments.mu.iter().take(n + 1).map(|m| m.conj()).collect();
    let g: Vec<C> = b[1..].to_vec();
    poly::series_div(&g, &b, n)
}

/// Moments `mu_0..mu_n` from Taylor coefficients `c_0..c_{n-1}`, via `b = 1/(1 - z f)`.
pub fn moments_from_schur_taylor(c: &[C]) -> MomentSequence {
    let n = c.len();
    let mut den = vec![C::new(1.0, 0.0)];
    den.extend(c.iter().map(|x| -x));
    let b = poly::series_div(&[C::new(1.0, 0.0)], &den, n + 1).expect("constant term is 1");
    MomentSequence { mu: b.into_iter().map(|x| x.conj()).collect() }
}

/// Zeros of an inner rational Schur function `R/P`; all lie in the open disk.
pub fn blaschke_zeros(f: &SchurRepresentation, tol: &Tolerances) -> Result<Vec<C>> {
    match f {
        SchurRepresentation::Blaschke { zeros, .. } => Ok(zeros.clone()),
        SchurRepresentation::Rational { num, den } => {
            let zs = poly::roots(num)?;
            for z in &zs {
                let rel = poly::eval(den, *z).norm() / poly::eval_scale(den, *z);
                if rel < tol.coprime {
                    return Err(Error::IllConditioned {
                        what: format!("numerator and denominator share a root near {z} (relative residual {rel:e})"),
                        tol: tol.coprime,
                    });
                }
                if z.norm() >= 1.0 {
                    return Err(Error::NotInner { max_deviation: z.norm() - 1.0, tol: tol.inner });
                }
            }
            Ok(zs)
        }
        _ => Err(Error::Domain("zeros are only available for rational and Blaschke forms".into())),
    }
}

/// `max | |f(e^{it})| - 1 |` over `m` equispaced points.
pub fn inner_deviation<S: SchurFunction + ?Sized>(f: &S, m: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..m {
        let v = f.eval(C::from_polar(1.0, TAU * j as f64 / m as f64))?;
        worst = worst.max((v.norm() - 1.0).abs());
    }
    Ok(worst)
}

/// Winding number of `g(t) = e^{it} conj(f(e^{-it}))` around the origin,
/// by phase unwrapping on a doubling grid starting at `m` points.
pub fn winding_number<S: SchurFunction + ?Sized>(f: &S, m: usize, tol: &Tolerances) -> Result<i64> {
    const MAX_NODES: usize = 1 << 22;
    let g = |t: f64| -> Result<C> { Ok(C::from_polar(1.0, t) * f.eval(C::from_polar(1.0, -t))?.conj()) };
    let mut m = m.max(8);
    let mut samples: Vec<C> = (0..m).map(|j| g(TAU * j as f64 / m as f64)).collect::<Result<_>>()?;
    let mut previous: Option<i64> = None;
    let mut refinements = 0;
    loop {
        let dev = samples.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max);
        if dev > tol.inner {
            return Err(Error::NotInner { max_deviation: dev, tol: tol.inner });
        }
        let mut total = 0.0;
        let mut max_step: f64 = 0.0;
        for j in 0..m {
            let step = (samples[(j + 1) % m] / samples[j]).arg();
            max_step = max_step.max(step.abs());
            total += step;
        }
        let winding = (total / TAU).round() as i64;
        let consistent = (total / TAU - winding as f64).abs() < 1e-6;
        if max_step < PI / 2.0 && consistent && previous == Some(winding) {
            return Ok(winding);
        }
        previous = if max_step < PI / 2.0 && consistent { Some(winding) } else { None };
        if 2 * m > MAX_NODES {
            return Err(Error::Resolution {
                what: format!("winding number: max phase step {max_step:.3} with {m} nodes"),
                refinements,
            });
        }
        let mut refined = Vec::with_capacity(2 * m);
        for j in 0..m {
            refined.push(samples[j]);
            refined.push(g(TAU * (2 * j + 1) as f64 / (2 * m) as f64)?);
        }
        samples = refined;
        m *= 2;
        refinements += 1;
    }
}

/// `Var tau = sum_{j,l} 2 z_l conj(z_j) / (1 - z_l conj(z_j))` for the zeros of
/// a rational inner Schur function.
pub fn variance_from_zeros(zeros: &[C]) -> Result<f64> {
    if let Some(z) = zeros.iter().find(|z| !(z.norm() < 1.0)) {
        return Err(Error::Domain(format!("zero {z} is not inside the disk")));
    }
    let mut total = C::new(0.0, 0.0);
    for zl in zeros {
        for zj in zeros {
            let w = zl * zj.conj();
            total += 2.0 * w / (1.0 - w);
        }
    }
    Ok(total.re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationarity {
    /// `|sum m_i / (u_i - z)|`.
    pub gradient_norm: f64,
    pub inside_hull: bool,
}

/// Gradient of the logarithmic potential of the atoms at `z`, and whether
/// `z` lies in the closed convex hull of the atoms.
pub fn electrostatic_stationarity(measure: &UnitCircleMeasure, z: C) -> Result<Stationarity> {
    if !measure.is_finite_atomic() {
        return Err(Error::Domain("stationarity needs a finite-atom measure".into()));
    }
    if !(z.norm() < 1.0) {
        return Err(Error::Domain(format!("|z| = {} must be < 1", z.norm())));
    }
    let mut grad = C::new(0.0, 0.0);
    for a in measure.atoms() {
        let d = a.position() - z;
        if d.norm() == 0.0 {
            return Err(Error::Pole(format!("z coincides with atom at angle {}", a.angle)));
        }
        grad += a.weight / d;
    }
    let points: Vec<C> = measure.atoms().iter().map(|a| a.position()).collect();
    Ok(Stationarity { gradient_norm: grad.norm(), inside_hull: in_circle_hull(&points, z, 1e-12) })
}

/// Convex hull membership for points on the unit circle.
pub fn in_circle_hull(points: &[C], z: C, eps: f64) -> bool {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
    match pts.len() {
        0 => false,
        1 => (pts[0] - z).norm() <= eps,
        2 => {
            let (a, b) = (pts[0], pts[1]);
            let d = b - a;
            let s = (((z - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
            (a + d * s - z).norm() <= eps
        }
        n => (0..n).all(|k| {
            let a = pts[k];
            let b = pts[(k + 1) % n];
            ((b - a).conj() * (z - a)).im >= -eps
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzReport {
    /// First order `k` at which the `(k+1) x (k+1)` Toeplitz matrix fails to be PSD.
    pub first_failing_order: Option<usize>,
    /// Smallest eigenvalue for each order `1..=k_max`.
    pub min_eigenvalues: Vec<f64>,
    pub moments: MomentSequence,
}

impl ToeplitzReport {
    pub fn feasible(&self) -> bool {
        self.first_failing_order.is_none()
    }
}

/// Moments `mu_0..mu_k` from amplitudes `a_1..a_k` by `mu_hat = 1/(1 - a_hat)`.
pub fn moments_from_amplitudes(a: &[C]) -> MomentSequence {
    let mut den = vec![C::new(1.0, 0.0)];
    den.extend(a.iter().map(|x| -x));
    let mu = poly::series_div(&[C::new(1.0, 0.0)], &den, a.len() + 1).expect("constant term is 1");
    MomentSequence { mu }
}

/// Whether `a_1..a_{k_max}` can be first-arrival amplitudes of some pair `(U, phi)`.
pub fn toeplitz_feasibility(a: &[C], k_max: usize, tol: &Tolerances) -> ToeplitzReport {
    let k_max = k_max.min(a.len());
    let moments = moments_from_amplitudes(&a[..k_max]);
    let mut min_eigenvalues = Vec::with_capacity(k_max);
    let mut first_failing_order = None;
    for k in 1..=k_max {
        let lam = SymmetricEigen::new(moments.toeplitz(k)).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = (k + 1) as f64;
        if first_failing_order.is_none() && lam < -tol.algebraic * scale {
            first_failing_order = Some(k);
        }
        min_eigenvalues.push(lam);
    }
    ToeplitzReport { first_failing_order, min_eigenvalues, moments }
}

/// Toeplitz determinants of orders `1..=k_max` of a moment sequence.
pub fn toeplitz_determinants(moments: &MomentSequence, k_max: usize) -> Vec<f64> {
    (1..=k_max.min(moments.truncation()))
        .map(|k| {
            let t: DMatrix<C> = moments.toeplitz(k);
            t.determinant().re
        })
        .collect()
}

/// The first three Toeplitz determinants written in the amplitudes; each must be non-negative.
pub fn toeplitz_conditions(a1: C, a2: C, a3: C) -> [f64; 3] {
    let s = 1.0 - a1.norm_sqr();
    let b2 = a2.norm_sqr();
    [
        s,
        s * s - b2,
        s * s * s - s * (2.0 * b2 + a3.norm_sqr()) + b2 * b2 - 2.0 * (a1 * a3 * a2.conj() * a2.conj()).re,
    ]
}

/// Schur iterates `f_k` of an evaluable Schur function, computed pointwise
/// from `f_0` and known parameters `gamma_0..gamma_{k-1}`.
pub struct SchurIterate<S> {
    pub base: S,
    pub gamma: Vec<C>,
}

impl<S: SchurFunction> SchurFunction for SchurIterate<S> {
    fn eval(&self, z: C) -> Result<C> {
        if z.norm() == 0.0 && !self.gamma.is_empty() {
            return Err(Error::Domain("pointwise iterates are not evaluated at the origin".into()));
        }
        let mut f = self.base.eval(z)?;
        for g in &self.gamma {
            f = (f - g) / (z * (1.0 - g.conj() * f));
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, FRAC_PI_4};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn rotation(theta: f64) -> UnitCircleMeasure {
        UnitCircleMeasure::new(vec![Atom { angle: theta, weight: 0.5 }, Atom { angle: -theta, weight: 0.5 }], None).unwrap()
    }

    fn mobius(c: f64) -> SchurRepresentation {
        SchurRepresentation::rational(vec![C::new(c, 0.0), C::new(-1.0, 0.0)], vec![C::new(1.0, 0.0), C::new(-c, 0.0)])
            .unwrap()
    }

    #[test]
    fn schur_step_of_zero() {
        let f = SchurRepresentation::Taylor { coeffs: vec![C::new(0.0, 0.0); 4] };
        match schur_step(&f, &tol()).unwrap() {
            SchurStep::Continue { gamma, next } => {
                assert_eq!(gamma, C::new(0.0, 0.0));
                assert_eq!(next.eval(C::new(0.3, 0.1)).unwrap(), C::new(0.0, 0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schur_step_of_rotation_terminates() {
        let c = FRAC_PI_3.cos();
        let SchurStep::Continue { gamma, next } = schur_step(&mobius(c), &tol()).unwrap() else { panic!() };
        assert!((gamma - c).norm() < 1e-15);
        let SchurStep::Terminated { gamma } = schur_step(&next, &tol()).unwrap() else { panic!() };
        assert!((gamma + 1.0).norm() < 1e-12);
    }

    #[test]
    fn verblunsky_of_rotation_taylor() {
        let c = 0.5;
        // (c - z)/(1 - cz) = c + sum_{n>=1} (c^2 - 1) c^{n-1} z^n
        let coeffs: Vec<C> =
            (0..12).map(|n| if n == 0 { C::new(c, 0.0) } else { C::new((c * c - 1.0) * c.powi(n - 1), 0.0) }).collect();
        let ext = verblunsky_from_taylor(&coeffs, 5, &tol()).unwrap();
        assert_eq!(ext.sequence.gamma.len(), 1);
        assert!((ext.sequence.gamma[0] - c).norm() < 1e-14);
        let (k, u) = ext.termination.unwrap();
        assert_eq!(k, 1);
        assert!((u + 1.0).norm() < 1e-10);
    }

    #[test]
    fn verblunsky_zero_sequence() {
        let ext = verblunsky_from_taylor(&vec![C::new(0.0, 0.0); 6], 6, &tol()).unwrap();
        assert!(ext.sequence.gamma.iter().all(|g| g.norm() == 0.0));
        assert!(ext.termination.is_none());
    }

    #[test]
    fn taylor_verblunsky_round_trip() {
        let seq = VerblunskySequence::new(
            vec![C::new(0.3, 0.1), C::new(-0.2, 0.4), C::new(0.0, -0.5), C::new(0.6, 0.0)],
            VerblunskyTail::Zero,
        )
        .unwrap();
        let c = taylor_from_verblunsky(&seq, 10);
        let back = verblunsky_from_taylor(&c, 8, &tol()).unwrap();
        for k in 0..8 {
            let expect = seq.get(k).unwrap();
            assert!((back.sequence.gamma[k] - expect).norm() < 1e-10, "k = {k}");
        }
        for z in [C::new(0.2, 0.3), C::new(-0.5, 0.1)] {
            let direct = seq.eval(z).unwrap();
            assert!((poly::eval(&c, z) - direct).norm() < 1e-4);
        }
    }

    #[test]
    fn periodic_tail_matches_unrolled() {
        let g = C::new(0.4, 0.3);
        let periodic = VerblunskySequence::new(vec![g, C::new(0.0, 0.0)], VerblunskyTail::Periodic(2)).unwrap();
        let unrolled = VerblunskySequence::new(
            (0..400).map(|k| if k % 2 == 0 { g } else { C::new(0.0, 0.0) }).collect(),
            VerblunskyTail::Zero,
        )
        .unwrap();
        for z in [C::new(0.3, 0.2), C::new(-0.7, 0.4), C::new(0.0, 0.9)] {
            assert!((periodic.eval(z).unwrap() - unrolled.eval(z).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn atomic_measure_rational_form() {
        let m = rotation(FRAC_PI_4);
        let f = SchurRepresentation::from_atomic_measure(&m).unwrap();
        for z in [C::new(0.1, 0.2), C::new(-0.4, 0.5)] {
            assert!((f.eval(z).unwrap() - m.schur(z).unwrap()).norm() < 1e-14);
        }
        let zeros = blaschke_zeros(&f, &tol()).unwrap();
        assert_eq!(zeros.len(), 1);
        assert!((zeros[0] - FRAC_1_SQRT_2).norm() < 1e-14);
        assert!(inner_deviation(&f, 4096).unwrap() < 1e-12);
    }

    #[test]
    fn degenerate_rational_rejected() {
        // (z - 0.5)^2 / ((z - 0.5)(2 - z)): common root at 0.5
        let num = poly::from_roots(&[C::new(0.5, 0.0), C::new(0.5, 0.0)]);
        let den = poly::mul(&poly::from_roots(&[C::new(0.5, 0.0)]), &[C::new(2.0, 0.0), C::new(-1.0, 0.0)]);
        let f = SchurRepresentation::rational(num, den).unwrap();
        assert!(matches!(blaschke_zeros(&f, &tol()), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn clock_zeros() {
        let m = UnitCircleMeasure::clock(5, 0.0);
        let f = SchurRepresentation::from_atomic_measure(&m).unwrap();
        let zeros = blaschke_zeros(&f, &tol()).unwrap();
        assert_eq!(zeros.len(), 4);
        assert!(zeros.iter().all(|z| z.norm() < 1e-3));
        assert!(variance_from_zeros(&zeros).unwrap().abs() < 1e-5);
    }

    #[test]
    fn winding_examples() {
        for n in 1..6 {
            let mut coeffs = vec![C::new(0.0, 0.0); n];
            coeffs[n - 1] = C::new(1.0, 0.0);
            let f = SchurRepresentation::Taylor { coeffs };
            assert_eq!(winding_number(&f, 64, &tol()).unwrap(), n as i64);
        }
        assert_eq!(winding_number(&mobius(FRAC_1_SQRT_2), 64, &tol()).unwrap(), 2);
        let b = SchurRepresentation::blaschke(
            vec![C::new(0.3, 0.0), C::new(0.0, -0.5), C::from_polar(0.7, 2.0)],
            C::new(1.0, 0.0),
        )
        .unwrap();
        assert_eq!(winding_number(&b, 64, &tol()).unwrap(), 4);
        let half = SchurRepresentation::Taylor { coeffs: vec![C::new(0.5, 0.0)] };
        assert!(matches!(winding_number(&half, 64, &tol()), Err(Error::NotInner { .. })));
    }

    #[test]
    fn blaschke_to_rational_step() {
        let b = SchurRepresentation::blaschke(vec![C::new(0.3, 0.2), C::new(-0.1, 0.4)], C::from_polar(1.0, 0.3)).unwrap();
        let SchurStep::Continue { gamma, next } = schur_step(&b, &tol()).unwrap() else { panic!() };
        assert!((gamma - b.eval(C::new(0.0, 0.0)).unwrap()).norm() < 1e-14);
        let z = C::new(0.2, -0.3);
        let expected = (b.eval(z).unwrap() - gamma) / (z * (1.0 - gamma.conj() * b.eval(z).unwrap()));
        assert!((next.eval(z).unwrap() - expected).norm() < 1e-12);
    }

    #[test]
    fn to_blaschke_recovers_phase() {
        let f = SchurRepresentation::from_atomic_measure(&rotation(0.8)).unwrap();
        let b = f.to_blaschke(&tol()).unwrap();
        for z in [C::new(0.1, 0.1), C::new(-0.6, 0.2)] {
            assert!((b.eval(z).unwrap() - f.eval(z).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance_from_zeros(&[C::new(0.0, 0.0); 3]).unwrap(), 0.0);
        assert!((variance_from_zeros(&[C::new(FRAC_1_SQRT_2, 0.0)]).unwrap() - 2.0).abs() < 1e-12);
        assert!(variance_from_zeros(&[C::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn electrostatics() {
        let theta = 1.2;
        let s = electrostatic_stationarity(&rotation(theta), C::new(theta.cos(), 0.0)).unwrap();
        assert!(s.gradient_norm < 1e-12);
        assert!(s.inside_hull);
        let c = electrostatic_stationarity(&UnitCircleMeasure::clock(4, 0.1), C::new(0.0, 0.0)).unwrap();
        assert!(c.gradient_norm < 1e-12 && c.inside_hull);
        assert!(!electrostatic_stationarity(&rotation(theta), C::new(0.0, 0.5)).unwrap().inside_hull);
        assert!(electrostatic_stationarity(&rotation(theta), C::new(1.0, 0.0)).is_err());
        assert!(!in_circle_hull(&[C::new(1.0, 0.0), C::new(0.0, 1.0), C::new(-1.0, 0.0)], C::new(0.0, -0.1), 1e-12));
    }

    #[test]
    fn toeplitz_examples() {
        let t = tol();
        assert!(toeplitz_feasibility(&[C::new(0.9, 0.0)], 1, &t).feasible());
        assert_eq!(toeplitz_feasibility(&[C::new(1.1, 0.0)], 1, &t).first_failing_order, Some(1));
        assert!(toeplitz_feasibility(&[C::new(0.0, 0.0), C::new(0.0, 0.99)], 2, &t).feasible());
        assert_eq!(toeplitz_feasibility(&[C::new(0.0, 0.0), C::new(1.01, 0.0)], 2, &t).first_failing_order, Some(2));
        let c = FRAC_1_SQRT_2;
        let cond = toeplitz_conditions(C::new(c, 0.0), C::new(c * c - 1.0, 0.0), C::new(c * (c * c - 1.0), 0.0));
        assert!(cond[1].abs() < 1e-15);
    }

    #[test]
    fn toeplitz_conditions_match_determinants() {
        let a = [C::new(0.2, -0.1), C::new(0.3, 0.25), C::new(-0.15, 0.05)];
        let d = toeplitz_determinants(&moments_from_amplitudes(&a), 3);
        let cond = toeplitz_conditions(a[0], a[1], a[2]);
        for k in 0..3 {
            assert!((d[k] - cond[k]).abs() < 1e-14, "order {}", k + 1);
        }
    }

    #[test]
    fn moments_taylor_round_trip() {
        let m = UnitCircleMeasure::new(
            vec![Atom { angle: 0.3, weight: 0.4 }],
            Some(vec![C::new(0.6, 0.0), C::new(0.1, 0.2)]),
        )
        .unwrap();
        let mom = m.moments(20);
        let c = schur_taylor_from_moments(&mom, 20).unwrap();
        assert!((c[0] - m.moment(1).conj()).norm() < 1e-15);
        let back = moments_from_schur_taylor(&c);
        for k in 0..=20 {
            assert!((back.mu[k] - mom.mu[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn pointwise_iterate_matches_rational_step() {
        let m = UnitCircleMeasure::new(
            vec![Atom { angle: 0.3, weight: 0.3 }, Atom { angle: 2.0, weight: 0.3 }, Atom { angle: -1.9, weight: 0.4 }],
            None,
        )
        .unwrap();
        let f = SchurRepresentation::from_atomic_measure(&m).unwrap();
        let SchurStep::Continue { gamma, next } = schur_step(&f, &tol()).unwrap() else { panic!() };
        let it = SchurIterate { base: &f, gamma: vec![gamma] };
        let z = C::from_polar(1.0, 0.77);
        assert!((it.eval(z).unwrap() - next.eval(z).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let spec: SchurSpec = serde_json::from_str(r#"{"type":"verblunsky","gamma":[[0.5,0.0],[0.0,0.0]],"period":2}"#).unwrap();
        let rep = SchurRepresentation::try_from(spec).unwrap();
        let back = serde_json::to_string(&SchurSpec::from(&rep)).unwrap();
        let again = SchurRepresentation::try_from(serde_json::from_str::<SchurSpec>(&back).unwrap()).unwrap();
        assert_eq!(rep, again);
        assert!(serde_json::from_str::<SchurSpec>(r#"{"type":"taylor","coeffs":[],"extra":1}"#).is_err());
    }
}
