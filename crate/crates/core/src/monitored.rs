//! The monitored evolution `(1 - |phi><phi|) U`: first-arrival amplitudes,
//! survival probabilities and the derived return statistics.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Schur};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::measure::{Atom, UnitCircleMeasure};
use crate::poly::C;
use crate::quadrature::{adaptive_periodic_mean, richardson_halving};
use crate::schur::{schur_taylor_from_moments, SchurFunction};

/// A norm-preserving linear map on `C^d`, applied out of place.
pub trait Evolution: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, psi: &[C], out: &mut [C]);
}

#[derive(Clone)]
pub enum Operator {
    Dense(DMatrix<C>),
    /// Multiplication by unimodular phases: the canonical form of a discrete measure.
    Diagonal(Vec<C>),
    Custom(Arc<dyn Evolution>),
}

impl std::fmt::Debug for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Operator::Dense(m) => write!(f, "Dense({}x{})", m.nrows(), m.ncols()),
            Operator::Diagonal(d) => write!(f, "Diagonal({})", d.len()),
            Operator::Custom(e) => write!(f, "Custom({})", e.dim()),
        }
    }
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Dense(m) => m.nrows(),
            Operator::Diagonal(d) => d.len(),
            Operator::Custom(e) => e.dim(),
        }
    }

    fn apply(&self, psi: &[C], out: &mut [C]) {
        match self {
            Operator::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..psi.len()).map(|j| m[(i, j)] * psi[j]).sum();
                }
            }
            Operator::Diagonal(d) => {
                for ((o, u), p) in out.iter_mut().zip(d).zip(psi) {
                    *o = u * p;
                }
            }
            Operator::Custom(e) => e.apply(psi, out),
        }
    }
}

/// The pair `(U, phi)`.
#[derive(Debug, Clone)]
pub struct UnitarySystem {
    operator: Operator,
    state: Vec<C>,
}

impl UnitarySystem {
    pub fn new(operator: Operator, state: Vec<C>) -> Result<Self> {
        Self::with_tolerances(operator, state, &Tolerances::default())
    }

    pub fn with_tolerances(operator: Operator, state: Vec<C>, tol: &Tolerances) -> Result<Self> {
        let d = operator.dim();
        if state.len() != d {
            return Err(Error::Domain(format!("state has dimension {} but operator has {d}", state.len())));
        }
        match &operator {
            Operator::Dense(m) => {
                if m.nrows() != m.ncols() {
                    return Err(Error::Domain("operator must be square".into()));
                }
                let defect = (m.adjoint() * m - DMatrix::<C>::identity(d, d)).iter().map(|c| c.norm()).fold(0.0, f64::max);
                if defect > tol.unitarity {
                    return Err(Error::invariant(format!("||U^dagger U - 1||_max = {defect:e}"), tol.unitarity));
                }
            }
            Operator::Diagonal(p) => {
                if let Some(u) = p.iter().find(|u| (u.norm() - 1.0).abs() > tol.unitarity) {
                    return Err(Error::invariant(format!("diagonal entry {u} is not unimodular"), tol.unitarity));
                }
            }
            Operator::Custom(_) => {}
        }
        let norm = state.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > tol.state_norm {
            return Err(Error::invariant(format!("||phi|| = {norm}"), tol.state_norm));
        }
        Ok(Self { operator, state })
    }

    pub fn dense(u: DMatrix<C>, phi: Vec<C>) -> Result<Self> {
        Self::new(Operator::Dense(u), phi)
    }

    /// Dense system from row-major matrix entries.
    pub fn from_rows(rows: &[Vec<C>], phi: Vec<C>, tol: &Tolerances) -> Result<Self> {
        let d = rows.len();
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Domain(format!("row {i} of a {d}x{d} matrix has {} entries", rows[i].len())));
        }
        Self::with_tolerances(Operator::Dense(DMatrix::from_fn(d, d, |i, j| rows[i][j])), phi, tol)
    }

    /// Canonical form: multiplication by `u` on `L^2(mu)` with `phi = 1`.
    ///
    /// The absolutely continuous part is replaced by `M` equispaced atoms with
    /// weights `rho(t_j)/M`, where `M` exceeds the density degree plus
    /// `n_max`. The discrete measure then shares the moments `mu_0..mu_{n_max}`
    /// of the original, so amplitudes up to `n_max` are exact.
    pub fn canonical(measure: &UnitCircleMeasure, n_max: usize) -> Result<Self> {
        let mut points: Vec<(f64, f64)> = measure.atoms().iter().map(|a| (a.angle, a.weight)).collect();
        if let Some(ac) = measure.ac_part() {
            let m = ac.degree() + n_max + 1;
            for j in 0..m {
                let t = TAU * j as f64 / m as f64;
                let w = ac.density(t) / m as f64;
                if w > 0.0 {
                    points.push((t, w));
                }
            }
        }
        let phases = points.iter().map(|(t, _)| C::from_polar(1.0, *t)).collect();
        let total: f64 = points.iter().map(|(_, w)| w).sum();
        let state = points.iter().map(|(_, w)| C::new((w / total).sqrt(), 0.0)).collect();
        Self::new(Operator::Diagonal(phases), state)
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn state(&self) -> &[C] {
        &self.state
    }

    /// `max(100, 20 d)`.
    pub fn default_truncation(&self) -> usize {
        (20 * self.dim()).max(100)
    }

    /// `(V U V^dagger, V phi)` for a dense `V`.
    pub fn conjugated(&self, v: &DMatrix<C>) -> Result<Self> {
        let u = match &self.operator {
            Operator::Dense(m) => m.clone(),
            Operator::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_vec(d.clone())),
            Operator::Custom(_) => return Err(Error::Domain("cannot conjugate a matrix-free operator".into())),
        };
        let phi = v * DVector::from_vec(self.state.clone());
        Self::dense(v * u * v.adjoint(), phi.iter().copied().collect())
    }

    /// Spectral measure of a dense or diagonal system: eigenvalues with weights `|<e_k|phi>|^2`.
    pub fn spectral_measure(&self) -> Result<UnitCircleMeasure> {
        let tol = Tolerances::default();
        let (values, weights): (Vec<C>, Vec<f64>) = match &self.operator {
            Operator::Diagonal(d) => (d.clone(), self.state.iter().map(|c| c.norm_sqr()).collect()),
            Operator::Dense(m) => {
                let (q, t) = Schur::new(m.clone()).unpack();
                let coeffs = q.adjoint() * DVector::from_vec(self.state.clone());
                ((0..m.nrows()).map(|k| t[(k, k)]).collect(), coeffs.iter().map(|c| c.norm_sqr()).collect())
            }
            Operator::Custom(_) => return Err(Error::Domain("spectral measure needs an explicit matrix".into())),
        };
        let mut pairs: Vec<(f64, f64)> = values.iter().zip(&weights).map(|(u, &w)| (u.arg(), w)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (t, w) in pairs {
            match merged.last_mut() {
                Some((t0, w0)) if t - *t0 < 1e-8 => {
                    *t0 = (*t0 * *w0 + t * w) / (*w0 + w).max(f64::MIN_POSITIVE);
                    *w0 += w;
                }
                _ => merged.push((t, w)),
            }
        }
        if merged.len() > 1 {
            let (t_first, w_first) = merged[0];
            let (t_last, w_last) = *merged.last().unwrap();
            if t_first + TAU - t_last < 1e-8 {
                merged.pop();
                merged[0] = (t_first, w_first + w_last);
            }
        }
        let atoms = merged
            .into_iter()
            .filter(|&(_, w)| w > 1e-15)
            .map(|(angle, weight)| Atom { angle, weight })
            .collect();
        UnitCircleMeasure::with_tolerances(atoms, None, &Tolerances { mass: 1e-9, ..tol })
    }
}

/// `a_1..a_N`, `s_0..s_N` and the partial return probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalRecord {
    pub a: Vec<C>,
    pub s: Vec<f64>,
    pub r_partial: f64,
}

impl ArrivalRecord {
    pub fn truncation(&self) -> usize {
        self.a.len()
    }

    pub fn tail_survival(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// `max_n |sum_{k <= n} |a_k|^2 + s_n - 1|`.
    pub fn conservation_defect(&self) -> f64 {
        let mut acc = 0.0;
        let mut worst = (self.s[0] - 1.0).abs();
        for (a, s) in self.a.iter().zip(&self.s[1..]) {
            acc += a.norm_sqr();
            worst = worst.max((acc + s - 1.0).abs());
        }
        worst
    }
}

/// Iterate `psi <- U psi`, record `a_n = <phi|psi>`, project `psi <- psi - phi a_n`.
pub fn monitored_run(system: &UnitarySystem, n_max: usize) -> Result<ArrivalRecord> {
    monitored_run_with(system, n_max, &Tolerances::default())
}

pub fn monitored_run_with(system: &UnitarySystem, n_max: usize, tol: &Tolerances) -> Result<ArrivalRecord> {
    if n_max < 1 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    let phi = &system.state;
    let mut psi = phi.clone();
    let mut next = vec![C::new(0.0, 0.0); phi.len()];
    let mut a = Vec::with_capacity(n_max);
    let mut s = Vec::with_capacity(n_max + 1);
    s.push(1.0);
    let mut detected = 0.0;
    for n in 1..=n_max {
        system.operator.apply(&psi, &mut next);
        std::mem::swap(&mut psi, &mut next);
        let amp: C = phi.iter().zip(&psi).map(|(p, x)| p.conj() * x).sum();
        for (x, p) in psi.iter_mut().zip(phi) {
            *x -= p * amp;
        }
        let surv: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        detected += amp.norm_sqr();
        let defect = (detected + surv - 1.0).abs();
        if defect > tol.algebraic {
            return Err(Error::invariant(
                format!("probability conservation broken at step {n}: defect {defect:e} (operator not unitary?)"),
                tol.algebraic,
            ));
        }
        if surv > s[n - 1] + tol.algebraic {
            return Err(Error::invariant(format!("survival increased at step {n}"), tol.algebraic));
        }
        a.push(amp);
        s.push(surv);
    }
    Ok(ArrivalRecord { a, s, r_partial: detected })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnProbability {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `R_partial` with the exact bracket `[R_partial, R_partial + s_N]`.
pub fn return_probability(record: &ArrivalRecord) -> ReturnProbability {
    let lower = record.r_partial;
    ReturnProbability { value: lower, lower, upper: lower + record.tail_survival() }
}

/// What to do when the run has not (numerically) returned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailPolicy {
    /// Fail with a transient outcome if the survival `s_N` exceeds `tol`.
    RequireRecurrent { tol: f64 },
    /// Always report the truncated sums, flagged as lower bounds.
    AcceptLowerBound,
}

impl Default for TailPolicy {
    fn default() -> Self {
        TailPolicy::RequireRecurrent { tol: Tolerances::default().survival }
    }
}

impl TailPolicy {
    fn check(&self, survival: f64) -> Result<()> {
        match *self {
            TailPolicy::RequireRecurrent { tol } if survival > tol => Err(Error::Transient { survival, tol }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedReturnTime {
    /// `sum_{n <= N} n |a_n|^2`, a lower bound for `tau`.
    pub value: f64,
    pub tail_survival: f64,
    /// Nearest integer when survival is below the policy tolerance and
    /// `value` is within `1e-4` of it.
    pub integer_candidate: Option<i64>,
}

pub fn expected_return_time(record: &ArrivalRecord, policy: TailPolicy) -> Result<ExpectedReturnTime> {
    let tail_survival = record.tail_survival();
    policy.check(tail_survival)?;
    let value: f64 = record.a.iter().enumerate().map(|(k, a)| (k + 1) as f64 * a.norm_sqr()).sum();
    let rounded = value.round();
    let survival_tol = match policy {
        TailPolicy::RequireRecurrent { tol } => tol,
        TailPolicy::AcceptLowerBound => Tolerances::default().survival,
    };
    let integer_candidate =
        if tail_survival <= survival_tol && (value - rounded).abs() < 1e-4 { Some(rounded as i64) } else { None };
    Ok(ExpectedReturnTime { value, tail_survival, integer_candidate })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnTimeVariance {
    pub value: f64,
    pub tail_survival: f64,
    /// `N^2 s_N`, the scale of the truncated second moment tail.
    pub tail_diagnostic: f64,
}

pub fn return_time_variance(record: &ArrivalRecord, policy: TailPolicy) -> Result<ReturnTimeVariance> {
    let tail_survival = record.tail_survival();
    policy.check(tail_survival)?;
    let (m1, m2) = record.a.iter().enumerate().fold((0.0, 0.0), |(m1, m2), (k, a)| {
        let n = (k + 1) as f64;
        let p = a.norm_sqr();
        (m1 + n * p, m2 + n * n * p)
    });
    let n = record.truncation() as f64;
    Ok(ReturnTimeVariance { value: m2 - m1 * m1, tail_survival, tail_diagnostic: n * n * tail_survival })
}

/// `max_{n <= n_max} |a_n - conj(c_{n-1})|` between a monitored run and the
/// Schur Taylor coefficients of the measure.
pub fn generating_identity_check(system: &UnitarySystem, measure: &UnitCircleMeasure, n_max: usize) -> Result<f64> {
    let record = monitored_run(system, n_max)?;
    let c = schur_taylor_from_moments(&measure.moments(n_max), n_max)?;
    Ok(record.a.iter().zip(&c).map(|(a, c)| (a - c.conj()).norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialTau {
    pub r: f64,
    pub value: f64,
    pub nodes: usize,
}

/// `(1/2pi) ∫ (1 - r^2 |f(r e^{it})|^2)/(1 - r^2) dt` along the schedule.
///
/// Under [`TailPolicy::RequireRecurrent`] the escape mass
/// `lim (1 - r^2) tau(r)` is extrapolated and a non-inner `f` is rejected.
pub fn tau_radial_estimate<S: SchurFunction + Sync>(
    f: &S,
    r_schedule: &[f64],
    policy: TailPolicy,
    tol: &Tolerances,
) -> Result<Vec<RadialTau>> {
    let mut out = Vec::with_capacity(r_schedule.len());
    for &r in r_schedule {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::Domain(format!("radius {r} outside [0, 1)")));
        }
        let r2 = r * r;
        let eval = |t: f64| -> f64 {
            match f.eval(C::from_polar(r, t)) {
                Ok(v) => (1.0 - r2 * v.norm_sqr()) / (1.0 - r2),
                Err(_) => f64::NAN,
            }
        };
        let q = adaptive_periodic_mean(eval, 64, tol.quadrature, 1 << 20)?;
        if !q.value.is_finite() {
            return Err(Error::EstimationFailure {
                what: format!("tau(r) at r = {r}"),
                diagnostics: "Schur function could not be evaluated on the circle".into(),
            });
        }
        out.push(RadialTau { r, value: q.value, nodes: q.nodes });
    }
    if let TailPolicy::RequireRecurrent { .. } = policy {
        let escape: Vec<f64> = out.iter().map(|p| (1.0 - p.r * p.r) * p.value).collect();
        let (mass, _) = richardson_halving(&escape, 2);
        if mass.abs() > tol.radial {
            return Err(Error::NotInner { max_deviation: mass, tol: tol.radial });
        }
    }
    Ok(out)
}

/// Example with a fixed point `|*>` and a shift on `x = 0..sites`, closed into
/// a ring so the window is unitary; exact while nothing reaches the last site.
pub struct ShiftWithFixedPoint {
    pub sites: usize,
}

impl Evolution for ShiftWithFixedPoint {
    fn dim(&self) -> usize {
        self.sites + 1
    }

    fn apply(&self, psi: &[C], out: &mut [C]) {
        out[0] = psi[0];
        let n = self.sites;
        for x in 0..n {
            out[1 + (x + 1) % n] = psi[1 + x];
        }
    }
}

/// `phi = alpha |*> + beta |0>` on a window wide enough for `n_max` steps.
pub fn fixed_point_shift_system(alpha: C, beta: C, n_max: usize) -> Result<UnitarySystem> {
    let sites = n_max + 2;
    let mut state = vec![C::new(0.0, 0.0); sites + 1];
    state[0] = alpha;
    state[1] = beta;
    UnitarySystem::new(Operator::Custom(Arc::new(ShiftWithFixedPoint { sites })), state)
}
