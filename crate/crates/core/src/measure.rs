//! Probability measures on the unit circle and their analytic transforms.
//!
//! A measure is a finite set of atoms plus an optional absolutely continuous
//! part given by a finite table of Fourier coefficients `mu_n = ∫ u^n dmu`,
//! i.e. a trigonometric-polynomial density with respect to `dt / 2pi`. Every
//! transform below is linear in the measure and is evaluated exactly on both
//! parts.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::config::{default_r_schedule, Tolerances};
use crate::error::{Error, Result};
use crate::poly::C;
use crate::quadrature::richardson_halving;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub angle: f64,
    pub weight: f64,
}

impl Atom {
    pub fn position(&self) -> C {
        C::from_polar(1.0, self.angle)
    }
}

/// Absolutely continuous part as moments `mu_0..mu_N` (negative indices by conjugation).
#[derive(Debug, Clone, PartialEq)]
pub struct AcPart {
    coeffs: Vec<C>,
}

impl AcPart {
    pub fn coefficients(&self) -> &[C] {
        &self.coeffs
    }

    pub fn mass(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Density with respect to `dt / 2pi`.
    pub fn density(&self, t: f64) -> f64 {
        let tail: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, c)| (c * C::from_polar(1.0, -(n as f64) * t)).re)
            .sum();
        self.coeffs[0].re + 2.0 * tail
    }

    fn moment(&self, n: usize) -> C {
        self.coeffs.get(n).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitCircleMeasure {
    atoms: Vec<Atom>,
    ac: Option<AcPart>,
}

/// JSON form: `{"atoms":[{"angle":..,"weight":..}], "ac_fourier":[{"n":..,"re":..,"im":..}]}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default)]
    pub ac_fourier: Vec<FourierEntry>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub angle: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierEntry {
    pub n: i64,
    pub re: f64,
    pub im: f64,
}

impl UnitCircleMeasure {
    pub fn new(atoms: Vec<Atom>, ac: Option<Vec<C>>) -> Result<Self> {
        Self::with_tolerances(atoms, ac, &Tolerances::default())
    }

    /// Validates and normalizes. Total mass must be 1 within `tol.mass`;
    /// it is then rescaled to exactly 1.
    pub fn with_tolerances(atoms: Vec<Atom>, ac: Option<Vec<C>>, tol: &Tolerances) -> Result<Self> {
        for a in &atoms {
            if !(a.weight.is_finite() && a.angle.is_finite()) {
                return Err(Error::invariant("atom angle and weight must be finite", tol.mass));
            }
            if a.weight <= 0.0 {
                return Err(Error::invariant(
                    format!("atom weight {} at angle {} is not strictly positive", a.weight, a.angle),
                    tol.mass,
                ));
            }
        }
        let mut sorted: Vec<f64> = atoms.iter().map(|a| a.angle.rem_euclid(TAU)).collect();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (i, w) in sorted.windows(2).enumerate() {
            if w[1] - w[0] < tol.atom_separation {
                return Err(Error::invariant(
                    format!("atoms {i} and {} closer than the separation threshold: {} vs {}", i + 1, w[0], w[1]),
                    tol.atom_separation,
                ));
            }
        }
        if sorted.len() > 1 && sorted[0] + TAU - sorted[sorted.len() - 1] < tol.atom_separation {
            return Err(Error::invariant("first and last atom coincide modulo 2pi", tol.atom_separation));
        }

        let ac = match ac {
            Some(mut coeffs) => {
                if coeffs.is_empty() {
                    None
                } else {
                    if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                        return Err(Error::invariant("Fourier coefficients must be finite", tol.mass));
                    }
                    if coeffs[0].im.abs() > tol.mass || coeffs[0].re < -tol.mass {
                        return Err(Error::invariant(
                            format!("a.c. mass mu_0 = {} must be real and non-negative", coeffs[0]),
                            tol.mass,
                        ));
                    }
                    coeffs[0] = C::new(coeffs[0].re.max(0.0), 0.0);
                    while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm() == 0.0) {
                        coeffs.pop();
                    }
                    let part = AcPart { coeffs };
                    let grid = 8 * (part.degree() + 1);
                    let floor = -1e-8 * part.mass().max(1.0);
                    if let Some(j) = (0..grid).find(|&j| part.density(TAU * j as f64 / grid as f64) < floor) {
                        let t = TAU * j as f64 / grid as f64;
                        return Err(Error::invariant(
                            format!("a.c. density is negative ({}) at t = {t}", part.density(t)),
                            floor.abs(),
                        ));
                    }
                    if part.mass() == 0.0 && part.degree() == 0 {
                        None
                    } else {
                        Some(part)
                    }
                }
            }
            None => None,
        };

        let total: f64 = atoms.iter().map(|a| a.weight).sum::<f64>() + ac.as_ref().map_or(0.0, AcPart::mass);
        if (total - 1.0).abs() > tol.mass {
            return Err(Error::invariant(format!("total mass {total} differs from 1"), tol.mass));
        }
        let atoms = atoms
            .into_iter()
            .map(|a| Atom { angle: a.angle, weight: a.weight / total })
            .collect();
        let ac = ac.map(|p| AcPart { coeffs: p.coeffs.into_iter().map(|c| c / total).collect() });
        Ok(Self { atoms, ac })
    }

    /// Atoms at explicit positions; each must have modulus 1 within `tol.modulus`.
    pub fn from_positions(points: &[(C, f64)], ac: Option<Vec<C>>) -> Result<Self> {
        let tol = Tolerances::default();
        let atoms = points
            .iter()
            .map(|&(u, w)| {
                if (u.norm() - 1.0).abs() > tol.modulus {
                    Err(Error::invariant(format!("atom position {u} has modulus {}", u.norm()), tol.modulus))
                } else {
                    Ok(Atom { angle: u.arg(), weight: w })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_tolerances(atoms, ac, &tol)
    }

    pub fn point_mass(angle: f64) -> Self {
        Self { atoms: vec![Atom { angle, weight: 1.0 }], ac: None }
    }

    /// Normalized Lebesgue measure.
    pub fn uniform() -> Self {
        Self { atoms: Vec::new(), ac: Some(AcPart { coeffs: vec![C::new(1.0, 0.0)] }) }
    }

    /// `n` equal atoms at the `n`-th roots of unity rotated by `phase`.
    pub fn clock(n: usize, phase: f64) -> Self {
        let atoms = (0..n)
            .map(|k| Atom { angle: phase + TAU * k as f64 / n as f64, weight: 1.0 / n as f64 })
            .collect();
        Self { atoms, ac: None }
    }

    /// Uses a table of signed Fourier indices; entries at `-n` must be the
    /// conjugates of entries at `n`.
    pub fn from_fourier_entries(atoms: Vec<Atom>, entries: &[(i64, C)]) -> Result<Self> {
        let tol = Tolerances::default();
        if entries.is_empty() {
            return Self::with_tolerances(atoms, None, &tol);
        }
        let max_n = entries.iter().map(|(n, _)| n.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![C::new(0.0, 0.0); max_n + 1];
        let mut seen = vec![false; max_n + 1];
        for &(n, c) in entries.iter().filter(|(n, _)| *n >= 0) {
            let n = n as usize;
            if seen[n] {
                return Err(Error::invariant(format!("duplicate Fourier index {n}"), tol.mass));
            }
            seen[n] = true;
            coeffs[n] = c;
        }
        for &(n, c) in entries.iter().filter(|(n, _)| *n < 0) {
            let m = n.unsigned_abs() as usize;
            if seen[m] {
                if (coeffs[m].conj() - c).norm() > tol.algebraic {
                    return Err(Error::invariant(
                        format!("mu_{{-{m}}} = {c} is not the conjugate of mu_{m} = {}", coeffs[m]),
                        tol.algebraic,
                    ));
                }
            } else {
                coeffs[m] = c.conj();
                seen[m] = true;
            }
        }
        Self::with_tolerances(atoms, Some(coeffs), &tol)
    }

    pub fn from_spec(spec: &MeasureSpec) -> Result<Self> {
        let atoms = spec.atoms.iter().map(|a| Atom { angle: a.angle, weight: a.weight }).collect();
        let entries: Vec<(i64, C)> = spec.ac_fourier.iter().map(|e| (e.n, C::new(e.re, e.im))).collect();
        Self::from_fourier_entries(atoms, &entries)
    }

    pub fn to_spec(&self) -> MeasureSpec {
        MeasureSpec {
            atoms: self.atoms.iter().map(|a| AtomSpec { angle: a.angle, weight: a.weight }).collect(),
            ac_fourier: self
                .ac
                .as_ref()
                .map(|p| {
                    p.coeffs
                        .iter()
                        .enumerate()
                        .map(|(n, c)| FourierEntry { n: n as i64, re: c.re, im: c.im })
                        .collect()
                })
                .unwrap_or_default(),
        }
    }

    /// Builds the a.c. part from density samples on the grid `t_j = 2pi j / M`
    /// (density relative to `dt / 2pi`). Fourier coefficients are computed by
    /// the trapezoidal rule and truncated once they fall below `cutoff`.
    pub fn from_density_samples(atoms: Vec<Atom>, samples: &[f64], cutoff: f64) -> Result<Self> {
        let m = samples.len();
        if m < 2 {
            return Err(Error::Domain("need at least two density samples".into()));
        }
        let n_max = (m - 1) / 2;
        let mut coeffs: Vec<C> = (0..=n_max)
            .map(|n| {
                samples
                    .iter()
                    .enumerate()
                    .map(|(j, &rho)| rho * C::from_polar(1.0, TAU * (n * j) as f64 / m as f64))
                    .sum::<C>()
                    / m as f64
            })
            .collect();
        coeffs[0].im = 0.0;
        while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm() < cutoff) {
            coeffs.pop();
        }
        Self::new(atoms, Some(coeffs))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn ac_part(&self) -> Option<&AcPart> {
        self.ac.as_ref()
    }

    pub fn ac_mass(&self) -> f64 {
        self.ac.as_ref().map_or(0.0, AcPart::mass)
    }

    pub fn is_finite_atomic(&self) -> bool {
        self.ac_mass() == 0.0 && self.ac.as_ref().map_or(true, |p| p.coeffs.iter().all(|c| c.norm() == 0.0))
    }

    pub fn moment(&self, n: usize) -> C {
        let atomic: C = self
            .atoms
            .iter()
            .map(|a| a.weight * C::from_polar(1.0, a.angle * n as f64))
            .sum();
        atomic + self.ac.as_ref().map_or(C::new(0.0, 0.0), |p| p.moment(n))
    }

    pub fn moments(&self, n_max: usize) -> MomentSequence {
        MomentSequence { mu: (0..=n_max).map(|n| self.moment(n)).collect() }
    }

    /// `∫ dmu / (1 - u z)`.
    pub fn stieltjes(&self, z: C) -> Result<C> {
        check_interior(z)?;
        let atomic: C = self.atoms.iter().map(|a| a.weight / (1.0 - a.position() * z)).sum();
        let ac = self.ac.as_ref().map_or(C::new(0.0, 0.0), |p| horner(p.coeffs.iter().copied(), z));
        Ok(atomic + ac)
    }

    /// `∫ dmu (u + z)/(u - z)`.
    pub fn caratheodory(&self, z: C) -> Result<C> {
        check_interior(z)?;
        Ok(self.caratheodory_unchecked(z))
    }

    fn caratheodory_unchecked(&self, z: C) -> C {
        let atomic: C = self
            .atoms
            .iter()
            .map(|a| {
                let u = a.position();
                a.weight * (u + z) / (u - z)
            })
            .sum();
        let ac = self.ac.as_ref().map_or(C::new(0.0, 0.0), |p| {
            let tail = horner(p.coeffs.iter().skip(1).map(|c| c.conj()), z) * z;
            p.coeffs[0] + 2.0 * tail
        });
        atomic + ac
    }

    /// Conjugate-coefficient Stieltjes function `sum conj(mu_n) z^n`, and
    /// `(that - 1)/z` evaluated without cancellation.
    fn conj_stieltjes_parts(&self, z: C) -> (C, C) {
        let mut b = C::new(0.0, 0.0);
        let mut g = C::new(0.0, 0.0);
        for a in &self.atoms {
            let ub = a.position().conj();
            let d = 1.0 - ub * z;
            b += a.weight / d;
            g += a.weight * ub / d;
        }
        if let Some(p) = &self.ac {
            b += horner(p.coeffs.iter().map(|c| c.conj()), z);
            g += horner(p.coeffs.iter().skip(1).map(|c| c.conj()), z);
        }
        (b, g)
    }

    /// Schur function `f = (1/z)(F - 1)/(F + 1)`; the factor `1/z` is divided
    /// out analytically, so `z = 0` returns `conj(mu_1)` exactly.
    pub fn schur(&self, z: C) -> Result<C> {
        check_interior(z)?;
        let (b, g) = self.conj_stieltjes_parts(z);
        Ok(g / b)
    }

    /// Boundary value `f(e^{it})`, valid away from atoms (where the
    /// representation is continuous up to the circle).
    pub fn schur_on_circle(&self, t: f64) -> Result<C> {
        let z = C::from_polar(1.0, t);
        if let Some(a) = self.atoms.iter().find(|a| (a.position() - z).norm() < 1e-12) {
            return Err(Error::Pole(format!("boundary evaluation at atom angle {}", a.angle)));
        }
        let (b, g) = self.conj_stieltjes_parts(z);
        Ok(g / b)
    }

    /// Density of the a.c. part at angle `t` as the radial limit of `Re F`.
    pub fn ac_density_at(&self, t: f64) -> Result<DensityValue> {
        ac_density_at(self, t, &default_r_schedule(), &Tolerances::default())
    }

    pub fn atom_mass_at(&self, z0: C) -> Result<f64> {
        atom_mass_at(self, z0, &default_r_schedule(), &Tolerances::default())
    }

    pub fn classify_recurrence(&self) -> RecurrenceClassification {
        self.classify_recurrence_with(&Tolerances::default())
    }

    pub fn classify_recurrence_with(&self, tol: &Tolerances) -> RecurrenceClassification {
        let ac_mass = self.ac_mass();
        let class = if ac_mass <= tol.mass { Recurrence::Recurrent } else { Recurrence::Transient };
        RecurrenceClassification { class, ac_mass }
    }
}

fn horner<I: DoubleEndedIterator<Item = C>>(coeffs: I, z: C) -> C {
    coeffs.rev().fold(C::new(0.0, 0.0), |acc, c| acc * z + c)
}

fn check_interior(z: C) -> Result<()> {
    if !(z.norm() < 1.0) {
        return Err(Error::Domain(format!("|z| = {} must be < 1", z.norm())));
    }
    Ok(())
}

/// Anything with an evaluable Carathéodory function on the open disk.
pub trait CaratheodoryFunction {
    fn caratheodory_at(&self, z: C) -> Result<C>;
}

impl CaratheodoryFunction for UnitCircleMeasure {
    fn caratheodory_at(&self, z: C) -> Result<C> {
        self.caratheodory(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityValue {
    Regular { density: f64, error_estimate: f64 },
    /// `Re F` diverges radially: the point carries mass.
    Singular { mass_estimate: f64 },
}

/// `lim_{r->1} Re F(r e^{it})` by Richardson extrapolation over the radial
/// schedule, with atom detection through `(1-r)/2 * F`.
pub fn ac_density_at<F: CaratheodoryFunction + ?Sized>(
    f: &F,
    t: f64,
    schedule: &[f64],
    tol: &Tolerances,
) -> Result<DensityValue> {
    if schedule.len() < 4 {
        return Err(Error::Domain("radial schedule needs at least four radii".into()));
    }
    let dir = C::from_polar(1.0, t);
    let values = schedule
        .iter()
        .map(|&r| f.caratheodory_at(dir * r).map(|v| v.re))
        .collect::<Result<Vec<f64>>>()?;
    let scaled: Vec<f64> = schedule.iter().zip(&values).map(|(r, v)| 0.5 * (1.0 - r) * v).collect();
    let (mass, _) = richardson_halving(&scaled, 3);
    if mass > tol.radial {
        return Ok(DensityValue::Singular { mass_estimate: mass });
    }
    let (density, err) = richardson_halving(&values, 3);
    if !density.is_finite() || err > tol.radial * density.abs().max(1.0) {
        return Err(Error::EstimationFailure {
            what: format!("radial limit of Re F at t = {t}"),
            diagnostics: format!("extrapolated {density}, level difference {err:e}, tolerance {:e}", tol.radial),
        });
    }
    Ok(DensityValue::Regular { density, error_estimate: err })
}

/// `mu({z0}) = lim_{r->1} (1-r)/2 F(r z0)` with Richardson extrapolation.
pub fn atom_mass_at<F: CaratheodoryFunction + ?Sized>(
    f: &F,
    z0: C,
    schedule: &[f64],
    tol: &Tolerances,
) -> Result<f64> {
    if (z0.norm() - 1.0).abs() > tol.modulus {
        return Err(Error::Domain(format!("z0 = {z0} is not on the unit circle")));
    }
    if schedule.len() < 5 {
        return Err(Error::Domain("radial schedule needs at least five radii".into()));
    }
    let samples = schedule
        .iter()
        .map(|&r| f.caratheodory_at(z0 * r).map(|v| 0.5 * (1.0 - r) * v.re))
        .collect::<Result<Vec<f64>>>()?;
    let (mass, err) = richardson_halving(&samples, 3);
    if !mass.is_finite() || err > tol.radial {
        let tail: Vec<String> = samples.iter().rev().take(4).map(|v| format!("{v:.6e}")).collect();
        return Err(Error::EstimationFailure {
            what: format!("atom mass at {z0}"),
            diagnostics: format!(
                "extrapolated {mass}, level difference {err:e} > {:e}; last scaled samples [{}]",
                tol.radial,
                tail.join(", ")
            ),
        });
    }
    Ok(mass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recurrence {
    Recurrent,
    Transient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceClassification {
    pub class: Recurrence,
    pub ac_mass: f64,
}

impl RecurrenceClassification {
    /// Whether a simulated return-probability bracket `[lower, upper]` is
    /// consistent with this classification: recurrent measures must have
    /// `lower >= 1 - slack`, transient ones `lower < 1 - slack`.
    pub fn agrees_with_bracket(&self, lower: f64, upper: f64, slack: f64) -> bool {
        match self.class {
            Recurrence::Recurrent => lower >= 1.0 - slack && upper >= 1.0 - slack,
            Recurrence::Transient => lower < 1.0 - slack,
        }
    }
}

/// Moments `mu_0..mu_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence {
    pub mu: Vec<C>,
}

impl MomentSequence {
    pub fn truncation(&self) -> usize {
        self.mu.len() - 1
    }

    /// `mu_n` for signed `n`, conjugating negative indices.
    pub fn signed(&self, n: i64) -> C {
        if n >= 0 {
            self.mu[n as usize]
        } else {
            self.mu[n.unsigned_abs() as usize].conj()
        }
    }

    /// Toeplitz kernel `k_{n,m} = mu_{n-m}` of size `(order + 1)`.
    pub fn toeplitz(&self, order: usize) -> DMatrix<C> {
        DMatrix::from_fn(order + 1, order + 1, |i, j| self.signed(i as i64 - j as i64))
    }

    pub fn min_toeplitz_eigenvalue(&self, order: usize) -> f64 {
        SymmetricEigen::new(self.toeplitz(order))
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SjkVerdict {
    SjkRecurrent,
    SjkTransient,
    Inconclusive,
}

#[derive(Debug, Clone, Copy)]
pub struct SjkConfig {
    /// Tail `S(N) - S(N/2)` below this counts as converged.
    pub convergence_tol: f64,
    /// Average of `|mu_n|^2` over the second half above this counts as linear growth.
    pub growth_min: f64,
}

impl Default for SjkConfig {
    fn default() -> Self {
        Self { convergence_tol: 1e-10, growth_min: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SjkOutcome {
    pub verdict: SjkVerdict,
    /// `sum_{1 <= n <= N} |mu_n|^2`.
    pub partial_sum: f64,
    /// Same sum up to `N/2`.
    pub half_sum: f64,
    /// `(1/N) * partial_sum`, which tends to the squared atom weights.
    pub wiener_average: f64,
}

/// SJK recurrence from moments: transient iff `sum |mu_n|^2 < inf`, decided by
/// a window test on the partial sums. Anything the window cannot settle is
/// reported as inconclusive.
pub fn sjk_classify(moments: &MomentSequence, config: &SjkConfig) -> SjkOutcome {
    let n = moments.truncation();
    let sq: Vec<f64> = moments.mu.iter().map(|m| m.norm_sqr()).collect();
    let half = n / 2;
    let partial_sum: f64 = sq.iter().skip(1).sum();
    let half_sum: f64 = sq.iter().skip(1).take(half).sum();
    let tail = partial_sum - half_sum;
    let wiener_average = if n > 0 { partial_sum / n as f64 } else { 0.0 };
    let verdict = if n < 2 {
        SjkVerdict::Inconclusive
    } else if tail <= config.convergence_tol {
        SjkVerdict::SjkTransient
    } else if tail / (n - half) as f64 >= config.growth_min {
        SjkVerdict::SjkRecurrent
    } else {
        SjkVerdict::Inconclusive
    };
    SjkOutcome { verdict, partial_sum, half_sum, wiener_average }
}
