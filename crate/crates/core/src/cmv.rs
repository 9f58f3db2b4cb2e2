//! CMV matrices, coined walks on the half-line and the constant-coin
//! closed forms on the half-line and the line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monitored::Evolution;
use crate::poly::C;
use crate::quadrature::{circle_mean_with_breakpoints, Quadrature};
use crate::schur::{inverse_schur_step, SchurFunction, SchurIterate};

/// Finite window of the five-diagonal CMV matrix `C = M L`, with
/// `L = Θ_0 ⊕ Θ_2 ⊕ …`, `M = 1 ⊕ Θ_1 ⊕ Θ_3 ⊕ …` and
/// `Θ_j = [[conj γ_j, ρ_j], [ρ_j, -γ_j]]`. Blocks cut by the window edge keep
/// only their diagonal entry, so the last one or two columns are not unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct CmvMatrix {
    dim: usize,
    gamma: Vec<C>,
    columns: Vec<Vec<(usize, C)>>,
}

fn theta_column(gamma: &[C], start: usize, dim: usize, j: usize) -> Vec<(usize, C)> {
    // column j of the block-diagonal factor whose blocks start at `start`, `start + 2`, ...
    if j < start {
        return vec![(j, C::new(1.0, 0.0))];
    }
    let k = start + 2 * ((j - start) / 2);
    let g = gamma[k];
    let rho = C::new((1.0 - g.norm_sqr()).sqrt(), 0.0);
    if k + 1 >= dim {
        return vec![(k, g.conj())];
    }
    if j == k {
        vec![(k, g.conj()), (k + 1, rho)]
    } else {
        vec![(k, rho), (k + 1, -g)]
    }
}

impl CmvMatrix {
    pub fn from_verblunsky(gamma: &[C], dim: usize) -> Result<Self> {
        if gamma.len() < dim {
            return Err(Error::Domain(format!("{} parameters for a window of dimension {dim}", gamma.len())));
        }
        if let Some((k, g)) = gamma.iter().take(dim).enumerate().find(|(_, g)| !(g.norm() < 1.0)) {
            return Err(Error::Domain(format!("|gamma_{k}| = {} must be < 1", g.norm())));
        }
        let gamma = gamma[..dim].to_vec();
        let columns = (0..dim)
            .map(|j| {
                let mut col: Vec<(usize, C)> = Vec::with_capacity(4);
                for (i, l) in theta_column(&gamma, 0, dim, j) {
                    for (r, m) in theta_column(&gamma, 1, dim, i) {
                        match col.iter_mut().find(|(rr, _)| *rr == r) {
                            Some((_, v)) => *v += m * l,
                            None => col.push((r, m * l)),
                        }
                    }
                }
                col.retain(|(_, v)| v.norm() != 0.0);
                col.sort_by_key(|(r, _)| *r);
                col
            })
            .collect();
        Ok(Self { dim, gamma, columns })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> &[C] {
        &self.gamma
    }

    pub fn column(&self, j: usize) -> &[(usize, C)] {
        &self.columns[j]
    }

    pub fn entry(&self, i: usize, j: usize) -> C {
        self.columns[j].iter().find(|(r, _)| *r == i).map_or(C::new(0.0, 0.0), |(_, v)| *v)
    }

    pub fn bandwidth(&self) -> usize {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(j, col)| col.iter().map(move |(i, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
            * 2
            + 1
    }

    /// Columns `0..dim-2` are unaffected by the window edge.
    pub fn interior_columns(&self) -> usize {
        self.dim.saturating_sub(2)
    }
}

impl Evolution for CmvMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, psi: &[C], out: &mut [C]) {
        out.iter_mut().for_each(|x| *x = C::new(0.0, 0.0));
        for (j, col) in self.columns.iter().enumerate() {
            let p = psi[j];
            if p.norm_sqr() != 0.0 {
                for &(i, v) in col {
                    out[i] += v * p;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkDomain {
    HalfLine,
    Line,
}

/// Coins `C_x = [[ρ_x, -γ_x], [conj γ_x, ρ_x]]` given by `γ_x`, site by
/// site, followed by an optional constant tail.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinedWalkSpec {
    pub domain: WalkDomain,
    pub coins: Vec<C>,
    pub constant_tail: Option<C>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoinJson {
    pub gamma_re: f64,
    pub gamma_im: f64,
}

/// JSON form `{"domain":"half-line","coins":[{"gamma_re":..,"gamma_im":..}],"constant_tail":{..}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkJson {
    pub domain: WalkDomain,
    #[serde(default)]
    pub coins: Vec<CoinJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_tail: Option<CoinJson>,
}

impl CoinedWalkSpec {
    pub fn new(domain: WalkDomain, coins: Vec<C>, constant_tail: Option<C>) -> Result<Self> {
        for (x, g) in coins.iter().chain(constant_tail.iter()).enumerate() {
            if !(g.norm() < 1.0) {
                return Err(Error::Domain(format!("coin parameter {x} has |gamma| = {} (must be < 1)", g.norm())));
            }
        }
        if coins.is_empty() && constant_tail.is_none() {
            return Err(Error::Domain("walk needs coins or a constant tail".into()));
        }
        Ok(Self { domain, coins, constant_tail })
    }

    pub fn constant(domain: WalkDomain, gamma: C) -> Result<Self> {
        Self::new(domain, Vec::new(), Some(gamma))
    }

    pub fn from_json(j: &WalkJson) -> Result<Self> {
        let c = |c: &CoinJson| C::new(c.gamma_re, c.gamma_im);
        Self::new(j.domain, j.coins.iter().map(c).collect(), j.constant_tail.as_ref().map(c))
    }

    pub fn to_json(&self) -> WalkJson {
        let c = |g: &C| CoinJson { gamma_re: g.re, gamma_im: g.im };
        WalkJson { domain: self.domain, coins: self.coins.iter().map(c).collect(), constant_tail: self.constant_tail.as_ref().map(c) }
    }

    pub fn coin(&self, x: usize) -> Result<C> {
        self.coins
            .get(x)
            .copied()
            .or(self.constant_tail)
            .ok_or_else(|| Error::Domain(format!("no coin for site {x} and no constant tail")))
    }

    fn coin_table(&self, sites: usize) -> Result<Vec<(f64, C)>> {
        (0..sites).map(|x| self.coin(x).map(|g| ((1.0 - g.norm_sqr()).sqrt(), g))).collect()
    }

    /// Verblunsky parameters `γ_{2x} = γ_x`, `γ_{2x+1} = 0`.
    pub fn verblunsky(&self, len: usize) -> Result<Vec<C>> {
        (0..len).map(|k| if k % 2 == 0 { self.coin(k / 2) } else { Ok(C::new(0.0, 0.0)) }).collect()
    }
}

/// Basis relabelling `e_{2x} = |x,↑>`, `e_{2x+1} = |x,↓>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisMap;

impl BasisMap {
    pub fn index(&self, x: usize, down: bool) -> usize {
        2 * x + down as usize
    }

    pub fn site(&self, k: usize) -> (usize, bool) {
        (k / 2, k % 2 == 1)
    }
}

/// CMV window of a half-line walk.
pub fn walk_to_cmv(walk: &CoinedWalkSpec, dim: usize) -> Result<(CmvMatrix, BasisMap)> {
    if walk.domain != WalkDomain::HalfLine {
        return Err(Error::Domain("CMV form is only available for half-line walks".into()));
    }
    Ok((CmvMatrix::from_verblunsky(&walk.verblunsky(dim)?, dim)?, BasisMap))
}

/// Shift after coin on sites `0..sites` of the half-line, index `2x + spin`:
/// `|x,↑> -> ρ|x+1,↑> + conj γ|x-1,↓>`, `|x,↓> -> -γ|x+1,↑> + ρ|x-1,↓>`,
/// reflecting `|-1,↓> = |0,↑>` at the origin and `|sites,↑> = |sites-1,↓>` at the far edge.
pub struct HalfLineWalk {
    coins: Vec<(f64, C)>,
}

impl HalfLineWalk {
    pub fn new(walk: &CoinedWalkSpec, sites: usize) -> Result<Self> {
        if walk.domain != WalkDomain::HalfLine {
            return Err(Error::Domain("expected a half-line walk".into()));
        }
        Ok(Self { coins: walk.coin_table(sites)? })
    }

    /// Window for `n_max` monitored steps from basis state `start`.
    pub fn for_run(walk: &CoinedWalkSpec, start: usize, n_max: usize) -> Result<Self> {
        Self::new(walk, start / 2 + n_max + 2)
    }
}

impl Evolution for HalfLineWalk {
    fn dim(&self) -> usize {
        2 * self.coins.len()
    }

    fn apply(&self, psi: &[C], out: &mut [C]) {
        out.iter_mut().for_each(|x| *x = C::new(0.0, 0.0));
        let n = self.coins.len();
        for (x, &(rho, g)) in self.coins.iter().enumerate() {
            let (up, down) = (psi[2 * x], psi[2 * x + 1]);
            let new_up = rho * up - g * down;
            let new_down = g.conj() * up + rho * down;
            if x + 1 < n {
                out[2 * (x + 1)] += new_up;
            } else {
                out[2 * x + 1] += new_up;
            }
            if x > 0 {
                out[2 * (x - 1) + 1] += new_down;
            } else {
                out[0] += new_down;
            }
        }
    }
}

/// Constant-coin walk on a ring of `2 half_width + 1` sites standing in for
/// the line; index `2 (x + half_width) + spin`. Exact while nothing wraps.
pub struct LineWalk {
    rho: f64,
    gamma: C,
    half_width: usize,
}

impl LineWalk {
    pub fn new(gamma: C, half_width: usize) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { rho: (1.0 - gamma.norm_sqr()).sqrt(), gamma, half_width })
    }

    pub fn for_run(gamma: C, n_max: usize) -> Result<Self> {
        Self::new(gamma, n_max + 2)
    }

    pub fn index(&self, x: i64, down: bool) -> usize {
        2 * (x + self.half_width as i64) as usize + down as usize
    }
}

impl Evolution for LineWalk {
    fn dim(&self) -> usize {
        2 * (2 * self.half_width + 1)
    }

    fn apply(&self, psi: &[C], out: &mut [C]) {
        out.iter_mut().for_each(|x| *x = C::new(0.0, 0.0));
        let n = 2 * self.half_width + 1;
        let g = self.gamma;
        for x in 0..n {
            let (up, down) = (psi[2 * x], psi[2 * x + 1]);
            out[2 * ((x + 1) % n)] += self.rho * up - g * down;
            out[2 * ((x + n - 1) % n) + 1] += g.conj() * up + self.rho * down;
        }
    }
}

fn check_gamma(gamma: C) -> Result<()> {
    let g = gamma.norm();
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::Domain(format!("constant coin needs 0 < |gamma| < 1, got {g}")));
    }
    Ok(())
}

/// Schur function of `|0,↑>` for the constant coin,
/// `f = 2γ / (sqrt(D) + 1 - z^2)` with `D = (1 - z^2)^2 + 4|γ|^2 z^2`.
/// `sqrt(D)` is the product of principal roots `sqrt(1 - z/z_k)` over the
/// four unimodular roots `z_k = ±ρ ± i|γ|` of `D`; each factor is analytic
/// on the open disk and continuous up to the circle, and the product is 1 at 0.
/// Valid on the closed disk.
pub fn constant_coin_schur(gamma: C, z: C) -> Result<C> {
    check_gamma(gamma)?;
    if z.norm() > 1.0 + 1e-14 {
        return Err(Error::Domain(format!("|z| = {} must be <= 1", z.norm())));
    }
    let g = gamma.norm();
    let rho = (1.0 - g * g).sqrt();
    let roots = [C::new(rho, g), C::new(rho, -g), C::new(-rho, g), C::new(-rho, -g)];
    let sqrt_d: C = roots.iter().map(|zk| (1.0 - z / zk).sqrt()).product();
    let f = 2.0 * gamma / (sqrt_d + 1.0 - z * z);
    if !(f.norm() <= 1.0 + 1e-10) {
        return Err(Error::Branch(format!("{z} (|f| = {})", f.norm())));
    }
    Ok(f)
}

/// Band edges `|sin t| = |γ|` where the boundary values change character.
pub fn band_edges(gamma: C) -> [f64; 4] {
    let eta = gamma.norm().asin();
    [eta, PI - eta, PI + eta, -eta]
}

/// Closed-form return probability: `‖f‖^2` on the half-line, `‖f^2‖^2` on the line.
pub fn constant_coin_return(gamma: C, domain: WalkDomain) -> Result<f64> {
    check_gamma(gamma)?;
    let g = gamma.norm();
    let rho = (1.0 - g * g).sqrt();
    let eta = g.asin();
    Ok(match domain {
        WalkDomain::HalfLine => 2.0 / (PI * g * g) * (rho * g + (1.0 - 2.0 * rho * rho) * eta),
        WalkDomain::Line => 2.0 / (PI * g.powi(4)) * ((1.0 + 2.0 * rho * rho) * rho * g + (1.0 - 4.0 * rho * rho) * eta),
    })
}

/// The same return probabilities by Gauss–Legendre quadrature of
/// `|f|^2` resp. `|f|^4` split at the band edges.
pub fn constant_coin_return_quadrature(gamma: C, domain: WalkDomain, nodes: usize) -> Result<Quadrature> {
    check_gamma(gamma)?;
    let power = match domain {
        WalkDomain::HalfLine => 1,
        WalkDomain::Line => 2,
    };
    let f = |t: f64| constant_coin_schur(gamma, C::from_polar(1.0, t)).map_or(f64::NAN, |v| v.norm_sqr().powi(power));
    let q = circle_mean_with_breakpoints(f, &band_edges(gamma), nodes);
    if !q.value.is_finite() {
        return Err(Error::Branch("boundary evaluation of the constant-coin Schur function".into()));
    }
    Ok(q)
}

/// First-arrival amplitudes `a_1..a_{n_max}` of `|0,↑>` for the constant coin:
/// `a_1 = conj γ`, `a_{2n} = 0`, `a_{2n+1} = (P_{n-1}(x) - x P_n(x)) / (2γ(n+1))`, `x = 1 - 2|γ|^2`.
pub fn constant_coin_amplitudes(gamma: C, n_max: usize) -> Result<Vec<C>> {
    check_gamma(gamma)?;
    let x = 1.0 - 2.0 * gamma.norm_sqr();
    let n_leg = n_max / 2 + 1;
    let mut p = Vec::with_capacity(n_leg + 1);
    p.push(1.0);
    p.push(x);
    for k in 1..n_leg {
        let next = ((2 * k + 1) as f64 * x * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
        p.push(next);
    }
    Ok((1..=n_max)
        .map(|m| {
            if m == 1 {
                gamma.conj()
            } else if m % 2 == 0 {
                C::new(0.0, 0.0)
            } else {
                let n = (m - 1) / 2;
                (p[n - 1] - x * p[n]) / (2.0 * gamma * (n + 1) as f64)
            }
        })
        .collect())
}

/// Least-squares slope of `log y` against `log x`, ignoring non-positive `y`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, y)| *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::EstimationFailure { what: "log-log slope".into(), diagnostics: "fewer than two positive points".into() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Schur function of `(C, e_0)` for a half-line walk whose coins become the
/// constant tail after the listed sites: the closed form for the tail, pulled
/// back through the inverse Schur steps of the listed parameters.
#[derive(Debug, Clone)]
pub struct WalkSchur {
    prefix: Vec<C>,
    tail: C,
}

impl WalkSchur {
    pub fn new(walk: &CoinedWalkSpec) -> Result<Self> {
        if walk.domain != WalkDomain::HalfLine {
            return Err(Error::Domain("expected a half-line walk".into()));
        }
        let tail = walk
            .constant_tail
            .ok_or_else(|| Error::Domain("walk Schur function needs a constant tail".into()))?;
        check_gamma(tail)?;
        Ok(Self { prefix: walk.verblunsky(2 * walk.coins.len())?, tail })
    }

    pub fn parameters(&self) -> &[C] {
        &self.prefix
    }

    pub fn tail(&self) -> C {
        self.tail
    }
}

impl SchurFunction for WalkSchur {
    fn eval(&self, z: C) -> Result<C> {
        let mut f = constant_coin_schur(self.tail, z)?;
        for g in self.prefix.iter().rev() {
            f = inverse_schur_step(*g, z, f);
        }
        Ok(f)
    }
}

/// Return probability from basis state `e_k` as `‖f_k‖^2`, with the
/// Khrushchev iterate `f_k` obtained by `k` pointwise Schur steps from the
/// walk's `f_0`. Starts at `nodes` Gauss nodes per arc and doubles until two
/// levels agree to `1e-12`; non-constant coins can put narrow resonances on the band.
pub fn khrushchev_return(walk: &CoinedWalkSpec, k: usize, nodes: usize) -> Result<Quadrature> {
    const TOL: f64 = 1e-12;
    const MAX_NODES: usize = 1 << 14;
    let base = WalkSchur::new(walk)?;
    let gamma = walk.verblunsky(k)?;
    let fk = SchurIterate { base, gamma };
    let tail = walk.constant_tail.expect("checked by WalkSchur");
    let f = |t: f64| fk.eval(C::from_polar(1.0, t)).map_or(f64::NAN, |v| v.norm_sqr());
    let mut n = nodes.max(8);
    let mut prev = circle_mean_with_breakpoints(f, &band_edges(tail), n);
    let mut refinements = 0;
    loop {
        if !prev.value.is_finite() {
            return Err(Error::EstimationFailure {
                what: format!("Khrushchev iterate f_{k} on the circle"),
                diagnostics: "evaluation failed or produced a non-finite value".into(),
            });
        }
        if 2 * n > MAX_NODES {
            return Err(Error::Resolution { what: format!("||f_{k}||^2 with {n} nodes per arc"), refinements });
        }
        n *= 2;
        refinements += 1;
        let cur = circle_mean_with_breakpoints(f, &band_edges(tail), n);
        let diff = (cur.value - prev.value).abs();
        if diff <= TOL {
            return Ok(Quadrature { error_estimate: diff, ..cur });
        }
        prev = cur;
    }
}
