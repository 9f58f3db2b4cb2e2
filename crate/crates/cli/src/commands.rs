use std::f64::consts::TAU;
use std::path::Path;

use serde::Deserialize;
use serde_json::json;
use urec::cmv::{
    band_edges, constant_coin_amplitudes, constant_coin_return, constant_coin_return_quadrature, khrushchev_return,
    CoinedWalkSpec, HalfLineWalk, LineWalk, WalkDomain, WalkJson,
};
use urec::fourier::{
    coin_phase_scan, coin_state_return, fourier_return_probability, phase_scan, superposition, MomentumSymbol,
    SymbolJson,
};
use urec::measure::{ac_density_at, sjk_classify, DensityValue, MeasureSpec, SjkConfig};
use urec::monitored::{
    expected_return_time, monitored_run_with, return_probability, return_time_variance, ArrivalRecord, Operator,
    TailPolicy, UnitarySystem,
};
use urec::renewal::{
    first_return_from_return, polya_classify, return_sequence, reversible_spectral, sjk_quantities, ChainSpec,
    MarkovChain, PolyaConfig, PolyaOutcome,
};
use urec::schur::{
    blaschke_zeros, inner_deviation, toeplitz_conditions, toeplitz_feasibility, variance_from_zeros,
    verblunsky_from_taylor, winding_number, SchurRepresentation, SchurSpec,
};
use urec::{Error, Tolerances, UnitCircleMeasure, C};

use crate::output::{Cell, Csv, Summary};
use crate::{read_json, CliError, Common, DomainArg, Gamma, MeasureArgs, MarkovArgs, SchurArgs, SimulateArgs};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemJson {
    #[serde(rename = "U")]
    u: Vec<Vec<C>>,
    phi: Vec<C>,
}

fn load_measure(path: &Path, tol: &Tolerances) -> Result<UnitCircleMeasure, CliError> {
    let spec: MeasureSpec = read_json(path)?;
    let m = UnitCircleMeasure::from_spec(&spec)?;
    Ok(UnitCircleMeasure::with_tolerances(m.atoms().to_vec(), m.ac_part().map(|a| a.coefficients().to_vec()), tol)?)
}

pub fn measure_analyze(args: &MeasureArgs) -> Result<(), CliError> {
    let c = &args.common;
    let mut tol = c.tolerances()?;
    if let Some(t) = c.tol {
        tol.radial = t;
    }
    let n = c.n_or(10)?;
    let grid = c.grid_or(64)?;
    let schedule = c.schedule()?;
    let measure = load_measure(&args.measure, &tol)?;
    let moments = measure.moments(n);
    let class = measure.classify_recurrence_with(&tol);
    let sjk = sjk_classify(&moments, &SjkConfig::default());
    let atoms: Vec<_> = measure
        .atoms()
        .iter()
        .map(|a| {
            let radial = urec::measure::atom_mass_at(&measure, a.position(), &schedule, &tol).ok();
            json!({"angle": a.angle, "weight": a.weight, "radial_mass": radial})
        })
        .collect();
    let taylor = urec::schur::schur_taylor_from_moments(&moments, n)?;

    let mut csv = Csv::new(&["t", "density", "radial_density", "singular_mass"]);
    for j in 0..grid {
        let t = TAU * j as f64 / grid as f64;
        let exact = measure.ac_part().map_or(0.0, |ac| ac.density(t));
        let (radial, mass) = match ac_density_at(&measure, t, &schedule, &tol)? {
            DensityValue::Regular { density, .. } => (density, 0.0),
            DensityValue::Singular { mass_estimate } => (f64::NAN, mass_estimate),
        };
        csv.row([Cell::Real(t), exact.into(), radial.into(), mass.into()]);
    }
    csv.write(c.out_csv.as_deref())?;

    let mut s = Summary::new("measure analyze");
    s.set("moments", &moments.mu)
        .set("schur_taylor", &taylor)
        .set("ac_mass", measure.ac_mass())
        .set("atoms", atoms)
        .set("classification", class.class)
        .set(
            "sjk",
            json!({
                "verdict": format!("{:?}", sjk.verdict),
                "partial_sum": sjk.partial_sum,
                "half_sum": sjk.half_sum,
                "wiener_average": sjk.wiener_average,
            }),
        );
    if measure.is_finite_atomic() {
        let f = SchurRepresentation::from_atomic_measure(&measure)?;
        let zeros = blaschke_zeros(&f, &tol)?;
        s.set("tau", winding_number(&f, grid, &tol)?).set("variance", variance_from_zeros(&zeros)?);
    }
    s.meta("N", n).meta("grid", grid).meta("r_schedule", &schedule).meta("tolerances", tol);
    s.emit(c.out_json.as_deref())
}

fn runs_csv(record: &ArrivalRecord) -> Csv {
    let mut csv = Csv::new(&["n", "a_re", "a_im", "a_abs2", "s_n"]);
    for (k, a) in record.a.iter().enumerate() {
        csv.row([Cell::Int(k + 1), a.re.into(), a.im.into(), a.norm_sqr().into(), record.s[k + 1].into()]);
    }
    csv
}

fn run_summary(s: &mut Summary, record: &ArrivalRecord, survival_tol: f64) -> Result<(), CliError> {
    let rp = return_probability(record);
    let policy = TailPolicy::RequireRecurrent { tol: survival_tol };
    let tau = match expected_return_time(record, policy) {
        Err(Error::Transient { .. }) => expected_return_time(record, TailPolicy::AcceptLowerBound)?,
        other => other?,
    };
    let var = return_time_variance(record, TailPolicy::AcceptLowerBound)?;
    let returned = record.tail_survival() <= survival_tol;
    s.set("R_lower", rp.lower)
        .set("R_upper", rp.upper)
        .set("tau_lower", tau.value)
        .set("tau_int_candidate", if returned { tau.integer_candidate } else { None })
        .set("var", var.value)
        .set("var_tail_diagnostic", var.tail_diagnostic)
        .set("tail_survival", record.tail_survival())
        .set("returned", returned)
        .set("conservation_defect", record.conservation_defect())
        .set("N", record.truncation());
    s.meta("N", record.truncation()).meta("survival_tol", survival_tol);
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let c = &args.common;
    let mut tol = c.tolerances()?;
    if let Some(t) = c.tol {
        tol.survival = t;
    }
    let (system, measure) = if let Some(p) = &args.input.measure {
        let m = load_measure(p, &tol)?;
        let n = c.n_or(100)?;
        (UnitarySystem::canonical(&m, n)?, Some(m))
    } else {
        let p = args.input.system.as_ref().expect("clap enforces one input");
        let j: SystemJson = read_json(p)?;
        (UnitarySystem::from_rows(&j.u, j.phi, &tol)?, None)
    };
    let n = c.n_or(system.default_truncation())?;
    let record = monitored_run_with(&system, n, &tol)?;
    runs_csv(&record).write(c.out_csv.as_deref())?;
    let mut s = Summary::new("simulate");
    run_summary(&mut s, &record, tol.survival)?;
    if let Some(m) = measure.filter(|m| m.is_finite_atomic()) {
        let zeros = blaschke_zeros(&SchurRepresentation::from_atomic_measure(&m)?, &tol)?;
        s.set("var_from_zeros", variance_from_zeros(&zeros)?);
    }
    s.meta("dimension", system.dim()).meta("tolerances", tol);
    s.emit(c.out_json.as_deref())
}

pub fn schur(args: &SchurArgs) -> Result<(), CliError> {
    let c = &args.common;
    let mut tol = c.tolerances()?;
    if let Some(t) = c.tol {
        tol.inner = t;
    }
    let n = c.n_or(20)?;
    let grid = c.grid_or(64)?;
    let spec: SchurSpec = read_json(&args.schur)?;
    let f = SchurRepresentation::try_from(spec)?;
    let taylor = f.taylor_coefficients(n)?;
    let ext = verblunsky_from_taylor(&taylor, n, &tol)?;
    let deviation = inner_deviation(&f, grid.max(256))?;
    let tau = match winding_number(&f, grid, &tol) {
        Ok(w) => Some(w),
        Err(Error::NotInner { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let zeros = match &f {
        SchurRepresentation::Rational { .. } | SchurRepresentation::Blaschke { .. } if tau.is_some() => {
            Some(blaschke_zeros(&f, &tol)?)
        }
        _ => None,
    };
    let variance = match (&zeros, tau) {
        (Some(z), Some(_)) => Some(variance_from_zeros(z)?),
        _ => None,
    };
    let a: Vec<C> = taylor.iter().map(|x| x.conj()).collect();
    let report = toeplitz_feasibility(&a, n, &tol);
    let z0 = C::new(0.0, 0.0);
    let get = |k: usize| a.get(k).copied().unwrap_or(z0);
    let mut s = Summary::new("schur");
    s.set("taylor", &taylor)
        .set("verblunsky", &ext.sequence.gamma)
        .set("blaschke_degree", ext.termination.map(|(k, _)| k))
        .set("inner_deviation", deviation)
        .set("inner", tau.is_some())
        .set("tau", tau)
        .set("zeros", zeros)
        .set("variance", variance)
        .set(
            "feasibility",
            json!({
                "feasible": report.feasible(),
                "first_failing_order": report.first_failing_order,
                "min_eigenvalues": report.min_eigenvalues,
                "conditions": toeplitz_conditions(get(0), get(1), get(2)),
            }),
        );
    s.meta("N", n).meta("grid", grid).meta("tolerances", tol);
    s.emit(c.out_json.as_deref())
}

pub fn markov(args: &MarkovArgs) -> Result<(), CliError> {
    let c = &args.common;
    let tol = c.tolerances()?;
    let mut polya_cfg = PolyaConfig::default();
    if let Some(t) = c.tol {
        polya_cfg.tail_tol = t;
    }
    let n = c.n_or(1000)?;
    let spec: ChainSpec = read_json(&args.chain)?;
    let chain = MarkovChain::from_spec(&spec)?;
    let seq = return_sequence(&chain, n);
    let q = first_return_from_return(&seq.p);
    let sjk = sjk_quantities(&seq.p)?;
    let mut csv = Csv::new(&["n", "p_n", "q_n", "q_sjk_n"]);
    for k in 0..=n {
        csv.row([Cell::Int(k), seq.p[k].into(), q[k].into(), sjk.q_sjk.get(k).copied().unwrap_or(0.0).into()]);
    }
    csv.write(c.out_csv.as_deref())?;

    let pi = match &spec.pi {
        Some(p) => p.clone(),
        None => chain.stationary()?,
    };
    let spectral = reversible_spectral(&chain, &pi);
    let polya = match polya_classify(&seq.p, &polya_cfg) {
        PolyaOutcome::Recurrent { partial_sum, growth_ratio } => {
            json!({"verdict": "recurrent", "partial_sum": partial_sum, "growth_ratio": growth_ratio})
        }
        PolyaOutcome::Transient { partial_sum, return_probability } => {
            json!({"verdict": "transient", "partial_sum": partial_sum, "return_probability": return_probability})
        }
        PolyaOutcome::Inconclusive { partial_sum, growth_ratio } => {
            json!({"verdict": "inconclusive", "partial_sum": partial_sum, "growth_ratio": growth_ratio})
        }
    };
    let r_partial: f64 = q.iter().sum();
    let tau_partial: f64 = q.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let mut s = Summary::new("markov");
    s.set("tau_c", spectral.as_ref().ok().and_then(|sp| sp.tau_c))
        .set("mass_at_one", spectral.as_ref().ok().map(|sp| sp.mass_at_one))
        .set("reversible", spectral.is_ok())
        .set("R_c_partial", r_partial)
        .set("tau_c_partial", tau_partial)
        .set("polya", polya)
        .set(
            "sjk",
            json!({
                "R_sjk": sjk.r_sjk,
                "tau_sjk": sjk.tau_sjk,
                "tau_is_lower_bound": sjk.tau_is_lower_bound,
            }),
        )
        .set("leakage", seq.leakage)
        .set("warning", seq.warning)
        .set("N", n);
    s.meta("N", n).meta("polya_tail_tol", polya_cfg.tail_tol).meta("polya_growth_min", polya_cfg.growth_min);
    s.meta("tolerances", tol);
    s.emit(c.out_json.as_deref())
}

fn gamma_value(g: &Gamma) -> Result<C, CliError> {
    let re = g.gamma.ok_or_else(|| CliError::Input("--gamma is required".into()))?;
    Ok(C::new(re, g.gamma_im))
}

fn domain(d: DomainArg) -> WalkDomain {
    match d {
        DomainArg::HalfLine => WalkDomain::HalfLine,
        DomainArg::Line => WalkDomain::Line,
    }
}

pub fn walk_constant_coin(g: &Gamma, d: DomainArg, c: &Common) -> Result<(), CliError> {
    let gamma = gamma_value(g)?;
    let dom = domain(d);
    let nodes = c.grid_or(96)?;
    let r = constant_coin_return(gamma, dom)?;
    let q = constant_coin_return_quadrature(gamma, dom, nodes)?;
    let mut s = Summary::new("walk constant-coin");
    s.set("R", r)
        .set("R_quadrature", q.value)
        .set("quadrature_error", q.error_estimate)
        .set("band_edges", band_edges(gamma));
    if let Some(n) = c.n {
        if dom != WalkDomain::HalfLine {
            return Err(CliError::Input("the amplitude series is available for the half-line only".into()));
        }
        let a = constant_coin_amplitudes(gamma, n)?;
        let mut csv = Csv::new(&["n", "a_re", "a_im", "a_abs2", "s_n"]);
        let mut surv = 1.0;
        for (k, x) in a.iter().enumerate() {
            surv -= x.norm_sqr();
            csv.row([Cell::Int(k + 1), x.re.into(), x.im.into(), x.norm_sqr().into(), surv.into()]);
        }
        csv.write(c.out_csv.as_deref())?;
        s.set("R_partial", 1.0 - surv).set("N", n).meta("N", n);
    }
    s.meta("gamma", gamma).meta("domain", dom).meta("quadrature_nodes", nodes).meta("quadrature_nodes_check", nodes / 2);
    s.emit(c.out_json.as_deref())
}

pub fn walk_cmv(path: &Path, start: usize, c: &Common) -> Result<(), CliError> {
    let mut tol = c.tolerances()?;
    if let Some(t) = c.tol {
        tol.survival = t;
    }
    let j: WalkJson = read_json(path)?;
    let walk = CoinedWalkSpec::from_json(&j)?;
    let n = c.n_or(1000)?;
    let nodes = c.grid_or(96)?;
    let system = match walk.domain {
        WalkDomain::HalfLine => {
            let ev = HalfLineWalk::for_run(&walk, start, n)?;
            let dim = urec::monitored::Evolution::dim(&ev);
            let mut phi = vec![C::new(0.0, 0.0); dim];
            phi[start] = C::new(1.0, 0.0);
            UnitarySystem::with_tolerances(Operator::Custom(std::sync::Arc::new(ev)), phi, &tol)?
        }
        WalkDomain::Line => {
            let gamma = match (walk.coins.is_empty(), walk.constant_tail) {
                (true, Some(g)) => g,
                _ => return Err(CliError::Input("line walks need a constant coin and no site coins".into())),
            };
            let ev = LineWalk::for_run(gamma, n)?;
            let dim = urec::monitored::Evolution::dim(&ev);
            let mut phi = vec![C::new(0.0, 0.0); dim];
            let (x, down) = ((start / 2) as i64, start % 2 == 1);
            phi[ev.index(x, down)] = C::new(1.0, 0.0);
            UnitarySystem::with_tolerances(Operator::Custom(std::sync::Arc::new(ev)), phi, &tol)?
        }
    };
    let record = monitored_run_with(&system, n, &tol)?;
    runs_csv(&record).write(c.out_csv.as_deref())?;
    let mut s = Summary::new("walk cmv");
    run_summary(&mut s, &record, tol.survival)?;
    if let Some(g) = walk.constant_tail {
        match walk.domain {
            WalkDomain::HalfLine => {
                let q = khrushchev_return(&walk, start, nodes)?;
                s.set("R_schur", q.value).set("R_schur_error", q.error_estimate).set("R_schur_nodes", q.nodes);
            }
            WalkDomain::Line if walk.coins.is_empty() => {
                s.set("R_schur", constant_coin_return(g, WalkDomain::Line)?);
            }
            _ => {}
        }
    }
    s.meta("domain", walk.domain).meta("start", start).meta("tolerances", tol).meta("quadrature_nodes", nodes);
    s.emit(c.out_json.as_deref())
}

fn parse_state(s: &str) -> Result<Vec<C>, CliError> {
    s.split(';')
        .map(|part| {
            let (re, im) = part.split_once(',').unwrap_or((part, "0"));
            let re: f64 = re.trim().parse().map_err(|_| CliError::Input(format!("bad state component {part:?}")))?;
            let im: f64 = im.trim().parse().map_err(|_| CliError::Input(format!("bad state component {part:?}")))?;
            Ok(C::new(re, im))
        })
        .collect()
}

fn load_symbol(g: &Gamma, symbol: Option<&Path>) -> Result<(MomentumSymbol, Option<C>), CliError> {
    match symbol {
        Some(p) => {
            let j: SymbolJson = read_json(p)?;
            Ok((MomentumSymbol::from_json(&j)?, None))
        }
        None => {
            let gamma = gamma_value(g)?;
            Ok((MomentumSymbol::coin_walk(gamma)?, Some(gamma)))
        }
    }
}

pub fn walk_fourier(
    g: &Gamma,
    symbol: Option<&Path>,
    state: Option<&str>,
    theta: Option<f64>,
    c: &Common,
) -> Result<(), CliError> {
    let (sym, gamma) = load_symbol(g, symbol)?;
    let phi = match (state, theta) {
        (Some(s), _) => parse_state(s)?,
        (None, Some(t)) => superposition(t).to_vec(),
        (None, None) => {
            let mut v = vec![C::new(0.0, 0.0); sym.fiber_dim()];
            v[0] = C::new(1.0, 0.0);
            v
        }
    };
    let n = c.n_or(1000)?;
    let nodes = c.grid_or(96)?;
    let r = fourier_return_probability(&sym, &phi, n)?;
    let mut s = Summary::new("walk fourier");
    s.set("R", r.value).set("R_lower", r.partial).set("extrapolation", r.extrapolation).set("N", n);
    if let Some(gm) = gamma {
        let q = coin_state_return(gm, &phi, nodes)?;
        s.set("R_closed_form", q.value)
            .set("R_closed_form_error", q.error_estimate)
            .meta("quadrature_nodes", nodes)
            .meta("gamma", gm);
    }
    s.meta("N", n).meta("moments", 2 * n).meta("state", &phi).meta("symbol", sym.to_json());
    s.emit(c.out_json.as_deref())
}

pub fn walk_phase_scan(g: &Gamma, symbol: Option<&Path>, c: &Common) -> Result<(), CliError> {
    let (sym, gamma) = load_symbol(g, symbol)?;
    let grid = c.grid_or(64)?;
    let thetas: Vec<f64> = (0..grid).map(|j| TAU * j as f64 / grid as f64).collect();
    let mut csv = Csv::new(&["theta", "R"]);
    let mut s = Summary::new("walk phase-scan");
    let values: Vec<(f64, f64)> = match gamma {
        Some(gm) => {
            let nodes = 96;
            s.meta("method", "closed_form").meta("quadrature_nodes", nodes).meta("gamma", gm);
            coin_phase_scan(gm, &thetas, nodes)?.into_iter().map(|(t, q)| (t, q.value)).collect()
        }
        None => {
            let n = c.n_or(1000)?;
            s.meta("method", "moments").meta("N", n);
            phase_scan(&sym, &thetas, n)?.into_iter().map(|(t, r)| (t, r.value)).collect()
        }
    };
    for (t, r) in &values {
        csv.row([Cell::Real(*t), (*r).into()]);
    }
    csv.write(c.out_csv.as_deref())?;
    let rs: Vec<f64> = values.iter().map(|v| v.1).collect();
    s.set("R_min", rs.iter().copied().fold(f64::INFINITY, f64::min))
        .set("R_max", rs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .set("theta", &thetas)
        .set("R", &rs);
    s.meta("grid", grid);
    s.emit(c.out_json.as_deref())
}
