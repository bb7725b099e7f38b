use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use mdk::chain::stationary_distribution;
use mdk::ergodicity::{dobrushin_tv, estimate_eta_f, estimate_eta_renyi};
use mdk::hypothesis::{aep_check, bayes_error_mc, chernoff_curve, chernoff_information, Prior};
use mdk::instances::{double_well, random_chain, random_pi, random_reversible};
use mdk::io::{chain_value, parse_chain, parse_distribution, ChainDocument};
use mdk::mixing::{mixing_time, MixingDivergence, MixingMode, MixingQuery, DEFAULT_T_CAP};
use mdk::projection::{
    alpha_project_multistart, best_projection, pythagorean_margin, ProjectOptions,
};
use mdk::rng::stream;
use mdk::spectral::spectrum_reversible;
use mdk::{
    alpha_div, classify, f_div_chains, hypercube_walk, metropolis_chain, renyi_div, AlphaOrder,
    Generator, MdkError, ProbabilityVector, Result, StateSpace, TransitionMatrix,
};

use crate::output::value;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| MdkError::Parse(format!("{}: {e}", path.display())))
}

/// A chain file, or the output of `make-chain` whose result holds one.
fn load_chain(path: &Path) -> Result<ChainDocument> {
    let text = read(path)?;
    let source = path.display().to_string();
    if let Ok(Value::Object(doc)) = serde_json::from_str::<Value>(&text) {
        if let Some(chain) = doc.get("result").and_then(|r| r.get("chain")) {
            return parse_chain(&chain.to_string(), &source);
        }
    }
    parse_chain(&text, &source)
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum PiSource {
    File,
    Document,
    Stationary,
}

/// pi from --pi, else from the chain documents in order, else the stationary law of the first chain.
fn resolve_pi(
    path: Option<&PathBuf>,
    docs: &[&ChainDocument],
) -> Result<(ProbabilityVector, PiSource)> {
    let space = docs[0].matrix.space();
    if let Some(p) = path {
        let text = read(p)?;
        return Ok((
            parse_distribution(&text, &p.display().to_string(), Some(space))?,
            PiSource::File,
        ));
    }
    if let Some(pi) = docs.iter().find_map(|d| d.pi.clone()) {
        return Ok((pi, PiSource::Document));
    }
    let pi = stationary_distribution(&docs[0].matrix).map_err(|_| {
        MdkError::Domain("no pi given and the stationary law of the chain is not unique".into())
    })?;
    Ok((pi, PiSource::Stationary))
}

fn order(s: &str) -> std::result::Result<AlphaOrder, String> {
    match s {
        "0" => Ok(AlphaOrder::Zero),
        "1" => Ok(AlphaOrder::One),
        "inf" | "infinity" => Ok(AlphaOrder::Infinity),
        _ => {
            let a: f64 = s.parse().map_err(|e| format!("{s}: {e}"))?;
            AlphaOrder::numeric(a).map_err(|e| e.to_string())
        }
    }
}

fn order_name(o: AlphaOrder) -> String {
    match o {
        AlphaOrder::Numeric(a) => a.to_string(),
        AlphaOrder::Zero => "0".into(),
        AlphaOrder::One => "1".into(),
        AlphaOrder::Infinity => "inf".into(),
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedF {
    Tv,
    Kl,
    Hellinger,
    Chi2,
}

impl NamedF {
    fn generator(self) -> Generator {
        match self {
            NamedF::Tv => Generator::Tv,
            NamedF::Kl => Generator::Kl,
            NamedF::Hellinger => Generator::Hellinger,
            NamedF::Chi2 => Generator::Chi2,
        }
    }
}

fn ext(v: f64) -> Value {
    if v.is_finite() {
        json!(v + 0.0)
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

#[derive(Args, Serialize)]
#[command(group(ArgGroup::new("divergence").required(true).args(["renyi", "alpha", "f"])))]
pub struct DivArgs {
    #[arg(long)]
    pub m: PathBuf,
    #[arg(long)]
    pub l: PathBuf,
    #[arg(long)]
    pub pi: Option<PathBuf>,
    /// Renyi order: a positive number, 0, 1 or inf.
    #[arg(long)]
    pub renyi: Option<String>,
    /// Alpha-divergence order, same forms as --renyi.
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long, value_enum)]
    pub f: Option<NamedF>,
}

pub fn div(a: &DivArgs) -> Result<Value> {
    let m = load_chain(&a.m)?;
    let l = load_chain(&a.l)?;
    let (pi, source) = resolve_pi(a.pi.as_ref(), &[&m, &l])?;
    let parse = |s: &str| order(s).map_err(MdkError::Domain);
    let (name, v) = if let Some(r) = &a.renyi {
        let o = parse(r)?;
        (
            format!("renyi({})", order_name(o)),
            renyi_div(&m.matrix, &l.matrix, &pi, o)?,
        )
    } else if let Some(r) = &a.alpha {
        let o = parse(r)?;
        (
            format!("alpha({})", order_name(o)),
            alpha_div(&m.matrix, &l.matrix, &pi, o)?,
        )
    } else {
        let g = a.f.expect("clap requires one divergence").generator();
        (g.name(), f_div_chains(&m.matrix, &l.matrix, &pi, &g)?)
    };
    Ok(json!({
        "divergence": name,
        "value": value(&v)?,
        "pi": pi.weights(),
        "pi_source": value(&source)?,
    }))
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixDivergence {
    Tv,
    DAlpha,
    RAlpha,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Average,
    WorstCase,
    Cesaro,
}

#[derive(Args, Serialize)]
pub struct MixArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub pi: Option<PathBuf>,
    #[arg(long = "div", value_enum, default_value_t = MixDivergence::Tv)]
    pub divergence: MixDivergence,
    /// Order for d-alpha and r-alpha.
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = Mode::Average)]
    pub mode: Mode,
    #[arg(long, default_value_t = DEFAULT_T_CAP)]
    pub t_cap: u64,
}

pub fn mix(a: &MixArgs) -> Result<Value> {
    let doc = load_chain(&a.chain)?;
    let (pi, source) = resolve_pi(a.pi.as_ref(), &[&doc])?;
    let divergence = match a.divergence {
        MixDivergence::Tv => MixingDivergence::Tv,
        MixDivergence::DAlpha => MixingDivergence::DAlpha { alpha: a.alpha },
        MixDivergence::RAlpha => MixingDivergence::RAlpha { alpha: a.alpha },
    };
    let mode = match a.mode {
        Mode::Average => MixingMode::Average,
        Mode::WorstCase => MixingMode::WorstCase,
        Mode::Cesaro => MixingMode::Cesaro,
    };
    let q = MixingQuery::new(divergence, a.eps, mode).with_cap(a.t_cap);
    let report = mixing_time(&doc.matrix, &pi, &q)?;
    let mut out = value(&report)?;
    out["pi_source"] = value(&source)?;
    Ok(out)
}

#[derive(Args, Serialize)]
#[command(group(ArgGroup::new("coefficient").args(["f", "alpha", "renyi"])))]
pub struct EtaArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub pi: Option<PathBuf>,
    /// Named f-divergence; tv when no divergence is given.
    #[arg(long, value_enum)]
    pub f: Option<NamedF>,
    /// Alpha-divergence order.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Renyi order.
    #[arg(long)]
    pub renyi: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
}

pub fn eta(a: &EtaArgs, seed: u64) -> Result<Value> {
    let doc = load_chain(&a.chain)?;
    let (pi, source) = resolve_pi(a.pi.as_ref(), &[&doc])?;
    let est = if let Some(r) = a.renyi {
        estimate_eta_renyi(&doc.matrix, &pi, r, a.starts, a.iters, seed)?
    } else {
        let g = match (a.alpha, a.f) {
            (Some(alpha), _) => Generator::alpha(alpha)?,
            (None, Some(f)) => f.generator(),
            (None, None) => Generator::Tv,
        };
        estimate_eta_f(&doc.matrix, &pi, &g, a.starts, a.iters, seed)?
    };
    let mut out = value(&est)?;
    out["pi_source"] = value(&source)?;
    Ok(out)
}

#[derive(Args, Serialize)]
pub struct ProjectArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub pi: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = ProjectOptions::default().tol)]
    pub tol: f64,
    #[arg(long, default_value_t = ProjectOptions::default().max_iters)]
    pub max_iters: usize,
    /// Independent runs: the symmetrized start plus random feasible starts.
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
    /// Random reversible chains probing the Pythagorean inequality.
    #[arg(long, default_value_t = ProjectOptions::default().probes)]
    pub probes: usize,
}

pub fn project(a: &ProjectArgs, seed: u64) -> Result<Value> {
    let doc = load_chain(&a.chain)?;
    let (pi, source) = resolve_pi(a.pi.as_ref(), &[&doc])?;
    let opts = ProjectOptions {
        tol: a.tol,
        max_iters: a.max_iters,
        probes: a.probes,
        probe_seed: seed,
        init_seed: None,
    };
    let runs = alpha_project_multistart(&doc.matrix, &pi, a.alpha, &opts, a.starts, seed)?;
    let mut best = best_projection(&runs).expect("starts is positive").clone();
    // probes are drawn once for the chosen run so every start count reports the same check
    best.pythagorean_margin = if a.probes > 0 {
        Some(pythagorean_margin(
            &doc.matrix,
            &pi,
            &best.m_star,
            a.alpha,
            a.probes,
            seed,
        )?)
    } else {
        None
    };
    let objectives: Vec<Value> = runs
        .iter()
        .map(|r| value(&r.objective))
        .collect::<Result<_>>()?;
    let mut out = value(&best)?;
    out["run_objectives"] = json!(objectives);
    out["m_star_chain"] = chain_value(&best.m_star, Some(&pi));
    out["pi_source"] = value(&source)?;
    Ok(out)
}

#[derive(Args, Serialize)]
pub struct ChernoffArgs {
    #[arg(long)]
    pub p0: PathBuf,
    #[arg(long)]
    pub p1: PathBuf,
    #[arg(long)]
    pub pi: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Also sample g(alpha) at this many evenly spaced points; 0 for none.
    #[arg(long, default_value_t = 0)]
    pub curve: usize,
}

pub fn chernoff(a: &ChernoffArgs) -> Result<Value> {
    let p0 = load_chain(&a.p0)?;
    let p1 = load_chain(&a.p1)?;
    let (pi, source) = resolve_pi(a.pi.as_ref(), &[&p0, &p1])?;
    let res = chernoff_information(&p0.matrix, &p1.matrix, &pi, a.tol)?;
    let mut out = value(&res)?;
    if a.curve > 0 {
        let curve = chernoff_curve(&p0.matrix, &p1.matrix, &pi, a.curve)?;
        out["curve"] = Value::Array(curve.into_iter().map(|(x, g)| json!([x, ext(g)])).collect());
    }
    out["pi_source"] = value(&source)?;
    Ok(out)
}

#[derive(Args, Serialize)]
pub struct HttestArgs {
    #[arg(long)]
    pub p0: PathBuf,
    #[arg(long)]
    pub p1: PathBuf,
    #[arg(long)]
    pub pi: Option<PathBuf>,
    /// Prior probability of H0; H1 gets the rest.
    #[arg(long, default_value_t = 0.5)]
    pub prior0: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [4, 8, 16, 32])]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Also compare the normalized log-likelihood ratio of this many pairs with KL(P0 || P1).
    #[arg(long)]
    pub aep: Option<usize>,
}

pub fn httest(a: &HttestArgs, seed: u64) -> Result<Value> {
    let p0 = load_chain(&a.p0)?;
    let p1 = load_chain(&a.p1)?;
    let (pi, source) = resolve_pi(a.pi.as_ref(), &[&p0, &p1])?;
    let prior = Prior::new(a.prior0, 1.0 - a.prior0)?;
    let fit = bayes_error_mc(
        &p0.matrix, &p1.matrix, &pi, prior, &a.n_grid, a.trials, seed,
    )?;
    let mut out = value(&fit)?;
    if let Some(n) = a.aep {
        out["aep"] = value(&aep_check(&p0.matrix, &p1.matrix, &pi, n, seed)?)?;
    }
    out["pi_source"] = value(&source)?;
    Ok(out)
}

#[derive(Args, Serialize)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub pi: Option<PathBuf>,
}

pub fn spectrum(a: &SpectrumArgs) -> Result<Value> {
    let doc = load_chain(&a.chain)?;
    let (pi, source) = resolve_pi(a.pi.as_ref(), &[&doc])?;
    let predicates = classify(&doc.matrix, &pi, mdk::chain::STRUCTURAL_TOL)?;
    let summary = spectrum_reversible(&doc.matrix, &pi)?;
    Ok(json!({
        "spectrum": value(&summary)?,
        "predicates": value(&predicates)?,
        "dobrushin_tv": dobrushin_tv(&doc.matrix),
        "pi_source": value(&source)?,
    }))
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainKind {
    /// Lazy walk on the hypercube of dimension --n.
    Hypercube,
    /// Three-state Metropolis double well at --beta.
    DoubleWell,
    /// Metropolis chain from --proposal, --energy and --beta.
    Metropolis,
    /// --n states with flat Dirichlet rows.
    Random,
    /// --n states, reversible under a random pi, off-path edges dropped with --sparsity.
    RandomReversible,
}

#[derive(Args, Serialize)]
pub struct MakeChainArgs {
    #[arg(value_enum)]
    pub kind: ChainKind,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long)]
    pub proposal: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub energy: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub sparsity: f64,
}

fn states(n: usize) -> Result<StateSpace> {
    if n == 0 {
        return Err(MdkError::Domain("--n must be positive".into()));
    }
    StateSpace::indexed(n)
}

pub fn make_chain(a: &MakeChainArgs, seed: u64) -> Result<Value> {
    let (p, pi): (TransitionMatrix, Option<ProbabilityVector>) = match a.kind {
        ChainKind::Hypercube => {
            let dim = u32::try_from(a.n)
                .map_err(|_| MdkError::Capacity(format!("dimension {} is too large", a.n)))?;
            let (p, pi) = hypercube_walk(dim)?;
            (p, Some(pi))
        }
        ChainKind::DoubleWell => {
            let (p, pi) = double_well(a.beta)?;
            (p, Some(pi))
        }
        ChainKind::Metropolis => {
            let path = a.proposal.as_ref().ok_or_else(|| {
                MdkError::Domain("metropolis needs --proposal and --energy".into())
            })?;
            let q = load_chain(path)?;
            let mu = match q.pi {
                Some(mu) => mu,
                None => ProbabilityVector::uniform(q.matrix.space().clone()),
            };
            let (p, pi) = metropolis_chain(&q.matrix, &mu, &a.energy, a.beta)?;
            (p, Some(pi))
        }
        ChainKind::Random => {
            let space = states(a.n)?;
            let p = random_chain(&mut stream(seed, 0), space.len());
            (p, None)
        }
        ChainKind::RandomReversible => {
            let space = states(a.n)?;
            let mut rng = stream(seed, 0);
            let pi = random_pi(&mut rng, &space);
            let p = random_reversible(&mut rng, &pi, a.sparsity);
            (p, Some(pi))
        }
    };
    Ok(json!({ "chain": chain_value(&p, pi.as_ref()) }))
}
