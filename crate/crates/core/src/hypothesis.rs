//! Binary hypothesis testing between two chains observed through i.i.d. edge pairs (X, Y) with
//! X ~ pi and Y | X ~ P(X, .).

use serde::Serialize;

use crate::chain::{same_space, ProbabilityVector, TransitionMatrix, ENTRY_FLOOR};
use crate::divergence::{extended, renyi_div, AlphaOrder};
use crate::error::{MdkError, Result};
use crate::par;
use crate::rng::{self, Cumulative};

/// Pairs drawn per random stream; stream k of a seed produces draws [k*CHUNK, (k+1)*CHUNK).
pub const SAMPLE_CHUNK: usize = 1 << 14;
/// Trials per random stream in the Bayes-error simulation.
pub const TRIAL_BLOCK: usize = 1 << 12;
/// Largest n * ln(states^2) the exact enumeration accepts.
pub const ENUMERATION_BUDGET: f64 = 18.0;

#[derive(Clone, Debug, Serialize)]
pub struct EdgeSampleBatch {
    pub pairs: Vec<(usize, usize)>,
    pub n: usize,
    pub seed: u64,
    pub chain: TransitionMatrix,
    pub pi: ProbabilityVector,
}

struct EdgeSampler {
    start: Cumulative,
    rows: Vec<Cumulative>,
}

impl EdgeSampler {
    fn new(p: &TransitionMatrix, pi: &ProbabilityVector) -> Self {
        Self {
            start: Cumulative::new(pi.weights()),
            rows: (0..p.n()).map(|x| Cumulative::new(p.row(x))).collect(),
        }
    }

    fn draw(&self, rng: &mut rng::Stream) -> (usize, usize) {
        let x = self.start.sample(rng);
        (x, self.rows[x].sample(rng))
    }
}

pub fn sample_edges(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    n: usize,
    seed: u64,
) -> Result<EdgeSampleBatch> {
    same_space(p.space(), pi.space(), "sampling")?;
    pi.require_strictly_positive()?;
    if n == 0 {
        return Err(MdkError::Domain("sample size must be positive".into()));
    }
    let sampler = EdgeSampler::new(p, pi);
    let chunks = n.div_ceil(SAMPLE_CHUNK);
    let pairs = par::map_indices(chunks, |k| {
        let mut rng = rng::stream(seed, k as u64);
        let len = SAMPLE_CHUNK.min(n - k * SAMPLE_CHUNK);
        (0..len).map(|_| sampler.draw(&mut rng)).collect::<Vec<_>>()
    })
    .concat();
    Ok(EdgeSampleBatch {
        pairs,
        n,
        seed,
        chain: p.clone(),
        pi: pi.clone(),
    })
}

/// ln(P0(x,y) / P1(x,y)) for every pair; infinite where exactly one side vanishes.
fn log_ratio_table(p0: &TransitionMatrix, p1: &TransitionMatrix) -> Vec<f64> {
    p0.as_slice()
        .iter()
        .zip(p1.as_slice())
        .map(|(&a, &b)| match (a > 0.0, b > 0.0) {
            (true, true) => a.ln() - b.ln(),
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (false, false) => f64::NAN,
        })
        .collect()
}

fn check_pair(p0: &TransitionMatrix, p1: &TransitionMatrix, pi: &ProbabilityVector) -> Result<()> {
    same_space(p0.space(), p1.space(), "hypotheses")?;
    same_space(p0.space(), pi.space(), "hypotheses")?;
    pi.require_strictly_positive()
}

fn per_pair_terms(
    batch: &EdgeSampleBatch,
    p0: &TransitionMatrix,
    p1: &TransitionMatrix,
) -> Result<Vec<f64>> {
    let n = p0.n();
    let table = log_ratio_table(p0, p1);
    batch
        .pairs
        .iter()
        .map(|&(x, y)| {
            let v = table[x * n + y];
            if v.is_nan() {
                Err(MdkError::Domain(format!(
                    "pair ({x}, {y}) has probability zero under both hypotheses"
                )))
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Normalized log-likelihood ratio (1/n) sum ln(Q0(z_i) / Q1(z_i)); pi cancels.
pub fn llr(
    batch: &EdgeSampleBatch,
    p0: &TransitionMatrix,
    p1: &TransitionMatrix,
    pi: &ProbabilityVector,
) -> Result<f64> {
    check_pair(p0, p1, pi)?;
    same_space(batch.pi.space(), pi.space(), "batch")?;
    let terms = per_pair_terms(batch, p0, p1)?;
    let sum: f64 = terms.iter().sum();
    if sum.is_nan() {
        return Err(MdkError::Domain(
            "batch contains pairs impossible under each hypothesis in turn".into(),
        ));
    }
    Ok(sum / batch.n as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct AepRecord {
    pub n: usize,
    pub seed: u64,
    #[serde(serialize_with = "extended::serialize")]
    pub llr: f64,
    pub kl: f64,
    pub sigma_hat: f64,
    /// |llr - kl| / (sigma_hat / sqrt(n)).
    #[serde(serialize_with = "extended::serialize")]
    pub z: f64,
    pub within_three_sigma: bool,
}

/// Samples n pairs under P0 and compares the normalized LLR with KL(P0 || P1).
pub fn aep_check(
    p0: &TransitionMatrix,
    p1: &TransitionMatrix,
    pi: &ProbabilityVector,
    n: usize,
    seed: u64,
) -> Result<AepRecord> {
    check_pair(p0, p1, pi)?;
    let batch = sample_edges(p0, pi, n, seed)?;
    let terms = per_pair_terms(&batch, p0, p1)?;
    let kl = renyi_div(p0, p1, pi, AlphaOrder::One)?.value();
    let mean = terms.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let sigma_hat = var.sqrt();
    let se = sigma_hat / (n as f64).sqrt();
    let dev = (mean - kl).abs();
    let z = if se > 0.0 {
        dev / se
    } else if dev == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(AepRecord {
        n,
        seed,
        llr: mean,
        kl,
        sigma_hat,
        z,
        within_three_sigma: z <= 3.0 || mean == kl,
    })
}

/// g(alpha) = -ln sum pi P0^alpha P1^(1-alpha), with the limit forms at alpha = 0 and 1.
pub struct ChernoffFunction {
    pi: Vec<f64>,
    p0: Vec<f64>,
    p1: Vec<f64>,
    n: usize,
}

impl ChernoffFunction {
    pub fn new(
        p0: &TransitionMatrix,
        p1: &TransitionMatrix,
        pi: &ProbabilityVector,
    ) -> Result<Self> {
        check_pair(p0, p1, pi)?;
        Ok(Self {
            pi: pi.weights().to_vec(),
            p0: p0.as_slice().to_vec(),
            p1: p1.as_slice().to_vec(),
            n: p0.n(),
        })
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for (k, (&a, &b)) in self.p0.iter().zip(&self.p1).enumerate() {
            let w = self.pi[k / n];
            s += if alpha <= 0.0 {
                if a > ENTRY_FLOOR {
                    w * b
                } else {
                    0.0
                }
            } else if alpha >= 1.0 {
                if b > ENTRY_FLOOR {
                    w * a
                } else {
                    0.0
                }
            } else if a > ENTRY_FLOOR && b > ENTRY_FLOOR {
                w * (alpha * a.ln() + (1.0 - alpha) * b.ln()).exp()
            } else {
                0.0
            };
        }
        if s <= 0.0 {
            f64::INFINITY
        } else {
            -s.ln()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChernoffResult {
    #[serde(serialize_with = "extended::serialize")]
    pub value: f64,
    pub alpha_star: f64,
    pub evaluations: usize,
    /// Supports of P0 and P1 do not overlap on any pi-weighted row.
    pub infinite: bool,
}

/// Chernoff information max over alpha in [0, 1] of g(alpha), by golden-section search.
pub fn chernoff_information(
    p0: &TransitionMatrix,
    p1: &TransitionMatrix,
    pi: &ProbabilityVector,
    tol: f64,
) -> Result<ChernoffResult> {
    if !(tol > 0.0) {
        return Err(MdkError::Domain(format!("tol = {tol} must be positive")));
    }
    let g = ChernoffFunction::new(p0, p1, pi)?;
    let mid = g.eval(0.5);
    if mid.is_infinite() {
        return Ok(ChernoffResult {
            value: f64::INFINITY,
            alpha_star: 0.5,
            evaluations: 1,
            infinite: true,
        });
    }
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (g.eval(x1), g.eval(x2));
    let mut evaluations = 3;
    while hi - lo >= tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = g.eval(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = g.eval(x1);
        }
        evaluations += 1;
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for (a, v) in [(0.5, mid), (0.0, g.eval(0.0)), (1.0, g.eval(1.0))] {
        if v > best.1 {
            best = (a, v);
        }
    }
    evaluations += 2;
    Ok(ChernoffResult {
        value: best.1.max(0.0),
        alpha_star: best.0,
        evaluations,
        infinite: false,
    })
}

/// `points` evenly spaced samples of g on [0, 1].
pub fn chernoff_curve(
    p0: &TransitionMatrix,
    p1: &TransitionMatrix,
    pi: &ProbabilityVector,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    if points < 2 {
        return Err(MdkError::Domain("a curve needs at least two points".into()));
    }
    let g = ChernoffFunction::new(p0, p1, pi)?;
    Ok((0..points)
        .map(|k| {
            let a = k as f64 / (points - 1) as f64;
            (a, g.eval(a))
        })
        .collect())
}

fn kl_row(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a <= 0.0 {
                0.0
            } else if b <= 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).ln()
            }
        })
        .sum()
}

fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-13 {
        if f1 > f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimizes a convex function of one row r = (1 - p, p) on a grid, then polishes by golden section.
fn row_search(resolution: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let step = 1.0 / resolution as f64;
    let (k, _) = (0..=resolution)
        .map(|k| (k, f(k as f64 * step)))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    let lo = (k as f64 - 1.0).max(0.0) * step;
    let hi = ((k + 1) as f64 * step).min(1.0);
    let polished = golden_min(lo, hi, &f);
    let grid = (k as f64 * step, f(k as f64 * step));
    if polished.1 <= grid.1 {
        polished
    } else {
        grid
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TradeoffRecord {
    pub alpha: f64,
    /// (1 - alpha) R_alpha(P0 || P1).
    pub lhs: f64,
    /// min over two-state chains P of alpha KL(P || P0) + (1 - alpha) KL(P || P1).
    pub rhs: f64,
    pub gap: f64,
    pub minimizer: TransitionMatrix,
}

fn require_two_states(p: &TransitionMatrix, what: &str) -> Result<()> {
    if p.n() != 2 {
        return Err(MdkError::Unsupported(format!(
            "{what} is implemented for two states only, got {}",
            p.n()
        )));
    }
    Ok(())
}

fn require_positive(p: &TransitionMatrix) -> Result<()> {
    if p.as_slice().iter().any(|&v| v <= 0.0) {
        return Err(MdkError::Domain(
            "both chains must be strictly positive".into(),
        ));
    }
    Ok(())
}

fn mixture_objective(
    pi: &[f64],
    p0: &TransitionMatrix,
    p1: &TransitionMatrix,
    alpha: f64,
    rows: [f64; 2],
) -> f64 {
    (0..2)
        .map(|x| {
            let r = if x == 0 {
                [1.0 - rows[0], rows[0]]
            } else {
                [rows[1], 1.0 - rows[1]]
            };
            pi[x] * (alpha * kl_row(&r, p0.row(x)) + (1.0 - alpha) * kl_row(&r, p1.row(x)))
        })
        .sum()
}

/// Brute-force check of the KL tradeoff identity at two states: grid plus polish over each row.
pub fn kl_tradeoff_check(
    p0: &TransitionMatrix,
    p1: &TransitionMatrix,
    pi: &ProbabilityVector,
    alpha: f64,
    grid_resolution: usize,
) -> Result<TradeoffRecord> {
    check_pair(p0, p1, pi)?;
    require_two_states(p0, "the tradeoff check")?;
    require_positive(p0)?;
    require_positive(p1)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(MdkError::Domain(format!(
            "alpha = {alpha} must lie in [0, 1]"
        )));
    }
    if grid_resolution < 2 {
        return Err(MdkError::Domain(
            "grid resolution must be at least 2".into(),
        ));
    }
    let lhs = if alpha == 1.0 {
        0.0
    } else {
        let order = if alpha == 0.0 {
            AlphaOrder::Zero
        } else {
            AlphaOrder::Numeric(alpha)
        };
        (1.0 - alpha) * renyi_div(p0, p1, pi, order)?.value()
    };
    let w = pi.weights();
    // the objective is a pi-weighted sum of per-row terms, so rows are minimized separately;
    // row 0 is parameterized by P(0,1) and row 1 by P(1,0)
    let mut rows = [0.0; 2];
    let mut rhs = 0.0;
    for x in 0..2 {
        let term = |p: f64| {
            let r = if x == 0 { [1.0 - p, p] } else { [p, 1.0 - p] };
            alpha * kl_row(&r, p0.row(x)) + (1.0 - alpha) * kl_row(&r, p1.row(x))
        };
        let (p, v) = row_search(grid_resolution, term);
        rows[x] = p;
        rhs += w[x] * v;
    }
    debug_assert!((mixture_objective(w, p0, p1, alpha, rows) - rhs).abs() < 1e-12);
    let minimizer = TransitionMatrix::new(
        p0.space().clone(),
        vec![vec![1.0 - rows[0], rows[0]], vec![rows[1], 1.0 - rows[1]]],
    )?;
    Ok(TradeoffRecord {
        alpha,
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        minimizer,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SaddleRecord {
    /// sup over alpha of inf over P.
    pub sup_inf: f64,
    /// inf over P of sup over alpha, i.e. of max(KL(P || P0), KL(P || P1)).
    pub inf_sup: f64,
    pub gap: f64,
    pub alpha_star: f64,
}

/// Saddle check for the tradeoff objective at two states, both sides by brute force.
pub fn kl_saddle_check(
    p0: &TransitionMatrix,
    p1: &TransitionMatrix,
    pi: &ProbabilityVector,
    grid_resolution: usize,
) -> Result<SaddleRecord> {
    check_pair(p0, p1, pi)?;
    require_two_states(p0, "the saddle check")?;
    require_positive(p0)?;
    require_positive(p1)?;
    let inner = |a: f64| {
        kl_tradeoff_check(p0, p1, pi, a, grid_resolution)
            .map(|r| r.rhs)
            .unwrap_or(f64::NAN)
    };
    let (alpha_star, neg) = golden_min(0.0, 1.0, |a| -inner(a));
    let mut sup_inf = -neg;
    for a in [0.0, 1.0] {
        sup_inf = sup_inf.max(inner(a));
    }

    let w = pi.weights();
    let worst = |p: f64, q: f64| {
        let a = mixture_objective(w, p0, p1, 1.0, [p, q]);
        let b = mixture_objective(w, p0, p1, 0.0, [p, q]);
        a.max(b)
    };
    // the max of two convex functions is convex, so a zooming grid converges to its minimum
    let (mut lo, mut hi) = ([0.0, 0.0], [1.0, 1.0]);
    let cells = 200;
    let mut best = (0.5, 0.5, f64::INFINITY);
    for _ in 0..40 {
        let h = [
            (hi[0] - lo[0]) / cells as f64,
            (hi[1] - lo[1]) / cells as f64,
        ];
        for i in 0..=cells {
            for j in 0..=cells {
                let (p, q) = (lo[0] + i as f64 * h[0], lo[1] + j as f64 * h[1]);
                let v = worst(p, q);
                if v < best.2 {
                    best = (p, q, v);
                }
            }
        }
        lo = [
            (best.0 - 4.0 * h[0]).max(0.0),
            (best.1 - 4.0 * h[1]).max(0.0),
        ];
        hi = [
            (best.0 + 4.0 * h[0]).min(1.0),
            (best.1 + 4.0 * h[1]).min(1.0),
        ];
        if h[0].max(h[1]) < 1e-14 {
            break;
        }
    }
    let inf_sup = best.2;
    Ok(SaddleRecord {
        sup_inf,
        inf_sup,
        gap: (sup_inf - inf_sup).abs(),
        alpha_star,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Prior {
    pub h0: f64,
    pub h1: f64,
}

impl Prior {
    pub fn new(h0: f64, h1: f64) -> Result<Self> {
        let ok = |p: f64| p > 0.0 && p < 1.0;
        if !ok(h0) || !ok(h1) || (h0 + h1 - 1.0).abs() > 1e-12 {
            return Err(MdkError::Domain(format!(
                "priors ({h0}, {h1}) must lie in (0, 1) and sum to 1"
            )));
        }
        Ok(Self { h0, h1 })
    }

    /// The Bayes rule rejects H0 when Q1/Q0 exceeds this threshold.
    pub fn threshold(&self) -> f64 {
        self.h0 / self.h1
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorEstimate {
    pub n: usize,
    pub trials: usize,
    /// Trials under H0 decided as H1.
    pub errors_h0: u64,
    /// Trials under H1 decided as H0.
    pub errors_h1: u64,
    /// Trials decided by a pair impossible under one hypothesis.
    pub support_decisions: u64,
    pub error: f64,
    pub stderr: f64,
    pub dropped: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentFit {
    pub estimates: Vec<ErrorEstimate>,
    /// Least-squares slope of -ln(error) against n over the kept sample sizes.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub intercept: Option<f64>,
    pub dropped_n: Vec<usize>,
    #[serde(serialize_with = "extended::serialize")]
    pub chernoff: f64,
    pub seed: u64,
}

struct Decider {
    table: Vec<f64>,
    threshold: f64,
    scale: f64,
}

impl Decider {
    fn new(p0: &TransitionMatrix, p1: &TransitionMatrix, prior: Prior) -> Self {
        let table = log_ratio_table(p0, p1);
        let scale = table
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        // decide H1 iff sum ln(Q0/Q1) < ln(prior1/prior0)
        Self {
            table,
            threshold: -prior.threshold().ln(),
            scale,
        }
    }

    /// (decided H1, decided by a support violation)
    fn decide(&self, pairs: impl Iterator<Item = usize>, n: usize) -> (bool, bool) {
        let mut sum = 0.0;
        for k in pairs {
            let v = self.table[k];
            if v.is_infinite() {
                return (v < 0.0, true);
            }
            sum += v;
        }
        // ties within accumulated rounding go to H0
        let tie = 1e-9 * n as f64 * self.scale.max(1e-300);
        (sum < self.threshold - tie, false)
    }
}

fn simulate(
    sampler: &EdgeSampler,
    decider: &Decider,
    states: usize,
    n: usize,
    trials: usize,
    seed: u64,
    stream_base: u64,
) -> (u64, u64, u64) {
    let blocks = trials.div_ceil(TRIAL_BLOCK);
    let counts = par::map_indices(blocks, |b| {
        let mut rng = rng::stream(seed, stream_base + b as u64);
        let len = TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
        let mut out = (0u64, 0u64);
        let mut buf = vec![0usize; n];
        for _ in 0..len {
            for slot in buf.iter_mut() {
                let (x, y) = sampler.draw(&mut rng);
                *slot = x * states + y;
            }
            let (h1, forced) = decider.decide(buf.iter().copied(), n);
            out.0 += h1 as u64;
            out.1 += forced as u64;
        }
        out
    });
    let decided_h1 = counts.iter().map(|c| c.0).sum();
    let forced = counts.iter().map(|c| c.1).sum();
    (decided_h1, trials as u64 - decided_h1, forced)
}

/// Monte-Carlo error of the Bayes likelihood-ratio test for each n, and the fitted exponent.
pub fn bayes_error_mc(
    p0: &TransitionMatrix,
    p1: &TransitionMatrix,
    pi: &ProbabilityVector,
    prior: Prior,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ExponentFit> {
    check_pair(p0, p1, pi)?;
    if trials == 0 || n_grid.is_empty() || n_grid.contains(&0) {
        return Err(MdkError::Domain(
            "trials and every n must be positive, and the n grid nonempty".into(),
        ));
    }
    let states = p0.n();
    let decider = Decider::new(p0, p1, prior);
    let s0 = EdgeSampler::new(p0, pi);
    let s1 = EdgeSampler::new(p1, pi);
    let stride = trials.div_ceil(TRIAL_BLOCK) as u64;
    let mut estimates = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let base = 2 * i as u64 * stride;
        let (h1_under_0, _, forced0) = simulate(&s0, &decider, states, n, trials, seed, base);
        let (_, h0_under_1, forced1) =
            simulate(&s1, &decider, states, n, trials, seed, base + stride);
        let t = trials as f64;
        let (e0, e1) = (h1_under_0 as f64 / t, h0_under_1 as f64 / t);
        let error = prior.h0 * e0 + prior.h1 * e1;
        let var =
            prior.h0 * prior.h0 * e0 * (1.0 - e0) / t + prior.h1 * prior.h1 * e1 * (1.0 - e1) / t;
        estimates.push(ErrorEstimate {
            n,
            trials,
            errors_h0: h1_under_0,
            errors_h1: h0_under_1,
            support_decisions: forced0 + forced1,
            error,
            stderr: var.sqrt(),
            dropped: error == 0.0,
        });
    }
    let kept: Vec<(f64, f64)> = estimates
        .iter()
        .filter(|e| !e.dropped)
        .map(|e| (e.n as f64, -e.error.ln()))
        .collect();
    let (slope, slope_stderr, intercept) = least_squares(&kept);
    let chernoff = chernoff_information(p0, p1, pi, 1e-10)?.value;
    Ok(ExponentFit {
        dropped_n: estimates
            .iter()
            .filter(|e| e.dropped)
            .map(|e| e.n)
            .collect(),
        estimates,
        slope,
        slope_stderr,
        intercept,
        chernoff,
        seed,
    })
}

fn least_squares(points: &[(f64, f64)]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let m = points.len();
    if m < 2 {
        return (None, None, None);
    }
    let mf = m as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return (None, None, None);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = (m > 2).then(|| {
        let rss: f64 = points
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (rss / (mf - 2.0) / sxx).sqrt()
    });
    (Some(slope), stderr, Some(intercept))
}

/// Exact Bayes error sum over sequences of min(prior0 Q0^n, prior1 Q1^n) by enumeration.
pub fn bayes_error_exact(
    p0: &TransitionMatrix,
    p1: &TransitionMatrix,
    pi: &ProbabilityVector,
    prior: Prior,
    n: usize,
) -> Result<f64> {
    check_pair(p0, p1, pi)?;
    let cells = p0.n() * p0.n();
    if n == 0 || n as f64 * (cells as f64).ln() > ENUMERATION_BUDGET {
        return Err(MdkError::Capacity(format!(
            "enumeration of {cells}^{n} outcomes exceeds the budget e^{ENUMERATION_BUDGET}"
        )));
    }
    let w = pi.weights();
    let states = p0.n();
    let q: Vec<(f64, f64)> = (0..cells)
        .map(|k| {
            (
                w[k / states] * p0.as_slice()[k],
                w[k / states] * p1.as_slice()[k],
            )
        })
        .filter(|&(a, b)| a > 0.0 || b > 0.0)
        .collect();
    fn walk(q: &[(f64, f64)], depth: usize, a: f64, b: f64) -> f64 {
        if depth == 0 {
            return a.min(b);
        }
        q.iter()
            .map(|&(x, y)| walk(q, depth - 1, a * x, b * y))
            .sum()
    }
    Ok(walk(&q, n, prior.h0, prior.h1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (TransitionMatrix, TransitionMatrix, ProbabilityVector) {
        let p0 = TransitionMatrix::from_rows(vec![vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        let p1 = TransitionMatrix::from_rows(vec![vec![0.25, 0.75], vec![0.75, 0.25]]).unwrap();
        let pi = ProbabilityVector::uniform(p0.space().clone());
        (p0, p1, pi)
    }

    #[test]
    fn symmetric_pair_chernoff() {
        let (p0, p1, pi) = pair();
        let c = chernoff_information(&p0, &p1, &pi, 1e-10).unwrap();
        let expected = -(2.0 * (0.75f64 * 0.25).sqrt()).ln();
        assert!((c.value - expected).abs() < 1e-9);
        assert!((c.alpha_star - 0.5).abs() < 1e-6);
        assert!((expected - 0.1438410362).abs() < 1e-10);
    }

    #[test]
    fn identical_chains_have_zero_information() {
        let (p0, _, pi) = pair();
        let c = chernoff_information(&p0, &p0, &pi, 1e-10).unwrap();
        assert!(c.value.abs() < 1e-15);
        let b = sample_edges(&p0, &pi, 100, 1).unwrap();
        assert_eq!(llr(&b, &p0, &p0, &pi).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_llr() {
        let (p0, p1, pi) = pair();
        let b = sample_edges(&p0, &pi, 1, 9).unwrap();
        let (x, y) = b.pairs[0];
        let v = llr(&b, &p0, &p1, &pi).unwrap();
        assert!((v - (p0.get(x, y) / p1.get(x, y)).ln()).abs() < 1e-15);
    }

    #[test]
    fn disjoint_supports_are_infinite() {
        let p0 = TransitionMatrix::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let p1 = TransitionMatrix::from_rows(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let pi = ProbabilityVector::uniform(p0.space().clone());
        let c = chernoff_information(&p0, &p1, &pi, 1e-8).unwrap();
        assert!(c.infinite && c.value.is_infinite());
    }

    #[test]
    fn tradeoff_symmetric_pair() {
        let (p0, p1, pi) = pair();
        let r = kl_tradeoff_check(&p0, &p1, &pi, 0.5, 1000).unwrap();
        assert!(r.gap < 1e-5, "{r:?}");
        let r = kl_tradeoff_check(&p0, &p1, &pi, 1.0, 1000).unwrap();
        assert!(r.lhs == 0.0 && r.rhs.abs() < 1e-12);
        let three = TransitionMatrix::identity(crate::chain::StateSpace::indexed(3).unwrap());
        let pi3 = ProbabilityVector::uniform(three.space().clone());
        assert!(matches!(
            kl_tradeoff_check(&three, &three, &pi3, 0.5, 10),
            Err(MdkError::Unsupported(_))
        ));
    }

    #[test]
    fn exact_error_at_one_sample() {
        let (p0, p1, pi) = pair();
        let prior = Prior::new(0.5, 0.5).unwrap();
        // each pair has Q0 and Q1 in {3/8, 1/8}; the smaller side always loses
        let exact = bayes_error_exact(&p0, &p1, &pi, prior, 1).unwrap();
        assert!((exact - 0.25).abs() < 1e-15);
    }

    #[test]
    fn identical_hypotheses_err_at_prior() {
        let (p0, _, pi) = pair();
        let prior = Prior::new(0.3, 0.7).unwrap();
        let fit = bayes_error_mc(&p0, &p0, &pi, prior, &[1, 2, 4], 2000, 5).unwrap();
        for e in &fit.estimates {
            assert!((e.error - 0.3).abs() < 1e-12, "{e:?}");
        }
        assert!(fit.slope.unwrap().abs() < 1e-12);
    }
}
