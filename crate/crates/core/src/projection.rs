//! Alpha-projection of a chain onto the pi-reversible chains.
//!
//! Works on symmetric edge measures s with row sums pi: minimizes D_alpha(s || pi*L), which has the
//! same minimizer as R_alpha. The objective is separable, so each step projects a Newton point in the
//! metric of its diagonal Hessian, then backtracks along the segment toward it.

use serde::Serialize;

use crate::chain::{edge_measure, same_space, ProbabilityVector, TransitionMatrix, ENTRY_FLOOR};
use crate::dense;
use crate::divergence::{
    check_alpha, extended, f_div_slices, renyi_div, AlphaOrder, DivergenceValue, Generator,
};
use crate::error::{MdkError, Result};
use crate::par;
use crate::rng;

pub const FEASIBILITY_TOL: f64 = 1e-11;
const NEWTON_MAX: usize = 200;
const KKT_TOL: f64 = 1e-6;
const KKT_STOP: f64 = 1e-9;
const INTERIOR_BLEND: f64 = 1e-3;
const CURVATURE_MIN: f64 = 1e-8;
const CURVATURE_MAX: f64 = 1e16;

#[derive(Clone, Debug)]
pub struct ProjectOptions {
    /// Stop when the relative objective decrease falls below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Random reversible chains used to probe the Pythagorean inequality.
    pub probes: usize,
    pub probe_seed: u64,
    /// Start from a random feasible point instead of the symmetrized input.
    pub init_seed: Option<u64>,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        Self {
            tol: 1e-15,
            max_iters: 20_000,
            probes: 8,
            probe_seed: 0,
            init_seed: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionResult {
    pub m_star: TransitionMatrix,
    /// R_alpha(M* || L).
    pub objective: DivergenceValue,
    /// R_alpha(M0 || L) at the starting point.
    pub initial_objective: DivergenceValue,
    pub kkt_residual: f64,
    pub feasibility_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Worst of R(M||L) - R(M||M*) - R(M*||L) over the probes.
    #[serde(serialize_with = "extended::option")]
    pub pythagorean_margin: Option<f64>,
    /// D_alpha(s || pi*L) after each accepted step, starting with the initial point.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

/// The symmetric edge-measure polytope with marginal pi, restricted to an allowed symmetric support.
pub(crate) struct Polytope {
    n: usize,
    pi: Vec<f64>,
    mask: Vec<bool>,
}

impl Polytope {
    pub(crate) fn new(pi: &[f64], mask: Vec<bool>) -> Result<Self> {
        let n = pi.len();
        let allowed: Vec<usize> = mask
            .chunks(n)
            .map(|r| r.iter().filter(|&&b| b).count())
            .collect();
        if let Some(x) = allowed.iter().position(|&c| c == 0) {
            return Err(MdkError::Infeasible(format!(
                "state {x} has no admissible transition"
            )));
        }
        Ok(Self {
            n,
            pi: pi.to_vec(),
            mask,
        })
    }

    pub(crate) fn full(pi: &[f64]) -> Self {
        let n = pi.len();
        Self {
            n,
            pi: pi.to_vec(),
            mask: vec![true; n * n],
        }
    }

    pub(crate) fn residual(&self, s: &[f64]) -> f64 {
        let n = self.n;
        let mut r = 0.0_f64;
        for x in 0..n {
            let row: f64 = s[x * n..(x + 1) * n].iter().sum();
            r = r.max((row - self.pi[x]).abs());
            for y in 0..n {
                r = r.max((s[x * n + y] - s[y * n + x]).abs());
                r = r.max(-s[x * n + y]);
                if !self.mask[x * n + y] {
                    r = r.max(s[x * n + y].abs());
                }
            }
        }
        r
    }

    fn symmetrize(&self, v: &mut [f64]) {
        let n = self.n;
        for x in 0..n {
            for y in x + 1..n {
                let m = 0.5 * (v[x * n + y] + v[y * n + x]);
                v[x * n + y] = m;
                v[y * n + x] = m;
            }
        }
    }

    #[cfg(test)]
    fn fix_rows(&self, v: &mut [f64]) {
        let n = self.n;
        for x in 0..n {
            let row = &mut v[x * n..(x + 1) * n];
            let allowed = self.mask[x * n..(x + 1) * n].iter().filter(|&&b| b).count();
            let c = (self.pi[x] - row.iter().sum::<f64>()) / allowed as f64;
            for (y, e) in row.iter_mut().enumerate() {
                if self.mask[x * n + y] {
                    *e += c;
                }
            }
        }
    }

    #[cfg(test)]
    fn clip(&self, v: &mut [f64]) {
        for (e, &ok) in v.iter_mut().zip(&self.mask) {
            *e = if ok { e.max(0.0) } else { 0.0 };
        }
    }

    fn masked_sym(&self, v: &[f64]) -> Vec<f64> {
        let mut w: Vec<f64> = v
            .iter()
            .zip(&self.mask)
            .map(|(&e, &ok)| if ok { e } else { 0.0 })
            .collect();
        self.symmetrize(&mut w);
        w
    }

    fn primal(&self, w: &[f64], d: &[f64], lambda: &[f64], s: &mut [f64]) {
        let n = self.n;
        for x in 0..n {
            for y in 0..n {
                let k = x * n + y;
                s[k] = if self.mask[k] {
                    (w[k] - 0.5 * (lambda[x] + lambda[y]) / d[k]).max(0.0)
                } else {
                    0.0
                };
            }
        }
    }

    fn dual(&self, w: &[f64], d: &[f64], lambda: &[f64]) -> f64 {
        let n = self.n;
        let mut g = -lambda.iter().zip(&self.pi).map(|(l, p)| l * p).sum::<f64>();
        for x in 0..n {
            for y in 0..n {
                let k = x * n + y;
                if self.mask[k] {
                    let c = 0.5 * (lambda[x] + lambda[y]);
                    g += if w[k] * d[k] > c {
                        w[k] * c - 0.5 * c * c / d[k]
                    } else {
                        0.5 * d[k] * w[k] * w[k]
                    };
                }
            }
        }
        g
    }

    /// Euclidean projection; returns the point and its feasibility residual.
    pub(crate) fn project(&self, v: &[f64]) -> (Vec<f64>, f64) {
        self.project_weighted(v, &vec![1.0; v.len()])
    }

    /// Projection in the norm sum d(x,y) (s(x,y) - v(x,y))^2 for symmetric positive weights d.
    ///
    /// The minimizer is s = max(0, sym(v) - (l_x + l_y) / 2d) on the mask for multipliers l of the
    /// row-sum constraints; l maximizes a concave piecewise-quadratic dual, found by damped Newton.
    pub(crate) fn project_weighted(&self, v: &[f64], d: &[f64]) -> (Vec<f64>, f64) {
        let n = self.n;
        let w = self.masked_sym(v);
        // start from multipliers that would fix each row if every entry stayed active
        let mut lambda: Vec<f64> = (0..n)
            .map(|x| {
                let (mut excess, mut inv) = (-self.pi[x], 0.0);
                for y in 0..n {
                    if self.mask[x * n + y] {
                        excess += w[x * n + y];
                        inv += 1.0 / d[x * n + y];
                    }
                }
                excess / inv
            })
            .collect();
        let mut s = vec![0.0; n * n];
        let mut trial = vec![0.0; n];
        for _ in 0..NEWTON_MAX {
            self.primal(&w, d, &lambda, &mut s);
            let phi: Vec<f64> = (0..n)
                .map(|x| s[x * n..(x + 1) * n].iter().sum::<f64>() - self.pi[x])
                .collect();
            let err = phi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if err < 1e-15 {
                break;
            }
            // minus the generalized Hessian of the dual, lightly regularized
            let mut h = vec![0.0; n * n];
            let mut scale = 0.0_f64;
            for x in 0..n {
                // a row with nothing active gets the curvature it would have if all were active
                let idle = (0..n).all(|y| s[x * n + y] <= 0.0);
                for y in 0..n {
                    let k = x * n + y;
                    if s[k] > 0.0 || (idle && self.mask[k]) {
                        if x == y {
                            h[x * n + x] += 1.0 / d[k];
                        } else {
                            h[x * n + x] += 0.5 / d[k];
                            if !idle {
                                h[x * n + y] += 0.5 / d[k];
                            }
                        }
                    }
                }
                scale = scale.max(h[x * n + x]);
            }
            for x in 0..n {
                h[x * n + x] += 1e-12 * scale.max(1e-300);
            }
            let Some(step) = dense::solve(h, phi.clone(), n) else {
                break;
            };
            let slope: f64 = phi.iter().zip(&step).map(|(a, b)| a * b).sum();
            let g0 = self.dual(&w, d, &lambda);
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-20 {
                trial
                    .iter_mut()
                    .zip(&lambda)
                    .zip(&step)
                    .for_each(|((tr, l), di)| *tr = l + t * di);
                if self.dual(&w, d, &trial) >= g0 + 1e-4 * t * slope {
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
            lambda.copy_from_slice(&trial);
        }
        self.primal(&w, d, &lambda, &mut s);
        let residual = self.residual(&s);
        (s, residual)
    }

    /// Dykstra's alternating projections onto the symmetric subspace, the row-sum set and the
    /// orthant. Slow, kept as an independent check of `project`.
    #[cfg(test)]
    pub(crate) fn project_dykstra(&self, v: &[f64], sweeps: usize) -> (Vec<f64>, f64) {
        let len = v.len();
        let mut x: Vec<f64> = v
            .iter()
            .zip(&self.mask)
            .map(|(&e, &ok)| if ok { e } else { 0.0 })
            .collect();
        let mut inc = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        let mut y = vec![0.0; len];
        for _ in 0..sweeps {
            for (k, p) in inc.iter_mut().enumerate() {
                y.iter_mut()
                    .zip(&x)
                    .zip(p.iter())
                    .for_each(|((yi, xi), pi)| *yi = xi + pi);
                x.copy_from_slice(&y);
                match k {
                    0 => self.symmetrize(&mut x),
                    1 => self.fix_rows(&mut x),
                    _ => self.clip(&mut x),
                }
                p.iter_mut()
                    .zip(&y)
                    .zip(&x)
                    .for_each(|((pi, yi), xi)| *pi = yi - xi);
            }
        }
        let r = self.residual(&x);
        (x, r)
    }
}

struct Problem {
    alpha: f64,
    target: Vec<f64>,
    poly: Polytope,
    /// Entries whose gradient is unbounded at zero, so the minimizer keeps them positive.
    pinned: Vec<bool>,
}

impl Problem {
    fn objective(&self, s: &[f64]) -> f64 {
        f_div_slices(s, &self.target, &Generator::Alpha(self.alpha))
    }

    /// objective(c) - objective(s), summed term by term to keep small decreases resolvable.
    fn change(&self, s: &[f64], c: &[f64]) -> f64 {
        let a = self.alpha;
        let mut d = 0.0;
        for ((&si, &ci), &ti) in s.iter().zip(c).zip(&self.target) {
            if ti <= ENTRY_FLOOR || si == ci {
                continue;
            }
            let diff = if si > 0.0 {
                si.powf(a) * (a * ((ci - si) / si).ln_1p()).exp_m1()
            } else {
                ci.powf(a)
            };
            d += ti.powf(1.0 - a) * diff;
        }
        d / (a - 1.0)
    }

    fn gradient(&self, s: &[f64]) -> Vec<f64> {
        let a = self.alpha;
        s.iter()
            .zip(&self.target)
            .zip(&self.poly.mask)
            .map(|((&si, &ti), &ok)| {
                if !ok || ti <= ENTRY_FLOOR {
                    0.0
                } else {
                    let g = a / (a - 1.0) * (si.max(1e-300) / ti).powf(a - 1.0);
                    g.clamp(-1e300, 1e300)
                }
            })
            .collect()
    }

    /// Diagonal of the Hessian, symmetrized and clamped so it can weight a projection.
    fn curvature(&self, s: &[f64]) -> Vec<f64> {
        let a = self.alpha;
        let n = self.poly.n;
        let h: Vec<f64> = s
            .iter()
            .zip(&self.target)
            .map(|(&si, &ti)| {
                if ti <= ENTRY_FLOOR {
                    0.0
                } else {
                    a * ti.powf(1.0 - a) * si.max(1e-300).powf(a - 2.0)
                }
            })
            .collect();
        (0..n * n)
            .map(|k| (0.5 * (h[k] + h[(k % n) * n + k / n])).clamp(CURVATURE_MIN, CURVATURE_MAX))
            .collect()
    }

    fn kkt(&self, s: &[f64]) -> f64 {
        let g = self.gradient(s);
        let v: Vec<f64> = s.iter().zip(&g).map(|(a, b)| a - b).collect();
        let (p, _) = self.poly.project(&v);

        p.iter()
            .zip(s)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn support_mask(target: &[f64], n: usize, alpha: f64) -> Vec<bool> {
    let mut mask = vec![true; n * n];
    if alpha > 1.0 {
        for x in 0..n {
            for y in 0..n {
                mask[x * n + y] =
                    target[x * n + y] > ENTRY_FLOOR && target[y * n + x] > ENTRY_FLOOR;
            }
        }
    }
    mask
}

fn to_chain(s: &[f64], pi: &ProbabilityVector) -> TransitionMatrix {
    let n = pi.len();
    let mut data: Vec<f64> = s
        .chunks(n)
        .zip(pi.weights())
        .flat_map(|(row, &p)| row.iter().map(move |&v| (v / p).max(0.0)))
        .collect();
    for row in data.chunks_mut(n) {
        let t: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= t);
    }
    TransitionMatrix::from_flat_unchecked(pi.space().clone(), data)
}

/// A random point of the polytope: projection of a random symmetric positive matrix.
pub(crate) fn random_feasible(poly: &Polytope, seed: u64, index: u64) -> Vec<f64> {
    let n = poly.n;
    let mut rng = rng::stream(seed, index);
    let mut w = vec![0.0; n * n];
    for x in 0..n {
        for y in x..n {
            let v = rng::unit(&mut rng) / (n * n) as f64;
            w[x * n + y] = v;
            w[y * n + x] = v;
        }
    }
    // scale rows toward pi before projecting, so the projection stays interior
    for x in 0..n {
        let r: f64 = w[x * n..(x + 1) * n].iter().sum();
        for y in 0..n {
            w[x * n + y] *= poly.pi[x].min(poly.pi[y]) / r.max(1e-300);
        }
    }
    poly.project(&w).0
}

pub fn alpha_project(
    l: &TransitionMatrix,
    pi: &ProbabilityVector,
    alpha: f64,
    tol: f64,
    max_iters: usize,
) -> Result<ProjectionResult> {
    alpha_project_with(
        l,
        pi,
        alpha,
        &ProjectOptions {
            tol,
            max_iters,
            ..ProjectOptions::default()
        },
    )
}

pub fn alpha_project_with(
    l: &TransitionMatrix,
    pi: &ProbabilityVector,
    alpha: f64,
    opts: &ProjectOptions,
) -> Result<ProjectionResult> {
    same_space(l.space(), pi.space(), "projection")?;
    pi.require_strictly_positive()?;
    check_alpha(alpha)?;
    if !(opts.tol >= 0.0) {
        return Err(MdkError::Domain(format!(
            "tol = {} must be nonnegative",
            opts.tol
        )));
    }
    let n = l.n();
    let target = edge_measure(l, pi)?.as_slice().to_vec();
    let poly = Polytope::new(pi.weights(), support_mask(&target, n, alpha))?;
    let pinned = (0..n * n)
        .map(|k| {
            alpha < 1.0 && (target[k] > ENTRY_FLOOR || target[(k % n) * n + k / n] > ENTRY_FLOOR)
        })
        .collect();
    let problem = Problem {
        alpha,
        target,
        poly,
        pinned,
    };

    let mut start = match opts.init_seed {
        Some(seed) => random_feasible(&problem.poly, seed, 0),
        None => {
            let mut s0 = problem.target.clone();
            problem.poly.symmetrize(&mut s0);
            problem.poly.project(&s0).0
        }
    };
    // below alpha = 1 the gradient is unbounded at zero entries; pull toward pi x pi
    if alpha < 1.0 && start.iter().any(|&v| v <= 0.0) {
        let w = pi.weights();
        for (k, v) in start.iter_mut().enumerate() {
            *v = (1.0 - INTERIOR_BLEND) * *v + INTERIOR_BLEND * w[k / n] * w[k % n];
        }
    }
    let feas0 = problem.poly.residual(&start);
    if feas0 > 1e-9 {
        return Err(MdkError::Infeasible(format!(
            "no symmetric edge measure with marginal pi fits the support (residual {feas0:e})"
        )));
    }
    let mut s = start;
    let mut f = problem.objective(&s);
    if !f.is_finite() {
        return Err(MdkError::Infeasible(
            "objective is infinite at every feasible start".into(),
        ));
    }
    let initial_objective = renyi_div(&to_chain(&s, pi), l, pi, AlphaOrder::Numeric(alpha))?;
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut stopped = false;
    while iterations < opts.max_iters && f > 0.0 {
        iterations += 1;
        // projected Newton: the objective is separable, so its Hessian is the diagonal `d`
        let g = problem.gradient(&s);
        let d = problem.curvature(&s);
        let v: Vec<f64> = s
            .iter()
            .zip(&g)
            .zip(&d)
            .map(|((si, gi), di)| si - gi / di)
            .collect();
        let (target_point, _) = problem.poly.project_weighted(&v, &d);
        let dir: Vec<f64> = target_point.iter().zip(&s).map(|(a, b)| a - b).collect();
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        // near the optimum the slope is at rounding level and its sign is unreliable
        let slope = slope.min(0.0);
        if dir.iter().all(|v| v.abs() <= 1e-300) {
            stopped = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-20 {
            let cand: Vec<f64> = s
                .iter()
                .zip(&dir)
                .map(|(si, di)| (si + t * di).max(0.0))
                .collect();
            let interior = problem
                .pinned
                .iter()
                .zip(&cand)
                .all(|(&p, &c)| !p || c > 0.0);
            if interior {
                let delta = problem.change(&s, &cand);
                if delta.is_finite() && delta < 0.0 && delta <= 1e-4 * t * slope {
                    accepted = Some((cand, delta));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, delta)) = accepted else {
            stopped = true;
            break;
        };
        let decrease = -delta;
        s = cand;
        f = (f + delta).max(0.0);
        trace.push(f);
        if decrease <= opts.tol * f.abs().max(1e-300) && problem.kkt(&s) < KKT_STOP {
            stopped = true;
            break;
        }
    }
    let kkt_residual = if f > 0.0 { problem.kkt(&s) } else { 0.0 };
    let feasibility_residual = problem.poly.residual(&s);
    let converged = (stopped || f == 0.0) && kkt_residual < KKT_TOL;
    let m_star = to_chain(&s, pi);
    let objective = renyi_div(&m_star, l, pi, AlphaOrder::Numeric(alpha))?;
    let pythagorean_margin = if opts.probes > 0 {
        Some(pythagorean_margin(
            l,
            pi,
            &m_star,
            alpha,
            opts.probes,
            opts.probe_seed,
        )?)
    } else {
        None
    };
    Ok(ProjectionResult {
        m_star,
        objective,
        initial_objective,
        kkt_residual,
        feasibility_residual,
        iterations,
        converged,
        pythagorean_margin,
        objective_trace: trace,
    })
}

/// Random pi-reversible chains on the full support.
pub fn random_reversible_probes(
    pi: &ProbabilityVector,
    count: usize,
    seed: u64,
) -> Vec<TransitionMatrix> {
    let poly = Polytope::full(pi.weights());
    (0..count)
        .map(|k| to_chain(&random_feasible(&poly, seed, k as u64), pi))
        .collect()
}

/// Worst Pythagorean margin R(M||L) - R(M||M*) - R(M*||L) over random reversible probes M.
pub fn pythagorean_margin(
    l: &TransitionMatrix,
    pi: &ProbabilityVector,
    m_star: &TransitionMatrix,
    alpha: f64,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    let order = AlphaOrder::Numeric(alpha);
    let base = renyi_div(m_star, l, pi, order)?.value();
    let mut worst = f64::INFINITY;
    for m in random_reversible_probes(pi, probes, seed) {
        let lhs = renyi_div(&m, l, pi, order)?.value();
        if lhs.is_infinite() {
            continue;
        }
        let margin = lhs - renyi_div(&m, m_star, pi, order)?.value() - base;
        worst = worst.min(margin);
    }
    Ok(worst)
}

/// Independent runs from the symmetrized start and `starts - 1` random feasible starts.
pub fn alpha_project_multistart(
    l: &TransitionMatrix,
    pi: &ProbabilityVector,
    alpha: f64,
    opts: &ProjectOptions,
    starts: usize,
    seed: u64,
) -> Result<Vec<ProjectionResult>> {
    if starts == 0 {
        return Err(MdkError::Domain("starts must be positive".into()));
    }
    par::map_indices(starts, |k| {
        let mut o = opts.clone();
        o.init_seed = (k > 0).then(|| seed.wrapping_add(k as u64));
        alpha_project_with(l, pi, alpha, &o)
    })
    .into_iter()
    .collect()
}

/// Best run by objective, ties broken by the lexicographically smallest matrix.
pub fn best_projection(runs: &[ProjectionResult]) -> Option<&ProjectionResult> {
    runs.iter().min_by(|a, b| {
        a.objective
            .value()
            .total_cmp(&b.objective.value())
            .then_with(|| {
                a.m_star
                    .as_slice()
                    .iter()
                    .zip(b.m_star.as_slice())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    })
}
