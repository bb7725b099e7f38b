//! Ergodicity coefficients: the closed-form Dobrushin coefficient, ascent-based lower estimates of
//! f- and Renyi contraction coefficients with certified upper caps, and Dobrushin times.

use serde::Serialize;

use crate::chain::{matrix_power, same_space, ProbabilityVector, TransitionMatrix};
use crate::divergence::{check_alpha, f_div_rows, f_div_slices, renyi_weighted, Generator};
use crate::error::{MdkError, Result};
use crate::mixing::MixingTime;
use crate::par;
use crate::rng::{self, Stream};
use crate::simplex::project_simplex;
use crate::spectral::symmetric_eigenpairs;

/// Pairs closer than this in divergence are excluded from the ratio.
pub const DIAGONAL_FLOOR: f64 = 1e-8;
const CONVERGED_PG: f64 = 1e-8;
/// A ratio over pairs with divergence near the floor carries relative error around eps/sqrt(floor).
const SETTLE_TOL: f64 = 1e-9;
const RATIO_CLAMP: f64 = 1e12;
const LOCAL_SEED: u64 = 0x6c6f_6361_6c00_0000;
/// Fraction of the way to the simplex boundary taken along a local direction.
const LOCAL_STEP: f64 = 1e-3;

/// Largest total-variation distance between two rows, as one minus their overlap so that
/// disjoint rows give exactly 1.
pub fn dobrushin_tv(p: &TransitionMatrix) -> f64 {
    let n = p.n();
    let mut best = 0.0_f64;
    for x in 0..n {
        for y in x + 1..n {
            let overlap: f64 = p.row(x).iter().zip(p.row(y)).map(|(a, b)| a.min(*b)).sum();
            best = best.max(1.0 - overlap);
        }
    }
    best.clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientEstimate {
    /// Best ratio found.
    pub lower: f64,
    /// Certified cap.
    pub upper: f64,
    pub method: String,
    pub starts: usize,
    pub iters: usize,
    pub seed: u64,
    pub converged: bool,
    /// Cap evaluated at the best pair found; only valid if that pair is the true optimizer.
    pub heuristic_upper: Option<f64>,
    /// Best ratio over distribution pairs, when the estimate is over matrix pairs.
    pub measure_lower: Option<f64>,
    /// Matrix pairs beat distribution pairs by more than 1e-6.
    pub strict_gap: Option<bool>,
}

#[derive(Clone, Copy)]
enum Objective<'a> {
    F(&'a Generator),
    Renyi(f64),
}

/// Contraction ratio D(MP||LP) / D(M||L) over k-row pairs with row weights w.
struct Ratio<'a> {
    p: &'a [f64],
    n: usize,
    k: usize,
    w: Vec<f64>,
    obj: Objective<'a>,
}

#[derive(Clone, Debug)]
struct Pair {
    m: Vec<f64>,
    l: Vec<f64>,
    value: f64,
    converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1e300, 1e300)
    }
}

impl<'a> Ratio<'a> {
    fn push(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; self.k * n];
        for r in 0..self.k {
            let orow = &mut out[r * n..(r + 1) * n];
            for (j, &xj) in x[r * n..(r + 1) * n].iter().enumerate() {
                if xj != 0.0 {
                    for (o, &pz) in orow.iter_mut().zip(&self.p[j * n..(j + 1) * n]) {
                        *o += xj * pz;
                    }
                }
            }
        }
        out
    }

    /// Transpose action: g * P^T.
    fn pull(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; self.k * n];
        for r in 0..self.k {
            for j in 0..n {
                let prow = &self.p[j * n..(j + 1) * n];
                out[r * n + j] = g[r * n..(r + 1) * n]
                    .iter()
                    .zip(prow)
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
        out
    }

    fn div(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.obj {
            Objective::F(g) => {
                if self.k == 1 {
                    f_div_slices(a, b, g)
                } else {
                    f_div_rows(a, b, &self.w, self.n, g)
                }
            }
            Objective::Renyi(alpha) => {
                if self.k == 1 {
                    renyi_weighted(a, b, None, alpha)
                } else {
                    renyi_weighted(a, b, Some((&self.w, self.n)), alpha)
                }
            }
        }
    }

    fn value(&self, m: &[f64], l: &[f64]) -> Option<f64> {
        let den = self.div(m, l);
        if !(den >= DIAGONAL_FLOOR && den.is_finite()) {
            return None;
        }
        let num = self.div(&self.push(m), &self.push(l));
        if !num.is_finite() {
            return None;
        }
        Some(num.max(0.0) / den)
    }

    /// Partial derivatives of the divergence with respect to both arguments.
    fn div_grad(&self, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let len = a.len();
        let mut ga = vec![0.0; len];
        let mut gb = vec![0.0; len];
        match self.obj {
            Objective::F(g) => {
                for i in 0..len {
                    let w = self.w[i / n];
                    let bi = b[i].max(1e-300);
                    let r = (a[i] / bi).clamp(1.0 / RATIO_CLAMP, RATIO_CLAMP);
                    let d = g.derivative(r);
                    ga[i] = sanitize(w * d);
                    gb[i] = sanitize(w * (g.eval(r) - r * d));
                }
            }
            Objective::Renyi(alpha) => {
                let mut s = 0.0;
                for i in 0..len {
                    s += self.w[i / n]
                        * a[i].max(1e-300).powf(alpha)
                        * b[i].max(1e-300).powf(1.0 - alpha);
                }
                for i in 0..len {
                    let w = self.w[i / n];
                    let ai = a[i].max(1e-300);
                    let bi = b[i].max(1e-300);
                    let r = (ai / bi).clamp(1.0 / RATIO_CLAMP, RATIO_CLAMP);
                    let ra = r.powf(alpha - 1.0);
                    ga[i] = sanitize(w * alpha * ra / ((alpha - 1.0) * s));
                    gb[i] = sanitize(-w * ra * r / s);
                }
            }
        }
        (ga, gb)
    }

    fn gradient(&self, m: &[f64], l: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let mp = self.push(m);
        let lp = self.push(l);
        let num = self.div(&mp, &lp);
        let den = self.div(m, l);
        if !(den >= DIAGONAL_FLOOR && den.is_finite() && num.is_finite()) {
            return None;
        }
        let (na, nb) = self.div_grad(&mp, &lp);
        let (gm_num, gl_num) = (self.pull(&na), self.pull(&nb));
        let (gm_den, gl_den) = self.div_grad(m, l);
        let combine = |gn: &[f64], gd: &[f64]| -> Vec<f64> {
            gn.iter()
                .zip(gd)
                .map(|(a, b)| sanitize((a * den - num * b) / (den * den)))
                .collect()
        };
        Some((combine(&gm_num, &gm_den), combine(&gl_num, &gl_den)))
    }

    fn project(&self, x: &mut [f64]) {
        for row in x.chunks_mut(self.n) {
            project_simplex(row);
        }
    }

    /// Projected-gradient residual with a unit step.
    fn residual(&self, m: &[f64], l: &[f64]) -> f64 {
        let Some((gm, gl)) = self.gradient(m, l) else {
            return f64::INFINITY;
        };
        let mut res = 0.0_f64;
        for (x, g) in [(m, gm), (l, gl)] {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + b).collect();
            self.project(&mut y);
            res = res.max(
                y.iter()
                    .zip(x)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
        }
        res
    }

    /// Normalized projected-gradient ascent with backtracking.
    fn ascend(&self, mut m: Vec<f64>, mut l: Vec<f64>, iters: usize) -> Option<Pair> {
        self.project(&mut m);
        self.project(&mut l);
        let mut val = self.value(&m, &l)?;
        let mut step = 0.1;
        let mut flat = 0;
        for _ in 0..iters {
            let Some((gm, gl)) = self.gradient(&m, &l) else {
                break;
            };
            let scale = gm
                .iter()
                .chain(&gl)
                .fold(0.0_f64, |acc, g| acc.max(g.abs()));
            if scale == 0.0 {
                break;
            }
            let mut accepted = false;
            while step > 1e-14 {
                let mut cm: Vec<f64> = m
                    .iter()
                    .zip(&gm)
                    .map(|(x, g)| x + step * g / scale)
                    .collect();
                let mut cl: Vec<f64> = l
                    .iter()
                    .zip(&gl)
                    .map(|(x, g)| x + step * g / scale)
                    .collect();
                self.project(&mut cm);
                self.project(&mut cl);
                match self.value(&cm, &cl) {
                    Some(v) if v > val => {
                        flat = if v - val <= 1e-13 * val.max(1e-300) {
                            flat + 1
                        } else {
                            0
                        };
                        m = cm;
                        l = cl;
                        val = v;
                        accepted = true;
                        step = (2.0 * step).min(1.0);
                        break;
                    }
                    _ => step *= 0.5,
                }
            }
            if !accepted || flat >= 10 {
                break;
            }
        }
        let converged = self.residual(&m, &l) < CONVERGED_PG;
        Some(Pair {
            m,
            l,
            value: val,
            converged,
        })
    }

    /// The pair (L + eps h, L) with h the leading nontrivial direction of the chi-squared
    /// contraction at L. As eps -> 0 the ratio of any smooth divergence tends to that eigenvalue,
    /// which is where the supremum often sits.
    fn local_start(&self, l: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let support: Vec<usize> = (0..n).filter(|&i| l[i] > 1e-9).collect();
        let s = support.len();
        if s < 2 {
            return None;
        }
        let lp = self.push(l);
        let root: Vec<f64> = support.iter().map(|&i| l[i].sqrt()).collect();
        let mut a = vec![0.0; s * s];
        for (u, &i) in support.iter().enumerate() {
            for (v, &j) in support.iter().enumerate() {
                let mut c = 0.0;
                for z in 0..n {
                    if lp[z] > 0.0 {
                        c += self.p[i * n + z] * self.p[j * n + z] / lp[z];
                    }
                }
                // sqrt(L) is the trivial eigenvector with eigenvalue 1; deflate it
                a[u * s + v] = root[u] * root[v] * (c - 1.0);
            }
        }
        let pairs = symmetric_eigenpairs(&a, s).ok()?;
        let g = &pairs[0].1;
        let mut h = vec![0.0; n];
        for (u, &i) in support.iter().enumerate() {
            h[i] = root[u] * g[u];
        }
        let drift: f64 = h.iter().sum();
        for &i in &support {
            h[i] -= l[i] * drift;
        }
        let reach = support
            .iter()
            .filter(|&&i| h[i] < 0.0)
            .map(|&i| l[i] / -h[i])
            .fold(f64::INFINITY, f64::min);
        if !reach.is_finite() {
            return None;
        }
        let eps = LOCAL_STEP * reach;
        let m = l
            .iter()
            .zip(&h)
            .map(|(a, b)| (a + eps * b).max(0.0))
            .collect();
        Some((m, l.to_vec()))
    }

    /// Row near a vertex: 0.8 at a random state, the rest from a flat Dirichlet.
    fn near_vertex(&self, rng: &mut Stream, at: usize) -> Vec<f64> {
        let mut row = rng::dirichlet_flat(rng, self.n);
        row.iter_mut().for_each(|v| *v *= 0.2);
        row[at] += 0.8;
        row
    }

    fn random_start(&self, rng: &mut Stream, start: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut m = Vec::with_capacity(self.k * n);
        let mut l = Vec::with_capacity(self.k * n);
        for _ in 0..self.k {
            if start % 2 == 0 || n == 1 {
                m.extend(rng::dirichlet_flat(rng, n));
                l.extend(rng::dirichlet_flat(rng, n));
            } else {
                let x = (rng::unit(rng) * n as f64) as usize % n;
                let y = (x + 1 + (rng::unit(rng) * (n - 1) as f64) as usize % (n - 1)) % n;
                m.extend(self.near_vertex(rng, x));
                l.extend(self.near_vertex(rng, y));
            }
        }
        (m, l)
    }

    /// Best pair over seeded starts plus extra fixed candidates, reduced in index order.
    fn search(
        &self,
        starts: usize,
        iters: usize,
        seed: u64,
        extra: Vec<(Vec<f64>, Vec<f64>)>,
        seeded: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Option<Pair> {
        let runs: Vec<Option<Pair>> = par::map_indices(starts + seeded.len(), |i| {
            let (m, l) = match seeded.get(i.wrapping_sub(starts)) {
                Some(pair) if i >= starts => pair.clone(),
                _ => self.random_start(&mut rng::stream(seed, i as u64), i),
            };
            self.ascend(m, l, iters)
        });
        let fixed = extra.into_iter().filter_map(|(m, l)| {
            let value = self.value(&m, &l)?;
            let converged = self.residual(&m, &l) < CONVERGED_PG;
            Some(Pair {
                m,
                l,
                value,
                converged,
            })
        });
        let mut best: Option<Pair> = None;
        for cand in runs.into_iter().flatten().chain(fixed) {
            if best.as_ref().is_none_or(|b| cand.value > b.value) {
                best = Some(cand);
            }
        }
        best
    }
}

fn dirac_pairs(n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if x != y {
                let mut m = vec![0.0; n];
                let mut l = vec![0.0; n];
                m[x] = 1.0;
                l[y] = 1.0;
                out.push((m, l));
            }
        }
    }
    out
}

fn check_search(p: &TransitionMatrix, pi: &ProbabilityVector, starts: usize) -> Result<()> {
    same_space(p.space(), pi.space(), "ergodicity")?;
    pi.require_strictly_positive()?;
    if starts == 0 {
        return Err(MdkError::Domain("starts must be positive".into()));
    }
    Ok(())
}

/// Keeps a rounding-level excess of the found ratio over a certified cap from breaking lower <= upper.
fn settle(lower: f64, upper: f64) -> f64 {
    if lower > upper && lower - upper <= SETTLE_TOL * upper.max(1.0) {
        upper
    } else {
        lower
    }
}

/// chi-squared contraction of the direction e_x - e_y at the law t e_x + (1 - t) e_y.
fn two_point_ratio(p: &TransitionMatrix, x: usize, y: usize, t: f64) -> f64 {
    let (px, py) = (p.row(x), p.row(y));
    let num: f64 = px
        .iter()
        .zip(py)
        .map(|(a, b)| {
            let q = t * a + (1.0 - t) * b;
            if q > 0.0 {
                (a - b) * (a - b) / q
            } else {
                0.0
            }
        })
        .sum();
    num / (1.0 / t + 1.0 / (1.0 - t))
}

/// For each pair of states, the two-point law with the largest chi-squared contraction,
/// by a grid in t followed by golden-section refinement.
fn two_point_centers(p: &TransitionMatrix) -> Vec<Vec<f64>> {
    const GRID: usize = 32;
    let n = p.n();
    let mut out = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let f = |t: f64| two_point_ratio(p, x, y, t);
            let h = 1.0 / GRID as f64;
            let k = (1..GRID)
                .max_by(|&a, &b| f(a as f64 * h).total_cmp(&f(b as f64 * h)))
                .unwrap_or(1);
            let (mut lo, mut hi) = ((k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                let a = hi - g * (hi - lo);
                let b = lo + g * (hi - lo);
                if f(a.max(1e-12)) >= f(b.min(1.0 - 1e-12)) {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            let t = (0.5 * (lo + hi)).clamp(1e-6, 1.0 - 1e-6);
            let mut c = vec![0.0; n];
            c[x] = t;
            c[y] = 1.0 - t;
            out.push(c);
        }
    }
    out
}

fn measure_search(
    p: &TransitionMatrix,
    obj: Objective<'_>,
    starts: usize,
    iters: usize,
    seed: u64,
) -> Option<Pair> {
    let r = Ratio {
        p: p.as_slice(),
        n: p.n(),
        k: 1,
        w: vec![1.0],
        obj,
    };
    // local starts around the uniform law, the best two-point laws, each row of P and as many
    // random laws as starts
    let n = p.n();
    let mut centers = vec![vec![1.0 / n as f64; n]];
    centers.extend(two_point_centers(p));
    centers.extend(p.as_slice().chunks(n).map(<[f64]>::to_vec));
    centers.extend(
        (0..starts).map(|i| rng::dirichlet_flat(&mut rng::stream(seed ^ LOCAL_SEED, i as u64), n)),
    );
    let seeded = centers.iter().filter_map(|c| r.local_start(c)).collect();
    r.search(starts, iters, seed, dirac_pairs(n), seeded)
}

fn matrix_search(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    obj: Objective<'_>,
    starts: usize,
    iters: usize,
    seed: u64,
    seed_pair: Option<&Pair>,
) -> Option<Pair> {
    let n = p.n();
    let r = Ratio {
        p: p.as_slice(),
        n,
        k: n,
        w: pi.weights().to_vec(),
        obj,
    };
    // a distribution pair repeated on every row has the same ratio as the pair itself
    let extra = seed_pair
        .map(|b| vec![(b.m.repeat(n), b.l.repeat(n))])
        .unwrap_or_default();
    r.search(
        starts,
        iters,
        seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
        extra,
        Vec::new(),
    )
}

/// Lower estimate of the f-contraction coefficient over distribution pairs, capped by Dobrushin.
pub fn estimate_eta_f(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    f: &Generator,
    starts: usize,
    iters: usize,
    seed: u64,
) -> Result<CoefficientEstimate> {
    check_search(p, pi, starts)?;
    f.validate()?;
    let upper = dobrushin_tv(p);
    let best = measure_search(p, Objective::F(f), starts, iters, seed);
    let (lower, converged) = best.map_or((0.0, false), |b| (b.value, b.converged));
    Ok(CoefficientEstimate {
        lower: settle(lower, upper),
        upper,
        method: format!(
            "projected-gradient ascent over distribution pairs plus point-mass pairs, f = {}",
            f.name()
        ),
        starts,
        iters,
        seed,
        converged: converged || upper == 0.0,
        heuristic_upper: None,
        measure_lower: None,
        strict_gap: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairConsistency {
    pub measure_lower: f64,
    pub matrix_lower: f64,
    /// Largest row ratio of the best matrix pair, read as distribution pairs.
    pub matrix_rows_as_measures: f64,
    /// Ratio of the best distribution pair repeated on every row.
    pub measure_as_matrix: f64,
}

/// Runs both the distribution-pair and matrix-pair searches for an f-divergence.
pub fn eta_f_pair_consistency(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    f: &Generator,
    starts: usize,
    iters: usize,
    seed: u64,
) -> Result<PairConsistency> {
    check_search(p, pi, starts)?;
    f.validate()?;
    let n = p.n();
    let obj = Objective::F(f);
    let measure = measure_search(p, obj, starts, iters, seed);
    let matrix = matrix_search(p, pi, obj, starts, iters, seed, None);
    let single = Ratio {
        p: p.as_slice(),
        n,
        k: 1,
        w: vec![1.0],
        obj,
    };
    let multi = Ratio {
        p: p.as_slice(),
        n,
        k: n,
        w: pi.weights().to_vec(),
        obj,
    };
    let rows = matrix.as_ref().map_or(0.0, |b| {
        (0..n)
            .filter_map(|x| single.value(&b.m[x * n..(x + 1) * n], &b.l[x * n..(x + 1) * n]))
            .fold(0.0, f64::max)
    });
    let lifted = measure
        .as_ref()
        .and_then(|b| multi.value(&b.m.repeat(n), &b.l.repeat(n)))
        .unwrap_or(0.0);
    Ok(PairConsistency {
        measure_lower: measure.map_or(0.0, |b| b.value),
        matrix_lower: matrix.map_or(0.0, |b| b.value),
        matrix_rows_as_measures: rows,
        measure_as_matrix: lifted,
    })
}

/// Lower estimate of the Renyi contraction coefficient over chain pairs.
pub fn estimate_eta_renyi(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    alpha: f64,
    starts: usize,
    iters: usize,
    seed: u64,
) -> Result<CoefficientEstimate> {
    check_search(p, pi, starts)?;
    check_alpha(alpha)?;
    let dob = dobrushin_tv(p);
    let obj = Objective::Renyi(alpha);
    let measure = measure_search(p, obj, starts, iters, seed);
    let matrix = matrix_search(p, pi, obj, starts, iters, seed, measure.as_ref());
    let measure_lower = measure.as_ref().map_or(0.0, |b| b.value);
    let (matrix_lower, converged) = matrix
        .as_ref()
        .map_or((0.0, false), |b| (b.value, b.converged));
    let lower = matrix_lower.max(measure_lower);
    // below order one the Renyi coefficient sits under the alpha-divergence one, itself under Dobrushin
    let upper = if alpha < 1.0 { dob } else { 1.0 };
    let heuristic_upper = if alpha > 1.0 {
        matrix.as_ref().map(|b| {
            let n = p.n();
            let d = f_div_rows(&b.m, &b.l, pi.weights(), n, &Generator::Alpha(alpha));
            let a1 = alpha - 1.0;
            if d.is_finite() && d > 0.0 {
                (a1 * dob * d).ln_1p() / (a1 * d).ln_1p()
            } else {
                dob
            }
        })
    } else {
        None
    };
    Ok(CoefficientEstimate {
        lower: settle(lower, upper),
        upper,
        method: format!("projected-gradient ascent over chain pairs seeded with distribution pairs, Renyi order {alpha}"),
        starts,
        iters,
        seed,
        converged: converged || upper == 0.0,
        heuristic_upper,
        measure_lower: Some(settle(measure_lower, upper)),
        strict_gap: Some(matrix_lower > measure_lower + 1e-6),
    })
}

/// First t >= 0 with dobrushin_tv(P^t) < epsilon. Submultiplicativity makes the crossing permanent,
/// so the search doubles then bisects.
pub fn dobrushin_time(p: &TransitionMatrix, epsilon: f64, t_cap: u64) -> Result<MixingTime> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MdkError::Domain(format!(
            "epsilon = {epsilon} must lie in (0,1)"
        )));
    }
    // P^0 = I has coefficient 1 unless there is a single state
    if p.n() == 1 {
        return Ok(MixingTime::Exact(0));
    }
    let mut hi = 1u64;
    let mut power = p.clone();
    loop {
        if dobrushin_tv(&power) < epsilon {
            break;
        }
        if hi >= t_cap {
            return Ok(MixingTime::ExceededCap);
        }
        let next = hi.saturating_mul(2);
        if next > t_cap {
            hi = t_cap;
            power = matrix_power(p, hi);
        } else {
            hi = next;
            power = power.mul(&power)?;
        }
    }
    // invariant: coefficient at lo is >= epsilon, at hi is < epsilon
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if dobrushin_tv(&matrix_power(p, mid)) < epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(MixingTime::Exact(hi))
}
