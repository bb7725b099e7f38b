//! Chains, distributions and edge measures over a labeled finite state space.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use crate::dense;
use crate::error::{MdkError, Result};

/// Tolerance on row sums and total mass.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Default tolerance for structural predicates.
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Probabilities below this are zeros for support logic.
pub const ENTRY_FLOOR: f64 = 1e-15;
/// Largest hypercube state count built by default.
pub const HYPERCUBE_CAP: usize = 1 << 12;

#[derive(Clone, Debug)]
pub struct StateSpace {
    labels: Arc<[String]>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(MdkError::Domain(
                "state space must have at least one state".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(MdkError::Domain(format!("duplicate state label {l:?}")));
            }
        }
        Ok(Self {
            labels: labels.into(),
        })
    }

    /// States labeled "0", "1", ... "n-1".
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl PartialEq for StateSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.labels, &other.labels) || self.labels == other.labels
    }
}

pub(crate) fn same_space(a: &StateSpace, b: &StateSpace, what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(MdkError::Dimension(format!(
            "{what}: {} states vs {} states",
            a.len(),
            b.len()
        )));
    }
    if a != b {
        return Err(MdkError::Dimension(format!("{what}: state labels differ")));
    }
    Ok(())
}

fn check_entries(values: &[f64], what: &str) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(MdkError::Domain(format!("{what}[{i}] is not finite")));
        }
        if v < 0.0 {
            return Err(MdkError::Domain(format!("{what}[{i}] = {v} is negative")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector {
    space: StateSpace,
    weights: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(space: StateSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(MdkError::Dimension(format!(
                "distribution has {} weights for {} states",
                weights.len(),
                space.len()
            )));
        }
        check_entries(&weights, "weights")?;
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(MdkError::Domain(format!("weights sum to {s}, expected 1")));
        }
        Ok(Self { space, weights })
    }

    /// Normalizes nonnegative weights with a positive total.
    pub fn from_unnormalized(space: StateSpace, weights: Vec<f64>) -> Result<Self> {
        check_entries(&weights, "weights")?;
        let s: f64 = weights.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(MdkError::Domain(
                "weights must have a positive finite total".into(),
            ));
        }
        Self::new(space, weights.into_iter().map(|w| w / s).collect())
    }

    pub fn uniform(space: StateSpace) -> Self {
        let n = space.len();
        Self {
            space,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.min() > 0.0
    }

    pub fn require_strictly_positive(&self) -> Result<()> {
        if self.is_strictly_positive() {
            Ok(())
        } else {
            Err(MdkError::Domain("pi must be strictly positive".into()))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    space: StateSpace,
    n: usize,
    data: Vec<f64>,
}

impl serde::Serialize for ProbabilityVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.weights.serialize(s)
    }
}

impl serde::Serialize for TransitionMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl TransitionMatrix {
    pub fn new(space: StateSpace, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = space.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(MdkError::Dimension(format!("matrix must be {n}x{n}")));
        }
        Self::from_flat(space, rows.concat())
    }

    pub fn from_flat(space: StateSpace, data: Vec<f64>) -> Result<Self> {
        let n = space.len();
        if data.len() != n * n {
            return Err(MdkError::Dimension(format!(
                "matrix needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        for (i, row) in data.chunks(n).enumerate() {
            check_entries(row, &format!("matrix[{i}]"))?;
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(MdkError::Domain(format!("row {i} sums to {s}, expected 1")));
            }
        }
        Ok(Self { space, n, data })
    }

    /// Convenience constructor on indexed states.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(StateSpace::indexed(rows.len())?, rows)
    }

    pub(crate) fn from_flat_unchecked(space: StateSpace, data: Vec<f64>) -> Self {
        let n = space.len();
        debug_assert_eq!(data.len(), n * n);
        Self { space, n, data }
    }

    pub fn identity(space: StateSpace) -> Self {
        let n = space.len();
        Self {
            space,
            n,
            data: dense::identity(n),
        }
    }

    /// The stationary projector: every row equals pi.
    pub fn projector(pi: &ProbabilityVector) -> Self {
        let n = pi.len();
        let data = (0..n).flat_map(|_| pi.weights().iter().copied()).collect();
        Self {
            space: pi.space().clone(),
            n,
            data,
        }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Matrix product, renormalizing rows if rounding drift exceeds the stochastic tolerance.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        same_space(&self.space, &other.space, "matrix product")?;
        let mut data = dense::matmul(&self.data, &other.data, self.n);
        if dense::max_row_drift(&data, self.n) > STOCHASTIC_TOL {
            dense::renormalize_rows(&mut data, self.n);
        }
        Ok(Self::from_flat_unchecked(self.space.clone(), data))
    }

    /// (1 - lambda) * self + lambda * other.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        same_space(&self.space, &other.space, "mixture")?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(MdkError::Domain(format!(
                "mixture weight {lambda} outside [0,1]"
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect();
        Ok(Self::from_flat_unchecked(self.space.clone(), data))
    }

    /// Distribution after one step from `mu`.
    pub fn apply(&self, mu: &ProbabilityVector) -> Result<ProbabilityVector> {
        same_space(&self.space, mu.space(), "distribution step")?;
        let w = dense::vecmat(mu.weights(), &self.data, self.n);
        Ok(ProbabilityVector {
            space: self.space.clone(),
            weights: w,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMeasure {
    space: StateSpace,
    n: usize,
    joint: Vec<f64>,
}

impl EdgeMeasure {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.joint[x * self.n + y]
    }

    /// Row-major flattening of the joint law.
    pub fn as_slice(&self) -> &[f64] {
        &self.joint
    }

    pub fn total(&self) -> f64 {
        self.joint.iter().sum()
    }
}

pub fn edge_measure(m: &TransitionMatrix, pi: &ProbabilityVector) -> Result<EdgeMeasure> {
    same_space(m.space(), pi.space(), "edge measure")?;
    let n = m.n();
    let joint = m
        .as_slice()
        .chunks(n)
        .zip(pi.weights())
        .flat_map(|(row, &p)| row.iter().map(move |&v| p * v))
        .collect();
    Ok(EdgeMeasure {
        space: m.space().clone(),
        n,
        joint,
    })
}

/// Lazy random walk on {-1,+1}^N, with the uniform stationary law.
pub fn hypercube_walk(dim: u32) -> Result<(TransitionMatrix, ProbabilityVector)> {
    hypercube_walk_capped(dim, HYPERCUBE_CAP)
}

pub fn hypercube_walk_capped(
    dim: u32,
    cap: usize,
) -> Result<(TransitionMatrix, ProbabilityVector)> {
    if dim == 0 {
        return Err(MdkError::Domain(
            "hypercube dimension must be at least 1".into(),
        ));
    }
    if dim >= usize::BITS - 1 || (1usize << dim) > cap {
        return Err(MdkError::Capacity(format!(
            "2^{dim} states exceeds the cap of {cap}"
        )));
    }
    let d = dim as usize;
    let n = 1usize << d;
    // state index bits, most significant first, give the coordinates; bit 1 is +1
    let labels = (0..n)
        .map(|i| {
            (0..d)
                .map(|k| if i >> (d - 1 - k) & 1 == 1 { '+' } else { '-' })
                .collect::<String>()
        })
        .collect();
    let space = StateSpace::new(labels)?;
    let step = 1.0 / (2.0 * dim as f64);
    let mut data = vec![0.0; n * n];
    for x in 0..n {
        data[x * n + x] = 0.5;
        for k in 0..d {
            data[x * n + (x ^ (1 << k))] = step;
        }
    }
    let pi = ProbabilityVector::uniform(space.clone());
    Ok((TransitionMatrix::from_flat_unchecked(space, data), pi))
}

/// Gibbs law pi_beta(x) proportional to mu(x) exp(-beta U(x)).
pub fn gibbs_measure(
    mu: &ProbabilityVector,
    energy: &[f64],
    beta: f64,
) -> Result<ProbabilityVector> {
    if energy.len() != mu.len() {
        return Err(MdkError::Dimension(format!(
            "energy has {} values for {} states",
            energy.len(),
            mu.len()
        )));
    }
    if energy.iter().any(|u| !u.is_finite()) {
        return Err(MdkError::Domain("energy values must be finite".into()));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(MdkError::Domain(format!(
            "beta = {beta} must be finite and >= 0"
        )));
    }
    let umin = energy.iter().copied().fold(f64::INFINITY, f64::min);
    let w = mu
        .weights()
        .iter()
        .zip(energy)
        .map(|(&m, &u)| m * (-beta * (u - umin)).exp())
        .collect();
    ProbabilityVector::from_unnormalized(mu.space().clone(), w)
}

/// Metropolis-Hastings chain targeting the Gibbs law of `energy` at inverse temperature `beta`.
pub fn metropolis_chain(
    q: &TransitionMatrix,
    mu: &ProbabilityVector,
    energy: &[f64],
    beta: f64,
) -> Result<(TransitionMatrix, ProbabilityVector)> {
    same_space(q.space(), mu.space(), "metropolis proposal")?;
    if !(beta >= 0.0) {
        return Err(MdkError::Domain(format!("beta = {beta} must be >= 0")));
    }
    let residual = detailed_balance_residual(q, mu);
    if residual > STRUCTURAL_TOL {
        return Err(MdkError::Reversibility(format!(
            "proposal detailed-balance residual {residual:e}"
        )));
    }
    let pi = gibbs_measure(mu, energy, beta)?;
    let n = q.n();
    let mut data = vec![0.0; n * n];
    for x in 0..n {
        let mut off = 0.0;
        for y in (0..n).filter(|&y| y != x) {
            let uphill = (energy[y] - energy[x]).max(0.0);
            let v = q.get(x, y) * (-beta * uphill).exp();
            data[x * n + y] = v;
            off += v;
        }
        let diag = 1.0 - off;
        if diag < -STOCHASTIC_TOL {
            return Err(MdkError::Numerical(format!(
                "row {x} off-diagonal mass {off} exceeds 1"
            )));
        }
        data[x * n + x] = diag.max(0.0);
    }
    Ok((
        TransitionMatrix::from_flat_unchecked(q.space().clone(), data),
        pi,
    ))
}

pub fn matrix_power(p: &TransitionMatrix, t: u64) -> TransitionMatrix {
    matrix_power_tracked(p, t).0
}

/// Repeated squaring; also returns the largest row drift that triggered renormalization (0 if none).
pub fn matrix_power_tracked(p: &TransitionMatrix, t: u64) -> (TransitionMatrix, f64) {
    let n = p.n();
    let mut result = dense::identity(n);
    let mut base = p.as_slice().to_vec();
    let mut e = t;
    let mut drift = 0.0_f64;
    let mut fix = |m: &mut Vec<f64>| {
        let d = dense::max_row_drift(m, n);
        if d > STOCHASTIC_TOL {
            drift = drift.max(d);
            dense::renormalize_rows(m, n);
        }
    };
    while e > 0 {
        if e & 1 == 1 {
            result = dense::matmul(&result, &base, n);
            fix(&mut result);
        }
        e >>= 1;
        if e > 0 {
            base = dense::matmul(&base, &base, n);
            fix(&mut base);
        }
    }
    (
        TransitionMatrix::from_flat_unchecked(p.space().clone(), result),
        drift,
    )
}

/// (1/t) * sum_{s=1..t} P^s.
pub fn cesaro_average(p: &TransitionMatrix, t: u64) -> Result<TransitionMatrix> {
    if t == 0 {
        return Err(MdkError::Domain("Cesaro average needs t >= 1".into()));
    }
    let n = p.n();
    let mut power = p.as_slice().to_vec();
    let mut sum = power.clone();
    let mut next = vec![0.0; n * n];
    for _ in 1..t {
        dense::matmul_into(&power, p.as_slice(), &mut next, n);
        std::mem::swap(&mut power, &mut next);
        if dense::max_row_drift(&power, n) > STOCHASTIC_TOL {
            dense::renormalize_rows(&mut power, n);
        }
        sum.iter_mut().zip(&power).for_each(|(s, v)| *s += v);
    }
    let inv = 1.0 / t as f64;
    sum.iter_mut().for_each(|v| *v *= inv);
    Ok(TransitionMatrix::from_flat_unchecked(
        p.space().clone(),
        sum,
    ))
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ChainPredicates {
    pub stationary: bool,
    pub reversible: bool,
    pub irreducible: bool,
    pub aperiodic: bool,
    pub scrambling: bool,
    pub tolerance: f64,
}

/// max |pi(x)P(x,y) - pi(y)P(y,x)|.
pub fn detailed_balance_residual(p: &TransitionMatrix, pi: &ProbabilityVector) -> f64 {
    let n = p.n();
    let w = pi.weights();
    let mut r = 0.0_f64;
    for x in 0..n {
        for y in x + 1..n {
            r = r.max((w[x] * p.get(x, y) - w[y] * p.get(y, x)).abs());
        }
    }
    r
}

/// ||pi P - pi||_1.
pub fn stationarity_residual(p: &TransitionMatrix, pi: &ProbabilityVector) -> f64 {
    let next = dense::vecmat(pi.weights(), p.as_slice(), p.n());
    next.iter()
        .zip(pi.weights())
        .map(|(a, b)| (a - b).abs())
        .sum()
}

/// sum_z min(P(x,z), P(y,z)).
pub(crate) fn row_overlap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u.min(*v)).sum()
}

fn reachable(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Strongly connected components of the support graph, as component ids.
fn components(adj: &[Vec<usize>], radj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let fwd = reachable(adj, s);
        let bwd = reachable(radj, s);
        for v in 0..n {
            if fwd[v] && bwd[v] && comp[v] == usize::MAX {
                comp[v] = next;
            }
        }
        next += 1;
    }
    comp
}

/// Period of the component containing `root` via BFS level differences; 0 if it has no cycle.
fn component_period(adj: &[Vec<usize>], comp: &[usize], root: usize) -> u64 {
    let c = comp[root];
    let mut level = vec![u64::MAX; adj.len()];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut g = 0;
    while let Some(u) = queue.pop_front() {
        for &v in adj[u].iter().filter(|&&v| comp[v] == c) {
            if level[v] == u64::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g
}

/// Structural predicates of P against pi. A state set is aperiodic when every cyclic class has period 1.
pub fn classify(p: &TransitionMatrix, pi: &ProbabilityVector, tol: f64) -> Result<ChainPredicates> {
    same_space(p.space(), pi.space(), "classify")?;
    let n = p.n();
    let reversible = detailed_balance_residual(p, pi) <= tol;
    // detailed balance within tol implies stationarity up to n*tol; keep the implication exact
    let stationary = stationarity_residual(p, pi) <= tol || reversible;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|x| (0..n).filter(|&y| p.get(x, y) > ENTRY_FLOOR).collect())
        .collect();
    let mut radj = vec![Vec::new(); n];
    for (x, out) in adj.iter().enumerate() {
        for &y in out {
            radj[y].push(x);
        }
    }
    let comp = components(&adj, &radj);
    let irreducible = comp.iter().all(|&c| c == 0);
    let mut aperiodic = true;
    let mut done = HashSet::new();
    for s in 0..n {
        if done.insert(comp[s]) {
            let period = component_period(&adj, &comp, s);
            if period > 1 {
                aperiodic = false;
            }
        }
    }
    let mut min_overlap = f64::INFINITY;
    for x in 0..n {
        for y in x + 1..n {
            min_overlap = min_overlap.min(row_overlap(p.row(x), p.row(y)));
        }
    }
    let scrambling = n == 1 || min_overlap > tol;
    Ok(ChainPredicates {
        stationary,
        reversible,
        irreducible,
        aperiodic,
        scrambling,
        tolerance: tol,
    })
}

/// Solves pi P = pi, sum pi = 1 by Gaussian elimination. Fails when the solution is not unique.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<ProbabilityVector> {
    let n = p.n();
    // rows: (P^T - I) with the last equation replaced by the normalization
    let mut a = vec![0.0; n * (n + 1)];
    let w = n + 1;
    for i in 0..n {
        for j in 0..n {
            a[i * w + j] = p.get(j, i) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1) * w + j] = 1.0;
    }
    a[(n - 1) * w + n] = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r * w + col].abs().total_cmp(&a[s * w + col].abs()))
            .unwrap();
        if a[piv * w + col].abs() < 1e-12 {
            return Err(MdkError::Numerical(
                "stationary distribution is not unique".into(),
            ));
        }
        if piv != col {
            for j in 0..w {
                a.swap(piv * w + j, col * w + j);
            }
        }
        for r in 0..n {
            if r != col {
                let f = a[r * w + col] / a[col * w + col];
                if f != 0.0 {
                    for j in col..w {
                        a[r * w + j] -= f * a[col * w + j];
                    }
                }
            }
        }
    }
    let x: Vec<f64> = (0..n)
        .map(|i| (a[i * w + n] / a[i * w + i]).max(0.0))
        .collect();
    ProbabilityVector::from_unnormalized(p.space().clone(), x)
}
