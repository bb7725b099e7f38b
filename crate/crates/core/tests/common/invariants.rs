//! Per-instance invariant checks shared by the property tests and the acceptance suite.
//! Each takes (seed, index), draws its own instance and returns a description of the first violation.

use super::*;
use mdk::ergodicity::{dobrushin_tv, estimate_eta_f, estimate_eta_renyi, eta_f_pair_consistency};
use mdk::projection::{alpha_project_multistart, pythagorean_margin, ProjectOptions};
use mdk::{
    alpha_div, classify, edge_measure, f_div_measures, named_div, renyi_div, AlphaOrder, Generator,
    NamedDivergence, ProbabilityVector, StateSpace, TransitionMatrix,
};

pub type Check = Result<(), String>;

pub const ALPHA_GRID: [f64; 6] = [0.25, 0.5, 0.75, 1.5, 2.0, 4.0];

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn d(m: &TransitionMatrix, l: &TransitionMatrix, p: &ProbabilityVector, a: f64) -> f64 {
    alpha_div(m, l, p, AlphaOrder::Numeric(a)).unwrap().value()
}

fn r(m: &TransitionMatrix, l: &TransitionMatrix, p: &ProbabilityVector, a: f64) -> f64 {
    renyi_div(m, l, p, AlphaOrder::Numeric(a)).unwrap().value()
}

fn r_at(m: &TransitionMatrix, l: &TransitionMatrix, p: &ProbabilityVector, a: AlphaOrder) -> f64 {
    renyi_div(m, l, p, a).unwrap().value()
}

/// a <= b up to `tol` relative to the larger magnitude; infinities compare exactly.
fn le(a: f64, b: f64, tol: f64) -> bool {
    if b == f64::INFINITY || a == f64::NEG_INFINITY {
        return true;
    }
    a <= b + slack(tol, a.abs().max(b.abs()))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= slack(tol, a.abs().max(b.abs()))
}

struct DivCase {
    n: usize,
    m: TransitionMatrix,
    l: TransitionMatrix,
    p: ProbabilityVector,
}

/// Every fourth case has M = L; odd cases carry zero entries.
fn div_case(seed: u64, idx: u64, positive: bool) -> DivCase {
    let mut g = rng(seed, idx);
    let n = 2 + (idx as usize % 7);
    let holes = if positive || idx % 2 == 0 { 0.0 } else { 0.35 };
    let m = sparse_chain(&mut g, n, holes);
    let l = if idx % 4 == 3 {
        m.clone()
    } else {
        sparse_chain(&mut g, n, holes)
    };
    let p = pi(&mut g, n);
    DivCase { n, m, l, p }
}

pub fn div_nonnegative(seed: u64, idx: u64) -> Check {
    let DivCase { m, l, p, .. } = div_case(seed, idx, false);
    let gap = max_abs_diff(m.as_slice(), l.as_slice());
    for a in ALPHA_GRID {
        let (dv, rv) = (d(&m, &l, &p, a), r(&m, &l, &p, a));
        ensure!(dv >= 0.0 && rv >= 0.0, "alpha {a}: D = {dv}, R = {rv}");
        ensure!(
            (dv < 1e-12) == (gap < 1e-9),
            "alpha {a}: D = {dv} but |M - L| = {gap}"
        );
    }
    Ok(())
}

pub fn div_edge_equality(seed: u64, idx: u64) -> Check {
    let DivCase { n, m, l, p } = div_case(seed, idx, false);
    let flat = StateSpace::indexed(n * n).unwrap();
    let em = edge_measure(&m, &p).unwrap().as_slice().to_vec();
    let el = edge_measure(&l, &p).unwrap().as_slice().to_vec();
    // edge measures sum to 1 only up to rounding
    let em = ProbabilityVector::from_unnormalized(flat.clone(), em).unwrap();
    let el = ProbabilityVector::from_unnormalized(flat, el).unwrap();
    for a in ALPHA_GRID {
        let chains = d(&m, &l, &p, a);
        let measures = f_div_measures(&em, &el, &Generator::alpha(a).unwrap())
            .unwrap()
            .value();
        ensure!(
            close(chains, measures, 1e-12),
            "alpha {a}: chains {chains}, edge measures {measures}"
        );
    }
    Ok(())
}

pub fn div_monotone(seed: u64, idx: u64) -> Check {
    let DivCase { m, l, p, .. } = div_case(seed, idx, false);
    let values: Vec<f64> = ALPHA_GRID.iter().map(|&a| r(&m, &l, &p, a)).collect();
    for k in 1..values.len() {
        ensure!(
            le(values[k - 1], values[k], 1e-12),
            "R({}) = {} > R({}) = {}",
            ALPHA_GRID[k - 1],
            values[k - 1],
            ALPHA_GRID[k],
            values[k]
        );
    }
    Ok(())
}

pub fn div_limits(seed: u64, idx: u64) -> Check {
    let DivCase { m, l, p, .. } = div_case(seed, idx, true);
    let one = r_at(&m, &l, &p, AlphaOrder::One);
    for a in [1.0 - 1e-5, 1.0 + 1e-5] {
        let v = r(&m, &l, &p, a);
        ensure!((v - one).abs() <= 1e-3, "R({a}) = {v}, KL = {one}");
    }
    let inf = r_at(&m, &l, &p, AlphaOrder::Infinity);
    let v = r(&m, &l, &p, 64.0);
    ensure!((v - inf).abs() <= 0.05, "R(64) = {v}, R(inf) = {inf}");
    let zero = r_at(&m, &l, &p, AlphaOrder::Zero);
    let v = r(&m, &l, &p, 1e-5);
    ensure!((v - zero).abs() <= 1e-3, "R(1e-5) = {v}, R(0) = {zero}");
    Ok(())
}

pub fn div_pinsker(seed: u64, idx: u64) -> Check {
    let DivCase { m, l, p, .. } = div_case(seed, idx, false);
    let tv = named_div(&m, &l, &p, NamedDivergence::Tv).unwrap().value();
    for a in [0.25, 0.5] {
        let v = r(&m, &l, &p, a);
        ensure!(le(a / 2.0 * tv * tv, v, 1e-12), "alpha {a}: TV {tv}, R {v}");
    }
    let kl = r_at(&m, &l, &p, AlphaOrder::One);
    ensure!(le(tv * tv / 2.0, kl, 1e-12), "TV {tv}, KL {kl}");
    Ok(())
}

pub fn div_chain(seed: u64, idx: u64) -> Check {
    let DivCase { m, l, p, .. } = div_case(seed, idx, false);
    let hel = named_div(&m, &l, &p, NamedDivergence::Hellinger2)
        .unwrap()
        .value();
    let chi = named_div(&m, &l, &p, NamedDivergence::Chi2)
        .unwrap()
        .value();
    let seq = [
        hel,
        r(&m, &l, &p, 0.5),
        r_at(&m, &l, &p, AlphaOrder::One),
        r(&m, &l, &p, 2.0),
        chi,
    ];
    for k in 1..seq.len() {
        ensure!(
            le(seq[k - 1], seq[k], 1e-12),
            "chain breaks at {k}: {seq:?}"
        );
    }
    Ok(())
}

pub fn div_skew(seed: u64, idx: u64) -> Check {
    let DivCase { m, l, p, .. } = div_case(seed, idx, false);
    for a in [0.2, 0.4, 0.6, 0.8] {
        let lhs = r(&m, &l, &p, a);
        let rhs = a / (1.0 - a) * r(&l, &m, &p, 1.0 - a);
        ensure!(close(lhs, rhs, 1e-12), "alpha {a}: {lhs} vs {rhs}");
    }
    Ok(())
}

pub fn div_equivalence(seed: u64, idx: u64) -> Check {
    let DivCase { m, l, p, .. } = div_case(seed, idx, false);
    let grid = [0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9];
    for (i, &a) in grid.iter().enumerate() {
        for &b in &grid[i + 1..] {
            let (ra, rb) = (r(&m, &l, &p, a), r(&m, &l, &p, b));
            let lower = a / b * (1.0 - b) / (1.0 - a) * rb;
            ensure!(
                le(lower, ra, 1e-12) && le(ra, rb, 1e-12),
                "({a}, {b}): {lower} <= {ra} <= {rb} fails"
            );
        }
    }
    Ok(())
}

pub fn div_convexity(seed: u64, idx: u64) -> Check {
    let DivCase { n, m, l, p } = div_case(seed, idx, false);
    let mut g = rng(seed, idx ^ 0x5555);
    let holes = if idx % 2 == 0 { 0.0 } else { 0.35 };
    let m2 = sparse_chain(&mut g, n, holes);
    let l2 = sparse_chain(&mut g, n, holes);
    for lam in [0.25, 0.5, 0.75] {
        let mm = m2.mix(&m, lam).unwrap();
        let ll = l2.mix(&l, lam).unwrap();
        for a in ALPHA_GRID {
            let mixed = d(&mm, &ll, &p, a);
            let bound = lam * d(&m, &l, &p, a) + (1.0 - lam) * d(&m2, &l2, &p, a);
            ensure!(
                le(mixed, bound, 1e-12),
                "D_{a} at lambda {lam}: {mixed} > {bound}"
            );
            let mixed = r(&mm, &ll, &p, a);
            let bound = r(&m, &l, &p, a).max(r(&m2, &l2, &p, a));
            ensure!(
                le(mixed, bound, 1e-12),
                "R_{a} at lambda {lam}: {mixed} > {bound}"
            );
        }
    }
    Ok(())
}

pub fn div_weak_triangle(seed: u64, idx: u64) -> Check {
    let DivCase { n, m: u, l: v, p } = div_case(seed, idx, true);
    let w = positive_chain(&mut rng(seed, idx ^ 0xaaaa), n);
    for a in [1.5, 2.0] {
        let lhs = r(&u, &v, &p, a);
        let rhs = (2.0 * a - 1.0) / (2.0 * a - 2.0) * r(&u, &w, &p, 2.0 * a)
            + r(&w, &v, &p, 2.0 * a - 1.0);
        ensure!(le(lhs, rhs, 1e-12), "alpha {a}: {lhs} > {rhs}");
    }
    Ok(())
}

pub const DIVERGENCE: [(&str, fn(u64, u64) -> Check); 10] = [
    ("nonnegativity", div_nonnegative),
    ("edge-measure equality", div_edge_equality),
    ("monotone in alpha", div_monotone),
    ("limit orders", div_limits),
    ("pinsker", div_pinsker),
    ("hellinger to chi-squared chain", div_chain),
    ("skew symmetry", div_skew),
    ("equivalence", div_equivalence),
    ("joint convexity", div_convexity),
    ("weak triangle", div_weak_triangle),
];

pub const SEARCH_STARTS: usize = 4;
pub const SEARCH_ITERS: usize = 150;

fn erg_case(seed: u64, idx: u64) -> (TransitionMatrix, ProbabilityVector) {
    let mut g = rng(seed, idx);
    let n = 2 + (idx as usize % 7);
    let holes = [0.0, 0.3, 0.7][idx as usize % 3];
    (sparse_chain(&mut g, n, holes), pi(&mut g, n))
}

pub fn erg_bounds(seed: u64, idx: u64) -> Check {
    let (p, w) = erg_case(seed, idx);
    let gens = [
        Generator::Tv,
        Generator::Kl,
        Generator::Hellinger,
        Generator::Chi2,
        Generator::Alpha(2.0),
    ];
    let mut estimates = Vec::new();
    for f in &gens {
        estimates.push((
            f.name(),
            estimate_eta_f(&p, &w, f, SEARCH_STARTS, SEARCH_ITERS, seed).unwrap(),
        ));
    }
    for a in [0.5, 2.0] {
        estimates.push((
            format!("renyi {a}"),
            estimate_eta_renyi(&p, &w, a, SEARCH_STARTS, SEARCH_ITERS, seed).unwrap(),
        ));
    }
    for (name, e) in estimates {
        ensure!(
            0.0 <= e.lower && e.lower <= e.upper && e.upper <= 1.0,
            "{name}: lower {} upper {}",
            e.lower,
            e.upper
        );
    }
    Ok(())
}

pub fn erg_pair_consistency(seed: u64, idx: u64) -> Check {
    let (p, w) = erg_case(seed, idx);
    for f in [Generator::Kl, Generator::Alpha(2.0), Generator::Hellinger] {
        let c = eta_f_pair_consistency(&p, &w, &f, SEARCH_STARTS, SEARCH_ITERS, seed).unwrap();
        let name = f.name();
        ensure!(
            c.matrix_lower <= c.measure_lower + 1e-4,
            "{name}: matrix pairs {} beat distribution pairs {}",
            c.matrix_lower,
            c.measure_lower
        );
        ensure!(
            c.matrix_rows_as_measures <= c.measure_lower + 1e-4,
            "{name}: a row of the matrix optimum reaches {} over {}",
            c.matrix_rows_as_measures,
            c.measure_lower
        );
        ensure!(
            (c.measure_as_matrix - c.measure_lower).abs() <= 1e-4,
            "{name}: lifted distribution pair gives {} vs {}",
            c.measure_as_matrix,
            c.measure_lower
        );
    }
    Ok(())
}

pub fn erg_submultiplicative(seed: u64, idx: u64) -> Check {
    let (p, _) = erg_case(seed, idx);
    let (q, _) = erg_case(seed, idx ^ 0x7777);
    let q = if q.n() == p.n() {
        q
    } else {
        sparse_chain(&mut rng(seed, idx ^ 0x7777), p.n(), 0.3)
    };
    let pq = dobrushin_tv(&p.mul(&q).unwrap());
    let bound = dobrushin_tv(&p) * dobrushin_tv(&q) + 1e-12;
    ensure!(pq <= bound, "{pq} > {bound}");
    Ok(())
}

pub fn erg_scrambling(seed: u64, idx: u64) -> Check {
    let (p, w) = erg_case(seed, idx);
    let c = classify(&p, &w, 1e-10).unwrap();
    let dob = dobrushin_tv(&p);
    ensure!(
        c.scrambling == (dob < 1.0),
        "scrambling {} with coefficient {dob}",
        c.scrambling
    );
    Ok(())
}

pub fn erg_unit_rank(seed: u64, idx: u64) -> Check {
    let (p, _) = erg_case(seed, idx);
    let n = p.n();
    let row = p.row(0).to_vec();
    let flat = TransitionMatrix::from_rows(vec![row; n]).unwrap();
    ensure!(
        dobrushin_tv(&flat) <= 1e-12,
        "rank one gives {}",
        dobrushin_tv(&flat)
    );
    let rank_one = (1..n).all(|x| max_abs_diff(p.row(x), p.row(0)) == 0.0);
    let dob = dobrushin_tv(&p);
    ensure!(
        rank_one == (dob <= 1e-12),
        "rank one {rank_one} with coefficient {dob}"
    );
    Ok(())
}

pub fn erg_convex(seed: u64, idx: u64) -> Check {
    let (p, _) = erg_case(seed, idx);
    let q = sparse_chain(&mut rng(seed, idx ^ 0x3333), p.n(), 0.3);
    let mid = dobrushin_tv(&p.mix(&q, 0.5).unwrap());
    let bound = 0.5 * (dobrushin_tv(&p) + dobrushin_tv(&q));
    ensure!(mid <= bound + 1e-12, "{mid} > {bound}");
    Ok(())
}

pub const ERGODICITY: [(&str, fn(u64, u64) -> Check); 6] = [
    ("lower <= upper in [0, 1]", erg_bounds),
    ("distribution and matrix pairs agree", erg_pair_consistency),
    ("submultiplicative", erg_submultiplicative),
    ("scrambling iff coefficient < 1", erg_scrambling),
    ("unit rank iff coefficient 0", erg_unit_rank),
    ("convex", erg_convex),
];

pub const PROJECTION_ALPHAS: [f64; 2] = [0.5, 2.0];
pub const PROJECTION_STARTS: usize = 3;

fn proj_case(seed: u64, idx: u64) -> (TransitionMatrix, ProbabilityVector) {
    let mut g = rng(seed, idx);
    let n = 2 + (idx as usize % 7);
    let holes = if idx % 3 == 2 { 0.3 } else { 0.0 };
    (sparse_chain(&mut g, n, holes), pi(&mut g, n))
}

/// Runs the multi-start projection once per order and applies every projection invariant.
pub fn projection_checks(seed: u64, idx: u64) -> Vec<(&'static str, Check)> {
    let (l, w) = proj_case(seed, idx);
    let mut feasible = Ok(());
    let mut kkt = Ok(());
    let mut pythagorean = Ok(());
    let mut unique = Ok(());
    let mut monotone = Ok(());
    let opts = ProjectOptions::default();
    for a in PROJECTION_ALPHAS {
        let runs =
            alpha_project_multistart(&l, &w, a, &opts, PROJECTION_STARTS, seed ^ idx).unwrap();
        let first = &runs[0];
        for run in &runs {
            let c = classify(&run.m_star, &w, 1e-9).unwrap();
            if !c.reversible && feasible.is_ok() {
                feasible = Err(format!("alpha {a}: output is not reversible"));
            }
            if run.converged && !(run.kkt_residual < 1e-6) && kkt.is_ok() {
                kkt = Err(format!("alpha {a}: KKT residual {}", run.kkt_residual));
            }
            if let Some(k) = run.objective_trace.windows(2).position(|s| s[1] > s[0]) {
                if monotone.is_ok() {
                    monotone = Err(format!("alpha {a}: objective rose at step {}", k + 1));
                }
            }
            let spread = max_abs_diff(run.m_star.as_slice(), first.m_star.as_slice());
            if spread > 1e-6 && unique.is_ok() {
                unique = Err(format!("alpha {a}: starts disagree by {spread}"));
            }
        }
        let margin = pythagorean_margin(&l, &w, &first.m_star, a, opts.probes, seed ^ idx).unwrap();
        if margin < -1e-7 && pythagorean.is_ok() {
            pythagorean = Err(format!("alpha {a}, n {}: margin {margin}", l.n()));
        }
    }
    vec![
        ("feasible", feasible),
        ("KKT residual when converged", kkt),
        ("pythagorean inequality", pythagorean),
        ("multi-start agreement", unique),
        ("objective non-increasing", monotone),
    ]
}
