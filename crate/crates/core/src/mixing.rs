//! Mixing times to stationarity measured by TV, alpha- and Renyi divergences, with spectral bounds
//! and the average/worst-case and Cesaro comparisons.

use serde::{Serialize, Serializer};

use crate::chain::{
    classify, same_space, ProbabilityVector, TransitionMatrix, STOCHASTIC_TOL, STRUCTURAL_TOL,
};
use crate::dense;
use crate::divergence::{
    check_alpha, f_div_slices, renyi_from_alpha_div, DivergenceValue, Generator,
};
use crate::ergodicity::dobrushin_tv;
use crate::error::{MdkError, Result};
use crate::par;
use crate::spectral::spectrum_reversible;

pub const DEFAULT_T_CAP: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingDivergence {
    Tv,
    DAlpha { alpha: f64 },
    RAlpha { alpha: f64 },
}

impl MixingDivergence {
    fn validate(self) -> Result<()> {
        match self {
            MixingDivergence::Tv => Ok(()),
            MixingDivergence::DAlpha { alpha } | MixingDivergence::RAlpha { alpha } => {
                check_alpha(alpha)
            }
        }
    }

    fn generator(self) -> Generator {
        match self {
            MixingDivergence::Tv => Generator::Tv,
            MixingDivergence::DAlpha { alpha } | MixingDivergence::RAlpha { alpha } => {
                Generator::Alpha(alpha)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingMode {
    Average,
    WorstCase,
    Cesaro,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixingQuery {
    pub divergence: MixingDivergence,
    pub epsilon: f64,
    pub mode: MixingMode,
    pub t_cap: u64,
}

impl MixingQuery {
    pub fn new(divergence: MixingDivergence, epsilon: f64, mode: MixingMode) -> Self {
        Self {
            divergence,
            epsilon,
            mode,
            t_cap: DEFAULT_T_CAP,
        }
    }

    pub fn with_cap(mut self, t_cap: u64) -> Self {
        self.t_cap = t_cap;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixingTime {
    Exact(u64),
    ExceededCap,
}

impl MixingTime {
    pub fn exact(self) -> Option<u64> {
        match self {
            MixingTime::Exact(t) => Some(t),
            MixingTime::ExceededCap => None,
        }
    }
}

impl Serialize for MixingTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MixingTime::Exact(t) => s.serialize_u64(*t),
            MixingTime::ExceededCap => s.serialize_str("exceeded_cap"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralBounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub applicable: bool,
    pub reason: String,
    pub epsilon_condition_met: bool,
    /// Lower bound above upper bound: both valid, the window is empty.
    pub inverted: bool,
    pub gamma_star: Option<f64>,
}

impl SpectralBounds {
    fn unavailable(reason: impl Into<String>) -> Self {
        Self {
            lower: None,
            upper: None,
            applicable: false,
            reason: reason.into(),
            epsilon_condition_met: false,
            inverted: false,
            gamma_star: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingReport {
    pub query: MixingQuery,
    pub t_exact: MixingTime,
    pub divergence_at_t: DivergenceValue,
    pub bound_upper: Option<f64>,
    pub bound_lower: Option<f64>,
    pub bounds_applicable: bool,
    pub bounds_reason: String,
    pub epsilon_condition_met: bool,
    pub bounds_inverted: bool,
    /// lower <= t_exact <= upper, evaluated when bounds apply and the scan terminated.
    pub sandwich_holds: Option<bool>,
}

/// epsilon' with t^{R_alpha}(epsilon) = t^{D_alpha}(epsilon').
pub fn transport_epsilon(alpha: f64, epsilon: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(((alpha - 1.0) * epsilon).exp_m1() / (alpha - 1.0))
}

/// Divergence of every row of q from pi, reduced by the mode: pi-average or max.
fn row_reduce(q: &[f64], pi: &[f64], n: usize, g: &Generator, worst: bool) -> f64 {
    let mut acc = 0.0_f64;
    for (row, &w) in q.chunks(n).zip(pi) {
        let d = f_div_slices(row, pi, g);
        if worst {
            acc = acc.max(d);
        } else {
            acc += w * d;
        }
    }
    acc.max(0.0)
}

/// Divergence in the scale used for the comparison (D_alpha for Renyi queries).
fn scan_value(q: &[f64], pi: &[f64], n: usize, div: MixingDivergence, mode: MixingMode) -> f64 {
    row_reduce(q, pi, n, &div.generator(), mode == MixingMode::WorstCase)
}

fn reported(div: MixingDivergence, v: f64) -> DivergenceValue {
    match div {
        MixingDivergence::RAlpha { alpha } => {
            DivergenceValue::new(renyi_from_alpha_div(alpha, v).unwrap_or(f64::NAN))
        }
        _ => DivergenceValue::new(v),
    }
}

fn scan_threshold(div: MixingDivergence, epsilon: f64) -> Result<f64> {
    match div {
        MixingDivergence::RAlpha { alpha } => transport_epsilon(alpha, epsilon),
        _ => Ok(epsilon),
    }
}

/// Walks t = 1, 2, ... calling `visit(t, matrix)` on P^t or its Cesaro average until it returns true.
fn walk<F: FnMut(u64, &[f64]) -> bool>(
    p: &TransitionMatrix,
    cesaro: bool,
    t_max: u64,
    mut visit: F,
) -> Option<u64> {
    let n = p.n();
    let mut power = p.as_slice().to_vec();
    let mut next = vec![0.0; n * n];
    let mut sum = power.clone();
    let mut avg = vec![0.0; n * n];
    for t in 1..=t_max {
        if t > 1 {
            dense::matmul_into(&power, p.as_slice(), &mut next, n);
            std::mem::swap(&mut power, &mut next);
            if dense::max_row_drift(&power, n) > STOCHASTIC_TOL {
                dense::renormalize_rows(&mut power, n);
            }
            if cesaro {
                sum.iter_mut().zip(&power).for_each(|(s, v)| *s += v);
            }
        }
        let q: &[f64] = if cesaro {
            let inv = 1.0 / t as f64;
            avg.iter_mut().zip(&sum).for_each(|(a, s)| *a = s * inv);
            &avg
        } else {
            &power
        };
        if visit(t, q) {
            return Some(t);
        }
    }
    None
}

fn check_inputs(p: &TransitionMatrix, pi: &ProbabilityVector) -> Result<()> {
    same_space(p.space(), pi.space(), "mixing")?;
    pi.require_strictly_positive()
}

/// First t >= 1 whose divergence falls below epsilon, plus the value there (or at the cap).
fn scan(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    q: &MixingQuery,
) -> Result<(MixingTime, DivergenceValue)> {
    check_inputs(p, pi)?;
    q.divergence.validate()?;
    if !(q.epsilon > 0.0) {
        return Err(MdkError::Domain(format!(
            "epsilon = {} must be positive",
            q.epsilon
        )));
    }
    if q.t_cap == 0 {
        return Err(MdkError::Domain("t_cap must be positive".into()));
    }
    let threshold = scan_threshold(q.divergence, q.epsilon)?;
    let n = p.n();
    let mut last = 0.0;
    let hit = walk(p, q.mode == MixingMode::Cesaro, q.t_cap, |_, m| {
        last = scan_value(m, pi.weights(), n, q.divergence, q.mode);
        last < threshold
    });
    let t = hit.map_or(MixingTime::ExceededCap, MixingTime::Exact);
    Ok((t, reported(q.divergence, last)))
}

/// Divergence from stationarity at t = 1..=t_max, in the query's own scale.
pub fn divergence_trajectory(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    divergence: MixingDivergence,
    mode: MixingMode,
    t_max: u64,
) -> Result<Vec<f64>> {
    check_inputs(p, pi)?;
    divergence.validate()?;
    let n = p.n();
    let mut out = Vec::with_capacity(t_max as usize);
    walk(p, mode == MixingMode::Cesaro, t_max, |_, m| {
        out.push(reported(divergence, scan_value(m, pi.weights(), n, divergence, mode)).value());
        false
    });
    Ok(out)
}

pub fn mixing_time(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    q: &MixingQuery,
) -> Result<MixingReport> {
    let (t_exact, divergence_at_t) = scan(p, pi, q)?;
    let bounds = match (q.mode, q.divergence) {
        (MixingMode::Average, MixingDivergence::DAlpha { alpha }) => {
            spectral_bounds_d_alpha(p, pi, alpha, q.epsilon)?
        }
        (MixingMode::Average, MixingDivergence::RAlpha { alpha }) => {
            spectral_bounds_r_alpha(p, pi, alpha, q.epsilon)?
        }
        _ => SpectralBounds::unavailable("no spectral bound for this divergence and mode"),
    };
    let sandwich_holds = match (bounds.applicable, t_exact, bounds.lower, bounds.upper) {
        (true, MixingTime::Exact(t), Some(lo), Some(hi)) => Some(lo <= t as f64 && t as f64 <= hi),
        _ => None,
    };
    Ok(MixingReport {
        query: *q,
        t_exact,
        divergence_at_t,
        bound_upper: bounds.upper.filter(|_| bounds.applicable),
        bound_lower: bounds.lower.filter(|_| bounds.applicable),
        bounds_applicable: bounds.applicable,
        bounds_reason: bounds.reason,
        epsilon_condition_met: bounds.epsilon_condition_met,
        bounds_inverted: bounds.inverted,
        sandwich_holds,
    })
}

/// Independent queries against one chain, fanned out across workers.
pub fn mixing_times(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    queries: &[MixingQuery],
) -> Vec<Result<MixingReport>> {
    par::map_indices(queries.len(), |i| mixing_time(p, pi, &queries[i]))
}

/// Absolute spectral gap when P is irreducible, aperiodic and pi-reversible.
fn gap_if_applicable(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
) -> Result<std::result::Result<f64, String>> {
    check_inputs(p, pi)?;
    let c = classify(p, pi, STRUCTURAL_TOL)?;
    if !c.irreducible {
        return Ok(Err("chain is not irreducible".into()));
    }
    if !c.aperiodic {
        return Ok(Err("chain is not aperiodic".into()));
    }
    if !c.reversible {
        return Ok(Err("chain is not pi-reversible".into()));
    }
    let s = match spectrum_reversible(p, pi) {
        Ok(s) => s,
        Err(e) => return Ok(Err(e.to_string())),
    };
    if !(s.gamma_star > 0.0) {
        return Ok(Err("absolute spectral gap is zero".into()));
    }
    Ok(Ok(s.gamma_star))
}

/// Largest epsilon (exclusive) for which the alpha-divergence spectral bounds hold.
pub fn d_alpha_epsilon_limit(alpha: f64) -> f64 {
    let a = (alpha - 1.0).abs();
    (1.0 / (2.0 * a)).min(4.0 * alpha / a)
}

fn lower_factor(gamma: f64) -> f64 {
    // 1 / (2 ln(1/(1-gamma))), zero in the degenerate gamma = 1 case
    if gamma >= 1.0 {
        0.0
    } else {
        1.0 / (2.0 * (-(-gamma).ln_1p()))
    }
}

/// Spectral sandwich for the pi-weighted alpha-divergence mixing time.
pub fn spectral_bounds_d_alpha(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    alpha: f64,
    epsilon: f64,
) -> Result<SpectralBounds> {
    check_alpha(alpha)?;
    if !(epsilon > 0.0) {
        return Err(MdkError::Domain(format!(
            "epsilon = {epsilon} must be positive"
        )));
    }
    let gamma = match gap_if_applicable(p, pi)? {
        Ok(g) => g,
        Err(reason) => return Ok(SpectralBounds::unavailable(reason)),
    };
    let pmin = pi.min();
    let (upper_const, lower_const) = if alpha > 1.0 {
        (2.0 * alpha / ((alpha - 1.0) * pmin), pmin * pmin / 8.0)
    } else {
        (
            8.0 * alpha / ((1.0 - alpha) * pmin),
            pmin * pmin * alpha / 16.0,
        )
    };
    let log_inv = -epsilon.ln();
    let upper = (upper_const.ln() + log_inv) / gamma;
    let lower = (lower_factor(gamma) * (lower_const.ln() + log_inv)).max(0.0);
    let cond = epsilon < d_alpha_epsilon_limit(alpha);
    Ok(SpectralBounds {
        lower: Some(lower),
        upper: Some(upper),
        applicable: cond,
        reason: if cond {
            "ok".into()
        } else {
            "epsilon condition fails".into()
        },
        epsilon_condition_met: cond,
        inverted: lower > upper,
        gamma_star: Some(gamma),
    })
}

/// Spectral sandwich for the pi-weighted Renyi mixing time.
pub fn spectral_bounds_r_alpha(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    alpha: f64,
    epsilon: f64,
) -> Result<SpectralBounds> {
    check_alpha(alpha)?;
    if !(epsilon > 0.0) {
        return Err(MdkError::Domain(format!(
            "epsilon = {epsilon} must be positive"
        )));
    }
    let gamma = match gap_if_applicable(p, pi)? {
        Ok(g) => g,
        Err(reason) => return Ok(SpectralBounds::unavailable(reason)),
    };
    let pmin = pi.min();
    let growth = ((alpha - 1.0) * epsilon).exp_m1();
    let (upper_const, lower_const, tail) = if alpha > 1.0 {
        (
            2.0 * alpha / pmin,
            (alpha - 1.0) * pmin * pmin / 8.0,
            -growth.ln(),
        )
    } else {
        (
            8.0 * alpha / pmin,
            pmin * pmin * alpha * (1.0 - alpha) / 16.0,
            -(-growth).ln(),
        )
    };
    let upper = (upper_const.ln() + tail) / gamma;
    let lower = (lower_factor(gamma) * (lower_const.ln() + tail)).max(0.0);
    let limit = d_alpha_epsilon_limit(alpha);
    let cond = epsilon < limit;
    let transported_ok = transport_epsilon(alpha, epsilon)? < limit;
    let applicable = cond && transported_ok;
    let reason = match (cond, transported_ok) {
        (true, true) => "ok",
        (false, _) => "epsilon condition fails",
        (true, false) => "transported epsilon violates the alpha-divergence condition",
    };
    Ok(SpectralBounds {
        lower: Some(lower),
        upper: Some(upper),
        applicable,
        reason: reason.into(),
        epsilon_condition_met: cond,
        inverted: lower > upper,
        gamma_star: Some(gamma),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    NotApplicable,
}

impl Verdict {
    fn of(ok: bool) -> Self {
        if ok {
            Verdict::Holds
        } else {
            Verdict::Violated
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRecord {
    pub divergence: MixingDivergence,
    pub epsilon: f64,
    pub threshold: Option<f64>,
    pub constant: Option<f64>,
    /// constant * worst-case time
    pub lhs: Option<f64>,
    /// average time
    pub mid: Option<u64>,
    /// worst-case time
    pub rhs: Option<u64>,
    pub holds: Verdict,
    pub reason: String,
}

/// Epsilon threshold below which the average/worst-case comparison is asserted.
pub fn comparison_threshold(divergence: MixingDivergence, pi_min: f64) -> f64 {
    let eps0 = |alpha: f64| {
        let a = (alpha - 1.0).abs();
        let p6 = pi_min.powi(6);
        d_alpha_epsilon_limit(alpha)
            .min(a * p6 / (128.0 * alpha))
            .min(alpha * a * p6 / 2048.0)
    };
    match divergence {
        MixingDivergence::Tv => pi_min.powi(3) / 4.0,
        MixingDivergence::DAlpha { alpha } => eps0(alpha),
        MixingDivergence::RAlpha { alpha } => ((alpha - 1.0) * eps0(alpha)).ln_1p() / (alpha - 1.0),
    }
}

/// Average versus worst-case mixing time comparison.
pub fn comparison_check(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    divergence: MixingDivergence,
    epsilon: f64,
) -> Result<ComparisonRecord> {
    comparison_check_capped(p, pi, divergence, epsilon, DEFAULT_T_CAP)
}

pub fn comparison_check_capped(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    divergence: MixingDivergence,
    epsilon: f64,
    t_cap: u64,
) -> Result<ComparisonRecord> {
    divergence.validate()?;
    let mut rec = ComparisonRecord {
        divergence,
        epsilon,
        threshold: None,
        constant: None,
        lhs: None,
        mid: None,
        rhs: None,
        holds: Verdict::NotApplicable,
        reason: String::new(),
    };
    let gamma = match gap_if_applicable(p, pi)? {
        Ok(g) => g,
        Err(reason) => {
            rec.reason = reason;
            return Ok(rec);
        }
    };
    let threshold = comparison_threshold(divergence, pi.min());
    rec.threshold = Some(threshold);
    if !(epsilon < threshold) {
        rec.reason = "epsilon is not below the threshold".into();
        return Ok(rec);
    }
    let constant = match divergence {
        MixingDivergence::Tv => (1.0 - gamma) / 2.0,
        _ => (1.0 - gamma) / 4.0,
    };
    rec.constant = Some(constant);
    let avg = mixing_time(
        p,
        pi,
        &MixingQuery::new(divergence, epsilon, MixingMode::Average).with_cap(t_cap),
    )?;
    let worst = mixing_time(
        p,
        pi,
        &MixingQuery::new(divergence, epsilon, MixingMode::WorstCase).with_cap(t_cap),
    )?;
    match (avg.t_exact, worst.t_exact) {
        (MixingTime::Exact(a), MixingTime::Exact(w)) => {
            let lhs = constant * w as f64;
            rec.lhs = Some(lhs);
            rec.mid = Some(a);
            rec.rhs = Some(w);
            rec.holds = Verdict::of(lhs <= a as f64 && a <= w);
            rec.reason = "ok".into();
        }
        _ => rec.reason = "mixing time exceeded the cap".into(),
    }
    Ok(rec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CesaroBound {
    pub name: String,
    pub alpha: Option<f64>,
    pub exact: Option<u64>,
    pub bound: Option<f64>,
    pub margin: Option<f64>,
    pub holds: Verdict,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CesaroRecord {
    pub epsilon: f64,
    pub theta: f64,
    pub prefactor: Option<f64>,
    pub bounds: Vec<CesaroBound>,
}

impl CesaroBound {
    fn not_applicable(name: &str, alpha: Option<f64>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            alpha,
            exact: None,
            bound: None,
            margin: None,
            holds: Verdict::NotApplicable,
            reason: reason.into(),
        }
    }

    fn evaluated(name: &str, alpha: Option<f64>, exact: u64, bound: f64) -> Self {
        Self {
            name: name.into(),
            alpha,
            exact: Some(exact),
            bound: Some(bound),
            margin: Some(bound - exact as f64),
            holds: Verdict::of(exact as f64 <= bound),
            reason: "ok".into(),
        }
    }
}

/// Cesaro mixing-time bounds against ordinary mixing times, for each displayed bound whose hypotheses hold.
pub fn cesaro_bound_check(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    epsilon: f64,
    theta: Option<f64>,
    alphas: &[f64],
) -> Result<CesaroRecord> {
    cesaro_bound_check_capped(p, pi, epsilon, theta, alphas, DEFAULT_T_CAP)
}

pub fn cesaro_bound_check_capped(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    epsilon: f64,
    theta: Option<f64>,
    alphas: &[f64],
    t_cap: u64,
) -> Result<CesaroRecord> {
    check_inputs(p, pi)?;
    if !(epsilon > 0.0) {
        return Err(MdkError::Domain(format!(
            "epsilon = {epsilon} must be positive"
        )));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    let eta = dobrushin_tv(p);
    let theta = theta.unwrap_or(eta);
    let mut rec = CesaroRecord {
        epsilon,
        theta,
        prefactor: (epsilon < 0.5).then(|| 1.0 / (epsilon * (1.0 - 2.0 * epsilon))),
        bounds: Vec::new(),
    };
    let c = classify(p, pi, STRUCTURAL_TOL)?;
    let names: Vec<(&str, Option<f64>)> = std::iter::once(("tv_worst_case", None))
        .chain(std::iter::once(("tv_scrambling", None)))
        .chain(alphas.iter().map(|&a| ("d_alpha_scrambling", Some(a))))
        .chain(alphas.iter().map(|&a| ("r_alpha_scrambling", Some(a))))
        .collect();
    if !(c.irreducible && c.stationary) {
        rec.bounds = names
            .into_iter()
            .map(|(n, a)| {
                CesaroBound::not_applicable(n, a, "chain must be irreducible and pi-stationary")
            })
            .collect();
        return Ok(rec);
    }
    let time = |div: MixingDivergence, mode: MixingMode| -> Result<Option<u64>> {
        Ok(
            scan(p, pi, &MixingQuery::new(div, epsilon, mode).with_cap(t_cap))?
                .0
                .exact(),
        )
    };
    let ces_tv = time(MixingDivergence::Tv, MixingMode::Cesaro)?;

    let first = match (
        rec.prefactor,
        ces_tv,
        time(MixingDivergence::Tv, MixingMode::WorstCase)?,
    ) {
        (None, _, _) => CesaroBound::not_applicable("tv_worst_case", None, "needs epsilon < 1/2"),
        (Some(k), Some(tc), Some(tw)) => {
            CesaroBound::evaluated("tv_worst_case", None, tc, k * tw as f64)
        }
        _ => CesaroBound::not_applicable("tv_worst_case", None, "mixing time exceeded the cap"),
    };
    rec.bounds.push(first);

    let scrambling_reason = if !(theta < 1.0) {
        Some("needs theta < 1 (scrambling chain)".to_string())
    } else if eta > theta {
        Some(format!("Dobrushin coefficient {eta} exceeds theta"))
    } else {
        None
    };
    let tail = 1.0 / (1.0 - theta);
    rec.bounds.push(
        match (
            &scrambling_reason,
            ces_tv,
            time(MixingDivergence::Tv, MixingMode::Average)?,
        ) {
            (Some(r), _, _) => CesaroBound::not_applicable("tv_scrambling", None, r.clone()),
            (None, Some(tc), Some(ta)) => {
                CesaroBound::evaluated("tv_scrambling", None, tc, ta as f64 / epsilon + tail)
            }
            _ => CesaroBound::not_applicable("tv_scrambling", None, "mixing time exceeded the cap"),
        },
    );
    let projector = TransitionMatrix::projector(pi);
    for (kind, alpha) in names.iter().skip(2).map(|(k, a)| (*k, a.unwrap())) {
        let renyi = kind == "r_alpha_scrambling";
        if let Some(r) = &scrambling_reason {
            rec.bounds
                .push(CesaroBound::not_applicable(kind, Some(alpha), r.clone()));
            continue;
        }
        let d_p = crate::divergence::alpha_div(
            p,
            &projector,
            pi,
            crate::divergence::AlphaOrder::Numeric(alpha),
        )?
        .value();
        if !d_p.is_finite() {
            rec.bounds.push(CesaroBound::not_applicable(
                kind,
                Some(alpha),
                "D_alpha(P||Pi) is infinite",
            ));
            continue;
        }
        let div = if renyi {
            MixingDivergence::RAlpha { alpha }
        } else {
            MixingDivergence::DAlpha { alpha }
        };
        let entry = match (
            time(div, MixingMode::Cesaro)?,
            time(div, MixingMode::Average)?,
        ) {
            (Some(tc), Some(ta)) => {
                let factor = if renyi {
                    (1.0 + epsilon) / epsilon * d_p
                } else {
                    d_p / epsilon
                };
                CesaroBound::evaluated(kind, Some(alpha), tc, factor * ta as f64 + tail)
            }
            _ => CesaroBound::not_applicable(kind, Some(alpha), "mixing time exceeded the cap"),
        };
        rec.bounds.push(entry);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::hypercube_walk;

    fn uniform(rows: Vec<Vec<f64>>) -> (TransitionMatrix, ProbabilityVector) {
        let p = TransitionMatrix::from_rows(rows).unwrap();
        let pi = ProbabilityVector::uniform(p.space().clone());
        (p, pi)
    }

    #[test]
    fn projector_mixes_at_once() {
        let (p, pi) = uniform(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        for div in [
            MixingDivergence::Tv,
            MixingDivergence::DAlpha { alpha: 2.0 },
            MixingDivergence::RAlpha { alpha: 0.5 },
        ] {
            for mode in [
                MixingMode::Average,
                MixingMode::WorstCase,
                MixingMode::Cesaro,
            ] {
                let r = mixing_time(&p, &pi, &MixingQuery::new(div, 1e-6, mode)).unwrap();
                assert_eq!(r.t_exact, MixingTime::Exact(1));
            }
        }
    }

    #[test]
    fn flip_never_mixes_but_cesaro_does() {
        let (p, pi) = uniform(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let q = MixingQuery::new(MixingDivergence::Tv, 0.49, MixingMode::Average).with_cap(10_000);
        let r = mixing_time(&p, &pi, &q).unwrap();
        assert_eq!(r.t_exact, MixingTime::ExceededCap);
        assert_eq!(r.divergence_at_t.value(), 0.5);
        // Cesaro TV at t is 0 for even t and 1/(2t) for odd t; first below 0.3 is t = 2
        let q = MixingQuery::new(MixingDivergence::Tv, 0.3, MixingMode::Cesaro);
        assert_eq!(
            mixing_time(&p, &pi, &q).unwrap().t_exact,
            MixingTime::Exact(2)
        );
        assert!(mixing_time(
            &p,
            &pi,
            &MixingQuery::new(MixingDivergence::Tv, 0.0, MixingMode::Average)
        )
        .is_err());
    }

    #[test]
    fn hypercube_bound_values() {
        let (p, pi) = hypercube_walk(2).unwrap();
        let b = spectral_bounds_d_alpha(&p, &pi, 2.0, 1e-3).unwrap();
        assert!(b.applicable);
        let expected = 2.0 * (16f64.ln() + 1000f64.ln());
        assert!((b.upper.unwrap() - expected).abs() < 1e-12);
        assert!((expected - 19.36069).abs() < 1e-5);
    }

    #[test]
    fn transport_examples() {
        assert!((transport_epsilon(2.0, 0.1).unwrap() - (0.1f64.exp() - 1.0)).abs() < 1e-16);
        assert!((transport_epsilon(2.0, 0.1).unwrap() - 0.1051709).abs() < 1e-7);
        let e = transport_epsilon(0.5, 0.1).unwrap();
        assert!((e - (1.0 - (-0.05f64).exp()) / 0.5).abs() < 1e-16 && e > 0.0);
    }

    #[test]
    fn bound_condition_and_degenerate_gap() {
        let (p, pi) = hypercube_walk(2).unwrap();
        assert!(
            !spectral_bounds_d_alpha(&p, &pi, 2.0, 0.5)
                .unwrap()
                .applicable
        );
        assert!(
            !spectral_bounds_r_alpha(&p, &pi, 2.0, 0.5)
                .unwrap()
                .applicable
        );
        let (q, qi) = uniform(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let b = spectral_bounds_d_alpha(&q, &qi, 2.0, 1e-3).unwrap();
        assert_eq!(b.lower, Some(0.0));
    }

    #[test]
    fn comparison_examples() {
        let (p, pi) = uniform(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let r = comparison_check(&p, &pi, MixingDivergence::Tv, 1e-3).unwrap();
        assert_eq!((r.mid, r.rhs, r.holds), (Some(1), Some(1), Verdict::Holds));
        let (h, hpi) = hypercube_walk(3).unwrap();
        let r = comparison_check(&h, &hpi, MixingDivergence::Tv, 0.4).unwrap();
        assert_eq!(r.holds, Verdict::NotApplicable);
    }

    #[test]
    fn cesaro_prefactor() {
        let (p, pi) = uniform(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let r = cesaro_bound_check(&p, &pi, 0.25, None, &[2.0]).unwrap();
        assert_eq!(r.prefactor, Some(8.0));
        assert_eq!(r.bounds[0].exact, Some(1));
        assert_eq!(r.bounds[0].bound, Some(8.0));
        assert!(r.bounds.iter().all(|b| b.holds == Verdict::Holds));
    }

    #[test]
    fn trajectory_matches_scan() {
        let (p, pi) = hypercube_walk(2).unwrap();
        let div = MixingDivergence::RAlpha { alpha: 2.0 };
        let traj = divergence_trajectory(&p, &pi, div, MixingMode::Average, 40).unwrap();
        let r = mixing_time(&p, &pi, &MixingQuery::new(div, 1e-3, MixingMode::Average)).unwrap();
        let t = r.t_exact.exact().unwrap() as usize;
        assert!(traj[t - 1] < 1e-3 && traj[t - 2] >= 1e-3);
        assert_eq!(traj[t - 1], r.divergence_at_t.value());
    }
}
