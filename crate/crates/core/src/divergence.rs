//! f-divergences, alpha-divergences and Renyi divergences between distributions and between chains.
//!
//! Chain divergences weight the row divergences by pi. Zero-mass conventions: a cell with
//! nu = 0 contributes 0 if mu = 0 and mu * f'(inf) otherwise.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::chain::{edge_measure, same_space, ProbabilityVector, TransitionMatrix, ENTRY_FLOOR};
use crate::error::{MdkError, Result};

/// Extended nonnegative real.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct DivergenceValue(f64);

impl DivergenceValue {
    pub const ZERO: Self = Self(0.0);
    pub const INFINITE: Self = Self(f64::INFINITY);

    /// Rounding can push a mathematically nonnegative sum slightly below zero; such values read as 0.
    pub fn new(v: f64) -> Self {
        debug_assert!(!v.is_nan());
        Self(if v > 0.0 { v } else { 0.0 })
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for DivergenceValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_finite() {
            write!(f, "{}", self.0)
        } else {
            f.write_str("inf")
        }
    }
}

impl Serialize for DivergenceValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("inf")
        }
    }
}

/// Serializers for plain floats that may be infinite: non-finite values become "inf", "-inf" or "nan".
pub mod extended {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn option<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => serialize(x, s),
            None => s.serialize_none(),
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct CustomGenerator {
    name: String,
    f: ScalarFn,
    slope_at_infinity: f64,
}

impl fmt::Debug for CustomGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomGenerator")
            .field("name", &self.name)
            .field("slope_at_infinity", &self.slope_at_infinity)
            .finish()
    }
}

/// Convex generator f with f(1) = 0.
#[derive(Clone, Debug)]
pub enum Generator {
    Alpha(f64),
    Kl,
    Tv,
    Hellinger,
    Chi2,
    Custom(CustomGenerator),
}

impl Generator {
    /// Validated alpha generator.
    pub fn alpha(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Generator::Alpha(alpha))
    }

    /// A caller-supplied generator. Convexity is only probed on a grid, so acceptance is heuristic.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        slope_at_infinity: f64,
    ) -> Result<Self> {
        let g = Generator::Custom(CustomGenerator {
            name: name.into(),
            f: Arc::new(f),
            slope_at_infinity,
        });
        g.validate()?;
        Ok(g)
    }

    pub fn name(&self) -> String {
        match self {
            Generator::Alpha(a) => format!("alpha({a})"),
            Generator::Kl => "kl".into(),
            Generator::Tv => "tv".into(),
            Generator::Hellinger => "hellinger".into(),
            Generator::Chi2 => "chi2".into(),
            Generator::Custom(c) => format!("custom({})", c.name),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Generator::Alpha(a) => (t.powf(*a) - 1.0) / (a - 1.0),
            Generator::Kl => {
                if t == 0.0 {
                    0.0
                } else {
                    t * t.ln()
                }
            }
            Generator::Tv => 0.5 * (t - 1.0).abs(),
            Generator::Hellinger => {
                let d = t.sqrt() - 1.0;
                d * d
            }
            Generator::Chi2 => (t - 1.0) * (t - 1.0),
            Generator::Custom(c) => (c.f)(t),
        }
    }

    /// f'(+inf), the cost per unit of mu mass where nu vanishes.
    pub fn slope_at_infinity(&self) -> f64 {
        match self {
            Generator::Alpha(a) => {
                if *a < 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Generator::Kl | Generator::Chi2 => f64::INFINITY,
            Generator::Tv => 0.5,
            Generator::Hellinger => 1.0,
            Generator::Custom(c) => c.slope_at_infinity,
        }
    }

    /// A subgradient at 1. Subtracting c(t-1) leaves every divergence unchanged and makes terms nonnegative.
    fn tilt(&self) -> f64 {
        match self {
            Generator::Alpha(a) => a / (a - 1.0),
            Generator::Kl => 1.0,
            _ => 0.0,
        }
    }

    /// f(1 + u) - c u, summed as a series near u = 0 where the direct form cancels.
    fn tilted(&self, u: f64, c: f64) -> f64 {
        // below the rounding of the ratio itself
        if u.abs() <= 2.0 * f64::EPSILON && c != 0.0 {
            return 0.0;
        }
        if u.abs() < 0.1 {
            match self {
                Generator::Alpha(a) => {
                    let mut coef = *a;
                    let mut pow = u;
                    let mut sum = 0.0;
                    for k in 2..64 {
                        coef *= (a - (k - 1) as f64) / k as f64;
                        pow *= u;
                        let term = coef * pow;
                        sum += term;
                        if term.abs() <= 1e-18 * sum.abs() {
                            break;
                        }
                    }
                    return sum / (a - 1.0);
                }
                Generator::Kl => {
                    let mut pow = -u;
                    let mut sum = 0.0;
                    for k in 2..64 {
                        pow *= -u;
                        let term = pow / (k * (k - 1)) as f64;
                        sum += term;
                        if term.abs() <= 1e-18 * sum.abs() {
                            break;
                        }
                    }
                    return sum;
                }
                _ => {}
            }
        }
        let r = 1.0 + u;
        self.eval(r) - c * u
    }

    /// f'(t), numeric for custom generators.
    pub(crate) fn derivative(&self, t: f64) -> f64 {
        match self {
            Generator::Alpha(a) => a / (a - 1.0) * t.powf(a - 1.0),
            Generator::Kl => t.ln() + 1.0,
            Generator::Tv => 0.5 * (t - 1.0).signum(),
            Generator::Hellinger => 1.0 - 1.0 / t.sqrt(),
            Generator::Chi2 => 2.0 * (t - 1.0),
            Generator::Custom(c) => {
                let h = 1e-6 * t.max(1e-3);
                ((c.f)(t + h) - (c.f)((t - h).max(0.0))) / (t + h - (t - h).max(0.0))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Generator::Alpha(a) => check_alpha(*a).map_err(|e| MdkError::Generator(e.to_string())),
            Generator::Custom(c) => {
                let f1 = (c.f)(1.0);
                if !(f1.abs() <= 1e-12) {
                    return Err(MdkError::Generator(format!("f(1) = {f1}, expected 0")));
                }
                if c.slope_at_infinity.is_nan() {
                    return Err(MdkError::Generator("f'(inf) is NaN".into()));
                }
                let grid: Vec<f64> = (1..=64).map(|k| 10.0 * k as f64 / 64.0).collect();
                let vals: Vec<f64> = grid.iter().map(|&t| (c.f)(t)).collect();
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(MdkError::Generator("f is not finite on (0, 10]".into()));
                }
                for i in 1..63 {
                    let mid = vals[i];
                    let chord = 0.5 * (vals[i - 1] + vals[i + 1]);
                    if mid > chord + 1e-12 * (1.0 + chord.abs()) {
                        return Err(MdkError::Generator(format!(
                            "midpoint convexity fails near t = {}",
                            grid[i]
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha != 1.0) {
        return Err(MdkError::Domain(format!(
            "alpha = {alpha} must lie in (0,1) or (1,inf)"
        )));
    }
    Ok(())
}

/// Renyi order, numeric or one of the limit points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaOrder {
    Numeric(f64),
    Zero,
    One,
    Infinity,
}

impl AlphaOrder {
    pub fn numeric(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(AlphaOrder::Numeric(alpha))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedDivergence {
    Tv,
    Hellinger2,
    Chi2,
    Kl,
}

/// Raw sum over cells under the zero conventions. Both inputs are assumed to carry unit mass.
pub(crate) fn f_div_slices(mu: &[f64], nu: &[f64], f: &Generator) -> f64 {
    let c = f.tilt();
    let slope = f.slope_at_infinity();
    let mut sum = 0.0;
    let mut orphan = 0.0;
    for (&m, &v) in mu.iter().zip(nu) {
        if v <= ENTRY_FLOOR {
            if m > ENTRY_FLOOR {
                orphan += m;
            }
            continue;
        }
        let u = if m <= ENTRY_FLOOR { -1.0 } else { (m - v) / v };
        sum += v * f.tilted(u, c);
    }
    if orphan > 0.0 {
        if slope.is_infinite() {
            return f64::INFINITY;
        }
        // the tilt integrates to zero only over the full mass, so orphaned mass carries it too
        sum += orphan * (slope - c);
    }
    sum
}

fn check_measures(mu: &ProbabilityVector, nu: &ProbabilityVector) -> Result<()> {
    same_space(mu.space(), nu.space(), "divergence")
}

fn check_chains(m: &TransitionMatrix, l: &TransitionMatrix, pi: &ProbabilityVector) -> Result<()> {
    same_space(m.space(), l.space(), "divergence")?;
    same_space(m.space(), pi.space(), "divergence")?;
    pi.require_strictly_positive()
}

pub fn f_div_measures(
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
    f: &Generator,
) -> Result<DivergenceValue> {
    f.validate()?;
    check_measures(mu, nu)?;
    Ok(DivergenceValue::new(f_div_slices(
        mu.weights(),
        nu.weights(),
        f,
    )))
}

pub(crate) fn f_div_rows(m: &[f64], l: &[f64], pi: &[f64], n: usize, f: &Generator) -> f64 {
    let mut total = 0.0;
    for ((mr, lr), &w) in m.chunks(n).zip(l.chunks(n)).zip(pi) {
        let d = f_div_slices(mr, lr, f);
        if d.is_infinite() {
            return f64::INFINITY;
        }
        total += w * d;
    }
    total
}

pub fn f_div_chains(
    m: &TransitionMatrix,
    l: &TransitionMatrix,
    pi: &ProbabilityVector,
    f: &Generator,
) -> Result<DivergenceValue> {
    f.validate()?;
    check_chains(m, l, pi)?;
    Ok(DivergenceValue::new(f_div_rows(
        m.as_slice(),
        l.as_slice(),
        pi.weights(),
        m.n(),
        f,
    )))
}

pub fn alpha_div(
    m: &TransitionMatrix,
    l: &TransitionMatrix,
    pi: &ProbabilityVector,
    alpha: AlphaOrder,
) -> Result<DivergenceValue> {
    match alpha {
        AlphaOrder::Numeric(a) => f_div_chains(m, l, pi, &Generator::alpha(a)?),
        other => Err(MdkError::Domain(format!(
            "alpha-divergence needs a numeric order, got {other:?}"
        ))),
    }
}

/// Alpha-divergence between the flattened edge measures.
pub fn alpha_div_edge(
    m: &TransitionMatrix,
    l: &TransitionMatrix,
    pi: &ProbabilityVector,
    alpha: f64,
) -> Result<DivergenceValue> {
    let g = Generator::alpha(alpha)?;
    check_chains(m, l, pi)?;
    let em = edge_measure(m, pi)?;
    let el = edge_measure(l, pi)?;
    Ok(DivergenceValue::new(f_div_slices(
        em.as_slice(),
        el.as_slice(),
        &g,
    )))
}

/// sum over cells of w * mu^a * nu^(1-a) on the common support.
fn overlap_sum(mu: &[f64], nu: &[f64], weights: Option<(&[f64], usize)>, alpha: f64) -> f64 {
    let mut s = 0.0;
    for (k, (&m, &v)) in mu.iter().zip(nu).enumerate() {
        if m > ENTRY_FLOOR && v > ENTRY_FLOOR {
            let w = weights.map_or(1.0, |(w, n)| w[k / n]);
            s += w * m.powf(alpha) * v.powf(1.0 - alpha);
        }
    }
    s
}

/// Log map from D_alpha to R_alpha, falling back to the direct overlap sum when the log argument is small.
fn renyi_from_parts(alpha: f64, d: f64, overlap: impl FnOnce() -> f64) -> f64 {
    if d.is_infinite() {
        return f64::INFINITY;
    }
    let x = (alpha - 1.0) * d;
    if x > -0.5 {
        return x.ln_1p() / (alpha - 1.0);
    }
    let s = overlap();
    if s <= 1e-300 {
        return f64::INFINITY;
    }
    s.ln() / (alpha - 1.0)
}

fn renyi_flat(mu: &[f64], nu: &[f64], weights: Option<(&[f64], usize)>, alpha: AlphaOrder) -> f64 {
    match alpha {
        AlphaOrder::Numeric(a) => {
            let g = Generator::Alpha(a);
            let d = match weights {
                Some((w, n)) => f_div_rows(mu, nu, w, n, &g),
                None => f_div_slices(mu, nu, &g),
            };
            renyi_from_parts(a, d, || overlap_sum(mu, nu, weights, a))
        }
        AlphaOrder::Zero => {
            let mut s = 0.0;
            for (k, (&m, &v)) in mu.iter().zip(nu).enumerate() {
                if m > ENTRY_FLOOR {
                    s += weights.map_or(1.0, |(w, n)| w[k / n]) * v;
                }
            }
            if s <= 0.0 {
                f64::INFINITY
            } else {
                -s.ln()
            }
        }
        AlphaOrder::One => match weights {
            Some((w, n)) => f_div_rows(mu, nu, w, n, &Generator::Kl),
            None => f_div_slices(mu, nu, &Generator::Kl),
        },
        AlphaOrder::Infinity => {
            let mut best = 0.0_f64;
            for (&m, &v) in mu.iter().zip(nu) {
                if m > ENTRY_FLOOR {
                    if v <= ENTRY_FLOOR {
                        return f64::INFINITY;
                    }
                    best = best.max(m / v);
                }
            }
            best.ln()
        }
    }
}

/// Renyi divergence of order alpha, optionally pi-weighted over rows of width n.
pub(crate) fn renyi_weighted(
    mu: &[f64],
    nu: &[f64],
    weights: Option<(&[f64], usize)>,
    alpha: f64,
) -> f64 {
    renyi_flat(mu, nu, weights, AlphaOrder::Numeric(alpha))
}

/// Renyi divergence between two distributions.
pub fn renyi_measures(
    mu: &ProbabilityVector,
    nu: &ProbabilityVector,
    alpha: AlphaOrder,
) -> Result<DivergenceValue> {
    if let AlphaOrder::Numeric(a) = alpha {
        check_alpha(a)?;
    }
    check_measures(mu, nu)?;
    Ok(DivergenceValue::new(renyi_flat(
        mu.weights(),
        nu.weights(),
        None,
        alpha,
    )))
}

/// Renyi divergence between chains, defined through their edge measures.
pub fn renyi_div(
    m: &TransitionMatrix,
    l: &TransitionMatrix,
    pi: &ProbabilityVector,
    alpha: AlphaOrder,
) -> Result<DivergenceValue> {
    if let AlphaOrder::Numeric(a) = alpha {
        check_alpha(a)?;
    }
    check_chains(m, l, pi)?;
    let v = renyi_flat(
        m.as_slice(),
        l.as_slice(),
        Some((pi.weights(), m.n())),
        alpha,
    );
    Ok(DivergenceValue::new(v))
}

/// R_alpha from a known D_alpha value.
pub fn renyi_from_alpha_div(alpha: f64, d: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(renyi_from_parts(alpha, d, || {
        (1.0 + (alpha - 1.0) * d).max(0.0)
    }))
}

pub fn named_div(
    m: &TransitionMatrix,
    l: &TransitionMatrix,
    pi: &ProbabilityVector,
    which: NamedDivergence,
) -> Result<DivergenceValue> {
    match which {
        NamedDivergence::Tv => f_div_chains(m, l, pi, &Generator::Tv),
        NamedDivergence::Hellinger2 => f_div_chains(m, l, pi, &Generator::Hellinger),
        NamedDivergence::Chi2 => f_div_chains(m, l, pi, &Generator::Chi2),
        NamedDivergence::Kl => renyi_div(m, l, pi, AlphaOrder::One),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::StateSpace;

    fn pv(w: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(StateSpace::indexed(w.len()).unwrap(), w.to_vec()).unwrap()
    }

    fn pair() -> (TransitionMatrix, TransitionMatrix, ProbabilityVector) {
        let m = TransitionMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let l = TransitionMatrix::from_rows(vec![vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        let pi = ProbabilityVector::uniform(m.space().clone());
        (m, l, pi)
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn measure_examples() {
        let mu = pv(&[0.5, 0.5]);
        let nu = pv(&[0.75, 0.25]);
        let hand = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
        close(
            f_div_measures(&mu, &nu, &Generator::Kl).unwrap().value(),
            hand,
            1e-15,
        );
        close(hand, 0.1438410362, 1e-10);
        assert_eq!(
            f_div_measures(&mu, &mu, &Generator::Chi2).unwrap().value(),
            0.0
        );
        let d = f_div_measures(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0]), &Generator::Alpha(2.0)).unwrap();
        assert!(!d.is_finite());
    }

    #[test]
    fn disjoint_support_below_one() {
        for a in [0.1, 0.5, 0.9] {
            let d =
                f_div_measures(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0]), &Generator::Alpha(a)).unwrap();
            close(d.value(), 1.0 / (1.0 - a), 1e-12);
            let r =
                renyi_measures(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0]), AlphaOrder::Numeric(a)).unwrap();
            assert!(!r.is_finite());
        }
    }

    #[test]
    fn chain_examples() {
        let (m, l, pi) = pair();
        close(
            f_div_chains(&m, &l, &pi, &Generator::Tv).unwrap().value(),
            0.25,
            1e-15,
        );
        close(
            f_div_chains(&m, &l, &pi, &Generator::Kl).unwrap().value(),
            0.1438410362,
            1e-10,
        );
        let d2 = alpha_div(&m, &l, &pi, AlphaOrder::Numeric(2.0))
            .unwrap()
            .value();
        close(d2, 0.25 / 0.75 + 0.25 / 0.25 - 1.0, 1e-15);
        close(d2, 1.0 / 3.0, 1e-15);
        close(
            renyi_div(&m, &l, &pi, AlphaOrder::Numeric(2.0))
                .unwrap()
                .value(),
            (4.0f64 / 3.0).ln(),
            1e-15,
        );
        close(
            renyi_div(&m, &l, &pi, AlphaOrder::One).unwrap().value(),
            0.1438410362,
            1e-10,
        );
        close(
            named_div(&m, &l, &pi, NamedDivergence::Chi2)
                .unwrap()
                .value(),
            1.0 / 3.0,
            1e-15,
        );
        let hel = 2.0 - 2.0 * (0.375f64.sqrt() + 0.125f64.sqrt());
        close(
            named_div(&m, &l, &pi, NamedDivergence::Hellinger2)
                .unwrap()
                .value(),
            hel,
            1e-15,
        );
        close(hel, 0.0682, 1e-4);
        for w in [
            NamedDivergence::Tv,
            NamedDivergence::Hellinger2,
            NamedDivergence::Chi2,
            NamedDivergence::Kl,
        ] {
            assert_eq!(named_div(&l, &l, &pi, w).unwrap().value(), 0.0);
        }
        assert!(alpha_div(&m, &l, &pi, AlphaOrder::Infinity).is_err());
    }

    #[test]
    fn limit_orders_on_zeros() {
        let m = TransitionMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let l = TransitionMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let pi = ProbabilityVector::uniform(m.space().clone());
        assert!(!renyi_div(&m, &l, &pi, AlphaOrder::One).unwrap().is_finite());
        assert!(!renyi_div(&m, &l, &pi, AlphaOrder::Infinity)
            .unwrap()
            .is_finite());
        assert!(!named_div(&m, &l, &pi, NamedDivergence::Chi2)
            .unwrap()
            .is_finite());
        // mass of L on the support of M is 1, so the order-zero limit vanishes
        assert_eq!(
            renyi_div(&m, &l, &pi, AlphaOrder::Zero).unwrap().value(),
            0.0
        );
        let r0 = renyi_div(&l, &m, &pi, AlphaOrder::Zero).unwrap().value();
        close(r0, -(0.75f64).ln(), 1e-15);
    }

    #[test]
    fn custom_generator_checks() {
        let g = Generator::custom(
            "kl-copy",
            |t: f64| if t == 0.0 { 0.0 } else { t * t.ln() },
            f64::INFINITY,
        )
        .unwrap();
        let (m, l, pi) = pair();
        close(
            f_div_chains(&m, &l, &pi, &g).unwrap().value(),
            0.1438410362,
            1e-10,
        );
        assert!(Generator::custom("shifted", |t: f64| t * t, f64::INFINITY).is_err());
        assert!(Generator::custom("concave", |t: f64| -(t - 1.0) * (t - 1.0), 0.0).is_err());
        assert!(Generator::alpha(1.0).is_err());
        assert!(Generator::alpha(-0.5).is_err());
    }

    #[test]
    fn renyi_log_map() {
        close(
            renyi_from_alpha_div(2.0, 1.0 / 3.0).unwrap(),
            (4.0f64 / 3.0).ln(),
            1e-15,
        );
        assert!(renyi_from_alpha_div(0.5, 2.0).unwrap().is_infinite());
        assert!(renyi_from_alpha_div(3.0, f64::INFINITY)
            .unwrap()
            .is_infinite());
    }
}
