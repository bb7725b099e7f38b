//! Browser bindings. Every export takes and returns JSON text so the page stays plain JavaScript.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use mdk::chain::{stationary_distribution, ProbabilityVector, TransitionMatrix};
use mdk::ergodicity::{dobrushin_time, dobrushin_tv};
use mdk::hypothesis::{chernoff_curve, chernoff_information};
use mdk::instances::double_well;
use mdk::io::parse_chain;
use mdk::mixing::{divergence_trajectory, MixingDivergence, MixingMode, MixingTime};
use mdk::{MdkError, Result};

const T_CAP: u64 = 1_000_000;

fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v + 0.0)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn time(t: MixingTime) -> Value {
    match t {
        MixingTime::Exact(t) => json!(t),
        MixingTime::ExceededCap => json!("exceeded_cap"),
    }
}

fn chain_with_pi(text: &str, source: &str) -> Result<(TransitionMatrix, ProbabilityVector)> {
    let doc = parse_chain(text, source)?;
    let pi = match doc.pi {
        Some(pi) => pi,
        None => stationary_distribution(&doc.matrix)?,
    };
    Ok((doc.matrix, pi))
}

fn divergence(name: &str, alpha: f64) -> Result<MixingDivergence> {
    match name {
        "tv" => Ok(MixingDivergence::Tv),
        "d-alpha" => Ok(MixingDivergence::DAlpha { alpha }),
        "r-alpha" => Ok(MixingDivergence::RAlpha { alpha }),
        other => Err(MdkError::Domain(format!("unknown divergence {other:?}"))),
    }
}

fn mode(name: &str) -> Result<MixingMode> {
    match name {
        "average" => Ok(MixingMode::Average),
        "worst-case" => Ok(MixingMode::WorstCase),
        "cesaro" => Ok(MixingMode::Cesaro),
        other => Err(MdkError::Domain(format!("unknown mode {other:?}"))),
    }
}

/// Distance to stationarity for t = 1..=t_max.
pub fn mixing_curve_json(
    chain: &str,
    div: &str,
    alpha: f64,
    mode_name: &str,
    t_max: u32,
) -> Result<String> {
    let (p, pi) = chain_with_pi(chain, "chain")?;
    let values = divergence_trajectory(
        &p,
        &pi,
        divergence(div, alpha)?,
        mode(mode_name)?,
        t_max as u64,
    )?;
    let out = json!({
        "pi": pi.weights(),
        "values": values.into_iter().map(number).collect::<Vec<_>>(),
    });
    Ok(out.to_string())
}

/// Chernoff information of two chains sharing the first chain's pi, with the exponent curve.
pub fn chernoff_json(p0: &str, p1: &str, points: u32) -> Result<String> {
    let (m0, pi) = chain_with_pi(p0, "p0")?;
    let m1 = parse_chain(p1, "p1")?.matrix;
    let best = chernoff_information(&m0, &m1, &pi, 1e-10)?;
    let curve = chernoff_curve(&m0, &m1, &pi, points.max(2) as usize)?;
    let out = json!({
        "value": number(best.value),
        "alpha_star": best.alpha_star,
        "curve": curve.into_iter().map(|(a, g)| json!([a, number(g)])).collect::<Vec<_>>(),
    });
    Ok(out.to_string())
}

/// Dobrushin coefficient and Dobrushin mixing time of the three-state double well across inverse temperatures.
pub fn double_well_json(betas: &[f64], eps: f64) -> Result<String> {
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let (p, pi) = double_well(beta)?;
        rows.push(json!({
            "beta": beta,
            "pi": pi.weights(),
            "dobrushin_tv": dobrushin_tv(&p),
            "time": time(dobrushin_time(&p, eps, T_CAP)?),
        }));
    }
    Ok(Value::Array(rows).to_string())
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn mixing_curve(
    chain: &str,
    div: &str,
    alpha: f64,
    mode_name: &str,
    t_max: u32,
) -> std::result::Result<String, JsError> {
    js(mixing_curve_json(chain, div, alpha, mode_name, t_max))
}

#[wasm_bindgen]
pub fn chernoff(p0: &str, p1: &str, points: u32) -> std::result::Result<String, JsError> {
    js(chernoff_json(p0, p1, points))
}

#[wasm_bindgen]
pub fn double_well_profile(betas: &[f64], eps: f64) -> std::result::Result<String, JsError> {
    js(double_well_json(betas, eps))
}
