//! JSON chain documents: `{"states": [...], "matrix": [[...]], "pi": [...]}` with `pi` optional.
//! A distribution on its own is `{"states": [...], "pi": [...]}` or a bare array.

use serde::Deserialize;
use serde_json::Value;

use crate::chain::{ProbabilityVector, StateSpace, TransitionMatrix};
use crate::error::{MdkError, Result};

#[derive(Clone, Debug)]
pub struct ChainDocument {
    pub matrix: TransitionMatrix,
    pub pi: Option<ProbabilityVector>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    #[serde(default)]
    states: Option<Vec<String>>,
    matrix: Vec<Vec<Value>>,
    #[serde(default)]
    pi: Option<Vec<Value>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    #[serde(default)]
    states: Option<Vec<String>>,
    pi: Vec<Value>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DistributionForm {
    Bare(Vec<Value>),
    Labelled(RawDistribution),
}

fn parse_error(source: &str, e: serde_json::Error) -> MdkError {
    MdkError::Parse(format!(
        "{source}: line {} column {}: {e}",
        e.line(),
        e.column()
    ))
}

fn number(v: &Value, field: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| MdkError::Parse(format!("{field}: expected a number, got {v}")))?;
    if !x.is_finite() {
        return Err(MdkError::Parse(format!("{field}: {x} is not finite")));
    }
    if x < 0.0 {
        return Err(MdkError::Parse(format!("{field}: {x} is negative")));
    }
    Ok(x)
}

fn numbers(values: &[Value], field: &str) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| number(v, &format!("{field}[{i}]")))
        .collect()
}

fn space_for(states: Option<Vec<String>>, n: usize, source: &str) -> Result<StateSpace> {
    match states {
        Some(labels) if labels.len() != n => Err(MdkError::Parse(format!(
            "{source}: states lists {} labels for {n} rows",
            labels.len()
        ))),
        Some(labels) => {
            StateSpace::new(labels).map_err(|e| MdkError::Parse(format!("{source}: states: {e}")))
        }
        None => StateSpace::indexed(n).map_err(|e| MdkError::Parse(format!("{source}: {e}"))),
    }
}

fn with_source(source: &str, e: MdkError) -> MdkError {
    match e {
        MdkError::Parse(m) => MdkError::Parse(m),
        other => MdkError::Parse(format!("{source}: {other}")),
    }
}

/// Parses and validates a chain document; `source` names the input in error messages.
pub fn parse_chain(text: &str, source: &str) -> Result<ChainDocument> {
    let raw: RawChain = serde_json::from_str(text).map_err(|e| parse_error(source, e))?;
    let n = raw.matrix.len();
    if n == 0 {
        return Err(MdkError::Parse(format!("{source}: matrix is empty")));
    }
    let space = space_for(raw.states, n, source)?;
    let mut rows = Vec::with_capacity(n);
    for (i, row) in raw.matrix.iter().enumerate() {
        if row.len() != n {
            return Err(MdkError::Parse(format!(
                "{source}: matrix[{i}] has {} entries, expected {n}",
                row.len()
            )));
        }
        rows.push(numbers(row, &format!("{source}: matrix[{i}]"))?);
    }
    let matrix = TransitionMatrix::new(space.clone(), rows).map_err(|e| with_source(source, e))?;
    let pi = match raw.pi {
        Some(p) => {
            if p.len() != n {
                return Err(MdkError::Parse(format!(
                    "{source}: pi has {} entries, expected {n}",
                    p.len()
                )));
            }
            let w = numbers(&p, &format!("{source}: pi"))?;
            Some(ProbabilityVector::new(space, w).map_err(|e| with_source(source, e))?)
        }
        None => None,
    };
    Ok(ChainDocument { matrix, pi })
}

/// Parses a distribution; with `space` given, its labels and size must match.
pub fn parse_distribution(
    text: &str,
    source: &str,
    space: Option<&StateSpace>,
) -> Result<ProbabilityVector> {
    let form: DistributionForm = serde_json::from_str(text).map_err(|e| parse_error(source, e))?;
    let (states, values) = match form {
        DistributionForm::Bare(v) => (None, v),
        DistributionForm::Labelled(d) => (d.states, d.pi),
    };
    let w = numbers(&values, &format!("{source}: pi"))?;
    let own = match (states, space) {
        (None, Some(s)) => s.clone(),
        (states, _) => space_for(states, w.len(), source)?,
    };
    if let Some(s) = space {
        if own != *s {
            return Err(MdkError::Parse(format!(
                "{source}: states do not match the chain's state space"
            )));
        }
    }
    ProbabilityVector::new(own, w).map_err(|e| with_source(source, e))
}

/// The document form of a chain, ready for serialization.
pub fn chain_value(matrix: &TransitionMatrix, pi: Option<&ProbabilityVector>) -> Value {
    let mut m = serde_json::Map::new();
    m.insert("states".into(), serde_json::json!(matrix.space().labels()));
    m.insert("matrix".into(), serde_json::json!(matrix.to_rows()));
    if let Some(p) = pi {
        m.insert("pi".into(), serde_json::json!(p.weights()));
    }
    Value::Object(m)
}
