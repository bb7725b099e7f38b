//! Information divergences, ergodicity coefficients, mixing times and hypothesis tests
//! for finite Markov chains.

pub mod chain;
mod dense;
pub mod divergence;
pub mod ergodicity;
pub mod error;
pub mod hypothesis;
pub mod instances;
pub mod io;
pub mod mixing;
mod par;
pub mod projection;
pub mod rng;
pub mod simplex;
pub mod spectral;

pub use chain::{
    cesaro_average, classify, edge_measure, hypercube_walk, matrix_power, metropolis_chain,
    ChainPredicates, EdgeMeasure, ProbabilityVector, StateSpace, TransitionMatrix,
};
pub use divergence::{
    alpha_div, f_div_chains, f_div_measures, named_div, renyi_div, AlphaOrder, DivergenceValue,
    Generator, NamedDivergence,
};
pub use error::{MdkError, Result};
