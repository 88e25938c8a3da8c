//! Mixing-matrix design for energy-budgeted decentralized learning.
//!
//! Gossip-style decentralized SGD mixes node parameters through a matrix
//! `W = I - B diag(alpha) B^T` supported on a base topology. The number of
//! iterations needed to reach a target accuracy is controlled by the spectral
//! quantity `rho = ||E[W^T W] - J||`, while the per-iteration energy of a node
//! is driven by how many of its links carry nonzero weight. This crate designs
//! the link weights `alpha` to trade those two off:
//!
//! - [`solver`] minimizes `||I - L(alpha) - J||` over the link weights
//!   (optionally with a set of links forced to zero),
//! - [`ramanujan`] builds d-regular expander designs with a closed-form
//!   `rho <= 4(d-1)/d^2` guarantee when the base topology is complete,
//! - [`sparsifier`] greedily zeroes the least important links until every
//!   node fits a per-iteration energy budget,
//! - [`bilevel`] sweeps the budget against the iteration-count model to find
//!   the cheapest total cost per node,
//! - [`dpsgd`] validates any design end-to-end on synthetic least-squares
//!   tasks with exact per-node energy accounting.

pub mod bilevel;
pub mod cost;
pub mod dpsgd;
pub mod ramanujan;
pub mod solver;
pub mod sparsifier;
pub mod spectral;
pub mod topology;

/// A link counts as activated (its endpoints pay communication energy) iff
/// the magnitude of its weight exceeds this threshold. Shared by the cost
/// model, the solver, and the sparsifier so the activation indicator means
/// the same thing everywhere.
pub const ACTIVATION_THRESHOLD: f64 = 1e-9;

/// Derive an independent RNG seed from a base seed and up to three stream
/// coordinates (splitmix64 finalizer chain). Changing one coordinate leaves
/// the streams of all other coordinates untouched, so adding nodes or rows
/// to a run does not perturb existing streams.
pub(crate) fn split_seed(base: u64, tag: u64, a: u64, b: u64) -> u64 {
    let mut z = base;
    for word in [tag, a, b] {
        z ^= word.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    Asymmetric(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid mixing distribution: {0}")]
    Distribution(String),

    #[error("gave up after {attempts} attempts: {what}")]
    AttemptsExhausted { attempts: usize, what: String },

    #[error("graph is not regular: node {node} has degree {got}, expected {expected}")]
    NotRegular {
        node: usize,
        got: usize,
        expected: usize,
    },

    #[error("budget {budget} Wh is below the computation cost {comp} Wh of node {node}")]
    BudgetTooSmall { budget: f64, comp: f64, node: usize },

    #[error("grid search over {free} free links exceeds the supported maximum of {max}")]
    TooManyFreeLinks { free: usize, max: usize },

    #[error("simulation diverged at iteration {iter} (loss {loss:.3e})")]
    Diverged { iter: usize, loss: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
