use thiserror::Error;

use crate::lattice::Vec2;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("unknown high-symmetry label `{0}` (expected one of G, K, M)")]
    UnknownLabel(String),

    #[error("paper-mode eigenvalues require alpha = 1 (got {0})")]
    PaperModeAlpha(f64),

    #[error("no non-degenerate well in papermode: c1 = {c1}, c2 = {c2}")]
    NoPaperWell { c1: f64, c2: f64 },

    #[error("assumption 1 fails: {0}")]
    Assumption1(String),

    #[error("eigensolver did not converge: {0}")]
    NonConvergence(String),

    #[error("band gap closes at k = ({:.6}, {:.6}): gap {gap:e}", k.x, k.y)]
    GapClosure { k: Vec2, gap: f64 },

    #[error("grid is not symmetric under k -> -k")]
    AsymmetricGrid,

    #[error("fit needs at least {needed} positive points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("nonpositive width {0:e} in exponential fit")]
    NonPositiveWidth(f64),

    #[error("finite-difference grid under-resolved: n = {0} < 64")]
    UnderResolved(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
