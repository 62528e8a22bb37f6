//! Bergman projection on the ball, its Nyström discretization, the
//! Cauchy-Fantappiè kernel, commutators `[b, P]` and their norm and
//! compactness diagnostics.

mod cf;
mod commutator;
mod projection;

pub use cf::{kerzman_stein_residual, CfError, CfKernel, CfTerms};
pub use commutator::{
    commutator_apply, commutator_norm_l2, compactness_diagnostic, conj_hankel_adjoint_apply, dense_commutator,
    dictionary_lower_bound, hankel_apply, peaking_commutator_curve, test_dictionary, CompactnessReport, NormEstimate,
    PowerOptions,
};
pub use projection::{bergman_kernel, bergman_kernel_ball, discretize_projection, nystrom_cloud, ProjectionDiscretization, ProjectorMode};

pub use crate::berezin::carleson_ratio;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("the explicit Bergman kernel is only available on the unit ball")]
    NotBall,
    #[error("Nyström idempotence residual {residual:.3e} exceeds {bound:.3e}; refine the cloud")]
    CloudTooCoarse { residual: f64, bound: f64 },
    #[error("{points} points exceed the dense limit {limit} for this mode")]
    TooLarge { points: usize, limit: usize },
    #[error("power iteration stalled at {estimate:.6e} after {iterations} iterations")]
    Stagnation { estimate: f64, iterations: usize },
    #[error("need p >= 1, got {0}")]
    BadExponent(f64),
    #[error("cuts must be strictly decreasing")]
    BadCuts,
    #[error(transparent)]
    Berezin(#[from] crate::berezin::BerezinError),
}
