//! Dyadic structures, Berezin transforms and Cauchy-Fantappie operator
//! experiments on strongly pseudoconvex model domains in `C^n`, `n <= 3`.

pub mod berezin;
pub mod cvec;
pub mod domain;
pub mod dyadic;
pub mod metrics;
pub mod numeric;
pub mod operator_lab;
pub mod oscillation;
pub mod qmc;
pub mod sampling;

pub use cvec::{c64, CMat, CPoint, C64};
pub use domain::{Domain, DomainError, DomainSpec, LeviChart, Projection};
pub use dyadic::{DyadicError, DyadicGrid, DyadicSystem, GridConfig, SampleSpec};
pub use metrics::MetricError;
