//! Generalized method of moments for marginal models of longitudinal data with
//! time-dependent covariates, where lagged covariate effects are estimated
//! either as one aggregated coefficient, in a few lag groups, or separately
//! for every lag.
//!
//! The pipeline is: load a balanced panel ([`data`]), describe covariate
//! classes and lag groupings ([`design`]), enumerate valid moment conditions
//! and evaluate them ([`moments`]), and run the two-step estimator
//! ([`estimator`]). [`simulate`] reproduces the coverage studies.

pub mod cli;
pub mod data;
pub mod design;
pub mod estimator;
pub mod linalg;
pub mod model_file;
pub mod moments;
pub mod optim;
pub mod simulate;

pub use data::{
    emit_csv, load_csv, validate, CsvSchema, DataError, LongitudinalDataset, OutcomeKind, Violation,
};
pub use design::{
    build_moment_system, classify_valid_pairs, expand_design, CovariateClass, CovariateSpec,
    Design, DesignError, LagGrouping, ModelSpec, MomentCondition, MomentSystem, ParamRole,
    ValidityMatrix,
};
pub use estimator::{
    fit_with_system, sandwich_covariance, two_step_fit, wald_inference, FitError, FitOptions,
    GmmFit, GmmObjective, StartingValues, Steps, Z_975,
};
pub use model_file::{ModelFile, ModelFileError};
pub use moments::{
    linear_predictor, long_run_covariance, mean_response, LinkFunction, MomentError, MomentModel,
};
pub use optim::{bfgs_minimize, Minimum, OptimError, OptimizerOptions};
