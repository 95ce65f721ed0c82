//! Weak-form sparse identification of differential equations from noisy samples.

mod changepoint;
pub mod config;
pub mod dictionary;
pub mod error;
pub mod grid;
pub mod ident;
pub mod io;
mod kv;
pub mod linalg;
pub mod metrics;
mod ndutil;
pub mod ode;
pub mod pde;
pub mod regions;
pub mod regression;
pub mod systems;
pub mod test_function;
pub mod weak;

pub use changepoint::{fit_one_junction, junction_cost, JunctionFit};
pub use config::RunConfig;
pub use dictionary::{build_dictionary, Coefficients, Dictionary, EnumerationRule, FeatureSpec};
pub use error::{Error, Result};
pub use grid::{default_names, Axis, GridSpec, ObservationSet};
pub use ident::{weak_ident, CandidateModel, CandidateOutcome, IdentConfig, IdentResult, VariableResult};
pub use io::{load_dataset, save_dataset};
pub use metrics::{
    add_noise, dynamic_error, error_report, theorem1_validation, ErrorReport, NoiseErrorEstimate, NoiseSpec,
};
pub use ode::{integrate, OdeOptions, PolynomialField, Trajectory};
pub use regions::{features_of_interest, leading_scales, select_regions, DynamicRegionSet, ScaleTable};
pub use regression::{
    column_normalize, contribution_scores, cross_validation_error, narrow_fit, subspace_pursuit, trim_once,
    RegressionConfig,
};
pub use systems::{simulate, system, SystemDefinition, SYSTEM_NAMES};
pub use test_function::{
    choose_m_p, sample_kernel, sample_test_function, size_test_function, transition_frequency, AxisKernel, MpChoice,
    SizingConfig, SpectrumChangepoint, TestFunction,
};
pub use weak::{
    assemble, direct_quadrature_reference, quadrature_magnitude, subsample_centers, subsample_count, Centers,
    SubsampleSpec, WeakSystem,
};
