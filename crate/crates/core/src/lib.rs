//! Median-based ratio-type estimators of a finite population mean under
//! simple random sampling without replacement (SRSWOR).
//!
//! The crate covers the whole pipeline: population parameters
//! ([`population`]), the exact sampling distribution of the sample mean and
//! median ([`enumeration`]), the estimator family itself ([`estimators`]),
//! first-order bias/MSE theory and optimal weights ([`theory`]), a seeded
//! Monte Carlo fallback ([`montecarlo`]) and report tables ([`report`]).

pub mod enumeration;
pub mod error;
pub mod estimators;
pub mod montecarlo;
pub mod population;
pub mod report;
pub mod theory;

pub use enumeration::{
    exact_estimator_moments, exact_estimator_mse, exact_sampling_distribution,
    median_distribution_fast, sample_median, DistributionSummary, ExactEstimatorMoments,
    MedianDistribution,
};
pub use error::{Error, Result};
pub use estimators::{combined_estimate, nu, preset, EstimatorSpec, PresetId};
pub use montecarlo::{mc_run, McConfig, McResult};
pub use population::{load_population, population_params, Population, PopulationParams};
pub use report::{ParameterSet, ReportTable};
pub use theory::{RelativeMoments, WeightSolution};
