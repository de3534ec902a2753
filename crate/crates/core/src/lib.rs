//! Frequentist analysis of single-arm basket trials.
//!
//! One-sample Mantel-Haenszel estimators of a common effect against
//! basket-specific null rates, an exact test of the global null, a
//! homogeneity test, GIC-based selection of basket subclasses and the
//! simulation studies used to assess them.
//!
//! ```
//! use basket_core::{mh_fit, Basket, BasketTable, EffectScale};
//!
//! let table = BasketTable::new(vec![
//!     Basket::new("NSCLC", 2, 19, 0.15),
//!     Basket::new("ECD/LCH", 6, 14, 0.15),
//! ])
//! .unwrap();
//! let fit = mh_fit(&table, EffectScale::RD, 0.05).unwrap();
//! assert!(fit.ci_low < fit.point && fit.point < fit.ci_high);
//! ```

#![no_std]

extern crate alloc;

pub mod error;
pub mod estimators;
pub mod exact_test;
pub mod gic;
pub mod gof;
pub mod partition;
pub mod rng;
pub mod scale;
pub mod simulation;
pub mod special;
pub mod table;

pub use error::{Error, Result};
pub use estimators::{
    basket_effects, clopper_pearson, mh_components, mh_estimate, mh_fit, mh_variance,
    misspecification_limit, unbiased_rate_variance, wald_ci, EffectEstimate, MhComponents,
};
pub use exact_test::{
    exact_test, null_distribution, p_value, p_value_add_one, statistic, ExactConfig,
    ExactTestResult, NullDistribution, NullMethod, TestMethod,
};
pub use gic::{
    model_gic, rank_models, subclass_gic, summarize_models, BiasConvention, GicConfig, GicRanking,
    GicResult, RankOptions, RankedModel, RankingSummary, SubclassFit,
};
pub use gof::{gof_test, gof_test_with, GofResult, GofVariant};
pub use partition::{
    bell_number, canonicalize_partition, enumerate_models, for_each_model, EnumerationLimits,
    Partition, Strategy,
};
pub use scale::{EffectScale, LinkFunction, WeightPolicy};
pub use simulation::{
    generate_dataset, run_estimation_study, run_identification_study, EstimationMetrics,
    IdentificationMetrics, ScenarioSpec, Truth,
};
pub use table::{validate_table, Basket, BasketTable};
