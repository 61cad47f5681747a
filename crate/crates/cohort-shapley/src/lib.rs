//! Variable importance from observed data only.
//!
//! The centerpiece is cohort Shapley: for a target observation, each
//! feature subset selects the cohort of rows similar to the target on those
//! features, the value of a subset is the (possibly weighted) mean response
//! over its cohort, and Shapley values attribute the gap between the fully
//! refined cohort mean and the grand mean to individual features. No
//! synthetic or hybrid input combinations are ever evaluated.
//!
//! Supporting machinery: functional ANOVA and Sobol' indices on finite
//! product grids with pick-freeze estimators, plain and Monte Carlo Shapley
//! over arbitrary value oracles, Bayesian-bootstrap uncertainty by
//! exponential reweighting, group aggregation, and deterministic report
//! emission for command-line fairness audits.

pub mod aggregate;
pub mod anova;
pub mod attribute;
pub mod bitset;
pub mod bootstrap;
pub mod cohort;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pickfreeze;
pub mod report;
pub mod response;
pub mod shapley;
pub mod similarity;
pub mod subset;

pub use aggregate::{
    aggregate_groups, conditional_attribution, GroupAggregate, GroupDef, GroupTerm,
};
pub use anova::{
    anova, shapley_effects, sobol_closed, sobol_total, AnovaDecomposition, GridDim, ProductGrid,
    VarianceComponents,
};
pub use attribute::{
    all_targets, attributions_for, baseline_shapley, cohort_shapley, CohortOracle, EstimationMode,
    FnEvaluator, FunctionEvaluator,
};
pub use bitset::Bitset;
pub use bootstrap::{
    bb_weights, bootstrap_attributions, bootstrap_with_weights, summarize, BootstrapRun,
    BootstrapSeries, BootstrapTask, FeatureSummary,
};
pub use cohort::{cohort, cohort_value, lattice_cohorts, lattice_values, CohortSet, ValueTable};
pub use config::{BootstrapConfig, HistogramConfig, RunConfig, SobolConfig, TargetSel};
pub use dataset::{
    bin_continuous, load_table, BinSpec, ColumnData, ColumnRole, Dataset, FeatureColumn,
    TableSchema,
};
pub use error::{Error, Result};
pub use pickfreeze::{jansen_total, pick_freeze_closed, IndependentSampler, SobolEstimate};
pub use response::{confusion, make_response, ConfusionCounts, ResponseKind, ResponseVector};
pub use shapley::{
    exact_shapley, exact_shapley_from_table, incremental, mc_shapley, CachedOracle, GameKind,
    Method, ShapleyAttribution, TableOracle, ValueOracle,
};
pub use similarity::{build_mask, SimilarityMask, SimilarityRule, SimilaritySpec};
pub use subset::{FeatureSet, EXACT_LIMIT};
