//! Panel-data toolkit for productivity/output growth regressions of the form
//! `p = a + b·q`, where `p` is labour-productivity growth and `q` is output
//! growth for one entity (region) and period.
//!
//! The crate covers the whole pipeline: loading regional level panels from
//! CSV, building growth rates, four panel estimators (pooled OLS, fixed
//! effects, random effects, difference GMM), the usual specification tests
//! between them, Fisher-type panel unit-root tests built on Phillips–Perron
//! statistics, a synthetic-panel Monte Carlo harness, and fixed-layout report
//! rendering used by the `verdoorn` command-line tool.

pub mod cli;
pub mod estimators;
pub mod montecarlo;
pub mod numerics;
pub mod panel;
pub mod report;
pub mod specification;
pub mod unit_root;

pub use estimators::{
    estimate_dpd_gmm, estimate_fixed_effects, estimate_ols, estimate_random_effects, Coefficient,
    DpdOptions, EstimateResult, Method,
};
pub use montecarlo::{generate_panel, run_study, DgpSpec, McSummary, StudyTarget};
pub use panel::{GrowthKind, GrowthPanel, GrowthRow, PanelDataset, Schema};
pub use specification::{
    corr_effects_regressors, test_fe_vs_ols, test_hausman, test_re_vs_ols, Distribution, Tail,
    TestResult,
};
pub use unit_root::{
    fisher_combine, pp_test_entity, select_lags, unit_root_report, EntityUnitRootStat,
    FisherCombination, LagPolicy, UnitRootReport, Variable,
};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate observation for entity {entity:?}, period {period}")]
    DuplicateObservation { entity: String, period: i64 },
    #[error("column {0:?} not found in header")]
    UnknownColumn(String),
    #[error("degenerate regressor: {0}")]
    DegenerateRegressor(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{rows} usable rows cannot identify {instruments} instruments")]
    TooFewRows { rows: usize, instruments: usize },
    #[error("series of length {length} is too short; need at least {required}")]
    SeriesTooShort { length: usize, required: usize },
    #[error("inputs were computed from different panels: {0}")]
    Mismatch(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
