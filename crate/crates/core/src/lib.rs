//! Scenario synthesis for renewable generation and hydro inflows.
//!
//! The model chains four pieces:
//!
//! 1. a reflected Gaussian KDE per station ([`marginal`]),
//! 2. a normal-score transform through that KDE ([`transform`]),
//! 3. a linear-Gaussian Bayesian network over the normal scores ([`bnet`]),
//! 4. ancestral sampling with bootstrapped innovations ([`simulate`]).
//!
//! Monthly scenarios can be disaggregated to hourly resolution with
//! PCA-matched historical profiles ([`disagg`]) and checked against history
//! with Fisher's z tests, KS distances and monthly bands ([`validate`]).

pub mod archive;
pub mod bnet;
pub mod config;
pub mod data;
pub mod disagg;
pub mod error;
pub mod fixture;
pub mod marginal;
pub mod normal;
pub mod pipeline;
pub mod simulate;
pub mod transform;
pub mod validate;

pub use archive::ModelArchive;
pub use bnet::{fit_regression, full_count, learn_structure, parameter_count, BayesNet, Dag, NodeRegression};
pub use data::{
    aggregate_to_monthly, load_panel, write_panel, HistoricalPanel, Resolution, StationKind, StationMeta, Timestamp,
    Units,
};
pub use disagg::{disaggregate, fit_disagg, DisaggModel, ProfileLibrary};
pub use config::RunConfig;
pub use error::{Error, ErrorClass, Result};
pub use marginal::{fit_kde, MarginalModel, Support};
pub use simulate::{sample_network, to_original, InflowModel, ScenarioSet};
pub use transform::{forward, inverse, Marginals, NormalPanel};
pub use validate::{build_report, correlation_matrix, fisher_z_pair, ValidationReport};
