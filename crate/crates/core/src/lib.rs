//! Planning, simulation and analysis toolkit for staged warehouse data
//! pipelines.
//!
//! - [`staging`]: SSD staging-tier sizing, feasibility and energy.
//! - [`placement`]: discrete-event simulator for managed data placement.
//! - [`pca`]: correlation-PCA schema design.
//! - [`chunk`]: chunked CSV datastore and a fault-tolerant MapReduce executor.
//! - [`stats`]: OLS fitting, summary statistics and ANOVA.
//! - [`config`], [`run`] and [`report`]: run configuration, execution and
//!   report emission.

pub mod chunk;
pub mod config;
pub mod linalg;
pub mod pca;
pub mod placement;
pub mod report;
pub mod run;
pub mod staging;
pub mod stats;
pub mod units;
