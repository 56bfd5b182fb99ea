//! Anomaly detection on correlation-based market graphs.
//!
//! The pipeline turns a panel of asset returns into a sparse market graph,
//! learns the graph's adjacency structure with a small dense autoencoder, and
//! scores every node by its share of Tsallis entropy over the normalized
//! reconstruction errors:
//!
//! 1. [`ingest`] loads and cleans a `date,ASSET1,...` CSV panel and splits it
//!    into named periods.
//! 2. [`corrnet`] computes the Pearson correlation matrix, keeps the top
//!    correlations (winner-take-all percentile cut) and reduces the result to
//!    a spanning forest under the distance `sqrt(2(1 - rho))`.
//! 3. [`graphstats`] summarizes each graph (edges, isolated nodes, degrees,
//!    clustering).
//! 4. [`autoencoder`] trains on the adjacency rows and returns one
//!    reconstruction error per node.
//! 5. [`anomaly`] converts errors into a distribution, computes per-node
//!    Tsallis scores over a grid of `q` and flags outliers.
//! 6. [`stats`] compares per-`q` anomaly counts between periods with Welch
//!    t-tests.
//!
//! [`synthgen`] produces multi-regime one-factor return panels with known
//! anomalous nodes, and [`pipeline`] wires everything together behind a TOML
//! config. See the crate's `examples/` directory for one runnable program per
//! stage.

pub mod anomaly;
pub mod autoencoder;
pub mod corrnet;
pub mod error;
pub mod graphstats;
pub mod ingest;
pub mod pipeline;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
