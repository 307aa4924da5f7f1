//! Graph-autoencoder least-squares Petrov-Galerkin model reduction.
//!
//! The crate covers the whole offline/online pipeline:
//!
//! - [`fom`]: finite-volume full-order models (1D Burgers, 2D Euler) that
//!   produce snapshot trajectories.
//! - [`mesh`] and [`coarsen`]: the level-0 radius graph over cell centers and
//!   the hierarchy of spectrally clustered reduced graphs.
//! - [`ae`]: the graph autoencoder (message passing + pooling encoder,
//!   unpooling + message passing decoder) and its training loop.
//! - [`rom`]: POD bases and Gauss-Newton LSPG time integration on either a
//!   linear subspace or the decoder manifold.
//! - [`metrics`], [`snapshot`], [`manifest`]: error measures, on-disk formats
//!   and run manifests; [`cli`] binds them into the `gdlspg` binary.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod ae;
pub mod cli;
pub mod coarsen;
pub mod error;
pub mod fom;
pub mod manifest;
pub mod mesh;
pub mod metrics;
pub mod num;
pub mod presets;
pub mod rom;
pub mod snapshot;

mod binio;

pub use error::{Error, Result};
