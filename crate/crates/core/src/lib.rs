//! Panel stochastic frontier estimation with latent groups.
//!
//! Firms share a time-varying frontier within unobserved groups. The
//! estimator runs sieve regressions per firm, clusters the coefficients with
//! Ward linkage, picks the number of groups by an information criterion,
//! refits each group, and then fits either a half-normal or a two-component
//! half-normal mixture to the firm intercepts.
//!
//! ```no_run
//! use sfgroup::{dgp, pipeline};
//! let (panel, _truth) = dgp::generate(dgp::Design::Dgp2U, 100, 50, 7).unwrap();
//! let est = pipeline::estimate(&panel, &pipeline::PipelineConfig::default()).unwrap();
//! println!("K = {}, {:?}", est.selected_k(), est.choice());
//! ```

pub mod basis;
pub mod dgp;
pub mod error;
pub mod grouping;
pub mod individual;
pub mod inefficiency;
pub mod likelihood;
mod lstsq;
pub mod montecarlo;
pub mod normal;
pub mod optimize;
pub mod panel;
pub mod pipeline;
pub mod post;
pub mod quadrature;

pub use error::{Error, Result};
pub use panel::PanelData;
pub use pipeline::{estimate, Estimate, PipelineConfig};
