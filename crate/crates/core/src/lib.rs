//! Delayed-dither stochastic extremum seeking.
//!
//! The crate simulates a zeroth-order optimizer that queries only `J(x_k)`
//! and correlates objective differences with the previous two-point dither
//! draw. Around it sit an ensemble runner for Monte Carlo statistics and
//! the moment machinery used to predict and bound those statistics.
//!
//! ```
//! use tdes::dither::DitherSpec;
//! use tdes::dynamics::{AlgoParams, System};
//! use tdes::ensemble::{run, EnsembleConfig, InitSpec};
//! use tdes::objectives::{make_paper_objective, ObjectiveId, ObjectiveParams};
//!
//! let obj = make_paper_objective(
//!     ObjectiveId::Quad1d,
//!     &ObjectiveParams { center: vec![25.0], hessian: None },
//! )?;
//! let params = AlgoParams::new(0.12, 0.75, 1e-7, DitherSpec::new(30.25, 0.01)?)?;
//! let config = EnsembleConfig {
//!     n_traj: 500,
//!     n_steps: 60,
//!     seed: 1,
//!     x0: InitSpec::Fixed { value: vec![-40.0] },
//!     y0: InitSpec::Uniform { low: -5.0, high: 10.0 },
//!     system: System::Adaptive1d(params),
//!     threads: None,
//! };
//! let stats = run(&config, &obj)?;
//! assert!((stats.mean_x()[60] - 25.0).abs() < 1.0);
//! # Ok::<(), tdes::Error>(())
//! ```

pub mod analysis;
pub mod cli;
pub mod dither;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod objectives;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dither.md")]
    mod dither {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/ensembles.md")]
    mod ensembles {}
    #[doc = include_str!("../../../book/src/moments.md")]
    mod moments {}
    #[doc = include_str!("../../../book/src/feasibility.md")]
    mod feasibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
