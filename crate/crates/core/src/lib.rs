//! Electromagnetism-like optimization (EMO) for box-bounded continuous
//! problems, its opposition-based variant (OBEMO), a fourteen-function
//! benchmark suite and a seeded experiment harness with rank-sum statistics.
//!
//! ```
//! use emopt::{benchmarks, emo::EmoParams, opposition, RngStream};
//!
//! let entry = benchmarks::by_id("branin").unwrap();
//! let mut objective = entry.spec.fresh();
//! let params = EmoParams { max_iterations: 50, ..EmoParams::default() };
//! let record = opposition::run_obemo(
//!     &mut objective,
//!     &params,
//!     &opposition::OppositionConfig::default(),
//!     &mut RngStream::new(1),
//! )
//! .unwrap();
//! assert!(record.best_fitness < 0.5);
//! ```

pub mod benchmarks;
pub mod campaign;
pub mod emo;
pub mod error;
pub mod model;
pub mod opposition;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    ObjectiveSpec, Particle, Population, RngStream, ScriptedDraws, SearchSpace, UniformSource,
};
