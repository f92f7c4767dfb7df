//! Source-task selection for contextual MDPs.
//!
//! Every algorithm here works on a [`TransferMatrix`]: the zero-shot
//! performance of a policy trained on source task `x` when evaluated on target
//! task `y`, for every pair of tasks on a discretized context grid. Selectors
//! choose which sources to train on, one per round, seeing only the rows of
//! sources already trained.

pub mod cluster;
pub mod decomposition;
pub mod detection;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gp;
pub mod gp_select;
pub mod grid;
pub mod linreg;
pub mod matrix;
pub mod orchestrate;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
pub use grid::{l1_distance, DistanceWeights, TaskGrid};
pub use matrix::{min_max_normalize, TransferMatrix};
pub use rng::SeededRng;
