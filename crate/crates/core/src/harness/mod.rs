//! Training schedule, evaluation, the ablation grid and seeded randomness.

mod ablate;
mod config;
pub mod gradcheck;
mod report;
pub mod seed;
mod train;

pub use ablate::{ablate, AblationAxis, AblationRow, AblationTable};
pub use config::TrainConfig;
pub use report::{EpochRecord, StopReason, TrainReport};
pub use seed::{SeedStreams, Stream};
pub use train::{evaluate, train, Evaluation};
