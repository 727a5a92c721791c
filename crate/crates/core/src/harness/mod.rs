//! Experiment orchestration: training-set construction, the training loop,
//! BER evaluation, NVE-based training-SNR selection, timing, and the grid
//! runner that writes result files.

mod config;
mod eval;
mod experiment;
mod gradcheck;
mod nve;
mod subset;
mod timing;
mod train;

pub use config::ExperimentConfig;
pub use eval::{codebook_ber, nnd_ber, Restrict};
pub use experiment::{
    run_experiment, BerRow, EvalReport, IncompleteCell, MapRow, Metadata, NveRow, RhoChoice,
    StepRow, TimingRow, REPORT_FORMAT_VERSION,
};
pub use gradcheck::{check_target, GradCheckSetup, GradTarget};
pub use nve::{compute_nve, select_training_snr, SnrSelection};
pub use subset::{make_training_subset, sample_batch, subset_size, TrainingSubset};
pub use timing::{time_per_sample, Direction};
pub use train::{is_log_step, train, train_from, Checkpoint, LossPoint, TrainSetup, TrainingPool};
