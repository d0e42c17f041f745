//! Irregular series ingestion, masks, synthetic corpora and corruption.

mod corrupt;
mod folds;
mod normalize;
mod sample;
mod synth;
mod triplet;

pub use corrupt::{dropped_sensors, leave_random_sensor_out, CorruptionSpec};
pub use folds::{stratified_kfold, Fold};
pub use normalize::{normalize, normalize_with, sensor_stats, Normalized};
pub use sample::{build_masks, Dataset, IrtsSample, SensorStats};
pub use synth::{gen_synthetic, Regime, SyntheticSpec};
pub use triplet::{load_triplets, parse_triplets, save_triplets, write_triplets, Loaded};
