use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::sample::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, stream};

/// Leave-random-sensor-out settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub drop_ratio: f64,
    pub seed: u64,
}

/// Sensors dropped for `spec`: a prefix of one seeded permutation, so the set
/// only grows with the ratio.
pub fn dropped_sensors(n_sensors: usize, spec: &CorruptionSpec) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&spec.drop_ratio) {
        return Err(Error::Parameter(format!("drop ratio {} outside [0, 1]", spec.drop_ratio)));
    }
    let mut perm: Vec<usize> = (0..n_sensors).collect();
    perm.shuffle(&mut rng_from(derive_seed(spec.seed, stream::CORRUPT)));
    let count = (spec.drop_ratio * n_sensors as f64).round() as usize;
    let mut chosen = perm[..count.min(n_sensors)].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Zero the readings and masks of one shared sensor subset in every sample.
/// Returns the corrupted copy and the dropped sensor indices.
pub fn leave_random_sensor_out(dataset: &Dataset, spec: &CorruptionSpec) -> Result<(Dataset, Vec<usize>)> {
    let dropped = dropped_sensors(dataset.n_sensors(), spec)?;
    let mut out = dataset.subset(&(0..dataset.len()).collect::<Vec<_>>());
    for s in out.samples_mut() {
        for t in 0..s.len() {
            for &k in &dropped {
                s.clear(t, k);
            }
        }
    }
    Ok((out, dropped))
}
