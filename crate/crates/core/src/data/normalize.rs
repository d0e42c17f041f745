use super::sample::{Dataset, SensorStats};

/// Result of [`normalize`].
#[derive(Clone, Debug)]
pub struct Normalized {
    pub dataset: Dataset,
    /// Sensors with no observations anywhere; left untouched.
    pub empty_sensors: usize,
}

/// Masked per-sensor statistics (population std).
pub fn sensor_stats(dataset: &Dataset) -> Vec<SensorStats> {
    let n = dataset.n_sensors();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for s in dataset.samples() {
        for (_, k, v) in s.observations() {
            sum[k] += v;
            count[k] += 1;
        }
    }
    let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let mut sq = vec![0.0; n];
    for s in dataset.samples() {
        for (_, k, v) in s.observations() {
            sq[k] += (v - mean[k]).powi(2);
        }
    }
    (0..n)
        .map(|k| SensorStats {
            observed: count[k],
            mean: mean[k],
            std: if count[k] > 0 { (sq[k] / count[k] as f64).sqrt() } else { 0.0 },
        })
        .collect()
}

/// Z-score observed readings per sensor. Missing cells stay missing;
/// zero-variance sensors are only centred.
pub fn normalize(dataset: &Dataset) -> Normalized {
    normalize_with(dataset, &sensor_stats(dataset))
}

/// [`normalize`] with statistics fitted elsewhere, for example on a
/// training split.
pub fn normalize_with(dataset: &Dataset, stats: &[SensorStats]) -> Normalized {
    let stats = stats.to_vec();
    let mut out = dataset.subset(&(0..dataset.len()).collect::<Vec<_>>());
    for s in out.samples_mut() {
        s.map_observed(|k, v| {
            let st = &stats[k];
            if st.std > 0.0 {
                (v - st.mean) / st.std
            } else {
                v - st.mean
            }
        });
    }
    let empty_sensors = stats.iter().filter(|s| s.observed == 0).count();
    out.normalization = Some(stats);
    Normalized { dataset: out, empty_sensors }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::IrtsSample;

    #[test]
    fn two_point_z_score() {
        let a = IrtsSample::from_cells("a", &[vec![Some(2.0), None]], 0).unwrap();
        let b = IrtsSample::from_cells("b", &[vec![Some(4.0), None]], 0).unwrap();
        let d = Dataset::new(vec![a, b], 1, 1, 2).unwrap();
        let n = normalize(&d);
        assert_eq!(n.dataset.samples()[0].get(0, 0), Some(-1.0));
        assert_eq!(n.dataset.samples()[1].get(0, 0), Some(1.0));
        assert_eq!(n.empty_sensors, 1);
        assert!(!n.dataset.samples()[0].is_observed(0, 1));
    }

    #[test]
    fn constant_sensor_is_centred() {
        let a = IrtsSample::from_cells("a", &[vec![Some(3.0)], vec![Some(3.0)]], 0).unwrap();
        let d = Dataset::new(vec![a], 1, 2, 1).unwrap();
        let n = normalize(&d);
        assert_eq!(n.dataset.samples()[0].get(1, 0), Some(0.0));
    }

    #[test]
    fn masked_moments_after_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples = (0..40)
            .map(|i| {
                let cells: Vec<Vec<Option<f64>>> = (0..6)
                    .map(|_| {
                        (0..3).map(|k| rng.gen_bool(0.5).then(|| rng.gen_range(0.0..10.0) * (k + 1) as f64)).collect()
                    })
                    .collect();
                IrtsSample::from_cells(format!("s{i}"), &cells, 0).unwrap()
            })
            .collect();
        let d = Dataset::new(samples, 1, 6, 3).unwrap();
        let before: Vec<Vec<bool>> =
            d.samples().iter().map(|s| (0..18).map(|i| s.is_observed(i / 3, i % 3)).collect()).collect();
        let n = normalize(&d).dataset;
        for st in sensor_stats(&n) {
            assert!(st.mean.abs() < 1e-12);
            assert!((st.std - 1.0).abs() < 1e-12);
        }
        let after: Vec<Vec<bool>> =
            n.samples().iter().map(|s| (0..18).map(|i| s.is_observed(i / 3, i % 3)).collect()).collect();
        assert_eq!(before, after);
    }
}
