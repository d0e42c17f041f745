use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One irregular multivariate series on a fixed `len x sensors` grid.
///
/// Missing cells hold `NaN` and have a zero mask bit; the two always agree.
#[derive(Clone, Debug)]
pub struct IrtsSample {
    id: String,
    len: usize,
    sensors: usize,
    values: Vec<f64>,
    observed: Vec<bool>,
    label: usize,
}

impl PartialEq for IrtsSample {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.len == other.len
            && self.sensors == other.sensors
            && self.label == other.label
            && self.observed == other.observed
            && self.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl IrtsSample {
    /// A sample with every cell missing.
    pub fn empty(id: impl Into<String>, len: usize, sensors: usize, label: usize) -> Self {
        IrtsSample {
            id: id.into(),
            len,
            sensors,
            values: vec![f64::NAN; len * sensors],
            observed: vec![false; len * sensors],
            label,
        }
    }

    /// Build from a dense matrix where `None` marks a missing cell.
    pub fn from_cells(id: impl Into<String>, cells: &[Vec<Option<f64>>], label: usize) -> Result<Self> {
        let len = cells.len();
        let sensors = cells.first().map_or(0, Vec::len);
        let mut s = IrtsSample::empty(id, len, sensors, label);
        for (t, row) in cells.iter().enumerate() {
            if row.len() != sensors {
                return Err(Error::Dimension("ragged sample rows".into()));
            }
            for (k, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    s.observe(t, k, *v)?;
                }
            }
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn set_label(&mut self, label: usize) {
        self.label = label;
    }

    /// Record a finite reading at `(t, sensor)`.
    pub fn observe(&mut self, t: usize, sensor: usize, value: f64) -> Result<()> {
        if t >= self.len || sensor >= self.sensors {
            return Err(Error::Dimension(format!("cell ({t}, {sensor}) outside {}x{} sample", self.len, self.sensors)));
        }
        if !value.is_finite() {
            return Err(Error::Parameter(format!("non-finite reading {value} at ({t}, {sensor})")));
        }
        let i = t * self.sensors + sensor;
        self.values[i] = value;
        self.observed[i] = true;
        Ok(())
    }

    /// Mark a cell missing.
    pub fn clear(&mut self, t: usize, sensor: usize) {
        let i = t * self.sensors + sensor;
        self.values[i] = f64::NAN;
        self.observed[i] = false;
    }

    pub fn get(&self, t: usize, sensor: usize) -> Option<f64> {
        let i = t * self.sensors + sensor;
        self.observed[i].then_some(self.values[i])
    }

    pub fn is_observed(&self, t: usize, sensor: usize) -> bool {
        self.observed[t * self.sensors + sensor]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// Observed readings as `(t, sensor, value)`, time-major.
    pub fn observations(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len * self.sensors)
            .filter(|&i| self.observed[i])
            .map(|i| (i / self.sensors, i % self.sensors, self.values[i]))
    }

    pub(crate) fn map_observed(&mut self, mut f: impl FnMut(usize, f64) -> f64) {
        for i in 0..self.values.len() {
            if self.observed[i] {
                self.values[i] = f(i % self.sensors, self.values[i]);
            }
        }
    }

    /// Pad with missing steps or truncate to `len`.
    pub fn resized(&self, len: usize) -> IrtsSample {
        let mut out = IrtsSample::empty(self.id.clone(), len, self.sensors, self.label);
        let keep = len.min(self.len) * self.sensors;
        out.values[..keep].copy_from_slice(&self.values[..keep]);
        out.observed[..keep].copy_from_slice(&self.observed[..keep]);
        out
    }

    /// Values as an `L x N_s` matrix with missing cells set to 0.
    pub fn values_filled(&self) -> Tensor {
        let data = self.values.iter().zip(&self.observed).map(|(v, &o)| if o { *v } else { 0.0 }).collect();
        Tensor::new(&[self.len, self.sensors], data).expect("sample shape")
    }

    /// `L x N_s` observation mask.
    pub fn time_mask(&self) -> Tensor {
        let data = self.observed.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect();
        Tensor::new(&[self.len, self.sensors], data).expect("sample shape")
    }
}

/// Time mask (`L x N_s`) and sensor mask (`N_s x L`, its transpose).
pub fn build_masks(sample: &IrtsSample) -> (Tensor, Tensor) {
    let m_t = sample.time_mask();
    let m_s = m_t.transpose().expect("2-d mask");
    (m_t, m_s)
}

/// Per-sensor masked statistics used by [`normalize`](super::normalize).
#[derive(Clone, Debug, PartialEq)]
pub struct SensorStats {
    pub observed: usize,
    pub mean: f64,
    pub std: f64,
}

/// A labelled collection of equally shaped samples.
#[derive(Clone, Debug)]
pub struct Dataset {
    samples: Vec<IrtsSample>,
    num_classes: usize,
    seq_len: usize,
    n_sensors: usize,
    pub sensor_names: Option<Vec<String>>,
    pub normalization: Option<Vec<SensorStats>>,
    reads: Arc<AtomicUsize>,
}

impl Dataset {
    pub fn new(samples: Vec<IrtsSample>, num_classes: usize, seq_len: usize, n_sensors: usize) -> Result<Self> {
        if num_classes < 1 {
            return Err(Error::Config("a dataset needs at least one class".into()));
        }
        for s in &samples {
            if s.sensors() != n_sensors || s.len() != seq_len {
                return Err(Error::Dimension(format!(
                    "sample {} is {}x{}, dataset is {}x{}",
                    s.id(),
                    s.len(),
                    s.sensors(),
                    seq_len,
                    n_sensors
                )));
            }
            if s.label() >= num_classes {
                return Err(Error::Config(format!(
                    "sample {} has label {} but there are {num_classes} classes",
                    s.id(),
                    s.label()
                )));
            }
        }
        Ok(Dataset {
            samples,
            num_classes,
            seq_len,
            n_sensors,
            sensor_names: None,
            normalization: None,
            reads: Arc::default(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample access; every call is counted (see [`Dataset::reads`]).
    pub fn samples(&self) -> &[IrtsSample] {
        self.reads.fetch_add(1, Ordering::Relaxed);
        &self.samples
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [IrtsSample] {
        &mut self.samples
    }

    /// Number of times sample data has been handed out.
    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(IrtsSample::label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for s in &self.samples {
            c[s.label()] += 1;
        }
        c
    }

    /// `1 - observed / total` over every cell.
    pub fn missing_ratio(&self) -> f64 {
        let total = self.samples.len() * self.seq_len * self.n_sensors;
        if total == 0 {
            return 0.0;
        }
        let observed: usize = self.samples.iter().map(IrtsSample::observed_count).sum();
        1.0 - observed as f64 / total as f64
    }

    /// A new dataset holding the given samples; it has its own read counter.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            num_classes: self.num_classes,
            seq_len: self.seq_len,
            n_sensors: self.n_sensors,
            sensor_names: self.sensor_names.clone(),
            normalization: self.normalization.clone(),
            reads: Arc::default(),
        }
    }

    /// Pad or truncate every sample to `len` steps.
    pub fn with_length(&self, len: usize) -> Dataset {
        let mut out = self.subset(&[]);
        out.samples = self.samples.iter().map(|s| s.resized(len)).collect();
        out.seq_len = len;
        out
    }

    /// SHA-256 over the canonical content (shape, labels, masks and value bits).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in [self.num_classes, self.seq_len, self.n_sensors, self.samples.len()] {
            h.update((v as u64).to_le_bytes());
        }
        for s in &self.samples {
            h.update(s.id().as_bytes());
            h.update([0]);
            h.update((s.label() as u64).to_le_bytes());
            for i in 0..s.values.len() {
                if s.observed[i] {
                    h.update([1]);
                    h.update(s.values[i].to_le_bytes());
                } else {
                    h.update([0]);
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fully_observed_masks_are_ones() {
        let s = IrtsSample::from_cells("a", &[vec![Some(1.0), Some(2.0)], vec![Some(3.0), Some(4.0)]], 0).unwrap();
        let (mt, ms) = build_masks(&s);
        assert!(mt.data().iter().all(|&v| v == 1.0));
        assert!(ms.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn fully_missing_masks_are_zero() {
        let s = IrtsSample::empty("a", 3, 2, 0);
        let (mt, ms) = build_masks(&s);
        assert!(mt.data().iter().chain(ms.data()).all(|&v| v == 0.0));
        assert!(s.values_filled().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn checker_pattern_and_transpose() {
        let mut s = IrtsSample::empty("a", 4, 3, 0);
        for t in 0..4 {
            for k in 0..3 {
                if (t + k) % 2 == 0 {
                    s.observe(t, k, (t * 3 + k) as f64).unwrap();
                }
            }
        }
        let (mt, ms) = build_masks(&s);
        for t in 0..4 {
            for k in 0..3 {
                let expect = if (t + k) % 2 == 0 { 1.0 } else { 0.0 };
                assert_eq!(mt.at(t, k), expect);
                assert_eq!(ms.at(k, t), expect);
                assert_eq!(s.get(t, k).is_some(), expect == 1.0);
            }
        }
    }

    #[test]
    fn resize_pads_with_missing() {
        let s = IrtsSample::from_cells("a", &[vec![Some(1.0)], vec![Some(2.0)]], 0).unwrap();
        let p = s.resized(4);
        assert_eq!(p.observed_count(), 2);
        assert!(!p.is_observed(3, 0));
        let t = s.resized(1);
        assert_eq!(t.get(0, 0), Some(1.0));
    }

    #[test]
    fn dataset_rejects_bad_labels() {
        let s = IrtsSample::empty("a", 2, 2, 3);
        assert!(Dataset::new(vec![s], 2, 2, 2).is_err());
    }
}
