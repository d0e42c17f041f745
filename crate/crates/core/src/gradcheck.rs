//! Central-difference gradient verification.
//!
//! [`finite_diff_grad`] is the generic oracle. [`check_model`] compares it
//! against the tape for every weight of a model and [`suite`] runs that over
//! all variants and view combinations of a base configuration.

use std::fmt;

use crate::autodiff::{OpKind, Tape};
use crate::data::{gen_synthetic, IrtsSample, Regime, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, MvFormer, Session, Switches, Variant, COMPONENT_ROWS};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Default step.
pub const STEP: f64 = 1e-5;
/// Pass threshold on the worst relative error.
pub const TOLERANCE: f64 = 1e-4;
/// Coordinates whose gradient is smaller than this are not compared.
pub const MIN_MAGNITUDE: f64 = 1e-8;
/// Step of the extrapolated estimate used to re-check coordinates where the
/// plain difference at [`STEP`] is dominated by rounding.
pub const REFINE_STEP: f64 = 1e-3;
/// Smallest step tried when a difference crosses a ReLU kink.
pub const MIN_STEP: f64 = 1e-9;

/// `(f(θ+h) - f(θ-h)) / 2h` for every coordinate of parameter `id`.
///
/// The store is perturbed in place and restored before returning.
pub fn finite_diff_grad(
    store: &mut ParamStore,
    id: ParamId,
    h: f64,
    mut f: impl FnMut(&ParamStore) -> Result<f64>,
) -> Result<Tensor> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Parameter(format!("finite-difference step must be positive, got {h}")));
    }
    let shape = store.get(id).shape().to_vec();
    let n = store.get(id).len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let orig = store.get(id).data()[i];
        store.get_mut(id).data_mut()[i] = orig + h;
        let plus = f(store);
        store.get_mut(id).data_mut()[i] = orig - h;
        let minus = f(store);
        store.get_mut(id).data_mut()[i] = orig;
        out.push((plus? - minus?) / (2.0 * h));
    }
    Tensor::new(&shape, out)
}

/// Richardson-extrapolated central difference for one coordinate:
/// `(4 D(h) - D(2h)) / 3`, accurate to `O(h^4)`.
pub fn richardson_coord(
    store: &mut ParamStore,
    id: ParamId,
    index: usize,
    h: f64,
    mut f: impl FnMut(&ParamStore) -> Result<f64>,
) -> Result<f64> {
    let orig = store.get(id).data()[index];
    let mut at = |delta: f64| -> Result<f64> {
        store.get_mut(id).data_mut()[index] = orig + delta;
        let v = f(store);
        store.get_mut(id).data_mut()[index] = orig;
        v
    };
    let d1 = (at(h)? - at(-h)?) / (2.0 * h);
    let d2 = (at(2.0 * h)? - at(-2.0 * h)?) / (4.0 * h);
    Ok((4.0 * d1 - d2) / 3.0)
}

/// `|a - b| / max(|a|, |b|)`, or 0 when both are below [`MIN_MAGNITUDE`].
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < MIN_MAGNITUDE {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Worst coordinate of one parameter tensor.
#[derive(Clone, Debug)]
pub struct GroupResult {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Coordinates above [`MIN_MAGNITUDE`].
    pub compared: usize,
    /// Coordinates re-estimated with [`richardson_coord`].
    pub refined: usize,
    /// Coordinates within [`MIN_STEP`] of a ReLU kink.
    pub skipped: usize,
}

#[derive(Clone, Debug)]
pub struct ModelCheck {
    pub label: String,
    pub groups: Vec<GroupResult>,
    pub fault: Option<OpKind>,
}

impl ModelCheck {
    pub fn worst(&self) -> Option<&GroupResult> {
        self.groups.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }

    pub fn max_rel_error(&self) -> f64 {
        self.worst().map_or(0.0, |g| g.max_rel_error)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error() < tol
    }
}

impl fmt::Display for ModelCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.label)?;
        for g in &self.groups {
            write!(f, "  {:<32} {:.3e}  ({} coords, {} refined", g.name, g.max_rel_error, g.compared, g.refined)?;
            if g.skipped > 0 {
                write!(f, ", {} at a kink", g.skipped)?;
            }
            writeln!(f, ")")?;
        }
        Ok(())
    }
}

/// Mean loss over `samples` with per-class weights of one, and the ReLU
/// activation pattern it was computed under.
fn loss_value(model: &MvFormer, params: &ParamStore, samples: &[&IrtsSample]) -> Result<(f64, Vec<bool>)> {
    let mut s = Session::with_params(model, params, Tape::new());
    let l = s.batch_loss(samples, &[])?;
    Ok((s.tape.value(l).data()[0], s.tape.relu_pattern()))
}

/// One coordinate of a model's loss, perturbed in place.
struct Probe<'a> {
    model: &'a MvFormer,
    samples: &'a [&'a IrtsSample],
    store: ParamStore,
    pattern: Vec<bool>,
}

impl Probe<'_> {
    /// Loss at `θ_i + delta`, or `None` if some ReLU input changed sign.
    fn at(&mut self, id: ParamId, i: usize, delta: f64) -> Result<Option<f64>> {
        let orig = self.store.get(id).data()[i];
        self.store.get_mut(id).data_mut()[i] = orig + delta;
        let r = loss_value(self.model, &self.store, self.samples);
        self.store.get_mut(id).data_mut()[i] = orig;
        let (v, pattern) = r?;
        Ok((pattern == self.pattern).then_some(v))
    }

    fn central(&mut self, id: ParamId, i: usize, h: f64) -> Result<Option<f64>> {
        match (self.at(id, i, h)?, self.at(id, i, -h)?) {
            (Some(p), Some(m)) => Ok(Some((p - m) / (2.0 * h))),
            _ => Ok(None),
        }
    }

    fn richardson(&mut self, id: ParamId, i: usize, h: f64) -> Result<Option<f64>> {
        match (self.central(id, i, h)?, self.central(id, i, 2.0 * h)?) {
            (Some(d1), Some(d2)) => Ok(Some((4.0 * d1 - d2) / 3.0)),
            _ => Ok(None),
        }
    }
}

/// Compare tape gradients to central differences for every weight of
/// `model` on the mean loss over `samples`. With `fault`, the tape's backward
/// rule for that op is deliberately wrong.
///
/// A difference whose two evaluations put some ReLU input on the other side
/// of zero is retried with a step ten times smaller, down to [`MIN_STEP`].
/// Coordinates still crossing a kink there are counted as `skipped`.
pub fn check_model(
    model: &MvFormer,
    samples: &[IrtsSample],
    h: f64,
    fault: Option<OpKind>,
    label: impl Into<String>,
) -> Result<ModelCheck> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Parameter(format!("finite-difference step must be positive, got {h}")));
    }
    let refs: Vec<&IrtsSample> = samples.iter().collect();
    let tape = fault.map_or_else(Tape::new, Tape::with_fault);
    let mut s = Session::with_tape(model, tape);
    let loss = s.batch_loss(&refs, &[])?;
    let analytic = s.gradients(loss)?;

    let store = model.params().clone();
    let (_, pattern) = loss_value(model, &store, &refs)?;
    let ids: Vec<ParamId> = store.ids().collect();
    let mut probe = Probe { model, samples: &refs, store, pattern };
    let mut groups = Vec::with_capacity(ids.len());
    for (id, grad) in ids.into_iter().zip(analytic) {
        let mut g = GroupResult {
            name: probe.store.name(id).to_string(),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            compared: 0,
            refined: 0,
            skipped: 0,
        };
        for (i, &a) in grad.data().iter().enumerate() {
            let mut step = h;
            let mut numeric = None;
            while step >= MIN_STEP {
                numeric = probe.central(id, i, step)?;
                if numeric.is_some() {
                    break;
                }
                step /= 10.0;
            }
            let Some(mut n) = numeric else {
                g.skipped += 1;
                continue;
            };
            if a.abs().max(n.abs()) >= MIN_MAGNITUDE {
                g.compared += 1;
            }
            let mut e = relative_error(a, n);
            if e >= TOLERANCE / 10.0 && step == h {
                let mut rh = REFINE_STEP;
                while rh > h {
                    if let Some(r) = probe.richardson(id, i, rh)? {
                        n = r;
                        e = relative_error(a, n);
                        g.refined += 1;
                        break;
                    }
                    rh /= 10.0;
                }
            }
            if e > g.max_rel_error || i == 0 {
                g.max_rel_error = e;
                g.worst_index = i;
                g.analytic = a;
                g.numeric = n;
            }
        }
        groups.push(g);
    }
    Ok(ModelCheck { label: label.into(), groups, fault })
}

/// Two small samples of the given shape, one per class, with a mix of
/// observed and missing cells.
///
/// Every time step and every sensor has at least one observation.
pub fn probe_samples(config: &ModelConfig, seed: u64) -> Result<Vec<IrtsSample>> {
    let spec = SyntheticSpec {
        n_samples: 2,
        seq_len: config.seq_len,
        n_sensors: config.n_sensors,
        num_classes: config.num_classes,
        seed,
        ..SyntheticSpec::default_for(Regime::Nirts)
    };
    let mut samples = gen_synthetic(&spec)?.samples().to_vec();
    let (len, sensors) = (config.seq_len, config.n_sensors);
    for x in &mut samples {
        for s in 0..sensors {
            if (0..len).all(|t| !x.is_observed(t, s)) {
                x.observe(s % len, s, 0.25 * (s as f64 + 1.0))?;
            }
        }
        for t in 0..len {
            if (0..sensors).all(|s| !x.is_observed(t, s)) {
                x.observe(t, t % sensors, -0.5 + 0.1 * t as f64)?;
            }
        }
    }
    Ok(samples)
}

/// Every variant with all views on, then each per-component ablation row.
pub fn suite_configs(base: &ModelConfig) -> Vec<(String, ModelConfig)> {
    let mut out: Vec<(String, ModelConfig)> = Variant::ALL
        .iter()
        .map(|&v| (v.to_string(), base.clone().with_variant(v).with_switches(Switches::FULL)))
        .collect();
    for row in COMPONENT_ROWS {
        out.push((row.to_string(), base.component_row(row).expect("known row")));
    }
    out
}

/// Check every configuration from [`suite_configs`] whose label passes
/// `filter`.
pub fn suite(
    base: &ModelConfig,
    seed: u64,
    fault: Option<OpKind>,
    mut filter: impl FnMut(&str, &ModelConfig) -> bool,
) -> Result<Vec<ModelCheck>> {
    let samples = probe_samples(base, seed)?;
    let mut out: Vec<(ModelConfig, ModelCheck)> = Vec::new();
    for (label, cfg) in suite_configs(base) {
        if !filter(&label, &cfg) {
            continue;
        }
        // rows that coincide with a variant (full, irmask) reuse its result
        if let Some((_, done)) = out.iter().find(|(c, _)| *c == cfg) {
            let check = ModelCheck { label, ..done.clone() };
            out.push((cfg, check));
            continue;
        }
        let model = MvFormer::new(cfg.clone(), seed)?;
        let check = check_model(&model, &samples, STEP, fault, label)?;
        out.push((cfg, check));
    }
    let out = out.into_iter().map(|(_, c)| c).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("theta", Tensor::vector(vec![v]));
        (s, id)
    }

    #[test]
    fn square_at_three() {
        let (mut s, id) = scalar_store(3.0);
        let g = finite_diff_grad(&mut s, id, 1e-4, |p| Ok(p.get(id).data()[0].powi(2))).unwrap();
        assert!((g.data()[0] - 6.0).abs() < 1e-8);
        assert_eq!(s.get(id).data(), [3.0]);
    }

    #[test]
    fn sine_at_zero() {
        let (mut s, id) = scalar_store(0.0);
        let g = finite_diff_grad(&mut s, id, 1e-4, |p| Ok(p.get(id).data()[0].sin())).unwrap();
        assert!((g.data()[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn step_must_be_positive() {
        let (mut s, id) = scalar_store(1.0);
        assert!(finite_diff_grad(&mut s, id, 0.0, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn extrapolation_beats_plain_difference() {
        let (mut s, id) = scalar_store(0.7);
        let f = |p: &ParamStore| Ok(p.get(id).data()[0].exp());
        let r = richardson_coord(&mut s, id, 0, 1e-2, f).unwrap();
        let plain = finite_diff_grad(&mut s, id, 1e-2, f).unwrap().data()[0];
        let exact = 0.7f64.exp();
        assert!((r - exact).abs() < 1e-9);
        assert!((r - exact).abs() < (plain - exact).abs());
        assert_eq!(s.get(id).data(), [0.7]);
    }

    #[test]
    fn suite_covers_variants_and_views() {
        let labels: Vec<String> = suite_configs(&ModelConfig::toy()).into_iter().map(|(l, _)| l).collect();
        assert_eq!(labels.len(), 12);
        assert!(labels.contains(&"time-sensor".to_string()));
    }

    #[test]
    fn small_model_passes_and_fault_is_caught() {
        let mut cfg = ModelConfig::toy();
        cfg.seq_len = 3;
        cfg.n_sensors = 2;
        cfg.embed_dim = 4;
        cfg.heads = 2;
        cfg.ffn_width = 6;
        let model = MvFormer::new(cfg.clone(), 5).unwrap();
        let samples = probe_samples(&cfg, 5).unwrap();
        let ok = check_model(&model, &samples, STEP, None, "small").unwrap();
        assert!(ok.passed(TOLERANCE), "{ok}");
        let bad = check_model(&model, &samples, STEP, Some(OpKind::SoftmaxRows), "fault").unwrap();
        assert!(!bad.passed(TOLERANCE));
    }
}
