//! Evaluation reports and their `key=value` text form.
//!
//! ```text
//! #mvformer-report v1
//! [manifest]
//! command=train
//! [fold 1]
//! task=binary
//! auroc=0.93
//! [summary]
//! auroc.mean=0.91
//! auroc.std=0.02
//! ```
//!
//! Floats are written with shortest round-trip formatting, so parsing the
//! text reproduces the report exactly.

use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ConfusionCounts;

const MAGIC: &str = "#mvformer-report v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    Binary,
    Multiclass,
}

impl TaskKind {
    pub fn of(num_classes: usize) -> TaskKind {
        if num_classes == 2 {
            TaskKind::Binary
        } else {
            TaskKind::Multiclass
        }
    }

    /// The metric used for headline comparisons.
    pub fn primary_metric(self) -> &'static str {
        match self {
            TaskKind::Binary => "auroc",
            TaskKind::Multiclass => "accuracy",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Binary => "binary",
            TaskKind::Multiclass => "multiclass",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskKind,
    pub samples: usize,
    pub class_counts: Vec<usize>,
    /// Metric name and value, in a fixed order per task.
    pub metrics: Vec<(String, f64)>,
    pub confusion: Vec<ConfusionCounts>,
    /// Classes in neither truth nor predictions (macro averages count them
    /// as zero).
    pub absent_classes: Vec<usize>,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Mean and sample standard deviation of one metric across folds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

/// Ordered `key=value` provenance record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    /// Insert or replace.
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Entries under `prefix.` with the prefix stripped.
    pub fn section(&self, prefix: &str) -> Vec<(String, String)> {
        let p = format!("{prefix}.");
        self.entries.iter().filter_map(|(k, v)| k.strip_prefix(&p).map(|k| (k.to_string(), v.clone()))).collect()
    }

    pub fn extend(&mut self, prefix: &str, kv: Vec<(String, String)>) {
        for (k, v) in kv {
            self.set(format!("{prefix}.{k}"), v);
        }
    }

    pub fn write_block(&self, out: &mut String) {
        out.push_str("[manifest]\n");
        for (k, v) in &self.entries {
            writeln!(out, "{k}={v}").unwrap();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub manifest: Manifest,
    pub folds: Vec<EvalReport>,
    pub summary: Vec<MetricSummary>,
}

/// Sample mean and `n - 1` standard deviation; the deviation of a single
/// value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn split_list<T: std::str::FromStr>(v: &str, line: usize) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Parse { line, msg: format!("bad list item `{s}`") }))
        .collect()
}

impl CvReport {
    /// Aggregate per-fold reports.
    pub fn from_folds(manifest: Manifest, folds: Vec<EvalReport>) -> CvReport {
        let names: Vec<String> =
            folds.first().map(|f| f.metrics.iter().map(|(n, _)| n.clone()).collect()).unwrap_or_default();
        let summary = names
            .into_iter()
            .map(|name| {
                let vals: Vec<f64> = folds.iter().filter_map(|f| f.metric(&name)).collect();
                let (mean, std) = mean_std(&vals);
                MetricSummary { name, mean, std }
            })
            .collect();
        CvReport { manifest, folds, summary }
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.name == metric).map(|s| s.mean)
    }

    pub fn std(&self, metric: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.name == metric).map(|s| s.std)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC}\n");
        self.manifest.write_block(&mut out);
        for (i, f) in self.folds.iter().enumerate() {
            writeln!(out, "[fold {}]", i + 1).unwrap();
            writeln!(out, "task={}", f.task).unwrap();
            writeln!(out, "samples={}", f.samples).unwrap();
            writeln!(out, "class_counts={}", join(&f.class_counts)).unwrap();
            for (k, v) in &f.metrics {
                writeln!(out, "{k}={v:?}").unwrap();
            }
            for (c, cc) in f.confusion.iter().enumerate() {
                writeln!(out, "confusion.{c}={},{},{},{}", cc.tp, cc.fp, cc.fn_, cc.tn).unwrap();
            }
            writeln!(out, "absent_classes={}", join(&f.absent_classes)).unwrap();
        }
        out.push_str("[summary]\n");
        for s in &self.summary {
            writeln!(out, "{}.mean={:?}", s.name, s.mean).unwrap();
            writeln!(out, "{}.std={:?}", s.name, s.std).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<CvReport> {
        enum Section {
            None,
            Manifest,
            Fold,
            Summary,
        }
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(Error::Parse { line: 1, msg: format!("expected `{MAGIC}`") }),
        }
        let mut section = Section::None;
        let mut manifest = Manifest::default();
        let mut folds: Vec<EvalReport> = Vec::new();
        let mut summary: Vec<MetricSummary> = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let perr = |msg: String| Error::Parse { line: lineno, msg };
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                section = match line {
                    "[manifest]" => Section::Manifest,
                    "[summary]" => Section::Summary,
                    l if l.starts_with("[fold ") => {
                        folds.push(EvalReport {
                            task: TaskKind::Binary,
                            samples: 0,
                            class_counts: vec![],
                            metrics: vec![],
                            confusion: vec![],
                            absent_classes: vec![],
                        });
                        Section::Fold
                    }
                    _ => return Err(perr(format!("unknown section `{line}`"))),
                };
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| perr(format!("expected key=value, got `{line}`")))?;
            let float = |v: &str| v.parse::<f64>().map_err(|_| perr(format!("bad number `{v}`")));
            match section {
                Section::None => return Err(perr("entry outside any section".into())),
                Section::Manifest => manifest.entries.push((k.to_string(), v.to_string())),
                Section::Fold => {
                    let f = folds.last_mut().expect("fold section");
                    match k {
                        "task" => {
                            f.task = match v {
                                "binary" => TaskKind::Binary,
                                "multiclass" => TaskKind::Multiclass,
                                _ => return Err(perr(format!("unknown task `{v}`"))),
                            }
                        }
                        "samples" => f.samples = v.parse().map_err(|_| perr(format!("bad count `{v}`")))?,
                        "class_counts" => f.class_counts = split_list(v, lineno)?,
                        "absent_classes" => f.absent_classes = split_list(v, lineno)?,
                        _ if k.starts_with("confusion.") => {
                            let c: Vec<usize> = split_list(v, lineno)?;
                            let [tp, fp, fn_, tn] = c[..] else {
                                return Err(perr(format!("confusion needs 4 counts, got `{v}`")));
                            };
                            f.confusion.push(ConfusionCounts { tp, fp, fn_, tn });
                        }
                        _ => f.metrics.push((k.to_string(), float(v)?)),
                    }
                }
                Section::Summary => {
                    if let Some(name) = k.strip_suffix(".mean") {
                        summary.push(MetricSummary { name: name.to_string(), mean: float(v)?, std: 0.0 });
                    } else if let Some(name) = k.strip_suffix(".std") {
                        match summary.last_mut() {
                            Some(s) if s.name == name => s.std = float(v)?,
                            _ => return Err(perr(format!("`{k}` without a preceding mean"))),
                        }
                    } else {
                        return Err(perr(format!("unknown summary key `{k}`")));
                    }
                }
            }
        }
        Ok(CvReport { manifest, folds, summary })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CvReport> {
        let path = path.as_ref();
        CvReport::from_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
