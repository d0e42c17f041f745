//! The `mvformer` command line.
//!
//! ```text
//! mvformer train     --synthetic nirts --variant v4 --folds 5 --epochs 30
//! mvformer ablate    --synthetic airts --variants v1,v2,v3,v4
//! mvformer ablate    --synthetic nirts --switches tc,time,sensor,tc-time,tc-sensor,time-sensor,full,irmask
//! mvformer sweep     --synthetic airts --ratios 0,0.25,0.5,0.75,1
//! mvformer gradcheck --variant v2
//! mvformer synth     --synthetic nirts --out nirts.irts
//! ```
//!
//! Settings resolve as defaults, then `--config` (flat `key=value` lines, or
//! the `[manifest]` section of an earlier run), then flags. Each run writes
//! into `<out>/<timestamp>-<seed>/`, starting with `manifest.txt`.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::autodiff::OpKind;
use crate::data::{gen_synthetic, load_triplets, save_triplets, Dataset, Regime, SyntheticSpec};
use crate::error::{Error, Result};
use crate::gradcheck::{self, TOLERANCE};
use crate::model::{ModelConfig, Switches, Variant};
use crate::rng::{derive_seed, stream};
use crate::train::{
    run_cv, run_sensor_dropout_sweep, run_variant_ablation, CvReport, Manifest, SweepEntry, TrainConfig,
};

#[derive(Parser, Debug)]
#[command(name = "mvformer", version, about = "Multi-view transformer for irregular multivariate time series")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cross-validate one configuration.
    Train(RunArgs),
    /// Compare variants or per-component rows on shared folds.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated variants, e.g. `v1,v2,v3,v4`.
        #[arg(long)]
        variants: Option<String>,
    },
    /// Leave-random-sensor-out evaluation at several drop ratios.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated drop ratios in [0, 1].
        #[arg(long)]
        ratios: Option<String>,
    },
    /// Finite-difference check of every gradient on the toy configuration.
    Gradcheck(GradArgs),
    /// Write a synthetic corpus in the triplet format.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// `key=value` settings file or an earlier run's manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Triplet file to train on.
    #[arg(long, conflicts_with = "synthetic")]
    dataset: Option<PathBuf>,
    /// Synthetic regime: nirts or airts.
    #[arg(long)]
    synthetic: Option<String>,
    /// v1, v2, v3 or v4.
    #[arg(long)]
    variant: Option<String>,
    /// Enabled components, e.g. `tc+time+irmask`. For `ablate`, a
    /// comma-separated list of rows such as `tc,tc-time,full,irmask`.
    #[arg(long)]
    switches: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Parent directory of the run directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GradArgs {
    /// Model overrides as `key=value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "v4")]
    variant: String,
    #[arg(long)]
    switches: Option<String>,
    /// Check every variant and per-component row.
    #[arg(long)]
    all: bool,
    /// Scale the backward rule of one op (negative control).
    #[arg(long, hide = true)]
    corrupt_backward: Option<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value = "nirts")]
    synthetic: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    samples: Option<usize>,
    /// Output triplet file; a `.manifest` file is written next to it.
    #[arg(long)]
    out: PathBuf,
}

/// Fully resolved experiment settings.
#[derive(Clone, Debug)]
struct Settings {
    model: ModelConfig,
    train: TrainConfig,
    folds: usize,
    synthetic: SyntheticSpec,
    synthetic_overrides: Vec<(String, String)>,
    use_synthetic: bool,
    dataset: Option<PathBuf>,
    length: Option<usize>,
    ratios: Vec<f64>,
    variants: Option<Vec<Variant>>,
    rows: Option<Vec<String>>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            model: ModelConfig::new(8, 4, 2),
            train: TrainConfig::default(),
            folds: 5,
            synthetic: SyntheticSpec::default_for(Regime::Nirts),
            synthetic_overrides: Vec::new(),
            use_synthetic: false,
            dataset: None,
            length: None,
            ratios: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            variants: None,
            rows: None,
        }
    }
}

fn cfg_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{key}`: {msg}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| cfg_err(key, format!("cannot parse `{v}`")))
}

fn parse_list<T>(key: &str, v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(&item)
        .collect::<Result<Vec<_>>>()
        .map_err(|e| cfg_err(key, e))
}

fn parse_ratios(v: &str) -> Result<Vec<f64>> {
    let r = parse_list("ratios", v, |s| parse_num::<f64>("ratios", s))?;
    if r.is_empty() {
        return Err(Error::Usage("empty ratio list".into()));
    }
    Ok(r)
}

impl Settings {
    /// Apply one setting. Unknown keys are errors when `strict`, otherwise
    /// skipped.
    fn apply(&mut self, key: &str, value: &str, strict: bool) -> Result<()> {
        let known = if let Some(k) = key.strip_prefix("model.") {
            self.model.set(k, value)?
        } else if let Some(k) = key.strip_prefix("train.") {
            k != "checkpoint" && self.train.set(k, value)?
        } else if let Some(k) = key.strip_prefix("data.") {
            self.apply_data(k, value)?
        } else {
            match key {
                "seed" => {
                    self.train.seed = parse_num(key, value)?;
                    true
                }
                "folds" => {
                    self.folds = parse_num(key, value)?;
                    true
                }
                "ratios" => {
                    self.ratios = parse_ratios(value)?;
                    true
                }
                "variants" => {
                    self.variants = Some(parse_list(key, value, str::parse)?);
                    true
                }
                "rows" => {
                    self.rows = Some(parse_list(key, value, |s| Ok(s.to_string()))?);
                    true
                }
                "synthetic" | "dataset" | "length" | "n_samples" | "missing_prob" | "signal" => {
                    self.apply_data(key, value)?
                }
                _ => self.model.set(key, value)? || (key != "checkpoint" && self.train.set(key, value)?),
            }
        };
        if !known && strict {
            return Err(Error::Config(format!("unknown setting `{key}`")));
        }
        Ok(())
    }

    fn apply_data(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "synthetic" => {
                let regime: Regime = value.trim().parse()?;
                // regime defaults first, then anything set explicitly
                self.synthetic = SyntheticSpec::default_for(regime);
                for (k, v) in self.synthetic_overrides.clone() {
                    self.apply_synthetic_field(&k, &v)?;
                }
                self.use_synthetic = true;
                self.dataset = None;
            }
            "dataset" | "path" => {
                self.dataset = Some(PathBuf::from(value.trim()));
                self.use_synthetic = false;
            }
            "length" => self.length = Some(parse_num(key, value)?),
            _ => {
                if !self.apply_synthetic_field(key, value)? {
                    return Ok(false);
                }
                self.synthetic_overrides.retain(|(k, _)| k != key);
                self.synthetic_overrides.push((key.to_string(), value.to_string()));
            }
        }
        Ok(true)
    }

    fn apply_synthetic_field(&mut self, key: &str, value: &str) -> Result<bool> {
        let s = &mut self.synthetic;
        match key {
            "n_samples" => s.n_samples = parse_num(key, value)?,
            "seq_len" => s.seq_len = parse_num(key, value)?,
            "n_sensors" => s.n_sensors = parse_num(key, value)?,
            "num_classes" => s.num_classes = parse_num(key, value)?,
            "missing_prob" => s.missing_prob = parse_num(key, value)?,
            "signal" => s.signal = parse_num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        // a run manifest carries provenance keys that are not settings
        let manifest = text.lines().any(|l| l.trim() == "[manifest]");
        let mut in_manifest = !manifest;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.starts_with('[') {
                in_manifest = line == "[manifest]";
                continue;
            }
            if !in_manifest || line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
            self.apply(k.trim(), v.trim(), !manifest)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    fn from_run_args(a: &RunArgs, ablate: bool) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(p) = &a.config {
            s.load_file(p)?;
        }
        if let Some(seed) = a.seed {
            s.train.seed = seed;
        }
        if let Some(d) = &a.dataset {
            s.apply_data("dataset", &d.to_string_lossy())?;
        }
        if let Some(r) = &a.synthetic {
            s.apply_data("synthetic", r)?;
        }
        if let Some(v) = &a.variant {
            s.model.variant = v.parse()?;
        }
        if let Some(sw) = &a.switches {
            if ablate {
                s.rows = Some(parse_list("switches", sw, |r| Ok(r.to_string()))?);
            } else {
                s.model.switches = sw.parse()?;
            }
        }
        if let Some(f) = a.folds {
            s.folds = f;
        }
        if let Some(e) = a.epochs {
            s.train.epochs = e;
        }
        if !s.use_synthetic && s.dataset.is_none() {
            return Err(Error::Usage("pass --dataset <file> or --synthetic nirts|airts".into()));
        }
        s.train.validate()?;
        Ok(s)
    }

    /// Load or generate the data and fit the model shape to it.
    fn dataset(&mut self) -> Result<Dataset> {
        let data = if self.use_synthetic {
            let mut spec = self.synthetic.clone();
            spec.seed = derive_seed(self.train.seed, stream::DATA);
            spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
            gen_synthetic(&spec)?
        } else {
            let path = self.dataset.as_ref().expect("dataset path resolved");
            let loaded = load_triplets(path)?;
            if loaded.duplicate_observations > 0 {
                eprintln!(
                    "{}: {} duplicate observations (last one kept)",
                    path.display(),
                    loaded.duplicate_observations
                );
            }
            loaded.dataset
        };
        let data = match self.length {
            Some(l) if l != data.seq_len() => data.with_length(l),
            _ => data,
        };
        self.model.seq_len = data.seq_len();
        self.model.n_sensors = data.n_sensors();
        self.model.num_classes = data.num_classes();
        self.model.validate()?;
        Ok(data)
    }

    fn manifest(&self, command: &str, data: &Dataset) -> Manifest {
        let mut m = Manifest::default();
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("seed", self.train.seed);
        m.set("folds", self.folds);
        if self.use_synthetic {
            let s = &self.synthetic;
            m.set("data.synthetic", s.regime);
            m.set("data.n_samples", s.n_samples);
            m.set("data.seq_len", s.seq_len);
            m.set("data.n_sensors", s.n_sensors);
            m.set("data.num_classes", s.num_classes);
            m.set("data.missing_prob", format!("{:?}", s.missing_prob));
            m.set("data.signal", format!("{:?}", s.signal));
            let spec = SyntheticSpec { seed: derive_seed(self.train.seed, stream::DATA), ..s.clone() };
            m.set("data.process", spec.describe());
        } else if let Some(p) = &self.dataset {
            m.set("data.path", p.display());
        }
        if let Some(l) = self.length {
            m.set("data.length", l);
        }
        m.set("dataset.fingerprint", data.fingerprint());
        m.set("dataset.samples", data.len());
        m.set("dataset.missing_ratio", format!("{:?}", data.missing_ratio()));
        m.extend("model", self.model.to_kv());
        m.extend("train", self.train.to_kv());
        m
    }
}

/// Create `<out>/<timestamp>-<seed>[-n]/`.
fn run_dir(out: &Path, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S");
    for n in 0.. {
        let name = if n == 0 { format!("{stamp}-{seed}") } else { format!("{stamp}-{seed}-{n}") };
        let dir = out.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    unreachable!()
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let mut m = manifest.clone();
    m.set("timestamp", chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    let mut text = String::new();
    m.write_block(&mut text);
    write(&dir.join("manifest.txt"), &text)
}

/// Run-level entries first, then the driver's own.
fn merge(run: &Manifest, report: &mut CvReport) {
    let mut m = run.clone();
    for (k, v) in &report.manifest.entries {
        m.set(k.clone(), v);
    }
    report.manifest = m;
}

fn metric_names(r: &CvReport) -> Vec<String> {
    r.summary.iter().map(|s| s.name.clone()).collect()
}

fn fold_rows(prefix: &str, r: &CvReport, out: &mut String) {
    for (i, f) in r.folds.iter().enumerate() {
        let vals: Vec<String> = f.metrics.iter().map(|(_, v)| format!("{v:?}")).collect();
        writeln!(out, "{prefix}{},{}", i + 1, vals.join(",")).unwrap();
    }
}

fn summary_line(r: &CvReport) -> String {
    r.summary.iter().map(|s| format!("{} {:.4} ± {:.4}", s.name, s.mean, s.std)).collect::<Vec<_>>().join("  ")
}

fn cmd_train(a: &RunArgs) -> Result<i32> {
    let mut s = Settings::from_run_args(a, false)?;
    let data = s.dataset()?;
    let dir = run_dir(&a.out, s.train.seed)?;
    let manifest = s.manifest("train", &data);
    write_manifest(&dir, &manifest)?;

    s.train.checkpoint = Some(dir.join("model.mvf"));
    let mut report = run_cv(&data, s.folds, &s.model, &s.train)?;
    merge(&manifest, &mut report);
    report.save(dir.join("report.txt"))?;
    write(&dir.join("summary.json"), &report.to_json())?;
    let mut csv = format!("fold,{}\n", metric_names(&report).join(","));
    fold_rows("", &report, &mut csv);
    write(&dir.join("metrics.csv"), &csv)?;
    println!("{}", summary_line(&report));
    println!("{}", dir.display());
    Ok(0)
}

fn file_label(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn cmd_ablate(a: &RunArgs, variants: Option<&str>) -> Result<i32> {
    let mut s = Settings::from_run_args(a, true)?;
    if let Some(v) = variants {
        let list: Vec<Variant> = parse_list("variants", v, str::parse).map_err(|e| Error::Usage(e.to_string()))?;
        if list.is_empty() {
            return Err(Error::Usage("--variants needs at least one variant".into()));
        }
        s.variants = Some(list);
    }
    if s.variants.is_some() && s.rows.is_some() {
        return Err(Error::Usage("pass either --variants or a --switches row list, not both".into()));
    }
    let data = s.dataset()?;
    let configs: Vec<(String, ModelConfig)> = match (&s.rows, &s.variants) {
        (Some(rows), _) => rows.iter().map(|r| Ok((r.clone(), s.model.component_row(r)?))).collect::<Result<_>>()?,
        (None, Some(vs)) => vs.iter().map(|v| (v.to_string(), s.model.clone().with_variant(*v))).collect(),
        (None, None) => Variant::ALL.iter().map(|v| (v.to_string(), s.model.clone().with_variant(*v))).collect(),
    };
    if configs.is_empty() {
        return Err(Error::Usage("no configurations to compare".into()));
    }
    let dir = run_dir(&a.out, s.train.seed)?;
    let mut manifest = s.manifest("ablate", &data);
    let labels: Vec<&str> = configs.iter().map(|(l, _)| l.as_str()).collect();
    if s.rows.is_some() {
        manifest.set("rows", labels.join(","));
    } else {
        manifest.set("variants", labels.join(","));
    }
    write_manifest(&dir, &manifest)?;

    let mut rows = run_variant_ablation(&data, s.folds, &configs, &s.train)?;
    let names = metric_names(&rows[0].report);
    let mut csv = format!("config,fold,{}\n", names.join(","));
    let mut table = format!("{:<14}", "config");
    for n in &names {
        write!(table, " {n:>17}").unwrap();
    }
    table.push('\n');
    let mut json = Vec::new();
    for row in &mut rows {
        merge(&manifest, &mut row.report);
        row.report.save(dir.join(format!("report-{}.txt", file_label(&row.label))))?;
        fold_rows(&format!("{},", row.label), &row.report, &mut csv);
        write!(table, "{:<14}", row.label).unwrap();
        for m in &row.report.summary {
            write!(table, " {:>8.4} ± {:<6.4}", m.mean, m.std).unwrap();
        }
        table.push('\n');
        json.push(serde_json::json!({ "config": row.label, "report": row.report }));
    }
    write(&dir.join("ablation.csv"), &csv)?;
    write(&dir.join("ablation.txt"), &table)?;
    write(&dir.join("summary.json"), &serde_json::to_string_pretty(&json).expect("json"))?;
    print!("{table}");
    println!("{}", dir.display());
    Ok(0)
}

fn cmd_sweep(a: &RunArgs, ratios: Option<&str>) -> Result<i32> {
    let mut s = Settings::from_run_args(a, false)?;
    if let Some(r) = ratios {
        s.ratios = parse_ratios(r).map_err(|e| Error::Usage(e.to_string()))?;
    }
    if let Some(r) = s.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Usage(format!("drop ratio {r} outside [0, 1]")));
    }
    let data = s.dataset()?;
    let dir = run_dir(&a.out, s.train.seed)?;
    let mut manifest = s.manifest("sweep", &data);
    manifest.set("ratios", s.ratios.iter().map(|r| format!("{r:?}")).collect::<Vec<_>>().join(","));
    write_manifest(&dir, &manifest)?;

    let mut entries: Vec<SweepEntry> = run_sensor_dropout_sweep(&data, s.folds, &s.ratios, &s.model, &s.train)?;
    let names = metric_names(&entries[0].report);
    let header: Vec<String> = names.iter().flat_map(|n| [format!("{n}_mean"), format!("{n}_std")]).collect();
    let mut csv = format!("ratio,{}\n", header.join(","));
    let mut folds_csv = format!("ratio,fold,{}\n", names.join(","));
    let mut json = Vec::new();
    for e in &mut entries {
        merge(&manifest, &mut e.report);
        e.report.manifest.set("drop_ratio", format!("{:?}", e.ratio));
        e.report.save(dir.join(format!("report-ratio-{}.txt", e.ratio)))?;
        let vals: Vec<String> =
            e.report.summary.iter().flat_map(|m| [format!("{:?}", m.mean), format!("{:?}", m.std)]).collect();
        writeln!(csv, "{:?},{}", e.ratio, vals.join(",")).unwrap();
        fold_rows(&format!("{:?},", e.ratio), &e.report, &mut folds_csv);
        println!("ratio {:<5} {}", e.ratio, summary_line(&e.report));
        json.push(serde_json::json!({ "ratio": e.ratio, "report": e.report }));
    }
    write(&dir.join("sweep.csv"), &csv)?;
    write(&dir.join("sweep_folds.csv"), &folds_csv)?;
    write(&dir.join("summary.json"), &serde_json::to_string_pretty(&json).expect("json"))?;
    println!("{}", dir.display());
    Ok(0)
}

fn cmd_gradcheck(a: &GradArgs) -> Result<i32> {
    let mut base = ModelConfig::toy();
    if let Some(p) = &a.config {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got `{line}`")))?;
            let k = k.trim().strip_prefix("model.").unwrap_or(k.trim());
            if !base.set(k, v.trim())? {
                return Err(Error::Config(format!("unknown model setting `{k}`")));
            }
        }
    }
    let fault = match &a.corrupt_backward {
        Some(name) => Some(OpKind::parse(name).ok_or_else(|| Error::Usage(format!("unknown op `{name}`")))?),
        None => None,
    };
    let variant: Variant = a.variant.parse()?;
    let switches: Switches = match &a.switches {
        Some(s) => s.parse()?,
        None => base.switches,
    };
    base.validate()?;
    let target = base.clone().with_variant(variant).with_switches(switches);
    target.validate()?;
    let checks = if a.all {
        gradcheck::suite(&base, a.seed, fault, |_, _| true)?
    } else {
        let samples = gradcheck::probe_samples(&target, a.seed)?;
        let model = crate::model::MvFormer::new(target.clone(), a.seed)?;
        let label = format!("{variant} {switches}");
        vec![gradcheck::check_model(&model, &samples, gradcheck::STEP, fault, label)?]
    };
    let mut failed = false;
    for c in &checks {
        print!("{c}");
        if !c.passed(TOLERANCE) {
            failed = true;
            let w = c.worst().expect("parameters");
            let op = c.fault.map(|f| format!(" (backward of `{}` corrupted)", f.name())).unwrap_or_default();
            println!(
                "FAILED [{}]: relative error {:.3e} in {}[{}]{op}",
                c.label, w.max_rel_error, w.name, w.worst_index
            );
        }
    }
    let worst = checks.iter().map(|c| c.max_rel_error()).fold(0.0, f64::max);
    println!("worst relative error {worst:.3e} (tolerance {TOLERANCE:e})");
    Ok(if failed { 1 } else { 0 })
}

fn cmd_synth(a: &SynthArgs) -> Result<i32> {
    let mut s = Settings::default();
    if let Some(p) = &a.config {
        s.load_file(p)?;
    }
    s.apply_data("synthetic", &a.synthetic)?;
    if let Some(n) = a.samples {
        s.synthetic.n_samples = n;
    }
    let spec = SyntheticSpec { seed: derive_seed(a.seed, stream::DATA), ..s.synthetic.clone() };
    spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let data = gen_synthetic(&spec)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut m = Manifest::default();
    m.set("command", "synth");
    m.set("version", env!("CARGO_PKG_VERSION"));
    m.set("seed", a.seed);
    m.set("data.synthetic", spec.regime);
    m.set("data.n_samples", spec.n_samples);
    m.set("data.seq_len", spec.seq_len);
    m.set("data.n_sensors", spec.n_sensors);
    m.set("data.num_classes", spec.num_classes);
    m.set("data.missing_prob", format!("{:?}", spec.missing_prob));
    m.set("data.signal", format!("{:?}", spec.signal));
    m.set("data.process", spec.describe());
    m.set("dataset.fingerprint", data.fingerprint());
    m.set("dataset.missing_ratio", format!("{:?}", data.missing_ratio()));
    let mut text = String::new();
    m.write_block(&mut text);
    let mut manifest_path = a.out.clone().into_os_string();
    manifest_path.push(".manifest");
    write(Path::new(&manifest_path), &text)?;
    save_triplets(&data, &a.out)?;
    println!("{} samples, missing ratio {:.4}, fingerprint {}", data.len(), data.missing_ratio(), data.fingerprint());
    println!("{}", a.out.display());
    Ok(0)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Config(_) | Error::Parameter(_) => 2,
        _ => 1,
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Ablate { run, variants } => cmd_ablate(run, variants.as_deref()),
        Command::Sweep { run, ratios } => cmd_sweep(run, ratios.as_deref()),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
