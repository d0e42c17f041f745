//! `MVF1` checkpoints: a versioned text archive of the config and every
//! named parameter tensor.
//!
//! ```text
//! MVF1 1
//! config seq_len=8
//! ...
//! param block1.tc.conv0.kernel 16,4,3 0.1 -0.2 ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{ModelConfig, MvFormer};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

const MAGIC: &str = "MVF1";
const VERSION: u32 = 1;

pub fn write_checkpoint(model: &MvFormer) -> String {
    let mut out = format!("{MAGIC} {VERSION}\n");
    for (k, v) in model.config().to_kv() {
        writeln!(out, "config {k}={v}").unwrap();
    }
    for (_, name, t) in model.params().iter() {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        write!(out, "param {name} {}", dims.join(",")).unwrap();
        for v in t.data() {
            write!(out, " {v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parse a checkpoint. With `expected`, any config difference is an error.
pub fn read_checkpoint(text: &str, expected: Option<&ModelConfig>) -> Result<MvFormer> {
    let bad = |m: String| Error::Checkpoint(m);
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let mut h = header.split_whitespace();
    if h.next() != Some(MAGIC) {
        return Err(bad(format!("missing `{MAGIC}` magic header")));
    }
    let version: u32 = h.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing version".into()))?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let mut config = ModelConfig::new(1, 1, 2);
    let mut params = ParamStore::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if let Some(kv) = line.strip_prefix("config ") {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("line {lineno}: malformed config entry")))?;
            if !config.set(k, v)? {
                return Err(bad(format!("line {lineno}: unknown config key `{k}`")));
            }
        } else if let Some(rest) = line.strip_prefix("param ") {
            let mut f = rest.split_whitespace();
            let name = f.next().ok_or_else(|| bad(format!("line {lineno}: missing name")))?;
            let dims: Vec<usize> = f
                .next()
                .ok_or_else(|| bad(format!("line {lineno}: missing shape")))?
                .split(',')
                .map(|d| d.parse().map_err(|_| bad(format!("line {lineno}: bad dimension `{d}`"))))
                .collect::<Result<_>>()?;
            let data: Vec<f64> = f
                .map(|v| v.parse().map_err(|_| bad(format!("line {lineno}: bad value `{v}`"))))
                .collect::<Result<_>>()?;
            params.add(name, Tensor::new(&dims, data)?);
        } else if !line.trim().is_empty() {
            return Err(bad(format!("line {lineno}: unrecognised record")));
        }
    }
    if let Some(want) = expected {
        if want != &config {
            let diff: Vec<String> = want
                .to_kv()
                .into_iter()
                .zip(config.to_kv())
                .filter(|(a, b)| a != b)
                .map(|((k, a), (_, b))| format!("{k}: expected {a}, checkpoint has {b}"))
                .collect();
            return Err(bad(format!("config mismatch ({})", diff.join("; "))));
        }
    }
    MvFormer::from_params(config, params)
}

pub fn save_checkpoint(model: &MvFormer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&ModelConfig>) -> Result<MvFormer> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&text, expected)
}
