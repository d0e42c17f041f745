//! The `#irts v1` triplet text format.
//!
//! ```text
//! #irts v1 sensors=4 classes=2 length=8
//! L patient-1 0
//! O patient-1 0 2 37.5
//! ```
//!
//! `L <id> <class>` declares a sample, `O <id> <t> <sensor> <value>` records
//! one reading. Indices are 0-based. `length=` is optional; without it the
//! sequence length is one past the largest time index seen.
//!
//! External corpora such as PhysioNet 2012 or PAMAP2 are read by exporting
//! them to this format first.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::sample::{Dataset, IrtsSample};
use crate::error::{Error, Result};

/// A parsed file plus loader diagnostics.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub dataset: Dataset,
    /// Repeated `(sample, t, sensor)` observations; the last one wins.
    pub duplicate_observations: usize,
}

pub fn load_triplets(path: impl AsRef<Path>) -> Result<Loaded> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_triplets(&text)
}

struct Header {
    sensors: usize,
    classes: usize,
    length: Option<usize>,
}

fn parse_header(line: &str) -> Result<Header> {
    let perr = |msg: String| Error::Parse { line: 1, msg };
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("#irts") || tokens.next() != Some("v1") {
        return Err(perr(format!("expected `#irts v1` header, got `{line}`")));
    }
    let (mut sensors, mut classes, mut length) = (None, None, None);
    for tok in tokens {
        let (k, v) = tok.split_once('=').ok_or_else(|| perr(format!("malformed header field `{tok}`")))?;
        let n: usize = v.parse().map_err(|_| perr(format!("header field `{tok}` is not an integer")))?;
        match k {
            "sensors" => sensors = Some(n),
            "classes" => classes = Some(n),
            "length" => length = Some(n),
            _ => return Err(perr(format!("unknown header field `{k}`"))),
        }
    }
    Ok(Header {
        sensors: sensors.ok_or_else(|| perr("header is missing sensors=".into()))?,
        classes: classes.ok_or_else(|| perr("header is missing classes=".into()))?,
        length,
    })
}

pub fn parse_triplets(text: &str) -> Result<Loaded> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let header = parse_header(first)?;

    let mut order: Vec<String> = Vec::new();
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut obs: HashMap<String, HashMap<(usize, usize), f64>> = HashMap::new();
    let mut pending: Vec<(usize, String, usize, usize, f64)> = Vec::new();
    let mut duplicates = 0;
    let mut max_t = None;

    for (idx, line) in lines {
        let lineno = idx + 1;
        let perr = |msg: String| Error::Parse { line: lineno, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [c, ..] if c.starts_with('#') => continue,
            ["L", id, class] => {
                let class: usize = class.parse().map_err(|_| perr(format!("bad class `{class}`")))?;
                if class >= header.classes {
                    return Err(perr(format!("class {class} outside {} classes", header.classes)));
                }
                if labels.insert(id.to_string(), class).is_some() {
                    return Err(perr(format!("sample `{id}` declared twice")));
                }
                order.push(id.to_string());
            }
            ["O", id, t, s, v] => {
                let t: usize = t.parse().map_err(|_| perr(format!("bad time index `{t}`")))?;
                let s: usize = s.parse().map_err(|_| perr(format!("bad sensor index `{s}`")))?;
                let v: f64 = v.parse().map_err(|_| perr(format!("bad value `{v}`")))?;
                if !v.is_finite() {
                    return Err(perr(format!("non-finite value `{v}`")));
                }
                if s >= header.sensors {
                    return Err(perr(format!("unknown sensor {s}; header declares {}", header.sensors)));
                }
                max_t = Some(max_t.map_or(t, |m: usize| m.max(t)));
                pending.push((lineno, id.to_string(), t, s, v));
            }
            _ => return Err(perr(format!("malformed record `{line}`"))),
        }
    }

    for (lineno, id, t, s, v) in pending {
        if !labels.contains_key(&id) {
            return Err(Error::Parse { line: lineno, msg: format!("observation for undeclared sample `{id}`") });
        }
        if obs.entry(id).or_default().insert((t, s), v).is_some() {
            duplicates += 1;
        }
    }

    let len = header.length.unwrap_or_else(|| max_t.map_or(1, |m| m + 1));
    let mut samples = Vec::with_capacity(order.len());
    for id in order {
        let mut s = IrtsSample::empty(id.clone(), len, header.sensors, labels[&id]);
        if let Some(cells) = obs.get(&id) {
            for (&(t, k), &v) in cells {
                // steps past a declared length are truncated
                if t < len {
                    s.observe(t, k, v)?;
                }
            }
        }
        samples.push(s);
    }
    let dataset = Dataset::new(samples, header.classes, len, header.sensors)?;
    Ok(Loaded { dataset, duplicate_observations: duplicates })
}

/// Serialize with full round-trip precision.
pub fn write_triplets(dataset: &Dataset) -> String {
    let mut out = format!(
        "#irts v1 sensors={} classes={} length={}\n",
        dataset.n_sensors(),
        dataset.num_classes(),
        dataset.seq_len()
    );
    for s in dataset.samples() {
        writeln!(out, "L {} {}", s.id(), s.label()).unwrap();
        for (t, k, v) in s.observations() {
            writeln!(out, "O {} {} {} {:?}", s.id(), t, k, v).unwrap();
        }
    }
    out
}

pub fn save_triplets(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_triplets(dataset)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "#irts v1 sensors=3 classes=2\n\
        L a 0\n\
        L b 1\n\
        O a 0 0 1.5\n\
        O a 1 2 -2\n\
        O a 3 1 0.25\n\
        O b 0 1 4\n\
        O b 2 2 5\n\
        O b 2 0 6\n";

    #[test]
    fn loads_two_samples() {
        let d = parse_triplets(FIXTURE).unwrap().dataset;
        assert_eq!(d.len(), 2);
        assert_eq!(d.seq_len(), 4);
        let a = &d.samples()[0];
        assert_eq!(a.id(), "a");
        assert_eq!(a.label(), 0);
        assert_eq!(a.get(1, 2), Some(-2.0));
        assert_eq!(a.observed_count(), 3);
        assert!(!a.is_observed(1, 1));
        let b = &d.samples()[1];
        assert_eq!(b.label(), 1);
        assert_eq!(b.get(2, 0), Some(6.0));
        assert_eq!(b.observed_count(), 3);
    }

    #[test]
    fn sample_without_observations_is_all_missing() {
        let d = parse_triplets("#irts v1 sensors=2 classes=2 length=3\nL a 1\nL b 0\nO b 0 0 1\n").unwrap().dataset;
        assert_eq!(d.samples()[0].observed_count(), 0);
        assert!(d.samples()[0].time_mask().data().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn duplicates_are_last_wins() {
        let l = parse_triplets("#irts v1 sensors=1 classes=1\nL a 0\nO a 0 0 1\nO a 0 0 2\n").unwrap();
        assert_eq!(l.duplicate_observations, 1);
        assert_eq!(l.dataset.samples()[0].get(0, 0), Some(2.0));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_triplets("#irts v1 sensors=2 classes=2\nL a 0\nO a 0 5 1.0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_triplets("#irts v1 sensors=2 classes=2\nL a 0\nQ nonsense\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_triplets("#irts v1 sensors=2 classes=2\nL a 0\nO a x 0 1.0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        assert!(parse_triplets("sensors=2\n").is_err());
    }

    #[test]
    fn round_trips_through_text() {
        let d = parse_triplets(FIXTURE).unwrap().dataset;
        let again = parse_triplets(&write_triplets(&d)).unwrap().dataset;
        assert_eq!(d.fingerprint(), again.fingerprint());
    }
}
