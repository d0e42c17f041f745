use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the irregularity mask enters the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Values only.
    V1,
    /// Masks replace values; no gate.
    V2,
    /// Values and masks concatenated on the feature axis; no gate.
    V3,
    /// Values plus the gated mask embedding added to each view's output.
    V4,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::V1, Variant::V2, Variant::V3, Variant::V4];

    /// Input width multiplier at layer 1.
    pub(crate) fn width_factor(self) -> usize {
        if self == Variant::V3 {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
            Variant::V3 => "v3",
            Variant::V4 => "v4",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v1" => Ok(Variant::V1),
            "v2" => Ok(Variant::V2),
            "v3" => Ok(Variant::V3),
            "v4" => Ok(Variant::V4),
            _ => Err(Error::Usage(format!("unknown variant `{s}` (expected v1|v2|v3|v4)"))),
        }
    }
}

/// Which views (and whether the irregularity gate) are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Switches {
    pub tc: bool,
    pub time: bool,
    pub sensor: bool,
    pub ir_mask: bool,
}

impl Switches {
    pub const FULL: Switches = Switches { tc: true, time: true, sensor: true, ir_mask: true };

    pub fn any_view(&self) -> bool {
        self.tc || self.time || self.sensor
    }
}

impl Default for Switches {
    fn default() -> Self {
        Switches::FULL
    }
}

impl fmt::Display for Switches {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> =
            [(self.tc, "tc"), (self.time, "time"), (self.sensor, "sensor"), (self.ir_mask, "irmask")]
                .into_iter()
                .filter_map(|(on, n)| on.then_some(n))
                .collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for Switches {
    type Err = Error;

    /// `tc+time+sensor+irmask`, any subset, `+`, `-` or `,` separated;
    /// `full` enables everything.
    fn from_str(s: &str) -> Result<Self> {
        let mut sw = Switches { tc: false, time: false, sensor: false, ir_mask: false };
        for part in s.split(['+', ',', '-']).map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "full" => sw = Switches::FULL,
                "tc" => sw.tc = true,
                "time" => sw.time = true,
                "sensor" => sw.sensor = true,
                "irmask" | "ir_mask" => sw.ir_mask = true,
                _ => return Err(Error::Usage(format!("unknown switch `{part}`"))),
            }
        }
        Ok(sw)
    }
}

/// Names of the per-component ablation rows, in table order.
pub const COMPONENT_ROWS: [&str; 8] = ["tc", "time", "sensor", "irmask", "tc-time", "tc-sensor", "time-sensor", "full"];

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub seq_len: usize,
    pub n_sensors: usize,
    pub num_classes: usize,
    pub embed_dim: usize,
    pub heads: usize,
    /// Number of stacked fusion blocks.
    pub blocks: usize,
    pub dilations: Vec<usize>,
    pub kernel_width: usize,
    pub ffn_width: usize,
    pub variant: Variant,
    pub switches: Switches,
    pub dropout: f64,
    /// Fixed offset inside the gate's sigmoid; not trained.
    pub gate_bias: f64,
    pub ln_eps: f64,
}

impl ModelConfig {
    pub fn new(seq_len: usize, n_sensors: usize, num_classes: usize) -> Self {
        ModelConfig {
            seq_len,
            n_sensors,
            num_classes,
            embed_dim: 32,
            heads: 4,
            blocks: 2,
            dilations: vec![1, 2, 3],
            kernel_width: 10,
            ffn_width: 64,
            variant: Variant::V4,
            switches: Switches::FULL,
            dropout: 0.0,
            gate_bias: 0.0,
            ln_eps: 1e-5,
        }
    }

    /// The small configuration used for gradient checks and synthetic runs.
    pub fn toy() -> Self {
        ModelConfig {
            embed_dim: 16,
            heads: 4,
            blocks: 2,
            dilations: vec![1, 2],
            kernel_width: 3,
            ffn_width: 32,
            ..ModelConfig::new(8, 4, 2)
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_switches(mut self, switches: Switches) -> Self {
        self.switches = switches;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.seq_len < 1 || self.n_sensors < 1 {
            return err(format!("seq_len and n_sensors must be positive ({}x{})", self.seq_len, self.n_sensors));
        }
        if self.num_classes < 2 {
            return err(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        if self.embed_dim < 1 || self.heads < 1 || !self.embed_dim.is_multiple_of(self.heads) {
            return err(format!("embed_dim {} must be divisible by heads {}", self.embed_dim, self.heads));
        }
        if self.blocks < 1 {
            return err("blocks must be at least 1".into());
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return err(format!("dilations must be non-empty and positive, got {:?}", self.dilations));
        }
        if self.kernel_width < 1 || self.ffn_width < 1 {
            return err("kernel_width and ffn_width must be positive".into());
        }
        if !self.switches.any_view() {
            return err("at least one of tc, time, sensor must be enabled".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.ln_eps <= 0.0 {
            return err("ln_eps must be positive".into());
        }
        Ok(())
    }

    /// One per-component ablation row. View rows (`tc`, `tc-time`, ...,
    /// `full`) run the gated model on those views with their mask gates;
    /// `irmask` feeds only the masks through all three views.
    pub fn component_row(&self, row: &str) -> Result<ModelConfig> {
        if row == "irmask" {
            return Ok(self.clone().with_variant(Variant::V2).with_switches(Switches::FULL));
        }
        if !COMPONENT_ROWS.contains(&row) {
            return Err(Error::Usage(format!(
                "unknown ablation row `{row}` (expected one of {})",
                COMPONENT_ROWS.join(", ")
            )));
        }
        let mut sw: Switches = row.parse()?;
        sw.ir_mask = true;
        Ok(self.clone().with_variant(Variant::V4).with_switches(sw))
    }

    /// Rows in the fused token matrix.
    pub fn fused_tokens(&self) -> usize {
        self.split_sizes().iter().sum()
    }

    /// Row counts of the enabled views in fusion order (tc, time, sensor).
    pub fn split_sizes(&self) -> Vec<usize> {
        let sw = self.switches;
        [(sw.tc, self.seq_len), (sw.time, self.seq_len), (sw.sensor, self.n_sensors)]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect()
    }

    /// Whether the irregularity gate participates.
    pub fn gated(&self) -> bool {
        self.variant == Variant::V4 && self.switches.ir_mask
    }

    /// `key=value` lines, one per field.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let dil: Vec<String> = self.dilations.iter().map(usize::to_string).collect();
        vec![
            ("seq_len".into(), self.seq_len.to_string()),
            ("n_sensors".into(), self.n_sensors.to_string()),
            ("num_classes".into(), self.num_classes.to_string()),
            ("embed_dim".into(), self.embed_dim.to_string()),
            ("heads".into(), self.heads.to_string()),
            ("blocks".into(), self.blocks.to_string()),
            ("dilations".into(), dil.join(",")),
            ("kernel_width".into(), self.kernel_width.to_string()),
            ("ffn_width".into(), self.ffn_width.to_string()),
            ("variant".into(), self.variant.to_string()),
            ("switches".into(), self.switches.to_string()),
            ("dropout".into(), format!("{:?}", self.dropout)),
            ("gate_bias".into(), format!("{:?}", self.gate_bias)),
            ("ln_eps".into(), format!("{:?}", self.ln_eps)),
        ]
    }

    /// Apply one `key=value` setting; `Ok(false)` when the key is not a
    /// model field.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| Error::Config(format!("field `{key}`: cannot parse `{v}`")))
        }
        match key {
            "seq_len" => self.seq_len = num(key, value)?,
            "n_sensors" => self.n_sensors = num(key, value)?,
            "num_classes" => self.num_classes = num(key, value)?,
            "embed_dim" => self.embed_dim = num(key, value)?,
            "heads" => self.heads = num(key, value)?,
            "blocks" => self.blocks = num(key, value)?,
            "dilations" => {
                self.dilations =
                    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s)).collect::<Result<_>>()?
            }
            "kernel_width" => self.kernel_width = num(key, value)?,
            "ffn_width" => self.ffn_width = num(key, value)?,
            "variant" => {
                self.variant = value.parse().map_err(|e: Error| Error::Config(format!("field `{key}`: {e}")))?
            }
            "switches" => {
                self.switches = value.parse().map_err(|e: Error| Error::Config(format!("field `{key}`: {e}")))?
            }
            "dropout" => self.dropout = num(key, value)?,
            "gate_bias" => self.gate_bias = num(key, value)?,
            "ln_eps" => self.ln_eps = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}
