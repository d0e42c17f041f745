//! Parameter layout: which tensors exist and what they are called.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub(crate) struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct Norm {
    pub gain: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

#[derive(Clone, Debug)]
pub(crate) struct Ffn {
    pub up: Linear,
    pub down: Linear,
}

#[derive(Clone, Debug)]
pub(crate) struct EncoderLayer {
    pub attn: Attention,
    pub norm1: Norm,
    pub ffn: Ffn,
    pub norm2: Norm,
}

#[derive(Clone, Debug)]
pub(crate) struct TokenEncoder {
    pub in_width: usize,
    /// Present at layer 1 only.
    pub input: Option<Linear>,
    pub layer: EncoderLayer,
}

#[derive(Clone, Debug)]
pub(crate) struct Conv {
    pub kernel: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct TcEncoder {
    pub in_channels: usize,
    pub convs: Vec<Conv>,
}

#[derive(Clone, Debug)]
pub(crate) struct Block {
    pub tc: Option<TcEncoder>,
    pub time: Option<TokenEncoder>,
    pub sensor: Option<TokenEncoder>,
    pub fusion: EncoderLayer,
}

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub blocks: Vec<Block>,
    pub head: Linear,
}

struct Init<'a> {
    store: &'a mut ParamStore,
    rng: &'a mut ChaCha8Rng,
}

impl Init<'_> {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    fn weight(&mut self, name: String, shape: &[usize], fan_in: usize) -> ParamId {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.rng.gen_range(-bound..bound)).collect();
        self.store.add(name, Tensor::new(shape, data).expect("init shape"))
    }

    fn linear(&mut self, name: &str, input: usize, output: usize) -> Linear {
        Linear {
            w: self.weight(format!("{name}.w"), &[input, output], input),
            b: self.store.add(format!("{name}.b"), Tensor::zeros(&[output])),
        }
    }

    fn norm(&mut self, name: &str, n: usize) -> Norm {
        Norm {
            gain: self.store.add(format!("{name}.gain"), Tensor::filled(&[n], 1.0)),
            bias: self.store.add(format!("{name}.bias"), Tensor::zeros(&[n])),
        }
    }

    fn encoder_layer(&mut self, name: &str, e: usize, ffn: usize) -> EncoderLayer {
        EncoderLayer {
            attn: Attention {
                q: self.linear(&format!("{name}.attn.q"), e, e),
                k: self.linear(&format!("{name}.attn.k"), e, e),
                v: self.linear(&format!("{name}.attn.v"), e, e),
                o: self.linear(&format!("{name}.attn.o"), e, e),
            },
            norm1: self.norm(&format!("{name}.norm1"), e),
            ffn: Ffn {
                up: self.linear(&format!("{name}.ffn.up"), e, ffn),
                down: self.linear(&format!("{name}.ffn.down"), ffn, e),
            },
            norm2: self.norm(&format!("{name}.norm2"), e),
        }
    }

    fn token_encoder(&mut self, name: &str, first: bool, in_width: usize, e: usize, ffn: usize) -> TokenEncoder {
        let input = first.then(|| self.linear(&format!("{name}.input"), in_width, e));
        TokenEncoder { in_width: if first { in_width } else { e }, input, layer: self.encoder_layer(name, e, ffn) }
    }

    fn tc(&mut self, name: &str, in_channels: usize, cfg: &ModelConfig) -> TcEncoder {
        let e = cfg.embed_dim;
        let w = cfg.kernel_width;
        let convs = (0..cfg.dilations.len())
            .map(|j| {
                let c_in = if j == 0 { in_channels } else { e };
                Conv {
                    kernel: self.weight(format!("{name}.conv{j}.kernel"), &[e, c_in, w], c_in * w),
                    bias: self.store.add(format!("{name}.conv{j}.bias"), Tensor::zeros(&[e])),
                }
            })
            .collect();
        TcEncoder { in_channels, convs }
    }
}

impl Layout {
    pub fn build(cfg: &ModelConfig, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Layout {
        let mut init = Init { store, rng };
        let e = cfg.embed_dim;
        let f = cfg.variant.width_factor();
        let sw = cfg.switches;
        let blocks = (1..=cfg.blocks)
            .map(|k| {
                let first = k == 1;
                let pre = format!("block{k}");
                Block {
                    tc: sw.tc.then(|| init.tc(&format!("{pre}.tc"), if first { cfg.n_sensors * f } else { e }, cfg)),
                    time: sw.time.then(|| {
                        init.token_encoder(&format!("{pre}.time"), first, cfg.n_sensors * f, e, cfg.ffn_width)
                    }),
                    sensor: sw.sensor.then(|| {
                        init.token_encoder(&format!("{pre}.sensor"), first, cfg.seq_len * f, e, cfg.ffn_width)
                    }),
                    fusion: init.encoder_layer(&format!("{pre}.fusion"), e, cfg.ffn_width),
                }
            })
            .collect();
        let head = init.linear("head", e, cfg.num_classes);
        Layout { blocks, head }
    }
}
