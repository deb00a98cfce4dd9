// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pretrained BERT encoder in pure Rust, evaluation mode.
//!
//! The weights directory must hold `config.json`, `vocab.txt` and
//! `model.safetensors` as exported by the usual model hubs. Parameter names
//! are accepted with or without the leading `bert.` prefix, and layer norms
//! may use either `weight`/`bias` or the older `gamma`/`beta` naming.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use safetensors::{Dtype, SafeTensors};
use serde::Deserialize;

use crate::alignment::WordPieceTokenizer;
use crate::error::{Error, Result};
use crate::util::sha256_hex;

use super::{softmax_rows, EncoderBackend, EncoderOutput, EncoderSpec};

/// The subset of a hub `config.json` the forward pass needs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct BertConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_position_embeddings: usize,
    #[serde(default = "default_type_vocab")]
    pub type_vocab_size: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
    #[serde(default = "default_act")]
    pub hidden_act: String,
}

fn default_type_vocab() -> usize {
    2
}

fn default_eps() -> f64 {
    1e-12
}

fn default_act() -> String {
    "gelu".into()
}

impl BertConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Backend(format!("{}: {e}", path.display())))?;
        if config.num_attention_heads == 0 || config.hidden_size % config.num_attention_heads != 0 {
            return Err(Error::Backend(format!(
                "hidden size {} is not divisible by {} heads",
                config.hidden_size, config.num_attention_heads
            )));
        }
        if !matches!(config.hidden_act.as_str(), "gelu" | "gelu_new" | "gelu_pytorch_tanh") {
            return Err(Error::Backend(format!(
                "unsupported activation `{}`",
                config.hidden_act
            )));
        }
        Ok(config)
    }

    pub fn spec(&self) -> EncoderSpec {
        EncoderSpec {
            hidden_size: self.hidden_size,
            num_layers: self.num_hidden_layers,
            num_heads: self.num_attention_heads,
            max_sequence_length: self.max_position_embeddings,
        }
    }
}

/// Affine layer stored transposed (`in × out`) so activations multiply on
/// the left.
#[derive(Debug, Clone)]
struct Linear {
    weight_t: DMatrix<f32>,
    bias: DVector<f32>,
}

impl Linear {
    fn forward(&self, x: &DMatrix<f32>) -> DMatrix<f32> {
        let mut y = x * &self.weight_t;
        for mut row in y.row_iter_mut() {
            row += self.bias.transpose();
        }
        y
    }
}

#[derive(Debug, Clone)]
struct LayerNorm {
    gamma: DVector<f32>,
    beta: DVector<f32>,
    eps: f32,
}

impl LayerNorm {
    fn forward(&self, x: &mut DMatrix<f32>) {
        let h = x.ncols() as f32;
        for mut row in x.row_iter_mut() {
            let mean = row.sum() / h;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / h;
            let inv = 1.0 / (var + self.eps).sqrt();
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * inv * self.gamma[j] + self.beta[j];
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Layer {
    query: Linear,
    key: Linear,
    value: Linear,
    attn_out: Linear,
    attn_norm: LayerNorm,
    intermediate: Linear,
    output: Linear,
    out_norm: LayerNorm,
}

/// A loaded BERT checkpoint.
#[derive(Debug, Clone)]
pub struct BertBackend {
    config: BertConfig,
    word: DMatrix<f32>,
    position: DMatrix<f32>,
    token_type: DMatrix<f32>,
    embed_norm: LayerNorm,
    layers: Vec<Layer>,
    tanh_gelu: bool,
    id: String,
    dir: PathBuf,
}

struct Weights<'a> {
    tensors: SafeTensors<'a>,
    prefix: &'static str,
}

impl Weights<'_> {
    fn raw(&self, name: &str) -> Result<(Vec<usize>, Vec<f32>)> {
        let full = format!("{}{name}", self.prefix);
        let view = self
            .tensors
            .tensor(&full)
            .map_err(|_| Error::Backend(format!("weights lack tensor `{full}`")))?;
        let bytes = view.data();
        let values = match view.dtype() {
            Dtype::F32 => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
            Dtype::BF16 => bytes
                .chunks_exact(2)
                .map(|c| f32::from_bits(u32::from(u16::from_le_bytes([c[0], c[1]])) << 16))
                .collect(),
            other => {
                return Err(Error::Backend(format!(
                    "tensor `{full}` has unsupported dtype {other:?}"
                )))
            }
        };
        Ok((view.shape().to_vec(), values))
    }

    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f32>> {
        let (shape, values) = self.raw(name)?;
        if shape != [rows, cols] {
            return Err(Error::Backend(format!(
                "tensor `{name}` has shape {shape:?}, expected [{rows}, {cols}]"
            )));
        }
        Ok(DMatrix::from_row_slice(rows, cols, &values))
    }

    fn vector(&self, name: &str, len: usize) -> Result<DVector<f32>> {
        let (shape, values) = self.raw(name)?;
        if shape != [len] {
            return Err(Error::Backend(format!(
                "tensor `{name}` has shape {shape:?}, expected [{len}]"
            )));
        }
        Ok(DVector::from_vec(values))
    }

    fn linear(&self, name: &str, input: usize, output: usize) -> Result<Linear> {
        let (shape, values) = self.raw(&format!("{name}.weight"))?;
        if shape != [output, input] {
            return Err(Error::Backend(format!(
                "tensor `{name}.weight` has shape {shape:?}, expected [{output}, {input}]"
            )));
        }
        Ok(Linear {
            // row-major [out, in] read column-major is exactly the transpose
            weight_t: DMatrix::from_column_slice(input, output, &values),
            bias: self.vector(&format!("{name}.bias"), output)?,
        })
    }

    fn layer_norm(&self, name: &str, len: usize, eps: f32) -> Result<LayerNorm> {
        let pick = |a: &str, b: &str| {
            self.vector(&format!("{name}.{a}"), len)
                .or_else(|_| self.vector(&format!("{name}.{b}"), len))
        };
        Ok(LayerNorm {
            gamma: pick("weight", "gamma")?,
            beta: pick("bias", "beta")?,
            eps,
        })
    }
}

impl BertBackend {
    /// Load `config.json` and `model.safetensors` from `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let config = BertConfig::from_file(&dir.join("config.json"))?;
        let weights_path = dir.join("model.safetensors");
        let bytes = fs::read(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
        let tensors = SafeTensors::deserialize(&bytes)
            .map_err(|e| Error::Backend(format!("{}: {e}", weights_path.display())))?;
        let prefix = if tensors.names().iter().any(|n| n.starts_with("bert.")) {
            "bert."
        } else {
            ""
        };
        let w = Weights { tensors, prefix };
        let (h, inter) = (config.hidden_size, config.intermediate_size);
        let eps = config.layer_norm_eps as f32;

        let mut layers = Vec::with_capacity(config.num_hidden_layers);
        for i in 0..config.num_hidden_layers {
            let p = format!("encoder.layer.{i}");
            layers.push(Layer {
                query: w.linear(&format!("{p}.attention.self.query"), h, h)?,
                key: w.linear(&format!("{p}.attention.self.key"), h, h)?,
                value: w.linear(&format!("{p}.attention.self.value"), h, h)?,
                attn_out: w.linear(&format!("{p}.attention.output.dense"), h, h)?,
                attn_norm: w.layer_norm(&format!("{p}.attention.output.LayerNorm"), h, eps)?,
                intermediate: w.linear(&format!("{p}.intermediate.dense"), h, inter)?,
                output: w.linear(&format!("{p}.output.dense"), inter, h)?,
                out_norm: w.layer_norm(&format!("{p}.output.LayerNorm"), h, eps)?,
            });
        }
        let digest = sha256_hex(&bytes);
        Ok(Self {
            word: w.matrix("embeddings.word_embeddings.weight", config.vocab_size, h)?,
            position: w.matrix(
                "embeddings.position_embeddings.weight",
                config.max_position_embeddings,
                h,
            )?,
            token_type: w.matrix("embeddings.token_type_embeddings.weight", config.type_vocab_size, h)?,
            embed_norm: w.layer_norm("embeddings.LayerNorm", h, eps)?,
            layers,
            tanh_gelu: config.hidden_act != "gelu",
            id: format!(
                "reference:bert:l{}:h{}:sha256={}",
                config.num_hidden_layers,
                config.hidden_size,
                &digest[..16]
            ),
            config,
            dir: dir.to_path_buf(),
        })
    }

    pub fn config(&self) -> &BertConfig {
        &self.config
    }

    /// The tokenizer shipped next to the weights (`vocab.txt`).
    pub fn tokenizer(&self) -> Result<WordPieceTokenizer> {
        WordPieceTokenizer::from_vocab_file(self.dir.join("vocab.txt"))
    }

    fn gelu(&self, x: f32) -> f32 {
        if self.tanh_gelu {
            let c = (2.0 / std::f32::consts::PI).sqrt();
            0.5 * x * (1.0 + (c * (x + 0.044_715 * x * x * x)).tanh())
        } else {
            0.5 * x * (1.0 + libm::erff(x / std::f32::consts::SQRT_2))
        }
    }
}

impl EncoderBackend for BertBackend {
    fn spec(&self) -> EncoderSpec {
        self.config.spec()
    }

    fn id(&self) -> String {
        self.id.clone()
    }

    fn encode(&self, ids: &[u32]) -> Result<EncoderOutput> {
        let l = ids.len();
        let h = self.config.hidden_size;
        let heads = self.config.num_attention_heads;
        let dh = h / heads;
        if l == 0 || l > self.config.max_position_embeddings {
            return Err(Error::Backend(format!(
                "sequence length {l} outside 1..={}",
                self.config.max_position_embeddings
            )));
        }
        let mut x = DMatrix::<f32>::zeros(l, h);
        for (i, &id) in ids.iter().enumerate() {
            let id = id as usize;
            if id >= self.config.vocab_size {
                return Err(Error::Backend(format!("token id {id} outside the vocabulary")));
            }
            let row = self.word.row(id) + self.position.row(i) + self.token_type.row(0);
            x.set_row(i, &row);
        }
        self.embed_norm.forward(&mut x);

        let mut embeddings = Vec::with_capacity((self.layers.len() + 1) * l * h);
        let mut attentions = Vec::with_capacity(self.layers.len() * heads * l * l);
        push_rows(&x, &mut embeddings);

        let scale = 1.0 / (dh as f32).sqrt();
        for layer in &self.layers {
            let q = layer.query.forward(&x);
            let k = layer.key.forward(&x);
            let v = layer.value.forward(&x);
            let mut context = DMatrix::<f32>::zeros(l, h);
            for head in 0..heads {
                let cols = head * dh;
                let qh = q.columns(cols, dh);
                let kh = k.columns(cols, dh);
                let scores = (qh * kh.transpose()) * scale;
                let mut probs: Vec<f32> = Vec::with_capacity(l * l);
                push_rows(&scores, &mut probs);
                softmax_rows(&mut probs, l);
                let p = DMatrix::from_row_slice(l, l, &probs);
                context.columns_mut(cols, dh).copy_from(&(&p * v.columns(cols, dh)));
                attentions.extend_from_slice(&probs);
            }
            let mut attn = layer.attn_out.forward(&context) + &x;
            layer.attn_norm.forward(&mut attn);
            let mut inter = layer.intermediate.forward(&attn);
            inter.apply(|v| *v = self.gelu(*v));
            let mut out = layer.output.forward(&inter) + &attn;
            layer.out_norm.forward(&mut out);
            x = out;
            push_rows(&x, &mut embeddings);
        }
        Ok(EncoderOutput {
            embeddings,
            attentions,
        })
    }
}

fn push_rows(m: &DMatrix<f32>, out: &mut Vec<f32>) {
    for row in m.row_iter() {
        out.extend(row.iter().copied());
    }
}
