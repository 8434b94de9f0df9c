use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{GraphBatch, LayerBatch};
use super::conv::{self, HeadVars};
use crate::autodiff::{grad_check, GradCheckReport, Matrix, ParamId, ParamSet, Parameter, Tape, Var};
use crate::error::{Error, Result};
use crate::label::NUM_CLASSES;
use crate::seed::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConvKind {
    Gcn,
    #[serde(rename = "gatv2")]
    GatV2 {
        heads: usize,
    },
    #[serde(rename = "graphconv")]
    Graph,
}

impl ConvKind {
    pub const DEFAULT_HEADS: usize = 5;

    pub fn all(heads: usize) -> [ConvKind; 3] {
        [ConvKind::Gcn, ConvKind::GatV2 { heads }, ConvKind::Graph]
    }

    pub fn heads(self) -> usize {
        match self {
            ConvKind::GatV2 { heads } => heads,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConvKind::Gcn => "gcn",
            ConvKind::GatV2 { .. } => "gatv2",
            ConvKind::Graph => "graphconv",
        }
    }
}

impl fmt::Display for ConvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvKind::GatV2 { heads } => write!(f, "gatv2({heads} heads)"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ConvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "gcn" | "gcnconv" => Ok(ConvKind::Gcn),
            "gatv2" | "gatv2conv" | "gat" => Ok(ConvKind::GatV2 {
                heads: ConvKind::DEFAULT_HEADS,
            }),
            "graphconv" | "graph" => Ok(ConvKind::Graph),
            other => Err(Error::InvalidConfig(format!(
                "unknown convolution {other:?} (expected gcn, gatv2 or graphconv)"
            ))),
        }
    }
}

/// How node features of one graph become a single vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Mean,
    /// Per-feature maximum of absolute values.
    MaxAbs,
}

/// How the three pooled layer vectors are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    #[default]
    Concat,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub conv: ConvKind,
    pub in_dim: usize,
    /// Output width of both convolutions (per head for GATv2).
    pub conv_dim: usize,
    pub fc1_dim: usize,
    pub fc2_dim: usize,
    pub dropout: f64,
    pub negative_slope: f64,
    pub pooling: Pooling,
    pub readout: Readout,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            conv: ConvKind::Graph,
            in_dim: 300,
            conv_dim: 128,
            fc1_dim: 128,
            fc2_dim: 64,
            dropout: 0.5,
            negative_slope: 0.2,
            pooling: Pooling::Mean,
            readout: Readout::Concat,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Width of one pooled layer vector.
    pub fn branch_width(&self) -> usize {
        self.conv.heads() * self.conv_dim
    }

    pub fn readout_width(&self) -> usize {
        match self.readout {
            Readout::Concat => 3 * self.branch_width(),
            Readout::Sum => self.branch_width(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.in_dim, self.conv_dim, self.fc1_dim, self.fc2_dim, self.conv.heads()];
        if dims.contains(&0) {
            return Err(Error::InvalidConfig("model dimensions and heads must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ConvParams {
    Gcn { theta: ParamId },
    GatV2 { heads: Vec<(ParamId, ParamId)> },
    Graph { w1: ParamId, w2: ParamId },
}

#[derive(Debug, Clone, PartialEq)]
struct Linear {
    weight: ParamId,
    bias: ParamId,
}

/// Every trainable tensor of the model plus the layout that indexes it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub set: ParamSet,
    branches: [[ConvParams; 2]; 3],
    fc1: Linear,
    fc2: Linear,
    out: Linear,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Matrix {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

impl ModelParams {
    /// Glorot-uniform weights and zero biases, drawn from `config.seed`.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x1417));
        let mut set = ParamSet::new();
        let add = |set: &mut ParamSet, name: String, m: Matrix| set.push(Parameter::new(name, m));

        let mut conv = |set: &mut ParamSet, prefix: &str, fan_in: usize| -> ConvParams {
            let out = config.conv_dim;
            match config.conv {
                ConvKind::Gcn => ConvParams::Gcn {
                    theta: add(set, format!("{prefix}.theta"), glorot(&mut rng, fan_in, out, fan_in, out)),
                },
                ConvKind::Graph => ConvParams::Graph {
                    w1: add(set, format!("{prefix}.w1"), glorot(&mut rng, fan_in, out, fan_in, out)),
                    w2: add(set, format!("{prefix}.w2"), glorot(&mut rng, fan_in, out, fan_in, out)),
                },
                ConvKind::GatV2 { heads } => ConvParams::GatV2 {
                    heads: (0..heads)
                        .map(|h| {
                            let theta = glorot(&mut rng, 2 * fan_in, out, 2 * fan_in, out);
                            let att = glorot(&mut rng, out, 1, out, 1);
                            (
                                add(set, format!("{prefix}.head{h}.theta"), theta),
                                add(set, format!("{prefix}.head{h}.att"), att),
                            )
                        })
                        .collect(),
                },
            }
        };
        let branch_in = config.branch_width();
        let branches = [1, 2, 3].map(|layer| {
            [
                conv(&mut set, &format!("layer{layer}.conv1"), config.in_dim),
                conv(&mut set, &format!("layer{layer}.conv2"), branch_in),
            ]
        });
        let mut linear = |set: &mut ParamSet, name: &str, fan_in: usize, fan_out: usize| Linear {
            weight: set.push(Parameter::new(
                format!("{name}.weight"),
                glorot(&mut rng, fan_in, fan_out, fan_in, fan_out),
            )),
            bias: set.push(Parameter::new(format!("{name}.bias"), Matrix::zeros(1, fan_out))),
        };
        let fc1 = linear(&mut set, "fc1", config.readout_width(), config.fc1_dim);
        let fc2 = linear(&mut set, "fc2", config.fc1_dim, config.fc2_dim);
        let out = linear(&mut set, "out", config.fc2_dim, NUM_CLASSES);
        Ok(ModelParams {
            config,
            set,
            branches,
            fc1,
            fc2,
            out,
        })
    }

    /// Rebuilds the layout for `config` and fills it with named values.
    pub fn from_values(config: ModelConfig, values: &[(String, Matrix)]) -> Result<Self> {
        let mut params = Self::init(config)?;
        if values.len() != params.set.len() {
            return Err(Error::InvalidConfig(format!(
                "checkpoint has {} tensors, model expects {}",
                values.len(),
                params.set.len()
            )));
        }
        for (name, value) in values {
            let id = params
                .set
                .find(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unexpected tensor {name:?}")))?;
            let p = params.set.get_mut(id);
            if p.value.shape() != value.shape() {
                return Err(Error::ShapeMismatch {
                    op: "checkpoint tensor",
                    left: p.value.shape(),
                    right: value.shape(),
                });
            }
            p.value = value.clone();
        }
        Ok(params)
    }

    fn conv_forward(
        &self,
        tape: &mut Tape,
        conv: &ConvParams,
        layer: &LayerBatch,
        x: Var,
    ) -> Result<Var> {
        let adj = &layer.adjacency;
        match conv {
            ConvParams::Gcn { theta } => {
                let theta = tape.param(&self.set, *theta);
                conv::gcn(tape, adj, x, theta)
            }
            ConvParams::Graph { w1, w2 } => {
                let (w1, w2) = (tape.param(&self.set, *w1), tape.param(&self.set, *w2));
                conv::graph_conv(tape, adj, x, w1, w2)
            }
            ConvParams::GatV2 { heads } => {
                let heads: Vec<HeadVars> = heads
                    .iter()
                    .map(|&(theta, att)| HeadVars {
                        theta: tape.param(&self.set, theta),
                        attention: tape.param(&self.set, att),
                    })
                    .collect();
                Ok(conv::gatv2(tape, adj, x, &heads, self.config.negative_slope)?.output)
            }
        }
    }

    /// conv1, ReLU, conv2, ReLU, dropout, then per-graph pooling.
    /// Returns `graphs x branch_width`.
    pub fn layer_branch(
        &self,
        tape: &mut Tape,
        layer_index: usize,
        layer: &LayerBatch,
        training: bool,
        dropout_seed: u64,
    ) -> Result<Var> {
        let [conv1, conv2] = &self.branches[layer_index];
        let x = tape.constant(layer.features.clone());
        let h = self.conv_forward(tape, conv1, layer, x)?;
        let h = tape.relu(h);
        let h = self.conv_forward(tape, conv2, layer, h)?;
        let h = tape.relu(h);
        let h = tape.dropout(h, self.config.dropout, training, dropout_seed)?;
        match self.config.pooling {
            Pooling::Mean => tape.segment_mean(h, layer.segments.clone()),
            Pooling::MaxAbs => tape.segment_max_abs(h, &layer.segments),
        }
    }

    fn linear(&self, tape: &mut Tape, layer: &Linear, x: Var) -> Result<Var> {
        let w = tape.param(&self.set, layer.weight);
        let b = tape.param(&self.set, layer.bias);
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }

    /// Logits (`graphs x 6`) for every graph in the batch.
    pub fn forward(
        &self,
        tape: &mut Tape,
        batch: &GraphBatch,
        training: bool,
        dropout_seed: u64,
    ) -> Result<Var> {
        let mut pooled = Vec::with_capacity(3);
        for (i, layer) in batch.layers.iter().enumerate() {
            if layer.features.cols() != self.config.in_dim {
                return Err(Error::ShapeMismatch {
                    op: "forward features",
                    left: layer.features.shape(),
                    right: (layer.features.rows(), self.config.in_dim),
                });
            }
            let seed = mix_seed(dropout_seed, i as u64);
            pooled.push(self.layer_branch(tape, i, layer, training, seed)?);
        }
        let joined = match self.config.readout {
            Readout::Concat => tape.col_concat(&pooled)?,
            Readout::Sum => {
                let partial = tape.add(pooled[0], pooled[1])?;
                tape.add(partial, pooled[2])?
            }
        };
        let h = self.linear(tape, &self.fc1, joined)?;
        let h = tape.relu(h);
        let h = self.linear(tape, &self.fc2, h)?;
        let h = tape.relu(h);
        self.linear(tape, &self.out, h)
    }

    /// Eval-mode logits as a plain matrix.
    pub fn logits(&self, batch: &GraphBatch) -> Result<Matrix> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, batch, false, 0)?;
        Ok(tape.value(out).clone())
    }
}

/// Mean over the batch of `-w[y] * log softmax(x)[y]`.
pub fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize], weights: &[f64]) -> Result<Var> {
    let logp = tape.log_softmax_rows(logits);
    tape.nll(logp, Rc::new(labels.to_vec()), Rc::new(weights.to_vec()))
}

/// Finite-difference check of the full training loss on `batch`, with
/// dropout active under a fixed mask.
pub fn model_grad_check(
    params: &mut ModelParams,
    batch: &GraphBatch,
    class_weights: &[f64],
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut scratch = params.clone();
    grad_check(
        |tape, set| {
            scratch.set.clone_from(set);
            let logits = scratch.forward(tape, batch, true, 0x9c)?;
            cross_entropy(tape, logits, &batch.labels, class_weights)
        },
        &mut params.set,
        epsilon,
        tolerance,
    )
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn argmax_rows(logits: &Matrix) -> Vec<usize> {
    logits
        .row_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                    if v > bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                })
                .0
        })
        .collect()
}
