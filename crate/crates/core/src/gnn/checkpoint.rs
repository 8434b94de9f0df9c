//! JSON checkpoints: model metadata plus every tensor as nested rows.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same `f64`, so a save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ConvKind, ModelConfig, ModelParams, Pooling, Readout};
use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::label::NUM_CLASSES;

const FORMAT: &str = "mlta-checkpoint";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Dims {
    input: usize,
    conv: usize,
    fc1: usize,
    fc2: usize,
    classes: usize,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    conv_kind: String,
    heads: usize,
    dims: Dims,
    dropout: f64,
    negative_slope: f64,
    pooling: Pooling,
    readout: Readout,
    seed: u64,
    params: BTreeMap<String, Vec<Vec<f64>>>,
}

pub fn checkpoint_to_json(params: &ModelParams) -> String {
    let c = &params.config;
    let file = CheckpointFile {
        format: FORMAT.into(),
        version: VERSION,
        conv_kind: c.conv.name().into(),
        heads: c.conv.heads(),
        dims: Dims {
            input: c.in_dim,
            conv: c.conv_dim,
            fc1: c.fc1_dim,
            fc2: c.fc2_dim,
            classes: NUM_CLASSES,
        },
        dropout: c.dropout,
        negative_slope: c.negative_slope,
        pooling: c.pooling,
        readout: c.readout,
        seed: c.seed,
        params: params
            .set
            .iter()
            .map(|p| (p.name.clone(), p.value.to_rows()))
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("checkpoint values are finite")
}

pub fn checkpoint_from_json(text: &str) -> Result<ModelParams> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported checkpoint {} v{}",
            file.format, file.version
        )));
    }
    if file.dims.classes != NUM_CLASSES {
        return Err(Error::InvalidConfig(format!(
            "checkpoint predicts {} classes, expected {NUM_CLASSES}",
            file.dims.classes
        )));
    }
    let conv = match file.conv_kind.parse::<ConvKind>()? {
        ConvKind::GatV2 { .. } => ConvKind::GatV2 { heads: file.heads },
        other => other,
    };
    let config = ModelConfig {
        conv,
        in_dim: file.dims.input,
        conv_dim: file.dims.conv,
        fc1_dim: file.dims.fc1,
        fc2_dim: file.dims.fc2,
        dropout: file.dropout,
        negative_slope: file.negative_slope,
        pooling: file.pooling,
        readout: file.readout,
        seed: file.seed,
    };
    let values = file
        .params
        .into_iter()
        .map(|(name, rows)| Ok((name, Matrix::from_rows(&rows)?)))
        .collect::<Result<Vec<_>>>()?;
    ModelParams::from_values(config, &values)
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ModelParams) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_to_json(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(conv: ConvKind) -> ModelConfig {
        ModelConfig {
            conv,
            in_dim: 4,
            conv_dim: 3,
            fc1_dim: 5,
            fc2_dim: 4,
            seed: 11,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for conv in ConvKind::all(2) {
            let mut params = ModelParams::init(small(conv)).unwrap();
            // Awkward values that need all 17 digits.
            params.set.iter_mut().next().unwrap().value.as_mut_slice()[0] = 0.1 + 0.2;
            let back = checkpoint_from_json(&checkpoint_to_json(&params)).unwrap();
            for (a, b) in params.set.iter().zip(back.set.iter()) {
                assert_eq!(a.name, b.name);
                let bits = |m: &Matrix| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(&a.value), bits(&b.value));
            }
            assert_eq!(back.config, params.config);
        }
    }

    #[test]
    fn rejects_foreign_documents() {
        let params = ModelParams::init(small(ConvKind::Gcn)).unwrap();
        let text = checkpoint_to_json(&params).replace("mlta-checkpoint", "other");
        assert!(checkpoint_from_json(&text).is_err());
        let missing = checkpoint_to_json(&params).replace("\"fc1.bias\"", "\"fc9.bias\"");
        assert!(checkpoint_from_json(&missing).is_err());
    }
}
