use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

use super::{ModelParams, TrainConfig, Vocab};

pub const CHECKPOINT_FORMAT: &str = "ratsup-checkpoint/v1";

/// On-disk model: vocabulary, shapes and row-major parameter arrays plus
/// the training configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: TrainConfig,
    pub vocab: Vec<String>,
    pub vocab_size: usize,
    pub dim: usize,
    pub embeddings: Vec<f64>,
    pub query: Vec<f64>,
    pub classifier: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, config: &TrainConfig) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config: config.clone(),
            vocab: params.vocab.tokens().to_vec(),
            vocab_size: params.vocab.len(),
            dim: params.dim,
            embeddings: params.embeddings.clone(),
            query: params.query.clone(),
            classifier: params.classifier.clone(),
            bias: params.bias.clone(),
        }
    }

    pub fn into_params(self) -> Result<ModelParams> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported format {:?} (expected {CHECKPOINT_FORMAT:?})",
                self.format
            )));
        }
        if self.vocab.len() != self.vocab_size {
            return Err(Error::Checkpoint("vocab_size does not match vocab".into()));
        }
        let vocab = Vocab::from_tokens(self.vocab)
            .ok_or_else(|| Error::Checkpoint("vocabulary lacks the reserved rows or has duplicates".into()))?;
        let params = ModelParams {
            vocab,
            dim: self.dim,
            embeddings: self.embeddings,
            query: self.query,
            classifier: self.classifier,
            bias: self.bias,
        };
        if !params.shapes_consistent() {
            return Err(Error::Checkpoint("parameter shapes are inconsistent".into()));
        }
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("checkpoint", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        let mut p = ModelParams::zeros(Vocab::build(["a", "b"], "[UNK]"), 3);
        p.parameters_mut().enumerate().for_each(|(i, x)| *x = (i as f64 * 1.3).sin() / 7.0);
        p
    }

    #[test]
    fn round_trip_is_exact() {
        let p = params();
        let ckpt = Checkpoint::new(&p, &TrainConfig::default());
        let back = Checkpoint::from_json_str(&ckpt.to_json()).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.into_params().unwrap(), p);
    }

    #[test]
    fn rejects_wrong_format_and_shapes() {
        let mut ckpt = Checkpoint::new(&params(), &TrainConfig::default());
        ckpt.format = "other/v0".into();
        assert!(ckpt.clone().into_params().is_err());
        ckpt.format = CHECKPOINT_FORMAT.into();
        ckpt.query.pop();
        assert!(ckpt.into_params().is_err());
    }
}
