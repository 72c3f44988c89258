//! Versioned JSON checkpoints for both models.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::apigraph::ApiVocabulary;
use crate::error::{Error, Result};
use crate::gam::{GamConfig, GamModel};
use crate::gat::{GatConfig, GatModel};
use crate::numkernel::ParamSet;

pub const CKPT_FORMAT: &str = "xaidroid-ckpt-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gam,
    Gat,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Gam => "gam",
            ModelKind::Gat => "gat",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gam" => Ok(ModelKind::Gam),
            "gat" => Ok(ModelKind::Gat),
            _ => Err(Error::usage(format!("unknown model {s:?} (expected gam or gat)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub model: ModelKind,
    pub config: Value,
    pub vocab_sha256: String,
    pub vocab_size: usize,
    pub params: ParamSet,
    pub loss_trace: Vec<f64>,
    pub provenance: Value,
}

impl Checkpoint {
    pub fn from_gam(m: &GamModel, vocab: &ApiVocabulary, loss_trace: Vec<f64>, provenance: Value) -> Result<Self> {
        Self::build(ModelKind::Gam, serde_json::to_value(&m.config)?, m.vocab_size, &m.params, vocab, loss_trace, provenance)
    }

    pub fn from_gat(m: &GatModel, vocab: &ApiVocabulary, loss_trace: Vec<f64>, provenance: Value) -> Result<Self> {
        Self::build(ModelKind::Gat, serde_json::to_value(&m.config)?, m.vocab_size, &m.params, vocab, loss_trace, provenance)
    }

    fn build(
        model: ModelKind,
        config: Value,
        vocab_size: usize,
        params: &ParamSet,
        vocab: &ApiVocabulary,
        loss_trace: Vec<f64>,
        provenance: Value,
    ) -> Result<Self> {
        if vocab_size != vocab.len() {
            return Err(Error::usage("model and vocabulary sizes differ"));
        }
        Ok(Checkpoint {
            format: CKPT_FORMAT.to_owned(),
            model,
            config,
            vocab_sha256: vocab.hash(),
            vocab_size,
            params: params.clone(),
            loss_trace,
            provenance,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != CKPT_FORMAT {
            return Err(Error::data(format!("unexpected checkpoint format {:?}", c.format)));
        }
        Ok(c)
    }

    fn check(&self, want: ModelKind, vocab: Option<&ApiVocabulary>) -> Result<()> {
        if self.model != want {
            return Err(Error::usage(format!("checkpoint holds a {} model, expected {want}", self.model)));
        }
        if let Some(v) = vocab {
            if v.hash() != self.vocab_sha256 || v.len() != self.vocab_size {
                return Err(Error::data("checkpoint was trained on a different vocabulary"));
            }
        }
        Ok(())
    }

    fn check_layout(&self, fresh: &ParamSet) -> Result<()> {
        if !fresh.same_layout(&self.params) {
            return Err(Error::data("checkpoint parameters do not match the stored configuration"));
        }
        Ok(())
    }

    /// The GAM model, verifying kind, vocabulary (when given) and shapes.
    pub fn gam(&self, vocab: Option<&ApiVocabulary>) -> Result<GamModel> {
        self.check(ModelKind::Gam, vocab)?;
        let config: GamConfig = serde_json::from_value(self.config.clone())?;
        let fresh = GamModel::new(&config, self.vocab_size)?;
        self.check_layout(&fresh.params)?;
        Ok(GamModel {
            params: self.params.clone(),
            ..fresh
        })
    }

    pub fn gat(&self, vocab: Option<&ApiVocabulary>) -> Result<GatModel> {
        self.check(ModelKind::Gat, vocab)?;
        let config: GatConfig = serde_json::from_value(self.config.clone())?;
        let fresh = GatModel::new(&config, self.vocab_size)?;
        self.check_layout(&fresh.params)?;
        Ok(GatModel {
            params: self.params.clone(),
            ..fresh
        })
    }
}
