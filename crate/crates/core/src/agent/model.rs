//! Trained actor-critic bundle, its binary file format and the policy
//! that acts with it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::net::{argmax, ActorCriticNet, Dense, NetConfig, Params};
use super::train::TrainConfig;
use crate::env::{Action, Environment, EpisodeState, FeatureGroup, FeatureLayout};
use crate::error::{Error, Result};
use crate::policy::{EpisodeRng, Policy};

const MAGIC: &[u8; 8] = b"FRMODEL1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct A2cModel {
    pub net: ActorCriticNet,
    pub layout: FeatureLayout,
    /// Feature blocks forced to zero before every forward pass.
    pub zeroed_groups: Vec<FeatureGroup>,
    pub train_config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    net: NetConfig,
    layout: FeatureLayout,
    zeroed_groups: Vec<FeatureGroup>,
    train_config: TrainConfig,
    param_count: usize,
}

impl A2cModel {
    pub fn mask_features(&self, features: &mut [f64]) {
        for &g in &self.zeroed_groups {
            features[self.layout.range(g)].fill(0.0);
        }
    }

    pub fn check_compatible(&self, env: &Environment<'_>) -> Result<()> {
        if env.layout() != self.layout || env.num_actions() != self.net.config().num_actions {
            return Err(Error::config(format!(
                "model expects layout {:?} with {} actions, environment has {:?} with {}",
                self.layout,
                self.net.config().num_actions,
                env.layout(),
                env.num_actions()
            )));
        }
        Ok(())
    }

    /// Action probabilities for one state, without dropout.
    pub fn probabilities(&self, features: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
        let mut x = features.to_vec();
        self.mask_features(&mut x);
        let x =
            Array2::from_shape_vec((1, x.len()), x).map_err(|e| Error::contract(e.to_string()))?;
        let m = Array2::from_shape_vec((1, mask.len()), mask.to_vec())
            .map_err(|e| Error::contract(e.to_string()))?;
        Ok(self
            .net
            .forward(x.view(), m.view(), None)?
            .probs
            .row(0)
            .to_vec())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let header = Header {
            format_version: FORMAT_VERSION,
            net: self.net.config().clone(),
            layout: self.layout,
            zeroed_groups: self.zeroed_groups.clone(),
            train_config: self.train_config.clone(),
            param_count: self.net.num_params(),
        };
        let json = serde_json::to_vec(&header)?;
        out.write_all(MAGIC)?;
        out.write_all(&(json.len() as u64).to_le_bytes())?;
        out.write_all(&json)?;
        for tensor in self.net.params().slices() {
            for x in tensor {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file)).map_err(|msg| Error::artifact(path, msg))
    }

    fn read_from<R: Read>(input: &mut R) -> std::result::Result<Self, String> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|e| e.to_string())?;
        if &magic != MAGIC {
            return Err("not a focused-reading model file".into());
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len).map_err(|e| e.to_string())?;
        let len = usize::try_from(u64::from_le_bytes(len)).map_err(|e| e.to_string())?;
        if len > 1 << 24 {
            return Err(format!("implausible header length {len}"));
        }
        let mut json = vec![0u8; len];
        input.read_exact(&mut json).map_err(|e| e.to_string())?;
        let header: Header = serde_json::from_slice(&json).map_err(|e| e.to_string())?;
        if header.format_version != FORMAT_VERSION {
            return Err(format!(
                "unsupported model format version {}",
                header.format_version
            ));
        }

        let mut read = |n: usize| -> std::result::Result<Vec<f64>, String> {
            let mut buf = vec![0u8; n * 8];
            input
                .read_exact(&mut buf)
                .map_err(|e| format!("truncated parameters: {e}"))?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let mut dense = |inputs: usize, outputs: usize| -> std::result::Result<Dense, String> {
            let weight = Array2::from_shape_vec((outputs, inputs), read(inputs * outputs)?)
                .map_err(|e| e.to_string())?;
            let bias = Array1::from_vec(read(outputs)?);
            Ok(Dense { weight, bias })
        };
        let cfg = header.net;
        let mut trunk = Vec::with_capacity(cfg.hidden.len());
        let mut width = cfg.input_dim;
        for &h in &cfg.hidden {
            trunk.push(dense(width, h)?);
            width = h;
        }
        let policy = dense(width, cfg.num_actions)?;
        let value = dense(width, 1)?;
        let mut rest = Vec::new();
        input.read_to_end(&mut rest).map_err(|e| e.to_string())?;
        if !rest.is_empty() {
            return Err(format!(
                "{} trailing bytes after the parameters",
                rest.len()
            ));
        }
        let net = ActorCriticNet::from_params(
            cfg,
            Params {
                trunk,
                policy,
                value,
            },
        )
        .map_err(|e| e.to_string())?;
        if net.num_params() != header.param_count {
            return Err("parameter count mismatch".into());
        }
        if header.layout.len() != net.config().input_dim {
            return Err("feature layout does not match the network input".into());
        }
        Ok(Self {
            net,
            layout: header.layout,
            zeroed_groups: header.zeroed_groups,
            train_config: header.train_config,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActMode {
    /// Highest-probability action, lowest slot on ties.
    #[default]
    Greedy,
    Sample,
}

/// Draws an index from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u = rng.gen::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

pub struct A2cPolicy {
    pub model: A2cModel,
    pub mode: ActMode,
}

impl Policy for A2cPolicy {
    fn name(&self) -> String {
        "a2c".into()
    }

    fn choose(
        &self,
        env: &Environment<'_>,
        state: &EpisodeState,
        candidates: &[Action],
        rng: &mut EpisodeRng,
    ) -> Result<Action> {
        let features = env.featurize(state, candidates)?;
        let probs = self
            .model
            .probabilities(&features, &env.action_mask(candidates))?;
        let slot = match self.mode {
            ActMode::Greedy => argmax(&probs),
            ActMode::Sample => sample_index(&probs, rng),
        };
        candidates
            .iter()
            .find(|a| a.slot == Some(slot))
            .copied()
            .ok_or_else(|| Error::contract(format!("policy chose empty slot {slot}")))
    }
}
