//! Synchronous advantage actor-critic training over parallel episode
//! streams.

use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::model::{sample_index, A2cModel};
use super::net::{ActorCriticNet, Batch, LossWeights, NetConfig};
use crate::env::{Action, Environment, EpisodeState, FeatureGroup, SearchProblem};
use crate::error::{Error, Result};

/// Treatment of the endpoint-embedding inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// Dropout with the given rate on the embedding columns.
    Dropout(f64),
    /// Embedding block zeroed.
    Disabled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Transitions per optimizer step.
    pub minibatch: usize,
    /// Episode streams rolled in lockstep; must divide `minibatch`.
    pub parallel_envs: usize,
    pub gamma: f64,
    pub adam: AdamConfig,
    pub value_loss_weight: f64,
    pub entropy_weight: f64,
    pub hidden: Vec<usize>,
    pub hidden_dropout: f64,
    pub embeddings: EmbeddingMode,
    /// Feature blocks zeroed for ablations.
    pub disabled_groups: Vec<FeatureGroup>,
    /// Multiplier applied to rewards when forming learning targets.
    pub reward_scale: f64,
    pub max_grad_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            minibatch: 100,
            parallel_envs: 10,
            gamma: 0.99,
            adam: AdamConfig::default(),
            value_loss_weight: 0.5,
            entropy_weight: 0.01,
            hidden: vec![2100, 1000, 250, 100],
            hidden_dropout: 0.2,
            embeddings: EmbeddingMode::Dropout(0.2),
            disabled_groups: Vec::new(),
            reward_scale: 1.0,
            max_grad_norm: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.minibatch == 0 || self.parallel_envs == 0 {
            return Err(Error::config(
                "minibatch and parallel_envs must be at least 1",
            ));
        }
        if self.minibatch % self.parallel_envs != 0 {
            return Err(Error::config(format!(
                "parallel_envs {} does not divide minibatch {}",
                self.parallel_envs, self.minibatch
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!(
                "gamma {} outside (0, 1]",
                self.gamma
            )));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::config("reward_scale must be positive"));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if let EmbeddingMode::Dropout(p) = self.embeddings {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::config(format!(
                    "embedding dropout {p} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }

    pub fn zeroed_groups(&self) -> Vec<FeatureGroup> {
        let mut groups = self.disabled_groups.clone();
        if self.embeddings == EmbeddingMode::Disabled {
            groups.push(FeatureGroup::Endpoints);
        }
        groups.sort();
        groups.dedup();
        groups
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    /// Mean undiscounted return of episodes finished in this iteration.
    pub mean_return: Option<f64>,
    pub episodes: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

pub fn write_curve<W: Write>(curve: &[CurvePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,mean_return,policy_loss,value_loss")?;
    for p in curve {
        let ret = p.mean_return.map(|r| r.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{}",
            p.iteration, ret, p.policy_loss, p.value_loss
        )?;
    }
    Ok(())
}

pub struct TrainOutcome {
    pub model: A2cModel,
    pub curve: Vec<CurvePoint>,
}

struct Stream {
    rng: ChaCha8Rng,
    state: EpisodeState,
    candidates: Vec<Action>,
    features: Vec<f64>,
    mask: Vec<bool>,
    episode_return: f64,
}

struct Rollout<'e, 'a> {
    env: &'e Environment<'a>,
    problems: &'e [SearchProblem],
    model: &'e A2cModel,
}

impl Rollout<'_, '_> {
    fn start(&self, mut rng: ChaCha8Rng) -> Result<Stream> {
        let problem = self.problems[rng.gen_range(0..self.problems.len())];
        let state = self.env.reset(&problem)?;
        let mut s = Stream {
            rng,
            state,
            candidates: Vec::new(),
            features: Vec::new(),
            mask: Vec::new(),
            episode_return: 0.0,
        };
        self.observe(&mut s)?;
        Ok(s)
    }

    fn observe(&self, s: &mut Stream) -> Result<()> {
        s.candidates = self.env.candidate_actions(&s.state)?;
        s.features = self.env.featurize(&s.state, &s.candidates)?;
        self.model.mask_features(&mut s.features);
        s.mask = self.env.action_mask(&s.candidates);
        Ok(())
    }

    fn matrices(streams: &[Stream]) -> Result<(Array2<f64>, Array2<bool>)> {
        let width = streams[0].features.len();
        let actions = streams[0].mask.len();
        let x = Array2::from_shape_vec(
            (streams.len(), width),
            streams
                .iter()
                .flat_map(|s| s.features.iter().copied())
                .collect(),
        )
        .map_err(|e| Error::contract(e.to_string()))?;
        let m = Array2::from_shape_vec(
            (streams.len(), actions),
            streams
                .iter()
                .flat_map(|s| s.mask.iter().copied())
                .collect(),
        )
        .map_err(|e| Error::contract(e.to_string()))?;
        Ok((x, m))
    }
}

/// Trains a fresh network on `problems` and returns it with its learning
/// curve. Deterministic given `cfg.seed`.
pub fn train(
    env: &Environment<'_>,
    problems: &[SearchProblem],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(env, problems, cfg, |_| {})
}

pub fn train_with_progress(
    env: &Environment<'_>,
    problems: &[SearchProblem],
    cfg: &TrainConfig,
    mut progress: impl FnMut(&CurvePoint),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if problems.is_empty() {
        return Err(Error::config("training needs at least one problem"));
    }
    let layout = env.layout();
    let endpoints = layout.range(FeatureGroup::Endpoints);
    let net_cfg = NetConfig {
        input_dim: layout.len(),
        hidden: cfg.hidden.clone(),
        num_actions: env.num_actions(),
        hidden_dropout: cfg.hidden_dropout,
        embedding_dropout: match cfg.embeddings {
            EmbeddingMode::Dropout(p) => p,
            EmbeddingMode::Disabled => 0.0,
        },
        embedding_columns: (endpoints.start, endpoints.end),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = ActorCriticNet::new(net_cfg, &mut rng)?;
    let mut model = A2cModel {
        net,
        layout,
        zeroed_groups: cfg.zeroed_groups(),
        train_config: cfg.clone(),
    };
    let mut adam = Adam::new(cfg.adam, model.net.params());
    let weights = LossWeights {
        value: cfg.value_loss_weight,
        entropy: cfg.entropy_weight,
    };

    let width = cfg.parallel_envs;
    let horizon = cfg.minibatch / width;
    let mut streams = Vec::with_capacity(width);
    for _ in 0..width {
        let stream_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        streams.push(
            Rollout {
                env,
                problems,
                model: &model,
            }
            .start(stream_rng)?,
        );
    }

    let mut curve = Vec::with_capacity(cfg.iterations);
    for iteration in 1..=cfg.iterations {
        let rollout = Rollout {
            env,
            problems,
            model: &model,
        };
        let mut features = Vec::with_capacity(cfg.minibatch * layout.len());
        let mut masks = Vec::with_capacity(cfg.minibatch * env.num_actions());
        let mut actions = Vec::with_capacity(cfg.minibatch);
        let mut rewards = vec![0.0; cfg.minibatch];
        let mut dones = vec![false; cfg.minibatch];
        let mut values = vec![0.0; cfg.minibatch];
        let mut finished = Vec::new();

        for t in 0..horizon {
            let (x, m) = Rollout::matrices(&streams)?;
            let fwd = model.net.forward(x.view(), m.view(), None)?;
            let mut chosen = Vec::with_capacity(width);
            for (k, s) in streams.iter_mut().enumerate() {
                let slot =
                    sample_index(fwd.probs.row(k).as_slice().expect("contiguous"), &mut s.rng);
                let action = s
                    .candidates
                    .iter()
                    .find(|a| a.slot == Some(slot))
                    .copied()
                    .ok_or_else(|| Error::contract(format!("sampled empty slot {slot}")))?;
                features.extend_from_slice(&s.features);
                masks.extend_from_slice(&s.mask);
                actions.push(slot);
                values[t * width + k] = fwd.values[k];
                chosen.push(action);
            }
            // streams own their randomness, so stepping them concurrently
            // does not change the outcome
            let results = streams
                .par_iter_mut()
                .zip(chosen.par_iter())
                .map(|(s, action)| -> Result<(f64, bool, Option<f64>)> {
                    let result = env.step(&mut s.state, action)?;
                    s.episode_return += result.reward;
                    let finished = result.done.then_some(s.episode_return);
                    if result.done {
                        let next = ChaCha8Rng::seed_from_u64(s.rng.gen());
                        *s = rollout.start(next)?;
                    } else {
                        rollout.observe(s)?;
                    }
                    Ok((result.reward, result.done, finished))
                })
                .collect::<Result<Vec<_>>>()?;
            for (k, (reward, done, ret)) in results.into_iter().enumerate() {
                rewards[t * width + k] = reward * cfg.reward_scale;
                dones[t * width + k] = done;
                finished.extend(ret);
            }
        }

        let (x, m) = Rollout::matrices(&streams)?;
        let bootstrap = model.net.forward(x.view(), m.view(), None)?.values;
        let mut returns = vec![0.0; cfg.minibatch];
        for k in 0..width {
            let mut ret = bootstrap[k];
            for t in (0..horizon).rev() {
                let row = t * width + k;
                if dones[row] {
                    ret = 0.0;
                }
                ret = rewards[row] + cfg.gamma * ret;
                returns[row] = ret;
            }
        }
        let advantages = returns.iter().zip(&values).map(|(r, v)| r - v).collect();
        let batch = Batch {
            features: Array2::from_shape_vec((cfg.minibatch, layout.len()), features)
                .map_err(|e| Error::contract(e.to_string()))?,
            masks: Array2::from_shape_vec((cfg.minibatch, env.num_actions()), masks)
                .map_err(|e| Error::contract(e.to_string()))?,
            actions,
            returns,
            advantages,
        };

        let dropout = model.net.sample_dropout(batch.len(), &mut rng);
        let (loss, mut grads) = model
            .net
            .loss_and_gradients(&batch, weights, Some(&dropout))?;
        let grad_norm = grads.global_norm();
        if !loss.total.is_finite() || !grad_norm.is_finite() {
            return Err(Error::Diverged {
                iteration,
                detail: format!(
                    "policy loss {}, value loss {}, entropy {}, gradient norm {grad_norm}",
                    loss.policy, loss.value, loss.entropy
                ),
            });
        }
        if let Some(max) = cfg.max_grad_norm {
            if grad_norm > max {
                grads.scale(max / grad_norm);
            }
        }
        adam.update(model.net.params_mut(), &grads);

        let point = CurvePoint {
            iteration,
            mean_return: (!finished.is_empty())
                .then(|| finished.iter().sum::<f64>() / finished.len() as f64),
            episodes: finished.len(),
            policy_loss: loss.policy,
            value_loss: loss.value,
            entropy: loss.entropy,
        };
        progress(&point);
        curve.push(point);
    }
    Ok(TrainOutcome { model, curve })
}
