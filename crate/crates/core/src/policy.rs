//! Query-selection policies: the common interface and the three
//! non-learned baselines.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{EntityId, Template};
use crate::env::{Action, Environment, EpisodeState};
use crate::error::{Error, Result};

/// Randomness source owned by one episode.
pub type EpisodeRng = ChaCha8Rng;

pub trait Policy: Sync {
    fn name(&self) -> String;

    /// Picks the next action. Beam policies return one of `candidates`;
    /// others may build queries outside the beam.
    fn choose(
        &self,
        env: &Environment<'_>,
        state: &EpisodeState,
        candidates: &[Action],
        rng: &mut EpisodeRng,
    ) -> Result<Action>;
}

fn query_indices(candidates: &[Action]) -> Vec<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, a)| a.query().is_some())
        .map(|(i, _)| i)
        .collect()
}

/// Uniform over the query candidates; never early stop.
pub fn random_choice<R: Rng + ?Sized>(candidates: &[Action], rng: &mut R) -> Result<usize> {
    query_indices(candidates)
        .choose(rng)
        .copied()
        .ok_or_else(|| Error::contract("no query candidates to choose from"))
}

/// Uniform over the templates present, then uniform within the template.
pub fn conditional_choice<R: Rng + ?Sized>(candidates: &[Action], rng: &mut R) -> Result<usize> {
    let groups: Vec<Vec<usize>> = Template::ALL
        .iter()
        .map(|&t| {
            candidates
                .iter()
                .enumerate()
                .filter(|(_, a)| a.template() == Some(t))
                .map(|(i, _)| i)
                .collect::<Vec<_>>()
        })
        .filter(|g| !g.is_empty())
        .collect();
    let group = groups
        .choose(rng)
        .ok_or_else(|| Error::contract("no query candidates to choose from"))?;
    Ok(*group.choose(rng).expect("groups are non-empty"))
}

/// Where the cascade baseline draws its entity pairs from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PairSource {
    /// Any two vertices of the episode graph.
    #[default]
    AllPairs,
    /// Only the pairs in the ranked beam.
    Beam,
}

/// Conjunction over a random pair, or the disjunction over the same pair
/// when the conjunction would read no unseen documents.
pub fn cascade_choice(
    env: &Environment<'_>,
    state: &EpisodeState,
    candidates: &[Action],
    source: PairSource,
    rng: &mut EpisodeRng,
) -> Result<Action> {
    let pair = match source {
        PairSource::AllPairs => {
            let vertices: Vec<EntityId> = state.kg.vertices().collect();
            if vertices.len() < 2 {
                None
            } else {
                let i = rng.gen_range(0..vertices.len());
                let mut j = rng.gen_range(0..vertices.len() - 1);
                if j >= i {
                    j += 1;
                }
                Some((vertices[i], vertices[j]))
            }
        }
        PairSource::Beam => {
            let conj: Vec<&Action> = candidates
                .iter()
                .filter(|a| a.template() == Some(Template::Conjunction))
                .collect();
            conj.choose(rng).map(|a| {
                let e = a.query().expect("conjunction").entities();
                (e[0], e[1])
            })
        }
    };
    let Some((a, b)) = pair else {
        // degenerate graph: random singleton
        let singles: Vec<&Action> = candidates
            .iter()
            .filter(|a| a.template() == Some(Template::Singleton))
            .collect();
        return singles
            .choose(rng)
            .map(|a| **a)
            .ok_or_else(|| Error::contract("no pair or singleton candidates"));
    };
    let conjunction = env.pair_action(Template::Conjunction, a, b)?;
    let query = conjunction.query().expect("query");
    let chosen = if env.unseen_docs(state, query).is_empty() {
        env.pair_action(Template::Disjunction, a, b)?
    } else {
        conjunction
    };
    // reuse the beam slot when the query happens to be in the beam
    Ok(candidates
        .iter()
        .find(|c| c.kind == chosen.kind)
        .copied()
        .unwrap_or(chosen))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "random".into()
    }

    fn choose(
        &self,
        _: &Environment<'_>,
        _: &EpisodeState,
        candidates: &[Action],
        rng: &mut EpisodeRng,
    ) -> Result<Action> {
        Ok(candidates[random_choice(candidates, rng)?])
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ConditionalPolicy;

impl Policy for ConditionalPolicy {
    fn name(&self) -> String {
        "conditional".into()
    }

    fn choose(
        &self,
        _: &Environment<'_>,
        _: &EpisodeState,
        candidates: &[Action],
        rng: &mut EpisodeRng,
    ) -> Result<Action> {
        Ok(candidates[conditional_choice(candidates, rng)?])
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CascadePolicy {
    pub pairs: PairSource,
}

impl Policy for CascadePolicy {
    fn name(&self) -> String {
        "cascade".into()
    }

    fn choose(
        &self,
        env: &Environment<'_>,
        state: &EpisodeState,
        candidates: &[Action],
        rng: &mut EpisodeRng,
    ) -> Result<Action> {
        cascade_choice(env, state, candidates, self.pairs, rng)
    }
}
