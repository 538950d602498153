//! Pretrained word vectors, entity vectors and cosine similarity.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct EmbeddingStore {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

/// Mean vector of a description plus how many of its tokens were known.
#[derive(Clone, Debug, PartialEq)]
pub struct EntityVector {
    pub values: Vec<f64>,
    pub known_tokens: usize,
}

impl EntityVector {
    /// True when no description token was in the vocabulary.
    pub fn is_fallback(&self) -> bool {
        self.known_tokens == 0
    }
}

impl EmbeddingStore {
    /// Parses the whitespace-separated `token v1 .. vd` text format.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut dimension = None;
        let mut vectors = HashMap::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else {
                continue;
            };
            let values = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| format!("bad component `{f}`: {e}"))
                })
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(parse_err)?;
            if values.is_empty() {
                return Err(parse_err(format!("token `{token}` has no vector")));
            }
            match dimension {
                None => dimension = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(parse_err(format!(
                        "token `{token}` has dimension {} but earlier rows have {d}",
                        values.len()
                    )))
                }
                Some(_) => {}
            }
            if vectors.insert(token.to_string(), values).is_some() {
                log::warn!(
                    "{}: line {}: duplicate token `{token}`, keeping the later vector",
                    path.display(),
                    lineno + 1
                );
            }
        }
        let dimension = dimension.ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no vectors found, dimension undeterminable".into(),
        })?;
        Ok(Self { dimension, vectors })
    }

    pub fn from_vectors(vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        let mut dims = vectors.values().map(Vec::len);
        let dimension = dims
            .next()
            .ok_or_else(|| Error::contract("embedding store needs at least one vector"))?;
        if dimension == 0 || dims.any(|d| d != dimension) {
            return Err(Error::contract(
                "embedding vectors must share one positive dimension",
            ));
        }
        Ok(Self { dimension, vectors })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Average of the in-vocabulary token vectors; zero when none is known.
    pub fn entity_vector(&self, description: &[String]) -> EntityVector {
        let mut values = vec![0.0; self.dimension];
        let mut known_tokens = 0;
        for v in description.iter().filter_map(|t| self.get(t)) {
            known_tokens += 1;
            for (acc, x) in values.iter_mut().zip(v) {
                *acc += x;
            }
        }
        if known_tokens > 0 {
            let k = known_tokens as f64;
            values.iter_mut().for_each(|x| *x /= k);
        }
        EntityVector {
            values,
            known_tokens,
        }
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "cosine of vectors with dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(cosine_unchecked(a, b, norm(a), norm(b)))
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn cosine_unchecked(a: &[f64], b: &[f64], norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn loads_uniform_dimension() {
        let f = file("a 1 0 0 0\nb 0 1 0 0\nc 0 0 1 0.5\n");
        let store = EmbeddingStore::load(f.path()).unwrap();
        assert_eq!(store.dimension(), 4);
        assert_eq!(store.len(), 3);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(EmbeddingStore::load(file("").path()).is_err());
    }

    #[test]
    fn ragged_or_malformed_rows_name_the_line() {
        let f = file("a 1 2\nb 1 2 3\n");
        assert!(matches!(
            EmbeddingStore::load(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
        let f = file("a 1 2\nb 1 x\n");
        assert!(matches!(
            EmbeddingStore::load(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_token_last_wins() {
        let store = EmbeddingStore::load(file("a 1 2\na 3 4\n").path()).unwrap();
        assert_eq!(store.get("a"), Some(&[3.0, 4.0][..]));
    }

    #[test]
    fn entity_vector_averages_known_tokens() {
        let store = EmbeddingStore::load(file("v 1 0\nw 0 3\n").path()).unwrap();
        assert_eq!(store.entity_vector(&toks(&["v"])).values, vec![1.0, 0.0]);
        assert_eq!(
            store.entity_vector(&toks(&["v", "w"])).values,
            vec![0.5, 1.5]
        );
        let with_oov = store.entity_vector(&toks(&["v", "zzz", "w"]));
        assert_eq!(with_oov.values, vec![0.5, 1.5]);
        assert_eq!(with_oov.known_tokens, 2);
        let none = store.entity_vector(&toks(&["zzz"]));
        assert!(none.is_fallback());
        assert_eq!(none.values, vec![0.0, 0.0]);
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn cosine_properties(
            v in prop::collection::vec(-10.0f64..10.0, 5),
            w in prop::collection::vec(-10.0f64..10.0, 5),
            alpha in 0.01f64..100.0,
        ) {
            let c = cosine(&v, &w).unwrap();
            prop_assert!(c.abs() <= 1.0 + 1e-9);
            prop_assert!((c - cosine(&w, &v).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = v.iter().map(|x| alpha * x).collect();
            prop_assert!((cosine(&scaled, &w).unwrap() - c).abs() < 1e-9);
        }

        #[test]
        fn entity_vector_permutation_invariant(perm in Just(vec!["a", "b", "c", "d"]).prop_shuffle()) {
            let store = EmbeddingStore::load(file("a 1 2\nb -1 0.5\nc 4 4\n").path()).unwrap();
            let base = store.entity_vector(&toks(&["a", "b", "c", "d"])).values;
            let shuffled = store.entity_vector(&toks(&perm)).values;
            for (x, y) in base.iter().zip(&shuffled) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
