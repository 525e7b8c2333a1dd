use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GraphError;
use crate::features::NodeTuple;
use crate::linalg::Matrix;

pub const DEFAULT_EMBEDDING_DIM: usize = 64;
pub const DEFAULT_NAME_BUCKETS: u32 = 256;
pub const UNK_INDEX: usize = 0;
pub const UNK_TOKEN: &str = "<unk>";

const VOCAB_FORMAT: &str = "derail-vocab/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabConfig {
    pub dim: usize,
    pub seed: u64,
    pub name_buckets: u32,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            dim: DEFAULT_EMBEDDING_DIM,
            seed: 42,
            name_buckets: DEFAULT_NAME_BUCKETS,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Token for one node: `type:bucket`, where the bucket hashes the node's
/// name. Literal values never reach the token, and unnamed nodes use `-`.
pub fn node_token(tuple: &NodeTuple, name_buckets: u32) -> String {
    if tuple.n_type == "Literal" || tuple.n_name.is_empty() {
        return format!("{}:-", tuple.n_type);
    }
    let bucket = fnv1a(tuple.n_name.as_bytes()) % u64::from(name_buckets.max(1));
    format!("{}:{bucket}", tuple.n_type)
}

/// Token→index dictionary with its embedding matrix (one row per index).
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    config: VocabConfig,
    tokens: Vec<String>,
    word2idx: HashMap<String, usize>,
    embedding: Matrix,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    format: String,
    dim: usize,
    seed: u64,
    name_buckets: u32,
    tokens: Vec<String>,
    embedding: Vec<Vec<f64>>,
}

/// Builds the dictionary from every tuple in the corpus. Indices are dense,
/// ordered by descending frequency then lexicographically; index 0 is UNK.
pub fn build_vocabulary(
    corpus: &[Vec<NodeTuple>],
    dim: usize,
    seed: u64,
) -> Result<Vocabulary, GraphError> {
    build_vocabulary_with(
        corpus,
        VocabConfig {
            dim,
            seed,
            ..VocabConfig::default()
        },
    )
}

pub fn build_vocabulary_with(
    corpus: &[Vec<NodeTuple>],
    config: VocabConfig,
) -> Result<Vocabulary, GraphError> {
    if corpus.is_empty() {
        return Err(GraphError::EmptyCorpus);
    }
    if config.dim == 0 {
        return Err(GraphError::InvalidArgument(
            "embedding width must be at least 1".into(),
        ));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for tuple in corpus.iter().flatten() {
        *counts
            .entry(node_token(tuple, config.name_buckets))
            .or_default() += 1;
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));

    let mut tokens = Vec::with_capacity(ranked.len() + 1);
    tokens.push(UNK_TOKEN.to_owned());
    tokens.extend(ranked.into_iter().map(|(t, _)| t));

    let bound = 1.0 / (config.dim as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut embedding = Matrix::zeros(tokens.len(), config.dim);
    for x in embedding.as_mut_slice() {
        *x = rng.random_range(-bound..=bound);
    }
    Ok(Vocabulary::from_parts(config, tokens, embedding))
}

impl Vocabulary {
    fn from_parts(config: VocabConfig, tokens: Vec<String>, embedding: Matrix) -> Self {
        let word2idx = tokens
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            config,
            tokens,
            word2idx,
            embedding,
        }
    }

    pub fn config(&self) -> VocabConfig {
        self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// Number of indices, UNK included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.word2idx.get(token).copied().unwrap_or(UNK_INDEX)
    }

    pub fn token_index(&self, tuple: &NodeTuple) -> usize {
        self.index_of(&node_token(tuple, self.config.name_buckets))
    }

    pub fn embedding(&self) -> &Matrix {
        &self.embedding
    }

    pub fn embedding_row(&self, index: usize) -> &[f64] {
        self.embedding.row(index)
    }

    /// SHA-256 over the configuration, token order and embedding bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(VOCAB_FORMAT.as_bytes());
        h.update((self.config.dim as u64).to_le_bytes());
        h.update(self.config.seed.to_le_bytes());
        h.update(self.config.name_buckets.to_le_bytes());
        for t in &self.tokens {
            h.update((t.len() as u64).to_le_bytes());
            h.update(t.as_bytes());
        }
        for x in self.embedding.as_slice() {
            h.update(x.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            format: VOCAB_FORMAT.to_owned(),
            dim: self.config.dim,
            seed: self.config.seed,
            name_buckets: self.config.name_buckets,
            tokens: self.tokens.clone(),
            embedding: self.embedding.to_rows(),
        };
        serde_json::to_string(&file).expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: VocabFile = serde_json::from_str(text)?;
        if file.format != VOCAB_FORMAT {
            return Err(GraphError::BadContainer(format!(
                "unsupported vocabulary format {:?}",
                file.format
            )));
        }
        let bad = |m: &str| GraphError::BadContainer(m.to_owned());
        if file.tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(bad("first token must be UNK"));
        }
        if file.embedding.len() != file.tokens.len()
            || file.embedding.iter().any(|r| r.len() != file.dim)
        {
            return Err(bad("embedding shape does not match tokens × dim"));
        }
        let embedding = Matrix::from_rows(&file.embedding);
        if !embedding.is_finite() {
            return Err(bad("embedding contains non-finite values"));
        }
        let config = VocabConfig {
            dim: file.dim,
            seed: file.seed,
            name_buckets: file.name_buckets,
        };
        Ok(Vocabulary::from_parts(config, file.tokens, embedding))
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        Vocabulary::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DependencyCategory;

    fn tuple(n_type: &str, name: &str) -> NodeTuple {
        NodeTuple {
            n_id: 0,
            n_name: name.into(),
            n_type: n_type.into(),
            n_value: String::new(),
            category: DependencyCategory::Data,
        }
    }

    #[test]
    fn single_token_kind_gives_two_entries() {
        let v = build_vocabulary(&[vec![tuple("Identifier", "x"); 3]], 4, 1).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.index_of("nope"), UNK_INDEX);
        assert_eq!(v.token_index(&tuple("Identifier", "x")), 1);
    }

    #[test]
    fn same_seed_same_embedding_bits() {
        let corpus = vec![vec![tuple("Identifier", "x"), tuple("Return", "")]];
        let a = build_vocabulary(&corpus, 8, 9).unwrap();
        let b = build_vocabulary(&corpus, 8, 9).unwrap();
        assert_eq!(a.embedding().as_slice(), b.embedding().as_slice());
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = build_vocabulary(&corpus, 8, 10).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn embedding_stays_inside_bound() {
        let v = build_vocabulary(&[vec![tuple("A", "a"), tuple("B", "b")]], 16, 3).unwrap();
        let bound = 0.25;
        assert!(v.embedding().as_slice().iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn frequency_then_lexicographic_order() {
        let corpus = vec![vec![
            tuple("Return", ""),
            tuple("Break", ""),
            tuple("Return", ""),
            tuple("Assignment", ""),
        ]];
        let v = build_vocabulary(&corpus, 2, 0).unwrap();
        assert_eq!(v.tokens(), ["<unk>", "Return:-", "Assignment:-", "Break:-"]);
    }

    #[test]
    fn literal_values_do_not_reach_tokens() {
        let mut a = tuple("Literal", "");
        a.n_value = "5".into();
        let mut b = a.clone();
        b.n_value = "7".into();
        assert_eq!(node_token(&a, 256), node_token(&b, 256));
    }

    #[test]
    fn empty_corpus_and_zero_width_are_rejected() {
        assert!(matches!(
            build_vocabulary(&[], 4, 0),
            Err(GraphError::EmptyCorpus)
        ));
        assert!(build_vocabulary(&[vec![]], 0, 0).is_err());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let v = build_vocabulary(&[vec![tuple("A", "a"), tuple("B", "")]], 5, 77).unwrap();
        let back = Vocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.fingerprint(), v.fingerprint());
    }
}
