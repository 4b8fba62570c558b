//! Flat cosine index over description chunks.
//!
//! Descriptions are split into chunks of at most `chunk_max_chars`
//! characters, every chunk is embedded and stored unit-normalized, and a
//! query scores each app by its best chunk. The scan is exhaustive; results
//! are exact.

mod chunk;
mod embed;
mod format;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunk::{chunk_description, split_text, Chunk};
pub use embed::{cosine, tokenize, EmbedError, EmbeddingProvider, EmbeddingVector, HashingEmbedder};
pub use format::{INDEX_MAGIC, INDEX_VERSION_MAJOR, INDEX_VERSION_MINOR};

use crate::persist::PersistError;
use crate::refinement::Feature;

pub const DEFAULT_CHUNK_MAX_CHARS: usize = 2000;
pub const DEFAULT_DIMENSION: usize = 384;
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("invalid index config: {0}")]
    Config(String),
    #[error("embedding app {app_id} failed: {source}")]
    Embed { app_id: String, source: EmbedError },
    #[error("embedding query failed: {0}")]
    QueryEmbed(EmbedError),
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Persist(#[from] PersistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexConfig {
    pub chunk_max_chars: usize,
    pub dimension: usize,
    pub k: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            chunk_max_chars: DEFAULT_CHUNK_MAX_CHARS,
            dimension: DEFAULT_DIMENSION,
            k: DEFAULT_TOP_K,
        }
    }
}

impl IndexConfig {
    pub fn validate(&self) -> Result<(), IndexError> {
        if self.chunk_max_chars == 0 || self.dimension == 0 || self.k == 0 {
            return Err(IndexError::Config(format!(
                "chunk_max_chars, dimension and k must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryHit {
    pub app_id: String,
    pub score: f64,
    pub best_chunk_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    config: IndexConfig,
    apps: BTreeMap<String, Vec<EmbeddingVector>>,
}

impl VectorIndex {
    pub fn new(config: IndexConfig) -> Result<Self, IndexError> {
        config.validate()?;
        Ok(Self {
            config,
            apps: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn app_count(&self) -> usize {
        self.apps.len()
    }

    pub fn chunk_count(&self) -> usize {
        self.apps.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.apps.is_empty()
    }

    pub fn contains(&self, app_id: &str) -> bool {
        self.apps.contains_key(app_id)
    }

    pub fn app_ids(&self) -> impl Iterator<Item = &str> {
        self.apps.keys().map(String::as_str)
    }

    pub fn vectors(&self, app_id: &str) -> Option<&[EmbeddingVector]> {
        self.apps.get(app_id).map(Vec::as_slice)
    }

    fn check_dimension(&self, v: &EmbeddingVector) -> Result<(), EmbedError> {
        if v.dimension() != self.config.dimension {
            return Err(EmbedError::Dimension {
                expected: self.config.dimension,
                found: v.dimension(),
            });
        }
        Ok(())
    }

    /// Chunk, embed and store one description, replacing any vectors the
    /// app already had. If any chunk fails to embed nothing is changed.
    pub fn add(&mut self, app_id: &str, description: &str, provider: &dyn EmbeddingProvider) -> Result<usize, IndexError> {
        let chunks = split_text(description, self.config.chunk_max_chars);
        let mut vectors = Vec::with_capacity(chunks.len());
        for piece in chunks {
            let v = provider
                .embed(piece)
                .and_then(|v| self.check_dimension(&v).map(|_| v))
                .map_err(|source| IndexError::Embed {
                    app_id: app_id.to_string(),
                    source,
                })?;
            vectors.push(v.normalized());
        }
        let added = vectors.len();
        self.apps.insert(app_id.to_string(), vectors);
        Ok(added)
    }

    pub fn remove(&mut self, app_id: &str) -> bool {
        self.apps.remove(app_id).is_some()
    }

    /// Top-`k` apps by best-chunk cosine similarity, ties broken by `app_id`.
    /// Scores equal after rounding to [`SCORE_RESOLUTION`] count as tied.
    pub fn query(&self, text: &str, k: usize, provider: &dyn EmbeddingProvider) -> Result<Vec<QueryHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if self.apps.is_empty() {
            return Ok(Vec::new());
        }
        let q = provider
            .embed(text)
            .and_then(|v| self.check_dimension(&v).map(|_| v))
            .map_err(IndexError::QueryEmbed)?
            .normalized();
        Ok(self.query_vector(&q, k))
    }

    /// Same as [`VectorIndex::query`] for an already unit-normalized vector.
    pub fn query_vector(&self, q: &EmbeddingVector, k: usize) -> Vec<QueryHit> {
        let mut hits: Vec<QueryHit> = self
            .apps
            .iter()
            .filter_map(|(app_id, chunks)| {
                let mut best: Option<(usize, f64)> = None;
                for (i, v) in chunks.iter().enumerate() {
                    let s = q.dot(v);
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((i, s));
                    }
                }
                best.map(|(best_chunk_index, score)| QueryHit {
                    app_id: app_id.clone(),
                    score: score.clamp(-1.0, 1.0),
                    best_chunk_index,
                })
            })
            .collect();
        hits.sort_by(|a, b| rank_key(b.score).cmp(&rank_key(a.score)).then_with(|| a.app_id.cmp(&b.app_id)));
        hits.truncate(k);
        hits
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let bytes = format::encode(self);
        crate::persist::write_atomic(path, &bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let bytes = std::fs::read(path).map_err(PersistError::from)?;
        Ok(format::decode(&bytes)?)
    }
}

/// Scores are compared at this resolution so that equal similarities reached
/// through different rounding still tie.
pub const SCORE_RESOLUTION: f64 = 1e-12;

fn rank_key(score: f64) -> i64 {
    (score / SCORE_RESOLUTION).round() as i64
}

/// Retrieval query text for a feature, optionally with its super feature.
///
/// `"name: description"`, or `"name: description; super: super description"`.
pub fn build_query(feature: &Feature, context: Option<&Feature>) -> String {
    let own = format!("{}: {}", feature.name, feature.description);
    match context {
        Some(parent) => format!("{own}; {}: {}", parent.name, parent.description),
        None => own,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct FailOn(usize, HashingEmbedder, std::sync::atomic::AtomicUsize);
    impl EmbeddingProvider for FailOn {
        fn dimension(&self) -> usize {
            self.1.dimension()
        }
        fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
            let n = self.2.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            if n == self.0 {
                return Err(EmbedError::Provider("boom".into()));
            }
            self.1.embed(text)
        }
    }

    fn words(n: usize) -> String {
        "focus timer ".chars().cycle().take(n).collect()
    }

    #[test]
    fn add_stores_one_vector_per_chunk_and_replaces() {
        let e = HashingEmbedder::default();
        let mut idx = VectorIndex::new(IndexConfig::default()).unwrap();
        assert_eq!(idx.add("a", &"x".repeat(4500), &e).unwrap(), 3);
        assert_eq!(idx.chunk_count(), 3);
        assert_eq!(idx.add("a", &"x".repeat(4500), &e).unwrap(), 3);
        assert_eq!(idx.chunk_count(), 3);
        idx.add("a", &words(300), &e).unwrap();
        assert_eq!(idx.chunk_count(), 1);
    }

    #[test]
    fn failed_embedding_is_atomic() {
        let mut idx = VectorIndex::new(IndexConfig::default()).unwrap();
        let p = FailOn(1, HashingEmbedder::default(), Default::default());
        assert!(idx.add("a", &"y".repeat(4500), &p).is_err());
        assert_eq!(idx.chunk_count(), 0);
        assert!(!idx.contains("a"));
    }

    #[test]
    fn failed_re_add_keeps_previous_vectors() {
        let e = HashingEmbedder::default();
        let mut idx = VectorIndex::new(IndexConfig::default()).unwrap();
        idx.add("a", &words(500), &e).unwrap();
        let before = idx.vectors("a").unwrap().to_vec();
        let p = FailOn(0, e, Default::default());
        assert!(idx.add("a", &words(900), &p).is_err());
        assert_eq!(idx.vectors("a").unwrap(), &before[..]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut idx = VectorIndex::new(IndexConfig::default()).unwrap();
        let err = idx.add("a", "hello", &HashingEmbedder::new(8)).unwrap_err();
        assert!(matches!(err, IndexError::Embed { source: EmbedError::Dimension { .. }, .. }));
    }

    #[test]
    fn self_query_scores_one() {
        let e = HashingEmbedder::default();
        let mut idx = VectorIndex::new(IndexConfig::default()).unwrap();
        let d = "Meditation sessions with breathing exercises and calming sounds";
        idx.add("calm", d, &e).unwrap();
        idx.add("other", "Budget planner for monthly expenses", &e).unwrap();
        let hits = idx.query(d, 3, &e).unwrap();
        assert_eq!(hits[0].app_id, "calm");
        assert!((hits[0].score - 1.0).abs() <= 1e-9);
        assert_eq!(hits.len(), 2);
    }

    #[test]
    fn orthogonal_app_scores_zero() {
        let e = HashingEmbedder::default();
        // distinct buckets make the one-hot embeddings orthogonal
        assert_ne!(e.slot("alpha").0, e.slot("omega").0);
        let mut idx = VectorIndex::new(IndexConfig::default()).unwrap();
        idx.add("a", "alpha", &e).unwrap();
        idx.add("b", "omega", &e).unwrap();
        let hits = idx.query("alpha", 2, &e).unwrap();
        assert_eq!(hits[0].app_id, "a");
        assert_eq!(hits[1].app_id, "b");
        assert_eq!(hits[1].score, 0.0);
    }

    #[test]
    fn ties_break_by_app_id_and_multi_chunk_apps_appear_once() {
        let e = HashingEmbedder::default();
        let mut idx = VectorIndex::new(IndexConfig {
            chunk_max_chars: 11,
            ..Default::default()
        })
        .unwrap();
        idx.add("zeta", "river boat", &e).unwrap();
        idx.add("alpha", "river boat", &e).unwrap();
        idx.add("multi", "river boat river boat river boat", &e).unwrap();
        let hits = idx.query("river boat", 5, &e).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.app_id.as_str()).collect();
        assert_eq!(ids, vec!["alpha", "multi", "zeta"]);
        assert_eq!(hits[1].best_chunk_index, 0);
    }

    /// Serves fixed two-dimensional vectors by text.
    struct Fixed;
    impl EmbeddingProvider for Fixed {
        fn dimension(&self) -> usize {
            2
        }
        fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
            let x: f64 = match text {
                "q" => return EmbeddingVector::new(vec![1.0, 0.0]),
                "low" => 0.3,
                _ => 0.1 + 0.2,
            };
            EmbeddingVector::new(vec![x, (1.0 - x * x).sqrt()])
        }
    }

    #[test]
    fn rounding_noise_does_not_split_ties() {
        let mut idx = VectorIndex::new(IndexConfig { dimension: 2, ..Default::default() }).unwrap();
        idx.add("b", "high", &Fixed).unwrap();
        idx.add("a", "low", &Fixed).unwrap();
        let hits = idx.query("q", 2, &Fixed).unwrap();
        assert_ne!(hits[0].score, hits[1].score);
        let ids: Vec<_> = hits.iter().map(|h| h.app_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn empty_index_and_zero_k() {
        let e = HashingEmbedder::default();
        let idx = VectorIndex::new(IndexConfig::default()).unwrap();
        assert!(idx.query("anything", 3, &e).unwrap().is_empty());
        assert!(matches!(idx.query("anything", 0, &e), Err(IndexError::ZeroK)));
    }

    #[test]
    fn config_must_be_positive() {
        assert!(VectorIndex::new(IndexConfig { k: 0, ..Default::default() }).is_err());
        assert!(VectorIndex::new(IndexConfig { dimension: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn query_text_forms() {
        let f = Feature::new("Travel Planner", "Plan perfect trip from flights").unwrap();
        assert_eq!(build_query(&f, None), "Travel Planner: Plan perfect trip from flights");
        let s = Feature::new("S", "ds").unwrap();
        let g = Feature::new("F", "df").unwrap();
        assert_eq!(build_query(&g, Some(&s)), "F: df; S: ds");
        let terse = Feature::new("F", "").unwrap();
        assert_eq!(build_query(&terse, None), "F: ");
    }
}
