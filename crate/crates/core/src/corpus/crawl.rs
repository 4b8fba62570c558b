//! Two-step app id collection: dictionary-seeded search, then breadth-first
//! expansion over the "similar app" / "same developer" graph.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::persist::PersistError;

/// A store search returns at most this many apps per query.
pub const SEARCH_RESULT_CAP: usize = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct SourceError(pub String);

/// Where app ids come from. Similarity and developer edges are not
/// distinguished; `neighbors` returns them as one list.
pub trait AppGraphSource: Send + Sync {
    fn search(&self, word: &str) -> Result<Vec<String>, SourceError>;
    fn neighbors(&self, app_id: &str) -> Result<Vec<String>, SourceError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceFailure {
    Search { word: String, error: String },
    Neighbors { app_id: String, error: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlOutcome {
    /// Distinct ids in discovery order.
    pub app_ids: Vec<String>,
    /// Source calls that failed and were skipped.
    pub failures: Vec<SourceFailure>,
}

/// Collect up to `max_apps` distinct app ids.
///
/// Every seed word is searched first (results capped at
/// [`SEARCH_RESULT_CAP`]); the seeds then drive a FIFO breadth-first walk of
/// `neighbors`. Collection stops as soon as `max_apps` ids are known. Failed
/// source calls are logged and skipped.
pub fn crawl_plan<S: AppGraphSource + ?Sized>(source: &S, seed_words: &[String], max_apps: usize) -> CrawlOutcome {
    let mut out = CrawlOutcome::default();
    if max_apps == 0 {
        return out;
    }
    let mut seen: HashSet<String> = HashSet::new();
    let mut frontier: VecDeque<String> = VecDeque::new();

    let mut discover = |id: String, out: &mut CrawlOutcome, frontier: &mut VecDeque<String>| -> bool {
        if out.app_ids.len() >= max_apps {
            return false;
        }
        if seen.insert(id.clone()) {
            out.app_ids.push(id.clone());
            frontier.push_back(id);
        }
        out.app_ids.len() < max_apps
    };

    'seeds: for word in seed_words {
        match source.search(word) {
            Ok(ids) => {
                for id in ids.into_iter().take(SEARCH_RESULT_CAP) {
                    if !discover(id, &mut out, &mut frontier) {
                        break 'seeds;
                    }
                }
            }
            Err(err) => {
                log::warn!("search for {word:?} failed: {err}");
                out.failures.push(SourceFailure::Search {
                    word: word.clone(),
                    error: err.0,
                });
            }
        }
    }

    'walk: while out.app_ids.len() < max_apps {
        let Some(current) = frontier.pop_front() else { break };
        match source.neighbors(&current) {
            Ok(ids) => {
                for id in ids {
                    if !discover(id, &mut out, &mut frontier) {
                        break 'walk;
                    }
                }
            }
            Err(err) => {
                log::warn!("neighbors of {current} failed: {err}");
                out.failures.push(SourceFailure::Neighbors {
                    app_id: current,
                    error: err.0,
                });
            }
        }
    }
    out
}

/// Fixture-backed graph read from a JSON file:
///
/// ```json
/// {"search": {"sleep": ["com.a", "com.b"]}, "neighbors": {"com.a": ["com.c"]}}
/// ```
///
/// Unknown words and ids have no results.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileGraphSource {
    #[serde(default)]
    pub search: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub neighbors: BTreeMap<String, Vec<String>>,
}

impl FileGraphSource {
    pub fn load(path: &Path) -> Result<Self, PersistError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl AppGraphSource for FileGraphSource {
    fn search(&self, word: &str) -> Result<Vec<String>, SourceError> {
        Ok(self.search.get(word).cloned().unwrap_or_default())
    }

    fn neighbors(&self, app_id: &str) -> Result<Vec<String>, SourceError> {
        Ok(self.neighbors.get(app_id).cloned().unwrap_or_default())
    }
}
