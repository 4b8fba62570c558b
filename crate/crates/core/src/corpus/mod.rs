//! App-description corpus: records, filtering, ingestion and the crawl plan.
//!
//! A corpus is the filtered set of store listings that the vector index is
//! built from. Records arrive as line-delimited JSON, are de-duplicated by
//! `app_id` (last one wins), filtered, and kept in `app_id` order so the
//! persisted file is stable across runs.

mod crawl;
mod filter;
mod language;

use std::collections::BTreeMap;
use std::io::BufRead;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use crawl::{crawl_plan, AppGraphSource, CrawlOutcome, FileGraphSource, SourceError, SourceFailure, SEARCH_RESULT_CAP};
pub use filter::{filter_record, FilterConfig, FilterOutcome, FilterReport, RejectReason, DEFAULT_GAME_CATEGORIES, MIN_DESCRIPTION_CHARS};
pub use language::{DetectError, LanguageDetector, StopwordLanguageDetector, ENGLISH};

use crate::persist::{self, FormatHeader, PersistError};

pub const CORPUS_FORMAT: &str = "inspire-corpus";
pub const CORPUS_VERSION: &str = "1.0";

/// One store listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppRecord {
    pub app_id: String,
    #[serde(default)]
    pub title: String,
    pub description: String,
    #[serde(default)]
    pub category: String,
    /// Detected during filtering when absent from the input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    pub collected_at: DateTime<Utc>,
}

impl AppRecord {
    pub fn description_chars(&self) -> usize {
        self.description.chars().count()
    }
}

/// Problem with a single input line; the line is skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based line number in the input stream.
    pub line: usize,
    pub message: String,
}

/// Parse a line-delimited record stream.
///
/// Blank lines are ignored. A leading format header line (as written by
/// [`Corpus::to_jsonl`]) is accepted and version-checked.
pub fn read_records<R: BufRead>(reader: R) -> Result<(Vec<AppRecord>, Vec<Diagnostic>), PersistError> {
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_no == 1 {
            if let Some(header) = FormatHeader::sniff(trimmed) {
                header.check(CORPUS_FORMAT, CORPUS_VERSION)?;
                continue;
            }
        }
        match serde_json::from_str::<AppRecord>(trimmed) {
            Ok(record) if record.app_id.trim().is_empty() => diagnostics.push(Diagnostic {
                line: line_no,
                message: "empty app_id".into(),
            }),
            Ok(record) => records.push(record),
            Err(err) => diagnostics.push(Diagnostic {
                line: line_no,
                message: format!("malformed record: {err}"),
            }),
        }
    }
    for d in &diagnostics {
        log::warn!("corpus input line {}: {}", d.line, d.message);
    }
    Ok((records, diagnostics))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub apps: usize,
    pub total_description_chars: usize,
    pub mean_description_chars: f64,
    pub categories: BTreeMap<String, usize>,
}

/// The filtered corpus, keyed and ordered by `app_id`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: BTreeMap<String, AppRecord>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from records that are already filtered; later duplicates win.
    pub fn from_records(records: impl IntoIterator<Item = AppRecord>) -> Self {
        Self {
            records: records.into_iter().map(|r| (r.app_id.clone(), r)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, app_id: &str) -> Option<&AppRecord> {
        self.records.get(app_id)
    }

    pub fn contains(&self, app_id: &str) -> bool {
        self.records.contains_key(app_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &AppRecord> {
        self.records.values()
    }

    /// Filter a record stream into the corpus.
    ///
    /// Duplicate ids within the stream collapse to the last occurrence before
    /// filtering, so each id is examined once. An incoming record replaces
    /// any stored record with the same id; if the replacement is rejected the
    /// stored record is dropped as well.
    pub fn ingest<I>(&mut self, records: I, config: &FilterConfig, detector: &dyn LanguageDetector) -> FilterReport
    where
        I: IntoIterator<Item = AppRecord>,
    {
        let mut latest: IndexMap<String, AppRecord> = IndexMap::new();
        for record in records {
            latest.insert(record.app_id.clone(), record);
        }

        let mut report = FilterReport::default();
        for (app_id, mut record) in latest {
            let outcome = filter_record(&record, config, detector);
            report.record(&app_id, &outcome);
            match outcome {
                FilterOutcome::Keep { language } => {
                    record.language = Some(language);
                    self.records.insert(app_id, record);
                }
                FilterOutcome::Reject { .. } => {
                    self.records.remove(&app_id);
                }
            }
        }
        report
    }

    pub fn stats(&self) -> CorpusStats {
        let mut stats = CorpusStats {
            apps: self.records.len(),
            ..Default::default()
        };
        for r in self.records.values() {
            stats.total_description_chars += r.description_chars();
            *stats.categories.entry(r.category.clone()).or_default() += 1;
        }
        if stats.apps > 0 {
            stats.mean_description_chars = stats.total_description_chars as f64 / stats.apps as f64;
        }
        stats
    }

    /// Serialize as a header line followed by one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = FormatHeader::new(CORPUS_FORMAT, CORPUS_VERSION).to_line();
        for r in self.records.values() {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Load a persisted corpus. Records are trusted as already filtered.
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<(Self, Vec<Diagnostic>), PersistError> {
        let (records, diagnostics) = read_records(reader)?;
        let records = records.into_iter().map(|r| (r.app_id.clone(), r)).collect();
        Ok((Self { records }, diagnostics))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PersistError> {
        if !path.exists() {
            return Ok(Self::new());
        }
        let file = std::fs::File::open(path)?;
        let (corpus, _) = Self::from_jsonl(std::io::BufReader::new(file))?;
        Ok(corpus)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), PersistError> {
        persist::write_atomic(path, self.to_jsonl().as_bytes())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn record(id: &str, category: &str, description: &str) -> AppRecord {
        AppRecord {
            app_id: id.into(),
            title: format!("{id} title"),
            description: description.into(),
            category: category.into(),
            language: Some(ENGLISH.into()),
            collected_at: "2024-02-01T00:00:00Z".parse().unwrap(),
        }
    }

    fn english(len: usize) -> String {
        let base = "the app helps you track your sleep and it is easy to use with a clean design ";
        base.chars().cycle().take(len).collect()
    }

    #[test]
    fn ingest_counts_each_reason() {
        let mut corpus = Corpus::new();
        let report = corpus.ingest(
            vec![
                record("g", "GAME_ACTION", &english(500)),
                record("s", "HEALTH_AND_FITNESS", &english(50)),
                record("ok", "HEALTH_AND_FITNESS", &english(300)),
            ],
            &FilterConfig::default(),
            &StopwordLanguageDetector,
        );
        assert_eq!(report.kept, 1);
        assert_eq!(report.game, 1);
        assert_eq!(report.too_short, 1);
        assert_eq!(report.non_english, 0);
        assert_eq!(report.examined, 3);
        assert_eq!(corpus.len(), 1);
    }

    #[test]
    fn ingest_empty_stream() {
        let mut corpus = Corpus::new();
        let report = corpus.ingest(Vec::new(), &FilterConfig::default(), &StopwordLanguageDetector);
        assert_eq!(report, FilterReport::default());
    }

    #[test]
    fn duplicate_ids_collapse_to_last() {
        let mut corpus = Corpus::new();
        let mut second = record("dup", "TOOLS", &english(400));
        second.title = "second".into();
        let report = corpus.ingest(
            vec![record("dup", "TOOLS", &english(300)), second],
            &FilterConfig::default(),
            &StopwordLanguageDetector,
        );
        assert_eq!(corpus.len(), 1);
        assert_eq!(report.examined, 1);
        assert_eq!(corpus.get("dup").unwrap().title, "second");
    }

    #[test]
    fn rejected_replacement_drops_stored_record() {
        let mut corpus = Corpus::new();
        let cfg = FilterConfig::default();
        corpus.ingest(vec![record("a", "TOOLS", &english(300))], &cfg, &StopwordLanguageDetector);
        corpus.ingest(vec![record("a", "TOOLS", &english(20))], &cfg, &StopwordLanguageDetector);
        assert!(corpus.is_empty());
    }

    #[test]
    fn malformed_lines_are_tagged_with_position() {
        let input = format!(
            "{}\nnot json\n\n{{\"app_id\":\"x\"}}\n",
            serde_json::to_string(&record("a", "TOOLS", "d")).unwrap()
        );
        let (records, diags) = read_records(input.as_bytes()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(diags.iter().map(|d| d.line).collect::<Vec<_>>(), vec![2, 4]);
    }

    #[test]
    fn language_detected_when_absent() {
        let mut r = record("a", "TOOLS", &english(300));
        r.language = None;
        let mut corpus = Corpus::new();
        corpus.ingest(vec![r], &FilterConfig::default(), &StopwordLanguageDetector);
        assert_eq!(corpus.get("a").unwrap().language.as_deref(), Some(ENGLISH));
    }

    #[test]
    fn jsonl_round_trip_and_version_check() {
        let mut corpus = Corpus::new();
        corpus.ingest(
            vec![record("b", "TOOLS", &english(300)), record("a", "TOOLS", &english(250))],
            &FilterConfig::default(),
            &StopwordLanguageDetector,
        );
        let text = corpus.to_jsonl();
        assert!(text.starts_with("{\"format\":\"inspire-corpus\""));
        let (back, diags) = Corpus::from_jsonl(text.as_bytes()).unwrap();
        assert!(diags.is_empty());
        assert_eq!(back, corpus);

        let future = text.replacen("\"1.0\"", "\"2.0\"", 1);
        assert!(matches!(
            Corpus::from_jsonl(future.as_bytes()),
            Err(PersistError::UnsupportedVersion { .. })
        ));
    }

    #[test]
    fn stats_summarize_categories() {
        let mut corpus = Corpus::new();
        corpus.ingest(
            vec![record("a", "TOOLS", &english(300)), record("b", "MEDICAL", &english(200))],
            &FilterConfig::default(),
            &StopwordLanguageDetector,
        );
        let stats = corpus.stats();
        assert_eq!(stats.apps, 2);
        assert_eq!(stats.total_description_chars, 500);
        assert_eq!(stats.categories["TOOLS"], 1);
        assert!((stats.mean_description_chars - 250.0).abs() < 1e-12);
    }
}
