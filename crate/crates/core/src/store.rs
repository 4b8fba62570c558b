//! File-backed workspace holding the corpus, index, trees, assessments and
//! transcripts, plus the operations the CLI and HTTP service share.
//!
//! ```text
//! <root>/inspire.json                 workspace config
//! <root>/corpus/corpus.jsonl          filtered corpus
//! <root>/index/index.bin              vector index
//! <root>/trees/<tree_id>.json         one file per tree
//! <root>/assessments/assessments.jsonl
//! <root>/transcripts/transcript.jsonl provider exchanges
//! ```
//!
//! Every whole-file write goes through a temp file and a rename.

use std::collections::BTreeSet;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AppRecord, Corpus, CorpusStats, Diagnostic, FilterConfig, FilterReport, LanguageDetector};
use crate::evaluation::{
    build_report, compare_trees, validate_entry, AssessmentEntry, AssessmentSet, ComparisonResult, DuplicateMatcher, EvalError,
    EvalReport,
};
use crate::llm_gateway::{GatewayError, RetryPolicy, SamplingParams};
use crate::persist::{self, PersistError};
use crate::refinement::{
    AppStoreDeps, Approach, Feature, FeatureTree, InspireOptions, NodeEdit, RefineError, Refiner, RefinementConfig, TreeMeta,
};
use crate::llm_gateway::Gateway;
use crate::vectorindex::{HashingEmbedder, IndexConfig, IndexError, QueryHit, VectorIndex};

pub const CONFIG_FILE: &str = "inspire.json";
pub const CONFIG_VERSION: &str = "1.0";
pub const WORKSPACE_ENV: &str = "INSPIRE_WORKSPACE";

/// Machine-readable error class shared by the HTTP API and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NotFound,
    Validation,
    ProviderFailure,
    EmptyRetrieval,
    Conflict,
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::NotFound => "not_found",
            ErrorCode::Validation => "validation",
            ErrorCode::ProviderFailure => "provider_failure",
            ErrorCode::EmptyRetrieval => "empty_retrieval",
            ErrorCode::Conflict => "conflict",
            ErrorCode::Internal => "internal",
        }
    }

    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::NotFound => 404,
            ErrorCode::Validation => 400,
            ErrorCode::ProviderFailure => 502,
            ErrorCode::EmptyRetrieval => 422,
            ErrorCode::Conflict => 409,
            ErrorCode::Internal => 500,
        }
    }

    /// Process exit status for the CLI.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCode::ProviderFailure => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{0}")]
    Validation(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl StoreError {
    pub fn code(&self) -> ErrorCode {
        match self {
            StoreError::NotFound(_) => ErrorCode::NotFound,
            StoreError::Validation(_) => ErrorCode::Validation,
            StoreError::Conflict(_) => ErrorCode::Conflict,
            StoreError::Persist(_) => ErrorCode::Internal,
            StoreError::Index(IndexError::ZeroK | IndexError::Config(_)) => ErrorCode::Validation,
            StoreError::Index(_) => ErrorCode::Internal,
            StoreError::Refine(e) => match e {
                RefineError::InvalidFeature(_) | RefineError::TooDeep { .. } => ErrorCode::Validation,
                RefineError::NodeNotFound(_) => ErrorCode::NotFound,
                RefineError::EmptyRetrieval { .. } | RefineError::NoCandidates { .. } | RefineError::AppStoreUnavailable => {
                    ErrorCode::EmptyRetrieval
                }
                RefineError::Gateway(GatewayError::Transcript(_)) => ErrorCode::Internal,
                RefineError::Gateway(_) | RefineError::Selection { .. } => ErrorCode::ProviderFailure,
                RefineError::Render(_) => ErrorCode::Internal,
                RefineError::Index(IndexError::ZeroK) => ErrorCode::Validation,
                RefineError::Index(_) => ErrorCode::Internal,
            },
            StoreError::Eval(EvalError::Validation(_)) => ErrorCode::Validation,
            StoreError::Eval(EvalError::NotFound(_)) => ErrorCode::NotFound,
            StoreError::Eval(EvalError::Persist(_)) => ErrorCode::Internal,
        }
    }
}

pub type StoreResult<T> = Result<T, StoreError>;

/// Settings persisted in `inspire.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkspaceConfig {
    pub format_version: String,
    pub refinement: RefinementConfig,
    pub index: IndexConfig,
    pub filter: FilterConfig,
    pub matcher: DuplicateMatcher,
    pub sampling: SamplingParams,
    pub retry: RetryPolicy,
    pub max_parallel: usize,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_VERSION.into(),
            refinement: RefinementConfig::default(),
            index: IndexConfig::default(),
            filter: FilterConfig::default(),
            matcher: DuplicateMatcher::default(),
            sampling: SamplingParams::default(),
            retry: RetryPolicy::default(),
            max_parallel: 4,
        }
    }
}

/// Source of timestamps for new trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    System,
    /// Always returns the same instant; used for reproducible runs.
    Fixed(DateTime<Utc>),
}

impl Clock {
    pub fn now(self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub apps: usize,
    pub chunks: usize,
    pub dimension: usize,
    pub chunk_max_chars: usize,
}

/// Result of ingesting a record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub report: FilterReport,
    pub diagnostics: Vec<Diagnostic>,
    pub corpus_size: usize,
}

/// Lightweight listing entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub tree_id: String,
    pub root: String,
    pub approach: Option<Approach>,
    pub group: Option<String>,
    pub nodes: usize,
    pub version: u64,
}

/// Reject ids that are not safe as file names.
pub fn validate_tree_id(id: &str) -> StoreResult<()> {
    let ok = !id.is_empty()
        && id.len() <= 96
        && !id.starts_with(['.', '-'])
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::Validation(format!("invalid tree id {id:?}: use letters, digits, '-' and '_'")))
    }
}

/// Lowercase ASCII slug of a feature name, at most 48 characters.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
        if out.len() >= 48 {
            break;
        }
    }
    let out = out.trim_end_matches('-').to_string();
    if out.is_empty() {
        "tree".into()
    } else {
        out
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    config: WorkspaceConfig,
    clock: Clock,
}

impl Workspace {
    /// Open `root`, creating the layout and a default config when missing.
    pub fn init(root: impl Into<PathBuf>) -> StoreResult<Self> {
        let root = root.into();
        for dir in ["corpus", "index", "trees", "assessments", "transcripts"] {
            std::fs::create_dir_all(root.join(dir)).map_err(PersistError::from)?;
        }
        let config_path = root.join(CONFIG_FILE);
        if !config_path.exists() {
            let mut text = serde_json::to_string_pretty(&WorkspaceConfig::default()).map_err(PersistError::from)?;
            text.push('\n');
            persist::write_atomic(&config_path, text.as_bytes())?;
        }
        Self::open(root)
    }

    /// Open an initialized workspace.
    pub fn open(root: impl Into<PathBuf>) -> StoreResult<Self> {
        let root = root.into();
        let config_path = root.join(CONFIG_FILE);
        let text = std::fs::read_to_string(&config_path)
            .map_err(|e| StoreError::NotFound(format!("workspace config {}: {e}", config_path.display())))?;
        let config: WorkspaceConfig = serde_json::from_str(&text).map_err(PersistError::from)?;
        persist::check_version("inspire-workspace", &config.format_version, CONFIG_VERSION)?;
        config.refinement.validate()?;
        config.index.validate()?;
        Ok(Self {
            root,
            config,
            clock: Clock::System,
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> &WorkspaceConfig {
        &self.config
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.root.join("corpus").join("corpus.jsonl")
    }

    pub fn index_path(&self) -> PathBuf {
        self.root.join("index").join("index.bin")
    }

    pub fn trees_dir(&self) -> PathBuf {
        self.root.join("trees")
    }

    pub fn tree_path(&self, tree_id: &str) -> PathBuf {
        self.trees_dir().join(format!("{tree_id}.json"))
    }

    pub fn assessments_path(&self) -> PathBuf {
        self.root.join("assessments").join("assessments.jsonl")
    }

    pub fn transcript_path(&self) -> PathBuf {
        self.root.join("transcripts").join("transcript.jsonl")
    }

    pub fn embedder(&self) -> HashingEmbedder {
        HashingEmbedder::new(self.config.index.dimension)
    }

    /// A gateway configured with this workspace's sampling and retry settings.
    pub fn configure_gateway(&self, gateway: Gateway) -> Gateway {
        gateway.with_params(self.config.sampling.clone()).with_policy(self.config.retry)
    }

    // corpus

    pub fn load_corpus(&self) -> StoreResult<Corpus> {
        Ok(Corpus::load(&self.corpus_path())?)
    }

    /// Filter `text` (record lines) into the stored corpus.
    pub fn ingest(&self, text: &str, detector: &dyn LanguageDetector) -> StoreResult<IngestSummary> {
        let (records, diagnostics) = crate::corpus::read_records(text.as_bytes())?;
        self.ingest_records(records, diagnostics, detector)
    }

    pub fn ingest_records(&self, records: Vec<AppRecord>, diagnostics: Vec<Diagnostic>, detector: &dyn LanguageDetector) -> StoreResult<IngestSummary> {
        let mut corpus = self.load_corpus()?;
        let report = corpus.ingest(records, &self.config.filter, detector);
        corpus.save(&self.corpus_path())?;
        Ok(IngestSummary {
            report,
            diagnostics,
            corpus_size: corpus.len(),
        })
    }

    pub fn corpus_stats(&self) -> StoreResult<CorpusStats> {
        Ok(self.load_corpus()?.stats())
    }

    pub fn app(&self, app_id: &str) -> StoreResult<AppRecord> {
        self.load_corpus()?
            .get(app_id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(format!("app {app_id}")))
    }

    // index

    /// The stored index, or an empty one if none has been built.
    pub fn load_index(&self) -> StoreResult<VectorIndex> {
        let path = self.index_path();
        if !path.exists() {
            return Ok(VectorIndex::new(self.config.index)?);
        }
        Ok(VectorIndex::load(&path)?)
    }

    /// Rebuild the index from the whole corpus.
    pub fn build_index(&self) -> StoreResult<IndexSummary> {
        let corpus = self.load_corpus()?;
        let embedder = self.embedder();
        let mut index = VectorIndex::new(self.config.index)?;
        for r in corpus.records() {
            index.add(&r.app_id, &r.description, &embedder)?;
        }
        index.save(&self.index_path())?;
        Ok(summary(&index))
    }

    pub fn index_summary(&self) -> StoreResult<IndexSummary> {
        Ok(summary(&self.load_index()?))
    }

    pub fn query_index(&self, text: &str, k: usize) -> StoreResult<Vec<QueryHit>> {
        Ok(self.load_index()?.query(text, k, &self.embedder())?)
    }

    // trees

    pub fn tree_exists(&self, tree_id: &str) -> bool {
        validate_tree_id(tree_id).is_ok() && self.tree_path(tree_id).exists()
    }

    pub fn load_tree(&self, tree_id: &str) -> StoreResult<FeatureTree> {
        validate_tree_id(tree_id)?;
        let path = self.tree_path(tree_id);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(format!("tree {tree_id}"))),
            Err(e) => return Err(PersistError::from(e).into()),
        };
        Ok(FeatureTree::from_json(&text)?)
    }

    pub fn save_tree(&self, tree: &FeatureTree) -> StoreResult<()> {
        self.save_tree_with(tree, || Ok(()))
    }

    /// [`Self::save_tree`] with a hook run just before the file is swapped
    /// in; an error from the hook abandons the write. For crash testing.
    pub fn save_tree_with<F: FnOnce() -> io::Result<()>>(&self, tree: &FeatureTree, before_rename: F) -> StoreResult<()> {
        validate_tree_id(&tree.tree_id)?;
        tree.check_invariants().map_err(StoreError::Validation)?;
        persist::write_atomic_with(&self.tree_path(&tree.tree_id), tree.to_json().as_bytes(), before_rename)?;
        Ok(())
    }

    /// Ids of stored trees in sorted order. Temp files are ignored.
    pub fn tree_ids(&self) -> StoreResult<Vec<String>> {
        let mut ids = BTreeSet::new();
        let dir = match std::fs::read_dir(self.trees_dir()) {
            Ok(d) => d,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(PersistError::from(e).into()),
        };
        for entry in dir {
            let name = entry.map_err(PersistError::from)?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".json") {
                if validate_tree_id(id).is_ok() {
                    ids.insert(id.to_string());
                }
            }
        }
        Ok(ids.into_iter().collect())
    }

    pub fn load_trees(&self) -> StoreResult<Vec<FeatureTree>> {
        self.tree_ids()?.iter().map(|id| self.load_tree(id)).collect()
    }

    pub fn list_trees(&self) -> StoreResult<Vec<TreeSummary>> {
        Ok(self
            .load_trees()?
            .into_iter()
            .map(|t| TreeSummary {
                nodes: t.generated().count(),
                root: t.root.name.clone(),
                tree_id: t.tree_id,
                approach: t.approach,
                group: t.group,
                version: t.version,
            })
            .collect())
    }

    /// `requested` if given and free, otherwise a fresh slug of `name`.
    fn allocate_tree_id(&self, name: &str, requested: Option<&str>) -> StoreResult<String> {
        if let Some(id) = requested {
            validate_tree_id(id)?;
            if self.tree_path(id).exists() {
                return Err(StoreError::Conflict(format!("tree {id} already exists")));
            }
            return Ok(id.to_string());
        }
        let base = slug(name);
        let mut id = base.clone();
        let mut i = 2;
        while self.tree_path(&id).exists() {
            id = format!("{base}-{i}");
            i += 1;
        }
        Ok(id)
    }

    fn refinement_config(&self, n: Option<usize>, k: Option<usize>) -> StoreResult<RefinementConfig> {
        let c = RefinementConfig {
            n: n.unwrap_or(self.config.refinement.n),
            k: k.unwrap_or(self.config.refinement.k),
        };
        c.validate()?;
        Ok(c)
    }

    /// Create and persist a tree holding only its root.
    pub fn create_tree(&self, root: &Feature, request: &NewTree) -> StoreResult<FeatureTree> {
        let tree_id = self.allocate_tree_id(&root.name, request.tree_id.as_deref())?;
        let config = self.refinement_config(request.n, request.k)?;
        let mut tree = FeatureTree::new(tree_id, root, None, config, self.clock.now());
        tree.group = request.group.clone();
        self.save_tree(&tree)?;
        Ok(tree)
    }

    /// Generate a complete two-level tree with one pipeline and persist it.
    pub fn generate_tree(&self, root: &Feature, approach: Approach, request: &NewTree, gateway: &Gateway) -> StoreResult<FeatureTree> {
        let tree_id = self.allocate_tree_id(&root.name, request.tree_id.as_deref())?;
        let config = self.refinement_config(request.n, request.k)?;
        let meta = TreeMeta {
            tree_id,
            created_at: self.clock.now(),
            group: request.group.clone(),
        };
        let tree = self.with_refiner(gateway, config, approach, |r| r.generate_tree(root, approach, meta))?;
        self.save_tree(&tree)?;
        Ok(tree)
    }

    /// Refine one node of a stored tree and persist the result. Returns the
    /// updated tree and the ids of the new children.
    pub fn inspire(
        &self,
        tree_id: &str,
        node_id: &str,
        source: Approach,
        options: &InspireOptions,
        gateway: &Gateway,
    ) -> StoreResult<(FeatureTree, Vec<String>)> {
        let mut tree = self.load_tree(tree_id)?;
        if let Some(0) = options.n {
            return Err(StoreError::Validation("n must be at least 1".into()));
        }
        let config = tree.config;
        let ids = self.with_refiner(gateway, config, source, |r| r.inspire(&mut tree, node_id, source, options))?;
        self.save_tree(&tree)?;
        Ok((tree, ids))
    }

    fn with_refiner<T>(
        &self,
        gateway: &Gateway,
        config: RefinementConfig,
        source: Approach,
        f: impl FnOnce(&Refiner<'_>) -> Result<T, RefineError>,
    ) -> StoreResult<T> {
        let refiner = Refiner::new(gateway, config).with_parallelism(self.config.max_parallel);
        if source == Approach::Llm {
            return Ok(f(&refiner)?);
        }
        let corpus = self.load_corpus()?;
        let index = self.load_index()?;
        let embedder = self.embedder();
        let refiner = refiner.with_appstore(AppStoreDeps {
            index: &index,
            embedder: &embedder,
            corpus: &corpus,
        });
        Ok(f(&refiner)?)
    }

    /// Apply an edit. With `expected_version`, fail with a conflict if the
    /// stored tree has moved on.
    pub fn edit_node(&self, tree_id: &str, node_id: &str, edit: &NodeEdit, expected_version: Option<u64>) -> StoreResult<FeatureTree> {
        let mut tree = self.load_tree(tree_id)?;
        check_version(&tree, expected_version)?;
        tree.edit_node(node_id, edit)?;
        self.save_tree(&tree)?;
        Ok(tree)
    }

    pub fn delete_node(&self, tree_id: &str, node_id: &str, expected_version: Option<u64>) -> StoreResult<FeatureTree> {
        let mut tree = self.load_tree(tree_id)?;
        check_version(&tree, expected_version)?;
        tree.delete_node(node_id)?;
        self.save_tree(&tree)?;
        Ok(tree)
    }

    // assessments

    pub fn load_assessments(&self) -> StoreResult<AssessmentSet> {
        Ok(AssessmentSet::load(&self.assessments_path())?)
    }

    /// Validate an entry against its tree and persist it.
    pub fn record_assessment(&self, entry: AssessmentEntry) -> StoreResult<()> {
        let tree_id = match &entry {
            AssessmentEntry::Rater(a) => a.tree_id.clone(),
            AssessmentEntry::Consensus(c) => c.tree_id.clone(),
        };
        let tree = self.load_tree(&tree_id)?;
        validate_entry(&entry, &tree)?;
        let mut set = self.load_assessments()?;
        set.insert(entry);
        set.save(&self.assessments_path())?;
        Ok(())
    }

    pub fn report(&self) -> StoreResult<EvalReport> {
        let trees = self.load_trees()?;
        Ok(build_report(&trees, &self.load_assessments()?, &self.config.matcher)?)
    }

    pub fn venn(&self, a: &str, b: &str) -> StoreResult<ComparisonResult> {
        let (ta, tb) = (self.load_tree(a)?, self.load_tree(b)?);
        Ok(compare_trees(&ta, &tb, &self.config.matcher, &self.load_assessments()?))
    }
}

/// Options for a new tree.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewTree {
    pub tree_id: Option<String>,
    pub group: Option<String>,
    pub n: Option<usize>,
    pub k: Option<usize>,
}

fn check_version(tree: &FeatureTree, expected: Option<u64>) -> StoreResult<()> {
    match expected {
        Some(v) if v != tree.version => Err(StoreError::Conflict(format!(
            "tree {} is at version {}, not {v}",
            tree.tree_id, tree.version
        ))),
        _ => Ok(()),
    }
}

fn summary(index: &VectorIndex) -> IndexSummary {
    IndexSummary {
        apps: index.app_count(),
        chunks: index.chunk_count(),
        dimension: index.config().dimension,
        chunk_max_chars: index.config().chunk_max_chars,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::StopwordLanguageDetector;
    use crate::llm_gateway::mock::SyntheticModel;
    use std::sync::Arc;

    fn ws() -> (tempfile::TempDir, Workspace) {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::init(dir.path().join("ws")).unwrap().with_clock(Clock::Fixed(DateTime::UNIX_EPOCH));
        (dir, ws)
    }

    fn root() -> Feature {
        Feature::new("Travel Planner", "Plan perfect trip from flights to hotels").unwrap()
    }

    #[test]
    fn init_creates_layout_and_is_idempotent() {
        let (_d, ws) = ws();
        for dir in ["corpus", "index", "trees", "assessments", "transcripts"] {
            assert!(ws.root().join(dir).is_dir());
        }
        let again = Workspace::init(ws.root()).unwrap();
        assert_eq!(again.config(), ws.config());
    }

    #[test]
    fn unknown_config_major_is_rejected() {
        let (_d, ws) = ws();
        let p = ws.root().join(CONFIG_FILE);
        let text = std::fs::read_to_string(&p).unwrap().replace("\"format_version\": \"1.0\"", "\"format_version\": \"2.0\"");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(Workspace::open(ws.root()), Err(StoreError::Persist(PersistError::UnsupportedVersion { .. }))));
    }

    #[test]
    fn tree_ids_are_slugs_and_unique() {
        let (_d, ws) = ws();
        let a = ws.create_tree(&root(), &NewTree::default()).unwrap();
        let b = ws.create_tree(&root(), &NewTree::default()).unwrap();
        assert_eq!((a.tree_id.as_str(), b.tree_id.as_str()), ("travel-planner", "travel-planner-2"));
        let dup = ws.create_tree(&root(), &NewTree { tree_id: Some("travel-planner".into()), ..Default::default() });
        assert_eq!(dup.unwrap_err().code(), ErrorCode::Conflict);
        let bad = ws.create_tree(&root(), &NewTree { tree_id: Some("../x".into()), ..Default::default() });
        assert_eq!(bad.unwrap_err().code(), ErrorCode::Validation);
        assert_eq!(ws.tree_ids().unwrap(), ["travel-planner", "travel-planner-2"]);
        assert_eq!(ws.load_tree("nope").unwrap_err().code(), ErrorCode::NotFound);
    }

    #[test]
    fn slugging() {
        assert_eq!(slug("  Travel -- Planner! "), "travel-planner");
        assert_eq!(slug("???"), "tree");
    }

    #[test]
    fn appstore_inspire_on_empty_index_is_empty_retrieval() {
        let (_d, ws) = ws();
        let t = ws.create_tree(&root(), &NewTree::default()).unwrap();
        let g = Gateway::new(Arc::new(SyntheticModel::new()));
        let err = ws.inspire(&t.tree_id, "root", Approach::Appstore, &InspireOptions::default(), &g).unwrap_err();
        assert_eq!(err.code(), ErrorCode::EmptyRetrieval);
        assert_eq!(err.code().http_status(), 422);
    }

    #[test]
    fn stale_version_is_a_conflict() {
        let (_d, ws) = ws();
        let t = ws.create_tree(&root(), &NewTree::default()).unwrap();
        let g = Gateway::new(Arc::new(SyntheticModel::new()));
        ws.inspire(&t.tree_id, "root", Approach::Llm, &InspireOptions::default(), &g).unwrap();
        let edit = NodeEdit { name: Some("X".into()), description: None };
        assert_eq!(ws.edit_node(&t.tree_id, "1", &edit, Some(1)).unwrap_err().code(), ErrorCode::Conflict);
        assert_eq!(ws.edit_node(&t.tree_id, "1", &edit, Some(2)).unwrap().version, 3);
    }

    #[test]
    fn abandoned_write_leaves_previous_tree_intact() {
        let (_d, ws) = ws();
        let t = ws.create_tree(&root(), &NewTree::default()).unwrap();
        let before = std::fs::read(ws.tree_path(&t.tree_id)).unwrap();
        let mut changed = t.clone();
        changed.root.name = "Changed".into();
        changed.version += 1;
        let crash = ws.save_tree_with(&changed, || Err(io::Error::other("simulated crash")));
        assert!(crash.is_err());
        assert_eq!(std::fs::read(ws.tree_path(&t.tree_id)).unwrap(), before);
        // the leftover temp file is not mistaken for a tree
        assert_eq!(ws.tree_ids().unwrap(), std::slice::from_ref(&t.tree_id));
        assert_eq!(ws.load_tree(&t.tree_id).unwrap(), t);
    }

    #[test]
    fn ingest_then_index_then_query() {
        let (_d, ws) = ws();
        let long = |s: &str| format!("{s} {}", "the app is easy to use and it works well for you ".repeat(5));
        let lines = [
            serde_json::json!({"app_id": "a", "title": "A", "description": long("sleep tracking with smart alarm"), "category": "HEALTH", "collected_at": "2024-01-01T00:00:00Z"}),
            serde_json::json!({"app_id": "g", "title": "G", "description": long("puzzle"), "category": "GAME_PUZZLE", "collected_at": "2024-01-01T00:00:00Z"}),
        ];
        let text = lines.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("\n");
        let s = ws.ingest(&text, &StopwordLanguageDetector).unwrap();
        assert_eq!((s.report.kept, s.report.game, s.corpus_size), (1, 1, 1));
        let idx = ws.build_index().unwrap();
        assert_eq!(idx.apps, 1);
        let hits = ws.query_index("sleep tracking", 3).unwrap();
        assert_eq!(hits[0].app_id, "a");
        assert_eq!(ws.app("a").unwrap().title, "A");
        assert_eq!(ws.app("zzz").unwrap_err().code(), ErrorCode::NotFound);
    }
}
