//! Rubric assessments and the aggregate analyses built on them.

mod assess;
mod dedup;
mod metrics;
mod report;

use thiserror::Error;

pub use assess::{
    validate_entry, AssessmentEntry, AssessmentSet, ConsensusAssessment, Metric, NodeAssessment, Relationship, Scores,
    Unresolved, ASSESSMENT_FORMAT, ASSESSMENT_VERSION,
};
pub use dedup::{
    compare_relevant_sets, compare_trees, distinct_features, normalize_name, suggest_merges, ComparisonResult,
    DistinctCounts, DuplicateMatcher, FeatureClass, MergeSuggestion, RELEVANT_THRESHOLD,
};
pub use metrics::{disagreement_rate, level_weighted_average, relationship_histogram, round_half_up, LevelAverages, RelationshipHistogram};
pub use report::{build_report, ColumnKey, EvalReport, ReportColumn};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Persist(#[from] crate::persist::PersistError),
}
