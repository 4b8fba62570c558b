//! The two inspiration pipelines and feature-tree construction.

mod pipeline;
mod tree;
mod types;

use thiserror::Error;

use crate::llm_gateway::{GatewayError, RenderError};
use crate::vectorindex::IndexError;

pub use pipeline::{
    extract_from_description, refine_appstore, refine_llm_context, refine_llm_single, select_sub_features, AppStoreDeps,
    CandidateList, Context, RefineOutcome, RefineRequest,
};
pub use tree::{InspireMode, InspireOptions, NodeEdit, Refiner, TreeMeta};
pub use types::{
    Approach, Feature, FeatureNode, FeatureTree, Provenance, RefinementConfig, SubFeature, MAX_LEVEL, ROOT_ID,
    TREE_FORMAT_VERSION,
};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("invalid input: {0}")]
    InvalidFeature(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Index(#[from] IndexError),
    /// The index returned no apps for the query.
    #[error("no corpus match: the index returned no apps for {query:?}")]
    EmptyRetrieval { query: String },
    /// Every extraction failed or produced nothing, so there is nothing to select from.
    #[error("no candidate sub-features could be extracted from the retrieved apps: {detail}")]
    NoCandidates { detail: String },
    #[error("selection produced no traceable sub-features: {detail}")]
    Selection { detail: String },
    #[error("appstore refinement needs a built index and corpus")]
    AppStoreUnavailable,
    #[error("node {0} not found")]
    NodeNotFound(String),
    #[error("node {node_id} is at level {level}; nodes at level {max} cannot be refined")]
    TooDeep { node_id: String, level: u8, max: u8 },
}
