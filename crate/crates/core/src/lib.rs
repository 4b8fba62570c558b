//! Feature-elicitation engine: app corpus, vector index, chat gateway,
//! refinement pipelines and evaluation.

pub mod corpus;
pub mod evaluation;
pub mod llm_gateway;
pub mod persist;
pub mod refinement;
pub mod vectorindex;
pub mod store;
