//! Tree generation and node-level editing.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::llm_gateway::Gateway;

use super::pipeline::{refine_appstore, refine_llm_context, refine_llm_single, AppStoreDeps, Context, RefineOutcome, RefineRequest};
use super::{Approach, Feature, FeatureNode, FeatureTree, RefineError, RefinementConfig, SubFeature, MAX_LEVEL, ROOT_ID};

/// Identity of a tree about to be generated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeMeta {
    pub tree_id: String,
    pub created_at: DateTime<Utc>,
    pub group: Option<String>,
}

/// What happens to existing children when a node is inspired again.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InspireMode {
    #[default]
    Replace,
    Append,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct InspireOptions {
    pub feedback: Option<String>,
    pub mode: InspireMode,
    /// Overrides the tree's `n` for this call.
    pub n: Option<usize>,
}

/// A partial update of a node's text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NodeEdit {
    #[serde(rename = "sub-feature", alias = "name")]
    pub name: Option<String>,
    pub description: Option<String>,
}

/// Runs refinements against one gateway and, optionally, an app index.
#[derive(Clone)]
pub struct Refiner<'a> {
    pub gateway: &'a Gateway,
    pub appstore: Option<AppStoreDeps<'a>>,
    pub config: RefinementConfig,
    /// Upper bound on concurrent refinements within one tree.
    pub max_parallel: usize,
}

impl<'a> Refiner<'a> {
    pub fn new(gateway: &'a Gateway, config: RefinementConfig) -> Self {
        Self {
            gateway,
            appstore: None,
            config,
            max_parallel: 4,
        }
    }

    pub fn with_appstore(mut self, deps: AppStoreDeps<'a>) -> Self {
        self.appstore = Some(deps);
        self
    }

    pub fn with_parallelism(mut self, max_parallel: usize) -> Self {
        self.max_parallel = max_parallel.max(1);
        self
    }

    /// One refinement with the chosen pipeline.
    pub fn refine(&self, source: Approach, request: &RefineRequest<'_>) -> Result<RefineOutcome, RefineError> {
        match source {
            Approach::Llm => match &request.context {
                None => refine_llm_single(request.feature, request.n, request.feedback, self.gateway),
                Some(ctx) => refine_llm_context(request.feature, ctx, request.n, request.feedback, self.gateway),
            },
            Approach::Appstore => {
                let deps = self.appstore.as_ref().ok_or(RefineError::AppStoreUnavailable)?;
                refine_appstore(request, self.config.k, deps, self.gateway)
            }
        }
    }

    /// Grow a full two-level tree. Level 1 refines the root on its own; each
    /// level-1 node is then refined with the root as super feature and all
    /// level-1 nodes as siblings. A failed level-2 refinement is recorded on
    /// its node and leaves that branch empty; a failed level-1 refinement is
    /// returned as the error.
    pub fn generate_tree(&self, root: &Feature, approach: Approach, meta: TreeMeta) -> Result<FeatureTree, RefineError> {
        self.config.validate()?;
        if approach == Approach::Appstore && self.appstore.is_none() {
            return Err(RefineError::AppStoreUnavailable);
        }
        let mut tree = FeatureTree::new(meta.tree_id, root, Some(approach), self.config, meta.created_at);
        tree.group = meta.group;

        // nothing to keep if the first level fails
        let l1 = self.refine(approach, &RefineRequest::new(root, self.config.n))?;
        record(&mut tree, ROOT_ID, &l1);
        let children = build_children(&tree.root, 1, &l1.items, approach);
        tree.root.children = children;

        let siblings: Vec<Feature> = tree.root.children.iter().map(FeatureNode::feature).collect();
        let results: Vec<Result<RefineOutcome, RefineError>> = {
            let mut results = Vec::with_capacity(siblings.len());
            for batch in siblings.chunks(self.max_parallel.max(1)) {
                std::thread::scope(|s| {
                    let handles: Vec<_> = batch
                        .iter()
                        .map(|feature| {
                            let request = RefineRequest::new(feature, self.config.n).with_context(Some(Context {
                                super_feature: root,
                                siblings: &siblings,
                            }));
                            s.spawn(move || self.refine(approach, &request))
                        })
                        .collect();
                    results.extend(handles.into_iter().map(|h| h.join().expect("refinement thread panicked")));
                });
            }
            results
        };

        for (i, result) in results.into_iter().enumerate() {
            let node_id = tree.root.children[i].node_id.clone();
            match result {
                Ok(outcome) => {
                    record(&mut tree, &node_id, &outcome);
                    let node = &mut tree.root.children[i];
                    node.children = build_children(node, 1, &outcome.items, approach);
                }
                Err(e) => {
                    log::warn!("refining node {node_id} failed: {e}");
                    tree.root.children[i].error = Some(e.to_string());
                }
            }
        }
        Ok(tree)
    }

    /// Refine one node of an existing tree and attach the results as its
    /// children. The root is refined on its own; other nodes get their parent
    /// as super feature and the parent's children as siblings. Returns the
    /// ids of the new children. On error the tree is left untouched.
    pub fn inspire(&self, tree: &mut FeatureTree, node_id: &str, source: Approach, options: &InspireOptions) -> Result<Vec<String>, RefineError> {
        let node = tree.node(node_id).ok_or_else(|| RefineError::NodeNotFound(node_id.to_string()))?;
        if node.level >= MAX_LEVEL {
            return Err(RefineError::TooDeep {
                node_id: node_id.to_string(),
                level: node.level,
                max: MAX_LEVEL,
            });
        }
        let feature = node.feature();
        let parent = tree.root.parent_of(node_id);
        let super_feature = parent.map(FeatureNode::feature);
        let siblings: Vec<Feature> = parent.map(|p| p.children.iter().map(FeatureNode::feature).collect()).unwrap_or_default();
        let n = options.n.unwrap_or(tree.config.n);
        let context = super_feature.as_ref().map(|s| Context {
            super_feature: s,
            siblings: &siblings,
        });
        let request = RefineRequest::new(&feature, n)
            .with_context(context)
            .with_feedback(options.feedback.as_deref());
        let outcome = self.refine(source, &request)?;

        record(tree, node_id, &outcome);
        let node = tree.root.find_mut(node_id).expect("node checked above");
        let start = match options.mode {
            InspireMode::Replace => {
                node.children.clear();
                1
            }
            InspireMode::Append => node.next_child_ordinal(),
        };
        let children = build_children(node, start, &outcome.items, source);
        let ids = children.iter().map(|c| c.node_id.clone()).collect();
        node.children.extend(children);
        node.error = None;
        tree.version += 1;
        Ok(ids)
    }
}

fn record(tree: &mut FeatureTree, node_id: &str, outcome: &RefineOutcome) {
    tree.transcript_refs.extend(outcome.exchanges.iter().cloned());
    tree.warnings.extend(outcome.warnings.iter().map(|w| format!("node {node_id}: {w}")));
}

fn build_children(parent: &FeatureNode, start: usize, items: &[SubFeature], source: Approach) -> Vec<FeatureNode> {
    items
        .iter()
        .enumerate()
        .map(|(i, item)| FeatureNode {
            node_id: parent.child_id(start + i),
            name: item.name.clone(),
            description: item.description.clone(),
            source_app_id: match source {
                Approach::Llm => None,
                Approach::Appstore => item.source_app_id.clone(),
            },
            level: parent.level + 1,
            provenance: source.provenance(),
            children: Vec::new(),
            error: None,
        })
        .collect()
}

impl FeatureTree {
    /// Apply a text edit to a node. Empty names are rejected.
    pub fn edit_node(&mut self, node_id: &str, edit: &NodeEdit) -> Result<&FeatureNode, RefineError> {
        if let Some(name) = &edit.name {
            if name.trim().is_empty() {
                return Err(RefineError::InvalidFeature("feature name must not be empty".into()));
            }
        }
        let node = self.root.find_mut(node_id).ok_or_else(|| RefineError::NodeNotFound(node_id.to_string()))?;
        if let Some(name) = &edit.name {
            node.name = name.trim().to_string();
        }
        if let Some(description) = &edit.description {
            node.description = description.trim().to_string();
        }
        self.version += 1;
        Ok(self.root.find(node_id).expect("edited node exists"))
    }

    /// Remove a node and its subtree. The root cannot be deleted.
    pub fn delete_node(&mut self, node_id: &str) -> Result<FeatureNode, RefineError> {
        if node_id == self.root.node_id {
            return Err(RefineError::InvalidFeature("the root node cannot be deleted".into()));
        }
        let parent_id = self
            .root
            .parent_of(node_id)
            .map(|p| p.node_id.clone())
            .ok_or_else(|| RefineError::NodeNotFound(node_id.to_string()))?;
        let parent = self.root.find_mut(&parent_id).expect("parent exists");
        let pos = parent.children.iter().position(|c| c.node_id == node_id).expect("child exists");
        let removed = parent.children.remove(pos);
        self.version += 1;
        Ok(removed)
    }
}
