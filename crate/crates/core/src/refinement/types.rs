use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::RefineError;

/// A named capability with a short description.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub description: String,
}

impl Feature {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Result<Self, RefineError> {
        let name = name.into().trim().to_string();
        if name.is_empty() {
            return Err(RefineError::InvalidFeature("feature name must not be empty".into()));
        }
        Ok(Self {
            name,
            description: description.into().trim().to_string(),
        })
    }

    /// `"name: description"`, the form the prompts embed.
    pub fn with_desc(&self) -> String {
        format!("{}: {}", self.name, self.description)
    }
}

/// One refinement result. Uses the key names of the prompts' JSON objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubFeature {
    #[serde(rename = "sub-feature")]
    pub name: String,
    pub description: String,
    #[serde(rename = "source-app-id", default, skip_serializing_if = "Option::is_none")]
    pub source_app_id: Option<String>,
}

impl SubFeature {
    pub fn feature(&self) -> Feature {
        Feature {
            name: self.name.clone(),
            description: self.description.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Root,
    Llm,
    Appstore,
}

/// Which pipeline produces sub-features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Llm,
    Appstore,
}

impl Approach {
    pub fn provenance(self) -> Provenance {
        match self {
            Approach::Llm => Provenance::Llm,
            Approach::Appstore => Provenance::Appstore,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Llm => "llm",
            Approach::Appstore => "appstore",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approach {
    type Err = RefineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "llm" => Ok(Approach::Llm),
            "appstore" | "app-store" | "app_store" => Ok(Approach::Appstore),
            other => Err(RefineError::InvalidFeature(format!("unknown source {other:?}, expected llm or appstore"))),
        }
    }
}

/// Maximum node level; level-2 nodes are leaves.
pub const MAX_LEVEL: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureNode {
    pub node_id: String,
    #[serde(rename = "sub-feature")]
    pub name: String,
    pub description: String,
    #[serde(rename = "source-app-id", default, skip_serializing_if = "Option::is_none")]
    pub source_app_id: Option<String>,
    pub level: u8,
    pub provenance: Provenance,
    #[serde(default)]
    pub children: Vec<FeatureNode>,
    /// Set when refining this node failed; the branch is left incomplete.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl FeatureNode {
    pub fn root(feature: &Feature) -> Self {
        Self {
            node_id: ROOT_ID.into(),
            name: feature.name.clone(),
            description: feature.description.clone(),
            source_app_id: None,
            level: 0,
            provenance: Provenance::Root,
            children: Vec::new(),
            error: None,
        }
    }

    pub fn feature(&self) -> Feature {
        Feature {
            name: self.name.clone(),
            description: self.description.clone(),
        }
    }

    /// Child id for the `ordinal`-th child (1-based).
    pub fn child_id(&self, ordinal: usize) -> String {
        if self.level == 0 {
            ordinal.to_string()
        } else {
            format!("{}.{ordinal}", self.node_id)
        }
    }

    pub(crate) fn next_child_ordinal(&self) -> usize {
        self.children
            .iter()
            .filter_map(|c| c.node_id.rsplit('.').next()?.parse::<usize>().ok())
            .max()
            .unwrap_or(0)
            + 1
    }

    /// Depth-first, parent before children.
    pub fn iter(&self) -> impl Iterator<Item = &FeatureNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    pub fn find(&self, node_id: &str) -> Option<&FeatureNode> {
        self.iter().find(|n| n.node_id == node_id)
    }

    pub fn find_mut(&mut self, node_id: &str) -> Option<&mut FeatureNode> {
        if self.node_id == node_id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(node_id))
    }

    pub fn parent_of(&self, node_id: &str) -> Option<&FeatureNode> {
        self.iter().find(|n| n.children.iter().any(|c| c.node_id == node_id))
    }
}

pub const ROOT_ID: &str = "root";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementConfig {
    /// App descriptions retrieved per AppStore refinement.
    pub k: usize,
    /// Sub-features requested per refinement.
    pub n: usize,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self { k: 3, n: 5 }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        if self.k == 0 || self.n == 0 {
            return Err(RefineError::InvalidFeature(format!("k and n must be at least 1: {self:?}")));
        }
        Ok(())
    }

    /// Non-root node count of a fully grown tree: `n + n^2`.
    pub fn full_tree_size(&self) -> usize {
        self.n + self.n * self.n
    }
}

pub const TREE_FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTree {
    pub format_version: String,
    pub tree_id: String,
    /// Pipeline used to grow the whole tree; `None` for interactively grown trees.
    pub approach: Option<Approach>,
    /// Free-form grouping label for reports (for example "existing" or "novel").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub config: RefinementConfig,
    pub created_at: DateTime<Utc>,
    /// Bumped on every mutation.
    pub version: u64,
    pub root: FeatureNode,
    /// Fingerprints of the exchanges that produced this tree.
    #[serde(default)]
    pub transcript_refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FeatureTree {
    pub fn new(tree_id: impl Into<String>, root: &Feature, approach: Option<Approach>, config: RefinementConfig, created_at: DateTime<Utc>) -> Self {
        Self {
            format_version: TREE_FORMAT_VERSION.into(),
            tree_id: tree_id.into(),
            approach,
            group: None,
            config,
            created_at,
            version: 1,
            root: FeatureNode::root(root),
            transcript_refs: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &FeatureNode> {
        self.root.iter()
    }

    /// All nodes except the root.
    pub fn generated(&self) -> impl Iterator<Item = &FeatureNode> {
        self.root.iter().skip(1)
    }

    pub fn at_level(&self, level: u8) -> impl Iterator<Item = &FeatureNode> {
        self.root.iter().filter(move |n| n.level == level)
    }

    pub fn node(&self, node_id: &str) -> Option<&FeatureNode> {
        self.root.find(node_id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, crate::persist::PersistError> {
        let tree: FeatureTree = serde_json::from_str(text)?;
        crate::persist::check_version("inspire-tree", &tree.format_version, TREE_FORMAT_VERSION)?;
        Ok(tree)
    }

    /// Check the structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.root.level != 0 || self.root.provenance != Provenance::Root {
            return Err("root must be level 0 with root provenance".into());
        }
        let mut ids = std::collections::HashSet::new();
        for node in self.nodes() {
            if !ids.insert(node.node_id.as_str()) {
                return Err(format!("duplicate node id {}", node.node_id));
            }
            if node.level > MAX_LEVEL {
                return Err(format!("node {} exceeds level {MAX_LEVEL}", node.node_id));
            }
            for c in &node.children {
                if c.level != node.level + 1 {
                    return Err(format!("node {} has level {} under level {}", c.node_id, c.level, node.level));
                }
            }
            match node.provenance {
                Provenance::Llm if node.source_app_id.is_some() => {
                    return Err(format!("llm node {} carries a source app id", node.node_id))
                }
                Provenance::Appstore if node.source_app_id.is_none() => {
                    return Err(format!("appstore node {} lacks a source app id", node.node_id))
                }
                Provenance::Root if node.level != 0 => return Err(format!("non-root node {} has root provenance", node.node_id)),
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_name_required() {
        assert!(Feature::new("  ", "desc").is_err());
        assert_eq!(Feature::new(" A ", " d ").unwrap().with_desc(), "A: d");
    }

    #[test]
    fn sub_feature_uses_prompt_keys() {
        let s = SubFeature {
            name: "Flight Search".into(),
            description: "Find flights".into(),
            source_app_id: Some("com.x".into()),
        };
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"sub-feature":"Flight Search","description":"Find flights","source-app-id":"com.x"}"#
        );
        let plain = SubFeature { source_app_id: None, ..s };
        assert!(!serde_json::to_string(&plain).unwrap().contains("source-app-id"));
    }

    #[test]
    fn node_json_keys() {
        let node = FeatureNode::root(&Feature::new("Travel Planner", "Plan").unwrap());
        let v: serde_json::Value = serde_json::to_value(&node).unwrap();
        for key in ["node_id", "sub-feature", "description", "level", "provenance", "children"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["provenance"], "root");
    }

    #[test]
    fn child_ids_are_paths() {
        let mut root = FeatureNode::root(&Feature::new("R", "").unwrap());
        assert_eq!(root.child_id(1), "1");
        root.children.push(FeatureNode {
            node_id: "3".into(),
            level: 1,
            provenance: Provenance::Llm,
            ..FeatureNode::root(&Feature::new("C", "").unwrap())
        });
        assert_eq!(root.next_child_ordinal(), 4);
        assert_eq!(root.children[0].child_id(2), "3.2");
    }

    #[test]
    fn approach_parsing() {
        assert_eq!("AppStore".parse::<Approach>().unwrap(), Approach::Appstore);
        assert_eq!("llm".parse::<Approach>().unwrap(), Approach::Llm);
        assert!("gpt".parse::<Approach>().is_err());
    }

    #[test]
    fn tree_version_checked_on_load() {
        let t = FeatureTree::new("t1", &Feature::new("R", "d").unwrap(), None, RefinementConfig::default(), DateTime::UNIX_EPOCH);
        let json = t.to_json();
        assert_eq!(FeatureTree::from_json(&json).unwrap(), t);
        let future = json.replace("\"format_version\": \"1.0\"", "\"format_version\": \"2.0\"");
        assert!(FeatureTree::from_json(&future).is_err());
    }
}
