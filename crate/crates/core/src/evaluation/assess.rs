//! Rubric assessments, applicability validation and consensus.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::persist::{self, FormatHeader, PersistError};
use crate::refinement::{FeatureNode, FeatureTree, Provenance};

pub const ASSESSMENT_FORMAT: &str = "inspire-assessments";
pub const ASSESSMENT_VERSION: &str = "1.0";

/// How a generated node relates to its super feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relationship {
    Sub,
    Sibling,
    Parent,
    Identical,
    Other,
}

impl Relationship {
    pub const ALL: [Relationship; 5] = [
        Relationship::Sub,
        Relationship::Sibling,
        Relationship::Parent,
        Relationship::Identical,
        Relationship::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relationship::Sub => "sub",
            Relationship::Sibling => "sibling",
            Relationship::Parent => "parent",
            Relationship::Identical => "identical",
            Relationship::Other => "other",
        }
    }
}

impl fmt::Display for Relationship {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relationship {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relationship::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| EvalError::Validation(format!("unknown relationship {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Relevance,
    Clarity,
    Feasibility,
    Traceability,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Relevance, Metric::Clarity, Metric::Feasibility, Metric::Traceability];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Relevance => "relevance",
            Metric::Clarity => "clarity",
            Metric::Feasibility => "feasibility",
            Metric::Traceability => "traceability",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Relevance => "Relevance",
            Metric::Clarity => "Clarity",
            Metric::Feasibility => "Feasibility",
            Metric::Traceability => "Traceability",
        }
    }
}

/// The judged values for one node, shared by rater entries and consensus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scores {
    pub relationship: Relationship,
    /// Free-text qualifier, mostly for `other`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relationship_note: Option<String>,
    pub relevance: u8,
    pub clarity: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traceability: Option<u8>,
}

impl Scores {
    pub fn get(&self, metric: Metric) -> Option<u8> {
        match metric {
            Metric::Relevance => Some(self.relevance),
            Metric::Clarity => Some(self.clarity),
            Metric::Feasibility => self.feasibility,
            Metric::Traceability => self.traceability,
        }
    }

    /// Range and applicability checks against the node being judged.
    pub fn validate(&self, node: &FeatureNode) -> Result<(), EvalError> {
        let fail = |msg: String| Err(EvalError::Validation(format!("node {}: {msg}", node.node_id)));
        if node.provenance == Provenance::Root {
            return fail("the root feature is not assessed".into());
        }
        for metric in Metric::ALL {
            if let Some(v) = self.get(metric) {
                if !(1..=5).contains(&v) {
                    return fail(format!("{} must be an integer from 1 to 5, got {v}", metric.as_str()));
                }
            }
        }
        let llm = node.provenance == Provenance::Llm;
        match (llm, self.feasibility.is_some()) {
            (true, false) => return fail("feasibility is required for llm nodes".into()),
            (false, true) => return fail("feasibility applies only to llm nodes".into()),
            _ => {}
        }
        match (llm, self.traceability.is_some()) {
            (false, false) => return fail("traceability is required for appstore nodes".into()),
            (true, true) => return fail("traceability applies only to appstore nodes".into()),
            _ => {}
        }
        Ok(())
    }
}

/// One rater's judgment of one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeAssessment {
    pub tree_id: String,
    pub node_id: String,
    pub rater_id: String,
    #[serde(flatten)]
    pub scores: Scores,
}

/// The agreed values for one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusAssessment {
    pub tree_id: String,
    pub node_id: String,
    #[serde(flatten)]
    pub scores: Scores,
    pub raters: Vec<String>,
}

/// A line of the assessment store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AssessmentEntry {
    Rater(NodeAssessment),
    Consensus(ConsensusAssessment),
}

type NodeKey = (String, String);

/// All recorded judgments, keyed by (tree, node, rater). Later entries
/// replace earlier ones with the same key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssessmentSet {
    raters: BTreeMap<NodeKey, BTreeMap<String, NodeAssessment>>,
    explicit: BTreeMap<NodeKey, ConsensusAssessment>,
}

/// Why a node has no consensus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Unresolved {
    NotAssessed,
    /// Raters split with no strict majority on these fields.
    Split(Vec<&'static str>),
}

impl AssessmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.raters.is_empty() && self.explicit.is_empty()
    }

    pub fn rater_entries(&self) -> impl Iterator<Item = &NodeAssessment> {
        self.raters.values().flat_map(|m| m.values())
    }

    pub fn consensus_entries(&self) -> impl Iterator<Item = &ConsensusAssessment> {
        self.explicit.values()
    }

    /// Rater entries for one node, ordered by rater id.
    pub fn node_raters(&self, tree_id: &str, node_id: &str) -> Vec<&NodeAssessment> {
        self.raters
            .get(&(tree_id.to_string(), node_id.to_string()))
            .map(|m| m.values().collect())
            .unwrap_or_default()
    }

    /// Insert without validation; used when loading a trusted store.
    pub fn insert(&mut self, entry: AssessmentEntry) {
        match entry {
            AssessmentEntry::Rater(a) => {
                self.raters
                    .entry((a.tree_id.clone(), a.node_id.clone()))
                    .or_default()
                    .insert(a.rater_id.clone(), a);
            }
            AssessmentEntry::Consensus(c) => {
                self.explicit.insert((c.tree_id.clone(), c.node_id.clone()), c);
            }
        }
    }

    /// Validate an entry against its tree, then insert it.
    pub fn record(&mut self, entry: AssessmentEntry, tree: &FeatureTree) -> Result<(), EvalError> {
        validate_entry(&entry, tree)?;
        self.insert(entry);
        Ok(())
    }

    /// Explicit consensus if recorded, otherwise the strict majority of the
    /// raters on every field.
    pub fn consensus(&self, tree_id: &str, node_id: &str) -> Result<ConsensusAssessment, Unresolved> {
        let key = (tree_id.to_string(), node_id.to_string());
        if let Some(c) = self.explicit.get(&key) {
            return Ok(c.clone());
        }
        let entries: Vec<&NodeAssessment> = self.raters.get(&key).map(|m| m.values().collect()).unwrap_or_default();
        if entries.is_empty() {
            return Err(Unresolved::NotAssessed);
        }
        let mut split = Vec::new();
        let relationship = majority(entries.iter().map(|e| e.scores.relationship));
        if relationship.is_none() {
            split.push("relationship");
        }
        let mut metric = |m: Metric| -> Option<Option<u8>> {
            let v = majority(entries.iter().map(|e| e.scores.get(m)));
            if v.is_none() {
                split.push(m.as_str());
            }
            v
        };
        let relevance = metric(Metric::Relevance);
        let clarity = metric(Metric::Clarity);
        let feasibility = metric(Metric::Feasibility);
        let traceability = metric(Metric::Traceability);
        match (relationship, relevance, clarity, feasibility, traceability) {
            (Some(relationship), Some(Some(relevance)), Some(Some(clarity)), Some(feasibility), Some(traceability)) => {
                let note = entries
                    .iter()
                    .find(|e| e.scores.relationship == relationship)
                    .and_then(|e| e.scores.relationship_note.clone());
                Ok(ConsensusAssessment {
                    tree_id: tree_id.to_string(),
                    node_id: node_id.to_string(),
                    scores: Scores {
                        relationship,
                        relationship_note: note,
                        relevance,
                        clarity,
                        feasibility,
                        traceability,
                    },
                    raters: entries.iter().map(|e| e.rater_id.clone()).collect(),
                })
            }
            _ => Err(Unresolved::Split(split)),
        }
    }

    /// Consensus for every generated node of `tree`; nodes without one are
    /// listed separately.
    pub fn tree_consensus(&self, tree: &FeatureTree) -> (BTreeMap<String, ConsensusAssessment>, Vec<(String, Unresolved)>) {
        let mut ok = BTreeMap::new();
        let mut missing = Vec::new();
        for node in tree.generated() {
            match self.consensus(&tree.tree_id, &node.node_id) {
                Ok(c) => {
                    ok.insert(node.node_id.clone(), c);
                }
                Err(u) => missing.push((node.node_id.clone(), u)),
            }
        }
        (ok, missing)
    }

    /// Store lines in key order.
    pub fn to_jsonl(&self) -> String {
        let mut out = FormatHeader::new(ASSESSMENT_FORMAT, ASSESSMENT_VERSION).to_line();
        for a in self.rater_entries() {
            out.push_str(&serde_json::to_string(&AssessmentEntry::Rater(a.clone())).expect("serializes"));
            out.push('\n');
        }
        for c in self.consensus_entries() {
            out.push_str(&serde_json::to_string(&AssessmentEntry::Consensus(c.clone())).expect("serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self, PersistError> {
        let mut set = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if i == 0 {
                if let Some(h) = FormatHeader::sniff(line) {
                    h.check(ASSESSMENT_FORMAT, ASSESSMENT_VERSION)?;
                    continue;
                }
            }
            let entry: AssessmentEntry =
                serde_json::from_str(line).map_err(|e| PersistError::Corrupt(format!("assessment line {}: {e}", i + 1)))?;
            set.insert(entry);
        }
        Ok(set)
    }

    /// Load from disk; a missing file is an empty set.
    pub fn load(path: &Path) -> Result<Self, PersistError> {
        if !path.exists() {
            return Ok(Self::new());
        }
        Self::from_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        persist::write_atomic(path, self.to_jsonl().as_bytes())
    }
}

pub fn validate_entry(entry: &AssessmentEntry, tree: &FeatureTree) -> Result<(), EvalError> {
    let (tree_id, node_id, scores) = match entry {
        AssessmentEntry::Rater(a) => {
            if a.rater_id.trim().is_empty() {
                return Err(EvalError::Validation("rater_id must not be empty".into()));
            }
            (&a.tree_id, &a.node_id, &a.scores)
        }
        AssessmentEntry::Consensus(c) => (&c.tree_id, &c.node_id, &c.scores),
    };
    if tree_id != &tree.tree_id {
        return Err(EvalError::Validation(format!("assessment is for tree {tree_id}, not {}", tree.tree_id)));
    }
    let node = tree
        .node(node_id)
        .ok_or_else(|| EvalError::NotFound(format!("node {node_id} in tree {tree_id}")))?;
    scores.validate(node)
}

/// The value held by more than half of the inputs.
fn majority<T: PartialEq + Copy>(values: impl Iterator<Item = T>) -> Option<T> {
    let values: Vec<T> = values.collect();
    let mut counts: Vec<(T, usize)> = Vec::new();
    for v in &values {
        match counts.iter_mut().find(|(x, _)| x == v) {
            Some((_, c)) => *c += 1,
            None => counts.push((*v, 1)),
        }
    }
    counts.into_iter().find(|&(_, c)| 2 * c > values.len()).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::tests::{llm_node_tree, scores};

    fn rater(node: &str, rater: &str, relevance: u8) -> AssessmentEntry {
        AssessmentEntry::Rater(NodeAssessment {
            tree_id: "t".into(),
            node_id: node.into(),
            rater_id: rater.into(),
            scores: Scores {
                relevance,
                ..scores(Relationship::Sub, 5, Some(5), None)
            },
        })
    }

    #[test]
    fn applicability_rules() {
        let tree = llm_node_tree("t", &["A"]);
        let mut set = AssessmentSet::new();
        set.record(rater("1", "r1", 5), &tree).unwrap();

        let mut bad = scores(Relationship::Sub, 5, None, Some(4));
        assert!(bad.validate(tree.node("1").unwrap()).is_err());
        bad = scores(Relationship::Sub, 6, Some(5), None);
        assert!(bad.validate(tree.node("1").unwrap()).is_err());
        bad = scores(Relationship::Sub, 5, Some(5), None);
        assert!(bad.validate(tree.node("root").unwrap()).is_err());

        let mut app = tree.node("1").unwrap().clone();
        app.provenance = Provenance::Appstore;
        app.source_app_id = Some("com.x".into());
        assert!(scores(Relationship::Sub, 5, Some(3), Some(4)).validate(&app).is_err());
        assert!(scores(Relationship::Sub, 5, None, Some(4)).validate(&app).is_ok());
        assert!(scores(Relationship::Sub, 0, None, Some(4)).validate(&app).is_err());
    }

    #[test]
    fn unknown_node_is_not_found() {
        let tree = llm_node_tree("t", &["A"]);
        let err = AssessmentSet::new().record(rater("7", "r1", 5), &tree).unwrap_err();
        assert!(matches!(err, EvalError::NotFound(_)));
    }

    #[test]
    fn consensus_prefers_explicit_then_majority() {
        let tree = llm_node_tree("t", &["A"]);
        let mut set = AssessmentSet::new();
        set.record(rater("1", "r1", 5), &tree).unwrap();
        set.record(rater("1", "r2", 4), &tree).unwrap();
        assert_eq!(set.consensus("t", "1"), Err(Unresolved::Split(vec!["relevance"])));
        set.record(rater("1", "r3", 4), &tree).unwrap();
        assert_eq!(set.consensus("t", "1").unwrap().scores.relevance, 4);
        set.record(
            AssessmentEntry::Consensus(ConsensusAssessment {
                tree_id: "t".into(),
                node_id: "1".into(),
                scores: scores(Relationship::Sub, 5, Some(5), None),
                raters: vec!["r1".into(), "r2".into(), "r3".into()],
            }),
            &tree,
        )
        .unwrap();
        assert_eq!(set.consensus("t", "1").unwrap().scores.relevance, 5);
        assert_eq!(set.consensus("t", "9"), Err(Unresolved::NotAssessed));
    }

    #[test]
    fn later_entry_for_same_rater_replaces() {
        let tree = llm_node_tree("t", &["A"]);
        let mut set = AssessmentSet::new();
        set.record(rater("1", "r1", 2), &tree).unwrap();
        set.record(rater("1", "r1", 5), &tree).unwrap();
        assert_eq!(set.node_raters("t", "1").len(), 1);
        assert_eq!(set.consensus("t", "1").unwrap().scores.relevance, 5);
    }

    #[test]
    fn store_round_trip() {
        let tree = llm_node_tree("t", &["A", "B"]);
        let mut set = AssessmentSet::new();
        set.record(rater("1", "r1", 5), &tree).unwrap();
        set.record(rater("2", "r2", 3), &tree).unwrap();
        let text = set.to_jsonl();
        assert!(text.lines().nth(1).unwrap().contains("\"kind\":\"rater\""));
        assert_eq!(AssessmentSet::from_jsonl(text.as_bytes()).unwrap(), set);
        let future = text.replacen("\"1.0\"", "\"3.0\"", 1);
        assert!(AssessmentSet::from_jsonl(future.as_bytes()).is_err());
    }

    #[test]
    fn relationship_parsing() {
        assert_eq!("Sibling".parse::<Relationship>().unwrap(), Relationship::Sibling);
        assert!("cousin".parse::<Relationship>().is_err());
    }
}
