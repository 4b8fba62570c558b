//! Duplicate detection, distinct-feature counts and tree comparison.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::assess::AssessmentSet;
use crate::refinement::{FeatureNode, FeatureTree};
use crate::vectorindex::{EmbedError, EmbeddingProvider};

/// Relevance at or above which a feature counts as relevant.
pub const RELEVANT_THRESHOLD: u8 = 4;

/// Decides which feature names denote the same feature.
///
/// Names are compared after trimming, collapsing inner whitespace and case
/// folding. Manual merge groups join otherwise different names; groups that
/// share a name are joined transitively.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateMatcher {
    #[serde(default)]
    pub merge_groups: Vec<Vec<String>>,
}

pub fn normalize_name(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl DuplicateMatcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_merge_groups(groups: Vec<Vec<String>>) -> Self {
        Self { merge_groups: groups }
    }

    /// Map from normalized name to the canonical key of its merge group.
    fn canon_map(&self) -> HashMap<String, String> {
        let mut parent: HashMap<String, String> = HashMap::new();
        fn find(parent: &mut HashMap<String, String>, x: &str) -> String {
            let p = parent.get(x).cloned().unwrap_or_else(|| x.to_string());
            if p == x {
                return p;
            }
            let root = find(parent, &p);
            parent.insert(x.to_string(), root.clone());
            root
        }
        for group in &self.merge_groups {
            let keys: Vec<String> = group.iter().map(|n| normalize_name(n)).filter(|k| !k.is_empty()).collect();
            for k in &keys {
                parent.entry(k.clone()).or_insert_with(|| k.clone());
            }
            for pair in keys.windows(2) {
                let (a, b) = (find(&mut parent, &pair[0]), find(&mut parent, &pair[1]));
                if a != b {
                    // the smaller key becomes the root so results do not depend on group order
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    parent.insert(hi, lo);
                }
            }
        }
        let keys: Vec<String> = parent.keys().cloned().collect();
        keys.into_iter().map(|k| (k.clone(), find(&mut parent, &k))).collect()
    }

    /// Canonical class key for one name.
    pub fn key(&self, name: &str) -> String {
        let n = normalize_name(name);
        self.canon_map().get(&n).cloned().unwrap_or(n)
    }

    pub fn same(&self, a: &str, b: &str) -> bool {
        self.key(a) == self.key(b)
    }

    /// Group nodes into equivalence classes, ordered by class key.
    pub fn classes<'a>(&self, nodes: impl IntoIterator<Item = &'a FeatureNode>) -> Vec<FeatureClass> {
        let canon = self.canon_map();
        let mut classes: BTreeMap<String, FeatureClass> = BTreeMap::new();
        for node in nodes {
            let n = normalize_name(&node.name);
            let key = canon.get(&n).cloned().unwrap_or(n);
            let class = classes.entry(key.clone()).or_insert_with(|| FeatureClass {
                key,
                name: node.name.clone(),
                node_ids: Vec::new(),
            });
            class.node_ids.push(node.node_id.clone());
        }
        classes.into_values().collect()
    }
}

/// Nodes judged to be the same feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureClass {
    pub key: String,
    /// Name of the first member encountered.
    pub name: String,
    pub node_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistinctCounts {
    pub nodes: usize,
    pub distinct: usize,
    pub distinct_relevant: usize,
    pub classes: Vec<FeatureClass>,
    /// Keys of classes whose best consensus relevance reaches the threshold.
    pub relevant_keys: Vec<String>,
}

/// Count equivalence classes among the generated nodes of `tree`. A class
/// is relevant when its best consensus relevance is at least 4; nodes
/// without consensus contribute nothing to relevance.
pub fn distinct_features(tree: &FeatureTree, matcher: &DuplicateMatcher, set: &AssessmentSet) -> DistinctCounts {
    let classes = matcher.classes(tree.generated());
    let relevant_keys: Vec<String> = classes
        .iter()
        .filter(|c| {
            c.node_ids
                .iter()
                .filter_map(|id| set.consensus(&tree.tree_id, id).ok())
                .any(|a| a.scores.relevance >= RELEVANT_THRESHOLD)
        })
        .map(|c| c.key.clone())
        .collect();
    DistinctCounts {
        nodes: tree.generated().count(),
        distinct: classes.len(),
        distinct_relevant: relevant_keys.len(),
        classes,
        relevant_keys,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonResult {
    /// Matched class keys present on both sides.
    pub common: Vec<String>,
    pub only_a: Vec<String>,
    pub only_b: Vec<String>,
}

/// Partition two sets of class keys.
pub fn compare_relevant_sets(a: &BTreeSet<String>, b: &BTreeSet<String>) -> ComparisonResult {
    ComparisonResult {
        common: a.intersection(b).cloned().collect(),
        only_a: a.difference(b).cloned().collect(),
        only_b: b.difference(a).cloned().collect(),
    }
}

/// Compare the distinct relevant features of two trees.
pub fn compare_trees(a: &FeatureTree, b: &FeatureTree, matcher: &DuplicateMatcher, set: &AssessmentSet) -> ComparisonResult {
    let ka: BTreeSet<String> = distinct_features(a, matcher, set).relevant_keys.into_iter().collect();
    let kb: BTreeSet<String> = distinct_features(b, matcher, set).relevant_keys.into_iter().collect();
    compare_relevant_sets(&ka, &kb)
}

/// A pair of nodes whose texts are similar enough to review for merging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeSuggestion {
    pub a: String,
    pub b: String,
    pub similarity: f64,
}

/// Flag node pairs in different classes whose `name: description`
/// embeddings have cosine similarity at least `threshold`. Nothing is
/// merged; suggestions are for a human to confirm.
pub fn suggest_merges(
    nodes: &[&FeatureNode],
    matcher: &DuplicateMatcher,
    embedder: &dyn EmbeddingProvider,
    threshold: f64,
) -> Result<Vec<MergeSuggestion>, EmbedError> {
    let vectors = nodes
        .iter()
        .map(|n| embedder.embed(&format!("{}: {}", n.name, n.description)).map(|v| v.normalized()))
        .collect::<Result<Vec<_>, _>>()?;
    let keys: Vec<String> = nodes.iter().map(|n| matcher.key(&n.name)).collect();
    let mut out = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if keys[i] == keys[j] {
                continue;
            }
            let s = vectors[i].dot(&vectors[j]);
            if s >= threshold {
                out.push(MergeSuggestion {
                    a: nodes[i].node_id.clone(),
                    b: nodes[j].node_id.clone(),
                    similarity: s,
                });
            }
        }
    }
    out.sort_by(|x, y| y.similarity.total_cmp(&x.similarity).then_with(|| (&x.a, &x.b).cmp(&(&y.a, &y.b))));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::assess::{AssessmentEntry, ConsensusAssessment, Relationship};
    use crate::evaluation::tests::{llm_node_tree, scores};
    use crate::vectorindex::HashingEmbedder;
    use proptest::prelude::*;

    #[test]
    fn default_matcher_folds_case_and_space() {
        let m = DuplicateMatcher::new();
        assert!(m.same(" Daily  App Limit", "daily app limit"));
        assert!(!m.same("Daily App Limit", "Daily App Limits"));
    }

    #[test]
    fn merge_groups_are_transitive() {
        let m = DuplicateMatcher::with_merge_groups(vec![
            vec!["Screen Time".into(), "Usage Time".into()],
            vec!["usage time".into(), "Phone Time".into()],
        ]);
        assert!(m.same("Screen Time", "PHONE TIME"));
        assert_eq!(m.key("Usage Time"), "phone time");
    }

    #[test]
    fn daily_app_limit_four_times_gives_27() {
        let mut names: Vec<String> = (0..26).map(|i| format!("Feature {i}")).collect();
        names.extend(std::iter::repeat_n("Daily App Limit".to_string(), 4));
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let tree = llm_node_tree("t", &refs);
        let counts = distinct_features(&tree, &DuplicateMatcher::new(), &AssessmentSet::new());
        assert_eq!((counts.nodes, counts.distinct, counts.distinct_relevant), (30, 27, 0));
    }

    fn assess_all(tree: &FeatureTree, relevance: impl Fn(usize) -> u8) -> AssessmentSet {
        let mut set = AssessmentSet::new();
        for (i, node) in tree.generated().enumerate() {
            set.record(
                AssessmentEntry::Consensus(ConsensusAssessment {
                    tree_id: tree.tree_id.clone(),
                    node_id: node.node_id.clone(),
                    scores: scores(Relationship::Sub, relevance(i), Some(5), None),
                    raters: vec![],
                }),
                tree,
            )
            .unwrap();
        }
        set
    }

    #[test]
    fn relevance_threshold() {
        let names: Vec<String> = (0..30).map(|i| format!("F{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let tree = llm_node_tree("t", &refs);
        let all5 = distinct_features(&tree, &DuplicateMatcher::new(), &assess_all(&tree, |_| 5));
        assert_eq!((all5.distinct, all5.distinct_relevant), (30, 30));
        let some3 = distinct_features(&tree, &DuplicateMatcher::new(), &assess_all(&tree, |i| if i < 10 { 3 } else { 4 }));
        assert_eq!((some3.distinct, some3.distinct_relevant), (30, 20));
    }

    #[test]
    fn class_relevance_uses_best_member() {
        let tree = llm_node_tree("t", &["Same", "same", "Other"]);
        let set = assess_all(&tree, |i| if i == 0 { 2 } else { 4 });
        let c = distinct_features(&tree, &DuplicateMatcher::new(), &set);
        assert_eq!((c.distinct, c.distinct_relevant), (2, 2));
    }

    fn keys(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn comparison_examples() {
        let r = compare_relevant_sets(&keys(&["a", "b", "c"]), &keys(&["b", "c", "d"]));
        assert_eq!((r.common.len(), r.only_a.len(), r.only_b.len()), (2, 1, 1));
        let same = compare_relevant_sets(&keys(&["a"]), &keys(&["a"]));
        assert!(same.only_a.is_empty() && same.only_b.is_empty());
        assert!(compare_relevant_sets(&keys(&["a"]), &keys(&["b"])).common.is_empty());
    }

    #[test]
    fn compare_trees_uses_matcher_and_relevance() {
        let a = llm_node_tree("a", &["Trip Sharing", "Flight Search", "Boring"]);
        let b = llm_node_tree("b", &["trip sharing", "Hotel Search"]);
        let mut set = assess_all(&a, |i| if i == 2 { 1 } else { 5 });
        for e in assess_all(&b, |_| 5).consensus_entries() {
            set.insert(AssessmentEntry::Consensus(e.clone()));
        }
        let r = compare_trees(&a, &b, &DuplicateMatcher::new(), &set);
        assert_eq!(r.common, ["trip sharing"]);
        assert_eq!(r.only_a, ["flight search"]);
        assert_eq!(r.only_b, ["hotel search"]);
    }

    proptest! {
        #[test]
        fn comparison_conserves_sizes(a in proptest::collection::btree_set(0u8..40, 0..30), b in proptest::collection::btree_set(0u8..40, 0..30)) {
            let a: BTreeSet<String> = a.iter().map(|x| x.to_string()).collect();
            let b: BTreeSet<String> = b.iter().map(|x| x.to_string()).collect();
            let r = compare_relevant_sets(&a, &b);
            prop_assert_eq!(r.common.len() + r.only_a.len(), a.len());
            prop_assert_eq!(r.common.len() + r.only_b.len(), b.len());
        }
    }

    #[test]
    fn suggestions_flag_near_duplicates_only() {
        let tree = llm_node_tree("t", &["Daily App Limit", "App Daily Limit", "Sleep Sounds"]);
        let nodes: Vec<&FeatureNode> = tree.generated().collect();
        let s = suggest_merges(&nodes, &DuplicateMatcher::new(), &HashingEmbedder::default(), 0.8).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].a.as_str(), s[0].b.as_str()), ("1", "2"));
        // already-merged names are not suggested again
        let merged = DuplicateMatcher::with_merge_groups(vec![vec!["Daily App Limit".into(), "App Daily Limit".into()]]);
        assert!(suggest_merges(&nodes, &merged, &HashingEmbedder::default(), 0.8).unwrap().is_empty());
    }
}
