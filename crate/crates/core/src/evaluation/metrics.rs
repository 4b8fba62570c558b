//! Aggregates over consensus assessments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::assess::{AssessmentSet, Metric, Relationship, Scores};
use crate::refinement::FeatureTree;

/// Round to `decimals` places, ties away from zero.
///
/// The value is first snapped to 9 significant decimals so binary noise such
/// as `4.865 = 4.86499999...` still rounds up.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let snapped = (x * 1e9).round() / 1e9;
    let scaled = snapped * scale;
    let r = scaled.abs().floor() + if scaled.abs().fract() >= 0.5 - 1e-9 { 1.0 } else { 0.0 };
    r.copysign(x) / scale
}

/// Per-level means and their node-count-weighted combination.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelAverages {
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub avg: Option<f64>,
    pub l1_count: usize,
    pub l2_count: usize,
}

impl LevelAverages {
    /// Combine level means: `(n1*m1 + n2*m2) / (n1 + n2)`. A level with no
    /// nodes has no mean and drops out of the combination.
    pub fn from_means(l1: Option<f64>, l1_count: usize, l2: Option<f64>, l2_count: usize) -> Self {
        let l1 = l1.filter(|_| l1_count > 0);
        let l2 = l2.filter(|_| l2_count > 0);
        let (mut sum, mut n) = (0.0, 0usize);
        if let Some(m) = l1 {
            sum += m * l1_count as f64;
            n += l1_count;
        }
        if let Some(m) = l2 {
            sum += m * l2_count as f64;
            n += l2_count;
        }
        Self {
            l1,
            l2,
            avg: (n > 0).then(|| sum / n as f64),
            l1_count: if l1.is_some() { l1_count } else { 0 },
            l2_count: if l2.is_some() { l2_count } else { 0 },
        }
    }

    /// Averages of `(level, score)` samples.
    pub fn from_scores(samples: impl IntoIterator<Item = (u8, f64)>) -> Self {
        let mut acc = [(0.0, 0usize); 2];
        for (level, score) in samples {
            if let 1 | 2 = level {
                let slot = &mut acc[level as usize - 1];
                slot.0 += score;
                slot.1 += 1;
            }
        }
        let mean = |(s, n): (f64, usize)| (n > 0).then(|| s / n as f64);
        Self::from_means(mean(acc[0]), acc[0].1, mean(acc[1]), acc[1].1)
    }
}

/// Consensus scores of every assessed generated node, with their levels.
fn consensus_samples<'a>(trees: &'a [&'a FeatureTree], set: &'a AssessmentSet) -> impl Iterator<Item = (u8, Scores)> + 'a {
    trees.iter().flat_map(move |tree| {
        tree.generated().filter_map(move |node| {
            set.consensus(&tree.tree_id, &node.node_id)
                .ok()
                .map(|c| (node.level, c.scores))
        })
    })
}

/// Level averages of `metric` pooled over `trees`. Nodes without a
/// consensus value for the metric are left out.
pub fn level_weighted_average(trees: &[&FeatureTree], metric: Metric, set: &AssessmentSet) -> LevelAverages {
    LevelAverages::from_scores(consensus_samples(trees, set).filter_map(|(level, s)| s.get(metric).map(|v| (level, v as f64))))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationshipHistogram {
    pub counts: BTreeMap<Relationship, usize>,
    pub total: usize,
}

impl RelationshipHistogram {
    pub fn count(&self, r: Relationship) -> usize {
        self.counts.get(&r).copied().unwrap_or(0)
    }

    pub fn from_relationships(rels: impl IntoIterator<Item = Relationship>) -> Self {
        let mut h = Self {
            counts: Relationship::ALL.into_iter().map(|r| (r, 0)).collect(),
            total: 0,
        };
        for r in rels {
            *h.counts.entry(r).or_default() += 1;
            h.total += 1;
        }
        h
    }
}

/// Consensus relationship counts over `trees`, optionally for one level.
pub fn relationship_histogram(trees: &[&FeatureTree], set: &AssessmentSet, level: Option<u8>) -> RelationshipHistogram {
    RelationshipHistogram::from_relationships(
        consensus_samples(trees, set)
            .filter(|(l, _)| level.is_none_or(|want| *l == want))
            .map(|(_, s)| s.relationship),
    )
}

/// Fraction of (node, field) cells on which the raters of a node are not
/// unanimous. Only nodes with at least two raters count; `None` when there
/// are none.
pub fn disagreement_rate(set: &AssessmentSet) -> Option<f64> {
    let mut by_node: BTreeMap<(&str, &str), Vec<&Scores>> = BTreeMap::new();
    for a in set.rater_entries() {
        by_node.entry((&a.tree_id, &a.node_id)).or_default().push(&a.scores);
    }
    let (mut cells, mut split) = (0usize, 0usize);
    for scores in by_node.values().filter(|s| s.len() >= 2) {
        let first = scores[0];
        cells += 1;
        if scores.iter().any(|s| s.relationship != first.relationship) {
            split += 1;
        }
        for metric in Metric::ALL {
            if scores.iter().all(|s| s.get(metric).is_none()) {
                continue;
            }
            cells += 1;
            if scores.iter().any(|s| s.get(metric) != first.get(metric)) {
                split += 1;
            }
        }
    }
    (cells > 0).then(|| split as f64 / cells as f64)
}
