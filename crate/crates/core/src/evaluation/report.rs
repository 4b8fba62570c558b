//! Quality, relationship and redundancy tables over a set of trees.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::assess::{AssessmentSet, Metric, Relationship, Unresolved};
use super::dedup::{distinct_features, DuplicateMatcher};
use super::metrics::{disagreement_rate, level_weighted_average, relationship_histogram, round_half_up, LevelAverages, RelationshipHistogram};
use super::EvalError;
use crate::refinement::FeatureTree;

/// Trees that share a group label and an approach form one report column.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnKey {
    pub group: String,
    pub approach: String,
}

impl ColumnKey {
    pub fn of(tree: &FeatureTree) -> Self {
        Self {
            group: tree.group.clone().unwrap_or_else(|| "ungrouped".into()),
            approach: tree.approach.map_or_else(|| "interactive".into(), |a| a.as_str().into()),
        }
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.group, self.approach)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportColumn {
    pub key: ColumnKey,
    pub trees: Vec<String>,
    /// Per metric, `None` entries are metrics that do not apply to any node.
    pub quality: BTreeMap<Metric, LevelAverages>,
    pub relationships_l1: RelationshipHistogram,
    pub relationships_l2: RelationshipHistogram,
    pub relationships_sum: RelationshipHistogram,
    /// Mean over the column's trees.
    pub mean_distinct: f64,
    pub mean_distinct_relevant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub columns: Vec<ReportColumn>,
    /// Nodes left out because they have no consensus.
    pub unresolved: Vec<String>,
    pub disagreement_rate: Option<f64>,
}

/// Build every table. Fails when no assessment has been recorded.
pub fn build_report(trees: &[FeatureTree], set: &AssessmentSet, matcher: &DuplicateMatcher) -> Result<EvalReport, EvalError> {
    if set.is_empty() {
        return Err(EvalError::Validation("no assessments recorded; nothing to report".into()));
    }
    let mut grouped: BTreeMap<ColumnKey, Vec<&FeatureTree>> = BTreeMap::new();
    for t in trees {
        grouped.entry(ColumnKey::of(t)).or_default().push(t);
    }
    let mut unresolved = Vec::new();
    for t in trees {
        for (node, why) in set.tree_consensus(t).1 {
            let why = match why {
                Unresolved::NotAssessed => "not assessed".to_string(),
                Unresolved::Split(fields) => format!("raters split on {}", fields.join(", ")),
            };
            unresolved.push(format!("{}/{node}: {why}", t.tree_id));
        }
    }
    let columns = grouped
        .into_iter()
        .map(|(key, ts)| {
            let quality = Metric::ALL.into_iter().map(|m| (m, level_weighted_average(&ts, m, set))).collect();
            let per_tree: Vec<_> = ts.iter().map(|t| distinct_features(t, matcher, set)).collect();
            let n = per_tree.len().max(1) as f64;
            ReportColumn {
                trees: ts.iter().map(|t| t.tree_id.clone()).collect(),
                quality,
                relationships_l1: relationship_histogram(&ts, set, Some(1)),
                relationships_l2: relationship_histogram(&ts, set, Some(2)),
                relationships_sum: relationship_histogram(&ts, set, None),
                mean_distinct: per_tree.iter().map(|d| d.distinct as f64).sum::<f64>() / n,
                mean_distinct_relevant: per_tree.iter().map(|d| d.distinct_relevant as f64).sum::<f64>() / n,
                key,
            }
        })
        .collect();
    Ok(EvalReport {
        columns,
        unresolved,
        disagreement_rate: disagreement_rate(set),
    })
}

fn fmt2(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.2}", round_half_up(x, 2)))
}

/// Pad every column to its widest cell; the first column is left-aligned.
fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, s)| if i == 0 { format!("{s:<w$}", w = widths[i]) } else { format!("{s:>w$}", w = widths[i]) })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn header(columns: &[ReportColumn], sub: [&str; 3]) -> Vec<Vec<String>> {
    let mut top = vec![String::new()];
    let mut second = vec![String::new()];
    for c in columns {
        top.extend([c.key.label(), String::new(), String::new()]);
        second.extend(sub.iter().map(|s| s.to_string()));
    }
    vec![top, second]
}

impl EvalReport {
    /// Quality scores: L1, L2 and weighted average per column.
    pub fn table3(&self) -> String {
        let mut rows = header(&self.columns, ["L1", "L2", "Avg"]);
        for m in Metric::ALL {
            let mut row = vec![m.label().to_string()];
            for c in &self.columns {
                let a = c.quality.get(&m).copied().unwrap_or_default();
                row.extend([fmt2(a.l1), fmt2(a.l2), fmt2(a.avg)]);
            }
            rows.push(row);
        }
        format!("Quality of generated features (Avg weighted by node count)\n{}", align(&rows))
    }

    /// Relationship counts: L1, L2 and their sum per column.
    pub fn table4(&self) -> String {
        let mut rows = header(&self.columns, ["L1", "L2", "Sum"]);
        let cell = |h: &RelationshipHistogram, r: Option<Relationship>| match r {
            Some(r) => h.count(r).to_string(),
            None => h.total.to_string(),
        };
        for r in Relationship::ALL.map(Some).into_iter().chain([None]) {
            let label = r.map_or("Total".to_string(), |r| {
                let s = r.as_str();
                s[..1].to_uppercase() + &s[1..]
            });
            let mut row = vec![label];
            for c in &self.columns {
                row.extend([cell(&c.relationships_l1, r), cell(&c.relationships_l2, r), cell(&c.relationships_sum, r)]);
            }
            rows.push(row);
        }
        format!("Relationship of generated features to their super features\n{}", align(&rows))
    }

    /// Mean distinct and distinct relevant features per tree.
    pub fn table5(&self) -> String {
        let mut rows = vec![std::iter::once(String::new()).chain(self.columns.iter().map(|c| c.key.label())).collect::<Vec<_>>()];
        rows.push(
            std::iter::once("# of Distinct Features".to_string())
                .chain(self.columns.iter().map(|c| fmt2(Some(c.mean_distinct))))
                .collect(),
        );
        rows.push(
            std::iter::once("# of Distinct Relevant Features".to_string())
                .chain(self.columns.iter().map(|c| fmt2(Some(c.mean_distinct_relevant))))
                .collect(),
        );
        format!("Average number of distinct features per tree\n{}", align(&rows))
    }

    /// The requested tables (3, 4, 5) as plain text, separated by blank lines.
    pub fn to_text(&self, tables: &[u8]) -> Result<String, EvalError> {
        let mut parts = Vec::new();
        for t in tables {
            parts.push(match t {
                3 => self.table3(),
                4 => self.table4(),
                5 => self.table5(),
                other => return Err(EvalError::Validation(format!("unknown table {other}; expected 3, 4 or 5"))),
            });
        }
        let mut text = parts.join("\n");
        if let Some(rate) = self.disagreement_rate {
            text.push_str(&format!("\nRater disagreement: {:.2}%\n", round_half_up(rate * 100.0, 2)));
        }
        if !self.unresolved.is_empty() {
            text.push_str(&format!("\nExcluded nodes without consensus: {}\n", self.unresolved.len()));
        }
        Ok(text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
