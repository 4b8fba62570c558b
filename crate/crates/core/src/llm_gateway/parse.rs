//! Recovering the JSON feature list from model output.
//!
//! Models wrap the array in code fences or add prose around it. The parser
//! looks for the first `[` that starts a complete JSON array of objects and
//! ignores everything else; it does not guess at alternative key names.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::refinement::SubFeature;

pub const KEY_NAME: &str = "sub-feature";
pub const KEY_DESCRIPTION: &str = "description";
pub const KEY_SOURCE: &str = "source-app-id";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedFeatureList {
    pub items: Vec<SubFeature>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no JSON array of objects found in model output")]
pub struct ParseError {
    pub raw: String,
}

fn first_object_array(raw: &str) -> Option<Vec<Value>> {
    for (pos, _) in raw.match_indices('[') {
        let mut stream = serde_json::Deserializer::from_str(&raw[pos..]).into_iter::<Value>();
        if let Some(Ok(Value::Array(items))) = stream.next() {
            if items.iter().all(Value::is_object) {
                return Some(items);
            }
        }
    }
    None
}

/// Parse the first JSON array of objects in `raw`.
///
/// Items without a non-empty `"sub-feature"` string are dropped with a
/// warning; a missing description becomes empty with a warning. When
/// `expected_n` is given and the item count differs, a warning is attached.
pub fn parse_feature_list(raw: &str, expected_n: Option<usize>) -> Result<ParsedFeatureList, ParseError> {
    let Some(values) = first_object_array(raw) else {
        return Err(ParseError { raw: raw.to_string() });
    };

    let mut out = ParsedFeatureList::default();
    for (i, value) in values.into_iter().enumerate() {
        let obj = value.as_object().expect("filtered to objects");
        let name = obj.get(KEY_NAME).and_then(Value::as_str).map(str::trim).unwrap_or_default();
        if name.is_empty() {
            out.warnings.push(format!("item {i}: missing or empty \"{KEY_NAME}\", dropped"));
            continue;
        }
        let description = match obj.get(KEY_DESCRIPTION) {
            Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
            _ => {
                out.warnings.push(format!("item {i} ({name}): missing or empty \"{KEY_DESCRIPTION}\""));
                String::new()
            }
        };
        let source_app_id = match obj.get(KEY_SOURCE) {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) if !s.trim().is_empty() => Some(s.trim().to_string()),
            Some(other) => {
                out.warnings.push(format!("item {i} ({name}): unusable \"{KEY_SOURCE}\" value {other}"));
                None
            }
        };
        out.items.push(SubFeature {
            name: name.to_string(),
            description,
            source_app_id,
        });
    }

    if let Some(n) = expected_n {
        if out.items.len() != n {
            out.warnings.push(format!("expected {n} sub-features, got {}", out.items.len()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PLAIN: &str = r#"[
 {"sub-feature": "Laugh Detection", "description": "Detects laughs."},
 {"sub-feature": "Authenticity Assessment", "description": "Judges authenticity."},
 {"sub-feature": "Emotional Context Analysis", "description": "Finds context."},
 {"sub-feature": "Social Interaction Impact", "description": "Measures impact."},
 {"sub-feature": "Laugh Quantity Tracking", "description": "Counts laughs."}
]"#;

    #[test]
    fn plain_array() {
        let p = parse_feature_list(PLAIN, Some(5)).unwrap();
        assert_eq!(p.items.len(), 5);
        assert!(p.warnings.is_empty());
        assert_eq!(p.items[0].name, "Laugh Detection");
        assert_eq!(p.items[4].description, "Counts laughs.");
        assert!(p.items.iter().all(|i| i.source_app_id.is_none()));
    }

    #[test]
    fn fenced_with_prose_parses_identically() {
        let wrapped = format!("Sure! Here are the sub-features:\n\n```json\n{PLAIN}\n```\n\nLet me know [if] you need more.");
        assert_eq!(parse_feature_list(&wrapped, Some(5)), parse_feature_list(PLAIN, Some(5)));
    }

    #[test]
    fn skips_non_json_and_non_object_brackets() {
        let raw = format!("Step [1] of [2]: [not json] {PLAIN}");
        assert_eq!(parse_feature_list(&raw, Some(5)).unwrap().items.len(), 5);
    }

    #[test]
    fn count_mismatch_is_a_warning() {
        let four = r#"[{"sub-feature":"a","description":"x"},{"sub-feature":"b","description":"x"},
            {"sub-feature":"c","description":"x"},{"sub-feature":"d","description":"x"}]"#;
        let p = parse_feature_list(four, Some(5)).unwrap();
        assert_eq!(p.items.len(), 4);
        assert_eq!(p.warnings, vec!["expected 5 sub-features, got 4".to_string()]);
    }

    #[test]
    fn source_ids_and_missing_fields() {
        let raw = r#"[{"sub-feature":"A","description":"d","source-app-id":"com.x"},
                      {"sub-feature":"","description":"d"},
                      {"sub-feature":"B"},
                      {"sub-feature":"C","description":"d","source-app-id":7}]"#;
        let p = parse_feature_list(raw, None).unwrap();
        assert_eq!(p.items.len(), 3);
        assert_eq!(p.items[0].source_app_id.as_deref(), Some("com.x"));
        assert_eq!(p.items[1].description, "");
        assert_eq!(p.items[2].source_app_id, None);
        assert_eq!(p.warnings.len(), 3);
    }

    #[test]
    fn empty_array_is_empty_list() {
        let p = parse_feature_list("```json\n[]\n```", None).unwrap();
        assert!(p.items.is_empty());
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn no_array_is_error_with_raw_text() {
        let err = parse_feature_list("I cannot help with that.", Some(5)).unwrap_err();
        assert_eq!(err.raw, "I cannot help with that.");
        assert!(parse_feature_list("[1, 2, 3]", None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn total_on_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
            let text = String::from_utf8_lossy(&bytes);
            let _ = parse_feature_list(&text, Some(5));
        }

        #[test]
        fn total_on_json_ish_text(text in r#"[\[\]\{\}":, a-z0-9\-`\n]{0,200}"#) {
            if let Ok(p) = parse_feature_list(&text, Some(3)) {
                prop_assert!(p.items.iter().all(|i| !i.name.is_empty()));
            }
        }
    }
}
