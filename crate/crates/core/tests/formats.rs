//! On-disk formats shared by the CLI, the HTTP service and the browser client.

use std::io::Cursor;
use std::sync::Arc;

use chrono::DateTime;
use serde_json::Value;

use inspire_core::corpus::{Corpus, StopwordLanguageDetector};
use inspire_core::evaluation::{AssessmentEntry, AssessmentSet, ConsensusAssessment, NodeAssessment, Relationship, Scores};
use inspire_core::llm_gateway::mock::{ScriptedProvider, SyntheticModel};
use inspire_core::llm_gateway::{read_transcript, Gateway, TranscriptLog};
use inspire_core::persist::PersistError;
use inspire_core::refinement::{Approach, Feature, FeatureTree};
use inspire_core::store::{NewTree, Workspace};
use inspire_core::vectorindex::{HashingEmbedder, IndexConfig, VectorIndex, INDEX_MAGIC};

const APP: &str = r#"{"app_id":"com.a","title":"A","description":"Plan trips and keep every booking, ticket and itinerary in one place. Share plans with friends, get reminders before departures and check in on time. Offline access keeps the details available wherever the journey takes you.","category":"TRAVEL_AND_LOCAL","collected_at":"2024-03-01T00:00:00Z"}"#;

fn generated_tree(dir: &std::path::Path, approach: Approach) -> FeatureTree {
    let ws = Workspace::init(dir).unwrap();
    ws.ingest(APP, &StopwordLanguageDetector).unwrap();
    ws.build_index().unwrap();
    let gateway = Gateway::new(Arc::new(SyntheticModel::new()));
    let root = Feature::new("Travel Planner", "Plan a trip").unwrap();
    let request = NewTree { n: Some(2), ..Default::default() };
    ws.generate_tree(&root, approach, &request, &gateway).unwrap()
}

#[test]
fn tree_file_uses_hyphenated_feature_keys() {
    let dir = tempfile::tempdir().unwrap();
    let tree = generated_tree(dir.path(), Approach::Appstore);
    let text = std::fs::read_to_string(dir.path().join("trees/travel-planner.json")).unwrap();
    assert!(text.ends_with("}\n"));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["format_version"], "1.0");
    assert_eq!(v["approach"], "appstore");
    assert_eq!(v["version"], 1);
    let root = &v["root"];
    assert_eq!(root["node_id"], "root");
    assert_eq!(root["sub-feature"], "Travel Planner");
    assert_eq!(root["provenance"], "root");
    assert!(root.get("source-app-id").is_none());
    let child = &root["children"][0];
    assert_eq!(child["node_id"], "1");
    assert_eq!(child["level"], 1);
    assert_eq!(child["provenance"], "appstore");
    assert_eq!(child["source-app-id"], "com.a");
    assert_eq!(child["children"][0]["node_id"], "1.1");
    assert_eq!(FeatureTree::from_json(&text).unwrap(), tree);
}

#[test]
fn llm_nodes_carry_no_source() {
    let dir = tempfile::tempdir().unwrap();
    let tree = generated_tree(dir.path(), Approach::Llm);
    let v: Value = serde_json::from_str(&tree.to_json()).unwrap();
    let child = &v["root"]["children"][0];
    assert_eq!(child["provenance"], "llm");
    assert!(child.get("source-app-id").is_none());
}

#[test]
fn unsupported_major_versions_are_rejected() {
    let tree = FeatureTree::new("t", &Feature::new("A", "").unwrap(), None, Default::default(), DateTime::UNIX_EPOCH);
    let newer = tree.to_json().replace("\"format_version\": \"1.0\"", "\"format_version\": \"2.0\"");
    assert!(matches!(FeatureTree::from_json(&newer), Err(PersistError::UnsupportedVersion { .. })));
    let minor = tree.to_json().replace("\"format_version\": \"1.0\"", "\"format_version\": \"1.3\"");
    assert!(FeatureTree::from_json(&minor).is_ok());

    let corpus = format!("{{\"format\":\"inspire-corpus\",\"format_version\":\"9.0\"}}\n{APP}\n");
    assert!(matches!(Corpus::from_jsonl(Cursor::new(corpus)), Err(PersistError::UnsupportedVersion { .. })));
}

#[test]
fn corpus_file_has_a_header_and_one_record_per_line() {
    let dir = tempfile::tempdir().unwrap();
    generated_tree(dir.path(), Approach::Llm);
    let text = std::fs::read_to_string(dir.path().join("corpus/corpus.jsonl")).unwrap();
    let mut lines = text.lines();
    let header: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header, serde_json::json!({"format": "inspire-corpus", "format_version": "1.0"}));
    let record: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(record["app_id"], "com.a");
    assert_eq!(record["language"], "en");
    assert!(lines.next().is_none());

    let (corpus, diagnostics) = Corpus::from_jsonl(Cursor::new(format!("{text}not json\n"))).unwrap();
    assert_eq!(corpus.len(), 1);
    assert_eq!(diagnostics.len(), 1);
    assert_eq!(diagnostics[0].line, 3);
}

#[test]
fn index_file_round_trips_and_rejects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let e = HashingEmbedder::default();
    let mut idx = VectorIndex::new(IndexConfig::default()).unwrap();
    idx.add("com.a", &"travel booking itinerary ".repeat(120), &e).unwrap();
    idx.add("com.b", "meditation breathing", &e).unwrap();
    let path = dir.path().join("index.bin");
    idx.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], INDEX_MAGIC);
    assert_eq!(VectorIndex::load(&path).unwrap(), idx);

    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(VectorIndex::load(&path).is_err());
    let mut flipped = bytes.clone();
    flipped[0] ^= 0xff;
    std::fs::write(&path, flipped).unwrap();
    assert!(VectorIndex::load(&path).is_err());
}

#[test]
fn assessment_lines_are_tagged_by_kind() {
    let scores = Scores {
        relationship: Relationship::Sibling,
        relationship_note: Some("overlaps 1.2".into()),
        relevance: 4,
        clarity: 5,
        feasibility: Some(3),
        traceability: None,
    };
    let mut set = AssessmentSet::new();
    set.insert(AssessmentEntry::Rater(NodeAssessment {
        tree_id: "t".into(),
        node_id: "1".into(),
        rater_id: "r1".into(),
        scores: scores.clone(),
    }));
    set.insert(AssessmentEntry::Consensus(ConsensusAssessment {
        tree_id: "t".into(),
        node_id: "1".into(),
        scores,
        raters: vec!["r1".into(), "r2".into()],
    }));
    let text = set.to_jsonl();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0]["format"], "inspire-assessments");
    assert_eq!(lines[1]["kind"], "rater");
    assert_eq!(lines[1]["relationship"], "sibling");
    assert!(lines[1].get("traceability").is_none());
    assert_eq!(lines[2]["kind"], "consensus");
    assert_eq!(lines[2]["raters"], serde_json::json!(["r1", "r2"]));
    assert_eq!(AssessmentSet::from_jsonl(Cursor::new(text)).unwrap(), set);
}

#[test]
fn transcript_lines_record_prompt_and_response() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("transcript.jsonl");
    let gateway = Gateway::new(Arc::new(ScriptedProvider::repeating("[]"))).with_transcript(Arc::new(TranscriptLog::new(&path)));
    let ex = gateway.complete("system text", "user text").unwrap();
    let mut text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("{\"format\":\"inspire-transcript\""));
    // a torn final line from an interrupted append is ignored
    text.push_str("{\"fingerprint\":\"abc");
    let read = read_transcript(Cursor::new(text)).unwrap();
    assert_eq!(read, vec![ex.clone()]);
    assert_eq!(read[0].system, "system text");
    assert_eq!(read[0].user, "user text");
    assert_eq!(read[0].fingerprint.len(), 64);
}
