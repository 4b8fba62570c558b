//! Offline providers: scripted responses and a deterministic stand-in model.

use std::collections::{HashSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::{json, Value};

use super::parse::{KEY_NAME, KEY_SOURCE};
use super::provider::{fingerprint, ChatProvider, ChatRequest, ProviderError};

/// Returns queued results in order, then keeps returning the last one.
#[derive(Debug)]
pub struct ScriptedProvider {
    queue: Mutex<VecDeque<Result<String, ProviderError>>>,
    calls: AtomicUsize,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedProvider {
    pub fn new(script: Vec<Result<String, ProviderError>>) -> Self {
        assert!(!script.is_empty(), "script needs at least one entry");
        Self {
            queue: Mutex::new(script.into()),
            calls: AtomicUsize::new(0),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn repeating(response: impl Into<String>) -> Self {
        Self::new(vec![Ok(response.into())])
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Every request seen so far.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl ChatProvider for ScriptedProvider {
    fn id(&self) -> String {
        "scripted".into()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.requests.lock().unwrap().push(request.clone());
        let mut q = self.queue.lock().unwrap();
        if q.len() > 1 {
            q.pop_front().expect("non-empty")
        } else {
            q.front().expect("non-empty").clone()
        }
    }
}

const ADJECTIVES: &[&str] = &[
    "Smart", "Adaptive", "Personal", "Shared", "Guided", "Instant", "Offline", "Weekly", "Visual", "Secure",
    "Contextual", "Quick", "Custom", "Daily", "Live", "Collaborative", "Automatic", "Voice", "Social", "Private",
];
const NOUNS: &[&str] = &[
    "Reminders", "Dashboard", "Insights", "Goals", "Alerts", "Sharing", "Reports", "Planner", "Tracking", "Profiles",
    "Filters", "Summaries", "Suggestions", "Sync", "History", "Badges", "Scheduling", "Search", "Feedback", "Export",
];

/// Deterministic stand-in for a chat model that follows the prompt formats.
///
/// It answers refinement prompts with exactly the requested number of
/// items, extraction prompts with two or three items built from the
/// description, and selection prompts by merging the supplied lists by name
/// and keeping the first `n`. Output depends only on the prompt text.
#[derive(Debug, Default)]
pub struct SyntheticModel {
    /// Refinement answers carry this many fewer items than requested.
    pub shortfall: usize,
    /// Every selection answer gets one extra item citing an app id that was
    /// not in the candidate lists.
    pub hallucinate_source: bool,
}

impl SyntheticModel {
    pub fn new() -> Self {
        Self::default()
    }
}

fn section_after<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    let start = text.find(marker)? + marker.len();
    let rest = &text[start..];
    let open = rest.find("```")? + 3;
    let rest = &rest[open..];
    let close = rest.find("```")?;
    Some(rest[..close].trim())
}

fn requested_count(user: &str) -> Option<usize> {
    for pat in ["Ensure that the number of sub-features is ", "You should only keep "] {
        if let Some(i) = user.find(pat) {
            let digits: String = user[i + pat.len()..].chars().take_while(char::is_ascii_digit).collect();
            if let Ok(n) = digits.parse() {
                return Some(n);
            }
        }
    }
    None
}

fn seed(parts: &[&str]) -> u64 {
    let h = fingerprint(parts.first().copied().unwrap_or_default(), &parts[1..].join("\u{1f}"));
    u64::from_str_radix(&h[..16], 16).expect("hex")
}

fn feature_name(block: &str) -> &str {
    block.lines().next().unwrap_or_default().split(": ").next().unwrap_or_default().trim().trim_end_matches(':')
}

impl SyntheticModel {
    fn refine(&self, feature_block: &str, n: usize) -> String {
        let name = feature_name(feature_block);
        let count = n.saturating_sub(self.shortfall);
        let mut used = HashSet::new();
        let items: Vec<Value> = (0..count)
            .map(|i| {
                let mut s = seed(&[feature_block, &i.to_string()]);
                let mut label;
                loop {
                    label = format!(
                        "{} {}",
                        ADJECTIVES[(s % ADJECTIVES.len() as u64) as usize],
                        NOUNS[((s >> 8) % NOUNS.len() as u64) as usize]
                    );
                    if used.insert(label.clone()) {
                        break;
                    }
                    s = s.rotate_left(13).wrapping_add(1);
                }
                json!({
                    KEY_NAME: label,
                    "description": format!("{label} supporting {name}."),
                })
            })
            .collect();
        serde_json::to_string_pretty(&items).expect("json")
    }

    fn extract(&self, description: &str, feature_block: &str) -> String {
        let words: Vec<&str> = description
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| w.len() > 3)
            .collect();
        let s = seed(&[description, feature_block]);
        let count = 2 + (s % 2) as usize;
        let name = feature_name(feature_block);
        let items: Vec<Value> = (0..count)
            .filter_map(|i| {
                if words.is_empty() {
                    return None;
                }
                let a = words[(s as usize + 2 * i) % words.len()];
                let b = words[(s as usize + 2 * i + 1) % words.len()];
                let label = format!("{} {}", capitalize(a), capitalize(b));
                Some(json!({
                    KEY_NAME: label,
                    "description": format!("From the description: {a} {b}, related to {name}."),
                }))
            })
            .collect();
        format!("Here is what I found:\n```json\n{}\n```", serde_json::to_string_pretty(&items).expect("json"))
    }

    fn select(&self, features_block: &str, n: usize) -> String {
        let mut seen = HashSet::new();
        let mut merged: Vec<Value> = Vec::new();
        for value in serde_json::Deserializer::from_str(features_block).into_iter::<Value>().flatten() {
            let Value::Array(list) = value else { continue };
            for item in list {
                let key = item.get(KEY_NAME).and_then(Value::as_str).unwrap_or_default().to_lowercase();
                if seen.insert(key) {
                    merged.push(item);
                }
            }
        }
        merged.truncate(n);
        if self.hallucinate_source {
            merged.push(json!({
                KEY_NAME: "Invented Capability",
                "description": "Not present in any candidate.",
                KEY_SOURCE: "com.hallucinated.app",
            }));
        }
        serde_json::to_string(&merged).expect("json")
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c.flat_map(char::to_lowercase)).collect(),
        None => String::new(),
    }
}

impl ChatProvider for SyntheticModel {
    fn id(&self) -> String {
        "synthetic".into()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let user = request.user.as_str();
        if user.starts_with("```json") {
            let block = section_after(user, "").unwrap_or_default();
            let block = block.strip_prefix("json").unwrap_or(block);
            return Ok(self.select(block, requested_count(user).unwrap_or(5)));
        }
        if user.contains("**App description**") {
            let description = section_after(user, "**App description**").unwrap_or_default();
            let feature = section_after(user, "**Feature**").unwrap_or_default();
            return Ok(self.extract(description, feature));
        }
        if let Some(feature) = section_after(user, "**Feature**") {
            let n = requested_count(user).unwrap_or(5);
            // context prompts also hash the super feature so L2 names vary by branch
            let key = match section_after(user, "**Super Feature**") {
                Some(sup) => format!("{feature}\n{sup}"),
                None => feature.to_string(),
            };
            return Ok(self.refine(&key, n));
        }
        Err(ProviderError::Malformed("synthetic model does not recognise this prompt".into()))
    }
}
