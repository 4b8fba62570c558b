//! Transcript log and the replay provider built from it.

use std::collections::{HashMap, VecDeque};
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::provider::{ChatExchange, ChatProvider, ChatRequest, ProviderError};
use crate::persist::{self, FormatHeader, PersistError};

pub const TRANSCRIPT_FORMAT: &str = "inspire-transcript";
pub const TRANSCRIPT_VERSION: &str = "1.0";

/// Append-only exchange log, one JSON object per line. Appends from
/// concurrent callers are serialized.
#[derive(Debug)]
pub struct TranscriptLog {
    path: PathBuf,
    lock: Mutex<()>,
}

impl TranscriptLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, exchange: &ChatExchange) -> Result<(), PersistError> {
        let line = serde_json::to_string(exchange)?;
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        persist::append_line(&self.path, &FormatHeader::new(TRANSCRIPT_FORMAT, TRANSCRIPT_VERSION), &line)
    }
}

/// Read every exchange in a transcript. A torn final line (interrupted
/// append) is skipped.
pub fn read_transcript<R: BufRead>(reader: R) -> Result<Vec<ChatExchange>, PersistError> {
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if i == 0 {
            if let Some(h) = FormatHeader::sniff(line) {
                h.check(TRANSCRIPT_FORMAT, TRANSCRIPT_VERSION)?;
                continue;
            }
        }
        match serde_json::from_str::<ChatExchange>(line) {
            Ok(ex) => out.push(ex),
            Err(e) if i == last => log::warn!("ignoring torn transcript tail: {e}"),
            Err(e) => return Err(PersistError::Corrupt(format!("transcript line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

/// Serves recorded responses by prompt fingerprint.
///
/// Repeated identical requests get the recorded responses in order; once
/// they run out the last one is served again.
#[derive(Debug)]
pub struct ReplayProvider {
    recordings: Mutex<HashMap<String, VecDeque<String>>>,
}

impl ReplayProvider {
    pub fn from_exchanges(exchanges: impl IntoIterator<Item = ChatExchange>) -> Self {
        let mut recordings: HashMap<String, VecDeque<String>> = HashMap::new();
        for ex in exchanges {
            recordings.entry(ex.fingerprint).or_default().push_back(ex.response);
        }
        Self {
            recordings: Mutex::new(recordings),
        }
    }

    pub fn load(path: &Path) -> Result<Self, PersistError> {
        let file = std::fs::File::open(path)?;
        Ok(Self::from_exchanges(read_transcript(std::io::BufReader::new(file))?))
    }

    pub fn len(&self) -> usize {
        self.recordings.lock().unwrap_or_else(|p| p.into_inner()).values().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ChatProvider for ReplayProvider {
    fn id(&self) -> String {
        "replay".into()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let fingerprint = request.fingerprint();
        let mut map = self.recordings.lock().unwrap_or_else(|p| p.into_inner());
        let queue = map.get_mut(&fingerprint).filter(|q| !q.is_empty());
        match queue {
            Some(q) if q.len() > 1 => Ok(q.pop_front().expect("non-empty")),
            Some(q) => Ok(q.front().expect("non-empty").clone()),
            None => Err(ProviderError::ReplayMiss { fingerprint }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm_gateway::provider::{Gateway, RetryPolicy, SamplingParams};
    use crate::llm_gateway::mock::ScriptedProvider;
    use std::sync::Arc;

    fn req(user: &str) -> ChatRequest {
        ChatRequest {
            system: "sys".into(),
            user: user.into(),
            params: SamplingParams::default(),
        }
    }

    #[test]
    fn record_then_replay_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let log = Arc::new(TranscriptLog::new(dir.path().join("t.jsonl")));
        let live = Arc::new(ScriptedProvider::new(vec![Ok("first ünïcode\n".into()), Ok("second".into())]));
        let g = Gateway::new(live).with_transcript(log.clone()).with_policy(RetryPolicy::immediate(1));
        let a = g.complete("sys", "one").unwrap();
        let b = g.complete("sys", "two").unwrap();

        let replay = ReplayProvider::load(log.path()).unwrap();
        assert_eq!(replay.len(), 2);
        assert_eq!(replay.complete(&req("one")).unwrap(), a.response);
        assert_eq!(replay.complete(&req("two")).unwrap(), b.response);
        assert!(matches!(replay.complete(&req("three")), Err(ProviderError::ReplayMiss { .. })));
    }

    #[test]
    fn repeated_requests_replay_in_order_then_repeat_last() {
        let mk = |r: &str| ChatExchange {
            fingerprint: req("u").fingerprint(),
            system: "sys".into(),
            user: "u".into(),
            params: SamplingParams::default(),
            response: r.into(),
            provider: "x".into(),
            latency_ms: 0,
            retries: 0,
        };
        let replay = ReplayProvider::from_exchanges(vec![mk("a"), mk("b")]);
        assert_eq!(replay.complete(&req("u")).unwrap(), "a");
        assert_eq!(replay.complete(&req("u")).unwrap(), "b");
        assert_eq!(replay.complete(&req("u")).unwrap(), "b");
    }

    #[test]
    fn torn_tail_is_ignored_but_corrupt_middle_is_not() {
        let ex = serde_json::to_string(&ChatExchange {
            fingerprint: "f".into(),
            system: "s".into(),
            user: "u".into(),
            params: SamplingParams::default(),
            response: "r".into(),
            provider: "p".into(),
            latency_ms: 1,
            retries: 0,
        })
        .unwrap();
        let header = FormatHeader::new(TRANSCRIPT_FORMAT, TRANSCRIPT_VERSION).to_line();
        let torn = format!("{header}{ex}\n{}", &ex[..10]);
        assert_eq!(read_transcript(torn.as_bytes()).unwrap().len(), 1);
        let corrupt = format!("{header}{}\n{ex}\n", &ex[..10]);
        assert!(read_transcript(corrupt.as_bytes()).is_err());
    }

    #[test]
    fn concurrent_appends_do_not_interleave() {
        let dir = tempfile::tempdir().unwrap();
        let log = Arc::new(TranscriptLog::new(dir.path().join("t.jsonl")));
        let live = Arc::new(ScriptedProvider::repeating("x".repeat(5000)));
        let g = Gateway::new(live).with_transcript(log.clone());
        std::thread::scope(|s| {
            for t in 0..8 {
                let g = g.clone();
                s.spawn(move || {
                    for i in 0..10 {
                        g.complete("sys", &format!("{t}-{i}")).unwrap();
                    }
                });
            }
        });
        let file = std::fs::File::open(log.path()).unwrap();
        assert_eq!(read_transcript(std::io::BufReader::new(file)).unwrap().len(), 80);
    }
}
