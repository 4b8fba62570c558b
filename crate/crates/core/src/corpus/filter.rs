use serde::{Deserialize, Serialize};

use super::language::{is_english, LanguageDetector};
use super::AppRecord;

/// Descriptions shorter than this many characters are removed.
pub const MIN_DESCRIPTION_CHARS: usize = 200;

/// Google Play game category tags.
pub const DEFAULT_GAME_CATEGORIES: &[&str] = &[
    "GAME",
    "GAME_ACTION",
    "GAME_ADVENTURE",
    "GAME_ARCADE",
    "GAME_BOARD",
    "GAME_CARD",
    "GAME_CASINO",
    "GAME_CASUAL",
    "GAME_EDUCATIONAL",
    "GAME_MUSIC",
    "GAME_PUZZLE",
    "GAME_RACING",
    "GAME_ROLE_PLAYING",
    "GAME_SIMULATION",
    "GAME_SPORTS",
    "GAME_STRATEGY",
    "GAME_TRIVIA",
    "GAME_WORD",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub game_categories: Vec<String>,
    pub min_description_chars: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            game_categories: DEFAULT_GAME_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            min_description_chars: MIN_DESCRIPTION_CHARS,
        }
    }
}

impl FilterConfig {
    pub fn is_game(&self, category: &str) -> bool {
        let category = category.trim();
        self.game_categories.iter().any(|g| g.eq_ignore_ascii_case(category))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Game,
    NonEnglish,
    TooShort,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterOutcome {
    /// Kept, with the language tag that was used for the decision.
    Keep { language: String },
    Reject { reason: RejectReason, note: Option<String> },
}

impl FilterOutcome {
    pub fn is_keep(&self) -> bool {
        matches!(self, FilterOutcome::Keep { .. })
    }

    pub fn reason(&self) -> Option<RejectReason> {
        match self {
            FilterOutcome::Keep { .. } => None,
            FilterOutcome::Reject { reason, .. } => Some(*reason),
        }
    }
}

/// Apply the game, language and length checks in that order; the first
/// failing check decides the reason.
///
/// A record that already carries a language tag is not re-detected.
pub fn filter_record(record: &AppRecord, config: &FilterConfig, detector: &dyn LanguageDetector) -> FilterOutcome {
    if config.is_game(&record.category) {
        return FilterOutcome::Reject {
            reason: RejectReason::Game,
            note: None,
        };
    }

    let language = match record.language.as_deref().map(str::trim).filter(|l| !l.is_empty()) {
        Some(tag) => tag.to_string(),
        None => match detector.detect(&record.description) {
            Ok(tag) => tag,
            Err(err) => {
                return FilterOutcome::Reject {
                    reason: RejectReason::NonEnglish,
                    note: Some(format!("language detection failed: {err}")),
                }
            }
        },
    };
    if !is_english(&language) {
        return FilterOutcome::Reject {
            reason: RejectReason::NonEnglish,
            note: None,
        };
    }

    if record.description_chars() < config.min_description_chars {
        return FilterOutcome::Reject {
            reason: RejectReason::TooShort,
            note: None,
        };
    }

    FilterOutcome::Keep { language }
}

/// Per-reason tally of one ingestion.
///
/// `kept + game + non_english + too_short == examined` always holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub examined: usize,
    pub kept: usize,
    pub game: usize,
    pub non_english: usize,
    pub too_short: usize,
    /// Detector failures, as `app_id: message`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl FilterReport {
    pub fn rejected(&self) -> usize {
        self.game + self.non_english + self.too_short
    }

    pub(crate) fn record(&mut self, app_id: &str, outcome: &FilterOutcome) {
        self.examined += 1;
        match outcome {
            FilterOutcome::Keep { .. } => self.kept += 1,
            FilterOutcome::Reject { reason, note } => {
                match reason {
                    RejectReason::Game => self.game += 1,
                    RejectReason::NonEnglish => self.non_english += 1,
                    RejectReason::TooShort => self.too_short += 1,
                }
                if let Some(note) = note {
                    self.notes.push(format!("{app_id}: {note}"));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::language::{DetectError, StopwordLanguageDetector};
    use crate::corpus::tests::record;

    struct Failing;
    impl LanguageDetector for Failing {
        fn detect(&self, _text: &str) -> Result<String, DetectError> {
            Err(DetectError::Backend("model not loaded".into()))
        }
    }

    fn text(len: usize) -> String {
        "x".repeat(len)
    }

    #[test]
    fn length_boundary() {
        let cfg = FilterConfig::default();
        let short = filter_record(&record("a", "TOOLS", &text(199)), &cfg, &StopwordLanguageDetector);
        assert_eq!(short.reason(), Some(RejectReason::TooShort));
        let exact = filter_record(&record("a", "TOOLS", &text(200)), &cfg, &StopwordLanguageDetector);
        assert!(exact.is_keep());
    }

    #[test]
    fn length_counts_characters_not_bytes() {
        let cfg = FilterConfig::default();
        let accented = "é".repeat(150);
        assert_eq!(accented.len(), 300);
        let r = filter_record(&record("a", "TOOLS", &accented), &cfg, &StopwordLanguageDetector);
        assert_eq!(r.reason(), Some(RejectReason::TooShort));
    }

    #[test]
    fn game_wins_over_everything() {
        let cfg = FilterConfig::default();
        let r = filter_record(&record("a", "GAME_PUZZLE", &text(5000)), &cfg, &StopwordLanguageDetector);
        assert_eq!(r.reason(), Some(RejectReason::Game));
        let mut fr = record("a", "game_puzzle", "court");
        fr.language = Some("fr".into());
        assert_eq!(filter_record(&fr, &cfg, &StopwordLanguageDetector).reason(), Some(RejectReason::Game));
    }

    #[test]
    fn language_checked_before_length() {
        let cfg = FilterConfig::default();
        let mut r = record("a", "TOOLS", "court");
        r.language = Some("de".into());
        assert_eq!(filter_record(&r, &cfg, &StopwordLanguageDetector).reason(), Some(RejectReason::NonEnglish));
    }

    #[test]
    fn detector_failure_is_non_english_with_note() {
        let mut r = record("a", "TOOLS", &text(300));
        r.language = None;
        match filter_record(&r, &FilterConfig::default(), &Failing) {
            FilterOutcome::Reject { reason, note } => {
                assert_eq!(reason, RejectReason::NonEnglish);
                assert!(note.unwrap().contains("model not loaded"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn configurable_game_set() {
        let cfg = FilterConfig {
            game_categories: vec!["ARCADE".into()],
            ..Default::default()
        };
        assert!(filter_record(&record("a", "GAME_PUZZLE", &text(300)), &cfg, &StopwordLanguageDetector).is_keep());
        assert!(!filter_record(&record("a", "arcade", &text(300)), &cfg, &StopwordLanguageDetector).is_keep());
    }
}
