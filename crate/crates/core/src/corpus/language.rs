use thiserror::Error;

pub const ENGLISH: &str = "en";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DetectError {
    #[error("language could not be determined")]
    Undetermined,
    #[error("detector backend: {0}")]
    Backend(String),
}

/// Language identification for description text.
///
/// Returns a BCP-47 style primary tag such as `en` or `fr`.
pub trait LanguageDetector: Send + Sync {
    fn detect(&self, text: &str) -> Result<String, DetectError>;
}

pub(crate) fn is_english(tag: &str) -> bool {
    let primary = tag.split(['-', '_']).next().unwrap_or_default();
    primary.eq_ignore_ascii_case(ENGLISH) || primary.eq_ignore_ascii_case("eng")
}

const STOPWORDS: &[(&str, &[&str])] = &[
    ("en", &["the", "and", "with", "you", "your", "for", "this", "that", "is", "to", "of", "it", "are"]),
    ("fr", &["le", "la", "les", "et", "avec", "vous", "votre", "pour", "est", "des", "une", "dans"]),
    ("de", &["der", "die", "das", "und", "mit", "sie", "ihre", "für", "ist", "ein", "eine", "nicht"]),
    ("es", &["el", "los", "las", "y", "con", "usted", "su", "para", "es", "una", "del", "por"]),
    ("it", &["il", "gli", "e", "con", "che", "per", "è", "una", "della", "non", "sono"]),
    ("pt", &["o", "os", "as", "com", "você", "seu", "sua", "para", "é", "uma", "não"]),
];

/// Deterministic detector for fixtures and offline use.
///
/// A `lang:<tag>` token anywhere in the text decides outright. Otherwise each
/// candidate language scores one point per stopword occurrence and the best
/// score wins, ties going to the earlier language in the table. Text with
/// no stopword hits is undetermined.
#[derive(Debug, Clone, Copy, Default)]
pub struct StopwordLanguageDetector;

impl LanguageDetector for StopwordLanguageDetector {
    fn detect(&self, text: &str) -> Result<String, DetectError> {
        let mut scores = [0usize; STOPWORDS.len()];
        for raw in text.split_whitespace() {
            if let Some(tag) = raw.strip_prefix("lang:") {
                let tag = tag.trim_matches(|c: char| !c.is_alphanumeric() && c != '-');
                if !tag.is_empty() {
                    return Ok(tag.to_ascii_lowercase());
                }
            }
            let word = raw
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase();
            if word.is_empty() {
                continue;
            }
            for (i, (_, words)) in STOPWORDS.iter().enumerate() {
                if words.contains(&word.as_str()) {
                    scores[i] += 1;
                }
            }
        }
        let (best, score) = scores
            .iter()
            .enumerate()
            .fold((0, 0), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
        if score == 0 {
            return Err(DetectError::Undetermined);
        }
        Ok(STOPWORDS[best].0.to_string())
    }
}
