use serde::{Deserialize, Serialize};

/// A slice of one app description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub app_id: String,
    pub chunk_index: usize,
    pub text: String,
}

/// Split `text` into pieces of at most `max_chars` characters.
///
/// Each piece ends just after the last whitespace character inside the
/// window; a window without whitespace is cut hard at `max_chars`. The
/// pieces concatenate back to `text`. Empty input yields no pieces.
pub fn split_text(text: &str, max_chars: usize) -> Vec<&str> {
    assert!(max_chars > 0, "max_chars must be positive");
    let mut pieces = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        let window_end = match rest.char_indices().nth(max_chars) {
            Some((byte, _)) => byte,
            None => {
                pieces.push(rest);
                break;
            }
        };
        let window = &rest[..window_end];
        let cut = match window.char_indices().rev().find(|(_, c)| c.is_whitespace()) {
            Some((byte, c)) => byte + c.len_utf8(),
            None => window_end,
        };
        pieces.push(&rest[..cut]);
        rest = &rest[cut..];
    }
    pieces
}

pub fn chunk_description(app_id: &str, text: &str, max_chars: usize) -> Vec<Chunk> {
    split_text(text, max_chars)
        .into_iter()
        .enumerate()
        .map(|(chunk_index, piece)| Chunk {
            app_id: app_id.to_string(),
            chunk_index,
            text: piece.to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_at_boundaries() {
        assert_eq!(split_text(&"a".repeat(4500), 2000).len(), 3);
        assert_eq!(split_text(&"a".repeat(2000), 2000).len(), 1);
        let t = "b".repeat(1999);
        assert_eq!(split_text(&t, 2000), vec![t.as_str()]);
        assert_eq!(split_text(&"a".repeat(2001), 2000).len(), 2);
        assert!(split_text("", 2000).is_empty());
    }

    #[test]
    fn wordy_4500_chars_is_three_chunks() {
        let text: String = "sleep tracker ".chars().cycle().take(4500).collect();
        let chunks = chunk_description("app", &text, 2000);
        assert_eq!(chunks.len(), 3);
        assert!(chunks.iter().all(|c| c.text.chars().count() <= 2000));
        assert!(chunks[0].text.ends_with(' '));
        assert_eq!(chunks.iter().map(|c| c.chunk_index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn splits_after_last_whitespace() {
        assert_eq!(split_text("aaa bbb ccc", 8), vec!["aaa bbb ", "ccc"]);
        assert_eq!(split_text("aaa\nbbbbbbbbbb", 6), vec!["aaa\n", "bbbbbb", "bbbb"]);
    }

    #[test]
    fn multibyte_characters_count_once() {
        let t = "é".repeat(5);
        assert_eq!(split_text(&t, 2), vec!["éé", "éé", "é"]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn lossless_and_bounded(text in "\\PC{0,300}", max in 1usize..40) {
            let pieces = split_text(&text, max);
            prop_assert_eq!(pieces.concat(), text.clone());
            for (i, p) in pieces.iter().enumerate() {
                let n = p.chars().count();
                prop_assert!(n >= 1 && n <= max);
                if i + 1 < pieces.len() {
                    // non-final pieces are full or end on whitespace
                    prop_assert!(n == max || p.chars().last().unwrap().is_whitespace());
                }
            }
        }
    }
}
