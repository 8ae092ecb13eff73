use std::sync::LazyLock;

use regex::Regex;

use super::{TokenSequence, END, START};

static WEBSITE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[a-z:/.0-9]+\.(org|com|net)").expect("static regex"));

/// Runs the character-level cleanse and returns the cleaned text, before
/// tokenization and marker wrapping.
///
/// Steps, in order: lowercase; newlines to spaces; `&` to `and`; website
/// domains to `website`; whitespace tokens holding any numeric character to
/// `num`; transliteration to ASCII; removal of everything outside `[a-z]`
/// and whitespace.
pub fn cleanse(raw: &str) -> String {
    let text = raw.to_lowercase();
    let text = text.replace("\r\n", " ").replace(['\n', '\r'], " ");
    let text = text.replace('&', " and ");
    let text = WEBSITE.replace_all(&text, " website ");

    let text = text
        .split_whitespace()
        .map(|tok| {
            if tok.chars().any(char::is_numeric) {
                "num"
            } else {
                tok
            }
        })
        .collect::<Vec<_>>()
        .join(" ");

    let mut ascii = String::with_capacity(text.len());
    for c in text.chars() {
        if c.is_ascii() {
            ascii.push(c);
        } else if let Some(s) = deunicode::deunicode_char(c) {
            ascii.push_str(s);
        }
    }

    ascii
        .chars()
        .filter_map(|c| {
            if c.is_ascii_whitespace() {
                Some(' ')
            } else if c.is_ascii_alphabetic() {
                Some(c.to_ascii_lowercase())
            } else {
                None
            }
        })
        .collect()
}

/// Cleans a raw caption and wraps it as `<startseq> ... <endseq>`.
///
/// Total: empty or fully removed input yields `[<startseq>, <endseq>]`.
pub fn normalize_caption(raw: &str) -> TokenSequence {
    let cleaned = cleanse(raw);
    let mut tokens = Vec::with_capacity(cleaned.len() / 4 + 2);
    tokens.push(START.to_string());
    tokens.extend(cleaned.split_whitespace().map(str::to_string));
    tokens.push(END.to_string());
    TokenSequence::from_unchecked(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(raw: &str) -> Vec<String> {
        normalize_caption(raw).words()
    }

    #[test]
    fn ampersand_becomes_and() {
        assert_eq!(
            normalize_caption("Sweet & Spicy!").tokens(),
            &[START, "sweet", "and", "spicy", END]
        );
        assert_eq!(words("mac&cheese"), ["mac", "and", "cheese"]);
    }

    #[test]
    fn accents_are_transliterated() {
        assert_eq!(
            normalize_caption("gruyère soufflé").tokens(),
            &[START, "gruyere", "souffle", END]
        );
        assert_eq!(words("Crème BRÛLÉE"), ["creme", "brulee"]);
    }

    #[test]
    fn website_rule_runs_before_numeric_rule() {
        assert_eq!(
            normalize_caption("see www.menu1.com, table 12").tokens(),
            &[START, "see", "website", "table", "num", END]
        );
        assert_eq!(words("menu2.com"), ["website"]);
        assert_eq!(words("http://yelp.net/biz"), ["website", "biz"]);
    }

    #[test]
    fn numeric_tokens_collapse() {
        assert_eq!(words("2 eggs for $5.99"), ["num", "eggs", "for", "num"]);
        assert_eq!(words("b12 vitamins"), ["num", "vitamins"]);
    }

    #[test]
    fn empty_and_punctuation_only_inputs() {
        assert_eq!(normalize_caption("").tokens(), &[START, END]);
        assert_eq!(normalize_caption("?!... --").tokens(), &[START, END]);
        assert_eq!(normalize_caption("\n\n").tokens(), &[START, END]);
    }

    #[test]
    fn newlines_separate_words() {
        assert_eq!(words("fried\nchicken"), ["fried", "chicken"]);
        assert_eq!(words("fried\r\nchicken"), ["fried", "chicken"]);
    }

    #[test]
    fn punctuation_inside_words_is_deleted() {
        assert_eq!(words("chef's kiss, o'clock"), ["chefs", "kiss", "oclock"]);
        assert_eq!(words("<startseq>"), ["startseq"]);
    }

    #[test]
    fn unmapped_characters_are_dropped() {
        // transliteration of non-Latin scripts produces lowercase ASCII
        for w in words("寿司 and ラーメン 🍜") {
            assert!(w.bytes().all(|b| b.is_ascii_lowercase()), "{w}");
        }
    }

    proptest! {
        #[test]
        fn output_alphabet_and_markers(raw in "\\PC{0,60}") {
            let seq = normalize_caption(&raw);
            prop_assert!(seq.validate().is_ok());
            prop_assert_eq!(seq.tokens().first().map(String::as_str), Some(START));
            prop_assert_eq!(seq.tokens().last().map(String::as_str), Some(END));
            for w in seq.words() {
                prop_assert!(!w.is_empty() && w.bytes().all(|b| b.is_ascii_lowercase()));
            }
        }

        #[test]
        fn cleanse_is_idempotent(raw in "[ -~éèüß&\\n]{0,60}") {
            let once = normalize_caption(&raw).words().join(" ");
            let twice = cleanse(&once).split_whitespace().collect::<Vec<_>>().join(" ");
            prop_assert_eq!(once, twice);
        }
    }
}
