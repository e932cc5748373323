use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::Tokens;

/// Token normalization applied to both code and comments.
///
/// With every flag on, the output tokens are nonempty, lowercase and consist
/// of ASCII letters only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub split_camel: bool,
    pub split_underscore: bool,
    pub strip_non_alpha: bool,
    pub lowercase: bool,
    /// Comment token subsequences that mark a sample as auto-generated.
    pub auto_generated_patterns: Vec<Tokens>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            split_camel: true,
            split_underscore: true,
            strip_non_alpha: true,
            lowercase: true,
            auto_generated_patterns: default_auto_generated_patterns(),
        }
    }
}

/// Stand-in heuristic for auto-generated code: comments containing
/// "generated by" or "auto generated".
pub fn default_auto_generated_patterns() -> Vec<Tokens> {
    vec![crate::toks(&["generated", "by"]), crate::toks(&["auto", "generated"])]
}

/// Tokenizes raw code or comment text.
///
/// Whitespace always separates tokens. Underscores separate when
/// `split_underscore` is set, and every non-letter character (digits and
/// symbols included) acts as a separator and is dropped when
/// `strip_non_alpha` is set. Identifiers are then split on camel-case
/// boundaries, including acronym boundaries (`HTTPServer` -> `HTTP`, `Server`).
///
/// ```
/// use hybridsum::corpus::{preprocess, PreprocessConfig};
///
/// let cfg = PreprocessConfig::default();
/// assert_eq!(preprocess("getUserName", &cfg), ["get", "user", "name"]);
/// assert_eq!(preprocess("foo_bar2;", &cfg), ["foo", "bar"]);
/// ```
pub fn preprocess(raw_text: &str, cfg: &PreprocessConfig) -> Tokens {
    let mut out = Vec::new();
    let is_sep = |c: char| {
        c.is_whitespace()
            || (cfg.split_underscore && c == '_')
            || (cfg.strip_non_alpha && !c.is_ascii_alphabetic())
    };
    for piece in raw_text.split(is_sep).filter(|p| !p.is_empty()) {
        if cfg.split_camel {
            for part in split_camel(piece) {
                push_token(&mut out, part, cfg.lowercase);
            }
        } else {
            push_token(&mut out, piece, cfg.lowercase);
        }
    }
    out
}

/// Byte-level entry point: rejects input that is not valid UTF-8.
pub fn preprocess_bytes(raw: &[u8], cfg: &PreprocessConfig) -> Result<Tokens, CorpusError> {
    let text = std::str::from_utf8(raw)
        .map_err(|e| CorpusError::Decode { offset: e.valid_up_to() })?;
    Ok(preprocess(text, cfg))
}

fn push_token(out: &mut Tokens, tok: &str, lowercase: bool) {
    if tok.is_empty() {
        return;
    }
    if lowercase {
        out.push(tok.to_lowercase());
    } else {
        out.push(tok.to_string());
    }
}

/// Splits an identifier at lower->Upper transitions and before the last
/// capital of an acronym run that is followed by a lowercase letter.
fn split_camel(s: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut parts = Vec::new();
    let mut start = 0;
    for i in 1..chars.len() {
        let (pos, c) = chars[i];
        let prev = chars[i - 1].1;
        let next = chars.get(i + 1).map(|&(_, n)| n);
        let boundary = c.is_uppercase()
            && (prev.is_lowercase()
                || prev.is_ascii_digit()
                || (prev.is_uppercase() && next.is_some_and(|n| n.is_lowercase())));
        if boundary {
            parts.push(&s[start..pos]);
            start = pos;
        }
    }
    parts.push(&s[start..]);
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pp(s: &str) -> Tokens {
        preprocess(s, &PreprocessConfig::default())
    }

    #[test]
    fn camel_case() {
        assert_eq!(pp("getUserName"), ["get", "user", "name"]);
        assert_eq!(pp("HTTPServerError"), ["http", "server", "error"]);
        assert_eq!(pp("parseXML"), ["parse", "xml"]);
    }

    #[test]
    fn underscore_and_digits() {
        assert_eq!(pp("foo_bar2;"), ["foo", "bar"]);
        assert_eq!(pp("MAX_VALUE"), ["max", "value"]);
        assert_eq!(pp("utf8Decoder"), ["utf", "decoder"]);
    }

    #[test]
    fn empty_and_symbols() {
        assert!(pp("").is_empty());
        assert!(pp("{ }; 42 ()").is_empty());
    }

    #[test]
    fn java_method() {
        let toks = pp("public int getX() { return this.x_pos + 1; }");
        assert_eq!(toks, ["public", "int", "get", "x", "return", "this", "x", "pos"]);
    }

    #[test]
    fn flags_off() {
        let cfg = PreprocessConfig {
            split_camel: false,
            split_underscore: false,
            strip_non_alpha: false,
            lowercase: false,
            auto_generated_patterns: vec![],
        };
        assert_eq!(preprocess("getX foo_bar2;", &cfg), ["getX", "foo_bar2;"]);
    }

    #[test]
    fn decode_error_reports_offset() {
        let err = preprocess_bytes(b"abc\xffdef", &PreprocessConfig::default()).unwrap_err();
        assert!(matches!(err, CorpusError::Decode { offset: 3 }));
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,60}") {
            let once = pp(&s);
            let twice = pp(&once.join(" "));
            prop_assert_eq!(&once, &twice);
            for t in &once {
                prop_assert!(!t.is_empty());
                prop_assert!(t.chars().all(|c| c.is_ascii_lowercase()));
            }
        }

        #[test]
        fn identifier_like_idempotent(s in "[A-Za-z0-9_ ]{0,40}") {
            let once = pp(&s);
            prop_assert_eq!(pp(&once.join(" ")), once);
        }
    }
}
