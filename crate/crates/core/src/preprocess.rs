//! Optional text normalization.
//!
//! Rules run in a fixed order: emoji strip, URL, date/hour, ordinal, number,
//! jargon, shouty-lowercase. Every rule is off by default and the pipeline is
//! then the identity. The chain is repeated until the text stops changing, so
//! a jargon correction lost to lowercasing is restored on the next pass and
//! `normalize` is idempotent.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap());
static DATE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:\d{4}[-/.]\d{1,2}[-/.]\d{1,2}|\d{1,2}[-/.]\d{1,2}[-/.]\d{2,4})\b").unwrap()
});
static HOUR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b\d{1,2}:\d{2}(?::\d{2})?(?:\s?[ap]m\b)?|\b\d{1,2}\s?[ap]m\b").unwrap()
});
static ORDINAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b\d+(?:st|nd|rd|th)\b").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d+(?:[.,]\d+)*\b").unwrap());

const BUILTIN_JARGON: &str = include_str!("../data/jargon.tsv");
const MAX_PASSES: usize = 8;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    pub strip_emoji: bool,
    pub replace_urls: bool,
    pub replace_datetimes: bool,
    pub replace_ordinals: bool,
    pub replace_numbers: bool,
    pub lowercase_if_shouty: bool,
    /// Lowercase key to replacement. Empty disables the jargon rule.
    pub jargon_dict: BTreeMap<String, String>,
}

impl RuleConfig {
    pub fn all_enabled() -> Self {
        Self {
            strip_emoji: true,
            replace_urls: true,
            replace_datetimes: true,
            replace_ordinals: true,
            replace_numbers: true,
            lowercase_if_shouty: true,
            jargon_dict: builtin_jargon(),
        }
    }
}

/// The shipped forum dictionary.
pub fn builtin_jargon() -> BTreeMap<String, String> {
    parse_jargon(BUILTIN_JARGON).expect("builtin dictionary parses")
}

pub fn parse_jargon(text: &str) -> Result<BTreeMap<String, String>> {
    let mut dict = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('\t')
            .ok_or_else(|| Error::Parse { line: line_no, msg: "expected key<TAB>replacement".into() })?;
        let key = key.trim().to_lowercase();
        let word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
        if !word(key.chars().next()) || !word(key.chars().last()) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("jargon key `{key}` must start and end with a word character"),
            });
        }
        dict.insert(key, value.trim().to_string());
    }
    Ok(dict)
}

pub fn load_jargon(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jargon(&text)
}

/// True iff uppercase letters strictly outnumber lowercase ones.
pub fn is_shouty(text: &str) -> bool {
    let (mut upper, mut lower) = (0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        if c.is_uppercase() {
            upper += 1;
        } else if c.is_lowercase() {
            lower += 1;
        }
    }
    upper > lower
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2B50 | 0x2B55 | 0x2B1B | 0x2B1C
        | 0x231A | 0x231B | 0x23E9..=0x23FA
        | 0x200D | 0xFE0E | 0xFE0F
        | 0xE0020..=0xE007F)
}

/// Removes emoji; a run of emoji and whitespace collapses to one space, or
/// to nothing at either end of the text.
fn strip_emoji(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if !(is_emoji(c) || c.is_whitespace()) {
            out.push(c);
            i += 1;
            continue;
        }
        let mut j = i;
        let mut has_emoji = false;
        while j < chars.len() && (is_emoji(chars[j]) || chars[j].is_whitespace()) {
            has_emoji |= is_emoji(chars[j]);
            j += 1;
        }
        if has_emoji {
            if !out.is_empty() && j < chars.len() {
                out.push(' ');
            }
        } else {
            out.extend(&chars[i..j]);
        }
        i = j;
    }
    out
}

/// Compiled form of a [`RuleConfig`].
pub struct Normalizer {
    cfg: RuleConfig,
    jargon: Option<Regex>,
}

impl Normalizer {
    pub fn new(cfg: &RuleConfig) -> Self {
        let jargon = (!cfg.jargon_dict.is_empty()).then(|| {
            let mut keys: Vec<&String> = cfg.jargon_dict.keys().collect();
            keys.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
            let alts: Vec<String> = keys.iter().map(|k| regex::escape(k)).collect();
            Regex::new(&format!(r"(?i)\b(?:{})\b", alts.join("|"))).expect("escaped alternation compiles")
        });
        Self { cfg: cfg.clone(), jargon }
    }

    pub fn normalize(&self, text: &str) -> String {
        let mut current = text.to_string();
        for _ in 0..MAX_PASSES {
            let next = self.pass(&current);
            if next == current {
                break;
            }
            current = next;
        }
        current
    }

    fn pass(&self, text: &str) -> String {
        let cfg = &self.cfg;
        let mut t = text.to_string();
        if cfg.strip_emoji {
            t = strip_emoji(&t);
        }
        if cfg.replace_urls {
            t = URL.replace_all(&t, "url link").into_owned();
        }
        if cfg.replace_datetimes {
            t = DATE.replace_all(&t, "date").into_owned();
            t = HOUR.replace_all(&t, "hour").into_owned();
        }
        if cfg.replace_ordinals {
            t = ORDINAL.replace_all(&t, "nth").into_owned();
        }
        if cfg.replace_numbers {
            t = NUMBER.replace_all(&t, "num").into_owned();
        }
        if let Some(re) = &self.jargon {
            t = re
                .replace_all(&t, |caps: &Captures| {
                    let m = &caps[0];
                    cfg.jargon_dict.get(&m.to_lowercase()).cloned().unwrap_or_else(|| m.to_string())
                })
                .into_owned();
        }
        if cfg.lowercase_if_shouty && is_shouty(&t) {
            t = t.to_lowercase();
        }
        t
    }
}

pub fn normalize(text: &str, cfg: &RuleConfig) -> String {
    Normalizer::new(cfg).normalize(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn only(f: impl FnOnce(&mut RuleConfig)) -> RuleConfig {
        let mut c = RuleConfig::default();
        f(&mut c);
        c
    }

    #[test]
    fn url_replacement() {
        let c = only(|c| c.replace_urls = true);
        assert_eq!(normalize("See http://a.b/c now", &c), "See url link now");
        assert_eq!(normalize("go to www.ql.com", &c), "go to url link");
    }

    #[test]
    fn ordinals_and_numbers() {
        let c = only(|c| {
            c.replace_ordinals = true;
            c.replace_numbers = true;
        });
        assert_eq!(normalize("I arrived 1st and 5th", &c), "I arrived nth and nth");
        assert_eq!(normalize("2nd of 3 at 4.5", &c), "nth of num at num");
    }

    #[test]
    fn jargon_with_numbers() {
        let c = only(|c| {
            c.replace_numbers = true;
            c.jargon_dict = builtin_jargon();
        });
        assert_eq!(normalize("paid 500 qar", &c), "paid num Qatar currency");
        assert_eq!(normalize("QL is fun in doha", &c), "Qatar forum is fun in Doha");
        // whole tokens only
        assert_eq!(normalize("qlx qarz", &c), "qlx qarz");
    }

    #[test]
    fn dates_and_hours() {
        let c = only(|c| c.replace_datetimes = true);
        assert_eq!(normalize("on 12/05/2017 at 9:30", &c), "on date at hour");
        assert_eq!(normalize("2017-05-12 21:05", &c), "date hour");
        assert_eq!(normalize("meet 7pm", &c), "meet hour");
    }

    #[test]
    fn emoji_strip_collapses_space() {
        let c = only(|c| c.strip_emoji = true);
        assert_eq!(normalize("hi 😀 there", &c), "hi there");
        assert_eq!(normalize("😀😀 hi 👍", &c), "hi");
        assert_eq!(normalize("a  b", &c), "a  b");
    }

    #[test]
    fn shouty_counts() {
        assert!(!is_shouty("HELLO world"));
        assert!(is_shouty("HELLO World"));
        assert!(!is_shouty("1234 !!"));
    }

    #[test]
    fn shouty_lowercase_keeps_jargon_casing() {
        let c = only(|c| {
            c.lowercase_if_shouty = true;
            c.jargon_dict = builtin_jargon();
        });
        assert_eq!(normalize("HELLO THERE FRIEND QAR", &c), "hello there friend Qatar currency");
    }

    #[test]
    fn builtin_dictionary_entries() {
        let d = builtin_jargon();
        assert_eq!(d["qar"], "Qatar currency");
        assert_eq!(d["qling"], "browsing Qatar forum");
        assert_eq!(d["ql"], "Qatar forum");
        assert_eq!(d["villagio"], "Qatar shopping center");
        assert_eq!(d["doha"], "Doha");
        assert_eq!(d["qatar"], "Qatar");
    }

    #[test]
    fn jargon_file_errors() {
        assert!(matches!(parse_jargon("# c\nnotab\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_jargon("-x\ty\n").is_err());
    }

    fn arb_config() -> impl Strategy<Value = RuleConfig> {
        (any::<[bool; 7]>()).prop_map(|f| RuleConfig {
            strip_emoji: f[0],
            replace_urls: f[1],
            replace_datetimes: f[2],
            replace_ordinals: f[3],
            replace_numbers: f[4],
            lowercase_if_shouty: f[5],
            jargon_dict: if f[6] { builtin_jargon() } else { BTreeMap::new() },
        })
    }

    fn arb_text() -> impl Strategy<Value = String> {
        let pieces = prop::sample::select(vec![
            "QAR", "qar", "Doha", "DOHA", "ql", "qling", "villagio", "qatar", "HELLO", "world", "1st",
            "22nd", "500", "3.25", "12/05/2017", "2017-05-12", "9:30", "7pm", "http://x.y/z?a=1",
            "www.ql.com", "😀", "👍🏽", "!", "?", " ", "  ", "\n", "ABC", "e.g.", "x1", "2rd",
        ]);
        prop::collection::vec(pieces, 0..14).prop_map(|v| v.join(" "))
    }

    proptest! {
        #[test]
        fn idempotent(text in arb_text(), cfg in arb_config()) {
            let once = normalize(&text, &cfg);
            prop_assert_eq!(normalize(&once, &cfg), once);
        }

        #[test]
        fn disabled_is_identity(text in "\\PC*") {
            prop_assert_eq!(normalize(&text, &RuleConfig::default()), text);
        }
    }
}
