//! Text normalization, tokenization, sentence splitting and a small
//! rule-based tagger that only distinguishes adverbs (RB) and past
//! participles (VBN), which is all negation handling needs.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const DEFAULT_ADVERBS: &str = include_str!("../data/adverbs.txt");
const DEFAULT_PARTICIPLES: &str = include_str!("../data/participles.txt");

pub const URL_TOKEN: &str = "__url__";
pub const USER_TOKEN: &str = "__at_user__";

/// Negation cues. Tokens ending in `n't` are negations as well.
pub const NEGATIONS: [&str; 13] = [
    "no", "not", "rather", "wont", "never", "none", "nobody", "nothing", "neither", "nor",
    "nowhere", "cannot", "without",
];

pub fn is_negation(token: &str) -> bool {
    NEGATIONS.contains(&token) || token.ends_with("n't")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "RB")]
    Adverb,
    #[serde(rename = "VBN")]
    PastParticiple,
    #[serde(rename = "OTHER")]
    Other,
}

impl Tag {
    /// Tags that may sit between a negation and the word it negates.
    pub fn bridges_negation(self) -> bool {
        matches!(self, Tag::Adverb | Tag::PastParticiple)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<String>,
    tags: Vec<Tag>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>, tags: Vec<Tag>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::Shape(format!(
                "{} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        if let Some(bad) = tokens.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(Error::InvalidArgument(format!("invalid token {bad:?}")));
        }
        Ok(TokenSequence { tokens, tags })
    }

    /// Tags the given tokens with the default word lists.
    pub fn tagged<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        WordLists::default().sequence(tokens.into_iter().map(Into::into).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Stop-word, adverb and participle lists.
#[derive(Debug, Clone)]
pub struct WordLists {
    stopwords: HashSet<String>,
    adverbs: HashSet<String>,
    participles: HashSet<String>,
}

fn parse_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

impl Default for WordLists {
    fn default() -> Self {
        WordLists::from_text(DEFAULT_STOPWORDS, DEFAULT_ADVERBS, DEFAULT_PARTICIPLES)
    }
}

impl WordLists {
    /// Builds lists from one-word-per-line text (`#` starts a comment line).
    /// Negation words are removed from the stop-list.
    pub fn from_text(stopwords: &str, adverbs: &str, participles: &str) -> Self {
        let mut stopwords = parse_list(stopwords);
        stopwords.retain(|w| !is_negation(w));
        WordLists {
            stopwords,
            adverbs: parse_list(adverbs),
            participles: parse_list(participles),
        }
    }

    pub fn from_files(stopwords: &Path, adverbs: &Path, participles: &Path) -> Result<Self> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::io(p, e));
        Ok(WordLists::from_text(
            &read(stopwords)?,
            &read(adverbs)?,
            &read(participles)?,
        ))
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    pub fn tag(&self, word: &str) -> Tag {
        if self.adverbs.contains(word) {
            Tag::Adverb
        } else if self.participles.contains(word) {
            Tag::PastParticiple
        } else if word.ends_with("ly") {
            Tag::Adverb
        } else if word.chars().count() > 3 && (word.ends_with("ed") || word.ends_with("en")) {
            Tag::PastParticiple
        } else {
            Tag::Other
        }
    }

    fn sequence(&self, tokens: Vec<String>) -> TokenSequence {
        let tags = pos_tag_lite(&tokens, self);
        TokenSequence { tokens, tags }
    }
}

fn is_url(token: &str) -> bool {
    token.contains("http://") || token.contains("https://") || token.starts_with("www.")
}

fn is_user(token: &str) -> bool {
    token.len() > 1 && token.starts_with('@')
}

/// Replaces every run of three or more identical characters by one.
fn collapse_runs(token: &str) -> String {
    let chars: Vec<char> = token.chars().collect();
    let mut out = String::with_capacity(token.len());
    let mut i = 0;
    while i < chars.len() {
        let mut j = i;
        while j < chars.len() && chars[j] == chars[i] {
            j += 1;
        }
        let run = if j - i >= 3 { 1 } else { j - i };
        out.extend(std::iter::repeat_n(chars[i], run));
        i = j;
    }
    out
}

fn normalize_token(token: &str) -> Option<String> {
    let t = token.to_lowercase();
    if is_url(&t) {
        return Some(URL_TOKEN.to_string());
    }
    if is_user(&t) {
        return Some(USER_TOKEN.to_string());
    }
    let t = collapse_runs(&t.replace('#', ""));
    // Stripping `#` or collapsing can expose a URL or user mention.
    if is_url(&t) {
        return Some(URL_TOKEN.to_string());
    }
    if is_user(&t) {
        return Some(USER_TOKEN.to_string());
    }
    if t.is_empty() || t.chars().any(char::is_numeric) {
        return None;
    }
    Some(t)
}

/// Lowercases, replaces URLs and user mentions with generic tokens, strips
/// hashtag marks, collapses character runs of three or more, and drops
/// tokens containing digits. Whitespace is normalized to single spaces.
pub fn preprocess(raw: &str) -> String {
    raw.split_whitespace()
        .filter_map(normalize_token)
        .collect::<Vec<_>>()
        .join(" ")
}

fn trim_token(token: &str) -> &str {
    token.trim_matches(|c: char| !(c.is_alphanumeric() || c == '_'))
}

/// Splits pre-processed text on whitespace, trims surrounding punctuation,
/// removes stop-words and tags what remains.
pub fn tokenize(text: &str, lists: &WordLists) -> TokenSequence {
    let tokens = text
        .split_whitespace()
        .map(|t| t.replace('\u{2019}', "'"))
        .filter_map(|t| {
            let t = trim_token(&t);
            (!t.is_empty() && !lists.is_stopword(t)).then(|| t.to_string())
        })
        .collect();
    lists.sequence(tokens)
}

/// Pre-processes raw text and splits it into punctuation-trimmed tokens,
/// keeping stop-words. This is the input view used by the networks.
pub fn word_tokens(raw: &str) -> Vec<String> {
    preprocess(raw)
        .split_whitespace()
        .map(|t| t.replace('\u{2019}', "'"))
        .filter_map(|t| {
            let t = trim_token(&t);
            (!t.is_empty()).then(|| t.to_string())
        })
        .collect()
}

pub fn pos_tag_lite(tokens: &[String], lists: &WordLists) -> Vec<Tag> {
    tokens.iter().map(|t| lists.tag(t)).collect()
}

/// Splits on runs of `.`, `?` or `!` followed by whitespace or end of text.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let is_end = |c: char| matches!(c, '.' | '?' | '!');
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut i = 0;
    while i < chars.len() {
        if is_end(chars[i]) {
            let mut j = i;
            while j < chars.len() && is_end(chars[j]) {
                j += 1;
            }
            if j == chars.len() || chars[j].is_whitespace() {
                push_sentence(&mut sentences, &mut current);
            } else {
                current.extend(&chars[i..j]);
            }
            i = j;
        } else {
            current.push(chars[i]);
            i += 1;
        }
    }
    push_sentence(&mut sentences, &mut current);
    sentences
}

fn push_sentence(sentences: &mut Vec<String>, current: &mut String) {
    let s = current.trim();
    if !s.is_empty() {
        sentences.push(s.to_string());
    }
    current.clear();
}
