//! Sentence- and post-level emotion mining over the lexicon, with negation
//! rules and a fallback classifier for sentences without lexicon hits.
//!
//! Negation rules, checked at every negation cue:
//! 1. the next token is a lexicon word;
//! 2. one to [`MAX_NEGATION_GAP`] adverb/participle tokens, then a lexicon word.
//!
//! The negated word contributes [`Lexicon::negated_lookup`] instead of its
//! plain vector. A cue negates at most one word.

use serde::{Deserialize, Serialize};

use crate::dataset::Post;
use crate::fallback::FallbackClassifier;
use crate::lexicon::{EmotionVector, Lexicon};
use crate::textprep::{self, is_negation, TokenSequence, WordLists};

pub const MAX_NEGATION_GAP: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    pub token: String,
    pub emotions: EmotionVector,
    pub negated: bool,
}

/// Per-token annotation; tokens without a lexicon hit get the zero vector.
pub fn highlight(ts: &TokenSequence, lex: &Lexicon) -> Vec<Highlight> {
    let tokens = ts.tokens();
    let tags = ts.tags();
    let mut out: Vec<Highlight> = tokens
        .iter()
        .map(|t| Highlight {
            token: t.clone(),
            emotions: EmotionVector::ZERO,
            negated: false,
        })
        .collect();
    let mut i = 0;
    while i < tokens.len() {
        if is_negation(&tokens[i]) {
            if let Some(target) = negation_target(tokens, tags, i, lex) {
                // a cue word that fires contributes nothing itself
                if let Some(v) = lex.negated_lookup(&tokens[target]) {
                    out[target].emotions = v;
                    out[target].negated = true;
                }
                i = target + 1;
                continue;
            }
        }
        if let Some(v) = lex.lookup(&tokens[i]) {
            out[i].emotions = v;
        }
        i += 1;
    }
    out
}

fn negation_target(tokens: &[String], tags: &[textprep::Tag], cue: usize, lex: &Lexicon) -> Option<usize> {
    let mut j = cue + 1;
    while j < tokens.len() {
        if lex.contains(&tokens[j]) {
            return Some(j);
        }
        if j - cue > MAX_NEGATION_GAP || !tags[j].bridges_negation() {
            return None;
        }
        j += 1;
    }
    None
}

/// Raw (unnormalized) sentence vector and the fraction of tokens that
/// matched the lexicon.
pub fn sentence_emotions(ts: &TokenSequence, lex: &Lexicon) -> (EmotionVector, f64) {
    let marks = highlight(ts, lex);
    if marks.is_empty() {
        return (EmotionVector::ZERO, 0.0);
    }
    let matched = marks.iter().filter(|h| !h.emotions.is_zero()).count();
    let sum = marks.into_iter().map(|h| h.emotions).sum();
    (sum, matched as f64 / ts.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinerOptions {
    /// Mine the post message as well as its comments.
    pub include_message: bool,
}

impl Default for MinerOptions {
    fn default() -> Self {
        MinerOptions { include_message: true }
    }
}

/// Everything the miner needs besides the text.
#[derive(Debug, Clone, Copy)]
pub struct EmotionMiner<'a> {
    pub lexicon: &'a Lexicon,
    pub lists: &'a WordLists,
    pub fallback: Option<&'a FallbackClassifier>,
    pub options: MinerOptions,
}

impl<'a> EmotionMiner<'a> {
    pub fn new(lexicon: &'a Lexicon, lists: &'a WordLists) -> Self {
        EmotionMiner {
            lexicon,
            lists,
            fallback: None,
            options: MinerOptions::default(),
        }
    }

    pub fn with_fallback(mut self, fallback: &'a FallbackClassifier) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn with_options(mut self, options: MinerOptions) -> Self {
        self.options = options;
        self
    }

    /// Token sequences of every non-empty sentence in `text`.
    pub fn sentences(&self, text: &str) -> Vec<TokenSequence> {
        sentences(text, self.lists)
    }

    /// Sentence vector, routed to the fallback classifier when no token
    /// matched the lexicon.
    pub fn sentence_vector(&self, ts: &TokenSequence) -> EmotionVector {
        let (v, coverage) = sentence_emotions(ts, self.lexicon);
        match self.fallback {
            Some(fb) if coverage == 0.0 => fb.predict_emotions(ts),
            _ => v,
        }
    }

    /// Summed and L1-normalized emotion vector of the text and comments;
    /// the uniform vector when nothing was found.
    pub fn text_emotions<S: AsRef<str>>(&self, message: &str, comments: &[S]) -> EmotionVector {
        let message = self.options.include_message.then_some(message);
        message
            .into_iter()
            .chain(comments.iter().map(AsRef::as_ref))
            .flat_map(|text| self.sentences(text))
            .map(|ts| self.sentence_vector(&ts))
            .sum::<EmotionVector>()
            .normalized()
    }

    pub fn post_emotions(&self, post: &Post) -> EmotionVector {
        self.text_emotions(&post.message, &post.comments)
    }
}

pub fn sentences(text: &str, lists: &WordLists) -> Vec<TokenSequence> {
    textprep::split_sentences(&textprep::preprocess(text))
        .iter()
        .map(|s| textprep::tokenize(s, lists))
        .filter(|ts| !ts.is_empty())
        .collect()
}

/// Lexicon-annotated training data for the fallback classifier: every
/// sentence with at least one lexicon hit, labelled with its binarized
/// sentence vector.
pub fn annotate_sentences<'s>(
    sentences: impl IntoIterator<Item = &'s TokenSequence>,
    lex: &Lexicon,
) -> (Vec<TokenSequence>, Vec<crate::fallback::EmotionLabels>) {
    sentences
        .into_iter()
        .filter_map(|ts| {
            let (v, coverage) = sentence_emotions(ts, lex);
            (coverage > 0.0).then(|| (ts.clone(), crate::fallback::labels_of(&v)))
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fallback::SvmConfig;
    use crate::lexicon::Emotion::{self, *};

    fn lex() -> Lexicon {
        Lexicon::from_entries([
            ("happy", EmotionVector::from_emotions(&[Joy])),
            ("love", EmotionVector::from_emotions(&[Joy, Trust])),
            ("abuse", EmotionVector::from_emotions(&[Anger, Disgust, Fear, Sadness])),
            ("sad", EmotionVector::from_emotions(&[Sadness])),
            ("excited", EmotionVector::from_emotions(&[Anticipation, Joy, Surprise])),
        ])
    }

    fn seq(words: &[&str]) -> TokenSequence {
        TokenSequence::tagged(words.iter().copied())
    }

    fn joy_negated() -> EmotionVector {
        EmotionVector::from_emotions(&[Anger, Disgust, Fear, Sadness])
    }

    #[test]
    fn rule_two_through_adverb() {
        let (v, cov) = sentence_emotions(&seq(&["not", "very", "happy"]), &lex());
        assert_eq!(v, joy_negated());
        assert!((cov - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rule_one_direct() {
        let (v, _) = sentence_emotions(&seq(&["not", "happy"]), &lex());
        assert_eq!(v, joy_negated());
        let (v, _) = sentence_emotions(&seq(&["don't", "love"]), &lex());
        assert_eq!(v, EmotionVector::from_emotions(&[Anger, Disgust, Fear, Sadness, Surprise]));
    }

    #[test]
    fn rule_one_wins_over_rule_two_for_tagged_emotion_word() {
        // "excited" is tagged VBN but is itself the emotion word
        let (v, _) = sentence_emotions(&seq(&["never", "excited", "happy"]), &lex());
        let expected = crate::lexicon::negate_emotions(&EmotionVector::from_emotions(&[Anticipation, Joy, Surprise]))
            + EmotionVector::from_emotions(&[Joy]);
        assert_eq!(v, expected);
    }

    #[test]
    fn negation_consumes_one_word() {
        let (v, _) = sentence_emotions(&seq(&["not", "happy", "happy"]), &lex());
        assert_eq!(v, joy_negated() + EmotionVector::from_emotions(&[Joy]));
    }

    #[test]
    fn gap_is_bounded() {
        let (v, _) = sentence_emotions(&seq(&["not", "very", "really", "quite", "happy"]), &lex());
        assert_eq!(v, joy_negated());
        let (v, _) = sentence_emotions(&seq(&["not", "very", "really", "quite", "truly", "happy"]), &lex());
        assert_eq!(v, EmotionVector::from_emotions(&[Joy]));
    }

    #[test]
    fn non_bridging_token_blocks_negation() {
        let (v, _) = sentence_emotions(&seq(&["not", "car", "happy"]), &lex());
        assert_eq!(v, EmotionVector::from_emotions(&[Joy]));
    }

    #[test]
    fn single_hit_and_no_hit() {
        let (v, cov) = sentence_emotions(&seq(&["love"]), &lex());
        assert_eq!(v, lex().lookup("love").unwrap());
        assert_eq!(cov, 1.0);
        let (v, cov) = sentence_emotions(&seq(&["car", "park"]), &lex());
        assert_eq!((v, cov), (EmotionVector::ZERO, 0.0));
        assert_eq!(sentence_emotions(&TokenSequence::default(), &lex()), (EmotionVector::ZERO, 0.0));
    }

    #[test]
    fn highlights_mark_negation() {
        let h = highlight(&seq(&["not", "very", "happy"]), &lex());
        assert!(!h[0].negated && !h[1].negated);
        assert!(h[2].negated);
        assert_eq!(h[2].emotions, joy_negated());
        let h = highlight(&seq(&["abuse"]), &lex());
        assert_eq!(h[0].emotions, EmotionVector::from_emotions(&[Anger, Disgust, Fear, Sadness]));
        assert!(highlight(&seq(&["car"]), &lex()).iter().all(|h| h.emotions.is_zero()));
    }

    #[test]
    fn post_vector_from_single_comment() {
        let lists = WordLists::default();
        let l = lex();
        let miner = EmotionMiner::new(&l, &lists);
        let v = miner.text_emotions("", &["i love this"]);
        assert_eq!(v, EmotionVector([0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.5]));
        let twice = miner.text_emotions("", &["i love this", "i love this"]);
        assert_eq!(v, twice);
    }

    #[test]
    fn comments_only_option() {
        let lists = WordLists::default();
        let l = lex();
        let miner = EmotionMiner::new(&l, &lists).with_options(MinerOptions { include_message: false });
        let v = miner.text_emotions("so sad", &["love it"]);
        assert_eq!(v, EmotionVector([0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.5]));
        let both = EmotionMiner::new(&l, &lists).text_emotions("so sad", &["love it"]);
        assert!((both[Emotion::Sadness] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_post_is_uniform() {
        let lists = WordLists::default();
        let l = lex();
        let v = EmotionMiner::new(&l, &lists).text_emotions("the car", &[] as &[&str]);
        assert_eq!(v, EmotionVector::uniform());
    }

    #[test]
    fn uncovered_sentences_use_fallback() {
        let lists = WordLists::default();
        let l = lex();
        let train = [seq(&["love", "store"]), seq(&["abuse", "store"]), seq(&["love", "staff"]), seq(&["abuse", "staff"])];
        let (sents, labels) = annotate_sentences(&train, &l);
        assert_eq!(sents.len(), 4);
        let fb = FallbackClassifier::train(&sents, &labels, &SvmConfig::default()).unwrap();
        let miner = EmotionMiner::new(&l, &lists).with_fallback(&fb);
        let v = miner.text_emotions("store staff", &["staff store"]);
        assert!((v.sum() - 1.0).abs() < 1e-12);
        assert_eq!(miner.sentence_vector(&seq(&["store"])), fb.predict_emotions(&seq(&["store"])));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn words() -> impl Strategy<Value = Vec<String>> {
            prop::collection::vec(
                prop::sample::select(vec![
                    "not", "never", "don't", "very", "really", "broken", "happy", "love", "abuse", "sad",
                    "excited", "car", "store", "quickly",
                ]),
                0..12,
            )
            .prop_map(|w| w.into_iter().map(String::from).collect())
        }

        proptest! {
            #[test]
            fn sentence_sum_equals_highlights(w in words()) {
                let ts = TokenSequence::tagged(w);
                let l = lex();
                let total: EmotionVector = highlight(&ts, &l).into_iter().map(|h| h.emotions).sum();
                prop_assert_eq!(sentence_emotions(&ts, &l).0, total);
            }

            #[test]
            fn post_vector_on_simplex(msg in words(), c in words()) {
                let lists = WordLists::default();
                let l = lex();
                let v = EmotionMiner::new(&l, &lists).text_emotions(&msg.join(" "), &[c.join(" ")]);
                prop_assert!((v.sum() - 1.0).abs() < 1e-6);
                prop_assert!(v.0.iter().all(|&x| x >= 0.0));
            }
        }
    }
}
