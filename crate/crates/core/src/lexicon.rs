//! Word-level emotion lexicon (EmoLex layout), synonym expansion and
//! negation of emotion vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::ops::{Add, AddAssign, Index};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Anticipation,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
    Trust,
}

impl Emotion {
    pub const ALL: [Emotion; 8] = [
        Emotion::Anger,
        Emotion::Anticipation,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Joy,
        Emotion::Sadness,
        Emotion::Surprise,
        Emotion::Trust,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Anticipation => "anticipation",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
            Emotion::Trust => "trust",
        }
    }

    pub fn from_name(name: &str) -> Option<Emotion> {
        Emotion::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Emotions a negated occurrence of `self` is mapped to.
    pub fn negated(self) -> &'static [Emotion] {
        use Emotion::*;
        match self {
            Anger => &[Joy],
            Anticipation => &[Joy, Surprise],
            Disgust => &[Joy, Trust],
            Fear => &[Joy, Trust],
            Joy => &[Anger, Disgust, Fear, Sadness],
            Sadness => &[Fear],
            Surprise => &[Anticipation, Trust],
            Trust => &[Disgust, Surprise],
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Non-negative weights over the eight emotions, in [`Emotion::ALL`] order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EmotionVector(pub [f64; 8]);

impl EmotionVector {
    pub const ZERO: EmotionVector = EmotionVector([0.0; 8]);

    pub fn from_emotions(emotions: &[Emotion]) -> Self {
        let mut v = [0.0; 8];
        for e in emotions {
            v[e.index()] = 1.0;
        }
        EmotionVector(v)
    }

    pub fn uniform() -> Self {
        EmotionVector([0.125; 8])
    }

    pub fn as_array(&self) -> &[f64; 8] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Element-wise maximum; the logical OR for binary vectors.
    pub fn or(&self, other: &EmotionVector) -> EmotionVector {
        let mut v = self.0;
        for (a, b) in v.iter_mut().zip(other.0) {
            *a = a.max(b);
        }
        EmotionVector(v)
    }

    /// L1-normalized copy; the uniform vector when all weights are zero.
    pub fn normalized(&self) -> EmotionVector {
        let s = self.sum();
        if s > 0.0 {
            EmotionVector(self.0.map(|x| x / s))
        } else {
            EmotionVector::uniform()
        }
    }

    pub fn emotions(&self) -> impl Iterator<Item = Emotion> + '_ {
        Emotion::ALL.into_iter().filter(|e| self.0[e.index()] != 0.0)
    }

    /// Emotion with the largest weight, `None` for the zero vector.
    pub fn dominant(&self) -> Option<Emotion> {
        if self.is_zero() {
            return None;
        }
        Some(Emotion::ALL[crate::dataset::argmax(&self.0)])
    }
}

impl Index<Emotion> for EmotionVector {
    type Output = f64;

    fn index(&self, e: Emotion) -> &f64 {
        &self.0[e.index()]
    }
}

impl Add for EmotionVector {
    type Output = EmotionVector;

    fn add(mut self, rhs: EmotionVector) -> EmotionVector {
        self += rhs;
        self
    }
}

impl AddAssign for EmotionVector {
    fn add_assign(&mut self, rhs: EmotionVector) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl std::iter::Sum for EmotionVector {
    fn sum<I: Iterator<Item = EmotionVector>>(iter: I) -> Self {
        iter.fold(EmotionVector::ZERO, Add::add)
    }
}

/// Maps a binary emotion vector to the OR of the negation rows selected by
/// its nonzero emotions.
pub fn negate_emotions(ev: &EmotionVector) -> EmotionVector {
    let mut out = [0.0; 8];
    for e in ev.emotions() {
        for n in e.negated() {
            out[n.index()] = 1.0;
        }
    }
    EmotionVector(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Original,
    Synonym,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub vector: EmotionVector,
    pub origin: Origin,
}

/// Sentiment columns that EmoLex files carry next to the eight emotions.
const SENTIMENT_LABELS: [&str; 2] = ["positive", "negative"];

pub const NEGATION_PREFIXES: [&str; 10] = ["a", "de", "dis", "il", "im", "in", "ir", "mis", "non", "un"];
pub const NEGATION_SUFFIXES: [&str; 1] = ["less"];

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, Entry>,
    dropped_zero: usize,
}

impl Lexicon {
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, EmotionVector)>,
        S: AsRef<str>,
    {
        let entries = entries
            .into_iter()
            .filter(|(_, v)| !v.is_zero())
            .map(|(w, vector)| {
                (
                    w.as_ref().to_lowercase(),
                    Entry {
                        vector,
                        origin: Origin::Original,
                    },
                )
            })
            .collect();
        Lexicon {
            entries,
            dropped_zero: 0,
        }
    }

    /// Parses `word<TAB>emotion<TAB>0|1` rows. `positive`/`negative` rows
    /// are accepted and ignored; any other label is an error.
    pub fn parse_emolex(text: &str) -> Result<Self> {
        let mut rows: BTreeMap<String, [f64; 8]> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [word, label, flag] = fields[..] else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected 3 tab-separated fields, got {}", fields.len()),
                });
            };
            let flag = match flag {
                "0" => 0.0,
                "1" => 1.0,
                other => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("flag must be 0 or 1, got `{other}`"),
                    })
                }
            };
            let row = rows.entry(word.to_lowercase()).or_default();
            match Emotion::from_name(label) {
                Some(e) => row[e.index()] = row[e.index()].max(flag),
                None if SENTIMENT_LABELS.contains(&label) => {}
                None => return Err(Error::UnknownEmotion(label.to_string())),
            }
        }
        let total = rows.len();
        let lex = Lexicon::from_entries(rows.into_iter().map(|(w, v)| (w, EmotionVector(v))));
        let dropped_zero = total - lex.len();
        log::info!("loaded {} lexicon words, dropped {dropped_zero} without emotions", lex.len());
        Ok(Lexicon { dropped_zero, ..lex })
    }

    pub fn load_emolex(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Lexicon::parse_emolex(&text)
    }

    /// Writes the lexicon back in the EmoLex row layout, words sorted.
    pub fn write_emolex(&self, path: &Path) -> Result<()> {
        let mut words: Vec<&String> = self.entries.keys().collect();
        words.sort();
        let mut out = String::new();
        for w in words {
            let v = &self.entries[w].vector;
            for e in Emotion::ALL {
                out.push_str(&format!("{w}\t{}\t{}\n", e.name(), u8::from(v[e] != 0.0)));
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rows dropped at load because they carried no emotion.
    pub fn dropped_zero_rows(&self) -> usize {
        self.dropped_zero
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.entries.values().filter(|e| e.origin == origin).count()
    }

    pub fn entry(&self, word: &str) -> Option<&Entry> {
        self.entries.get(word)
    }

    pub fn lookup(&self, word: &str) -> Option<EmotionVector> {
        self.entries.get(word).map(|e| e.vector)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Emotion vector for a negated occurrence of `word`: the entry of the
    /// first negated morphological variant (`un`+word, word+`less`, ...)
    /// found in the lexicon, otherwise the negation of the word's own vector.
    pub fn negated_lookup(&self, word: &str) -> Option<EmotionVector> {
        let prefixed = NEGATION_PREFIXES.iter().map(|p| format!("{p}{word}"));
        let suffixed = NEGATION_SUFFIXES.iter().map(|s| format!("{word}{s}"));
        prefixed
            .chain(suffixed)
            .find_map(|variant| self.lookup(&variant))
            .or_else(|| self.lookup(word).map(|v| negate_emotions(&v)))
    }

    /// Adds every synonym of a lexicon word with that word's vector. Existing
    /// entries are kept as they are; a synonym reached from several words
    /// gets the OR of their vectors.
    pub fn expand_with_synonyms(&self, synonyms: &SynonymTable) -> Lexicon {
        let mut added: BTreeMap<&str, EmotionVector> = BTreeMap::new();
        for (word, syns) in &synonyms.0 {
            let Some(source) = self.lookup(word) else {
                continue;
            };
            for syn in syns {
                if self.contains(syn) {
                    continue;
                }
                let slot = added.entry(syn.as_str()).or_insert(EmotionVector::ZERO);
                *slot = slot.or(&source);
            }
        }
        let mut entries = self.entries.clone();
        for (syn, vector) in added {
            entries.insert(
                syn.to_string(),
                Entry {
                    vector,
                    origin: Origin::Synonym,
                },
            );
        }
        Lexicon {
            entries,
            dropped_zero: self.dropped_zero,
        }
    }
}

/// Word to synonym-set table, loaded from `word<TAB>synonym` rows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymTable(pub BTreeMap<String, BTreeSet<String>>);

impl SynonymTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let Some((word, syn)) = line.split_once('\t') else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected `word<TAB>synonym`".into(),
                });
            };
            let (word, syn) = (word.trim().to_lowercase(), syn.trim().to_lowercase());
            if word != syn && !syn.is_empty() {
                table.entry(word).or_default().insert(syn);
            }
        }
        Ok(SynonymTable(table))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SynonymTable::parse(&text)
    }

    pub fn insert(&mut self, word: &str, synonym: &str) {
        self.0.entry(word.to_string()).or_default().insert(synonym.to_string());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Emotion::*;

    const SAMPLE: &str = "abuse\tanger\t1\nabuse\tanticipation\t0\nabuse\tdisgust\t1\nabuse\tfear\t1\n\
abuse\tjoy\t0\nabuse\tsadness\t1\nabuse\tsurprise\t0\nabuse\ttrust\t0\nabuse\tnegative\t1\n\
shopping\tanticipation\t1\nshopping\tjoy\t1\nshopping\tsurprise\t1\nshopping\ttrust\t1\nshopping\tpositive\t1\n\
table\tanger\t0\ntable\tjoy\t0\n\
happy\tjoy\t1\nunhappy\tsadness\t1\njoyful\tjoy\t1\n";

    fn v(bits: [u8; 8]) -> EmotionVector {
        EmotionVector(bits.map(f64::from))
    }

    #[test]
    fn parses_emolex_rows() {
        let lex = Lexicon::parse_emolex(SAMPLE).unwrap();
        assert_eq!(lex.lookup("abuse"), Some(v([1, 0, 1, 1, 0, 1, 0, 0])));
        assert_eq!(lex.lookup("shopping"), Some(v([0, 1, 0, 0, 1, 0, 1, 1])));
        assert_eq!(lex.lookup("table"), None);
        assert_eq!(lex.dropped_zero_rows(), 1);
        assert_eq!(lex.len(), 5);
    }

    #[test]
    fn unknown_label_is_named() {
        match Lexicon::parse_emolex("word\tbliss\t1\n") {
            Err(Error::UnknownEmotion(l)) => assert_eq!(l, "bliss"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Lexicon::parse_emolex("word\tjoy\t2\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn negation_table_rows() {
        assert_eq!(negate_emotions(&v([0, 0, 0, 0, 1, 0, 0, 0])), v([1, 0, 1, 1, 0, 1, 0, 0]));
        assert_eq!(negate_emotions(&v([0, 0, 0, 0, 0, 1, 0, 0])), v([0, 0, 0, 1, 0, 0, 0, 0]));
        assert_eq!(negate_emotions(&EmotionVector::ZERO), EmotionVector::ZERO);
        let expected: [(Emotion, [u8; 8]); 8] = [
            (Anger, [0, 0, 0, 0, 1, 0, 0, 0]),
            (Anticipation, [0, 0, 0, 0, 1, 0, 1, 0]),
            (Disgust, [0, 0, 0, 0, 1, 0, 0, 1]),
            (Fear, [0, 0, 0, 0, 1, 0, 0, 1]),
            (Joy, [1, 0, 1, 1, 0, 1, 0, 0]),
            (Sadness, [0, 0, 0, 1, 0, 0, 0, 0]),
            (Surprise, [0, 1, 0, 0, 0, 0, 0, 1]),
            (Trust, [0, 0, 1, 0, 0, 0, 1, 0]),
        ];
        for (e, row) in expected {
            assert_eq!(negate_emotions(&EmotionVector::from_emotions(&[e])), v(row), "{e}");
        }
    }

    #[test]
    fn negation_is_or_of_rows() {
        let both = EmotionVector::from_emotions(&[Anger, Sadness]);
        assert_eq!(negate_emotions(&both), EmotionVector::from_emotions(&[Joy, Fear]));
    }

    #[test]
    fn negated_lookup_prefers_morphological_variant() {
        let lex = Lexicon::parse_emolex(SAMPLE).unwrap();
        assert_eq!(lex.negated_lookup("happy"), lex.lookup("unhappy"));
        assert_eq!(
            lex.negated_lookup("joyful"),
            Some(EmotionVector::from_emotions(&[Anger, Disgust, Fear, Sadness]))
        );
        assert_eq!(lex.negated_lookup("zebra"), None);
    }

    #[test]
    fn negated_lookup_suffix_variant() {
        let lex = Lexicon::from_entries([
            ("help", EmotionVector::from_emotions(&[Trust])),
            ("helpless", EmotionVector::from_emotions(&[Fear, Sadness])),
        ]);
        assert_eq!(lex.negated_lookup("help"), lex.lookup("helpless"));
    }

    #[test]
    fn expansion_adds_synonyms_without_overwriting() {
        let lex = Lexicon::parse_emolex(SAMPLE).unwrap();
        let mut syn = SynonymTable::default();
        syn.insert("abuse", "mistreat");
        syn.insert("shopping", "mistreat");
        syn.insert("abuse", "shopping");
        syn.insert("unknownword", "other");
        let big = lex.expand_with_synonyms(&syn);
        assert_eq!(big.len(), lex.len() + 1);
        assert_eq!(big.lookup("mistreat"), Some(v([1, 1, 1, 1, 1, 1, 1, 1])));
        assert_eq!(big.entry("mistreat").unwrap().origin, Origin::Synonym);
        assert_eq!(big.lookup("shopping"), lex.lookup("shopping"));
        assert_eq!(big.count(Origin::Original), lex.len());
        assert!(big.lookup("other").is_none());
    }

    #[test]
    fn empty_synonym_table_is_identity() {
        let lex = Lexicon::parse_emolex(SAMPLE).unwrap();
        let same = lex.expand_with_synonyms(&SynonymTable::default());
        assert_eq!(same.len(), lex.len());
        for w in lex.words() {
            assert_eq!(same.entry(w), lex.entry(w));
        }
    }

    #[test]
    fn write_and_reload() {
        let lex = Lexicon::parse_emolex(SAMPLE).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        lex.write_emolex(f.path()).unwrap();
        let back = Lexicon::load_emolex(f.path()).unwrap();
        for w in lex.words() {
            assert_eq!(back.lookup(w), lex.lookup(w));
        }
    }

    #[test]
    fn normalized_zero_is_uniform() {
        assert_eq!(EmotionVector::ZERO.normalized(), EmotionVector::uniform());
        let n = EmotionVector::from_emotions(&[Joy, Trust]).normalized();
        assert_eq!(n[Joy], 0.5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn binary() -> impl Strategy<Value = EmotionVector> {
            prop::array::uniform8(0u8..2).prop_map(v)
        }

        proptest! {
            #[test]
            fn negation_keeps_binary(ev in binary()) {
                let n = negate_emotions(&ev);
                prop_assert!(n.0.iter().all(|&x| x == 0.0 || x == 1.0));
                prop_assert_eq!(n.is_zero(), ev.is_zero());
            }

            #[test]
            fn expansion_is_superset(
                words in prop::collection::btree_map("[a-e]{1,3}", binary(), 0..10),
                pairs in prop::collection::vec(("[a-e]{1,3}", "[a-e]{1,3}"), 0..20),
            ) {
                let lex = Lexicon::from_entries(words);
                let mut syn = SynonymTable::default();
                for (a, b) in &pairs {
                    if a != b { syn.insert(a, b); }
                }
                let big = lex.expand_with_synonyms(&syn);
                for w in lex.words() {
                    prop_assert_eq!(big.entry(w), lex.entry(w));
                }
                prop_assert!(big.len() >= lex.len());
            }
        }
    }
}
