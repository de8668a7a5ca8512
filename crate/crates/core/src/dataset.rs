//! Post corpus ingestion, reaction distributions, threshold filtering,
//! corpus statistics and reproducible splits.
//!
//! The canonical on-disk format is JSON-lines, one post per line:
//!
//! ```text
//! {"id": "p1", "message": "...", "comments": ["...", "..."],
//!  "reactions": {"like": 3, "love": 0, "wow": 1, "haha": 0, "sad": 0, "angry": 0}}
//! ```
//!
//! Absent reaction keys count as zero and unknown fields are ignored. A CSV
//! layout is accepted as well (see [`load_corpus`]).

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep;

/// The six reaction types, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reaction {
    Like,
    Love,
    Wow,
    Haha,
    Sad,
    Angry,
}

impl Reaction {
    pub const ALL: [Reaction; 6] = [
        Reaction::Like,
        Reaction::Love,
        Reaction::Wow,
        Reaction::Haha,
        Reaction::Sad,
        Reaction::Angry,
    ];

    /// The five reactions the models predict.
    pub const NON_LIKE: [Reaction; 5] = [
        Reaction::Love,
        Reaction::Wow,
        Reaction::Haha,
        Reaction::Sad,
        Reaction::Angry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Reaction::Like => "like",
            Reaction::Love => "love",
            Reaction::Wow => "wow",
            Reaction::Haha => "haha",
            Reaction::Sad => "sad",
            Reaction::Angry => "angry",
        }
    }

    pub fn from_name(name: &str) -> Option<Reaction> {
        Reaction::ALL.into_iter().find(|r| r.name() == name)
    }

    /// Reactions covered by a distribution with or without likes.
    pub fn set(include_like: bool) -> &'static [Reaction] {
        if include_like {
            &Reaction::ALL
        } else {
            &Reaction::NON_LIKE
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw reaction counts for one post.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactionCounts([u64; 6]);

impl ReactionCounts {
    pub fn new(counts: [u64; 6]) -> Self {
        ReactionCounts(counts)
    }

    pub fn get(&self, r: Reaction) -> u64 {
        self.0[r.index()]
    }

    pub fn set(&mut self, r: Reaction, count: u64) {
        self.0[r.index()] = count;
    }

    pub fn with(mut self, r: Reaction, count: u64) -> Self {
        self.set(r, count);
        self
    }

    pub fn total(&self, count_likes: bool) -> u64 {
        Reaction::set(count_likes).iter().map(|&r| self.get(r)).sum()
    }

    /// Number of reaction types with a nonzero count.
    pub fn kinds(&self, count_likes: bool) -> usize {
        Reaction::set(count_likes)
            .iter()
            .filter(|&&r| self.get(r) > 0)
            .count()
    }

    pub fn as_array(&self) -> [u64; 6] {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub message: String,
    #[serde(default)]
    pub comments: Vec<String>,
    pub reactions: ReactionCounts,
}

impl Post {
    pub fn new(id: impl Into<String>, message: impl Into<String>) -> Self {
        Post {
            id: id.into(),
            message: message.into(),
            comments: Vec::new(),
            reactions: ReactionCounts::default(),
        }
    }

    pub fn with_comments<I, S>(mut self, comments: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.comments = comments.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_reactions(mut self, reactions: ReactionCounts) -> Self {
        self.reactions = reactions;
        self
    }
}

/// A point on the probability simplex over the predicted reactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionDistribution {
    weights: Vec<f64>,
    include_like: bool,
}

impl ReactionDistribution {
    /// Wraps weights in canonical order, checking they form a distribution.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let include_like = match weights.len() {
            5 => false,
            6 => true,
            n => return Err(Error::Shape(format!("expected 5 or 6 reaction weights, got {n}"))),
        };
        check_simplex(&weights, 1e-6)?;
        Ok(ReactionDistribution {
            weights,
            include_like,
        })
    }

    pub fn uniform(include_like: bool) -> Self {
        let k = Reaction::set(include_like).len();
        ReactionDistribution {
            weights: vec![1.0 / k as f64; k],
            include_like,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn includes_like(&self) -> bool {
        self.include_like
    }

    pub fn reactions(&self) -> &'static [Reaction] {
        Reaction::set(self.include_like)
    }

    pub fn get(&self, r: Reaction) -> Option<f64> {
        self.reactions()
            .iter()
            .position(|&x| x == r)
            .map(|i| self.weights[i])
    }

    /// Index of the largest weight; ties go to the earlier reaction.
    pub fn argmax(&self) -> usize {
        argmax(&self.weights)
    }
}

/// Index of the maximum, first one wins on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_simplex(weights: &[f64], tol: f64) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
    if !sum.is_finite() || (sum - 1.0).abs() > tol || min < -tol {
        return Err(Error::OffSimplex { sum, min });
    }
    Ok(())
}

/// Normalizes a post's counts over the included reactions.
pub fn reaction_distribution(post: &Post, include_like: bool) -> Result<ReactionDistribution> {
    let set = Reaction::set(include_like);
    let total = post.reactions.total(include_like);
    if total == 0 {
        return Err(Error::DegenerateDistribution);
    }
    let weights = set
        .iter()
        .map(|&r| post.reactions.get(r) as f64 / total as f64)
        .collect();
    Ok(ReactionDistribution {
        weights,
        include_like,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub filters: Vec<String>,
    /// Posts dropped at ingestion because their message was empty after
    /// pre-processing.
    pub dropped_empty: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub posts: Vec<Post>,
    pub provenance: Provenance,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids.
    pub fn new(posts: Vec<Post>, provenance: Provenance) -> Result<Self> {
        let mut seen = HashSet::with_capacity(posts.len());
        for (i, p) in posts.iter().enumerate() {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate post id `{}`", p.id),
                });
            }
        }
        Ok(Corpus { posts, provenance })
    }

    pub fn from_posts(posts: Vec<Post>) -> Result<Self> {
        Corpus::new(posts, Provenance::default())
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Post> {
        self.posts.iter()
    }

    fn derived(&self, posts: Vec<Post>, filter: String) -> Corpus {
        let mut provenance = self.provenance.clone();
        provenance.filters.push(filter);
        Corpus { posts, provenance }
    }

    /// Writes the corpus as JSON-lines.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for p in &self.posts {
            out.push_str(&serde_json::to_string(&JsonPost::from(p))?);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    JsonLines,
    Csv,
}

impl CorpusFormat {
    /// Guesses the format from the file extension, defaulting to JSON-lines.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::JsonLines,
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum PostId {
    Text(String),
    Number(i64),
}

#[derive(Debug, Deserialize, Serialize)]
struct JsonPost {
    id: PostId,
    #[serde(default)]
    message: Option<String>,
    #[serde(default)]
    comments: Vec<String>,
    #[serde(default)]
    reactions: std::collections::BTreeMap<String, u64>,
}

impl From<&Post> for JsonPost {
    fn from(p: &Post) -> Self {
        JsonPost {
            id: PostId::Text(p.id.clone()),
            message: Some(p.message.clone()),
            comments: p.comments.clone(),
            reactions: Reaction::ALL
                .iter()
                .map(|&r| (r.name().to_string(), p.reactions.get(r)))
                .collect(),
        }
    }
}

impl JsonPost {
    fn into_post(self) -> std::result::Result<Post, String> {
        let mut counts = ReactionCounts::default();
        for (key, count) in self.reactions {
            // Unknown reaction keys are ignored like any other unknown field.
            if let Some(r) = Reaction::from_name(&key.to_ascii_lowercase()) {
                counts.set(r, count);
            }
        }
        let id = match self.id {
            PostId::Text(s) => s,
            PostId::Number(n) => n.to_string(),
        };
        Ok(Post {
            id,
            message: self.message.unwrap_or_default(),
            comments: self.comments,
            reactions: counts,
        })
    }
}

/// Loads a corpus file.
///
/// CSV files need a header row. Recognized columns (case-insensitive):
/// `id`/`post_id`, `message`/`text`/`status_message`, `comments` (a JSON
/// array of strings, or empty) and one column per reaction, named either
/// `love` or `num_loves`/`loves`. Other columns are ignored.
///
/// Posts whose message is empty after pre-processing are dropped and counted
/// in [`Provenance::dropped_empty`].
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let posts = match format {
        CorpusFormat::JsonLines => parse_jsonl(&text)?,
        CorpusFormat::Csv => parse_csv(&text)?,
    };
    let before = posts.len();
    let posts: Vec<Post> = posts
        .into_iter()
        .filter(|p| !textprep::preprocess(&p.message).is_empty())
        .collect();
    let dropped_empty = before - posts.len();
    if dropped_empty > 0 {
        log::info!("dropped {dropped_empty} posts with empty message after pre-processing");
    }
    Corpus::new(
        posts,
        Provenance {
            source: path.display().to_string(),
            filters: Vec::new(),
            dropped_empty,
        },
    )
}

fn parse_jsonl(text: &str) -> Result<Vec<Post>> {
    let mut posts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonPost = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        posts.push(record.into_post().map_err(|message| Error::Parse {
            line: i + 1,
            message,
        })?);
    }
    Ok(posts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CsvColumn {
    Id,
    Message,
    Comments,
    Reaction(Reaction),
}

fn csv_column(header: &str) -> Option<CsvColumn> {
    let h = header.trim().to_ascii_lowercase();
    match h.as_str() {
        "id" | "post_id" | "status_id" => return Some(CsvColumn::Id),
        "message" | "text" | "status_message" | "post" => return Some(CsvColumn::Message),
        "comments" => return Some(CsvColumn::Comments),
        _ => {}
    }
    let stem = h.strip_prefix("num_").unwrap_or(&h);
    let stem = stem.strip_suffix('s').filter(|s| Reaction::from_name(s).is_some()).unwrap_or(stem);
    Reaction::from_name(stem).map(CsvColumn::Reaction)
}

fn parse_csv(text: &str) -> Result<Vec<Post>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let columns: Vec<Option<CsvColumn>> = reader.headers()?.iter().map(csv_column).collect();
    if !columns.contains(&Some(CsvColumn::Id)) {
        return Err(Error::Parse {
            line: 1,
            message: "CSV header has no id column".into(),
        });
    }
    let mut posts = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut post = Post::new(String::new(), String::new());
        for (field, column) in record.iter().zip(&columns) {
            match column {
                Some(CsvColumn::Id) => post.id = field.to_string(),
                Some(CsvColumn::Message) => post.message = field.to_string(),
                Some(CsvColumn::Comments) if !field.trim().is_empty() => {
                    post.comments = serde_json::from_str(field).map_err(|e| Error::Parse {
                        line,
                        message: format!("comments column: {e}"),
                    })?;
                }
                Some(CsvColumn::Reaction(r)) => {
                    let v = field.trim();
                    let count = if v.is_empty() {
                        0
                    } else {
                        v.parse::<u64>().map_err(|e| Error::Parse {
                            line,
                            message: format!("{} count `{v}`: {e}", r.name()),
                        })?
                    };
                    post.reactions.set(*r, count);
                }
                _ => {}
            }
        }
        posts.push(post);
    }
    Ok(posts)
}

/// Keeps posts with at least `min_reactions` reactions, counting likes only
/// when `count_likes` is set.
pub fn filter_by_threshold(corpus: &Corpus, min_reactions: u64, count_likes: bool) -> Corpus {
    let posts = corpus
        .posts
        .iter()
        .filter(|p| p.reactions.total(count_likes) >= min_reactions)
        .cloned()
        .collect();
    let which = if count_likes { "any" } else { "non-like" };
    corpus.derived(posts, format!(">= {min_reactions} {which} reactions"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: u64,
    pub with_likes: usize,
    pub without_likes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDistribution {
    pub threshold: u64,
    pub posts: usize,
    /// Aggregate share of each non-like reaction (love, wow, haha, sad,
    /// angry) among posts meeting the non-like threshold. `None` when no
    /// post survives.
    pub shares: Option<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Posts with at least two reaction types.
    pub posts: usize,
    /// Pooled share of reaction mass held by each post's dominant type.
    /// `None` when no post has two or more types.
    pub dominant_share: Option<f64>,
    /// Mean of the per-post dominant share.
    pub mean_dominant_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub posts: usize,
    pub thresholds: Vec<ThresholdRow>,
    /// Agreement over all six reactions.
    pub agreement: Agreement,
    /// Agreement over the five non-like reactions.
    pub agreement_non_like: Agreement,
    pub distributions: Vec<ThresholdDistribution>,
}

pub const STATS_MAX_THRESHOLD: u64 = 10;

fn agreement(corpus: &Corpus, count_likes: bool) -> Agreement {
    let mut posts = 0;
    let mut dominant = 0u64;
    let mut total = 0u64;
    let mut share_sum = 0.0;
    for p in &corpus.posts {
        if p.reactions.kinds(count_likes) < 2 {
            continue;
        }
        let t = p.reactions.total(count_likes);
        let m = Reaction::set(count_likes)
            .iter()
            .map(|&r| p.reactions.get(r))
            .max()
            .unwrap_or(0);
        posts += 1;
        dominant += m;
        total += t;
        share_sum += m as f64 / t as f64;
    }
    Agreement {
        posts,
        dominant_share: (posts > 0).then(|| dominant as f64 / total as f64),
        mean_dominant_share: (posts > 0).then(|| share_sum / posts as f64),
    }
}

/// Threshold survival curve, dominant-type agreement among multi-type posts
/// and per-threshold aggregate reaction shares.
pub fn corpus_stats(corpus: &Corpus) -> StatsReport {
    let thresholds = (1..=STATS_MAX_THRESHOLD)
        .map(|t| ThresholdRow {
            threshold: t,
            with_likes: corpus.iter().filter(|p| p.reactions.total(true) >= t).count(),
            without_likes: corpus.iter().filter(|p| p.reactions.total(false) >= t).count(),
        })
        .collect();
    let distributions = (1..=STATS_MAX_THRESHOLD)
        .map(|t| {
            let mut sums = [0u64; 5];
            let mut posts = 0;
            for p in corpus.iter().filter(|p| p.reactions.total(false) >= t) {
                posts += 1;
                for (s, &r) in sums.iter_mut().zip(Reaction::NON_LIKE.iter()) {
                    *s += p.reactions.get(r);
                }
            }
            let total: u64 = sums.iter().sum();
            let shares = (total > 0).then(|| sums.map(|s| s as f64 / total as f64));
            ThresholdDistribution {
                threshold: t,
                posts,
                shares,
            }
        })
        .collect();
    StatsReport {
        posts: corpus.len(),
        thresholds,
        agreement: agreement(corpus, true),
        agreement_non_like: agreement(corpus, false),
        distributions,
    }
}

impl StatsReport {
    /// One row per threshold: survival counts followed by non-like shares.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,with_likes,without_likes,love,wow,haha,sad,angry\n");
        for (row, dist) in self.thresholds.iter().zip(&self.distributions) {
            out.push_str(&format!("{},{},{}", row.threshold, row.with_likes, row.without_likes));
            match dist.shares {
                Some(s) => s.iter().for_each(|v| out.push_str(&format!(",{v:.6}"))),
                None => out.push_str(",,,,,"),
            }
            out.push('\n');
        }
        out
    }
}

/// Seeded three-way partition. Sizes are `round(fraction * n)` for train and
/// validation, the remainder goes to test. Each part keeps corpus order.
pub fn split(corpus: &Corpus, fractions: (f64, f64, f64), seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::InvalidFractions(format!(
            "fractions must be non-negative, got ({ft}, {fv}, {fs})"
        )));
    }
    let sum = ft + fv + fs;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidFractions(format!("fractions must sum to 1, got {sum}")));
    }
    let n = corpus.len();
    if ft > 0.0 && fv > 0.0 && fs > 0.0 && n < 3 {
        return Err(Error::CorpusTooSmall { size: n });
    }
    let n_train = ((ft * n as f64).round() as usize).min(n);
    let n_val = ((fv * n as f64).round() as usize).min(n - n_train);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let part = |idx: &[usize], name: &str| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        corpus.derived(
            idx.into_iter().map(|i| corpus.posts[i].clone()).collect(),
            format!("split {name} (seed {seed})"),
        )
    };
    Ok((
        part(&order[..n_train], "train"),
        part(&order[n_train..n_train + n_val], "val"),
        part(&order[n_train + n_val..], "test"),
    ))
}
