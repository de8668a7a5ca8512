//! A generated stand-in for a reaction-annotated post corpus with matching
//! word vectors. Each post has a dominant reaction; its message mixes cue
//! words for that reaction (embedded near a per-reaction centre) with
//! neutral filler, and its counts are sampled around a skewed distribution.
//! Likes outnumber every other reaction, as on real pages.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reactmine::dataset::{Corpus, Post, ReactionCounts};
use reactmine::models::EmbeddingTable;

pub const CUES: [&[&str]; 5] = [
    // love
    &[
        "adore", "lovely", "wonderful", "beautiful", "sweet", "congratulations", "proud", "gorgeous", "delight",
        "blessed", "cute", "wedding",
    ],
    // wow
    &[
        "amazing", "incredible", "unbelievable", "astonishing", "discovery", "surprise", "huge", "record", "rare",
        "massive", "spectacular", "mystery",
    ],
    // haha
    &[
        "funny", "joke", "hilarious", "laugh", "silly", "prank", "comedy", "giggle", "clown", "goofy", "meme",
        "ridiculous",
    ],
    // sad
    &[
        "tragic", "death", "loss", "grief", "mourn", "funeral", "sorrow", "victims", "passed", "heartbreaking",
        "cancer", "lonely",
    ],
    // angry
    &[
        "outrage", "corrupt", "abuse", "scandal", "unfair", "fraud", "disgrace", "lies", "injustice", "furious",
        "cruel", "theft",
    ],
];

pub const NEUTRAL: &[&str] = &[
    "the", "today", "news", "people", "city", "report", "week", "new", "story", "just", "about", "more", "here",
    "after", "says", "this", "year", "world", "time", "video", "local", "school", "team", "police", "government",
    "day", "photo", "state", "house", "family", "first", "last", "clip", "check", "watch", "read", "share", "our",
    "your", "with", "from", "that", "what", "when", "where", "there", "county", "street", "morning", "night",
];

pub struct Synthetic {
    pub corpus: Corpus,
    pub embeddings: EmbeddingTable,
    /// Dominant reaction index (non-like order) per post.
    pub dominant: Vec<usize>,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub fn embeddings(dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..5).map(|_| (0..dim).map(|_| gaussian(&mut rng) * 0.5).collect()).collect();
    let mut table = EmbeddingTable::new(dim).unwrap();
    for (k, words) in CUES.iter().enumerate() {
        for w in words.iter() {
            let v = centres[k].iter().map(|c| c + 0.25 * gaussian(&mut rng)).collect();
            table.insert(*w, v).unwrap();
        }
    }
    for w in NEUTRAL {
        table.insert(*w, (0..dim).map(|_| 0.4 * gaussian(&mut rng)).collect()).unwrap();
    }
    table
}

fn sample_counts(rng: &mut ChaCha8Rng, weights: &[f64; 5], total: u64) -> [u64; 5] {
    let mut counts = [0u64; 5];
    for _ in 0..total {
        let mut u: f64 = rng.random();
        let mut k = 4;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                k = i;
                break;
            }
            u -= w;
        }
        counts[k] += 1;
    }
    counts
}

fn sentence(rng: &mut ChaCha8Rng, class: usize, len: usize) -> String {
    (0..len)
        .map(|_| {
            let u: f64 = rng.random();
            if u < 0.3 {
                CUES[class][rng.random_range(0..CUES[class].len())]
            } else if u < 0.36 {
                let other = rng.random_range(0..5);
                CUES[other][rng.random_range(0..CUES[other].len())]
            } else {
                NEUTRAL[rng.random_range(0..NEUTRAL.len())]
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn generate(posts: usize, dim: usize, seed: u64) -> Synthetic {
    let embeddings = embeddings(dim, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut out = Vec::with_capacity(posts);
    let mut dominant = Vec::with_capacity(posts);
    for i in 0..posts {
        let class = rng.random_range(0..5);
        let len = rng.random_range(6..20);
        let message = format!("{}.", sentence(&mut rng, class, len));
        let comments: Vec<String> = (0..rng.random_range(0..3))
            .map(|_| {
                let n = rng.random_range(3..8);
                sentence(&mut rng, class, n)
            })
            .collect();
        let peak = rng.random_range(0.5..0.9);
        let mut weights = [(1.0 - peak) / 4.0; 5];
        weights[class] = peak;
        let total = rng.random_range(5..60);
        let counts = sample_counts(&mut rng, &weights, total);
        let likes = total * rng.random_range(3..10);
        let reactions = ReactionCounts::new([likes, counts[0], counts[1], counts[2], counts[3], counts[4]]);
        out.push(
            Post::new(format!("synthetic_{i}"), message)
                .with_comments(comments)
                .with_reactions(reactions),
        );
        dominant.push(class);
    }
    Synthetic {
        corpus: Corpus::from_posts(out).unwrap(),
        embeddings,
        dominant,
    }
}
