mod common;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use reactmine::dataset::split;
use reactmine::ensemble::FeatureSet;
use reactmine::lexicon::{Emotion, EmotionVector, Lexicon};
use reactmine::models::{Architecture, CnnConfig, EmbeddingTable, LstmConfig, TrainedModel};
use reactmine::pipeline::{
    compare_models, ensemble_data, fit_ensemble, Manifest, Predictor, ENSEMBLE_FILE, LEXICON_FILE,
};
use reactmine::textprep::WordLists;
use reactmine::Error;

fn write_glove(table: &EmbeddingTable, words: &[&str], path: &Path) {
    let mut out = String::new();
    for w in words {
        if let Some(v) = table.get(w) {
            let vals: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            writeln!(out, "{w} {}", vals.join(" ")).unwrap();
        }
    }
    fs::write(path, out).unwrap();
}

fn small_predictor(dim: usize) -> Predictor {
    let s = common::generate(40, dim, 3);
    let cnn = Architecture::Cnn(CnnConfig {
        embedding_dim: dim,
        filters: 3,
        max_len: 16,
        ..CnnConfig::default()
    });
    let rnn = Architecture::Lstm(LstmConfig {
        embedding_dim: dim,
        hidden: 4,
        max_len: 16,
        ..LstmConfig::default()
    });
    Predictor {
        lexicon: Lexicon::from_entries([
            ("happy", EmotionVector::from_emotions(&[Emotion::Joy])),
            ("abuse", EmotionVector::from_emotions(&[Emotion::Anger, Emotion::Disgust])),
        ]),
        lists: WordLists::default(),
        fallback: None,
        embeddings: s.embeddings,
        cnn: TrainedModel::new(cnn.clone(), cnn.init_params(1).unwrap()).unwrap(),
        rnn: TrainedModel::new(rnn.clone(), rnn.init_params(2).unwrap()).unwrap(),
        ensemble: None,
        miner_options: Default::default(),
    }
}

#[test]
fn artifact_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = small_predictor(6);
    let s = common::generate(30, 6, 3);
    let (comps, targets) = ensemble_data(&p, &s.corpus).unwrap();
    p.ensemble = Some(fit_ensemble(&comps, &targets, FeatureSet::default()).unwrap());

    let words: Vec<&str> = common::CUES.iter().flat_map(|c| c.iter().copied()).chain(common::NEUTRAL.iter().copied()).collect();
    let glove = dir.path().join("vectors.txt");
    write_glove(&p.embeddings, &words, &glove);
    p.lexicon.write_emolex(&dir.path().join(LEXICON_FILE)).unwrap();
    p.cnn.save(dir.path(), "cnn").unwrap();
    p.rnn.save(dir.path(), "rnn").unwrap();
    p.ensemble.as_ref().unwrap().save(&dir.path().join(ENSEMBLE_FILE)).unwrap();
    Manifest::new(glove, 6).save(dir.path()).unwrap();

    let loaded = Predictor::load(dir.path()).unwrap();
    let text = "Such a tragic loss today, not happy at all";
    let comments = ["what abuse", "so sad"];
    assert_eq!(loaded.predict(text, &comments).unwrap(), p.predict(text, &comments).unwrap());
}

#[test]
fn missing_regression_falls_back_to_averaged_networks() {
    let p = small_predictor(6);
    let pred = p.predict("a lovely wedding", &[] as &[&str]).unwrap();
    assert_eq!(pred.reactions, pred.components.averaged);
    assert!(pred.reactions.like.is_none());
}

#[test]
fn highlights_mark_negated_tokens() {
    let p = small_predictor(6);
    let h = p.highlights("I am not very happy. Such abuse!");
    let happy = h.iter().find(|t| t.token == "happy").unwrap();
    assert!(happy.negated);
    assert_eq!(happy.emotions, [Emotion::Anger, Emotion::Disgust, Emotion::Fear, Emotion::Sadness]);
    let abuse = h.iter().find(|t| t.token == "abuse").unwrap();
    assert!(!abuse.negated);
    assert_eq!(abuse.emotions, [Emotion::Anger, Emotion::Disgust]);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let mut p = small_predictor(6);
    p.embeddings = EmbeddingTable::new(5).unwrap();
    assert!(matches!(p.check(), Err(Error::Shape(_))));
}

#[test]
fn missing_artifacts_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(Predictor::load(dir.path()).is_err());
}

#[test]
fn comparison_rows_cover_every_model() {
    let p = small_predictor(6);
    let s = common::generate(60, 6, 9);
    let (tr, _, te) = split(&s.corpus, (0.7, 0.0, 0.3), 1).unwrap();
    let train = ensemble_data(&p, &tr).unwrap();
    let test = ensemble_data(&p, &te).unwrap();
    let sets: Vec<FeatureSet> = ["avg+emotions", "cnn+rnn"].iter().map(|s| s.parse().unwrap()).collect();
    let rows = compare_models((&train.0, &train.1), (&test.0, &test.1), &sets).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(names, ["cnn", "rnn", "avg", "regression[avg+emotions]", "regression[cnn+rnn]"]);
    for r in &rows {
        assert_eq!(r.metrics.posts, test.0.len());
        assert!((0.0..=1.0).contains(&r.metrics.misclass_rate));
    }
}
