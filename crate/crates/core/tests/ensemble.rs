use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reactmine::dataset::ReactionDistribution;
use reactmine::ensemble::{
    average_networks, clamp_normalize, fit_regression, fit_regression_with_ridge, Components, Feature, FeatureSet,
    RegressionModel, DEFAULT_RIDGE, FALLBACK_RIDGE,
};
use reactmine::lexicon::EmotionVector;

fn dist(w: &[f64]) -> ReactionDistribution {
    ReactionDistribution::new(w.to_vec()).unwrap()
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0f64).powi(2)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn random_components(rng: &mut ChaCha8Rng) -> Components {
    let e = random_simplex(rng, 8);
    Components {
        cnn: dist(&random_simplex(rng, 5)),
        rnn: dist(&random_simplex(rng, 5)),
        emotions: EmotionVector(e.try_into().unwrap()),
    }
}

#[test]
fn averaging() {
    let d = dist(&[0.1, 0.2, 0.3, 0.4, 0.0]);
    assert_eq!(average_networks(&d, &d).unwrap(), d);
    let a = dist(&[1.0, 0.0, 0.0, 0.0, 0.0]);
    let b = dist(&[0.0, 1.0, 0.0, 0.0, 0.0]);
    assert_eq!(average_networks(&a, &b).unwrap().weights(), [0.5, 0.5, 0.0, 0.0, 0.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (x, y) = (random_simplex(&mut rng, 5), random_simplex(&mut rng, 5));
    let avg = average_networks(&dist(&x), &dist(&y)).unwrap();
    for i in 0..5 {
        assert!((avg.weights()[i] - (x[i] + y[i]) / 2.0).abs() < 1e-15);
    }
    assert!(average_networks(&a, &ReactionDistribution::uniform(true)).is_err());
}

#[test]
fn feature_sets_parse_and_layout() {
    let fs: FeatureSet = "emotions+cnn".parse().unwrap();
    assert_eq!(fs.blocks(), [Feature::Emotions, Feature::Cnn]);
    assert_eq!(fs.to_string(), "emotions+cnn");
    assert_eq!(FeatureSet::default().width(5), 13);
    assert!("cnn+cnn".parse::<FeatureSet>().is_err());
    assert!("cnn+gru".parse::<FeatureSet>().is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = random_components(&mut rng);
    let f = c.features(&FeatureSet::default()).unwrap();
    assert_eq!(f.len(), 13);
    assert_eq!(&f[..5], c.averaged().unwrap().weights());
    assert_eq!(&f[5..], c.emotions.as_array());
}

#[test]
fn fit_matches_normal_equation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fs = FeatureSet::default();
    let x: Vec<Vec<f64>> = (0..20).map(|_| (0..13).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<Vec<f64>> = (0..20).map(|_| random_simplex(&mut rng, 5)).collect();
    let model = fit_regression(&x, &y, fs).unwrap();
    assert_eq!(model.ridge, DEFAULT_RIDGE);

    let a = DMatrix::from_fn(20, 14, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let gram = a.transpose() * &a + DMatrix::identity(14, 14) * DEFAULT_RIDGE;
    let lu = gram.lu();
    let mut sse = 0.0;
    for c in 0..5 {
        let yc = DVector::from_fn(20, |i, _| y[i][c]);
        let w = lu.solve(&(a.transpose() * &yc)).unwrap();
        for j in 0..14 {
            assert!((model.weights[c][j] - w[j]).abs() < 1e-8, "output {c} coef {j}");
        }
        sse += (&a * &w - &yc).norm_squared();
    }
    assert!((model.training_sse - sse).abs() < 1e-8);
}

#[test]
fn realizable_targets_are_reproduced() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let comps: Vec<Components> = (0..40).map(|_| random_components(&mut rng)).collect();
    let fs = FeatureSet::default();
    let x: Vec<Vec<f64>> = comps.iter().map(|c| c.features(&fs).unwrap()).collect();
    let y: Vec<Vec<f64>> = comps.iter().map(|c| c.averaged().unwrap().into_weights()).collect();
    let model = fit_regression(&x, &y, fs).unwrap();
    assert!(model.training_sse < 1e-10, "{}", model.training_sse);
    for c in &comps {
        let p = model.predict_final(c).unwrap();
        for (a, b) in p.weights().iter().zip(c.averaged().unwrap().weights()) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn constant_targets_give_intercept_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fs: FeatureSet = "cnn+rnn".parse().unwrap();
    let x: Vec<Vec<f64>> = (0..30).map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let target = vec![0.4, 0.3, 0.1, 0.1, 0.1];
    let y = vec![target.clone(); 30];
    let m = fit_regression(&x, &y, fs).unwrap();
    for (c, w) in m.weights.iter().enumerate() {
        assert!((w[0] - target[c]).abs() < 1e-8);
        assert!(w[1..].iter().all(|v| v.abs() < 1e-8));
    }
}

#[test]
fn few_samples_use_fallback_ridge() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x: Vec<Vec<f64>> = (0..5).map(|_| (0..13).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<Vec<f64>> = (0..5).map(|_| random_simplex(&mut rng, 5)).collect();
    let m = fit_regression(&x, &y, FeatureSet::default()).unwrap();
    assert_eq!(m.ridge, FALLBACK_RIDGE);
    assert!(m.weights.iter().flatten().all(|w| w.is_finite()));
}

#[test]
fn degenerate_inputs_are_errors() {
    let fs = FeatureSet::default();
    assert!(fit_regression(&[], &[], fs.clone()).is_err());
    assert!(fit_regression(&[vec![0.0; 12]], &[vec![0.2; 5]], fs.clone()).is_err());
    let x = vec![vec![f64::NAN; 13]; 20];
    assert!(fit_regression(&x, &vec![vec![0.2; 5]; 20], fs.clone()).is_err());
    // zero ridge on a singular design cannot be rescued
    let x = vec![vec![0.0; 13]; 20];
    assert!(fit_regression_with_ridge(&x, &vec![vec![0.2; 5]; 20], fs, 0.0).is_err());
}

#[test]
fn clamping_and_fallback() {
    assert_eq!(clamp_normalize(&[0.5, -0.5, 0.5, 0.0, 1.0]).unwrap(), [0.25, 0.0, 0.25, 0.0, 0.5]);
    assert!(clamp_normalize(&[-1.0; 5]).is_none());

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = random_components(&mut rng);
    let mut weights = vec![vec![0.0; 14]; 5];
    weights.iter_mut().for_each(|w| w[0] = -1.0);
    let m = RegressionModel {
        format_version: 1,
        features: FeatureSet::default(),
        classes: 5,
        weights,
        ridge: 0.0,
        samples: 0,
        training_sse: 0.0,
    };
    assert_eq!(m.predict_final(&c).unwrap(), c.averaged().unwrap());
}

#[test]
fn json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<Vec<f64>> = (0..30).map(|_| (0..13).map(|_| rng.random()).collect()).collect();
    let y: Vec<Vec<f64>> = (0..30).map(|_| random_simplex(&mut rng, 5)).collect();
    let m = fit_regression(&x, &y, FeatureSet::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ensemble.json");
    m.save(&path).unwrap();
    assert_eq!(RegressionModel::load(&path).unwrap(), m);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn final_prediction_is_on_simplex(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_components(&mut rng);
        let weights = (0..5).map(|_| (0..14).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let m = RegressionModel {
            format_version: 1,
            features: FeatureSet::default(),
            classes: 5,
            weights,
            ridge: 0.0,
            samples: 0,
            training_sse: 0.0,
        };
        let p = m.predict_final(&c).unwrap();
        prop_assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.weights().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn fit_is_permutation_invariant_and_beats_averaging(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = FeatureSet::default();
        let comps: Vec<Components> = (0..30).map(|_| random_components(&mut rng)).collect();
        let x: Vec<Vec<f64>> = comps.iter().map(|c| c.features(&fs).unwrap()).collect();
        let y: Vec<Vec<f64>> = (0..30).map(|_| random_simplex(&mut rng, 5)).collect();
        let m = fit_regression(&x, &y, fs.clone()).unwrap();
        let avg_sse: f64 = comps.iter().zip(&y).map(|(c, t)| {
            c.averaged().unwrap().weights().iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        }).sum();
        prop_assert!(m.training_sse <= avg_sse);

        let mut order: Vec<usize> = (0..30).collect();
        order.reverse();
        order.rotate_left(seed as usize % 30);
        let xp: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<Vec<f64>> = order.iter().map(|&i| y[i].clone()).collect();
        let mp = fit_regression(&xp, &yp, fs).unwrap();
        for (a, b) in m.weights.iter().flatten().zip(mp.weights.iter().flatten()) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }
}
