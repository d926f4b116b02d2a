//! Local deterministic worlds without conspiracy obey Bell-Clauser-Horne; conspiracy breaks it.

use bellpoly::inequalities::eval_bell_clauser_horne;
use bellpoly::ldm::{
    check_parameter_independence, check_screening_off, conspiracy_model, correlated_sources_model, exact_probabilities,
    lambda_decomposition, random_defined_model, random_model, ModelSizes,
};
use bellpoly::{Rational, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small() -> ModelSizes {
    ModelSizes { mu: 4, lambda: 6, nu: 4 }
}

#[test]
fn exact_no_conspiracy_models_satisfy_every_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..150 {
        let (m, table) = random_defined_model::<Rational, _>(&mut rng, ModelSizes::default(), true);
        let report = eval_bell_clauser_horne(&table);
        assert!(report.satisfied(), "{}\n{}", report.to_text(), m.to_json());
    }
}

#[test]
fn product_measures_screen_off_and_keep_parameters_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for no_conspiracy in [true, false] {
        for _ in 0..40 {
            let m = random_model::<f64, _>(&mut rng, small(), no_conspiracy);
            assert!(check_screening_off(&m).holds());
            assert!(check_parameter_independence(&m).holds());
        }
    }
}

#[test]
fn decomposition_over_lambda_reproduces_the_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..40 {
        let (m, table) = random_defined_model::<Rational, _>(&mut rng, small(), true);
        assert_eq!(lambda_decomposition(&m), Some(table));
    }
}

#[test]
fn conspiracy_violates() {
    let table = exact_probabilities(&conspiracy_model()).table().unwrap();
    let report = eval_bell_clauser_horne(&table);
    assert!(!report.satisfied());
    assert_eq!(report.max_margin(), Rational::ratio(1, 1));
}

#[test]
fn correlated_sources_break_both_conditions() {
    let m = correlated_sources_model();
    assert!(!check_screening_off(&m).holds());
    assert!(!check_parameter_independence(&m).holds());
}
