//! LP membership against the closed-form facet systems on random inputs.

use bellpoly::inequalities::{eval_bell_pitowsky, eval_ch_pitowsky, near_boundary, InequalityReport};
use bellpoly::polytope::{
    check_certificate, check_witness, combine, enumerate_vertices, membership, CorrelationVector, IndexPairSet, MembershipVerdict,
    SOLVE_TOL,
};
use bellpoly::{Rational, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Eval = fn(&CorrelationVector<f64>) -> InequalityReport<f64>;

fn cube_point(rng: &mut ChaCha8Rng, set: &IndexPairSet) -> CorrelationVector<f64> {
    let values = (0..set.dimension()).map(|_| rng.gen::<f64>()).collect();
    CorrelationVector::from_flat(set.clone(), values).unwrap()
}

/// Random mixture of a few vertices, half of them nudged off the polytope.
fn near_polytope_point(rng: &mut ChaCha8Rng, set: &IndexPairSet) -> CorrelationVector<f64> {
    let vertices = enumerate_vertices(set).unwrap();
    let mut w: Vec<f64> = (0..vertices.len()).map(|_| if rng.gen_bool(0.3) { rng.gen() } else { 0.0 }).collect();
    w[rng.gen_range(0..vertices.len())] += 0.1;
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let mut values = combine(set, &vertices, &w);
    if rng.gen_bool(0.5) {
        for v in &mut values {
            *v = (*v + rng.gen_range(-0.02..0.02)).clamp(0.0, 1.0);
        }
    }
    CorrelationVector::from_flat(set.clone(), values).unwrap()
}

fn compare(set: &IndexPairSet, eval: Eval, samples: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut disagreements, mut boundary, mut members) = (0, 0, 0);
    for k in 0..samples {
        let p = if k % 2 == 0 { cube_point(&mut rng, set) } else { near_polytope_point(&mut rng, set) };
        let verdict = membership(&p).unwrap();
        match &verdict {
            MembershipVerdict::Witness { weights, .. } => {
                members += 1;
                assert!(check_witness(&p, weights));
            }
            MembershipVerdict::Certificate(c) => assert!(check_certificate(&p, c)),
        }
        let report = eval(&p);
        if report.satisfied() != verdict.is_member() {
            if near_boundary(&report, SOLVE_TOL) {
                boundary += 1;
            } else {
                disagreements += 1;
            }
        }
    }
    assert_eq!(disagreements, 0);
    assert!(boundary * 100 < samples, "{boundary} boundary cases");
    assert!(members > samples / 10, "only {members} members; the sample does not exercise the interior");
}

#[test]
fn three_events_all_pairs() {
    compare(&IndexPairSet::all_pairs(3).unwrap(), |p| eval_bell_pitowsky(p).unwrap(), 2000, 1);
}

#[test]
fn four_events_clauser_horne_pairs() {
    compare(&IndexPairSet::clauser_horne(), |p| eval_ch_pitowsky(p).unwrap(), 2000, 2);
}

#[test]
fn exact_mode_agrees_without_tolerance() {
    let set = IndexPairSet::clauser_horne();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let values: Vec<Rational> = (0..set.dimension()).map(|_| Rational::ratio(rng.gen_range(0..=16), 16)).collect();
        let p = CorrelationVector::from_flat(set.clone(), values).unwrap();
        let verdict = membership(&p).unwrap();
        assert_eq!(eval_ch_pitowsky(&p).unwrap().satisfied(), verdict.is_member(), "{p}");
        if let MembershipVerdict::Witness { weights, boundary } = &verdict {
            assert!(!boundary);
            assert!(check_witness(&p, weights));
        }
    }
}
