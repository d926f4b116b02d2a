use bellpoly::inequalities::eval_ch_pitowsky;
use bellpoly::labrecord::{frequencies, random_record, record_from_weights, record_impossibility_demo, vertex_weights, LabRecord, RecordVerdict};
use bellpoly::polytope::{check_certificate, CorrelationVector, IndexPairSet};
use bellpoly::{Rational, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(n: i64, d: i64) -> Rational {
    Rational::ratio(n, d)
}

#[test]
fn random_records_never_violate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = rng.gen_range(1..=2000);
        let record = random_record(&mut rng, n);
        let report = eval_ch_pitowsky(&frequencies(&record)).unwrap();
        assert!(report.satisfied(), "{}", report.to_text());
    }
}

#[test]
fn weights_rebuild_an_equivalent_record() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let record = random_record(&mut rng, 360);
    let rebuilt = record_from_weights(&vertex_weights(&record)).unwrap();
    assert_eq!(frequencies(&rebuilt), frequencies(&record));
    assert!(rebuilt.len() <= record.len());
}

#[test]
fn csv_round_trip_preserves_frequencies() {
    let record = random_record(&mut ChaCha8Rng::seed_from_u64(6), 50);
    let back = LabRecord::read_csv(record.to_csv_string().as_bytes()).unwrap();
    assert_eq!(back, record);
}

#[test]
fn quantum_vector_has_no_record() {
    let p = CorrelationVector::from_flat(
        IndexPairSet::clauser_horne(),
        vec![q(1, 2), q(1, 2), q(1, 2), q(1, 2), q(3, 8), q(3, 8), q(0, 1), q(3, 8)],
    )
    .unwrap();
    match record_impossibility_demo(&p).unwrap() {
        RecordVerdict::Impossible { certificate, report } => {
            assert!(check_certificate(&p, &certificate));
            assert_eq!(certificate.gap, q(1, 8));
            assert_eq!(report.line("ch.1").unwrap().margin, q(1, 8));
        }
        RecordVerdict::Realizable { .. } => panic!("the quantum vector must be refuted"),
    }
}
