use bellpoly::fine::{angle_scan, loophole_report, FineModel};
use bellpoly::qprob::Geometry;

#[test]
fn post_selection_tracks_the_singlet_curve() {
    let degrees: Vec<f64> = (0..=6).map(|k| 30.0 * f64::from(k)).collect();
    for row in angle_scan(&FineModel::default_model(), &degrees, 200_000, 21).unwrap() {
        let p = row.post_selected_up_up.unwrap();
        let q = row.quantum_up_up;
        let sigma = (q * (1.0 - q) / row.coincidences as f64).sqrt().max(1.0 / row.coincidences as f64);
        assert!((p - q).abs() <= 5.0 * sigma, "{}: {p} vs {q}", row.degrees);
    }
}

#[test]
fn raw_ensemble_obeys_and_post_selected_mimics_the_violation() {
    let r = loophole_report(&FineModel::default_model(), &Geometry::violating(), 400_000, 22).unwrap();
    let sigma = (0.25 / 100_000.0f64).sqrt();
    assert!(r.raw_report.satisfied_within(6.0 * 5.0 * sigma), "{}", r.raw_report.to_text());
    let post = r.post_report.as_ref().unwrap();
    let bch1 = post.line("bch.1").unwrap().value();
    assert!((bch1 - 0.125).abs() < 0.02, "{bch1}");
    assert!((r.coincidence_rate() - 0.5).abs() < 0.005);
}

#[test]
fn perfect_detection_stays_local() {
    let r = loophole_report(&FineModel::perfect_detection(), &Geometry::violating(), 400_000, 23).unwrap();
    assert!((r.coincidence_rate() - 1.0).abs() < 1e-12);
    let sigma = (0.25 / 100_000.0f64).sqrt();
    assert!(r.raw_report.satisfied_within(6.0 * 5.0 * sigma));
}
