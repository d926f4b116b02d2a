use std::fmt::Write;
use std::fs::File;
use std::io::BufReader;

use bellpoly::inequalities::eval_ch_pitowsky;
use bellpoly::labrecord::{frequencies, random_record, record_impossibility_demo, vertex_weights, LabRecord, LabRecordError, RecordVerdict};
use bellpoly::polytope::CorrelationVector;
use bellpoly::{Rational, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{Report, Settings};
use crate::error::CliError;
use crate::scenario::Scenario;

pub const DEFAULT_ROWS: u64 = 1000;

pub fn record(s: &Scenario, cfg: &Settings) -> Result<Report, CliError> {
    match (&s.record, &s.target) {
        (Some(_), Some(_)) => Err(CliError::Usage("give either record or target, not both".into())),
        (Some(path), None) => {
            let path = s.resolve(path);
            let file = File::open(&path).map_err(|e| CliError::Usage(format!("cannot open record {}: {e}", path.display())))?;
            let rec = LabRecord::read_csv(BufReader::new(file)).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?;
            record_report(&rec, "file")
        }
        (None, Some(target)) => target_report(target),
        (None, None) => {
            let rows = cfg.trials.unwrap_or(DEFAULT_ROWS);
            let rows = usize::try_from(rows).map_err(|_| CliError::Usage("too many rows".into()))?;
            let rec = random_record(&mut ChaCha8Rng::seed_from_u64(cfg.seed), rows);
            record_report(&rec, "random")
        }
    }
}

fn record_report(rec: &LabRecord, source: &str) -> Result<Report, CliError> {
    let f = frequencies(rec);
    let w = vertex_weights(rec);
    let ch = eval_ch_pitowsky(&f).expect("records use the CH index set");
    let counts = rec.counts();
    let result = json!({
        "source": source,
        "rows": rec.len(),
        "counts": counts,
        "frequencies": f.to_json_value(),
        "vertex_weights": w.iter().enumerate().filter(|(_, v)| **v != Rational::default()).map(|(k, v)| json!({"vertex": k, "weight": v.to_json()})).collect::<Vec<_>>(),
        "ch_pitowsky": ch.to_json(),
    });
    let mut text = format!("record: {} rows ({source})\nfrequencies: {f}\n", rec.len());
    let _ = writeln!(text, "vertex weights:");
    for (k, v) in w.iter().enumerate().filter(|(_, v)| **v != Rational::default()) {
        let eps: String = (0..4).map(|i| if (k >> i) & 1 == 1 { '1' } else { '0' }).collect();
        let _ = writeln!(text, "  {k:>2} (epsilon {eps})  {v}");
    }
    let _ = write!(text, "\n{}", ch.to_text());
    let mut report = Report::new(result.clone(), text, rec.to_csv_string());
    if !ch.satisfied() {
        report.breach = Some(("a laboratory record produced frequencies outside the polytope".into(), result));
    }
    Ok(report)
}

fn target_report(target: &Value) -> Result<Report, CliError> {
    let p = CorrelationVector::<Rational>::from_json_value(target).map_err(|e| CliError::Usage(format!("target: {e}")))?;
    match record_impossibility_demo(&p) {
        Err(LabRecordError::WrongIndexSet) => Err(CliError::Usage(LabRecordError::WrongIndexSet.to_string())),
        Err(LabRecordError::BadWeights(msg)) => Err(CliError::Usage(format!("no short record: {msg}"))),
        Err(e) => Err(CliError::Invariant {
            message: e.to_string(),
            dump: p.to_json_value(),
        }),
        Ok(verdict) => {
            let mut result = verdict.to_json();
            result["target"] = p.to_json_value();
            let (text, csv) = match &verdict {
                RecordVerdict::Impossible { report, certificate } => {
                    let mut t = format!("target: {p}\nno laboratory record of any length has these frequencies\n\n");
                    t.push_str(&report.to_text());
                    let mut csv = String::from("coordinate,normal\n");
                    for (l, y) in p.labels().iter().zip(&certificate.normal) {
                        let _ = writeln!(csv, "{l},{y}");
                    }
                    let _ = writeln!(csv, "offset,{}", certificate.offset);
                    (t, csv)
                }
                RecordVerdict::Realizable { record } => (
                    format!("target: {p}\nrealized exactly by a record of {} rows\n", record.len()),
                    record.to_csv_string(),
                ),
            };
            Ok(Report::new(result, text, csv))
        }
    }
}
