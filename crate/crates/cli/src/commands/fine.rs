use std::fmt::Write;

use bellpoly::fine::{angle_scan, angle_scan_csv, loophole_report, FineModel};
use bellpoly::inequalities::format_scalar;
use bellpoly::qprob::Geometry;
use serde_json::{json, Value};

use super::{geometry_json, geometry_text, Report, Settings};
use crate::error::CliError;
use crate::scenario::{Format, Scenario};

pub const DEFAULT_PAIRS: u64 = 1_000_000;
/// 0°, 10°, …, 180°.
pub fn default_angles() -> Vec<f64> {
    (0..=18).map(|k| f64::from(k) * 10.0).collect()
}

fn parse_model(v: Option<&Value>) -> Result<FineModel, CliError> {
    match v {
        None => Ok(FineModel::default_model()),
        Some(Value::String(name)) => match name.as_str() {
            "default" => Ok(FineModel::default_model()),
            "perfect_detection" => Ok(FineModel::perfect_detection()),
            other => Err(CliError::Usage(format!("unknown fine model preset {other:?}; expected default or perfect_detection"))),
        },
        Some(obj) => serde_json::from_value(obj.clone()).map_err(|e| CliError::Malformed(format!("fine model: {e}"))),
    }
}

pub fn fine(s: &Scenario, cfg: &Settings, format: Format) -> Result<Report, CliError> {
    if cfg.exact {
        return Err(CliError::Usage("the fine model is simulated in floating point; drop --exact".into()));
    }
    let model = parse_model(s.model.as_ref())?;
    let g = s.geometry()?.unwrap_or_else(Geometry::violating);
    let pairs = cfg.trials.unwrap_or(DEFAULT_PAIRS);
    let r = loophole_report(&model, &g, pairs, cfg.seed).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut result = json!({
        "model": serde_json::to_value(model).expect("plain data"),
        "report": r.to_json(),
    });
    let mut text = geometry_text(&g);
    let _ = writeln!(text, "pairs: {}  coincidence rate: {:.6}", r.total_pairs(), r.coincidence_rate());
    let _ = write!(text, "\nall emitted pairs\n{}\n{}", r.raw_table.to_text(), r.raw_report.to_text());
    match (&r.post_table, &r.post_report) {
        (Some(t), Some(rep)) => {
            let _ = write!(text, "\ncoincidences only\n{}\n{}", t.to_text(), rep.to_text());
        }
        _ => text.push_str("\ncoincidences only: undefined, some setting pair had no coincidences\n"),
    }

    let angles = s.angles.clone().or_else(|| (format == Format::Csv).then(default_angles));
    let mut csv = String::new();
    if let Some(angles) = angles {
        let rows = angle_scan(&model, &angles, pairs, cfg.seed).map_err(|e| CliError::Usage(e.to_string()))?;
        csv = angle_scan_csv(&rows);
        let _ = writeln!(text, "\n{:>10} {:>14} {:>14}", "degrees", "post-selected", "singlet");
        for row in &rows {
            let _ = writeln!(
                text,
                "{:>10.3} {:>14} {:>14.6}",
                row.degrees,
                row.post_selected_up_up.map_or("undefined".to_string(), |p| format!("{p:.6}")),
                row.quantum_up_up
            );
        }
        result["scan"] = json!(rows
            .iter()
            .map(|r| json!({
                "degrees": r.degrees,
                "pairs": r.pairs,
                "coincidences": r.coincidences,
                "post_selected_up_up": r.post_selected_up_up,
                "quantum_up_up": r.quantum_up_up,
            }))
            .collect::<Vec<_>>());
    }
    result["geometry"] = geometry_json(&g);

    let mut report = Report::new(result, text, csv);
    // Every setting pair has at least pairs / 4 emissions; a line has at most six unit terms.
    let fewest = r.stats.iter().flatten().map(|s| s.pairs).min().unwrap_or(1);
    let tol = 6.0 * 5.0 * (0.25 / fewest as f64).sqrt();
    if !r.raw_report.satisfied_within(tol) {
        report.breach = Some((
            format!(
                "the all-pairs ensemble violates Bell-Clauser-Horne beyond sampling noise (margin {}, allowed {})",
                format_scalar(&r.raw_report.max_margin()),
                format_scalar(&tol)
            ),
            r.to_json(),
        ));
    }
    Ok(report)
}
