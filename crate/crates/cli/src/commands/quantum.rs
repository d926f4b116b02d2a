use std::fmt::Write;

use bellpoly::inequalities::{eval_bell_clauser_horne, eval_ch_pitowsky, quantum_epr_table};
use bellpoly::qprob::{quantum_prob, singlet_joint_up_closed_form, singlet_state, up_event, Direction, Wing};
use serde_json::json;

use super::{geometry_json, geometry_text, table_csv, Report, Settings};
use crate::error::CliError;
use crate::scenario::Scenario;

/// Agreement required between the trace rule and `½ sin²(θ/2)`.
const GRID_TOL: f64 = 1e-10;

pub fn quantum(s: &Scenario, cfg: &Settings) -> Result<Report, CliError> {
    if cfg.exact {
        return Err(CliError::Usage("quantum probabilities are not rational in general; drop --exact".into()));
    }
    let g = s.geometry()?.ok_or_else(|| CliError::Usage("quantum needs a geometry".into()))?;
    let table = quantum_epr_table(&g).map_err(|e| CliError::Invariant {
        message: format!("quantum table: {e}"),
        dump: geometry_json(&g),
    })?;
    let bch = eval_bell_clauser_horne(&table);
    let chp = eval_ch_pitowsky(&table.to_correlation_vector()).expect("four events on the CH pairs");
    let mut result = json!({
        "geometry": geometry_json(&g),
        "table": table.to_json(),
        "bell_clauser_horne": bch.to_json(),
        "ch_pitowsky": chp.to_json(),
        "verdict": if bch.satisfied() { "SATISFIED" } else { "VIOLATED" },
    });
    let mut text = geometry_text(&g);
    text.push_str(&table.to_text());
    text.push('\n');
    text.push_str(&bch.to_text());

    let mut breach = None;
    if let Some(angles) = &s.angles {
        let w = singlet_state::<f64>();
        let mut rows = Vec::new();
        let _ = writeln!(text, "\n{:>10} {:>14} {:>14}", "degrees", "trace rule", "closed form");
        for &deg in angles {
            let events = [
                up_event(Wing::Left, &Direction::z()).expect("unit"),
                up_event(Wing::Right, &Direction::in_plane_degrees(deg)).expect("unit"),
            ];
            let p = quantum_prob(&w, &events).expect("events on different wings commute");
            let closed = singlet_joint_up_closed_form(deg.to_radians());
            if (p - closed).abs() > GRID_TOL && breach.is_none() {
                breach = Some((format!("trace rule and closed form disagree at {deg} degrees"), json!({"degrees": deg, "trace": p, "closed_form": closed})));
            }
            let _ = writeln!(text, "{deg:>10.3} {p:>14.10} {closed:>14.10}");
            rows.push(json!({"degrees": deg, "p_up_up": p, "closed_form": closed}));
        }
        result["grid"] = json!(rows);
    }
    let mut report = Report::new(result, text, table_csv(&table));
    report.breach = breach;
    Ok(report)
}
