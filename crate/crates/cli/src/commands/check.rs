use std::fmt::Write;

use bellpoly::inequalities::{eval_bell_pitowsky, eval_ch_pitowsky, eval_n2, format_scalar, near_boundary, InequalityReport};
use bellpoly::polytope::{
    check_certificate, check_witness, enumerate_vertices, membership, CorrelationVector, IndexPairSet, MembershipVerdict,
    PolytopeError, SOLVE_TOL,
};
use bellpoly::{Rational, Scalar};
use serde_json::{json, Value};

use super::{Report, Settings};
use crate::error::CliError;
use crate::scenario::Scenario;

pub fn check(s: &Scenario, cfg: &Settings) -> Result<Report, CliError> {
    let v = s.vector.as_ref().ok_or_else(|| CliError::Usage("check needs a vector".into()))?;
    if cfg.exact {
        check_vector::<Rational>(v)
    } else {
        check_vector::<f64>(v)
    }
}

/// Closed-form system for the index sets that have one.
pub(crate) fn closed_form<S: Scalar>(p: &CorrelationVector<S>) -> Option<InequalityReport<S>> {
    let set = p.set();
    let n = set.n();
    if n == 2 && set == &IndexPairSet::all_pairs(2).ok()? {
        eval_n2(p).ok()
    } else if n == 3 && set == &IndexPairSet::all_pairs(3).ok()? {
        eval_bell_pitowsky(p).ok()
    } else if set == &IndexPairSet::clauser_horne() {
        eval_ch_pitowsky(p).ok()
    } else {
        None
    }
}

fn check_vector<S: Scalar>(v: &Value) -> Result<Report, CliError> {
    let p = CorrelationVector::<S>::from_json_value(v).map_err(|e| CliError::Usage(format!("vector: {e}")))?;
    let verdict = membership(&p).map_err(|e| match e {
        PolytopeError::TooManyEvents { .. } => CliError::Usage(e.to_string()),
        other => CliError::Invariant {
            message: format!("membership failed: {other}"),
            dump: p.to_json_value(),
        },
    })?;
    let vertices = enumerate_vertices(p.set()).expect("membership already enumerated them");
    let labels = p.labels();
    let mut text = format!("vector: {p}\n");
    let mut csv = String::new();
    let mut breach = None;
    let (verdict_json, recheck) = match &verdict {
        MembershipVerdict::Witness { weights, boundary } => {
            let support: Vec<Value> = vertices
                .iter()
                .zip(weights)
                .filter(|(_, w)| !w.is_zero())
                .map(|(vx, w)| json!({"vertex": vx.index, "epsilon": vx.epsilon, "weight": w.to_json()}))
                .collect();
            let ok = check_witness(&p, weights);
            let _ = writeln!(
                text,
                "verdict: MEMBER (convex combination of {} vertices{})",
                support.len(),
                if *boundary { ", on the boundary" } else { "" }
            );
            let _ = writeln!(text, "{:>8}  {:<12} {:>14}", "vertex", "epsilon", "weight");
            csv.push_str("vertex,epsilon,weight\n");
            for (vx, w) in vertices.iter().zip(weights).filter(|(_, w)| !w.is_zero()) {
                let eps: String = vx.epsilon.iter().map(u8::to_string).collect();
                let _ = writeln!(text, "{:>8}  {:<12} {:>14}", vx.index, eps, format_scalar(w));
                let _ = writeln!(csv, "{},{eps},{}", vx.index, format_scalar(w));
            }
            (
                json!({"member": true, "witness": {"boundary": boundary, "support": support}}),
                ok,
            )
        }
        MembershipVerdict::Certificate(c) => {
            let ok = check_certificate(&p, c);
            let terms: Vec<String> = c
                .normal
                .iter()
                .zip(&labels)
                .filter(|(y, _)| !y.is_zero())
                .map(|(y, l)| format!("{}*{l}", format_scalar(y)))
                .collect();
            let inequality = format!("{} <= {}", terms.join(" + "), format_scalar(&c.offset));
            let _ = writeln!(text, "verdict: NOT A MEMBER");
            let _ = writeln!(text, "separating inequality: {inequality}");
            let _ = writeln!(text, "violated by: {}", format_scalar(&c.gap));
            csv.push_str("coordinate,normal\n");
            for (y, l) in c.normal.iter().zip(&labels) {
                let _ = writeln!(csv, "{l},{}", format_scalar(y));
            }
            let _ = writeln!(csv, "offset,{}", format_scalar(&c.offset));
            (
                json!({"member": false, "certificate": {
                    "normal": c.normal.iter().map(Scalar::to_json).collect::<Vec<_>>(),
                    "offset": c.offset.to_json(),
                    "gap": c.gap.to_json(),
                    "inequality": inequality,
                }}),
                ok,
            )
        }
    };
    if !recheck {
        breach = Some(("independent re-check rejected the verdict".to_string(), json!({"vector": p.to_json_value(), "verdict": verdict_json})));
    }
    let mut result = json!({
        "vector": p.to_json_value(),
        "verdict": verdict_json,
        "recheck": recheck,
        "range_violations": p.range_violations().iter().map(|r| json!({"label": r.label, "value": r.value.to_json()})).collect::<Vec<_>>(),
    });
    if let Some(report) = closed_form(&p) {
        let tol = if S::EXACT { 0.0 } else { SOLVE_TOL };
        let boundary = near_boundary(&report, tol) || matches!(verdict, MembershipVerdict::Witness { boundary: true, .. });
        let agrees = report.satisfied() == verdict.is_member();
        if !agrees && !boundary && breach.is_none() {
            breach = Some((
                "closed-form inequalities and the polytope disagree".to_string(),
                json!({"vector": p.to_json_value(), "inequalities": report.to_json(), "verdict": result["verdict"].clone()}),
            ));
        }
        let _ = write!(text, "\n{}", report.to_text());
        result["inequalities"] = report.to_json();
        result["agreement"] = json!(if agrees { "agree" } else if boundary { "boundary" } else { "disagree" });
    }
    let mut r = Report::new(result, text, csv);
    r.breach = breach;
    Ok(r)
}
