mod check;
mod fine;
mod ldm;
mod quantum;
mod record;

pub use check::check;
pub use fine::fine;
pub use ldm::ldm;
pub use quantum::quantum;
pub use record::record;

use std::fmt::Write;

use bellpoly::inequalities::{format_scalar, EprConditionalTable};
use bellpoly::qprob::Geometry;
use bellpoly::Scalar;
use serde_json::{json, Value};

/// Run-wide options after merging the scenario with command-line flags.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub seed: u64,
    pub trials: Option<u64>,
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub result: Value,
    pub text: String,
    pub csv: String,
    /// Set when the run produced something the theory forbids.
    pub breach: Option<(String, Value)>,
}

impl Report {
    fn new(result: Value, text: String, csv: String) -> Self {
        Self { result, text, csv, breach: None }
    }
}

pub(crate) fn geometry_json(g: &Geometry<f64>) -> Value {
    let dir = |d: &bellpoly::qprob::Direction<f64>| json!(d.components().map(round12));
    let angles = g.angles().map(|r| r.map(|a| round12(a.to_degrees())));
    json!({
        "a": [dir(&g.a[0]), dir(&g.a[1])],
        "b": [dir(&g.b[0]), dir(&g.b[1])],
        "angles_deg": angles,
    })
}

pub(crate) fn geometry_text(g: &Geometry<f64>) -> String {
    let a = g.angles().map(|r| r.map(|v| v.to_degrees()));
    format!(
        "angles (deg): a1b1 {:.3}  a1b2 {:.3}  a2b1 {:.3}  a2b2 {:.3}\n",
        a[0][0], a[0][1], a[1][0], a[1][1]
    )
}

/// Rounds away floating noise such as `6.123e-17` so reports stay readable.
pub(crate) fn round12(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub(crate) fn table_csv<S: Scalar>(t: &EprConditionalTable<S>) -> String {
    let mut out = String::from("entry,value\n");
    for (k, v) in t.named_entries() {
        let _ = writeln!(out, "{k},{}", format_scalar(&v));
    }
    out
}
