//! Scenario documents: one JSON object per run, overridable from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use bellpoly::qprob::{Direction, Geometry};
use serde::Deserialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Quantum,
    Check,
    Ldm,
    Fine,
    Record,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Quantum => "quantum",
            Mode::Check => "check",
            Mode::Ldm => "ldm",
            Mode::Fine => "fine",
            Mode::Record => "record",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Option<Mode>,
    pub description: Option<String>,
    /// `{"a": [A1, A2], "b": [B1, B2]}`; each entry is either an angle in the
    /// x–z plane or `[polar, azimuth]`, in degrees.
    pub geometry: Option<Value>,
    /// Correlation vector for `check`.
    pub vector: Option<Value>,
    /// Record CSV for `record`, relative to the scenario file.
    pub record: Option<PathBuf>,
    /// Correlation vector for `record` to realize or refute.
    pub target: Option<Value>,
    /// `ldm`: preset name or explicit model; `fine`: preset name or rules.
    pub model: Option<Value>,
    /// `[|M|, |L|, |N|]` for random LDM models.
    pub sizes: Option<[usize; 3]>,
    pub no_conspiracy: Option<bool>,
    /// Number of random LDM models to test in one run.
    pub batch: Option<usize>,
    /// Eight probabilities `p(A, B, C)` indexed `A + 2B + 4C`.
    pub triple: Option<Vec<Value>>,
    /// Angles in degrees for a single-pair scan.
    pub angles: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub exact: Option<bool>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read scenario {}: {e}", path.display())))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Malformed(format!("scenario {} is not valid JSON: {e}", path.display())))?;
        let mut s: Scenario = serde_json::from_value(value).map_err(|e| CliError::Usage(format!("scenario {}: {e}", path.display())))?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn geometry(&self) -> Result<Option<Geometry<f64>>, CliError> {
        self.geometry.as_ref().map(parse_geometry).transpose()
    }
}

fn parse_direction(v: &Value) -> Result<Direction<f64>, CliError> {
    let finite = |x: f64| {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(CliError::Usage("geometry angles must be finite".into()))
        }
    };
    match v {
        Value::Number(n) => {
            let deg = finite(n.as_f64().unwrap_or(f64::NAN))?;
            Ok(Direction::in_plane_degrees(deg))
        }
        Value::Array(a) if a.len() == 2 => {
            let polar = finite(a[0].as_f64().ok_or_else(|| CliError::Usage("polar angle must be a number".into()))?)?;
            let azimuth = finite(a[1].as_f64().ok_or_else(|| CliError::Usage("azimuth must be a number".into()))?)?;
            Ok(Direction::from_angles(polar.to_radians(), azimuth.to_radians()))
        }
        other => Err(CliError::Usage(format!(
            "direction must be an angle in degrees or [polar, azimuth], got {other}"
        ))),
    }
}

pub fn parse_geometry(v: &Value) -> Result<Geometry<f64>, CliError> {
    let wing = |key: &str| -> Result<[Direction<f64>; 2], CliError> {
        let arr = v
            .get(key)
            .and_then(Value::as_array)
            .filter(|a| a.len() == 2)
            .ok_or_else(|| CliError::Usage(format!("geometry.{key} must list two directions")))?;
        Ok([parse_direction(&arr[0])?, parse_direction(&arr[1])?])
    };
    if let Some(extra) = v.as_object().and_then(|o| o.keys().find(|k| *k != "a" && *k != "b")) {
        return Err(CliError::Usage(format!("unknown geometry field {extra}")));
    }
    Ok(Geometry { a: wing("a")?, b: wing("b")? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn planar_and_spherical_directions() {
        let g = parse_geometry(&json!({"a": [0, 120], "b": [[90, 90], 240.0]})).unwrap();
        let angles = g.angles();
        assert!((angles[0][1].to_degrees() - 120.0).abs() < 1e-9);
        assert!((g.b[0].components()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_geometry_is_usage() {
        for bad in [json!({"a": [0], "b": [0, 0]}), json!({"a": [0, "x"], "b": [0, 0]}), json!({"a": [0, 0], "b": [0, 0], "c": 1})] {
            assert!(matches!(parse_geometry(&bad), Err(CliError::Usage(_))), "{bad}");
        }
    }
}
