//! A local hidden-variable model with imperfect detection.
//!
//! Each pair carries a unit vector `λ`, uniform on the sphere. Both wings
//! compute their outcome and their detection probability from `λ` and their
//! own setting only. Over all emitted pairs the statistics form an ordinary
//! local world; restricted to coincidences they reproduce the singlet
//! probabilities `½ sin²(θ/2)` for the default model.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::inequalities::{eval_bell_clauser_horne, EprConditionalTable, InequalityReport};
use crate::qprob::{singlet_joint_up_closed_form, Direction, Geometry};
use crate::stream::{self, Purpose};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FineError {
    #[error("need at least {min} pairs, got {got}")]
    TooFewPairs { min: u64, got: u64 },
}

/// Outcome of one wing as a function of `λ · d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeRule {
    /// Up iff `λ · d ≥ 0`.
    UpIfNonNegative,
    /// Up iff `λ · d < 0`.
    UpIfNegative,
}

impl OutcomeRule {
    pub fn is_up(self, projection: f64) -> bool {
        match self {
            OutcomeRule::UpIfNonNegative => projection >= 0.0,
            OutcomeRule::UpIfNegative => projection < 0.0,
        }
    }
}

/// Detection probability as a function of `λ · d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionRule {
    Always,
    /// `|λ · d|`
    AbsProjection,
}

impl DetectionRule {
    pub fn probability(self, projection: f64) -> f64 {
        match self {
            DetectionRule::Always => 1.0,
            DetectionRule::AbsProjection => projection.abs().min(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WingRule {
    pub outcome: OutcomeRule,
    pub detection: DetectionRule,
}

impl WingRule {
    /// `(up, detection probability)`; depends on `λ` and this wing's setting only.
    pub fn respond(&self, lambda: &[f64; 3], setting: &Direction<f64>) -> (bool, f64) {
        let s = setting.components();
        let proj = lambda[0] * s[0] + lambda[1] * s[1] + lambda[2] * s[2];
        (self.outcome.is_up(proj), self.detection.probability(proj))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineModel {
    pub left: WingRule,
    pub right: WingRule,
}

impl FineModel {
    /// Left: up iff `λ·a ≥ 0`, always detected. Right: up iff `λ·b < 0`,
    /// detected with probability `|λ·b|`.
    pub fn default_model() -> Self {
        Self {
            left: WingRule {
                outcome: OutcomeRule::UpIfNonNegative,
                detection: DetectionRule::Always,
            },
            right: WingRule {
                outcome: OutcomeRule::UpIfNegative,
                detection: DetectionRule::AbsProjection,
            },
        }
    }

    /// The default outcome rules with every particle detected.
    pub fn perfect_detection() -> Self {
        let mut m = Self::default_model();
        m.right.detection = DetectionRule::Always;
        m
    }
}

impl Default for FineModel {
    fn default() -> Self {
        Self::default_model()
    }
}

/// Uniform point on the unit sphere: `z` uniform in `[−1, 1]`, azimuth uniform.
pub fn sample_sphere<R: Rng>(rng: &mut R) -> [f64; 3] {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

/// Index of an outcome in [`CoincidenceStats::counts`].
pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const NULL: usize = 2;

/// Tallies for one setting pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoincidenceStats {
    pub pairs: u64,
    pub left_detections: u64,
    pub right_detections: u64,
    pub coincidences: u64,
    /// `[left][right]` over up / down / not detected.
    pub counts: [[u64; 3]; 3],
}

impl CoincidenceStats {
    fn merge(mut self, o: Self) -> Self {
        self.pairs += o.pairs;
        self.left_detections += o.left_detections;
        self.right_detections += o.right_detections;
        self.coincidences += o.coincidences;
        for (row, orow) in self.counts.iter_mut().zip(o.counts) {
            for (c, oc) in row.iter_mut().zip(orow) {
                *c += oc;
            }
        }
        self
    }

    pub fn coincidence_rate(&self) -> f64 {
        self.coincidences as f64 / self.pairs as f64
    }

    /// `[left, right, joint]` up-frequencies over all emitted pairs.
    pub fn raw(&self) -> [f64; 3] {
        let n = self.pairs as f64;
        let left: u64 = self.counts[UP].iter().sum();
        let right: u64 = self.counts.iter().map(|r| r[UP]).sum();
        [left as f64 / n, right as f64 / n, self.counts[UP][UP] as f64 / n]
    }

    /// `[left, right, joint]` up-frequencies among coincidences; `None` if there are none.
    pub fn post_selected(&self) -> Option<[f64; 3]> {
        if self.coincidences == 0 {
            return None;
        }
        let n = self.coincidences as f64;
        let left = self.counts[UP][UP] + self.counts[UP][DOWN];
        let right = self.counts[UP][UP] + self.counts[DOWN][UP];
        Some([left as f64 / n, right as f64 / n, self.counts[UP][UP] as f64 / n])
    }

    pub fn to_json(&self) -> Value {
        json!({
            "pairs": self.pairs,
            "left_detections": self.left_detections,
            "right_detections": self.right_detections,
            "coincidences": self.coincidences,
            "coincidence_rate": self.coincidence_rate(),
            "counts": self.counts,
            "raw": self.raw(),
            "post_selected": self.post_selected(),
        })
    }
}

/// Simulates `pairs` emissions at settings `(a, b)`.
pub fn run(m: &FineModel, a: &Direction<f64>, b: &Direction<f64>, pairs: u64, seed: u64) -> Result<CoincidenceStats, FineError> {
    run_tagged(m, a, b, pairs, seed, 0)
}

fn run_tagged(m: &FineModel, a: &Direction<f64>, b: &Direction<f64>, pairs: u64, seed: u64, tag: u64) -> Result<CoincidenceStats, FineError> {
    if pairs == 0 {
        return Err(FineError::TooFewPairs { min: 1, got: 0 });
    }
    let stats = stream::chunks(pairs)
        .map(|(k, len)| {
            let mut hidden = stream::substream(seed, tag, k, Purpose::Sample);
            let mut left_det = stream::substream(seed, tag, k, Purpose::LeftDetection);
            let mut right_det = stream::substream(seed, tag, k, Purpose::RightDetection);
            let mut s = CoincidenceStats::default();
            for _ in 0..len {
                let lambda = sample_sphere(&mut hidden);
                let (l_up, l_p) = m.left.respond(&lambda, a);
                let (r_up, r_p) = m.right.respond(&lambda, b);
                let l_hit = left_det.gen::<f64>() < l_p;
                let r_hit = right_det.gen::<f64>() < r_p;
                let li = if !l_hit { NULL } else if l_up { UP } else { DOWN };
                let ri = if !r_hit { NULL } else if r_up { UP } else { DOWN };
                s.pairs += 1;
                s.left_detections += l_hit as u64;
                s.right_detections += r_hit as u64;
                s.coincidences += (l_hit && r_hit) as u64;
                s.counts[li][ri] += 1;
            }
            s
        })
        .reduce(CoincidenceStats::default, CoincidenceStats::merge);
    Ok(stats)
}

#[derive(Debug, Clone)]
pub struct LoopholeReport {
    pub geometry: Geometry<f64>,
    /// Indexed `[i][j]` for settings `(a_i, b_j)`.
    pub stats: [[CoincidenceStats; 2]; 2],
    /// Denominator: all emitted pairs.
    pub raw_table: EprConditionalTable<f64>,
    pub raw_report: InequalityReport<f64>,
    /// Denominator: coincidences. `None` if some setting pair had none.
    pub post_table: Option<EprConditionalTable<f64>>,
    pub post_report: Option<InequalityReport<f64>>,
}

impl LoopholeReport {
    pub fn total_pairs(&self) -> u64 {
        self.stats.iter().flatten().map(|s| s.pairs).sum()
    }

    pub fn coincidence_rate(&self) -> f64 {
        self.stats.iter().flatten().map(|s| s.coincidences).sum::<u64>() as f64 / self.total_pairs() as f64
    }

    pub fn to_json(&self) -> Value {
        let dir = |d: &Direction<f64>| json!(d.components());
        json!({
            "geometry": {
                "a": [dir(&self.geometry.a[0]), dir(&self.geometry.a[1])],
                "b": [dir(&self.geometry.b[0]), dir(&self.geometry.b[1])],
            },
            "pairs": self.total_pairs(),
            "coincidence_rate": self.coincidence_rate(),
            "settings": self.stats.iter().enumerate().flat_map(|(i, row)| row.iter().enumerate().map(move |(j, s)| {
                let mut v = s.to_json();
                v["setting"] = json!(format!("a{}b{}", i + 1, j + 1));
                v
            })).collect::<Vec<_>>(),
            "raw": {
                "table": self.raw_table.to_json(),
                "bell_clauser_horne": self.raw_report.to_json(),
            },
            "post_selected": match (&self.post_table, &self.post_report) {
                (Some(t), Some(r)) => json!({ "table": t.to_json(), "bell_clauser_horne": r.to_json() }),
                _ => Value::Null,
            },
        })
    }
}

/// Runs the four setting pairs (`pairs / 4` each, remainder to the first
/// ones) and evaluates Bell–Clauser–Horne on the raw and the
/// post-selected conditional tables.
pub fn loophole_report(m: &FineModel, geometry: &Geometry<f64>, pairs: u64, seed: u64) -> Result<LoopholeReport, FineError> {
    if pairs < 4 {
        return Err(FineError::TooFewPairs { min: 4, got: pairs });
    }
    let mut stats = [[CoincidenceStats::default(); 2]; 2];
    for (k, (i, j)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let n = pairs / 4 + u64::from((k as u64) < pairs % 4);
        stats[i][j] = run_tagged(m, &geometry.a[i], &geometry.b[j], n, seed, 1 + k as u64)?;
    }
    let raw_table = table_from(&stats, |s| s.pairs, |s, side| match side {
        Side::Left => s.counts[UP].iter().sum(),
        Side::Right => s.counts.iter().map(|r| r[UP]).sum(),
        Side::Joint => s.counts[UP][UP],
    })
    .expect("every setting pair has at least one emission");
    let post_table = table_from(&stats, |s| s.coincidences, |s, side| match side {
        Side::Left => s.counts[UP][UP] + s.counts[UP][DOWN],
        Side::Right => s.counts[UP][UP] + s.counts[DOWN][UP],
        Side::Joint => s.counts[UP][UP],
    });
    Ok(LoopholeReport {
        geometry: *geometry,
        stats,
        raw_report: eval_bell_clauser_horne(&raw_table),
        post_report: post_table.as_ref().map(eval_bell_clauser_horne),
        raw_table,
        post_table,
    })
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
    Joint,
}

fn table_from(
    stats: &[[CoincidenceStats; 2]; 2],
    den: impl Fn(&CoincidenceStats) -> u64,
    num: impl Fn(&CoincidenceStats, Side) -> u64,
) -> Option<EprConditionalTable<f64>> {
    let frac = |n: u64, d: u64| (d > 0).then(|| n as f64 / d as f64);
    let left = |i: usize| {
        frac(
            stats[i].iter().map(|s| num(s, Side::Left)).sum(),
            stats[i].iter().map(&den).sum(),
        )
    };
    let right = |j: usize| {
        frac(
            stats.iter().map(|r| num(&r[j], Side::Right)).sum(),
            stats.iter().map(|r| den(&r[j])).sum(),
        )
    };
    let joint = |i: usize, j: usize| frac(num(&stats[i][j], Side::Joint), den(&stats[i][j]));
    Some(EprConditionalTable {
        left: [left(0)?, left(1)?],
        right: [right(0)?, right(1)?],
        joint: [[joint(0, 0)?, joint(0, 1)?], [joint(1, 0)?, joint(1, 1)?]],
    })
}

/// Post-selected `p(up, up)` at one angle between `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRow {
    pub degrees: f64,
    pub pairs: u64,
    pub coincidences: u64,
    pub post_selected_up_up: Option<f64>,
    pub quantum_up_up: f64,
}

/// `a = z`, `b` rotated by each angle in the x–z plane.
pub fn angle_scan(m: &FineModel, degrees: &[f64], pairs: u64, seed: u64) -> Result<Vec<AngleRow>, FineError> {
    degrees
        .par_iter()
        .enumerate()
        .map(|(k, &deg)| {
            let s = run_tagged(m, &Direction::z(), &Direction::in_plane_degrees(deg), pairs, seed, 100 + k as u64)?;
            Ok(AngleRow {
                degrees: deg,
                pairs: s.pairs,
                coincidences: s.coincidences,
                post_selected_up_up: s.post_selected().map(|p| p[2]),
                quantum_up_up: singlet_joint_up_closed_form(deg.to_radians()),
            })
        })
        .collect()
}

pub fn angle_scan_csv(rows: &[AngleRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["degrees", "pairs", "coincidences", "post_selected_up_up", "quantum_up_up"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            format!("{}", r.degrees),
            r.pairs.to_string(),
            r.coincidences.to_string(),
            r.post_selected_up_up.map_or(String::new(), |p| format!("{p:.6}")),
            format!("{:.6}", r.quantum_up_up),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII")
}
