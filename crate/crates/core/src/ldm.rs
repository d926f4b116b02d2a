//! Local deterministic hidden-variable worlds with finite parameter spaces.
//!
//! A run is fixed by three parameters: `μ` (left region), `λ` (shared past)
//! and `ν` (right region). Left events depend on `(μ, λ)`, right events on
//! `(λ, ν)`. Eight 0/1 response tables say which of the settings `a₁, a₂,
//! b₁, b₂` is chosen and which of the outcomes `A₁, A₂, B₁, B₂` occurs.
//!
//! The measure over `M × L × N` is normally the product `p(μ)p(λ)p(ν)`. A
//! fully specified joint measure is also accepted so that correlated sources
//! can be modelled; screening-off and parameter independence can then fail.
//!
//! Table layout: left tables are indexed `[μ][λ]`, right tables `[λ][ν]`.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::inequalities::EprConditionalTable;
use crate::polytope::{enumerate_vertices, IndexPairSet};
use crate::qprob::{Geometry, QprobError};
use crate::scalar::{scalar_from_json, Scalar};
use crate::simplex::{LpOutcome, StandardLp};
use crate::stream::{self, Purpose};
use crate::Rational;

/// Slack for distribution sums and the screening/independence checks.
pub const PROB_TOL: f64 = 1e-12;
pub const DEFAULT_SIZE: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdmError {
    #[error("parameter space {0} is empty")]
    EmptySpace(&'static str),
    #[error("distribution {name} has a negative or non-finite weight at index {index}")]
    BadWeight { name: &'static str, index: usize },
    #[error("distribution {name} sums to {sum}, not 1")]
    NotNormalized { name: &'static str, sum: String },
    #[error("table {name} should be {rows}x{cols}")]
    TableShape { name: &'static str, rows: usize, cols: usize },
    #[error("table {name} has a non 0/1 entry at [{row}][{col}]")]
    NotBinary { name: &'static str, row: usize, col: usize },
    #[error("{wing} setting at [{row}][{col}] is not exactly one of the two settings")]
    SettingNotTotal { wing: &'static str, row: usize, col: usize },
    #[error("outcome {name} occurs at [{row}][{col}] without its setting")]
    OutcomeWithoutSetting { name: &'static str, row: usize, col: usize },
    #[error("no-conspiracy is declared but setting {name} depends on lambda at [{row}][{col}]")]
    SettingDependsOnLambda { name: &'static str, row: usize, col: usize },
    #[error("malformed model JSON: {0}")]
    Json(String),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Quantum(#[from] QprobError),
}

/// 0/1 response table.
pub type Table = Vec<Vec<u8>>;

#[derive(Debug, Clone, PartialEq)]
pub enum Measure<S> {
    Product { mu: Vec<S>, lambda: Vec<S>, nu: Vec<S> },
    /// Weights indexed `(μ · |L| + λ) · |N| + ν`.
    Joint { sizes: [usize; 3], weights: Vec<S> },
}

impl<S: Scalar> Measure<S> {
    pub fn sizes(&self) -> [usize; 3] {
        match self {
            Measure::Product { mu, lambda, nu } => [mu.len(), lambda.len(), nu.len()],
            Measure::Joint { sizes, .. } => *sizes,
        }
    }

    pub fn weight(&self, m: usize, l: usize, n: usize) -> S {
        match self {
            Measure::Product { mu, lambda, nu } => mu[m].clone() * lambda[l].clone() * nu[n].clone(),
            Measure::Joint { sizes, weights } => weights[(m * sizes[1] + l) * sizes[2] + n].clone(),
        }
    }

    pub fn lambda_marginal(&self) -> Vec<S> {
        match self {
            Measure::Product { lambda, .. } => lambda.clone(),
            Measure::Joint { sizes, .. } => {
                let [sm, sl, sn] = *sizes;
                (0..sl)
                    .map(|l| {
                        let mut acc = S::zero();
                        for m in 0..sm {
                            for n in 0..sn {
                                acc = acc + self.weight(m, l, n);
                            }
                        }
                        acc
                    })
                    .collect()
            }
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(self, Measure::Product { .. })
    }

    fn validate(&self) -> Result<(), LdmError> {
        let check = |name: &'static str, w: &[S]| -> Result<(), LdmError> {
            if w.is_empty() {
                return Err(LdmError::EmptySpace(name));
            }
            for (index, v) in w.iter().enumerate() {
                if v.is_negative() || (!S::EXACT && !v.to_f64_lossy().is_finite()) {
                    return Err(LdmError::BadWeight { name, index });
                }
            }
            let sum = w.iter().fold(S::zero(), |a, b| a + b.clone());
            if (sum.clone() - S::one()).abs() > S::tol(PROB_TOL) {
                return Err(LdmError::NotNormalized { name, sum: sum.to_string() });
            }
            Ok(())
        };
        match self {
            Measure::Product { mu, lambda, nu } => {
                check("mu", mu)?;
                check("lambda", lambda)?;
                check("nu", nu)
            }
            Measure::Joint { sizes, weights } => {
                if sizes.contains(&0) {
                    return Err(LdmError::EmptySpace("joint"));
                }
                if weights.len() != sizes.iter().product::<usize>() {
                    return Err(LdmError::Json(format!(
                        "joint measure needs {} weights, got {}",
                        sizes.iter().product::<usize>(),
                        weights.len()
                    )));
                }
                check("joint", weights)
            }
        }
    }
}

/// Finite LDM world.
#[derive(Debug, Clone, PartialEq)]
pub struct LdmModel<S> {
    measure: Measure<S>,
    /// `u^{A_i}[μ][λ]`
    left_outcome: [Table; 2],
    /// `u^{a_i}[μ][λ]`
    left_setting: [Table; 2],
    /// `u^{B_j}[λ][ν]`
    right_outcome: [Table; 2],
    /// `u^{b_j}[λ][ν]`
    right_setting: [Table; 2],
    no_conspiracy: bool,
}

const LEFT_OUT: [&str; 2] = ["u_A1", "u_A2"];
const LEFT_SET: [&str; 2] = ["u_a1", "u_a2"];
const RIGHT_OUT: [&str; 2] = ["u_B1", "u_B2"];
const RIGHT_SET: [&str; 2] = ["u_b1", "u_b2"];

impl<S: Scalar> LdmModel<S> {
    pub fn new(
        measure: Measure<S>,
        left_outcome: [Table; 2],
        left_setting: [Table; 2],
        right_outcome: [Table; 2],
        right_setting: [Table; 2],
        no_conspiracy: bool,
    ) -> Result<Self, LdmError> {
        let model = Self {
            measure,
            left_outcome,
            left_setting,
            right_outcome,
            right_setting,
            no_conspiracy,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), LdmError> {
        self.measure.validate()?;
        let [sm, sl, sn] = self.measure.sizes();
        let shape = |name: &'static str, t: &Table, rows: usize, cols: usize| -> Result<(), LdmError> {
            if t.len() != rows || t.iter().any(|r| r.len() != cols) {
                return Err(LdmError::TableShape { name, rows, cols });
            }
            for (row, r) in t.iter().enumerate() {
                if let Some(col) = r.iter().position(|&v| v > 1) {
                    return Err(LdmError::NotBinary { name, row, col });
                }
            }
            Ok(())
        };
        for i in 0..2 {
            shape(LEFT_OUT[i], &self.left_outcome[i], sm, sl)?;
            shape(LEFT_SET[i], &self.left_setting[i], sm, sl)?;
            shape(RIGHT_OUT[i], &self.right_outcome[i], sl, sn)?;
            shape(RIGHT_SET[i], &self.right_setting[i], sl, sn)?;
        }
        let wing_check = |wing: &'static str,
                          out: &[Table; 2],
                          set: &[Table; 2],
                          out_names: [&'static str; 2],
                          rows: usize,
                          cols: usize|
         -> Result<(), LdmError> {
            for row in 0..rows {
                for col in 0..cols {
                    if set[0][row][col] + set[1][row][col] != 1 {
                        return Err(LdmError::SettingNotTotal { wing, row, col });
                    }
                    for i in 0..2 {
                        if out[i][row][col] == 1 && set[i][row][col] == 0 {
                            return Err(LdmError::OutcomeWithoutSetting { name: out_names[i], row, col });
                        }
                    }
                }
            }
            Ok(())
        };
        wing_check("left", &self.left_outcome, &self.left_setting, LEFT_OUT, sm, sl)?;
        wing_check("right", &self.right_outcome, &self.right_setting, RIGHT_OUT, sl, sn)?;
        if self.no_conspiracy {
            for i in 0..2 {
                for m in 0..sm {
                    for l in 1..sl {
                        if self.left_setting[i][m][l] != self.left_setting[i][m][0] {
                            return Err(LdmError::SettingDependsOnLambda { name: LEFT_SET[i], row: m, col: l });
                        }
                    }
                }
                for n in 0..sn {
                    for l in 1..sl {
                        if self.right_setting[i][l][n] != self.right_setting[i][0][n] {
                            return Err(LdmError::SettingDependsOnLambda { name: RIGHT_SET[i], row: l, col: n });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn measure(&self) -> &Measure<S> {
        &self.measure
    }

    pub fn sizes(&self) -> [usize; 3] {
        self.measure.sizes()
    }

    pub fn no_conspiracy(&self) -> bool {
        self.no_conspiracy
    }

    fn outcomes(&self, m: usize, l: usize, n: usize) -> RunOutcome {
        let mut r = RunOutcome::default();
        for i in 0..2 {
            r.a[i] = self.left_outcome[i][m][l] == 1;
            r.sa[i] = self.left_setting[i][m][l] == 1;
            r.b[i] = self.right_outcome[i][l][n] == 1;
            r.sb[i] = self.right_setting[i][l][n] == 1;
        }
        r
    }

    /// Distinct runs at a fixed λ with their total weight. Under a product
    /// measure the wings are binned separately over μ and ν first.
    fn weighted_runs(&self, l: usize) -> Vec<(RunOutcome, S)> {
        let [sm, _, sn] = self.sizes();
        match &self.measure {
            Measure::Product { mu, lambda, nu } => {
                if lambda[l].is_zero() {
                    return Vec::new();
                }
                let mut left: Vec<(RunOutcome, S)> = Vec::new();
                for (m, w) in mu.iter().enumerate().take(sm).filter(|(_, w)| !w.is_zero()) {
                    let mut r = RunOutcome::default();
                    for i in 0..2 {
                        r.a[i] = self.left_outcome[i][m][l] == 1;
                        r.sa[i] = self.left_setting[i][m][l] == 1;
                    }
                    bin(&mut left, r, |x, y| x.a == y.a && x.sa == y.sa, w);
                }
                let mut right: Vec<(RunOutcome, S)> = Vec::new();
                for (n, w) in nu.iter().enumerate().take(sn).filter(|(_, w)| !w.is_zero()) {
                    let mut r = RunOutcome::default();
                    for i in 0..2 {
                        r.b[i] = self.right_outcome[i][l][n] == 1;
                        r.sb[i] = self.right_setting[i][l][n] == 1;
                    }
                    bin(&mut right, r, |x, y| x.b == y.b && x.sb == y.sb, w);
                }
                let mut runs = Vec::with_capacity(left.len() * right.len());
                for (lr, lw) in &left {
                    let lw = lambda[l].clone() * lw.clone();
                    for (rr, rw) in &right {
                        let r = RunOutcome { a: lr.a, sa: lr.sa, b: rr.b, sb: rr.sb };
                        runs.push((r, lw.clone() * rw.clone()));
                    }
                }
                runs
            }
            Measure::Joint { .. } => {
                let mut runs = Vec::new();
                for m in 0..sm {
                    for n in 0..sn {
                        let w = self.measure.weight(m, l, n);
                        if !w.is_zero() {
                            runs.push((self.outcomes(m, l, n), w));
                        }
                    }
                }
                runs
            }
        }
    }

    pub fn to_json(&self) -> Value {
        let dist = |w: &[S]| w.iter().map(Scalar::to_json).collect::<Vec<_>>();
        let mut obj = serde_json::Map::new();
        match &self.measure {
            Measure::Product { mu, lambda, nu } => {
                obj.insert("mu".into(), json!(dist(mu)));
                obj.insert("lambda".into(), json!(dist(lambda)));
                obj.insert("nu".into(), json!(dist(nu)));
            }
            Measure::Joint { sizes, weights } => {
                obj.insert("joint".into(), json!({ "sizes": sizes, "weights": dist(weights) }));
            }
        }
        for i in 0..2 {
            obj.insert(LEFT_OUT[i].into(), json!(self.left_outcome[i]));
            obj.insert(LEFT_SET[i].into(), json!(self.left_setting[i]));
            obj.insert(RIGHT_OUT[i].into(), json!(self.right_outcome[i]));
            obj.insert(RIGHT_SET[i].into(), json!(self.right_setting[i]));
        }
        obj.insert("no_conspiracy".into(), json!(self.no_conspiracy));
        Value::Object(obj)
    }

    pub fn from_json(v: &Value) -> Result<Self, LdmError> {
        let obj = v.as_object().ok_or_else(|| LdmError::Json("model must be an object".into()))?;
        let dist = |key: &str, v: &Value| -> Result<Vec<S>, LdmError> {
            v.as_array()
                .ok_or_else(|| LdmError::Json(format!("{key} must be an array")))?
                .iter()
                .enumerate()
                .map(|(k, x)| scalar_from_json(x).ok_or_else(|| LdmError::Json(format!("{key}[{k}] is not a probability"))))
                .collect()
        };
        let get = |key: &str| obj.get(key).ok_or_else(|| LdmError::Json(format!("missing field {key}")));
        let measure = match obj.get("joint") {
            Some(j) => {
                let sizes: [usize; 3] = serde_json::from_value(j.get("sizes").cloned().unwrap_or(Value::Null))
                    .map_err(|e| LdmError::Json(format!("joint.sizes: {e}")))?;
                let weights = dist("joint.weights", j.get("weights").unwrap_or(&Value::Null))?;
                Measure::Joint { sizes, weights }
            }
            None => Measure::Product {
                mu: dist("mu", get("mu")?)?,
                lambda: dist("lambda", get("lambda")?)?,
                nu: dist("nu", get("nu")?)?,
            },
        };
        let table = |key: &str| -> Result<Table, LdmError> {
            serde_json::from_value(get(key)?.clone()).map_err(|e| LdmError::Json(format!("{key}: {e}")))
        };
        let no_conspiracy = get("no_conspiracy")?
            .as_bool()
            .ok_or_else(|| LdmError::Json("no_conspiracy must be a boolean".into()))?;
        Self::new(
            measure,
            [table(LEFT_OUT[0])?, table(LEFT_OUT[1])?],
            [table(LEFT_SET[0])?, table(LEFT_SET[1])?],
            [table(RIGHT_OUT[0])?, table(RIGHT_OUT[1])?],
            [table(RIGHT_SET[0])?, table(RIGHT_SET[1])?],
            no_conspiracy,
        )
    }

    pub fn to_f64(&self) -> LdmModel<f64> {
        let conv = |w: &[S]| w.iter().map(|v| v.to_f64_lossy()).collect::<Vec<f64>>();
        LdmModel {
            measure: match &self.measure {
                Measure::Product { mu, lambda, nu } => Measure::Product {
                    mu: conv(mu),
                    lambda: conv(lambda),
                    nu: conv(nu),
                },
                Measure::Joint { sizes, weights } => Measure::Joint { sizes: *sizes, weights: conv(weights) },
            },
            left_outcome: self.left_outcome.clone(),
            left_setting: self.left_setting.clone(),
            right_outcome: self.right_outcome.clone(),
            right_setting: self.right_setting.clone(),
            no_conspiracy: self.no_conspiracy,
        }
    }
}

fn prob_in<S: Scalar>(runs: &[(RunOutcome, S)], pred: impl Fn(&RunOutcome) -> bool) -> S {
    runs.iter().filter(|(r, _)| pred(r)).fold(S::zero(), |acc, (_, w)| acc + w.clone())
}

fn bin<S: Scalar>(bins: &mut Vec<(RunOutcome, S)>, r: RunOutcome, same: impl Fn(&RunOutcome, &RunOutcome) -> bool, w: &S) {
    match bins.iter_mut().find(|(b, _)| same(b, &r)) {
        Some((_, acc)) => *acc = acc.clone() + w.clone(),
        None => bins.push((r, w.clone())),
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct RunOutcome {
    a: [bool; 2],
    sa: [bool; 2],
    b: [bool; 2],
    sb: [bool; 2],
}

/// Probabilities (or relative frequencies) of the eight events and the
/// conjunctions needed for the conditional table.
#[derive(Debug, Clone, PartialEq)]
pub struct EventProbabilities<S> {
    /// `p(A_i)`
    pub left_outcome: [S; 2],
    /// `p(a_i)`
    pub left_setting: [S; 2],
    /// `p(B_j)`
    pub right_outcome: [S; 2],
    /// `p(b_j)`
    pub right_setting: [S; 2],
    /// `p(A_i ∧ B_j)`
    pub joint_outcome: [[S; 2]; 2],
    /// `p(a_i ∧ b_j)`
    pub joint_setting: [[S; 2]; 2],
}

/// Conditional probabilities; `None` where the conditioning setting has
/// probability zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalEntries<S> {
    pub left: [Option<S>; 2],
    pub right: [Option<S>; 2],
    pub joint: [[Option<S>; 2]; 2],
}

impl<S: Scalar> ConditionalEntries<S> {
    fn from_probabilities(p: &EventProbabilities<S>) -> Self {
        let div = |num: &S, den: &S| (!den.is_zero()).then(|| num.clone() / den.clone());
        Self {
            left: [0, 1].map(|i| div(&p.left_outcome[i], &p.left_setting[i])),
            right: [0, 1].map(|j| div(&p.right_outcome[j], &p.right_setting[j])),
            joint: [0, 1].map(|i| [0, 1].map(|j| div(&p.joint_outcome[i][j], &p.joint_setting[i][j]))),
        }
    }

    /// The full table, if every entry is defined.
    pub fn table(&self) -> Option<EprConditionalTable<S>> {
        let [l0, l1] = self.left.clone();
        let [r0, r1] = self.right.clone();
        let [[j00, j01], [j10, j11]] = self.joint.clone();
        Some(EprConditionalTable {
            left: [l0?, l1?],
            right: [r0?, r1?],
            joint: [[j00?, j01?], [j10?, j11?]],
        })
    }

    pub fn to_json(&self) -> Value {
        let e = |v: &Option<S>| v.as_ref().map_or(Value::Null, Scalar::to_json);
        json!({
            "p(A1|a1)": e(&self.left[0]),
            "p(A2|a2)": e(&self.left[1]),
            "p(B1|b1)": e(&self.right[0]),
            "p(B2|b2)": e(&self.right[1]),
            "p(A1B1|a1b1)": e(&self.joint[0][0]),
            "p(A1B2|a1b2)": e(&self.joint[0][1]),
            "p(A2B1|a2b1)": e(&self.joint[1][0]),
            "p(A2B2|a2b2)": e(&self.joint[1][1]),
        })
    }
}

/// Raw tallies from a simulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub trials: u64,
    pub left_outcome: [u64; 2],
    pub left_setting: [u64; 2],
    pub right_outcome: [u64; 2],
    pub right_setting: [u64; 2],
    pub joint_outcome: [[u64; 2]; 2],
    pub joint_setting: [[u64; 2]; 2],
}

impl EventCounts {
    fn merge(mut self, o: Self) -> Self {
        self.trials += o.trials;
        for i in 0..2 {
            self.left_outcome[i] += o.left_outcome[i];
            self.left_setting[i] += o.left_setting[i];
            self.right_outcome[i] += o.right_outcome[i];
            self.right_setting[i] += o.right_setting[i];
            for j in 0..2 {
                self.joint_outcome[i][j] += o.joint_outcome[i][j];
                self.joint_setting[i][j] += o.joint_setting[i][j];
            }
        }
        self
    }

    fn record(&mut self, r: &RunOutcome) {
        self.trials += 1;
        for i in 0..2 {
            self.left_outcome[i] += r.a[i] as u64;
            self.left_setting[i] += r.sa[i] as u64;
            self.right_outcome[i] += r.b[i] as u64;
            self.right_setting[i] += r.sb[i] as u64;
            for j in 0..2 {
                self.joint_outcome[i][j] += (r.a[i] && r.b[j]) as u64;
                self.joint_setting[i][j] += (r.sa[i] && r.sb[j]) as u64;
            }
        }
    }

    pub fn frequencies(&self) -> EventProbabilities<f64> {
        let n = self.trials as f64;
        let f = |c: u64| c as f64 / n;
        EventProbabilities {
            left_outcome: self.left_outcome.map(f),
            left_setting: self.left_setting.map(f),
            right_outcome: self.right_outcome.map(f),
            right_setting: self.right_setting.map(f),
            joint_outcome: self.joint_outcome.map(|r| r.map(f)),
            joint_setting: self.joint_setting.map(|r| r.map(f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats<S> {
    /// Present for simulations, absent for exact summation.
    pub counts: Option<EventCounts>,
    pub probabilities: EventProbabilities<S>,
    pub conditional: ConditionalEntries<S>,
}

impl<S: Scalar> EnsembleStats<S> {
    pub fn table(&self) -> Option<EprConditionalTable<S>> {
        self.conditional.table()
    }

    pub fn to_json(&self) -> Value {
        let p = &self.probabilities;
        let arr = |v: &[S; 2]| json!([v[0].to_json(), v[1].to_json()]);
        let mat = |v: &[[S; 2]; 2]| json!([arr(&v[0]), arr(&v[1])]);
        json!({
            "trials": self.counts.map(|c| c.trials),
            "probabilities": {
                "A": arr(&p.left_outcome),
                "a": arr(&p.left_setting),
                "B": arr(&p.right_outcome),
                "b": arr(&p.right_setting),
                "AB": mat(&p.joint_outcome),
                "ab": mat(&p.joint_setting),
            },
            "conditional": self.conditional.to_json(),
        })
    }
}

/// Exact summation over `M × L × N`.
pub fn exact_probabilities<S: Scalar>(m: &LdmModel<S>) -> EnsembleStats<S> {
    let sl = m.sizes()[1];
    let z = || S::zero();
    let mut p = EventProbabilities {
        left_outcome: [z(), z()],
        left_setting: [z(), z()],
        right_outcome: [z(), z()],
        right_setting: [z(), z()],
        joint_outcome: [[z(), z()], [z(), z()]],
        joint_setting: [[z(), z()], [z(), z()]],
    };
    let add = |acc: &mut S, w: &S, on: bool| {
        if on {
            *acc = acc.clone() + w.clone();
        }
    };
    for l in 0..sl {
        for (r, w) in m.weighted_runs(l) {
            for i in 0..2 {
                add(&mut p.left_outcome[i], &w, r.a[i]);
                add(&mut p.left_setting[i], &w, r.sa[i]);
                add(&mut p.right_outcome[i], &w, r.b[i]);
                add(&mut p.right_setting[i], &w, r.sb[i]);
                for j in 0..2 {
                    add(&mut p.joint_outcome[i][j], &w, r.a[i] && r.b[j]);
                    add(&mut p.joint_setting[i][j], &w, r.sa[i] && r.sb[j]);
                }
            }
        }
    }
    EnsembleStats {
        counts: None,
        conditional: ConditionalEntries::from_probabilities(&p),
        probabilities: p,
    }
}

/// I.i.d. sampling of `(μ, λ, ν)`; chunked and parallel, deterministic in `seed`.
pub fn simulate<S: Scalar>(m: &LdmModel<S>, trials: u64, seed: u64) -> Result<EnsembleStats<f64>, LdmError> {
    if trials == 0 {
        return Err(LdmError::NoTrials);
    }
    let fm = m.to_f64();
    let [_, sl, sn] = fm.sizes();
    let sampler = Sampler::new(&fm.measure);
    let counts = stream::chunks(trials)
        .map(|(k, len)| {
            let mut rng = stream::substream(seed, 0, k, Purpose::Sample);
            let mut c = EventCounts::default();
            for _ in 0..len {
                let (mu, l, n) = sampler.sample(&mut rng, sl, sn);
                c.record(&fm.outcomes(mu, l, n));
            }
            c
        })
        .reduce(EventCounts::default, EventCounts::merge);
    let probabilities = counts.frequencies();
    Ok(EnsembleStats {
        counts: Some(counts),
        conditional: ConditionalEntries::from_probabilities(&probabilities),
        probabilities,
    })
}

enum Sampler {
    Product(WeightedIndex<f64>, WeightedIndex<f64>, WeightedIndex<f64>),
    Joint(WeightedIndex<f64>),
}

impl Sampler {
    fn new(measure: &Measure<f64>) -> Self {
        let wi = |w: &[f64]| WeightedIndex::new(w).expect("validated distribution");
        match measure {
            Measure::Product { mu, lambda, nu } => Sampler::Product(wi(mu), wi(lambda), wi(nu)),
            Measure::Joint { weights, .. } => Sampler::Joint(wi(weights)),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, sl: usize, sn: usize) -> (usize, usize, usize) {
        match self {
            Sampler::Product(m, l, n) => (m.sample(rng), l.sample(rng), n.sample(rng)),
            Sampler::Joint(w) => {
                let k = w.sample(rng);
                (k / (sl * sn), (k / sn) % sl, k % sn)
            }
        }
    }
}

/// Outcome of one conditional-probability comparison at a fixed λ.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaCheck {
    Holds,
    Fails { lhs: f64, rhs: f64 },
    /// A conditioning event has probability zero at this λ.
    Undefined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaReport {
    pub lambda: usize,
    /// Keyed by the condition, e.g. `"A1B2"` or `"A1|a1b2"`.
    pub checks: BTreeMap<String, LambdaCheck>,
}

impl LambdaReport {
    pub fn holds(&self) -> bool {
        self.checks.values().all(|c| !matches!(c, LambdaCheck::Fails { .. }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition: &'static str,
    pub per_lambda: Vec<LambdaReport>,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.per_lambda.iter().all(LambdaReport::holds)
    }

    pub fn failing_lambdas(&self) -> Vec<usize> {
        self.per_lambda.iter().filter(|r| !r.holds()).map(|r| r.lambda).collect()
    }

    pub fn undefined_count(&self) -> usize {
        self.per_lambda
            .iter()
            .flat_map(|r| r.checks.values())
            .filter(|c| matches!(c, LambdaCheck::Undefined))
            .count()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "condition": self.condition,
            "holds": self.holds(),
            "failing_lambdas": self.failing_lambdas(),
            "undefined_checks": self.undefined_count(),
        })
    }
}

fn ratio<S: Scalar>(num: S, den: S) -> Option<S> {
    (!den.is_zero()).then(|| num / den)
}

fn compare<S: Scalar>(lhs: Option<S>, rhs: Option<S>) -> LambdaCheck {
    match (lhs, rhs) {
        (Some(l), Some(r)) => {
            if (l.clone() - r.clone()).abs() <= S::tol(PROB_TOL) {
                LambdaCheck::Holds
            } else {
                LambdaCheck::Fails {
                    lhs: l.to_f64_lossy(),
                    rhs: r.to_f64_lossy(),
                }
            }
        }
        _ => LambdaCheck::Undefined,
    }
}

/// `p(A_i ∧ B_j | a_i ∧ b_j ∧ λ) = p(A_i | a_i ∧ λ) · p(B_j | b_j ∧ λ)` for every λ.
///
/// Holds for every product measure, with or without λ-dependent settings;
/// a correlated joint measure can break it.
pub fn check_screening_off<S: Scalar>(m: &LdmModel<S>) -> ConditionReport {
    let [_, sl, _] = m.sizes();
    let per_lambda = (0..sl)
        .map(|l| {
            let runs = m.weighted_runs(l);
            let mut checks = BTreeMap::new();
            for i in 0..2 {
                for j in 0..2 {
                    let lhs = ratio(
                        prob_in(&runs, |r| r.a[i] && r.b[j] && r.sa[i] && r.sb[j]),
                        prob_in(&runs, |r| r.sa[i] && r.sb[j]),
                    );
                    let left = ratio(prob_in(&runs, |r| r.a[i] && r.sa[i]), prob_in(&runs, |r| r.sa[i]));
                    let right = ratio(prob_in(&runs, |r| r.b[j] && r.sb[j]), prob_in(&runs, |r| r.sb[j]));
                    let rhs = left.zip(right).map(|(a, b)| a * b);
                    checks.insert(format!("A{}B{}", i + 1, j + 1), compare(lhs, rhs));
                }
            }
            LambdaReport { lambda: l, checks }
        })
        .collect();
    ConditionReport { condition: "screening-off", per_lambda }
}

/// `p(A_i | a_i ∧ b_j ∧ λ) = p(A_i | a_i ∧ λ)` and the mirrored right-wing condition.
pub fn check_parameter_independence<S: Scalar>(m: &LdmModel<S>) -> ConditionReport {
    let [_, sl, _] = m.sizes();
    let per_lambda = (0..sl)
        .map(|l| {
            let runs = m.weighted_runs(l);
            let mut checks = BTreeMap::new();
            for i in 0..2 {
                for j in 0..2 {
                    let both = prob_in(&runs, |r| r.sa[i] && r.sb[j]);
                    let left_given_both = ratio(prob_in(&runs, |r| r.a[i] && r.sa[i] && r.sb[j]), both.clone());
                    let left_given_own = ratio(prob_in(&runs, |r| r.a[i] && r.sa[i]), prob_in(&runs, |r| r.sa[i]));
                    checks.insert(
                        format!("A{}|a{}b{}", i + 1, i + 1, j + 1),
                        compare(left_given_both, left_given_own),
                    );
                    let right_given_both = ratio(prob_in(&runs, |r| r.b[j] && r.sa[i] && r.sb[j]), both);
                    let right_given_own = ratio(prob_in(&runs, |r| r.b[j] && r.sb[j]), prob_in(&runs, |r| r.sb[j]));
                    checks.insert(
                        format!("B{}|a{}b{}", j + 1, i + 1, j + 1),
                        compare(right_given_both, right_given_own),
                    );
                }
            }
            LambdaReport { lambda: l, checks }
        })
        .collect();
    ConditionReport {
        condition: "parameter independence",
        per_lambda,
    }
}

/// `Σ_λ p(X | x ∧ λ) p(λ)` for every entry of the conditional table.
///
/// Equals the direct conditional table when settings do not depend on λ;
/// with λ-dependent settings it generally does not.
pub fn lambda_decomposition<S: Scalar>(m: &LdmModel<S>) -> Option<EprConditionalTable<S>> {
    let [_, sl, _] = m.sizes();
    let pl = m.measure.lambda_marginal();
    let per_lambda: Vec<_> = (0..sl).map(|l| m.weighted_runs(l)).collect();
    let sum = |num: &dyn Fn(&RunOutcome) -> bool, den: &dyn Fn(&RunOutcome) -> bool| -> Option<S> {
        let mut acc = S::zero();
        for (runs, w) in per_lambda.iter().zip(&pl) {
            if w.is_zero() {
                continue;
            }
            let c = ratio(prob_in(runs, num), prob_in(runs, den))?;
            acc = acc + c * w.clone();
        }
        Some(acc)
    };
    let left = [
        sum(&|r| r.a[0] && r.sa[0], &|r| r.sa[0])?,
        sum(&|r| r.a[1] && r.sa[1], &|r| r.sa[1])?,
    ];
    let right = [
        sum(&|r| r.b[0] && r.sb[0], &|r| r.sb[0])?,
        sum(&|r| r.b[1] && r.sb[1], &|r| r.sb[1])?,
    ];
    let joint_entry = |i: usize, j: usize| sum(&move |r| r.a[i] && r.b[j] && r.sa[i] && r.sb[j], &move |r| r.sa[i] && r.sb[j]);
    let joint = [
        [joint_entry(0, 0)?, joint_entry(0, 1)?],
        [joint_entry(1, 0)?, joint_entry(1, 1)?],
    ];
    Some(EprConditionalTable { left, right, joint })
}

/// `x₁y₁ + x₁y₂ + x₂y₂ − x₂y₁ − x₁ − y₂`, which lies in `[−1, 0]` on the unit cube.
pub fn elementary_form<S: Scalar>(x1: S, x2: S, y1: S, y2: S) -> S {
    x1.clone() * y1.clone() + x1.clone() * y2.clone() + x2.clone() * y2.clone() - x2 * y1 - x1 - y2
}

/// Joint distribution over three binary events, indexed `A + 2B + 4C`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleJoint<S>(pub [S; 8]);

#[derive(Debug, Clone, PartialEq)]
pub struct ReichenbachReport {
    /// `p(A∧B|C) = p(A|C)p(B|C)`; `None` if `p(C) = 0`.
    pub given_c: Option<bool>,
    /// `p(A∧B|¬C) = p(A|¬C)p(B|¬C)`; `None` if `p(C) = 1`.
    pub given_not_c: Option<bool>,
}

impl ReichenbachReport {
    /// Every defined side screens off.
    pub fn holds(&self) -> bool {
        self.given_c.unwrap_or(true) && self.given_not_c.unwrap_or(true)
    }
}

/// Whether `C` screens off the correlation between `A` and `B` on both `C` and `¬C`.
pub fn check_reichenbach<S: Scalar>(joint: &TripleJoint<S>) -> Result<ReichenbachReport, LdmError> {
    for (index, v) in joint.0.iter().enumerate() {
        if v.is_negative() {
            return Err(LdmError::BadWeight { name: "triple", index });
        }
    }
    let total = joint.0.iter().fold(S::zero(), |a, b| a + b.clone());
    if (total.clone() - S::one()).abs() > S::tol(PROB_TOL) {
        return Err(LdmError::NotNormalized { name: "triple", sum: total.to_string() });
    }
    let p = |f: &dyn Fn(bool, bool, bool) -> bool| {
        (0..8).filter(|&k| f(k & 1 == 1, k & 2 == 2, k & 4 == 4)).fold(S::zero(), |acc, k| acc + joint.0[k].clone())
    };
    let side = |c: bool| -> Option<bool> {
        let pc = p(&|_, _, cc| cc == c);
        if pc.is_zero() {
            return None;
        }
        let ab = p(&|a, b, cc| a && b && cc == c) / pc.clone();
        let a = p(&|a, _, cc| a && cc == c) / pc.clone();
        let b = p(&|_, b, cc| b && cc == c) / pc;
        Some((ab - a * b).abs() <= S::tol(PROB_TOL))
    };
    Ok(ReichenbachReport {
        given_c: side(true),
        given_not_c: side(false),
    })
}

/// Sizes `|M|, |L|, |N|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSizes {
    pub mu: usize,
    pub lambda: usize,
    pub nu: usize,
}

impl Default for ModelSizes {
    fn default() -> Self {
        Self {
            mu: DEFAULT_SIZE,
            lambda: DEFAULT_SIZE,
            nu: DEFAULT_SIZE,
        }
    }
}

fn dirichlet<S: Scalar, R: Rng>(rng: &mut R, k: usize) -> Vec<S> {
    // Exp(1) draws quantized to multiples of 1/1024, so each distribution
    // shares one small integer denominator and exact sums stay cheap.
    let raw: Vec<u64> = (0..k)
        .map(|_| {
            let u: f64 = rng.gen();
            (-(1.0 - u).ln() * 1024.0).round() as u64 + 1
        })
        .collect();
    let total = S::from_u64(raw.iter().sum()).expect("small integer");
    raw.into_iter().map(|v| S::from_u64(v).expect("small integer") / total.clone()).collect()
}

/// Uniformly random valid model with Dirichlet(1) distributions.
///
/// With `no_conspiracy` the left setting depends on μ alone and the right on
/// ν alone; otherwise both also vary with λ.
pub fn random_model<S: Scalar, R: Rng>(rng: &mut R, sizes: ModelSizes, no_conspiracy: bool) -> LdmModel<S> {
    let ModelSizes { mu: sm, lambda: sl, nu: sn } = sizes;
    let measure = Measure::Product {
        mu: dirichlet(rng, sm),
        lambda: dirichlet(rng, sl),
        nu: dirichlet(rng, sn),
    };
    // setting[row][col] in {0, 1}; `own` is the index that may vary (μ or ν).
    let mut settings = |rows: usize, cols: usize, own_is_row: bool| -> Vec<Vec<u8>> {
        let own_len = if own_is_row { rows } else { cols };
        let fixed: Vec<u8> = (0..own_len).map(|_| rng.gen_range(0..2)).collect();
        (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| {
                        if no_conspiracy {
                            fixed[if own_is_row { r } else { c }]
                        } else {
                            rng.gen_range(0..2)
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let left_choice = settings(sm, sl, true);
    let right_choice = settings(sl, sn, false);
    let split = |choice: &Vec<Vec<u8>>| -> [Table; 2] {
        [0u8, 1].map(|i| choice.iter().map(|r| r.iter().map(|&c| (c == i) as u8).collect()).collect())
    };
    let left_setting = split(&left_choice);
    let right_setting = split(&right_choice);
    let mut outcomes = |set: &[Table; 2]| -> [Table; 2] {
        [0, 1].map(|i| {
            set[i]
                .iter()
                .map(|r| r.iter().map(|&s| if s == 1 { rng.gen_range(0..2) } else { 0 }).collect())
                .collect()
        })
    };
    let left_outcome = outcomes(&left_setting);
    let right_outcome = outcomes(&right_setting);
    LdmModel::new(measure, left_outcome, left_setting, right_outcome, right_setting, no_conspiracy)
        .expect("random construction is valid")
}

fn constant(rows: usize, cols: usize, v: u8) -> Table {
    vec![vec![v; cols]; rows]
}

/// λ uniform on `{+, −}`; both wings always use setting 1; `A₁` fires on
/// `+` and `B₁` on `−`. The same-setting joint is zero.
pub fn anticorrelated_model() -> LdmModel<Rational> {
    let half = Rational::ratio(1, 2);
    let one = Rational::ratio(1, 1);
    LdmModel::new(
        Measure::Product {
            mu: vec![one.clone()],
            lambda: vec![half.clone(), half],
            nu: vec![one],
        },
        [vec![vec![1, 0]], constant(1, 2, 0)],
        [constant(1, 2, 1), constant(1, 2, 0)],
        [vec![vec![0], vec![1]], constant(2, 1, 0)],
        [constant(2, 1, 1), constant(2, 1, 0)],
        true,
    )
    .expect("valid")
}

/// λ picks the setting pair `(i, j)` uniformly, and outcomes are tuned per
/// pair. Violates the first Bell–Clauser–Horne line with value 1.
pub fn conspiracy_model() -> LdmModel<Rational> {
    // λ order: (1,1), (1,2), (2,1), (2,2)
    let pairs = [(0usize, 0usize), (0, 1), (1, 0), (1, 1)];
    let outcome_a = [true, true, true, true];
    let outcome_b = [true, true, false, true];
    let mut left_setting = [constant(1, 4, 0), constant(1, 4, 0)];
    let mut left_outcome = [constant(1, 4, 0), constant(1, 4, 0)];
    let mut right_setting = [constant(4, 1, 0), constant(4, 1, 0)];
    let mut right_outcome = [constant(4, 1, 0), constant(4, 1, 0)];
    for (l, &(i, j)) in pairs.iter().enumerate() {
        left_setting[i][0][l] = 1;
        left_outcome[i][0][l] = outcome_a[l] as u8;
        right_setting[j][l][0] = 1;
        right_outcome[j][l][0] = outcome_b[l] as u8;
    }
    LdmModel::new(
        Measure::Product {
            mu: vec![Rational::ratio(1, 1)],
            lambda: vec![Rational::ratio(1, 4); 4],
            nu: vec![Rational::ratio(1, 1)],
        },
        left_outcome,
        left_setting,
        right_outcome,
        right_setting,
        false,
    )
    .expect("valid")
}

/// A correlated joint measure at a single λ. Both wings share an outcome bit,
/// and that bit leans towards the right wing's setting bit (probability 3/4
/// of agreeing). Every setting pair occurs, screening-off and parameter
/// independence both fail, and `bch.1` reaches 1/4.
pub fn correlated_sources_model() -> LdmModel<Rational> {
    // μ = 2x + s and ν = 2y + t: x, y are the outcome bits, s, t the setting bits.
    let mut weights = Vec::with_capacity(16);
    for mu in 0..4 {
        for nu in 0..4 {
            let (x, y, t) = (mu >> 1, nu >> 1, nu & 1);
            let w = match (x == y, x == t) {
                (false, _) => Rational::ratio(0, 1),
                (true, true) => Rational::ratio(3, 16),
                (true, false) => Rational::ratio(1, 16),
            };
            weights.push(w);
        }
    }
    let column = |f: fn(usize) -> bool| -> Table { (0..4).map(|m| vec![f(m) as u8]).collect() };
    let row = |f: fn(usize) -> bool| -> Table { vec![(0..4).map(|n| f(n) as u8).collect()] };
    LdmModel::new(
        Measure::Joint { sizes: [4, 1, 4], weights },
        [column(|m| m == 2), column(|m| m == 3)],
        [column(|m| m & 1 == 0), column(|m| m & 1 == 1)],
        [row(|n| n == 2), row(|n| n == 3)],
        [row(|n| n & 1 == 0), row(|n| n & 1 == 1)],
        true,
    )
    .expect("valid")
}

/// Best no-conspiracy model for a quantum table, by L1 distance.
#[derive(Debug, Clone)]
pub struct TargetingResult {
    pub model: LdmModel<f64>,
    pub model_table: EprConditionalTable<f64>,
    pub quantum_table: EprConditionalTable<f64>,
    /// `Σ |model − quantum|` over the eight table entries.
    pub residual: f64,
}

/// Finds the no-conspiracy model whose conditional table is closest (L1) to
/// the singlet table for `geometry`.
///
/// Every such table is a mixture of the sixteen deterministic outcome
/// assignments, so the search is a linear program over those mixtures. The
/// resulting model has `|M| = |N| = 2` (μ and ν pick the setting) and one λ
/// per assignment.
pub fn build_quantum_targeting_model(geometry: &Geometry<f64>) -> Result<TargetingResult, LdmError> {
    let quantum_table = crate::inequalities::quantum_epr_table(geometry)?;
    let target = quantum_table.to_correlation_vector().flat();
    let set = IndexPairSet::clauser_horne();
    let vertices = enumerate_vertices(&set).expect("n = 4");
    let (nv, dim) = (vertices.len(), set.dimension());
    // Columns: λ_ε (nv), s⁺ (dim), s⁻ (dim).
    let cols = nv + 2 * dim;
    let mut a = Vec::with_capacity(dim + 1);
    for r in 0..dim {
        let mut row = vec![0.0; cols];
        for (k, v) in vertices.iter().enumerate() {
            row[k] = v.coords[r] as f64;
        }
        row[nv + r] = -1.0;
        row[nv + dim + r] = 1.0;
        a.push(row);
    }
    let mut ones = vec![0.0; cols];
    ones[..nv].iter_mut().for_each(|v| *v = 1.0);
    a.push(ones);
    let mut b = target.clone();
    b.push(1.0);
    let mut c = vec![0.0; cols];
    c[nv..].iter_mut().for_each(|v| *v = 1.0);
    let weights = match (StandardLp { a, b, c }).solve().map_err(|e| LdmError::Json(e.to_string()))? {
        LpOutcome::Optimal { x, .. } => {
            let w: Vec<f64> = x[..nv].iter().map(|v| v.max(0.0)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect::<Vec<_>>()
        }
        other => unreachable!("L1 projection onto a polytope is always solvable: {other:?}"),
    };
    let model = deterministic_mixture_model(&weights);
    let model_table = exact_probabilities(&model).table().expect("both settings have probability 1/2");
    let residual = model_table
        .to_correlation_vector()
        .flat()
        .iter()
        .zip(&target)
        .map(|(m, q)| (m - q).abs())
        .sum();
    Ok(TargetingResult {
        model,
        model_table,
        quantum_table,
        residual,
    })
}

/// μ, ν uniform on two values choosing the setting; λ ranges over the sixteen
/// assignments `ε = (A₁, A₂, B₁, B₂)` with the given weights.
pub fn deterministic_mixture_model(weights: &[f64]) -> LdmModel<f64> {
    let vertices = enumerate_vertices(&IndexPairSet::clauser_horne()).expect("n = 4");
    let sl = vertices.len();
    assert_eq!(weights.len(), sl);
    let left_setting = [0usize, 1].map(|i| (0..2).map(|m| vec![(m == i) as u8; sl]).collect::<Table>());
    let right_setting = [0usize, 1].map(|j| (0..sl).map(|_| (0..2).map(|n| (n == j) as u8).collect()).collect::<Table>());
    let left_outcome = [0usize, 1].map(|i| {
        (0..2)
            .map(|m| vertices.iter().map(|v| ((m == i) && v.epsilon[i] == 1) as u8).collect())
            .collect::<Table>()
    });
    let right_outcome = [0usize, 1].map(|j| {
        vertices
            .iter()
            .map(|v| (0..2).map(|n| ((n == j) && v.epsilon[2 + j] == 1) as u8).collect())
            .collect::<Table>()
    });
    LdmModel::new(
        Measure::Product {
            mu: vec![0.5, 0.5],
            lambda: weights.to_vec(),
            nu: vec![0.5, 0.5],
        },
        left_outcome,
        left_setting,
        right_outcome,
        right_setting,
        true,
    )
    .expect("valid construction")
}

/// Random valid no-conspiracy models until one has every setting with
/// positive probability, so that its conditional table is fully defined.
pub fn random_defined_model<S: Scalar, R: Rng>(rng: &mut R, sizes: ModelSizes, no_conspiracy: bool) -> (LdmModel<S>, EprConditionalTable<S>) {
    loop {
        let m = random_model::<S, R>(rng, sizes, no_conspiracy);
        if let Some(t) = exact_probabilities(&m).table() {
            return (m, t);
        }
    }
}

/// Runs `f` on many independently seeded models in parallel.
pub fn par_models<T: Send>(count: usize, seed: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..count as u64).into_par_iter().map(|k| f(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequalities::eval_bell_clauser_horne;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn singleton_model() -> LdmModel<Rational> {
        let one = vec![q(1, 1)];
        LdmModel::new(
            Measure::Product { mu: one.clone(), lambda: one.clone(), nu: one },
            [constant(1, 1, 1), constant(1, 1, 0)],
            [constant(1, 1, 1), constant(1, 1, 0)],
            [constant(1, 1, 1), constant(1, 1, 0)],
            [constant(1, 1, 1), constant(1, 1, 0)],
            true,
        )
        .unwrap()
    }

    #[test]
    fn singleton_joint_is_one() {
        let s = exact_probabilities(&singleton_model());
        assert_eq!(s.conditional.joint[0][0], Some(q(1, 1)));
        // a2 and b2 never happen
        assert_eq!(s.conditional.left[1], None);
        assert_eq!(s.conditional.joint[1][1], None);
        assert!(s.table().is_none());
        assert!(check_screening_off(&singleton_model()).holds());
        assert!(check_parameter_independence(&singleton_model()).holds());
    }

    #[test]
    fn anticorrelated_joint_is_zero() {
        let m = anticorrelated_model();
        let s = exact_probabilities(&m);
        assert_eq!(s.conditional.joint[0][0], Some(q(0, 1)));
        assert_eq!(s.conditional.left[0], Some(q(1, 2)));
        assert_eq!(s.conditional.right[0], Some(q(1, 2)));
        let sim = simulate(&m, 1_000_000, 3).unwrap();
        assert_eq!(sim.counts.unwrap().joint_outcome[0][0], 0);
        assert_eq!(sim.conditional.joint[0][0], Some(0.0));
    }

    #[test]
    fn validation_errors() {
        let one = vec![1.0];
        let base = |lo: [Table; 2], ls: [Table; 2], nc: bool, lambda: Vec<f64>| {
            let sl = lambda.len();
            LdmModel::new(
                Measure::Product { mu: one.clone(), lambda, nu: one.clone() },
                lo,
                ls,
                [constant(sl, 1, 0), constant(sl, 1, 0)],
                [constant(sl, 1, 1), constant(sl, 1, 0)],
                nc,
            )
        };
        assert!(matches!(
            base([constant(1, 1, 0), constant(1, 1, 1)], [constant(1, 1, 1), constant(1, 1, 0)], true, vec![1.0]),
            Err(LdmError::OutcomeWithoutSetting { name: "u_A2", .. })
        ));
        assert!(matches!(
            base([constant(1, 1, 0), constant(1, 1, 0)], [constant(1, 1, 1), constant(1, 1, 1)], true, vec![1.0]),
            Err(LdmError::SettingNotTotal { wing: "left", .. })
        ));
        assert!(matches!(
            base([constant(1, 1, 0), constant(1, 1, 0)], [constant(1, 1, 1), constant(1, 1, 0)], true, vec![0.5, 0.6]),
            Err(LdmError::TableShape { .. }) | Err(LdmError::NotNormalized { .. })
        ));
        assert!(matches!(
            base(
                [constant(1, 2, 0), constant(1, 2, 0)],
                [vec![vec![1, 0]], vec![vec![0, 1]]],
                true,
                vec![0.5, 0.5]
            ),
            Err(LdmError::SettingDependsOnLambda { name: "u_a1", .. })
        ));
        assert!(base(
            [constant(1, 2, 0), constant(1, 2, 0)],
            [vec![vec![1, 0]], vec![vec![0, 1]]],
            false,
            vec![0.5, 0.5]
        )
        .is_ok());
        assert!(matches!(
            base([constant(1, 1, 0), constant(1, 1, 0)], [constant(1, 1, 2), constant(1, 1, 0)], true, vec![1.0]),
            Err(LdmError::NotBinary { .. })
        ));
        assert!(matches!(
            base([constant(1, 1, 0), constant(1, 1, 0)], [constant(1, 1, 1), constant(1, 1, 0)], true, vec![-0.5, 1.5]),
            Err(LdmError::TableShape { .. }) | Err(LdmError::BadWeight { .. })
        ));
    }

    #[test]
    fn conspiracy_breaks_bell_ch() {
        let m = conspiracy_model();
        let t = exact_probabilities(&m).table().unwrap();
        assert_eq!(t.left, [q(1, 1), q(1, 1)]);
        assert_eq!(t.right, [q(1, 2), q(1, 1)]);
        let r = eval_bell_clauser_horne(&t);
        assert_eq!(r.line("bch.1").unwrap().margin, q(1, 1));
        // The per-λ conditions still hold under a product measure;
        // what fails is averaging over λ.
        assert!(check_screening_off(&m).holds());
        assert!(check_parameter_independence(&m).holds());
        assert!(check_screening_off(&m).undefined_count() > 0);
        assert_ne!(lambda_decomposition(&m), Some(t));
    }

    #[test]
    fn correlated_sources_fail_both_conditions() {
        let m = correlated_sources_model();
        let so = check_screening_off(&m);
        assert_eq!(so.failing_lambdas(), vec![0]);
        match &so.per_lambda[0].checks["A1B1"] {
            LambdaCheck::Fails { lhs, rhs } => {
                assert_eq!(*lhs, 0.25);
                assert_eq!(*rhs, 0.125);
            }
            other => panic!("{other:?}"),
        }
        let pi = check_parameter_independence(&m);
        assert_eq!(pi.failing_lambdas(), vec![0]);
        let t = exact_probabilities(&m).table().expect("every setting pair occurs");
        let bch = eval_bell_clauser_horne(&t);
        assert_eq!(bch.lines[0].margin, q(1, 4));
        assert!(matches!(pi.per_lambda[0].checks["A1|a1b1"], LambdaCheck::Fails { .. }));
    }

    #[test]
    fn reichenbach_examples() {
        // A, B independent fair coins given C and given ¬C.
        let quarter_half = q(1, 8);
        let r = check_reichenbach(&TripleJoint([(); 8].map(|_| quarter_half.clone()))).unwrap();
        assert_eq!(r, ReichenbachReport { given_c: Some(true), given_not_c: Some(true) });

        // A = B perfectly correlated, C independent coin: no screening.
        let mut w = [(); 8].map(|_| q(0, 1));
        for c in 0..2 {
            w[4 * c] = q(1, 4); // A=0,B=0
            w[3 + 4 * c] = q(1, 4); // A=1,B=1
        }
        let r = check_reichenbach(&TripleJoint(w)).unwrap();
        assert_eq!(r.given_c, Some(false));
        assert!(!r.holds());

        // C = A: conditioning on C fixes A, so C trivially screens off.
        let mut w = [(); 8].map(|_| q(0, 1));
        w[0] = q(1, 2); // A=0,B=0,C=0
        w[1 + 2 + 4] = q(1, 2); // A=1,B=1,C=1
        assert!(check_reichenbach(&TripleJoint(w)).unwrap().holds());

        // p(C) = 0: the C side is vacuous.
        let mut w = [(); 8].map(|_| q(0, 1));
        w[0] = q(1, 4);
        w[1] = q(1, 4);
        w[2] = q(1, 4);
        w[3] = q(1, 4);
        let r = check_reichenbach(&TripleJoint(w)).unwrap();
        assert_eq!(r.given_c, None);
        assert_eq!(r.given_not_c, Some(true));

        assert!(check_reichenbach(&TripleJoint([0.2; 8])).is_err());
    }

    #[test]
    fn reichenbach_product_with_independent_c() {
        // p(A)=0.3, p(B)=0.6, p(C)=0.2, all independent.
        let pa = [0.7, 0.3];
        let pb = [0.4, 0.6];
        let pc = [0.8, 0.2];
        let w = std::array::from_fn(|k| pa[k & 1] * pb[(k >> 1) & 1] * pc[(k >> 2) & 1]);
        assert!(check_reichenbach(&TripleJoint(w)).unwrap().holds());
    }

    #[test]
    fn json_round_trip() {
        for m in [conspiracy_model(), correlated_sources_model(), anticorrelated_model()] {
            let back = LdmModel::<Rational>::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
        }
        let mut v = anticorrelated_model().to_json();
        v["u_a1"] = json!([[1, 1]]);
        v["u_a2"] = json!([[1, 0]]);
        assert!(LdmModel::<f64>::from_json(&v).is_err());
        assert!(matches!(LdmModel::<f64>::from_json(&json!({})), Err(LdmError::Json(_))));
    }

    #[test]
    fn simulate_is_deterministic_and_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (m, _) = random_defined_model::<f64, _>(&mut rng, ModelSizes { mu: 4, lambda: 5, nu: 3 }, true);
        let a = simulate(&m, 200_000, 42).unwrap();
        let b = simulate(&m, 200_000, 42).unwrap();
        assert_eq!(a, b);
        let exact = exact_probabilities(&m).probabilities;
        let n = 200_000f64;
        let check = |f: f64, p: f64| assert!((f - p).abs() <= 5.0 * (p * (1.0 - p) / n).sqrt() + 1e-12, "{f} vs {p}");
        for i in 0..2 {
            check(a.probabilities.left_outcome[i], exact.left_outcome[i]);
            check(a.probabilities.right_setting[i], exact.right_setting[i]);
            for j in 0..2 {
                check(a.probabilities.joint_outcome[i][j], exact.joint_outcome[i][j]);
            }
        }
        assert_eq!(simulate(&m, 0, 1), Err(LdmError::NoTrials));
    }

    #[test]
    fn targeting_model() {
        let r = build_quantum_targeting_model(&Geometry::violating()).unwrap();
        assert!(r.residual >= 0.125 - 1e-9, "{}", r.residual);
        assert!(eval_bell_clauser_horne(&r.model_table).satisfied());
        let aligned = build_quantum_targeting_model(&Geometry::aligned()).unwrap();
        assert!(aligned.residual < 1e-9);
        let ortho = build_quantum_targeting_model(&Geometry::orthogonal()).unwrap();
        assert!(ortho.residual < 1e-9);
    }

    #[test]
    fn exact_random_models_satisfy_bell_ch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (m, t) = random_defined_model::<Rational, _>(&mut rng, ModelSizes { mu: 3, lambda: 4, nu: 3 }, true);
            assert!(eval_bell_clauser_horne(&t).satisfied());
            assert_eq!(lambda_decomposition(&m).unwrap(), t);
        }
    }
}
