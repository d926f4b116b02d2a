//! Closed-form inequality systems.
//!
//! Every inequality is stored as a chain `t₀ ≤ t₁ ≤ … ≤ t_k` of evaluated
//! terms. Its margin is `max_k (t_k − t_{k+1})`: positive means violated by
//! that amount, zero or negative means satisfied.
//!
//! Three systems act on absolute probabilities (correlation vectors):
//! the `n = 2` box, the Bell–Pitowsky system on `c(3, all pairs)` and the
//! Clauser–Horne–Pitowsky system on `c(4, {13, 14, 23, 24})`. The fourth,
//! Bell–Clauser–Horne, acts on conditional probabilities.

use std::fmt::Write as _;

use thiserror::Error;

use crate::polytope::{CorrelationVector, IndexPairSet};
use crate::qprob::{quantum_prob, singlet_state, up_event, Geometry, QprobError, Wing};
use crate::scalar::{Real, Scalar};

/// Arithmetic slack when deciding whether a float margin is nonpositive.
pub const MARGIN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InequalityError {
    #[error("{system} needs n = {n} with S = {expected}, got n = {got_n} with S = {got:?}")]
    Shape {
        system: &'static str,
        n: usize,
        expected: &'static str,
        got_n: usize,
        got: Vec<(usize, usize)>,
    },
    #[error("table entry {name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityLine<S> {
    pub id: String,
    /// Human-readable chain, e.g. `-1 <= p13+p14+p24-p23-p1-p4 <= 0`.
    pub expression: String,
    pub chain: Vec<S>,
    pub margin: S,
    pub satisfied: bool,
}

impl<S: Scalar> InequalityLine<S> {
    pub fn new(id: impl Into<String>, expression: impl Into<String>, chain: Vec<S>) -> Self {
        assert!(chain.len() >= 2, "a chain needs at least two terms");
        let margin = chain
            .windows(2)
            .map(|w| w[0].clone() - w[1].clone())
            .reduce(S::max_of)
            .expect("non-empty");
        let satisfied = margin <= S::tol(MARGIN_TOL);
        Self {
            id: id.into(),
            expression: expression.into(),
            chain,
            margin,
            satisfied,
        }
    }

    /// First term of the chain that is not a numeric literal.
    pub fn value(&self) -> &S {
        let k = self
            .expression
            .split(" <= ")
            .position(|t| t.trim().parse::<f64>().is_err())
            .unwrap_or(0);
        &self.chain[k.min(self.chain.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport<S> {
    pub system: String,
    pub lines: Vec<InequalityLine<S>>,
}

impl<S: Scalar> InequalityReport<S> {
    pub fn satisfied(&self) -> bool {
        self.lines.iter().all(|l| l.satisfied)
    }

    pub fn violated(&self) -> impl Iterator<Item = &InequalityLine<S>> {
        self.lines.iter().filter(|l| !l.satisfied)
    }

    pub fn line(&self, id: &str) -> Option<&InequalityLine<S>> {
        self.lines.iter().find(|l| l.id == id)
    }

    /// Largest margin over all lines.
    /// Every line holds up to `tol` slack.
    pub fn satisfied_within(&self, tol: S) -> bool {
        self.lines.iter().all(|l| l.margin <= tol)
    }

    pub fn max_margin(&self) -> S {
        self.lines.iter().map(|l| l.margin.clone()).reduce(S::max_of).unwrap_or_else(S::zero)
    }

    /// Smallest `|margin|`, i.e. distance of the verdict from flipping.
    pub fn min_abs_margin(&self) -> S {
        self.lines.iter().map(|l| l.margin.abs()).reduce(S::min_of).unwrap_or_else(S::zero)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "system": self.system,
            "satisfied": self.satisfied(),
            "max_margin": self.max_margin().to_json(),
            "lines": self.lines.iter().map(|l| serde_json::json!({
                "id": l.id,
                "expression": l.expression,
                "value": l.value().to_json(),
                "chain": l.chain.iter().map(Scalar::to_json).collect::<Vec<_>>(),
                "margin": l.margin.to_json(),
                "satisfied": l.satisfied,
            })).collect::<Vec<_>>(),
        })
    }

    /// Fixed-width text table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.system);
        let width = self.lines.iter().map(|l| l.expression.len()).max().unwrap_or(10).max(10);
        let _ = writeln!(out, "{:<8} {:<width$} {:>14} {:>14}  status", "id", "inequality", "value", "margin");
        for l in &self.lines {
            let status = if l.satisfied { "SATISFIED" } else { "VIOLATED" };
            let _ = writeln!(
                out,
                "{:<8} {:<width$} {:>14} {:>14}  {}",
                l.id,
                l.expression,
                format_scalar(l.value()),
                format_scalar(&l.margin),
                status
            );
        }
        let verdict = if self.satisfied() {
            "SATISFIED".to_string()
        } else {
            format!("VIOLATED, margin {}", format_scalar(&self.max_margin()))
        };
        let _ = writeln!(out, "verdict: {verdict}");
        out
    }
}

/// Floats get 6 decimals; exact values print as fractions.
pub fn format_scalar<S: Scalar>(v: &S) -> String {
    if S::EXACT {
        v.to_string()
    } else {
        let f = v.to_f64_lossy();
        // Avoid printing -0.000000.
        let f = if f.abs() < 5e-7 { 0.0 } else { f };
        format!("{f:.6}")
    }
}

fn expect_shape(
    p: &CorrelationVector<impl Scalar>,
    system: &'static str,
    expected_set: &IndexPairSet,
    expected: &'static str,
) -> Result<(), InequalityError> {
    if p.set() == expected_set {
        Ok(())
    } else {
        Err(InequalityError::Shape {
            system,
            n: expected_set.n(),
            expected,
            got_n: p.n(),
            got: p.set().pairs().to_vec(),
        })
    }
}

fn pair<S: Scalar>(p: &CorrelationVector<S>, i: usize, j: usize) -> S {
    p.pair(i, j).expect("shape checked").clone()
}

fn single<S: Scalar>(p: &CorrelationVector<S>, i: usize) -> S {
    p.single(i).clone()
}

/// `0 ≤ p_ij ≤ p_i ≤ 1`, `0 ≤ p_ij ≤ p_j ≤ 1`, `p_i + p_j − p_ij ≤ 1`.
fn box_lines<S: Scalar>(p: &CorrelationVector<S>, i: usize, j: usize) -> Vec<InequalityLine<S>> {
    let pij = pair(p, i, j);
    let (pi, pj) = (single(p, i), single(p, j));
    vec![
        InequalityLine::new(
            format!("box{i}{j}.{i}"),
            format!("0 <= p{i}{j} <= p{i} <= 1"),
            vec![S::zero(), pij.clone(), pi.clone(), S::one()],
        ),
        InequalityLine::new(
            format!("box{i}{j}.{j}"),
            format!("0 <= p{i}{j} <= p{j} <= 1"),
            vec![S::zero(), pij.clone(), pj.clone(), S::one()],
        ),
        InequalityLine::new(
            format!("union{i}{j}"),
            format!("p{i}+p{j}-p{i}{j} <= 1"),
            vec![pi + pj - pij, S::one()],
        ),
    ]
}

/// `c(2, {(1,2)})`.
pub fn eval_n2<S: Scalar>(p: &CorrelationVector<S>) -> Result<InequalityReport<S>, InequalityError> {
    let set = IndexPairSet::new(2, vec![(1, 2)]).expect("valid");
    expect_shape(p, "n=2 system", &set, "{(1,2)}")?;
    Ok(InequalityReport {
        system: "n=2 correlation polytope".into(),
        lines: box_lines(p, 1, 2),
    })
}

/// Bell–Pitowsky system on `c(3, {(1,2),(1,3),(2,3)})`.
pub fn eval_bell_pitowsky<S: Scalar>(p: &CorrelationVector<S>) -> Result<InequalityReport<S>, InequalityError> {
    let set = IndexPairSet::all_pairs(3).expect("valid");
    expect_shape(p, "Bell-Pitowsky", &set, "{(1,2),(1,3),(2,3)}")?;
    let mut lines: Vec<_> = set.pairs().iter().flat_map(|&(i, j)| box_lines(p, i, j)).collect();
    let (p1, p2, p3) = (single(p, 1), single(p, 2), single(p, 3));
    let (p12, p13, p23) = (pair(p, 1, 2), pair(p, 1, 3), pair(p, 2, 3));
    lines.push(InequalityLine::new(
        "bp.sum",
        "p1+p2+p3-p12-p13-p23 <= 1",
        vec![p1.clone() + p2.clone() + p3.clone() - p12.clone() - p13.clone() - p23.clone(), S::one()],
    ));
    lines.push(InequalityLine::new(
        "bp.1",
        "0 <= p1-p12-p13+p23",
        vec![S::zero(), p1 - p12.clone() - p13.clone() + p23.clone()],
    ));
    lines.push(InequalityLine::new(
        "bp.2",
        "0 <= p2-p12-p23+p13",
        vec![S::zero(), p2 - p12.clone() - p23.clone() + p13.clone()],
    ));
    lines.push(InequalityLine::new(
        "bp.3",
        "0 <= p3-p13-p23+p12",
        vec![S::zero(), p3 - p13 - p23 + p12],
    ));
    Ok(InequalityReport {
        system: "Bell-Pitowsky".into(),
        lines,
    })
}

/// Clauser–Horne–Pitowsky system on `c(4, {(1,3),(1,4),(2,3),(2,4)})`:
/// twelve box lines and four two-sided lines.
pub fn eval_ch_pitowsky<S: Scalar>(p: &CorrelationVector<S>) -> Result<InequalityReport<S>, InequalityError> {
    let set = IndexPairSet::clauser_horne();
    expect_shape(p, "Clauser-Horne-Pitowsky", &set, "{(1,3),(1,4),(2,3),(2,4)}")?;
    let mut lines: Vec<_> = set.pairs().iter().flat_map(|&(i, j)| box_lines(p, i, j)).collect();
    let s = |i| single(p, i);
    let (p13, p14, p23, p24) = (pair(p, 1, 3), pair(p, 1, 4), pair(p, 2, 3), pair(p, 2, 4));
    let ch = [
        (
            "ch.1",
            "p13+p14+p24-p23-p1-p4",
            p13.clone() + p14.clone() + p24.clone() - p23.clone() - s(1) - s(4),
        ),
        (
            "ch.2",
            "p23+p24+p14-p13-p2-p4",
            p23.clone() + p24.clone() + p14.clone() - p13.clone() - s(2) - s(4),
        ),
        (
            "ch.3",
            "p14+p13+p23-p24-p1-p3",
            p14.clone() + p13.clone() + p23.clone() - p24.clone() - s(1) - s(3),
        ),
        ("ch.4", "p24+p23+p13-p14-p2-p3", p24 + p23 + p13 - p14 - s(2) - s(3)),
    ];
    for (id, expr, value) in ch {
        lines.push(InequalityLine::new(id, format!("-1 <= {expr} <= 0"), vec![-S::one(), value, S::zero()]));
    }
    Ok(InequalityReport {
        system: "Clauser-Horne-Pitowsky".into(),
        lines,
    })
}

/// Conditional probabilities of one run of the two-wing experiment:
/// `left[i] = p(A_i | a_i)`, `right[j] = p(B_j | b_j)` and
/// `joint[i][j] = p(A_i ∧ B_j | a_i ∧ b_j)` (0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct EprConditionalTable<S> {
    pub left: [S; 2],
    pub right: [S; 2],
    pub joint: [[S; 2]; 2],
}

const LEFT_NAMES: [&str; 2] = ["p(A1|a1)", "p(A2|a2)"];
const RIGHT_NAMES: [&str; 2] = ["p(B1|b1)", "p(B2|b2)"];
const JOINT_NAMES: [[&str; 2]; 2] = [
    ["p(A1B1|a1b1)", "p(A1B2|a1b2)"],
    ["p(A2B1|a2b1)", "p(A2B2|a2b2)"],
];

impl<S: Scalar> EprConditionalTable<S> {
    pub fn new(left: [S; 2], right: [S; 2], joint: [[S; 2]; 2]) -> Result<Self, InequalityError> {
        let table = Self { left, right, joint };
        for (name, v) in table.named_entries() {
            if v < S::zero() || v > S::one() {
                return Err(InequalityError::OutOfRange { name, value: v.to_string() });
            }
        }
        Ok(table)
    }

    pub fn named_entries(&self) -> Vec<(&'static str, S)> {
        let mut out = Vec::with_capacity(8);
        for i in 0..2 {
            out.push((LEFT_NAMES[i], self.left[i].clone()));
        }
        for j in 0..2 {
            out.push((RIGHT_NAMES[j], self.right[j].clone()));
        }
        for i in 0..2 {
            for j in 0..2 {
                out.push((JOINT_NAMES[i][j], self.joint[i][j].clone()));
            }
        }
        out
    }

    /// `(p1, p2, p3, p4, p13, p14, p23, p24)` with `X1 = A1, X2 = A2, X3 = B1, X4 = B2`.
    pub fn to_correlation_vector(&self) -> CorrelationVector<S> {
        CorrelationVector::from_flat(
            IndexPairSet::clauser_horne(),
            vec![
                self.left[0].clone(),
                self.left[1].clone(),
                self.right[0].clone(),
                self.right[1].clone(),
                self.joint[0][0].clone(),
                self.joint[0][1].clone(),
                self.joint[1][0].clone(),
                self.joint[1][1].clone(),
            ],
        )
        .expect("eight entries")
    }

    pub fn from_correlation_vector(p: &CorrelationVector<S>) -> Result<Self, InequalityError> {
        expect_shape(p, "conditional table", &IndexPairSet::clauser_horne(), "{(1,3),(1,4),(2,3),(2,4)}")?;
        Self::new(
            [single(p, 1), single(p, 2)],
            [single(p, 3), single(p, 4)],
            [[pair(p, 1, 3), pair(p, 1, 4)], [pair(p, 2, 3), pair(p, 2, 4)]],
        )
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> EprConditionalTable<T> {
        EprConditionalTable {
            left: [f(&self.left[0]), f(&self.left[1])],
            right: [f(&self.right[0]), f(&self.right[1])],
            joint: [
                [f(&self.joint[0][0]), f(&self.joint[0][1])],
                [f(&self.joint[1][0]), f(&self.joint[1][1])],
            ],
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.named_entries()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_json()))
                .collect(),
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.named_entries() {
            let _ = writeln!(out, "{k:<14} {:>14}", format_scalar(&v));
        }
        out
    }
}

/// The four Bell–Clauser–Horne inequalities, each `−1 ≤ … ≤ 0`.
pub fn eval_bell_clauser_horne<S: Scalar>(t: &EprConditionalTable<S>) -> InequalityReport<S> {
    let j = |i: usize, k: usize| t.joint[i - 1][k - 1].clone();
    let a = |i: usize| t.left[i - 1].clone();
    let b = |k: usize| t.right[k - 1].clone();
    let rows = [
        ("bch.1", "A1B1+A1B2+A2B2-A2B1-A1-B2", j(1, 1) + j(1, 2) + j(2, 2) - j(2, 1) - a(1) - b(2)),
        ("bch.2", "A2B1+A2B2+A1B2-A1B1-A2-B2", j(2, 1) + j(2, 2) + j(1, 2) - j(1, 1) - a(2) - b(2)),
        ("bch.3", "A1B2+A1B1+A2B1-A2B2-A1-B1", j(1, 2) + j(1, 1) + j(2, 1) - j(2, 2) - a(1) - b(1)),
        ("bch.4", "A2B2+A2B1+A1B1-A1B2-A2-B1", j(2, 2) + j(2, 1) + j(1, 1) - j(1, 2) - a(2) - b(1)),
    ];
    InequalityReport {
        system: "Bell-Clauser-Horne".into(),
        lines: rows
            .into_iter()
            .map(|(id, expr, v)| InequalityLine::new(id, format!("-1 <= {expr} <= 0"), vec![-S::one(), v, S::zero()]))
            .collect(),
    }
}

/// Singlet-state conditional table for the given settings.
pub fn quantum_epr_table<T: Real + Scalar>(g: &Geometry<T>) -> Result<EprConditionalTable<T>, QprobError> {
    let w = singlet_state::<T>();
    let left = [
        quantum_prob(&w, &[up_event(Wing::Left, &g.a[0])?])?,
        quantum_prob(&w, &[up_event(Wing::Left, &g.a[1])?])?,
    ];
    let right = [
        quantum_prob(&w, &[up_event(Wing::Right, &g.b[0])?])?,
        quantum_prob(&w, &[up_event(Wing::Right, &g.b[1])?])?,
    ];
    let mut joint = [[T::zero(); 2]; 2];
    for (i, row) in joint.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            let events = [up_event(Wing::Left, &g.a[i])?, up_event(Wing::Right, &g.b[k])?];
            *cell = quantum_prob(&w, &events)?;
        }
    }
    // Clamp roundoff so the table invariant holds.
    let clamp = |v: T| num_traits::Float::max(num_traits::Float::min(v, T::one()), T::zero());
    Ok(EprConditionalTable {
        left: left.map(clamp),
        right: right.map(clamp),
        joint: joint.map(|r| r.map(clamp)),
    })
}

/// Flags inequality verdicts that a perturbation of at most `tol` could flip.
pub fn near_boundary<S: Scalar>(report: &InequalityReport<S>, tol: f64) -> bool {
    report.min_abs_margin().to_f64_lossy() < tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn n2(v: [f64; 3]) -> CorrelationVector<f64> {
        CorrelationVector::from_flat(IndexPairSet::new(2, vec![(1, 2)]).unwrap(), v.to_vec()).unwrap()
    }

    fn bp(v: [f64; 6]) -> CorrelationVector<f64> {
        CorrelationVector::from_flat(IndexPairSet::all_pairs(3).unwrap(), v.to_vec()).unwrap()
    }

    fn ch<S: Scalar>(v: Vec<S>) -> CorrelationVector<S> {
        CorrelationVector::from_flat(IndexPairSet::clauser_horne(), v).unwrap()
    }

    fn quantum_exact() -> CorrelationVector<Rational> {
        ch(vec![q(1, 2), q(1, 2), q(1, 2), q(1, 2), q(3, 8), q(3, 8), q(0, 1), q(3, 8)])
    }

    #[test]
    fn n2_examples() {
        let r = eval_n2(&n2([0.5, 0.5, 0.25])).unwrap();
        assert_eq!(r.lines.len(), 3);
        assert!(r.satisfied());
        assert!(eval_n2(&n2([1.0, 1.0, 1.0])).unwrap().satisfied());
        let bad = eval_n2(&n2([1.0, 1.0, 0.0])).unwrap();
        let v: Vec<_> = bad.violated().collect();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].id, "union12");
        assert_eq!(v[0].chain[0], 2.0);
        assert_eq!(v[0].margin, 1.0);
    }

    #[test]
    fn wrong_shape_rejected() {
        assert!(matches!(eval_n2(&bp([0.0; 6])), Err(InequalityError::Shape { .. })));
        assert!(matches!(eval_bell_pitowsky(&n2([0.0; 3])), Err(InequalityError::Shape { .. })));
        assert!(matches!(eval_ch_pitowsky(&bp([0.0; 6])), Err(InequalityError::Shape { .. })));
    }

    #[test]
    fn bell_pitowsky_examples() {
        let r = eval_bell_pitowsky(&bp([0.5, 0.5, 0.5, 0.25, 0.25, 0.25])).unwrap();
        assert_eq!(r.lines.len(), 13);
        assert!(r.satisfied());
        assert!(eval_bell_pitowsky(&bp([0.0; 6])).unwrap().satisfied());
        let anti = eval_bell_pitowsky(&bp([0.5, 0.5, 0.5, 0.0, 0.0, 0.0])).unwrap();
        let sum = anti.line("bp.sum").unwrap();
        assert_eq!(sum.chain[0], 1.5);
        assert!(!sum.satisfied);
        assert_eq!(sum.margin, 0.5);
    }

    #[test]
    fn ch_pitowsky_on_quantum_vector_exact() {
        let r = eval_ch_pitowsky(&quantum_exact()).unwrap();
        assert_eq!(r.lines.len(), 16);
        let violated: Vec<_> = r.violated().collect();
        assert_eq!(violated.len(), 1);
        assert_eq!(violated[0].id, "ch.1");
        assert_eq!(violated[0].margin, q(1, 8));
        assert_eq!(violated[0].chain[1], q(1, 8));
        for id in ["ch.2", "ch.3", "ch.4"] {
            assert_eq!(r.line(id).unwrap().chain[1], q(-5, 8));
        }
    }

    #[test]
    fn ch_pitowsky_float_and_trivial() {
        let r = eval_ch_pitowsky(&quantum_exact().to_f64()).unwrap();
        assert!((r.line("ch.1").unwrap().margin - 0.125).abs() < 1e-12);
        assert!(eval_ch_pitowsky(&ch(vec![0.0; 8])).unwrap().satisfied());
        let indep = eval_ch_pitowsky(&ch(vec![0.5, 0.5, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25])).unwrap();
        assert!(indep.satisfied());
        for id in ["ch.1", "ch.2", "ch.3", "ch.4"] {
            assert_eq!(indep.line(id).unwrap().chain[1], -0.5);
        }
    }

    #[test]
    fn bell_ch_examples() {
        let quantum = EprConditionalTable::from_correlation_vector(&quantum_exact()).unwrap();
        let r = eval_bell_clauser_horne(&quantum);
        let v: Vec<_> = r.violated().collect();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].id, "bch.1");
        assert_eq!(v[0].margin, q(1, 8));

        let indep = EprConditionalTable::new([0.5; 2], [0.5; 2], [[0.25; 2]; 2]).unwrap();
        let r = eval_bell_clauser_horne(&indep);
        assert!(r.satisfied());
        assert!(r.lines.iter().all(|l| l.chain[1] == -0.5));
    }

    #[test]
    fn table_validation() {
        assert!(matches!(
            EprConditionalTable::new([0.5, 1.5], [0.5; 2], [[0.25; 2]; 2]),
            Err(InequalityError::OutOfRange { name: "p(A2|a2)", .. })
        ));
    }

    #[test]
    fn quantum_tables() {
        let t = quantum_epr_table(&Geometry::<f64>::violating()).unwrap();
        let expect = [0.5, 0.5, 0.5, 0.5, 0.375, 0.375, 0.0, 0.375];
        for (got, want) in t.to_correlation_vector().flat().iter().zip(expect) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        let aligned = quantum_epr_table(&Geometry::<f64>::aligned()).unwrap();
        assert!(aligned.joint.iter().flatten().all(|v| v.abs() < 1e-12));
        assert!(eval_bell_clauser_horne(&aligned).satisfied());
        let ortho = quantum_epr_table(&Geometry::<f64>::orthogonal()).unwrap();
        assert!(ortho.joint.iter().flatten().all(|v| (v - 0.25).abs() < 1e-12));
        assert!(eval_bell_clauser_horne(&ortho).satisfied());
    }

    #[test]
    fn text_table_mentions_verdict() {
        let r = eval_ch_pitowsky(&quantum_exact().to_f64()).unwrap();
        let text = r.to_text();
        assert!(text.contains("VIOLATED, margin 0.125000"), "{text}");
        let json = r.to_json();
        assert_eq!(json["satisfied"], false);
        assert_eq!(json["lines"].as_array().unwrap().len(), 16);
    }

    #[test]
    fn margins_are_lipschitz() {
        let base: Vec<f64> = vec![0.6, 0.4, 0.5, 0.3, 0.2, 0.1, 0.3, 0.2];
        let r0 = eval_ch_pitowsky(&ch(base.clone())).unwrap();
        let delta = 1e-3;
        for k in 0..8 {
            let mut v = base.clone();
            v[k] += delta;
            let r1 = eval_ch_pitowsky(&ch(v)).unwrap();
            for (a, b) in r0.lines.iter().zip(&r1.lines) {
                // At most six unit-coefficient terms per line.
                assert!((a.margin - b.margin).abs() <= 6.0 * delta + 1e-15);
            }
        }
    }
}
