//! Classical correlation polytopes `c(n, S)`.
//!
//! A correlation vector lists single-event probabilities `p_1..p_n` followed
//! by pair probabilities `p_ij` for `(i, j) ∈ S`. It is classical iff it is a
//! convex combination of the 0/1 vertices `u^ε` with `u_i = ε_i` and
//! `u_ij = ε_i ε_j`. Membership is decided by a feasibility LP; a failed
//! decision comes with a separating hyperplane read off the phase-one duals.
//!
//! Vertices are indexed by `k ∈ 0..2ⁿ` with `ε_i = (k >> (i-1)) & 1`, so ε₁
//! is the fastest-varying digit: for n = 2 the order is (0,0), (1,0), (0,1), (1,1).

use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::{scalar_from_json, Scalar};
use crate::simplex::{LpOutcome, SimplexError, StandardLp};

/// Largest event count accepted by vertex enumeration.
pub const MAX_EVENTS: usize = 24;
/// Largest event count accepted in exact rational mode.
pub const EXACT_MAX_EVENTS: usize = 8;
/// Phase-one residual at or below which a vector counts as a member.
pub const SOLVE_TOL: f64 = 1e-9;
/// Slack allowed when re-checking certificates and witnesses.
pub const AUDIT_TOL: f64 = 1e-8;
/// Witness residuals above this are flagged as boundary cases.
pub const BOUNDARY_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("{n} events exceeds the limit of {max}")]
    TooManyEvents { n: usize, max: usize },
    #[error("need at least one event")]
    NoEvents,
    #[error("pair ({0}, {1}) is out of range for n = {2}")]
    PairOutOfRange(usize, usize, usize),
    #[error("pair ({0}, {1}) must satisfy i < j")]
    PairNotOrdered(usize, usize),
    #[error("pair ({0}, {1}) listed twice")]
    DuplicatePair(usize, usize),
    #[error("expected {expected} {what} values, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("entry {index} is not a finite number")]
    NotFinite { index: usize },
    #[error("LP failure: {0}")]
    Simplex(#[from] SimplexError),
    #[error("LP reported infeasibility but no separating hyperplane could be recovered")]
    Numerical,
}

/// Event count `n` and the ordered list of correlated pairs `S` (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexPairSet {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl IndexPairSet {
    pub fn new(n: usize, pairs: Vec<(usize, usize)>) -> Result<Self, PolytopeError> {
        if n == 0 {
            return Err(PolytopeError::NoEvents);
        }
        let mut seen = BTreeSet::new();
        for &(i, j) in &pairs {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(PolytopeError::PairOutOfRange(i, j, n));
            }
            if i >= j {
                return Err(PolytopeError::PairNotOrdered(i, j));
            }
            if !seen.insert((i, j)) {
                return Err(PolytopeError::DuplicatePair(i, j));
            }
        }
        Ok(Self { n, pairs })
    }

    /// All pairs `i < j` in lexicographic order.
    pub fn all_pairs(n: usize) -> Result<Self, PolytopeError> {
        let pairs = (1..=n).flat_map(|i| ((i + 1)..=n).map(move |j| (i, j))).collect();
        Self::new(n, pairs)
    }

    /// `n = 4`, `S = {(1,3), (1,4), (2,3), (2,4)}`: two settings per wing.
    pub fn clauser_horne() -> Self {
        Self::new(4, vec![(1, 3), (1, 4), (2, 3), (2, 4)]).expect("valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `n + |S|`.
    pub fn dimension(&self) -> usize {
        self.n + self.pairs.len()
    }

    pub fn pair_index(&self, i: usize, j: usize) -> Option<usize> {
        self.pairs.iter().position(|&p| p == (i, j))
    }
}

/// Vertex `u^ε` of `c(n, S)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub index: usize,
    pub epsilon: Vec<u8>,
    pub coords: Vec<u8>,
}

impl Vertex {
    pub fn new(set: &IndexPairSet, index: usize) -> Self {
        let epsilon: Vec<u8> = (0..set.n).map(|i| ((index >> i) & 1) as u8).collect();
        let mut coords = epsilon.clone();
        coords.extend(set.pairs.iter().map(|&(i, j)| epsilon[i - 1] & epsilon[j - 1]));
        Self { index, epsilon, coords }
    }

    /// `y · u^ε`.
    pub fn dot<S: Scalar>(&self, y: &[S]) -> S {
        self.coords
            .iter()
            .zip(y)
            .filter(|(c, _)| **c == 1)
            .fold(S::zero(), |acc, (_, v)| acc + v.clone())
    }
}

pub fn enumerate_vertices(set: &IndexPairSet) -> Result<Vec<Vertex>, PolytopeError> {
    if set.n > MAX_EVENTS {
        return Err(PolytopeError::TooManyEvents { n: set.n, max: MAX_EVENTS });
    }
    Ok((0..1usize << set.n).map(|k| Vertex::new(set, k)).collect())
}

/// `(p_1..p_n, p_ij..)` over an [`IndexPairSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVector<S> {
    set: IndexPairSet,
    singles: Vec<S>,
    pairs: Vec<S>,
}

/// An entry outside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeViolation<S> {
    pub label: String,
    pub value: S,
}

impl<S: Scalar> CorrelationVector<S> {
    pub fn new(set: IndexPairSet, singles: Vec<S>, pairs: Vec<S>) -> Result<Self, PolytopeError> {
        if singles.len() != set.n {
            return Err(PolytopeError::LengthMismatch { what: "single", expected: set.n, got: singles.len() });
        }
        if pairs.len() != set.pairs.len() {
            return Err(PolytopeError::LengthMismatch {
                what: "pair",
                expected: set.pairs.len(),
                got: pairs.len(),
            });
        }
        for (index, v) in singles.iter().chain(&pairs).enumerate() {
            if !S::EXACT && !v.to_f64_lossy().is_finite() {
                return Err(PolytopeError::NotFinite { index });
            }
        }
        Ok(Self { set, singles, pairs })
    }

    /// Splits a flat `n + |S|` vector.
    pub fn from_flat(set: IndexPairSet, values: Vec<S>) -> Result<Self, PolytopeError> {
        if values.len() != set.dimension() {
            return Err(PolytopeError::LengthMismatch {
                what: "correlation",
                expected: set.dimension(),
                got: values.len(),
            });
        }
        let mut singles = values;
        let pairs = singles.split_off(set.n);
        Self::new(set, singles, pairs)
    }

    pub fn set(&self) -> &IndexPairSet {
        &self.set
    }

    pub fn n(&self) -> usize {
        self.set.n
    }

    /// `p_i`, 1-based.
    pub fn single(&self, i: usize) -> &S {
        &self.singles[i - 1]
    }

    /// `p_ij`, if `(i, j) ∈ S`.
    pub fn pair(&self, i: usize, j: usize) -> Option<&S> {
        self.set.pair_index(i, j).map(|k| &self.pairs[k])
    }

    pub fn singles(&self) -> &[S] {
        &self.singles
    }

    pub fn pair_values(&self) -> &[S] {
        &self.pairs
    }

    pub fn flat(&self) -> Vec<S> {
        self.singles.iter().chain(&self.pairs).cloned().collect()
    }

    pub fn labels(&self) -> Vec<String> {
        (1..=self.set.n)
            .map(|i| format!("p{i}"))
            .chain(self.set.pairs.iter().map(|(i, j)| format!("p{i}{j}")))
            .collect()
    }

    pub fn range_violations(&self) -> Vec<RangeViolation<S>> {
        self.labels()
            .into_iter()
            .zip(self.flat())
            .filter(|(_, v)| *v < S::zero() || *v > S::one())
            .map(|(label, value)| RangeViolation { label, value })
            .collect()
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> CorrelationVector<T> {
        CorrelationVector {
            set: self.set.clone(),
            singles: self.singles.iter().map(&f).collect(),
            pairs: self.pairs.iter().map(&f).collect(),
        }
    }

    pub fn to_f64(&self) -> CorrelationVector<f64> {
        self.map(|v| v.to_f64_lossy())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.set.n,
            "S": self.set.pairs.iter().map(|&(i, j)| [i, j]).collect::<Vec<_>>(),
            "p": self.singles.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "p_pair": self.pairs.iter().map(Scalar::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self, CorrelationJsonError> {
        let raw: RawCorrelationVector = serde_json::from_value(v.clone()).map_err(CorrelationJsonError::Shape)?;
        raw.into_vector()
    }
}

impl CorrelationVector<BigRational> {
    pub fn exact_from_f64(v: &CorrelationVector<f64>) -> Option<Self> {
        let conv = |x: &f64| BigRational::from_json_f64(*x);
        Some(Self {
            set: v.set.clone(),
            singles: v.singles.iter().map(conv).collect::<Option<_>>()?,
            pairs: v.pairs.iter().map(conv).collect::<Option<_>>()?,
        })
    }
}

impl<S: Scalar> fmt::Display for CorrelationVector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, v) in self.flat().iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Error)]
pub enum CorrelationJsonError {
    #[error("malformed correlation vector: {0}")]
    Shape(serde_json::Error),
    #[error("entry {0} is not a number or p/q string")]
    Value(String),
    #[error(transparent)]
    Invalid(#[from] PolytopeError),
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCorrelationVector {
    n: usize,
    #[serde(rename = "S")]
    s: Vec<[usize; 2]>,
    p: Vec<serde_json::Value>,
    p_pair: Vec<serde_json::Value>,
}

impl RawCorrelationVector {
    fn into_vector<S: Scalar>(self) -> Result<CorrelationVector<S>, CorrelationJsonError> {
        let set = IndexPairSet::new(self.n, self.s.iter().map(|&[i, j]| (i, j)).collect())?;
        let conv = |vals: &[serde_json::Value], name: &str| -> Result<Vec<S>, CorrelationJsonError> {
            vals.iter()
                .enumerate()
                .map(|(k, v)| scalar_from_json(v).ok_or_else(|| CorrelationJsonError::Value(format!("{name}[{k}]"))))
                .collect()
        };
        let singles = conv(&self.p, "p")?;
        let pairs = conv(&self.p_pair, "p_pair")?;
        Ok(CorrelationVector::new(set, singles, pairs)?)
    }
}

impl<S: Scalar> Serialize for CorrelationVector<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> Result<Z::Ok, Z::Error> {
        self.to_json_value().serialize(serializer)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for CorrelationVector<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawCorrelationVector::deserialize(deserializer)?;
        raw.into_vector().map_err(serde::de::Error::custom)
    }
}

/// Separating hyperplane: `normal · u^ε ≤ offset` for every vertex while
/// `normal · p = offset + gap` with `gap > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<S> {
    pub normal: Vec<S>,
    pub offset: S,
    pub gap: S,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MembershipVerdict<S> {
    Witness {
        /// One weight per vertex, in vertex order.
        weights: Vec<S>,
        /// Accepted within tolerance although the residual is not negligible.
        boundary: bool,
    },
    Certificate(Certificate<S>),
}

impl<S> MembershipVerdict<S> {
    pub fn is_member(&self) -> bool {
        matches!(self, Self::Witness { .. })
    }
}

fn constraint_matrix<S: Scalar>(vertices: &[Vertex], dim: usize) -> Vec<Vec<S>> {
    let mut a: Vec<Vec<S>> = (0..dim)
        .map(|r| {
            vertices
                .iter()
                .map(|v| if v.coords[r] == 1 { S::one() } else { S::zero() })
                .collect()
        })
        .collect();
    a.push(vec![S::one(); vertices.len()]);
    a
}

/// `Σ λ_ε u^ε`.
pub fn combine<S: Scalar>(set: &IndexPairSet, vertices: &[Vertex], weights: &[S]) -> Vec<S> {
    let mut out = vec![S::zero(); set.dimension()];
    for (v, w) in vertices.iter().zip(weights) {
        if w.is_zero() {
            continue;
        }
        for (o, c) in out.iter_mut().zip(&v.coords) {
            if *c == 1 {
                *o = o.clone() + w.clone();
            }
        }
    }
    out
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Decides `p ∈ c(n, S)`.
pub fn membership<S: Scalar>(p: &CorrelationVector<S>) -> Result<MembershipVerdict<S>, PolytopeError> {
    let set = p.set();
    if S::EXACT && set.n > EXACT_MAX_EVENTS {
        return Err(PolytopeError::TooManyEvents { n: set.n, max: EXACT_MAX_EVENTS });
    }
    let vertices = enumerate_vertices(set)?;
    let dim = set.dimension();
    let mut b = p.flat();
    b.push(S::one());
    let lp = StandardLp::feasibility(constraint_matrix(&vertices, dim), b);
    match lp.solve()? {
        LpOutcome::Optimal { x, .. } => {
            let x: Vec<S> = x.into_iter().map(|w| S::max_of(w, S::zero())).collect();
            let combined = combine(set, &vertices, &x);
            let sum = x.iter().fold(S::zero(), |a, w| a + w.clone());
            let worst = combined
                .iter()
                .zip(p.flat())
                .map(|(c, t)| (c.clone() - t).abs())
                .fold((sum - S::one()).abs(), S::max_of);
            let boundary = !S::EXACT && worst > S::tol(BOUNDARY_FLOOR);
            Ok(MembershipVerdict::Witness { weights: x, boundary })
        }
        LpOutcome::Infeasible { ray, .. } => {
            let normal = ray[..dim].to_vec();
            let cert = tighten_certificate(&vertices, p, normal).ok_or(PolytopeError::Numerical)?;
            Ok(MembershipVerdict::Certificate(cert))
        }
        LpOutcome::Unbounded => unreachable!("feasibility LP has a zero objective"),
    }
}

/// Rescales the normal, moves the offset onto the tightest vertex and makes
/// sure the gap clears the audit tolerance.
fn tighten_certificate<S: Scalar>(vertices: &[Vertex], p: &CorrelationVector<S>, mut normal: Vec<S>) -> Option<Certificate<S>> {
    let target = p.flat();
    if !S::EXACT {
        let scale = normal.iter().map(|v| v.abs()).fold(S::zero(), S::max_of);
        if scale.is_zero() {
            return None;
        }
        normal.iter_mut().for_each(|v| *v = v.clone() / scale.clone());
    }
    let offset_for = |n: &[S]| vertices.iter().map(|v| v.dot(n)).reduce(S::max_of).unwrap_or_else(S::zero);
    let mut offset = offset_for(&normal);
    let mut gap = dot(&normal, &target) - offset.clone();
    if gap <= S::zero() {
        return None;
    }
    let needed = S::tol(AUDIT_TOL) * S::from_i64(2).unwrap();
    if gap < needed {
        let factor = needed / gap.clone();
        normal.iter_mut().for_each(|v| *v = v.clone() * factor.clone());
        offset = offset_for(&normal);
        gap = dot(&normal, &target) - offset.clone();
    }
    Some(Certificate { normal, offset, gap })
}

/// Independent re-check of a witness.
pub fn check_witness<S: Scalar>(p: &CorrelationVector<S>, weights: &[S]) -> bool {
    let Ok(vertices) = enumerate_vertices(p.set()) else {
        return false;
    };
    if weights.len() != vertices.len() {
        return false;
    }
    if weights.iter().any(|w| *w < -S::tol(BOUNDARY_FLOOR)) {
        return false;
    }
    let sum = weights.iter().fold(S::zero(), |a, w| a + w.clone());
    if (sum - S::one()).abs() > S::tol(SOLVE_TOL) {
        return false;
    }
    combine(p.set(), &vertices, weights)
        .into_iter()
        .zip(p.flat())
        .all(|(c, t)| (c - t).abs() <= S::tol(AUDIT_TOL))
}

/// Independent re-check of a certificate against all `2ⁿ` vertices.
pub fn check_certificate<S: Scalar>(p: &CorrelationVector<S>, cert: &Certificate<S>) -> bool {
    let Ok(vertices) = enumerate_vertices(p.set()) else {
        return false;
    };
    if cert.normal.len() != p.set().dimension() {
        return false;
    }
    let slack = S::tol(AUDIT_TOL);
    let bound = cert.offset.clone() + slack.clone();
    if vertices.iter().any(|v| v.dot(&cert.normal) > bound) {
        return false;
    }
    let value = dot(&cert.normal, &p.flat());
    if S::EXACT {
        value > cert.offset
    } else {
        value >= bound
    }
}
