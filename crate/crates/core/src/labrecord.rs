//! Per-run 0/1 records of the four events `X₁..X₄` and the conjunctions
//! `X₁∧X₃, X₁∧X₄, X₂∧X₃, X₂∧X₄`.
//!
//! Each row is a classical truth-value assignment, so every record's
//! relative frequencies are a convex combination of the vertices of
//! `c(4, S)`. A vector outside the polytope therefore has no record of any
//! length.

use std::io::{Read, Write};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::inequalities::{eval_ch_pitowsky, InequalityReport};
use crate::polytope::{self, enumerate_vertices, Certificate, CorrelationVector, IndexPairSet, MembershipVerdict, PolytopeError};
use crate::{ExactCorrelationVector, Rational};

pub const HEADER: [&str; 9] = ["run", "X1", "X2", "X3", "X4", "X13", "X14", "X23", "X24"];
/// `(i, j)` of each conjunction column, 1-based.
pub const CONJUNCTIONS: [(usize, usize); 4] = [(1, 3), (1, 4), (2, 3), (2, 4)];
/// Longest record [`record_from_weights`] will materialize.
pub const MAX_SYNTHETIC_ROWS: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum LabRecordError {
    #[error("record has no rows")]
    Empty,
    #[error("row {row}: column {column} is {found} but should be {expected}")]
    Inconsistent {
        row: usize,
        column: &'static str,
        found: u8,
        expected: u8,
    },
    #[error("row {row}: column {column} holds {value:?}, expected 0 or 1")]
    BadValue { row: usize, column: String, value: String },
    #[error("header should be {expected}, found {found}")]
    BadHeader { expected: String, found: String },
    #[error("row {row}: expected 9 fields, found {found}")]
    BadLength { row: usize, found: usize },
    #[error("weights: {0}")]
    BadWeights(String),
    #[error("target must use four events and the pairs (1,3),(1,4),(2,3),(2,4)")]
    WrongIndexSet,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// One run: the four single bits and the four conjunction bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RecordRow {
    pub singles: [bool; 4],
    pub conjunctions: [bool; 4],
}

impl RecordRow {
    /// The consistent row for a truth-value assignment.
    pub fn from_singles(singles: [bool; 4]) -> Self {
        Self {
            singles,
            conjunctions: CONJUNCTIONS.map(|(i, j)| singles[i - 1] && singles[j - 1]),
        }
    }

    /// Vertex index `Σ ε_i 2^{i−1}`.
    pub fn vertex_index(&self) -> usize {
        self.singles.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum()
    }

    pub fn from_vertex_index(k: usize) -> Self {
        Self::from_singles(std::array::from_fn(|i| (k >> i) & 1 == 1))
    }

    fn check(&self, row: usize) -> Result<(), LabRecordError> {
        for (c, &(i, j)) in CONJUNCTIONS.iter().enumerate() {
            let expected = self.singles[i - 1] && self.singles[j - 1];
            if self.conjunctions[c] != expected {
                return Err(LabRecordError::Inconsistent {
                    row,
                    column: HEADER[5 + c],
                    found: self.conjunctions[c] as u8,
                    expected: expected as u8,
                });
            }
        }
        Ok(())
    }

    pub fn bits(&self) -> [u8; 8] {
        std::array::from_fn(|k| if k < 4 { self.singles[k] as u8 } else { self.conjunctions[k - 4] as u8 })
    }
}

/// A validated, non-empty record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabRecord {
    rows: Vec<RecordRow>,
}

impl LabRecord {
    /// Row indices in errors are 1-based, matching the `run` column.
    pub fn new(rows: Vec<RecordRow>) -> Result<Self, LabRecordError> {
        if rows.is_empty() {
            return Err(LabRecordError::Empty);
        }
        for (k, r) in rows.iter().enumerate() {
            r.check(k + 1)?;
        }
        Ok(Self { rows })
    }

    pub fn from_bits(rows: &[[u8; 8]]) -> Result<Self, LabRecordError> {
        let parsed = rows
            .iter()
            .enumerate()
            .map(|(k, bits)| {
                let bit = |c: usize| match bits[c] {
                    0 => Ok(false),
                    1 => Ok(true),
                    v => Err(LabRecordError::BadValue {
                        row: k + 1,
                        column: HEADER[c + 1].to_string(),
                        value: v.to_string(),
                    }),
                };
                Ok(RecordRow {
                    singles: [bit(0)?, bit(1)?, bit(2)?, bit(3)?],
                    conjunctions: [bit(4)?, bit(5)?, bit(6)?, bit(7)?],
                })
            })
            .collect::<Result<Vec<_>, LabRecordError>>()?;
        Self::new(parsed)
    }

    pub fn rows(&self) -> &[RecordRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Streaming CSV ingest with header `run,X1,X2,X3,X4,X13,X14,X23,X24`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, LabRecordError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).flexible(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(LabRecordError::BadHeader {
                expected: HEADER.join(","),
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = k + 1;
            if rec.len() != HEADER.len() {
                return Err(LabRecordError::BadLength { row, found: rec.len() });
            }
            if rec[0].parse::<u64>().is_err() {
                return Err(LabRecordError::BadValue {
                    row,
                    column: "run".into(),
                    value: rec[0].to_string(),
                });
            }
            let mut bits = [false; 8];
            for (c, b) in bits.iter_mut().enumerate() {
                *b = match &rec[c + 1] {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(LabRecordError::BadValue {
                            row,
                            column: HEADER[c + 1].to_string(),
                            value: other.to_string(),
                        })
                    }
                };
            }
            let r = RecordRow {
                singles: [bits[0], bits[1], bits[2], bits[3]],
                conjunctions: [bits[4], bits[5], bits[6], bits[7]],
            };
            r.check(row)?;
            rows.push(r);
        }
        Self::new(rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), LabRecordError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(HEADER)?;
        for (k, r) in self.rows.iter().enumerate() {
            let mut fields = vec![(k + 1).to_string()];
            fields.extend(r.bits().iter().map(u8::to_string));
            w.write_record(&fields)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is ASCII")
    }

    /// Column totals `N₁..N₄, N₁₃, N₁₄, N₂₃, N₂₄`.
    pub fn counts(&self) -> [u64; 8] {
        let mut c = [0u64; 8];
        for r in &self.rows {
            for (acc, b) in c.iter_mut().zip(r.bits()) {
                *acc += b as u64;
            }
        }
        c
    }
}

/// `ν = N_col / N`, exactly.
pub fn frequencies(r: &LabRecord) -> ExactCorrelationVector {
    let n = BigInt::from(r.len());
    let values = r.counts().iter().map(|&c| Rational::new(BigInt::from(c), n.clone())).collect();
    CorrelationVector::from_flat(IndexPairSet::clauser_horne(), values).expect("shape is fixed")
}

/// `λ_ε = N_ε / N`, one weight per vertex in vertex order.
pub fn vertex_weights(r: &LabRecord) -> Vec<Rational> {
    let mut tally = [0u64; 16];
    for row in r.rows() {
        tally[row.vertex_index()] += 1;
    }
    let n = BigInt::from(r.len());
    tally.iter().map(|&c| Rational::new(BigInt::from(c), n.clone())).collect()
}

/// The shortest record whose vertex weights are exactly `weights`: `N` is the
/// least common multiple of the denominators and rows are grouped by vertex.
pub fn record_from_weights(weights: &[Rational]) -> Result<LabRecord, LabRecordError> {
    if weights.len() != 16 {
        return Err(LabRecordError::BadWeights(format!("expected 16 weights, got {}", weights.len())));
    }
    if weights.iter().any(|w| w < &Rational::zero()) {
        return Err(LabRecordError::BadWeights("negative weight".into()));
    }
    let total: Rational = weights.iter().cloned().sum();
    if !total.is_one() {
        return Err(LabRecordError::BadWeights(format!("weights sum to {total}")));
    }
    let n = weights.iter().fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
    let n_rows = n
        .to_u64()
        .filter(|&v| v <= MAX_SYNTHETIC_ROWS)
        .ok_or_else(|| LabRecordError::BadWeights(format!("record would need {n} rows")))?;
    let mut rows = Vec::with_capacity(n_rows as usize);
    for (k, w) in weights.iter().enumerate() {
        let count = (w * Rational::from_integer(n.clone())).to_integer().to_u64().expect("bounded by N");
        rows.extend(std::iter::repeat_n(RecordRow::from_vertex_index(k), count as usize));
    }
    LabRecord::new(rows)
}

/// Uniformly random consistent rows.
pub fn random_record<R: Rng>(rng: &mut R, n: usize) -> LabRecord {
    let rows = (0..n.max(1)).map(|_| RecordRow::from_vertex_index(rng.gen_range(0..16))).collect();
    LabRecord::new(rows).expect("rows are consistent by construction")
}

#[derive(Debug, Clone)]
pub enum RecordVerdict {
    /// No record of any length has these frequencies.
    Impossible {
        certificate: Certificate<Rational>,
        report: InequalityReport<Rational>,
    },
    /// A finite record with exactly these frequencies.
    Realizable { record: LabRecord },
}

impl RecordVerdict {
    pub fn to_json(&self) -> Value {
        match self {
            RecordVerdict::Impossible { certificate, report } => json!({
                "verdict": "impossible",
                "certificate": {
                    "normal": certificate.normal.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                    "offset": certificate.offset.to_string(),
                    "gap": certificate.gap.to_string(),
                },
                "violated": report.violated().map(|l| json!({
                    "id": l.id,
                    "expression": l.expression,
                    "margin": l.margin.to_string(),
                })).collect::<Vec<_>>(),
            }),
            RecordVerdict::Realizable { record } => json!({
                "verdict": "realizable",
                "rows": record.len(),
                "frequencies": frequencies(record).to_json_value(),
            }),
        }
    }
}

/// Exact membership of `target` in `c(4, S)`, turned into either an
/// impossibility certificate or a concrete record.
pub fn record_impossibility_demo(target: &ExactCorrelationVector) -> Result<RecordVerdict, LabRecordError> {
    if target.set() != &IndexPairSet::clauser_horne() {
        return Err(LabRecordError::WrongIndexSet);
    }
    match polytope::membership(target)? {
        MembershipVerdict::Certificate(certificate) => Ok(RecordVerdict::Impossible {
            certificate,
            report: eval_ch_pitowsky(target).map_err(|_| LabRecordError::WrongIndexSet)?,
        }),
        MembershipVerdict::Witness { weights, .. } => {
            debug_assert_eq!(weights.len(), enumerate_vertices(target.set()).map_or(0, |v| v.len()));
            Ok(RecordVerdict::Realizable {
                record: record_from_weights(&weights)?,
            })
        }
    }
}
