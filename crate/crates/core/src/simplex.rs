//! Dense two-phase simplex over any [`Scalar`].
//!
//! Solves `min cᵀx  s.t.  A x = b, x ≥ 0` with Bland's rule. When the system is
//! infeasible the phase-one duals are returned as a Farkas ray `w` with
//! `wᵀA ≤ 0` and `wᵀb > 0`.

use thiserror::Error;

use crate::scalar::Scalar;

/// Pivot threshold in floating mode.
pub const PIVOT_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("constraint matrix has {rows} rows but rhs has {rhs} entries")]
    Shape { rows: usize, rhs: usize },
    #[error("row {row} has {len} columns, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },
    #[error("iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<S> {
    Optimal {
        x: Vec<S>,
        objective: S,
        /// Phase-one residual `Σ|Ax − b|` at the start of phase two (zero when exact).
        residual: S,
    },
    Infeasible {
        /// Farkas ray in terms of the caller's rows.
        ray: Vec<S>,
        /// Optimal phase-one value, `wᵀb`.
        residual: S,
    },
    Unbounded,
}

/// Standard-form problem.
#[derive(Debug, Clone)]
pub struct StandardLp<S> {
    pub a: Vec<Vec<S>>,
    pub b: Vec<S>,
    pub c: Vec<S>,
}

struct Tableau<S> {
    rows: usize,
    cols: usize, // original + artificial; rhs is at index `cols`
    originals: usize,
    t: Vec<Vec<S>>,
    obj: Vec<S>,
    basis: Vec<usize>,
    tol: S,
}

impl<S: Scalar> Tableau<S> {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c].clone();
        for v in self.t[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.t[r].clone();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i][c].clone();
            if f.is_zero() {
                continue;
            }
            for (v, pr) in self.t[i].iter_mut().zip(&pivot_row) {
                if !pr.is_zero() {
                    *v = v.clone() - f.clone() * pr.clone();
                }
            }
            self.t[i][c] = S::zero();
        }
        let f = self.obj[c].clone();
        if !f.is_zero() {
            for (v, pr) in self.obj.iter_mut().zip(&pivot_row) {
                if !pr.is_zero() {
                    *v = v.clone() - f.clone() * pr.clone();
                }
            }
            self.obj[c] = S::zero();
        }
        self.basis[r] = c;
    }

    /// Runs Bland's rule over columns `0..allowed`. Returns false if unbounded.
    fn optimize(&mut self, allowed: usize) -> Result<bool, SimplexError> {
        let neg_tol = -self.tol.clone();
        for _ in 0..MAX_ITERATIONS {
            let Some(enter) = (0..allowed).find(|&j| self.obj[j] < neg_tol) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, S)> = None;
            for i in 0..self.rows {
                let a = &self.t[i][enter];
                if *a <= self.tol {
                    continue;
                }
                let ratio = self.t[i][self.cols].clone() / a.clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br || (ratio == br && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, enter),
            }
        }
        Err(SimplexError::IterationLimit)
    }
}

impl<S: Scalar> StandardLp<S> {
    pub fn feasibility(a: Vec<Vec<S>>, b: Vec<S>) -> Self {
        let n = a.first().map_or(0, Vec::len);
        Self { a, b, c: vec![S::zero(); n] }
    }

    pub fn solve(&self) -> Result<LpOutcome<S>, SimplexError> {
        let m = self.a.len();
        if self.b.len() != m {
            return Err(SimplexError::Shape { rows: m, rhs: self.b.len() });
        }
        let n = self.c.len();
        for (row, r) in self.a.iter().enumerate() {
            if r.len() != n {
                return Err(SimplexError::Ragged { row, len: r.len(), expected: n });
            }
        }
        let cols = n + m;
        let mut signs = Vec::with_capacity(m);
        let mut t = Vec::with_capacity(m);
        for (i, (row, rhs)) in self.a.iter().zip(&self.b).enumerate() {
            let flip = rhs.is_negative();
            signs.push(if flip { -S::one() } else { S::one() });
            let mut r: Vec<S> = Vec::with_capacity(cols + 1);
            r.extend(row.iter().map(|v| if flip { -v.clone() } else { v.clone() }));
            r.extend((0..m).map(|k| if k == i { S::one() } else { S::zero() }));
            r.push(if flip { -rhs.clone() } else { rhs.clone() });
            t.push(r);
        }
        // Phase-one reduced costs: 1 on artificials minus the sum of all rows.
        let mut obj = vec![S::zero(); cols + 1];
        for j in 0..=cols {
            let s = t.iter().fold(S::zero(), |acc, r| acc + r[j].clone());
            obj[j] = if (n..cols).contains(&j) { S::one() - s } else { -s };
        }
        let mut tab = Tableau {
            rows: m,
            cols,
            originals: n,
            t,
            obj,
            basis: (n..cols).collect(),
            tol: S::tol(PIVOT_TOL),
        };
        tab.optimize(cols)?;

        let residual = -tab.obj[cols].clone();
        let feas_tol = S::tol(crate::polytope::SOLVE_TOL);
        if residual > feas_tol {
            let ray = (0..m)
                .map(|k| (S::one() - tab.obj[n + k].clone()) * signs[k].clone())
                .collect();
            return Ok(LpOutcome::Infeasible { ray, residual });
        }

        // Drive zero-valued artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= n {
                if let Some(c) = (0..n).find(|&j| tab.t[r][j].abs() > tab.tol) {
                    tab.pivot(r, c);
                }
            }
        }

        let mut obj = vec![S::zero(); cols + 1];
        obj[..n].clone_from_slice(&self.c);
        for r in 0..m {
            let bv = tab.basis[r];
            if bv < n && !self.c[bv].is_zero() {
                let cb = self.c[bv].clone();
                for (o, v) in obj.iter_mut().zip(&tab.t[r]) {
                    *o = o.clone() - cb.clone() * v.clone();
                }
            }
        }
        tab.obj = obj;
        if !tab.optimize(tab.originals)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![S::zero(); n];
        for r in 0..m {
            if tab.basis[r] < n {
                x[tab.basis[r]] = tab.t[r][cols].clone();
            }
        }
        let objective = x.iter().zip(&self.c).fold(S::zero(), |acc, (xi, ci)| acc + xi.clone() * ci.clone());
        Ok(LpOutcome::Optimal { x, objective, residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::ratio(n, d)
    }

    #[test]
    fn small_optimum() {
        // min -x - y  s.t.  x + 2y + s1 = 4, 3x + y + s2 = 6
        let lp: StandardLp<f64> = StandardLp {
            a: vec![vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]],
            b: vec![4.0, 6.0],
            c: vec![-1.0, -1.0, 0.0, 0.0],
        };
        match lp.solve().unwrap() {
            LpOutcome::Optimal { x, objective, .. } => {
                assert!((x[0] - 1.6).abs() < 1e-12 && (x[1] - 1.2).abs() < 1e-12);
                assert!((objective + 2.8).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_optimum() {
        let lp = StandardLp {
            a: vec![vec![r(1, 1), r(2, 1), r(1, 1), r(0, 1)], vec![r(3, 1), r(1, 1), r(0, 1), r(1, 1)]],
            b: vec![r(4, 1), r(6, 1)],
            c: vec![r(-1, 1), r(-1, 1), r(0, 1), r(0, 1)],
        };
        match lp.solve().unwrap() {
            LpOutcome::Optimal { x, objective, .. } => {
                assert_eq!(x[0], r(8, 5));
                assert_eq!(x[1], r(6, 5));
                assert_eq!(objective, r(-14, 5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_yields_farkas_ray() {
        // x + y = 1, x + y = 2
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let b = vec![1.0, 2.0];
        match StandardLp::feasibility(a.clone(), b.clone()).solve().unwrap() {
            LpOutcome::Infeasible { ray, residual } => {
                assert!(residual > 0.5);
                for j in 0..2 {
                    let s: f64 = (0..2).map(|i| ray[i] * a[i][j]).sum();
                    assert!(s <= 1e-12);
                }
                let wb: f64 = ray.iter().zip(&b).map(|(w, b)| w * b).sum();
                assert!(wb > 0.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_rhs_is_flipped() {
        // -x = -3 is feasible with x = 3; -x = 2 is not.
        match StandardLp::feasibility(vec![vec![-1.0]], vec![-3.0]).solve().unwrap() {
            LpOutcome::Optimal { x, .. } => assert_eq!(x, vec![3.0]),
            other => panic!("{other:?}"),
        }
        match StandardLp::feasibility(vec![vec![-1.0]], vec![2.0]).solve().unwrap() {
            LpOutcome::Infeasible { ray, .. } => {
                assert!(-ray[0] <= 0.0 && ray[0] * 2.0 > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn redundant_rows_and_unbounded() {
        let lp = StandardLp {
            a: vec![vec![1.0, -1.0], vec![2.0, -2.0]],
            b: vec![1.0, 2.0],
            c: vec![-1.0, 0.0],
        };
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn shape_errors() {
        let lp = StandardLp { a: vec![vec![1.0]], b: vec![1.0, 2.0], c: vec![0.0] };
        assert!(matches!(lp.solve(), Err(SimplexError::Shape { .. })));
        let lp = StandardLp { a: vec![vec![1.0], vec![1.0, 2.0]], b: vec![1.0, 2.0], c: vec![0.0] };
        assert!(matches!(lp.solve(), Err(SimplexError::Ragged { row: 1, .. })));
    }
}
