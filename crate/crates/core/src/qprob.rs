//! Spin-½ pair probabilities from the trace rule.
//!
//! Everything here is dense 2×2 / 4×4 complex arithmetic. The two-particle
//! space is ordered `left ⊗ right` and the single-particle basis is the
//! σ_z eigenbasis `(up, down)`.

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

pub const UNIT_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const IDEMPOTENT_TOL: f64 = 1e-10;
/// Frobenius norm of a commutator below which two events count as commuting.
pub const COMMUTE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QprobError {
    #[error("direction is not normalized (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("dimension mismatch: {left}x{left} vs {right}x{right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("operator is not Hermitian (deviation {deviation})")]
    NotHermitian { deviation: f64 },
    #[error("trace is {trace}, expected {expected}")]
    BadTrace { trace: f64, expected: f64 },
    #[error("operator is not positive semidefinite (smallest eigenvalue {min_eigenvalue})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("operator is not idempotent (|P^2 - P| = {deviation})")]
    NotIdempotent { deviation: f64 },
    #[error("events {first} and {second} do not commute (|[P,Q]| = {norm}); their conjunction is undefined")]
    NonCommuting { first: usize, second: usize, norm: f64 },
    #[error("empty event list")]
    NoEvents,
}

/// Unit vector in R³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction<T> {
    x: T,
    y: T,
    z: T,
}

impl<T: Real> Direction<T> {
    /// Accepts only vectors that are already unit within [`UNIT_TOL`].
    pub fn new(x: T, y: T, z: T) -> Result<Self, QprobError> {
        let norm = (x * x + y * y + z * z).sqrt();
        if (norm - T::one()).abs() > T::tol(UNIT_TOL) || !norm.is_finite() {
            return Err(QprobError::NotUnit {
                norm: norm.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { x, y, z })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(x: T, y: T, z: T) -> Result<Self, QprobError> {
        let norm = (x * x + y * y + z * z).sqrt();
        if norm.is_zero() || !norm.is_finite() {
            return Err(QprobError::NotUnit {
                norm: norm.to_f64().unwrap_or(f64::NAN),
            });
        }
        Self::new(x / norm, y / norm, z / norm)
    }

    /// Polar angle from +z and azimuth from +x, both in radians.
    pub fn from_angles(polar: T, azimuth: T) -> Self {
        let (sp, cp) = polar.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        Self {
            x: sp * ca,
            y: sp * sa,
            z: cp,
        }
    }

    /// Direction in the x–z plane at `degrees` from +z towards +x.
    pub fn in_plane_degrees(degrees: T) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        Self {
            x: s,
            y: T::zero(),
            z: c,
        }
    }

    pub fn x() -> Self {
        Self { x: T::one(), y: T::zero(), z: T::zero() }
    }

    pub fn y() -> Self {
        Self { x: T::zero(), y: T::one(), z: T::zero() }
    }

    pub fn z() -> Self {
        Self { x: T::zero(), y: T::zero(), z: T::one() }
    }

    pub fn components(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn neg(&self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z }
    }

    /// Angle to `other` in radians, in [0, π].
    pub fn angle_to(&self, other: &Self) -> T {
        // atan2 of |cross| and dot keeps precision near 0 and π.
        let cx = self.y * other.z - self.z * other.y;
        let cy = self.z * other.x - self.x * other.z;
        let cz = self.x * other.y - self.y * other.x;
        (cx * cx + cy * cy + cz * cz).sqrt().atan2(self.dot(other))
    }

    /// Polar and azimuthal angles. The azimuth is fixed to 0 on the z axis.
    pub fn angles(&self) -> (T, T) {
        let polar = (self.x * self.x + self.y * self.y).sqrt().atan2(self.z);
        let azimuth = if self.x.is_zero() && self.y.is_zero() {
            T::zero()
        } else {
            self.y.atan2(self.x)
        };
        (polar, azimuth)
    }

    /// Applies a rotation given as a row-major 3×3 matrix.
    pub fn rotated(&self, r: &[[T; 3]; 3]) -> Self {
        let v = self.components();
        let apply = |row: &[T; 3]| row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        Self {
            x: apply(&r[0]),
            y: apply(&r[1]),
            z: apply(&r[2]),
        }
    }
}

/// Row-major dense square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex::new(T::zero(), T::zero()); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        Self {
            dim,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    /// `|v⟩⟨w|`.
    pub fn outer(v: &[Complex<T>], w: &[Complex<T>]) -> Self {
        assert_eq!(v.len(), w.len());
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = v[i] * w[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, other: &Self) -> Result<(), QprobError> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(QprobError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            })
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, QprobError> {
        self.check_dim(other)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.re.is_zero() && a.im.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self, QprobError> {
        self.check_dim(other)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, QprobError> {
        self.check_dim(other)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self[(i, i)])
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|c| c.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Result<Self, QprobError> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn hermitian_deviation(&self) -> T {
        self.sub(&self.adjoint()).expect("same dim").frobenius_norm()
    }

    /// Eigenvalues of the Hermitian part `(M + M†)/2`, ascending.
    ///
    /// Uses cyclic Jacobi on the real symmetric embedding `[[Re, -Im], [Im, Re]]`,
    /// whose spectrum is the Hermitian spectrum with every value doubled.
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        let n = self.dim;
        let half = T::lit(0.5);
        let h = self.add(&self.adjoint()).expect("same dim").scale(Complex::new(half, T::zero()));
        let size = 2 * n;
        let mut a = vec![T::zero(); size * size];
        for i in 0..n {
            for j in 0..n {
                let c = h[(i, j)];
                a[i * size + j] = c.re;
                a[(i + n) * size + (j + n)] = c.re;
                a[i * size + (j + n)] = -c.im;
                a[(i + n) * size + j] = c.im;
            }
        }
        let mut eig = jacobi_eigenvalues(&mut a, size);
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        eig.into_iter().step_by(2).collect()
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                (0..self.dim).fold(Complex::new(T::zero(), T::zero()), |acc, j| acc + self[(i, j)] * v[j])
            })
            .collect()
    }
}

impl<T> std::ops::Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.dim + j]
    }
}

fn jacobi_eigenvalues<T: Real>(a: &mut [T], n: usize) -> Vec<T> {
    let off = |a: &[T]| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s = s + a[i * n + j] * a[i * n + j];
                }
            }
        }
        s
    };
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs())).max(T::one());
    let threshold = T::epsilon() * T::epsilon() * scale * scale;
    for _sweep in 0..64 {
        if off(a) <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Two-particle state: Hermitian, unit trace, positive semidefinite 4×4.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator<T> {
    matrix: ComplexMatrix<T>,
}

impl<T: Real> DensityOperator<T> {
    pub fn new(matrix: ComplexMatrix<T>) -> Result<Self, QprobError> {
        if matrix.dim() != 4 {
            return Err(QprobError::DimensionMismatch { left: matrix.dim(), right: 4 });
        }
        let dev = matrix.hermitian_deviation();
        if dev > T::tol(HERMITIAN_TOL) {
            return Err(QprobError::NotHermitian { deviation: dev.to_f64().unwrap_or(f64::NAN) });
        }
        let tr = matrix.trace();
        if (tr.re - T::one()).abs() > T::tol(TRACE_TOL) || tr.im.abs() > T::tol(TRACE_TOL) {
            return Err(QprobError::BadTrace {
                trace: tr.re.to_f64().unwrap_or(f64::NAN),
                expected: 1.0,
            });
        }
        let min = matrix.hermitian_eigenvalues()[0];
        if min < -T::tol(PSD_TOL) {
            return Err(QprobError::NotPositive { min_eigenvalue: min.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    /// `tr(W²)`.
    pub fn purity(&self) -> T {
        self.matrix.mul(&self.matrix).expect("4x4").trace().re
    }
}

/// Orthogonal projector on the two-particle space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorEvent<T> {
    matrix: ComplexMatrix<T>,
}

impl<T: Real> ProjectorEvent<T> {
    pub fn new(matrix: ComplexMatrix<T>) -> Result<Self, QprobError> {
        if matrix.dim() != 4 {
            return Err(QprobError::DimensionMismatch { left: matrix.dim(), right: 4 });
        }
        let dev = matrix.hermitian_deviation();
        if dev > T::tol(HERMITIAN_TOL) {
            return Err(QprobError::NotHermitian { deviation: dev.to_f64().unwrap_or(f64::NAN) });
        }
        let idem = matrix.mul(&matrix)?.sub(&matrix)?.frobenius_norm();
        if idem > T::tol(IDEMPOTENT_TOL) {
            return Err(QprobError::NotIdempotent { deviation: idem.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    /// Complement `I - P`.
    pub fn complement(&self) -> Self {
        Self {
            matrix: ComplexMatrix::identity(4).sub(&self.matrix).expect("4x4"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wing {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

/// A two-component spin state.
pub type Spinor<T> = [Complex<T>; 2];

/// Eigenvectors of `σ·v` for eigenvalues +1 and −1.
///
/// With polar angle θ and azimuth φ:
/// `ψ₊ = (cos θ/2, e^{iφ} sin θ/2)`, `ψ₋ = (−e^{−iφ} sin θ/2, cos θ/2)`.
pub fn spin_eigenvectors<T: Real>(v: &Direction<T>) -> Result<(Spinor<T>, Spinor<T>), QprobError> {
    let v = Direction::new(v.x, v.y, v.z)?;
    let (polar, azimuth) = v.angles();
    let half = polar * T::lit(0.5);
    let (s, c) = half.sin_cos();
    let phase = Complex::from_polar(T::one(), azimuth);
    let zero = T::zero();
    let up = [Complex::new(c, zero), phase * s];
    let down = [-(phase.conj() * s), Complex::new(c, zero)];
    Ok((up, down))
}

/// `σ·v` as a 2×2 matrix.
pub fn spin_operator<T: Real>(v: &Direction<T>) -> ComplexMatrix<T> {
    let [x, y, z] = v.components();
    let zero = T::zero();
    ComplexMatrix::from_rows(&[
        vec![Complex::new(z, zero), Complex::new(x, -y)],
        vec![Complex::new(x, y), Complex::new(-z, zero)],
    ])
}

fn kron_vec<T: Real>(a: &[Complex<T>; 2], b: &[Complex<T>; 2]) -> [Complex<T>; 4] {
    [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
}

/// Singlet built from the eigenbasis along `v`.
pub fn singlet_state_along<T: Real>(v: &Direction<T>) -> Result<DensityOperator<T>, QprobError> {
    let (up, down) = spin_eigenvectors(v)?;
    let ud = kron_vec(&up, &down);
    let du = kron_vec(&down, &up);
    let norm = T::one() / T::lit(2.0).sqrt();
    let psi: Vec<Complex<T>> = ud.iter().zip(&du).map(|(a, b)| (a - b) * norm).collect();
    DensityOperator::new(ComplexMatrix::outer(&psi, &psi))
}

/// Projector onto the singlet state.
pub fn singlet_state<T: Real>() -> DensityOperator<T> {
    singlet_state_along(&Direction::z()).expect("z is a unit direction")
}

/// Spin-outcome event on one wing: `P ⊗ I` (left) or `I ⊗ P` (right).
pub fn spin_event<T: Real>(wing: Wing, spin: Spin, d: &Direction<T>) -> Result<ProjectorEvent<T>, QprobError> {
    let (up, down) = spin_eigenvectors(d)?;
    let psi = match spin {
        Spin::Up => up,
        Spin::Down => down,
    };
    let p = ComplexMatrix::outer(&psi, &psi);
    let id = ComplexMatrix::identity(2);
    let m = match wing {
        Wing::Left => p.kron(&id),
        Wing::Right => id.kron(&p),
    };
    ProjectorEvent::new(m)
}

pub fn up_event<T: Real>(wing: Wing, d: &Direction<T>) -> Result<ProjectorEvent<T>, QprobError> {
    spin_event(wing, Spin::Up, d)
}

/// `tr(W · P₁ ⋯ P_k)` for pairwise commuting events.
pub fn quantum_prob<T: Real>(w: &DensityOperator<T>, events: &[ProjectorEvent<T>]) -> Result<T, QprobError> {
    if events.is_empty() {
        return Err(QprobError::NoEvents);
    }
    for (i, p) in events.iter().enumerate() {
        for (j, q) in events.iter().enumerate().skip(i + 1) {
            let norm = p.matrix.commutator(&q.matrix)?.frobenius_norm();
            if norm > T::tol(COMMUTE_TOL) {
                return Err(QprobError::NonCommuting {
                    first: i,
                    second: j,
                    norm: norm.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    let mut product = events[0].matrix.clone();
    for e in &events[1..] {
        product = product.mul(&e.matrix)?;
    }
    Ok(w.matrix.mul(&product)?.trace().re)
}

/// Closed form for the singlet: `½ sin²(θ/2)`.
pub fn singlet_joint_up_closed_form<T: Real>(angle: T) -> T {
    let s = (angle * T::lit(0.5)).sin();
    T::lit(0.5) * s * s
}

/// Measurement directions `a₁, a₂` (left) and `b₁, b₂` (right).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry<T> {
    pub a: [Direction<T>; 2],
    pub b: [Direction<T>; 2],
}

impl<T: Real> Geometry<T> {
    /// Coplanar settings given as angles in degrees in the x–z plane.
    pub fn planar_degrees(a1: T, a2: T, b1: T, b2: T) -> Self {
        Self {
            a: [Direction::in_plane_degrees(a1), Direction::in_plane_degrees(a2)],
            b: [Direction::in_plane_degrees(b1), Direction::in_plane_degrees(b2)],
        }
    }

    /// ∢(a₁,b₁) = ∢(a₁,b₂) = ∢(a₂,b₂) = 120° and ∢(a₂,b₁) = 0.
    pub fn violating() -> Self {
        Self::planar_degrees(T::zero(), T::lit(120.0), T::lit(120.0), T::lit(240.0))
    }

    /// All four settings along the same axis.
    pub fn aligned() -> Self {
        Self::planar_degrees(T::zero(), T::zero(), T::zero(), T::zero())
    }

    /// Every left setting orthogonal to every right setting.
    pub fn orthogonal() -> Self {
        Self {
            a: [Direction::z(), Direction::z().neg()],
            b: [Direction::x(), Direction::y()],
        }
    }

    /// `∢(a_i, b_j)` in radians, indexed `[i][j]`.
    pub fn angles(&self) -> [[T; 2]; 2] {
        [
            [self.a[0].angle_to(&self.b[0]), self.a[0].angle_to(&self.b[1])],
            [self.a[1].angle_to(&self.b[0]), self.a[1].angle_to(&self.b[1])],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn rand_dir(polar: f64, az: f64) -> Direction<f64> {
        Direction::from_angles(polar, az)
    }

    #[test]
    fn z_eigenvectors_are_computational_basis() {
        let (up, down) = spin_eigenvectors(&Direction::<f64>::z()).unwrap();
        assert_eq!(up, [Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)]);
        assert_abs_diff_eq!(down[0].norm(), 0.0);
        assert_abs_diff_eq!(down[1].re, 1.0);
    }

    #[test]
    fn x_eigenvector_is_plus_state() {
        let (up, _) = spin_eigenvectors(&Direction::<f64>::x()).unwrap();
        let r = 1.0 / 2f64.sqrt();
        // Only defined up to a global phase; compare moduli and relative phase.
        assert_abs_diff_eq!(up[0].norm(), r, epsilon = 1e-15);
        assert_abs_diff_eq!(up[1].norm(), r, epsilon = 1e-15);
        assert_abs_diff_eq!((up[1] / up[0]).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn south_pole_uses_zero_azimuth() {
        let (up, down) = spin_eigenvectors(&Direction::new(-0.0, -0.0, -1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(up[1].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(down[0].re, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn non_unit_direction_rejected() {
        assert!(matches!(Direction::new(1.0, 1.0, 0.0), Err(QprobError::NotUnit { .. })));
        assert!(Direction::<f64>::normalized(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn singlet_is_pure_and_basis_independent() {
        let wz = singlet_state_along(&Direction::<f64>::z()).unwrap();
        let wx = singlet_state_along(&Direction::<f64>::x()).unwrap();
        let diff = wz.matrix().sub(wx.matrix()).unwrap().frobenius_norm();
        assert!(diff < 1e-12, "{diff}");
        assert_abs_diff_eq!(wz.matrix().trace().re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wz.purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn left_up_z_is_diag_1100() {
        let p = up_event(Wing::Left, &Direction::<f64>::z()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j && i < 2 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(p.matrix()[(i, j)].re, expect, epsilon = 1e-15);
                assert_abs_diff_eq!(p.matrix()[(i, j)].im, 0.0, epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(p.matrix().trace().re, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn violating_geometry_values() {
        let w = singlet_state::<f64>();
        let a = Direction::in_plane_degrees(0.0);
        let b = Direction::in_plane_degrees(120.0);
        let la = up_event(Wing::Left, &a).unwrap();
        let rb = up_event(Wing::Right, &b).unwrap();
        let ra = up_event(Wing::Right, &a).unwrap();
        assert_abs_diff_eq!(quantum_prob(&w, std::slice::from_ref(&la)).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(quantum_prob(&w, &[la.clone(), rb]).unwrap(), 0.375, epsilon = 1e-10);
        assert_abs_diff_eq!(quantum_prob(&w, &[la.clone(), ra]).unwrap(), 0.0, epsilon = 1e-10);
        let rneg = up_event(Wing::Right, &a.neg()).unwrap();
        assert_abs_diff_eq!(quantum_prob(&w, &[la, rneg]).unwrap(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn non_commuting_events_rejected() {
        let w = singlet_state::<f64>();
        let p = up_event(Wing::Left, &Direction::z()).unwrap();
        let q = up_event(Wing::Left, &Direction::x()).unwrap();
        assert!(matches!(quantum_prob(&w, &[p, q]), Err(QprobError::NonCommuting { first: 0, second: 1, .. })));
        assert_eq!(quantum_prob(&w, &[]), Err(QprobError::NoEvents));
    }

    #[test]
    fn invalid_density_operators_rejected() {
        let mut m = ComplexMatrix::<f64>::identity(4);
        assert!(matches!(DensityOperator::new(m.clone()), Err(QprobError::BadTrace { .. })));
        m = m.scale(Complex::new(0.25, 0.0));
        assert!(DensityOperator::new(m.clone()).is_ok());
        m[(0, 1)] = Complex::new(0.0, 0.1);
        assert!(matches!(DensityOperator::new(m.clone()), Err(QprobError::NotHermitian { .. })));
        let mut neg = ComplexMatrix::<f64>::zeros(4);
        neg[(0, 0)] = Complex::new(1.5, 0.0);
        neg[(1, 1)] = Complex::new(-0.5, 0.0);
        assert!(matches!(DensityOperator::new(neg), Err(QprobError::NotPositive { .. })));
        assert!(matches!(
            DensityOperator::new(ComplexMatrix::<f64>::identity(2)),
            Err(QprobError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn eigenvalues_of_known_matrix() {
        let w = singlet_state::<f64>();
        let eig = w.matrix().hermitian_eigenvalues();
        let expect = [0.0, 0.0, 0.0, 1.0];
        for (e, x) in eig.iter().zip(expect) {
            assert_abs_diff_eq!(*e, x, epsilon = 1e-12);
        }
    }

    #[test]
    fn geometry_angles() {
        let g = Geometry::<f64>::violating().angles();
        let deg = |r: f64| r.to_degrees();
        assert_abs_diff_eq!(deg(g[0][0]), 120.0, epsilon = 1e-9);
        assert_abs_diff_eq!(deg(g[0][1]), 120.0, epsilon = 1e-9);
        assert_abs_diff_eq!(deg(g[1][0]), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(deg(g[1][1]), 120.0, epsilon = 1e-9);
        for row in Geometry::<f64>::orthogonal().angles() {
            for a in row {
                assert_abs_diff_eq!(deg(a), 90.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn f32_singlet_marginal() {
        let w = singlet_state::<f32>();
        let p = up_event(Wing::Right, &Direction::<f32>::from_angles(1.0, 2.0)).unwrap();
        assert!((quantum_prob(&w, &[p]).unwrap() - 0.5).abs() < 1e-5);
    }

    fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let [x, y, z] = axis.map(|v| v / n);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    }

    proptest! {
        #[test]
        fn eigenvectors_orthonormal(polar in 0.0..std::f64::consts::PI, az in -3.2..3.2f64) {
            let v = rand_dir(polar, az);
            let (up, down) = spin_eigenvectors(&v).unwrap();
            let ip = up[0].conj() * down[0] + up[1].conj() * down[1];
            prop_assert!(ip.norm() < 1e-12);
            let s = spin_operator(&v);
            let su = s.apply(&up);
            let sd = s.apply(&down);
            for k in 0..2 {
                prop_assert!((su[k] - up[k]).norm() < 1e-12);
                prop_assert!((sd[k] + down[k]).norm() < 1e-12);
            }
        }

        #[test]
        fn joint_matches_closed_form(p1 in 0.0..3.15f64, a1 in -3.2..3.2f64, p2 in 0.0..3.15f64, a2 in -3.2..3.2f64) {
            let w = singlet_state::<f64>();
            let a = rand_dir(p1, a1);
            let b = rand_dir(p2, a2);
            let la = up_event(Wing::Left, &a).unwrap();
            let rb = up_event(Wing::Right, &b).unwrap();
            let q = quantum_prob(&w, &[la.clone(), rb.clone()]).unwrap();
            prop_assert!((q - singlet_joint_up_closed_form(a.angle_to(&b))).abs() < 1e-10);
            prop_assert!((quantum_prob(&w, std::slice::from_ref(&la)).unwrap() - 0.5).abs() < 1e-12);
            prop_assert!(la.matrix().commutator(rb.matrix()).unwrap().frobenius_norm() < 1e-12);
            let ra_up = up_event(Wing::Right, &a).unwrap();
            let ra_down = spin_event(Wing::Right, Spin::Down, &a).unwrap();
            let total = quantum_prob(&w, &[la.clone(), ra_up]).unwrap()
                + quantum_prob(&w, &[la, ra_down]).unwrap();
            prop_assert!((total - 0.5).abs() < 1e-12);
        }

        #[test]
        fn rotation_invariance(p1 in 0.0..3.15f64, a1 in -3.2..3.2f64, p2 in 0.0..3.15f64, a2 in -3.2..3.2f64,
                               ax in prop::array::uniform3(-1.0..1.0f64), ang in -3.2..3.2f64) {
            prop_assume!(ax.iter().map(|v| v * v).sum::<f64>() > 1e-3);
            let w = singlet_state::<f64>();
            let r = rotation(ax, ang);
            let a = rand_dir(p1, a1);
            let b = rand_dir(p2, a2);
            let q = |a: &Direction<f64>, b: &Direction<f64>| {
                quantum_prob(&w, &[up_event(Wing::Left, a).unwrap(), up_event(Wing::Right, b).unwrap()]).unwrap()
            };
            prop_assert!((q(&a, &b) - q(&a.rotated(&r), &b.rotated(&r))).abs() < 1e-10);
        }
    }
}
