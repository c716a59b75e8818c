//! Small fixed-size tensor kernel and rotation algebra.
//!
//! Matrices are row-major. `anti`/`axl` identify `so(3)` with `R^3` so that
//! `anti(v) * xi == v.cross(xi)`.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Skew-symmetry tolerance accepted by [`axl`].
pub const SKEW_TOL: f64 = 1e-12;
/// Unit-norm tolerance for rotation axes.
pub const UNIT_TOL: f64 = 1e-10;
/// Fixed-axis tolerance for [`extract_angle`].
pub const AXIS_TOL: f64 = 1e-8;
/// Orthonormality tolerance of [`Rotation`].
pub const ORTHO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn e1() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn e2() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    pub fn e3() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn norm_inf(self) -> T {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self * (T::one() / n))
        } else {
            None
        }
    }

    /// Tensor product `self ⊗ o`.
    pub fn outer(self, o: Self) -> Mat3<T> {
        let a = self.to_array();
        let b = o.to_array();
        Mat3::from_fn(|i, j| a[i] * b[j])
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// 3×3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn from_rows(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        }
        Self { m }
    }

    pub fn from_cols(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> Self {
        let cols = [a.to_array(), b.to_array(), c.to_array()];
        Self::from_fn(|i, j| cols[j][i])
    }

    pub fn zeros() -> Self {
        Self::from_fn(|_, _| T::zero())
    }

    pub fn identity() -> Self {
        Self::diag(T::one(), T::one(), T::one())
    }

    pub fn diag(a: T, b: T, c: T) -> Self {
        let d = [a, b, c];
        Self::from_fn(|i, j| if i == j { d[i] } else { T::zero() })
    }

    pub fn col(&self, j: usize) -> Vec3<T> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn row(&self, i: usize) -> Vec3<T> {
        Vec3::from_array(self.m[i])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.m[j][i])
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn det(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the cofactor matrix; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let (c0, c1, c2) = (self.col(0), self.col(1), self.col(2));
        // rows of the inverse are cross products of column pairs
        let r0 = c1.cross(c2) * (T::one() / d);
        let r1 = c2.cross(c0) * (T::one() / d);
        let r2 = c0.cross(c1) * (T::one() / d);
        Some(Self::from_rows([r0.to_array(), r1.to_array(), r2.to_array()]))
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_fn(|i, j| self.m[i][j] * s)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn norm_squared(&self) -> T {
        let mut s = T::zero();
        for row in &self.m {
            for &v in row {
                s += v * v;
            }
        }
        s
    }

    pub fn max_abs(&self) -> T {
        let mut s = T::zero();
        for row in &self.m {
            for &v in row {
                s = s.max(v.abs());
            }
        }
        s
    }

    pub fn sym(&self) -> Self {
        let h = T::lit(0.5);
        Self::from_fn(|i, j| h * (self.m[i][j] + self.m[j][i]))
    }

    pub fn skew(&self) -> Self {
        let h = T::lit(0.5);
        Self::from_fn(|i, j| h * (self.m[i][j] - self.m[j][i]))
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::from_fn(|i, j| {
            self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j]
        })
    }
}

impl<T: Real> Mul<Vec3<T>> for Mat3<T> {
    type Output = Vec3<T>;
    fn mul(self, v: Vec3<T>) -> Vec3<T> {
        self.mul_vec(v)
    }
}

impl<T: Real> Mul<T> for Mat3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> Add for Mat3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.m[i][j] + o.m[i][j])
    }
}

impl<T: Real> Sub for Mat3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.m[i][j] - o.m[i][j])
    }
}

impl<T: Real> Neg for Mat3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

/// 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Real> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    /// Counter-clockwise planar rotation by `theta`.
    pub fn rotation(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let r = T::one() / d;
        Some(Self::new(
            self.m[1][1] * r,
            -self.m[0][1] * r,
            -self.m[1][0] * r,
            self.m[0][0] * r,
        ))
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    pub fn sym(&self) -> Self {
        let off = T::lit(0.5) * (self.m[0][1] + self.m[1][0]);
        Self::new(self.m[0][0], off, off, self.m[1][1])
    }

    pub fn skew(&self) -> Self {
        let off = T::lit(0.5) * (self.m[0][1] - self.m[1][0]);
        Self::new(T::zero(), off, -off, T::zero())
    }

    pub fn norm_squared(&self) -> T {
        self.m.iter().flatten().fold(T::zero(), |s, &v| s + v * v)
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.m
            .iter()
            .flatten()
            .fold(T::zero(), |s, &v| s.max(v.abs()))
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = &self.m;
        let b = &o.m;
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl<T: Real> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl<T: Real> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o.scale(-T::one())
    }
}

/// Square matrices that split into symmetric and skew parts.
pub trait SymSkew: Sized + Copy {
    fn sym_skew(&self) -> (Self, Self);
}

impl<T: Real> SymSkew for Mat3<T> {
    fn sym_skew(&self) -> (Self, Self) {
        (self.sym(), self.skew())
    }
}

impl<T: Real> SymSkew for Mat2<T> {
    fn sym_skew(&self) -> (Self, Self) {
        (self.sym(), self.skew())
    }
}

/// `(sym M, skew M)` with `sym + skew == M`.
pub fn sym_skew<M: SymSkew>(m: &M) -> (M, M) {
    m.sym_skew()
}

/// The skew matrix with `anti(v) * xi == v × xi`.
pub fn anti<T: Real>(v: Vec3<T>) -> Mat3<T> {
    let z = T::zero();
    Mat3::from_rows([[z, -v.z, v.y], [v.z, z, -v.x], [-v.y, v.x, z]])
}

/// Inverse of [`anti`]; rejects matrices that are not skew within [`SKEW_TOL`].
pub fn axl<T: Real>(a: &Mat3<T>) -> Result<Vec3<T>> {
    axl_with_tol(a, T::tol(SKEW_TOL))
}

pub fn axl_with_tol<T: Real>(a: &Mat3<T>, tol: T) -> Result<Vec3<T>> {
    let defect = a.sym().max_abs();
    if !(defect <= tol) {
        return Err(Error::NotSkew {
            defect: defect.as_f64(),
        });
    }
    Ok(Vec3::new(a.m[2][1], a.m[0][2], a.m[1][0]))
}

/// Proper orthogonal 3×3 matrix. Deserialization validates the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "Mat3<T>", into = "Mat3<T>")]
pub struct Rotation<T> {
    m: Mat3<T>,
}

impl<T: Real> TryFrom<Mat3<T>> for Rotation<T> {
    type Error = Error;

    fn try_from(m: Mat3<T>) -> Result<Self> {
        Self::new(m)
    }
}

impl<T: Real> From<Rotation<T>> for Mat3<T> {
    fn from(r: Rotation<T>) -> Self {
        r.m
    }
}

impl<T: Real> Rotation<T> {
    pub fn identity() -> Self {
        Self {
            m: Mat3::identity(),
        }
    }

    /// Validates orthonormality and orientation at the default tolerance.
    pub fn new(m: Mat3<T>) -> Result<Self> {
        Self::new_with_tol(m, T::tol(ORTHO_TOL))
    }

    pub fn new_with_tol(m: Mat3<T>, tol: T) -> Result<Self> {
        let orth = orthonormality_defect(&m);
        let det = m.det();
        if !(orth <= tol) || !(det >= T::one() - tol) {
            return Err(Error::NotRotation {
                orth: orth.as_f64(),
                det: det.as_f64(),
            });
        }
        Ok(Self { m })
    }

    /// Wraps a matrix the caller knows to be a rotation up to rounding.
    pub fn from_matrix_unchecked(m: Mat3<T>) -> Self {
        Self { m }
    }

    #[inline]
    pub fn matrix(&self) -> &Mat3<T> {
        &self.m
    }

    pub fn into_matrix(self) -> Mat3<T> {
        self.m
    }

    pub fn transpose(&self) -> Self {
        Self {
            m: self.m.transpose(),
        }
    }

    pub fn compose(&self, o: &Self) -> Self {
        Self { m: self.m * o.m }
    }

    pub fn apply(&self, v: Vec3<T>) -> Vec3<T> {
        self.m.mul_vec(v)
    }

    pub fn col(&self, j: usize) -> Vec3<T> {
        self.m.col(j)
    }

    pub fn orthonormality_defect(&self) -> T {
        orthonormality_defect(&self.m)
    }

    /// Re-projects onto SO(3) through the polar factor; used to remove drift.
    pub fn reorthonormalize(&self) -> Self {
        match polar3(&self.m) {
            Ok((r, _)) => r,
            Err(_) => *self,
        }
    }
}

/// `max |QᵀQ − Id|` entrywise.
pub fn orthonormality_defect<T: Real>(m: &Mat3<T>) -> T {
    (m.transpose() * *m - Mat3::identity()).max_abs()
}

/// Euler–Rodrigues rotation by `alpha` about the unit `axis`:
/// `(1 − cos α) n⊗n + cos α Id + sin α Anti(n)`.
pub fn rodrigues<T: Real>(alpha: T, axis: Vec3<T>) -> Result<Rotation<T>> {
    let norm = axis.norm();
    if !((norm - T::one()).abs() <= T::tol(UNIT_TOL)) {
        return Err(Error::NonUnitAxis {
            norm: norm.as_f64(),
        });
    }
    Ok(rodrigues_unchecked(alpha, axis))
}

pub(crate) fn rodrigues_unchecked<T: Real>(alpha: T, n: Vec3<T>) -> Rotation<T> {
    let (s, c) = alpha.sin_cos();
    let m = n.outer(n).scale(T::one() - c) + Mat3::identity().scale(c) + anti(n).scale(s);
    Rotation { m }
}

/// Exponential map `so(3) → SO(3)` on rotation vectors, `exp(Anti(w))`.
pub fn exp_so3<T: Real>(w: Vec3<T>) -> Rotation<T> {
    let theta2 = w.norm_squared();
    let k = anti(w);
    let k2 = k * k;
    let (a, b) = if theta2 < T::lit(1e-8) {
        // Taylor coefficients of sin θ/θ and (1 − cos θ)/θ²
        (
            T::one() - theta2 / T::lit(6.0) + theta2 * theta2 / T::lit(120.0),
            T::lit(0.5) - theta2 / T::lit(24.0) + theta2 * theta2 / T::lit(720.0),
        )
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (T::one() - theta.cos()) / theta2)
    };
    Rotation {
        m: Mat3::identity() + k.scale(a) + k2.scale(b),
    }
}

/// Rotation angle about a known axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AngleExtraction<T> {
    pub sin_a: T,
    pub cos_a: T,
    pub alpha: T,
}

/// Extracts `(sin α, cos α, α)` of a rotation about `axis` from the trace
/// identities `cos α = (tr Q − 1)/2` and `sin α = −tr(Anti(n) Q)/2`.
/// `alpha` is the two-argument arctangent moved to the `2π` branch closest to
/// `branch_hint`.
pub fn extract_angle<T: Real>(
    q: &Rotation<T>,
    axis: Vec3<T>,
    branch_hint: T,
) -> Result<AngleExtraction<T>> {
    extract_angle_with_tol(q, axis, branch_hint, T::tol(AXIS_TOL))
}

pub fn extract_angle_with_tol<T: Real>(
    q: &Rotation<T>,
    axis: Vec3<T>,
    branch_hint: T,
    tol: T,
) -> Result<AngleExtraction<T>> {
    let norm = axis.norm();
    if !((norm - T::one()).abs() <= T::tol(UNIT_TOL).max(tol)) {
        return Err(Error::NonUnitAxis {
            norm: norm.as_f64(),
        });
    }
    let defect = (q.apply(axis) - axis).norm();
    if !(defect <= tol) {
        return Err(Error::AxisMismatch {
            defect: defect.as_f64(),
        });
    }
    Ok(angle_about_axis(q.matrix(), axis, branch_hint))
}

/// Same trace formulas without the fixed-axis check. For a rotation that is
/// not about `axis` this returns the in-plane component of the rotation.
pub fn angle_about_axis<T: Real>(q: &Mat3<T>, axis: Vec3<T>, branch_hint: T) -> AngleExtraction<T> {
    let half = T::lit(0.5);
    let cos_a = (q.trace() - T::one()) * half;
    let sin_a = -(anti(axis) * *q).trace() * half;
    let base = sin_a.atan2(cos_a);
    let alpha = nearest_branch(base, branch_hint);
    AngleExtraction {
        sin_a,
        cos_a,
        alpha,
    }
}

/// `angle + 2πk` closest to `hint`.
pub fn nearest_branch<T: Real>(angle: T, hint: T) -> T {
    let two_pi = T::TAU();
    let k = ((hint - angle) / two_pi).round();
    angle + k * two_pi
}

/// Maximum number of cyclic Jacobi sweeps in [`sym_eigen3`].
const JACOBI_SWEEPS: usize = 64;

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are the eigenvectors.
pub fn sym_eigen3<T: Real>(a: &Mat3<T>) -> ([T; 3], Mat3<T>) {
    let mut a = a.sym();
    let mut v = Mat3::identity();
    let scale = a.max_abs();
    if scale == T::zero() {
        return ([T::zero(); 3], v);
    }
    for _ in 0..JACOBI_SWEEPS {
        let off = a.m[0][1].abs() + a.m[0][2].abs() + a.m[1][2].abs();
        if off <= T::epsilon() * T::lit(1e-3) * scale {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a.m[p][q];
            if apq == T::zero() {
                continue;
            }
            let theta = (a.m[q][q] - a.m[p][p]) / (T::lit(2.0) * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            // A ← Jᵀ A J with J the (p, q) Givens rotation
            let mut j = Mat3::identity();
            j.m[p][p] = c;
            j.m[q][q] = c;
            j.m[p][q] = s;
            j.m[q][p] = -s;
            a = j.transpose() * a * j;
            a.m[p][q] = T::zero();
            a.m[q][p] = T::zero();
            v = v * j;
        }
    }
    ([a.m[0][0], a.m[1][1], a.m[2][2]], v)
}

/// Polar decomposition `F = R U` with `U = sqrt(FᵀF)` symmetric
/// positive-definite, from the eigen-decomposition of `FᵀF`.
pub fn polar3<T: Real>(f: &Mat3<T>) -> Result<(Rotation<T>, Mat3<T>)> {
    let det = f.det();
    if !(det > T::zero()) {
        return Err(Error::Singular { det: det.as_f64() });
    }
    let c = f.transpose() * *f;
    let (lambda, v) = sym_eigen3(&c);
    if lambda.iter().any(|&l| !(l > T::zero())) {
        return Err(Error::Singular { det: det.as_f64() });
    }
    let sq = lambda.map(|l| l.sqrt());
    let u = v * Mat3::diag(sq[0], sq[1], sq[2]) * v.transpose();
    let u_inv =
        v * Mat3::diag(T::one() / sq[0], T::one() / sq[1], T::one() / sq[2]) * v.transpose();
    let r = *f * u_inv;
    Ok((Rotation { m: r }, u.sym()))
}
