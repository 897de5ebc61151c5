//! 2×2 real and complex matrices with closed-form spectral norms and
//! log-scaled products that do not overflow for long cocycle products.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|tr| - 2` used by [`classify`].
pub const PARABOLIC_TOL: f64 = 1e-10;
const UNIMODULAR_TOL: f64 = 1e-12;
const GROUP_TOL: f64 = 1e-12;

/// Scalar field of a matrix: real for Schrödinger cocycles, complex for Szegő cocycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Real,
    Complex,
}

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const FLAVOR: Flavor;
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn norm_sqr(self) -> f64;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn scale(self, k: f64) -> Self;
    fn to_complex(self) -> Complex64;

    fn abs(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    fn is_finite(self) -> bool {
        self.re().is_finite() && self.im().is_finite()
    }
}

impl Scalar for f64 {
    const FLAVOR: Flavor = Flavor::Real;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
}

impl Scalar for Complex64 {
    const FLAVOR: Flavor = Flavor::Complex;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2<S> {
    pub a: S,
    pub b: S,
    pub c: S,
    pub d: S,
}

pub type RMat2 = Mat2<f64>;
pub type CMat2 = Mat2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conjugacy {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl<S: Scalar> Mat2<S> {
    pub fn new(a: S, b: S, c: S, d: S) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn identity() -> Self {
        Mat2::new(S::one(), S::zero(), S::zero(), S::one())
    }

    pub fn diag(p: S, q: S) -> Self {
        Mat2::new(p, S::zero(), S::zero(), q)
    }

    pub fn det(&self) -> S {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> S {
        self.a + self.d
    }

    pub fn mul(&self, o: &Mat2<S>) -> Mat2<S> {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn scale(&self, k: f64) -> Mat2<S> {
        Mat2::new(self.a.scale(k), self.b.scale(k), self.c.scale(k), self.d.scale(k))
    }

    pub fn transpose(&self) -> Mat2<S> {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn adjoint(&self) -> Mat2<S> {
        Mat2::new(self.a.conj(), self.c.conj(), self.b.conj(), self.d.conj())
    }

    /// Classical adjugate; equals the inverse for determinant one.
    pub fn adjugate(&self) -> Mat2<S> {
        Mat2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn inverse(&self) -> Result<Mat2<S>> {
        let det = self.det();
        if det.norm_sqr() == 0.0 || !det.is_finite() {
            return Err(Error::InvalidMatrix("singular matrix has no inverse".into()));
        }
        let adj = self.adjugate();
        Ok(Mat2::new(adj.a / det, adj.b / det, adj.c / det, adj.d / det))
    }

    pub fn entries(&self) -> [S; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|e| e.is_finite())
    }

    pub fn max_abs_diff(&self, o: &Mat2<S>) -> f64 {
        let x = self.entries();
        let y = o.entries();
        (0..4).map(|i| (x[i] - y[i]).abs()).fold(0.0, f64::max)
    }

    pub fn to_complex(&self) -> CMat2 {
        Mat2::new(
            self.a.to_complex(),
            self.b.to_complex(),
            self.c.to_complex(),
            self.d.to_complex(),
        )
    }

    /// Spectral norm without validation; see [`op_norm`].
    pub fn norm(&self) -> f64 {
        let big = self.entries().iter().map(|e| e.abs()).fold(0.0, f64::max);
        if big == 0.0 {
            return 0.0;
        }
        let m = self.scale(1.0 / big);
        let s: f64 = m.entries().iter().map(|e| e.norm_sqr()).sum();
        let det = m.det().abs();
        let disc = (s * s - 4.0 * det * det).max(0.0);
        big * ((s + disc.sqrt()) / 2.0).max(0.0).sqrt()
    }

    /// Unimodularity up to rounding that scales with the squared entries.
    pub fn is_unimodular(&self, tol: f64) -> bool {
        let s: f64 = self.entries().iter().map(|e| e.norm_sqr()).sum();
        (self.det() - S::one()).abs() <= tol * s.max(1.0)
    }
}

/// Largest singular value, via `sqrt((s + sqrt(s² − 4|det|²))/2)` with `s` the
/// squared Frobenius norm.
pub fn op_norm<S: Scalar>(m: &Mat2<S>) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    Ok(m.norm())
}

pub fn classify<S: Scalar>(m: &Mat2<S>) -> Result<Conjugacy> {
    classify_with_tol(m, PARABOLIC_TOL)
}

pub fn classify_with_tol<S: Scalar>(m: &Mat2<S>, tol: f64) -> Result<Conjugacy> {
    if !m.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    if !m.is_unimodular(UNIMODULAR_TOL) {
        return Err(Error::InvalidMatrix(format!(
            "determinant {:?} is not 1",
            m.det()
        )));
    }
    let tr = m.trace();
    let scale = m.norm().max(1.0);
    if tr.im().abs() > UNIMODULAR_TOL * scale {
        return Err(Error::InvalidMatrix("trace is not real".into()));
    }
    let t = tr.re().abs();
    Ok(if (t - 2.0).abs() <= tol {
        Conjugacy::Parabolic
    } else if t < 2.0 {
        Conjugacy::Elliptic
    } else {
        Conjugacy::Hyperbolic
    })
}

/// Membership in SU(1,1): `det m = 1` and `m* J m = J` with `J = diag(1, −1)`.
/// Tolerances are relative to `max(1, ‖m‖_F²)` because both identities are quadratic in the entries.
pub fn su11_check(m: &CMat2) -> bool {
    if !m.is_finite() {
        return false;
    }
    let s: f64 = m.entries().iter().map(|e| e.norm_sqr()).sum();
    let tol = GROUP_TOL * s.max(1.0);
    if (m.det() - Complex64::new(1.0, 0.0)).norm() > tol {
        return false;
    }
    let jm = Mat2::new(m.a, m.b, -m.c, -m.d);
    let q = m.adjoint().mul(&jm);
    let j = Mat2::diag(Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0));
    q.max_abs_diff(&j) <= tol
}

/// A matrix stored as `exp(logmag) · body` with `‖body‖ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledMat2<S> {
    pub body: Mat2<S>,
    pub logmag: f64,
}

pub type RScaled = ScaledMat2<f64>;
pub type CScaled = ScaledMat2<Complex64>;

impl<S: Scalar> ScaledMat2<S> {
    pub fn identity() -> Self {
        ScaledMat2 {
            body: Mat2::identity(),
            logmag: 0.0,
        }
    }

    pub fn from_mat(m: &Mat2<S>) -> Result<Self> {
        let n = op_norm(m)?;
        if n == 0.0 {
            return Err(Error::InvalidMatrix("zero matrix cannot be scaled".into()));
        }
        Ok(ScaledMat2 {
            body: m.scale(1.0 / n),
            logmag: n.ln(),
        })
    }

    fn renormalized(body: Mat2<S>, logmag: f64) -> Result<Self> {
        let n = op_norm(&body)?;
        if n == 0.0 {
            return Err(Error::InvalidMatrix("product underflowed to zero".into()));
        }
        Ok(ScaledMat2 {
            body: body.scale(1.0 / n),
            logmag: logmag + n.ln(),
        })
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &ScaledMat2<S>) -> Result<Self> {
        Self::renormalized(self.body.mul(&rhs.body), self.logmag + rhs.logmag)
    }

    /// In-place `self ← m · self` for a plain (finite, invertible) factor.
    #[inline]
    pub fn push_left(&mut self, m: &Mat2<S>) {
        let p = m.mul(&self.body);
        let n = p.norm();
        self.body = p.scale(1.0 / n);
        self.logmag += n.ln();
    }

    /// In-place `self ← self · m`.
    #[inline]
    pub fn push_right(&mut self, m: &Mat2<S>) {
        let p = self.body.mul(m);
        let n = p.norm();
        self.body = p.scale(1.0 / n);
        self.logmag += n.ln();
    }

    /// `log ‖represented matrix‖`.
    pub fn log_norm(&self) -> f64 {
        self.logmag + self.body.norm().ln()
    }

    /// The represented matrix; overflows to infinity for large `logmag`.
    pub fn represented(&self) -> Mat2<S> {
        self.body.scale(self.logmag.exp())
    }

    pub fn represented_det(&self) -> S {
        self.body.det().scale((2.0 * self.logmag).exp())
    }

    /// Inverse of a represented matrix with determinant one (adjugate, same norm).
    pub fn inverse_unimodular(&self) -> Self {
        ScaledMat2 {
            body: self.body.adjugate(),
            logmag: self.logmag,
        }
    }

    pub fn transpose(&self) -> Self {
        ScaledMat2 {
            body: self.body.transpose(),
            logmag: self.logmag,
        }
    }
}

pub fn scaled_mul<S: Scalar>(x: &ScaledMat2<S>, y: &ScaledMat2<S>) -> Result<ScaledMat2<S>> {
    x.mul(y)
}
