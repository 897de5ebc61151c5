//! CMV operators with random Verblunsky coefficients: Szegő cocycles, truncations
//! with boundary phases, characteristic polynomials, Green functions, unit-circle
//! spectra, solution reconstruction and the exceptional-set detector.
//!
//! Conventions: `Θ(α) = [[ᾱ, ρ], [ρ, −α]]`; `L` carries `Θ(α_j)` on sites `(j, j+1)` for
//! even `j`, `M` for odd `j`, and `E = LM`. The truncation to `[a, b]` replaces
//! `α_{a−1}` by `τ1` and `α_b` by `τ2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::band::BandMatrix;
use crate::ensemble::{derive_seed, sample_window_stream, DistributionSpec, WordWindow, DISK_MARGIN};
use crate::error::{Error, Result};
use crate::lyapunov::{
    exceptional_for, per_sample, szego_generators, szego_power_ratio, two_scale, FurstenbergReport, LEEstimate,
    LE_TAG,
};
use crate::mat2::{classify_with_tol, CMat2, Conjugacy, Flavor, Mat2, ScaledMat2, PARABOLIC_TOL};
use crate::stats::mean_stderr;
use crate::tridiag::TridiagLu;

/// Tolerance on `|z| = 1` and `|τ| = 1`.
pub const UNIT_TOL: f64 = 1e-12;
/// Tolerance for the exceptional-set geometry.
pub const GEOMETRY_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rho_of(a: Complex64) -> f64 {
    (1.0 - a.norm_sqr()).max(0.0).sqrt()
}

fn check_circle(z: Complex64, what: &str) -> Result<()> {
    if (z.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidArgument(format!("{what} = {z} is not on the unit circle")));
    }
    Ok(())
}

/// Verblunsky coefficients on a window. With `half_line` the window starts at 0 and
/// `α_{−1} = −1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerblunskyWindow {
    pub origin: i64,
    pub alphas: Vec<Complex64>,
    pub half_line: bool,
}

impl VerblunskyWindow {
    pub fn new(origin: i64, alphas: Vec<Complex64>, half_line: bool) -> Result<Self> {
        if half_line && origin != 0 {
            return Err(Error::InvalidArgument("half-line windows start at 0".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(a.norm() <= 1.0 - DISK_MARGIN)) {
            return Err(Error::InvalidCoefficient(format!("|α| = {} is not inside the disk", a.norm())));
        }
        Ok(VerblunskyWindow {
            origin,
            alphas,
            half_line,
        })
    }

    pub fn from_word(w: &WordWindow<Complex64>, half_line: bool) -> Result<Self> {
        Self::new(w.origin, w.values.clone(), half_line)
    }

    pub fn lo(&self) -> i64 {
        self.origin
    }

    pub fn hi(&self) -> i64 {
        self.origin + self.alphas.len() as i64 - 1
    }

    pub fn alpha(&self, n: i64) -> Result<Complex64> {
        if self.half_line && n == -1 {
            return Ok(c(-1.0, 0.0));
        }
        if n < self.lo() || n > self.hi() {
            return Err(Error::WindowUnderflow {
                need_lo: n,
                need_hi: n,
                have_lo: self.lo(),
                have_hi: self.hi(),
            });
        }
        Ok(self.alphas[(n - self.origin) as usize])
    }

    pub fn rho(&self, n: i64) -> Result<f64> {
        Ok(rho_of(self.alpha(n)?))
    }
}

/// Boundary coefficient of a truncation: a unit-circle phase, or the window's own coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Phase(Complex64),
    Inherit,
}

impl Boundary {
    fn resolve(self, w: &VerblunskyWindow, index: i64) -> Result<Complex64> {
        match self {
            Boundary::Phase(t) => {
                check_circle(t, "boundary phase")?;
                Ok(t)
            }
            Boundary::Inherit => w.alpha(index),
        }
    }
}

/// Szegő step `S^z(α) = (1/ρ)[[z, −ᾱ], [−αz, 1]]` and its SU(1,1) normalization
/// `M^z(α) = z^{−1/2} S^z(α)` with `√(e^{iθ}) = e^{iθ/2}`, `θ ∈ (−π, π]`.
pub fn szego_step(z: Complex64, alpha: Complex64) -> Result<(CMat2, CMat2)> {
    check_circle(z, "z")?;
    if !(alpha.norm() < 1.0) {
        return Err(Error::InvalidCoefficient(format!("|α| = {} ≥ 1", alpha.norm())));
    }
    let s = unnormalized_step(z, alpha).scale(1.0 / rho_of(alpha));
    let half = Complex64::from_polar(1.0, -z.arg() / 2.0);
    let m = Mat2::new(s.a * half, s.b * half, s.c * half, s.d * half);
    Ok((s, m))
}

/// `ρ·S^z(α)`, polynomial in `z`.
fn unnormalized_step(z: Complex64, alpha: Complex64) -> CMat2 {
    Mat2::new(z, -alpha.conj(), -alpha * z, c(1.0, 0.0))
}

/// Tridiagonal complex matrix: `sub[i] = (i+1, i)`, `sup[i] = (i, i+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tri {
    pub sub: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub sup: Vec<Complex64>,
}

impl Tri {
    fn zeros(n: usize) -> Self {
        let z = c(0.0, 0.0);
        Tri {
            sub: vec![z; n.saturating_sub(1)],
            diag: vec![z; n],
            sup: vec![z; n.saturating_sub(1)],
        }
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        if i == k {
            self.diag[i]
        } else if k == i + 1 {
            self.sup[i]
        } else if i == k + 1 {
            self.sub[k]
        } else {
            c(0.0, 0.0)
        }
    }
}

/// `P_Λ E P_Λ*` for `Λ = [lo, hi]` with boundary coefficients `τ1 = α_{lo−1}`, `τ2 = α_hi`.
#[derive(Debug, Clone)]
pub struct CMVTruncation {
    pub lo: i64,
    pub hi: i64,
    pub tau1: Complex64,
    pub tau2: Complex64,
    pub l: Tri,
    pub m: Tri,
    /// Five-diagonal product `LM`.
    pub matrix: BandMatrix,
}

impl CMVTruncation {
    pub fn size(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        self.matrix.get(i, k)
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let n = self.size();
        (0..n).map(|i| (0..n).map(|k| self.get(i, k)).collect()).collect()
    }

    /// `max |(E*E − I)_{ik}|`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.size();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for k in i.saturating_sub(4)..=(i + 4).min(n - 1) {
                let lo = i.max(k).saturating_sub(2);
                let hi = (i.min(k) + 2).min(n - 1);
                let mut s = c(0.0, 0.0);
                for m in lo..=hi {
                    s += self.get(m, i).conj() * self.get(m, k);
                }
                if i == k {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    /// `z L* − M` restricted to the box (tridiagonal).
    pub fn green_operator(&self, z: Complex64) -> Tri {
        let n = self.size();
        let mut g = Tri::zeros(n);
        for i in 0..n {
            g.diag[i] = z * self.l.diag[i].conj() - self.m.diag[i];
        }
        for i in 0..n.saturating_sub(1) {
            g.sup[i] = z * self.l.sub[i].conj() - self.m.sup[i];
            g.sub[i] = z * self.l.sup[i].conj() - self.m.sub[i];
        }
        g
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.matrix.mul_vec(v)
    }
}

/// Builds the truncation of the window's CMV operator to `[lo, hi]`.
pub fn cmv_truncation(w: &VerblunskyWindow, lo: i64, hi: i64, b1: Boundary, b2: Boundary) -> Result<CMVTruncation> {
    if hi < lo {
        return Err(Error::InvalidArgument("empty box".into()));
    }
    if lo < w.lo() || hi > w.hi() {
        return Err(Error::WindowUnderflow {
            need_lo: lo,
            need_hi: hi,
            have_lo: w.lo(),
            have_hi: w.hi(),
        });
    }
    let tau1 = b1.resolve(w, lo - 1)?;
    let tau2 = b2.resolve(w, hi)?;
    let coeff = |j: i64| -> Result<Complex64> {
        if j == lo - 1 {
            Ok(tau1)
        } else if j == hi {
            Ok(tau2)
        } else {
            w.alpha(j)
        }
    };
    let n = (hi - lo + 1) as usize;
    let mut factors = [Tri::zeros(n), Tri::zeros(n)];
    for j in lo - 1..=hi {
        let f = &mut factors[j.rem_euclid(2) as usize];
        let a = coeff(j)?;
        let r = rho_of(a);
        if j >= lo {
            f.diag[(j - lo) as usize] = a.conj();
        }
        if j < hi {
            f.diag[(j + 1 - lo) as usize] = -a;
        }
        if j >= lo && j < hi {
            let i = (j - lo) as usize;
            f.sup[i] = c(r, 0.0);
            f.sub[i] = c(r, 0.0);
        }
    }
    let [l, m] = factors;
    let mut matrix = BandMatrix::zeros(n, 2, 2);
    for i in 0..n {
        for k in i.saturating_sub(2)..=(i + 2).min(n - 1) {
            let mut s = c(0.0, 0.0);
            for q in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                s += l.get(i, q) * m.get(q, k);
            }
            matrix.set(i, k, s);
        }
    }
    Ok(CMVTruncation {
        lo,
        hi,
        tau1,
        tau2,
        l,
        m,
        matrix,
    })
}

/// Complex number `mantissa · e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledComplex {
    pub mantissa: Complex64,
    pub log_scale: f64,
}

impl ScaledComplex {
    pub fn one() -> Self {
        ScaledComplex {
            mantissa: c(1.0, 0.0),
            log_scale: 0.0,
        }
    }

    pub fn value(&self) -> Complex64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }

    /// `|self/other − 1|`.
    pub fn rel_gap(&self, other: &ScaledComplex) -> f64 {
        if other.mantissa.norm() == 0.0 {
            return if self.mantissa.norm() == 0.0 { 0.0 } else { f64::INFINITY };
        }
        let ratio = self.mantissa / other.mantissa * (self.log_scale - other.log_scale).exp();
        (ratio - 1.0).norm()
    }
}

/// `φ(z)` of the box `[lo, hi]` with boundary coefficients `τ1 = α_{lo−1}`, `τ2 = α_hi`,
/// from the Szegő product:
/// `φ = (∏_{k=lo}^{hi−1} ρ_k) · [z, −τ̄2] · S^z(α_{hi−1})⋯S^z(α_lo) · [1; −τ1]`.
/// An empty box (`hi = lo − 1`) gives 1.
pub fn szego_charpoly(z: Complex64, w: &VerblunskyWindow, lo: i64, hi: i64, tau1: Complex64, tau2: Complex64) -> Result<ScaledComplex> {
    if hi == lo - 1 {
        return Ok(ScaledComplex::one());
    }
    if hi < lo {
        return Err(Error::InvalidArgument("negative box length".into()));
    }
    let mut p = ScaledMat2::identity();
    for k in lo..hi {
        p.push_left(&unnormalized_step(z, w.alpha(k)?));
    }
    let b = p.body;
    let col = [b.a - b.b * tau1, b.c - b.d * tau1];
    let mantissa = z * col[0] - tau2.conj() * col[1];
    Ok(ScaledComplex {
        mantissa,
        log_scale: p.logmag,
    })
}

/// `det(z − E)` by banded LU with partial pivoting.
pub fn determinant_charpoly(z: Complex64, t: &CMVTruncation) -> ScaledComplex {
    let n = t.size();
    let mut a = BandMatrix::zeros(n, 2, 2);
    for i in 0..n {
        for k in i.saturating_sub(2)..=(i + 2).min(n - 1) {
            let v = if i == k { z - t.get(i, k) } else { -t.get(i, k) };
            a.set(i, k, v);
        }
    }
    let lu = a.factor(0.0);
    let (l, ph) = lu.log_det();
    if !l.is_finite() {
        return ScaledComplex {
            mantissa: c(0.0, 0.0),
            log_scale: 0.0,
        };
    }
    ScaledComplex {
        mantissa: ph,
        log_scale: l,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmvCharPoly {
    pub determinant: ScaledComplex,
    pub transfer: ScaledComplex,
    pub rel_gap: f64,
}

/// `φ(z) = det(z − E_Λ)` computed by the banded determinant and by the Szegő product.
pub fn cmv_charpoly(z: Complex64, w: &VerblunskyWindow, lo: i64, hi: i64, b1: Boundary, b2: Boundary) -> Result<CmvCharPoly> {
    let t = cmv_truncation(w, lo, hi, b1, b2)?;
    let determinant = determinant_charpoly(z, &t);
    let transfer = szego_charpoly(z, w, lo, hi, t.tau1, t.tau2)?;
    Ok(CmvCharPoly {
        determinant,
        transfer,
        rel_gap: determinant.rel_gap(&transfer),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmvGreen {
    /// `|G(j,k)|` from boundary characteristic polynomials.
    pub magnitude: f64,
    /// `G(j,k)` from a direct solve of `(z L* − M) x = e_k`.
    pub direct: Complex64,
    pub rel_gap: f64,
}

/// Threshold on the normalized `|φ_Λ(z)|` below which `z` counts as an eigenvalue.
pub const CMV_EIGEN_GUARD: f64 = 1e-12;

fn guard(phi: &ScaledComplex) -> Result<()> {
    let m = phi.mantissa.norm();
    if m <= CMV_EIGEN_GUARD {
        return Err(Error::NearEigenvalue {
            condition: if m > 0.0 { 1.0 / m } else { f64::INFINITY },
        });
    }
    Ok(())
}

/// Entry `(j, k)` of `G = (z L*_Λ − M_Λ)^{−1}` with
/// `|G(j,k)| = ∏_{i=j}^{k−1} ρ_i · |φ_{[a,j−1]} φ_{[k+1,b]} / φ_{[a,b]}|` (`j ≤ k`), where
/// the partial boxes keep `τ1` (resp. `τ2`) on their outer side and the window's own
/// coefficient on the inner side.
#[allow(clippy::too_many_arguments)]
pub fn cmv_green(
    z: Complex64,
    w: &VerblunskyWindow,
    lo: i64,
    hi: i64,
    b1: Boundary,
    b2: Boundary,
    j: i64,
    k: i64,
) -> Result<CmvGreen> {
    if j < lo || k < lo || j > hi || k > hi {
        return Err(Error::InvalidArgument(format!("sites ({j}, {k}) outside [{lo}, {hi}]")));
    }
    let t = cmv_truncation(w, lo, hi, b1, b2)?;
    let total = szego_charpoly(z, w, lo, hi, t.tau1, t.tau2)?;
    guard(&total)?;
    let (p, q) = (j.min(k), j.max(k));
    let left = if p > lo {
        szego_charpoly(z, w, lo, p - 1, t.tau1, w.alpha(p - 1)?)?
    } else {
        ScaledComplex::one()
    };
    let right = if q < hi {
        szego_charpoly(z, w, q + 1, hi, w.alpha(q)?, t.tau2)?
    } else {
        ScaledComplex::one()
    };
    let mut log_rho = 0.0;
    for i in p..q {
        log_rho += w.rho(i)?.ln();
    }
    let magnitude = (log_rho + left.ln_abs() + right.ln_abs() - total.ln_abs()).exp();
    let g = t.green_operator(z);
    let lu = TridiagLu::factor(&g.sub, &g.diag, &g.sup, 0.0);
    let n = t.size();
    let mut col = vec![c(0.0, 0.0); n];
    col[(k - lo) as usize] = c(1.0, 0.0);
    lu.solve_in_place(&mut col);
    let direct = col[(j - lo) as usize];
    let rel_gap = if magnitude > 0.0 {
        (direct.norm() - magnitude).abs() / magnitude
    } else if direct.norm() == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(CmvGreen {
        magnitude,
        direct,
        rel_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmvSpectrum {
    /// Eigenvalue angles in `(−π, π]`, ascending.
    pub angles: Vec<f64>,
    pub points: Vec<Complex64>,
    pub vectors: Option<Vec<Vec<Complex64>>>,
    /// Largest `‖E v − z v‖_∞` over returned vectors (0 without vectors).
    pub max_residual: f64,
}

/// Angular tolerance of the root refinement.
pub const ANGLE_TOL: f64 = 1e-10;

/// Eigenvalues of a unitary truncation as the zeros of `φ` on the circle.
///
/// With `d = det E` and `s = √d`, `h(θ) = Re[φ(e^{iθ}) e^{−inθ/2} / (s iⁿ)]` is real up to
/// rounding and equals `±2ⁿ ∏ sin((θ − θ_k)/2)`, so its sign changes on a fine grid
/// bracket the eigenvalue angles.
pub fn cmv_spectrum(
    w: &VerblunskyWindow,
    lo: i64,
    hi: i64,
    b1: Boundary,
    b2: Boundary,
    grid_density: usize,
    want_vectors: bool,
) -> Result<CmvSpectrum> {
    if matches!(b1, Boundary::Inherit) && !(w.half_line && lo == 0) || matches!(b2, Boundary::Inherit) {
        return Err(Error::InvalidArgument("spectrum needs both boundary coefficients on the circle".into()));
    }
    let t = cmv_truncation(w, lo, hi, b1, b2)?;
    let n = t.size();
    let lu = t.matrix.clone().factor(0.0);
    let s = lu.det().sqrt();
    let i_n = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)][n % 4];
    let norm = s * i_n;
    let h = |theta: f64| -> Result<f64> {
        let z = Complex64::from_polar(1.0, theta);
        let phi = szego_charpoly(z, w, lo, hi, t.tau1, t.tau2)?;
        Ok((phi.mantissa * Complex64::from_polar(1.0, -(n as f64) * theta / 2.0) / norm).re)
    };
    let m = 16 * n * grid_density.max(1);
    let step = 2.0 * std::f64::consts::PI / m as f64;
    let theta0 = -std::f64::consts::PI + 0.5 * step;
    let values: Vec<f64> = (0..=m).map(|i| h(theta0 + i as f64 * step)).collect::<Result<_>>()?;
    let mut angles = Vec::with_capacity(n);
    for i in 0..m {
        let (va, vb) = (values[i], values[i + 1]);
        if (va >= 0.0) == (vb >= 0.0) {
            continue;
        }
        let (mut a, mut b) = (theta0 + i as f64 * step, theta0 + (i + 1) as f64 * step);
        let sa = va >= 0.0;
        while b - a > ANGLE_TOL {
            let mid = 0.5 * (a + b);
            if (h(mid)? >= 0.0) == sa {
                a = mid;
            } else {
                b = mid;
            }
        }
        let mut th = 0.5 * (a + b);
        if th > std::f64::consts::PI {
            th -= 2.0 * std::f64::consts::PI;
        }
        angles.push(th);
    }
    if angles.len() != n {
        return Err(Error::RootCountMismatch {
            found: angles.len(),
            expected: n,
        });
    }
    angles.sort_by(f64::total_cmp);
    let points: Vec<Complex64> = angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
    let (vectors, max_residual) = if want_vectors {
        let v = unitary_eigenvectors(&t, &points);
        let r = points
            .iter()
            .zip(&v)
            .map(|(z, x)| {
                t.apply(x)
                    .iter()
                    .zip(x)
                    .map(|(ex, xi)| (ex - z * xi).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        (Some(v), r)
    } else {
        (None, 0.0)
    };
    Ok(CmvSpectrum {
        angles,
        points,
        vectors,
        max_residual,
    })
}

fn unitary_eigenvectors(t: &CMVTruncation, points: &[Complex64]) -> Vec<Vec<Complex64>> {
    let n = t.size();
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for (k, &z) in points.iter().enumerate() {
        let mut a = BandMatrix::zeros(n, 2, 2);
        for i in 0..n {
            for q in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                let v = if i == q { t.get(i, q) - z } else { t.get(i, q) };
                a.set(i, q, v);
            }
        }
        let lu = a.factor(4.0 * f64::EPSILON);
        let mut state = derive_seed(0xC3F, k as u64);
        let mut x: Vec<Complex64> = (0..n)
            .map(|_| {
                state = derive_seed(state, 1);
                c(0.5 + (state >> 11) as f64 / (1u64 << 53) as f64, 0.0)
            })
            .collect();
        for _ in 0..4 {
            lu.solve_in_place(&mut x);
            for (prev, &zp) in out.iter().zip(points) {
                if (zp - z).norm() < 1e-3 {
                    let d: Complex64 = prev.iter().zip(&x).map(|(p, q)| p.conj() * q).sum();
                    if d.norm() > 1e-12 {
                        x.iter_mut().zip(prev).for_each(|(q, p)| *q -= d * p);
                    }
                }
            }
            let nrm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
        }
        out.push(x);
    }
    out
}

/// Solution of `E u = z u` for the whole-line operator built from the window, from
/// `(u(anchor), u(anchor − 1))`, returned on `lo..=hi`. Uses `M u = z L* u`.
#[allow(clippy::too_many_arguments)]
pub fn cmv_propagate(
    z: Complex64,
    w: &VerblunskyWindow,
    anchor: i64,
    u_anchor: Complex64,
    u_before: Complex64,
    lo: i64,
    hi: i64,
) -> Result<Vec<Complex64>> {
    if hi < lo {
        return Ok(Vec::new());
    }
    let a = lo.min(anchor - 1);
    let b = hi.max(anchor);
    let mut u = vec![c(0.0, 0.0); (b - a + 1) as usize];
    let idx = |n: i64| (n - a) as usize;
    u[idx(anchor)] = u_anchor;
    u[idx(anchor - 1)] = u_before;
    for n in anchor..b {
        let (am, an) = (w.alpha(n - 1)?, w.alpha(n)?);
        let (rm, rn) = (rho_of(am), rho_of(an));
        let (um, un) = (u[idx(n - 1)], u[idx(n)]);
        let next = if n.rem_euclid(2) == 0 {
            (rm * um - (am + z * an) * un) / (z * rn)
        } else {
            (z * rm * um - (z * am.conj() + an.conj()) * un) / rn
        };
        u[idx(n + 1)] = overflow_check(next)?;
    }
    let mut n = anchor - 1;
    while n > a {
        let (am, an) = (w.alpha(n - 1)?, w.alpha(n)?);
        let (rm, rn) = (rho_of(am), rho_of(an));
        let (up, un) = (u[idx(n + 1)], u[idx(n)]);
        let prev = if n.rem_euclid(2) == 0 {
            (z * rn * up + (am + z * an) * un) / rm
        } else {
            (rn * up + (z * am.conj() + an.conj()) * un) / (z * rm)
        };
        u[idx(n - 1)] = overflow_check(prev)?;
        n -= 1;
    }
    Ok(u[idx(lo)..=idx(hi)].to_vec())
}

fn overflow_check(v: Complex64) -> Result<Complex64> {
    if !v.is_finite() || v.norm() > 1e300 {
        return Err(Error::ScaleOverflow);
    }
    Ok(v)
}

/// Values of a global solution at the four sites next to the box edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmvBoundaryData {
    /// `u(a)`, `u(a+1)`.
    pub first: Complex64,
    pub second: Complex64,
    /// `u(b−1)`, `u(b)`.
    pub second_last: Complex64,
    pub last: Complex64,
}

/// Boundary sources `(f_a, f_b)` with `u = G(·, a) f_a + G(·, b) f_b` on the box.
pub fn boundary_sources(
    z: Complex64,
    w: &VerblunskyWindow,
    lo: i64,
    hi: i64,
    tau1: Complex64,
    tau2: Complex64,
    u: &CmvBoundaryData,
) -> Result<(Complex64, Complex64)> {
    let aa = w.alpha(lo)?;
    let ra = rho_of(aa);
    let f_a = if lo.rem_euclid(2) == 0 {
        (z * aa + tau1) * u.first + z * ra * u.second
    } else {
        -(z * tau1.conj() + aa.conj()) * u.first - ra * u.second
    };
    let ab = w.alpha(hi - 1)?;
    let rb = rho_of(ab);
    let f_b = if hi.rem_euclid(2) == 0 {
        (z * tau2 + ab) * u.last - rb * u.second_last
    } else {
        -(z * ab.conj() + tau2.conj()) * u.last + z * rb * u.second_last
    };
    Ok((f_a, f_b))
}

/// Interior values of a global solution of `E u = z u` on `[lo, hi]` (`hi > lo`) from
/// its values next to the edges and the truncation's boundary phases.
pub fn cmv_reconstruct(
    z: Complex64,
    w: &VerblunskyWindow,
    lo: i64,
    hi: i64,
    b1: Boundary,
    b2: Boundary,
    data: &CmvBoundaryData,
) -> Result<Vec<Complex64>> {
    if hi <= lo {
        return Err(Error::InvalidArgument("reconstruction needs at least two sites".into()));
    }
    let t = cmv_truncation(w, lo, hi, b1, b2)?;
    guard(&szego_charpoly(z, w, lo, hi, t.tau1, t.tau2)?)?;
    let (f_a, f_b) = boundary_sources(z, w, lo, hi, t.tau1, t.tau2, data)?;
    let g = t.green_operator(z);
    let lu = TridiagLu::factor(&g.sub, &g.diag, &g.sup, 0.0);
    let n = t.size();
    let mut rhs = vec![c(0.0, 0.0); n];
    rhs[0] = f_a;
    rhs[n - 1] += f_b;
    lu.solve_in_place(&mut rhs);
    Ok(rhs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalReport {
    /// No geodesic (circle or line orthogonal to the unit circle) holds all atoms.
    pub condition_circle_line: bool,
    /// The distances `|Im(ᾱβ)|/|α − β|` take at least two values.
    pub condition_ratio_set: bool,
    pub d_possibly_nonempty: bool,
    /// Distinct ratio values, ascending.
    pub ratio_values: Vec<f64>,
    pub reason: Option<String>,
}

enum Geodesic {
    /// Line through 0 with the given unit direction.
    Diameter(Complex64),
    Circle { center: Complex64, radius: f64 },
}

impl Geodesic {
    fn through(p: Complex64, q: Complex64) -> Geodesic {
        let tiny = GEOMETRY_TOL;
        if p.norm() < tiny || q.norm() < tiny || (p.conj() * q).im.abs() < tiny * p.norm() * q.norm() {
            let d = if p.norm() >= q.norm() { p } else { q };
            return Geodesic::Diameter(d / d.norm());
        }
        // orthogonal circles through p also pass through its inversion 1/p̄
        let r = 1.0 / p.conj();
        let center = circumcenter(p, q, r);
        Geodesic::Circle {
            center,
            radius: (p - center).norm(),
        }
    }

    fn contains(&self, x: Complex64) -> bool {
        match *self {
            Geodesic::Diameter(d) => (d.conj() * x).im.abs() <= GEOMETRY_TOL,
            Geodesic::Circle { center, radius } => ((x - center).norm() - radius).abs() <= GEOMETRY_TOL,
        }
    }
}

fn circumcenter(a: Complex64, b: Complex64, c3: Complex64) -> Complex64 {
    let (ax, ay, bx, by, cx, cy) = (a.re, a.im, b.re, b.im, c3.re, c3.im);
    let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    let (a2, b2, c2) = (a.norm_sqr(), b.norm_sqr(), c3.norm_sqr());
    c(
        (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d,
        (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d,
    )
}

/// Checks the two geometric conditions on the atoms that rule out exceptional points.
pub fn exceptional_check(dist: &DistributionSpec) -> Result<ExceptionalReport> {
    dist.require_flavor(Flavor::Complex)?;
    let atoms = dist
        .complex_atom_values()
        .ok_or_else(|| Error::InvalidDistribution("exceptional_check needs atomic support".into()))?;
    if atoms.len() < 2 {
        return Err(Error::TrivialSupport);
    }
    let p = atoms[0];
    let q = *atoms.iter().skip(1).max_by(|x, y| (**x - p).norm().total_cmp(&(**y - p).norm())).unwrap();
    let geo = Geodesic::through(p, q);
    let condition_circle_line = !atoms.iter().all(|&x| geo.contains(x));
    let mut ratios = Vec::new();
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            let (a, b) = (atoms[i], atoms[j]);
            ratios.push((a.conj() * b).im.abs() / (a - b).norm());
        }
    }
    ratios.sort_by(f64::total_cmp);
    let mut ratio_values: Vec<f64> = Vec::new();
    for r in ratios {
        if ratio_values.last().is_none_or(|&last| r - last > GEOMETRY_TOL) {
            ratio_values.push(r);
        }
    }
    let (condition_ratio_set, reason) = if atoms.len() < 3 {
        (false, Some("fewer than three atoms: a single ratio value".to_string()))
    } else if ratio_values.len() < 2 {
        (false, Some("all ratios coincide (incenter at the origin)".to_string()))
    } else {
        (true, None)
    };
    Ok(ExceptionalReport {
        condition_circle_line,
        condition_ratio_set,
        d_possibly_nonempty: !(condition_circle_line && condition_ratio_set),
        ratio_values,
        reason,
    })
}

fn mobius(m: &CMat2, x: Complex64) -> Complex64 {
    (m.a * x + m.b) / (m.c * x + m.d)
}

fn fixed_points(m: &CMat2) -> Vec<Complex64> {
    // c ζ² + (d − a) ζ − b = 0
    let (qa, qb, qc) = (m.c, m.d - m.a, -m.b);
    if qa.norm() < 1e-14 * m.norm() {
        return if qb.norm() > 1e-14 { vec![-qc / qb] } else { Vec::new() };
    }
    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    let r1 = (-qb + disc) / (2.0 * qa);
    let r2 = (-qb - disc) / (2.0 * qa);
    if (r1 - r2).norm() < 1e-12 {
        vec![r1]
    } else {
        vec![r1, r2]
    }
}

/// Constructive Furstenberg check for the Szegő cocycle at `z`: a non-elliptic word in
/// the generators witnesses noncompactness; its circle fixed points are the only
/// candidates for a finite invariant set, and each candidate is tested against every
/// generator.
pub(crate) fn complex_furstenberg(dist: &DistributionSpec, z: Complex64) -> Result<FurstenbergReport> {
    check_circle(z, "z")?;
    let gens = szego_generators(dist, z)?;
    let mut words: Vec<(String, CMat2)> = Vec::new();
    for (i, g) in gens.iter().enumerate() {
        words.push((format!("M{i}"), *g));
    }
    for (i, g) in gens.iter().enumerate() {
        for (j, h) in gens.iter().enumerate() {
            if i != j {
                words.push((format!("M{i}·M{j}^-1"), g.mul(&h.adjugate())));
                words.push((format!("M{i}·M{j}"), g.mul(h)));
            }
        }
    }
    for (i, g) in gens.iter().enumerate() {
        for (j, h) in gens.iter().enumerate() {
            for (k, f) in gens.iter().enumerate() {
                words.push((format!("M{i}·M{j}·M{k}"), g.mul(h).mul(f)));
            }
        }
    }
    let witness = words.iter().find(|(_, m)| {
        matches!(classify_with_tol(m, PARABOLIC_TOL), Ok(Conjugacy::Hyperbolic))
            || (matches!(classify_with_tol(m, PARABOLIC_TOL), Ok(Conjugacy::Parabolic))
                && m.max_abs_diff(&Mat2::identity()).min(m.max_abs_diff(&Mat2::identity().scale(-1.0))) > 1e-9)
    });
    let exceptional = exceptional_for(dist);
    let Some((name, h)) = witness else {
        return Ok(FurstenbergReport {
            noncompact: false,
            strongly_irreducible: false,
            contracting: false,
            witness: "no non-elliptic word of length ≤ 3".into(),
            contraction_ratio: 1.0,
            exceptional,
        });
    };
    let ratio = szego_power_ratio(h);
    let fps: Vec<Complex64> = fixed_points(h).into_iter().filter(|p| (p.norm() - 1.0).abs() < 1e-8).collect();
    let invariant = |set: &[Complex64]| {
        gens.iter().all(|g| {
            set.iter()
                .all(|&p| set.iter().any(|&q| (mobius(g, p) - q).norm() < 1e-8))
        })
    };
    let mut subsets: Vec<Vec<Complex64>> = fps.iter().map(|&p| vec![p]).collect();
    if fps.len() == 2 {
        subsets.push(fps.clone());
    }
    let any_invariant = subsets.iter().any(|s| invariant(s));
    Ok(FurstenbergReport {
        noncompact: true,
        strongly_irreducible: !any_invariant,
        contracting: ratio <= 1e-6,
        witness: format!(
            "{name} = [[{}, {}], [{}, {}]], fixed points {:?}",
            h.a, h.b, h.c, h.d, fps
        ),
        contraction_ratio: ratio,
        exceptional,
    })
}

/// `log ‖S^z_k‖` of the running Szegő product over `alphas`, at each checkpoint.
pub fn szego_log_norms(z: Complex64, alphas: &[Complex64], checkpoints: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut p: ScaledMat2<Complex64> = ScaledMat2::identity();
    let mut done = 0;
    for &k in checkpoints {
        for &a in &alphas[done..k] {
            p.push_left(&unnormalized_step(z, a).scale(1.0 / rho_of(a)));
        }
        done = k;
        out.push(p.logmag);
    }
    out
}

fn cmv_estimate(z: Complex64, dist: &DistributionSpec, n: usize, samples: usize, seed: u64, two: bool) -> Result<LEEstimate> {
    check_circle(z, "z")?;
    dist.require_flavor(Flavor::Complex)?;
    if n < 1 + two as usize || samples == 0 {
        return Err(Error::InvalidArgument("need n ≥ 1 (≥ 2 for the two-scale form) and samples ≥ 1".into()));
    }
    let root = derive_seed(seed, LE_TAG);
    let half = n / 2;
    let xs = per_sample(samples, |s| {
        let w: WordWindow<Complex64> = sample_window_stream(dist, 0, n as i64, root, s)?;
        if two {
            let l = szego_log_norms(z, &w.values, &[half, n]);
            Ok(two_scale(l[0], half, l[1], n))
        } else {
            Ok(szego_log_norms(z, &w.values, &[n])[0] / n as f64)
        }
    })?;
    let (mean, stderr) = mean_stderr(&xs);
    Ok(LEEstimate {
        energy: z.arg(),
        n,
        samples,
        mean,
        stderr,
        seed,
    })
}

/// Average of `(1/n) log ‖S^z_n‖` over independent windows.
pub fn cmv_lyapunov(z: Complex64, dist: &DistributionSpec, n: usize, samples: usize, seed: u64) -> Result<LEEstimate> {
    cmv_estimate(z, dist, n, samples, seed, false)
}

/// Two-scale estimate `2F_n − F_{⌊n/2⌋}` of `L(z)` for the Szegő cocycle.
pub fn cmv_estimate_l(z: Complex64, dist: &DistributionSpec, n: usize, samples: usize, seed: u64) -> Result<LEEstimate> {
    cmv_estimate(z, dist, n, samples, seed, true)
}
