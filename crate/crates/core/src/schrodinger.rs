//! Anderson-model transfer matrices, finite-volume Hamiltonians, characteristic
//! polynomials, Green functions and solution propagation/reconstruction.
//!
//! Conventions: `(H u)(n) = u(n+1) + u(n−1) + V(n) u(n)` and the one-step matrix
//! `M^E(α) = [[E − α, −1], [1, 0]]` maps `(u(n), u(n−1))` to `(u(n+1), u(n))`.

use serde::{Deserialize, Serialize};

use crate::ensemble::WordWindow;
use crate::error::{Error, Result};
use crate::mat2::{RMat2, RScaled};
use crate::tridiag::{sturm_count, TridiagLu};

/// Relative width of the Sturm window used to detect an energy sitting on an eigenvalue.
pub const EIGEN_GUARD: f64 = 1e-12;
const OVERFLOW: f64 = 1e300;

pub fn transfer_step(e: f64, alpha: f64) -> RMat2 {
    RMat2::new(e - alpha, -1.0, 1.0, 0.0)
}

/// `M_n^E(T^ζ ω)`: `M(ω_{ζ+n−1}) ⋯ M(ω_ζ)` for `n > 0`, identity for `n = 0`, and
/// `[M_{−n}(T^{ζ+n} ω)]^{−1}` for `n < 0`.
pub fn transfer_product(e: f64, w: &WordWindow<f64>, zeta: i64, n: i64) -> Result<RScaled> {
    if n == 0 {
        return Ok(RScaled::identity());
    }
    if n > 0 {
        Ok(product_of(e, w.slice(zeta, zeta + n - 1)?))
    } else {
        Ok(product_of(e, w.slice(zeta + n, zeta - 1)?).inverse_unimodular())
    }
}

/// Scaled product of one-step matrices over `values` in order (first value acts first).
pub fn product_of(e: f64, values: &[f64]) -> RScaled {
    let mut p = RScaled::identity();
    for &v in values {
        p.push_left(&transfer_step(e, v));
    }
    p
}

/// `log ‖M_k‖` of the running product over `values`, recorded at each `k` in
/// `checkpoints` (ascending, each ≤ `values.len()`).
pub fn log_norms_at(e: f64, values: &[f64], checkpoints: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut p = RScaled::identity();
    let mut done = 0;
    for &k in checkpoints {
        assert!(k >= done && k <= values.len(), "checkpoints must be ascending and covered");
        for &v in &values[done..k] {
            p.push_left(&transfer_step(e, v));
        }
        done = k;
        out.push(p.logmag);
    }
    out
}

/// `F_n(T^ζ ω, E) = log ‖M_n^E(T^ζ ω)‖ / |n|`.
pub fn f_n(e: f64, w: &WordWindow<f64>, zeta: i64, n: i64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("F_n needs n ≠ 0".into()));
    }
    Ok(transfer_product(e, w, zeta, n)?.logmag / n.unsigned_abs() as f64)
}

/// A real number `mantissa · e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledReal {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl ScaledReal {
    pub fn value(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }

    /// `ln |value|`; `−∞` for zero.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.log_scale
    }
}

/// Sequence `det(E − H_{[lo, lo+k−1]})`, `k = 0..=len`, by the three-term recurrence,
/// rescaled jointly whenever the magnitude leaves `[1e−100, 1e100]`.
fn charpoly_prefixes(e: f64, v: &[f64]) -> Vec<ScaledReal> {
    let mut out = Vec::with_capacity(v.len() + 1);
    let (mut prev, mut cur, mut scale) = (0.0, 1.0, 0.0);
    out.push(ScaledReal {
        mantissa: 1.0,
        log_scale: 0.0,
    });
    for &x in v {
        let next = (e - x) * cur - prev;
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e100 || (m < 1e-100 && m > 0.0) {
            prev /= m;
            cur /= m;
            scale += m.ln();
        }
        out.push(ScaledReal {
            mantissa: cur,
            log_scale: scale,
        });
    }
    out
}

/// `det(E − H_{ω,[lo,hi]})` in rescaled form. An empty window (`hi = lo − 1`) gives 1
/// and `hi = lo − 2` gives 0, matching the recurrence seeds.
pub fn char_poly_scaled(e: f64, w: &WordWindow<f64>, lo: i64, hi: i64) -> Result<ScaledReal> {
    let len = hi - lo + 1;
    match len {
        l if l < -1 => Err(Error::InvalidArgument(format!("window [{lo}, {hi}] has negative length"))),
        -1 => Ok(ScaledReal {
            mantissa: 0.0,
            log_scale: 0.0,
        }),
        _ => Ok(*charpoly_prefixes(e, w.slice(lo, hi)?).last().unwrap()),
    }
}

pub fn char_poly(e: f64, w: &WordWindow<f64>, lo: i64, hi: i64) -> Result<f64> {
    Ok(char_poly_scaled(e, w, lo, hi)?.value())
}

/// `M_N^E(T^ζ ω)` assembled from four boundary determinants:
/// `[[det(E−H_[ζ,ζ+N−1]), −det(E−H_[ζ+1,ζ+N−1])], [det(E−H_[ζ,ζ+N−2]), −det(E−H_[ζ+1,ζ+N−2])]]`.
pub fn transfer_from_determinants(e: f64, w: &WordWindow<f64>, zeta: i64, n: i64) -> Result<RMat2> {
    if n < 1 {
        return Err(Error::InvalidArgument("need N ≥ 1".into()));
    }
    let last = zeta + n - 1;
    Ok(RMat2::new(
        char_poly(e, w, zeta, last)?,
        -char_poly(e, w, zeta + 1, last)?,
        char_poly(e, w, zeta, last - 1)?,
        -char_poly(e, w, zeta + 1, last - 1)?,
    ))
}

/// Symmetric tridiagonal `H_{ω,[lo,hi]}` (diagonal = potential, off-diagonal = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteOperator {
    pub lo: i64,
    pub diagonal: Vec<f64>,
    pub offdiagonal: Vec<f64>,
}

impl FiniteOperator {
    pub fn restrict(w: &WordWindow<f64>, lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidArgument("empty box".into()));
        }
        let diagonal = w.slice(lo, hi)?.to_vec();
        let n = diagonal.len();
        Ok(FiniteOperator {
            lo,
            diagonal,
            offdiagonal: vec![1.0; n - 1],
        })
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.diagonal.len() as i64 - 1
    }

    /// `‖H‖_∞`-type scale `max |V| + 2`.
    pub fn scale(&self) -> f64 {
        self.diagonal.iter().map(|v| v.abs()).fold(0.0, f64::max) + 2.0
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diagonal[i] * x[i];
                if i > 0 {
                    s += self.offdiagonal[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.offdiagonal[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Fails with `NearEigenvalue` if an eigenvalue lies within `1e−12·scale` of `e`.
    pub fn guard_energy(&self, e: f64) -> Result<()> {
        let scale = self.scale().max(e.abs());
        let delta = EIGEN_GUARD * scale;
        let below = sturm_count(&self.diagonal, &self.offdiagonal, e - delta);
        let above = sturm_count(&self.diagonal, &self.offdiagonal, e + delta);
        if above != below {
            return Err(Error::NearEigenvalue {
                condition: scale / delta,
            });
        }
        Ok(())
    }

    /// Pivoted LU of `H − e`.
    pub fn shifted_lu(&self, e: f64) -> TridiagLu<f64> {
        let diag: Vec<f64> = self.diagonal.iter().map(|v| v - e).collect();
        TridiagLu::factor(&self.offdiagonal, &diag, &self.offdiagonal, 0.0)
    }
}

/// `G^E_Λ = (H_Λ − E)^{−1}` with a Cramer-rule cross-check of its magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenTable {
    pub energy: f64,
    pub lo: i64,
    pub hi: i64,
    /// Row-major `N × N` entries from direct solves.
    pub entries: Vec<f64>,
    /// Largest relative gap between direct and Cramer magnitudes.
    pub cramer_max_rel_gap: f64,
    /// `‖H − E‖ · ‖G‖` estimated with max-row norms.
    pub condition_estimate: f64,
    /// Set when the condition estimate exceeds 1e10 or the two paths disagree beyond 1e−8.
    pub condition_flag: bool,
}

impl GreenTable {
    pub fn size(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    /// `G(j, k)` at absolute sites.
    pub fn get(&self, j: i64, k: i64) -> f64 {
        let n = self.size();
        self.entries[(j - self.lo) as usize * n + (k - self.lo) as usize]
    }

    pub fn max_row_norm(&self) -> f64 {
        let n = self.size();
        (0..n)
            .map(|i| self.entries[i * n..(i + 1) * n].iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `|G(j,k)|` for `j ≤ k` (local indices) via `|det_[0,j) · det_(k,N) / det_[0,N)|`.
pub fn cramer_magnitudes(e: f64, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let left = charpoly_prefixes(e, v);
    let mut rev = v.to_vec();
    rev.reverse();
    let right = charpoly_prefixes(e, &rev);
    let total = left[n].ln_abs();
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for k in j..n {
            // sites k+1..n−1 are the first n−k−1 sites of the reversed word
            let g = (left[j].ln_abs() + right[n - k - 1].ln_abs() - total).exp();
            out[j * n + k] = g;
            out[k * n + j] = g;
        }
    }
    out
}

pub fn green_table(e: f64, w: &WordWindow<f64>, lo: i64, hi: i64) -> Result<GreenTable> {
    let op = FiniteOperator::restrict(w, lo, hi)?;
    op.guard_energy(e)?;
    let n = op.len();
    let lu = op.shifted_lu(e);
    let mut entries = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        col.iter_mut().for_each(|x| *x = 0.0);
        col[k] = 1.0;
        lu.solve_in_place(&mut col);
        for j in 0..n {
            entries[j * n + k] = col[j];
        }
    }
    let cramer = cramer_magnitudes(e, &op.diagonal);
    let mut gap: f64 = 0.0;
    for (d, c) in entries.iter().zip(&cramer) {
        if *c > 0.0 {
            gap = gap.max((d.abs() - c).abs() / c);
        } else if *d != 0.0 {
            gap = f64::INFINITY;
        }
    }
    let mut table = GreenTable {
        energy: e,
        lo,
        hi,
        entries,
        cramer_max_rel_gap: gap,
        condition_estimate: 0.0,
        condition_flag: false,
    };
    let h_norm = op.diagonal.iter().map(|v| (v - e).abs()).fold(0.0, f64::max) + 2.0;
    table.condition_estimate = h_norm * table.max_row_norm();
    table.condition_flag = table.condition_estimate > 1e10 || gap > 1e-8;
    Ok(table)
}

/// Solution of `u(n+1) + u(n−1) + V(n)u(n) = E u(n)` with `u(0) = u0`, `u(−1) = um1`,
/// returned on `lo..=hi`.
pub fn propagate_solution(e: f64, w: &WordWindow<f64>, u0: f64, um1: f64, lo: i64, hi: i64) -> Result<Vec<f64>> {
    propagate_solution_from(e, w, 0, u0, um1, lo, hi)
}

/// As [`propagate_solution`] with the initial pair `(u(anchor), u(anchor−1))`.
pub fn propagate_solution_from(
    e: f64,
    w: &WordWindow<f64>,
    anchor: i64,
    u_anchor: f64,
    u_before: f64,
    lo: i64,
    hi: i64,
) -> Result<Vec<f64>> {
    if hi < lo {
        return Ok(Vec::new());
    }
    let a = lo.min(anchor - 1);
    let b = hi.max(anchor);
    let mut u = vec![0.0; (b - a + 1) as usize];
    let idx = |n: i64| (n - a) as usize;
    u[idx(anchor)] = u_anchor;
    u[idx(anchor - 1)] = u_before;
    let potential = |n: i64| {
        w.get(n).ok_or(Error::WindowUnderflow {
            need_lo: a + 1,
            need_hi: b - 1,
            have_lo: w.lo(),
            have_hi: w.hi(),
        })
    };
    for n in anchor..b {
        let next = (e - potential(n)?) * u[idx(n)] - u[idx(n - 1)];
        if !next.is_finite() || next.abs() > OVERFLOW {
            return Err(Error::ScaleOverflow);
        }
        u[idx(n + 1)] = next;
    }
    let mut n = anchor - 1;
    while n > a {
        let prev = (e - potential(n)?) * u[idx(n)] - u[idx(n + 1)];
        if !prev.is_finite() || prev.abs() > OVERFLOW {
            return Err(Error::ScaleOverflow);
        }
        u[idx(n - 1)] = prev;
        n -= 1;
    }
    Ok(u[idx(lo)..=idx(hi)].to_vec())
}

/// Interior values on `[lo, hi]` from the boundary data `u(lo−1)`, `u(hi+1)`:
/// `u(n) = −G(n, lo) u(lo−1) − G(n, hi) u(hi+1)`.
pub fn reconstruct_interior(
    e: f64,
    w: &WordWindow<f64>,
    lo: i64,
    hi: i64,
    u_left: f64,
    u_right: f64,
) -> Result<Vec<f64>> {
    let op = FiniteOperator::restrict(w, lo, hi)?;
    op.guard_energy(e)?;
    let n = op.len();
    let lu = op.shifted_lu(e);
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    lu.solve_in_place(&mut first);
    let mut last = vec![0.0; n];
    last[n - 1] = 1.0;
    lu.solve_in_place(&mut last);
    // G is symmetric, so the columns for lo and hi are the rows needed here
    Ok((0..n).map(|i| -first[i] * u_left - last[i] * u_right).collect())
}
