//! Tridiagonal kernels: LU with partial pivoting (real or complex) and Sturm counts.

use crate::mat2::Scalar;

/// LU factorization with partial pivoting of a tridiagonal matrix given by its
/// sub-, main and super-diagonal. Pivots smaller than `floor` in magnitude are
/// replaced by `floor` (keeping the sign/phase), which is what inverse iteration needs.
#[derive(Debug, Clone)]
pub struct TridiagLu<S> {
    d: Vec<S>,
    du: Vec<S>,
    du2: Vec<S>,
    dl: Vec<S>,
    swapped: Vec<bool>,
    /// Number of pivots that had to be lifted to `floor`.
    pub perturbed_pivots: usize,
}

impl<S: Scalar> TridiagLu<S> {
    pub fn factor(sub: &[S], diag: &[S], sup: &[S], floor: f64) -> Self {
        let n = diag.len();
        assert!(n >= 1 && sub.len() + 1 == n && sup.len() + 1 == n);
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut dl = sub.to_vec();
        let mut du2 = vec![S::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] = d[i + 1] - fact * du[i];
                } else {
                    dl[i] = S::zero();
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        let mut perturbed_pivots = 0;
        for p in d.iter_mut() {
            let a = p.abs();
            if a < floor {
                perturbed_pivots += 1;
                *p = if a == 0.0 { S::from_real(floor) } else { p.scale(floor / a) };
            }
        }
        TridiagLu {
            d,
            du,
            du2,
            dl,
            swapped,
            perturbed_pivots,
        }
    }

    pub fn solve_in_place(&self, b: &mut [S]) {
        let n = self.d.len();
        assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let t = b[i];
                b[i] = b[i + 1];
                b[i + 1] = t - self.dl[i] * b[i];
            } else {
                b[i + 1] = b[i + 1] - self.dl[i] * b[i];
            }
        }
        b[n - 1] = b[n - 1] / self.d[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Determinant of the factored matrix (row swaps flip the sign).
    pub fn det(&self) -> S {
        let mut p = S::one();
        for (i, d) in self.d.iter().enumerate() {
            p = p * *d;
            if i < self.swapped.len() && self.swapped[i] {
                p = -p;
            }
        }
        p
    }
}

/// Number of eigenvalues strictly below `x` of the symmetric tridiagonal matrix
/// with the given diagonal and off-diagonal.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let pivmin = pivot_min(off);
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Sturm counts at `K` shifts in one sweep (independent recurrences interleave well).
pub fn sturm_counts<const K: usize>(diag: &[f64], off_sq: &[f64], pivmin: f64, xs: [f64; K]) -> [usize; K] {
    let mut count = [0usize; K];
    let mut q = [1.0f64; K];
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { off_sq[i - 1] };
        for j in 0..K {
            let mut t = diag[i] - xs[j] - e2 / q[j];
            if t.abs() < pivmin {
                t = -pivmin;
            }
            count[j] += (t < 0.0) as usize;
            q[j] = t;
        }
    }
    count
}

pub(crate) fn pivot_min(off: &[f64]) -> f64 {
    let emax = off.iter().map(|e| e * e).fold(1.0, f64::max);
    f64::MIN_POSITIVE * emax * 4.0
}

/// Gershgorin enclosure of the spectrum.
pub fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}
