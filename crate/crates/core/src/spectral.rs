//! Symmetric tridiagonal eigensolver (Sturm bisection + twisted inverse iteration),
//! density of states and the Thouless formula.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{derive_seed, sample_window_stream, support_constants, DistributionSpec, WordWindow};
use crate::error::{Error, Result};
use crate::lyapunov::{estimate_l, LEEstimate};
use crate::stats::pairwise_sum;
use crate::tridiag::{gershgorin, pivot_min, sturm_counts};

const BATCH: usize = 8;
const DOS_TAG: u64 = 0xD05;
/// Eigenvalues closer than this to the evaluation energy are dropped from the Thouless average.
pub const THOULESS_EXCLUSION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector of `values[k]`.
    pub vectors: Option<Vec<Vec<f64>>>,
}

/// Default bisection tolerance `max(1e−12, 4·eps·N·‖T‖)`.
pub fn default_tolerance(diag: &[f64], off: &[f64]) -> f64 {
    let (gl, gu) = gershgorin(diag, off);
    let norm = gl.abs().max(gu.abs());
    (4.0 * f64::EPSILON * diag.len() as f64 * norm).max(1e-12)
}

/// Eigenvalues (and optionally eigenvectors) of the symmetric tridiagonal matrix with
/// the given diagonal and off-diagonal. Zero off-diagonals are allowed.
pub fn eig_sym_tridiag(diag: &[f64], off: &[f64], tol: Option<f64>, want_vectors: bool) -> Result<Eigensystem> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if off.len() + 1 != n {
        return Err(Error::InvalidArgument(format!(
            "off-diagonal has {} entries, expected {}",
            off.len(),
            n - 1
        )));
    }
    if diag.iter().chain(off).any(|x| !x.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let (gl, gu) = gershgorin(diag, off);
    let norm = gl.abs().max(gu.abs());
    let tol = tol.unwrap_or_else(|| default_tolerance(diag, off));
    let floor = f64::EPSILON * n as f64 * norm.max(1.0);
    if tol < floor {
        return Err(Error::ToleranceUnreachable { tol, floor });
    }
    let values = bisect_all(diag, off, gl, gu, tol);
    let vectors = if want_vectors {
        Some(inverse_iteration(diag, off, &values, norm, tol))
    } else {
        None
    };
    Ok(Eigensystem { values, vectors })
}

fn bisect_all(diag: &[f64], off: &[f64], gl: f64, gu: f64, tol: f64) -> Vec<f64> {
    let n = diag.len();
    let off_sq: Vec<f64> = off.iter().map(|e| e * e).collect();
    let pivmin = pivot_min(off);
    let pad = 2.0 * f64::EPSILON * gl.abs().max(gu.abs()) + 2.0 * pivmin;
    let (lo0, hi0) = (gl - pad - tol, gu + pad + tol);
    let steps = (((hi0 - lo0) / tol).log2().ceil().max(1.0)) as usize;
    let batches: Vec<usize> = (0..n).step_by(BATCH).collect();
    let parts: Vec<Vec<f64>> = batches
        .par_iter()
        .map(|&start| {
            // k-th eigenvalue is the point where the count passes k
            let mut lo = [lo0; BATCH];
            let mut hi = [hi0; BATCH];
            let idx: [usize; BATCH] = std::array::from_fn(|j| (start + j).min(n - 1));
            for _ in 0..steps {
                let mid: [f64; BATCH] = std::array::from_fn(|j| 0.5 * (lo[j] + hi[j]));
                let c = sturm_counts(diag, &off_sq, pivmin, mid);
                for j in 0..BATCH {
                    if c[j] > idx[j] {
                        hi[j] = mid[j];
                    } else {
                        lo[j] = mid[j];
                    }
                }
            }
            (start..(start + BATCH).min(n)).map(|k| 0.5 * (lo[k - start] + hi[k - start])).collect()
        })
        .collect();
    let mut values: Vec<f64> = parts.into_iter().flatten().collect();
    // midpoints of nested brackets are already ordered; this only guards ties
    for k in 1..n {
        if values[k] < values[k - 1] {
            values[k] = values[k - 1];
        }
    }
    values
}

fn tridiag_apply(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut s = diag[i] * x[i];
            if i > 0 {
                s += off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += off[i] * x[i + 1];
            }
            s
        })
        .collect()
}

fn normalize(x: &mut [f64]) -> f64 {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    nrm
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// One twisted-factorization solve `(T − λ) z = γ_r e_r` with `z_r = 1`, where the twist
/// index `r` minimizes `|γ_r|`. Returns `(z, γ_r)`. Components are built outward from `r`
/// by ratios, so exponentially small tails keep their relative accuracy. Only indices
/// passing `allow` are candidates for `r`.
fn twisted_solve(
    diag: &[f64],
    off: &[f64],
    lambda: f64,
    pivmin: f64,
    allow: impl Fn(usize) -> bool,
) -> (Vec<f64>, f64) {
    let n = diag.len();
    let guard = |x: f64| if x.abs() < pivmin { -pivmin } else { x };
    let mut dp = vec![0.0; n];
    let mut dm = vec![0.0; n];
    dp[0] = guard(diag[0] - lambda);
    for i in 1..n {
        dp[i] = guard(diag[i] - lambda - off[i - 1] * off[i - 1] / dp[i - 1]);
    }
    dm[n - 1] = guard(diag[n - 1] - lambda);
    for i in (0..n - 1).rev() {
        dm[i] = guard(diag[i] - lambda - off[i] * off[i] / dm[i + 1]);
    }
    let (r, gamma) = (0..n)
        .filter(|&k| allow(k))
        .map(|k| (k, dp[k] + dm[k] - (diag[k] - lambda)))
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap();
    let mut z = vec![0.0; n];
    z[r] = 1.0;
    for i in (0..r).rev() {
        z[i] = if z[i + 1] != 0.0 || i + 2 > r || off[i] == 0.0 {
            -off[i] / dp[i] * z[i + 1]
        } else {
            -off[i + 1] / off[i] * z[i + 2]
        };
    }
    for i in r + 1..n {
        z[i] = if z[i - 1] != 0.0 || i < r + 2 || off[i - 1] == 0.0 {
            -off[i - 1] / dm[i] * z[i - 1]
        } else {
            -off[i - 2] / off[i - 1] * z[i - 2]
        };
    }
    (z, gamma)
}

/// `None` when orthogonalization against `cluster` removes most of the vector.
fn solve_and_orthogonalize(
    diag: &[f64],
    off: &[f64],
    lambda: f64,
    pivmin: f64,
    tol: f64,
    cluster: &[Vec<f64>],
    allow: impl Fn(usize) -> bool + Copy,
) -> Option<Vec<f64>> {
    let (mut z, gamma) = twisted_solve(diag, off, lambda, pivmin, allow);
    // Rayleigh correction of the shift, then one more solve
    let shift = lambda + gamma / dot(&z, &z);
    if shift.is_finite() && (shift - lambda).abs() <= 10.0 * tol {
        z = twisted_solve(diag, off, shift, pivmin, allow).0;
    }
    normalize(&mut z);
    let mut touched = false;
    for v in cluster {
        let d = dot(&z, v);
        if d.abs() > 1e-12 {
            z.iter_mut().zip(v).for_each(|(a, b)| *a -= d * b);
            touched = true;
        }
    }
    if touched && normalize(&mut z) < 1e-3 {
        return None;
    }
    if touched {
        // second pass for numerical orthogonality
        for v in cluster {
            let d = dot(&z, v);
            z.iter_mut().zip(v).for_each(|(a, b)| *a -= d * b);
        }
        normalize(&mut z);
    }
    Some(z)
}

fn inverse_iteration(diag: &[f64], off: &[f64], values: &[f64], norm: f64, tol: f64) -> Vec<Vec<f64>> {
    let n = diag.len();
    if n == 1 {
        return vec![vec![1.0]];
    }
    let cluster_gap = 1e-3 * norm.max(f64::MIN_POSITIVE);
    let pivmin = pivot_min(off);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut cluster_start = 0;
    for (k, &lambda) in values.iter().enumerate() {
        if k > 0 && lambda - values[k - 1] >= cluster_gap {
            cluster_start = k;
        }
        let cluster = &vectors[cluster_start..k];
        let mut z = solve_and_orthogonalize(diag, off, lambda, pivmin, tol, cluster, |_| true);
        if z.is_none() {
            // degenerate with earlier cluster members: twist where they are small
            let weight: Vec<f64> = (0..n).map(|i| cluster.iter().map(|v| v[i] * v[i]).sum()).collect();
            z = solve_and_orthogonalize(diag, off, lambda, pivmin, tol, cluster, |i| weight[i] < 0.1);
        }
        let mut z = z.unwrap_or_else(|| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            e
        });
        let (imax, _) = z
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
        if z[imax] < 0.0 {
            z.iter_mut().for_each(|v| *v = -*v);
        }
        vectors.push(z);
    }
    vectors
}

/// Largest `‖T u − λ u‖_∞` over the eigenpairs.
pub fn max_residual(diag: &[f64], off: &[f64], sys: &Eigensystem) -> f64 {
    let Some(vecs) = &sys.vectors else { return f64::NAN };
    sys.values
        .iter()
        .zip(vecs)
        .map(|(l, v)| {
            tridiag_apply(diag, off, v)
                .iter()
                .zip(v)
                .map(|(h, x)| (h - l * x).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    /// Pooled eigenvalues over all realizations, ascending.
    pub eigenvalues: Vec<f64>,
    pub distribution: DistributionSpec,
    pub sites: usize,
    pub realizations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IDSGrid {
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
}

impl IDSGrid {
    /// Empirical IDS of `spectrum` on `energies` (fraction of eigenvalues ≤ E).
    pub fn from_spectrum(spectrum: &[f64], energies: Vec<f64>) -> Self {
        let total = spectrum.len().max(1) as f64;
        let values = energies
            .iter()
            .map(|&e| spectrum.partition_point(|&x| x <= e) as f64 / total)
            .collect();
        IDSGrid { energies, values }
    }
}

/// Dirichlet eigenvalues of `H_{ω,[0,N)}` pooled over realizations, and the IDS on a
/// uniform grid of `grid_points` energies covering Σ with a margin.
pub fn dos_estimate(
    dist: &DistributionSpec,
    sites: usize,
    realizations: usize,
    seed: u64,
    grid_points: usize,
) -> Result<(SpectrumSample, IDSGrid)> {
    if sites < 2 {
        return Err(Error::InvalidArgument("dos needs N ≥ 2".into()));
    }
    if realizations == 0 || grid_points < 2 {
        return Err(Error::InvalidArgument("need ≥ 1 realization and ≥ 2 grid points".into()));
    }
    let consts = support_constants(dist)?;
    let root = derive_seed(seed, DOS_TAG);
    let per: Vec<Result<Vec<f64>>> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let w: WordWindow<f64> = sample_window_stream(dist, 0, sites as i64, root, r as u64)?;
            let off = vec![1.0; sites - 1];
            Ok(eig_sym_tridiag(&w.values, &off, None, false)?.values)
        })
        .collect();
    let mut eigenvalues = Vec::with_capacity(sites * realizations);
    for p in per {
        eigenvalues.extend(p?);
    }
    eigenvalues.sort_by(f64::total_cmp);
    let lo = consts.sigma_set.first().map(|iv| iv.lo).unwrap_or(-2.0) - 0.25;
    let hi = consts.sigma_set.last().map(|iv| iv.hi).unwrap_or(2.0) + 0.25;
    let energies = (0..grid_points)
        .map(|i| lo + (hi - lo) * i as f64 / (grid_points - 1) as f64)
        .collect();
    let grid = IDSGrid::from_spectrum(&eigenvalues, energies);
    Ok((
        SpectrumSample {
            eigenvalues,
            distribution: dist.clone(),
            sites,
            realizations,
            seed,
        },
        grid,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThoulessValue {
    pub value: f64,
    /// Eigenvalues dropped for lying within the exclusion radius of E.
    pub excluded: usize,
}

/// Mean of `log |E − λ|` over the pooled spectrum.
pub fn thouless_eval(e: f64, spectrum: &[f64]) -> Result<ThoulessValue> {
    if spectrum.is_empty() {
        return Err(Error::DegenerateInput("empty spectrum".into()));
    }
    let logs: Vec<f64> = spectrum
        .iter()
        .filter(|&&x| (e - x).abs() > THOULESS_EXCLUSION)
        .map(|&x| (e - x).abs().ln())
        .collect();
    if logs.is_empty() {
        return Err(Error::DegenerateInput("every eigenvalue is at the evaluation energy".into()));
    }
    Ok(ThoulessValue {
        value: pairwise_sum(&logs) / logs.len() as f64,
        excluded: spectrum.len() - logs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoulessCheck {
    pub energy: f64,
    pub direct: LEEstimate,
    pub thouless: ThoulessValue,
    pub gap: f64,
    /// Direct-side standard error (the DOS side carries no sample error estimate).
    pub gap_stderr: f64,
}

/// Compares the transfer-matrix Lyapunov estimate with the log-potential of the
/// finite-volume density of states.
#[allow(clippy::too_many_arguments)]
pub fn thouless_check(
    e: f64,
    dist: &DistributionSpec,
    n_le: usize,
    samples: usize,
    sites: usize,
    realizations: usize,
    seed: u64,
) -> Result<ThoulessCheck> {
    let direct = estimate_l(e, dist, n_le, samples, seed)?;
    let (spec, _) = dos_estimate(dist, sites, realizations, seed, 2)?;
    let thouless = thouless_eval(e, &spec.eigenvalues)?;
    Ok(ThoulessCheck {
        energy: e,
        gap: (direct.mean - thouless.value).abs(),
        gap_stderr: direct.stderr,
        direct,
        thouless,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tridiag::sturm_count;
    use std::f64::consts::PI;

    fn free(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; n], vec![1.0; n - 1])
    }

    #[test]
    fn free_three_sites() {
        let (d, o) = free(3);
        let s = eig_sym_tridiag(&d, &o, None, false).unwrap();
        let r2 = 2f64.sqrt();
        for (got, want) in s.values.iter().zip([-r2, 0.0, r2]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn single_site() {
        let s = eig_sym_tridiag(&[1.25], &[], None, true).unwrap();
        assert!((s.values[0] - 1.25).abs() < 1e-12);
        assert_eq!(s.vectors.unwrap(), vec![vec![1.0]]);
    }

    #[test]
    fn free_hundred_sites_with_vectors() {
        let (d, o) = free(100);
        let s = eig_sym_tridiag(&d, &o, None, true).unwrap();
        for k in 0..100 {
            let exact = 2.0 * ((100 - k) as f64 * PI / 101.0).cos();
            assert!((s.values[k] - exact).abs() < 1e-10);
        }
        assert!(max_residual(&d, &o, &s) <= 1e-8 * 2.0);
        let v = s.vectors.unwrap();
        for i in 0..100 {
            for j in 0..100 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&v[i], &v[j]) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn localized_tails_have_componentwise_small_residual() {
        // strong two-valued disorder; tails drop far below machine epsilon
        let n = 300;
        let mut x: u64 = 12345;
        let d: Vec<f64> = (0..n)
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if x >> 63 == 1 { 6.0 } else { 0.0 }
            })
            .collect();
        let o = vec![1.0; n - 1];
        let s = eig_sym_tridiag(&d, &o, None, true).unwrap();
        let v = s.vectors.as_ref().unwrap();
        let mut deep = 0;
        for (k, u) in v.iter().enumerate() {
            let tu = tridiag_apply(&d, &o, u);
            for i in 0..n {
                let local = u[i.saturating_sub(1)..(i + 2).min(n)].iter().map(|a| a.abs()).fold(0.0, f64::max);
                let r = (tu[i] - s.values[k] * u[i]).abs();
                assert!(r <= 1e-9 * local + 1e-300, "vector {k} site {i}: {r:e} vs {local:e}");
            }
            if u.iter().any(|a| a.abs() > 0.0 && a.abs() < 1e-40) {
                deep += 1;
            }
        }
        assert!(deep > n / 2);
    }

    #[test]
    fn split_blocks_and_degenerate_pairs() {
        // two identical decoupled blocks give exactly doubled eigenvalues
        let d = vec![0.0, 0.0, 0.0, 0.0];
        let o = vec![1.0, 0.0, 1.0];
        let s = eig_sym_tridiag(&d, &o, None, true).unwrap();
        for (got, want) in s.values.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(max_residual(&d, &o, &s) < 1e-9);
        let v = s.vectors.unwrap();
        assert!(dot(&v[0], &v[1]).abs() < 1e-10 && dot(&v[2], &v[3]).abs() < 1e-10);
    }

    #[test]
    fn tolerance_floor_is_enforced() {
        let (d, o) = free(10);
        assert!(matches!(
            eig_sym_tridiag(&d, &o, Some(1e-20), false),
            Err(Error::ToleranceUnreachable { .. })
        ));
    }

    #[test]
    fn sturm_count_matches_returned_values() {
        let dist = DistributionSpec::interval(-3.0, 3.0).unwrap();
        for s in 0..50u64 {
            let w: WordWindow<f64> = sample_window_stream(&dist, 0, 40, 9, s).unwrap();
            let o = vec![1.0; 39];
            let sys = eig_sym_tridiag(&w.values, &o, None, false).unwrap();
            for t in 0..20 {
                let e = -5.0 + 0.5 * t as f64 + 0.013 * s as f64;
                let below = sys.values.iter().filter(|&&x| x < e).count();
                assert_eq!(below, sturm_count(&w.values, &o, e));
            }
        }
    }

    #[test]
    fn thouless_small_cases() {
        let t = thouless_eval(3.0, &[0.0]).unwrap();
        assert!((t.value - 3f64.ln()).abs() < 1e-15);
        let t = thouless_eval(0.5, &[0.5, 1.5]).unwrap();
        assert_eq!(t.excluded, 1);
        assert!(t.value.abs() < 1e-15);
        assert!(matches!(thouless_eval(0.0, &[0.0]), Err(Error::DegenerateInput(_))));
        assert!(thouless_eval(0.0, &[]).is_err());
    }

    #[test]
    fn ids_grid_counts() {
        let g = IDSGrid::from_spectrum(&[-1.0, 0.0, 2.0, 2.0], vec![-2.0, 0.0, 1.0, 3.0]);
        assert_eq!(g.values, vec![0.0, 0.5, 0.5, 1.0]);
    }
}
