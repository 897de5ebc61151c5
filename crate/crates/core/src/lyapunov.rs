//! Monte Carlo Lyapunov exponents and the probes built on them: large-deviation
//! tails, block averages, the avalanche principle, the three-scale relation,
//! Hölder fits and the Furstenberg conditions.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmv::{exceptional_check, szego_step, ExceptionalReport};
use crate::ensemble::{derive_seed, sample_window_stream, DistributionSpec, WordWindow};
use crate::error::{Error, Result};
use crate::mat2::{classify, Conjugacy, Flavor, Mat2, RMat2, Scalar, ScaledMat2};
use crate::schrodinger::{log_norms_at, transfer_step};
use crate::stats::{line_fit, mean_stderr, wilson_interval, Interval};

pub(crate) const LE_TAG: u64 = 0x1E;
const REF_TAG: u64 = 0x4EF;
const BLOCK_TAG: u64 = 0xB10C;
/// Scale and sample count of the cached reference exponent.
pub const REFERENCE_N: usize = 8000;
pub const REFERENCE_SAMPLES: usize = 256;
/// Default avalanche constant.
pub const AVALANCHE_C: f64 = 20.0;

/// Estimate of `L_n` (or of `L` for the extrapolated estimator) at one spectral parameter.
/// For CMV cocycles `energy` holds the argument of `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LEEstimate {
    pub energy: f64,
    pub n: usize,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
    pub seed: u64,
}

/// Runs `f(s)` for `s in 0..samples` in parallel and returns the results in index order.
pub(crate) fn per_sample<T: Send>(samples: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..samples as u64).into_par_iter().map(f).collect()
}

fn real_window(dist: &DistributionSpec, len: usize, root: u64, s: u64) -> Result<WordWindow<f64>> {
    sample_window_stream(dist, 0, len as i64, root, s)
}

fn check_counts(n: usize, samples: usize) -> Result<()> {
    if n == 0 || samples == 0 {
        return Err(Error::InvalidArgument("need n ≥ 1 and samples ≥ 1".into()));
    }
    Ok(())
}

/// `log ‖M_k‖` of the running Schrödinger product over a fresh window, at each checkpoint.
fn schrodinger_logs(e: f64, dist: &DistributionSpec, checkpoints: &[usize], root: u64, s: u64) -> Result<Vec<f64>> {
    let len = *checkpoints.last().unwrap();
    let w = real_window(dist, len, root, s)?;
    Ok(log_norms_at(e, &w.values, checkpoints))
}

fn summarize(energy: f64, n: usize, seed: u64, xs: &[f64]) -> LEEstimate {
    let (mean, stderr) = mean_stderr(xs);
    LEEstimate {
        energy,
        n,
        samples: xs.len(),
        mean,
        stderr,
        seed,
    }
}

/// Plain average of `F_n` over independent windows: an estimate of `L_n(E)`.
pub fn estimate_ln(e: f64, dist: &DistributionSpec, n: usize, samples: usize, seed: u64) -> Result<LEEstimate> {
    check_counts(n, samples)?;
    dist.require_flavor(Flavor::Real)?;
    let root = derive_seed(seed, LE_TAG);
    let xs = per_sample(samples, |s| Ok(schrodinger_logs(e, dist, &[n], root, s)?[0] / n as f64))?;
    Ok(summarize(e, n, seed, &xs))
}

/// Two-scale estimate of `L(E)`: average of `2F_n − F_{⌊n/2⌋}` on the same windows.
/// The `O(1/n)` boundary term of `F_n` cancels, leaving an error that decays
/// exponentially in `n`.
pub fn estimate_l(e: f64, dist: &DistributionSpec, n: usize, samples: usize, seed: u64) -> Result<LEEstimate> {
    check_counts(n, samples)?;
    if n < 2 {
        return Err(Error::InvalidArgument("two-scale estimate needs n ≥ 2".into()));
    }
    dist.require_flavor(Flavor::Real)?;
    let root = derive_seed(seed, LE_TAG);
    let half = n / 2;
    let xs = per_sample(samples, |s| {
        let l = schrodinger_logs(e, dist, &[half, n], root, s)?;
        Ok(two_scale(l[0], half, l[1], n))
    })?;
    Ok(summarize(e, n, seed, &xs))
}

pub(crate) fn two_scale(log_half: f64, half: usize, log_full: f64, n: usize) -> f64 {
    2.0 * log_full / n as f64 - log_half / half as f64
}

/// `log` of the spectral radius of `[[t, −1], [1, 0]]`.
pub fn constant_cocycle_exponent(t: f64) -> f64 {
    let a = t.abs();
    if a <= 2.0 {
        0.0
    } else {
        ((a + (a * a - 4.0).sqrt()) / 2.0).ln()
    }
}

type RefKey = (u64, String, u64, usize, usize);

fn reference_cache() -> &'static Mutex<HashMap<RefKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<RefKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Drops every cached reference value; later calls recompute them.
pub fn clear_reference_cache() {
    reference_cache().lock().unwrap().clear();
}

/// Reference `L(E)` for deviation probes, computed once per (E, distribution, seed, scale).
/// Single-atom laws use the exact exponent of the constant cocycle; otherwise the
/// two-scale estimate at `n_ref` over `REFERENCE_SAMPLES` windows.
pub fn reference_l(e: f64, dist: &DistributionSpec, seed: u64, n_ref: usize) -> Result<f64> {
    dist.require_flavor(Flavor::Real)?;
    if dist.is_single_atom() {
        let a = dist.real_atom_values().unwrap()[0];
        return Ok(constant_cocycle_exponent(e - a));
    }
    let key = (e.to_bits(), dist.canonical_json(), seed, n_ref, REFERENCE_SAMPLES);
    if let Some(v) = reference_cache().lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let v = estimate_l(e, dist, n_ref, REFERENCE_SAMPLES, derive_seed(seed, REF_TAG))?.mean;
    reference_cache().lock().unwrap().insert(key, v);
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LECurve {
    pub points: Vec<LEEstimate>,
    /// Smallest mean on the grid (the empirical `γ`).
    pub min_mean: f64,
}

/// `L_n` on an energy grid. All energies share the same windows.
pub fn le_curve(grid: &[f64], dist: &DistributionSpec, n: usize, samples: usize, seed: u64) -> Result<LECurve> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty energy grid".into()));
    }
    let points = grid
        .iter()
        .map(|&e| estimate_ln(e, dist, n, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    let min_mean = points.iter().map(|p| p.mean).fold(f64::INFINITY, f64::min);
    Ok(LECurve { points, min_mean })
}

impl LECurve {
    /// Linear interpolation of the means; clamped to the end values outside the grid.
    pub fn interpolate(&self, e: f64) -> f64 {
        let p = &self.points;
        if e <= p[0].energy {
            return p[0].mean;
        }
        if e >= p[p.len() - 1].energy {
            return p[p.len() - 1].mean;
        }
        let i = p.partition_point(|q| q.energy <= e);
        let (a, b) = (&p[i - 1], &p[i]);
        a.mean + (b.mean - a.mean) * (e - a.energy) / (b.energy - a.energy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LDTRow {
    pub n: usize,
    pub probability: f64,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LDTReport {
    pub energy: f64,
    pub epsilon: f64,
    pub reference_l: f64,
    pub samples: usize,
    pub rows: Vec<LDTRow>,
    /// `−slope` of the line through `(n, log max(p, 1/samples))`.
    pub fitted_eta: f64,
    pub fit_r2: f64,
    /// Rows whose zero probability was clipped to `1/samples` for the fit.
    pub clipped_rows: usize,
    /// Some probability exceeds that of a smaller `n`.
    pub non_monotone: bool,
    /// Some later Wilson interval lies entirely above an earlier one.
    pub increase_beyond_intervals: bool,
    pub insufficient_sampling: bool,
}

/// Below this many samples a report is flagged as statistically insufficient.
pub const MIN_LDT_SAMPLES: usize = 30;

/// Fraction of windows with `|F_n − L_ref| ≥ ε` for each `n` in `n_list`.
pub fn ldt_probe(
    e: f64,
    dist: &DistributionSpec,
    epsilon: f64,
    n_list: &[usize],
    samples: usize,
    seed: u64,
) -> Result<LDTReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() || ns[0] == 0 {
        return Err(Error::InvalidArgument("n_list must hold positive scales".into()));
    }
    check_counts(1, samples)?;
    dist.require_flavor(Flavor::Real)?;
    let nmax = *ns.last().unwrap();
    let l_ref = reference_l(e, dist, seed, REFERENCE_N.max(4 * nmax))?;
    let root = derive_seed(seed, LE_TAG);
    let hits = per_sample(samples, |s| {
        let logs = schrodinger_logs(e, dist, &ns, root, s)?;
        Ok(logs
            .iter()
            .zip(&ns)
            .map(|(l, &n)| (l / n as f64 - l_ref).abs() >= epsilon)
            .collect::<Vec<bool>>())
    })?;
    let rows: Vec<LDTRow> = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let k = hits.iter().filter(|h| h[i]).count() as u64;
            LDTRow {
                n,
                probability: k as f64 / samples as f64,
                interval: wilson_interval(k, samples as u64),
            }
        })
        .collect();
    Ok(ldt_report(e, epsilon, l_ref, samples, rows))
}

fn ldt_report(e: f64, epsilon: f64, l_ref: f64, samples: usize, rows: Vec<LDTRow>) -> LDTReport {
    let floor = 1.0 / samples as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.probability.max(floor).ln()).collect();
    let clipped_rows = rows.iter().filter(|r| r.probability < floor).count();
    let (fitted_eta, fit_r2) = match line_fit(&xs, &ys) {
        Some(f) => (-f.slope, f.r2),
        None => (f64::NAN, f64::NAN),
    };
    let mut non_monotone = false;
    let mut increase_beyond_intervals = false;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            non_monotone |= rows[j].probability > rows[i].probability;
            increase_beyond_intervals |= rows[j].interval.lo > rows[i].interval.hi;
        }
    }
    LDTReport {
        energy: e,
        epsilon,
        reference_l: l_ref,
        samples,
        rows,
        fitted_eta,
        fit_r2,
        clipped_rows,
        non_monotone,
        increase_beyond_intervals,
        insufficient_sampling: samples < MIN_LDT_SAMPLES,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockMeanReport {
    pub energy: f64,
    pub n: usize,
    pub blocks: usize,
    pub offset: i64,
    pub epsilon: f64,
    pub reference_l: f64,
    pub probability: f64,
    pub interval: Interval,
    /// `e^{−εr/2}`.
    pub envelope: f64,
    /// `p ≤ envelope + 3·(Wilson half-width)`.
    pub within_envelope: bool,
}

/// Probability that the average of `F_n` over the `r` consecutive blocks
/// `[ℓ + sn, ℓ + (s+1)n)` deviates from `L` by at least `ε`.
#[allow(clippy::too_many_arguments)]
pub fn block_mean_probe(
    e: f64,
    dist: &DistributionSpec,
    n: usize,
    r: usize,
    ell: i64,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<BlockMeanReport> {
    check_counts(n, samples)?;
    if r == 0 || !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("need r ≥ 1 and epsilon > 0".into()));
    }
    dist.require_flavor(Flavor::Real)?;
    let l_ref = reference_l(e, dist, seed, REFERENCE_N.max(4 * n))?;
    let root = derive_seed(seed, BLOCK_TAG);
    let hits = per_sample(samples, |s| {
        let w: WordWindow<f64> = sample_window_stream(dist, ell, (r * n) as i64, root, s)?;
        let total: f64 = w
            .values
            .chunks(n)
            .map(|block| log_norms_at(e, block, &[n])[0] / n as f64)
            .sum();
        Ok((total / r as f64 - l_ref).abs() >= epsilon)
    })?;
    let k = hits.iter().filter(|&&h| h).count() as u64;
    let interval = wilson_interval(k, samples as u64);
    let probability = k as f64 / samples as f64;
    let envelope = (-epsilon * r as f64 / 2.0).exp();
    Ok(BlockMeanReport {
        energy: e,
        n,
        blocks: r,
        offset: ell,
        epsilon,
        reference_l: l_ref,
        probability,
        interval,
        envelope,
        within_envelope: probability <= envelope + 3.0 * interval.half_width(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvalancheReport {
    /// `min ‖A_j‖ ≥ λ > n`.
    pub norms_ok: bool,
    /// `max_j |log‖A_{j+1}‖ + log‖A_j‖ − log‖A_{j+1}A_j‖| < ½ log λ`.
    pub pairs_ok: bool,
    pub hypotheses_ok: bool,
    pub lhs: f64,
    pub bound: f64,
}

/// Avalanche-principle check for the product `A_n ⋯ A_1` (`chain[0]` acts first).
pub fn avalanche_check<S: Scalar>(chain: &[Mat2<S>], lambda: f64, c: f64) -> Result<AvalancheReport> {
    let scaled = chain
        .iter()
        .map(ScaledMat2::from_mat)
        .collect::<Result<Vec<_>>>()?;
    avalanche_check_scaled(&scaled, lambda, c)
}

/// As [`avalanche_check`] for factors held in scaled form.
pub fn avalanche_check_scaled<S: Scalar>(chain: &[ScaledMat2<S>], lambda: f64, c: f64) -> Result<AvalancheReport> {
    let n = chain.len();
    if n < 3 {
        return Err(Error::InvalidArgument("avalanche chain needs at least 3 factors".into()));
    }
    for m in chain {
        // represented det is e^{2·logmag}·det(body); compare on the body scale
        let target = (-2.0 * m.logmag).exp();
        let err = (m.body.det().to_complex() - Complex64::new(target, 0.0)).norm();
        if !m.body.is_finite() || err > 1e-9 * target.max(1.0) {
            return Err(Error::InvalidMatrix("avalanche factor is not unimodular".into()));
        }
    }
    let logs: Vec<f64> = chain.iter().map(|m| m.logmag).collect();
    let pair_logs: Vec<f64> = (0..n - 1)
        .map(|j| chain[j + 1].mul(&chain[j]).map(|p| p.logmag))
        .collect::<Result<_>>()?;
    let mut total = ScaledMat2::identity();
    for m in chain {
        total = m.mul(&total)?;
    }
    let min_norm = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let log_lambda = lambda.ln();
    let norms_ok = lambda > n as f64 && min_norm >= log_lambda - 1e-12;
    let pairs_ok = (0..n - 1).all(|j| (logs[j + 1] + logs[j] - pair_logs[j]).abs() < 0.5 * log_lambda);
    let middle: f64 = logs[1..n - 1].iter().sum();
    let pairs: f64 = pair_logs.iter().sum();
    let lhs = (total.logmag + middle - pairs).abs();
    Ok(AvalancheReport {
        norms_ok,
        pairs_ok,
        hypotheses_ok: norms_ok && pairs_ok,
        lhs,
        bound: c * n as f64 / lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConsistency {
    pub energy: f64,
    pub n: usize,
    pub reference_l: f64,
    pub ln: f64,
    pub l2n: f64,
    /// `|L + L_n − 2L_{2n}|`.
    pub value: f64,
    /// Standard error of the paired difference `F_n − 2F_{2n}`.
    pub stderr: f64,
}

/// Three-scale defect `|L + L_n − 2L_{2n}|`; `F_n` and `F_{2n}` come from the same windows.
pub fn scale_consistency(e: f64, dist: &DistributionSpec, n: usize, samples: usize, seed: u64) -> Result<ScaleConsistency> {
    check_counts(n, samples)?;
    dist.require_flavor(Flavor::Real)?;
    let l_ref = reference_l(e, dist, seed, REFERENCE_N.max(8 * n))?;
    let root = derive_seed(seed, LE_TAG);
    let pairs = per_sample(samples, |s| {
        let l = schrodinger_logs(e, dist, &[n, 2 * n], root, s)?;
        Ok((l[0] / n as f64, l[1] / (2 * n) as f64))
    })?;
    let f1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let f2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d: Vec<f64> = pairs.iter().map(|p| p.0 - 2.0 * p.1).collect();
    let (dm, stderr) = mean_stderr(&d);
    Ok(ScaleConsistency {
        energy: e,
        n,
        reference_l: l_ref,
        ln: mean_stderr(&f1).0,
        l2n: mean_stderr(&f2).0,
        value: (l_ref + dm).abs(),
        stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderPair {
    pub e1: f64,
    pub e2: f64,
    pub delta_l: f64,
    pub stderr: f64,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub c: f64,
    pub beta: f64,
    pub r2: f64,
    pub discarded_fraction: f64,
    pub pairs: Vec<HolderPair>,
}

/// Fits `|L(E) − L(E′)| ≈ C |E − E′|^β` over the pairs whose difference is resolved
/// (above five paired standard errors).
pub fn holder_fit(dist: &DistributionSpec, pairs: &[(f64, f64)], n: usize, samples: usize, seed: u64) -> Result<HolderFit> {
    check_counts(n, samples)?;
    dist.require_flavor(Flavor::Real)?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no energy pairs".into()));
    }
    let root = derive_seed(seed, LE_TAG);
    let mut rows = Vec::with_capacity(pairs.len());
    for &(e1, e2) in pairs {
        let d = per_sample(samples, |s| {
            let w = real_window(dist, n, root, s)?;
            let a = log_norms_at(e1, &w.values, &[n])[0];
            let b = log_norms_at(e2, &w.values, &[n])[0];
            Ok((a - b) / n as f64)
        })?;
        let (m, se) = mean_stderr(&d);
        let used = e1 != e2 && m.abs() > 5.0 * se && m != 0.0;
        rows.push(HolderPair {
            e1,
            e2,
            delta_l: m.abs(),
            stderr: se,
            used,
        });
    }
    let kept: Vec<&HolderPair> = rows.iter().filter(|p| p.used).collect();
    let discarded_fraction = 1.0 - kept.len() as f64 / rows.len() as f64;
    if kept.len() < 2 {
        return Err(Error::InsufficientSignal(format!(
            "{} of {} pairs resolved; need at least 2",
            kept.len(),
            rows.len()
        )));
    }
    let xs: Vec<f64> = kept.iter().map(|p| (p.e1 - p.e2).abs().ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.delta_l.ln()).collect();
    let fit = line_fit(&xs, &ys).ok_or_else(|| Error::InsufficientSignal("energy gaps all equal".into()))?;
    Ok(HolderFit {
        c: fit.intercept.exp(),
        beta: fit.slope,
        r2: fit.r2,
        discarded_fraction,
        pairs: rows,
    })
}

/// Spectral parameter of a cocycle: an energy for Schrödinger, a unit-circle point for CMV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralParameter {
    Energy(f64),
    Circle(Complex64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurstenbergReport {
    pub noncompact: bool,
    pub strongly_irreducible: bool,
    pub contracting: bool,
    pub witness: String,
    /// `σ_min/σ_max` of the `CONTRACTION_POWER`-th power of the witness element.
    pub contraction_ratio: f64,
    pub exceptional: Option<ExceptionalReport>,
}

pub const CONTRACTION_POWER: u32 = 10_000;
const RANK_ONE_TOL: f64 = 1e-6;

fn power(m: &RMat2, k: u32) -> ScaledMat2<f64> {
    let mut acc = ScaledMat2::identity();
    let step = ScaledMat2::from_mat(m).expect("finite");
    let mut base = step;
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            acc = acc.mul(&base).expect("finite");
        }
        base = base.mul(&base).expect("finite");
        k >>= 1;
    }
    acc
}

fn singular_ratio<S: Scalar>(p: &ScaledMat2<S>) -> f64 {
    // body has norm 1, so σ_min/σ_max = |det body|
    p.body.det().abs()
}

/// Furstenberg conditions for the group generated by the one-step matrices.
pub fn furstenberg_check(dist: &DistributionSpec, param: SpectralParameter) -> Result<FurstenbergReport> {
    if dist.is_single_atom() {
        return Err(Error::TrivialSupport);
    }
    match (dist.flavor(), param) {
        (Flavor::Real, SpectralParameter::Energy(e)) => real_furstenberg(dist, e),
        (Flavor::Complex, SpectralParameter::Circle(z)) => crate::cmv::complex_furstenberg(dist, z),
        (Flavor::Real, _) => Err(Error::InvalidArgument("real distributions take an energy".into())),
        (Flavor::Complex, _) => Err(Error::InvalidArgument("complex distributions take a point of the unit circle".into())),
    }
}

fn real_furstenberg(dist: &DistributionSpec, e: f64) -> Result<FurstenbergReport> {
    let (lo, hi) = dist
        .real_range()
        .ok_or_else(|| Error::InvalidDistribution("no real support".into()))?;
    if hi <= lo {
        return Err(Error::TrivialSupport);
    }
    let (a, b) = (hi, lo);
    let ma = transfer_step(e, a);
    let mb = transfer_step(e, b);
    let shear = ma.mul(&mb.inverse()?);
    let shear2 = ma.inverse()?.mul(&mb);
    let parabolic = classify(&shear)? == Conjugacy::Parabolic;
    let nontrivial = shear.max_abs_diff(&RMat2::identity()) > 1e-12;
    let p = power(&shear, CONTRACTION_POWER);
    let ratio = singular_ratio(&p);
    // a nontrivial parabolic fixes one direction only; finite invariant sets of
    // the group must sit inside it, and the second shear moves it
    let fixed = if shear.b.abs() >= shear.c.abs() { [1.0, 0.0] } else { [0.0, 1.0] };
    let moved = [
        shear2.a * fixed[0] + shear2.b * fixed[1],
        shear2.c * fixed[0] + shear2.d * fixed[1],
    ];
    let cross = moved[0] * fixed[1] - moved[1] * fixed[0];
    let moved_norm = (moved[0] * moved[0] + moved[1] * moved[1]).sqrt();
    let strongly_irreducible = parabolic && nontrivial && cross.abs() > 1e-12 * moved_norm;
    Ok(FurstenbergReport {
        noncompact: parabolic && nontrivial && p.logmag > 0.0,
        strongly_irreducible,
        contracting: ratio <= RANK_ONE_TOL,
        witness: format!(
            "A = M({a})M({b})^-1 = [[{}, {}], [{}, {}]]; A' = M({a})^-1 M({b}) = [[{}, {}], [{}, {}]]",
            shear.a, shear.b, shear.c, shear.d, shear2.a, shear2.b, shear2.c, shear2.d
        ),
        contraction_ratio: ratio,
        exceptional: None,
    })
}

pub(crate) fn szego_power_ratio(m: &Mat2<Complex64>) -> f64 {
    let mut acc = ScaledMat2::identity();
    let mut base = ScaledMat2::from_mat(m).expect("finite");
    let mut k = CONTRACTION_POWER;
    while k > 0 {
        if k & 1 == 1 {
            acc = acc.mul(&base).expect("finite");
        }
        base = base.mul(&base).expect("finite");
        k >>= 1;
    }
    singular_ratio(&acc)
}

pub(crate) fn exceptional_for(dist: &DistributionSpec) -> Option<ExceptionalReport> {
    exceptional_check(dist).ok()
}

pub(crate) fn szego_generators(dist: &DistributionSpec, z: Complex64) -> Result<Vec<Mat2<Complex64>>> {
    let atoms = dist
        .complex_atom_values()
        .ok_or_else(|| Error::InvalidDistribution("constructive check needs atoms".into()))?;
    atoms.iter().map(|&a| Ok(szego_step(z, a)?.1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLD: f64 = 0.962_423_650_119_206_9;

    #[test]
    fn constant_cocycle_closed_form() {
        assert!((constant_cocycle_exponent(3.0) - GOLD).abs() < 1e-15);
        assert!((constant_cocycle_exponent(2.5) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(constant_cocycle_exponent(1.0), 0.0);
    }

    #[test]
    fn two_scale_estimate_is_exact_for_constant_cocycle() {
        let d = DistributionSpec::point(0.0).unwrap();
        let est = estimate_l(3.0, &d, 1000, 2, 1).unwrap();
        assert!((est.mean - GOLD).abs() < 1e-12);
        assert_eq!(est.stderr, 0.0);
        let plain = estimate_ln(3.0, &d, 1000, 2, 1).unwrap();
        // finite-n boundary term log(‖P+‖)/n
        assert!(plain.mean > GOLD && plain.mean - GOLD < 1e-3);
    }

    #[test]
    fn elliptic_constant_cocycle_has_small_growth() {
        let d = DistributionSpec::point(0.0).unwrap();
        let est = estimate_ln(1.0, &d, 10_000, 1, 0).unwrap();
        assert!(est.mean <= 2e-3);
    }

    #[test]
    fn estimates_independent_of_worker_count() {
        let d = DistributionSpec::bernoulli(0.0, 2.0).unwrap();
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| estimate_ln(0.4, &d, 200, 64, 3).unwrap());
        let b = pool4.install(|| estimate_ln(0.4, &d, 200, 64, 3).unwrap());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn single_point_curve_matches_estimate() {
        let d = DistributionSpec::bernoulli(0.0, 1.0).unwrap();
        let c = le_curve(&[0.3], &d, 100, 16, 5).unwrap();
        let e = estimate_ln(0.3, &d, 100, 16, 5).unwrap();
        assert_eq!(c.points[0], e);
        assert_eq!(c.min_mean, e.mean);
    }

    #[test]
    fn ldt_degenerate_cases() {
        let d = DistributionSpec::point(0.0).unwrap();
        let r = ldt_probe(3.0, &d, 0.5, &[10, 20, 40], 20, 1).unwrap();
        assert!(r.rows.iter().all(|row| row.probability == 0.0));
        let b = DistributionSpec::bernoulli(0.0, 3.0).unwrap();
        let r = ldt_probe(1.5, &b, 0.1, &[50], 1, 1).unwrap();
        assert!(r.rows[0].probability == 0.0 || r.rows[0].probability == 1.0);
        assert!(r.insufficient_sampling);
        assert!(ldt_probe(1.5, &b, 0.0, &[50], 10, 1).is_err());
    }

    #[test]
    fn block_probe_single_atom_is_zero() {
        let d = DistributionSpec::point(0.0).unwrap();
        let r = block_mean_probe(3.0, &d, 50, 5, 0, 0.1, 20, 1).unwrap();
        assert_eq!(r.probability, 0.0);
        assert!(r.within_envelope);
    }

    #[test]
    fn avalanche_aligned_chain_is_exact() {
        let m = RMat2::diag(1e3, 1e-3);
        let chain = vec![m; 10];
        let r = avalanche_check(&chain, 1e3, AVALANCHE_C).unwrap();
        assert!(r.hypotheses_ok);
        assert_eq!(r.lhs, 0.0);
        assert!(r.lhs <= r.bound);
    }

    #[test]
    fn avalanche_pair_violation_is_reported() {
        // A then A^{-1}: pairwise product collapses to the identity
        let a = RMat2::diag(1e3, 1e-3);
        let b = RMat2::diag(1e-3, 1e3);
        let chain = vec![a, b, a, b];
        let r = avalanche_check(&chain, 1e3, AVALANCHE_C).unwrap();
        assert!(r.norms_ok && !r.pairs_ok && !r.hypotheses_ok);
        assert!(avalanche_check(&[RMat2::diag(2.0, 1.0); 3], 10.0, 20.0).is_err());
        assert!(avalanche_check(&[a, b], 10.0, 20.0).is_err());
    }

    #[test]
    fn scale_consistency_single_atom_matches_closed_form() {
        let d = DistributionSpec::point(0.0).unwrap();
        let e = 2.1;
        let m = transfer_step(e, 0.0);
        for n in [4usize, 8] {
            let r = scale_consistency(e, &d, n, 1, 0).unwrap();
            let lp = |k: u32| power(&m, k).logmag;
            let exact = (constant_cocycle_exponent(e) + lp(n as u32) / n as f64 - 2.0 * lp(2 * n as u32) / (2 * n) as f64).abs();
            assert!((r.value - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn holder_single_atom_outside_band() {
        let d = DistributionSpec::point(0.0).unwrap();
        let pairs: Vec<(f64, f64)> = (1..8).map(|k| (3.0, 3.0 + 0.5f64.powi(k))).chain([(3.0, 3.0)]).collect();
        let f = holder_fit(&d, &pairs, 400, 1, 0).unwrap();
        assert!((f.beta - 1.0).abs() < 0.05);
        assert!(!f.pairs.last().unwrap().used);
    }

    #[test]
    fn furstenberg_real_shears() {
        let d = DistributionSpec::bernoulli(0.0, 1.0).unwrap();
        for e in [-2.0, 0.3, 1.7] {
            let r = furstenberg_check(&d, SpectralParameter::Energy(e)).unwrap();
            assert!(r.noncompact && r.strongly_irreducible && r.contracting);
            assert!(r.witness.contains("[[1, -1], [0, 1]]"));
        }
        let swapped = DistributionSpec::real_atoms(&[(1.0, 0.5), (0.0, 0.5)]).unwrap();
        let a = furstenberg_check(&d, SpectralParameter::Energy(0.3)).unwrap();
        let b = furstenberg_check(&swapped, SpectralParameter::Energy(0.3)).unwrap();
        assert_eq!(a, b);
        let p = DistributionSpec::point(0.0).unwrap();
        assert!(matches!(
            furstenberg_check(&p, SpectralParameter::Energy(0.0)),
            Err(Error::TrivialSupport)
        ));
    }
}
