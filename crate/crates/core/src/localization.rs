//! Localization diagnostics on finite boxes: eigenfunction centers and decay rates,
//! SULE envelopes, center counting, the dynamical-localization kernel and
//! double-resonance scans.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{derive_seed, sample_window_stream, support_constants, DistributionSpec, WordWindow};
use crate::error::{Error, Result};
use crate::mat2::Flavor;
use crate::lyapunov::{per_sample, reference_l, REFERENCE_N};
use crate::schrodinger::{log_norms_at, FiniteOperator};
use crate::spectral::eig_sym_tridiag;
use crate::stats::{least_squares, line_fit, median, wilson_interval, Interval};
use crate::tridiag::pivot_min;

/// Sites with `|u| ≤` this (for unit vectors) are left out of decay fits.
pub const DECAY_FLOOR: f64 = 1e-13;
/// Sites this close to the center are pre-asymptotic and left out of decay fits.
pub const CORE_EXCLUSION: usize = 5;
/// Time step and count of the sampled evolution checks in [`dynloc_kernel`].
pub const DYNLOC_TIME_STEP: f64 = 0.5;
pub const DYNLOC_TIMES: usize = 41;
/// Tolerance of completeness and of the evolution domination.
pub const DYNLOC_TOL: f64 = 1e-9;
/// Largest window a double-resonance scan will sample.
pub const MAX_SCAN_SITES: usize = 1 << 21;
const RESONANCE_TAG: u64 = 0xD8E5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub energy: f64,
    /// Site of `vector[0]`.
    pub lo: i64,
    /// Unit eigenvector over the box.
    pub vector: Vec<f64>,
    /// Smallest site attaining `max |u|`.
    pub center: i64,
    pub decay_rate: Option<f64>,
    pub fit_residual: Option<f64>,
    /// Set when no side of the center had enough points for a fit.
    pub flagged: bool,
}

impl EigenRecord {
    pub fn center_index(&self) -> usize {
        (self.center - self.lo) as usize
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.vector.len() as i64 - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Average over the fitted sides of `−slope` of `log |u|` vs distance.
    pub rate: f64,
    /// Mean RMS residual of the side fits.
    pub residual: f64,
    pub sides: usize,
}

/// Smallest index attaining `max |u|`.
pub fn center_of(u: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in u.iter().enumerate() {
        if v.abs() > u[best].abs() {
            best = i;
        }
    }
    best
}

/// Two-sided least-squares fit of `log |u(n)|` against `|n − center|`, using sites more than
/// [`CORE_EXCLUSION`] away from the center where `|u|/‖u‖₂ > DECAY_FLOOR`. Sides with fewer
/// than two such sites are skipped; `None` if both are.
pub fn decay_fit(u: &[f64], center: usize) -> Option<DecayFit> {
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || center >= u.len() {
        return None;
    }
    let side = |idx: &mut dyn Iterator<Item = usize>| {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for i in idx {
            let d = i.abs_diff(center);
            let a = u[i].abs() / norm;
            if d > CORE_EXCLUSION && a > DECAY_FLOOR {
                xs.push(d as f64);
                ys.push(a.ln());
            }
        }
        line_fit(&xs, &ys)
    };
    let fits: Vec<_> = [side(&mut (0..center)), side(&mut (center + 1..u.len()))]
        .into_iter()
        .flatten()
        .collect();
    if fits.is_empty() {
        return None;
    }
    let k = fits.len() as f64;
    Some(DecayFit {
        rate: fits.iter().map(|f| -f.slope).sum::<f64>() / k,
        residual: fits.iter().map(|f| f.rms).sum::<f64>() / k,
        sides: fits.len(),
    })
}

/// All eigenpairs of `H` on `[0, n)`.
pub fn eigenrecords(w: &WordWindow<f64>, n: usize) -> Result<Vec<EigenRecord>> {
    if n == 0 {
        return Err(Error::InvalidArgument("box size must be ≥ 1".into()));
    }
    eigenrecords_on(w, 0, n as i64 - 1)
}

/// All eigenpairs of `H` on `[lo, hi]`, ascending in energy.
pub fn eigenrecords_on(w: &WordWindow<f64>, lo: i64, hi: i64) -> Result<Vec<EigenRecord>> {
    let op = FiniteOperator::restrict(w, lo, hi)?;
    let sys = eig_sym_tridiag(&op.diagonal, &op.offdiagonal, None, true)?;
    let vectors = sys.vectors.expect("vectors requested");
    Ok(sys
        .values
        .into_iter()
        .zip(vectors)
        .map(|(energy, vector)| {
            let c = center_of(&vector);
            let fit = decay_fit(&vector, c);
            EigenRecord {
                energy,
                lo,
                center: lo + c as i64,
                decay_rate: fit.map(|f| f.rate),
                fit_residual: fit.map(|f| f.residual),
                flagged: fit.is_none(),
                vector,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuleFit {
    pub delta: f64,
    /// Per record, `log` of the smallest `C` with `|u(n)| ≤ C‖u‖_∞ e^{−(1−δ)L(E)|n−ζ|}` everywhere.
    pub log_record_constants: Vec<f64>,
    /// Median of the record constants.
    pub log_c_fit: f64,
    /// Smallest constant covering every record.
    pub log_c_all: f64,
    /// Constant the violations are counted against (fitted unless a reference was given).
    pub log_c_used: f64,
    /// Fraction of (record, site) pairs inside the envelope with `log_c_used`.
    pub compliance: f64,
    /// (record index, site) pairs outside that envelope.
    pub violations: Vec<(usize, i64)>,
    /// Slope of `log C_ℓ` against `log(|ζ_ℓ| + 1)`.
    pub exponent_fit: Option<f64>,
    pub pairs: usize,
}

/// Fits the SULE envelope with rate `(1−δ)·rate(E)`. Violations are counted against the
/// fitted constant, or against `log_c_reference` when given.
pub fn sule_fit(
    records: &[EigenRecord],
    rate: impl Fn(f64) -> f64,
    delta: f64,
    log_c_reference: Option<f64>,
) -> SuleFit {
    let profiles: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            let l = (1.0 - delta) * rate(r.energy);
            let c = r.center_index();
            let top = r.vector[c].abs().ln();
            r.vector
                .iter()
                .enumerate()
                .map(|(i, v)| v.abs().ln() - top + l * i.abs_diff(c) as f64)
                .collect()
        })
        .collect();
    let log_record_constants: Vec<f64> = profiles
        .iter()
        .map(|p| p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let (log_c_fit, log_c_all) = if records.is_empty() {
        (0.0, 0.0)
    } else {
        (
            median(&log_record_constants),
            log_record_constants.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let log_c_used = log_c_reference.unwrap_or(log_c_fit);
    let mut violations = Vec::new();
    let mut pairs = 0;
    for (k, (p, r)) in profiles.iter().zip(records).enumerate() {
        pairs += p.len();
        for (i, &v) in p.iter().enumerate() {
            if v > log_c_used + 1e-12 {
                violations.push((k, r.lo + i as i64));
            }
        }
    }
    let compliance = if pairs == 0 {
        1.0
    } else {
        1.0 - violations.len() as f64 / pairs as f64
    };
    let xs: Vec<f64> = records.iter().map(|r| ((r.center.unsigned_abs() + 1) as f64).ln()).collect();
    let exponent_fit = line_fit(&xs, &log_record_constants).map(|f| f.slope);
    SuleFit {
        delta,
        log_record_constants,
        log_c_fit,
        log_c_all,
        log_c_used,
        compliance,
        violations,
        exponent_fit,
        pairs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterCountRow {
    pub l: i64,
    pub count: usize,
    /// `count ≤ L²`.
    pub compliant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterCount {
    /// Ascending in `L`.
    pub rows: Vec<CenterCountRow>,
    /// Smallest listed `L` from which every larger listed `L` complies.
    pub l0: Option<i64>,
}

/// Number of centers in `[−L, L]` for each `L`.
pub fn center_count(records: &[EigenRecord], ls: &[i64]) -> CenterCount {
    let mut ls = ls.to_vec();
    ls.sort_unstable();
    ls.dedup();
    let rows: Vec<CenterCountRow> = ls
        .iter()
        .map(|&l| {
            let count = records.iter().filter(|r| r.center.abs() <= l).count();
            CenterCountRow {
                l,
                count,
                compliant: (count as i128) <= (l as i128) * (l as i128),
            }
        })
        .collect();
    let mut l0 = None;
    for row in rows.iter().rev() {
        if !row.compliant {
            break;
        }
        l0 = Some(row.l);
    }
    CenterCount { rows, l0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynLocKernel {
    pub lo: i64,
    pub size: usize,
    /// Row-major `Q(n, m) = Σ_ℓ |u_ℓ(n)||u_ℓ(m)|`.
    pub q: Vec<f64>,
    /// `max_n |Q(n,n) − 1|`.
    pub completeness_residual: f64,
    pub times: Vec<f64>,
    /// `min (Q(n,m) − |⟨δ_n, e^{−itH}δ_m⟩|)` over the sampled times and all pairs.
    pub domination_margin: f64,
    pub dominated: bool,
    /// Envelope `log Q(n,m) ≤ log_c + ε|m| − β|n−m|` over bulk `m`.
    pub beta: f64,
    pub epsilon: f64,
    pub log_c: f64,
    pub fit_points: usize,
}

impl DynLocKernel {
    /// Sites are absolute.
    pub fn get(&self, n: i64, m: i64) -> f64 {
        self.q[(n - self.lo) as usize * self.size + (m - self.lo) as usize]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four lanes, fixed order
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Kernel from a complete eigenbasis of `H` on `[lo, hi]`.
pub fn dynloc_kernel(records: &[EigenRecord], lo: i64, hi: i64) -> Result<DynLocKernel> {
    if hi < lo {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    let size = (hi - lo + 1) as usize;
    if records.len() != size {
        return Err(Error::IncompleteBasis {
            found: records.len(),
            expected: size,
        });
    }
    if records.iter().any(|r| r.lo != lo || r.vector.len() != size) {
        return Err(Error::InvalidArgument("records do not live on the window".into()));
    }
    // site-major copies: row n holds u_ℓ(n) over ℓ
    let mut sites = vec![0.0; size * size];
    for (l, r) in records.iter().enumerate() {
        for (n, v) in r.vector.iter().enumerate() {
            sites[n * size + l] = *v;
        }
    }
    let abs_sites: Vec<f64> = sites.iter().map(|v| v.abs()).collect();
    fn row(a: &[f64], n: usize, size: usize) -> &[f64] {
        &a[n * size..(n + 1) * size]
    }
    let q: Vec<f64> = (0..size)
        .into_par_iter()
        .flat_map_iter(|n| (0..size).map(move |m| (n, m)).collect::<Vec<_>>())
        .map(|(n, m)| dot(row(&abs_sites, n, size), row(&abs_sites, m, size)))
        .collect();
    let completeness_residual = (0..size).map(|n| (q[n * size + n] - 1.0).abs()).fold(0.0, f64::max);

    let energies: Vec<f64> = records.iter().map(|r| r.energy).collect();
    let times: Vec<f64> = (0..DYNLOC_TIMES).map(|k| k as f64 * DYNLOC_TIME_STEP).collect();
    let mut domination_margin = f64::INFINITY;
    for &t in &times {
        let cos: Vec<f64> = energies.iter().map(|e| (t * e).cos()).collect();
        let sin: Vec<f64> = energies.iter().map(|e| (t * e).sin()).collect();
        let margin = (0..size)
            .into_par_iter()
            .map(|n| {
                let un = row(&sites, n, size);
                let a: Vec<f64> = un.iter().zip(&cos).map(|(u, c)| u * c).collect();
                let b: Vec<f64> = un.iter().zip(&sin).map(|(u, s)| u * s).collect();
                (n..size)
                    .map(|m| {
                        let um = row(&sites, m, size);
                        let (re, im) = (dot(&a, um), dot(&b, um));
                        q[n * size + m] - re.hypot(im)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min);
        domination_margin = domination_margin.min(margin);
    }

    let (beta, epsilon, log_c, fit_points) = fit_envelope(&q, lo, size)?;
    Ok(DynLocKernel {
        lo,
        size,
        q,
        completeness_residual,
        times,
        domination_margin,
        dominated: domination_margin >= -DYNLOC_TOL,
        beta,
        epsilon,
        log_c,
        fit_points,
    })
}

/// Least squares of `log Q` on `(1, |m|, −|n−m|)` over all `n` and the inner half of `m`,
/// refit with `ε = 0` if the free fit gives `ε < 0`; `log C` is then raised to cover every point.
fn fit_envelope(q: &[f64], lo: i64, size: usize) -> Result<(f64, f64, f64, usize)> {
    let (mut rows, mut ys, mut pts) = (Vec::new(), Vec::new(), Vec::new());
    for n in 0..size {
        for m in size / 4..size - size / 4 {
            let v = q[n * size + m];
            if v > 1e-300 {
                let am = (lo + m as i64).unsigned_abs() as f64;
                let d = n.abs_diff(m) as f64;
                rows.push(vec![1.0, am, -d]);
                ys.push(v.ln());
                pts.push((am, d));
            }
        }
    }
    let insufficient = || Error::InsufficientSignal("too few kernel entries in the bulk".into());
    let coef = least_squares(&rows, &ys).ok_or_else(insufficient)?;
    let (epsilon, beta) = if coef[1] >= 0.0 {
        (coef[1], coef[2])
    } else {
        let rows0: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[2]]).collect();
        let c0 = least_squares(&rows0, &ys).ok_or_else(insufficient)?;
        (0.0, c0[1])
    };
    let log_c = pts
        .iter()
        .zip(&ys)
        .map(|((am, d), y)| y - epsilon * am + beta * d)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((beta, epsilon, log_c, ys.len()))
}

/// How the far end of the gap range grows with `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BarRule {
    /// `⌊c·K⌋`.
    Linear(f64),
    /// `⌊K^{ln K}⌋`.
    LogPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceScales {
    /// Box ends `N₁, N₂ ∈ [0, K^p]`.
    pub box_exponent: f64,
    /// Displacements `r ∈ [K^p, K^p + bar(K)]`.
    pub gap_exponent: f64,
    pub bar: BarRule,
    /// Green condition `‖G‖ ≥ e^{K^p}`.
    pub green_exponent: f64,
    /// Deficit `F_m ≤ L(E) − ε`.
    pub epsilon: f64,
    /// Transfer lengths `m = c·K`.
    pub m_multiples: Vec<usize>,
    pub energy_points: usize,
}

impl ResonanceScales {
    /// Desk-scale defaults.
    pub fn surrogate() -> Self {
        ResonanceScales {
            box_exponent: 2.0,
            gap_exponent: 3.0,
            bar: BarRule::Linear(4.0),
            green_exponent: 2.0,
            epsilon: 0.1,
            m_multiples: vec![1, 2],
            energy_points: 33,
        }
    }

    /// Full proof scales; only tiny `K` fit under [`MAX_SCAN_SITES`].
    pub fn asymptotic() -> Self {
        ResonanceScales {
            box_exponent: 9.0,
            gap_exponent: 10.0,
            bar: BarRule::LogPower,
            ..Self::surrogate()
        }
    }

    fn ranges(&self, k: usize) -> Result<(usize, usize, usize, usize)> {
        if k < 1 {
            return Err(Error::InvalidArgument("K must be ≥ 1".into()));
        }
        if self.m_multiples.is_empty() || self.m_multiples.contains(&0) || self.energy_points == 0 {
            return Err(Error::InvalidArgument("need positive transfer lengths and energies".into()));
        }
        let kf = k as f64;
        let bar = match self.bar {
            BarRule::Linear(c) => (c * kf).floor(),
            BarRule::LogPower => kf.powf(kf.ln()).floor(),
        };
        let box_max = kf.powf(self.box_exponent).floor();
        let gap_min = kf.powf(self.gap_exponent).floor();
        let m_max = (self.m_multiples.iter().max().unwrap() * k) as f64;
        let sites = 2.0 * box_max + gap_min + bar + m_max;
        if !(sites.is_finite() && sites <= MAX_SCAN_SITES as f64) {
            return Err(Error::ScaleOverflow);
        }
        Ok((box_max as usize, gap_min as usize, (gap_min + bar) as usize, m_max as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleResonanceScan {
    pub k: usize,
    pub scales: ResonanceScales,
    pub box_max: usize,
    pub gap_min: usize,
    pub gap_max: usize,
    pub samples: usize,
    pub hits: u64,
    pub frequency: f64,
    pub interval: Interval,
}

/// `points` evenly spaced energies over the hull of the almost-sure spectrum, kept if inside it.
pub fn sigma_grid(dist: &DistributionSpec, points: usize) -> Result<Vec<f64>> {
    let sigma = support_constants(dist)?.sigma_set;
    let (a, b) = (sigma[0].lo, sigma[sigma.len() - 1].hi);
    let grid = (0..points)
        .map(|i| {
            if points == 1 {
                0.5 * (a + b)
            } else {
                a + (b - a) * i as f64 / (points - 1) as f64
            }
        })
        .filter(|e| sigma.iter().any(|s| s.contains(*e)))
        .collect();
    Ok(grid)
}

/// Whether the sampled configuration has a double resonance at scale `K`.
fn resonant(
    w: &WordWindow<f64>,
    k: usize,
    scales: &ResonanceScales,
    ranges: (usize, usize, usize, usize),
    energies: &[(f64, f64)],
) -> bool {
    let (box_max, gap_min, gap_max, m_max) = ranges;
    let checkpoints: Vec<usize> = scales.m_multiples.iter().map(|c| c * k).collect();
    let mut sorted = checkpoints.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let delta = (-(k as f64).powf(scales.green_exponent)).exp();
    let pivmin = pivot_min(&[1.0]);
    let at = |site: i64| w.get(site).expect("window covers the scan");
    for &(e, l_ref) in energies {
        let (below, above) = (e - delta, e + delta);
        if below == above {
            // the eigenvalue window is empty in floating point
            continue;
        }
        let deficit = (gap_min..=gap_max).any(|r| {
            let seg = &w.slice(r as i64, (r + m_max) as i64 - 1).expect("window covers the scan");
            let logs = log_norms_at(e, seg, &sorted);
            logs.iter().zip(&sorted).any(|(lg, m)| lg / *m as f64 <= l_ref - scales.epsilon)
        });
        if !deficit {
            continue;
        }
        for n1 in 0..=box_max as i64 {
            // leading-minor Sturm counts of [−n1, n2] for every n2 in one sweep
            let (mut qb, mut qa) = (1.0f64, 1.0f64);
            let (mut cb, mut ca) = (0usize, 0usize);
            for site in -n1..=box_max as i64 {
                let v = at(site);
                let first = site == -n1;
                let mut tb = v - below - if first { 0.0 } else { 1.0 / qb };
                let mut ta = v - above - if first { 0.0 } else { 1.0 / qa };
                if tb.abs() < pivmin {
                    tb = -pivmin;
                }
                if ta.abs() < pivmin {
                    ta = -pivmin;
                }
                cb += (tb < 0.0) as usize;
                ca += (ta < 0.0) as usize;
                qb = tb;
                qa = ta;
                if site >= 0 && ca > cb {
                    return true;
                }
            }
        }
    }
    false
}

/// Frequency of double resonances at scale `K` over `samples` configurations.
pub fn double_resonance_scan(
    dist: &DistributionSpec,
    k: usize,
    scales: &ResonanceScales,
    samples: usize,
    seed: u64,
) -> Result<DoubleResonanceScan> {
    dist.require_flavor(Flavor::Real)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be ≥ 1".into()));
    }
    let ranges = scales.ranges(k)?;
    let (box_max, gap_min, gap_max, m_max) = ranges;
    let energies: Vec<(f64, f64)> = sigma_grid(dist, scales.energy_points)?
        .into_iter()
        .map(|e| Ok((e, reference_l(e, dist, seed, REFERENCE_N)?)))
        .collect::<Result<_>>()?;
    let lo = -(box_max as i64);
    let hi = (box_max as i64).max((gap_max + m_max) as i64);
    let root = derive_seed(seed, RESONANCE_TAG);
    let flags = per_sample(samples, |s| {
        let w = sample_window_stream::<f64>(dist, lo, hi - lo + 1, root, s)?;
        Ok(resonant(&w, k, scales, ranges, &energies))
    })?;
    let hits = flags.iter().filter(|f| **f).count() as u64;
    Ok(DoubleResonanceScan {
        k,
        scales: scales.clone(),
        box_max,
        gap_min,
        gap_max,
        samples,
        hits,
        frequency: hits as f64 / samples as f64,
        interval: wilson_interval(hits, samples as u64),
    })
}

/// Scans over a ladder of `K`; the configurations share coordinates across rungs.
pub fn double_resonance_ladder(
    dist: &DistributionSpec,
    ks: &[usize],
    scales: &ResonanceScales,
    samples: usize,
    seed: u64,
) -> Result<Vec<DoubleResonanceScan>> {
    ks.iter()
        .map(|&k| double_resonance_scan(dist, k, scales, samples, seed))
        .collect()
}

/// No later Wilson interval lies entirely above an earlier one.
pub fn non_increasing_within_intervals(scans: &[DoubleResonanceScan]) -> bool {
    scans
        .iter()
        .enumerate()
        .all(|(i, a)| scans[i + 1..].iter().all(|b| b.interval.lo <= a.interval.hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::sample_window;
    use crate::lyapunov::le_curve;
    use std::f64::consts::PI;

    fn bernoulli_window(n: i64, lo: i64, seed: u64) -> WordWindow<f64> {
        sample_window(&DistributionSpec::bernoulli(0.0, 4.0).unwrap(), lo, n, seed).unwrap()
    }

    #[test]
    fn synthetic_exponentials_recover_rate() {
        for (r, c) in [(0.3f64, 40usize), (1.1, 10), (0.05, 70)] {
            let u: Vec<f64> = (0..100usize).map(|i| (-r * i.abs_diff(c) as f64).exp()).collect();
            let f = decay_fit(&u, c).unwrap();
            assert!((f.rate - r).abs() < 1e-6, "{r}: {}", f.rate);
            assert!(f.residual < 1e-9);
        }
    }

    #[test]
    fn one_site_box_is_flagged() {
        let w = WordWindow::from_values(0, vec![1.5]);
        let recs = eigenrecords(&w, 1).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].center, 0);
        assert!(recs[0].flagged && recs[0].decay_rate.is_none());
        assert!((recs[0].energy - 1.5).abs() < 1e-12);
    }

    #[test]
    fn free_records_match_sines_and_do_not_decay() {
        let n = 50;
        let w = WordWindow::from_values(0, vec![0.0; n]);
        let recs = eigenrecords(&w, n).unwrap();
        for (k, r) in recs.iter().enumerate() {
            let j = (n - k) as f64;
            assert!((r.energy - 2.0 * (j * PI / (n as f64 + 1.0)).cos()).abs() < 1e-10);
            let norm: f64 = r.vector.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-10);
            let top = r.vector.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert_eq!(r.vector[r.center_index()].abs(), top);
            assert!(r.vector[..r.center_index()].iter().all(|v| v.abs() < top));
        }
        let rates: Vec<f64> = recs.iter().filter_map(|r| r.decay_rate.map(f64::abs)).collect();
        assert!(median(&rates) <= 0.02, "{}", median(&rates));
    }

    #[test]
    fn bernoulli_rates_track_lyapunov() {
        let dist = DistributionSpec::bernoulli(0.0, 4.0).unwrap();
        let grid: Vec<f64> = (0..41).map(|i| -2.0 + 8.0 * i as f64 / 40.0).collect();
        let curve = le_curve(&grid, &dist, 2000, 32, 9).unwrap();
        let mut gaps = Vec::new();
        for seed in 0..3 {
            let w = sample_window(&dist, 0, 500, seed).unwrap();
            for r in eigenrecords(&w, 500).unwrap() {
                if let Some(rate) = r.decay_rate {
                    let l = curve.interpolate(r.energy);
                    gaps.push((rate - l).abs() / l);
                }
            }
        }
        assert!(median(&gaps) <= 0.2, "{}", median(&gaps));
    }

    #[test]
    fn exact_envelope_complies_with_unit_constant() {
        let l = 0.7;
        let u: Vec<f64> = (0..61).map(|i| (-l * (i as f64 - 30.0).abs()).exp()).collect();
        let nrm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rec = EigenRecord {
            energy: 0.0,
            lo: -30,
            vector: u.iter().map(|v| v / nrm).collect(),
            center: 0,
            decay_rate: None,
            fit_residual: None,
            flagged: true,
        };
        for delta in [0.01, 0.3] {
            let fit = sule_fit(std::slice::from_ref(&rec), |_| l, delta, None);
            assert!(fit.log_c_fit.abs() < 1e-12);
            assert!(fit.violations.is_empty() && fit.compliance == 1.0);
        }
    }

    #[test]
    fn free_states_violate_localized_envelope() {
        let w = bernoulli_window(200, -100, 4);
        let recs = eigenrecords_on(&w, -100, 99).unwrap();
        let dist = DistributionSpec::bernoulli(0.0, 4.0).unwrap();
        let grid: Vec<f64> = (0..41).map(|i| -2.0 + 8.0 * i as f64 / 40.0).collect();
        let curve = le_curve(&grid, &dist, 2000, 32, 9).unwrap();
        let fit = sule_fit(&recs, |e| curve.interpolate(e), 0.3, None);
        assert!(fit.compliance >= 0.95, "{}", fit.compliance);
        let free = eigenrecords_on(&WordWindow::from_values(-100, vec![0.0; 200]), -100, 99).unwrap();
        let neg = sule_fit(&free, |e| curve.interpolate(e), 0.3, Some(fit.log_c_fit));
        assert!(neg.compliance < 0.5, "{}", neg.compliance);
        assert!(neg.log_c_fit > fit.log_c_fit + 20.0);
    }

    #[test]
    fn center_counts() {
        let w = WordWindow::from_values(-4, vec![0.5; 9]);
        let recs = eigenrecords_on(&w, -4, 4).unwrap();
        let cc = center_count(&recs, &[4, 1, 2, 3]);
        assert_eq!(cc.rows.last().unwrap().count, 9);
        assert!(cc.rows.last().unwrap().compliant);
        assert!(cc.rows.windows(2).all(|p| p[0].count <= p[1].count));
        let empty = center_count(&[], &[1, 5]);
        assert!(empty.rows.iter().all(|r| r.count == 0));
        assert_eq!(empty.l0, Some(1));
    }

    #[test]
    fn kernel_completeness_and_domination() {
        let w = bernoulli_window(80, -40, 2);
        let recs = eigenrecords_on(&w, -40, 39).unwrap();
        let k = dynloc_kernel(&recs, -40, 39).unwrap();
        assert!(k.completeness_residual < 1e-9);
        assert!(k.dominated, "{}", k.domination_margin);
        for n in -40..40 {
            for m in -40..40 {
                assert_eq!(k.get(n, m), k.get(m, n));
            }
        }
        assert!(k.beta > 0.0 && k.epsilon >= 0.0);
        assert!(matches!(
            dynloc_kernel(&recs[1..], -40, 39),
            Err(Error::IncompleteBasis { found: 79, expected: 80 })
        ));
    }

    #[test]
    fn resonance_controls() {
        let atom = DistributionSpec::point(0.0).unwrap();
        let s = double_resonance_scan(&atom, 3, &ResonanceScales::surrogate(), 50, 1).unwrap();
        assert_eq!(s.hits, 0);
        let dist = DistributionSpec::bernoulli(0.0, 3.0).unwrap();
        let mut strict = ResonanceScales::surrogate();
        strict.green_exponent = 10.0;
        assert_eq!(double_resonance_scan(&dist, 3, &strict, 50, 1).unwrap().hits, 0);
        // raising the threshold shrinks the event
        let mut loose = ResonanceScales::surrogate();
        loose.green_exponent = 1.0;
        let a = double_resonance_scan(&dist, 3, &loose, 200, 5).unwrap();
        let b = double_resonance_scan(&dist, 3, &ResonanceScales::surrogate(), 200, 5).unwrap();
        assert!(a.hits >= b.hits && a.hits > 0);
        assert!(matches!(
            double_resonance_scan(&dist, 40, &ResonanceScales::asymptotic(), 1, 1),
            Err(Error::ScaleOverflow)
        ));
    }
}
