//! One function per experiment; each returns a CSV table and an optional JSON summary.

use crate::config::{
    AvalancheParams, BlockLdtParams, CentersParams, CmvCheckParams, CmvLeParams, CmvSpectrumParams, DoubleResParams,
    DosParams, DynlocParams, Estimator, ExperimentConfig, FurstenbergParams, GreenParams, HolderParams, LdtParams,
    LeCurveParams, LocalizeParams, Params, ScaleParams, SuleParams, ThoulessParams,
};
use crate::output::Table;
use crate::row;
use anderson_core::cmv::{
    cmv_charpoly, cmv_estimate_l, cmv_lyapunov, cmv_spectrum, cmv_truncation, exceptional_check, szego_step, Boundary,
    VerblunskyWindow,
};
use anderson_core::ensemble::{derive_seed, sample_window_stream, support_constants, DistributionSpec, WordWindow};
use anderson_core::localization::{
    center_count, double_resonance_ladder, dynloc_kernel, eigenrecords, eigenrecords_on, non_increasing_within_intervals,
    sule_fit, BarRule, EigenRecord, ResonanceScales,
};
use anderson_core::lyapunov::{
    avalanche_check_scaled, block_mean_probe, estimate_l, estimate_ln, furstenberg_check, holder_fit, ldt_probe,
    le_curve, scale_consistency, LECurve, SpectralParameter,
};
use anderson_core::mat2::{su11_check, Flavor};
use anderson_core::schrodinger::{green_table, product_of};
use anderson_core::spectral::{dos_estimate, thouless_eval};
use anderson_core::stats::median;
use anderson_core::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};
use std::f64::consts::{PI, TAU};

const AVALANCHE_TAG: u64 = 0xA7A1;
const GREEN_TAG: u64 = 0x6EE5;
const WINDOW_TAG: u64 = 0x10CA;
const CMV_TAG: u64 = 0xC3C3;

pub struct CommandOutput {
    pub table: Table,
    pub summary: Option<Value>,
    /// Additional tables, written as `<stem>.<name>.csv`.
    pub extra: Vec<(&'static str, Table)>,
}

fn done(table: Table, summary: Value) -> Result<CommandOutput> {
    Ok(CommandOutput {
        table,
        summary: Some(summary),
        extra: Vec::new(),
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let d = &cfg.distribution;
    let seed = cfg.seed;
    match &cfg.params {
        Params::LeCurve(p) => le_curve_cmd(d, p, seed),
        Params::Ldt(p) => ldt_cmd(d, p, seed),
        Params::BlockLdt(p) => block_ldt_cmd(d, p, seed),
        Params::Avalanche(p) => avalanche_cmd(d, p, seed),
        Params::Scale(p) => scale_cmd(d, p, seed),
        Params::Holder(p) => holder_cmd(d, p, seed),
        Params::Dos(p) => dos_cmd(d, p, seed),
        Params::Thouless(p) => thouless_cmd(d, p, seed),
        Params::Green(p) => green_cmd(d, p, seed),
        Params::Localize(p) => localize_cmd(d, p, seed),
        Params::Sule(p) => sule_cmd(d, p, seed),
        Params::Centers(p) => centers_cmd(d, p, seed),
        Params::Dynloc(p) => dynloc_cmd(d, p, seed),
        Params::DoubleRes(p) => double_res_cmd(d, p, seed),
        Params::CmvLe(p) => cmv_le_cmd(d, p, seed),
        Params::CmvSpectrum(p) => cmv_spectrum_cmd(d, p, seed),
        Params::CmvCheck(p) => cmv_check_cmd(d, p, seed),
        Params::Furstenberg(p) => furstenberg_cmd(d, p),
    }
}

fn kappa(d: &DistributionSpec) -> Result<f64> {
    Ok(support_constants(d)?.kappa)
}

fn le_curve_cmd(d: &DistributionSpec, p: &LeCurveParams, seed: u64) -> Result<CommandOutput> {
    let k = kappa(d)?;
    let grid = p.grid.resolve(-k, k, 33);
    let points = grid
        .iter()
        .map(|&e| match p.estimator {
            Estimator::Mean => estimate_ln(e, d, p.n, p.samples, seed),
            Estimator::TwoScale => estimate_l(e, d, p.n, p.samples, seed),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["E", "n", "samples", "mean", "stderr"]);
    for q in &points {
        t.push(row![q.energy, q.n, q.samples, q.mean, q.stderr]);
    }
    let min = points.iter().map(|q| q.mean).fold(f64::INFINITY, f64::min);
    done(t, json!({ "points": points.len(), "min_mean": min }))
}

fn ldt_cmd(d: &DistributionSpec, p: &LdtParams, seed: u64) -> Result<CommandOutput> {
    let r = ldt_probe(p.energy, d, p.epsilon, &p.n_list, p.samples, seed)?;
    let mut t = Table::new(&["n", "probability", "lo", "hi"]);
    for x in &r.rows {
        t.push(row![x.n, x.probability, x.interval.lo, x.interval.hi]);
    }
    let mut s = serde_json::to_value(&r).expect("serializes");
    s.as_object_mut().unwrap().remove("rows");
    done(t, s)
}

fn block_ldt_cmd(d: &DistributionSpec, p: &BlockLdtParams, seed: u64) -> Result<CommandOutput> {
    let mut t = Table::new(&["r", "probability", "lo", "hi", "envelope", "within_envelope"]);
    let mut l_ref = f64::NAN;
    for &r in &p.r_list {
        let x = block_mean_probe(p.energy, d, p.n, r, p.offset, p.epsilon, p.samples, seed)?;
        l_ref = x.reference_l;
        t.push(row![r, x.probability, x.interval.lo, x.interval.hi, x.envelope, x.within_envelope]);
    }
    done(
        t,
        json!({ "energy": p.energy, "n": p.n, "offset": p.offset, "epsilon": p.epsilon, "reference_l": l_ref }),
    )
}

fn avalanche_cmd(d: &DistributionSpec, p: &AvalancheParams, seed: u64) -> Result<CommandOutput> {
    let root = derive_seed(seed, AVALANCHE_TAG);
    let len = (p.chain_length * p.block_length) as i64;
    let reports = (0..p.chains as u64)
        .into_par_iter()
        .map(|s| {
            let w: WordWindow<f64> = sample_window_stream(d, 0, len, root, s)?;
            let chain: Vec<_> = w.values.chunks(p.block_length).map(|b| product_of(p.energy, b)).collect();
            let log_lambda = chain.iter().map(|m| m.logmag).fold(f64::INFINITY, f64::min);
            Ok((log_lambda, avalanche_check_scaled(&chain, log_lambda.exp(), p.c)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "chain",
        "log_lambda",
        "lhs",
        "bound",
        "norms_ok",
        "pairs_ok",
        "hypotheses_ok",
        "within_bound",
    ]);
    let (mut eligible, mut within) = (0usize, 0usize);
    for (i, (ll, r)) in reports.iter().enumerate() {
        let ok = r.lhs <= r.bound;
        if r.hypotheses_ok {
            eligible += 1;
            within += ok as usize;
        }
        t.push(row![i, *ll, r.lhs, r.bound, r.norms_ok, r.pairs_ok, r.hypotheses_ok, ok]);
    }
    done(t, json!({ "chains": p.chains, "eligible": eligible, "eligible_within_bound": within }))
}

fn scale_cmd(d: &DistributionSpec, p: &ScaleParams, seed: u64) -> Result<CommandOutput> {
    let mut t = Table::new(&["n", "reference_l", "l_n", "l_2n", "value", "stderr"]);
    for &n in &p.n_list {
        let x = scale_consistency(p.energy, d, n, p.samples, seed)?;
        t.push(row![n, x.reference_l, x.ln, x.l2n, x.value, x.stderr]);
    }
    done(t, json!({ "energy": p.energy, "samples": p.samples }))
}

fn holder_cmd(d: &DistributionSpec, p: &HolderParams, seed: u64) -> Result<CommandOutput> {
    let f = holder_fit(d, &p.pairs, p.n, p.samples, seed)?;
    let mut t = Table::new(&["e1", "e2", "delta_l", "stderr", "used"]);
    for x in &f.pairs {
        t.push(row![x.e1, x.e2, x.delta_l, x.stderr, x.used]);
    }
    done(
        t,
        json!({ "c": f.c, "beta": f.beta, "r2": f.r2, "discarded_fraction": f.discarded_fraction }),
    )
}

fn dos_cmd(d: &DistributionSpec, p: &DosParams, seed: u64) -> Result<CommandOutput> {
    let (spec, grid) = dos_estimate(d, p.sites, p.realizations, seed, p.grid_points)?;
    let mut t = Table::new(&["E", "ids"]);
    for (e, v) in grid.energies.iter().zip(&grid.values) {
        t.push(row![*e, *v]);
    }
    done(
        t,
        json!({
            "sites": p.sites,
            "realizations": p.realizations,
            "eigenvalues": spec.eigenvalues.len(),
            "min_eigenvalue": spec.eigenvalues.first(),
            "max_eigenvalue": spec.eigenvalues.last(),
        }),
    )
}

fn thouless_cmd(d: &DistributionSpec, p: &ThoulessParams, seed: u64) -> Result<CommandOutput> {
    let k = kappa(d)?;
    let grid = p.grid.resolve(-k, k, 9);
    let (spec, _) = dos_estimate(d, p.sites, p.realizations, seed, 2)?;
    let mut t = Table::new(&["E", "direct", "direct_stderr", "thouless", "excluded", "gap"]);
    let mut worst: f64 = 0.0;
    for &e in &grid {
        let direct = estimate_l(e, d, p.n_le, p.samples, seed)?;
        let th = thouless_eval(e, &spec.eigenvalues)?;
        let gap = (direct.mean - th.value).abs();
        worst = worst.max(gap);
        t.push(row![e, direct.mean, direct.stderr, th.value, th.excluded, gap]);
    }
    done(t, json!({ "max_gap": worst, "eigenvalues": spec.eigenvalues.len() }))
}

fn green_cmd(d: &DistributionSpec, p: &GreenParams, seed: u64) -> Result<CommandOutput> {
    let k = kappa(d)?;
    let root = derive_seed(seed, GREEN_TAG);
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let rows = (0..p.samples as u64)
        .into_par_iter()
        .map(|s| {
            let w: WordWindow<f64> = sample_window_stream(d, 0, p.sites as i64, root, s)?;
            let e = p.energy.unwrap_or(-k + 2.0 * k * ((s + 1) as f64 * golden).fract());
            match green_table(e, &w, 0, p.sites as i64 - 1) {
                Ok(g) => Ok((e, Some(g))),
                // a sweep may land on an eigenvalue; a fixed energy may not
                Err(Error::NearEigenvalue { .. }) if p.energy.is_none() => Ok((e, None)),
                Err(err) => Err(err),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "sample",
        "E",
        "cramer_max_rel_gap",
        "condition_estimate",
        "condition_flag",
        "near_eigenvalue",
    ]);
    let (mut worst, mut flagged, mut skipped) = (0.0f64, 0usize, 0usize);
    for (i, (e, g)) in rows.iter().enumerate() {
        match g {
            Some(g) => {
                if g.condition_flag {
                    flagged += 1;
                } else {
                    worst = worst.max(g.cramer_max_rel_gap);
                }
                t.push(row![i, *e, g.cramer_max_rel_gap, g.condition_estimate, g.condition_flag, false]);
            }
            None => {
                skipped += 1;
                t.push(row![i, *e, f64::NAN, f64::NAN, true, true]);
            }
        }
    }
    let mut out = done(
        t,
        json!({ "max_gap_unflagged": worst, "flagged": flagged, "near_eigenvalue": skipped }),
    )?;
    if p.tables {
        let mut g = Table::new(&["sample", "j", "k", "value"]);
        for (i, (_, table)) in rows.iter().enumerate() {
            let Some(table) = table else { continue };
            for j in table.lo..=table.hi {
                for k in table.lo..=table.hi {
                    g.push(row![i, j, k, table.get(j, k)]);
                }
            }
        }
        out.extra.push(("tables", g));
    }
    Ok(out)
}

/// LE table over the real support widened by the free band.
fn le_table(d: &DistributionSpec, points: usize, n: usize, samples: usize, seed: u64) -> Result<LECurve> {
    let (a, b) = d.real_range().ok_or(Error::WrongFlavor { expected: "real" })?;
    let grid: Vec<f64> = (0..points)
        .map(|i| a - 2.0 + (b - a + 4.0) * i as f64 / (points - 1) as f64)
        .collect();
    le_curve(&grid, d, n, samples, seed)
}

fn window(d: &DistributionSpec, lo: i64, hi: i64, seed: u64, stream: u64) -> Result<WordWindow<f64>> {
    sample_window_stream(d, lo, hi - lo + 1, derive_seed(seed, WINDOW_TAG), stream)
}

fn opt(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

fn localize_cmd(d: &DistributionSpec, p: &LocalizeParams, seed: u64) -> Result<CommandOutput> {
    let curve = le_table(d, p.le_points, p.le_n, p.le_samples, seed)?;
    let mut t = Table::new(&["realization", "index", "E", "center", "rate", "residual", "flagged", "lyapunov"]);
    let mut gaps = Vec::new();
    let mut flagged = 0usize;
    for r in 0..p.realizations {
        let w = window(d, 0, p.sites as i64 - 1, seed, r as u64)?;
        let records = eigenrecords(&w, p.sites)?;
        for (i, x) in records.iter().enumerate() {
            let l = curve.interpolate(x.energy);
            flagged += x.flagged as usize;
            if let Some(rate) = x.decay_rate {
                if l > 0.0 {
                    gaps.push((rate - l).abs() / l);
                }
            }
            t.push(row![r, i, x.energy, x.center, opt(x.decay_rate), opt(x.fit_residual), x.flagged, l]);
        }
    }
    let med = if gaps.is_empty() { f64::NAN } else { median(&gaps) };
    let summary = json!({ "records": t.rows.len(), "flagged": flagged, "median_relative_gap": med });
    done(t, summary)
}

fn box_records(d: &DistributionSpec, half: usize, seed: u64, stream: u64) -> Result<(i64, i64, Vec<EigenRecord>)> {
    let (lo, hi) = (-(half as i64), half as i64 - 1);
    let w = window(d, lo, hi, seed, stream)?;
    Ok((lo, hi, eigenrecords_on(&w, lo, hi)?))
}

fn sule_cmd(d: &DistributionSpec, p: &SuleParams, seed: u64) -> Result<CommandOutput> {
    let curve = le_table(d, p.le_points, p.le_n, p.le_samples, seed)?;
    let (_, _, records) = box_records(d, p.half_width, seed, 0)?;
    let fit = sule_fit(&records, |e| curve.interpolate(e), p.delta, None);
    let mut t = Table::new(&["index", "E", "center", "log_c", "violates"]);
    for (i, (x, c)) in records.iter().zip(&fit.log_record_constants).enumerate() {
        t.push(row![i, x.energy, x.center, *c, *c > fit.log_c_used]);
    }
    done(
        t,
        json!({
            "delta": fit.delta,
            "log_c_fit": fit.log_c_fit,
            "log_c_all": fit.log_c_all,
            "compliance": fit.compliance,
            "violations": fit.violations.len(),
            "exponent_fit": fit.exponent_fit,
            "pairs": fit.pairs,
        }),
    )
}

fn centers_cmd(d: &DistributionSpec, p: &CentersParams, seed: u64) -> Result<CommandOutput> {
    let counts = (0..p.realizations as u64)
        .into_par_iter()
        .map(|r| {
            let (_, _, records) = box_records(d, p.half_width, seed, r)?;
            Ok(center_count(&records, &p.l_values))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["realization", "L", "count", "compliant"]);
    for (r, c) in counts.iter().enumerate() {
        for x in &c.rows {
            t.push(row![r, x.l, x.count, x.compliant]);
        }
    }
    let l0: Vec<Option<i64>> = counts.iter().map(|c| c.l0).collect();
    done(t, json!({ "l0": l0 }))
}

fn dynloc_cmd(d: &DistributionSpec, p: &DynlocParams, seed: u64) -> Result<CommandOutput> {
    let (lo, hi, records) = box_records(d, p.half_width, seed, 0)?;
    let k = dynloc_kernel(&records, lo, hi)?;
    let mut t = Table::new(&["n", "m", "q"]);
    for n in lo..=hi {
        for m in lo..=hi {
            t.push(row![n, m, k.get(n, m)]);
        }
    }
    done(
        t,
        json!({
            "lo": lo,
            "hi": hi,
            "completeness_residual": k.completeness_residual,
            "domination_margin": k.domination_margin,
            "dominated": k.dominated,
            "beta": k.beta,
            "epsilon": k.epsilon,
            "log_c": k.log_c,
            "fit_points": k.fit_points,
        }),
    )
}

fn double_res_cmd(d: &DistributionSpec, p: &DoubleResParams, seed: u64) -> Result<CommandOutput> {
    let mut s = if p.asymptotic_scales {
        ResonanceScales::asymptotic()
    } else {
        ResonanceScales::surrogate()
    };
    if let Some(x) = p.box_exponent {
        s.box_exponent = x;
    }
    if let Some(x) = p.gap_exponent {
        s.gap_exponent = x;
    }
    if let Some(x) = p.bar_factor {
        s.bar = BarRule::Linear(x);
    }
    if let Some(x) = p.green_exponent {
        s.green_exponent = x;
    }
    if let Some(x) = p.epsilon {
        s.epsilon = x;
    }
    if let Some(x) = p.energy_points {
        s.energy_points = x;
    }
    if let Some(x) = &p.m_multiples {
        s.m_multiples = x.clone();
    }
    let scans = double_resonance_ladder(d, &p.k_list, &s, p.samples, seed)?;
    let mut t = Table::new(&["K", "box_max", "gap_min", "gap_max", "samples", "hits", "frequency", "lo", "hi"]);
    for x in &scans {
        t.push(row![x.k, x.box_max, x.gap_min, x.gap_max, x.samples, x.hits, x.frequency, x.interval.lo, x.interval.hi]);
    }
    done(
        t,
        json!({ "scales": s, "non_increasing_within_intervals": non_increasing_within_intervals(&scans) }),
    )
}

fn cmv_le_cmd(d: &DistributionSpec, p: &CmvLeParams, seed: u64) -> Result<CommandOutput> {
    let angles = p
        .angles
        .clone()
        .unwrap_or_else(|| (1..=p.points).map(|i| -PI + TAU * i as f64 / p.points as f64).collect());
    let mut t = Table::new(&["theta", "n", "samples", "mean", "stderr"]);
    for &th in &angles {
        let z = Complex64::from_polar(1.0, th);
        let q = match p.estimator {
            Estimator::Mean => cmv_lyapunov(z, d, p.n, p.samples, seed)?,
            Estimator::TwoScale => cmv_estimate_l(z, d, p.n, p.samples, seed)?,
        };
        t.push(row![th, q.n, q.samples, q.mean, q.stderr]);
    }
    done(t, json!({ "points": angles.len() }))
}

fn boundary(tau: Option<f64>) -> Boundary {
    match tau {
        Some(a) => Boundary::Phase(Complex64::from_polar(1.0, a)),
        None => Boundary::Inherit,
    }
}

fn verblunsky(d: &DistributionSpec, lo: i64, hi: i64, seed: u64, stream: u64, half_line: bool) -> Result<VerblunskyWindow> {
    let w: WordWindow<Complex64> = sample_window_stream(d, lo, hi - lo + 1, derive_seed(seed, CMV_TAG), stream)?;
    VerblunskyWindow::from_word(&w, half_line)
}

fn cmv_spectrum_cmd(d: &DistributionSpec, p: &CmvSpectrumParams, seed: u64) -> Result<CommandOutput> {
    let w = verblunsky(d, p.lo, p.hi, seed, 0, p.half_line)?;
    let s = cmv_spectrum(&w, p.lo, p.hi, boundary(p.tau1), boundary(p.tau2), p.grid_density, false)?;
    let mut t = Table::new(&["k", "theta", "re", "im"]);
    for (k, (th, z)) in s.angles.iter().zip(&s.points).enumerate() {
        t.push(row![k, *th, z.re, z.im]);
    }
    done(t, json!({ "eigenvalues": s.angles.len(), "max_residual": s.max_residual }))
}

fn cmv_check_cmd(d: &DistributionSpec, p: &CmvCheckParams, seed: u64) -> Result<CommandOutput> {
    let steps = verblunsky(d, 0, p.steps as i64 - 1, seed, 0, false)?;
    let mut su11_failures = 0usize;
    for (k, a) in steps.alphas.iter().enumerate() {
        let z = Complex64::from_polar(1.0, TAU * k as f64 / p.steps as f64);
        let (_, m) = szego_step(z, *a)?;
        su11_failures += !su11_check(&m) as usize;
    }
    let mut t = Table::new(&["length", "unitarity_residual", "charpoly_rel_gap"]);
    let (mut worst_u, mut worst_c) = (0.0f64, 0.0f64);
    for len in 1..=p.max_length {
        let hi = len as i64 - 1;
        let w = verblunsky(d, 0, hi, seed, len as u64, false)?;
        let b1 = boundary(Some(0.3 * len as f64));
        let b2 = boundary(Some(1.1 + 0.7 * len as f64));
        let u = cmv_truncation(&w, 0, hi, b1, b2)?.unitarity_residual();
        let z = Complex64::from_polar(0.9, 0.5 + 0.37 * len as f64);
        let c = cmv_charpoly(z, &w, 0, hi, b1, b2)?.rel_gap;
        worst_u = worst_u.max(u);
        worst_c = worst_c.max(c);
        t.push(row![len, u, c]);
    }
    let exceptional = match d.complex_atom_values() {
        Some(a) if a.len() >= 2 => serde_json::to_value(exceptional_check(d)?).expect("serializes"),
        _ => Value::Null,
    };
    done(
        t,
        json!({
            "su11_steps": p.steps,
            "su11_failures": su11_failures,
            "max_unitarity_residual": worst_u,
            "max_charpoly_rel_gap": worst_c,
            "exceptional": exceptional,
        }),
    )
}

fn furstenberg_cmd(d: &DistributionSpec, p: &FurstenbergParams) -> Result<CommandOutput> {
    let params: Vec<(f64, SpectralParameter)> = match d.flavor() {
        Flavor::Real => p.energies.iter().map(|&e| (e, SpectralParameter::Energy(e))).collect(),
        Flavor::Complex => p
            .angles
            .iter()
            .map(|&a| (a, SpectralParameter::Circle(Complex64::from_polar(1.0, a))))
            .collect(),
    };
    let mut t = Table::new(&["parameter", "noncompact", "strongly_irreducible", "contracting", "contraction_ratio"]);
    let mut witnesses = Vec::new();
    let mut exceptional = Value::Null;
    for (x, sp) in params {
        let r = furstenberg_check(d, sp)?;
        t.push(row![x, r.noncompact, r.strongly_irreducible, r.contracting, r.contraction_ratio]);
        witnesses.push(r.witness);
        if let Some(e) = r.exceptional {
            exceptional = serde_json::to_value(e).expect("serializes");
        }
    }
    done(t, json!({ "witnesses": witnesses, "exceptional": exceptional }))
}
