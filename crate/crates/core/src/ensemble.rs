//! Single-site distributions, counter-based sampling of coordinate windows
//! of ω ∈ A^Z, and shift/reflection bookkeeping.
//!
//! Coordinate `k` of a window drawn with `(seed, stream)` is a pure function of
//! `(seed, stream, k, distribution)`: the ChaCha8 keystream selected by the seed
//! and stream is addressed at a word offset fixed by `k`. Overlapping or split
//! windows therefore agree bit-for-bit.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::{Flavor, RMat2, Scalar};
use crate::stats::Interval;

pub const RNG_SCHEME: &str = "chacha8-coord-v1";
const WORDS_PER_COORD: u128 = 4;
/// Complex atoms must satisfy `|α| ≤ 1 − DISK_MARGIN`.
pub const DISK_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum SiteLaw {
    /// Atoms with positive weights; real atoms have zero imaginary part.
    Atoms(Vec<(Complex64, f64)>),
    /// Uniform on `[lo, hi]` (real flavor).
    Interval { lo: f64, hi: f64 },
    /// Uniform (area measure) on `r_min ≤ |α| ≤ r_max` (complex flavor).
    Annulus { r_min: f64, r_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct DistributionSpec {
    flavor: Flavor,
    law: SiteLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawScalar {
    Real(f64),
    Complex { re: f64, im: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    v: RawScalar,
    w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    kind: String,
    flavor: Flavor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atoms: Option<Vec<RawAtom>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_max: Option<f64>,
}

impl TryFrom<RawDistribution> for DistributionSpec {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        let bad = |m: &str| Error::InvalidDistribution(m.to_string());
        let law = match (raw.kind.as_str(), raw.flavor) {
            ("atoms", _) => {
                if raw.lo.is_some() || raw.hi.is_some() || raw.r_min.is_some() || raw.r_max.is_some() {
                    return Err(bad("atoms distribution takes only `atoms`"));
                }
                let atoms = raw.atoms.ok_or_else(|| bad("missing `atoms`"))?;
                SiteLaw::Atoms(
                    atoms
                        .into_iter()
                        .map(|a| {
                            let v = match a.v {
                                RawScalar::Real(x) => Complex64::new(x, 0.0),
                                RawScalar::Complex { re, im } => Complex64::new(re, im),
                            };
                            (v, a.w)
                        })
                        .collect(),
                )
            }
            ("uniform", Flavor::Real) => {
                if raw.atoms.is_some() || raw.r_min.is_some() || raw.r_max.is_some() {
                    return Err(bad("real uniform distribution takes `lo` and `hi`"));
                }
                SiteLaw::Interval {
                    lo: raw.lo.ok_or_else(|| bad("missing `lo`"))?,
                    hi: raw.hi.ok_or_else(|| bad("missing `hi`"))?,
                }
            }
            ("uniform", Flavor::Complex) => {
                if raw.atoms.is_some() || raw.lo.is_some() || raw.hi.is_some() {
                    return Err(bad("complex uniform distribution takes `r_min` and `r_max`"));
                }
                SiteLaw::Annulus {
                    r_min: raw.r_min.unwrap_or(0.0),
                    r_max: raw.r_max.ok_or_else(|| bad("missing `r_max`"))?,
                }
            }
            (k, _) => return Err(bad(&format!("unknown kind `{k}`"))),
        };
        DistributionSpec::new(raw.flavor, law)
    }
}

impl From<DistributionSpec> for RawDistribution {
    fn from(d: DistributionSpec) -> Self {
        let mut raw = RawDistribution {
            kind: String::new(),
            flavor: d.flavor,
            atoms: None,
            lo: None,
            hi: None,
            r_min: None,
            r_max: None,
        };
        match d.law {
            SiteLaw::Atoms(atoms) => {
                raw.kind = "atoms".into();
                raw.atoms = Some(
                    atoms
                        .into_iter()
                        .map(|(v, w)| RawAtom {
                            v: match d.flavor {
                                Flavor::Real => RawScalar::Real(v.re),
                                Flavor::Complex => RawScalar::Complex { re: v.re, im: v.im },
                            },
                            w,
                        })
                        .collect(),
                );
            }
            SiteLaw::Interval { lo, hi } => {
                raw.kind = "uniform".into();
                raw.lo = Some(lo);
                raw.hi = Some(hi);
            }
            SiteLaw::Annulus { r_min, r_max } => {
                raw.kind = "uniform".into();
                raw.r_min = Some(r_min);
                raw.r_max = Some(r_max);
            }
        }
        raw
    }
}

impl DistributionSpec {
    pub fn new(flavor: Flavor, law: SiteLaw) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidDistribution(m));
        match (&law, flavor) {
            (SiteLaw::Atoms(atoms), _) => {
                if atoms.is_empty() {
                    return bad("no atoms".into());
                }
                let mut total = 0.0;
                for (i, (v, w)) in atoms.iter().enumerate() {
                    if !(v.re.is_finite() && v.im.is_finite()) {
                        return bad(format!("atom {i} is not finite"));
                    }
                    if !(w.is_finite() && *w > 0.0) {
                        return bad(format!("atom {i} has non-positive weight {w}"));
                    }
                    if flavor == Flavor::Real && v.im != 0.0 {
                        return bad(format!("atom {i} is complex in a real distribution"));
                    }
                    if flavor == Flavor::Complex && v.norm() > 1.0 - DISK_MARGIN {
                        return bad(format!("atom {i} has |v| = {} outside the open unit disk", v.norm()));
                    }
                    if atoms[..i].iter().any(|(u, _)| u == v) {
                        return bad(format!("atom {i} is a duplicate"));
                    }
                    total += w;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("weights sum to {total}, not 1"));
                }
            }
            (SiteLaw::Interval { lo, hi }, Flavor::Real) => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("interval [{lo}, {hi}] is not a bounded nonempty interval"));
                }
            }
            (SiteLaw::Annulus { r_min, r_max }, Flavor::Complex) => {
                if !(r_min.is_finite() && *r_min >= 0.0 && r_min < r_max && *r_max <= 1.0 - DISK_MARGIN) {
                    return bad(format!("annulus [{r_min}, {r_max}] must satisfy 0 ≤ r_min < r_max ≤ 1 − 1e−6"));
                }
            }
            (SiteLaw::Interval { .. }, Flavor::Complex) => return bad("interval law needs real flavor".into()),
            (SiteLaw::Annulus { .. }, Flavor::Real) => return bad("annulus law needs complex flavor".into()),
        }
        Ok(DistributionSpec { flavor, law })
    }

    /// Real atoms with the given weights.
    pub fn real_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            Flavor::Real,
            SiteLaw::Atoms(atoms.iter().map(|&(v, w)| (Complex64::new(v, 0.0), w)).collect()),
        )
    }

    /// Equal-weight real atoms.
    pub fn uniform_atoms(values: &[f64]) -> Result<Self> {
        let w = 1.0 / values.len().max(1) as f64;
        Self::real_atoms(&values.iter().map(|&v| (v, w)).collect::<Vec<_>>())
    }

    pub fn bernoulli(a: f64, b: f64) -> Result<Self> {
        Self::real_atoms(&[(a, 0.5), (b, 0.5)])
    }

    pub fn point(a: f64) -> Result<Self> {
        Self::real_atoms(&[(a, 1.0)])
    }

    pub fn complex_atoms(atoms: &[(Complex64, f64)]) -> Result<Self> {
        Self::new(Flavor::Complex, SiteLaw::Atoms(atoms.to_vec()))
    }

    pub fn uniform_complex_atoms(values: &[Complex64]) -> Result<Self> {
        let w = 1.0 / values.len().max(1) as f64;
        Self::complex_atoms(&values.iter().map(|&v| (v, w)).collect::<Vec<_>>())
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Flavor::Real, SiteLaw::Interval { lo, hi })
    }

    pub fn annulus(r_min: f64, r_max: f64) -> Result<Self> {
        Self::new(Flavor::Complex, SiteLaw::Annulus { r_min, r_max })
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn law(&self) -> &SiteLaw {
        &self.law
    }

    /// `max |α|` over the support.
    pub fn support_bound(&self) -> f64 {
        match &self.law {
            SiteLaw::Atoms(a) => a.iter().map(|(v, _)| v.norm()).fold(0.0, f64::max),
            SiteLaw::Interval { lo, hi } => lo.abs().max(hi.abs()),
            SiteLaw::Annulus { r_max, .. } => *r_max,
        }
    }

    /// Number of support points; `None` for continuous laws.
    pub fn cardinality(&self) -> Option<usize> {
        match &self.law {
            SiteLaw::Atoms(a) => Some(a.len()),
            _ => None,
        }
    }

    pub fn is_single_atom(&self) -> bool {
        self.cardinality() == Some(1)
    }

    /// Enforces `#A ≥ 2`.
    pub fn require_nontrivial(&self) -> Result<()> {
        if self.is_single_atom() {
            Err(Error::TrivialSupport)
        } else {
            Ok(())
        }
    }

    pub fn require_flavor(&self, flavor: Flavor) -> Result<()> {
        if self.flavor == flavor {
            Ok(())
        } else {
            Err(Error::WrongFlavor {
                expected: match flavor {
                    Flavor::Real => "real",
                    Flavor::Complex => "complex",
                },
            })
        }
    }

    /// Atom values (real parts) of a real atomic law.
    pub fn real_atom_values(&self) -> Option<Vec<f64>> {
        match (&self.law, self.flavor) {
            (SiteLaw::Atoms(a), Flavor::Real) => Some(a.iter().map(|(v, _)| v.re).collect()),
            _ => None,
        }
    }

    pub fn complex_atom_values(&self) -> Option<Vec<Complex64>> {
        match &self.law {
            SiteLaw::Atoms(a) => Some(a.iter().map(|(v, _)| *v).collect()),
            _ => None,
        }
    }

    /// Real extremes of the support.
    pub fn real_range(&self) -> Option<(f64, f64)> {
        match (&self.law, self.flavor) {
            (SiteLaw::Atoms(a), Flavor::Real) => Some((
                a.iter().map(|(v, _)| v.re).fold(f64::INFINITY, f64::min),
                a.iter().map(|(v, _)| v.re).fold(f64::NEG_INFINITY, f64::max),
            )),
            (SiteLaw::Interval { lo, hi }, _) => Some((*lo, *hi)),
            _ => None,
        }
    }

    /// Canonical JSON text, used for cache keys and config hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("distribution serializes")
    }

    fn draw(&self, u1: u64, u2: u64) -> Complex64 {
        let x = unit(u1);
        match &self.law {
            SiteLaw::Atoms(atoms) => {
                let mut cum = 0.0;
                for (v, w) in atoms {
                    cum += w;
                    if x < cum {
                        return *v;
                    }
                }
                atoms[atoms.len() - 1].0
            }
            SiteLaw::Interval { lo, hi } => Complex64::new(lo + (hi - lo) * x, 0.0),
            SiteLaw::Annulus { r_min, r_max } => {
                let r = (r_min * r_min + x * (r_max * r_max - r_min * r_min)).sqrt();
                let theta = std::f64::consts::TAU * unit(u2) - std::f64::consts::PI;
                Complex64::from_polar(r, theta)
            }
        }
    }

    fn contains(&self, v: Complex64) -> bool {
        match &self.law {
            SiteLaw::Atoms(atoms) => atoms.iter().any(|(a, _)| *a == v),
            SiteLaw::Interval { lo, hi } => v.im == 0.0 && *lo <= v.re && v.re <= *hi,
            SiteLaw::Annulus { r_min, r_max } => {
                let r = v.norm();
                r >= r_min * (1.0 - 1e-12) && r <= r_max * (1.0 + 1e-12)
            }
        }
    }
}

/// Uniform on `[0, 1)` with 53 random bits.
fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Scalar types that can hold sampled coordinates.
pub trait SiteValue: Scalar {
    fn from_draw(v: Complex64) -> Self;
}

impl SiteValue for f64 {
    fn from_draw(v: Complex64) -> Self {
        v.re
    }
}

impl SiteValue for Complex64 {
    fn from_draw(v: Complex64) -> Self {
        v
    }
}

/// Provenance of a sampled window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub seed: u64,
    pub stream: u64,
    pub scheme: String,
}

/// Coordinates `ω_origin, …, ω_{origin+len−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WordWindow<S> {
    pub origin: i64,
    pub values: Vec<S>,
    pub lineage: Option<SeedLineage>,
}

impl<S: Scalar> WordWindow<S> {
    /// A window with explicitly given coordinates (no random lineage).
    pub fn from_values(origin: i64, values: Vec<S>) -> Self {
        WordWindow {
            origin,
            values,
            lineage: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First covered index.
    pub fn lo(&self) -> i64 {
        self.origin
    }

    /// Last covered index (inclusive); `lo − 1` when empty.
    pub fn hi(&self) -> i64 {
        self.origin + self.values.len() as i64 - 1
    }

    pub fn get(&self, k: i64) -> Option<S> {
        if k < self.origin {
            return None;
        }
        self.values.get((k - self.origin) as usize).copied()
    }

    pub fn covers(&self, lo: i64, hi: i64) -> bool {
        lo > hi || (lo >= self.lo() && hi <= self.hi())
    }

    /// Coordinates `lo..=hi`, or `WindowUnderflow`.
    pub fn slice(&self, lo: i64, hi: i64) -> Result<&[S]> {
        if lo > hi {
            return Ok(&[]);
        }
        if !self.covers(lo, hi) {
            return Err(Error::WindowUnderflow {
                need_lo: lo,
                need_hi: hi,
                have_lo: self.lo(),
                have_hi: self.hi(),
            });
        }
        let s = (lo - self.origin) as usize;
        let e = (hi - self.origin) as usize;
        Ok(&self.values[s..=e])
    }
}

/// Derives an independent root seed for a named purpose (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Window of `length` coordinates starting at `origin`, drawn from stream 0 of `seed`.
pub fn sample_window<S: SiteValue>(
    dist: &DistributionSpec,
    origin: i64,
    length: i64,
    seed: u64,
) -> Result<WordWindow<S>> {
    sample_window_stream(dist, origin, length, seed, 0)
}

/// As [`sample_window`] on an explicit stream; Monte Carlo loops use the sample index.
pub fn sample_window_stream<S: SiteValue>(
    dist: &DistributionSpec,
    origin: i64,
    length: i64,
    seed: u64,
    stream: u64,
) -> Result<WordWindow<S>> {
    if length <= 0 {
        return Err(Error::InvalidArgument(format!("window length {length} must be ≥ 1")));
    }
    dist.require_flavor(S::FLAVOR)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let offset = (origin as i128 - i64::MIN as i128) as u128;
    rng.set_word_pos(offset * WORDS_PER_COORD);
    let values = (0..length)
        .map(|_| {
            let u1 = rng.next_u64();
            let u2 = rng.next_u64();
            S::from_draw(dist.draw(u1, u2))
        })
        .collect();
    Ok(WordWindow {
        origin,
        values,
        lineage: Some(SeedLineage {
            seed,
            stream,
            scheme: RNG_SCHEME.to_string(),
        }),
    })
}

/// Checks that every coordinate lies in the support of `dist`.
pub fn window_in_support<S: Scalar>(dist: &DistributionSpec, w: &WordWindow<S>) -> bool {
    w.values.iter().all(|v| dist.contains(v.to_complex()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportConstants {
    /// `2 + max |α|`; the energy window is `[−κ, κ]`.
    pub kappa: f64,
    /// Almost-sure spectrum `A + [−2, 2]` as disjoint sorted intervals.
    pub sigma_set: Vec<Interval>,
    pub gamma_hint: Option<f64>,
}

pub fn support_constants(dist: &DistributionSpec) -> Result<SupportConstants> {
    dist.require_flavor(Flavor::Real)?;
    let kappa = 2.0 + dist.support_bound();
    let mut pieces: Vec<Interval> = match dist.law() {
        SiteLaw::Atoms(a) => a
            .iter()
            .map(|(v, _)| Interval {
                lo: v.re - 2.0,
                hi: v.re + 2.0,
            })
            .collect(),
        SiteLaw::Interval { lo, hi } => vec![Interval {
            lo: lo - 2.0,
            hi: hi + 2.0,
        }],
        SiteLaw::Annulus { .. } => unreachable!("flavor checked"),
    };
    pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut sigma_set: Vec<Interval> = Vec::new();
    for p in pieces {
        match sigma_set.last_mut() {
            Some(last) if p.lo <= last.hi => last.hi = last.hi.max(p.hi),
            _ => sigma_set.push(p),
        }
    }
    Ok(SupportConstants {
        kappa,
        sigma_set,
        gamma_hint: None,
    })
}

/// `Γ = sup ‖M^E(α)‖` over `E ∈ [−κ, κ]` and `α` in the support.
pub fn one_step_bound(dist: &DistributionSpec) -> Result<f64> {
    let c = support_constants(dist)?;
    let x = c.kappa + dist.support_bound();
    Ok(RMat2::new(x, -1.0, 1.0, 0.0).norm())
}

/// `[Rω]_n = ω_{−1−n}`.
pub fn reflect<S: Scalar>(w: &WordWindow<S>) -> WordWindow<S> {
    let mut values = w.values.clone();
    values.reverse();
    WordWindow {
        origin: -(w.origin + w.values.len() as i64),
        values,
        lineage: w.lineage.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_gives_constant_window() {
        let d = DistributionSpec::point(0.0).unwrap();
        let w: WordWindow<f64> = sample_window(&d, -7, 25, 99).unwrap();
        assert!(w.values.iter().all(|&v| v == 0.0));
        assert_eq!(w.lo(), -7);
        assert_eq!(w.hi(), 17);
    }

    #[test]
    fn bernoulli_frequency_within_clt_bound() {
        let d = DistributionSpec::bernoulli(0.0, 1.0).unwrap();
        let n = 100_000;
        let w: WordWindow<f64> = sample_window(&d, 0, n, 2024).unwrap();
        let ones = w.values.iter().filter(|&&v| v == 1.0).count() as f64 / n as f64;
        assert!((ones - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt());
        assert!(window_in_support(&d, &w));
    }

    #[test]
    fn overlapping_windows_agree() {
        let d = DistributionSpec::interval(-1.0, 2.0).unwrap();
        let a: WordWindow<f64> = sample_window(&d, 0, 10, 7).unwrap();
        let b: WordWindow<f64> = sample_window(&d, 5, 10, 7).unwrap();
        for k in 5..10 {
            assert_eq!(a.get(k), b.get(k));
        }
        let c: WordWindow<f64> = sample_window(&d, -3, 4, 7).unwrap();
        let e: WordWindow<f64> = sample_window(&d, -3, 3, 7).unwrap();
        assert_eq!(&c.values[..3], &e.values[..]);
    }

    #[test]
    fn length_must_be_positive() {
        let d = DistributionSpec::point(1.0).unwrap();
        assert!(matches!(
            sample_window::<f64>(&d, 0, 0, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn flavor_is_enforced() {
        let d = DistributionSpec::point(1.0).unwrap();
        assert!(matches!(
            sample_window::<Complex64>(&d, 0, 3, 1),
            Err(Error::WrongFlavor { .. })
        ));
        let c = DistributionSpec::annulus(0.1, 0.5).unwrap();
        assert!(matches!(support_constants(&c), Err(Error::WrongFlavor { .. })));
    }

    #[test]
    fn annulus_samples_stay_in_annulus() {
        let d = DistributionSpec::annulus(0.2, 0.7).unwrap();
        let w: WordWindow<Complex64> = sample_window(&d, -50, 1000, 3).unwrap();
        assert!(w.values.iter().all(|v| v.norm() >= 0.2 - 1e-12 && v.norm() <= 0.7 + 1e-12));
        assert!(window_in_support(&d, &w));
    }

    #[test]
    fn support_constants_examples() {
        let c = support_constants(&DistributionSpec::bernoulli(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(c.kappa, 3.0);
        assert_eq!(c.sigma_set, vec![Interval { lo: -2.0, hi: 3.0 }]);
        let c = support_constants(&DistributionSpec::point(0.0).unwrap()).unwrap();
        assert_eq!(c.sigma_set, vec![Interval { lo: -2.0, hi: 2.0 }]);
        let c = support_constants(&DistributionSpec::bernoulli(0.0, 10.0).unwrap()).unwrap();
        assert_eq!(c.kappa, 12.0);
        assert_eq!(
            c.sigma_set,
            vec![Interval { lo: -2.0, hi: 2.0 }, Interval { lo: 8.0, hi: 12.0 }]
        );
        assert!(c.gamma_hint.is_none());
    }

    #[test]
    fn reflection_index_arithmetic() {
        let w = WordWindow::from_values(0, vec![1.0, 2.0, 3.0]);
        let r = reflect(&w);
        assert_eq!(r.lo(), -3);
        assert_eq!(r.hi(), -1);
        assert_eq!(r.values, vec![3.0, 2.0, 1.0]);
        for n in -3..=-1 {
            assert_eq!(r.get(n), w.get(-1 - n));
        }
        assert_eq!(reflect(&r), w);
        let c = WordWindow::from_values(4, vec![2.5; 6]);
        assert!(reflect(&c).values.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"kind":"atoms","flavor":"real","atoms":[{"v":0,"w":0.5},{"v":1,"w":0.5}]}"#;
        let d: DistributionSpec = serde_json::from_str(text).unwrap();
        assert_eq!(d, DistributionSpec::bernoulli(0.0, 1.0).unwrap());
        let back: DistributionSpec = serde_json::from_str(&d.canonical_json()).unwrap();
        assert_eq!(back, d);
        let c = r#"{"kind":"atoms","flavor":"complex","atoms":[{"v":{"re":0.3,"im":0.1},"w":1.0}]}"#;
        let d: DistributionSpec = serde_json::from_str(c).unwrap();
        assert_eq!(d.complex_atom_values().unwrap(), vec![Complex64::new(0.3, 0.1)]);
    }

    #[test]
    fn invalid_distributions_rejected() {
        for text in [
            r#"{"kind":"atoms","flavor":"real","atoms":[{"v":0,"w":0.6},{"v":1,"w":0.5}]}"#,
            r#"{"kind":"atoms","flavor":"real","atoms":[{"v":0,"w":1.0}],"extra":1}"#,
            r#"{"kind":"atoms","flavor":"complex","atoms":[{"v":{"re":1.0,"im":0.0},"w":1.0}]}"#,
            r#"{"kind":"uniform","flavor":"real","lo":1,"hi":0}"#,
            r#"{"kind":"gauss","flavor":"real"}"#,
        ] {
            assert!(serde_json::from_str::<DistributionSpec>(text).is_err(), "{text}");
        }
    }
}
