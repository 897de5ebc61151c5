//! Experiment configuration: schema, per-command parameters and validation.

use anderson_core::ensemble::DistributionSpec;
use anderson_core::mat2::Flavor;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;
const MAX_N: usize = 10_000_000;
const MAX_SAMPLES: usize = 10_000_000;
const MAX_SITES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    LeCurve,
    Ldt,
    BlockLdt,
    Avalanche,
    ScaleConsistency,
    Holder,
    Dos,
    Thouless,
    GreenCheck,
    Localize,
    Sule,
    Centers,
    Dynloc,
    DoubleRes,
    CmvLe,
    CmvSpectrum,
    CmvCheck,
    Furstenberg,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::LeCurve => "le-curve",
            Command::Ldt => "ldt",
            Command::BlockLdt => "block-ldt",
            Command::Avalanche => "avalanche",
            Command::ScaleConsistency => "scale-consistency",
            Command::Holder => "holder",
            Command::Dos => "dos",
            Command::Thouless => "thouless",
            Command::GreenCheck => "green-check",
            Command::Localize => "localize",
            Command::Sule => "sule",
            Command::Centers => "centers",
            Command::Dynloc => "dynloc",
            Command::DoubleRes => "double-res",
            Command::CmvLe => "cmv-le",
            Command::CmvSpectrum => "cmv-spectrum",
            Command::CmvCheck => "cmv-check",
            Command::Furstenberg => "furstenberg",
        }
    }

    /// `None` when both flavors are accepted.
    fn flavor(self) -> Option<Flavor> {
        match self {
            Command::CmvLe | Command::CmvSpectrum | Command::CmvCheck => Some(Flavor::Complex),
            Command::Furstenberg => None,
            _ => Some(Flavor::Real),
        }
    }
}

/// The file as written by the user.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub command: Command,
    pub distribution: Value,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Error,
    Warning,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub level: Level,
    pub field: String,
    pub kind: String,
    pub message: String,
}

#[derive(Default)]
struct Diagnostics(Vec<Diagnostic>);

impl Diagnostics {
    fn error(&mut self, field: &str, kind: &str, message: impl Into<String>) {
        self.0.push(Diagnostic {
            level: Level::Error,
            field: field.into(),
            kind: kind.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, field: &str, kind: &str, message: impl Into<String>) {
        self.0.push(Diagnostic {
            level: Level::Warning,
            field: field.into(),
            kind: kind.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, field: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.error(field, "OutOfRange", format!("must be positive and finite, got {v}"));
        }
    }

    fn finite(&mut self, field: &str, v: f64) {
        if !v.is_finite() {
            self.error(field, "OutOfRange", "must be finite");
        }
    }

    fn count(&mut self, field: &str, v: usize, lo: usize, hi: usize) {
        if v < lo || v > hi {
            self.error(field, "OutOfRange", format!("must lie in [{lo}, {hi}], got {v}"));
        }
    }

    fn nonempty<T>(&mut self, field: &str, v: &[T]) {
        if v.is_empty() {
            self.error(field, "OutOfRange", "must not be empty");
        }
    }
}

/// Energies given either as a list or as an evenly spaced grid.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub energies: Option<Vec<f64>>,
    #[serde(default)]
    pub e_min: Option<f64>,
    #[serde(default)]
    pub e_max: Option<f64>,
    #[serde(default)]
    pub points: Option<usize>,
}

impl GridSpec {
    fn check(&self, d: &mut Diagnostics, field: &str) {
        match &self.energies {
            Some(list) => {
                d.nonempty(field, list);
                if list.iter().any(|e| !e.is_finite()) {
                    d.error(field, "OutOfRange", "energies must be finite");
                }
                if self.e_min.is_some() || self.e_max.is_some() || self.points.is_some() {
                    d.error(field, "Conflict", "give either `energies` or `e_min`/`e_max`/`points`");
                }
            }
            None => {
                if let Some(p) = self.points {
                    d.count(&format!("{field}.points"), p, 1, 100_000);
                }
                if let (Some(a), Some(b)) = (self.e_min, self.e_max) {
                    if !(a.is_finite() && b.is_finite() && a <= b) {
                        d.error(field, "OutOfRange", "need finite e_min ≤ e_max");
                    }
                }
            }
        }
    }

    /// The explicit list, or `points` values over `[e_min, e_max]` (defaults given by the caller).
    pub fn resolve(&self, lo: f64, hi: f64, points: usize) -> Vec<f64> {
        if let Some(list) = &self.energies {
            return list.clone();
        }
        let (a, b) = (self.e_min.unwrap_or(lo), self.e_max.unwrap_or(hi));
        let p = self.points.unwrap_or(points);
        if p == 1 {
            return vec![0.5 * (a + b)];
        }
        (0..p).map(|i| a + (b - a) * i as f64 / (p - 1) as f64).collect()
    }
}

macro_rules! params {
    ($name:ident { $($field:ident : $ty:ty = $default:expr),* $(,)? }) => {
        #[derive(Debug, Clone, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, default)]
        pub struct $name {
            $(pub $field: $ty,)*
        }

        impl Default for $name {
            fn default() -> Self {
                $name { $($field: $default,)* }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Plain average of `F_n`.
    Mean,
    /// `2F_n − F_{⌊n/2⌋}`.
    TwoScale,
}

params!(LeCurveParams {
    grid: GridSpec = GridSpec::default(),
    n: usize = 1000,
    samples: usize = 100,
    estimator: Estimator = Estimator::Mean,
});
params!(LdtParams {
    energy: f64 = 0.0,
    epsilon: f64 = 0.1,
    n_list: Vec<usize> = vec![50, 100, 200, 400],
    samples: usize = 1000,
});
params!(BlockLdtParams {
    energy: f64 = 0.0,
    epsilon: f64 = 0.05,
    n: usize = 50,
    r_list: Vec<usize> = vec![5, 10, 20],
    offset: i64 = 0,
    samples: usize = 1000,
});
params!(AvalancheParams {
    energy: f64 = 0.0,
    block_length: usize = 15,
    chain_length: usize = 6,
    chains: usize = 100,
    c: f64 = anderson_core::lyapunov::AVALANCHE_C,
});
params!(ScaleParams {
    energy: f64 = 0.0,
    n_list: Vec<usize> = vec![25, 50, 100],
    samples: usize = 1000,
});
params!(HolderParams {
    pairs: Vec<(f64, f64)> = Vec::new(),
    n: usize = 1000,
    samples: usize = 200,
});
params!(DosParams {
    sites: usize = 1000,
    realizations: usize = 20,
    grid_points: usize = 201,
});
params!(ThoulessParams {
    grid: GridSpec = GridSpec::default(),
    n_le: usize = 4000,
    samples: usize = 50,
    sites: usize = 2000,
    realizations: usize = 50,
});
params!(GreenParams {
    sites: usize = 32,
    energy: Option<f64> = None,
    samples: usize = 100,
    tables: bool = false,
});
params!(LocalizeParams {
    sites: usize = 500,
    realizations: usize = 1,
    le_points: usize = 81,
    le_n: usize = 4000,
    le_samples: usize = 64,
});
params!(SuleParams {
    half_width: usize = 250,
    delta: f64 = 0.3,
    le_points: usize = 81,
    le_n: usize = 4000,
    le_samples: usize = 64,
});
params!(CentersParams {
    half_width: usize = 250,
    realizations: usize = 10,
    l_values: Vec<i64> = (1..=50).collect(),
});
params!(DynlocParams {
    half_width: usize = 200,
});
params!(DoubleResParams {
    k_list: Vec<usize> = vec![4, 6, 8],
    samples: usize = 1000,
    asymptotic_scales: bool = false,
    box_exponent: Option<f64> = None,
    gap_exponent: Option<f64> = None,
    bar_factor: Option<f64> = None,
    green_exponent: Option<f64> = None,
    epsilon: Option<f64> = None,
    energy_points: Option<usize> = None,
    m_multiples: Option<Vec<usize>> = None,
});
params!(CmvLeParams {
    angles: Option<Vec<f64>> = None,
    points: usize = 33,
    n: usize = 2000,
    samples: usize = 100,
    estimator: Estimator = Estimator::Mean,
});
params!(CmvSpectrumParams {
    lo: i64 = 0,
    hi: i64 = 31,
    tau1: Option<f64> = Some(0.0),
    tau2: Option<f64> = Some(0.0),
    half_line: bool = false,
    grid_density: usize = 4,
});
params!(CmvCheckParams {
    max_length: usize = 24,
    steps: usize = 1000,
});
params!(FurstenbergParams {
    energies: Vec<f64> = Vec::new(),
    angles: Vec<f64> = Vec::new(),
});

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Params {
    LeCurve(LeCurveParams),
    Ldt(LdtParams),
    BlockLdt(BlockLdtParams),
    Avalanche(AvalancheParams),
    Scale(ScaleParams),
    Holder(HolderParams),
    Dos(DosParams),
    Thouless(ThoulessParams),
    Green(GreenParams),
    Localize(LocalizeParams),
    Sule(SuleParams),
    Centers(CentersParams),
    Dynloc(DynlocParams),
    DoubleRes(DoubleResParams),
    CmvLe(CmvLeParams),
    CmvSpectrum(CmvSpectrumParams),
    CmvCheck(CmvCheckParams),
    Furstenberg(FurstenbergParams),
}

/// A configuration that passed validation, with CLI overrides applied.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub command: Command,
    pub distribution: DistributionSpec,
    pub params: Params,
    pub seed: u64,
    pub output: String,
}

impl ExperimentConfig {
    /// Canonical JSON of everything that determines the outputs (worker count excluded).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

pub struct Validation {
    pub diagnostics: Vec<Diagnostic>,
    pub config: Option<ExperimentConfig>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.config.is_some()
    }
}

fn parse<T: DeserializeOwned + Default>(v: &Value, d: &mut Diagnostics) -> Option<T> {
    if v.as_object().is_some_and(|m| m.is_empty()) {
        return Some(T::default());
    }
    match serde_json::from_value(v.clone()) {
        Ok(p) => Some(p),
        Err(e) => {
            d.error("params", "Schema", e.to_string());
            None
        }
    }
}

/// Checks the raw JSON text; collects every problem found instead of stopping at the first.
pub fn validate(text: &str, seed_override: Option<u64>) -> Validation {
    let mut d = Diagnostics::default();
    let raw: RawConfig = match serde_json::from_str(text) {
        Ok(r) => r,
        Err(e) => {
            d.error("", "Schema", e.to_string());
            return Validation {
                diagnostics: d.0,
                config: None,
            };
        }
    };
    let dist: Option<DistributionSpec> = match serde_json::from_value(raw.distribution.clone()) {
        Ok(x) => Some(x),
        Err(e) => {
            d.error("distribution", "InvalidDistribution", e.to_string());
            None
        }
    };
    if let (Some(dist), Some(fl)) = (&dist, raw.command.flavor()) {
        if dist.flavor() != fl {
            let want = if fl == Flavor::Real { "real" } else { "complex" };
            d.error(
                "distribution",
                "WrongFlavor",
                format!("command {} needs a {want} distribution", raw.command.name()),
            );
        }
    }
    if let Some(w) = raw.workers {
        d.count("workers", w, 1, 1024);
    }
    let params = check_params(raw.command, &raw.params, dist.as_ref(), &mut d);
    let output = raw.output.clone().unwrap_or_else(|| format!("{}.csv", raw.command.name()));
    if output.is_empty() || output.contains('/') || output.contains('\\') || output.starts_with('.') {
        d.error("output", "InvalidPath", "output must be a plain file name");
    }
    let ok = !d.0.iter().any(|x| x.level == Level::Error);
    let config = match (ok, dist, params) {
        (true, Some(distribution), Some(params)) => Some(ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            command: raw.command,
            distribution,
            params,
            seed: seed_override.unwrap_or(raw.seed),
            output,
        }),
        _ => None,
    };
    Validation {
        diagnostics: d.0,
        config,
    }
}

fn check_params(cmd: Command, v: &Value, dist: Option<&DistributionSpec>, d: &mut Diagnostics) -> Option<Params> {
    if !v.is_object() {
        d.error("params", "Schema", "params must be an object");
        return None;
    }
    let single_atom = dist.is_some_and(|x| x.is_single_atom());
    Some(match cmd {
        Command::LeCurve => {
            let p: LeCurveParams = parse(v, d)?;
            p.grid.check(d, "params.grid");
            d.count("params.n", p.n, 1, MAX_N);
            d.count("params.samples", p.samples, 1, MAX_SAMPLES);
            Params::LeCurve(p)
        }
        Command::Ldt => {
            let p: LdtParams = parse(v, d)?;
            d.finite("params.energy", p.energy);
            d.positive("params.epsilon", p.epsilon);
            d.nonempty("params.n_list", &p.n_list);
            p.n_list.iter().for_each(|n| d.count("params.n_list", *n, 1, MAX_N));
            d.count("params.samples", p.samples, 1, MAX_SAMPLES);
            Params::Ldt(p)
        }
        Command::BlockLdt => {
            let p: BlockLdtParams = parse(v, d)?;
            d.finite("params.energy", p.energy);
            d.positive("params.epsilon", p.epsilon);
            d.count("params.n", p.n, 1, MAX_N);
            d.nonempty("params.r_list", &p.r_list);
            p.r_list.iter().for_each(|r| d.count("params.r_list", *r, 1, 100_000));
            d.count("params.samples", p.samples, 1, MAX_SAMPLES);
            Params::BlockLdt(p)
        }
        Command::Avalanche => {
            let p: AvalancheParams = parse(v, d)?;
            d.finite("params.energy", p.energy);
            d.count("params.block_length", p.block_length, 1, 100_000);
            d.count("params.chain_length", p.chain_length, 3, 100_000);
            d.count("params.chains", p.chains, 1, MAX_SAMPLES);
            d.positive("params.c", p.c);
            Params::Avalanche(p)
        }
        Command::ScaleConsistency => {
            let p: ScaleParams = parse(v, d)?;
            d.finite("params.energy", p.energy);
            d.nonempty("params.n_list", &p.n_list);
            p.n_list.iter().for_each(|n| d.count("params.n_list", *n, 1, MAX_N));
            d.count("params.samples", p.samples, 1, MAX_SAMPLES);
            Params::Scale(p)
        }
        Command::Holder => {
            let p: HolderParams = parse(v, d)?;
            if p.pairs.len() < 2 {
                d.error("params.pairs", "OutOfRange", "need at least two energy pairs");
            }
            if p.pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
                d.error("params.pairs", "OutOfRange", "energies must be finite");
            }
            d.count("params.n", p.n, 1, MAX_N);
            d.count("params.samples", p.samples, 1, MAX_SAMPLES);
            Params::Holder(p)
        }
        Command::Dos => {
            let p: DosParams = parse(v, d)?;
            d.count("params.sites", p.sites, 1, MAX_SITES);
            d.count("params.realizations", p.realizations, 1, 100_000);
            d.count("params.grid_points", p.grid_points, 2, 100_000);
            Params::Dos(p)
        }
        Command::Thouless => {
            let p: ThoulessParams = parse(v, d)?;
            p.grid.check(d, "params.grid");
            d.count("params.n_le", p.n_le, 1, MAX_N);
            d.count("params.samples", p.samples, 1, MAX_SAMPLES);
            d.count("params.sites", p.sites, 1, MAX_SITES);
            d.count("params.realizations", p.realizations, 1, 100_000);
            Params::Thouless(p)
        }
        Command::GreenCheck => {
            let p: GreenParams = parse(v, d)?;
            d.count("params.sites", p.sites, 1, 4096);
            if p.tables && p.sites.saturating_mul(p.sites).saturating_mul(p.samples) > 10_000_000 {
                d.error("params.tables", "OutOfRange", "sites² × samples must stay ≤ 1e7 when dumping tables");
            }
            d.count("params.samples", p.samples, 1, 1_000_000);
            if let Some(e) = p.energy {
                d.finite("params.energy", e);
            }
            Params::Green(p)
        }
        Command::Localize => {
            let p: LocalizeParams = parse(v, d)?;
            d.count("params.sites", p.sites, 1, 20_000);
            d.count("params.realizations", p.realizations, 1, 10_000);
            check_le_table(d, p.le_points, p.le_n, p.le_samples);
            Params::Localize(p)
        }
        Command::Sule => {
            let p: SuleParams = parse(v, d)?;
            d.count("params.half_width", p.half_width, 1, 10_000);
            if !(p.delta > 0.0 && p.delta < 1.0) {
                d.error("params.delta", "OutOfRange", "delta must lie in (0, 1)");
            }
            check_le_table(d, p.le_points, p.le_n, p.le_samples);
            Params::Sule(p)
        }
        Command::Centers => {
            let p: CentersParams = parse(v, d)?;
            d.count("params.half_width", p.half_width, 1, 10_000);
            d.count("params.realizations", p.realizations, 1, 100_000);
            d.nonempty("params.l_values", &p.l_values);
            if p.l_values.iter().any(|l| *l < 0) {
                d.error("params.l_values", "OutOfRange", "L values must be ≥ 0");
            }
            Params::Centers(p)
        }
        Command::Dynloc => {
            let p: DynlocParams = parse(v, d)?;
            d.count("params.half_width", p.half_width, 2, 2000);
            Params::Dynloc(p)
        }
        Command::DoubleRes => {
            let p: DoubleResParams = parse(v, d)?;
            d.nonempty("params.k_list", &p.k_list);
            p.k_list.iter().for_each(|k| d.count("params.k_list", *k, 1, 10_000));
            d.count("params.samples", p.samples, 1, MAX_SAMPLES);
            for (name, x) in [
                ("params.box_exponent", p.box_exponent),
                ("params.gap_exponent", p.gap_exponent),
                ("params.bar_factor", p.bar_factor),
                ("params.green_exponent", p.green_exponent),
                ("params.epsilon", p.epsilon),
            ] {
                if let Some(x) = x {
                    d.positive(name, x);
                }
            }
            if let Some(k) = p.energy_points {
                d.count("params.energy_points", k, 1, 10_000);
            }
            if let Some(m) = &p.m_multiples {
                d.nonempty("params.m_multiples", m);
                if m.contains(&0) {
                    d.error("params.m_multiples", "OutOfRange", "multiples must be ≥ 1");
                }
            }
            if single_atom {
                d.warn("distribution", "TrivialSupport", "trivial support: scan degenerate");
            }
            Params::DoubleRes(p)
        }
        Command::CmvLe => {
            let p: CmvLeParams = parse(v, d)?;
            if let Some(a) = &p.angles {
                d.nonempty("params.angles", a);
                if a.iter().any(|t| !t.is_finite()) {
                    d.error("params.angles", "OutOfRange", "angles must be finite");
                }
            }
            d.count("params.points", p.points, 1, 100_000);
            d.count("params.n", p.n, 1, MAX_N);
            d.count("params.samples", p.samples, 1, MAX_SAMPLES);
            Params::CmvLe(p)
        }
        Command::CmvSpectrum => {
            let p: CmvSpectrumParams = parse(v, d)?;
            if p.hi < p.lo || p.hi - p.lo >= 4096 {
                d.error("params.hi", "OutOfRange", "need lo ≤ hi and at most 4096 sites");
            }
            if p.half_line && p.lo != 0 {
                d.error("params.lo", "OutOfRange", "half-line truncations start at 0");
            }
            d.count("params.grid_density", p.grid_density, 1, 1024);
            Params::CmvSpectrum(p)
        }
        Command::CmvCheck => {
            let p: CmvCheckParams = parse(v, d)?;
            d.count("params.max_length", p.max_length, 1, 512);
            d.count("params.steps", p.steps, 1, MAX_SAMPLES);
            Params::CmvCheck(p)
        }
        Command::Furstenberg => {
            let p: FurstenbergParams = parse(v, d)?;
            match dist.map(|x| x.flavor()) {
                Some(Flavor::Real) if p.energies.is_empty() || !p.angles.is_empty() => {
                    d.error("params.energies", "OutOfRange", "real distributions take a non-empty `energies` list only")
                }
                Some(Flavor::Complex) if p.angles.is_empty() || !p.energies.is_empty() => {
                    d.error("params.angles", "OutOfRange", "complex distributions take a non-empty `angles` list only")
                }
                _ => {}
            }
            if single_atom {
                d.error("distribution", "TrivialSupport", "the Furstenberg conditions need at least two atoms");
            }
            Params::Furstenberg(p)
        }
    })
}

fn check_le_table(d: &mut Diagnostics, points: usize, n: usize, samples: usize) {
    d.count("params.le_points", points, 2, 10_000);
    d.count("params.le_n", n, 1, MAX_N);
    d.count("params.le_samples", samples, 1, MAX_SAMPLES);
}

#[cfg(test)]
mod tests {
    use super::*;

    const REAL: &str = r#"{"kind":"atoms","flavor":"real","atoms":[{"v":0,"w":0.5},{"v":1,"w":0.5}]}"#;
    const COMPLEX: &str =
        r#"{"kind":"atoms","flavor":"complex","atoms":[{"v":{"re":0.5,"im":0},"w":0.5},{"v":{"re":0,"im":0.5},"w":0.5}]}"#;

    #[test]
    fn defaults_validate_for_every_command() {
        for name in [
            "le-curve",
            "ldt",
            "block-ldt",
            "avalanche",
            "scale-consistency",
            "dos",
            "thouless",
            "green-check",
            "localize",
            "sule",
            "centers",
            "dynloc",
            "double-res",
            "cmv-le",
            "cmv-spectrum",
            "cmv-check",
        ] {
            let dist = if name.starts_with("cmv") { COMPLEX } else { REAL };
            let v = validate(&format!(r#"{{"command":"{name}","distribution":{dist}}}"#), None);
            assert!(v.is_valid(), "{name}: {:?}", v.diagnostics);
            let cfg = v.config.unwrap();
            assert_eq!(cfg.command.name(), name);
            assert_eq!(cfg.output, format!("{name}.csv"));
        }
        // these two have no meaningful defaults
        let v = validate(&format!(r#"{{"command":"holder","distribution":{REAL}}}"#), None);
        assert!(!v.is_valid());
        let v = validate(
            &format!(r#"{{"command":"furstenberg","distribution":{REAL},"params":{{"energies":[0.5]}}}}"#),
            None,
        );
        assert!(v.is_valid());
    }

    #[test]
    fn grid_resolution() {
        let g = GridSpec::default();
        let e = g.resolve(-2.0, 2.0, 5);
        assert_eq!(e, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        let g = GridSpec {
            points: Some(1),
            ..GridSpec::default()
        };
        assert_eq!(g.resolve(-1.0, 3.0, 9), vec![1.0]);
        let g = GridSpec {
            energies: Some(vec![0.25]),
            ..GridSpec::default()
        };
        assert_eq!(g.resolve(-1.0, 3.0, 9), vec![0.25]);
    }

    #[test]
    fn every_violation_is_listed() {
        let v = validate(
            &format!(
                r#"{{"command":"ldt","distribution":{REAL},"params":{{"epsilon":-1,"n_list":[0],"samples":0}},"output":"../x"}}"#
            ),
            None,
        );
        let fields: Vec<&str> = v.diagnostics.iter().map(|d| d.field.as_str()).collect();
        for f in ["params.epsilon", "params.n_list", "params.samples", "output"] {
            assert!(fields.contains(&f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn seed_override_and_hash_ignore_workers() {
        let a = validate(&format!(r#"{{"command":"dos","distribution":{REAL},"seed":4,"workers":2}}"#), None);
        let b = validate(&format!(r#"{{"command":"dos","distribution":{REAL},"seed":9,"workers":7}}"#), Some(4));
        let (a, b) = (a.config.unwrap(), b.config.unwrap());
        assert_eq!(b.seed, 4);
        assert_eq!(a.canonical_json(), b.canonical_json());
    }
}
