//! Flat `key = value` experiment configuration with dotted keys.
//!
//! ```text
//! # two-level system driven at v = 1
//! system.levels = 0, 1
//! system.coupling.0.1 = 1, 0
//! measurement.kappa = 1.6
//! measurement.duration = 6.283185307179586
//! measurement.dt = 0.01
//! initial.state = 1, 0; 0, 0
//! readout.source = most-probable
//! ```
//!
//! Blank lines and `#` comments are ignored. Every key may appear once.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use fuzzymon_core::oracles::MostProbableMethod;
use fuzzymon_core::{AmplitudeState, Complex64 as C64, DMatrix, MeasurementSpec, RegimeThresholds, SystemSpec};

/// A rejected configuration, pointing at the offending line and key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line number, 0 when the key is missing altogether.
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}: {}", self.field, self.message)
        } else {
            write!(f, "config line {}: {}: {}", self.line, self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum ReadoutSource {
    Constant(f64),
    File(PathBuf),
    MostProbable(MostProbableMethod),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandCenter {
    Constant(f64),
    MostProbable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Upper-triangle coupling element `V[i][j]`, `i <= j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingEntry {
    pub i: usize,
    pub j: usize,
    pub value: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub levels: Vec<f64>,
    pub coupling: Vec<CouplingEntry>,
    /// Index of the gap `E[k + 1] - E[k]` that defines `T_lr`.
    pub gap_index: usize,
    pub kappa: Option<f64>,
    pub duration: Option<f64>,
    pub dt: Option<f64>,
    pub initial: Vec<C64>,
    pub readout: ReadoutSource,
    pub record_stride: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub widths: Vec<f64>,
    pub band_center: BandCenter,
    pub bin_steps: usize,
    pub dump_readouts: bool,
    pub figure_ratio: f64,
    pub figure_periods: f64,
    pub figure_steps_per_period: usize,
    pub figure_samples: usize,
    pub figure_widths: Vec<f64>,
    pub regime_much: f64,
    pub regime_same_order: f64,
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            levels: vec![0.0, 1.0],
            coupling: Vec::new(),
            gap_index: 0,
            kappa: None,
            duration: None,
            dt: None,
            initial: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            readout: ReadoutSource::MostProbable(MostProbableMethod::ZerothOrder),
            record_stride: 1,
            n_samples: 1000,
            seed: 0,
            widths: vec![1.0, 2.0, 3.0, f64::INFINITY],
            band_center: BandCenter::MostProbable,
            bin_steps: 1,
            dump_readouts: false,
            figure_ratio: 0.8,
            figure_periods: 2.0,
            figure_steps_per_period: 1000,
            figure_samples: 10_000,
            figure_widths: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0, f64::INFINITY],
            regime_much: 10.0,
            regime_same_order: 3.0,
            format: Format::Csv,
        }
    }
}

const KEYS: &[&str] = &[
    "system.levels",
    "system.gap_index",
    "measurement.kappa",
    "measurement.duration",
    "measurement.dt",
    "initial.state",
    "readout.source",
    "readout.value",
    "readout.file",
    "readout.method",
    "evolve.record_stride",
    "sample.n_samples",
    "sample.seed",
    "sample.widths",
    "sample.band_center",
    "sample.bin_steps",
    "sample.dump_readouts",
    "figure.ratio",
    "figure.periods",
    "figure.steps_per_period",
    "figure.n_samples",
    "figure.widths",
    "regime.much",
    "regime.same_order",
    "output.format",
];

const COUPLING_PREFIX: &str = "system.coupling.";

struct Entry {
    value: String,
    line: usize,
}

fn err(line: usize, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, field: field.to_string(), message: message.into() }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(", ")
}

fn fmt_complex(z: C64) -> String {
    format!("{}, {}", fmt_f64(z.re), fmt_f64(z.im))
}

fn method_name(m: MostProbableMethod) -> &'static str {
    match m {
        MostProbableMethod::ZerothOrder => "zeroth-order",
        MostProbableMethod::SelfConsistent => "self-consistent",
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| err(line, content, "expected `key = value`"))?;
            let key = key.trim();
            if !KEYS.contains(&key) && !key.starts_with(COUPLING_PREFIX) {
                return Err(err(line, key, "unknown key"));
            }
            if let Some(prev) = entries.get(key) {
                return Err(err(line, key, format!("duplicate key (first set on line {})", prev.line)));
            }
            entries.insert(key.to_string(), Entry { value: value.trim().to_string(), line });
        }
        let cfg = Self::from_entries(&entries)?;
        cfg.validate(&entries)?;
        Ok(cfg)
    }

    fn from_entries(e: &BTreeMap<String, Entry>) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let get = |k: &str| e.get(k);
        if let Some(v) = get("system.levels") {
            cfg.levels = parse_list(v, "system.levels")?;
        }
        if let Some(v) = get("system.gap_index") {
            cfg.gap_index = parse_num(v, "system.gap_index")?;
        }
        for (key, entry) in e.range(COUPLING_PREFIX.to_string()..) {
            let Some(rest) = key.strip_prefix(COUPLING_PREFIX) else { break };
            let (i, j) = rest
                .split_once('.')
                .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                .ok_or_else(|| err(entry.line, key, "expected system.coupling.<i>.<j>"))?;
            if i > j {
                return Err(err(entry.line, key, "give the upper triangle (i <= j)"));
            }
            if cfg.coupling.iter().any(|c| (c.i, c.j) == (i, j)) {
                return Err(err(entry.line, key, format!("coupling ({i}, {j}) given twice")));
            }
            cfg.coupling.push(CouplingEntry { i, j, value: parse_complex(&entry.value, entry.line, key)? });
        }
        cfg.coupling.sort_by_key(|c| (c.i, c.j));
        cfg.kappa = get("measurement.kappa").map(|v| parse_f64(v, "measurement.kappa")).transpose()?;
        cfg.duration = get("measurement.duration").map(|v| parse_f64(v, "measurement.duration")).transpose()?;
        cfg.dt = get("measurement.dt").map(|v| parse_f64(v, "measurement.dt")).transpose()?;
        if let Some(v) = get("initial.state") {
            cfg.initial =
                v.value.split(';').map(|s| parse_complex(s, v.line, "initial.state")).collect::<Result<_, _>>()?;
        } else {
            let mut c = vec![C64::new(0.0, 0.0); cfg.levels.len()];
            if let Some(first) = c.first_mut() {
                *first = C64::new(1.0, 0.0);
            }
            cfg.initial = c;
        }
        let method = match get("readout.method") {
            None => MostProbableMethod::ZerothOrder,
            Some(v) => match v.value.as_str() {
                "zeroth-order" => MostProbableMethod::ZerothOrder,
                "self-consistent" => MostProbableMethod::SelfConsistent,
                _ => return Err(err(v.line, "readout.method", "expected zeroth-order or self-consistent")),
            },
        };
        cfg.readout = match get("readout.source") {
            None => ReadoutSource::MostProbable(method),
            Some(v) => match v.value.as_str() {
                "constant" => {
                    let value = get("readout.value")
                        .ok_or_else(|| err(v.line, "readout.value", "required when readout.source = constant"))?;
                    ReadoutSource::Constant(parse_f64(value, "readout.value")?)
                }
                "file" => {
                    let path = get("readout.file")
                        .ok_or_else(|| err(v.line, "readout.file", "required when readout.source = file"))?;
                    if path.value.is_empty() {
                        return Err(err(path.line, "readout.file", "empty path"));
                    }
                    ReadoutSource::File(PathBuf::from(&path.value))
                }
                "most-probable" => ReadoutSource::MostProbable(method),
                _ => return Err(err(v.line, "readout.source", "expected constant, file or most-probable")),
            },
        };
        if let Some(v) = get("evolve.record_stride") {
            cfg.record_stride = parse_num(v, "evolve.record_stride")?;
        }
        if let Some(v) = get("sample.n_samples") {
            cfg.n_samples = parse_num(v, "sample.n_samples")?;
        }
        if let Some(v) = get("sample.seed") {
            cfg.seed = parse_num(v, "sample.seed")?;
        }
        if let Some(v) = get("sample.widths") {
            cfg.widths = parse_list(v, "sample.widths")?;
        }
        if let Some(v) = get("sample.band_center") {
            cfg.band_center = match v.value.as_str() {
                "most-probable" => BandCenter::MostProbable,
                _ => BandCenter::Constant(parse_f64(v, "sample.band_center")?),
            };
        }
        if let Some(v) = get("sample.bin_steps") {
            cfg.bin_steps = parse_num(v, "sample.bin_steps")?;
        }
        if let Some(v) = get("sample.dump_readouts") {
            cfg.dump_readouts = match v.value.as_str() {
                "true" => true,
                "false" => false,
                _ => return Err(err(v.line, "sample.dump_readouts", "expected true or false")),
            };
        }
        if let Some(v) = get("figure.ratio") {
            cfg.figure_ratio = parse_f64(v, "figure.ratio")?;
        }
        if let Some(v) = get("figure.periods") {
            cfg.figure_periods = parse_f64(v, "figure.periods")?;
        }
        if let Some(v) = get("figure.steps_per_period") {
            cfg.figure_steps_per_period = parse_num(v, "figure.steps_per_period")?;
        }
        if let Some(v) = get("figure.n_samples") {
            cfg.figure_samples = parse_num(v, "figure.n_samples")?;
        }
        if let Some(v) = get("figure.widths") {
            cfg.figure_widths = parse_list(v, "figure.widths")?;
        }
        if let Some(v) = get("regime.much") {
            cfg.regime_much = parse_f64(v, "regime.much")?;
        }
        if let Some(v) = get("regime.same_order") {
            cfg.regime_same_order = parse_f64(v, "regime.same_order")?;
        }
        if let Some(v) = get("output.format") {
            cfg.format = Format::parse(&v.value).ok_or_else(|| err(v.line, "output.format", "expected csv or json"))?;
        }
        Ok(cfg)
    }

    /// Checks the invariants of the core types and reports the first
    /// violation against the key that caused it.
    fn validate(&self, e: &BTreeMap<String, Entry>) -> Result<(), ConfigError> {
        let line = |k: &str| e.get(k).map_or(0, |x| x.line);
        let system = self.system().map_err(|m| err(line("system.levels"), "system", m))?;
        if let Err(m) = system.gap(self.gap_index) {
            if system.dim() > 1 {
                return Err(err(line("system.gap_index"), "system.gap_index", m.to_string()));
            }
        }
        if self.kappa.is_some() || self.duration.is_some() || self.dt.is_some() {
            for key in ["measurement.kappa", "measurement.duration", "measurement.dt"] {
                if !e.contains_key(key) {
                    return Err(err(0, key, "measurement needs kappa, duration and dt together"));
                }
            }
            self.measurement()
                .map_err(|m| err(line("measurement.dt"), "measurement", m.to_string()))?
                .expect("all measurement keys present");
        }
        if self.initial.len() != system.dim() {
            return Err(err(
                line("initial.state"),
                "initial.state",
                format!("{} amplitudes for {} levels", self.initial.len(), system.dim()),
            ));
        }
        let norm: f64 = self.initial.iter().map(|c| c.norm_sqr()).sum();
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(err(line("initial.state"), "initial.state", format!("squared norm is {norm}, expected 1")));
        }
        for (key, widths) in [("sample.widths", &self.widths), ("figure.widths", &self.figure_widths)] {
            if widths.is_empty() || widths.iter().any(|w| !(*w > 0.0)) {
                return Err(err(line(key), key, "widths must be positive (inf allowed)"));
            }
        }
        let positive = [
            ("evolve.record_stride", self.record_stride),
            ("sample.n_samples", self.n_samples),
            ("sample.bin_steps", self.bin_steps),
            ("figure.steps_per_period", self.figure_steps_per_period),
            ("figure.n_samples", self.figure_samples),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(err(line(key), key, "must be at least 1"));
            }
        }
        let finite_positive = [
            ("figure.ratio", self.figure_ratio),
            ("figure.periods", self.figure_periods),
            ("regime.much", self.regime_much),
            ("regime.same_order", self.regime_same_order),
        ];
        for (key, v) in finite_positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(err(line(key), key, "must be finite and positive"));
            }
        }
        if let ReadoutSource::Constant(x) = self.readout {
            if !x.is_finite() {
                return Err(err(line("readout.value"), "readout.value", "must be finite"));
            }
        }
        if let BandCenter::Constant(x) = self.band_center {
            if !x.is_finite() {
                return Err(err(line("sample.band_center"), "sample.band_center", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<SystemSpec, String> {
        let n = self.levels.len();
        let mut v = DMatrix::<C64>::zeros(n, n);
        for c in &self.coupling {
            if c.j >= n {
                return Err(format!("coupling index ({}, {}) out of range for {n} levels", c.i, c.j));
            }
            if c.i == c.j && c.value.im != 0.0 {
                return Err(format!("diagonal coupling ({0}, {0}) must be real", c.i));
            }
            v[(c.i, c.j)] = c.value;
            v[(c.j, c.i)] = c.value.conj();
        }
        SystemSpec::new(self.levels.clone(), v).map_err(|e| e.to_string())
    }

    /// `None` when the measurement keys are absent.
    pub fn measurement(&self) -> Result<Option<MeasurementSpec>, fuzzymon_core::Error> {
        match (self.kappa, self.duration, self.dt) {
            (Some(k), Some(t), Some(dt)) => MeasurementSpec::new(k, t, dt).map(Some),
            _ => Ok(None),
        }
    }

    pub fn initial_state(&self) -> AmplitudeState {
        AmplitudeState::from_slice(&self.initial)
    }

    pub fn thresholds(&self) -> RegimeThresholds {
        RegimeThresholds { much: self.regime_much, same_order: self.regime_same_order }
    }

    /// Canonical text form with every field spelled out; parses back to an
    /// equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("system.levels", fmt_list(&self.levels));
        put("system.gap_index", self.gap_index.to_string());
        for c in &self.coupling {
            put(&format!("{COUPLING_PREFIX}{}.{}", c.i, c.j), fmt_complex(c.value));
        }
        if let (Some(k), Some(t), Some(dt)) = (self.kappa, self.duration, self.dt) {
            put("measurement.kappa", fmt_f64(k));
            put("measurement.duration", fmt_f64(t));
            put("measurement.dt", fmt_f64(dt));
        }
        put("initial.state", self.initial.iter().map(|&z| fmt_complex(z)).collect::<Vec<_>>().join("; "));
        match &self.readout {
            ReadoutSource::Constant(x) => {
                put("readout.source", "constant".into());
                put("readout.value", fmt_f64(*x));
            }
            ReadoutSource::File(p) => {
                put("readout.source", "file".into());
                put("readout.file", p.display().to_string());
            }
            ReadoutSource::MostProbable(m) => {
                put("readout.source", "most-probable".into());
                put("readout.method", method_name(*m).into());
            }
        }
        put("evolve.record_stride", self.record_stride.to_string());
        put("sample.n_samples", self.n_samples.to_string());
        put("sample.seed", self.seed.to_string());
        put("sample.widths", fmt_list(&self.widths));
        put(
            "sample.band_center",
            match self.band_center {
                BandCenter::Constant(x) => fmt_f64(x),
                BandCenter::MostProbable => "most-probable".into(),
            },
        );
        put("sample.bin_steps", self.bin_steps.to_string());
        put("sample.dump_readouts", self.dump_readouts.to_string());
        put("figure.ratio", fmt_f64(self.figure_ratio));
        put("figure.periods", fmt_f64(self.figure_periods));
        put("figure.steps_per_period", self.figure_steps_per_period.to_string());
        put("figure.n_samples", self.figure_samples.to_string());
        put("figure.widths", fmt_list(&self.figure_widths));
        put("regime.much", fmt_f64(self.regime_much));
        put("regime.same_order", fmt_f64(self.regime_same_order));
        put("output.format", self.format.as_str().into());
        s
    }
}

fn parse_f64(e: &Entry, key: &str) -> Result<f64, ConfigError> {
    parse_float_str(&e.value, e.line, key)
}

fn parse_float_str(s: &str, line: usize, key: &str) -> Result<f64, ConfigError> {
    let x: f64 = s.trim().parse().map_err(|_| err(line, key, format!("`{}` is not a number", s.trim())))?;
    if x.is_nan() {
        return Err(err(line, key, "NaN is not allowed"));
    }
    Ok(x)
}

fn parse_num<T: std::str::FromStr>(e: &Entry, key: &str) -> Result<T, ConfigError> {
    e.value.parse().map_err(|_| err(e.line, key, format!("`{}` is not a non-negative integer", e.value)))
}

fn parse_list(e: &Entry, key: &str) -> Result<Vec<f64>, ConfigError> {
    e.value.split(',').map(|s| parse_float_str(s, e.line, key)).collect()
}

fn parse_complex(s: &str, line: usize, key: &str) -> Result<C64, ConfigError> {
    let parts: Vec<&str> = s.split(',').collect();
    let z = match parts.as_slice() {
        [re] => C64::new(parse_float_str(re, line, key)?, 0.0),
        [re, im] => C64::new(parse_float_str(re, line, key)?, parse_float_str(im, line, key)?),
        _ => return Err(err(line, key, format!("`{}` is not `re, im`", s.trim()))),
    };
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(err(line, key, "complex values must be finite"));
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TWO_LEVEL: &str = "\
# driven two-level system
system.levels = 0, 1
system.coupling.0.1 = 1, 0
measurement.kappa = 1.6
measurement.duration = 3.0
measurement.dt = 0.01
initial.state = 0.6, 0; 0, 0.8
readout.source = constant
readout.value = 0
";

    #[test]
    fn parses_example() {
        let c = ExperimentConfig::parse(TWO_LEVEL).unwrap();
        assert_eq!(c.levels, vec![0.0, 1.0]);
        assert_eq!(c.coupling, vec![CouplingEntry { i: 0, j: 1, value: C64::new(1.0, 0.0) }]);
        assert_eq!(c.readout, ReadoutSource::Constant(0.0));
        assert_eq!(c.initial[1], C64::new(0.0, 0.8));
        assert_eq!(c.measurement().unwrap().unwrap().steps(), 300);
        assert_eq!(c.system().unwrap().rabi_coupling(), Some(1.0));
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let bad = TWO_LEVEL.replace("measurement.dt = 0.01", "measurement.dt = fast");
        let e = ExperimentConfig::parse(&bad).unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (6, "measurement.dt"));

        let e = ExperimentConfig::parse(&format!("{TWO_LEVEL}system.colour = red\n")).unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (10, "system.colour"));

        let e = ExperimentConfig::parse(&TWO_LEVEL.replace("0.6, 0; 0, 0.8", "0.6, 0; 0, 0.9")).unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (7, "initial.state"));

        let e =
            ExperimentConfig::parse(&TWO_LEVEL.replace("system.levels = 0, 1", "system.levels = 1, 0")).unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (2, "system"));

        let e =
            ExperimentConfig::parse(&TWO_LEVEL.replace("measurement.dt = 0.01", "measurement.dt = 0.007")).unwrap_err();
        assert_eq!(e.field, "measurement");

        let e = ExperimentConfig::parse(&format!("{TWO_LEVEL}readout.value = 2\n")).unwrap_err();
        assert!(e.message.contains("duplicate"), "{e}");

        let e = ExperimentConfig::parse("system.levels = 0, 1\nmeasurement.kappa = 1\n").unwrap_err();
        assert_eq!(e.field, "measurement.duration");
    }

    #[test]
    fn default_initial_state_is_ground() {
        let c = ExperimentConfig::parse("system.levels = 0, 1, 3\n").unwrap();
        assert_eq!(c.initial.len(), 3);
        assert_eq!(c.initial[0], C64::new(1.0, 0.0));
    }

    fn arb_f64() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6f64..1e6, -1.0f64..1.0, Just(0.0), Just(1e-300)]
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            proptest::collection::vec(0.01f64..3.0, 1..5),
            proptest::collection::vec((arb_f64(), arb_f64()), 1..4),
            (0.0f64..10.0, prop_oneof![Just(0.25), Just(0.5)], 1usize..40),
            (0.0f64..(2.0 * std::f64::consts::PI)),
            (arb_f64(), 0usize..3, 1usize..100, any::<u64>()),
            proptest::collection::vec(prop_oneof![0.1f64..10.0, Just(f64::INFINITY)], 1..5),
            (1usize..50, any::<bool>(), 0.1f64..2.0, 0.5f64..5.0, 2.0f64..20.0),
        )
            .prop_map(|(gaps, couplings, (kappa, dt, steps), phase, (e, src, n, seed), widths, misc)| {
                let mut levels = vec![-1.0];
                for g in &gaps {
                    levels.push(levels.last().unwrap() + g);
                }
                let dim = levels.len();
                let coupling = couplings
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| k + 1 < dim)
                    .map(|(k, &(re, im))| CouplingEntry { i: k, j: k + 1, value: C64::new(re, im) })
                    .collect();
                let mut initial = vec![C64::new(0.0, 0.0); dim];
                initial[0] = C64::new(phase.cos(), 0.0);
                initial[1] = C64::from_polar(phase.sin().abs(), phase);
                let norm = initial.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                let initial = initial.into_iter().map(|c| c / norm).collect();
                let readout = match src {
                    0 => ReadoutSource::Constant(e),
                    1 => ReadoutSource::File(PathBuf::from(format!("runs/readout_{n}.csv"))),
                    _ => ReadoutSource::MostProbable(if n % 2 == 0 {
                        MostProbableMethod::ZerothOrder
                    } else {
                        MostProbableMethod::SelfConsistent
                    }),
                };
                ExperimentConfig {
                    levels,
                    coupling,
                    gap_index: 0,
                    kappa: Some(kappa),
                    duration: Some(dt * steps as f64),
                    dt: Some(dt),
                    initial,
                    readout,
                    record_stride: n,
                    n_samples: n * 10,
                    seed,
                    widths,
                    band_center: if misc.1 { BandCenter::MostProbable } else { BandCenter::Constant(e) },
                    bin_steps: misc.0,
                    dump_readouts: misc.1,
                    figure_ratio: misc.2,
                    figure_periods: misc.3,
                    figure_steps_per_period: n * 7,
                    figure_samples: n + 100,
                    figure_widths: vec![1.0, misc.4, f64::INFINITY],
                    regime_much: misc.4,
                    regime_same_order: misc.3,
                    format: if misc.1 { Format::Json } else { Format::Csv },
                }
            })
    }

    proptest! {
        #[test]
        fn round_trip(cfg in arb_config()) {
            let text = cfg.to_text();
            let back = ExperimentConfig::parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
