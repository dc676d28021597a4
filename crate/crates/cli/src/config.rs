//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [problem]
//! W = 1
//! D0 = auto          # or a number
//! norm = L1
//!
//! [topology]
//! K = 100
//! R = 0.3
//! ```
//!
//! Blank lines and lines starting with `#` or `;` are ignored. Section and key
//! names are case-sensitive. Unknown sections or keys, duplicates, and values
//! outside their range are errors that name the key and its line.

use std::collections::BTreeMap;
use std::path::PathBuf;

use wsnpl_core::experiments::{NoiseKind, TopologyParams, MAX_R_RATIO};
use wsnpl_core::model::{channel_gain, db_to_linear, dbm_to_watts, NetworkInstance, SensorSpec};
use wsnpl_core::Norm;

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
    /// Keys in document order, for the indexed sensor rows.
    order: Vec<String>,
}

/// Raw document: sections of string entries with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct Document {
    sections: Vec<Section>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(format!("line {line}: unterminated section header `{s}`")))?
                    .trim();
                if name.is_empty() {
                    return Err(config_err(format!("line {line}: empty section name")));
                }
                if let Some(prev) = doc.sections.iter().find(|sec| sec.name == name) {
                    return Err(config_err(format!(
                        "line {line}: duplicate section [{name}] (first on line {})",
                        prev.line
                    )));
                }
                doc.sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: BTreeMap::new(),
                    order: Vec::new(),
                });
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {line}: expected `key = value`, got `{s}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(config_err(format!("line {line}: missing key before `=`")));
            }
            let section = doc
                .sections
                .last_mut()
                .ok_or_else(|| config_err(format!("line {line}: key `{key}` outside any section")))?;
            if let Some(prev) = section.entries.get(key) {
                return Err(config_err(format!(
                    "line {line}: duplicate key `{key}` in [{}] (first on line {})",
                    section.name, prev.line
                )));
            }
            section.order.push(key.to_string());
            section.entries.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    line,
                },
            );
        }
        Ok(doc)
    }

    fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

/// Typed view of one section that tracks which keys were consumed.
struct Reader<'a> {
    section: &'a Section,
    used: Vec<&'a str>,
}

impl<'a> Reader<'a> {
    fn new(section: &'a Section) -> Self {
        Self {
            section,
            used: Vec::new(),
        }
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a Entry> {
        let e = self.section.entries.get(key)?;
        self.used.push(key);
        Some(e)
    }

    fn bad(&self, key: &str, e: &Entry, what: &str) -> CliError {
        config_err(format!(
            "line {}: key `{key}` in [{}]: {what}, got `{}`",
            e.line, self.section.name, e.value
        ))
    }

    fn missing(&self, key: &str) -> CliError {
        config_err(format!(
            "missing key `{key}` in [{}] (section on line {})",
            self.section.name, self.section.line
        ))
    }

    fn f64_opt(&mut self, key: &'a str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => match e.value.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(self.bad(key, e, "expected a finite number")),
            },
        }
    }

    fn f64_checked(&mut self, key: &'a str, default: Option<f64>, ok: impl Fn(f64) -> bool, what: &str) -> Result<f64> {
        let v = match self.f64_opt(key)? {
            Some(v) => v,
            None => return default.ok_or_else(|| self.missing(key)),
        };
        if ok(v) {
            Ok(v)
        } else {
            let e = &self.section.entries[key];
            Err(self.bad(key, e, what))
        }
    }

    fn positive(&mut self, key: &'a str, default: Option<f64>) -> Result<f64> {
        self.f64_checked(key, default, |v| v > 0.0, "expected a positive number")
    }

    fn finite(&mut self, key: &'a str, default: Option<f64>) -> Result<f64> {
        self.f64_checked(key, default, |_| true, "expected a finite number")
    }

    fn count(&mut self, key: &'a str, default: Option<usize>) -> Result<usize> {
        match self.raw(key) {
            None => default.ok_or_else(|| self.missing(key)),
            Some(e) => match parse_count(&e.value) {
                Some(n) if n >= 1 => Ok(n),
                _ => Err(self.bad(key, e, "expected a positive integer")),
            },
        }
    }

    fn u64(&mut self, key: &'a str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(e) => e.value.parse().map_err(|_| self.bad(key, e, "expected an unsigned 64-bit integer")),
        }
    }

    fn string(&mut self, key: &'a str) -> Option<&'a str> {
        self.raw(key).map(|e| e.value.as_str())
    }

    fn path(&mut self, key: &'a str) -> Result<Option<PathBuf>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) if e.value.is_empty() => Err(self.bad(key, e, "expected a path")),
            Some(e) => Ok(Some(PathBuf::from(&e.value))),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &'a str, what: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| self.bad(key, e, what)),
        }
    }

    /// Rejects keys not consumed by the typed reads, except those accepted by
    /// `extra`.
    fn finish(self, extra: impl Fn(&str) -> bool) -> Result<()> {
        for key in &self.section.order {
            if !self.used.contains(&key.as_str()) && !extra(key) {
                let e = &self.section.entries[key];
                return Err(config_err(format!(
                    "line {}: unknown key `{key}` in [{}]",
                    e.line, self.section.name
                )));
            }
        }
        Ok(())
    }
}

/// Accepts plain integers and integral scientific literals such as `1e6`.
fn parse_count(s: &str) -> Option<usize> {
    if let Ok(n) = s.parse::<usize>() {
        return Some(n);
    }
    let v: f64 = s.parse().ok()?;
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= 2f64.powi(53)).then_some(v as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Fixed(f64),
    /// `pilot_factor` times the median floor of `pilot_draws` zero-spread
    /// topologies (or times the floor of an explicit sensor table).
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSection {
    pub w: f64,
    pub d0: Target,
    pub norm: Norm,
    pub pilot_factor: f64,
    pub pilot_draws: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Random network recipe; the topology seed is the problem seed.
    Topology(TopologyParams),
    /// Explicit sensor table, in index order.
    Sensors(NetworkInstance<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub r_values: Vec<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSection {
    pub trials: usize,
    pub noise_kinds: Vec<NoiseKind>,
    /// Defaults to `W/2`.
    pub theta: Option<f64>,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            noise_kinds: vec![NoiseKind::Gaussian, NoiseKind::Uniform],
            theta: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub source: Option<Source>,
    pub sweep: Option<SweepSection>,
    pub validate: ValidateSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn topology(&self) -> Option<&TopologyParams> {
        match &self.source {
            Some(Source::Topology(p)) => Some(p),
            _ => None,
        }
    }

    pub fn sensors(&self) -> Option<&NetworkInstance<f64>> {
        match &self.source {
            Some(Source::Sensors(n)) => Some(n),
            _ => None,
        }
    }
}

const SECTIONS: [&str; 6] = ["problem", "topology", "sensors", "sweep", "validate", "output"];

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc = Document::parse(text)?;
    for s in &doc.sections {
        if !SECTIONS.contains(&s.name.as_str()) {
            return Err(config_err(format!("line {}: unknown section [{}]", s.line, s.name)));
        }
    }
    let problem = parse_problem(doc.section("problem").ok_or_else(|| config_err("missing section: problem"))?)?;
    let source = match (doc.section("topology"), doc.section("sensors")) {
        (Some(t), Some(s)) => {
            return Err(config_err(format!(
                "[topology] (line {}) and [sensors] (line {}) are mutually exclusive",
                t.line, s.line
            )))
        }
        (Some(t), None) => Some(Source::Topology(parse_topology(t, &problem)?)),
        (None, Some(s)) => Some(Source::Sensors(parse_sensors(s, &problem)?)),
        (None, None) => None,
    };
    let sweep = doc.section("sweep").map(parse_sweep).transpose()?;
    let validate = match doc.section("validate") {
        Some(s) => parse_validate(s, problem.w)?,
        None => ValidateSection::default(),
    };
    let output = match doc.section("output") {
        Some(s) => parse_output(s)?,
        None => OutputSection::default(),
    };
    Ok(RunConfig {
        problem,
        source,
        sweep,
        validate,
        output,
    })
}

fn parse_problem(sec: &Section) -> Result<ProblemSection> {
    let mut r = Reader::new(sec);
    let w = r.positive("W", Some(1.0))?;
    let d0 = match r.raw("D0") {
        None => return Err(r.missing("D0")),
        Some(e) if e.value.eq_ignore_ascii_case("auto") => Target::Auto,
        Some(e) => match e.value.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Target::Fixed(v),
            _ => return Err(r.bad("D0", e, "expected a positive number or `auto`")),
        },
    };
    let norm = r.parsed::<Norm>("norm", "expected L1 or L2")?.unwrap_or(Norm::L1);
    let pilot_factor = r.f64_checked("pilot_factor", Some(1.1), |v| v > 1.0, "expected a number above 1")?;
    let pilot_draws = r.count("pilot_draws", Some(1000))?;
    let seed = r.u64("seed", 0)?;
    r.finish(|_| false)?;
    Ok(ProblemSection {
        w,
        d0,
        norm,
        pilot_factor,
        pilot_draws,
        seed,
    })
}

/// `xi2` in watts from one of `xi2_dBm`, `xi2_W`, or a noise density
/// `noise_psd_dBm_per_Hz` integrated over the bandwidth.
fn channel_noise<'a>(r: &mut Reader<'a>, bandwidth: f64, default_dbm: Option<f64>) -> Result<Option<f64>> {
    let dbm = r.f64_opt("xi2_dBm")?;
    let watts = r.f64_opt("xi2_W")?;
    let psd = r.f64_opt("noise_psd_dBm_per_Hz")?;
    let given = [dbm.is_some(), watts.is_some(), psd.is_some()].iter().filter(|&&b| b).count();
    if given > 1 {
        return Err(config_err(format!(
            "[{}] sets more than one of xi2_dBm, xi2_W, noise_psd_dBm_per_Hz",
            r.section.name
        )));
    }
    if let Some(w) = watts {
        if !(w > 0.0) {
            let e = &r.section.entries["xi2_W"];
            return Err(r.bad("xi2_W", e, "expected a positive number"));
        }
        return Ok(Some(w));
    }
    if let Some(p) = psd {
        return Ok(Some(dbm_to_watts(p) * bandwidth));
    }
    Ok(dbm.or(default_dbm).map(dbm_to_watts))
}

fn parse_topology(sec: &Section, problem: &ProblemSection) -> Result<TopologyParams> {
    let mut r = Reader::new(sec);
    let d = TopologyParams::default();
    let k = r.count("K", None)?;
    let r_ratio = r.f64_checked(
        "R",
        Some(0.0),
        |v| (0.0..=MAX_R_RATIO).contains(&v),
        &format!("expected a spread in [0, {MAX_R_RATIO}]"),
    )?;
    let mean_distance = r.positive("mean_distance_m", Some(d.mean_distance))?;
    let g0_db = r.finite("G0_dB", Some(d.g0_db))?;
    let exponent = r.finite("exponent", Some(d.exponent))?;
    let bandwidth = r.positive("B_Hz", Some(d.bandwidth))?;
    let xi2 = channel_noise(&mut r, bandwidth, Some(d.xi2_dbm))?.expect("default noise level");
    let sigma2_min = r.positive("sigma2_min", Some(d.sigma2_min))?;
    let sigma2_max = r.positive("sigma2_max", Some(d.sigma2_max))?;
    if sigma2_min > sigma2_max {
        let e = &sec.entries.get("sigma2_max").or_else(|| sec.entries.get("sigma2_min")).expect("one was set");
        return Err(config_err(format!(
            "line {}: sigma2_min = {sigma2_min} exceeds sigma2_max = {sigma2_max}",
            e.line
        )));
    }
    r.finish(|_| false)?;
    let params = TopologyParams {
        k,
        r_ratio,
        mean_distance,
        g0_db,
        exponent,
        xi2_dbm: 10.0 * xi2.log10() + 30.0,
        sigma2_min,
        sigma2_max,
        w: problem.w,
        bandwidth,
        seed: problem.seed,
    };
    params.validate().map_err(|e| config_err(format!("[topology]: {e}")))?;
    Ok(params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    Sigma2,
    Gain,
    GainDb,
    Distance,
    Xi2,
    Xi2Dbm,
}

impl Column {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "sigma2" => Column::Sigma2,
            "gain" => Column::Gain,
            "gain_dB" => Column::GainDb,
            "distance_m" => Column::Distance,
            "xi2" => Column::Xi2,
            "xi2_dBm" => Column::Xi2Dbm,
            _ => return None,
        })
    }
}

/// Explicit sensors: `columns = sigma2, gain, xi2` followed by rows
/// `1 = 0.01, 1e-3, 1e-12`, `2 = ...` numbered from 1.
fn parse_sensors(sec: &Section, problem: &ProblemSection) -> Result<NetworkInstance<f64>> {
    let mut r = Reader::new(sec);
    let columns_entry = r.raw("columns").ok_or_else(|| r.missing("columns"))?;
    let mut columns = Vec::new();
    for name in columns_entry.value.split(',').map(str::trim) {
        let col = Column::parse(name).ok_or_else(|| {
            config_err(format!(
                "line {}: unknown column `{name}` (expected sigma2, gain, gain_dB, distance_m, xi2, xi2_dBm)",
                columns_entry.line
            ))
        })?;
        if columns.contains(&col) {
            return Err(config_err(format!("line {}: duplicate column `{name}`", columns_entry.line)));
        }
        columns.push(col);
    }
    let has = |c: Column| columns.contains(&c);
    let gain_cols = [Column::Gain, Column::GainDb, Column::Distance].iter().filter(|&&c| has(c)).count();
    if !has(Column::Sigma2) || gain_cols != 1 || (has(Column::Xi2) && has(Column::Xi2Dbm)) {
        return Err(config_err(format!(
            "line {}: columns need sigma2, exactly one of gain, gain_dB, distance_m, and at most one of xi2, xi2_dBm",
            columns_entry.line
        )));
    }
    let g0 = db_to_linear(r.finite("G0_dB", Some(-30.0))?);
    let exponent = r.finite("exponent", Some(3.5))?;
    let bandwidth = r.positive("B_Hz", Some(1.0e4))?;
    let default_xi2 = channel_noise(&mut r, bandwidth, None)?;
    if default_xi2.is_none() && !has(Column::Xi2) && !has(Column::Xi2Dbm) {
        return Err(config_err(format!(
            "[sensors] (line {}) needs an xi2 column or one of xi2_dBm, xi2_W, noise_psd_dBm_per_Hz",
            sec.line
        )));
    }

    let mut sensors = Vec::new();
    for key in &sec.order {
        let Ok(index) = key.parse::<usize>() else { continue };
        let e = &sec.entries[key];
        if index != sensors.len() + 1 {
            return Err(config_err(format!(
                "line {}: sensor row `{key}` out of order (expected {})",
                e.line,
                sensors.len() + 1
            )));
        }
        let fields: Vec<&str> = e.value.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(config_err(format!(
                "line {}: sensor {index} has {} fields, columns list {}",
                e.line,
                fields.len(),
                columns.len()
            )));
        }
        let mut sigma2 = 0.0;
        let mut xi2 = default_xi2.unwrap_or(0.0);
        let mut gain = None;
        let mut distance = None;
        for (&col, field) in columns.iter().zip(&fields) {
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| config_err(format!("line {}: sensor {index}: `{field}` is not a finite number", e.line)))?;
            match col {
                Column::Sigma2 => sigma2 = v,
                Column::Gain => gain = Some(v),
                Column::GainDb => gain = Some(db_to_linear(v)),
                Column::Distance => distance = Some(v),
                Column::Xi2 => xi2 = v,
                Column::Xi2Dbm => xi2 = dbm_to_watts(v),
            }
        }
        let spec = match distance {
            Some(d) => channel_gain(d, g0, exponent).and_then(|g| {
                let mut s = SensorSpec::new(sigma2, g, xi2)?;
                s.distance = Some(d);
                s.validate().map(|_| s)
            }),
            None => SensorSpec::new(sigma2, gain.expect("gain column"), xi2),
        }
        .map_err(|err| config_err(format!("line {}: sensor {index}: {err}", e.line)))?;
        sensors.push(spec);
    }
    r.finish(|k| k.parse::<usize>().is_ok())?;
    if sensors.is_empty() {
        return Err(config_err(format!("[sensors] (line {}) lists no sensor rows", sec.line)));
    }
    NetworkInstance::new(problem.w, sensors, bandwidth).map_err(|e| config_err(format!("[sensors]: {e}")))
}

fn parse_sweep(sec: &Section) -> Result<SweepSection> {
    let mut r = Reader::new(sec);
    let entry = r.raw("r_values").ok_or_else(|| r.missing("r_values"))?;
    let mut r_values = Vec::new();
    for field in entry.value.split(',').map(str::trim) {
        match field.parse::<f64>() {
            Ok(v) if (0.0..=MAX_R_RATIO).contains(&v) => r_values.push(v),
            _ => {
                return Err(config_err(format!(
                    "line {}: key `r_values` in [sweep]: `{field}` is not a spread in [0, {MAX_R_RATIO}]",
                    entry.line
                )))
            }
        }
    }
    let runs = r.count("runs", Some(100))?;
    r.finish(|_| false)?;
    Ok(SweepSection { r_values, runs })
}

fn parse_validate(sec: &Section, w: f64) -> Result<ValidateSection> {
    let mut r = Reader::new(sec);
    let d = ValidateSection::default();
    let trials = r.count("trials", Some(d.trials))?;
    let noise_kinds = match r.string("noise_kind") {
        None | Some("both") => d.noise_kinds,
        Some(s) => match s.parse::<NoiseKind>() {
            Ok(k) => vec![k],
            Err(_) => {
                let e = &sec.entries["noise_kind"];
                return Err(r.bad("noise_kind", e, "expected gaussian, uniform, or both"));
            }
        },
    };
    let theta = r.f64_checked("theta", Some(0.5 * w), |v| v.abs() <= w, "expected |theta| <= W")?;
    r.finish(|_| false)?;
    Ok(ValidateSection {
        trials,
        noise_kinds,
        theta: Some(theta),
    })
}

fn parse_output(sec: &Section) -> Result<OutputSection> {
    let mut r = Reader::new(sec);
    let out = OutputSection {
        csv: r.path("csv")?,
        summary: r.path("summary")?,
        plot: r.path("plot")?,
    };
    r.finish(|_| false)?;
    Ok(out)
}
