//! Scenario files: `[section]` headers, `key = value` entries, `#` comments.
//! Physical keys carry their unit as a suffix (`g_c_2pi_MHz`, `duration_us`),
//! so a value is converted to SI the moment it is read and nothing downstream
//! guesses units.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use hybridq::estimate::constants::{AMU, BOHR, DEBYE};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Angular frequency, stored in rad/s.
    Frequency,
    /// Stored in s.
    Time,
    /// Stored in m.
    Length,
    /// Stored in K.
    Temperature,
    /// Stored in m⁻³.
    Density,
    /// Stored in C·m.
    Dipole,
    /// Stored in kg.
    Mass,
}

impl Family {
    fn units(self) -> &'static [(&'static str, f64)] {
        const TWO_PI: f64 = 2.0 * PI;
        match self {
            Family::Frequency => &[("per_s", 1.0), ("per_us", 1e6), ("2pi_Hz", TWO_PI), ("2pi_kHz", TWO_PI * 1e3), ("2pi_MHz", TWO_PI * 1e6), ("2pi_GHz", TWO_PI * 1e9)],
            Family::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9)],
            Family::Length => &[("m", 1.0), ("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6), ("nm", 1e-9), ("bohr", BOHR)],
            Family::Temperature => &[("K", 1.0), ("mK", 1e-3), ("uK", 1e-6), ("nK", 1e-9)],
            Family::Density => &[("per_cm3", 1e6), ("per_m3", 1.0)],
            Family::Dipole => &[("Debye", DEBYE)],
            Family::Mass => &[("amu", AMU), ("kg", 1.0)],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Family::Frequency => "a frequency",
            Family::Time => "a time",
            Family::Length => "a length",
            Family::Temperature => "a temperature",
            Family::Density => "a number density",
            Family::Dipole => "a dipole moment",
            Family::Mass => "a mass",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Quantity(Family),
    Number,
    Int,
    Bool,
    Text,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: Value,
    pub line: usize,
}

type Schema = &'static [(&'static str, Kind)];

const FREQ: Kind = Kind::Quantity(Family::Frequency);
const TIME: Kind = Kind::Quantity(Family::Time);
const LEN: Kind = Kind::Quantity(Family::Length);

const SYSTEM: Schema = &[("title", Kind::Text), ("cavity_levels", Kind::Int), ("ensemble_levels", Kind::Int), ("seed", Kind::Int)];
const CAVITY: Schema = &[("kappa", FREQ), ("frequency", FREQ), ("electrode_distance", LEN), ("length", LEN)];
const CPB: Schema = &[("g_c", FREQ), ("detuning", FREQ), ("gamma_phi", FREQ), ("gamma_1", FREQ)];
const ENSEMBLE: Schema = &[("g_m", FREQ), ("detuning", FREQ)];
const PULSES: Schema = &[
    ("delta0", FREQ),
    ("delta1", FREQ),
    ("duration", TIME),
    ("branch", Kind::Int),
    ("calibrate", Kind::Bool),
    ("sweep_range", FREQ),
    ("sweep_duration", TIME),
    ("sweep_shape", Kind::Text),
    ("sweep_steepness", Kind::Number),
];
const SIMULATION: Schema = &[
    ("duration", TIME),
    ("samples", Kind::Int),
    ("method", Kind::Text),
    ("rk4_step", TIME),
    ("rel_tol", Kind::Number),
    ("abs_tol", Kind::Number),
    ("cpb_schedule", Kind::Text),
    ("initial_cavity", Kind::Int),
    ("initial_ensemble_1", Kind::Int),
    ("initial_ensemble_2", Kind::Int),
    ("initial_cpb", Kind::Text),
    ("dephasing_min", Kind::Number),
    ("dephasing_max", Kind::Number),
    ("dephasing_points", Kind::Int),
];
const ESTIMATE: Schema = &[
    ("molecule", Kind::Text),
    ("density", Kind::Quantity(Family::Density)),
    ("temperature", Kind::Quantity(Family::Temperature)),
    ("trap_frequency", FREQ),
    ("trap_mismatch", Kind::Number),
    ("alpha", Kind::Number),
    ("molecule_count", Kind::Number),
    ("raman_ratio", Kind::Number),
    ("collective_coupling", FREQ),
    ("scattering_length", LEN),
    ("a00", LEN),
    ("a01", LEN),
    ("mc_samples", Kind::Int),
];
const MOLECULE: Schema = &[
    ("name", Kind::Text),
    ("dipole", Kind::Quantity(Family::Dipole)),
    ("rotational", FREQ),
    ("spin_rotation", FREQ),
    ("hyperfine", FREQ),
    ("mass", Kind::Quantity(Family::Mass)),
    ("nuclear_spin", Kind::Number),
];

pub const SECTIONS: [&str; 9] = ["system", "cavity", "cpb", "ensemble.1", "ensemble.2", "pulses", "simulation", "estimate", "molecule"];

fn schema(section: &str) -> Option<Schema> {
    Some(match section {
        "system" => SYSTEM,
        "cavity" => CAVITY,
        "cpb" => CPB,
        "ensemble.1" | "ensemble.2" => ENSEMBLE,
        "pulses" => PULSES,
        "simulation" => SIMULATION,
        "estimate" => ESTIMATE,
        "molecule" => MOLECULE,
        _ => return None,
    })
}

fn kind_of(section: &str, stem: &str) -> Option<Kind> {
    schema(section)?.iter().find(|(s, _)| *s == stem).map(|(_, k)| *k)
}

/// How a key is written, for messages: `g_c_<unit>` or `seed`.
fn key_pattern(stem: &str, kind: Kind) -> String {
    match kind {
        Kind::Quantity(_) => format!("{stem}_<unit>"),
        _ => stem.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError { line: Some(line), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Gate,
    Calibrate,
    Estimate,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Gate => "gate",
            Command::Calibrate => "calibrate",
            Command::Estimate => "estimate",
            Command::Sweep => "sweep",
        }
    }
}

/// Parsed scenario. Values are stored in SI (frequencies as rad/s).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scenario {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
}

impl Scenario {
    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    pub fn entry(&self, section: &str, stem: &str) -> Option<&Entry> {
        self.sections.get(section)?.1.get(stem)
    }

    pub fn float(&self, section: &str, stem: &str) -> Option<f64> {
        match self.entry(section, stem)?.value {
            Value::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn int(&self, section: &str, stem: &str) -> Option<i64> {
        match self.entry(section, stem)?.value {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn bool(&self, section: &str, stem: &str) -> Option<bool> {
        match self.entry(section, stem)?.value {
            Value::Bool(v) => Some(v),
            _ => None,
        }
    }

    pub fn text(&self, section: &str, stem: &str) -> Option<&str> {
        match &self.entry(section, stem)?.value {
            Value::Text(v) => Some(v),
            _ => None,
        }
    }

    pub fn set_int(&mut self, section: &str, stem: &str, v: i64) {
        let sec = self.sections.entry(section.to_string()).or_insert((0, BTreeMap::new()));
        sec.1.insert(stem.to_string(), Entry { key: stem.to_string(), value: Value::Int(v), line: 0 });
    }

    /// Sections and keys a command cannot run without, all reported at once.
    pub fn check_for(&self, cmd: Command) -> Vec<ParseError> {
        let mut need: Vec<(&str, Vec<&str>)> = match cmd {
            Command::Simulate => vec![("cpb", vec!["g_c"]), ("simulation", vec![])],
            Command::Gate => vec![
                ("cpb", vec!["g_c"]),
                ("ensemble.1", vec!["g_m"]),
                ("ensemble.2", vec!["g_m"]),
                ("pulses", vec!["delta0"]),
            ],
            Command::Calibrate => vec![("cpb", vec!["g_c"]), ("pulses", vec!["delta0"])],
            Command::Estimate => vec![
                ("cavity", vec!["kappa", "frequency", "electrode_distance", "length"]),
                ("estimate", vec!["density", "temperature", "trap_frequency", "trap_mismatch", "alpha"]),
            ],
            Command::Sweep => vec![
                ("cpb", vec!["g_c"]),
                ("ensemble.1", vec!["g_m"]),
                ("ensemble.2", vec!["g_m"]),
                ("pulses", vec!["delta0"]),
                ("simulation", vec!["dephasing_min", "dephasing_max", "dephasing_points"]),
            ],
        };
        if matches!(cmd, Command::Gate | Command::Sweep) && self.bool("pulses", "calibrate") == Some(false) {
            need[3].1.extend(["delta1", "duration"]);
        }
        if cmd == Command::Simulate && self.text("simulation", "cpb_schedule") != Some("quadratic") {
            need[1].1.push("duration");
        }
        if cmd == Command::Simulate && self.text("simulation", "cpb_schedule") == Some("quadratic") {
            need.push(("pulses", vec!["delta0", "delta1", "duration"]));
        }
        let mut errors = Vec::new();
        for (section, keys) in need {
            if !self.has_section(section) {
                errors.push(ParseError { line: None, message: format!("missing required section [{section}]") });
                continue;
            }
            for stem in keys {
                if self.entry(section, stem).is_none() {
                    let kind = kind_of(section, stem).expect("schema key");
                    errors.push(ParseError {
                        line: None,
                        message: format!("missing required key `{}` in [{section}]", key_pattern(stem, kind)),
                    });
                }
            }
        }
        if cmd == Command::Estimate {
            if self.text("estimate", "molecule").is_none() && !self.has_section("molecule") {
                errors.push(ParseError {
                    line: None,
                    message: "missing required key `molecule` in [estimate] (or an inline [molecule] section)".into(),
                });
            }
            if self.int("estimate", "mc_samples").is_some_and(|n| n > 0) && self.int("system", "seed").is_none() {
                errors.push(ParseError { line: None, message: "Monte Carlo requested: `seed` in [system] is required".into() });
            }
        }
        errors
    }
}

fn parse_value(raw: &str, kind: Kind, factor: f64, line: usize, key: &str) -> Result<Value, ParseError> {
    let bad = |what: &str| err(line, format!("`{key}`: expected {what}, got `{raw}`"));
    Ok(match kind {
        Kind::Quantity(_) | Kind::Number => {
            let v: f64 = raw.parse().map_err(|_| bad("a number"))?;
            if !v.is_finite() {
                return Err(bad("a finite number"));
            }
            // Dividing by an exact power of ten rounds once.
            let inv = (1.0 / factor).round();
            Value::Float(if factor < 1.0 && (inv * factor - 1.0).abs() < 1e-15 { v / inv } else { v * factor })
        }
        Kind::Int => Value::Int(raw.parse().map_err(|_| bad("an integer"))?),
        Kind::Bool => match raw {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            _ => return Err(bad("true or false")),
        },
        Kind::Text => {
            let t = raw.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(raw);
            if t.is_empty() {
                return Err(bad("a non-empty string"));
            }
            Value::Text(t.to_string())
        }
    })
}

/// Resolves `key` against the section schema: the stem, its kind and the
/// SI conversion factor.
fn resolve(section: &str, key: &str, line: usize) -> Result<(&'static str, Kind, f64), ParseError> {
    let schema = schema(section).expect("known section");
    let mut best: Option<(&'static str, Kind)> = None;
    for &(stem, kind) in schema {
        let hit = key == stem || key.strip_prefix(stem).is_some_and(|r| r.starts_with('_'));
        if hit && best.is_none_or(|(b, _)| stem.len() > b.len()) {
            best = Some((stem, kind));
        }
    }
    let Some((stem, kind)) = best else {
        return Err(err(line, format!("unknown key `{key}` in [{section}]")));
    };
    let suffix = key.strip_prefix(stem).and_then(|r| r.strip_prefix('_'));
    match (kind, suffix) {
        (Kind::Quantity(fam), Some(s)) => match fam.units().iter().find(|(u, _)| *u == s) {
            Some(&(_, f)) => Ok((stem, kind, f)),
            None => Err(err(line, unit_message(key, stem, fam))),
        },
        (Kind::Quantity(fam), None) => Err(err(line, unit_message(key, stem, fam))),
        (_, None) => Ok((stem, kind, 1.0)),
        (_, Some(_)) if schema.iter().any(|(s, _)| *s == key) => Ok((stem, kind, 1.0)),
        (_, Some(_)) => {
            // a unitless stem followed by something that is not another key
            if matches!(kind, Kind::Number) {
                Err(err(line, format!("unit mismatch: `{key}`: `{stem}` is dimensionless and takes no unit suffix")))
            } else {
                Err(err(line, format!("unknown key `{key}` in [{section}]")))
            }
        }
    }
}

fn unit_message(key: &str, stem: &str, fam: Family) -> String {
    let units: Vec<&str> = fam.units().iter().map(|(u, _)| *u).collect();
    format!("unit mismatch: `{key}`: `{stem}` is {} ({})", fam.name(), units.join(", "))
}

/// Parses a scenario, collecting every syntax, key and unit error.
pub fn parse_scenario(text: &str) -> Result<Scenario, Vec<ParseError>> {
    let mut sc = Scenario::default();
    let mut errors = Vec::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']').map(str::trim) else {
                errors.push(err(line, format!("malformed section header `{content}`")));
                current = None;
                continue;
            };
            if schema(name).is_none() {
                errors.push(err(line, format!("unknown section [{name}]")));
                current = None;
                continue;
            }
            if let Some((first, _)) = sc.sections.get(name) {
                errors.push(err(line, format!("duplicate section [{name}] (first at line {first})")));
            } else {
                sc.sections.insert(name.to_string(), (line, BTreeMap::new()));
            }
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(err(line, format!("expected `key = value`, got `{content}`")));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            errors.push(err(line, format!("malformed key `{key}`")));
            continue;
        }
        let Some(section) = current.clone() else {
            errors.push(err(line, format!("`{key}` appears before any section header")));
            continue;
        };
        let (stem, kind, factor) = match resolve(&section, key, line) {
            Ok(r) => r,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let value = match parse_value(value, kind, factor, line, key) {
            Ok(v) => v,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let entries = &mut sc.sections.get_mut(&section).expect("inserted").1;
        if let Some(prev) = entries.get(stem) {
            errors.push(err(
                line,
                format!("duplicate key `{stem}` in [{section}]: lines {} and {line}", prev.line),
            ));
            continue;
        }
        entries.insert(stem.to_string(), Entry { key: key.to_string(), value, line });
    }
    if errors.is_empty() {
        Ok(sc)
    } else {
        Err(errors)
    }
}

/// Parses and checks the requirements of `cmd` in one pass.
pub fn parse_for(text: &str, cmd: Command) -> Result<Scenario, Vec<ParseError>> {
    let sc = parse_scenario(text)?;
    let errors = sc.check_for(cmd);
    if errors.is_empty() {
        Ok(sc)
    } else {
        Err(errors)
    }
}
