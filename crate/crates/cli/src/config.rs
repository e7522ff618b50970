//! Run configuration: a TOML key-value file, either given directly or
//! picked from the preset directory.

use std::fmt;
use std::path::{Path, PathBuf};

use rydcirc_core::atomic::lifetime;
use rydcirc_core::blockade::{blockade_shift_in, Orientation, PairGeometry, DEFAULT_EXCLUSION_RADIUS};
use rydcirc_core::constants::CS_CLOCK_RAD;
use rydcirc_core::error_model::{optimal_rabi, GateParams};
use serde::Serialize;
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

fn serialize_lifetime<S: serde::Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(t) if t.is_infinite() => s.serialize_str("inf"),
        Some(t) => s.serialize_f64(*t),
        None => s.serialize_none(),
    }
}

/// One gate realization. Lengths in metres, rates in rad/s, lifetimes in
/// seconds, temperatures in kelvin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Informational label of the atomic species.
    pub species: String,
    pub n: u32,
    pub temperature: f64,
    pub separation: f64,
    pub omega_10: f64,
    /// Rabi frequency; the optimum for the blockade and lifetime when absent.
    pub omega: Option<f64>,
    /// Replaces the computed blockade shift.
    pub blockade: Option<f64>,
    /// Replaces the computed lifetime; `inf` switches decay off and is
    /// serialized as the string `"inf"`.
    #[serde(serialize_with = "serialize_lifetime")]
    pub lifetime: Option<f64>,
    pub exclusion_radius: f64,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
    pub seed: u64,
    /// Enables finite-shot sampling of the tomography data.
    pub shots: Option<u64>,
}

const KEYS: [&str; 13] = [
    "species",
    "n",
    "temperature",
    "separation",
    "omega_10",
    "omega",
    "blockade",
    "lifetime",
    "exclusion_radius",
    "format",
    "output",
    "seed",
    "shots",
];

/// Collects every problem in a table instead of stopping at the first.
struct Reader<'a> {
    table: &'a Table,
    problems: Vec<String>,
}

impl Reader<'_> {
    fn float(&mut self, key: &str) -> Option<f64> {
        match self.table.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.problems
                    .push(format!("`{key}` must be a number, found {}", other.type_str()));
                None
            }
        }
    }

    fn integer(&mut self, key: &str) -> Option<i64> {
        match self.table.get(key)? {
            Value::Integer(i) => Some(*i),
            other => {
                self.problems
                    .push(format!("`{key}` must be an integer, found {}", other.type_str()));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.table.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.problems
                    .push(format!("`{key}` must be a string, found {}", other.type_str()));
                None
            }
        }
    }

    fn require<T>(&mut self, key: &str, value: Option<T>) -> Option<T> {
        if value.is_none() && !self.table.contains_key(key) {
            self.problems.push(format!("`{key}` is required"));
        }
        value
    }

    fn check(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.problems.push(message());
        }
    }
}

fn positive_finite(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl RunConfig {
    /// Parses and validates a configuration, reporting all problems at once.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Validation(vec![e.message().to_string()]))?;
        let mut r = Reader {
            table: &table,
            problems: Vec::new(),
        };
        for key in table.keys() {
            if !KEYS.contains(&key.as_str()) {
                r.problems.push(format!("unknown key `{key}`"));
            }
        }

        let species = r.string("species").unwrap_or_else(|| "133Cs".to_string());
        let n = r.integer("n");
        let n = r.require("n", n);
        let temperature = r.float("temperature");
        let temperature = r.require("temperature", temperature);
        let separation = r.float("separation");
        let separation = r.require("separation", separation);
        let omega_10 = r.float("omega_10").unwrap_or(CS_CLOCK_RAD);
        let omega = r.float("omega");
        let blockade = r.float("blockade");
        let lifetime = r.float("lifetime");
        let exclusion_radius = r.float("exclusion_radius").unwrap_or(DEFAULT_EXCLUSION_RADIUS);
        let format = match r.string("format").as_deref() {
            None | Some("json") => OutputFormat::Json,
            Some("csv") => OutputFormat::Csv,
            Some(other) => {
                r.problems
                    .push(format!("`format` must be \"csv\" or \"json\", found \"{other}\""));
                OutputFormat::Json
            }
        };
        let output = r.string("output").map(PathBuf::from);
        let seed = r.integer("seed");
        let shots = r.integer("shots");

        if let Some(n) = n {
            r.check(n >= 2 && n <= i64::from(u32::MAX), || {
                format!("`n` must be an integer of at least 2, found {n}")
            });
        }
        if let Some(t) = temperature {
            r.check(t >= 0.0 && t.is_finite(), || {
                format!("`temperature` must be finite and non-negative, found {t}")
            });
        }
        if let Some(s) = separation {
            r.check(positive_finite(s), || {
                format!("`separation` must be positive and finite, found {s}")
            });
        }
        r.check(positive_finite(omega_10), || {
            format!("`omega_10` must be positive and finite, found {omega_10}")
        });
        r.check(positive_finite(exclusion_radius), || {
            format!("`exclusion_radius` must be positive and finite, found {exclusion_radius}")
        });
        for (key, value) in [("omega", omega), ("blockade", blockade)] {
            if let Some(v) = value {
                r.check(positive_finite(v), || {
                    format!("`{key}` must be positive and finite, found {v}")
                });
            }
        }
        if let Some(tau) = lifetime {
            r.check(tau > 0.0, || format!("`lifetime` must be positive, found {tau}"));
        }
        if let Some(seed) = seed {
            r.check(seed >= 0, || format!("`seed` must be non-negative, found {seed}"));
        }
        if let Some(shots) = shots {
            r.check(shots >= 1, || format!("`shots` must be at least 1, found {shots}"));
        }

        if !r.problems.is_empty() {
            return Err(CliError::Validation(r.problems));
        }
        Ok(RunConfig {
            species,
            n: n.expect("validated") as u32,
            temperature: temperature.expect("validated"),
            separation: separation.expect("validated"),
            omega_10,
            omega,
            blockade,
            lifetime,
            exclusion_radius,
            format,
            output,
            seed: seed.unwrap_or(0) as u64,
            shots: shots.map(|s| s as u64),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Validation(problems) => CliError::Validation(
                problems
                    .into_iter()
                    .map(|p| format!("{}: {p}", path.display()))
                    .collect(),
            ),
            other => other,
        })
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let dir = presets_dir();
        let path = dir.join(format!("{name}.toml"));
        if !path.is_file() {
            let mut available = preset_names(&dir);
            available.sort();
            return Err(CliError::Validation(vec![format!(
                "unknown preset `{name}` (available: {})",
                available.join(", ")
            )]));
        }
        Self::from_file(&path)
    }

    /// Physical parameters of the gate described by this configuration.
    pub fn resolve(&self) -> Result<ResolvedParams, CliError> {
        let geometry = PairGeometry::new(self.separation, Orientation::Parallel)?
            .with_exclusion_radius(self.exclusion_radius);
        let computed = blockade_shift_in(self.n, &geometry)?;
        let blockade = self.blockade.unwrap_or(computed.blockade_shift);
        let tau = match self.lifetime {
            Some(tau) => tau,
            None => lifetime(self.n, self.temperature)?,
        };
        let omega = match self.omega {
            Some(w) => w,
            None if tau.is_finite() => optimal_rabi(blockade, tau)?,
            None => {
                return Err(CliError::Validation(vec![
                    "`omega` is required when the lifetime is infinite".into(),
                ]))
            }
        };
        let params = GateParams::new(omega, self.omega_10, blockade, tau)?;
        Ok(ResolvedParams {
            params,
            overlap_warning: geometry.overlap_warning(),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ResolvedParams {
    pub params: GateParams,
    pub overlap_warning: bool,
}

/// Root of the shipped data files; `RYDCIRC_DATA_DIR` overrides it.
pub fn data_dir() -> PathBuf {
    std::env::var_os("RYDCIRC_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")))
}

pub fn presets_dir() -> PathBuf {
    data_dir().join("presets")
}

fn preset_names(dir: &Path) -> Vec<String> {
    std::fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok())
                .filter_map(|e| {
                    let path = e.path();
                    (path.extension()? == "toml").then(|| path.file_stem()?.to_str().map(String::from))?
                })
                .collect()
        })
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "n = 110\ntemperature = 0\nseparation = 2e-6\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.n, 110);
        assert_eq!(c.omega_10, CS_CLOCK_RAD);
        assert_eq!(c.exclusion_radius, DEFAULT_EXCLUSION_RADIUS);
        assert_eq!(c.format, OutputFormat::Json);
        assert_eq!(c.shots, None);
    }

    #[test]
    fn all_problems_are_listed() {
        let text = "n = 1\ntemperature = -3\nseparation = 0\ncolour = \"red\"\nformat = \"xml\"\n";
        let Err(CliError::Validation(problems)) = RunConfig::from_toml(text) else {
            panic!("expected validation failure");
        };
        assert_eq!(problems.len(), 5, "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("unknown key `colour`")));
        assert!(problems.iter().any(|p| p.contains("`n`")));
        assert!(problems.iter().any(|p| p.contains("`temperature`")));
        assert!(problems.iter().any(|p| p.contains("`separation`")));
        assert!(problems.iter().any(|p| p.contains("`format`")));
    }

    #[test]
    fn missing_and_mistyped_keys() {
        let Err(CliError::Validation(problems)) = RunConfig::from_toml("n = \"ten\"\n") else {
            panic!("expected validation failure");
        };
        assert!(problems.iter().any(|p| p.contains("`n` must be an integer")));
        assert!(problems.iter().any(|p| p.contains("`temperature` is required")));
        assert!(problems.iter().any(|p| p.contains("`separation` is required")));
    }

    #[test]
    fn infinite_lifetime_needs_explicit_rabi_frequency() {
        let c = RunConfig::from_toml(&format!("{MINIMAL}lifetime = inf\n")).unwrap();
        assert!(matches!(c.resolve(), Err(CliError::Validation(_))));
        let c = RunConfig::from_toml(&format!("{MINIMAL}lifetime = inf\nomega = 1e6\n")).unwrap();
        let p = c.resolve().unwrap().params;
        assert_eq!(p.gamma_r(), 0.0);
    }

    #[test]
    fn resolves_optimal_rabi_frequency() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        let r = c.resolve().unwrap();
        let mhz = r.params.omega / (2.0 * std::f64::consts::PI) / 1e6;
        assert!((mhz / 5.6 - 1.0).abs() < 0.02);
        assert!(!r.overlap_warning);
    }

    #[test]
    fn shipped_presets_are_valid() {
        let names = preset_names(&presets_dir());
        for name in ["cs80-0K", "cs100-0K", "cs110-0K", "cs110-77K", "cs110-300K", "ideal"] {
            assert!(names.iter().any(|n| n == name), "missing preset {name}");
        }
        for name in names {
            let c = RunConfig::preset(&name).unwrap();
            c.resolve().unwrap();
        }
        assert!(matches!(RunConfig::preset("nope"), Err(CliError::Validation(_))));
    }
}
