//! Scenario settings: named defaults, `key = value` files and flag overrides.

use std::fmt;
use std::path::Path;

use amspace::Space;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    #[serde(rename = "example-5-1")]
    Example51,
    #[serde(rename = "periodic-5-2")]
    Periodic52,
    #[serde(rename = "counterexample-5-3")]
    Counterexample53,
    SplitDemo,
    Custom,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::Example51,
        ScenarioName::Periodic52,
        ScenarioName::Counterexample53,
        ScenarioName::SplitDemo,
        ScenarioName::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Example51 => "example-5-1",
            ScenarioName::Periodic52 => "periodic-5-2",
            ScenarioName::Counterexample53 => "counterexample-5-3",
            ScenarioName::SplitDemo => "split-demo",
            ScenarioName::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fully resolved settings of one run. Function-valued fields are formula
/// strings, see [`crate::formula`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub scenario: ScenarioName,
    pub space: Space,
    pub n_cells: usize,
    pub dt: f64,
    /// λ at which the Desch quantities are evaluated.
    pub lambda: f64,
    /// Rescaling for the Dyson–Phillips run; chosen automatically if absent.
    pub lambda_shift: Option<f64>,
    pub tol: f64,
    pub max_terms: usize,
    pub horizon: f64,
    pub output_times: Vec<f64>,
    pub probes: Vec<f64>,
    pub u0: String,
    pub direction: String,
    pub sweep: Vec<f64>,
    pub evolve: bool,
    pub basis_size: usize,
    pub seed: u64,
}

impl Settings {
    pub fn defaults(scenario: ScenarioName) -> Self {
        let base = Settings {
            scenario,
            space: Space::Shift,
            n_cells: 400,
            dt: 1e-3,
            lambda: 1.0,
            lambda_shift: None,
            tol: 1e-8,
            max_terms: amspace::dyson_phillips::DEFAULT_MAX_TERMS,
            horizon: 1.0,
            output_times: vec![0.5, 1.0],
            probes: vec![0.0, 0.25, 0.5, 0.75],
            u0: "one-minus-x".into(),
            direction: "constant:1".into(),
            sweep: vec![0.5, 1.0, 2.0, 5.0],
            evolve: true,
            basis_size: 20,
            seed: 20,
        };
        match scenario {
            ScenarioName::Example51 => Settings {
                n_cells: 2000,
                dt: 2.5e-4,
                lambda_shift: Some(1.0),
                horizon: 0.9,
                output_times: vec![0.25, 0.5, 0.9],
                ..base
            },
            ScenarioName::Periodic52 => Settings {
                space: Space::Periodic,
                lambda: 2.0,
                output_times: vec![0.25, 0.5, 1.0],
                u0: "periodic-sine".into(),
                direction: "cosine:0.5".into(),
                sweep: vec![1.0, 2.0, 4.0, 8.0],
                ..base
            },
            ScenarioName::Counterexample53 => Settings {
                n_cells: 1000,
                lambda: 0.0,
                direction: "step".into(),
                sweep: vec![0.0, 0.5, 1.0, 2.0],
                evolve: false,
                ..base
            },
            ScenarioName::SplitDemo => Settings {
                lambda: 0.0,
                horizon: 0.5,
                output_times: vec![0.25, 0.5],
                direction: "indicator:0:0.25:8".into(),
                sweep: vec![0.0, 1.0, 4.0, 16.0],
                ..base
            },
            ScenarioName::Custom => base,
        }
    }

    /// Sets one key from its textual value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?} as a number"))
        }
        fn list(key: &str, v: &str) -> Result<Vec<f64>, String> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| num(key, s))
                .collect()
        }
        match key {
            "scenario" => {
                self.scenario = ScenarioName::parse(value).ok_or_else(|| format!("unknown scenario {value:?}"))?
            }
            "space" => {
                self.space = match value {
                    "shift" => Space::Shift,
                    "periodic" => Space::Periodic,
                    _ => return Err(format!("space must be shift or periodic, got {value:?}")),
                }
            }
            "n_cells" => self.n_cells = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "lambda_shift" => self.lambda_shift = if value == "auto" { None } else { Some(num(key, value)?) },
            "tol" => self.tol = num(key, value)?,
            "max_terms" => self.max_terms = num(key, value)?,
            "horizon" => self.horizon = num(key, value)?,
            "output_times" => self.output_times = list(key, value)?,
            "probes" => self.probes = list(key, value)?,
            "u0" => self.u0 = value.to_string(),
            "direction" => self.direction = value.to_string(),
            "sweep" => self.sweep = list(key, value)?,
            "evolve" => {
                self.evolve = value
                    .parse()
                    .map_err(|_| format!("evolve must be true or false, got {value:?}"))?
            }
            "basis_size" => self.basis_size = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive and finite, got {v}"))
            }
        };
        if self.n_cells < 2 {
            return Err("n_cells must be at least 2".into());
        }
        positive("dt", self.dt)?;
        positive("tol", self.tol)?;
        positive("horizon", self.horizon)?;
        if !self.lambda.is_finite() {
            return Err("lambda must be finite".into());
        }
        if let Some(l) = self.lambda_shift {
            if !l.is_finite() {
                return Err("lambda_shift must be finite".into());
            }
        }
        if self.max_terms == 0 {
            return Err("max_terms must be at least 1".into());
        }
        if let Some(t) = self.output_times.iter().find(|&&t| !(0.0..=self.horizon).contains(&t)) {
            return Err(format!("output time {t} outside [0, {}]", self.horizon));
        }
        if let Some(x) = self.probes.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(format!("probe {x} outside [0, 1]"));
        }
        if self.sweep.iter().any(|l| !l.is_finite()) {
            return Err("sweep values must be finite".into());
        }
        Ok(())
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        pairs.push((k.to_string(), v.to_string()));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n_cells: Option<usize>,
    pub dt: Option<f64>,
    pub lambda: Option<f64>,
    pub tol: Option<f64>,
}

/// Resolves a scenario name or config path into settings, with precedence
/// flags > file > scenario defaults.
pub fn resolve(target: &str, overrides: &Overrides) -> Result<Settings, CliError> {
    let mut settings = match ScenarioName::parse(target) {
        Some(name) => Settings::defaults(name),
        None => {
            let path = Path::new(target);
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!(
                    "{target:?} is neither a scenario name nor a readable config: {e}"
                ))
            })?;
            let pairs = parse_config_text(&text).map_err(CliError::Config)?;
            let scenario = match pairs.iter().rev().find(|(k, _)| k == "scenario") {
                Some((_, v)) => {
                    ScenarioName::parse(v).ok_or_else(|| CliError::Config(format!("unknown scenario {v:?}")))?
                }
                None => ScenarioName::Custom,
            };
            let mut s = Settings::defaults(scenario);
            for (k, v) in &pairs {
                s.apply(k, v).map_err(CliError::Config)?;
            }
            s
        }
    };
    if let Some(n) = overrides.n_cells {
        settings.n_cells = n;
    }
    if let Some(dt) = overrides.dt {
        settings.dt = dt;
    }
    if let Some(l) = overrides.lambda {
        settings.lambda = l;
    }
    if let Some(t) = overrides.tol {
        settings.tol = t;
    }
    settings.validate().map_err(CliError::Config)?;
    Ok(settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_round_trip() {
        for n in ScenarioName::ALL {
            assert_eq!(ScenarioName::parse(n.as_str()), Some(n));
            let json = serde_json::to_string(&n).unwrap();
            assert_eq!(json, format!("\"{}\"", n.as_str()));
        }
        assert_eq!(ScenarioName::parse("example-5-2"), None);
    }

    #[test]
    fn parses_comments_and_blank_lines() {
        let pairs = parse_config_text("# header\n\nn_cells = 100 # inline\n dt=0.01\n").unwrap();
        assert_eq!(
            pairs,
            vec![("n_cells".into(), "100".into()), ("dt".into(), "0.01".into())]
        );
        assert!(parse_config_text("n_cells 100").is_err());
        assert!(parse_config_text(" = 3").is_err());
    }

    #[test]
    fn apply_and_validate() {
        let mut s = Settings::defaults(ScenarioName::Custom);
        s.apply("output_times", "0.1, 0.2").unwrap();
        s.apply("lambda_shift", "auto").unwrap();
        s.apply("space", "periodic").unwrap();
        assert_eq!(s.output_times, vec![0.1, 0.2]);
        assert_eq!(s.lambda_shift, None);
        assert!(s.apply("dt", "fast").is_err());
        assert!(s.apply("colour", "red").is_err());
        s.dt = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("amspace-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "scenario = split-demo\nn_cells = 200\ndt = 0.002\n").unwrap();
        let o = Overrides {
            dt: Some(0.005),
            ..Default::default()
        };
        let s = resolve(path.to_str().unwrap(), &o).unwrap();
        assert_eq!(s.scenario, ScenarioName::SplitDemo);
        assert_eq!(s.n_cells, 200);
        assert_eq!(s.dt, 0.005);
        assert_eq!(s.horizon, 0.5);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
