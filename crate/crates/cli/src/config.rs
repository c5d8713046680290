//! Flat `key = value` configuration.
//!
//! Values come from three layers, later ones winning: built-in defaults, an
//! optional config file and command-line flags. A file is either plain text
//! (one `key = value` per line, `#` starts a comment) or the JSON manifest of
//! an earlier run, whose `config` map is reused verbatim.
//!
//! Scalar parameters accept comma-separated lists, and every list item may be
//! an inclusive range `start:step:stop`.

use std::collections::BTreeMap;
use std::path::Path;

use csbm_gcn::experiments::Param;
use csbm_gcn::{CsbmConfig, Ensemble, GraphFilter, RidgeConvention};

use crate::error::{CliError, CliResult};

/// Every accepted key, in the order used when writing manifests.
pub const KEYS: &[&str] = &[
    "n",
    "gamma",
    "lambda",
    "mu",
    "d",
    "tau",
    "r",
    "ensemble",
    "seed",
    "trials",
    "filter",
    "ridge_convention",
    "parallel",
    "n_list",
    "c_grid",
    "c",
    "band",
    "with_theory",
];

/// Defaults: `N = 5000`, `gamma = 5`, `lambda = mu = 1`, `d = 30`,
/// `tau = 0.8`, `r = 1e-5`, binary symmetric ensemble, seed 0.
pub fn default_config() -> CsbmConfig {
    CsbmConfig::new(5000, 5.0)
}

/// Unresolved key/value pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl RawConfig {
    /// Reads a plain-text config or a JSON run manifest.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config file {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_manifest_json(&text)
        } else {
            Self::parse_text(&text)
        }
    }

    /// Parses `key = value` lines.
    pub fn parse_text(text: &str) -> CliResult<Self> {
        let mut raw = RawConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("config line {}: expected 'key = value', got '{line}'", lineno + 1))
            })?;
            raw.set(key, value.trim())?;
        }
        Ok(raw)
    }

    fn from_manifest_json(text: &str) -> CliResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::config(format!("manifest is not valid JSON: {e}")))?;
        let config = value
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| CliError::config("manifest has no 'config' object"))?;
        let mut raw = RawConfig::default();
        for (k, v) in config {
            let v = v
                .as_str()
                .ok_or_else(|| CliError::config(format!("manifest value of '{k}' is not a string")))?;
            raw.set(k, v)?;
        }
        Ok(raw)
    }

    /// Sets `key`; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let key = normalize_key(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::config(format!(
                "unknown config key '{key}' (accepted: {})",
                KEYS.join(", ")
            )));
        }
        self.entries.insert(key, value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Applies `other` on top of `self`.
    pub fn merge(&mut self, other: &RawConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }
}

/// Fully parsed configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    /// Base configuration (first value of every list).
    pub base: CsbmConfig,
    /// Parameters given as lists of more than one value, in table column order.
    pub grids: Vec<(Param, Vec<f64>)>,
    pub trials: Option<usize>,
    pub filter: Option<GraphFilter>,
    pub convention: RidgeConvention,
    pub parallel: bool,
    pub n_list: Option<Vec<usize>>,
    pub c_grid: Option<Vec<f64>>,
    pub c: Option<f64>,
    pub band: Option<(usize, usize)>,
    pub with_theory: bool,
    /// The entries the configuration was resolved from, defaults included.
    pub entries: BTreeMap<String, String>,
}

impl Resolved {
    /// Fails unless every parameter has a single value.
    pub fn require_single_point(&self, command: &str) -> CliResult<()> {
        match self.grids.first() {
            None => Ok(()),
            Some((p, _)) => Err(CliError::config(format!(
                "'{command}' runs a single point; '{p}' has several values (use 'sweep')"
            ))),
        }
    }

    /// Values of a parameter: its grid if any, else the single base value.
    pub fn values(&self, param: Param) -> Vec<f64> {
        self.grids
            .iter()
            .find(|(p, _)| *p == param)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| vec![base_value(&self.base, param)])
    }
}

fn base_value(cfg: &CsbmConfig, param: Param) -> f64 {
    match param {
        Param::N => cfg.n as f64,
        Param::Gamma => cfg.gamma(),
        Param::Lambda => cfg.lambda,
        Param::Mu => cfg.mu,
        Param::D => cfg.d,
        Param::Tau => cfg.tau,
        Param::R => cfg.r,
    }
}

/// Parses a comma-separated list of numbers and `start:step:stop` ranges.
pub fn parse_list(key: &str, text: &str) -> CliResult<Vec<f64>> {
    let bad = |item: &str| CliError::config(format!("invalid value '{item}' for '{key}'"));
    let number = |item: &str| item.trim().parse::<f64>().map_err(|_| bad(item));
    let mut out = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(CliError::config(format!("empty list item in '{key}'")));
        }
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [single] => out.push(number(single)?),
            [start, step, stop] => {
                let (start, step, stop) = (number(start)?, number(step)?, number(stop)?);
                if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
                    return Err(CliError::config(format!(
                        "range '{item}' for '{key}' needs a positive step and start <= stop"
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                out.extend((0..=count).map(|k| start + step * k as f64));
            }
            _ => return Err(bad(item)),
        }
    }
    Ok(out)
}

fn parse_single<T: std::str::FromStr>(key: &str, text: &str) -> CliResult<T> {
    text.trim()
        .parse::<T>()
        .map_err(|_| CliError::config(format!("invalid value '{text}' for '{key}'")))
}

fn parse_bool(key: &str, text: &str) -> CliResult<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::config(format!("invalid value '{text}' for '{key}' (expected true or false)"))),
    }
}

/// Resolves raw entries into typed settings and validates the base point.
pub fn resolve(raw: &RawConfig) -> CliResult<Resolved> {
    let mut base = default_config();
    let mut grids = Vec::new();
    // `n` before `gamma` so that the feature count follows the final ratio.
    let order = [Param::N, Param::Gamma, Param::Lambda, Param::Mu, Param::D, Param::Tau, Param::R];
    for param in order {
        if let Some(text) = raw.get(param.name()) {
            let values = parse_list(param.name(), text)?;
            base = param.apply(base, values[0]).map_err(CliError::from)?;
            if values.len() > 1 {
                grids.push((param, values));
            }
        }
    }
    grids.sort_by_key(|(p, _)| Param::ALL.iter().position(|q| q == p));
    if let Some(text) = raw.get("ensemble") {
        base.ensemble = text.parse::<Ensemble>().map_err(CliError::from)?;
    }
    if let Some(text) = raw.get("seed") {
        base.seed = parse_single("seed", text)?;
    }
    let trials = raw.get("trials").map(|t| parse_single::<usize>("trials", t)).transpose()?;
    if trials == Some(0) {
        return Err(CliError::config("trials must be positive"));
    }
    let filter = raw
        .get("filter")
        .map(|t| t.parse::<GraphFilter>().map_err(CliError::from))
        .transpose()?;
    let convention = raw
        .get("ridge_convention")
        .map(|t| t.parse::<RidgeConvention>().map_err(CliError::from))
        .transpose()?
        .unwrap_or_default();
    let parallel = raw.get("parallel").map(|t| parse_bool("parallel", t)).transpose()?.unwrap_or(true);
    let with_theory = raw
        .get("with_theory")
        .map(|t| parse_bool("with_theory", t))
        .transpose()?
        .unwrap_or(false);
    let n_list = raw
        .get("n_list")
        .map(|t| {
            parse_list("n_list", t)?
                .into_iter()
                .map(|v| {
                    if v >= 2.0 && v.fract() == 0.0 && (v as usize) % 2 == 0 {
                        Ok(v as usize)
                    } else {
                        Err(CliError::config(format!("n_list entries must be even integers >= 2, got {v}")))
                    }
                })
                .collect::<CliResult<Vec<usize>>>()
        })
        .transpose()?;
    let c_grid = raw.get("c_grid").map(|t| parse_list("c_grid", t)).transpose()?;
    let c = raw.get("c").map(|t| parse_single::<f64>("c", t)).transpose()?;
    let band = raw
        .get("band")
        .map(|t| {
            let v = parse_list("band", t)?;
            match v.as_slice() {
                [a, b] if *a >= 0.0 && *b >= 0.0 && a.fract() == 0.0 && b.fract() == 0.0 => {
                    Ok((*a as usize, *b as usize))
                }
                _ => Err(CliError::config("band must be two eigenvalue indices 'a,b'")),
            }
        })
        .transpose()?;
    base.validate().map_err(CliError::from)?;

    let mut entries = raw.entries().clone();
    for param in Param::ALL {
        entries
            .entry(param.name().to_string())
            .or_insert_with(|| base_value(&base, param).to_string());
    }
    entries.entry("ensemble".into()).or_insert_with(|| base.ensemble.code().to_string());
    entries.entry("seed".into()).or_insert_with(|| base.seed.to_string());
    entries
        .entry("ridge_convention".into())
        .or_insert_with(|| convention.name().to_string());
    Ok(Resolved {
        base,
        grids,
        trials,
        filter,
        convention,
        parallel,
        n_list,
        c_grid,
        c,
        band,
        with_theory,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("tau", "0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        let r = parse_list("c", "-1:0.5:1").unwrap();
        assert_eq!(r, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(parse_list("c", "1:0:2").is_err());
        assert!(parse_list("c", "a").is_err());
        assert!(parse_list("c", "1,,2").is_err());
    }

    #[test]
    fn text_file_and_precedence() {
        let mut raw = RawConfig::parse_text("# comment\nlambda = 2\ntau=0.3,0.6 # grid\n").unwrap();
        let mut flags = RawConfig::default();
        flags.set("lambda", "-1").unwrap();
        raw.merge(&flags);
        let res = resolve(&raw).unwrap();
        assert_eq!(res.base.lambda, -1.0);
        assert_eq!(res.grids, vec![(Param::Tau, vec![0.3, 0.6])]);
        assert!(res.require_single_point("simulate").is_err());
    }

    #[test]
    fn unknown_keys_and_bad_ranges_are_config_errors() {
        let err = RawConfig::parse_text("lamda = 1").unwrap_err();
        assert_eq!(err.code, CliError::CONFIG);
        assert!(err.message.contains("lamda"));
        let mut raw = RawConfig::default();
        raw.set("tau", "1.5").unwrap();
        let err = resolve(&raw).unwrap_err();
        assert_eq!(err.code, CliError::CONFIG);
        assert!(err.message.contains("tau must lie in (0, 1]"));
    }

    #[test]
    fn gamma_is_kept_when_n_changes() {
        let mut raw = RawConfig::default();
        raw.set("n", "1000").unwrap();
        raw.set("gamma", "2").unwrap();
        let res = resolve(&raw).unwrap();
        assert_eq!((res.base.n, res.base.f), (1000, 500));
    }
}
