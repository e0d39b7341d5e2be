//! Flat key = value experiment configuration.
//!
//! Every key can come from a config file, a `--key value` command-line
//! override, or both (flags win). Lists are comma-separated, except the
//! schedule list which is semicolon-separated so that explicit `steps:`
//! descriptors can keep their internal commas.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use localpower_core::schedules::ScheduleSpec;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    NotKeyValue { line: usize, text: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {problem}")]
    BadValue { key: &'static str, problem: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
}

fn bad(key: &'static str, problem: impl fmt::Display) -> ConfigError {
    ConfigError::BadValue {
        key,
        problem: problem.to_string(),
    }
}

/// Where the data matrix comes from.
#[derive(Debug, Clone)]
pub enum Source {
    /// A LIBSVM-format file (gzip-compressed accepted), with an optional
    /// expected feature dimension.
    Libsvm {
        path: PathBuf,
        expected_dim: Option<usize>,
    },
    /// A seeded synthetic matrix with a prescribed Gram spectrum.
    Synthetic {
        n: usize,
        sigmas: Vec<f64>,
        seed: u64,
    },
}

impl Source {
    /// Human-readable tag used in summaries and file names.
    pub fn label(&self) -> String {
        match self {
            Source::Libsvm { path, .. } => path.display().to_string(),
            Source::Synthetic { n, sigmas, seed } => {
                format!("synthetic(n={n},d={},seed={seed})", sigmas.len())
            }
        }
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: Source,
    pub k: usize,
    pub r: usize,
    pub horizon: usize,
    pub schedules: Vec<ScheduleSpec>,
    pub m_values: Vec<usize>,
    pub seeds: Vec<u64>,
    pub eps_targets: Vec<f64>,
    pub output_dir: PathBuf,
    pub diagnostics: bool,
    pub noise_tau: f64,
    pub noise_eps: f64,
}

pub const KEYS: &[&str] = &[
    "dataset",
    "expected_dim",
    "synthetic_n",
    "synthetic_d",
    "synthetic_ratio",
    "synthetic_sigmas",
    "synthetic_seed",
    "k",
    "r",
    "T",
    "schedules",
    "m_values",
    "seeds",
    "eps_targets",
    "output_dir",
    "diagnostics",
    "noise_tau",
    "noise_eps",
];

/// Parse the `key = value` file format into a raw map.
pub fn parse_file(path: &PathBuf) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
        path: path.clone(),
        source,
    })?;
    parse_text(&text)
}

pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::NotKeyValue {
                line: idx + 1,
                text: line.to_string(),
            });
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_usize(key: &'static str, v: &str) -> Result<usize, ConfigError> {
    v.parse().map_err(|e| bad(key, e))
}

fn parse_u64(key: &'static str, v: &str) -> Result<u64, ConfigError> {
    v.parse().map_err(|e| bad(key, e))
}

fn parse_f64(key: &'static str, v: &str) -> Result<f64, ConfigError> {
    v.parse().map_err(|e| bad(key, e))
}

fn parse_bool(key: &'static str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(bad(key, format!("expected a boolean, got `{other}`"))),
    }
}

fn parse_usize_list(key: &'static str, v: &str) -> Result<Vec<usize>, ConfigError> {
    v.split(',')
        .map(|tok| tok.trim().parse().map_err(|e| bad(key, e)))
        .collect()
}

pub fn parse_f64_list(key: &'static str, v: &str) -> Result<Vec<f64>, ConfigError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|tok| tok.trim().parse().map_err(|e| bad(key, e)))
        .collect()
}

/// Seed lists accept both plain values and half-open `a..b` ranges, e.g.
/// `seeds = 0..8,100`.
pub fn parse_seed_list(key: &'static str, v: &str) -> Result<Vec<u64>, ConfigError> {
    let mut seeds = Vec::new();
    for tok in v.split(',') {
        let tok = tok.trim();
        if let Some((lo, hi)) = tok.split_once("..") {
            let lo = parse_u64(key, lo.trim())?;
            let hi = parse_u64(key, hi.trim())?;
            if hi <= lo {
                return Err(bad(key, format!("empty range `{tok}`")));
            }
            seeds.extend(lo..hi);
        } else {
            seeds.push(parse_u64(key, tok)?);
        }
    }
    Ok(seeds)
}

fn parse_schedules(key: &'static str, v: &str) -> Result<Vec<ScheduleSpec>, ConfigError> {
    v.split(';')
        .map(|tok| tok.trim().parse::<ScheduleSpec>().map_err(|e| bad(key, e)))
        .collect()
}

impl ExperimentConfig {
    /// Validate and type a raw key map.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let get = |key: &'static str| map.get(key).map(|s| s.as_str());
        let require = |key: &'static str| get(key).ok_or(ConfigError::Missing(key));

        let source = match get("dataset") {
            Some(path) => {
                for key in [
                    "synthetic_n",
                    "synthetic_d",
                    "synthetic_ratio",
                    "synthetic_sigmas",
                ] {
                    if get(key).is_some() {
                        return Err(ConfigError::Invalid(format!(
                            "`dataset` and `{key}` are mutually exclusive"
                        )));
                    }
                }
                Source::Libsvm {
                    path: PathBuf::from(path),
                    expected_dim: get("expected_dim")
                        .map(|v| parse_usize("expected_dim", v))
                        .transpose()?,
                }
            }
            None => {
                let n = parse_usize("synthetic_n", require("synthetic_n")?)?;
                let seed = get("synthetic_seed")
                    .map(|v| parse_u64("synthetic_seed", v))
                    .transpose()?
                    .unwrap_or(0);
                let sigmas = match (get("synthetic_sigmas"), get("synthetic_ratio")) {
                    (Some(list), None) => parse_f64_list("synthetic_sigmas", list)?,
                    (None, Some(ratio)) => {
                        let d = parse_usize("synthetic_d", require("synthetic_d")?)?;
                        let ratio = parse_f64("synthetic_ratio", ratio)?;
                        if !(ratio > 0.0 && ratio < 1.0) {
                            return Err(bad(
                                "synthetic_ratio",
                                format!("must lie in (0, 1), got {ratio}"),
                            ));
                        }
                        (0..d).map(|j| ratio.powi(j as i32)).collect()
                    }
                    (Some(_), Some(_)) => {
                        return Err(ConfigError::Invalid(
                            "`synthetic_sigmas` and `synthetic_ratio` are mutually exclusive"
                                .into(),
                        ))
                    }
                    (None, None) => {
                        return Err(ConfigError::Invalid(
                            "need a data source: `dataset`, or `synthetic_n` with \
                             `synthetic_sigmas` or `synthetic_d` + `synthetic_ratio`"
                                .into(),
                        ))
                    }
                };
                Source::Synthetic { n, sigmas, seed }
            }
        };

        let k = parse_usize("k", require("k")?)?;
        let r = parse_usize("r", require("r")?)?;
        let horizon = parse_usize("T", require("T")?)?;
        let schedules = parse_schedules("schedules", require("schedules")?)?;
        let m_values = parse_usize_list("m_values", require("m_values")?)?;
        let seeds = parse_seed_list("seeds", require("seeds")?)?;
        let eps_targets = get("eps_targets")
            .map(|v| parse_f64_list("eps_targets", v))
            .transpose()?
            .unwrap_or_default();
        let output_dir = PathBuf::from(require("output_dir")?);
        let diagnostics = get("diagnostics")
            .map(|v| parse_bool("diagnostics", v))
            .transpose()?
            .unwrap_or(false);
        let noise_tau = get("noise_tau")
            .map(|v| parse_f64("noise_tau", v))
            .transpose()?
            .unwrap_or(6.0);
        let noise_eps = get("noise_eps")
            .map(|v| parse_f64("noise_eps", v))
            .transpose()?
            .unwrap_or(0.1);

        if k == 0 || k > r {
            return Err(ConfigError::Invalid(format!(
                "need 1 <= k <= r, got k = {k}, r = {r}"
            )));
        }
        if horizon == 0 {
            return Err(ConfigError::Invalid("T must be at least 1".into()));
        }
        if schedules.is_empty() || m_values.is_empty() || seeds.is_empty() {
            return Err(ConfigError::Invalid(
                "schedules, m_values, and seeds must all be nonempty".into(),
            ));
        }
        if m_values.contains(&0) {
            return Err(ConfigError::Invalid("m_values entries must be >= 1".into()));
        }
        for &eps in &eps_targets {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "eps_targets entries must lie in (0, 1], got {eps}"
                )));
            }
        }
        Ok(ExperimentConfig {
            source,
            k,
            r,
            horizon,
            schedules,
            m_values,
            seeds,
            eps_targets,
            output_dir,
            diagnostics,
            noise_tau,
            noise_eps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_text() -> &'static str {
        "# comment\n\
         synthetic_n = 200\n\
         synthetic_d = 8\n\
         synthetic_ratio = 0.5\n\
         k = 2\n\
         r = 3\n\
         T = 12\n\
         schedules = full; every:3; steps:2,5,12\n\
         m_values = 1,4\n\
         seeds = 0..3,7\n\
         eps_targets = 0.1,0.01\n\
         output_dir = out\n\
         diagnostics = true\n"
    }

    #[test]
    fn parses_a_complete_config() {
        let map = parse_text(full_text()).unwrap();
        let cfg = ExperimentConfig::from_map(&map).unwrap();
        assert_eq!(cfg.k, 2);
        assert_eq!(cfg.schedules.len(), 3);
        assert_eq!(cfg.seeds, vec![0, 1, 2, 7]);
        assert_eq!(cfg.m_values, vec![1, 4]);
        assert!(cfg.diagnostics);
        match cfg.source {
            Source::Synthetic { n, ref sigmas, .. } => {
                assert_eq!(n, 200);
                assert_eq!(sigmas.len(), 8);
                assert!((sigmas[1] - 0.5).abs() < 1e-15);
            }
            _ => panic!("expected synthetic source"),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(matches!(
            parse_text("bogus = 1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            parse_text("no equals sign"),
            Err(ConfigError::NotKeyValue { line: 1, .. })
        ));
    }

    #[test]
    fn requires_a_source_and_core_keys() {
        let map = parse_text("k = 2").unwrap();
        assert!(ExperimentConfig::from_map(&map).is_err());
        let mut map = parse_text(full_text()).unwrap();
        map.remove("T");
        assert!(matches!(
            ExperimentConfig::from_map(&map),
            Err(ConfigError::Missing("T"))
        ));
    }

    #[test]
    fn rejects_conflicting_sources_and_bad_ranges() {
        let mut map = parse_text(full_text()).unwrap();
        map.insert("dataset".into(), "x.libsvm".into());
        assert!(ExperimentConfig::from_map(&map).is_err());

        let mut map = parse_text(full_text()).unwrap();
        map.insert("seeds".into(), "5..5".into());
        assert!(ExperimentConfig::from_map(&map).is_err());

        let mut map = parse_text(full_text()).unwrap();
        map.insert("eps_targets".into(), "1.5".into());
        assert!(ExperimentConfig::from_map(&map).is_err());
    }

    #[test]
    fn explicit_sigmas_replace_the_ratio_form() {
        let text = "synthetic_n = 50\nsynthetic_sigmas = 4,1,0.25\nk = 1\nr = 2\nT = 4\n\
                    schedules = full\nm_values = 1\nseeds = 0\noutput_dir = out\n";
        let cfg = ExperimentConfig::from_map(&parse_text(text).unwrap()).unwrap();
        match cfg.source {
            Source::Synthetic { ref sigmas, .. } => assert_eq!(sigmas, &[4.0, 1.0, 0.25]),
            _ => panic!(),
        }
    }
}
