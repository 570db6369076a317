//! Experiment configuration and its INI file format.
//!
//! ```ini
//! [oracle]
//! d = 16
//! private_modes = 0,1,2
//! [privacy]
//! eps = inf,10,3,1,0.1
//! [run]
//! methods = dp-mge,dp-dre,uniform-public
//! seeds = 0,1,2,3,4
//! ```
//!
//! Sections are `oracle`, `privacy`, `dre`, `mge`, `gan`, `metrics` and `run`.
//! Unknown sections and keys are errors.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::budget::{parse_epsilon, DEFAULT_DELTA};
use crate::dre::DreConfig;
use crate::error::{Error, Result};
use crate::gan::GanConfig;
use crate::metrics::MetricSet;
use crate::nn::{DpSgdConfig, PenaltyStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "dp-mge")]
    DpMge,
    #[serde(rename = "dp-dre")]
    DpDre,
    #[serde(rename = "dp-gan-mi")]
    DpGanMi,
    #[serde(rename = "dp-gan-ft")]
    DpGanFt,
    #[serde(rename = "uniform-public")]
    UniformPublic,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::DpMge => "dp-mge",
            Method::DpDre => "dp-dre",
            Method::DpGanMi => "dp-gan-mi",
            Method::DpGanFt => "dp-gan-ft",
            Method::UniformPublic => "uniform-public",
        }
    }

    /// Whether the method reads private data at all.
    pub fn is_private(self) -> bool {
        self != Method::UniformPublic
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "dp-mge" => Method::DpMge,
            "dp-dre" => Method::DpDre,
            "dp-gan-mi" => Method::DpGanMi,
            "dp-gan-ft" => Method::DpGanFt,
            "uniform-public" => Method::UniformPublic,
            other => return Err(Error::Config(format!("unknown method `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub d: usize,
    pub n_pub: usize,
    pub n_priv: usize,
    pub modes: usize,
    pub private_modes: Vec<u32>,
    /// Mixture weights over `private_modes`; uniform when absent.
    pub private_weights: Option<Vec<f64>>,
    pub std: f64,
    pub radius: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            d: 16,
            n_pub: 5000,
            n_priv: 2000,
            modes: 10,
            private_modes: vec![0, 1, 2],
            private_weights: None,
            std: 0.05,
            radius: 0.7,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n_pub == 0 || self.n_priv < 4 || self.modes == 0 {
            return Err(Error::Config("oracle counts must be positive (n_priv >= 4)".into()));
        }
        if self.private_modes.is_empty() {
            return Err(Error::Config("private mode set is empty".into()));
        }
        if let Some(&bad) = self.private_modes.iter().find(|&&m| m as usize >= self.modes) {
            return Err(Error::Config(format!(
                "private mode {bad} is not among the {} public modes",
                self.modes
            )));
        }
        if let Some(w) = &self.private_weights {
            if w.len() != self.private_modes.len() || w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config(
                    "private_weights must be non-negative, one per private mode".into(),
                ));
            }
        }
        if !(self.std >= 0.0 && self.radius >= 0.0) {
            return Err(Error::Config("std and radius must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanSettings {
    pub gan: GanConfig,
    /// Non-private pretraining on public features for the fine-tuning variant.
    pub pretrain_iters: u64,
    pub pretrain_lr: f64,
    /// Learning rate used when fine-tuning the pretrained pair.
    pub ft_lr: f64,
}

impl Default for GanSettings {
    fn default() -> Self {
        Self {
            gan: GanConfig::default(),
            pretrain_iters: 1000,
            pretrain_lr: 1e-4,
            ft_lr: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub oracle: OracleConfig,
    pub eps_grid: Vec<f64>,
    pub delta: f64,
    pub dre: DreConfig,
    pub gan: GanSettings,
    pub metrics: MetricSet,
    pub n_eval: usize,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub parallel: usize,
    /// Record wall-clock time per cell. Disable for byte-reproducible reports.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            oracle: OracleConfig::default(),
            eps_grid: vec![f64::INFINITY, 10.0, 3.0, 1.0, 0.1],
            delta: DEFAULT_DELTA,
            dre: DreConfig::default(),
            gan: GanSettings::default(),
            metrics: MetricSet::ALL,
            n_eval: 2000,
            methods: vec![
                Method::DpMge,
                Method::DpDre,
                Method::DpGanMi,
                Method::DpGanFt,
                Method::UniformPublic,
            ],
            seeds: vec![0, 1, 2, 3, 4],
            master_seed: 0,
            parallel: 1,
            timing: true,
        }
    }
}

fn parse_num<T: FromStr>(section: &str, key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse `{v}`")))
}

fn parse_list<T: FromStr>(section: &str, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(section, key, s))
        .collect()
}

fn parse_bool(section: &str, key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "[{section}] {key}: expected true/false, got `{v}`"
        ))),
    }
}

fn set_sgd(sgd: &mut DpSgdConfig, section: &str, key: &str, v: &str) -> Result<bool> {
    match key {
        "iters" => sgd.iters = parse_num(section, key, v)?,
        "batch" => sgd.batch = parse_num(section, key, v)?,
        "lr" => sgd.lr = parse_num(section, key, v)?,
        "clip" => sgd.clip = parse_num(section, key, v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

impl ExperimentConfig {
    pub fn from_ini_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_ini(&text)
    }

    pub fn from_ini(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section: Option<String> = None;
        let mut gp_lambda = 10.0;
        let mut gp_standard = matches!(cfg.gan.gan.penalty, PenaltyStyle::Standard { .. });
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !["oracle", "privacy", "dre", "mge", "gan", "metrics", "run"].contains(&name) {
                    return Err(Error::Config(format!("line {}: unknown section [{name}]", i + 1)));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section
                .as_deref()
                .ok_or_else(|| Error::Config(format!("line {}: key `{key}` outside any section", i + 1)))?;
            let known = match (sec, key) {
                ("oracle", "d") => {
                    cfg.oracle.d = parse_num(sec, key, value)?;
                    true
                }
                ("oracle", "n_pub") => {
                    cfg.oracle.n_pub = parse_num(sec, key, value)?;
                    true
                }
                ("oracle", "n_priv") => {
                    cfg.oracle.n_priv = parse_num(sec, key, value)?;
                    true
                }
                ("oracle", "modes") => {
                    cfg.oracle.modes = parse_num(sec, key, value)?;
                    true
                }
                ("oracle", "private_modes") => {
                    cfg.oracle.private_modes = parse_list(sec, key, value)?;
                    true
                }
                ("oracle", "private_weights") => {
                    cfg.oracle.private_weights = Some(parse_list(sec, key, value)?);
                    true
                }
                ("oracle", "std") => {
                    cfg.oracle.std = parse_num(sec, key, value)?;
                    true
                }
                ("oracle", "radius") => {
                    cfg.oracle.radius = parse_num(sec, key, value)?;
                    true
                }
                ("privacy", "eps") => {
                    cfg.eps_grid = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(parse_epsilon)
                        .collect::<Result<_>>()?;
                    true
                }
                ("privacy", "delta") => {
                    cfg.delta = parse_num(sec, key, value)?;
                    true
                }
                ("dre", "width") => {
                    cfg.dre.width = parse_num(sec, key, value)?;
                    true
                }
                ("dre", k) => set_sgd(&mut cfg.dre.sgd, sec, k, value)?,
                ("gan", "z_dim") => {
                    cfg.gan.gan.z_dim = parse_num(sec, key, value)?;
                    true
                }
                ("gan", "width") => {
                    cfg.gan.gan.width = parse_num(sec, key, value)?;
                    true
                }
                ("gan", "penalty") => {
                    gp_standard = match value {
                        "literal" => false,
                        "standard" => true,
                        other => return Err(Error::Config(format!("[gan] penalty: unknown style `{other}`"))),
                    };
                    true
                }
                ("gan", "lambda") => {
                    gp_lambda = parse_num(sec, key, value)?;
                    true
                }
                ("gan", "select_best") => {
                    cfg.gan.gan.select_best = parse_bool(sec, key, value)?;
                    true
                }
                ("gan", "eval_samples") => {
                    cfg.gan.gan.eval_samples = parse_num(sec, key, value)?;
                    true
                }
                ("gan", "pretrain_iters") => {
                    cfg.gan.pretrain_iters = parse_num(sec, key, value)?;
                    true
                }
                ("gan", "pretrain_lr") => {
                    cfg.gan.pretrain_lr = parse_num(sec, key, value)?;
                    true
                }
                ("gan", "ft_lr") => {
                    cfg.gan.ft_lr = parse_num(sec, key, value)?;
                    true
                }
                ("gan", k) => set_sgd(&mut cfg.gan.gan.sgd, sec, k, value)?,
                ("metrics", "metrics") => {
                    let mut m = MetricSet {
                        fid: false,
                        prd: false,
                        ndb: false,
                    };
                    for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        match name {
                            "fid" => m.fid = true,
                            "prd" => m.prd = true,
                            "ndb" => m.ndb = true,
                            "all" => m = MetricSet::ALL,
                            other => return Err(Error::Config(format!("[metrics] unknown metric `{other}`"))),
                        }
                    }
                    cfg.metrics = m;
                    true
                }
                ("metrics", "n_eval") => {
                    cfg.n_eval = parse_num(sec, key, value)?;
                    true
                }
                ("run", "methods") => {
                    cfg.methods = value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?;
                    true
                }
                ("run", "seeds") => {
                    cfg.seeds = parse_list(sec, key, value)?;
                    true
                }
                ("run", "master_seed") => {
                    cfg.master_seed = parse_num(sec, key, value)?;
                    true
                }
                ("run", "parallel") => {
                    cfg.parallel = parse_num(sec, key, value)?;
                    true
                }
                ("run", "timing") => {
                    cfg.timing = parse_bool(sec, key, value)?;
                    true
                }
                _ => false,
            };
            if !known {
                return Err(Error::Config(format!("line {}: unknown key `{key}` in [{sec}]", i + 1)));
            }
        }
        cfg.gan.gan.penalty = if gp_standard {
            PenaltyStyle::Standard { lambda: gp_lambda }
        } else {
            PenaltyStyle::Literal
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.oracle.validate()?;
        if self.eps_grid.is_empty() {
            return Err(Error::Config("epsilon grid is empty".into()));
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(**e > 0.0)) {
            return Err(Error::Config(format!("epsilon must be positive, got {e}")));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.methods.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("methods and seeds must be non-empty".into()));
        }
        if self.n_eval == 0 || self.parallel == 0 {
            return Err(Error::Config("n_eval and parallel must be positive".into()));
        }
        self.dre.sgd.validate()?;
        self.gan.gan.sgd.validate()?;
        Ok(())
    }
}
