//! Experiment configuration: a TOML file of (optionally dotted) keys merged
//! over built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use ldpfl_core::adversary::{AttackConfig, AttackKind, Compromise};
use ldpfl_core::data::{cache, ingest_csv, synthesize, FederatedData, MissingPolicy};
use ldpfl_core::detection::{DetectorConfig, DetectorKind};
use ldpfl_core::dp::PrivacySpec;
use ldpfl_core::federation::FederationConfig;
use ldpfl_core::model::OptimizerConfig;
use ldpfl_core::rdp::{default_grid, RdpHyper};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Invalid configuration, reported with the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at `{}`: {}", self.path, self.reason)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    #[default]
    None,
    Rmd,
    Mpelm,
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackMode::None => "none",
            AttackMode::Rmd => "rmd",
            AttackMode::Mpelm => "mpelm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataBlock {
    /// Raw household power CSV; synthetic data when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Directory of parsed-CSV caches.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub synthetic_n: usize,
    /// Share of samples held out for the server's validation probe.
    pub server_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationBlock {
    pub k: usize,
    pub n: usize,
    pub t: usize,
    pub hidden: Vec<usize>,
    pub parallel: bool,
    pub strict_empty: bool,
    /// Episodes averaged into the reported final loss.
    pub tail: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBlock {
    pub epsilon: f64,
    pub delta: f64,
    pub clip: f64,
    pub tau_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackBlock {
    pub mode: AttackMode,
    pub m: usize,
    /// Initial degree of poisoning; defaults to ε.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    pub adaptive: bool,
    pub rho: f64,
    pub r_hi: f64,
    pub r_lo: f64,
    pub theta: f64,
    pub stop_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpBlock {
    pub grid: Vec<f64>,
    pub gammas: Vec<f64>,
    pub m: usize,
    pub table_seeds: Vec<u64>,
    pub alpha: f64,
    pub zeta: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
    pub explore_start: f64,
    pub explore_min: f64,
    pub episodes: usize,
    /// Trailing window for the convergence summaries.
    pub window: usize,
}

impl RdpBlock {
    pub fn hyper(&self) -> RdpHyper {
        RdpHyper {
            alpha: self.alpha,
            zeta: self.zeta,
            psi1: self.psi1,
            psi2: self.psi2,
            psi3: self.psi3,
            explore_start: self.explore_start,
            explore_min: self.explore_min,
            max_episodes: self.episodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataBlock,
    pub federation: FederationBlock,
    pub privacy: PrivacyBlock,
    pub attack: AttackBlock,
    pub detector: DetectorConfig,
    pub optimizer: OptimizerConfig,
    pub rdp: RdpBlock,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let hyper = RdpHyper::default();
        Self {
            seed: 1,
            data: DataBlock {
                csv: None,
                cache_dir: None,
                synthetic_n: 20_000,
                server_fraction: 0.02,
            },
            federation: FederationBlock {
                k: 100,
                n: 30,
                t: 30,
                hidden: vec![16, 8],
                parallel: true,
                strict_empty: false,
                tail: 5,
            },
            privacy: PrivacyBlock {
                epsilon: 0.7,
                delta: 0.001,
                clip: 0.15,
                tau_delta: 0.05,
            },
            attack: AttackBlock {
                mode: AttackMode::None,
                m: 0,
                gamma0: None,
                adaptive: true,
                rho: 0.1,
                r_hi: 1.5,
                r_lo: 0.5,
                theta: 0.0,
                stop_fraction: 1.0,
            },
            detector: DetectorConfig::default(),
            optimizer: OptimizerConfig {
                learning_rate: 0.05,
                ..OptimizerConfig::default()
            },
            rdp: RdpBlock {
                grid: default_grid(),
                gammas: vec![2.0, 3.0],
                m: 3,
                table_seeds: vec![1],
                alpha: hyper.alpha,
                zeta: hyper.zeta,
                psi1: hyper.psi1,
                psi2: hyper.psi2,
                psi3: hyper.psi3,
                explore_start: hyper.explore_start,
                explore_min: hyper.explore_min,
                episodes: hyper.max_episodes,
                window: 1000,
            },
        }
    }
}

/// Keys that may appear in a file although the defaults leave them unset.
const OPTIONAL_KEYS: &[&str] = &["data.csv", "data.cache_dir", "attack.gamma0"];

fn merge(base: &mut Table, over: Table, prefix: &str) -> Result<(), ConfigError> {
    for (key, value) in over {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o, &path)?,
            (Some(Value::Table(_)), _) => return Err(ConfigError::new(path, "expected a table")),
            (Some(slot), v) => *slot = v,
            (None, v) if OPTIONAL_KEYS.contains(&path.as_str()) => {
                base.insert(key, v);
            }
            (None, _) => return Err(ConfigError::new(path, "unknown key")),
        }
    }
    Ok(())
}

fn defaults_table() -> Table {
    Table::try_from(ExperimentConfig::default()).expect("defaults serialize to a table")
}

impl ExperimentConfig {
    /// Parses TOML text and fills every missing key from the defaults.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let user: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new("<file>", e.message().to_string()))?;
        let mut table = defaults_table();
        merge(&mut table, user, "")?;
        let cfg: Self = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::new("<file>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fully resolved configuration, every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let f = &self.federation;
        if f.k == 0 {
            return Err(ConfigError::new("federation.k", "must be at least 1"));
        }
        if f.n == 0 || f.n > f.k {
            return Err(ConfigError::new("federation.n", format!("need 1 <= n <= K = {}", f.k)));
        }
        if f.t == 0 {
            return Err(ConfigError::new("federation.t", "must be at least 1"));
        }
        if f.hidden.contains(&0) {
            return Err(ConfigError::new("federation.hidden", "layer widths must be positive"));
        }
        let p = &self.privacy;
        if !(p.epsilon > 0.0) {
            return Err(ConfigError::new("privacy.epsilon", "must be positive"));
        }
        if !(p.delta > 0.0 && p.delta < 1.0) {
            return Err(ConfigError::new("privacy.delta", "must lie in (0, 1)"));
        }
        if !(p.clip > 0.0) {
            return Err(ConfigError::new("privacy.clip", "must be positive"));
        }
        if !(p.tau_delta > 0.0) {
            return Err(ConfigError::new("privacy.tau_delta", "must be positive"));
        }
        let a = &self.attack;
        match a.mode {
            AttackMode::None if a.m != 0 => {
                return Err(ConfigError::new("attack.m", "must be 0 when attack.mode = \"none\""));
            }
            AttackMode::Rmd | AttackMode::Mpelm if a.m == 0 => {
                return Err(ConfigError::new("attack.m", "an attack needs at least one node"));
            }
            _ => {}
        }
        if a.m > f.n {
            return Err(ConfigError::new("attack.m", format!("need m <= n = {}", f.n)));
        }
        if let Some(attack) = self.attack_config() {
            attack
                .validate()
                .map_err(|e| ConfigError::new("attack", e.to_string()))?;
        }
        self.detector
            .validate()
            .map_err(|e| ConfigError::new("detector", e.to_string()))?;
        self.optimizer
            .validate()
            .map_err(|e| ConfigError::new("optimizer", e.to_string()))?;
        if self.data.synthetic_n < f.k {
            return Err(ConfigError::new("data.synthetic_n", "fewer samples than nodes"));
        }
        if !(0.0..1.0).contains(&self.data.server_fraction) {
            return Err(ConfigError::new("data.server_fraction", "must lie in [0, 1)"));
        }
        self.rdp
            .hyper()
            .validate()
            .map_err(|e| ConfigError::new("rdp", e.to_string()))?;
        if self.rdp.grid.is_empty() || self.rdp.grid.iter().any(|e| !(*e > 0.0)) {
            return Err(ConfigError::new("rdp.grid", "needs positive privacy levels"));
        }
        if self.rdp.m == 0 || self.rdp.m > f.n {
            return Err(ConfigError::new("rdp.m", format!("need 1 <= m <= n = {}", f.n)));
        }
        Ok(())
    }

    pub fn privacy_spec(&self) -> PrivacySpec {
        PrivacySpec::new(self.privacy.epsilon, self.privacy.delta, self.privacy.clip)
            .expect("validated privacy block")
    }

    pub fn federation_config(&self) -> FederationConfig {
        let f = &self.federation;
        let mut cfg = FederationConfig::new(f.k, f.n, f.t, self.seed, self.privacy_spec());
        cfg.optimizer = self.optimizer.clone();
        cfg.hidden = f.hidden.clone();
        cfg.tau_delta = self.privacy.tau_delta;
        cfg.parallel = f.parallel;
        cfg.strict_empty = f.strict_empty;
        cfg
    }

    pub fn attack_config(&self) -> Option<AttackConfig> {
        let a = &self.attack;
        let kind = match a.mode {
            AttackMode::None => return None,
            AttackMode::Rmd => AttackKind::Rmd,
            AttackMode::Mpelm => AttackKind::Mpelm,
        };
        Some(AttackConfig {
            kind,
            compromise: Compromise::PerEpisode(a.m),
            theta: a.theta,
            rho: a.rho,
            gamma0: a.gamma0.unwrap_or(self.privacy.epsilon),
            r_hi: a.r_hi,
            r_lo: a.r_lo,
            adaptive: a.adaptive,
            stop_fraction: a.stop_fraction,
        })
    }

    pub fn detector_config(&self) -> Option<DetectorConfig> {
        (self.detector.kind != DetectorKind::Off).then_some(self.detector)
    }

    /// Loads or synthesizes the samples and deals them to the nodes.
    pub fn federated_data(&self) -> ldpfl_core::Result<FederatedData> {
        let samples = match (&self.data.csv, &self.data.cache_dir) {
            (Some(csv), Some(dir)) => cache::ingest_cached(csv, dir, MissingPolicy::DropRow)?.samples,
            (Some(csv), None) => ingest_csv(csv, MissingPolicy::DropRow)?.samples,
            (None, _) => synthesize(self.data.synthetic_n, self.seed)?,
        };
        FederatedData::build(&samples, self.federation.k, self.data.server_fraction, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn dotted_and_table_keys_agree() {
        let a = ExperimentConfig::from_toml("privacy.epsilon = 0.5\nattack.mode = \"rmd\"\nattack.m = 2").unwrap();
        let b = ExperimentConfig::from_toml("[privacy]\nepsilon = 0.5\n[attack]\nmode = \"rmd\"\nm = 2").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.privacy.epsilon, 0.5);
        assert_eq!(a.privacy.delta, 0.001);
        assert_eq!(a.optimizer.learning_rate, 0.05);
    }

    #[test]
    fn partial_nested_block_keeps_sibling_defaults() {
        let c = ExperimentConfig::from_toml("optimizer.local_steps = 2").unwrap();
        assert_eq!(c.optimizer.local_steps, 2);
        assert_eq!(c.optimizer.learning_rate, 0.05);
    }

    #[test]
    fn resolved_output_round_trips() {
        let mut c = ExperimentConfig::default();
        c.attack.gamma0 = Some(2.0);
        c.attack.mode = AttackMode::Mpelm;
        c.attack.m = 3;
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    fn err(text: &str) -> String {
        ExperimentConfig::from_toml(text).unwrap_err().path
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(err("federation.n = 200"), "federation.n");
        assert_eq!(err("attack.m = 3"), "attack.m");
        assert_eq!(err("attack.mode = \"mpelm\""), "attack.m");
        assert_eq!(err("attack.mode = \"rmd\"\nattack.m = 31"), "attack.m");
        assert_eq!(err("privacy.epsilon = -1.0"), "privacy.epsilon");
        assert_eq!(err("privacy.epsilonn = 1.0"), "privacy.epsilonn");
        assert_eq!(err("federation = 3"), "federation");
    }

    #[test]
    fn gamma0_defaults_to_epsilon() {
        let c = ExperimentConfig::from_toml("attack.mode = \"mpelm\"\nattack.m = 1\nprivacy.epsilon = 0.5").unwrap();
        assert_eq!(c.attack_config().unwrap().gamma0, 0.5);
        assert!(ExperimentConfig::default().attack_config().is_none());
        assert!(ExperimentConfig::default().detector_config().is_none());
    }
}
