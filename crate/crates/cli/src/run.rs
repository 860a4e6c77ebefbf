//! Single-run execution and the metric files it produces.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use ldpfl_core::detection::detection_accuracy;
use ldpfl_core::federation::{final_loss, run_training, RoundRecord};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const EPISODES_SCHEMA: &str = "# schema: ldpfl/episodes v1";
pub const ATTACK_SCHEMA: &str = "# schema: ldpfl/attack v1";
pub const DETECTION_SCHEMA: &str = "# schema: ldpfl/detection v1";
pub const SUMMARY_SCHEMA: &str = "# schema: ldpfl/summary v1";

pub const EPISODES_HEADER: &[&str] = &[
    "episode",
    "val_loss_before",
    "global_val_loss",
    "delta_step",
    "delta_cumulative",
    "stopped",
    "aborted",
    "n_selected",
    "m_active",
    "n_flagged",
];
pub const ATTACK_HEADER: &[&str] = &[
    "episode",
    "compromised",
    "gamma_t",
    "gamma_current",
    "loss_ratio",
    "attacker_val_loss",
];
pub const DETECTION_HEADER: &[&str] = &[
    "episode", "node_id", "malicious", "rate", "flagged", "e1", "e2", "d", "delta_loss",
];
pub const SUMMARY_HEADER: &[&str] = &[
    "label",
    "seed",
    "epsilon",
    "clip",
    "attack",
    "m",
    "gamma0",
    "adaptive",
    "detector",
    "beta1",
    "episodes",
    "tail",
    "initial_val_loss",
    "final_val_loss",
    "d_acc",
    "delta_spent",
    "aborted_episodes",
];

/// Headline numbers of one run; every field is recomputable from the
/// per-episode files.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub label: String,
    pub seed: u64,
    pub epsilon: f64,
    pub clip: f64,
    pub attack: String,
    pub m: usize,
    pub gamma0: Option<f64>,
    pub adaptive: bool,
    pub detector: String,
    pub beta1: f64,
    pub episodes: usize,
    pub tail: usize,
    pub initial_val_loss: f64,
    pub final_val_loss: f64,
    pub d_acc: Option<f64>,
    pub delta_spent: f64,
    pub aborted_episodes: usize,
}

impl Summary {
    pub fn row(&self) -> Vec<String> {
        vec![
            self.label.clone(),
            self.seed.to_string(),
            self.epsilon.to_string(),
            self.clip.to_string(),
            self.attack.clone(),
            self.m.to_string(),
            opt(self.gamma0),
            self.adaptive.to_string(),
            self.detector.clone(),
            self.beta1.to_string(),
            self.episodes.to_string(),
            self.tail.to_string(),
            self.initial_val_loss.to_string(),
            self.final_val_loss.to_string(),
            opt(self.d_acc),
            self.delta_spent.to_string(),
            self.aborted_episodes.to_string(),
        ]
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub label: String,
    pub config: ExperimentConfig,
    pub records: Vec<RoundRecord>,
    pub summary: Summary,
}

/// Per-episode `(verdicts, malicious set)` pairs for detection scoring.
pub fn scored_episodes(
    records: &[RoundRecord],
) -> Vec<(Vec<ldpfl_core::detection::Verdict>, BTreeSet<usize>)> {
    records
        .iter()
        .map(|r| (r.verdicts.clone(), r.compromised.iter().copied().collect()))
        .collect()
}

pub fn summarize(label: &str, cfg: &ExperimentConfig, records: &[RoundRecord]) -> Result<Summary, CliError> {
    let attack = cfg.attack_config();
    let detector = cfg.detector_config();
    Ok(Summary {
        label: label.to_string(),
        seed: cfg.seed,
        epsilon: cfg.privacy.epsilon,
        clip: cfg.privacy.clip,
        attack: cfg.attack.mode.to_string(),
        m: cfg.attack.m,
        gamma0: attack.as_ref().map(|a| a.gamma0),
        adaptive: attack.as_ref().is_some_and(|a| a.adaptive),
        detector: cfg.detector.kind.to_string(),
        beta1: cfg.detector.beta1,
        episodes: records.len(),
        tail: cfg.federation.tail,
        initial_val_loss: records.first().map_or(f64::NAN, |r| r.val_loss_before),
        final_val_loss: final_loss(records, cfg.federation.tail)?,
        d_acc: detector.map(|_| detection_accuracy(&scored_episodes(records))),
        delta_spent: records.last().map_or(0.0, |r| r.delta_cumulative),
        aborted_episodes: records.iter().filter(|r| r.aborted).count(),
    })
}

/// Trains one configuration.
pub fn run(label: &str, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let data = cfg.federated_data()?;
    let records = run_training(
        &cfg.federation_config(),
        &data,
        cfg.attack_config().as_ref(),
        cfg.detector_config().as_ref(),
    )?;
    let summary = summarize(label, cfg, &records)?;
    Ok(RunOutput {
        label: label.to_string(),
        config: cfg.clone(),
        records,
        summary,
    })
}

fn csv_bytes(schema: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut out = format!("{schema}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header).expect("in-memory write");
        for row in rows {
            w.write_record(&row).expect("in-memory write");
        }
        w.flush().expect("in-memory flush");
    }
    out
}

fn ids(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

/// Every metric file of a run, by file name. Content depends only on the
/// configuration and the seed.
pub fn render(out: &RunOutput) -> BTreeMap<&'static str, Vec<u8>> {
    let recs = &out.records;
    let mut files = BTreeMap::new();
    files.insert(
        "episodes.csv",
        csv_bytes(
            EPISODES_SCHEMA,
            EPISODES_HEADER,
            recs.iter().map(|r| {
                vec![
                    r.episode.to_string(),
                    r.val_loss_before.to_string(),
                    r.global_val_loss.to_string(),
                    r.delta_step.to_string(),
                    r.delta_cumulative.to_string(),
                    r.stopped.to_string(),
                    r.aborted.to_string(),
                    r.selected.len().to_string(),
                    r.m_active().to_string(),
                    r.flagged.len().to_string(),
                ]
            }),
        ),
    );
    files.insert(
        "attack.csv",
        csv_bytes(
            ATTACK_SCHEMA,
            ATTACK_HEADER,
            recs.iter().map(|r| {
                vec![
                    r.episode.to_string(),
                    ids(&r.compromised),
                    opt(r.gamma_t),
                    opt(r.gamma_current),
                    opt(r.loss_ratio),
                    opt(r.attacker_val_loss),
                ]
            }),
        ),
    );
    files.insert(
        "detection.csv",
        csv_bytes(
            DETECTION_SCHEMA,
            DETECTION_HEADER,
            recs.iter().flat_map(|r| {
                r.verdicts.iter().map(move |v| {
                    let c = v.components;
                    vec![
                        r.episode.to_string(),
                        v.node_id.to_string(),
                        r.compromised.contains(&v.node_id).to_string(),
                        v.rate.to_string(),
                        v.flagged.to_string(),
                        opt(c.e1),
                        opt(c.e2),
                        opt(c.d),
                        opt(c.delta_loss),
                    ]
                })
            }),
        ),
    );
    files.insert(
        "summary.csv",
        csv_bytes(SUMMARY_SCHEMA, SUMMARY_HEADER, [out.summary.row()]),
    );
    files.insert("config.resolved.toml", out.config.to_toml().into_bytes());
    files
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Runs `cfg` and writes its files into `dir`. Wall-clock data goes to
/// `meta.toml` only.
pub fn run_to_dir(label: &str, cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutput, CliError> {
    let started = unix_seconds();
    let out = run(label, cfg)?;
    let finished = unix_seconds();
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for (name, bytes) in render(&out) {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    }
    let meta = format!(
        "label = {label:?}\nstarted_unix = {started}\nfinished_unix = {finished}\nversion = {:?}\n",
        env!("CARGO_PKG_VERSION")
    );
    let path = dir.join("meta.toml");
    fs::write(&path, meta).map_err(|e| CliError::io(&path, e))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.federation.k = 6;
        c.federation.n = 3;
        c.federation.t = 2;
        c.data.synthetic_n = 300;
        c
    }

    #[test]
    fn files_carry_schema_lines() {
        let out = run("tiny", &tiny()).unwrap();
        let files = render(&out);
        for (name, schema) in [
            ("episodes.csv", EPISODES_SCHEMA),
            ("attack.csv", ATTACK_SCHEMA),
            ("detection.csv", DETECTION_SCHEMA),
            ("summary.csv", SUMMARY_SCHEMA),
        ] {
            let text = String::from_utf8(files[name].clone()).unwrap();
            assert_eq!(text.lines().next(), Some(schema));
        }
        let episodes = String::from_utf8(files["episodes.csv"].clone()).unwrap();
        assert_eq!(episodes.lines().count(), 2 + 2);
    }

    #[test]
    fn summary_without_detector_has_no_accuracy() {
        let out = run("tiny", &tiny()).unwrap();
        assert_eq!(out.summary.d_acc, None);
        assert_eq!(out.summary.episodes, 2);
        assert_eq!(out.summary.gamma0, None);
    }
}
