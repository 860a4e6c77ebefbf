//! Aggregator-side anomaly detection over one episode's submitted updates.
//!
//! Both detectors compare each update with its leave-one-out mean (the
//! "comparison standard"): `norm` by relative squared distance, `accuracy`
//! by the validation loss of the two resulting candidate global models.
//! `mix` flags the union.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::model::{Mlp, ModelUpdate, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    #[default]
    Off,
    Norm,
    Accuracy,
    Mix,
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorKind::Off => "off",
            DetectorKind::Norm => "norm",
            DetectorKind::Accuracy => "accuracy",
            DetectorKind::Mix => "mix",
        })
    }
}

impl FromStr for DetectorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" | "none" => Ok(DetectorKind::Off),
            "norm" => Ok(DetectorKind::Norm),
            "accuracy" => Ok(DetectorKind::Accuracy),
            "mix" => Ok(DetectorKind::Mix),
            other => Err(Error::Parse(format!("unknown detector `{other}`"))),
        }
    }
}

/// Which side of the loss comparison the accuracy detector penalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Penalize models whose loss is *lower* than the standard's, exactly as
    /// the case split is printed.
    AsWritten,
    /// Penalize models whose loss is higher than the standard's.
    #[default]
    Reversed,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::AsWritten => "as_written",
            Orientation::Reversed => "reversed",
        })
    }
}

/// Scope of the `e₂` reference value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum E2Scope {
    /// `e₂ᵢ = ΔLᵢ`.
    #[default]
    PerModel,
    /// `e₂ = max_k ΔL_k`, shared by every model of the episode.
    MaxAcross,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub beta1: f64,
    pub beta2: f64,
    pub d_max: f64,
    pub orientation: Orientation,
    pub e2_scope: E2Scope,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            kind: DetectorKind::Off,
            beta1: 1.0,
            beta2: 0.1,
            d_max: 10.0,
            orientation: Orientation::Reversed,
            e2_scope: E2Scope::PerModel,
        }
    }
}

impl DetectorConfig {
    pub fn of(kind: DetectorKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 > 0.0) {
            return Err(Error::param("beta1", "must be positive"));
        }
        if !(self.beta2 >= 0.0) {
            return Err(Error::param("beta2", "must be non-negative"));
        }
        if !(self.d_max > 0.0) {
            return Err(Error::param("d_max", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Components {
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    pub d: Option<f64>,
    pub delta_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub node_id: usize,
    pub rate: f64,
    pub flagged: bool,
    pub components: Components,
}

impl Verdict {
    fn new(node_id: usize, rate: f64, components: Components) -> Self {
        Self {
            node_id,
            rate,
            flagged: rate < 1.0,
            components,
        }
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Mean of every update except the `i`-th, summed in slice order.
pub fn comparison_standard(updates: &[ModelUpdate], i: usize) -> Result<Vec<f64>> {
    let n = updates.len();
    if n < 2 {
        return Err(Error::param("n", "comparison standard needs at least two updates"));
    }
    if i >= n {
        return Err(Error::param("i", format!("index {i} out of {n}")));
    }
    let q = updates[i].delta.len();
    let mut sum = vec![0.0; q];
    for (k, u) in updates.iter().enumerate() {
        if u.delta.len() != q {
            return Err(Error::Dimension {
                expected: q,
                got: u.delta.len(),
            });
        }
        if k == i {
            continue;
        }
        for (s, v) in sum.iter_mut().zip(u.delta.iter()) {
            *s += v;
        }
    }
    let denom = (n - 1) as f64;
    Ok(sum.into_iter().map(|s| s / denom).collect())
}

pub fn norm_rate(updates: &[ModelUpdate], i: usize, cfg: &DetectorConfig) -> Result<Verdict> {
    let standard = comparison_standard(updates, i)?;
    let d: f64 = updates[i]
        .delta
        .iter()
        .zip(&standard)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let base = sq_norm(&standard);
    let e1 = if d == 0.0 {
        0.0
    } else if d < cfg.d_max * base {
        d / base
    } else {
        cfg.d_max
    };
    let rate = (1.0 - (e1 - cfg.beta1).max(0.0)).clamp(0.0, 1.0);
    Ok(Verdict::new(
        updates[i].node_id,
        rate,
        Components {
            e1: Some(e1),
            d: Some(d),
            ..Components::default()
        },
    ))
}

/// Relative loss difference between the candidate built from the update
/// (`loss_i`) and the one built from its standard (`loss_st`).
pub fn loss_difference(loss_i: f64, loss_st: f64, orientation: Orientation) -> f64 {
    match orientation {
        Orientation::AsWritten => {
            if loss_st <= loss_i || loss_st == 0.0 {
                0.0
            } else {
                (loss_st - loss_i) / loss_st
            }
        }
        Orientation::Reversed => {
            if loss_i <= loss_st || loss_i == 0.0 {
                0.0
            } else {
                (loss_i - loss_st) / loss_i
            }
        }
    }
}

pub fn accuracy_rate_from_e2(e2: f64, beta2: f64) -> f64 {
    if e2 <= beta2 {
        1.0
    } else {
        (1.0 - e2).clamp(0.0, 1.0)
    }
}

/// Evaluation context for the accuracy detector.
#[derive(Debug, Clone, Copy)]
pub struct LossProbe<'a> {
    pub model: &'a Mlp,
    pub global: &'a ParamVector,
    pub validation: &'a [Sample],
}

impl LossProbe<'_> {
    fn loss_after(&self, step: &[f64]) -> Result<f64> {
        let candidate: Vec<f64> = self.global.iter().zip(step).map(|(w, s)| w + s).collect();
        self.model.mse_loss(&candidate, self.validation)
    }

    /// `(ℒᵢ, ℒ_st)` for update `i`.
    pub fn losses(&self, updates: &[ModelUpdate], i: usize) -> Result<(f64, f64)> {
        let standard = comparison_standard(updates, i)?;
        Ok((self.loss_after(&updates[i].delta)?, self.loss_after(&standard)?))
    }
}

pub fn accuracy_rate(
    updates: &[ModelUpdate],
    i: usize,
    cfg: &DetectorConfig,
    probe: &LossProbe<'_>,
) -> Result<Verdict> {
    let (loss_i, loss_st) = probe.losses(updates, i)?;
    let dl = loss_difference(loss_i, loss_st, cfg.orientation);
    Ok(Verdict::new(
        updates[i].node_id,
        accuracy_rate_from_e2(dl, cfg.beta2),
        Components {
            e2: Some(dl),
            delta_loss: Some(dl),
            ..Components::default()
        },
    ))
}

fn accuracy_verdicts(
    updates: &[ModelUpdate],
    cfg: &DetectorConfig,
    probe: &LossProbe<'_>,
) -> Result<Vec<Verdict>> {
    let mut verdicts = (0..updates.len())
        .map(|i| accuracy_rate(updates, i, cfg, probe))
        .collect::<Result<Vec<_>>>()?;
    if cfg.e2_scope == E2Scope::MaxAcross {
        let e2 = verdicts
            .iter()
            .filter_map(|v| v.components.delta_loss)
            .fold(0.0, f64::max);
        for v in verdicts.iter_mut() {
            *v = Verdict::new(
                v.node_id,
                accuracy_rate_from_e2(e2, cfg.beta2),
                Components {
                    e2: Some(e2),
                    ..v.components
                },
            );
        }
    }
    Ok(verdicts)
}

/// Union of two flag sets.
pub fn mix_filter(norm: &BTreeSet<usize>, accuracy: &BTreeSet<usize>) -> BTreeSet<usize> {
    norm.union(accuracy).copied().collect()
}

pub fn flagged_ids(verdicts: &[Verdict]) -> BTreeSet<usize> {
    verdicts.iter().filter(|v| v.flagged).map(|v| v.node_id).collect()
}

/// Runs the configured detector over one episode. Returns one verdict per
/// update, in input order; `Off` returns an empty list.
pub fn detect(
    updates: &[ModelUpdate],
    cfg: &DetectorConfig,
    probe: Option<&LossProbe<'_>>,
) -> Result<Vec<Verdict>> {
    let need_probe = || probe.ok_or(Error::Empty("accuracy detection needs a validation probe"));
    match cfg.kind {
        DetectorKind::Off => Ok(Vec::new()),
        DetectorKind::Norm => (0..updates.len()).map(|i| norm_rate(updates, i, cfg)).collect(),
        DetectorKind::Accuracy => accuracy_verdicts(updates, cfg, need_probe()?),
        DetectorKind::Mix => {
            let norm: Vec<Verdict> = (0..updates.len())
                .map(|i| norm_rate(updates, i, cfg))
                .collect::<Result<_>>()?;
            let acc = accuracy_verdicts(updates, cfg, need_probe()?)?;
            Ok(norm
                .into_iter()
                .zip(acc)
                .map(|(n, a)| Verdict {
                    node_id: n.node_id,
                    rate: n.rate.min(a.rate),
                    flagged: n.flagged || a.flagged,
                    components: Components {
                        e1: n.components.e1,
                        d: n.components.d,
                        e2: a.components.e2,
                        delta_loss: a.components.delta_loss,
                    },
                })
                .collect())
        }
    }
}

/// Percentage of an episode's models classified correctly.
pub fn classification_accuracy(verdicts: &[Verdict], malicious: &BTreeSet<usize>) -> f64 {
    if verdicts.is_empty() {
        return 100.0;
    }
    let correct = verdicts
        .iter()
        .filter(|v| v.flagged == malicious.contains(&v.node_id))
        .count();
    100.0 * correct as f64 / verdicts.len() as f64
}

/// Mean per-episode classification accuracy, in percent.
pub fn detection_accuracy(episodes: &[(Vec<Verdict>, BTreeSet<usize>)]) -> f64 {
    if episodes.is_empty() {
        return 100.0;
    }
    episodes
        .iter()
        .map(|(v, m)| classification_accuracy(v, m))
        .sum::<f64>()
        / episodes.len() as f64
}
