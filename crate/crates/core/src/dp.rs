//! Gaussian local differential privacy: clipping, noise calibration, noisy
//! updates and the cumulative leakage ledger.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelUpdate, ParamVector};

pub const DEFAULT_DELTA: f64 = 0.001;
pub const DEFAULT_TAU_DELTA: f64 = 0.01;

/// `c = sqrt(2 ln(1.25 / δ))`.
pub fn noise_constant(delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::param("delta", "must be positive"));
    }
    let log = (1.25 / delta).ln();
    if !(log > 0.0) {
        return Err(Error::param("delta", format!("{delta} >= 1.25 leaves no noise constant")));
    }
    Ok((2.0 * log).sqrt())
}

/// Minimal Gaussian noise multiplier `σ = c S / ε`.
pub fn calibrate_sigma(epsilon: f64, delta: f64, sensitivity: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    if !(sensitivity >= 0.0) {
        return Err(Error::param("sensitivity", "must be non-negative"));
    }
    Ok(noise_constant(delta)? * sensitivity / epsilon)
}

/// Privacy parameters of one node. Sensitivity always equals the clipping
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    pub epsilon: f64,
    pub delta: f64,
    pub clip_c: f64,
    pub sensitivity: f64,
    pub sigma: f64,
}

impl PrivacySpec {
    pub fn new(epsilon: f64, delta: f64, clip_c: f64) -> Result<Self> {
        if !(delta < 1.0) {
            return Err(Error::param("delta", "must be below 1"));
        }
        if !(clip_c > 0.0) {
            return Err(Error::param("clip_c", "must be positive"));
        }
        let sigma = calibrate_sigma(epsilon, delta, clip_c)?;
        Ok(Self {
            epsilon,
            delta,
            clip_c,
            sensitivity: clip_c,
            sigma,
        })
    }

    /// Per-coordinate standard deviation of the added noise, `S·σ`.
    pub fn noise_std(&self) -> f64 {
        self.sensitivity * self.sigma
    }

    /// Same spec without noise; for noiseless baselines.
    pub fn noiseless(clip_c: f64) -> Self {
        Self {
            epsilon: f64::INFINITY,
            delta: DEFAULT_DELTA,
            clip_c,
            sensitivity: clip_c,
            sigma: 0.0,
        }
    }
}

/// Scales `update` so its ℓ2 norm is at most `clip_c`.
pub fn clip(update: &ModelUpdate, clip_c: f64) -> ModelUpdate {
    let scale = (update.delta.norm() / clip_c).max(1.0);
    let delta = update.delta.iter().map(|v| v / scale).collect::<Vec<_>>();
    ModelUpdate::new(ParamVector(delta), update.node_id, update.episode)
}

/// Adds i.i.d. `N(mean, std²)` to every coordinate. Shared by the benign
/// mechanism and the adversarial injection so that the same substream yields
/// the same standard-normal draws in both.
pub(crate) fn gaussian_perturb(
    values: &[f64],
    mean: f64,
    std: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v + (mean + std * z)
        })
        .collect()
}

/// Benign mechanism: clipped update plus `N(0, S²σ² I)`.
pub fn add_noise(clipped: &ModelUpdate, spec: &PrivacySpec, rng: &mut ChaCha8Rng) -> ModelUpdate {
    let delta = gaussian_perturb(&clipped.delta, 0.0, spec.noise_std(), rng);
    ModelUpdate::new(ParamVector(delta), clipped.node_id, clipped.episode)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedgerSignal {
    Continue,
    Stop,
}

/// Cumulative leakage under independent composition,
/// `1 - Π (1 - δ_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLedger {
    pub per_episode_delta: Vec<f64>,
    pub cumulative_delta: f64,
    pub stop_threshold: f64,
    /// `Σ ln(1 - δ_t)`; keeps a single step exact at the boundary.
    log_survival: f64,
}

impl PrivacyLedger {
    pub fn new(stop_threshold: f64) -> Self {
        Self {
            per_episode_delta: Vec::new(),
            cumulative_delta: 0.0,
            stop_threshold,
            log_survival: 0.0,
        }
    }

    pub fn is_stopped(&self) -> bool {
        self.cumulative_delta > self.stop_threshold
    }

    pub fn episodes(&self) -> usize {
        self.per_episode_delta.len()
    }

    /// Charges one episode at `spec.delta`.
    pub fn account(&mut self, spec: &PrivacySpec) -> LedgerSignal {
        self.charge(spec.delta)
    }

    pub fn charge(&mut self, delta_step: f64) -> LedgerSignal {
        self.per_episode_delta.push(delta_step);
        self.log_survival += (-delta_step).ln_1p();
        self.cumulative_delta = -self.log_survival.exp_m1();
        if self.is_stopped() {
            LedgerSignal::Stop
        } else {
            LedgerSignal::Continue
        }
    }
}
