//! Attacks that hide inside the DP noise budget.
//!
//! The adaptive attacker draws its "noise" from a Gaussian whose mean is
//! shifted by `sqrt(2γ)·σ_x`, and retunes the degree of poisoning `γ` every
//! episode from the ratio of the current validation loss to the mean of all
//! earlier ones. The random-model (RMD) attacker is the baseline: it submits
//! a random direction scaled to the clipping threshold.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::dp::{add_noise, gaussian_perturb, PrivacySpec};
use crate::error::{Error, Result};
use crate::model::{Mlp, ModelUpdate, ParamVector};

/// One-sided slack interval `[0, hi]`; empty when `hi < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn upto(hi: f64) -> Self {
        Self { lo: 0.0, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }
}

/// Injection slack a detector with threshold `tau` leaves once it widens its
/// range to tolerate DP noise, for an update deviating by `upsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoisonWindow {
    pub tau: f64,
    pub upsilon: f64,
    pub eta_max: f64,
    pub lower: Interval,
    pub upper: Interval,
}

pub fn poisoning_window(tau: f64, upsilon: f64) -> Result<PoisonWindow> {
    poisoning_window_with_noise(tau, upsilon, 0.0)
}

/// As [`poisoning_window`], also recording the largest benign noise the
/// detector was widened for. The windows themselves do not depend on it.
pub fn poisoning_window_with_noise(tau: f64, upsilon: f64, eta_max: f64) -> Result<PoisonWindow> {
    if !(tau >= 0.0) {
        return Err(Error::param("tau", "must be non-negative"));
    }
    Ok(PoisonWindow {
        tau,
        upsilon,
        eta_max,
        lower: Interval::upto(tau - upsilon),
        upper: Interval::upto(tau + upsilon),
    })
}

/// Mean of the optimal adversarial Gaussian, `θ + sqrt(2γ)·σ_x`.
pub fn adversarial_mu(theta: f64, gamma: f64, sigma_x: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::param("gamma", "must be non-negative"));
    }
    if !(sigma_x >= 0.0) {
        return Err(Error::param("sigma_x", "must be non-negative"));
    }
    Ok(theta + (2.0 * gamma).sqrt() * sigma_x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Rmd,
    #[default]
    Mpelm,
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::Rmd => "rmd",
            AttackKind::Mpelm => "mpelm",
        })
    }
}

/// Which participants the attacker controls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compromise {
    /// `m` of each episode's selected participants, drawn afresh.
    PerEpisode(usize),
    /// A fixed set of node ids, active only in episodes where selected.
    Fixed(Vec<usize>),
}

impl Compromise {
    pub fn m(&self) -> usize {
        match self {
            Compromise::PerEpisode(m) => *m,
            Compromise::Fixed(ids) => ids.len(),
        }
    }

    /// Compromised subset of `selected` (sorted ascending).
    pub fn resolve(&self, selected: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
        match self {
            Compromise::PerEpisode(m) => {
                let mut picked: Vec<usize> = rand::seq::index::sample(rng, selected.len(), (*m).min(selected.len()))
                    .into_iter()
                    .map(|i| selected[i])
                    .collect();
                picked.sort_unstable();
                picked
            }
            Compromise::Fixed(ids) => selected.iter().copied().filter(|s| ids.contains(s)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub compromise: Compromise,
    /// Benign noise mean.
    pub theta: f64,
    /// Proportionality factor of the γ update.
    pub rho: f64,
    pub gamma0: f64,
    /// Ratio above which the loss is "much larger" than history.
    pub r_hi: f64,
    /// Ratio below which the loss is "much smaller" than history.
    pub r_lo: f64,
    /// Retune γ each episode; when false γ stays at `gamma0`.
    pub adaptive: bool,
    /// Fraction of compromised nodes that pause when the ratio spikes.
    pub stop_fraction: f64,
}

impl AttackConfig {
    /// Adaptive attack with `γ₀ = ε`.
    pub fn mpelm(m: usize, epsilon: f64) -> Self {
        Self {
            kind: AttackKind::Mpelm,
            compromise: Compromise::PerEpisode(m),
            theta: 0.0,
            rho: 0.1,
            gamma0: epsilon,
            r_hi: 1.5,
            r_lo: 0.5,
            adaptive: true,
            stop_fraction: 1.0,
        }
    }

    /// Non-adaptive attack at a fixed degree of poisoning.
    pub fn fixed_gamma(m: usize, gamma: f64) -> Self {
        Self {
            gamma0: gamma,
            adaptive: false,
            ..Self::mpelm(m, gamma)
        }
    }

    pub fn rmd(m: usize) -> Self {
        Self {
            kind: AttackKind::Rmd,
            ..Self::mpelm(m, 1.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::param("rho", "must be positive"));
        }
        if !(self.r_lo < 1.0 && 1.0 < self.r_hi) {
            return Err(Error::param("r_lo/r_hi", "need r_lo < 1 < r_hi"));
        }
        // the decrease branch must not drive γ negative
        if !(self.rho * self.r_hi < 1.0) {
            return Err(Error::param("rho", "rho * r_hi must stay below 1"));
        }
        if !(self.gamma0 >= 0.0) {
            return Err(Error::param("gamma0", "must be non-negative"));
        }
        if self.adaptive && self.kind == AttackKind::Mpelm && self.gamma0 == 0.0 {
            return Err(Error::param("gamma0", "adaptive attack needs a positive initial degree"));
        }
        if !(0.0..=1.0).contains(&self.stop_fraction) {
            return Err(Error::param("stop_fraction", "must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaBranch {
    /// Ratio far above 1: pause poisoning.
    Pause,
    /// Ratio far below 1: push harder.
    Increase,
    Decrease,
}

/// The episodic degree-of-poisoning rule. `gamma` is the last nonzero degree.
pub fn gamma_update(gamma: f64, ratio: f64, cfg: &AttackConfig) -> (GammaBranch, f64) {
    if ratio > cfg.r_hi {
        (GammaBranch::Pause, 0.0)
    } else if ratio < cfg.r_lo {
        (GammaBranch::Increase, gamma + cfg.rho * ratio * gamma)
    } else {
        (GammaBranch::Decrease, gamma - cfg.rho * ratio * gamma)
    }
}

/// Attacker memory across episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackState {
    pub episodic_losses: Vec<f64>,
    /// Last nonzero degree of poisoning.
    pub gamma_current: f64,
    /// Degree of poisoning chosen for the current episode.
    pub gamma_episode: f64,
    pub loss_ratio: f64,
    pub branch: Option<GammaBranch>,
}

impl AttackState {
    pub fn new(cfg: &AttackConfig) -> Self {
        Self {
            episodic_losses: Vec::new(),
            gamma_current: cfg.gamma0,
            gamma_episode: cfg.gamma0,
            loss_ratio: 0.0,
            branch: None,
        }
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.episodic_losses.last().copied()
    }

    /// One controller step at the start of an episode.
    ///
    /// `validation` holds the compromised nodes' local validation splits,
    /// which never overlap their training batches.
    pub fn mpelm_step(
        &mut self,
        model: &Mlp,
        global: &ParamVector,
        validation: &[&[Sample]],
        cfg: &AttackConfig,
    ) -> Result<()> {
        if validation.is_empty() {
            return Err(Error::Empty("compromised validation shards"));
        }
        let mut total = 0.0;
        for v in validation {
            total += model.mse_loss(global, v)?;
        }
        let current = total / validation.len() as f64;
        self.observe(current, cfg);
        Ok(())
    }

    /// Applies the γ rule to an already measured average validation loss.
    pub fn observe(&mut self, current: f64, cfg: &AttackConfig) {
        let ratio = if self.episodic_losses.is_empty() {
            0.0
        } else {
            let hist = self.episodic_losses.iter().sum::<f64>() / self.episodic_losses.len() as f64;
            if hist == 0.0 {
                1.0
            } else {
                current / hist
            }
        };
        self.loss_ratio = ratio;
        if cfg.adaptive {
            let (branch, gamma) = gamma_update(self.gamma_current, ratio, cfg);
            self.branch = Some(branch);
            self.gamma_episode = gamma;
            if gamma != 0.0 {
                self.gamma_current = gamma;
            }
        } else {
            self.branch = None;
            self.gamma_episode = cfg.gamma0;
        }
        self.episodic_losses.push(current);
    }

    /// Degree of poisoning for the compromised node at position `rank` (of
    /// `m`). A pause applies to the first `ceil(stop_fraction·m)` nodes; the
    /// rest keep poisoning at the last nonzero degree.
    pub fn node_gamma(&self, rank: usize, m: usize, cfg: &AttackConfig) -> f64 {
        if self.branch != Some(GammaBranch::Pause) {
            return self.gamma_episode;
        }
        let paused = (cfg.stop_fraction * m as f64).ceil() as usize;
        if rank < paused {
            0.0
        } else {
            self.gamma_current
        }
    }
}

/// Adversarial perturbation of a clipped update: every coordinate gets
/// `N(adversarial_mu(θ, γ, σ_x), (Sσ)²)` with `σ_x = Sσ`. At `γ = 0, θ = 0`
/// this is bit-for-bit the benign mechanism on the same substream.
pub fn inject(
    clipped: &ModelUpdate,
    spec: &PrivacySpec,
    gamma: f64,
    theta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ModelUpdate> {
    let std = spec.noise_std();
    inject_with(clipped, theta, gamma, std, std, rng)
}

/// Adversarial perturbation with the attack scale `sigma_x` and the noise
/// standard deviation given separately.
pub fn inject_with(
    clipped: &ModelUpdate,
    theta: f64,
    gamma: f64,
    sigma_x: f64,
    std: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ModelUpdate> {
    let mean = adversarial_mu(theta, gamma, sigma_x)?;
    let delta = gaussian_perturb(&clipped.delta, mean, std, rng);
    Ok(ModelUpdate::new(ParamVector(delta), clipped.node_id, clipped.episode))
}

/// Random update with ℓ2 norm exactly `C`, before benign noise.
pub fn rmd_direction(spec: &PrivacySpec, q: usize, rng: &mut ChaCha8Rng) -> ParamVector {
    loop {
        let v: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return ParamVector(v.iter().map(|x| x * spec.clip_c / norm).collect());
        }
    }
}

/// Baseline random-model attacker: a random direction at norm `C` plus the
/// benign noise.
pub fn rmd_update(
    spec: &PrivacySpec,
    q: usize,
    node_id: usize,
    episode: usize,
    direction_rng: &mut ChaCha8Rng,
    noise_rng: &mut ChaCha8Rng,
) -> ModelUpdate {
    let raw = ModelUpdate::new(rmd_direction(spec, q, direction_rng), node_id, episode);
    add_noise(&raw, spec, noise_rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};

    #[test]
    fn window_cases() {
        let w = poisoning_window(0.3, 0.0).unwrap();
        assert_eq!((w.lower.hi, w.upper.hi), (0.3, 0.3));
        let w = poisoning_window(0.3, 0.3).unwrap();
        assert_eq!(w.lower.width(), 0.0);
        assert!(!w.lower.is_empty());
        assert_eq!(w.upper.hi, 0.6);
        let w = poisoning_window(0.3, 0.1).unwrap();
        assert!((w.lower.hi - 0.2).abs() < 1e-15);
        assert!((w.upper.hi - 0.4).abs() < 1e-15);
        let w = poisoning_window(0.3, 0.5).unwrap();
        assert!(w.lower.is_empty());
        assert!(poisoning_window(-1.0, 0.0).is_err());
    }

    #[test]
    fn mu_values() {
        assert_eq!(adversarial_mu(0.25, 0.0, 3.0).unwrap(), 0.25);
        assert_eq!(adversarial_mu(0.0, 2.0, 1.0).unwrap(), 2.0);
        let mu = adversarial_mu(0.0, 3.0, 0.5).unwrap();
        assert!((mu - 1.224_744_871_391_589).abs() < 1e-12);
        assert!(adversarial_mu(0.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn mu_strictly_increasing_in_gamma() {
        let gammas: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        for w in gammas.windows(2) {
            assert!(adversarial_mu(0.0, w[1], 0.7).unwrap() > adversarial_mu(0.0, w[0], 0.7).unwrap());
        }
    }

    #[test]
    fn gamma_rule_branches() {
        let cfg = AttackConfig::mpelm(1, 0.7);
        let (b, g) = gamma_update(0.7, 1.0, &cfg);
        assert_eq!(b, GammaBranch::Decrease);
        assert!((g - 0.7 * 0.9).abs() < 1e-15);
        assert_eq!(gamma_update(0.7, 2.0, &cfg), (GammaBranch::Pause, 0.0));
        let (b, g) = gamma_update(0.7, 0.4, &cfg);
        assert_eq!(b, GammaBranch::Increase);
        assert!((g - 0.728).abs() < 1e-12);
        // boundaries fall into the "otherwise" branch
        assert_eq!(gamma_update(0.7, 1.5, &cfg).0, GammaBranch::Decrease);
        assert_eq!(gamma_update(0.7, 0.5, &cfg).0, GammaBranch::Decrease);
    }

    #[test]
    fn first_step_has_zero_ratio_and_keeps_gamma0() {
        let cfg = AttackConfig::mpelm(1, 0.7);
        let mut st = AttackState::new(&cfg);
        st.observe(0.3, &cfg);
        assert_eq!(st.loss_ratio, 0.0);
        assert_eq!(st.gamma_episode, 0.7);
        assert_eq!(st.episodic_losses, vec![0.3]);
    }

    #[test]
    fn pause_keeps_last_nonzero_gamma() {
        let cfg = AttackConfig::mpelm(2, 0.7);
        let mut st = AttackState::new(&cfg);
        st.observe(0.1, &cfg);
        st.observe(0.1, &cfg); // ratio 1 -> 0.63
        assert!((st.gamma_current - 0.63).abs() < 1e-12);
        st.observe(0.5, &cfg); // ratio 5 -> pause
        assert_eq!(st.gamma_episode, 0.0);
        assert!((st.gamma_current - 0.63).abs() < 1e-12);
        assert_eq!(st.node_gamma(0, 2, &cfg), 0.0);
        assert_eq!(st.node_gamma(1, 2, &cfg), 0.0);
        let partial = AttackConfig {
            stop_fraction: 0.5,
            ..cfg.clone()
        };
        assert_eq!(st.node_gamma(0, 2, &partial), 0.0);
        assert!((st.node_gamma(1, 2, &partial) - 0.63).abs() < 1e-12);
    }

    #[test]
    fn zero_history_mean_is_treated_as_unit_ratio() {
        let cfg = AttackConfig::mpelm(1, 1.0);
        let mut st = AttackState::new(&cfg);
        st.observe(0.0, &cfg);
        st.observe(0.2, &cfg);
        assert_eq!(st.loss_ratio, 1.0);
        assert!((st.gamma_episode - 0.9).abs() < 1e-15);
    }

    #[test]
    fn fixed_mode_never_moves_gamma() {
        let cfg = AttackConfig::fixed_gamma(1, 3.0);
        let mut st = AttackState::new(&cfg);
        for loss in [0.5, 0.1, 2.0, 0.3] {
            st.observe(loss, &cfg);
            assert_eq!(st.gamma_episode, 3.0);
        }
        assert_eq!(st.episodic_losses.len(), 4);
    }

    #[test]
    fn inject_with_zero_gamma_matches_benign_noise() {
        let spec = PrivacySpec::new(0.7, 0.001, 0.5).unwrap();
        let u = ModelUpdate::new(ParamVector(vec![0.1, -0.3, 0.2, 0.0]), 1, 1);
        let benign = add_noise(&u, &spec, &mut substream(9, Purpose::Noise, 1, 1));
        let attacked = inject(&u, &spec, 0.0, 0.0, &mut substream(9, Purpose::Noise, 1, 1)).unwrap();
        assert_eq!(benign, attacked);
    }

    #[test]
    fn inject_without_variance_is_a_pure_shift() {
        let spec = PrivacySpec::noiseless(1.0);
        let u = ModelUpdate::new(ParamVector(vec![0.1, -0.3, 0.2]), 0, 0);
        let out = inject(&u, &spec, 2.0, 0.0, &mut substream(9, Purpose::Noise, 0, 0)).unwrap();
        // σ_x = Sσ = 0, so the mean shift vanishes too
        assert_eq!(out, u);
        // γ = 2, σ_x = 1, zero noise: μ = 2 on every coordinate
        let out = inject_with(&u, 0.0, 2.0, 1.0, 0.0, &mut substream(9, Purpose::Noise, 0, 0)).unwrap();
        assert_eq!(out.delta.0, vec![0.1 + 2.0, -0.3 + 2.0, 0.2 + 2.0]);
    }

    #[test]
    fn rmd_has_clip_norm_before_noise() {
        let spec = PrivacySpec::new(0.7, 0.001, 0.25).unwrap();
        let a = rmd_direction(&spec, 50, &mut substream(1, Purpose::Rmd, 0, 0));
        let b = rmd_direction(&spec, 50, &mut substream(1, Purpose::Rmd, 1, 0));
        assert!((a.norm() - 0.25).abs() < 1e-12);
        assert_ne!(a, b);
    }

    #[test]
    fn per_episode_compromise_picks_m_of_selected() {
        let selected = vec![3, 8, 11, 40, 77];
        let got = Compromise::PerEpisode(2).resolve(&selected, &mut substream(1, Purpose::Compromise, 0, 1));
        assert_eq!(got.len(), 2);
        assert!(got.iter().all(|g| selected.contains(g)));
        assert!(got.windows(2).all(|w| w[0] < w[1]));
        let fixed = Compromise::Fixed(vec![8, 9, 77]).resolve(&selected, &mut substream(1, Purpose::Compromise, 0, 1));
        assert_eq!(fixed, vec![8, 77]);
    }
}
