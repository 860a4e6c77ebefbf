//! Episode orchestration: sampling, local training, perturbation, optional
//! filtering and mean aggregation.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{inject, rmd_update, AttackConfig, AttackKind, AttackState, Compromise};
use crate::data::{FederatedData, Sample};
use crate::detection::{detect, flagged_ids, DetectorConfig, DetectorKind, LossProbe, Verdict};
use crate::dp::{add_noise, clip, LedgerSignal, PrivacyLedger, PrivacySpec, DEFAULT_TAU_DELTA};
use crate::error::{Error, Result};
use crate::model::{Mlp, ModelUpdate, OptimizerConfig, ParamVector};
use crate::rng::{substream, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    /// Total available nodes.
    pub k: usize,
    /// Participants per episode.
    pub n: usize,
    /// Episode budget.
    pub t: usize,
    pub seed: u64,
    pub privacy: PrivacySpec,
    pub optimizer: OptimizerConfig,
    pub hidden: Vec<usize>,
    pub tau_delta: f64,
    /// Train the selected nodes on the rayon pool.
    pub parallel: bool,
    /// Fail the run when every update is flagged, instead of recording an
    /// aborted episode.
    pub strict_empty: bool,
}

impl FederationConfig {
    pub fn new(k: usize, n: usize, t: usize, seed: u64, privacy: PrivacySpec) -> Self {
        Self {
            k,
            n,
            t,
            seed,
            privacy,
            optimizer: OptimizerConfig::default(),
            hidden: vec![16, 8],
            tau_delta: DEFAULT_TAU_DELTA,
            parallel: true,
            strict_empty: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.n > self.k {
            return Err(Error::param("n", format!("need 1 <= n <= K, got n={} K={}", self.n, self.k)));
        }
        if self.t == 0 {
            return Err(Error::param("T", "at least one episode"));
        }
        if !(self.tau_delta > 0.0) {
            return Err(Error::param("tau_delta", "must be positive"));
        }
        self.optimizer.validate()
    }
}

/// Everything observable about one executed episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based episode index.
    pub episode: usize,
    pub selected: Vec<usize>,
    /// Compromised participants, sorted.
    pub compromised: Vec<usize>,
    /// One noisy clipped update per selected node, ascending node id.
    pub submitted: Vec<ModelUpdate>,
    pub verdicts: Vec<Verdict>,
    pub flagged: BTreeSet<usize>,
    pub global_params_after: ParamVector,
    pub val_loss_before: f64,
    pub global_val_loss: f64,
    pub delta_step: f64,
    pub delta_cumulative: f64,
    pub stopped: bool,
    /// Every update was flagged; the global model was left unchanged.
    pub aborted: bool,
    /// Degree of poisoning used this episode (MPELM only).
    pub gamma_t: Option<f64>,
    pub gamma_current: Option<f64>,
    pub loss_ratio: Option<f64>,
    /// Mean validation loss the attacker measured on its own shards.
    pub attacker_val_loss: Option<f64>,
}

impl RoundRecord {
    /// Compromised nodes that actually perturbed their update.
    pub fn m_active(&self) -> usize {
        self.compromised.len()
    }
}

/// Uniform sample of `n` distinct ids from `0..k`, sorted ascending.
pub fn select_nodes(k: usize, n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<usize>> {
    if n > k {
        return Err(Error::param("n", format!("cannot select {n} of {k} nodes")));
    }
    let mut ids = rand::seq::index::sample(rng, k, n).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// `global + mean(updates)`, summed in ascending node-id order.
pub fn aggregate(global: &ParamVector, updates: &[ModelUpdate]) -> Result<ParamVector> {
    if updates.is_empty() {
        return Err(Error::Empty("updates to aggregate"));
    }
    let q = global.len();
    let mut order: Vec<&ModelUpdate> = updates.iter().collect();
    order.sort_by_key(|u| u.node_id);
    let mut sum = vec![0.0; q];
    for u in order {
        if u.delta.len() != q {
            return Err(Error::Dimension {
                expected: q,
                got: u.delta.len(),
            });
        }
        for (s, d) in sum.iter_mut().zip(u.delta.iter()) {
            *s += d;
        }
    }
    let count = updates.len() as f64;
    Ok(ParamVector(
        global.iter().zip(sum).map(|(g, s)| g + s / count).collect(),
    ))
}

struct Attacker {
    cfg: AttackConfig,
    state: AttackState,
}

/// Mutable training state: the global model, the privacy ledger and the
/// attacker's memory.
pub struct Federation<'a> {
    cfg: FederationConfig,
    data: &'a FederatedData,
    model: Mlp,
    global: ParamVector,
    ledger: PrivacyLedger,
    attacker: Option<Attacker>,
    detector: DetectorConfig,
    episode: usize,
    val_loss: f64,
}

impl<'a> Federation<'a> {
    pub fn new(
        cfg: FederationConfig,
        data: &'a FederatedData,
        attacker: Option<&AttackConfig>,
        detector: Option<&DetectorConfig>,
    ) -> Result<Self> {
        cfg.validate()?;
        if data.shards.len() != cfg.k {
            return Err(Error::param(
                "K",
                format!("{} shards for K={}", data.shards.len(), cfg.k),
            ));
        }
        if let Some(a) = attacker {
            a.validate()?;
            if a.compromise.m() > cfg.n {
                return Err(Error::param("m", "more compromised nodes than participants"));
            }
        }
        let detector = detector.copied().unwrap_or_default();
        if detector.kind != DetectorKind::Off {
            detector.validate()?;
            if cfg.n < 2 {
                return Err(Error::param("n", "detection needs at least two participants"));
            }
        }
        let model = Mlp::new(&cfg.hidden);
        let global = model.init(&mut substream(cfg.seed, Purpose::Init, 0, 0));
        let val_loss = model.mse_loss(&global, &data.pooled_validation)?;
        Ok(Self {
            ledger: PrivacyLedger::new(cfg.tau_delta),
            attacker: attacker.map(|a| Attacker {
                cfg: a.clone(),
                state: AttackState::new(a),
            }),
            cfg,
            data,
            model,
            global,
            detector,
            episode: 0,
            val_loss,
        })
    }

    pub fn model(&self) -> &Mlp {
        &self.model
    }

    pub fn global(&self) -> &ParamVector {
        &self.global
    }

    pub fn ledger(&self) -> &PrivacyLedger {
        &self.ledger
    }

    pub fn val_loss(&self) -> f64 {
        self.val_loss
    }

    fn compromised(&self, selected: &[usize], t: usize) -> Vec<usize> {
        match &self.attacker {
            None => Vec::new(),
            Some(a) => a
                .cfg
                .compromise
                .resolve(selected, &mut substream(self.cfg.seed, Purpose::Compromise, 0, t as u64)),
        }
    }

    /// Runs the attacker's controller on its validation shards. Returns the
    /// loss it measured.
    fn attacker_step(&mut self, compromised: &[usize]) -> Result<Option<f64>> {
        let Some(att) = self.attacker.as_mut() else {
            return Ok(None);
        };
        if att.cfg.kind != AttackKind::Mpelm {
            return Ok(None);
        }
        let ids: Vec<usize> = match &att.cfg.compromise {
            Compromise::Fixed(ids) => ids.clone(),
            Compromise::PerEpisode(_) => compromised.to_vec(),
        };
        if ids.is_empty() {
            return Ok(None);
        }
        let shards: Vec<&[Sample]> = ids
            .iter()
            .map(|&i| self.data.shards[i].validation.as_slice())
            .collect();
        att.state.mpelm_step(&self.model, &self.global, &shards, &att.cfg)?;
        Ok(att.state.last_loss())
    }

    fn node_update(&self, node: usize, t: usize, gamma: Option<f64>) -> Result<ModelUpdate> {
        let seed = self.cfg.seed;
        let spec = &self.cfg.privacy;
        let mut noise = substream(seed, Purpose::Noise, node as u64, t as u64);
        if let Some(att) = &self.attacker {
            if gamma.is_some() && att.cfg.kind == AttackKind::Rmd {
                let mut dir = substream(seed, Purpose::Rmd, node as u64, t as u64);
                return Ok(rmd_update(spec, self.global.len(), node, t, &mut dir, &mut noise));
            }
        }
        let batches = substream(seed, Purpose::Batches, node as u64, t as u64);
        let raw = self.model.local_train(
            &self.global,
            &self.data.shards[node],
            &self.cfg.optimizer,
            t,
            batches,
        )?;
        let clipped = clip(&raw, spec.clip_c);
        match (gamma, &self.attacker) {
            (Some(g), Some(att)) => inject(&clipped, spec, g, att.cfg.theta, &mut noise),
            _ => Ok(add_noise(&clipped, spec, &mut noise)),
        }
    }

    /// Executes the next episode.
    pub fn run_episode(&mut self) -> Result<RoundRecord> {
        if self.ledger.is_stopped() {
            return Err(Error::LedgerStopped);
        }
        let t = self.episode + 1;
        let seed = self.cfg.seed;
        let selected = select_nodes(
            self.cfg.k,
            self.cfg.n,
            &mut substream(seed, Purpose::Selection, 0, t as u64),
        )?;
        let compromised = self.compromised(&selected, t);
        let attacker_val_loss = self.attacker_step(&compromised)?;

        // per-node degree of poisoning, None for benign nodes
        let m = compromised.len();
        let plan: Vec<(usize, Option<f64>)> = selected
            .iter()
            .map(|&node| {
                let gamma = compromised.iter().position(|&c| c == node).map(|rank| {
                    self.attacker
                        .as_ref()
                        .map_or(0.0, |a| a.state.node_gamma(rank, m, &a.cfg))
                });
                (node, gamma)
            })
            .collect();
        let submitted: Vec<ModelUpdate> = if self.cfg.parallel {
            plan.par_iter()
                .map(|&(node, g)| self.node_update(node, t, g))
                .collect::<Result<_>>()?
        } else {
            plan.iter()
                .map(|&(node, g)| self.node_update(node, t, g))
                .collect::<Result<_>>()?
        };

        let probe = LossProbe {
            model: &self.model,
            global: &self.global,
            validation: &self.data.server_validation,
        };
        let probe = (!probe.validation.is_empty()).then_some(probe);
        let verdicts = detect(&submitted, &self.detector, probe.as_ref())?;
        let flagged = flagged_ids(&verdicts);
        let survivors: Vec<ModelUpdate> = submitted
            .iter()
            .filter(|u| !flagged.contains(&u.node_id))
            .cloned()
            .collect();
        let aborted = survivors.is_empty();
        if aborted && self.cfg.strict_empty {
            self.episode = t;
            return Err(Error::EmptyAggregation { episode: t });
        }
        let val_loss_before = self.val_loss;
        if !aborted {
            self.global = aggregate(&self.global, &survivors)?;
            self.val_loss = self.model.mse_loss(&self.global, &self.data.pooled_validation)?;
        }
        let signal = self.ledger.account(&self.cfg.privacy);
        self.episode = t;

        let mpelm = self
            .attacker
            .as_ref()
            .filter(|a| a.cfg.kind == AttackKind::Mpelm);
        Ok(RoundRecord {
            episode: t,
            selected,
            compromised,
            submitted,
            verdicts,
            flagged,
            global_params_after: self.global.clone(),
            val_loss_before,
            global_val_loss: self.val_loss,
            delta_step: self.cfg.privacy.delta,
            delta_cumulative: self.ledger.cumulative_delta,
            stopped: signal == LedgerSignal::Stop,
            aborted,
            gamma_t: mpelm.map(|a| a.state.gamma_episode),
            gamma_current: mpelm.map(|a| a.state.gamma_current),
            loss_ratio: mpelm.map(|a| a.state.loss_ratio),
            attacker_val_loss,
        })
    }

    /// Runs until the episode budget or the ledger stops.
    pub fn run(&mut self) -> Result<Vec<RoundRecord>> {
        let mut records = Vec::new();
        while self.episode < self.cfg.t && !self.ledger.is_stopped() {
            records.push(self.run_episode()?);
        }
        Ok(records)
    }
}

pub fn run_training(
    cfg: &FederationConfig,
    data: &FederatedData,
    attacker: Option<&AttackConfig>,
    detector: Option<&DetectorConfig>,
) -> Result<Vec<RoundRecord>> {
    Federation::new(cfg.clone(), data, attacker, detector)?.run()
}

/// Mean global validation loss over the last `tail` episodes.
pub fn final_loss(records: &[RoundRecord], tail: usize) -> Result<f64> {
    let k = tail.max(1).min(records.len());
    if k == 0 {
        return Err(Error::Empty("training records"));
    }
    Ok(records[records.len() - k..].iter().map(|r| r.global_val_loss).sum::<f64>() / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize;

    #[test]
    fn final_loss_averages_the_tail() {
        let cfg = FederationConfig::new(4, 2, 3, 1, PrivacySpec::noiseless(1.0));
        let data = FederatedData::build(&synthesize(200, 1).unwrap(), 4, 0.1, 1).unwrap();
        let recs = run_training(&cfg, &data, None, None).unwrap();
        let want = (recs[1].global_val_loss + recs[2].global_val_loss) / 2.0;
        assert_eq!(final_loss(&recs, 2).unwrap(), want);
        assert_eq!(final_loss(&recs, 99).unwrap(), final_loss(&recs, 3).unwrap());
        assert_eq!(final_loss(&recs, 0).unwrap(), recs[2].global_val_loss);
        assert!(final_loss(&[], 5).is_err());
    }

    #[test]
    fn select_all_and_one() {
        let mut rng = substream(1, Purpose::Selection, 0, 1);
        assert_eq!(select_nodes(5, 5, &mut rng).unwrap(), vec![0, 1, 2, 3, 4]);
        let a = select_nodes(100, 1, &mut substream(1, Purpose::Selection, 0, 1)).unwrap();
        let b = select_nodes(100, 1, &mut substream(1, Purpose::Selection, 0, 1)).unwrap();
        assert_eq!(a, b);
        assert!(select_nodes(3, 4, &mut rng).is_err());
    }

    #[test]
    fn selection_frequency_is_binomial() {
        let (k, n, draws) = (100usize, 30usize, 10_000usize);
        let mut counts = vec![0usize; k];
        for t in 0..draws {
            let ids = select_nodes(k, n, &mut substream(7, Purpose::Selection, 0, t as u64)).unwrap();
            assert!(ids.windows(2).all(|w| w[0] < w[1]));
            for i in ids {
                counts[i] += 1;
            }
        }
        let p = n as f64 / k as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - p).abs() < 4.0 * se, "freq {freq}");
        }
    }

    fn upd(v: Vec<f64>, id: usize) -> ModelUpdate {
        ModelUpdate::new(ParamVector(v), id, 1)
    }

    #[test]
    fn aggregate_cases() {
        let g = ParamVector(vec![1.0, 2.0]);
        assert_eq!(aggregate(&g, &[upd(vec![0.0, 0.0], 0), upd(vec![0.0, 0.0], 1)]).unwrap(), g);
        assert_eq!(aggregate(&g, &[upd(vec![0.5, -1.0], 0)]).unwrap().0, vec![1.5, 1.0]);
        let u = vec![
            upd(vec![0.1, 0.7, -0.3], 4),
            upd(vec![0.2, -0.5, 0.9], 1),
            upd(vec![-0.6, 0.05, 0.25], 9),
        ];
        let z = ParamVector(vec![0.0; 3]);
        let got = aggregate(&z, &u).unwrap();
        for j in 0..3 {
            // independent oracle: mean in arrival order
            let mean = (u[0].delta[j] + u[1].delta[j] + u[2].delta[j]) / 3.0;
            assert!((got[j] - mean).abs() < 1e-15);
        }
        let mut rev = u.clone();
        rev.reverse();
        assert_eq!(aggregate(&z, &rev).unwrap(), got);
        assert!(aggregate(&z, &[upd(vec![0.0], 0)]).is_err());
        assert!(aggregate(&z, &[]).is_err());
    }

    fn small(k: usize, n: usize, t: usize) -> (FederationConfig, FederatedData) {
        let data = synthesize(k * 40, 3).unwrap();
        let fed = FederatedData::build(&data, k, 0.02, 3).unwrap();
        let mut cfg = FederationConfig::new(k, n, t, 11, PrivacySpec::new(1.0, 0.001, 0.01).unwrap());
        cfg.optimizer.learning_rate = 0.05;
        (cfg, fed)
    }

    #[test]
    fn frozen_learner_keeps_global() {
        let (mut cfg, data) = small(4, 1, 1);
        cfg.privacy = PrivacySpec::noiseless(1.0);
        cfg.optimizer.learning_rate = 0.0;
        let mut fed = Federation::new(cfg, &data, None, None).unwrap();
        let before = fed.global().clone();
        let loss = fed.val_loss();
        let rec = fed.run_episode().unwrap();
        assert_eq!(rec.global_params_after, before);
        assert_eq!(rec.global_val_loss, loss);
    }

    #[test]
    fn ledger_stop_yields_three_records() {
        let (mut cfg, data) = small(6, 3, 50);
        cfg.tau_delta = 0.0025;
        let recs = run_training(&cfg, &data, None, None).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs[2].stopped && !recs[1].stopped);
    }

    #[test]
    fn deterministic_and_parallel_invariant() {
        let (mut cfg, data) = small(10, 5, 4);
        let att = AttackConfig::mpelm(2, 1.0);
        let det = DetectorConfig::of(DetectorKind::Mix);
        let a = run_training(&cfg, &data, Some(&att), Some(&det)).unwrap();
        let b = run_training(&cfg, &data, Some(&att), Some(&det)).unwrap();
        cfg.parallel = false;
        let c = run_training(&cfg, &data, Some(&att), Some(&det)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn permissive_detector_is_a_no_op() {
        let (cfg, data) = small(10, 5, 3);
        let plain = run_training(&cfg, &data, None, None).unwrap();
        let lax = DetectorConfig {
            kind: DetectorKind::Norm,
            beta1: 1e9,
            d_max: 1e12,
            ..DetectorConfig::default()
        };
        let filtered = run_training(&cfg, &data, None, Some(&lax)).unwrap();
        for (p, f) in plain.iter().zip(&filtered) {
            assert!(f.flagged.is_empty());
            assert_eq!(p.global_params_after, f.global_params_after);
            assert_eq!(p.global_val_loss, f.global_val_loss);
        }
    }

    #[test]
    fn zero_gamma_attack_is_benign() {
        let (cfg, data) = small(10, 5, 3);
        let plain = run_training(&cfg, &data, None, None).unwrap();
        let mut att = AttackConfig::fixed_gamma(2, 0.0);
        att.gamma0 = 0.0;
        let attacked = run_training(&cfg, &data, Some(&att), None).unwrap();
        for (p, a) in plain.iter().zip(&attacked) {
            assert_eq!(p.submitted, a.submitted);
        }
    }

    #[test]
    fn all_flagged_episode_aborts() {
        let (mut cfg, data) = small(10, 5, 2);
        let strict = DetectorConfig {
            kind: DetectorKind::Norm,
            beta1: 1e-9,
            ..DetectorConfig::default()
        };
        let recs = run_training(&cfg, &data, None, Some(&strict)).unwrap();
        let init = Federation::new(cfg.clone(), &data, None, None).unwrap().global().clone();
        assert!(recs.iter().all(|r| r.aborted && r.flagged.len() == 5));
        assert_eq!(recs[1].global_params_after, init);
        cfg.strict_empty = true;
        assert!(matches!(
            run_training(&cfg, &data, None, Some(&strict)),
            Err(Error::EmptyAggregation { episode: 1 })
        ));
    }

    #[test]
    fn submitted_updates_match_selection() {
        let (cfg, data) = small(10, 4, 2);
        for rec in run_training(&cfg, &data, None, None).unwrap() {
            assert_eq!(rec.submitted.len(), 4);
            let ids: Vec<usize> = rec.submitted.iter().map(|u| u.node_id).collect();
            assert_eq!(ids, rec.selected);
            assert!(rec.flagged.is_subset(&rec.selected.iter().copied().collect()));
        }
    }
}
