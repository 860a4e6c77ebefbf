//! Acceptance suite: twelve isolated checks with pinned seeds.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ldpfl_core::adversary::AttackConfig;
use ldpfl_core::data::Sample;
use ldpfl_core::detection::{
    accuracy_rate_from_e2, detect, flagged_ids, loss_difference, DetectorConfig, DetectorKind, LossProbe,
    Orientation,
};
use ldpfl_core::dp::{add_noise, calibrate_sigma, PrivacySpec};
use ldpfl_core::federation::{final_loss, run_training, RoundRecord};
use ldpfl_core::model::{Mlp, ModelUpdate, ParamVector};
use ldpfl_core::rdp::{train, Action, Environment, RdpHyper};
use ldpfl_core::rng::{substream, Purpose};
use rand::Rng;

use crate::config::{AttackMode, ExperimentConfig};
use crate::presets::{damage_base, detection_base, with_attack, with_detector, with_fixed_gamma};
use crate::rdp_cmd;
use crate::run::{render, run};

/// Seeds every multi-seed criterion uses.
pub const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {}  {} ({:.1}s of {}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String), String>;

pub const CRITERIA: [(usize, &str, u64, Check); 12] = [
    (1, "gradient correctness", 10, c1_gradient),
    (2, "DP calibration", 30, c2_calibration),
    (3, "benign convergence", 120, c3_benign),
    (4, "privacy-utility direction", 600, c4_utility),
    (5, "single-attacker damage", 600, c5_single),
    (6, "gamma-monotonic damage", 900, c6_gamma),
    (7, "stealth direction", 1200, c7_stealth),
    (8, "gamma pinned to zero collapses to benign", 60, c8_collapse),
    (9, "rDP convergence", 300, c9_rdp),
    (10, "Q-learning exactness", 5, c10_exact),
    (11, "detector oracles", 30, c11_detectors),
    (12, "determinism", 300, c12_determinism),
];

/// Runs one criterion; panics and errors count as failures.
pub fn run_criterion(id: usize) -> Option<Outcome> {
    let &(id, name, budget, check) = CRITERIA.iter().find(|c| c.0 == id)?;
    let budget = Duration::from_secs(budget);
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(check));
    let elapsed = start.elapsed();
    let (passed, mut detail) = match result {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panic: {msg}"))
        }
    };
    let in_time = elapsed <= budget;
    if !in_time {
        detail.push_str("; over runtime budget");
    }
    Some(Outcome {
        id,
        name,
        passed: passed && in_time,
        detail,
        elapsed,
        budget,
    })
}

pub fn run_suite(only: &[usize]) -> Vec<Outcome> {
    CRITERIA
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.0))
        .filter_map(|c| run_criterion(c.0))
        .collect()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn final_of(cfg: &ExperimentConfig) -> Result<f64, String> {
    Ok(run("accept", cfg).map_err(err)?.summary.final_val_loss)
}

fn mean_final(cfgs: impl Iterator<Item = ExperimentConfig>) -> Result<f64, String> {
    let losses = cfgs.map(|c| final_of(&c)).collect::<Result<Vec<_>, _>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

// 1 -------------------------------------------------------------------------

/// Largest relative error between analytic and central-difference
/// gradients over `fixtures` random networks.
pub fn gradient_error(fixtures: usize) -> Result<f64, String> {
    const H: f64 = 1e-6;
    // denominators below this are treated as absolute error
    const FLOOR: f64 = 1e-3;
    let mut worst: f64 = 0.0;
    for f in 0..fixtures {
        let mut rng = substream(0x6AD, Purpose::Init, f as u64, 0);
        let depth = rng.random_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=8)).collect();
        let model = Mlp::new(&hidden);
        let params = model.init_uniform(&mut rng, 1.0);
        let batch: Vec<Sample> = (0..rng.random_range(1..=16))
            .map(|_| {
                let mut x = [0.0; 6];
                for v in x.iter_mut() {
                    *v = rng.random::<f64>();
                }
                Sample::new(x, rng.random::<f64>())
            })
            .collect();
        let grad = model.gradient(&params, &batch).map_err(err)?;
        for j in 0..params.len() {
            let mut p = params.0.clone();
            p[j] += H;
            let up = model.mse_loss(&p, &batch).map_err(err)?;
            p[j] -= 2.0 * H;
            let down = model.mse_loss(&p, &batch).map_err(err)?;
            let numeric = (up - down) / (2.0 * H);
            let rel = (grad[j] - numeric).abs() / grad[j].abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn c1_gradient() -> Result<(bool, String), String> {
    let worst = gradient_error(20)?;
    Ok((worst < 1e-4, format!("max relative error {worst:.2e} over 20 fixtures")))
}

// 2 -------------------------------------------------------------------------

/// Checks a σ formula at ε = 0.7, δ = 0.001, S = 1 against the closed form
/// and tests 10⁵ noise draws made with it.
pub fn check_calibration(calibrate: impl Fn(f64, f64, f64) -> ldpfl_core::Result<f64>) -> (bool, String) {
    const N: usize = 100_000;
    let expected = (2.0 * 1250f64.ln()).sqrt() / 0.7;
    let sigma = match calibrate(0.7, 0.001, 1.0) {
        Ok(s) => s,
        Err(e) => return (false, format!("calibration failed: {e}")),
    };
    let sigma_ok = (sigma - expected).abs() < 1e-9;
    let spec = PrivacySpec {
        epsilon: 0.7,
        delta: 0.001,
        clip_c: 1.0,
        sensitivity: 1.0,
        sigma,
    };
    let zero = ModelUpdate::new(ParamVector::zeros(N), 0, 0);
    let draws = add_noise(&zero, &spec, &mut substream(0xD9, Purpose::Noise, 0, 0));
    let mean = draws.delta.iter().sum::<f64>() / N as f64;
    let var = draws.delta.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (N - 1) as f64;
    let mean_ok = mean.abs() < 4.0 * expected / (N as f64).sqrt();
    let var_ok = (var / (expected * expected) - 1.0).abs() < 0.05;
    (
        sigma_ok && mean_ok && var_ok,
        format!(
            "sigma {sigma:.12} (closed form {expected:.12}), sample mean {mean:.4}, variance ratio {:.4}",
            var / (expected * expected)
        ),
    )
}

fn c2_calibration() -> Result<(bool, String), String> {
    Ok(check_calibration(calibrate_sigma))
}

// 3 -------------------------------------------------------------------------

fn c3_benign() -> Result<(bool, String), String> {
    let base = damage_base(SEEDS[0]);
    let mut fed = base.federation_config();
    fed.privacy = PrivacySpec::noiseless(base.privacy.clip);
    let data = base.federated_data().map_err(err)?;
    let recs = run_training(&fed, &data, None, None).map_err(err)?;
    let initial = recs[0].val_loss_before;
    let fin = final_loss(&recs, base.federation.tail).map_err(err)?;
    Ok((
        fin < 0.5 * initial,
        format!("initial {initial:.5}, final {fin:.5}, ratio {:.3}", fin / initial),
    ))
}

// 4 -------------------------------------------------------------------------

fn c4_utility() -> Result<(bool, String), String> {
    let mut means = Vec::new();
    for eps in [0.5, 0.7, 1.0] {
        means.push(mean_final(SEEDS.iter().map(|&s| {
            let mut c = damage_base(s);
            c.privacy.epsilon = eps;
            c
        }))?);
    }
    let ok = means.windows(2).all(|w| w[0] >= w[1]);
    Ok((
        ok,
        format!(
            "mean final loss eps 0.5/0.7/1.0 = {:.5}/{:.5}/{:.5}",
            means[0], means[1], means[2]
        ),
    ))
}

// 5 -------------------------------------------------------------------------

fn c5_single() -> Result<(bool, String), String> {
    let mut wins = 0;
    let mut rel = Vec::new();
    for &s in &SEEDS {
        let benign = final_of(&damage_base(s))?;
        let attacked = final_of(&with_attack(damage_base(s), AttackMode::Mpelm, 1))?;
        if attacked > benign {
            wins += 1;
        }
        rel.push(format!("{:+.1}%", 100.0 * (attacked - benign) / benign));
    }
    Ok((
        wins >= 4,
        format!("attacked worse in {wins}/5 pairs ({})", rel.join(", ")),
    ))
}

// 6 -------------------------------------------------------------------------

fn c6_gamma() -> Result<(bool, String), String> {
    let mut means = Vec::new();
    for gamma in [3.0, 2.0, 0.0] {
        means.push(mean_final(
            SEEDS.iter().map(|&s| with_fixed_gamma(damage_base(s), 3, gamma)),
        )?);
    }
    let ok = means[0] >= means[1] && means[1] >= means[2];
    Ok((
        ok,
        format!(
            "mean final loss gamma 3/2/0 = {:.5}/{:.5}/{:.5}",
            means[0], means[1], means[2]
        ),
    ))
}

// 7 -------------------------------------------------------------------------

fn mean_d_acc(kind: DetectorKind, mode: AttackMode) -> Result<f64, String> {
    let mut total = 0.0;
    for &s in &SEEDS {
        let c = with_detector(with_attack(detection_base(s), mode, 3), kind, 1.0);
        let out = run("accept", &c).map_err(err)?;
        total += out.summary.d_acc.ok_or("detector produced no accuracy")?;
    }
    Ok(total / SEEDS.len() as f64)
}

fn c7_stealth() -> Result<(bool, String), String> {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [DetectorKind::Norm, DetectorKind::Accuracy, DetectorKind::Mix] {
        let rmd = mean_d_acc(kind, AttackMode::Rmd)?;
        let mpelm = mean_d_acc(kind, AttackMode::Mpelm)?;
        ok &= mpelm <= rmd;
        parts.push(format!("{kind} rmd {rmd:.2} mpelm {mpelm:.2} gap {:.2}", rmd - mpelm));
    }
    Ok((ok, parts.join("; ")))
}

// 8 -------------------------------------------------------------------------

/// Replays the degree-of-poisoning rule from the recorded attacker losses
/// and compares it with the recorded γ trace.
pub fn verify_gamma_trace(records: &[RoundRecord], attack: &AttackConfig) -> Result<(), String> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let mut history: Vec<f64> = Vec::new();
    let mut gamma_last = attack.gamma0;
    for r in records {
        let Some(loss) = r.attacker_val_loss else {
            continue;
        };
        let ratio = if history.is_empty() {
            0.0
        } else {
            let mean = history.iter().sum::<f64>() / history.len() as f64;
            if mean == 0.0 {
                1.0
            } else {
                loss / mean
            }
        };
        let gamma = if ratio > attack.r_hi {
            0.0
        } else if ratio < attack.r_lo {
            gamma_last * (1.0 + attack.rho * ratio)
        } else {
            gamma_last * (1.0 - attack.rho * ratio)
        };
        if gamma != 0.0 {
            gamma_last = gamma;
        }
        let got = r.gamma_t.ok_or_else(|| format!("episode {}: no gamma recorded", r.episode))?;
        if !close(got, gamma) {
            return Err(format!("episode {}: recorded gamma {got}, replay {gamma}", r.episode));
        }
        history.push(loss);
    }
    Ok(())
}

fn c8_collapse() -> Result<(bool, String), String> {
    let mut base = damage_base(SEEDS[0]);
    base.federation.t = 10;
    let data = base.federated_data().map_err(err)?;
    let fed = base.federation_config();
    let benign = run_training(&fed, &data, None, None).map_err(err)?;
    let pinned = run_training(&fed, &data, Some(&AttackConfig::fixed_gamma(3, 0.0)), None).map_err(err)?;
    let identical = benign.len() == pinned.len()
        && benign.iter().zip(&pinned).all(|(a, b)| {
            a.submitted == b.submitted
                && a.global_params_after == b.global_params_after
                && a.global_val_loss.to_bits() == b.global_val_loss.to_bits()
        });

    let adaptive = AttackConfig::mpelm(3, base.privacy.epsilon);
    let recs = run_training(&fed, &data, Some(&adaptive), None).map_err(err)?;
    let first_is_eps = recs[0].gamma_t == Some(base.privacy.epsilon);
    let replay = verify_gamma_trace(&recs, &adaptive);
    let detail = format!(
        "gamma=0 run bitwise equal to benign: {identical}; first gamma = eps: {first_is_eps}; gamma trace replay: {}",
        replay.as_ref().map_or_else(|e| e.clone(), |_| "ok".to_string())
    );
    Ok((identical && first_is_eps && replay.is_ok(), detail))
}

// 9 -------------------------------------------------------------------------

fn c9_rdp() -> Result<(bool, String), String> {
    let base = detection_base(SEEDS[0]);
    let tables = rdp_cmd::generate_tables(&base).map_err(err)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.01, 0.001, 0.0001] {
        for zeta in [0.15, 0.2, 0.5, 1.0] {
            let mut c = base.clone();
            c.rdp.alpha = alpha;
            c.rdp.zeta = zeta;
            let (_, conv) = rdp_cmd::train(&tables, &c).map_err(err)?;
            let plateau = conv.reward_rel_std < 0.01;
            if zeta < 1.0 {
                ok &= conv.delta_q < 1e-3 && plateau;
            }
            parts.push(format!(
                "a={alpha} z={zeta}: dQ {:.1e}, reward std {:.2}%{}",
                conv.delta_q,
                100.0 * conv.reward_rel_std,
                if zeta < 1.0 { "" } else { " (not asserted)" }
            ));
        }
    }
    Ok((ok, parts.join("; ")))
}

// 10 ------------------------------------------------------------------------

/// Three states on a line; each action shifts by its offset, clamped.
struct Chain {
    rewards: [[f64; 5]; 3],
}

impl Environment for Chain {
    fn num_states(&self) -> usize {
        3
    }
    fn next_state(&self, s: usize, a: Action) -> usize {
        (s as isize + a.offset()).clamp(0, 2) as usize
    }
    fn reward(&self, s: usize, a: Action, _next: usize) -> f64 {
        self.rewards[s][a.index()]
    }
}

fn c10_exact() -> Result<(bool, String), String> {
    let env = Chain {
        rewards: [
            [0.2, 0.0, 0.1, 1.0, 0.4],
            [0.3, 0.6, 0.9, 0.1, 0.5],
            [1.2, 0.2, 0.0, 0.7, 0.3],
        ],
    };
    let zeta = 0.6;
    // exact values by iterating the Bellman operator to its fixed point
    let mut exact = [[0.0f64; 5]; 3];
    loop {
        let v: Vec<f64> = exact.iter().map(|r| r.iter().copied().fold(f64::MIN, f64::max)).collect();
        let mut next = exact;
        for (s, row) in next.iter_mut().enumerate() {
            for a in Action::ALL {
                row[a.index()] = env.rewards[s][a.index()] + zeta * v[env.next_state(s, a)];
            }
        }
        let change = next
            .iter()
            .flatten()
            .zip(exact.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        exact = next;
        if change < 1e-14 {
            break;
        }
    }
    let hyper = RdpHyper {
        alpha: 0.5,
        zeta,
        explore_min: 0.5,
        max_episodes: 4000,
        ..RdpHyper::default()
    };
    let trained = train(&env, &hyper, 11).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (s, row) in exact.iter().enumerate() {
        for a in Action::ALL {
            worst = worst.max((trained.q.get(s, a) - row[a.index()]).abs());
        }
    }
    Ok((worst < 1e-6, format!("max |Q - Q*| = {worst:.2e}")))
}

// 11 ------------------------------------------------------------------------

fn updates(vs: &[&[f64]]) -> Vec<ModelUpdate> {
    vs.iter()
        .enumerate()
        .map(|(i, v)| ModelUpdate::new(ParamVector(v.to_vec()), i, 0))
        .collect()
}

fn norm_fixtures() -> Result<Vec<String>, String> {
    let mut failures = Vec::new();
    let cfg = DetectorConfig::of(DetectorKind::Norm);
    let mut expect = |name: &str, ups: Vec<ModelUpdate>, cfg: &DetectorConfig, want: &[(f64, f64)]| {
        match detect(&ups, cfg, None) {
            Ok(v) => {
                for (i, (e1, rate)) in want.iter().enumerate() {
                    let got_e1 = v[i].components.e1.unwrap_or(f64::NAN);
                    if (got_e1 - e1).abs() > 1e-12 || v[i].rate != *rate {
                        failures.push(format!("{name}[{i}]: e1 {got_e1} rate {}", v[i].rate));
                    }
                }
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    };
    // standard of the outlier is (1, 0): d = 4, e1 = 4, rate clamps to 0;
    // each inlier sees (5/3, 0): e1 = (4/9) / (25/9)
    expect(
        "outlier",
        updates(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[3.0, 0.0]]),
        &cfg,
        &[(0.16, 1.0), (0.16, 1.0), (0.16, 1.0), (4.0, 0.0)],
    );
    // e1 exactly at β1 passes
    expect("boundary", updates(&[&[2.0, 0.0], &[1.0, 0.0]]), &cfg, &[(1.0, 1.0), (0.25, 1.0)]);
    let half = DetectorConfig { beta1: 0.5, ..cfg };
    expect("partial", updates(&[&[2.0, 0.0], &[1.0, 0.0]]), &half, &[(1.0, 0.5), (0.25, 1.0)]);
    // a zero standard saturates at d_max
    expect("zero-standard", updates(&[&[1.0, 0.0], &[0.0, 0.0]]), &cfg, &[(10.0, 0.0), (1.0, 1.0)]);
    expect("identical", updates(&[&[0.5, 0.5], &[0.5, 0.5]]), &cfg, &[(0.0, 1.0), (0.0, 1.0)]);
    Ok(failures)
}

fn accuracy_fixtures() -> Result<Vec<String>, String> {
    let mut failures = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if got != want {
            failures.push(format!("{name}: got {got}, want {want}"));
        }
    };
    check("reversed worse", loss_difference(0.5, 0.25, Orientation::Reversed), 0.5);
    check("reversed better", loss_difference(0.25, 0.5, Orientation::Reversed), 0.0);
    check("as-written", loss_difference(0.25, 0.5, Orientation::AsWritten), 0.5);
    check("as-written better", loss_difference(0.5, 0.25, Orientation::AsWritten), 0.0);
    check("e2 at beta2", accuracy_rate_from_e2(0.1, 0.1), 1.0);
    check("e2 above", accuracy_rate_from_e2(0.25, 0.1), 0.75);
    check("e2 beyond one", accuracy_rate_from_e2(1.5, 0.1), 0.0);

    // linear model on all-zero features predicts its bias; targets are 1
    let model = Mlp::new(&[]);
    let global = ParamVector::zeros(model.param_count());
    let validation = vec![Sample::new([0.0; 6], 1.0); 4];
    let probe = LossProbe {
        model: &model,
        global: &global,
        validation: &validation,
    };
    let bias = |b: f64| {
        let mut v = vec![0.0; 7];
        v[6] = b;
        v
    };
    let (a, b, c, d) = (bias(0.5), bias(0.5), bias(0.5), bias(-1.0));
    let ups = updates(&[&a, &b, &c, &d]);
    let v = detect(&ups, &DetectorConfig::of(DetectorKind::Accuracy), Some(&probe)).map_err(err)?;
    // outlier: loss 4 against the standard's 0.25, e2 = 3.75 / 4
    check("model outlier e2", v[3].components.e2.unwrap_or(f64::NAN), 0.9375);
    check("model outlier rate", v[3].rate, 0.0625);
    // inliers beat their standard (bias 0, loss 1)
    for (i, verdict) in v.iter().take(3).enumerate() {
        check(&format!("model inlier {i}"), verdict.rate, 1.0);
    }
    Ok(failures)
}

/// Mix flags exactly the union of norm and accuracy, at the lower rate,
/// over `episodes` random episodes. Returns the violations and the number
/// of episodes in which norm and accuracy disagreed.
pub fn mix_union_fuzz(episodes: usize) -> Result<(usize, usize), String> {
    let model = Mlp::new(&[]);
    let q = model.param_count();
    let mut violations = 0;
    let mut disagreements = 0;
    for ep in 0..episodes {
        let mut rng = substream(0x313, Purpose::Noise, 0, ep as u64);
        let global = ParamVector((0..q).map(|_| rng.random_range(-0.5..0.5)).collect());
        let validation: Vec<Sample> = (0..8)
            .map(|_| {
                let mut x = [0.0; 6];
                for v in x.iter_mut() {
                    *v = rng.random::<f64>();
                }
                Sample::new(x, rng.random::<f64>())
            })
            .collect();
        let n = rng.random_range(2..=8);
        let ups: Vec<ModelUpdate> = (0..n)
            .map(|i| {
                let scale = if rng.random_bool(0.3) { 3.0 } else { 0.3 };
                let delta = (0..q).map(|_| scale * (rng.random::<f64>() - 0.5)).collect();
                ModelUpdate::new(ParamVector(delta), i, ep)
            })
            .collect();
        let base = DetectorConfig {
            beta1: rng.random_range(0.5..3.0),
            beta2: rng.random_range(0.0..0.3),
            ..DetectorConfig::default()
        };
        let probe = LossProbe {
            model: &model,
            global: &global,
            validation: &validation,
        };
        let run = |kind| detect(&ups, &DetectorConfig { kind, ..base }, Some(&probe)).map_err(err);
        let norm = run(DetectorKind::Norm)?;
        let acc = run(DetectorKind::Accuracy)?;
        let mix = run(DetectorKind::Mix)?;
        let union: BTreeSet<usize> = flagged_ids(&norm).union(&flagged_ids(&acc)).copied().collect();
        let rates_ok = mix
            .iter()
            .zip(norm.iter().zip(&acc))
            .all(|(m, (a, b))| m.rate == a.rate.min(b.rate));
        if flagged_ids(&mix) != union || !rates_ok {
            violations += 1;
        }
        if flagged_ids(&norm) != flagged_ids(&acc) {
            disagreements += 1;
        }
    }
    Ok((violations, disagreements))
}

fn c11_detectors() -> Result<(bool, String), String> {
    let mut failures = norm_fixtures()?;
    failures.extend(accuracy_fixtures()?);
    let (violations, disagreements) = mix_union_fuzz(1000)?;
    let ok = failures.is_empty() && violations == 0;
    let fuzz = format!("mix union violations {violations}/1000 ({disagreements} episodes where norm and accuracy differ)");
    let detail = if failures.is_empty() {
        format!("all fixtures exact; {fuzz}")
    } else {
        format!("fixture mismatches: {}; {fuzz}", failures.join(", "))
    };
    Ok((ok, detail))
}

// 12 ------------------------------------------------------------------------

fn c12_determinism() -> Result<(bool, String), String> {
    let cells = [
        (
            "detection mix/mpelm",
            with_detector(with_attack(detection_base(SEEDS[0]), AttackMode::Mpelm, 3), DetectorKind::Mix, 1.0),
        ),
        ("damage mpelm m=1", with_attack(damage_base(SEEDS[0]), AttackMode::Mpelm, 1)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, cfg) in cells {
        let mut serial = cfg.clone();
        serial.federation.parallel = false;
        let a = render(&run(name, &cfg).map_err(err)?);
        let b = render(&run(name, &cfg).map_err(err)?);
        let mut c = render(&run(name, &serial).map_err(err)?);
        // the resolved config records the parallel flag itself
        c.insert("config.resolved.toml", a["config.resolved.toml"].clone());
        let same = a == b && a == c;
        ok &= same;
        parts.push(format!("{name}: {}", if same { "identical" } else { "DIFFERENT" }));
    }
    Ok((ok, parts.join("; ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_criteria_pass() {
        for id in [1, 2, 10, 11] {
            let o = run_criterion(id).unwrap();
            assert!(o.passed, "{}", o.line());
        }
    }

    #[test]
    fn tampered_sigma_fails_calibration() {
        let tampered = |eps: f64, delta: f64, s: f64| Ok((2.0 * (1.0 / delta).ln()).sqrt() * s / eps);
        assert!(!check_calibration(tampered).0);
        assert!(check_calibration(calibrate_sigma).0);
    }

    #[test]
    fn tampered_gamma_branch_fails_replay() {
        let mut base = damage_base(1);
        base.federation.t = 8;
        let data = base.federated_data().unwrap();
        let attack = AttackConfig::mpelm(3, 0.7);
        let mut recs = run_training(&base.federation_config(), &data, Some(&attack), None).unwrap();
        verify_gamma_trace(&recs, &attack).unwrap();
        // rewrite the trace with the increase and decrease branches swapped
        let mut hist: Vec<f64> = Vec::new();
        let mut last = attack.gamma0;
        for r in recs.iter_mut() {
            let loss = r.attacker_val_loss.unwrap();
            let ratio = if hist.is_empty() { 0.0 } else { loss / (hist.iter().sum::<f64>() / hist.len() as f64) };
            let g = if ratio > attack.r_hi {
                0.0
            } else if ratio < attack.r_lo {
                last - attack.rho * ratio * last
            } else {
                last + attack.rho * ratio * last
            };
            if g != 0.0 {
                last = g;
            }
            r.gamma_t = Some(g);
            hist.push(loss);
        }
        assert!(verify_gamma_trace(&recs, &attack).is_err());
    }

    #[test]
    fn unknown_criterion_is_none() {
        assert!(run_criterion(13).is_none());
        assert!(run_suite(&[99]).is_empty());
    }
}
