//! Named experiment grids.
//!
//! Two desk scales exist because one clipping threshold cannot serve both
//! goals at K = 100, n = 30. A large threshold lets a single attacker move
//! the global loss but makes every update look anomalous. A small one keeps
//! the DP noise within the detectors' tolerance, which is where stealth can
//! be measured.

use ldpfl_core::detection::DetectorKind;

use crate::config::{AttackMode, ExperimentConfig};

/// Clipping threshold of the damage scale.
pub const DAMAGE_CLIP: f64 = 0.15;
/// Clipping threshold of the detection scale.
pub const DETECTION_CLIP: f64 = 0.005;
pub const SEEDS_PER_CELL: u64 = 5;

pub const NAMES: &[&str] = &[
    "benign",
    "fig4-small",
    "damage",
    "detection",
    "fig5",
    "fig6",
    "fig7",
    "fig8",
];

pub fn damage_base(seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    };
    c.privacy.clip = DAMAGE_CLIP;
    c
}

pub fn detection_base(seed: u64) -> ExperimentConfig {
    let mut c = damage_base(seed);
    c.privacy.clip = DETECTION_CLIP;
    c
}

pub fn with_attack(mut c: ExperimentConfig, mode: AttackMode, m: usize) -> ExperimentConfig {
    c.attack.mode = mode;
    c.attack.m = m;
    c
}

/// Non-adaptive α-MPELM at a fixed degree of poisoning.
pub fn with_fixed_gamma(c: ExperimentConfig, m: usize, gamma: f64) -> ExperimentConfig {
    let mut c = with_attack(c, AttackMode::Mpelm, m);
    c.attack.adaptive = false;
    c.attack.gamma0 = Some(gamma);
    c
}

pub fn with_detector(mut c: ExperimentConfig, kind: DetectorKind, beta1: f64) -> ExperimentConfig {
    c.detector.kind = kind;
    c.detector.beta1 = beta1;
    c
}

fn seeds(first: u64) -> impl Iterator<Item = u64> + Clone {
    first..first + SEEDS_PER_CELL
}

fn stealth_grid(first: u64, kind: DetectorKind) -> Vec<(String, ExperimentConfig)> {
    let mut cells = Vec::new();
    for beta1 in [1.0, 3.0] {
        for m in [3, 6, 9] {
            for mode in [AttackMode::Rmd, AttackMode::Mpelm] {
                for s in seeds(first) {
                    let c = with_detector(with_attack(detection_base(s), mode, m), kind, beta1);
                    cells.push((format!("{kind}/beta1={beta1}/m={m}/{mode}/seed={s}"), c));
                }
            }
        }
    }
    cells
}

/// Expands a preset into labelled runs. `first_seed` starts each cell's
/// block of five consecutive seeds.
pub fn expand(name: &str, first_seed: u64) -> Option<Vec<(String, ExperimentConfig)>> {
    let mut cells = Vec::new();
    match name {
        "benign" => {
            for s in seeds(first_seed) {
                cells.push((format!("benign/seed={s}"), damage_base(s)));
            }
        }
        "fig4-small" => {
            for eps in [0.5, 0.7, 1.0] {
                for s in seeds(first_seed) {
                    let mut c = damage_base(s);
                    c.privacy.epsilon = eps;
                    cells.push((format!("eps={eps}/m=0/seed={s}"), c.clone()));
                    for gamma in [2.0, 3.0] {
                        for m in 1..=3 {
                            let label = format!("eps={eps}/gamma={gamma}/m={m}/seed={s}");
                            cells.push((label, with_fixed_gamma(c.clone(), m, gamma)));
                        }
                    }
                }
            }
        }
        "damage" => {
            for s in seeds(first_seed) {
                for eps in [0.5, 0.7, 1.0] {
                    let mut c = damage_base(s);
                    c.privacy.epsilon = eps;
                    cells.push((format!("benign/eps={eps}/seed={s}"), c));
                }
                let c = damage_base(s);
                cells.push((format!("mpelm/m=1/seed={s}"), with_attack(c.clone(), AttackMode::Mpelm, 1)));
                for gamma in [0.0, 2.0, 3.0] {
                    cells.push((format!("fixed/gamma={gamma}/m=3/seed={s}"), with_fixed_gamma(c.clone(), 3, gamma)));
                }
            }
        }
        "detection" => {
            for kind in [DetectorKind::Norm, DetectorKind::Accuracy, DetectorKind::Mix] {
                for mode in [AttackMode::Rmd, AttackMode::Mpelm] {
                    for s in seeds(first_seed) {
                        let c = with_detector(with_attack(detection_base(s), mode, 3), kind, 1.0);
                        cells.push((format!("{kind}/{mode}/seed={s}"), c));
                    }
                }
            }
        }
        "fig5" => cells = stealth_grid(first_seed, DetectorKind::Norm),
        "fig6" => cells = stealth_grid(first_seed, DetectorKind::Accuracy),
        "fig7" => cells = stealth_grid(first_seed, DetectorKind::Mix),
        "fig8" => {
            for s in seeds(first_seed) {
                let mut c = with_attack(damage_base(s), AttackMode::Mpelm, 3);
                c.federation.t = 50;
                cells.push((format!("gamma-trace/seed={s}"), c));
            }
        }
        _ => return None,
    }
    Some(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_expands_to_valid_configs() {
        for name in NAMES {
            let cells = expand(name, 1).unwrap();
            assert!(!cells.is_empty(), "{name}");
            for (label, c) in &cells {
                c.validate().unwrap_or_else(|e| panic!("{name} {label}: {e}"));
            }
            let mut labels: Vec<_> = cells.iter().map(|(l, _)| l.clone()).collect();
            labels.sort();
            labels.dedup();
            assert_eq!(labels.len(), cells.len(), "{name} labels must be unique");
        }
        assert!(expand("nope", 1).is_none());
    }

    #[test]
    fn fig4_small_grid_shape() {
        let cells = expand("fig4-small", 1).unwrap();
        // 3 ε × (1 benign + 2 γ × 3 m) × 5 seeds
        assert_eq!(cells.len(), 3 * 7 * 5);
        assert!(cells.iter().all(|(_, c)| c.federation.k == 100 && c.federation.n == 30));
        let eps: std::collections::BTreeSet<String> =
            cells.iter().map(|(_, c)| c.privacy.epsilon.to_string()).collect();
        assert_eq!(eps.into_iter().collect::<Vec<_>>(), vec!["0.5", "0.7", "1"]);
    }

    #[test]
    fn stealth_presets_use_the_detection_scale() {
        let cells = expand("fig6", 1).unwrap();
        assert_eq!(cells.len(), 2 * 3 * 2 * 5);
        assert!(cells.iter().all(|(_, c)| c.privacy.clip == DETECTION_CLIP
            && c.detector.kind == DetectorKind::Accuracy));
    }
}
