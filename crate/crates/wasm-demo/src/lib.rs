//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export is a thin wrapper over a plain function so the same code
//! runs in native tests.

use ldpfl_core::adversary::{adversarial_mu, AttackConfig};
use ldpfl_core::data::{synthesize, FederatedData};
use ldpfl_core::dp::{calibrate_sigma, PrivacySpec};
use ldpfl_core::federation::{run_training, FederationConfig};
use wasm_bindgen::prelude::*;

/// Largest federation the page may request.
pub const MAX_EPISODES: usize = 60;

fn js(e: ldpfl_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `(ε, σ)` pairs on an even grid of `steps` points.
pub fn sigma_curve(delta: f64, sensitivity: f64, eps_min: f64, eps_max: f64, steps: usize) -> ldpfl_core::Result<Vec<(f64, f64)>> {
    let steps = steps.max(2);
    (0..steps)
        .map(|i| {
            let eps = eps_min + (eps_max - eps_min) * i as f64 / (steps - 1) as f64;
            calibrate_sigma(eps, delta, sensitivity).map(|s| (eps, s))
        })
        .collect()
}

/// Benign and adversarial noise densities for one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Densities {
    pub x: Vec<f64>,
    pub benign: Vec<f64>,
    pub adversarial: Vec<f64>,
    pub sigma_x: f64,
    pub mu: f64,
    /// KL divergence of the adversarial from the benign density.
    pub kl: f64,
}

fn gauss(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
}

pub fn densities(epsilon: f64, delta: f64, clip: f64, gamma: f64, points: usize) -> ldpfl_core::Result<Densities> {
    let spec = PrivacySpec::new(epsilon, delta, clip)?;
    let sigma_x = spec.noise_std();
    let mu = adversarial_mu(0.0, gamma, sigma_x)?;
    let points = points.max(2);
    let (lo, hi) = (-4.0 * sigma_x, mu + 4.0 * sigma_x);
    let x: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    Ok(Densities {
        benign: x.iter().map(|&v| gauss(v, 0.0, sigma_x)).collect(),
        adversarial: x.iter().map(|&v| gauss(v, mu, sigma_x)).collect(),
        kl: mu * mu / (2.0 * sigma_x * sigma_x),
        x,
        sigma_x,
        mu,
    })
}

/// Loss curves of a benign and an attacked run sharing every seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub benign_loss: Vec<f64>,
    pub attacked_loss: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Twenty nodes, eight per episode, 2 000 synthetic samples.
pub fn compare(epsilon: f64, m: usize, episodes: usize, adaptive: bool, gamma0: f64, seed: u64) -> ldpfl_core::Result<Comparison> {
    let episodes = episodes.clamp(1, MAX_EPISODES);
    let data = FederatedData::build(&synthesize(2_000, seed)?, 20, 0.02, seed)?;
    let mut cfg = FederationConfig::new(20, 8, episodes, seed, PrivacySpec::new(epsilon, 0.001, 0.15)?);
    cfg.optimizer.learning_rate = 0.05;
    cfg.tau_delta = 0.5;
    // no worker threads in the browser
    cfg.parallel = false;
    let attack = if adaptive {
        AttackConfig { gamma0, ..AttackConfig::mpelm(m, epsilon) }
    } else {
        AttackConfig::fixed_gamma(m, gamma0)
    };
    let benign = run_training(&cfg, &data, None, None)?;
    let attacked = run_training(&cfg, &data, Some(&attack), None)?;
    Ok(Comparison {
        benign_loss: benign.iter().map(|r| r.global_val_loss).collect(),
        attacked_loss: attacked.iter().map(|r| r.global_val_loss).collect(),
        gamma: attacked.iter().map(|r| r.gamma_t.unwrap_or(0.0)).collect(),
    })
}

/// Interleaved `[ε₀, σ₀, ε₁, σ₁, …]`.
#[wasm_bindgen(js_name = sigmaCurve)]
pub fn sigma_curve_js(delta: f64, sensitivity: f64, eps_min: f64, eps_max: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    Ok(sigma_curve(delta, sensitivity, eps_min, eps_max, steps)
        .map_err(js)?
        .into_iter()
        .flat_map(|(e, s)| [e, s])
        .collect())
}

#[wasm_bindgen]
pub struct DensityView(Densities);

#[wasm_bindgen]
impl DensityView {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.0.x.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn benign(&self) -> Vec<f64> {
        self.0.benign.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn adversarial(&self) -> Vec<f64> {
        self.0.adversarial.clone()
    }
    #[wasm_bindgen(getter, js_name = sigmaX)]
    pub fn sigma_x(&self) -> f64 {
        self.0.sigma_x
    }
    #[wasm_bindgen(getter)]
    pub fn mu(&self) -> f64 {
        self.0.mu
    }
    #[wasm_bindgen(getter)]
    pub fn kl(&self) -> f64 {
        self.0.kl
    }
}

#[wasm_bindgen(js_name = noiseDensities)]
pub fn densities_js(epsilon: f64, delta: f64, clip: f64, gamma: f64, points: usize) -> Result<DensityView, JsError> {
    densities(epsilon, delta, clip, gamma, points).map(DensityView).map_err(js)
}

#[wasm_bindgen]
pub struct ComparisonView(Comparison);

#[wasm_bindgen]
impl ComparisonView {
    #[wasm_bindgen(getter, js_name = benignLoss)]
    pub fn benign_loss(&self) -> Vec<f64> {
        self.0.benign_loss.clone()
    }
    #[wasm_bindgen(getter, js_name = attackedLoss)]
    pub fn attacked_loss(&self) -> Vec<f64> {
        self.0.attacked_loss.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn gamma(&self) -> Vec<f64> {
        self.0.gamma.clone()
    }
}

#[wasm_bindgen(js_name = compareRuns)]
pub fn compare_js(epsilon: f64, m: usize, episodes: usize, adaptive: bool, gamma0: f64, seed: u64) -> Result<ComparisonView, JsError> {
    compare(epsilon, m, episodes, adaptive, gamma0, seed).map(ComparisonView).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_curve_decreases() {
        let c = sigma_curve(0.001, 1.0, 0.1, 2.0, 20).unwrap();
        assert_eq!(c.len(), 20);
        assert!((c[19].0 - 2.0).abs() < 1e-12);
        assert!(c.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn kl_equals_gamma() {
        for gamma in [0.0, 0.5, 2.0, 3.0] {
            let d = densities(0.7, 0.001, 0.15, gamma, 50).unwrap();
            assert!((d.kl - gamma).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gamma_overlaps() {
        let d = densities(0.7, 0.001, 0.15, 0.0, 64).unwrap();
        assert_eq!(d.benign, d.adversarial);
    }
}
