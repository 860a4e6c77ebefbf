use ldpfl_wasm_demo::{compare, densities, sigma_curve, MAX_EPISODES};

#[test]
fn attacked_run_tracks_gamma() {
    let c = compare(0.7, 2, 6, true, 0.7, 3).unwrap();
    assert_eq!(c.benign_loss.len(), 6);
    assert_eq!(c.attacked_loss.len(), 6);
    assert_eq!(c.gamma[0], 0.7);
    assert!(c.benign_loss.iter().all(|l| l.is_finite()));
}

#[test]
fn fixed_zero_gamma_matches_benign() {
    let c = compare(0.7, 3, 4, false, 0.0, 5).unwrap();
    assert_eq!(c.benign_loss, c.attacked_loss);
}

#[test]
fn episodes_are_capped() {
    let c = compare(1.0, 1, 10_000, true, 1.0, 1).unwrap();
    assert_eq!(c.benign_loss.len(), MAX_EPISODES);
}

#[test]
fn bad_inputs_are_errors() {
    assert!(sigma_curve(0.001, 1.0, 0.0, 1.0, 5).is_err());
    assert!(densities(0.7, 0.001, 0.15, -1.0, 10).is_err());
    assert!(compare(0.7, 9, 3, true, 0.7, 1).is_err());
    assert!(compare(-0.7, 1, 3, true, 0.7, 1).is_err());
}
