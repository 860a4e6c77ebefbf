use std::collections::BTreeSet;
use std::io::Write;

use ldpfl_core::adversary::AttackConfig;
use ldpfl_core::data::{ingest_csv, synthesize, FederatedData, MissingPolicy, HEADER};
use ldpfl_core::detection::{DetectorConfig, DetectorKind};
use ldpfl_core::dp::PrivacySpec;
use ldpfl_core::federation::{final_loss, run_training, FederationConfig};
use ldpfl_core::model::checkpoint;
use ldpfl_core::rdp::{default_grid, generate_loss_tables, train_rdp, LossTables, RdpHyper, TableSpec};

fn small(seed: u64) -> (FederationConfig, FederatedData) {
    let data = FederatedData::build(&synthesize(2_000, seed).unwrap(), 20, 0.05, seed).unwrap();
    let mut cfg = FederationConfig::new(20, 8, 6, seed, PrivacySpec::new(0.7, 0.001, 0.1).unwrap());
    cfg.optimizer.learning_rate = 0.05;
    cfg.tau_delta = 0.5;
    (cfg, data)
}

#[test]
fn csv_to_training_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("power.txt");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "{HEADER}").unwrap();
    for i in 0..400 {
        let a = 0.5 + (i % 17) as f64 * 0.1;
        if i % 50 == 7 {
            writeln!(f, "16/12/2006;17:{:02}:00;?;?;?;?;?;?;", i % 60).unwrap();
        } else {
            writeln!(
                f,
                "16/12/2006;17:{:02}:00;{a:.3};0.418;234.84;{:.1};0.000;1.000;17.000",
                i % 60,
                a * 4.0
            )
            .unwrap();
        }
    }
    drop(f);
    let ingested = ingest_csv(&path, MissingPolicy::DropRow).unwrap();
    assert_eq!(ingested.raw_rows, 400);
    assert_eq!(ingested.dropped_missing, 8);
    assert_eq!(ingested.samples.len(), 392);

    let fed = FederatedData::build(&ingested.samples, 10, 0.05, 3).unwrap();
    let cfg = FederationConfig::new(10, 4, 3, 3, PrivacySpec::new(1.0, 0.001, 0.1).unwrap());
    let recs = run_training(&cfg, &fed, None, None).unwrap();
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| r.global_val_loss.is_finite()));
}

#[test]
fn attacked_and_filtered_run_is_consistent() {
    let (cfg, data) = small(4);
    let attack = AttackConfig::mpelm(2, 0.7);
    let det = DetectorConfig::of(DetectorKind::Mix);
    let recs = run_training(&cfg, &data, Some(&attack), Some(&det)).unwrap();
    for r in &recs {
        assert_eq!(r.compromised.len(), 2);
        assert_eq!(r.verdicts.len(), r.selected.len());
        let flagged: BTreeSet<usize> = r.verdicts.iter().filter(|v| v.flagged).map(|v| v.node_id).collect();
        assert_eq!(flagged, r.flagged);
        assert!(r.gamma_t.is_some());
    }
    let again = run_training(&cfg, &data, Some(&attack), Some(&det)).unwrap();
    assert_eq!(recs, again);
}

#[test]
fn checkpoint_restores_the_global_model() {
    let (cfg, data) = small(5);
    let mut fed = ldpfl_core::federation::Federation::new(cfg, &data, None, None).unwrap();
    fed.run().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("global.ckpt");
    checkpoint::save(&path, fed.model(), fed.global()).unwrap();
    let (model, params) = checkpoint::load(&path).unwrap();
    assert_eq!(&model, fed.model());
    assert_eq!(&params, fed.global());
    let loss = model.mse_loss(&params, &data.pooled_validation).unwrap();
    assert_eq!(loss, fed.val_loss());
}

#[test]
fn loss_tables_feed_the_agent() {
    let (cfg, data) = small(6);
    let grid: Vec<f64> = default_grid().into_iter().step_by(4).collect();
    let spec = TableSpec { federation: cfg, data: &data, m: 2, tail: 2 };
    let tables = generate_loss_tables(&grid, &[2.0], &spec, &[1, 2]).unwrap();
    assert_eq!(tables.cells.len(), grid.len() * 2 * 2);
    let mut buf = Vec::new();
    tables.write_csv(&mut buf).unwrap();
    let back = LossTables::read_csv(buf.as_slice()).unwrap();
    let hyper = RdpHyper { max_episodes: 2_000, ..RdpHyper::default() };
    let a = train_rdp(&tables, &hyper, 9).unwrap();
    let b = train_rdp(&back, &hyper, 9).unwrap();
    assert_eq!(a.epsilon_star, b.epsilon_star);
    assert!(grid.contains(&a.epsilon_star));
    assert_eq!(a.training.trace.len(), 2_000);
}

#[test]
fn final_loss_of_benign_run_beats_the_start() {
    let (mut cfg, data) = small(7);
    cfg.privacy = PrivacySpec::noiseless(0.1);
    cfg.t = 15;
    let recs = run_training(&cfg, &data, None, None).unwrap();
    assert!(final_loss(&recs, 3).unwrap() < recs[0].val_loss_before);
}
