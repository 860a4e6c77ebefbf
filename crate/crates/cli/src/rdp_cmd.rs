//! Loss-table generation and rDP training front ends.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use ldpfl_core::rdp::{
    generate_loss_tables, moving_average, train_rdp, trailing_mean, trailing_std, write_qtable_csv,
    write_trace_csv, LossTables, RdpEnv, RdpOutcome, TableSpec,
};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Episodes averaged when judging the reward plateau. The exploration floor
/// perturbs individual episodes; the plateau is a property of the smoothed
/// curve.
pub const REWARD_SMOOTHING: usize = 100;

pub const SUMMARY_SCHEMA: &str = "# schema: ldpfl/rdp_summary v1";

pub fn generate_tables(cfg: &ExperimentConfig) -> Result<LossTables, CliError> {
    cfg.validate()?;
    let data = cfg.federated_data()?;
    let spec = TableSpec {
        federation: cfg.federation_config(),
        data: &data,
        m: cfg.rdp.m,
        tail: cfg.federation.tail,
    };
    Ok(generate_loss_tables(&cfg.rdp.grid, &cfg.rdp.gammas, &spec, &cfg.rdp.table_seeds)?)
}

pub fn read_tables(path: &Path) -> Result<LossTables, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(LossTables::read_csv(BufReader::new(f))?)
}

pub fn write_tables(tables: &LossTables, path: &Path) -> Result<(), CliError> {
    let mut buf = Vec::new();
    tables.write_csv(&mut buf)?;
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

/// Convergence figures of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub alpha: f64,
    pub zeta: f64,
    pub epsilon_star: f64,
    /// Trailing mean of the per-episode mean |ΔQ|.
    pub delta_q: f64,
    pub reward_mean: f64,
    /// Trailing std / mean of the smoothed reward curve.
    pub reward_rel_std: f64,
    /// Same ratio on the raw per-episode totals.
    pub raw_reward_rel_std: f64,
}

pub fn convergence(out: &RdpOutcome, cfg: &ExperimentConfig) -> Convergence {
    let w = cfg.rdp.window;
    let raw: Vec<f64> = out.training.trace.iter().map(|r| r.cumulative_reward).collect();
    let smooth = moving_average(&raw, REWARD_SMOOTHING);
    let mean = trailing_mean(&smooth, w);
    Convergence {
        alpha: cfg.rdp.alpha,
        zeta: cfg.rdp.zeta,
        epsilon_star: out.epsilon_star,
        delta_q: trailing_mean(&out.training.q.delta_trace, w),
        reward_mean: mean,
        reward_rel_std: trailing_std(&smooth, w) / mean.abs(),
        raw_reward_rel_std: trailing_std(&raw, w) / trailing_mean(&raw, w).abs(),
    }
}

pub fn train(tables: &LossTables, cfg: &ExperimentConfig) -> Result<(RdpOutcome, Convergence), CliError> {
    let out = train_rdp(tables, &cfg.rdp.hyper(), cfg.seed)?;
    let conv = convergence(&out, cfg);
    Ok((out, conv))
}

/// Writes the Q-table, trace, policy and convergence summary into `dir`.
pub fn write_training(
    tables: &LossTables,
    cfg: &ExperimentConfig,
    out: &RdpOutcome,
    conv: &Convergence,
    dir: &Path,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let env = RdpEnv::new(tables.clone(), &cfg.rdp.hyper())?;
    let mut q = Vec::new();
    write_qtable_csv(&env, &out.training.q, &mut q)?;
    let mut trace = Vec::new();
    write_trace_csv(&out.training.trace, &mut trace)?;
    let mut policy = String::from("# schema: ldpfl/rdp_policy v1\neps_index,epsilon,action\n");
    for (i, a) in out.policy.iter().enumerate() {
        policy.push_str(&format!("{i},{},{a}\n", tables.epsilon_grid[i]));
    }
    let summary = format!(
        "{SUMMARY_SCHEMA}\nalpha,zeta,epsilon_star,trailing_delta_q,reward_mean,reward_rel_std,raw_reward_rel_std\n{},{},{},{},{},{},{}\n",
        conv.alpha,
        conv.zeta,
        conv.epsilon_star,
        conv.delta_q,
        conv.reward_mean,
        conv.reward_rel_std,
        conv.raw_reward_rel_std
    );
    for (name, bytes) in [
        ("qtable.csv", q),
        ("rdp_trace.csv", trace),
        ("policy.csv", policy.into_bytes()),
        ("rdp_summary.csv", summary.into_bytes()),
        ("config.resolved.toml", cfg.to_toml().into_bytes()),
    ] {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
    }
    Ok(())
}
