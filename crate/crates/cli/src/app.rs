//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ldpfl_core::data::{cache, ingest_csv, MissingPolicy};
use ldpfl_core::detection::DetectorKind;
use rayon::prelude::*;

use crate::accept;
use crate::config::{AttackMode, ExperimentConfig};
use crate::presets;
use crate::rdp_cmd;
use crate::report;
use crate::run::run_to_dir;
use crate::{CliError, EXIT_ACCEPTANCE, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "ldpfl", version, about = "Locally differentially private federated learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (first seed of a preset's seed block).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Named experiment grid.
    #[arg(long, global = true)]
    pub preset: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a raw household power CSV, optionally caching it under --out.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
    },
    /// Benign training run, or every cell of --preset.
    Train {
        /// Filter updates with a detector (norm, accuracy, mix).
        #[arg(long)]
        detect: Option<DetectorKind>,
    },
    /// Training run with compromised nodes, or every cell of --preset.
    Attack {
        #[arg(long, value_parser = parse_mode)]
        mode: Option<AttackMode>,
        /// Compromised participants per episode.
        #[arg(long)]
        m: Option<usize>,
        /// Initial degree of poisoning.
        #[arg(long)]
        gamma0: Option<f64>,
        /// Keep γ at gamma0 instead of retuning it each episode.
        #[arg(long)]
        fixed: bool,
        #[arg(long)]
        detect: Option<DetectorKind>,
    },
    /// Generate loss tables over the privacy grid (detection scale unless
    /// --config or --preset damage says otherwise).
    RdpTables,
    /// Train the privacy-level agent on a loss table file.
    RdpTrain {
        #[arg(long)]
        tables: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Summarize run directories (searched recursively).
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Run the acceptance criteria.
    Accept {
        /// Comma-separated criterion numbers; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

fn parse_mode(s: &str) -> Result<AttackMode, String> {
    match s {
        "rmd" => Ok(AttackMode::Rmd),
        "mpelm" => Ok(AttackMode::Mpelm),
        other => Err(format!("unknown attack mode `{other}` (rmd, mpelm)")),
    }
}

fn base_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from("ldpfl-out"))
}

fn preset_cells(common: &Common) -> Result<Option<Vec<(String, ExperimentConfig)>>, CliError> {
    let Some(name) = &common.preset else {
        return Ok(None);
    };
    if common.config.is_some() {
        return Err(CliError::Usage("--preset and --config are exclusive".into()));
    }
    presets::expand(name, common.seed.unwrap_or(1))
        .map(Some)
        .ok_or_else(|| CliError::Usage(format!("unknown preset `{name}` (known: {})", presets::NAMES.join(", "))))
}

fn run_cells(cells: &[(String, ExperimentConfig)], out: &Path) -> Result<(), CliError> {
    cells
        .par_iter()
        .map(|(label, cfg)| run_to_dir(label, cfg, &out.join(label)).map(|_| ()))
        .collect::<Result<Vec<()>, CliError>>()?;
    let (_, groups) = report::report(&[out.to_path_buf()], Some(out))?;
    print!("{}", report::render_text(&groups));
    Ok(())
}

fn run_single(label: &str, cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let res = run_to_dir(label, cfg, out)?;
    let s = &res.summary;
    println!(
        "{label}: {} episodes, final val loss {:.6}, d_acc {}, delta spent {:.6} -> {}",
        s.episodes,
        s.final_val_loss,
        s.d_acc.map_or("-".into(), |a| format!("{a:.2}")),
        s.delta_spent,
        out.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let common = &cli.common;
    match cli.command {
        Command::Ingest { csv } => {
            let data = match &common.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                    cache::ingest_cached(&csv, dir, MissingPolicy::DropRow)?
                }
                None => ingest_csv(&csv, MissingPolicy::DropRow)?,
            };
            println!(
                "{} samples from {} rows ({} dropped for missing values, {} malformed)",
                data.samples.len(),
                data.raw_rows,
                data.dropped_missing,
                data.malformed.len()
            );
        }
        Command::Train { detect } => {
            if let Some(cells) = preset_cells(common)? {
                return run_cells(&cells, &out_dir(common)).map(|_| EXIT_OK);
            }
            let mut cfg = base_config(common)?;
            if cfg.attack.mode != AttackMode::None {
                return Err(CliError::Usage("train is benign; use `attack` for attacked runs".into()));
            }
            if let Some(k) = detect {
                cfg.detector.kind = k;
            }
            cfg.validate()?;
            run_single("train", &cfg, &out_dir(common))?;
        }
        Command::Attack {
            mode,
            m,
            gamma0,
            fixed,
            detect,
        } => {
            if let Some(cells) = preset_cells(common)? {
                return run_cells(&cells, &out_dir(common)).map(|_| EXIT_OK);
            }
            let mut cfg = base_config(common)?;
            if let Some(mode) = mode {
                cfg.attack.mode = mode;
            } else if cfg.attack.mode == AttackMode::None {
                cfg.attack.mode = AttackMode::Mpelm;
            }
            if let Some(m) = m {
                cfg.attack.m = m;
            } else if cfg.attack.m == 0 {
                cfg.attack.m = 1;
            }
            if gamma0.is_some() {
                cfg.attack.gamma0 = gamma0;
            }
            if fixed {
                cfg.attack.adaptive = false;
            }
            if let Some(k) = detect {
                cfg.detector.kind = k;
            }
            cfg.validate()?;
            run_single("attack", &cfg, &out_dir(common))?;
        }
        Command::RdpTables => {
            let cfg = match (&common.config, common.preset.as_deref()) {
                (Some(_), Some(_)) => return Err(CliError::Usage("--preset and --config are exclusive".into())),
                (Some(_), None) => base_config(common)?,
                (None, Some("damage")) => presets::damage_base(common.seed.unwrap_or(1)),
                (None, None | Some("detection")) => presets::detection_base(common.seed.unwrap_or(1)),
                (None, Some(other)) => {
                    return Err(CliError::Usage(format!("rdp-tables takes --preset damage or detection, not `{other}`")))
                }
            };
            let tables = rdp_cmd::generate_tables(&cfg)?;
            let dir = out_dir(common);
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            let path = dir.join("loss_tables.csv");
            rdp_cmd::write_tables(&tables, &path)?;
            println!("{} cells -> {}", tables.cells.len(), path.display());
        }
        Command::RdpTrain {
            tables,
            alpha,
            zeta,
            episodes,
        } => {
            let mut cfg = base_config(common)?;
            if let Some(a) = alpha {
                cfg.rdp.alpha = a;
            }
            if let Some(z) = zeta {
                cfg.rdp.zeta = z;
            }
            if let Some(e) = episodes {
                cfg.rdp.episodes = e;
            }
            cfg.validate()?;
            let t = rdp_cmd::read_tables(&tables)?;
            let (out, conv) = rdp_cmd::train(&t, &cfg)?;
            let dir = out_dir(common);
            rdp_cmd::write_training(&t, &cfg, &out, &conv, &dir)?;
            println!(
                "epsilon* = {}, trailing mean |dQ| = {:.3e}, reward {:.4} (rel. std {:.3}%) -> {}",
                conv.epsilon_star,
                conv.delta_q,
                conv.reward_mean,
                100.0 * conv.reward_rel_std,
                dir.display()
            );
        }
        Command::Report { dirs } => {
            let (_, groups) = report::report(&dirs, common.out.as_deref())?;
            print!("{}", report::render_text(&groups));
        }
        Command::Accept { only } => {
            let mut all_passed = true;
            for o in accept::run_suite(&only) {
                println!("{}", o.line());
                all_passed &= o.passed;
            }
            return Ok(if all_passed { EXIT_OK } else { EXIT_ACCEPTANCE });
        }
    }
    Ok(EXIT_OK)
}

/// Entry point; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
