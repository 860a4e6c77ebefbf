//! Design-phase Q-learning over the privacy-loss grid.
//!
//! The environment is tabular and deterministic: a state is an index into the
//! ε grid, and its loss bins are looked up from precomputed [`LossTables`].

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::AttackConfig;
use crate::data::FederatedData;
use crate::dp::PrivacySpec;
use crate::error::{Error, Result};
use crate::federation::{final_loss, run_training, FederationConfig};
use crate::rng::{substream, Purpose};

pub const LOSS_TABLES_SCHEMA: &str = "# schema: ldpfl/loss_tables v1";
pub const QTABLE_SCHEMA: &str = "# schema: ldpfl/qtable v1";
pub const TRACE_SCHEMA: &str = "# schema: ldpfl/rdp_trace v1";
pub const BINS: usize = 10;
pub const DEFAULT_MARGIN: f64 = 0.1;

/// `{0.1, 0.2, …, 2.0}`.
pub fn default_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Static,
    Dec1,
    Dec2,
    Inc1,
    Inc2,
}

impl Action {
    /// Tie-break order.
    pub const ALL: [Action; 5] = [Action::Static, Action::Dec1, Action::Dec2, Action::Inc1, Action::Inc2];

    pub fn offset(self) -> isize {
        match self {
            Action::Static => 0,
            Action::Dec1 => -1,
            Action::Dec2 => -2,
            Action::Inc1 => 1,
            Action::Inc2 => 2,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn inverse(self) -> Action {
        match self {
            Action::Static => Action::Static,
            Action::Dec1 => Action::Inc1,
            Action::Dec2 => Action::Inc2,
            Action::Inc1 => Action::Dec1,
            Action::Inc2 => Action::Dec2,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Static => "static",
            Action::Dec1 => "dec1",
            Action::Dec2 => "dec2",
            Action::Inc1 => "inc1",
            Action::Inc2 => "inc2",
        })
    }
}

impl FromStr for Action {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| Error::Parse(format!("unknown action `{s}`")))
    }
}

/// One measured run behind the tables. `gamma = None` is the benign run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCell {
    pub epsilon: f64,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTables {
    pub epsilon_grid: Vec<f64>,
    pub gammas: Vec<f64>,
    /// `m_l[i][j]`: attacked loss at `epsilon_grid[i]`, `gammas[j]`.
    pub m_l: Vec<Vec<f64>>,
    /// Benign loss per ε.
    pub f_l: Vec<f64>,
    pub m_l_max: f64,
    pub f_l_max: f64,
    /// Individual runs, for provenance.
    pub cells: Vec<LossCell>,
}

impl LossTables {
    pub fn new(epsilon_grid: Vec<f64>, gammas: Vec<f64>, m_l: Vec<Vec<f64>>, f_l: Vec<f64>) -> Result<Self> {
        let g = epsilon_grid.len();
        if g == 0 || gammas.is_empty() {
            return Err(Error::Empty("loss table grid"));
        }
        if m_l.len() != g || f_l.len() != g || m_l.iter().any(|row| row.len() != gammas.len()) {
            return Err(Error::Dimension {
                expected: g,
                got: m_l.len().min(f_l.len()),
            });
        }
        if epsilon_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("epsilon_grid", "must be strictly increasing"));
        }
        let positive = |v: &f64| v.is_finite() && *v > 0.0;
        if !m_l.iter().flatten().all(positive) || !f_l.iter().all(positive) {
            return Err(Error::param("loss tables", "every loss must be finite and positive"));
        }
        let m_l_max = m_l.iter().flatten().copied().fold(f64::MIN, f64::max);
        let f_l_max = f_l.iter().copied().fold(f64::MIN, f64::max);
        Ok(Self {
            epsilon_grid,
            gammas,
            m_l,
            f_l,
            m_l_max,
            f_l_max,
            cells: Vec::new(),
        })
    }

    /// Attacker loss at grid index `i`, averaged over γ.
    pub fn m_l_at(&self, i: usize) -> f64 {
        self.m_l[i].iter().sum::<f64>() / self.m_l[i].len() as f64
    }

    /// Aggregates raw runs into tables; invalid cells are dropped from the
    /// means, and an (ε, γ) pair with no valid run is an error.
    pub fn from_cells(cells: Vec<LossCell>) -> Result<Self> {
        let mut grid: Vec<f64> = cells.iter().map(|c| c.epsilon).collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let mut gammas: Vec<f64> = cells.iter().filter_map(|c| c.gamma).collect();
        gammas.sort_by(f64::total_cmp);
        gammas.dedup();
        let mean = |eps: f64, gamma: Option<f64>| -> Result<f64> {
            let vals: Vec<f64> = cells
                .iter()
                .filter(|c| c.epsilon == eps && c.gamma == gamma)
                .filter_map(|c| c.loss)
                .collect();
            if vals.is_empty() {
                return Err(Error::param(
                    "loss tables",
                    format!("no valid run at epsilon={eps} gamma={gamma:?}"),
                ));
            }
            Ok(vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let f_l = grid.iter().map(|&e| mean(e, None)).collect::<Result<Vec<_>>>()?;
        let m_l = grid
            .iter()
            .map(|&e| gammas.iter().map(|&g| mean(e, Some(g))).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mut tables = Self::new(grid, gammas, m_l, f_l)?;
        tables.cells = cells;
        Ok(tables)
    }

    /// One row per attacked run: `epsilon,gamma,seed,m_l,f_l`, where `f_l` is
    /// the benign run at the same ε and seed. Failed runs leave the cell empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("loss_tables.csv", e);
        writeln!(out, "{LOSS_TABLES_SCHEMA}").map_err(io)?;
        writeln!(out, "epsilon,gamma,seed,m_l,f_l").map_err(io)?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in self.cells.iter().filter(|c| c.gamma.is_some()) {
            let benign = self
                .cells
                .iter()
                .find(|b| b.gamma.is_none() && b.epsilon == c.epsilon && b.seed == c.seed)
                .and_then(|b| b.loss);
            writeln!(
                out,
                "{},{},{},{},{}",
                c.epsilon,
                c.gamma.unwrap_or_default(),
                c.seed,
                fmt(c.loss),
                fmt(benign)
            )
            .map_err(io)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = || -> Result<Option<String>> {
            lines
                .next()
                .transpose()
                .map_err(|e| Error::io("loss_tables.csv", e))
        };
        let schema = next()?.unwrap_or_default();
        if schema.trim() != LOSS_TABLES_SCHEMA {
            return Err(Error::Header {
                expected: LOSS_TABLES_SCHEMA.into(),
                found: schema,
            });
        }
        let header = next()?.unwrap_or_default();
        if header.trim() != "epsilon,gamma,seed,m_l,f_l" {
            return Err(Error::Header {
                expected: "epsilon,gamma,seed,m_l,f_l".into(),
                found: header,
            });
        }
        let num = |s: &str| -> Result<f64> { s.trim().parse().map_err(|_| Error::Parse(format!("bad number `{s}`"))) };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let mut cells: Vec<LossCell> = Vec::new();
        while let Some(line) = next()? {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(Error::Parse(format!("expected 5 fields in `{line}`")));
            }
            let epsilon = num(f[0])?;
            let seed: u64 = f[2].trim().parse().map_err(|_| Error::Parse(format!("bad seed `{}`", f[2])))?;
            cells.push(LossCell {
                epsilon,
                gamma: Some(num(f[1])?),
                seed,
                loss: opt(f[3])?,
            });
            if !cells.iter().any(|c| c.gamma.is_none() && c.epsilon == epsilon && c.seed == seed) {
                cells.push(LossCell {
                    epsilon,
                    gamma: None,
                    seed,
                    loss: opt(f[4])?,
                });
            }
        }
        Self::from_cells(cells)
    }
}

/// Template for [`generate_loss_tables`]: every run copies `federation`
/// with ε and the seed replaced.
#[derive(Debug, Clone)]
pub struct TableSpec<'a> {
    pub federation: FederationConfig,
    pub data: &'a FederatedData,
    /// Number of compromised participants in the attacked runs.
    pub m: usize,
    /// Episodes averaged into each run's final loss.
    pub tail: usize,
}

pub fn generate_loss_tables(
    grid: &[f64],
    gammas: &[f64],
    spec: &TableSpec<'_>,
    seeds: &[u64],
) -> Result<LossTables> {
    if grid.is_empty() || gammas.is_empty() || seeds.is_empty() {
        return Err(Error::Empty("loss table grid"));
    }
    let mut jobs: Vec<(f64, Option<f64>, u64)> = Vec::new();
    for &e in grid {
        for &s in seeds {
            jobs.push((e, None, s));
            for &g in gammas {
                jobs.push((e, Some(g), s));
            }
        }
    }
    let cells: Vec<LossCell> = jobs
        .par_iter()
        .map(|&(epsilon, gamma, seed)| {
            let loss = cell_loss(spec, epsilon, gamma, seed).ok();
            LossCell {
                epsilon,
                gamma,
                seed,
                loss,
            }
        })
        .collect();
    LossTables::from_cells(cells)
}

fn cell_loss(spec: &TableSpec<'_>, epsilon: f64, gamma: Option<f64>, seed: u64) -> Result<f64> {
    let mut cfg = spec.federation.clone();
    cfg.seed = seed;
    cfg.privacy = PrivacySpec::new(epsilon, cfg.privacy.delta, cfg.privacy.clip_c)?;
    cfg.parallel = false;
    let attack = gamma.map(|g| AttackConfig::fixed_gamma(spec.m, g));
    let records = run_training(&cfg, spec.data, attack.as_ref(), None)?;
    let loss = final_loss(&records, spec.tail)?;
    if loss.is_finite() && loss > 0.0 {
        Ok(loss)
    } else {
        Err(Error::NonFiniteLoss { step: records.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RdpHyper {
    pub alpha: f64,
    pub zeta: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
    pub explore_start: f64,
    pub explore_min: f64,
    pub max_episodes: usize,
}

impl Default for RdpHyper {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            zeta: 0.2,
            psi1: 1.0 / 3.0,
            psi2: 1.0 / 3.0,
            psi3: 1.0 / 3.0,
            explore_start: 1.0,
            explore_min: 0.05,
            max_episodes: 20_000,
        }
    }
}

impl RdpHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param("alpha", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(Error::param("zeta", "must lie in [0, 1]"));
        }
        if [self.psi1, self.psi2, self.psi3].iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::param("psi", "weights must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.explore_min) || !(self.explore_min..=1.0).contains(&self.explore_start) {
            return Err(Error::param("explore", "need 0 <= explore_min <= explore_start <= 1"));
        }
        if self.max_episodes == 0 {
            return Err(Error::param("max_episodes", "at least one episode"));
        }
        Ok(())
    }

    /// Convergence is not guaranteed without discounting.
    pub fn undiscounted(&self) -> bool {
        self.zeta >= 1.0
    }

    /// Linear decay over the first half of training, then held.
    pub fn exploration(&self, episode: usize) -> f64 {
        let half = (self.max_episodes / 2).max(1);
        if episode >= half {
            self.explore_min
        } else {
            self.explore_start - (self.explore_start - self.explore_min) * episode as f64 / half as f64
        }
    }
}

/// `β = ψ₁ m_l^max/m_l + ψ₂ f_l^max/f_l + ψ₃/ε`.
pub fn reward(m_l: f64, f_l: f64, epsilon: f64, tables: &LossTables, hyper: &RdpHyper) -> Result<f64> {
    if !(m_l > 0.0 && f_l > 0.0 && epsilon > 0.0) {
        return Err(Error::param("reward", "losses and epsilon must be positive"));
    }
    Ok(hyper.psi1 * tables.m_l_max / m_l + hyper.psi2 * tables.f_l_max / f_l + hyper.psi3 / epsilon)
}

/// Quantile bin edges over a set of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBins {
    pub edges: Vec<f64>,
}

impl QuantileBins {
    pub fn fit(values: &[f64], bins: usize) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let edges = (1..bins)
            .filter(|_| n > 0)
            .map(|j| sorted[(j * n / bins).min(n - 1)])
            .collect();
        Self { edges }
    }

    pub fn bin(&self, v: f64) -> usize {
        self.edges.iter().filter(|e| **e <= v).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RdpState {
    pub m_l_bin: usize,
    pub f_l_bin: usize,
    pub epsilon_index: usize,
}

/// A finite deterministic MDP.
pub trait Environment {
    fn num_states(&self) -> usize;
    fn next_state(&self, state: usize, action: Action) -> usize;
    fn reward(&self, state: usize, action: Action, next: usize) -> f64;
}

/// The ε-selection environment. The reward of a move is the reward of the
/// state it lands in.
#[derive(Debug, Clone)]
pub struct RdpEnv {
    pub tables: LossTables,
    pub m_bins: QuantileBins,
    pub f_bins: QuantileBins,
    rewards: Vec<f64>,
}

impl RdpEnv {
    pub fn new(tables: LossTables, hyper: &RdpHyper) -> Result<Self> {
        hyper.validate()?;
        let m: Vec<f64> = (0..tables.epsilon_grid.len()).map(|i| tables.m_l_at(i)).collect();
        let rewards = (0..m.len())
            .map(|i| reward(m[i], tables.f_l[i], tables.epsilon_grid[i], &tables, hyper))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            m_bins: QuantileBins::fit(&m, BINS),
            f_bins: QuantileBins::fit(&tables.f_l, BINS),
            tables,
            rewards,
        })
    }

    pub fn state(&self, epsilon_index: usize) -> RdpState {
        RdpState {
            m_l_bin: self.m_bins.bin(self.tables.m_l_at(epsilon_index)),
            f_l_bin: self.f_bins.bin(self.tables.f_l[epsilon_index]),
            epsilon_index,
        }
    }

    pub fn step(&self, state: RdpState, action: Action) -> RdpState {
        self.state(self.next_state(state.epsilon_index, action))
    }

    pub fn state_reward(&self, epsilon_index: usize) -> f64 {
        self.rewards[epsilon_index]
    }

    pub fn midpoint(&self) -> usize {
        (self.tables.epsilon_grid.len() - 1) / 2
    }
}

impl Environment for RdpEnv {
    fn num_states(&self) -> usize {
        self.tables.epsilon_grid.len()
    }

    fn next_state(&self, state: usize, action: Action) -> usize {
        let last = self.num_states() as isize - 1;
        (state as isize + action.offset()).clamp(0, last) as usize
    }

    fn reward(&self, _state: usize, _action: Action, next: usize) -> f64 {
        self.rewards[next]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub values: Vec<[f64; 5]>,
    pub visits: Vec<[u64; 5]>,
    /// Mean |ΔQ| per training episode.
    pub delta_trace: Vec<f64>,
}

impl QTable {
    pub fn new(states: usize) -> Self {
        Self {
            values: vec![[0.0; 5]; states],
            visits: vec![[0; 5]; states],
            delta_trace: Vec::new(),
        }
    }

    pub fn get(&self, s: usize, a: Action) -> f64 {
        self.values[s][a.index()]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.values[s].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties go to the lowest ordinal.
    pub fn greedy(&self, s: usize) -> Action {
        let mut best = Action::Static;
        for a in Action::ALL {
            if self.get(s, a) > self.get(s, best) {
                best = a;
            }
        }
        best
    }

    pub fn policy(&self) -> Vec<Action> {
        (0..self.values.len()).map(|s| self.greedy(s)).collect()
    }
}

/// Applies one Q-learning update and returns `|Q_new - Q_old|`.
pub fn q_update(q: &mut QTable, s: usize, a: Action, r: f64, next: usize, hyper: &RdpHyper) -> f64 {
    let old = q.get(s, a);
    let new = (1.0 - hyper.alpha) * old + hyper.alpha * (r + hyper.zeta * q.max(next));
    q.values[s][a.index()] = new;
    q.visits[s][a.index()] += 1;
    (new - old).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub mean_abs_delta_q: f64,
    pub exploration_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub q: QTable,
    pub trace: Vec<TraceRow>,
}

/// ε-greedy Q-learning. One episode sweeps every state once as a start
/// state and applies one transition from it.
pub fn train<E: Environment>(env: &E, hyper: &RdpHyper, seed: u64) -> Result<Training> {
    hyper.validate()?;
    let states = env.num_states();
    if states == 0 {
        return Err(Error::Empty("environment states"));
    }
    let mut q = QTable::new(states);
    let mut trace = Vec::with_capacity(hyper.max_episodes);
    for episode in 0..hyper.max_episodes {
        let p = hyper.exploration(episode);
        let mut rng = substream(seed, Purpose::Explore, 0, episode as u64);
        let mut total_reward = 0.0;
        let mut total_delta = 0.0;
        for s in 0..states {
            let explore = rng.random::<f64>() < p;
            let a = if explore {
                Action::ALL[rng.random_range(0..Action::ALL.len())]
            } else {
                q.greedy(s)
            };
            let next = env.next_state(s, a);
            let r = env.reward(s, a, next);
            total_reward += r;
            total_delta += q_update(&mut q, s, a, r, next, hyper);
            if !q.get(s, a).is_finite() {
                return Err(Error::NonFiniteQ { episode });
            }
        }
        let mean_delta = total_delta / states as f64;
        q.delta_trace.push(mean_delta);
        trace.push(TraceRow {
            episode,
            cumulative_reward: total_reward,
            mean_abs_delta_q: mean_delta,
            exploration_prob: p,
        });
    }
    Ok(Training { q, trace })
}

/// Follows the greedy policy from `start` until it stops moving. On a cycle,
/// returns the cycle state with the largest greedy value (lowest index on
/// ties).
pub fn greedy_fixed_point<E: Environment>(env: &E, q: &QTable, start: usize) -> usize {
    let mut path = vec![start];
    let mut s = start;
    loop {
        let next = env.next_state(s, q.greedy(s));
        if next == s {
            return s;
        }
        if let Some(pos) = path.iter().position(|&p| p == next) {
            let mut cycle = path[pos..].to_vec();
            cycle.sort_unstable();
            let mut best = cycle[0];
            for &c in &cycle[1..] {
                if q.max(c) > q.max(best) {
                    best = c;
                }
            }
            return best;
        }
        path.push(next);
        s = next;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdpOutcome {
    pub training: Training,
    pub policy: Vec<Action>,
    pub epsilon_star: f64,
    pub epsilon_star_index: usize,
}

/// Trains on the tables and extracts the greedy policy and ε*.
pub fn train_rdp(tables: &LossTables, hyper: &RdpHyper, seed: u64) -> Result<RdpOutcome> {
    let env = RdpEnv::new(tables.clone(), hyper)?;
    let training = train(&env, hyper, seed)?;
    let star = greedy_fixed_point(&env, &training.q, env.midpoint());
    Ok(RdpOutcome {
        policy: training.q.policy(),
        epsilon_star: tables.epsilon_grid[star],
        epsilon_star_index: star,
        training,
    })
}

/// Mean of the last `window` entries.
pub fn trailing_mean(values: &[f64], window: usize) -> f64 {
    let w = &values[values.len().saturating_sub(window)..];
    if w.is_empty() {
        return f64::NAN;
    }
    w.iter().sum::<f64>() / w.len() as f64
}

/// Trailing moving average; entry `i` averages `values[i+1-window..=i]`
/// (fewer at the start).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let w = &values[(i + 1).saturating_sub(window)..=i];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect()
}

/// Population standard deviation of the last `window` entries.
pub fn trailing_std(values: &[f64], window: usize) -> f64 {
    let w = &values[values.len().saturating_sub(window)..];
    let mean = trailing_mean(values, window);
    (w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64).sqrt()
}

pub fn write_qtable_csv<W: Write>(env: &RdpEnv, q: &QTable, mut out: W) -> Result<()> {
    let io = |e| Error::io("qtable.csv", e);
    writeln!(out, "{QTABLE_SCHEMA}").map_err(io)?;
    writeln!(out, "m_l_bin,f_l_bin,eps_index,action,q_value").map_err(io)?;
    for s in 0..env.num_states() {
        let st = env.state(s);
        for a in Action::ALL {
            writeln!(out, "{},{},{},{},{}", st.m_l_bin, st.f_l_bin, s, a, q.get(s, a)).map_err(io)?;
        }
    }
    Ok(())
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRow], mut out: W) -> Result<()> {
    let io = |e| Error::io("rdp_trace.csv", e);
    writeln!(out, "{TRACE_SCHEMA}").map_err(io)?;
    writeln!(out, "episode,cumulative_reward,mean_abs_delta_q,exploration_prob").map_err(io)?;
    for r in trace {
        writeln!(
            out,
            "{},{},{},{}",
            r.episode, r.cumulative_reward, r.mean_abs_delta_q, r.exploration_prob
        )
        .map_err(io)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assist {
    SuspectedAttack,
    Clear,
}

/// Flags an attack when the observed federated loss exceeds the designed
/// one by more than `margin`.
pub fn detect_assist(f_l_standard: f64, f_l_observed: f64, margin: f64) -> Result<Assist> {
    if !(f_l_standard > 0.0 && f_l_observed > 0.0) {
        return Err(Error::param("f_l", "losses must be positive"));
    }
    Ok(if f_l_observed > f_l_standard * (1.0 + margin) {
        Assist::SuspectedAttack
    } else {
        Assist::Clear
    })
}
