//! Tabular Q-learning and the three learned policies.
//!
//! SARL: one agent over the full joint catalog. MARL: one independent
//! learner per AP over that AP's local catalog, all updating from the shared
//! global reward of the assembled joint action. D-MARL: N learners each
//! owning a contiguous segment of the full catalog, coordinated through a
//! central register that keeps, per state, the best (action, reward) pair
//! seen by any agent.
//!
//! The mobility transition is action-independent, so within one step all
//! D-MARL agents evaluate their candidates against the same frozen channel
//! realization; the register's current best is the step's executed action.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::action::{partition, ActionCatalog, Segment};
use crate::rng::{derive_rng, Tag};
use crate::scenario::{advance, state_index};
use crate::sim::SimEnv;
use crate::{Error, Result};

/// A dense state-by-action table owned by one agent. `offset` locates the
/// owner's segment inside the global catalog; local column c corresponds to
/// global action index `offset + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub agent: usize,
    pub states: usize,
    pub width: usize,
    pub offset: usize,
    data: Vec<f64>,
}

impl QTable {
    /// Random initialization in [0, init_high], seed-controlled.
    pub fn init_random<R: Rng + ?Sized>(
        agent: usize,
        states: usize,
        width: usize,
        offset: usize,
        init_high: f64,
        rng: &mut R,
    ) -> Self {
        let data = (0..states * width).map(|_| rng.gen_range(0.0..=init_high)).collect();
        QTable { agent, states, width, offset, data }
    }

    pub fn from_data(agent: usize, states: usize, width: usize, offset: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != states * width {
            return Err(Error::Usage("Q-table data length mismatch".into()));
        }
        Ok(QTable { agent, states, width, offset, data })
    }

    pub fn get(&self, state: usize, local: usize) -> f64 {
        self.data[state * self.width + local]
    }

    pub fn set(&mut self, state: usize, local: usize, value: f64) {
        self.data[state * self.width + local] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Greatest entry of a state row.
    pub fn row_max(&self, state: usize) -> f64 {
        self.data[state * self.width..(state + 1) * self.width]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax over a state row; ties break to the lowest local index.
    pub fn row_argmax(&self, state: usize) -> usize {
        let row = &self.data[state * self.width..(state + 1) * self.width];
        let mut best = 0;
        for (idx, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = idx;
            }
        }
        best
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Linear per-episode decay from `start` to `end` across the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySchedule {
    pub start: f64,
    pub end: f64,
}

impl DecaySchedule {
    pub fn new(start: f64, end: f64) -> Self {
        debug_assert!(start >= end && end >= 0.0);
        DecaySchedule { start, end }
    }

    /// Value at episode `ep` of `total` (the last episode reaches `end`).
    pub fn value(&self, ep: usize, total: usize) -> f64 {
        if total <= 1 {
            return self.end;
        }
        let frac = ep as f64 / (total - 1) as f64;
        self.start + (self.end - self.start) * frac.min(1.0)
    }
}

impl Default for DecaySchedule {
    fn default() -> Self {
        DecaySchedule::new(1.0, 0.01)
    }
}

/// Per-state store of the best global action found by any agent, with the
/// reward it achieved. Rewards only ever increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralRegister {
    entries: Vec<Option<(usize, f64)>>,
}

impl CentralRegister {
    pub fn new(states: usize) -> Self {
        CentralRegister { entries: vec![None; states] }
    }

    pub fn states(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, state: usize) -> Option<(usize, f64)> {
        self.entries[state]
    }

    /// Best action for a state, falling back to the lowest catalog index for
    /// states never offered a candidate.
    pub fn best_action(&self, state: usize) -> usize {
        self.entries[state].map_or(0, |(a, _)| a)
    }

    pub fn from_entries(entries: Vec<Option<(usize, f64)>>) -> Self {
        CentralRegister { entries }
    }

    pub fn entries(&self) -> &[Option<(usize, f64)>] {
        &self.entries
    }
}

/// Strict-improvement register update: replace only when the candidate's
/// reward exceeds the stored one. Returns true when replaced.
pub fn central_update(
    reg: &mut CentralRegister,
    state: usize,
    action: usize,
    reward: f64,
) -> bool {
    match reg.entries[state] {
        Some((_, stored)) if reward <= stored => false,
        _ => {
            reg.entries[state] = Some((action, reward));
            true
        }
    }
}

/// One Q-learning backup. A `None` next state (terminal) contributes no
/// bootstrap term.
pub fn q_update(
    q: &mut QTable,
    state: usize,
    local: usize,
    reward: f64,
    next_state: Option<usize>,
    alpha: f64,
    discount: f64,
) {
    debug_assert!((0.0..=1.0).contains(&alpha));
    debug_assert!((0.0..1.0).contains(&discount));
    let bootstrap = next_state.map_or(0.0, |s| q.row_max(s));
    let old = q.get(state, local);
    q.set(state, local, (1.0 - alpha) * old + alpha * (reward + discount * bootstrap));
}

/// Epsilon-greedy pick over an agent's row: explore uniformly with
/// probability eps, otherwise the row argmax (ties to the lowest index).
pub fn epsilon_greedy<R: Rng + ?Sized>(
    q: &QTable,
    state: usize,
    eps: f64,
    rng: &mut R,
) -> usize {
    if rng.gen::<f64>() < eps {
        rng.gen_range(0..q.width)
    } else {
        q.row_argmax(state)
    }
}

/// Knobs shared by all three trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub episodes: usize,
    pub alpha: DecaySchedule,
    pub epsilon: DecaySchedule,
    pub discount: f64,
    pub q_init_high: f64,
    pub seed: u64,
    /// Record a (agent, state, action, reward) tuple per selection; only for
    /// small diagnostic runs.
    pub record_traces: bool,
}

impl TrainParams {
    pub fn new(episodes: usize, seed: u64) -> Self {
        TrainParams {
            episodes,
            alpha: DecaySchedule::default(),
            epsilon: DecaySchedule::default(),
            discount: 0.8,
            q_init_high: 0.01,
            seed,
            record_traces: false,
        }
    }
}

/// One recorded selection during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub episode: u32,
    pub step: u32,
    pub agent: u16,
    pub state: u32,
    /// Global catalog index (or local index for MARL agents).
    pub action: u32,
    pub reward: f64,
}

/// What a training run did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub episodes: usize,
    /// Per-episode return: the sum over steps of the best candidate reward
    /// seen in the step.
    pub returns: Vec<f64>,
    pub final_alpha: f64,
    pub final_epsilon: f64,
    pub wall_secs: f64,
    pub traces: Vec<TraceStep>,
}

fn train_rngs(seed: u64) -> (ChaCha12Rng, ChaCha12Rng, ChaCha12Rng) {
    (
        derive_rng(seed, &[Tag::S("train-env")]),
        derive_rng(seed, &[Tag::S("train-pol")]),
        derive_rng(seed, &[Tag::S("train-init")]),
    )
}

/// Centralized single-agent Q-learning over the whole catalog.
pub fn sarl_train(
    env: &SimEnv,
    catalog: &ActionCatalog,
    params: &TrainParams,
) -> Result<(QTable, TrainReport)> {
    if params.episodes == 0 {
        return Err(Error::Usage("episodes must be > 0".into()));
    }
    let start = std::time::Instant::now();
    let states = env.cfg().state_count();
    let (mut env_rng, mut pol_rng, mut init_rng) = train_rngs(params.seed);
    let mut q = QTable::init_random(0, states, catalog.len(), 0, params.q_init_high, &mut init_rng);
    let mut returns = Vec::with_capacity(params.episodes);
    let mut traces = Vec::new();

    for ep in 0..params.episodes {
        let alpha = params.alpha.value(ep, params.episodes);
        let eps = params.epsilon.value(ep, params.episodes);
        let mut state = env.drop(&mut env_rng)?;
        let mut ep_return = 0.0;
        while !state.terminal {
            let s = state_index(&state, env.cfg());
            let chan = env.realize(&state, &mut env_rng);
            let a = epsilon_greedy(&q, s, eps, &mut pol_rng);
            let (_, r) = env.evaluate_action(&state, &chan, catalog.action(a))?;
            let next = advance(&state, env.cfg())?;
            let s_next = (!next.terminal).then(|| state_index(&next, env.cfg()));
            q_update(&mut q, s, a, r, s_next, alpha, params.discount);
            ep_return += r;
            if params.record_traces {
                traces.push(TraceStep {
                    episode: ep as u32,
                    step: state.step,
                    agent: 0,
                    state: s as u32,
                    action: a as u32,
                    reward: r,
                });
            }
            state = next;
        }
        returns.push(ep_return);
    }

    let report = TrainReport {
        episodes: params.episodes,
        returns,
        final_alpha: params.alpha.value(params.episodes - 1, params.episodes),
        final_epsilon: params.epsilon.value(params.episodes - 1, params.episodes),
        wall_secs: start.elapsed().as_secs_f64(),
        traces,
    };
    Ok((q, report))
}

/// Segmented-action distributed multi-agent Q-learning with the central
/// best-action register.
pub fn dmarl_train(
    env: &SimEnv,
    catalog: &ActionCatalog,
    n_agents: usize,
    params: &TrainParams,
) -> Result<(Vec<QTable>, CentralRegister, TrainReport)> {
    if params.episodes == 0 {
        return Err(Error::Usage("episodes must be > 0".into()));
    }
    let segments: Vec<Segment> = partition(catalog.len(), n_agents)?;
    let start = std::time::Instant::now();
    let states = env.cfg().state_count();
    let (mut env_rng, mut pol_rng, mut init_rng) = train_rngs(params.seed);
    let mut tables: Vec<QTable> = segments
        .iter()
        .map(|seg| {
            QTable::init_random(seg.agent, states, seg.len(), seg.lo, params.q_init_high, &mut init_rng)
        })
        .collect();
    let mut register = CentralRegister::new(states);
    let mut returns = Vec::with_capacity(params.episodes);
    let mut traces = Vec::new();

    for ep in 0..params.episodes {
        let alpha = params.alpha.value(ep, params.episodes);
        let eps = params.epsilon.value(ep, params.episodes);
        let mut state = env.drop(&mut env_rng)?;
        let mut ep_return = 0.0;
        while !state.terminal {
            let s = state_index(&state, env.cfg());
            let chan = env.realize(&state, &mut env_rng);
            let next = advance(&state, env.cfg())?;
            let s_next = (!next.terminal).then(|| state_index(&next, env.cfg()));

            let mut step_best = 0.0f64;
            for q in tables.iter_mut() {
                let local = epsilon_greedy(q, s, eps, &mut pol_rng);
                let global = q.offset + local;
                let (_, r) = env.evaluate_action(&state, &chan, catalog.action(global))?;
                q_update(q, s, local, r, s_next, alpha, params.discount);
                central_update(&mut register, s, global, r);
                step_best = step_best.max(r);
                if params.record_traces {
                    traces.push(TraceStep {
                        episode: ep as u32,
                        step: state.step,
                        agent: q.agent as u16,
                        state: s as u32,
                        action: global as u32,
                        reward: r,
                    });
                }
            }
            ep_return += step_best;
            state = next;
        }
        returns.push(ep_return);
    }

    let report = TrainReport {
        episodes: params.episodes,
        returns,
        final_alpha: params.alpha.value(params.episodes - 1, params.episodes),
        final_epsilon: params.epsilon.value(params.episodes - 1, params.episodes),
        wall_secs: start.elapsed().as_secs_f64(),
        traces,
    };
    Ok((tables, register, report))
}

/// Per-AP independent learners with the shared global reward of the joint
/// action assembled from all agents' simultaneous choices.
pub fn marl_train(
    env: &SimEnv,
    per_ap_catalog: &ActionCatalog,
    params: &TrainParams,
) -> Result<(Vec<QTable>, TrainReport)> {
    if params.episodes == 0 {
        return Err(Error::Usage("episodes must be > 0".into()));
    }
    let start = std::time::Instant::now();
    let ap_count = env.cfg().ap_count;
    let states = env.cfg().state_count();
    let (mut env_rng, mut pol_rng, mut init_rng) = train_rngs(params.seed);
    let mut tables: Vec<QTable> = (0..ap_count)
        .map(|j| {
            QTable::init_random(j, states, per_ap_catalog.len(), 0, params.q_init_high, &mut init_rng)
        })
        .collect();
    let mut returns = Vec::with_capacity(params.episodes);
    let mut traces = Vec::new();

    for ep in 0..params.episodes {
        let alpha = params.alpha.value(ep, params.episodes);
        let eps = params.epsilon.value(ep, params.episodes);
        let mut state = env.drop(&mut env_rng)?;
        let mut ep_return = 0.0;
        while !state.terminal {
            let s = state_index(&state, env.cfg());
            let chan = env.realize(&state, &mut env_rng);
            let next = advance(&state, env.cfg())?;
            let s_next = (!next.terminal).then(|| state_index(&next, env.cfg()));

            let choices: Vec<usize> = tables
                .iter()
                .map(|q| epsilon_greedy(q, s, eps, &mut pol_rng))
                .collect();
            let joint = assemble_marl_action(per_ap_catalog, &choices, ap_count);
            let (_, r) = env.evaluate_action(&state, &chan, &joint)?;
            for (j, q) in tables.iter_mut().enumerate() {
                q_update(q, s, choices[j], r, s_next, alpha, params.discount);
                if params.record_traces {
                    traces.push(TraceStep {
                        episode: ep as u32,
                        step: state.step,
                        agent: j as u16,
                        state: s as u32,
                        action: choices[j] as u32,
                        reward: r,
                    });
                }
            }
            ep_return += r;
            state = next;
        }
        returns.push(ep_return);
    }

    let report = TrainReport {
        episodes: params.episodes,
        returns,
        final_alpha: params.alpha.value(params.episodes - 1, params.episodes),
        final_epsilon: params.epsilon.value(params.episodes - 1, params.episodes),
        wall_secs: start.elapsed().as_secs_f64(),
        traces,
    };
    Ok((tables, report))
}

/// Joins per-AP local actions (each over U links of a single AP) into one
/// joint action over the U x A grid.
pub fn assemble_marl_action(
    per_ap_catalog: &ActionCatalog,
    choices: &[usize],
    ap_count: usize,
) -> crate::action::Action {
    let u = per_ap_catalog.vu_count;
    let mut levels = vec![0u8; u * ap_count];
    for (j, &choice) in choices.iter().enumerate() {
        let local = per_ap_catalog.action(choice);
        for i in 0..u {
            levels[i * ap_count + j] = local.levels[i];
        }
    }
    crate::action::Action { levels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, Tag};
    use proptest::prelude::*;
    use rand::Rng;

    fn flat_q(states: usize, width: usize) -> QTable {
        QTable::from_data(0, states, width, 0, vec![0.0; states * width]).unwrap()
    }

    #[test]
    fn q_update_examples() {
        let mut q = flat_q(2, 2);
        // alpha=1, gamma=0, r=5 -> full overwrite
        q_update(&mut q, 0, 0, 5.0, Some(1), 1.0, 0.0);
        assert_eq!(q.get(0, 0), 5.0);

        let mut q = flat_q(2, 2);
        q.set(1, 0, 2.0);
        q_update(&mut q, 0, 1, 1.0, Some(1), 0.5, 0.8);
        assert!((q.get(0, 1) - 1.3).abs() < 1e-15);

        let mut q = flat_q(2, 2);
        q.set(0, 0, 7.0);
        q_update(&mut q, 0, 0, 100.0, Some(1), 0.0, 0.8);
        assert_eq!(q.get(0, 0), 7.0);
    }

    #[test]
    fn q_update_terminal_has_no_bootstrap() {
        let mut q = flat_q(1, 1);
        q_update(&mut q, 0, 0, 2.0, None, 0.5, 0.9);
        assert!((q.get(0, 0) - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn q_update_matches_closed_form(
            old in -10.0f64..10.0,
            nextmax in -10.0f64..10.0,
            r in -5.0f64..5.0,
            alpha in 0.0f64..=1.0,
            gamma in 0.0f64..0.999,
        ) {
            let mut q = flat_q(2, 1);
            q.set(0, 0, old);
            q.set(1, 0, nextmax);
            q_update(&mut q, 0, 0, r, Some(1), alpha, gamma);
            let expected = (1.0 - alpha) * old + alpha * (r + gamma * nextmax);
            prop_assert!((q.get(0, 0) - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn epsilon_greedy_deterministic_at_zero() {
        let mut q = flat_q(1, 4);
        q.set(0, 2, 1.0);
        let mut rng = derive_rng(1, &[Tag::S("eg")]);
        for _ in 0..50 {
            assert_eq!(epsilon_greedy(&q, 0, 0.0, &mut rng), 2);
        }
    }

    #[test]
    fn epsilon_greedy_tie_breaks_low() {
        let mut q = flat_q(1, 4);
        q.set(0, 1, 3.0);
        q.set(0, 3, 3.0);
        let mut rng = derive_rng(2, &[Tag::S("eg")]);
        assert_eq!(epsilon_greedy(&q, 0, 0.0, &mut rng), 1);
    }

    #[test]
    fn epsilon_greedy_uniform_at_one() {
        // Chi-square uniformity over 10^4 draws, 8 bins, alpha ~ 0.001.
        let q = flat_q(1, 8);
        let mut rng = derive_rng(3, &[Tag::S("eg-uniform")]);
        let n = 10_000;
        let mut counts = [0usize; 8];
        for _ in 0..n {
            counts[epsilon_greedy(&q, 0, 1.0, &mut rng)] += 1;
        }
        let expected = n as f64 / 8.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99.9th percentile of chi-square with 7 dof is ~24.3
        assert!(chi2 < 24.3, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn central_update_semantics() {
        let mut reg = CentralRegister::new(2);
        assert!(central_update(&mut reg, 0, 5, 1.0));
        assert_eq!(reg.entry(0), Some((5, 1.0)));
        // equal rewards keep the old action
        assert!(!central_update(&mut reg, 0, 7, 1.0));
        assert_eq!(reg.best_action(0), 5);
        assert!(central_update(&mut reg, 0, 7, 1.1));
        assert_eq!(reg.entry(0), Some((7, 1.1)));
        // untouched states fall back to index 0
        assert_eq!(reg.best_action(1), 0);
    }

    #[test]
    fn register_rewards_never_decrease() {
        let mut reg = CentralRegister::new(1);
        let mut rng = derive_rng(4, &[Tag::S("reg")]);
        let mut last = f64::NEG_INFINITY;
        for i in 0..1000 {
            central_update(&mut reg, 0, i % 10, rng.gen::<f64>());
            let (_, stored) = reg.entry(0).unwrap();
            assert!(stored >= last);
            last = stored;
        }
    }

    #[test]
    fn decay_schedule_endpoints() {
        let d = DecaySchedule::default();
        assert_eq!(d.value(0, 100), 1.0);
        assert!((d.value(99, 100) - 0.01).abs() < 1e-12);
        assert!(d.value(50, 100) < d.value(10, 100));
        assert_eq!(d.value(0, 1), 0.01);
    }
}
