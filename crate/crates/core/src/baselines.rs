//! Non-learned reference policies: exhaustive search, equal power split,
//! and uniform random play.

use rand::Rng;

use crate::action::{Action, ActionCatalog};
use crate::channel::ChannelRealization;
use crate::radio::{Association, LinkBudget};
use crate::scenario::VehicleState;
use crate::sim::SimEnv;
use crate::{Error, Result};

/// Outcome of an exhaustive search over one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Catalog index of the best action; ties break to the lowest index.
    pub index: usize,
    /// The gated reward it achieved.
    pub reward: f64,
    pub budget: LinkBudget,
    /// Number of candidates evaluated.
    pub evaluated: usize,
}

/// Evaluates every catalog entry against the given realization and returns
/// the reward maximizer. Ties break to the lowest catalog index.
pub fn brute_force(
    env: &SimEnv,
    state: &VehicleState,
    chan: &ChannelRealization,
    catalog: &ActionCatalog,
) -> Result<OracleResult> {
    let mut best: Option<OracleResult> = None;
    for (idx, action) in catalog.actions().iter().enumerate() {
        let (budget, r) = env.evaluate_action(state, chan, action)?;
        let better = best.as_ref().map_or(true, |b| r > b.reward);
        if better {
            best = Some(OracleResult { index: idx, reward: r, budget, evaluated: 0 });
        }
    }
    let mut res = best.ok_or_else(|| Error::Usage("empty catalog".into()))?;
    res.evaluated = catalog.len();
    Ok(res)
}

/// Equal-power baseline on the discrete grid: every AP splits its cap over
/// the VUs it covers, so each covered link gets level floor(K / n), but at
/// least level 1. Errors if a coverage set is too large for the grid.
pub fn equal_power_action(assoc: &Association, k: usize) -> Result<Action> {
    let u = assoc.vu_count();
    let a = assoc.ap_count();
    let mut levels = vec![0u8; u * a];
    for j in 0..a {
        let served = assoc.vus_of(j);
        if served.is_empty() {
            continue;
        }
        if served.len() > k {
            return Err(Error::Constraint(format!(
                "AP {j} covers {} VUs but the grid has only {k} levels",
                served.len()
            )));
        }
        let level = (k / served.len()).max(1) as u8;
        for i in served {
            levels[i * a + j] = level;
        }
    }
    Ok(Action { levels })
}

/// A uniformly random catalog index.
pub fn random_action_index<R: Rng + ?Sized>(catalog: &ActionCatalog, rng: &mut R) -> usize {
    rng.gen_range(0..catalog.len())
}
