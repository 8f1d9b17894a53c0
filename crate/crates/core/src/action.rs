//! The joint discrete action space: association bits plus per-link power
//! levels, enumerated, encoded, validated, and partitioned into contiguous
//! per-agent segments.
//!
//! Power level `k` maps to `p_max * k / K`; level 0 means "off". Feasibility
//! requires the per-AP level sum to stay within K (equivalently, the per-AP
//! power within p_max) and every VU to keep at least one serving AP.
//!
//! Two catalog modes exist. Coverage-rule mode fixes the association (the
//! hint, typically all links on) and enumerates level tuples in {1..K} over
//! those links; this keeps brute force tractable. Learned-association mode
//! also enumerates the association: per AP any nonempty VU subset, with
//! levels on active links only.

use serde::{Deserialize, Serialize};

use crate::radio::{Association, PowerAllocation};
use crate::rng::fnv1a;
use crate::{Error, Result};

/// The discrete transmit power grid of one AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerGrid {
    pub k: usize,
    pub p_max: f64,
}

impl PowerGrid {
    pub fn new(k: usize, p_max: f64) -> Self {
        PowerGrid { k, p_max }
    }

    /// Strictly increasing levels {p_max * k / K : k = 1..K}.
    pub fn levels(&self) -> Vec<f64> {
        (1..=self.k).map(|l| self.power(l as u8)).collect()
    }

    /// Watts for a level index; level 0 is off.
    pub fn power(&self, level: u8) -> f64 {
        self.p_max * level as f64 / self.k as f64
    }
}

/// How a catalog treats the association part of the action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CatalogMode {
    /// Association fixed by rule (coverage); only power tuples enumerated.
    CoverageRule,
    /// Association bits are part of the action.
    LearnedAssociation,
}

/// One joint decision: a level index per (VU, AP) link, 0 meaning off.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action {
    /// Row-major (vu, ap) level indices in [0..K].
    pub levels: Vec<u8>,
}

impl Action {
    pub fn active(&self, vu: usize, ap: usize, ap_count: usize) -> bool {
        self.levels[vu * ap_count + ap] > 0
    }

    pub fn level(&self, vu: usize, ap: usize, ap_count: usize) -> u8 {
        self.levels[vu * ap_count + ap]
    }

    /// Association implied by the nonzero levels.
    pub fn association(&self, vu_count: usize, ap_count: usize) -> Association {
        Association::new(
            vu_count,
            ap_count,
            self.levels.iter().map(|&l| l > 0).collect(),
        )
    }

    /// Canonical ordering key: association bits first, then level indices.
    fn sort_key(&self) -> (Vec<bool>, &[u8]) {
        (self.levels.iter().map(|&l| l > 0).collect(), &self.levels)
    }
}

/// The ordered list of feasible actions with a canonical index per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionCatalog {
    pub mode: CatalogMode,
    pub vu_count: usize,
    pub ap_count: usize,
    pub k: usize,
    actions: Vec<Action>,
}

impl ActionCatalog {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action(&self, index: usize) -> &Action {
        &self.actions[index]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// Canonical index lookup; errors on actions outside the catalog.
    pub fn encode(&self, action: &Action) -> Result<usize> {
        self.actions
            .binary_search_by(|a| a.sort_key().cmp(&action.sort_key()))
            .map_err(|_| Error::Usage("action not in catalog".into()))
    }

    /// Bijective inverse of `encode`.
    pub fn decode(&self, index: usize) -> Result<&Action> {
        self.actions
            .get(index)
            .ok_or_else(|| Error::Usage(format!("action index {index} out of range 0..{}", self.len())))
    }

    /// Deterministic content hash; artifacts carry it so a table can never
    /// be replayed against the wrong catalog.
    pub fn hash(&self) -> u64 {
        let mut h = fnv1a(0xcbf2_9ce4_8422_2325, &[self.mode as u8]);
        for v in [self.vu_count, self.ap_count, self.k] {
            h = fnv1a(h, &(v as u64).to_le_bytes());
        }
        for a in &self.actions {
            h = fnv1a(h, &a.levels);
        }
        h
    }
}

/// A contiguous slice of the catalog owned by one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub agent: usize,
    pub lo: usize,
    pub hi: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }
}

/// Unfiltered cardinality of the joint action space, (2^U - 1)^A * K^(U*A).
pub fn raw_cardinality(vu_count: usize, ap_count: usize, k: usize) -> u128 {
    let assoc = (1u128 << vu_count) - 1;
    assoc.pow(ap_count as u32) * (k as u128).pow((vu_count * ap_count) as u32)
}

/// Unfiltered cardinality of one AP's local action space, (2^U - 1) * K^U.
pub fn marl_raw_cardinality(vu_count: usize, k: usize) -> u128 {
    raw_cardinality(vu_count, 1, k)
}

/// True iff per-AP level sums stay within K and every VU keeps a serving AP.
pub fn is_feasible(action: &Action, vu_count: usize, ap_count: usize, k: usize) -> bool {
    ap_feasible(action, vu_count, ap_count, k) && all_served(action, vu_count, ap_count)
}

fn ap_feasible(action: &Action, vu_count: usize, ap_count: usize, k: usize) -> bool {
    (0..ap_count).all(|j| {
        let sum: u32 = (0..vu_count).map(|i| action.level(i, j, ap_count) as u32).sum();
        sum <= k as u32
    })
}

fn all_served(action: &Action, vu_count: usize, ap_count: usize) -> bool {
    (0..vu_count).all(|i| (0..ap_count).any(|j| action.active(i, j, ap_count)))
}

/// Streaming enumerator over feasible actions in canonical order.
pub struct ActionStream {
    vu_count: usize,
    ap_count: usize,
    k: usize,
    mode: CatalogMode,
    /// Active-link mask in canonical order; fixed in coverage mode.
    assoc_hint: Vec<bool>,
    /// Remaining association patterns to visit (lex order on bit vectors).
    assoc_queue: Vec<Vec<bool>>,
    assoc_pos: usize,
    /// Current level tuple over the active links of the current pattern,
    /// None once that pattern is exhausted.
    current: Option<Vec<u8>>,
    require_all_served: bool,
}

impl ActionStream {
    fn new(
        vu_count: usize,
        ap_count: usize,
        k: usize,
        mode: CatalogMode,
        assoc_hint: Option<&Association>,
        require_all_served: bool,
    ) -> Result<Self> {
        let assoc_queue: Vec<Vec<bool>> = match mode {
            CatalogMode::CoverageRule => {
                let hint = assoc_hint.ok_or_else(|| {
                    Error::Usage("coverage-rule enumeration requires an association hint".into())
                })?;
                let bits: Vec<bool> = (0..vu_count)
                    .flat_map(|i| (0..ap_count).map(move |j| (i, j)))
                    .map(|(i, j)| hint.is_associated(i, j))
                    .collect();
                vec![bits]
            }
            CatalogMode::LearnedAssociation => {
                enumerate_association_patterns(vu_count, ap_count, require_all_served)
            }
        };
        let mut stream = ActionStream {
            vu_count,
            ap_count,
            k,
            mode,
            assoc_hint: Vec::new(),
            assoc_queue,
            assoc_pos: 0,
            current: None,
            require_all_served,
        };
        stream.load_pattern();
        Ok(stream)
    }

    fn load_pattern(&mut self) {
        self.current = None;
        while self.assoc_pos < self.assoc_queue.len() {
            let pattern = &self.assoc_queue[self.assoc_pos];
            let active = pattern.iter().filter(|&&b| b).count();
            self.assoc_hint = pattern.clone();
            let first = vec![1u8; active];
            if self.tuple_feasible(&first) {
                self.current = Some(first);
                return;
            }
            // The all-ones tuple is the per-AP minimum; if it violates the
            // power cap, no tuple under this pattern is feasible.
            self.assoc_pos += 1;
        }
    }

    fn tuple_feasible(&self, tuple: &[u8]) -> bool {
        let action = self.assemble(tuple);
        ap_feasible(&action, self.vu_count, self.ap_count, self.k)
            && (!self.require_all_served || all_served(&action, self.vu_count, self.ap_count))
    }

    fn assemble(&self, tuple: &[u8]) -> Action {
        let mut levels = vec![0u8; self.vu_count * self.ap_count];
        let mut t = 0;
        for (idx, &on) in self.assoc_hint.iter().enumerate() {
            if on {
                levels[idx] = tuple[t];
                t += 1;
            }
        }
        Action { levels }
    }

    /// Advances a level tuple in lex order (last position fastest).
    fn bump(&self, tuple: &mut Vec<u8>) -> bool {
        let k = self.k as u8;
        for pos in (0..tuple.len()).rev() {
            if tuple[pos] < k {
                tuple[pos] += 1;
                for later in tuple.iter_mut().skip(pos + 1) {
                    *later = 1;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for ActionStream {
    type Item = Action;

    fn next(&mut self) -> Option<Action> {
        loop {
            let tuple = self.current.as_ref()?.clone();
            let action = self.assemble(&tuple);

            // Find the successor before yielding.
            let mut next = tuple;
            let mut found = false;
            while self.bump(&mut next) {
                if self.tuple_feasible(&next) {
                    found = true;
                    break;
                }
            }
            if found {
                self.current = Some(next);
            } else {
                self.assoc_pos += 1;
                self.load_pattern();
            }

            debug_assert!(self.mode != CatalogMode::LearnedAssociation || !action.levels.is_empty());
            return Some(action);
        }
    }
}

/// All association bit patterns in lex order: per AP a nonempty VU subset,
/// optionally also requiring every VU to be served.
fn enumerate_association_patterns(
    vu_count: usize,
    ap_count: usize,
    require_all_served: bool,
) -> Vec<Vec<bool>> {
    let links = vu_count * ap_count;
    let mut out = Vec::new();
    // Lex order on the (vu-major) bit vector equals counting with the last
    // link as the least significant bit, treating false < true.
    let total = 1u64 << links;
    for code in 0..total {
        let bits: Vec<bool> = (0..links).map(|p| code >> (links - 1 - p) & 1 == 1).collect();
        let per_ap_nonempty = (0..ap_count)
            .all(|j| (0..vu_count).any(|i| bits[i * ap_count + j]));
        if !per_ap_nonempty {
            continue;
        }
        if require_all_served
            && !(0..vu_count).all(|i| (0..ap_count).any(|j| bits[i * ap_count + j]))
        {
            continue;
        }
        out.push(bits);
    }
    out
}

/// Materializes the catalog of all feasible actions in canonical order.
/// Errors if the feasible count would exceed `budget` (no silent sampling)
/// or if the catalog comes out empty.
pub fn enumerate_actions(
    vu_count: usize,
    ap_count: usize,
    k: usize,
    mode: CatalogMode,
    assoc_hint: Option<&Association>,
    budget: usize,
) -> Result<ActionCatalog> {
    if mode == CatalogMode::LearnedAssociation && vu_count * ap_count > 24 {
        return Err(Error::Config("learned-association enumeration limited to 24 links".into()));
    }
    let stream = ActionStream::new(vu_count, ap_count, k, mode, assoc_hint, true)?;
    let mut actions = Vec::new();
    for action in stream {
        if actions.len() >= budget {
            return Err(Error::BudgetExceeded {
                candidates: actions.len() as u64 + 1,
                budget: budget as u64,
            });
        }
        actions.push(action);
    }
    if actions.is_empty() {
        return Err(Error::Config(
            "empty action catalog: power grid incompatible with the power cap for mandatory links"
                .into(),
        ));
    }
    debug_assert!(actions.windows(2).all(|w| w[0].sort_key() < w[1].sort_key()));
    Ok(ActionCatalog { mode, vu_count, ap_count, k, actions })
}

/// One AP's local catalog for per-AP MARL: a nonempty served subset plus
/// levels, within the AP's own power cap.
pub fn enumerate_single_ap(vu_count: usize, k: usize, budget: usize) -> Result<ActionCatalog> {
    let stream = ActionStream::new(vu_count, 1, k, CatalogMode::LearnedAssociation, None, false)?;
    let mut actions = Vec::new();
    for action in stream {
        if actions.len() >= budget {
            return Err(Error::BudgetExceeded {
                candidates: actions.len() as u64 + 1,
                budget: budget as u64,
            });
        }
        actions.push(action);
    }
    Ok(ActionCatalog {
        mode: CatalogMode::LearnedAssociation,
        vu_count,
        ap_count: 1,
        k,
        actions,
    })
}

/// Splits [0, M) into N contiguous segments whose sizes differ by at most 1.
pub fn partition(catalog_len: usize, n: usize) -> Result<Vec<Segment>> {
    if n == 0 || n > catalog_len {
        return Err(Error::Config(format!(
            "cannot partition {catalog_len} actions into {n} segments"
        )));
    }
    let base = catalog_len / n;
    let remainder = catalog_len % n;
    let mut out = Vec::with_capacity(n);
    let mut lo = 0;
    for agent in 0..n {
        let size = base + usize::from(agent < remainder);
        out.push(Segment { agent, lo, hi: lo + size });
        lo += size;
    }
    debug_assert_eq!(lo, catalog_len);
    Ok(out)
}

/// Converts an action into watts against a power grid, masking links that
/// the given association does not allow.
pub fn allocation_for(
    action: &Action,
    assoc: &Association,
    grid: &PowerGrid,
) -> PowerAllocation {
    let u = assoc.vu_count();
    let a = assoc.ap_count();
    let watts = (0..u * a)
        .map(|idx| {
            let (i, j) = (idx / a, idx % a);
            if assoc.is_associated(i, j) {
                grid.power(action.level(i, j, a))
            } else {
                0.0
            }
        })
        .collect();
    PowerAllocation::new(u, a, watts)
}
