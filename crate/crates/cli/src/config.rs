//! Flat key=value configuration files and the experiment plan built from
//! them.
//!
//! A plan file looks like:
//!
//! ```text
//! # lines starting with # are comments
//! preset = full
//! schemes = brute,dmarl,equal,random
//! sweep = sinr_min
//! sweep_values = 2,4,6,8,10
//! seeds = 1,2,3
//! test_episodes = 250
//! # any ScenarioConfig or FadingParams field can be overridden by name:
//! coverage_radius = 300
//! shadowing_std_db = 6
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use vecell_core::action::CatalogMode;
use vecell_core::channel::FadingParams;
use vecell_core::scenario::ScenarioConfig;

/// The evaluated schemes, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    Brute,
    Sarl,
    Marl,
    Dmarl,
    Equal,
    Random,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Brute,
        Scheme::Sarl,
        Scheme::Marl,
        Scheme::Dmarl,
        Scheme::Equal,
        Scheme::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Brute => "brute",
            Scheme::Sarl => "sarl",
            Scheme::Marl => "marl",
            Scheme::Dmarl => "dmarl",
            Scheme::Equal => "equal",
            Scheme::Random => "random",
        }
    }
}

impl FromStr for Scheme {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| anyhow!("unknown scheme {s:?} (expected one of brute, sarl, marl, dmarl, equal, random)"))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What the sweep varies, if anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sweep {
    None,
    /// Minimum SINR in dB.
    SinrMin(Vec<f64>),
    /// Coverage radius in meters.
    CoverageRadius(Vec<f64>),
}

impl Sweep {
    /// The swept values; a single NaN-free sentinel for no sweep.
    pub fn points(&self) -> Vec<Option<f64>> {
        match self {
            Sweep::None => vec![None],
            Sweep::SinrMin(v) | Sweep::CoverageRadius(v) => {
                v.iter().copied().map(Some).collect()
            }
        }
    }

    /// Applies one sweep point to a scenario.
    pub fn apply(&self, cfg: &mut ScenarioConfig, value: Option<f64>) {
        match (self, value) {
            (Sweep::None, None) => {}
            (Sweep::SinrMin(_), Some(v)) => cfg.sinr_min_db = v,
            (Sweep::CoverageRadius(_), Some(v)) => cfg.coverage_radius = v,
            _ => unreachable!("sweep point does not match sweep kind"),
        }
    }

    pub fn label(&self, value: Option<f64>) -> String {
        match (self, value) {
            (Sweep::None, _) => "none".to_string(),
            (Sweep::SinrMin(_), Some(v)) => format!("sinr_min={v}"),
            (Sweep::CoverageRadius(_), Some(v)) => format!("radius={v}"),
            _ => unreachable!(),
        }
    }
}

/// Per-scheme training episode budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainBudgets {
    pub sarl: usize,
    pub marl: usize,
    pub dmarl: usize,
}

impl Default for TrainBudgets {
    fn default() -> Self {
        TrainBudgets { sarl: 100_000, marl: 100_000, dmarl: 25_000 }
    }
}

/// A fully resolved experiment plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub preset: String,
    pub scenario: ScenarioConfig,
    pub fading: FadingParams,
    pub catalog_mode: CatalogMode,
    pub schemes: Vec<Scheme>,
    pub sweep: Sweep,
    pub train: TrainBudgets,
    pub test_episodes: usize,
    pub seeds: Vec<u64>,
    pub dmarl_agents: usize,
    /// Upper bound on the enumerated catalog size.
    pub catalog_budget: usize,
}

/// Preset base values: scenario, fading, and default catalog mode.
pub fn preset(name: &str) -> Result<(ScenarioConfig, FadingParams, CatalogMode)> {
    match name {
        "full" => Ok((ScenarioConfig::full_scale(), FadingParams::default(), CatalogMode::CoverageRule)),
        "tiny" => Ok((
            ScenarioConfig::tiny(),
            FadingParams { shadowing_std_db: 0.0, fast_fading: false, ..FadingParams::default() },
            CatalogMode::LearnedAssociation,
        )),
        other => bail!("unknown preset {other:?} (expected full or tiny)"),
    }
}

/// Parses a flat key=value file into an ordered map. Later duplicates win.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, got {raw:?}", lineno + 1))?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn parse_list<T: FromStr>(value: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let items: Result<Vec<T>> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow!("bad {what} entry {s:?}: {e}")))
        .collect();
    let items = items?;
    if items.is_empty() {
        bail!("{what} list is empty");
    }
    Ok(items)
}

/// Overrides one serialized struct field by name, keeping its JSON type.
fn override_field(obj: &mut serde_json::Value, key: &str, value: &str) -> Result<bool> {
    let map = obj.as_object_mut().expect("config structs serialize to objects");
    let Some(slot) = map.get_mut(key) else { return Ok(false) };
    let parsed = match slot {
        serde_json::Value::Bool(_) => serde_json::Value::Bool(
            value.parse::<bool>().with_context(|| format!("{key} expects true/false"))?,
        ),
        serde_json::Value::Number(n) if n.is_u64() => {
            serde_json::Value::from(value.parse::<u64>().with_context(|| format!("{key} expects an integer"))?)
        }
        serde_json::Value::Number(_) => {
            serde_json::Value::from(value.parse::<f64>().with_context(|| format!("{key} expects a number"))?)
        }
        _ => bail!("field {key} has an unsupported type"),
    };
    *slot = parsed;
    Ok(true)
}

/// Builds a plan from parsed key=value pairs.
pub fn plan_from_kv(kv: &BTreeMap<String, String>) -> Result<Plan> {
    let preset_name = kv.get("preset").map(String::as_str).unwrap_or("tiny");
    let (scenario, fading, default_mode) = preset(preset_name)?;
    let mut scenario_json = serde_json::to_value(&scenario)?;
    let mut fading_json = serde_json::to_value(&fading)?;

    let mut schemes: Vec<Scheme> = Scheme::ALL.to_vec();
    let mut sweep_kind = "none".to_string();
    let mut sweep_values: Vec<f64> = Vec::new();
    let mut train = TrainBudgets::default();
    let mut test_episodes = 250usize;
    let mut seeds: Vec<u64> = vec![1];
    let mut dmarl_agents = 4usize;
    let mut catalog_mode = default_mode;
    let mut catalog_budget = 1usize << 22;

    for (key, value) in kv {
        match key.as_str() {
            "preset" => {}
            "schemes" => schemes = parse_list(value, "schemes")?,
            "sweep" => sweep_kind = value.clone(),
            "sweep_values" => sweep_values = parse_list(value, "sweep_values")?,
            "train_episodes_sarl" => train.sarl = value.parse()?,
            "train_episodes_marl" => train.marl = value.parse()?,
            "train_episodes_dmarl" => train.dmarl = value.parse()?,
            "test_episodes" => test_episodes = value.parse()?,
            "seeds" => seeds = parse_list(value, "seeds")?,
            "dmarl_agents" => dmarl_agents = value.parse()?,
            "catalog_budget" => catalog_budget = value.parse()?,
            "catalog_mode" => {
                catalog_mode = match value.as_str() {
                    "coverage" => CatalogMode::CoverageRule,
                    "learned" => CatalogMode::LearnedAssociation,
                    other => bail!("catalog_mode must be coverage or learned, got {other:?}"),
                }
            }
            other => {
                let hit = override_field(&mut scenario_json, other, value)?
                    || override_field(&mut fading_json, other, value)?;
                if !hit {
                    bail!("unknown config key {other:?}");
                }
            }
        }
    }

    let sweep = match sweep_kind.as_str() {
        "none" => {
            if !sweep_values.is_empty() {
                bail!("sweep_values given but sweep = none");
            }
            Sweep::None
        }
        "sinr_min" => Sweep::SinrMin(sweep_values.clone()),
        "coverage_radius" => Sweep::CoverageRadius(sweep_values.clone()),
        other => bail!("sweep must be none, sinr_min, or coverage_radius, got {other:?}"),
    };
    if matches!(sweep, Sweep::SinrMin(ref v) | Sweep::CoverageRadius(ref v) if v.is_empty()) {
        bail!("sweep selected but sweep_values is empty");
    }
    if test_episodes == 0 {
        bail!("test_episodes must be > 0");
    }
    if dmarl_agents == 0 {
        bail!("dmarl_agents must be > 0");
    }

    let scenario: ScenarioConfig = serde_json::from_value(scenario_json)?;
    let fading: FadingParams = serde_json::from_value(fading_json)?;
    scenario.validate().map_err(|e| anyhow!("invalid scenario: {e}"))?;

    Ok(Plan {
        preset: preset_name.to_string(),
        scenario,
        fading,
        catalog_mode,
        schemes,
        sweep,
        train,
        test_episodes,
        seeds,
        dmarl_agents,
        catalog_budget,
    })
}

/// Loads a plan file.
pub fn load_plan(path: &Path) -> Result<Plan> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read plan file {}", path.display()))?;
    let kv = parse_kv(&text).with_context(|| format!("in plan file {}", path.display()))?;
    plan_from_kv(&kv)
}

/// Serializes a config struct back to sorted key=value lines.
pub fn to_kv_lines<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_value(value)?;
    let map = json.as_object().ok_or_else(|| anyhow!("expected a struct"))?;
    let mut out = String::new();
    for (k, v) in map {
        let rendered = match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        out.push_str(&format!("{k} = {rendered}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan_of(text: &str) -> Result<Plan> {
        plan_from_kv(&parse_kv(text).unwrap())
    }

    #[test]
    fn defaults_and_preset() {
        let p = plan_of("preset = tiny\n").unwrap();
        assert_eq!(p.scenario.vu_count, 2);
        assert_eq!(p.catalog_mode, CatalogMode::LearnedAssociation);
        assert_eq!(p.test_episodes, 250);
        assert_eq!(p.train.dmarl, 25_000);
        assert_eq!(p.schemes.len(), 6);
        assert!(!p.fading.fast_fading);

        let p = plan_of("preset = full\n").unwrap();
        assert_eq!(p.scenario.vu_count, 3);
        assert_eq!(p.catalog_mode, CatalogMode::CoverageRule);
        assert!(p.fading.fast_fading);
    }

    #[test]
    fn comments_whitespace_and_overrides() {
        let p = plan_of(
            "# a comment\n\npreset = full\n  coverage_radius =  300  \nshadowing_std_db = 6\nseeds = 1, 2,3\n",
        )
        .unwrap();
        assert_eq!(p.scenario.coverage_radius, 300.0);
        assert_eq!(p.fading.shadowing_std_db, 6.0);
        assert_eq!(p.seeds, vec![1, 2, 3]);
    }

    #[test]
    fn sweep_parsing() {
        let p = plan_of("preset = full\nsweep = sinr_min\nsweep_values = 2,4,6\n").unwrap();
        assert_eq!(p.sweep, Sweep::SinrMin(vec![2.0, 4.0, 6.0]));
        assert_eq!(p.sweep.points().len(), 3);
        let mut cfg = p.scenario.clone();
        p.sweep.apply(&mut cfg, Some(4.0));
        assert_eq!(cfg.sinr_min_db, 4.0);
        assert_eq!(p.sweep.label(Some(4.0)), "sinr_min=4");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(plan_of("preset = huge\n").is_err());
        assert!(plan_of("nonsense_key = 3\n").is_err());
        assert!(plan_of("schemes = brute,dqn\n").is_err());
        assert!(plan_of("sweep = sinr_min\n").is_err());
        assert!(plan_of("sweep_values = 1,2\n").is_err());
        assert!(parse_kv("no equals sign").is_err());
    }

    #[test]
    fn kv_round_trip_of_scenario() {
        let p = plan_of("preset = tiny\nroi_length = 321\n").unwrap();
        let lines = to_kv_lines(&p.scenario).unwrap();
        assert!(lines.contains("roi_length = 321"));
        let kv = parse_kv(&lines).unwrap();
        let p2 = plan_from_kv(
            &kv.into_iter()
                .chain([("preset".to_string(), "tiny".to_string())])
                .collect(),
        )
        .unwrap();
        assert_eq!(p2.scenario, p.scenario);
    }
}
