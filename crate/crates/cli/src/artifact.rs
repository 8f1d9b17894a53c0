//! Versioned text artifacts for trained policies.
//!
//! An artifact is self-contained: it carries the resolved scenario and
//! fading parameters, the catalog mode, and the catalog content hash, so it
//! can be re-evaluated without the original plan. A hash mismatch against
//! the freshly enumerated catalog is a hard error; a stale table must never
//! be replayed against a different action space.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use vecell_core::action::CatalogMode;
use vecell_core::channel::FadingParams;
use vecell_core::learning::{CentralRegister, QTable};
use vecell_core::scenario::ScenarioConfig;

use crate::config::{parse_kv, to_kv_lines, Scheme};

const MAGIC: &str = "vecell-artifact v1";

/// The policy payload of an artifact.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// One or more Q-tables (one for SARL, one per agent for MARL/D-MARL).
    Tables(Vec<QTable>),
    /// The central best-action register.
    Register(CentralRegister),
}

/// A trained policy plus everything needed to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub scheme: Scheme,
    pub catalog_mode: CatalogMode,
    pub catalog_hash: u64,
    pub scenario: ScenarioConfig,
    pub fading: FadingParams,
    pub seed: u64,
    pub train_episodes: usize,
    pub payload: Payload,
}

fn mode_name(mode: CatalogMode) -> &'static str {
    match mode {
        CatalogMode::CoverageRule => "coverage",
        CatalogMode::LearnedAssociation => "learned",
    }
}

fn mode_from_name(s: &str) -> Result<CatalogMode> {
    match s {
        "coverage" => Ok(CatalogMode::CoverageRule),
        "learned" => Ok(CatalogMode::LearnedAssociation),
        other => bail!("unknown catalog mode {other:?}"),
    }
}

impl Artifact {
    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "scheme = {}", self.scheme)?;
        writeln!(out, "catalog_mode = {}", mode_name(self.catalog_mode))?;
        writeln!(out, "catalog_hash = {:016x}", self.catalog_hash)?;
        writeln!(out, "seed = {}", self.seed)?;
        writeln!(out, "train_episodes = {}", self.train_episodes)?;
        writeln!(out, "[scenario]")?;
        out.push_str(&to_kv_lines(&self.scenario)?);
        writeln!(out, "[fading]")?;
        out.push_str(&to_kv_lines(&self.fading)?);
        match &self.payload {
            Payload::Tables(tables) => {
                for q in tables {
                    writeln!(
                        out,
                        "[qtable agent={} states={} width={} offset={}]",
                        q.agent, q.states, q.width, q.offset
                    )?;
                    for s in 0..q.states {
                        let row: Vec<String> =
                            (0..q.width).map(|a| format!("{:e}", q.get(s, a))).collect();
                        writeln!(out, "{}", row.join(" "))?;
                    }
                }
            }
            Payload::Register(reg) => {
                writeln!(out, "[register states={}]", reg.states())?;
                for s in 0..reg.states() {
                    match reg.entry(s) {
                        Some((a, r)) => writeln!(out, "{s} {a} {r:e}")?,
                        None => writeln!(out, "{s} -")?,
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?)
            .with_context(|| format!("cannot write artifact {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Artifact> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read artifact {}", path.display()))?;
        Self::from_text(&text).with_context(|| format!("corrupted artifact {}", path.display()))
    }

    pub fn from_text(text: &str) -> Result<Artifact> {
        let mut lines = text.lines().peekable();
        if lines.next() != Some(MAGIC) {
            bail!("bad magic line (expected {MAGIC:?})");
        }

        // Header key=value lines up to the first section.
        let mut header = String::new();
        while let Some(line) = lines.peek() {
            if line.starts_with('[') {
                break;
            }
            header.push_str(line);
            header.push('\n');
            lines.next();
        }
        let kv = parse_kv(&header)?;
        let get = |k: &str| kv.get(k).ok_or_else(|| anyhow!("missing header field {k}"));
        let scheme: Scheme = get("scheme")?.parse()?;
        let catalog_mode = mode_from_name(get("catalog_mode")?)?;
        let catalog_hash = u64::from_str_radix(get("catalog_hash")?, 16)
            .context("catalog_hash is not hexadecimal")?;
        let seed: u64 = get("seed")?.parse().context("bad seed")?;
        let train_episodes: usize = get("train_episodes")?.parse().context("bad train_episodes")?;

        // Scenario and fading sections.
        let mut section = |name: &str| -> Result<String> {
            match lines.next() {
                Some(l) if l == format!("[{name}]") => {}
                other => bail!("expected [{name}] section, found {other:?}"),
            }
            let mut body = String::new();
            while let Some(line) = lines.peek() {
                if line.starts_with('[') {
                    break;
                }
                body.push_str(line);
                body.push('\n');
                lines.next();
            }
            Ok(body)
        };
        let scenario: ScenarioConfig = kv_to_struct(&section("scenario")?)?;
        let fading: FadingParams = kv_to_struct(&section("fading")?)?;

        // Payload sections.
        let mut tables = Vec::new();
        let mut register = None;
        while let Some(head) = lines.next() {
            if head.is_empty() {
                continue;
            }
            let inner = head
                .strip_prefix('[')
                .and_then(|h| h.strip_suffix(']'))
                .ok_or_else(|| anyhow!("expected a section header, found {head:?}"))?;
            let mut fields = inner.split_whitespace();
            match fields.next() {
                Some("qtable") => {
                    let mut agent = None;
                    let mut states = None;
                    let mut width = None;
                    let mut offset = None;
                    for f in fields {
                        let (k, v) = f.split_once('=').ok_or_else(|| anyhow!("bad qtable field {f:?}"))?;
                        let n: usize = v.parse().with_context(|| format!("bad qtable {k}"))?;
                        match k {
                            "agent" => agent = Some(n),
                            "states" => states = Some(n),
                            "width" => width = Some(n),
                            "offset" => offset = Some(n),
                            other => bail!("unknown qtable field {other:?}"),
                        }
                    }
                    let (agent, states, width, offset) = (
                        agent.ok_or_else(|| anyhow!("qtable missing agent"))?,
                        states.ok_or_else(|| anyhow!("qtable missing states"))?,
                        width.ok_or_else(|| anyhow!("qtable missing width"))?,
                        offset.ok_or_else(|| anyhow!("qtable missing offset"))?,
                    );
                    let mut data = Vec::with_capacity(states * width);
                    for s in 0..states {
                        let row = lines
                            .next()
                            .ok_or_else(|| anyhow!("qtable agent {agent}: missing row {s}"))?;
                        for tok in row.split_whitespace() {
                            data.push(
                                tok.parse::<f64>()
                                    .with_context(|| format!("qtable agent {agent} row {s}: bad value {tok:?}"))?,
                            );
                        }
                        if data.len() != (s + 1) * width {
                            bail!("qtable agent {agent} row {s}: expected {width} values");
                        }
                    }
                    let q = QTable::from_data(agent, states, width, offset, data)
                        .map_err(|e| anyhow!("{e}"))?;
                    if !q.all_finite() {
                        bail!("qtable agent {agent} contains non-finite values");
                    }
                    tables.push(q);
                }
                Some("register") => {
                    let f = fields.next().ok_or_else(|| anyhow!("register missing states"))?;
                    let states: usize = f
                        .strip_prefix("states=")
                        .ok_or_else(|| anyhow!("bad register header {f:?}"))?
                        .parse()
                        .context("bad register states")?;
                    let mut entries = Vec::with_capacity(states);
                    for s in 0..states {
                        let row =
                            lines.next().ok_or_else(|| anyhow!("register: missing row {s}"))?;
                        let mut toks = row.split_whitespace();
                        let idx: usize = toks
                            .next()
                            .ok_or_else(|| anyhow!("register row {s}: empty"))?
                            .parse()
                            .with_context(|| format!("register row {s}: bad state"))?;
                        if idx != s {
                            bail!("register row {s}: out-of-order state {idx}");
                        }
                        match toks.next() {
                            Some("-") => entries.push(None),
                            Some(a) => {
                                let action: usize =
                                    a.parse().with_context(|| format!("register row {s}: bad action"))?;
                                let reward: f64 = toks
                                    .next()
                                    .ok_or_else(|| anyhow!("register row {s}: missing reward"))?
                                    .parse()
                                    .with_context(|| format!("register row {s}: bad reward"))?;
                                if !reward.is_finite() {
                                    bail!("register row {s}: non-finite reward");
                                }
                                entries.push(Some((action, reward)));
                            }
                            None => bail!("register row {s}: missing action"),
                        }
                    }
                    register = Some(CentralRegister::from_entries(entries));
                }
                other => bail!("unknown section {other:?}"),
            }
        }

        let payload = match (tables.is_empty(), register) {
            (false, None) => Payload::Tables(tables),
            (true, Some(reg)) => Payload::Register(reg),
            (true, None) => bail!("artifact has no payload"),
            (false, Some(_)) => bail!("artifact mixes qtable and register payloads"),
        };
        Ok(Artifact {
            scheme,
            catalog_mode,
            catalog_hash,
            scenario,
            fading,
            seed,
            train_episodes,
            payload,
        })
    }

    /// Hard error unless the artifact was trained against this catalog.
    pub fn check_catalog(&self, hash: u64) -> Result<()> {
        if self.catalog_hash != hash {
            bail!(
                "catalog hash mismatch: artifact {:016x}, current {:016x}",
                self.catalog_hash,
                hash
            );
        }
        Ok(())
    }
}

fn kv_to_struct<T: serde::de::DeserializeOwned>(body: &str) -> Result<T> {
    let kv = parse_kv(body)?;
    let mut map = serde_json::Map::new();
    for (k, v) in kv {
        let val = if v == "true" || v == "false" {
            serde_json::Value::Bool(v == "true")
        } else if let Ok(u) = v.parse::<u64>() {
            serde_json::Value::from(u)
        } else if let Ok(f) = v.parse::<f64>() {
            serde_json::Value::from(f)
        } else {
            serde_json::Value::String(v)
        };
        map.insert(k, val);
    }
    serde_json::from_value(serde_json::Value::Object(map)).context("bad config section")
}
