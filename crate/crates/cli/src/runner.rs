//! Executes an experiment plan: one independent cell per
//! (sweep point x scheme x seed), a bounded worker pool, per-cell files,
//! and deterministic aggregate outputs.

use std::path::Path;
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use vecell_core::action::{partition, ActionCatalog};
use vecell_core::learning::{dmarl_train, marl_train, sarl_train, TrainParams};
use vecell_core::metrics::{summarize, StepRecord, SummaryStats};
use vecell_core::rng::{tag_hash, Tag};
use vecell_core::sim::{
    run_test_episodes, test_streams, DmarlPolicy, EqualPowerPolicy, MarlPolicy, OraclePolicy,
    Policy, RandomPolicy, SarlPolicy, SimEnv,
};

use crate::artifact::{Artifact, Payload};
use crate::config::{Plan, Scheme};
use crate::csvout;
use crate::manifest::{CellRecord, Manifest};

/// One unit of work.
#[derive(Debug, Clone)]
struct Cell {
    sweep_value: Option<f64>,
    sweep_label: String,
    scheme: Scheme,
    seed: u64,
}

/// Training master seed for a cell. The sweep value and scheme are mixed in
/// so cells train independently; evaluation channel streams deliberately
/// depend on the seed alone (see `test_streams`) so schemes and sweep
/// points stay comparable on identical channels.
fn train_seed(seed: u64, scheme: Scheme, sweep_value: Option<f64>) -> u64 {
    tag_hash(
        seed,
        &[
            Tag::S("cell"),
            Tag::S(scheme.name()),
            Tag::U(sweep_value.map_or(0, f64::to_bits)),
        ],
    )
}

/// Environment for one sweep point.
fn cell_env(plan: &Plan, sweep_value: Option<f64>) -> Result<SimEnv> {
    let mut cfg = plan.scenario.clone();
    plan.sweep.apply(&mut cfg, sweep_value);
    SimEnv::new(cfg, plan.fading.clone()).map_err(|e| anyhow!("{e}"))
}

struct CellOutput {
    record: CellRecord,
}

fn run_cell(plan: &Plan, cell: &Cell, out_dir: &Path) -> Result<CellOutput> {
    let start = std::time::Instant::now();
    let env = cell_env(plan, cell.sweep_value)?;
    let catalog = env
        .build_catalog(plan.catalog_mode, plan.catalog_budget)
        .map_err(|e| anyhow!("{e}"))?;
    let local = env.build_marl_catalog(plan.catalog_budget).map_err(|e| anyhow!("{e}"))?;

    let tseed = train_seed(cell.seed, cell.scheme, cell.sweep_value);
    let episodes = match cell.scheme {
        Scheme::Sarl => plan.train.sarl,
        Scheme::Marl => plan.train.marl,
        Scheme::Dmarl => plan.train.dmarl,
        _ => 0,
    };

    // Train, evaluate greedily, and capture the artifact payload.
    let mut payload: Option<(Payload, u64)> = None;
    let records: Vec<StepRecord> = {
        let (mut er, mut pr) = test_streams(cell.seed, cell.scheme.name());
        let mut run =
            |p: &mut dyn Policy| run_test_episodes(&env, p, plan.test_episodes, &mut er, &mut pr);
        match cell.scheme {
            Scheme::Brute => run(&mut OraclePolicy { catalog: &catalog }),
            Scheme::Equal => run(&mut EqualPowerPolicy),
            Scheme::Random => run(&mut RandomPolicy { catalog: &catalog }),
            Scheme::Sarl => {
                let (q, _) = sarl_train(&env, &catalog, &TrainParams::new(episodes, tseed))?;
                let out = run(&mut SarlPolicy { catalog: &catalog, q: &q });
                payload = Some((Payload::Tables(vec![q]), catalog.hash()));
                out
            }
            Scheme::Dmarl => {
                let (_, reg, _) =
                    dmarl_train(&env, &catalog, plan.dmarl_agents, &TrainParams::new(episodes, tseed))?;
                let out = run(&mut DmarlPolicy { catalog: &catalog, register: &reg });
                payload = Some((Payload::Register(reg), catalog.hash()));
                out
            }
            Scheme::Marl => {
                let (tables, _) = marl_train(&env, &local, &TrainParams::new(episodes, tseed))?;
                let out = run(&mut MarlPolicy { local_catalog: &local, tables: &tables });
                payload = Some((Payload::Tables(tables), local.hash()));
                out
            }
        }
        .map_err(|e| anyhow!("{e}"))?
    };

    let stats = summarize(cell.scheme.name(), &records);
    let cell_dir = out_dir.join("cells").join(&cell.sweep_label);
    std::fs::create_dir_all(&cell_dir)
        .with_context(|| format!("cannot create {}", cell_dir.display()))?;
    let stem = format!("{}_seed{}", cell.scheme, cell.seed);

    let log_rel = format!("cells/{}/{stem}.log.csv", cell.sweep_label);
    std::fs::write(
        out_dir.join(&log_rel),
        csvout::episode_log_csv(&records, env.cfg().vu_count),
    )
    .with_context(|| format!("cannot write {log_rel}"))?;

    let artifact_rel = if let Some((payload, hash)) = payload {
        let rel = format!("cells/{}/{stem}.policy", cell.sweep_label);
        let art = Artifact {
            scheme: cell.scheme,
            catalog_mode: plan.catalog_mode,
            catalog_hash: hash,
            scenario: env.cfg().clone(),
            fading: plan.fading.clone(),
            seed: cell.seed,
            train_episodes: episodes,
            payload,
        };
        art.save(&out_dir.join(&rel))?;
        Some(rel)
    } else {
        None
    };

    let summary_row =
        csvout::summary_row(&cell.sweep_label, cell.seed, episodes, &stats, &records);
    Ok(CellOutput {
        record: CellRecord {
            status: "done".into(),
            artifact: artifact_rel,
            episode_log: Some(log_rel),
            summary: Some(stats),
            summary_row: Some(summary_row),
            wall_secs: start.elapsed().as_secs_f64(),
            error: None,
        },
    })
}

/// Verifies a previously finished cell so resume can trust it. A missing or
/// unreadable artifact is a hard error naming the file.
fn verify_done_cell(out_dir: &Path, rec: &CellRecord, joint_hash: u64, local_hash: u64) -> Result<()> {
    if let Some(rel) = &rec.artifact {
        let art = Artifact::load(&out_dir.join(rel))?;
        let expected = if art.scheme == Scheme::Marl { local_hash } else { joint_hash };
        art.check_catalog(expected)
            .with_context(|| format!("artifact {rel}"))?;
    }
    if let Some(rel) = &rec.episode_log {
        if !out_dir.join(rel).is_file() {
            bail!("missing episode log {rel}");
        }
    }
    Ok(())
}

/// Runs (or resumes) a plan. Returns an error if any cell failed; partial
/// results stay on disk with failure markers in the manifest.
pub fn run_plan(plan: &Plan, out_dir: &Path, workers: usize) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output dir {}", out_dir.display()))?;

    // Catalog shape is sweep-independent (the sweep varies the SINR gate or
    // the coverage radius, not the action grid), so hash it once.
    let base_env = cell_env(plan, plan.sweep.points()[0])?;
    let catalog = base_env
        .build_catalog(plan.catalog_mode, plan.catalog_budget)
        .map_err(|e| anyhow!("{e}"))?;
    let local = base_env.build_marl_catalog(plan.catalog_budget).map_err(|e| anyhow!("{e}"))?;
    let joint_hash = catalog.hash();
    let local_hash = local.hash();
    let segments = partition(catalog.len(), plan.dmarl_agents)
        .map_err(|e| anyhow!("{e}"))?
        .iter()
        .map(|s| (s.lo, s.hi))
        .collect();

    let manifest = if out_dir.join(crate::manifest::MANIFEST_NAME).is_file() {
        let m = Manifest::load(out_dir)?;
        m.check_compatible(plan, &format!("{joint_hash:016x}"))?;
        m
    } else {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            plan: plan.clone(),
            catalog_hash: format!("{joint_hash:016x}"),
            catalog_len: catalog.len(),
            marl_catalog_hash: format!("{local_hash:016x}"),
            marl_catalog_len: local.len(),
            segments,
            cells: Default::default(),
        }
    };

    // Check reusable cells, then persist the manifest before any new result.
    let mut cells = Vec::new();
    for point in plan.sweep.points() {
        for &scheme in &plan.schemes {
            for &seed in &plan.seeds {
                cells.push(Cell {
                    sweep_value: point,
                    sweep_label: plan.sweep.label(point),
                    scheme,
                    seed,
                });
            }
        }
    }
    let mut pending = Vec::new();
    for cell in &cells {
        let key = Manifest::cell_key(&cell.sweep_label, cell.scheme.name(), cell.seed);
        match manifest.cells.get(&key) {
            Some(rec) if rec.status == "done" => {
                verify_done_cell(out_dir, rec, joint_hash, local_hash)
                    .with_context(|| format!("cannot resume cell {key}"))?;
            }
            _ => pending.push(cell.clone()),
        }
    }
    manifest.save(out_dir)?;

    let manifest = Mutex::new(manifest);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot build worker pool")?;
    pool.install(|| {
        pending.par_iter().for_each(|cell| {
            let key = Manifest::cell_key(&cell.sweep_label, cell.scheme.name(), cell.seed);
            let record = match run_cell(plan, cell, out_dir) {
                Ok(out) => out.record,
                Err(e) => CellRecord {
                    status: "failed".into(),
                    artifact: None,
                    episode_log: None,
                    summary: None,
                    summary_row: None,
                    wall_secs: 0.0,
                    error: Some(format!("{e:#}")),
                },
            };
            let mut m = manifest.lock().unwrap();
            m.cells.insert(key, record);
            // Persist progress; a crashed run resumes from here.
            let _ = m.save(out_dir);
        });
    });

    let manifest = manifest.into_inner().unwrap();
    manifest.save(out_dir)?;

    let failures: Vec<String> = cells
        .iter()
        .filter_map(|c| {
            let key = Manifest::cell_key(&c.sweep_label, c.scheme.name(), c.seed);
            let rec = manifest.cells.get(&key)?;
            (rec.status != "done")
                .then(|| format!("{key}: {}", rec.error.as_deref().unwrap_or("unknown")))
        })
        .collect();
    if !failures.is_empty() {
        bail!("{} cell(s) failed:\n{}", failures.len(), failures.join("\n"));
    }

    write_aggregates(plan, &manifest, &cells, out_dir)?;
    Ok(())
}

/// Summary CSV (plan order, byte-stable) and per-metric plot data.
fn write_aggregates(plan: &Plan, manifest: &Manifest, cells: &[Cell], out_dir: &Path) -> Result<()> {
    let mut summary = String::from(csvout::SUMMARY_HEADER);
    summary.push('\n');
    for cell in cells {
        let key = Manifest::cell_key(&cell.sweep_label, cell.scheme.name(), cell.seed);
        let rec = &manifest.cells[&key];
        summary.push_str(rec.summary_row.as_deref().expect("done cell has a summary row"));
        summary.push('\n');
    }
    std::fs::write(out_dir.join("summary.csv"), summary).context("cannot write summary.csv")?;

    type Metric = (&'static str, fn(&SummaryStats) -> f64);
    let metrics: [Metric; 4] = [
        ("avg_reward", |s| s.avg_reward),
        ("avg_ee_raw", |s| s.avg_ee_raw),
        ("success_prob", |s| s.success_prob),
        ("jain_pooled", |s| s.jain_pooled),
    ];
    for (name, get) in metrics {
        let mut out = String::from("sweep");
        for &scheme in &plan.schemes {
            out.push(',');
            out.push_str(scheme.name());
        }
        out.push('\n');
        for point in plan.sweep.points() {
            let label = plan.sweep.label(point);
            out.push_str(&label);
            for &scheme in &plan.schemes {
                // Mean over seeds.
                let mut acc = 0.0;
                for &seed in &plan.seeds {
                    let key = Manifest::cell_key(&label, scheme.name(), seed);
                    let stats = manifest.cells[&key].summary.as_ref().expect("done cell");
                    acc += get(stats);
                }
                out.push(',');
                out.push_str(&csvout::fmt_f64(acc / plan.seeds.len() as f64));
            }
            out.push('\n');
        }
        std::fs::write(out_dir.join(format!("plot_{name}.csv")), out)
            .with_context(|| format!("cannot write plot_{name}.csv"))?;
    }
    Ok(())
}

/// Re-evaluates a stored policy artifact on freshly drawn test episodes.
pub fn evaluate_artifact(path: &Path, episodes: Option<usize>) -> Result<(SummaryStats, String)> {
    let art = Artifact::load(path)?;
    let env = SimEnv::new(art.scenario.clone(), art.fading.clone()).map_err(|e| anyhow!("{e}"))?;
    let budget = 1usize << 22;
    let catalog: ActionCatalog = if art.scheme == Scheme::Marl {
        env.build_marl_catalog(budget).map_err(|e| anyhow!("{e}"))?
    } else {
        env.build_catalog(art.catalog_mode, budget).map_err(|e| anyhow!("{e}"))?
    };
    art.check_catalog(catalog.hash())
        .with_context(|| format!("artifact {}", path.display()))?;

    let episodes = episodes.unwrap_or(250);
    let (mut er, mut pr) = test_streams(art.seed, art.scheme.name());
    let records = match (&art.payload, art.scheme) {
        (Payload::Tables(tables), Scheme::Sarl) => {
            let q = tables.first().ok_or_else(|| anyhow!("artifact holds no table"))?;
            run_test_episodes(&env, &mut SarlPolicy { catalog: &catalog, q }, episodes, &mut er, &mut pr)
        }
        (Payload::Tables(tables), Scheme::Marl) => run_test_episodes(
            &env,
            &mut MarlPolicy { local_catalog: &catalog, tables },
            episodes,
            &mut er,
            &mut pr,
        ),
        (Payload::Register(reg), Scheme::Dmarl) => run_test_episodes(
            &env,
            &mut DmarlPolicy { catalog: &catalog, register: reg },
            episodes,
            &mut er,
            &mut pr,
        ),
        _ => bail!("artifact payload does not match scheme {}", art.scheme),
    }
    .map_err(|e| anyhow!("{e}"))?;

    let stats = summarize(art.scheme.name(), &records);
    let row = csvout::summary_row("evaluate", art.seed, art.train_episodes, &stats, &records);
    Ok((stats, row))
}
