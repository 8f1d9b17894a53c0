//! Turns a finished run's summary.csv into a plain-text comparison against
//! the exhaustive-search benchmark, one table per sweep point.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use vecell_core::metrics::{compare_schemes, SummaryStats};

use crate::csvout::SUMMARY_HEADER;

/// One parsed summary.csv row.
#[derive(Debug, Clone)]
struct Row {
    sweep: String,
    stats: SummaryStats,
}

fn parse_summary(text: &str) -> Result<Vec<Row>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SUMMARY_HEADER => {}
        other => bail!("unexpected summary header {other:?}"),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != SUMMARY_HEADER.split(',').count() {
            bail!("summary row {}: wrong column count", i + 2);
        }
        let num = |idx: usize, what: &str| -> Result<f64> {
            f[idx].parse().with_context(|| format!("summary row {}: bad {what}", i + 2))
        };
        rows.push(Row {
            sweep: f[0].to_string(),
            stats: SummaryStats {
                scheme: f[1].to_string(),
                episodes: num(4, "test_episodes")? as usize,
                steps: num(5, "steps")? as usize,
                avg_reward: num(6, "avg_reward")?,
                avg_ee_raw: num(8, "avg_ee_raw")?,
                success_prob: num(9, "success_prob")?,
                jain_step: num(10, "jain_step")?,
                jain_pooled: num(11, "jain_pooled")?,
                avg_power_w: num(12, "avg_power_w")?,
            },
        });
    }
    Ok(rows)
}

/// Averages per-seed summaries of one scheme into a single entry.
fn mean_stats(group: &[&SummaryStats]) -> SummaryStats {
    let n = group.len() as f64;
    let mean = |get: fn(&SummaryStats) -> f64| group.iter().map(|s| get(s)).sum::<f64>() / n;
    SummaryStats {
        scheme: group[0].scheme.clone(),
        steps: group.iter().map(|s| s.steps).sum(),
        episodes: group[0].episodes,
        avg_reward: mean(|s| s.avg_reward),
        avg_ee_raw: mean(|s| s.avg_ee_raw),
        success_prob: mean(|s| s.success_prob),
        jain_step: mean(|s| s.jain_step),
        jain_pooled: mean(|s| s.jain_pooled),
        avg_power_w: mean(|s| s.avg_power_w),
    }
}

/// Builds the report text from an output directory holding summary.csv.
pub fn build_report(out_dir: &Path) -> Result<String> {
    let path = out_dir.join("summary.csv");
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let rows = parse_summary(&text)?;
    if rows.is_empty() {
        bail!("summary.csv holds no rows");
    }

    // Group by sweep label, preserving file order, then by scheme.
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<&Row>> = BTreeMap::new();
    for row in &rows {
        if !groups.contains_key(&row.sweep) {
            order.push(row.sweep.clone());
        }
        groups.entry(row.sweep.clone()).or_default().push(row);
    }

    let mut report = String::new();
    for label in order {
        let group = &groups[&label];
        let mut scheme_order: Vec<String> = Vec::new();
        let mut by_scheme: BTreeMap<String, Vec<&SummaryStats>> = BTreeMap::new();
        for row in group {
            if !by_scheme.contains_key(&row.stats.scheme) {
                scheme_order.push(row.stats.scheme.clone());
            }
            by_scheme.entry(row.stats.scheme.clone()).or_default().push(&row.stats);
        }
        let stats: Vec<SummaryStats> =
            scheme_order.iter().map(|s| mean_stats(&by_scheme[s])).collect();
        let table = compare_schemes(&stats)
            .with_context(|| format!("cannot compare sweep point {label}"))?;
        report.push_str(&format!("=== sweep point: {label} ===\n{table}\n"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csvout::summary_row;

    fn stats(scheme: &str, reward: f64) -> SummaryStats {
        SummaryStats {
            scheme: scheme.into(),
            steps: 10,
            episodes: 2,
            avg_reward: reward,
            avg_ee_raw: reward,
            success_prob: 0.5,
            jain_step: 1.0,
            jain_pooled: 1.0,
            avg_power_w: 0.5,
        }
    }

    #[test]
    fn report_from_round_tripped_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = String::from(SUMMARY_HEADER);
        csv.push('\n');
        for (scheme, reward) in
            [("brute", 2.0), ("dmarl", 1.9), ("equal", 1.0), ("random", 0.2)]
        {
            for seed in [1u64, 2] {
                csv.push_str(&summary_row("none", seed, 0, &stats(scheme, reward), &[]));
                csv.push('\n');
            }
        }
        std::fs::write(dir.path().join("summary.csv"), csv).unwrap();
        let report = build_report(dir.path()).unwrap();
        assert!(report.contains("sweep point: none"));
        assert!(report.contains("brute"));
        assert!(report.contains("dmarl"));
    }

    #[test]
    fn report_requires_benchmark_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = String::from(SUMMARY_HEADER);
        csv.push('\n');
        csv.push_str(&summary_row("none", 1, 0, &stats("equal", 1.0), &[]));
        csv.push('\n');
        std::fs::write(dir.path().join("summary.csv"), csv).unwrap();
        assert!(build_report(dir.path()).is_err());
    }
}
