//! Per-step logs and the summary statistics computed from them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One logged simulation step of a test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: u32,
    pub step: u32,
    /// Tabular state index at selection time.
    pub state: u32,
    /// Joint catalog index, when the policy works on a joint catalog.
    pub action: Option<u32>,
    /// True iff every VU cleared the minimum SINR.
    pub success: bool,
    /// Gated reward (energy efficiency if successful, else 0), bits/Hz/J.
    pub reward: f64,
    /// Raw energy efficiency regardless of the SINR gate, bits/Hz/J.
    pub ee: f64,
    /// Total transmit power, watts.
    pub total_power: f64,
    /// Worst per-VU linear SINR.
    pub min_sinr: f64,
    /// Backhaul consumption per VU, bits/s/Hz.
    pub backhaul: Vec<f64>,
}

/// Fraction of steps where every VU met the SINR requirement.
pub fn success_probability(records: &[StepRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.success).count() as f64 / records.len() as f64
}

/// Jain's fairness index (sum x)^2 / (n * sum x^2); 1 for any all-equal
/// vector, 1/n for a single nonzero entry. An all-zero vector is treated as
/// equal shares, index 1.
pub fn jain_index(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 1.0;
    }
    let sum: f64 = values.iter().sum();
    let sumsq: f64 = values.iter().map(|v| v * v).sum();
    if sumsq == 0.0 {
        return 1.0;
    }
    sum * sum / (n as f64 * sumsq)
}

/// Mean over steps of the per-step Jain index of the backhaul vector.
pub fn mean_step_jain(records: &[StepRecord]) -> f64 {
    if records.is_empty() {
        return 1.0;
    }
    records.iter().map(|r| jain_index(&r.backhaul)).sum::<f64>() / records.len() as f64
}

/// Jain index of per-VU backhaul totals pooled over all steps.
pub fn pooled_jain(records: &[StepRecord]) -> f64 {
    let Some(first) = records.first() else { return 1.0 };
    let mut totals = vec![0.0; first.backhaul.len()];
    for r in records {
        for (t, &b) in totals.iter_mut().zip(&r.backhaul) {
            *t += b;
        }
    }
    jain_index(&totals)
}

/// Mean gated reward over all steps; the headline efficiency figure.
pub fn average_reward(records: &[StepRecord]) -> f64 {
    mean(records.iter().map(|r| r.reward))
}

/// Mean raw energy efficiency (no SINR gate).
pub fn average_ee_raw(records: &[StepRecord]) -> f64 {
    mean(records.iter().map(|r| r.ee))
}

/// Mean total transmit power, watts.
pub fn average_power(records: &[StepRecord]) -> f64 {
    mean(records.iter().map(|r| r.total_power))
}

/// Sample standard deviation of the gated reward.
pub fn reward_std(records: &[StepRecord]) -> f64 {
    if records.len() < 2 {
        return 0.0;
    }
    let m = average_reward(records);
    let ss: f64 = records.iter().map(|r| (r.reward - m).powi(2)).sum();
    (ss / (records.len() - 1) as f64).sqrt()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Linear ratio in decibels; 0 or negative input maps to -inf.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Everything a comparison table needs about one scheme's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub scheme: String,
    pub steps: usize,
    pub episodes: usize,
    pub avg_reward: f64,
    pub avg_ee_raw: f64,
    pub success_prob: f64,
    pub jain_step: f64,
    pub jain_pooled: f64,
    pub avg_power_w: f64,
}

/// Reduces a step log to its summary.
pub fn summarize(scheme: &str, records: &[StepRecord]) -> SummaryStats {
    let episodes = records
        .iter()
        .map(|r| r.episode)
        .max()
        .map_or(0, |m| m as usize + 1);
    SummaryStats {
        scheme: scheme.to_string(),
        steps: records.len(),
        episodes,
        avg_reward: average_reward(records),
        avg_ee_raw: average_ee_raw(records),
        success_prob: success_probability(records),
        jain_step: mean_step_jain(records),
        jain_pooled: pooled_jain(records),
        avg_power_w: average_power(records),
    }
}

/// One line of the scheme comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scheme: String,
    pub episodes: usize,
    pub avg_reward: f64,
    /// |benchmark - scheme| / benchmark, percent.
    pub deviation_pct: f64,
    pub gain_over_equal_db: Option<f64>,
    pub gain_over_random_db: Option<f64>,
}

/// A plain-text comparison table against the exhaustive-search benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Builds the comparison from one summary per scheme. The "brute" row is
/// the benchmark and must be present.
pub fn compare_schemes(stats: &[SummaryStats]) -> Result<ComparisonTable> {
    let bench = stats
        .iter()
        .find(|s| s.scheme == "brute")
        .ok_or_else(|| Error::Usage("comparison requires a brute (benchmark) row".into()))?
        .avg_reward;
    if bench <= 0.0 {
        return Err(Error::Degenerate("benchmark average reward is not positive".into()));
    }
    let equal = stats.iter().find(|s| s.scheme == "equal").map(|s| s.avg_reward);
    let random = stats.iter().find(|s| s.scheme == "random").map(|s| s.avg_reward);
    let rows = stats
        .iter()
        .map(|s| ComparisonRow {
            scheme: s.scheme.clone(),
            episodes: s.episodes,
            avg_reward: s.avg_reward,
            deviation_pct: (bench - s.avg_reward).abs() / bench * 100.0,
            gain_over_equal_db: equal.map(|e| to_db(s.avg_reward / e)),
            gain_over_random_db: random.map(|r| to_db(s.avg_reward / r)),
        })
        .collect();
    Ok(ComparisonTable { rows })
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:>10} {:>18} {:>12} {:>14} {:>15}",
            "scheme", "episodes", "avg EE (b/Hz/J)", "dev (%)", "vs equal (dB)", "vs random (dB)"
        )?;
        for r in &self.rows {
            let fmt_opt = |v: Option<f64>| match v {
                Some(x) if x.is_finite() => format!("{x:.2}"),
                Some(_) => "-inf".to_string(),
                None => "n/a".to_string(),
            };
            writeln!(
                f,
                "{:<8} {:>10} {:>18.9} {:>12.6} {:>14} {:>15}",
                r.scheme,
                r.episodes,
                r.avg_reward,
                r.deviation_pct,
                fmt_opt(r.gain_over_equal_db),
                fmt_opt(r.gain_over_random_db),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(success: bool, reward: f64, ee: f64, backhaul: Vec<f64>) -> StepRecord {
        StepRecord {
            episode: 0,
            step: 0,
            state: 0,
            action: None,
            success,
            reward,
            ee,
            total_power: 1.0,
            min_sinr: 1.0,
            backhaul,
        }
    }

    #[test]
    fn jain_closed_forms() {
        assert_eq!(jain_index(&[5.0, 5.0, 5.0]), 1.0);
        // Single nonzero entry: 1/n.
        assert!((jain_index(&[1.0, 0.0, 0.0, 0.0]) - 0.25).abs() < 1e-15);
        // (1+2+3)^2 / (3 * 14) = 36/42 = 6/7.
        assert!((jain_index(&[1.0, 2.0, 3.0]) - 6.0 / 7.0).abs() < 1e-15);
        assert_eq!(jain_index(&[0.0, 0.0]), 1.0);
        assert_eq!(jain_index(&[]), 1.0);
    }

    #[test]
    fn jain_is_scale_invariant() {
        let v = [0.3, 1.7, 0.9];
        let scaled: Vec<f64> = v.iter().map(|x| x * 42.0).collect();
        assert!((jain_index(&v) - jain_index(&scaled)).abs() < 1e-15);
    }

    #[test]
    fn success_probability_counts_flags() {
        let recs = vec![
            rec(true, 1.0, 1.0, vec![1.0]),
            rec(false, 0.0, 0.5, vec![1.0]),
            rec(true, 2.0, 2.0, vec![1.0]),
            rec(false, 0.0, 0.1, vec![1.0]),
        ];
        assert_eq!(success_probability(&recs), 0.5);
        assert_eq!(success_probability(&[]), 0.0);
    }

    #[test]
    fn averages_and_pooling() {
        let recs = vec![
            rec(true, 2.0, 2.0, vec![3.0, 1.0]),
            rec(false, 0.0, 4.0, vec![1.0, 3.0]),
        ];
        assert_eq!(average_reward(&recs), 1.0);
        assert_eq!(average_ee_raw(&recs), 3.0);
        // Per-step Jain: (4^2)/(2*10) = 0.8 both steps.
        assert!((mean_step_jain(&recs) - 0.8).abs() < 1e-15);
        // Pooled totals are (4, 4): perfectly fair.
        assert_eq!(pooled_jain(&recs), 1.0);
    }

    #[test]
    fn db_conversion() {
        assert_eq!(to_db(10.0), 10.0);
        assert!((to_db(2.0) - 3.010299956639812).abs() < 1e-12);
        assert_eq!(to_db(0.0), f64::NEG_INFINITY);
    }

    fn stats(scheme: &str, avg: f64) -> SummaryStats {
        SummaryStats {
            scheme: scheme.to_string(),
            steps: 10,
            episodes: 1,
            avg_reward: avg,
            avg_ee_raw: avg,
            success_prob: 1.0,
            jain_step: 1.0,
            jain_pooled: 1.0,
            avg_power_w: 1.0,
        }
    }

    #[test]
    fn comparison_benchmark_against_itself_is_zero_deviation() {
        let table = compare_schemes(&[stats("brute", 5.0)]).unwrap();
        assert_eq!(table.rows[0].deviation_pct, 0.0);
        assert!(table.rows[0].gain_over_equal_db.is_none());
    }

    #[test]
    fn comparison_ratio_ten_is_ten_db() {
        let table =
            compare_schemes(&[stats("brute", 10.0), stats("equal", 1.0), stats("random", 1.0)])
                .unwrap();
        let brute = &table.rows[0];
        assert!((brute.gain_over_equal_db.unwrap() - 10.0).abs() < 1e-12);
        assert!((brute.gain_over_random_db.unwrap() - 10.0).abs() < 1e-12);
        // equal deviates from the benchmark by 90%
        assert!((table.rows[1].deviation_pct - 90.0).abs() < 1e-12);
    }

    #[test]
    fn comparison_requires_benchmark() {
        assert!(compare_schemes(&[stats("equal", 1.0)]).is_err());
    }

    #[test]
    fn reward_std_examples() {
        let recs = vec![
            rec(true, 1.0, 1.0, vec![1.0]),
            rec(true, 3.0, 3.0, vec![1.0]),
        ];
        assert!((reward_std(&recs) - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(reward_std(&recs[..1]), 0.0);
    }

    #[test]
    fn summarize_counts_episodes() {
        let mut recs = vec![rec(true, 1.0, 1.0, vec![1.0])];
        recs.push(StepRecord { episode: 2, ..recs[0].clone() });
        let s = summarize("x", &recs);
        assert_eq!(s.episodes, 3);
        assert_eq!(s.steps, 2);
        assert_eq!(s.scheme, "x");
    }
}
