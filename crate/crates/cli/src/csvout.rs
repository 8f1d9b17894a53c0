//! CSV emission. All floats are printed with 9 significant digits in
//! scientific notation, which keeps reruns byte-comparable.

use std::fmt::Write as _;

use vecell_core::metrics::{reward_std, StepRecord, SummaryStats};

/// 9 significant digits, scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

/// One row per step: episode, step, state, action, success, reward, raw EE,
/// total power, worst SINR, then one backhaul column per VU.
pub fn episode_log_csv(records: &[StepRecord], vu_count: usize) -> String {
    let mut out = String::from("episode,step,state,action,success,reward,ee_raw,total_power_w,min_sinr");
    for i in 0..vu_count {
        write!(out, ",backhaul_{i}").unwrap();
    }
    out.push('\n');
    for r in records {
        let action = r.action.map_or(String::from("-"), |a| a.to_string());
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.episode,
            r.step,
            r.state,
            action,
            u8::from(r.success),
            fmt_f64(r.reward),
            fmt_f64(r.ee),
            fmt_f64(r.total_power),
            fmt_f64(r.min_sinr),
        )
        .unwrap();
        for i in 0..vu_count {
            write!(out, ",{}", fmt_f64(r.backhaul.get(i).copied().unwrap_or(0.0))).unwrap();
        }
        out.push('\n');
    }
    out
}

pub const SUMMARY_HEADER: &str = "sweep,scheme,seed,train_episodes,test_episodes,steps,avg_reward,reward_std,avg_ee_raw,success_prob,jain_step,jain_pooled,avg_power_w";

/// One summary row; `sweep` is the cell's sweep label.
pub fn summary_row(
    sweep: &str,
    seed: u64,
    train_episodes: usize,
    stats: &SummaryStats,
    records: &[StepRecord],
) -> String {
    format!(
        "{sweep},{},{seed},{train_episodes},{},{},{},{},{},{},{},{},{}",
        stats.scheme,
        stats.episodes,
        stats.steps,
        fmt_f64(stats.avg_reward),
        fmt_f64(reward_std(records)),
        fmt_f64(stats.avg_ee_raw),
        fmt_f64(stats.success_prob),
        fmt_f64(stats.jain_step),
        fmt_f64(stats.jain_pooled),
        fmt_f64(stats.avg_power_w),
    )
}

/// Per-state oracle table: state, best action index, reward.
pub fn oracle_table_csv(rows: &[(usize, usize, f64)]) -> String {
    let mut out = String::from("state,action,reward\n");
    for &(s, a, r) in rows {
        writeln!(out, "{s},{a},{}", fmt_f64(r)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_f64(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_f64(2.319512196), "2.31951220e0");
        assert_eq!(fmt_f64(0.0), "0.00000000e0");
    }

    #[test]
    fn episode_log_layout() {
        let rec = StepRecord {
            episode: 1,
            step: 2,
            state: 3,
            action: Some(4),
            success: true,
            reward: 1.5,
            ee: 1.5,
            total_power: 0.25,
            min_sinr: 12.0,
            backhaul: vec![0.5, 1.0],
        };
        let csv = episode_log_csv(&[rec], 2);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "episode,step,state,action,success,reward,ee_raw,total_power_w,min_sinr,backhaul_0,backhaul_1"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("1,2,3,4,1,"));
        assert_eq!(row.split(',').count(), 11);
    }

    #[test]
    fn summary_row_is_stable() {
        let stats = SummaryStats {
            scheme: "equal".into(),
            steps: 2,
            episodes: 1,
            avg_reward: 1.0,
            avg_ee_raw: 1.0,
            success_prob: 1.0,
            jain_step: 1.0,
            jain_pooled: 1.0,
            avg_power_w: 2.0,
        };
        let a = summary_row("none", 1, 0, &stats, &[]);
        let b = summary_row("none", 1, 0, &stats, &[]);
        assert_eq!(a, b);
        assert_eq!(a.split(',').count(), SUMMARY_HEADER.split(',').count());
    }
}
