//! Re-derives one full evaluation from raw geometry with no help from the
//! library's radio code, then checks the simulator agrees to 1e-12.
//!
//! With fast fading disabled every antenna coefficient of block (i, j) is
//! the same real amplitude a_ij = 10^(-PL_ij/20), so the MRT quantities
//! collapse to closed forms:
//!   desired gain   g_ii  = sum_j a_ij * sqrt(N * P_ij)
//!   cross gain     g_ii' = sum_j a_ij * sqrt(N * P_i'j)   (same beam shape)
//!   SINR_i         |g_ii|^2 / (noise + sum_{i'!=i} |g_ii'|^2)

use vecell_core::action::Action;
use vecell_core::scenario::VehicleState;
use vecell_core::sim::SimEnv;

#[test]
fn simulator_matches_scratch_recomputation() {
    let env = SimEnv::preset_tiny().unwrap();
    let cfg = env.cfg().clone();
    let n = cfg.ap_antennas as f64;

    // Bin 20 of 52; quantization puts the VUs at the bin center.
    let x = 20.5 * cfg.step_length();
    let state = VehicleState { x_shared: x, lane_of_vu: vec![0, 1], step: 0, terminal: false };

    // VU0 served by AP0 at level 1, VU1 by both APs at level 1 each.
    let action = Action { levels: vec![1, 0, 1, 1] };
    let mut rng = rand::thread_rng();
    let chan = env.realize(&state, &mut rng);
    let (budget, reward) = env.evaluate_action(&state, &chan, &action).unwrap();

    // Scratch recomputation.
    let u = 2;
    let positions: Vec<(f64, f64)> = state
        .lane_of_vu
        .iter()
        .map(|&l| (x, cfg.lane_width / 2.0 + l as f64 * cfg.lane_width))
        .collect();
    let ap_x0 = (cfg.roi_length - (cfg.ap_count as f64 - 1.0) * cfg.ap_spacing) / 2.0;
    let aps: Vec<(f64, f64)> = (0..cfg.ap_count)
        .map(|j| (ap_x0 + j as f64 * cfg.ap_spacing, cfg.ap_y))
        .collect();

    let amp = |i: usize, j: usize| {
        let (ux, uy) = positions[i];
        let (ax, ay) = aps[j];
        let d_km = ((ux - ax).powi(2) + (uy - ay).powi(2)).sqrt().max(1.0) / 1000.0;
        let pl_db = 128.1 + 37.6 * d_km.log10();
        10f64.powf(-pl_db / 20.0)
    };
    let level = |i: usize, j: usize| action.levels[i * cfg.ap_count + j] as f64;
    let power = |i: usize, j: usize| cfg.p_max * level(i, j) / cfg.power_levels as f64;

    // Effective gain of VU i listening to the beam aimed at VU i'.
    let gain = |i: usize, tgt: usize| -> f64 {
        (0..cfg.ap_count)
            .map(|j| {
                let p = power(tgt, j);
                if p > 0.0 {
                    amp(i, j) * (n * p).sqrt()
                } else {
                    0.0
                }
            })
            .sum()
    };

    let noise = 10f64.powf((cfg.noise_psd_dbm_hz - 30.0) / 10.0);
    let mut total_backhaul = 0.0;
    let mut total_power = 0.0;
    let mut all_pass = true;
    for i in 0..u {
        let desired = gain(i, i).powi(2);
        let interference: f64 = (0..u).filter(|&k| k != i).map(|k| gain(i, k).powi(2)).sum();
        let sinr = desired / (noise + interference);
        let rel = (budget.sinr[i] - sinr).abs() / sinr.max(1e-300);
        assert!(rel < 1e-12, "sinr[{i}]: {} vs {sinr}", budget.sinr[i]);

        let rate = (1.0 - cfg.kappa) * (1.0 + sinr).log2();
        let serving = (0..cfg.ap_count).filter(|&j| power(i, j) > 0.0).count() as f64;
        total_backhaul += serving * rate;
        all_pass &= sinr >= 10f64.powf(cfg.sinr_min_db / 10.0);
        for j in 0..cfg.ap_count {
            total_power += power(i, j);
        }
    }
    let ee = total_backhaul / total_power;
    let rel = (budget.ee - ee).abs() / ee;
    assert!(rel < 1e-12, "ee {} vs {ee}", budget.ee);
    let expect_reward = if all_pass { ee } else { 0.0 };
    assert!((reward - expect_reward).abs() <= 1e-12 * ee);
    assert!((budget.total_power - total_power).abs() < 1e-12);
}
