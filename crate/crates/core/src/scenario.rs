//! Freeway topology, vehicle drop and mobility, and the tabular state index.
//!
//! The road is a straight multi-lane one-way segment (the region of
//! interest). Access points sit at the roadside with uniform spacing,
//! centered in the ROI. Vehicle users share a common longitudinal position,
//! one user per lane, and advance by `speed * tti` every step. The tabular
//! state key is the longitudinal bin index `floor(x / (speed * tti))`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// All tunable parameters of the road, radio, power grid, and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Length of the region of interest in meters.
    pub roi_length: f64,
    /// Number of lanes.
    pub lanes: usize,
    /// Number of vehicle users (U).
    pub vu_count: usize,
    /// Number of access points (A).
    pub ap_count: usize,
    /// Spacing between consecutive APs in meters.
    pub ap_spacing: f64,
    /// Antennas per AP (N_j).
    pub ap_antennas: usize,
    /// Vehicle speed in km/h.
    pub vu_speed_kmh: f64,
    /// Transmission time interval in seconds.
    pub tti: f64,
    /// AP coverage radius in meters.
    pub coverage_radius: f64,
    /// Minimum SINR requirement in dB.
    pub sinr_min_db: f64,
    /// Noise power spectral density in dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// Spectral-efficiency signaling loss, in [0, 1).
    pub kappa: f64,
    /// Maximum transmit power per AP in watts.
    pub p_max: f64,
    /// Number of discrete power levels (K).
    pub power_levels: usize,
    /// Lane width in meters; lane i sits at y = lane_width/2 + i*lane_width.
    pub lane_width: f64,
    /// Roadside y-coordinate of the APs in meters.
    pub ap_y: f64,
    /// Evaluate the channel at the state-bin center instead of the exact
    /// position, making it a function of the tabular state alone.
    pub quantize_positions: bool,
    /// Always put VU i in lane i instead of drawing distinct lanes at
    /// random. Removes the one piece of episode randomness the tabular
    /// state cannot see.
    pub fixed_lanes: bool,
    /// Master seed for every stream derived from this scenario.
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// The shipped defaults: three users, three APs, four power levels.
    pub fn full_scale() -> Self {
        ScenarioConfig {
            roi_length: 500.0,
            lanes: 3,
            vu_count: 3,
            ap_count: 3,
            ap_spacing: 150.0,
            ap_antennas: 8,
            vu_speed_kmh: 140.0,
            tti: 0.1,
            coverage_radius: 250.0,
            sinr_min_db: 10.0,
            noise_psd_dbm_hz: -114.0,
            kappa: 0.1,
            p_max: 1.0,
            power_levels: 4,
            lane_width: 4.0,
            ap_y: -5.0,
            quantize_positions: false,
            fixed_lanes: false,
            rng_seed: 1,
        }
    }

    /// A desk-scale preset used for oracle-equivalence testing and CI.
    pub fn tiny() -> Self {
        ScenarioConfig {
            roi_length: 200.0,
            lanes: 3,
            vu_count: 2,
            ap_count: 2,
            ap_spacing: 100.0,
            coverage_radius: 150.0,
            sinr_min_db: -10.0,
            power_levels: 2,
            quantize_positions: true,
            fixed_lanes: true,
            ..ScenarioConfig::full_scale()
        }
    }

    /// Basic parameter invariants. The coverage check needs the topology and
    /// lives in [`build_topology`].
    pub fn validate(&self) -> Result<()> {
        if !(self.roi_length > 0.0) {
            return Err(Error::Config("roi_length must be > 0".into()));
        }
        if self.vu_count < 1 || self.ap_count < 1 || self.power_levels < 1 {
            return Err(Error::Config("vu_count, ap_count, power_levels must be >= 1".into()));
        }
        if self.lanes < 1 {
            return Err(Error::Config("lanes must be >= 1".into()));
        }
        if !(self.kappa >= 0.0 && self.kappa < 1.0) {
            return Err(Error::Config("kappa must be in [0, 1)".into()));
        }
        if !(self.tti > 0.0) {
            return Err(Error::Config("tti must be > 0".into()));
        }
        if !(self.vu_speed_kmh > 0.0) {
            return Err(Error::Config("vu_speed_kmh must be > 0".into()));
        }
        if !(self.p_max > 0.0) {
            return Err(Error::Config("p_max must be > 0".into()));
        }
        if !(self.coverage_radius > 0.0) {
            return Err(Error::Config("coverage_radius must be > 0".into()));
        }
        if !(self.lane_width > 0.0) {
            return Err(Error::Config("lane_width must be > 0".into()));
        }
        Ok(())
    }

    /// Vehicle speed in m/s.
    pub fn speed_mps(&self) -> f64 {
        self.vu_speed_kmh / 3.6
    }

    /// Longitudinal distance traveled per TTI; also the state-bin width.
    pub fn step_length(&self) -> f64 {
        self.speed_mps() * self.tti
    }

    /// Number of tabular states S = ceil(roi / step_length).
    pub fn state_count(&self) -> usize {
        (self.roi_length / self.step_length()).ceil() as usize
    }

    /// Minimum SINR requirement in linear scale.
    pub fn sinr_min_linear(&self) -> f64 {
        10f64.powf(self.sinr_min_db / 10.0)
    }

    /// Noise power in watts over the 1 Hz normalized bandwidth.
    pub fn noise_power(&self) -> f64 {
        10f64.powf((self.noise_psd_dbm_hz - 30.0) / 10.0)
    }

    /// y-coordinate of a lane center.
    pub fn lane_y(&self, lane: usize) -> f64 {
        self.lane_width / 2.0 + lane as f64 * self.lane_width
    }
}

/// AP placement and lane geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// AP positions (x, y), strictly increasing in x.
    pub ap_positions: Vec<(f64, f64)>,
    /// y-coordinate of each lane center.
    pub lane_y: Vec<f64>,
}

/// Positions of all vehicles at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Common longitudinal position of all VUs in meters.
    pub x_shared: f64,
    /// Lane index of each VU.
    pub lane_of_vu: Vec<usize>,
    /// Steps taken since the drop.
    pub step: u32,
    /// True once the vehicles have left the ROI.
    pub terminal: bool,
}

/// Places the APs with uniform spacing, centered in the ROI, and verifies
/// that every road point is covered by at least one AP (checked on a 1 m
/// grid for every lane).
pub fn build_topology(cfg: &ScenarioConfig) -> Result<Topology> {
    cfg.validate()?;
    let a = cfg.ap_count;
    let x0 = (cfg.roi_length - (a as f64 - 1.0) * cfg.ap_spacing) / 2.0;
    let ap_positions: Vec<(f64, f64)> = (0..a)
        .map(|j| (x0 + j as f64 * cfg.ap_spacing, cfg.ap_y))
        .collect();
    let lane_y: Vec<f64> = (0..cfg.lanes).map(|l| cfg.lane_y(l)).collect();

    let topo = Topology { ap_positions, lane_y };
    check_coverage(cfg, &topo)?;
    Ok(topo)
}

fn check_coverage(cfg: &ScenarioConfig, topo: &Topology) -> Result<()> {
    let steps = cfg.roi_length.ceil() as usize;
    for i in 0..=steps {
        let x = (i as f64).min(cfg.roi_length);
        for &y in &topo.lane_y {
            let covered = topo
                .ap_positions
                .iter()
                .any(|&(ax, ay)| ((x - ax).powi(2) + (y - ay).powi(2)).sqrt() <= cfg.coverage_radius);
            if !covered {
                return Err(Error::Config(format!(
                    "coverage hole at x={x:.1} m, y={y:.1} m: no AP within {} m",
                    cfg.coverage_radius
                )));
            }
        }
    }
    Ok(())
}

/// Drops the vehicles: a uniform shared x in [0, roi) and one VU per
/// distinct lane.
pub fn drop_vehicles<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<VehicleState> {
    if cfg.vu_count > cfg.lanes {
        return Err(Error::Config(format!(
            "vu_count {} exceeds lanes {}: one VU per lane",
            cfg.vu_count, cfg.lanes
        )));
    }
    let x_shared = rng.gen_range(0.0..cfg.roi_length);
    let lane_of_vu = if cfg.fixed_lanes {
        (0..cfg.vu_count).collect()
    } else {
        sample(rng, cfg.lanes, cfg.vu_count).into_vec()
    };
    Ok(VehicleState { x_shared, lane_of_vu, step: 0, terminal: false })
}

/// Advances the vehicles one TTI. Terminal once x leaves the ROI.
pub fn advance(state: &VehicleState, cfg: &ScenarioConfig) -> Result<VehicleState> {
    if state.terminal {
        return Err(Error::Usage("cannot advance a terminal state".into()));
    }
    let x = state.x_shared + cfg.step_length();
    Ok(VehicleState {
        x_shared: x,
        lane_of_vu: state.lane_of_vu.clone(),
        step: state.step + 1,
        terminal: x > cfg.roi_length,
    })
}

/// Tabular state key: the longitudinal bin index, in [0, S).
pub fn state_index(state: &VehicleState, cfg: &ScenarioConfig) -> usize {
    debug_assert!(!state.terminal);
    // The epsilon absorbs the error accumulated by repeated step additions,
    // which would otherwise let x/step land just below a bin boundary.
    let idx = (state.x_shared / cfg.step_length() + 1e-9).floor() as usize;
    idx.min(cfg.state_count() - 1)
}

/// (x, y) position of every VU.
pub fn vu_positions(state: &VehicleState, topo: &Topology) -> Vec<(f64, f64)> {
    state
        .lane_of_vu
        .iter()
        .map(|&l| (state.x_shared, topo.lane_y[l]))
        .collect()
}
