//! Link-level math: association, MRT beamforming gains, SINR, achievable
//! rate, backhaul consumption, energy efficiency, and the gated reward.
//!
//! Beams follow maximum ratio transmission: w = (h/||h||) * sqrt(P), so the
//! desired gain of a user is the real, non-negative sum of its per-AP block
//! norms weighted by the square roots of the allocated powers, while
//! interference flows through the user's full stacked channel, including APs
//! that do not serve it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::scenario::{ScenarioConfig, Topology, VehicleState};
use crate::scenario::vu_positions;
use crate::{Error, Result};

/// VU-AP association indicators, row-major (vu, ap).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    vu_count: usize,
    ap_count: usize,
    bits: Vec<bool>,
}

impl Association {
    pub fn new(vu_count: usize, ap_count: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), vu_count * ap_count);
        Association { vu_count, ap_count, bits }
    }

    /// All links on.
    pub fn all_on(vu_count: usize, ap_count: usize) -> Self {
        Association::new(vu_count, ap_count, vec![true; vu_count * ap_count])
    }

    pub fn vu_count(&self) -> usize {
        self.vu_count
    }

    pub fn ap_count(&self) -> usize {
        self.ap_count
    }

    pub fn is_associated(&self, vu: usize, ap: usize) -> bool {
        self.bits[vu * self.ap_count + ap]
    }

    /// APs serving a VU (the virtual cell A_i).
    pub fn aps_of(&self, vu: usize) -> Vec<usize> {
        (0..self.ap_count).filter(|&j| self.is_associated(vu, j)).collect()
    }

    /// VUs served by an AP (U_j).
    pub fn vus_of(&self, ap: usize) -> Vec<usize> {
        (0..self.vu_count).filter(|&i| self.is_associated(i, ap)).collect()
    }
}

/// Per-link transmit powers in watts, row-major (vu, ap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    vu_count: usize,
    ap_count: usize,
    watts: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(vu_count: usize, ap_count: usize, watts: Vec<f64>) -> Self {
        assert_eq!(watts.len(), vu_count * ap_count);
        debug_assert!(watts.iter().all(|&p| p >= 0.0));
        PowerAllocation { vu_count, ap_count, watts }
    }

    pub fn vu_count(&self) -> usize {
        self.vu_count
    }

    pub fn ap_count(&self) -> usize {
        self.ap_count
    }

    pub fn power(&self, vu: usize, ap: usize) -> f64 {
        self.watts[vu * self.ap_count + ap]
    }

    /// Total power spent by one AP.
    pub fn ap_total(&self, ap: usize) -> f64 {
        (0..self.vu_count).map(|i| self.power(i, ap)).sum()
    }

    /// Total network power.
    pub fn total(&self) -> f64 {
        self.watts.iter().sum()
    }

    /// Checks the per-AP power cap, with a small relative tolerance for
    /// grid-exact sums.
    pub fn check_feasible(&self, p_max: f64) -> Result<()> {
        for j in 0..self.ap_count {
            let total = self.ap_total(j);
            if total > p_max * (1.0 + 1e-12) {
                return Err(Error::Constraint(format!(
                    "AP {j} power {total} exceeds p_max {p_max}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-user link results plus the network totals for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Linear SINR per VU.
    pub sinr: Vec<f64>,
    /// Achievable rate per VU, bits/s/Hz.
    pub rate: Vec<f64>,
    /// Number of APs transmitting to the VU with nonzero power (l0 term).
    pub serving_count: Vec<usize>,
    /// Backhaul consumption per VU, bits/s/Hz.
    pub backhaul: Vec<f64>,
    /// Total transmit power, watts.
    pub total_power: f64,
    /// Network energy efficiency, bits/Hz/J.
    pub ee: f64,
}

/// Coverage-region association: a VU is served by every AP within
/// `coverage_radius`. Errors if some VU has no serving AP.
pub fn coverage_association(
    state: &VehicleState,
    topo: &Topology,
    cfg: &ScenarioConfig,
) -> Result<Association> {
    let positions = vu_positions(state, topo);
    let a = topo.ap_positions.len();
    let mut bits = Vec::with_capacity(positions.len() * a);
    for &(ux, uy) in &positions {
        let mut any = false;
        for &(ax, ay) in &topo.ap_positions {
            let within =
                ((ux - ax).powi(2) + (uy - ay).powi(2)).sqrt() <= cfg.coverage_radius;
            any |= within;
            bits.push(within);
        }
        if !any {
            return Err(Error::Constraint(format!(
                "VU at x={ux:.1} has no AP within {} m",
                cfg.coverage_radius
            )));
        }
    }
    Ok(Association::new(positions.len(), a, bits))
}

/// MRT effective gains g[i][i'] = sum_j h_{i,j}^H w_{i',j}: the complex
/// scalar through which user i hears the beam intended for user i'.
/// Row-major U x U.
pub fn effective_gains(
    chan: &ChannelRealization,
    alloc: &PowerAllocation,
) -> Result<Vec<Complex64>> {
    let u = chan.vu_count();
    let a = chan.ap_count();
    let mut gains = vec![Complex64::new(0.0, 0.0); u * u];
    for target in 0..u {
        for j in 0..a {
            let p = alloc.power(target, j);
            if p == 0.0 {
                continue;
            }
            let norm = chan.norm(target, j);
            if norm == 0.0 {
                return Err(Error::Degenerate(format!(
                    "zero-norm channel block (vu {target}, ap {j}) with power {p}"
                )));
            }
            let scale = p.sqrt() / norm;
            let beam = chan.block(target, j);
            for listener in 0..u {
                let h = chan.block(listener, j);
                let dot: Complex64 =
                    h.iter().zip(beam).map(|(hi, wi)| hi.conj() * wi).sum();
                gains[listener * u + target] += dot * scale;
            }
        }
    }
    Ok(gains)
}

/// Per-VU linear SINR from the effective gain matrix.
pub fn sinr(gains: &[Complex64], vu_count: usize, noise_power: f64) -> Vec<f64> {
    (0..vu_count)
        .map(|i| {
            let desired = gains[i * vu_count + i].norm_sqr();
            let interference: f64 = (0..vu_count)
                .filter(|&ip| ip != i)
                .map(|ip| gains[i * vu_count + ip].norm_sqr())
                .sum();
            desired / (noise_power + interference)
        })
        .collect()
}

/// Achievable rate (1 - kappa) * log2(1 + sinr), bits/s/Hz.
pub fn achievable_rate(sinr: f64, kappa: f64) -> f64 {
    (1.0 - kappa) * (1.0 + sinr).log2()
}

/// Backhaul consumption: rate times the number of serving APs (l0 count of
/// nonzero beam powers).
pub fn backhaul_consumption(serving_count: usize, rate: f64) -> f64 {
    serving_count as f64 * rate
}

/// Network energy efficiency, defined as 0 at zero total power.
pub fn energy_efficiency(total_backhaul: f64, total_power: f64) -> f64 {
    if total_power > 0.0 {
        total_backhaul / total_power
    } else {
        0.0
    }
}

/// Full link budget for one channel realization and power allocation.
pub fn link_budget(
    chan: &ChannelRealization,
    alloc: &PowerAllocation,
    kappa: f64,
    noise_power: f64,
) -> Result<LinkBudget> {
    let u = chan.vu_count();
    let gains = effective_gains(chan, alloc)?;
    let sinrs = sinr(&gains, u, noise_power);
    let rates: Vec<f64> = sinrs.iter().map(|&g| achievable_rate(g, kappa)).collect();
    let serving: Vec<usize> = (0..u)
        .map(|i| (0..chan.ap_count()).filter(|&j| alloc.power(i, j) > 0.0).count())
        .collect();
    let backhaul: Vec<f64> = serving
        .iter()
        .zip(&rates)
        .map(|(&c, &r)| backhaul_consumption(c, r))
        .collect();
    let total_power = alloc.total();
    let ee = energy_efficiency(backhaul.iter().sum(), total_power);
    Ok(LinkBudget { sinr: sinrs, rate: rates, serving_count: serving, backhaul, total_power, ee })
}

/// Gated reward: the energy efficiency if every VU clears the minimum SINR,
/// zero otherwise.
pub fn reward(budget: &LinkBudget, sinr_min_linear: f64) -> f64 {
    if budget.sinr.iter().all(|&g| g >= sinr_min_linear) {
        budget.ee
    } else {
        0.0
    }
}
