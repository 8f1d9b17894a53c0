//! Per-TTI wireless channel generation.
//!
//! Each VU-AP pair gets a block of `N_j` complex coefficients composed of
//! distance-based path loss, log-normal shadowing (redrawn independently per
//! TTI), and i.i.d. circularly symmetric complex Gaussian fast fading. The
//! channel is quasi-static within a TTI: one realization per step, shared by
//! every candidate-action evaluation of that step.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::scenario::{Topology, VehicleState};
use crate::scenario::vu_positions;

/// Large-scale fading constants. The defaults are macro-style V2I values
/// (dB-domain log-distance path loss with log-normal shadowing) and are
/// config-overridable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    /// Path-loss intercept at 1 km, dB.
    pub pathloss_intercept_db: f64,
    /// Path-loss slope, dB per decade of distance.
    pub pathloss_exp_coeff: f64,
    /// Log-normal shadowing standard deviation, dB.
    pub shadowing_std_db: f64,
    /// Distances below this are clamped, meters.
    pub min_distance: f64,
    /// Draw i.i.d. CN(0, 1) antenna coefficients; when false every antenna
    /// coefficient is the deterministic unit 1 + 0i, which keeps the block
    /// energy at its mean and makes the channel a pure function of position.
    pub fast_fading: bool,
}

impl Default for FadingParams {
    fn default() -> Self {
        FadingParams {
            pathloss_intercept_db: 128.1,
            pathloss_exp_coeff: 37.6,
            shadowing_std_db: 8.0,
            min_distance: 1.0,
            fast_fading: true,
        }
    }
}

/// One channel realization: a coefficient block per (VU, AP) pair plus
/// cached per-block norms and the dB-domain terms that produced it.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    vu_count: usize,
    ap_count: usize,
    antennas: usize,
    /// Row-major (vu, ap) blocks, each of length `antennas`.
    blocks: Vec<Vec<Complex64>>,
    norms: Vec<f64>,
    pathloss_db: Vec<f64>,
    shadow_db: Vec<f64>,
}

impl ChannelRealization {
    /// Builds a realization from explicit coefficient blocks (row-major by
    /// (vu, ap)). Used by deterministic test hooks and synthetic fixtures.
    pub fn from_blocks(vu_count: usize, ap_count: usize, blocks: Vec<Vec<Complex64>>) -> Self {
        assert_eq!(blocks.len(), vu_count * ap_count);
        let antennas = blocks.first().map_or(0, |b| b.len());
        assert!(blocks.iter().all(|b| b.len() == antennas));
        let norms = blocks
            .iter()
            .map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect();
        ChannelRealization {
            vu_count,
            ap_count,
            antennas,
            blocks,
            norms,
            pathloss_db: vec![0.0; vu_count * ap_count],
            shadow_db: vec![0.0; vu_count * ap_count],
        }
    }

    pub fn vu_count(&self) -> usize {
        self.vu_count
    }

    pub fn ap_count(&self) -> usize {
        self.ap_count
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    fn idx(&self, vu: usize, ap: usize) -> usize {
        vu * self.ap_count + ap
    }

    /// Coefficient block h_{vu,ap}.
    pub fn block(&self, vu: usize, ap: usize) -> &[Complex64] {
        &self.blocks[self.idx(vu, ap)]
    }

    /// Cached Euclidean norm of a block.
    pub fn norm(&self, vu: usize, ap: usize) -> f64 {
        self.norms[self.idx(vu, ap)]
    }

    pub fn pathloss_db(&self, vu: usize, ap: usize) -> f64 {
        self.pathloss_db[self.idx(vu, ap)]
    }

    pub fn shadow_db(&self, vu: usize, ap: usize) -> f64 {
        self.shadow_db[self.idx(vu, ap)]
    }
}

/// Log-distance path loss in dB, with the distance clamped from below.
pub fn path_loss_db(distance: f64, params: &FadingParams) -> f64 {
    let d_km = distance.max(params.min_distance) / 1000.0;
    params.pathloss_intercept_db + params.pathloss_exp_coeff * d_km.log10()
}

/// One log-normal shadowing draw in dB (zero mean).
pub fn draw_shadowing_db<R: Rng + ?Sized>(rng: &mut R, params: &FadingParams) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * params.shadowing_std_db
}

/// `n` i.i.d. CN(0, 1) samples (real/imag each with variance 1/2).
pub fn draw_fast_fading<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
        })
        .collect()
}

/// Linear amplitude for a combined dB loss: 10^(-loss/20).
pub fn amplitude_from_loss_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 20.0)
}

/// Scales a fast-fading vector by a large-scale amplitude.
pub fn compose_block(amplitude: f64, fading: &[Complex64]) -> Vec<Complex64> {
    fading.iter().map(|z| z * amplitude).collect()
}

/// Draws the full channel for one TTI: every (VU, AP) block with fresh
/// shadowing and fast fading.
pub fn realize_channel<R: Rng + ?Sized>(
    state: &VehicleState,
    topo: &Topology,
    params: &FadingParams,
    antennas: usize,
    rng: &mut R,
) -> ChannelRealization {
    let positions = vu_positions(state, topo);
    let vu_count = positions.len();
    let ap_count = topo.ap_positions.len();
    let pairs = vu_count * ap_count;

    let mut blocks = Vec::with_capacity(pairs);
    let mut norms = Vec::with_capacity(pairs);
    let mut pathloss = Vec::with_capacity(pairs);
    let mut shadow = Vec::with_capacity(pairs);

    for &(ux, uy) in &positions {
        for &(ax, ay) in &topo.ap_positions {
            let d = ((ux - ax).powi(2) + (uy - ay).powi(2)).sqrt();
            let pl = path_loss_db(d, params);
            let sh = draw_shadowing_db(rng, params);
            let amp = amplitude_from_loss_db(pl + sh);
            let fading = if params.fast_fading {
                draw_fast_fading(rng, antennas)
            } else {
                vec![Complex64::new(1.0, 0.0); antennas]
            };
            let block = compose_block(amp, &fading);
            let norm = block.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            blocks.push(block);
            norms.push(norm);
            pathloss.push(pl);
            shadow.push(sh);
        }
    }

    ChannelRealization {
        vu_count,
        ap_count,
        antennas,
        blocks,
        norms,
        pathloss_db: pathloss,
        shadow_db: shadow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, Tag};
    use crate::scenario::{build_topology, ScenarioConfig, VehicleState};

    #[test]
    fn path_loss_reference_points() {
        let p = FadingParams::default();
        assert!((path_loss_db(1000.0, &p) - 128.1).abs() < 1e-12);
        assert!((path_loss_db(100.0, &p) - 90.5).abs() < 1e-12);
        // Below min_distance the loss is clamped.
        assert_eq!(path_loss_db(0.0, &p), path_loss_db(1.0, &p));
    }

    #[test]
    fn shadowing_zero_std_is_zero() {
        let p = FadingParams { shadowing_std_db: 0.0, ..Default::default() };
        let mut rng = derive_rng(1, &[Tag::S("sh")]);
        for _ in 0..100 {
            assert_eq!(draw_shadowing_db(&mut rng, &p), 0.0);
        }
    }

    #[test]
    fn shadowing_sample_mean_near_zero() {
        let p = FadingParams::default();
        let mut rng = derive_rng(2, &[Tag::S("sh-mean")]);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| draw_shadowing_db(&mut rng, &p)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn shadowing_seeded_reproducibility() {
        let p = FadingParams::default();
        let mut a = derive_rng(3, &[Tag::S("sh")]);
        let mut b = derive_rng(3, &[Tag::S("sh")]);
        assert_eq!(draw_shadowing_db(&mut a, &p), draw_shadowing_db(&mut b, &p));
    }

    #[test]
    fn fast_fading_unit_variance_zero_mean() {
        let mut rng = derive_rng(4, &[Tag::S("ff")]);
        let n = 100_000;
        let draws = draw_fast_fading(&mut rng, n);
        let e_mag: f64 = draws.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        let e_re: f64 = draws.iter().map(|z| z.re).sum::<f64>() / n as f64;
        let e_im: f64 = draws.iter().map(|z| z.im).sum::<f64>() / n as f64;
        assert!((e_mag - 1.0).abs() < 0.02, "E|z|^2 = {e_mag}");
        assert!(e_re.abs() < 0.02 && e_im.abs() < 0.02);
    }

    #[test]
    fn composed_block_norm_matches_closed_form() {
        // All-ones fading and zero shadowing: norm = sqrt(N) * 10^(-PL/20).
        let p = FadingParams { shadowing_std_db: 0.0, ..Default::default() };
        let n = 8;
        let pl = path_loss_db(100.0, &p);
        let amp = amplitude_from_loss_db(pl);
        let ones = vec![Complex64::new(1.0, 0.0); n];
        let block = compose_block(amp, &ones);
        let norm = block.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((norm - (n as f64).sqrt() * amp).abs() < 1e-15);
    }

    #[test]
    fn doubling_distance_drops_energy_by_pathloss_slope() {
        let p = FadingParams::default();
        let delta = path_loss_db(200.0, &p) - path_loss_db(100.0, &p);
        assert!((delta - 37.6 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn block_energy_matches_expectation() {
        // E||h||^2 = N * 10^(-PL/10) * E[10^(-s/10)] with lognormal shadowing.
        let cfg = ScenarioConfig::full_scale();
        let topo = build_topology(&cfg).unwrap();
        let params = FadingParams::default();
        let state = VehicleState { x_shared: 250.0, lane_of_vu: vec![0, 1, 2], step: 0, terminal: false };
        let mut rng = derive_rng(5, &[Tag::S("energy")]);

        let reps = 200_000;
        let mut acc = 0.0;
        for _ in 0..reps {
            let chan = realize_channel(&state, &topo, &params, 2, &mut rng);
            acc += chan.norm(0, 0).powi(2);
        }
        let empirical = acc / reps as f64;

        let d = ((250.0f64 - 100.0).powi(2) + (2.0f64 - (-5.0)).powi(2)).sqrt();
        let pl = path_loss_db(d, &params);
        let a = params.shadowing_std_db * std::f64::consts::LN_10 / 10.0;
        let shadow_mean = (a * a / 2.0).exp();
        let expected = 2.0 * 10f64.powf(-pl / 10.0) * shadow_mean;
        assert!(
            (empirical / expected - 1.0).abs() < 0.05,
            "empirical {empirical:.3e} vs expected {expected:.3e}"
        );
    }

    #[test]
    fn blocks_for_different_pairs_are_uncorrelated() {
        let cfg = ScenarioConfig::full_scale();
        let topo = build_topology(&cfg).unwrap();
        let params = FadingParams { shadowing_std_db: 0.0, ..Default::default() };
        let state = VehicleState { x_shared: 250.0, lane_of_vu: vec![0, 1, 2], step: 0, terminal: false };
        let mut rng = derive_rng(6, &[Tag::S("corr")]);

        let reps = 20_000;
        let mut cross = Complex64::new(0.0, 0.0);
        let mut p0 = 0.0;
        let mut p1 = 0.0;
        for _ in 0..reps {
            let chan = realize_channel(&state, &topo, &params, 1, &mut rng);
            let z0 = chan.block(0, 1)[0];
            let z1 = chan.block(1, 1)[0];
            cross += z0 * z1.conj();
            p0 += z0.norm_sqr();
            p1 += z1.norm_sqr();
        }
        let rho = cross.norm() / (p0.sqrt() * p1.sqrt());
        assert!(rho < 0.05, "cross-correlation {rho}");
    }

    #[test]
    fn realization_is_seed_deterministic() {
        let cfg = ScenarioConfig::full_scale();
        let topo = build_topology(&cfg).unwrap();
        let params = FadingParams::default();
        let state = VehicleState { x_shared: 100.0, lane_of_vu: vec![0, 1, 2], step: 0, terminal: false };
        let mut a = derive_rng(7, &[Tag::S("chan")]);
        let mut b = derive_rng(7, &[Tag::S("chan")]);
        let ca = realize_channel(&state, &topo, &params, 8, &mut a);
        let cb = realize_channel(&state, &topo, &params, 8, &mut b);
        assert_eq!(ca.block(2, 1), cb.block(2, 1));
        assert_eq!(ca.norm(0, 0), cb.norm(0, 0));
    }
}
