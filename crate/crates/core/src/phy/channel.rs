use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::CellConfig;

/// Draw from CN(0, 1).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Per-UE, per-RB block-fading channel with first-order Gauss-Markov time
/// correlation. Pathloss is fixed for the lifetime of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pathloss_db: Vec<f64>,
    mean_snr_db: Vec<f64>,
    fading: Vec<Vec<Complex64>>,
    doppler_correlation: f64,
}

const MIN_POWER_GAIN: f64 = 1e-12;

impl ChannelState {
    /// Build from explicit fading gains; `fading[ue]` holds one gain per RB.
    pub fn new(cell: &CellConfig, distances_m: &[f64], fading: Vec<Vec<Complex64>>) -> Self {
        assert_eq!(distances_m.len(), fading.len());
        assert!(fading.iter().all(|f| f.len() == cell.num_rbs));
        Self {
            pathloss_db: distances_m.iter().map(|&d| cell.pathloss_db(d)).collect(),
            mean_snr_db: distances_m.iter().map(|&d| cell.mean_snr_db(d)).collect(),
            fading,
            doppler_correlation: cell.doppler_correlation(),
        }
    }

    /// Fresh independent Rayleigh gains for every UE and RB.
    pub fn draw<R: Rng + ?Sized>(cell: &CellConfig, distances_m: &[f64], rng: &mut R) -> Self {
        let fading = distances_m.iter().map(|_| (0..cell.num_rbs).map(|_| complex_gaussian(rng)).collect()).collect();
        Self::new(cell, distances_m, fading)
    }

    pub fn with_doppler_correlation(mut self, rho: f64) -> Self {
        self.doppler_correlation = rho.clamp(0.0, 1.0);
        self
    }

    pub fn num_ues(&self) -> usize {
        self.fading.len()
    }

    pub fn doppler_correlation(&self) -> f64 {
        self.doppler_correlation
    }

    pub fn pathloss_db(&self, ue: usize) -> f64 {
        self.pathloss_db[ue]
    }

    pub fn gain(&self, ue: usize, rb: usize) -> Complex64 {
        self.fading[ue][rb]
    }

    pub fn gains(&self, ue: usize) -> &[Complex64] {
        &self.fading[ue]
    }

    /// Advance one TTI: h <- rho h + sqrt(1 - rho^2) w.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for ue in 0..self.fading.len() {
            self.step_ue(ue, rng);
        }
    }

    /// Advance a single UE's gains, so each UE can own its random stream.
    pub fn step_ue<R: Rng + ?Sized>(&mut self, ue: usize, rng: &mut R) {
        let rho = self.doppler_correlation;
        if rho >= 1.0 {
            return;
        }
        let innovation = (1.0 - rho * rho).sqrt();
        for h in self.fading[ue].iter_mut() {
            *h = *h * rho + complex_gaussian(rng) * innovation;
        }
    }

    /// State restricted to the listed UEs, in that order.
    pub fn subset(&self, ues: &[usize]) -> Self {
        Self {
            pathloss_db: ues.iter().map(|&u| self.pathloss_db[u]).collect(),
            mean_snr_db: ues.iter().map(|&u| self.mean_snr_db[u]).collect(),
            fading: ues.iter().map(|&u| self.fading[u].clone()).collect(),
            doppler_correlation: self.doppler_correlation,
        }
    }

    pub fn sinr_db(&self, ue: usize, rb: usize) -> f64 {
        let power = self.fading[ue][rb].norm_sqr().max(MIN_POWER_GAIN);
        self.mean_snr_db[ue] + 10.0 * power.log10()
    }

    /// Effective SINR over a group of RBs: geometric mean of linear SINRs,
    /// i.e. the arithmetic mean in dB.
    pub fn effective_sinr_db(&self, ue: usize, rbs: std::ops::Range<usize>) -> f64 {
        let n = rbs.len() as f64;
        rbs.map(|rb| self.sinr_db(ue, rb)).sum::<f64>() / n
    }

    pub fn rbg_sinr_db(&self, cell: &CellConfig, ue: usize, rbg: usize) -> f64 {
        let width = cell.rbs_per_rbg();
        self.effective_sinr_db(ue, rbg * width..(rbg + 1) * width)
    }

    pub fn wideband_sinr_db(&self, ue: usize) -> f64 {
        self.effective_sinr_db(ue, 0..self.fading[ue].len())
    }
}
