//! Admission events: random UE placement, traffic draws, the applicant and
//! active split, and SINR estimation from CSI.

use rand::seq::SliceRandom;
use rand::Rng;

use super::config::Config;
use super::HarnessError;
use crate::phy::{ChannelState, CsiFeedback};
use crate::seed::{derive_seed, stream, tag};
use crate::traffic::UeProfile;
use crate::UeId;

#[derive(Debug, Clone)]
pub struct AdmissionEvent {
    pub id: u64,
    /// Root of every random stream belonging to this event.
    pub seed: u64,
    /// Applicants sorted by id.
    pub applicants: Vec<UeProfile>,
    /// Already active UEs sorted by id.
    pub actives: Vec<UeProfile>,
    pub distances_m: Vec<f64>,
    /// Channel of all deployed UEs (indexed by id) when the decision is made.
    pub channel: ChannelState,
}

impl AdmissionEvent {
    pub fn num_applicants(&self) -> usize {
        self.applicants.len()
    }

    /// Active UEs plus the applicants admitted by `decision`, sorted by id.
    pub fn served(&self, decision: &[bool]) -> Vec<&UeProfile> {
        let mut served: Vec<&UeProfile> = self.actives.iter().collect();
        served.extend(self.applicants.iter().zip(decision).filter(|(_, &z)| z).map(|(u, _)| u));
        served.sort_by_key(|u| u.id);
        served
    }
}

/// Seed of event `index` in a phase (training or evaluation).
pub fn event_seed(master: u64, phase: u64, index: u64) -> u64 {
    derive_seed(master, &[phase, index])
}

/// Uniform position in the annulus between the minimum distance and the cell
/// radius.
fn draw_distance<R: Rng + ?Sized>(min: f64, max: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    (min * min + u * (max * max - min * min)).sqrt()
}

pub fn generate_scenario(config: &Config, id: u64, seed: u64) -> Result<AdmissionEvent, HarnessError> {
    let t = &config.traffic;
    let cell = &config.cell;
    let mut rng = stream(seed, &[tag::SCENARIO]);
    let k_prime = rng.random_range(t.min_applicants..=t.max_applicants);
    let k_active = rng.random_range(t.min_active..=t.num_ues - k_prime);
    let mut ids: Vec<UeId> = (0..t.num_ues as UeId).collect();
    ids.shuffle(&mut rng);

    let distances_m: Vec<f64> =
        (0..t.num_ues).map(|_| draw_distance(cell.min_distance_m, cell.cell_radius_m, &mut rng)).collect();
    let traffic: Vec<(f64, f64, u32)> = (0..t.num_ues)
        .map(|_| {
            let size = t.packet_sizes[rng.random_range(0..t.packet_sizes.len())];
            let gap = t.inter_arrival_ttis[rng.random_range(0..t.inter_arrival_ttis.len())];
            let bound = t.delay_bounds[rng.random_range(0..t.delay_bounds.len())];
            (size, 1.0 / gap, bound)
        })
        .collect();

    let mut channel = ChannelState::draw(cell, &distances_m, &mut rng);
    let sinr = measure_sinr(config, &mut channel, seed);

    let profile = |id: UeId| {
        let (size, rate, bound) = traffic[id as usize];
        UeProfile::new(id, size, t.bits_per_unit, rate, bound, t.reliability_target, sinr[id as usize])
    };
    let mut applicants = ids[..k_prime].iter().map(|&i| profile(i)).collect::<Result<Vec<_>, _>>()?;
    let mut actives = ids[k_prime..k_prime + k_active].iter().map(|&i| profile(i)).collect::<Result<Vec<_>, _>>()?;
    applicants.sort_by_key(|u| u.id);
    actives.sort_by_key(|u| u.id);
    Ok(AdmissionEvent { id, seed, applicants, actives, distances_m, channel })
}

/// Exponential average of the quantized wideband CSI reports over the
/// measurement window. Advances `channel` to the end of the window.
pub fn measure_sinr(config: &Config, channel: &mut ChannelState, seed: u64) -> Vec<f64> {
    let cell = &config.cell;
    let alpha = cell.sinr_average_coefficient;
    let mut rngs: Vec<_> = (0..channel.num_ues()).map(|u| stream(seed, &[tag::MEASURE, u as u64])).collect();
    let mut feedback = CsiFeedback::new(cell);
    let mut average: Vec<Option<f64>> = vec![None; channel.num_ues()];
    for tti in 0..config.run.measurement_ttis {
        if tti > 0 {
            for (u, rng) in rngs.iter_mut().enumerate() {
                channel.step_ue(u, rng);
            }
        }
        feedback.observe(tti, channel);
        if let Some(reports) = feedback.reports(cell, tti) {
            for r in reports {
                let avg = &mut average[r.ue];
                *avg = Some(match *avg {
                    None => r.wideband_sinr_db,
                    Some(a) => (1.0 - alpha) * a + alpha * r.wideband_sinr_db,
                });
            }
        }
    }
    average.into_iter().map(|a| a.expect("a report is issued at TTI 0")).collect()
}
