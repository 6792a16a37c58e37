//! SINR-hierarchical arms: arm `j` admits the `j` applicants with the highest
//! long-term SINR.

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::traffic::UeProfile;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arm {
    pub index: usize,
    /// Admit flag per applicant, in the caller's applicant order.
    pub decision: Vec<bool>,
}

impl Arm {
    /// Number of admitted applicants, equal to the arm index.
    pub fn admitted(&self) -> usize {
        self.decision.iter().filter(|&&z| z).count()
    }
}

/// Applicant positions sorted by descending SINR, ties toward the lowest id.
pub fn sinr_order(applicants: &[UeProfile]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..applicants.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&applicants[a], &applicants[b]);
        pb.avg_sinr_db.total_cmp(&pa.avg_sinr_db).then(pa.id.cmp(&pb.id))
    });
    order
}

pub fn build_arms(applicants: &[UeProfile], max_applicants: usize) -> Result<Vec<Arm>, AgentError> {
    if applicants.is_empty() || applicants.len() > max_applicants {
        return Err(AgentError::ApplicantCount { count: applicants.len(), max: max_applicants });
    }
    let order = sinr_order(applicants);
    Ok((0..=applicants.len())
        .map(|j| {
            let mut decision = vec![false; applicants.len()];
            for &k in &order[..j] {
                decision[k] = true;
            }
            Arm { index: j, decision }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ue(id: u32, sinr: f64) -> UeProfile {
        UeProfile::new(id, 1.0, 8.0, 0.5, 3, 0.99, sinr).unwrap()
    }

    #[test]
    fn single_applicant() {
        let arms = build_arms(&[ue(0, 3.0)], 3).unwrap();
        assert_eq!(arms.iter().map(|a| a.decision.clone()).collect::<Vec<_>>(), vec![vec![false], vec![true]]);
    }

    #[test]
    fn too_many_applicants() {
        let ues: Vec<_> = (0..4).map(|i| ue(i, 0.0)).collect();
        assert!(build_arms(&ues, 3).is_err());
        assert!(build_arms(&[], 3).is_err());
    }

    #[test]
    fn ties_resolve_by_id() {
        let ues = [ue(7, 5.0), ue(2, 5.0), ue(4, 5.0)];
        let arms = build_arms(&ues, 3).unwrap();
        assert_eq!(arms[1].decision, vec![false, true, false]);
        assert_eq!(arms[2].decision, vec![false, true, true]);
    }

    proptest! {
        #[test]
        fn arms_are_nested_and_hierarchical(
            sinrs in proptest::collection::vec(prop_oneof![Just(0.0), -10.0f64..30.0], 1..=3),
        ) {
            let ues: Vec<_> = sinrs.iter().enumerate().map(|(i, &s)| ue(i as u32, s)).collect();
            let arms = build_arms(&ues, 3).unwrap();
            prop_assert_eq!(arms.len(), ues.len() + 1);
            for (j, arm) in arms.iter().enumerate() {
                prop_assert_eq!(arm.admitted(), j);
                if j > 0 {
                    for (prev, cur) in arms[j - 1].decision.iter().zip(&arm.decision) {
                        prop_assert!(!prev || *cur);
                    }
                }
                for (u, &zu) in arm.decision.iter().enumerate() {
                    for (v, &zv) in arm.decision.iter().enumerate() {
                        if zu && ues[v].avg_sinr_db > ues[u].avg_sinr_db {
                            prop_assert!(zv);
                        }
                    }
                }
            }
        }
    }
}
