//! Participant tables with known built-in effects, for checking the effect
//! estimators end to end.
//!
//! Participants come in blocks of four: a treated and a control conversation
//! with the same dose and the same baseline outcome. Control members and the
//! treated pair all start from that baseline, so the difference between an
//! arm's mean and the control mean is exactly the injected effect averaged
//! over the subgroup. Attitude change is independent noise per participant.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use parley_core::conversation::{ArmKind, EndReason};
use parley_core::rng::substream;
use parley_core::tables::{ParticipantRow, Role};

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// Blocks of four participants.
    pub blocks: usize,
    /// Relative frequency of doses 0..=4.
    pub dose_weights: [f64; 5],
    pub base_mean: f64,
    pub base_sd: f64,
    /// Added to GPTPartner outcomes in conversations below dose 4.
    pub partner_effect: f64,
    /// Added to GPTPartner outcomes in conversations that reached dose 4.
    pub partner_effect_full: f64,
    pub self_effect: f64,
    pub attitude_sd: f64,
    /// Attitude shift common to every participant.
    pub attitude_shift: f64,
    /// Extra attitude shift for GPTSelf only.
    pub self_attitude_shift: f64,
}

impl Default for Design {
    fn default() -> Self {
        Self {
            blocks: 375,
            dose_weights: [0.10, 0.25, 0.25, 0.25, 0.15],
            base_mean: 60.0,
            base_sd: 20.0,
            partner_effect: 0.0,
            partner_effect_full: 0.0,
            self_effect: 0.0,
            attitude_sd: 10.0,
            attitude_shift: 0.0,
            self_attitude_shift: 0.0,
        }
    }
}

fn dose(rng: &mut impl Rng, weights: &[f64; 5]) -> u8 {
    let total: f64 = weights.iter().sum();
    let mut pick = rng.random_range(0.0..total);
    for (d, w) in weights.iter().enumerate() {
        if pick < *w {
            return d as u8;
        }
        pick -= w;
    }
    4
}

pub fn population(design: &Design, seed: u64) -> Vec<ParticipantRow> {
    let mut rng = substream(seed, "synthetic");
    let base = Normal::new(design.base_mean, design.base_sd).expect("finite sd");
    let noise = Normal::new(0.0, design.attitude_sd).expect("finite sd");
    let pre = Normal::new(50.0, 15.0).expect("finite sd");
    let mut rows = Vec::with_capacity(design.blocks * 4);
    for b in 0..design.blocks {
        let d = dose(&mut rng, &design.dose_weights);
        let quality = base.sample(&mut rng);
        let reciprocity = base.sample(&mut rng);
        let partner_shift = if d >= 4 {
            design.partner_effect_full
        } else {
            design.partner_effect
        };
        let members = [
            (ArmKind::Treated, true, design.self_effect),
            (ArmKind::Treated, false, partner_shift),
            (ArmKind::Control, true, 0.0),
            (ArmKind::Control, false, 0.0),
        ];
        for (i, (arm, designated, effect)) in members.into_iter().enumerate() {
            let role = Role::of(arm, designated);
            let attitude_pre: f64 = pre.sample(&mut rng);
            let mut change = design.attitude_shift + noise.sample(&mut rng);
            if role == Role::GPTSelf {
                change += design.self_attitude_shift;
            }
            rows.push(ParticipantRow {
                participant_id: format!("s{b:05}-{i}"),
                conversation_id: format!("s{b:05}-{}", if arm == ArmKind::Treated { "t" } else { "c" }),
                role,
                arm,
                designated,
                stance: None,
                dose: d,
                end_reason: Some(if d == 4 { EndReason::Complete } else { EndReason::Departure }),
                messages_sent: 0,
                suggestions_accepted: 0,
                conv_quality: Some(quality + effect),
                dem_reciprocity: Some(reciprocity + effect),
                policy_attitude_pre: Some(attitude_pre),
                policy_attitude_post: Some(attitude_pre + change),
                attitude_change: Some(change),
            });
        }
    }
    rows
}
