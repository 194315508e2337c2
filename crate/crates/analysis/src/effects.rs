//! Placebo-controlled effects by dose subgroup.
//!
//! Subgroup `s+` holds every participant whose conversation reached dose `s`
//! or more; control conversations count phantom interventions, so both arms
//! are cut at the same point of the conversation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use parley_core::tables::{ParticipantRow, Role};

use crate::stats::{mean, stars, variance, welch_t_test, StatsError, Z90, Z95};

pub const MAX_DOSE: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ConvQuality,
    DemReciprocity,
    AttitudeChange,
}

impl Outcome {
    pub fn value(self, row: &ParticipantRow) -> Option<f64> {
        match self {
            Outcome::ConvQuality => row.conv_quality,
            Outcome::DemReciprocity => row.dem_reciprocity,
            Outcome::AttitudeChange => row.attitude_change,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::ConvQuality => "conv_quality",
            Outcome::DemReciprocity => "dem_reciprocity",
            Outcome::AttitudeChange => "attitude_change",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    GPTSelf,
    GPTPartner,
    Control,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::GPTSelf, Arm::GPTPartner, Arm::Control];

    pub fn of(role: Role) -> Self {
        match role {
            Role::GPTSelf => Arm::GPTSelf,
            Role::GPTPartner => Arm::GPTPartner,
            Role::ControlMember => Arm::Control,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EffectsError {
    #[error("{outcome:?} {subgroup}+ {arm:?}: only {n} observations")]
    ThinCell {
        outcome: Outcome,
        subgroup: u8,
        arm: Arm,
        n: usize,
    },
    #[error("participant {participant}: dose {dose} is outside 0..=4")]
    DoseOutOfRange { participant: String, dose: u8 },
    #[error("{outcome:?} {subgroup}+ {arm:?}: {source}")]
    Test {
        outcome: Outcome,
        subgroup: u8,
        arm: Arm,
        source: StatsError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub outcome: Outcome,
    /// "0+" .. "4+"
    pub subgroup: String,
    pub min_dose: u8,
    pub arm: Arm,
    pub n: usize,
    pub mean: f64,
    /// Unadjusted: sd / sqrt(n).
    pub se: f64,
    pub ci90: [f64; 2],
    pub ci95: [f64; 2],
    /// Treated arms only: mean minus the control mean in the same subgroup.
    pub diff_vs_control: Option<f64>,
    pub p_vs_control: Option<f64>,
    pub stars: String,
}

fn cell(rows: &[ParticipantRow], outcome: Outcome, min_dose: u8, arm: Arm) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.dose >= min_dose && Arm::of(r.role) == arm)
        .filter_map(|r| outcome.value(r))
        .filter(|v| v.is_finite())
        .collect()
}

/// One row per outcome x subgroup x arm, in that nesting order.
pub fn subgroup_effects(
    rows: &[ParticipantRow],
    outcomes: &[Outcome],
) -> Result<Vec<EffectRow>, EffectsError> {
    if let Some(r) = rows.iter().find(|r| r.dose > MAX_DOSE) {
        return Err(EffectsError::DoseOutOfRange {
            participant: r.participant_id.clone(),
            dose: r.dose,
        });
    }
    let mut out = Vec::new();
    for &outcome in outcomes {
        for min_dose in 0..=MAX_DOSE {
            let control = cell(rows, outcome, min_dose, Arm::Control);
            for arm in Arm::ALL {
                let values = if arm == Arm::Control {
                    control.clone()
                } else {
                    cell(rows, outcome, min_dose, arm)
                };
                let n = values.len();
                if n < 2 {
                    return Err(EffectsError::ThinCell {
                        outcome,
                        subgroup: min_dose,
                        arm,
                        n,
                    });
                }
                let m = mean(&values);
                let se = (variance(&values) / n as f64).sqrt();
                let (diff, p) = if arm == Arm::Control {
                    (None, None)
                } else {
                    if control.len() < 2 {
                        return Err(EffectsError::ThinCell {
                            outcome,
                            subgroup: min_dose,
                            arm: Arm::Control,
                            n: control.len(),
                        });
                    }
                    let w = welch_t_test(&values, &control).map_err(|source| EffectsError::Test {
                        outcome,
                        subgroup: min_dose,
                        arm,
                        source,
                    })?;
                    (Some(w.diff), Some(w.p))
                };
                out.push(EffectRow {
                    outcome,
                    subgroup: format!("{min_dose}+"),
                    min_dose,
                    arm,
                    n,
                    mean: m,
                    se,
                    ci90: [m - Z90 * se, m + Z90 * se],
                    ci95: [m - Z95 * se, m + Z95 * se],
                    diff_vs_control: diff,
                    p_vs_control: p,
                    stars: p.map_or("", stars).to_owned(),
                });
            }
        }
    }
    Ok(out)
}

/// The same table for the pre/post attitude change.
pub fn attitude_effect(rows: &[ParticipantRow]) -> Result<Vec<EffectRow>, EffectsError> {
    subgroup_effects(rows, &[Outcome::AttitudeChange])
}

pub fn find(table: &[EffectRow], outcome: Outcome, min_dose: u8, arm: Arm) -> Option<&EffectRow> {
    table
        .iter()
        .find(|r| r.outcome == outcome && r.min_dose == min_dose && r.arm == arm)
}
