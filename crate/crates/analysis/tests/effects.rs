use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use parley_analysis::effects::{attitude_effect, find, subgroup_effects, Arm, EffectsError, Outcome};
use parley_analysis::stats::stars;
use parley_analysis::synthetic::{population, Design};
use parley_core::tables::ParticipantRow;

const OUTCOMES: [Outcome; 2] = [Outcome::ConvQuality, Outcome::DemReciprocity];

#[test]
fn constant_partner_effect_is_recovered_in_every_subgroup() {
    let rows = population(
        &Design {
            partner_effect: 4.0,
            partner_effect_full: 4.0,
            ..Design::default()
        },
        5,
    );
    let table = subgroup_effects(&rows, &OUTCOMES).unwrap();
    for outcome in OUTCOMES {
        for s in 0..=4 {
            let r = find(&table, outcome, s, Arm::GPTPartner).unwrap();
            assert!((r.diff_vs_control.unwrap() - 4.0).abs() < 1e-9, "{outcome:?} {s}+");
            let me = find(&table, outcome, s, Arm::GPTSelf).unwrap();
            assert!(me.diff_vs_control.unwrap().abs() < 1e-9);
        }
    }
}

#[test]
fn constant_outcomes_give_null_contrasts() {
    let mut rows = population(&Design::default(), 1);
    for r in &mut rows {
        r.conv_quality = Some(70.0);
        r.dem_reciprocity = Some(55.0);
    }
    for r in subgroup_effects(&rows, &OUTCOMES).unwrap() {
        if r.arm != Arm::Control {
            assert_eq!(r.diff_vs_control, Some(0.0));
            assert_eq!(r.p_vs_control, Some(1.0));
            assert_eq!(r.stars, "");
        }
        assert_eq!(r.se, 0.0);
    }
}

#[test]
fn stars_follow_p_and_intervals_follow_se() {
    let rows = population(
        &Design {
            partner_effect: 4.0,
            partner_effect_full: 6.0,
            self_effect: 1.0,
            ..Design::default()
        },
        9,
    );
    for r in subgroup_effects(&rows, &OUTCOMES).unwrap() {
        assert_eq!(r.stars, r.p_vs_control.map_or("", stars));
        assert!((r.ci90[1] - r.mean - 1.645 * r.se).abs() < 1e-9);
        assert!((r.ci95[0] - r.mean + 1.96 * r.se).abs() < 1e-9);
    }
}

#[test]
fn thin_cells_are_errors() {
    let mut rows = population(&Design { blocks: 20, ..Design::default() }, 2);
    for r in &mut rows {
        r.dose = r.dose.min(3);
    }
    assert!(matches!(
        subgroup_effects(&rows, &OUTCOMES),
        Err(EffectsError::ThinCell { subgroup: 4, n: 0, .. })
    ));
}

#[test]
fn common_attitude_shift_cancels() {
    let rows = population(
        &Design {
            attitude_shift: 5.0,
            attitude_sd: 0.0,
            ..Design::default()
        },
        4,
    );
    for r in attitude_effect(&rows).unwrap() {
        if r.arm != Arm::Control {
            assert!(r.diff_vs_control.unwrap().abs() < 1e-9);
            assert_eq!(r.stars, "");
        }
    }
}

#[test]
fn self_only_attitude_shift_is_detected_at_nominal_power() {
    // 250 blocks = 1,000 participants: 250 GPTSelf against 500 control at 0+.
    let design = Design {
        blocks: 250,
        self_attitude_shift: 3.0,
        attitude_sd: 10.0,
        ..Design::default()
    };
    let runs = 300;
    let detected = (0..runs)
        .filter(|&seed| {
            let table = attitude_effect(&population(&design, seed)).unwrap();
            find(&table, Outcome::AttitudeChange, 0, Arm::GPTSelf).unwrap().p_vs_control.unwrap() < 0.05
        })
        .count();
    let se = 10.0 * (1.0 / 250.0 + 1.0 / 500.0f64).sqrt();
    let z = Normal::new(0.0, 1.0).unwrap();
    let power = z.cdf(3.0 / se - 1.959964) + z.cdf(-3.0 / se - 1.959964);
    let rate = detected as f64 / runs as f64;
    let tolerance = 3.0 * (power * (1.0 - power) / runs as f64).sqrt() + 0.01;
    assert!((rate - power).abs() <= tolerance, "rate {rate} vs power {power}");
}

fn arbitrary_rows() -> impl Strategy<Value = Vec<ParticipantRow>> {
    (any::<u64>(), 10usize..60).prop_map(|(seed, blocks)| population(&Design { blocks, ..Design::default() }, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn subgroups_are_nested(rows in arbitrary_rows()) {
        let Ok(table) = subgroup_effects(&rows, &OUTCOMES) else { return Ok(()) };
        for outcome in OUTCOMES {
            for arm in Arm::ALL {
                for s in 0..4u8 {
                    let a = find(&table, outcome, s, arm).unwrap().n;
                    let b = find(&table, outcome, s + 1, arm).unwrap().n;
                    prop_assert!(b <= a);
                }
            }
        }
    }

    #[test]
    fn known_shift_is_recovered_exactly(rows in arbitrary_rows(), shift in -10.0f64..10.0) {
        let mut shifted = rows.clone();
        for r in &mut shifted {
            if r.role == parley_core::tables::Role::GPTPartner {
                r.conv_quality = r.conv_quality.map(|v| v + shift);
            }
        }
        let (Ok(before), Ok(after)) = (
            subgroup_effects(&rows, &[Outcome::ConvQuality]),
            subgroup_effects(&shifted, &[Outcome::ConvQuality]),
        ) else { return Ok(()) };
        for s in 0..=4u8 {
            let b = find(&before, Outcome::ConvQuality, s, Arm::GPTPartner).unwrap().diff_vs_control.unwrap();
            let a = find(&after, Outcome::ConvQuality, s, Arm::GPTPartner).unwrap().diff_vs_control.unwrap();
            prop_assert!((a - b - shift).abs() < 1e-9);
        }
    }
}
