use parley_core::{
    ArmKind, ConversationState, Decision, EndReason, MessageId, ParticipantId, Provenance, Status,
    TreatmentArm,
};
use proptest::prelude::*;

/// (author is the designated participant, word count)
type Script = Vec<(bool, usize)>;

struct Run {
    state: ConversationState,
    doses: Vec<u8>,
    /// Turn indices of intercepted messages.
    intercepted_turns: Vec<u32>,
}

fn play(kind: ArmKind, script: &Script) -> Run {
    let a = ParticipantId::from("A");
    let b = ParticipantId::from("B");
    let mut state = ConversationState::new(
        "c".into(),
        [a.clone(), b.clone()],
        TreatmentArm {
            kind,
            designated: a.clone(),
        },
        0,
    )
    .unwrap();
    let mut doses = Vec::new();
    let mut intercepted_turns = Vec::new();
    for (i, (designated, words)) in script.iter().enumerate() {
        if !state.is_active() {
            break;
        }
        let author = if *designated { &a } else { &b };
        let text = vec!["w"; *words].join(" ");
        let id = MessageId::new(format!("m{i}"));
        let message = state.compose(id.clone(), author, &text, i as u64).unwrap().clone();
        if state.intervention_decision(&message) == Decision::Intercept {
            state.record_intervention().unwrap();
            intercepted_turns.push(message.turn_index);
        }
        state.deliver(&id, &text, Provenance::Original, i as u64).unwrap();
        doses.push(state.dose());
    }
    Run {
        state,
        doses,
        intercepted_turns,
    }
}

fn script_strategy() -> impl Strategy<Value = Script> {
    prop::collection::vec((any::<bool>(), 1usize..9), 0..60)
}

proptest! {
    #[test]
    fn replay_is_deterministic(script in script_strategy()) {
        let first = play(ArmKind::Treated, &script);
        let second = play(ArmKind::Treated, &script);
        prop_assert_eq!(first.state, second.state);
        prop_assert_eq!(first.doses, second.doses);
    }

    #[test]
    fn interceptions_respect_cadence(script in script_strategy()) {
        let run = play(ArmKind::Treated, &script);
        prop_assert!(run.intercepted_turns.len() <= 4);
        let a = ParticipantId::from("A");
        let ordinals: Vec<usize> = run
            .intercepted_turns
            .iter()
            .map(|t| run.state.own_turn_ordinal(&a, *t))
            .collect();
        for turn in &run.intercepted_turns {
            let speaker = &run.state.messages.iter().find(|m| m.turn_index == *turn).unwrap().author;
            prop_assert_eq!(speaker, &a);
        }
        for pair in ordinals.windows(2) {
            prop_assert!(pair[1] >= pair[0] + 2, "consecutive designated turns: {:?}", ordinals);
        }
        prop_assert_eq!(run.state.dose() as usize, run.intercepted_turns.len());
        prop_assert_eq!(
            run.state.status == Status::Ended(EndReason::Complete),
            run.state.dose() == 4
        );
    }

    #[test]
    fn placebo_counts_like_treatment(script in script_strategy()) {
        let treated = play(ArmKind::Treated, &script);
        let control = play(ArmKind::Control, &script);
        prop_assert_eq!(&treated.doses, &control.doses);
        prop_assert_eq!(treated.state.interventions_delivered, control.state.phantom_interventions);
        prop_assert_eq!(control.state.interventions_delivered, 0);
        prop_assert_eq!(treated.state.phantom_interventions, 0);
    }

    #[test]
    fn turn_indices_increment_on_speaker_change(script in script_strategy()) {
        let run = play(ArmKind::Treated, &script);
        for pair in run.state.messages.windows(2) {
            let expected = pair[0].turn_index + u32::from(pair[0].author != pair[1].author);
            prop_assert_eq!(pair[1].turn_index, expected);
        }
    }

    #[test]
    fn alternating_eligible_turns_complete(words in prop::collection::vec(5usize..30, 13..20)) {
        let script: Script = words
            .iter()
            .enumerate()
            .map(|(i, w)| (i % 2 == 0, *w))
            .collect();
        let run = play(ArmKind::Treated, &script);
        prop_assert_eq!(run.state.status, Status::Ended(EndReason::Complete));
        prop_assert_eq!(run.state.dose(), 4);
    }
}

#[test]
fn control_dose_freezes_at_departure() {
    // designated speaks on turns 0, 2 and 4 with long messages, then the
    // partner leaves
    let script: Script = vec![(true, 6), (false, 3), (true, 7), (false, 9), (true, 8), (false, 2)];
    let mut run = play(ArmKind::Control, &script);
    assert_eq!(run.doses, vec![1, 1, 1, 1, 2, 2]);
    assert!(run.state.end(EndReason::Departure));
    assert_eq!(run.state.dose(), 2);
    assert_eq!(run.state.status, Status::Ended(EndReason::Departure));
}

#[test]
fn fresh_conversation_has_zero_dose() {
    assert_eq!(play(ArmKind::Treated, &vec![]).state.dose(), 0);
}

#[test]
fn four_word_messages_never_intercepted() {
    let script: Script = (0..20).map(|i| (i % 2 == 0, 4)).collect();
    let run = play(ArmKind::Treated, &script);
    assert!(run.intercepted_turns.is_empty());
}
