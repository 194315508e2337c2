use std::collections::BTreeMap;
use std::fs::File;
use std::sync::Arc;

use parley_core::rephrase::{MockProvider, PromptConfig, RephraseEngine, RetryPolicy};
use parley_core::surveys::Instrument;
use parley_core::tables::{read_messages, read_participants, MESSAGE_COLUMNS, PARTICIPANT_COLUMNS};
use parley_core::{ArmKind, EndReason, Selection};
use parley_service::events::Event;
use parley_service::export::{export, write_tables, Tables, MESSAGES_FILE, PARTICIPANTS_FILE};
use parley_service::sim::{simulate, SimConfig, SimOutcome};

fn engine() -> Arc<RephraseEngine> {
    Arc::new(RephraseEngine::new(
        Arc::new(MockProvider::new()),
        PromptConfig::default(),
        RetryPolicy::default(),
    ))
}

fn tables_of(out: &SimOutcome) -> Tables {
    export(&out.records, &Instrument::default_pre(), &Instrument::default_post()).unwrap()
}

#[test]
fn scripted_dyad_gives_one_conversation() {
    let out = simulate(21, SimConfig::scripted(ArmKind::Treated), engine()).unwrap();
    let t = tables_of(&out);
    assert_eq!(t.participants.len(), 2);
    assert!(t.messages.len() >= 8, "{}", t.messages.len());
    assert!(t.participants.iter().all(|p| p.dose == 4 && p.end_reason == Some(EndReason::Complete)));
    assert_eq!(t.participants.iter().filter(|p| p.designated).count(), 1);
    let designated = t.participants.iter().find(|p| p.designated).unwrap();
    assert_eq!(designated.suggestions_accepted, 4);
    assert_eq!(t.messages.iter().filter(|m| m.rephrased).count(), 4);
    for p in &t.participants {
        assert!(p.conv_quality.is_some() && p.attitude_change.is_some(), "{p:?}");
        assert!(p.stance.is_some());
    }
    for m in t.messages.iter().filter(|m| m.rephrased) {
        assert_eq!(m.author, designated.participant_id);
        assert_ne!(m.original_text, m.final_text);
    }
}

#[test]
fn both_members_share_the_conversation_dose() {
    let out = simulate(4, SimConfig::default(), engine()).unwrap();
    let t = tables_of(&out);
    let mut by_conv: BTreeMap<&str, Vec<u8>> = BTreeMap::new();
    for p in &t.participants {
        by_conv.entry(&p.conversation_id).or_default().push(p.dose);
    }
    assert_eq!(by_conv.len(), 50);
    for doses in by_conv.values() {
        assert_eq!(doses.len(), 2);
        assert_eq!(doses[0], doses[1]);
    }
    let departed_mid: Vec<_> = t
        .participants
        .iter()
        .filter(|p| p.end_reason == Some(EndReason::Departure) && p.dose == 2)
        .collect();
    assert!(!departed_mid.is_empty(), "no dose-2 departures in this seed");
}

#[test]
fn tables_read_back_and_match_the_log() {
    let out = simulate(8, SimConfig::default(), engine()).unwrap();
    let t = tables_of(&out);
    let dir = tempfile::tempdir().unwrap();
    write_tables(dir.path(), 8, &t).unwrap();
    let (seed, messages) = read_messages(File::open(dir.path().join(MESSAGES_FILE)).unwrap()).unwrap();
    let (_, participants) = read_participants(File::open(dir.path().join(PARTICIPANTS_FILE)).unwrap()).unwrap();
    assert_eq!(seed, Some(8));
    assert_eq!(messages, t.messages);
    assert_eq!(participants, t.participants);

    let composed = out
        .records
        .iter()
        .filter(|r| matches!(r.event, Event::MessageComposed { .. }))
        .count();
    assert_eq!(messages.len(), composed);
    let accepted = out
        .records
        .iter()
        .filter(|r| {
            matches!(
                r.event,
                Event::ChoiceMade {
                    selection: Selection::Suggestion(_),
                    ..
                }
            )
        })
        .count();
    assert_eq!(messages.iter().filter(|m| m.rephrased).count(), accepted);
    let logged_dose: u32 = out
        .records
        .iter()
        .filter_map(|r| match r.event {
            Event::ConversationEnded { dose, .. } => Some(dose as u32),
            _ => None,
        })
        .sum();
    let table_dose: u32 = participants.iter().filter(|p| p.designated).map(|p| p.dose as u32).sum();
    assert_eq!(table_dose, logged_dose);
}

#[test]
fn empty_log_writes_headers_only() {
    let t = export(&[], &Instrument::default_pre(), &Instrument::default_post()).unwrap();
    assert_eq!(t, Tables::default());
    let dir = tempfile::tempdir().unwrap();
    write_tables(dir.path(), 0, &t).unwrap();
    let text = std::fs::read_to_string(dir.path().join(MESSAGES_FILE)).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>(), ["# parley-tables/1 seed=0", &MESSAGE_COLUMNS.join(",")]);
    let text = std::fs::read_to_string(dir.path().join(PARTICIPANTS_FILE)).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), PARTICIPANT_COLUMNS.join(","));
}
