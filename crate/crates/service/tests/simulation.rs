use std::sync::Arc;

use parley_core::rephrase::{MockProvider, PromptConfig, RephraseEngine, RetryPolicy, TimeoutProvider};
use parley_core::{ArmKind, EndReason, Status};
use parley_service::events::{Event, Routing};
use parley_service::replay::replay;
use parley_service::sim::{simulate, SimConfig};

fn mock_engine() -> Arc<RephraseEngine> {
    Arc::new(RephraseEngine::new(
        Arc::new(MockProvider::new()),
        PromptConfig::default(),
        RetryPolicy::default(),
    ))
}

fn count(records: &[parley_service::events::EventRecord], pred: impl Fn(&Event) -> bool) -> usize {
    records.iter().filter(|r| pred(&r.event)).count()
}

#[test]
fn scripted_treated_dyad_completes_with_four_offers() {
    let out = simulate(11, SimConfig::scripted(ArmKind::Treated), mock_engine()).unwrap();
    assert_eq!(count(&out.records, |e| matches!(e, Event::OfferShown { .. })), 4);
    assert_eq!(count(&out.records, |e| matches!(e, Event::PhantomIntervention { .. })), 0);
    let state = out.live.values().next().unwrap();
    assert_eq!(state.status, Status::Ended(EndReason::Complete));
    assert_eq!(state.dose(), 4);
    let designated = &state.arm.designated;
    let ordinals: Vec<usize> = out
        .records
        .iter()
        .filter_map(|r| match &r.event {
            Event::MessageComposed {
                author,
                turn_index,
                routing: Routing::Intercept,
                ..
            } => Some(state.own_turn_ordinal(author, *turn_index)),
            _ => None,
        })
        .collect();
    assert_eq!(ordinals, [0, 2, 4, 6]);
    assert!(out.records.iter().all(|r| !matches!(
        &r.event,
        Event::MessageComposed { author, routing: Routing::Intercept, .. } if author != designated
    )));
    assert_eq!(replay(&out.records).unwrap(), out.live);
}

#[test]
fn scripted_control_dyad_counts_phantoms() {
    let out = simulate(11, SimConfig::scripted(ArmKind::Control), mock_engine()).unwrap();
    assert_eq!(count(&out.records, |e| matches!(e, Event::OfferShown { .. })), 0);
    assert_eq!(count(&out.records, |e| matches!(e, Event::PhantomIntervention { .. })), 4);
    let state = out.live.values().next().unwrap();
    assert_eq!(state.status, Status::Ended(EndReason::Complete));
    assert_eq!(replay(&out.records).unwrap(), out.live);
}

#[test]
fn mixed_population_replays_exactly() {
    let out = simulate(3, SimConfig::default(), mock_engine()).unwrap();
    assert_eq!(out.stats.conversations, 50);
    assert_eq!(out.stats.stuck, 0, "{:?}", out.stats);
    assert!(out.stats.departed > 0 && out.stats.completed > 0, "{:?}", out.stats);
    assert_eq!(replay(&out.records).unwrap(), out.live);
    for (i, r) in out.records.iter().enumerate() {
        assert_eq!(r.seq, i as u64);
    }
}

#[test]
fn same_seed_same_log() {
    let a = simulate(5, SimConfig { dyads: 10, ..SimConfig::default() }, mock_engine()).unwrap();
    let b = simulate(5, SimConfig { dyads: 10, ..SimConfig::default() }, mock_engine()).unwrap();
    assert_eq!(a.records, b.records);
    let c = simulate(6, SimConfig { dyads: 10, ..SimConfig::default() }, mock_engine()).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn dead_provider_never_blocks_a_conversation() {
    let engine = Arc::new(RephraseEngine::new(
        Arc::new(TimeoutProvider),
        PromptConfig::default(),
        RetryPolicy::default(),
    ));
    let mut config = SimConfig::default();
    config.hub.forced_arm = Some(ArmKind::Treated);
    let out = simulate(9, config, engine).unwrap();
    assert_eq!(out.stats.stuck, 0);
    assert_eq!(count(&out.records, |e| matches!(e, Event::OfferShown { .. })), 0);
    assert!(count(&out.records, |e| matches!(e, Event::OfferFailed { .. })) > 0);
    for state in out.live.values() {
        assert_eq!(state.dose(), 0);
        assert!(matches!(state.status, Status::Ended(EndReason::Departure)));
    }
    assert_eq!(replay(&out.records).unwrap(), out.live);
}
