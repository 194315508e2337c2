use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use parley_analysis::effects::{find, Arm, EffectRow, Outcome};
use parley_analysis::synthetic::{population, Design};
use parley_core::tables::{read_messages, read_participants, write_participants, PARTICIPANT_COLUMNS};
use parley_service::events::{read_log, write_log, Event, LogHeader};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn parley(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parley")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> serde_json::Value {
    let out = parley(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn failure(args: &[&str]) -> (i32, serde_json::Value) {
    let out = parley(args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    (out.status.code().unwrap(), err)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scripted_treated_dyad_through_simulate_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("scripted_treated.toml");
    let summary = ok(&["--mode", "simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(summary["seed"], 11);
    assert_eq!(summary["simulation"]["dose_distribution"], serde_json::json!([0, 0, 0, 0, 1]));
    let (header, records) = read_log(&dir.path().join("events.ndjson")).unwrap();
    assert_eq!(header.seed, 11);
    let shown = records.iter().filter(|r| matches!(r.event, Event::OfferShown { .. })).count();
    assert_eq!(shown, 4);

    ok(&["--mode", "export", "--out", s(dir.path())]);
    let (seed, messages) = read_messages(std::fs::File::open(dir.path().join("messages.csv")).unwrap()).unwrap();
    let (_, participants) = read_participants(std::fs::File::open(dir.path().join("participants.csv")).unwrap()).unwrap();
    assert_eq!(seed, Some(11));
    assert!(messages.len() >= 8);
    assert_eq!(participants.len(), 2);
    assert!(participants.iter().all(|p| p.conversation_id == participants[0].conversation_id));
    for m in messages.iter().filter(|m| m.rephrased) {
        assert!(!m.original_text.is_empty() && m.original_text != m.final_text);
    }
}

#[test]
fn scripted_control_dyad_has_phantoms_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("scripted_control.toml");
    ok(&["--mode", "simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    let (_, records) = read_log(&dir.path().join("events.ndjson")).unwrap();
    let count = |f: fn(&Event) -> bool| records.iter().filter(|r| f(&r.event)).count();
    assert_eq!(count(|e| matches!(e, Event::OfferShown { .. })), 0);
    assert_eq!(count(|e| matches!(e, Event::PhantomIntervention { .. })), 4);
}

fn run_pipeline(out: &Path, seed: &str) {
    let cfg = configs().join("hazard.toml");
    ok(&["--mode", "simulate", "--config", s(&cfg), "--seed", seed, "--dyads", "60", "--out", s(out)]);
    ok(&["--mode", "export", "--out", s(out)]);
    ok(&["--mode", "analyze", "--out", s(out)]);
}

#[test]
fn same_seed_gives_byte_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path(), "5");
    run_pipeline(b.path(), "5");
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 15, "{names:?}");
    for name in &names {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
    for name in names.iter().filter_map(|n| n.to_str()) {
        let text = std::fs::read_to_string(a.path().join(name)).unwrap();
        let first = text.lines().next().unwrap_or_default();
        let traced = match name.rsplit('.').next() {
            Some("csv") => first == "# parley-tables/1 seed=5",
            Some("ndjson") => serde_json::from_str::<serde_json::Value>(first).unwrap()["seed"] == 5,
            Some("json") => {
                let v: serde_json::Value = serde_json::from_str(&text).unwrap();
                v["seed"] == 5 || v["meta"]["seed"] == 5
            }
            Some("svg") => first == "<!-- parley seed=5 -->",
            _ => false,
        };
        assert!(traced, "{name} does not record the seed");
    }

    let c = tempfile::tempdir().unwrap();
    run_pipeline(c.path(), "6");
    assert_ne!(
        std::fs::read(a.path().join("events.ndjson")).unwrap(),
        std::fs::read(c.path().join("events.ndjson")).unwrap()
    );
}

#[test]
fn hazard_config_gives_a_survival_shaped_dose_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("hazard.toml");
    let summary = ok(&["--mode", "simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    let sim = &summary["simulation"];
    let dist: Vec<u64> = serde_json::from_value(sim["dose_distribution"].clone()).unwrap();
    assert_eq!(dist.iter().sum::<u64>(), 100);
    // Conversations reaching at least dose d never increase with d.
    let reaching: Vec<u64> = (0..5).map(|d| dist[d..].iter().sum()).collect();
    assert!(reaching.windows(2).all(|w| w[1] <= w[0]), "{reaching:?}");
    let fraction = sim["completed_fraction"].as_f64().unwrap();
    assert!(fraction > 0.0 && fraction < 0.5, "{fraction}");
}

#[test]
fn empty_log_exports_header_only_tables() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.ndjson");
    write_log(&log, &LogHeader::new(42), &[]).unwrap();
    ok(&["--mode", "export", "--input", s(&log), "--out", s(dir.path())]);
    let text = std::fs::read_to_string(dir.path().join("participants.csv")).unwrap();
    assert_eq!(text, format!("# parley-tables/1 seed=42\n{}\n", PARTICIPANT_COLUMNS.join(",")));
}

#[test]
fn missing_column_is_named_with_exit_code_4() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path(), "2");
    let path = dir.path().join("participants.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let dropped: String = text
        .lines()
        .map(|l| {
            if l.starts_with('#') {
                return l.to_owned();
            }
            let fields: Vec<&str> = l.split(',').collect();
            let keep: Vec<&str> = fields
                .iter()
                .enumerate()
                .filter(|(i, _)| PARTICIPANT_COLUMNS[*i] != "conv_quality")
                .map(|(_, f)| *f)
                .collect();
            keep.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&path, dropped + "\n").unwrap();
    let (code, err) = failure(&["--mode", "analyze", "--out", s(dir.path())]);
    assert_eq!(code, 4);
    assert_eq!(err["error"], "input_invalid");
    assert!(err["detail"].as_str().unwrap().contains("conv_quality"), "{err}");
}

#[test]
fn validation_failures_have_machine_readable_codes() {
    let (code, err) = failure(&["--mode", "nonsense"]);
    assert_eq!((code, err["error"].as_str()), (2, Some("usage")));
    let (code, err) = failure(&["--mode", "simulate", "--k", "1"]);
    assert_eq!((code, err["error"].as_str()), (3, Some("config_invalid")));
    let (code, _) = failure(&["--mode", "simulate", "--config", "/no/such/file.toml"]);
    assert_eq!(code, 3);
    let (code, err) = failure(&["--mode", "simulate", "--provider", "remote"]);
    assert_eq!(code, 3);
    assert!(err["detail"].as_str().unwrap().contains("completion_endpoint"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = 1\nunknown_key = 3\n").unwrap();
    assert_eq!(failure(&["--mode", "simulate", "--config", s(&bad)]).0, 3);
    let (code, err) = failure(&["--mode", "export", "--input", "/no/such/log", "--out", s(dir.path())]);
    assert_eq!((code, err["error"].as_str()), (4, Some("input_invalid")));
}

#[test]
fn synthetic_partner_effect_shows_up_in_the_report() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path(), "8");
    let rows = population(
        &Design {
            partner_effect: 4.0,
            partner_effect_full: 4.0,
            ..Design::default()
        },
        8,
    );
    let file = std::fs::File::create(dir.path().join("participants.csv")).unwrap();
    write_participants(file, 8, &rows).unwrap();
    ok(&["--mode", "analyze", "--out", s(dir.path()), "--no-plots"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("effects.json")).unwrap()).unwrap();
    let table: Vec<EffectRow> = serde_json::from_value(report["rows"].clone()).unwrap();
    let r = find(&table, Outcome::ConvQuality, 1, Arm::GPTPartner).unwrap();
    assert!((r.diff_vs_control.unwrap() - 4.0).abs() < 1e-9);
    assert!(r.ci95[0] < r.mean && r.mean < r.ci95[1]);
}
