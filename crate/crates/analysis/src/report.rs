//! Runs every analysis over the exported tables and writes the report files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use parley_core::tables::{write_table, MessageRow, ParticipantRow, TableError};

use crate::effects::{attitude_effect, subgroup_effects, EffectRow, EffectsError, Outcome};
use crate::embed::{Embedder, HashingEmbedder};
use crate::labels::ClusterLabeler;
use crate::tone::{tone_contrast, tone_observations, ToneError, ToneEstimate};
use crate::topics::{topic_pipeline, TopicConfig, TopicError, TopicReport};

pub const REPORT_SCHEMA: &str = "parley-report/1";

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("tone: {0}")]
    Tone(#[from] ToneError),
    #[error("topics: {0}")]
    Topics(#[from] TopicError),
    #[error("effects: {0}")]
    Effects(#[from] EffectsError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("report io: {0}")]
    Io(#[from] std::io::Error),
    #[error("report json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Written into every report so a file can be traced back to its run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub schema: String,
    pub seed: u64,
    pub generator: String,
    /// Always "welch": unequal-variance t-tests against control.
    pub t_test: String,
    /// Always "unadjusted": no clustering by conversation.
    pub standard_errors: String,
}

impl ReportMeta {
    pub fn new(seed: u64) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            seed,
            generator: concat!("parley ", env!("CARGO_PKG_VERSION")).into(),
            t_test: "welch".into(),
            standard_errors: "unadjusted".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneReport {
    pub meta: ReportMeta,
    pub rephrased_messages: usize,
    pub estimates: Vec<ToneEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsReport {
    pub meta: ReportMeta,
    pub rows: Vec<EffectRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsFile {
    pub meta: ReportMeta,
    #[serde(flatten)]
    pub report: TopicReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub tone: ToneReport,
    pub topics: TopicsFile,
    pub effects: EffectsReport,
    pub attitude: EffectsReport,
}

pub struct AnalyzeConfig<'a> {
    pub seed: u64,
    pub k: usize,
    pub embedder: &'a dyn Embedder,
    pub fallback: Option<HashingEmbedder>,
    pub labeler: Option<&'a dyn ClusterLabeler>,
}

pub fn analyze(
    messages: &[MessageRow],
    participants: &[ParticipantRow],
    config: &AnalyzeConfig<'_>,
) -> Result<ReportBundle, AnalyzeError> {
    let meta = ReportMeta::new(config.seed);
    let observations = tone_observations(messages);
    let tone = ToneReport {
        meta: meta.clone(),
        rephrased_messages: observations.iter().filter(|o| o.rephrased).count(),
        estimates: tone_contrast(&observations)?,
    };
    let topics = TopicsFile {
        meta: meta.clone(),
        report: topic_pipeline(
            messages,
            &TopicConfig {
                k: config.k,
                seed: config.seed,
                embedder: config.embedder,
                fallback: config.fallback.clone(),
                labeler: config.labeler,
            },
        )?,
    };
    let effects = EffectsReport {
        meta: meta.clone(),
        rows: subgroup_effects(participants, &[Outcome::ConvQuality, Outcome::DemReciprocity])?,
    };
    let attitude = EffectsReport {
        meta,
        rows: attitude_effect(participants)?,
    };
    Ok(ReportBundle {
        tone,
        topics,
        effects,
        attitude,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AnalyzeError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TonePlotRow {
    feature: &'static str,
    estimate: f64,
    ci95_low: f64,
    ci95_high: f64,
}

#[derive(Serialize)]
struct EffectPlotRow<'a> {
    outcome: &'static str,
    subgroup: &'a str,
    arm: String,
    n: usize,
    mean: f64,
    ci90_low: f64,
    ci90_high: f64,
    ci95_low: f64,
    ci95_high: f64,
    diff_vs_control: Option<f64>,
    p_vs_control: Option<f64>,
    stars: &'a str,
}

#[derive(Serialize)]
struct ShareRow<'a> {
    class: String,
    cluster: usize,
    label: &'a str,
    count: u64,
    share: f64,
}

fn class_name(c: crate::topics::MessageClass) -> String {
    serde_json::to_value(c)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn effect_rows(rows: &[EffectRow]) -> Vec<EffectPlotRow<'_>> {
    rows.iter()
        .map(|r| EffectPlotRow {
            outcome: r.outcome.as_str(),
            subgroup: &r.subgroup,
            arm: format!("{:?}", r.arm),
            n: r.n,
            mean: r.mean,
            ci90_low: r.ci90[0],
            ci90_high: r.ci90[1],
            ci95_low: r.ci95[0],
            ci95_high: r.ci95[1],
            diff_vs_control: r.diff_vs_control,
            p_vs_control: r.p_vs_control,
            stars: &r.stars,
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, seed: u64, columns: &[&str], rows: &[T]) -> Result<(), AnalyzeError> {
    write_table(BufWriter::new(File::create(path)?), seed, columns, rows)?;
    Ok(())
}

/// Writes the JSON reports and plot tables into `dir`; returns the paths.
pub fn write_bundle(dir: &Path, bundle: &ReportBundle) -> Result<Vec<PathBuf>, AnalyzeError> {
    std::fs::create_dir_all(dir)?;
    let seed = bundle.tone.meta.seed;
    let mut written = Vec::new();
    let mut emit = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    write_json(&emit("tone.json"), &bundle.tone)?;
    write_json(&emit("topics.json"), &bundle.topics)?;
    write_json(&emit("effects.json"), &bundle.effects)?;
    write_json(&emit("attitude.json"), &bundle.attitude)?;

    let tone: Vec<TonePlotRow> = bundle
        .tone
        .estimates
        .iter()
        .map(|e| TonePlotRow {
            feature: e.feature.as_str(),
            estimate: e.estimate,
            ci95_low: e.ci95[0],
            ci95_high: e.ci95[1],
        })
        .collect();
    write_csv(
        &emit("tone_plot.csv"),
        seed,
        &["feature", "estimate", "ci95_low", "ci95_high"],
        &tone,
    )?;
    let topics = &bundle.topics.report;
    write_csv(
        &emit("topic_points.csv"),
        seed,
        &["message_id", "class", "cluster", "x", "y"],
        &topics.points,
    )?;
    let shares: Vec<ShareRow> = topics
        .shares
        .iter()
        .flat_map(|s| {
            s.counts.iter().zip(&s.shares).enumerate().map(move |(c, (&count, &share))| ShareRow {
                class: class_name(s.class),
                cluster: c,
                label: &topics.labels[c].label,
                count,
                share,
            })
        })
        .collect();
    write_csv(
        &emit("topic_shares.csv"),
        seed,
        &["class", "cluster", "label", "count", "share"],
        &shares,
    )?;
    let effect_columns = [
        "outcome",
        "subgroup",
        "arm",
        "n",
        "mean",
        "ci90_low",
        "ci90_high",
        "ci95_low",
        "ci95_high",
        "diff_vs_control",
        "p_vs_control",
        "stars",
    ];
    write_csv(
        &emit("effects_plot.csv"),
        seed,
        &effect_columns,
        &effect_rows(&bundle.effects.rows),
    )?;
    write_csv(
        &emit("attitude_plot.csv"),
        seed,
        &effect_columns,
        &effect_rows(&bundle.attitude.rows),
    )?;
    Ok(written)
}
