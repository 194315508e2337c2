//! Topic preservation: embed, cluster and project messages, then test whether
//! cluster shares differ between message classes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use parley_core::tables::MessageRow;
use parley_core::word_count;

use crate::embed::{embed_texts, EmbedError, Embedder, HashingEmbedder};
use crate::kmeans::{cluster, ClusterError};
use crate::labels::{label_clusters, ClusterLabel, ClusterLabeler, LabelError};
use crate::project::{project_2d, ProjectError};
use crate::stats::{chi_square_test, ChiSquareResult, StatsError};

pub const DEFAULT_K: usize = 12;
/// Messages need more than this many words to be clustered.
pub const MIN_WORDS_EXCLUSIVE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageClass {
    /// Delivered without an accepted rephrasing.
    Untreated,
    /// The text a rephrasing replaced.
    OriginalOfTreated,
    /// The accepted rephrasing.
    Rephrased,
}

impl MessageClass {
    pub const ALL: [MessageClass; 3] = [
        MessageClass::Untreated,
        MessageClass::OriginalOfTreated,
        MessageClass::Rephrased,
    ];
}

#[derive(Debug, Error)]
pub enum TopicError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("topic table: {0}")]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicInput {
    pub message_id: String,
    pub class: MessageClass,
    pub text: String,
}

/// Delivered messages with more than four words, split into the three classes.
pub fn topic_inputs(rows: &[MessageRow]) -> Vec<TopicInput> {
    let mut out = Vec::new();
    let mut push = |row: &MessageRow, class, text: &str| {
        if word_count(text) > MIN_WORDS_EXCLUSIVE {
            out.push(TopicInput {
                message_id: row.message_id.clone(),
                class,
                text: text.to_owned(),
            });
        }
    };
    for row in rows.iter().filter(|r| r.delivered) {
        if row.rephrased {
            push(row, MessageClass::OriginalOfTreated, &row.original_text);
            push(row, MessageClass::Rephrased, &row.final_text);
        } else {
            push(row, MessageClass::Untreated, &row.final_text);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicPoint {
    pub message_id: String,
    pub class: MessageClass,
    pub cluster: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShares {
    pub class: MessageClass,
    pub counts: Vec<u64>,
    pub shares: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicReport {
    pub k: usize,
    pub seed: u64,
    pub embedder: String,
    pub labels: Vec<ClusterLabel>,
    pub shares: Vec<ClassShares>,
    /// All three classes against the clusters.
    pub test: ChiSquareResult,
    /// Replaced originals against their rephrasings only; `None` when the
    /// table has fewer than two non-empty rows or columns.
    pub rephrase_test: Option<ChiSquareResult>,
    /// Share of rephrasings that fall in the same cluster as their original,
    /// over pairs where both texts were clustered.
    pub pair_agreement: Option<f64>,
    pub inertia_history: Vec<f64>,
    pub converged: bool,
    pub explained_variance: [f64; 2],
    pub points: Vec<TopicPoint>,
}

pub struct TopicConfig<'a> {
    pub k: usize,
    pub seed: u64,
    pub embedder: &'a dyn Embedder,
    /// `None` aborts when the embedder fails.
    pub fallback: Option<HashingEmbedder>,
    pub labeler: Option<&'a dyn ClusterLabeler>,
}

pub fn topic_pipeline(rows: &[MessageRow], config: &TopicConfig<'_>) -> Result<TopicReport, TopicError> {
    let inputs = topic_inputs(rows);
    let texts: Vec<&str> = inputs.iter().map(|i| i.text.as_str()).collect();
    let (vectors, embedder) = embed_texts(config.embedder, &texts, config.fallback.as_ref())?;
    let clustering = cluster(&vectors, config.k, config.seed)?;
    let projection = project_2d(&vectors)?;
    let labels = label_clusters(&clustering, &vectors, &texts, config.labeler)?;

    let table: Vec<Vec<u64>> = MessageClass::ALL
        .iter()
        .map(|class| {
            let mut counts = vec![0u64; config.k];
            for (input, &c) in inputs.iter().zip(&clustering.labels) {
                if input.class == *class {
                    counts[c] += 1;
                }
            }
            counts
        })
        .collect();
    let test = chi_square_test(&table)?;
    let rephrase_test = chi_square_test(&table[1..]).ok();
    let mut original_cluster = std::collections::HashMap::new();
    for (input, &c) in inputs.iter().zip(&clustering.labels) {
        if input.class == MessageClass::OriginalOfTreated {
            original_cluster.insert(input.message_id.as_str(), c);
        }
    }
    let (same, pairs) = inputs
        .iter()
        .zip(&clustering.labels)
        .filter(|(i, _)| i.class == MessageClass::Rephrased)
        .filter_map(|(i, c)| original_cluster.get(i.message_id.as_str()).map(|o| o == c))
        .fold((0usize, 0usize), |(s, n), hit| (s + hit as usize, n + 1));
    let pair_agreement = (pairs > 0).then(|| same as f64 / pairs as f64);
    let shares = MessageClass::ALL
        .iter()
        .zip(&table)
        .map(|(&class, counts)| {
            let total: u64 = counts.iter().sum();
            ClassShares {
                class,
                counts: counts.clone(),
                shares: counts
                    .iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect(),
            }
        })
        .collect();
    let points = inputs
        .iter()
        .zip(&clustering.labels)
        .zip(&projection.coords)
        .map(|((input, &cluster), xy)| TopicPoint {
            message_id: input.message_id.clone(),
            class: input.class,
            cluster,
            x: xy[0],
            y: xy[1],
        })
        .collect();
    Ok(TopicReport {
        k: config.k,
        seed: config.seed,
        embedder,
        labels,
        shares,
        test,
        rephrase_test,
        pair_agreement,
        inertia_history: clustering.inertia_history.clone(),
        converged: clustering.converged,
        explained_variance: projection.explained(),
        points,
    })
}
