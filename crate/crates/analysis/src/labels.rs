//! Short names for clusters, from exemplar messages nearest each centroid.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kmeans::Clustering;

pub const EXEMPLARS_PER_CLUSTER: usize = 10;
pub const MAX_LABEL_WORDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelError {
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("labeler: {0}")]
    Provider(String),
}

pub trait ClusterLabeler: Send + Sync {
    fn label(&self, exemplars: &[&str]) -> Result<String, LabelError>;
}

/// Posts `{"exemplars": [...], "max_words": 8}` and expects `{"label": "..."}`.
pub struct RemoteLabeler {
    endpoint: String,
    api_key: Option<String>,
    timeout: Duration,
    agent: ureq::Agent,
}

impl RemoteLabeler {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            timeout,
            agent: ureq::Agent::config_builder()
                .http_status_as_error(false)
                .build()
                .into(),
        }
    }
}

#[derive(Serialize)]
struct LabelRequest<'a> {
    exemplars: &'a [&'a str],
    max_words: usize,
}

#[derive(Deserialize)]
struct LabelResponse {
    label: String,
}

impl ClusterLabeler for RemoteLabeler {
    fn label(&self, exemplars: &[&str]) -> Result<String, LabelError> {
        let err = |e: ureq::Error| LabelError::Provider(e.to_string());
        let mut req = self
            .agent
            .post(&self.endpoint)
            .config()
            .timeout_global(Some(self.timeout))
            .build();
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(LabelRequest {
                exemplars,
                max_words: MAX_LABEL_WORDS,
            })
            .map_err(err)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(LabelError::Provider(format!("status {status}")));
        }
        let body: LabelResponse = resp.body_mut().read_json().map_err(err)?;
        Ok(body.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Offline,
    Provider,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabel {
    pub cluster: usize,
    pub label: String,
    pub source: LabelSource,
    pub size: usize,
    pub exemplars: Vec<String>,
}

pub fn offline_label(cluster: usize) -> String {
    format!("cluster-{cluster}")
}

fn clip_words(label: &str) -> String {
    label
        .split_whitespace()
        .take(MAX_LABEL_WORDS)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Labels every cluster. Without a labeler, or when it fails or returns an
/// empty label, the cluster is named `cluster-<i>`.
pub fn label_clusters(
    clustering: &Clustering,
    vectors: &[Vec<f64>],
    texts: &[&str],
    labeler: Option<&dyn ClusterLabeler>,
) -> Result<Vec<ClusterLabel>, LabelError> {
    (0..clustering.k())
        .map(|c| {
            let members = clustering.nearest_members(vectors, c);
            if members.is_empty() {
                return Err(LabelError::EmptyCluster(c));
            }
            let exemplars: Vec<&str> = members
                .iter()
                .take(EXEMPLARS_PER_CLUSTER)
                .map(|&i| texts[i])
                .collect();
            let from_provider = labeler.and_then(|l| match l.label(&exemplars) {
                Ok(s) if !s.trim().is_empty() => Some(clip_words(&s)),
                Ok(_) => None,
                Err(e) => {
                    tracing::warn!(cluster = c, error = %e, "labeler failed; using offline label");
                    None
                }
            });
            let (label, source) = match from_provider {
                Some(l) => (l, LabelSource::Provider),
                None => (offline_label(c), LabelSource::Offline),
            };
            Ok(ClusterLabel {
                cluster: c,
                label,
                source,
                size: members.len(),
                exemplars: exemplars.into_iter().map(str::to_owned).collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::cluster;

    fn three_groups() -> (Vec<Vec<f64>>, Vec<&'static str>) {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![10.0, 0.0],
            vec![10.1, 0.0],
            vec![0.0, 10.0],
            vec![0.0, 10.1],
        ];
        (pts, vec!["a", "b", "c", "d", "e", "f"])
    }

    #[test]
    fn offline_labels() {
        let (pts, texts) = three_groups();
        let c = cluster(&pts, 3, 2).unwrap();
        let labels = label_clusters(&c, &pts, &texts, None).unwrap();
        let names: Vec<_> = labels.iter().map(|l| l.label.as_str()).collect();
        assert_eq!(names, ["cluster-0", "cluster-1", "cluster-2"]);
        assert!(labels.iter().all(|l| l.size == 2 && l.source == LabelSource::Offline));
    }

    struct Wordy;
    impl ClusterLabeler for Wordy {
        fn label(&self, ex: &[&str]) -> Result<String, LabelError> {
            if ex.contains(&"a") {
                Err(LabelError::Provider("down".into()))
            } else {
                Ok("one two three four five six seven eight nine ten".into())
            }
        }
    }

    #[test]
    fn provider_labels_are_clipped_and_failures_fall_back() {
        let (pts, texts) = three_groups();
        let c = cluster(&pts, 3, 2).unwrap();
        let labels = label_clusters(&c, &pts, &texts, Some(&Wordy)).unwrap();
        for l in labels {
            if l.exemplars.contains(&"a".to_string()) {
                assert_eq!(l.label, offline_label(l.cluster));
            } else {
                assert_eq!(l.label.split(' ').count(), MAX_LABEL_WORDS);
                assert_eq!(l.source, LabelSource::Provider);
            }
        }
    }

    #[test]
    fn empty_cluster_is_rejected() {
        let (pts, texts) = three_groups();
        let mut c = cluster(&pts, 3, 2).unwrap();
        c.labels.iter_mut().for_each(|l| *l = 0);
        assert!(matches!(
            label_clusters(&c, &pts, &texts, None),
            Err(LabelError::EmptyCluster(1))
        ));
    }
}
