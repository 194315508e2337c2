//! Lloyd's k-means with greedy k-means++ seeding.

use rand::rngs::StdRng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use parley_core::rng::{streams, substream};

pub const MAX_ITERATIONS: usize = 300;
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("{n} vectors cannot form {k} clusters")]
    TooFewPoints { n: usize, k: usize },
    #[error("vectors have inconsistent dimensions")]
    Ragged,
    #[error("all vectors are identical")]
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Inertia after the initial assignment and after every iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Clustering {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().expect("at least one assignment")
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Indices of cluster `c`'s members, nearest to the centroid first.
    pub fn nearest_members(&self, vectors: &[Vec<f64>], c: usize) -> Vec<usize> {
        let mut members: Vec<usize> = (0..vectors.len()).filter(|&i| self.labels[i] == c).collect();
        members.sort_by(|&a, &b| {
            sq_dist(&vectors[a], &self.centroids[c])
                .total_cmp(&sq_dist(&vectors[b], &self.centroids[c]))
                .then(a.cmp(&b))
        });
        members
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(point, c)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("k >= 1")
}

/// Weighted draw proportional to `weights`; `None` if all are zero.
fn draw(rng: &mut StdRng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return Some(i);
        }
        target -= w;
    }
    weights.iter().rposition(|w| *w > 0.0)
}

fn seed_centroids(vectors: &[Vec<f64>], k: usize, rng: &mut StdRng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let trials = 2 + (k as f64).ln() as usize;
    let mut chosen = vec![rng.random_range(0..n)];
    let mut closest: Vec<f64> = vectors.iter().map(|v| sq_dist(v, &vectors[chosen[0]])).collect();
    while chosen.len() < k {
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for _ in 0..trials {
            let Some(candidate) = draw(rng, &closest) else { break };
            let updated: Vec<f64> = vectors
                .iter()
                .zip(&closest)
                .map(|(v, d)| d.min(sq_dist(v, &vectors[candidate])))
                .collect();
            let potential: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.1) {
                best = Some((candidate, potential, updated));
            }
        }
        match best {
            Some((candidate, _, updated)) => {
                chosen.push(candidate);
                closest = updated;
            }
            None => {
                // Every point already coincides with a centre.
                let next = (0..n).find(|i| !chosen.contains(i)).expect("n >= k");
                chosen.push(next);
            }
        }
    }
    chosen.into_iter().map(|i| vectors[i].clone()).collect()
}

fn assign(vectors: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (label, v) in labels.iter_mut().zip(vectors) {
        let (c, d) = nearest(v, centroids);
        *label = c;
        inertia += d;
    }
    inertia
}

pub fn cluster(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<Clustering, ClusterError> {
    if k < 2 {
        return Err(ClusterError::KTooSmall(k));
    }
    let n = vectors.len();
    if n < k {
        return Err(ClusterError::TooFewPoints { n, k });
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(ClusterError::Ragged);
    }
    if vectors.iter().all(|v| v == &vectors[0]) {
        return Err(ClusterError::Degenerate);
    }
    let mut rng = substream(seed, streams::KMEANS);
    let mut centroids = seed_centroids(vectors, k, &mut rng);
    let mut labels = vec![0; n];
    let mut inertia_history = vec![assign(vectors, &centroids, &mut labels)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &l) in vectors.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(v).for_each(|(s, x)| *s += x);
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &c), old)| {
                if c == 0 {
                    old.clone()
                } else {
                    s.into_iter().map(|x| x / c as f64).collect()
                }
            })
            .collect();
        // An empty cluster takes the point farthest from its own centroid,
        // drawn from a cluster that can spare it.
        let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        for empty in empties {
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| {
                    sq_dist(&vectors[a], &next[labels[a]])
                        .total_cmp(&sq_dist(&vectors[b], &next[labels[b]]))
                        .then(b.cmp(&a))
                });
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                counts[empty] += 1;
                labels[i] = empty;
                next[empty] = vectors[i].clone();
            }
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        inertia_history.push(assign(vectors, &centroids, &mut labels));
        if shift < TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(Clustering {
        labels,
        centroids,
        inertia_history,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn each_point_its_own_cluster() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let c = cluster(&pts, 5, 1).unwrap();
        assert!(c.inertia() < 1e-24);
        let mut labels = c.labels.clone();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 5);
    }

    #[test]
    fn rejects_bad_input() {
        let pts = vec![vec![1.0, 1.0]; 4];
        assert_eq!(cluster(&pts, 2, 0), Err(ClusterError::Degenerate));
        assert_eq!(cluster(&pts, 1, 0), Err(ClusterError::KTooSmall(1)));
        assert_eq!(cluster(&pts[..1], 2, 0), Err(ClusterError::TooFewPoints { n: 1, k: 2 }));
        assert_eq!(cluster(&[vec![1.0], vec![1.0, 2.0]], 2, 0), Err(ClusterError::Ragged));
    }

    #[test]
    fn duplicates_beyond_distinct_count() {
        let pts = vec![vec![0.0], vec![0.0], vec![5.0], vec![5.0]];
        let c = cluster(&pts, 3, 4).unwrap();
        assert_eq!(c.k(), 3);
        assert!(c.inertia() < 1e-24);
    }
}
