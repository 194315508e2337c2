//! Rephrased vs. replaced-original comparison of the binary markers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use parley_core::tables::MessageRow;

use crate::features::{extract_features, Feature, FeatureVector};
use crate::stats::t_critical;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToneError {
    #[error("need at least 2 rephrased and 2 original messages, got {rephrased} and {original}")]
    TooFew { rephrased: usize, original: usize },
}

/// One scored text and whether it is a rephrasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToneObservation {
    pub features: FeatureVector,
    pub rephrased: bool,
}

/// Every accepted rephrasing paired with the original it replaced.
pub fn tone_observations(rows: &[MessageRow]) -> Vec<ToneObservation> {
    let mut out = Vec::new();
    for row in rows.iter().filter(|r| r.rephrased && r.delivered) {
        for (text, rephrased) in [(&row.final_text, true), (&row.original_text, false)] {
            if let Ok(features) = extract_features(text) {
                out.push(ToneObservation { features, rephrased });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneEstimate {
    pub feature: Feature,
    /// OLS slope on the rephrased indicator.
    pub estimate: f64,
    pub se: f64,
    pub ci95: [f64; 2],
    pub mean_rephrased: f64,
    pub mean_original: f64,
    pub n_rephrased: usize,
    pub n_original: usize,
}

/// Least-squares fit of `y = a + b x`; returns `(b, se(b))` with the usual
/// homoskedastic variance estimate.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let y = DVector::from_column_slice(y);
    let beta = design
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .expect("svd with both factors");
    let residuals = &y - &design * &beta;
    let sigma2 = residuals.norm_squared() / (n as f64 - 2.0);
    let xtx_inv = (design.transpose() * &design)
        .try_inverse()
        .expect("both groups present");
    (beta[1], (sigma2 * xtx_inv[(1, 1)]).sqrt())
}

pub fn tone_contrast(obs: &[ToneObservation]) -> Result<Vec<ToneEstimate>, ToneError> {
    let n_rephrased = obs.iter().filter(|o| o.rephrased).count();
    let n_original = obs.len() - n_rephrased;
    if n_rephrased < 2 || n_original < 2 {
        return Err(ToneError::TooFew {
            rephrased: n_rephrased,
            original: n_original,
        });
    }
    let x: Vec<f64> = obs.iter().map(|o| o.rephrased as u8 as f64).collect();
    let crit = t_critical(0.95, obs.len() as f64 - 2.0);
    Ok(Feature::ALL
        .iter()
        .map(|&feature| {
            let y: Vec<f64> = obs.iter().map(|o| o.features.get(feature) as f64).collect();
            let group_mean = |flag: bool| {
                let (sum, n) = obs
                    .iter()
                    .filter(|o| o.rephrased == flag)
                    .fold((0.0, 0usize), |(s, n), o| (s + o.features.get(feature) as f64, n + 1));
                sum / n as f64
            };
            let (estimate, se) = ols_slope(&x, &y);
            ToneEstimate {
                feature,
                estimate,
                se,
                ci95: [estimate - crit * se, estimate + crit * se],
                mean_rephrased: group_mean(true),
                mean_original: group_mean(false),
                n_rephrased,
                n_original,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(flags: &[(u8, bool)]) -> Vec<ToneObservation> {
        flags
            .iter()
            .map(|&(v, rephrased)| ToneObservation {
                features: FeatureVector {
                    hedges: v,
                    ..FeatureVector::default()
                },
                rephrased,
            })
            .collect()
    }

    #[test]
    fn difference_in_means() {
        let data = obs(&[
            (1, true),
            (1, true),
            (0, true),
            (1, true),
            (0, false),
            (1, false),
            (0, false),
            (0, false),
        ]);
        let out = tone_contrast(&data).unwrap();
        let hedges = out.iter().find(|e| e.feature == Feature::Hedges).unwrap();
        assert!((hedges.estimate - 0.5).abs() < 1e-12);
        assert!(hedges.ci95[0] < 0.5 && hedges.ci95[1] > 0.5);
    }

    #[test]
    fn identical_groups_give_zero() {
        let data = obs(&[(1, true), (0, true), (1, false), (0, false)]);
        for e in tone_contrast(&data).unwrap() {
            assert!(e.estimate.abs() < 1e-12);
            assert!(e.ci95[0] <= 0.0 && e.ci95[1] >= 0.0);
        }
    }

    #[test]
    fn too_few_is_an_error() {
        let data = obs(&[(1, true), (0, false), (1, false)]);
        assert_eq!(
            tone_contrast(&data),
            Err(ToneError::TooFew {
                rephrased: 1,
                original: 2
            })
        );
    }
}
