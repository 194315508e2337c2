use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use parley_analysis::kmeans::{cluster, sq_dist};
use parley_analysis::project::project_2d;

fn blobs(seed: u64, per: usize, dim: usize, gap: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = StdRng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut pts = Vec::new();
    let mut truth = Vec::new();
    for blob in 0..2 {
        for _ in 0..per {
            pts.push(
                (0..dim)
                    .map(|j| noise.sample(&mut rng) + if j == 0 { blob as f64 * gap } else { 0.0 })
                    .collect(),
            );
            truth.push(blob);
        }
    }
    (pts, truth)
}

#[test]
fn separated_blobs_are_recovered_exactly() {
    for seed in 0..20 {
        let (pts, truth) = blobs(seed, 150, 5, 20.0);
        let c = cluster(&pts, 2, seed).unwrap();
        let same = c.labels.iter().zip(&truth).filter(|(a, b)| a == b).count();
        let agreement = same.max(pts.len() - same);
        assert_eq!(agreement, pts.len(), "seed {seed}");
        assert!(c.converged);
    }
}

#[test]
fn same_seed_same_labels() {
    let mut rng = StdRng::seed_from_u64(3);
    let pts: Vec<Vec<f64>> = (0..200).map(|_| (0..8).map(|_| rng.random::<f64>()).collect()).collect();
    let a = cluster(&pts, 6, 42).unwrap();
    let b = cluster(&pts, 6, 42).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inertia_never_increases(
        pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 12..60),
        k in 2usize..6,
        seed in any::<u64>(),
    ) {
        prop_assume!(pts.iter().any(|p| p != &pts[0]));
        let c = cluster(&pts, k, seed).unwrap();
        for w in c.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", c.inertia_history);
        }
        let direct: f64 = pts.iter().zip(&c.labels).map(|(p, &l)| sq_dist(p, &c.centroids[l])).sum();
        prop_assert!((direct - c.inertia()).abs() <= 1e-9 * direct.max(1.0));
    }

    #[test]
    fn planar_points_keep_their_distances(
        pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..30),
    ) {
        let pts: Vec<Vec<f64>> = pts.into_iter().map(|(x, y)| vec![x, y]).collect();
        let p = project_2d(&pts).unwrap();
        prop_assume!(p.explained()[1] > 1e-9 * p.explained()[0]);
        for i in 0..pts.len() {
            for j in 0..i {
                let d0 = sq_dist(&pts[i], &pts[j]);
                let d1 = sq_dist(&p.coords[i], &p.coords[j]);
                prop_assert!((d0 - d1).abs() <= 1e-8 * d0.max(1.0));
            }
        }
        prop_assert!(p.explained()[0] >= p.explained()[1]);
    }
}

#[test]
fn reconstruction_error_equals_trailing_eigenvalues() {
    let mut rng = StdRng::seed_from_u64(11);
    let (n, dim) = (40, 7);
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|j| rng.random::<f64>() * (j + 1) as f64).collect())
        .collect();
    let p = project_2d(&pts).unwrap();

    let centered = DMatrix::from_fn(n, dim, |i, j| pts[i][j] - p.mean[j]);
    // Independent route: singular values of the centered data.
    let svd = centered.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().map(|s| s * s / (n as f64 - 1.0)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    for (a, b) in sv.iter().zip(&p.eigenvalues) {
        assert!((a - b).abs() < 1e-9 * sv[0], "{a} vs {b}");
    }

    let mut error = 0.0;
    for i in 0..n {
        for j in 0..dim {
            let rebuilt = p.coords[i][0] * p.components[0][j] + p.coords[i][1] * p.components[1][j];
            error += (centered[(i, j)] - rebuilt).powi(2);
        }
    }
    let trailing: f64 = sv[2..].iter().sum::<f64>() * (n as f64 - 1.0);
    assert!((error - trailing).abs() < 1e-8 * trailing, "{error} vs {trailing}");
    assert!(p.explained()[0] >= p.explained()[1]);
}
