//! k-means with k-means++ seeding and silhouette-based selection of k.
//!
//! All distances are Euclidean. Every random choice comes from a ChaCha8
//! stream derived from the caller's seed, so results are reproducible.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stats::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub n_init: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig { k, seed, max_iter: 300, n_init: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Lloyd iterations of the winning initialisation.
    pub iterations: usize,
    /// Inertia after each assignment step of the winning initialisation.
    pub inertia_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClusterError {
    InvalidK {
        k: usize,
    },
    TooFewPoints {
        k: usize,
        n: usize,
    },
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    /// Every vector is identical, so no partition can be scored.
    Degenerate,
    EmptyRange,
}

impl fmt::Display for ClusterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterError::InvalidK { k } => write!(f, "k = {k} is invalid; at least 2 clusters are required"),
            ClusterError::TooFewPoints { k, n } => write!(f, "cannot form {k} clusters from {n} points"),
            ClusterError::DimensionMismatch { index, expected, found } => {
                write!(f, "vector {index} has dimension {found}, expected {expected}")
            }
            ClusterError::Degenerate => f.write_str("all vectors are identical; the silhouette is undefined"),
            ClusterError::EmptyRange => f.write_str("the range of k is empty"),
        }
    }
}

impl core::error::Error for ClusterError {}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dimensions(points: &[Vec<f64>]) -> Result<usize, ClusterError> {
    let dim = points.first().map_or(0, Vec::len);
    for (index, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(ClusterError::DimensionMismatch { index, expected: dim, found: p.len() });
        }
    }
    Ok(dim)
}

/// Index of the nearest centroid and the squared distance to it; ties go to
/// the lower index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = points[chosen].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeans {
    let (n, k, dim) = (points.len(), centroids.len(), points[0].len());
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut inertia = 0.0;
        for (label, p) in labels.iter_mut().zip(points) {
            let (j, d) = nearest(p, &centroids);
            inertia += d;
            if *label != j {
                *label = j;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed || iterations == max_iter {
            return KMeans { labels, centroids, inertia, iterations, inertia_trace: trace };
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&label, p) in labels.iter().zip(points) {
            counts[label] += 1;
            for (s, x) in sums[label].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let c = counts[j] as f64;
                centroids[j] = sums[j].iter().map(|s| s / c).collect();
            }
        }
        // An empty cluster takes over the point farthest from its centroid.
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .map(|i| (i, squared_distance(&points[i], &centroids[labels[i]])))
                .filter(|&(_, d)| d > 0.0)
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            if let Some((i, _)) = far {
                counts[labels[i]] -= 1;
                counts[j] = 1;
                centroids[j] = points[i].clone();
            }
        }
    }
}

/// Best of `n_init` k-means++/Lloyd runs by inertia. Ties keep the earlier run.
pub fn kmeans(points: &[Vec<f64>], config: &KMeansConfig) -> Result<KMeans, ClusterError> {
    if config.k < 2 {
        return Err(ClusterError::InvalidK { k: config.k });
    }
    if points.len() < config.k {
        return Err(ClusterError::TooFewPoints { k: config.k, n: points.len() });
    }
    check_dimensions(points)?;
    let mut best: Option<KMeans> = None;
    for run in 0..config.n_init.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(run as u64);
        let init = plus_plus_init(points, config.k, &mut rng);
        let result = lloyd(points, init, config.max_iter);
        if best.as_ref().is_none_or(|b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    Ok(best.expect("n_init is at least 1"))
}

/// Pairwise distances stored as a condensed upper triangle.
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(points: &[Vec<f64>]) -> Self {
        let n = points.len();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                values.push(libm::sqrt(squared_distance(&points[i], &points[j])));
            }
        }
        DistanceMatrix { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            core::cmp::Ordering::Equal => 0.0,
            core::cmp::Ordering::Less => self.values[self.offset(i) + j - i - 1],
            core::cmp::Ordering::Greater => self.values[self.offset(j) + i - j - 1],
        }
    }

    fn offset(&self, i: usize) -> usize {
        i * (2 * self.n - i - 1) / 2
    }
}

/// Mean silhouette coefficient, or `None` when fewer than two clusters are
/// present. Points alone in their cluster score 0.
pub fn silhouette_score(distances: &DistanceMatrix, labels: &[usize]) -> Option<f64> {
    let n = distances.len();
    assert_eq!(labels.len(), n, "one label per point");
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return None;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += distances.get(i, j);
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Some(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectKConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    /// Points scored per k; larger inputs are subsampled.
    pub max_sample: usize,
    pub max_iter: usize,
    pub n_init: usize,
}

impl Default for SelectKConfig {
    fn default() -> Self {
        SelectKConfig { k_min: 2, k_max: 15, seed: 42, max_sample: 5_000, max_iter: 300, n_init: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub best_k: usize,
    /// Silhouette per candidate k; `None` when the clustering collapsed to a
    /// single cluster on the scored sample.
    pub scores: Vec<(usize, Option<f64>)>,
    pub sample_size: usize,
    pub clustering: KMeans,
}

/// Cluster for every k in `[k_min, k_max]` and keep the k with the highest
/// silhouette. Ties go to the smaller k.
pub fn select_k(points: &[Vec<f64>], config: &SelectKConfig) -> Result<KSelection, ClusterError> {
    if config.k_min < 2 {
        return Err(ClusterError::InvalidK { k: config.k_min });
    }
    if config.k_min > config.k_max {
        return Err(ClusterError::EmptyRange);
    }
    let n = points.len();
    if n <= config.k_max {
        return Err(ClusterError::TooFewPoints { k: config.k_max, n });
    }
    check_dimensions(points)?;
    if points.iter().all(|p| p == &points[0]) {
        return Err(ClusterError::Degenerate);
    }

    let sample: Vec<usize> = if n > config.max_sample {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x5157_4f55));
        let mut idx = index::sample(&mut rng, n, config.max_sample).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let sampled: Vec<Vec<f64>> = sample.iter().map(|&i| points[i].clone()).collect();
    let distances = DistanceMatrix::new(&sampled);

    let mut scores = Vec::new();
    let mut best: Option<(usize, f64, KMeans)> = None;
    for k in config.k_min..=config.k_max {
        let km = kmeans(
            points,
            &KMeansConfig {
                k,
                seed: mix_seed(config.seed, k as u64),
                max_iter: config.max_iter,
                n_init: config.n_init,
            },
        )?;
        let labels: Vec<usize> = sample.iter().map(|&i| km.labels[i]).collect();
        let score = silhouette_score(&distances, &labels);
        scores.push((k, score));
        if let Some(s) = score {
            if best.as_ref().is_none_or(|b| s > b.1) {
                best = Some((k, s, km));
            }
        }
    }
    let (best_k, _, clustering) = best.ok_or(ClusterError::Degenerate)?;
    Ok(KSelection { best_k, scores, sample_size: sample.len(), clustering })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(centers: &[Vec<f64>], per: usize, sigma: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut out = Vec::new();
        for c in centers {
            for _ in 0..per {
                out.push(c.iter().map(|x| x + noise.sample(&mut rng)).collect());
            }
        }
        out
    }

    #[test]
    fn antipodal_groups_split_perfectly() {
        let pts =
            vec![vec![1.0, 0.1], vec![1.0, -0.1], vec![0.9, 0.0], vec![-1.0, 0.1], vec![-1.0, -0.1], vec![-0.9, 0.0]];
        let km = kmeans(&pts, &KMeansConfig::new(2, 7)).unwrap();
        assert_eq!(km.labels[0], km.labels[1]);
        assert_eq!(km.labels[0], km.labels[2]);
        assert_eq!(km.labels[3], km.labels[4]);
        assert_ne!(km.labels[0], km.labels[3]);

        // Brute force over every 2-partition.
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << pts.len()) - 1 {
            let mut inertia = 0.0;
            for side in [true, false] {
                let members: Vec<&Vec<f64>> =
                    pts.iter().enumerate().filter(|(i, _)| (mask >> i & 1 == 1) == side).map(|(_, p)| p).collect();
                let c: Vec<f64> =
                    (0..2).map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64).collect();
                inertia += members.iter().map(|p| squared_distance(p, &c)).sum::<f64>();
            }
            best = best.min(inertia);
        }
        assert!((km.inertia - best).abs() < 1e-12);
        // Both groups are mirror images, so inertia is twice one within-group sum.
        let group = [[1.0, 0.1], [1.0, -0.1], [0.9, 0.0]];
        let cx = (1.0 + 1.0 + 0.9) / 3.0;
        let within: f64 = group.iter().map(|p| (p[0] - cx) * (p[0] - cx) + p[1] * p[1]).sum();
        assert!((km.inertia - 2.0 * within).abs() < 1e-12);
    }

    #[test]
    fn identical_points_have_zero_inertia() {
        let pts = vec![vec![0.5, 0.5]; 10];
        let km = kmeans(&pts, &KMeansConfig::new(3, 1)).unwrap();
        assert_eq!(km.inertia, 0.0);
        assert!(km.labels.iter().all(|&l| l == km.labels[0]));
    }

    #[test]
    fn seeded_runs_repeat() {
        let pts = blobs(&[vec![0.0, 0.0], vec![3.0, 3.0], vec![0.0, 4.0]], 30, 1.0, 5);
        let a = kmeans(&pts, &KMeansConfig::new(3, 99)).unwrap();
        let b = kmeans(&pts, &KMeansConfig::new(3, 99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert_eq!(kmeans(&pts, &KMeansConfig::new(3, 0)), Err(ClusterError::TooFewPoints { k: 3, n: 2 }));
        assert_eq!(kmeans(&pts, &KMeansConfig::new(1, 0)), Err(ClusterError::InvalidK { k: 1 }));
        let ragged = vec![vec![0.0], vec![1.0, 2.0]];
        assert!(matches!(kmeans(&ragged, &KMeansConfig::new(2, 0)), Err(ClusterError::DimensionMismatch { .. })));
    }

    #[test]
    fn silhouette_matches_hand_computation() {
        // 1-D points 0, 1 | 10: a(0)=1, b(0)=10 → 0.9; a(1)=1, b(1)=9 → 8/9; singleton → 0.
        let pts = vec![vec![0.0], vec![1.0], vec![10.0]];
        let s = silhouette_score(&DistanceMatrix::new(&pts), &[0, 0, 1]).unwrap();
        assert!((s - (0.9 + 8.0 / 9.0) / 3.0).abs() < 1e-12);
        assert_eq!(silhouette_score(&DistanceMatrix::new(&pts), &[0, 0, 0]), None);
    }

    #[test]
    fn silhouette_separated_vs_split_blob() {
        let far = blobs(&[vec![0.0, 0.0], vec![100.0, 0.0]], 50, 1.0, 3);
        let labels: Vec<usize> = (0..100).map(|i| i / 50).collect();
        assert!(silhouette_score(&DistanceMatrix::new(&far), &labels).unwrap() > 0.95);

        let one = blobs(&[vec![0.0, 0.0]], 200, 1.0, 4);
        let km = kmeans(&one, &KMeansConfig::new(2, 4)).unwrap();
        assert!(silhouette_score(&DistanceMatrix::new(&one), &km.labels).unwrap() < 0.5);
    }

    #[test]
    fn select_k_finds_two_blobs() {
        let pts = blobs(&[vec![0.0; 4], vec![10.0; 4]], 40, 1.0, 11);
        let config = SelectKConfig { k_max: 6, ..SelectKConfig::default() };
        assert_eq!(select_k(&pts, &config).unwrap().best_k, 2);
    }

    #[test]
    fn select_k_finds_eight_blobs() {
        let centers: Vec<Vec<f64>> =
            (0..8).map(|c| (0..8).map(|d| if d == c { 10.0 } else { 0.0 }).collect()).collect();
        let pts = blobs(&centers, 40, 1.0, 8);
        let sel = select_k(&pts, &SelectKConfig { k_max: 12, ..SelectKConfig::default() }).unwrap();
        assert_eq!(sel.best_k, 8);
        assert_eq!(sel.clustering.labels.len(), pts.len());
    }

    #[test]
    fn select_k_subsamples_large_inputs() {
        let pts = blobs(&[vec![0.0, 0.0], vec![20.0, 0.0], vec![0.0, 20.0]], 100, 1.0, 2);
        let config = SelectKConfig { k_max: 5, max_sample: 60, n_init: 3, ..SelectKConfig::default() };
        let sel = select_k(&pts, &config).unwrap();
        assert_eq!(sel.sample_size, 60);
        assert_eq!(sel.best_k, 3);
    }

    #[test]
    fn select_k_rejects_degenerate_input() {
        let pts = vec![vec![1.0, 1.0]; 20];
        assert_eq!(select_k(&pts, &SelectKConfig::default()), Err(ClusterError::Degenerate));
        assert_eq!(select_k(&pts[..10], &SelectKConfig::default()), Err(ClusterError::TooFewPoints { k: 15, n: 10 }));
    }

    #[test]
    fn condensed_indexing() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![(i * i) as f64]).collect();
        let m = DistanceMatrix::new(&pts);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m.get(i, j), ((i * i) as f64 - (j * j) as f64).abs());
            }
        }
    }

    proptest! {
        #[test]
        fn inertia_never_increases_and_result_is_fixed_point(
            seed in 0u64..1000,
            raw in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 6..40),
            k in 2usize..5,
        ) {
            let pts: Vec<Vec<f64>> = raw.iter().map(|&(x, y)| vec![x, y]).collect();
            prop_assume!(pts.len() >= k);
            let km = kmeans(&pts, &KMeansConfig { k, seed, max_iter: 300, n_init: 2 }).unwrap();
            for w in km.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
            for (p, &l) in pts.iter().zip(&km.labels) {
                let (j, _) = nearest(p, &km.centroids);
                prop_assert_eq!(j, l);
            }
        }
    }
}
