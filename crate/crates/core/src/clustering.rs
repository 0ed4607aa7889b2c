//! K-means decomposition of style features into sub-styles.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_io::FeatureMatrix;
use crate::matching::{distance_table, Metric};

pub const DEFAULT_MAX_ITERS: usize = 300;

/// Cluster centers plus the assignment of every style feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    /// `C x K`, column `k` is the center of cluster `k`.
    pub centers: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub counts: Vec<usize>,
    /// Sum of squared distances to the assigned center, one entry per
    /// Lloyd iteration.
    pub objective_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    k: usize,
    centers: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centers.ncols()
    }

    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }

    pub fn center(&self, k: usize) -> &[f64] {
        let c = self.centers.nrows();
        &self.centers.as_slice()[k * c..(k + 1) * c]
    }

    /// `{"k": K, "centers": [[..C..] x K], "labels": [...]}`
    pub fn to_json(&self) -> String {
        let sidecar = Sidecar {
            k: self.k(),
            centers: (0..self.k()).map(|k| self.center(k).to_vec()).collect(),
            labels: self.labels.clone(),
        };
        serde_json::to_string(&sidecar).expect("sidecar is plain data")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Sidecar =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("cluster json: {e}")))?;
        if s.k == 0 || s.centers.len() != s.k {
            return Err(Error::Format(format!(
                "k = {} but {} centers listed",
                s.k,
                s.centers.len()
            )));
        }
        let c = s.centers[0].len();
        if c == 0 || s.centers.iter().any(|v| v.len() != c) {
            return Err(Error::Format("centers must share a positive length".into()));
        }
        if s.centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite cluster center".into()));
        }
        let mut counts = vec![0; s.k];
        for &l in &s.labels {
            if l >= s.k {
                return Err(Error::Data(format!("label {l} out of range for k = {}", s.k)));
            }
            counts[l] += 1;
        }
        let centers = DMatrix::from_fn(c, s.k, |i, j| s.centers[j][i]);
        Ok(ClusterModel {
            centers,
            labels: s.labels,
            counts,
            objective_history: Vec::new(),
        })
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Labels each feature vector with its nearest center under `metric`,
/// ties going to the smallest label.
pub fn assign_nearest(
    features: &FeatureMatrix,
    centers: &DMatrix<f64>,
    metric: Metric,
) -> Result<Vec<usize>> {
    Ok(distance_table(features, centers, metric)?.argmin_labels())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn column(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let c = m.nrows();
    &m.as_slice()[j * c..(j + 1) * c]
}

/// Nearest center by squared Euclidean distance, with that distance.
fn nearest_sq(features: &FeatureMatrix, centers: &DMatrix<f64>) -> Vec<(usize, f64)> {
    (0..features.columns())
        .into_par_iter()
        .map(|p| {
            let x = features.column(p);
            let mut best = (0, sq_dist(x, column(centers, 0)));
            for k in 1..centers.ncols() {
                let d = sq_dist(x, column(centers, k));
                if d < best.1 {
                    best = (k, d);
                }
            }
            best
        })
        .collect()
}

fn kmeans_plus_plus(features: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = features.columns();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .map(|p| sq_dist(features.column(p), features.column(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (p, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(p);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // every point coincides with a chosen center
            let rest: Vec<usize> = (0..n).filter(|p| !chosen.contains(p)).collect();
            rest[rng.gen_range(0..rest.len())]
        };
        chosen.push(next);
        for (p, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(features.column(p), features.column(next)));
        }
    }
    features.select(&chosen).into_matrix()
}

/// Gives every empty cluster the point farthest from its own center, taken
/// from a cluster that can spare it.
fn repair_empty(labels: &mut [usize], dist: &mut [f64], k: usize) {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut far: Option<usize> = None;
        for p in 0..labels.len() {
            if counts[labels[p]] > 1 && far.is_none_or(|f| dist[p] > dist[f]) {
                far = Some(p);
            }
        }
        let p = far.expect("n >= k guarantees a cluster with two members");
        counts[labels[p]] -= 1;
        counts[empty] = 1;
        labels[p] = empty;
        dist[p] = 0.0;
    }
}

/// Running means keep a cluster of identical points exactly at that point.
fn cluster_means(features: &FeatureMatrix, labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut means = DMatrix::zeros(features.channels(), k);
    let mut seen = vec![0usize; k];
    for (p, &l) in labels.iter().enumerate() {
        seen[l] += 1;
        let inv = 1.0 / seen[l] as f64;
        let mut col = means.column_mut(l);
        for (m, x) in col.iter_mut().zip(features.column(p)) {
            *m += (x - *m) * inv;
        }
    }
    means
}

fn objective(features: &FeatureMatrix, centers: &DMatrix<f64>, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(p, &l)| sq_dist(features.column(p), column(centers, l)))
        .sum()
}

/// Lloyd's algorithm with k-means++ seeding; deterministic for a given seed.
///
/// Stops when an assignment step leaves every label unchanged or after
/// `max_iters` center updates.
pub fn kmeans_fit(
    features: &FeatureMatrix,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterModel> {
    let n = features.columns();
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::NotEnoughPoints { k, points: n });
    }
    if features.matrix().iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite feature value".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = kmeans_plus_plus(features, k, &mut rng);
    let (mut labels, mut dist): (Vec<usize>, Vec<f64>) =
        nearest_sq(features, &seeds).into_iter().unzip();
    repair_empty(&mut labels, &mut dist, k);

    let mut history = Vec::new();
    let mut iteration = 0;
    let centers = loop {
        let centers = cluster_means(features, &labels, k);
        history.push(objective(features, &centers, &labels));
        iteration += 1;
        if iteration >= max_iters.max(1) {
            break centers;
        }
        let (mut next, mut dist): (Vec<usize>, Vec<f64>) =
            nearest_sq(features, &centers).into_iter().unzip();
        repair_empty(&mut next, &mut dist, k);
        if next == labels {
            break centers;
        }
        labels = next;
    };

    let mut counts = vec![0; k];
    for &l in &labels {
        counts[l] += 1;
    }
    Ok(ClusterModel {
        centers,
        labels,
        counts,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(cols: &[&[f64]]) -> FeatureMatrix {
        let c = cols[0].len();
        FeatureMatrix::from_columns(c, &cols.iter().map(|v| v.to_vec()).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn identical_points_single_cluster() {
        let p: &[f64] = &[0.1, 0.2, 0.3];
        let f = points(&[p; 6]);
        let m = kmeans_fit(&f, 1, 0, 300).unwrap();
        assert_eq!(m.center(0), &[0.1, 0.2, 0.3]);
        assert_eq!(m.objective(), 0.0);
        assert_eq!(m.counts, vec![6]);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let f = points(&[&[0.0, 1.0], &[5.0, 5.0], &[-3.0, 2.0], &[9.0, -1.0]]);
        let m = kmeans_fit(&f, 4, 11, 300).unwrap();
        assert_eq!(m.objective(), 0.0);
        assert_eq!(m.counts, vec![1; 4]);
        for (p, &l) in m.labels.iter().enumerate() {
            assert_eq!(m.center(l), f.column(p));
        }
    }

    #[test]
    fn more_clusters_than_distinct_points() {
        let f = points(&[&[1.0], &[1.0], &[1.0], &[2.0]]);
        let m = kmeans_fit(&f, 3, 3, 300).unwrap();
        assert!(m.counts.iter().all(|&c| c >= 1));
        assert_eq!(m.counts.iter().sum::<usize>(), 4);
        assert_eq!(m.objective(), 0.0);
    }

    #[test]
    fn argument_errors() {
        let f = points(&[&[1.0], &[2.0]]);
        assert!(matches!(kmeans_fit(&f, 0, 0, 10), Err(Error::Argument(_))));
        assert!(matches!(
            kmeans_fit(&f, 3, 0, 10),
            Err(Error::NotEnoughPoints { k: 3, points: 2 })
        ));
    }

    #[test]
    fn assign_nearest_exact_and_tie() {
        let centers = DMatrix::from_column_slice(2, 3, &[0.0, 0.0, 4.0, 0.0, 0.0, 4.0]);
        let f = points(&[&[0.0, 4.0], &[2.0, 0.0]]);
        let labels = assign_nearest(&f, &centers, Metric::Euclidean).unwrap();
        assert_eq!(labels, vec![2, 0]);
        let cos_centers = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let diag = points(&[&[1.0, 1.0]]);
        assert_eq!(assign_nearest(&diag, &cos_centers, Metric::Cosine).unwrap(), vec![0]);
    }

    #[test]
    fn sidecar_round_trip_is_exact() {
        let f = points(&[&[0.1, 0.7], &[0.3, 0.2], &[5.0, 5.5], &[5.1, 4.9]]);
        let m = kmeans_fit(&f, 2, 5, 300).unwrap();
        let json = m.to_json();
        assert!(json.starts_with("{\"k\":2,\"centers\":[["));
        let back = ClusterModel::from_json(&json).unwrap();
        assert_eq!(back.centers, m.centers);
        assert_eq!(back.labels, m.labels);
        assert_eq!(back.counts, m.counts);
        assert!(ClusterModel::from_json("{\"k\":2,\"centers\":[[1.0]],\"labels\":[]}").is_err());
    }
}
