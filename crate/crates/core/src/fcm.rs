//! Fuzzy c-means by alternating optimization, seeded from the best of several
//! k-means runs.
//!
//! Data matrices are `n × d` with one point per row. Memberships are stored
//! `c × n` (cluster-major), so every column is one point's membership vector.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Distances below this are treated as coincident with a centroid.
pub const COINCIDENCE_DISTANCE: f64 = 1e-12;
/// Lloyd iteration cap for each k-means run.
pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FcmConfig {
    /// Number of clusters `c`.
    pub clusters: usize,
    /// Fuzzification constant `f > 1`.
    pub fuzzifier: f64,
    /// Maximum number of alternating iterations `T`.
    pub max_iter: usize,
    /// Stop once the Frobenius norm of the membership change drops below this.
    pub eps: f64,
    pub seed: u64,
    /// Number of k-means restarts used to initialize the centroids.
    pub init_runs: usize,
}

impl Default for FcmConfig {
    fn default() -> Self {
        FcmConfig {
            clusters: 10,
            fuzzifier: 1.1,
            max_iter: 1000,
            eps: 0.005,
            seed: 0,
            init_runs: 10,
        }
    }
}

impl FcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters < 1 {
            return Err(Error::InvalidConfig("clusters must be at least 1".into()));
        }
        check_fuzzifier(self.fuzzifier)?;
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::InvalidConfig(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.init_runs < 1 {
            return Err(Error::InvalidConfig("init_runs must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_fuzzifier(f: f64) -> Result<()> {
    if f > 1.0 && f.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidFuzzifier(f))
    }
}

/// `c × n` membership degrees; entry `(i, k)` is the membership of point `k` in cluster `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix(Array2<f64>);

impl MembershipMatrix {
    pub fn new(values: Array2<f64>) -> Self {
        MembershipMatrix(values)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn n_clusters(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.0.ncols()
    }

    /// Index of the largest membership of every point (lowest index on ties).
    pub fn hard_labels(&self) -> Vec<usize> {
        self.0
            .columns()
            .into_iter()
            .map(|col| argmax(col.iter().copied()))
            .collect()
    }
}

/// `c × d` cluster centers, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids(Array2<f64>);

impl Centroids {
    pub fn new(values: Array2<f64>) -> Self {
        Centroids(values)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn n_clusters(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct FcmResult {
    pub memberships: MembershipMatrix,
    pub centroids: Centroids,
    /// Objective value after each iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_finite(x: ArrayView2<f64>) -> Result<()> {
    for ((row, col), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFiniteInput { row, col });
        }
    }
    Ok(())
}

fn check_dims(x: ArrayView2<f64>, centroids: &Centroids) -> Result<()> {
    if centroids.dim() != x.ncols() {
        return Err(Error::DimensionMismatch {
            context: "centroid dimension",
            expected: x.ncols(),
            found: centroids.dim(),
        });
    }
    Ok(())
}

/// Squared distances, `c × n`.
fn squared_distances(x: ArrayView2<f64>, centroids: ArrayView2<f64>) -> Array2<f64> {
    let x = x.as_standard_layout();
    let q = centroids.as_standard_layout();
    let mut out = Array2::zeros((q.nrows(), x.nrows()));
    for (i, qi) in q.rows().into_iter().enumerate() {
        let qi = qi.as_slice().expect("standard layout");
        for (k, xk) in x.rows().into_iter().enumerate() {
            out[[i, k]] = sq_dist(xk.as_slice().expect("standard layout"), qi);
        }
    }
    out
}

/// Result of a single k-means run.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Centroids,
    /// Cluster of each point, in the caller's row order.
    pub labels: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub sse: f64,
    pub iterations: usize,
}

/// Row order sorted lexicographically by coordinates, so that seeding and
/// accumulation depend only on the multiset of points.
fn canonical_order(x: ArrayView2<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b).iter())
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn kmeans_plus_plus<R: Rng>(points: &[Vec<f64>], c: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut min_d: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < c {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in min_d.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let center = points[pick].clone();
        for (d, p) in min_d.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &center));
        }
        centers.push(center);
    }
    centers
}

/// One run of Lloyd's algorithm from k-means++ seeds drawn from `rng`.
/// Centers, labels, SSE and iteration count of one Lloyd run.
type LloydRun = (Vec<Vec<f64>>, Vec<usize>, f64, usize);

fn lloyd<R: Rng>(points: &[Vec<f64>], c: usize, rng: &mut R) -> LloydRun {
    let n = points.len();
    let d = points[0].len();
    let mut centers = kmeans_plus_plus(points, c, rng);
    let mut labels = vec![usize::MAX; n];
    let mut iterations = 0;
    for iter in 0..KMEANS_MAX_ITER {
        iterations = iter + 1;
        let mut changed = false;
        for (label, p) in labels.iter_mut().zip(points) {
            let (best, _) = nearest(p, &centers);
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; c];
        let mut counts = vec![0usize; c];
        for (&label, p) in labels.iter().zip(points) {
            counts[label] += 1;
            for (s, v) in sums[label].iter_mut().zip(p) {
                *s += v;
            }
        }
        for i in 0..c {
            if counts[i] > 0 {
                centers[i] = sums[i].iter().map(|s| s / counts[i] as f64).collect();
            }
        }
        // Reseed empty clusters at the point farthest from its nearest center.
        for i in 0..c {
            if counts[i] == 0 {
                let (far, _) = points
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (k, nearest(p, &centers).1))
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
                centers[i] = points[far].clone();
                counts[i] = 1;
            }
        }
    }
    // Final assignment against the final centers.
    let mut sse = 0.0;
    for (label, p) in labels.iter_mut().zip(points) {
        let (best, dist) = nearest(p, &centers);
        *label = best;
        sse += dist;
    }
    (centers, labels, sse, iterations)
}

/// Best of `runs` k-means runs (k-means++ seeding, Lloyd iterations) by
/// within-cluster sum of squares.
pub fn kmeans(x: ArrayView2<f64>, c: usize, runs: usize, seed: u64) -> Result<KMeansFit> {
    let n = x.nrows();
    if c < 1 {
        return Err(Error::InvalidConfig("clusters must be at least 1".into()));
    }
    if runs < 1 {
        return Err(Error::InvalidConfig("init_runs must be at least 1".into()));
    }
    if n < c {
        return Err(Error::TooFewPoints { points: n, clusters: c });
    }
    check_finite(x)?;
    let order = canonical_order(x);
    let points: Vec<Vec<f64>> = order.iter().map(|&k| x.row(k).to_vec()).collect();
    let mut rng = rng_from_seed(seed);
    let mut best: Option<LloydRun> = None;
    for _ in 0..runs {
        let run = lloyd(&points, c, &mut rng);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (centers, canon_labels, sse, iterations) = best.expect("runs >= 1");
    let mut labels = vec![0; n];
    for (pos, &k) in order.iter().enumerate() {
        labels[k] = canon_labels[pos];
    }
    let d = x.ncols();
    let flat: Vec<f64> = centers.into_iter().flatten().collect();
    let centroids = Array2::from_shape_vec((c, d), flat).expect("c × d centers");
    Ok(KMeansFit {
        centroids: Centroids(centroids),
        labels,
        sse,
        iterations,
    })
}

/// Initial centroids for FCM: the best of `runs` k-means runs.
pub fn kmeans_init(x: ArrayView2<f64>, c: usize, runs: usize, seed: u64) -> Result<Centroids> {
    Ok(kmeans(x, c, runs, seed)?.centroids)
}

/// Membership update with the centroids held fixed.
///
/// `m_ik = 1 / Σ_j (‖x_k − q_i‖ / ‖x_k − q_j‖)^(2/(f−1))`, evaluated as a
/// softmax of `−ln‖x_k − q_i‖² / (f − 1)` so that large exponents (f near 1)
/// neither overflow nor underflow. A point coinciding with one or more
/// centroids splits its membership uniformly over them.
pub fn update_memberships(x: ArrayView2<f64>, centroids: &Centroids, f: f64) -> Result<MembershipMatrix> {
    check_fuzzifier(f)?;
    check_dims(x, centroids)?;
    let exponent = 1.0 / (f - 1.0);
    let coincident = COINCIDENCE_DISTANCE * COINCIDENCE_DISTANCE;
    let mut m = squared_distances(x, centroids.values().view());
    for mut col in m.columns_mut() {
        let n_zero = col.iter().filter(|&&d| d < coincident).count();
        if n_zero > 0 {
            let share = 1.0 / n_zero as f64;
            col.mapv_inplace(|d| if d < coincident { share } else { 0.0 });
            continue;
        }
        col.mapv_inplace(|d| -exponent * d.ln());
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        col.mapv_inplace(|l| (l - max).exp());
        let total: f64 = col.sum();
        col.mapv_inplace(|e| e / total);
    }
    Ok(MembershipMatrix(m))
}

/// Centroid update with the memberships held fixed: `q_i = Σ_k m_ik^f x_k / Σ_k m_ik^f`.
pub fn update_centroids(x: ArrayView2<f64>, memberships: &MembershipMatrix, f: f64) -> Result<Centroids> {
    check_fuzzifier(f)?;
    if memberships.n_points() != x.nrows() {
        return Err(Error::DimensionMismatch {
            context: "membership columns",
            expected: x.nrows(),
            found: memberships.n_points(),
        });
    }
    let weights = memberships.values().mapv(|m| m.powf(f));
    let mut q = weights.dot(&x);
    for (i, (mut row, w)) in q.rows_mut().into_iter().zip(weights.rows()).enumerate() {
        let total = w.sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::EmptyCluster(i));
        }
        row.mapv_inplace(|v| v / total);
    }
    Ok(Centroids(q))
}

/// `J = Σ_i Σ_k m_ik^f ‖x_k − q_i‖²`.
pub fn objective(x: ArrayView2<f64>, memberships: &MembershipMatrix, centroids: &Centroids, f: f64) -> f64 {
    let d2 = squared_distances(x, centroids.values().view());
    memberships
        .values()
        .iter()
        .zip(d2.iter())
        .map(|(m, d)| m.powf(f) * d)
        .sum()
}

/// Fuzzy c-means. Alternates membership and centroid updates from `init` (or
/// from [`kmeans_init`] when absent) until `max_iter` iterations have run or
/// the membership change `‖Mᵗ − Mᵗ⁻¹‖_F` falls below `eps`. The change is
/// first checked at the second iteration.
pub fn fcm_fit(x: ArrayView2<f64>, config: &FcmConfig, init: Option<&Centroids>) -> Result<FcmResult> {
    config.validate()?;
    let c = config.clusters;
    if x.nrows() < c {
        return Err(Error::TooFewPoints {
            points: x.nrows(),
            clusters: c,
        });
    }
    check_finite(x)?;
    let mut centroids = match init {
        Some(q) => {
            check_dims(x, q)?;
            if q.n_clusters() != c {
                return Err(Error::DimensionMismatch {
                    context: "initial centroid count",
                    expected: c,
                    found: q.n_clusters(),
                });
            }
            q.clone()
        }
        None => kmeans_init(x, c, config.init_runs, config.seed)?,
    };
    let f = config.fuzzifier;
    let mut previous: Option<MembershipMatrix> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let memberships = update_memberships(x, &centroids, f)?;
        centroids = update_centroids(x, &memberships, f)?;
        trace.push(objective(x, &memberships, &centroids, f));
        let change = previous
            .as_ref()
            .map(|prev| frobenius_distance(prev.values(), memberships.values()));
        previous = Some(memberships);
        if change.is_some_and(|delta| delta < config.eps) {
            converged = true;
            break;
        }
    }
    Ok(FcmResult {
        memberships: previous.expect("at least one iteration"),
        centroids,
        objective_trace: trace,
        iterations,
        converged,
    })
}

pub fn frobenius_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

/// Column sums of a membership matrix (each should be 1).
pub fn column_sums(m: &MembershipMatrix) -> Vec<f64> {
    m.values().sum_axis(Axis(0)).to_vec()
}
