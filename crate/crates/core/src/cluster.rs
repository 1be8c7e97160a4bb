//! Row-normalized k-means over node embeddings, run snapshot by snapshot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabelMatrix;

/// Dense row-major point set. For temporal embeddings row `t * n + i` holds
/// node `i` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Embedding {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                expected: rows * dim,
                got: data.len(),
            });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows `start..start + len` as a new embedding.
    pub fn block(&self, start: usize, len: usize) -> Embedding {
        Embedding {
            rows: len,
            dim: self.dim,
            data: self.data[start * self.dim..(start + len) * self.dim].to_vec(),
        }
    }
}

/// Scales every row to unit length. All-zero rows stay zero; their count is
/// returned.
pub fn row_normalize(x: &mut Embedding) -> usize {
    let mut zero = 0;
    let dim = x.dim;
    for row in x.data.chunks_exact_mut(dim.max(1)) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        } else {
            zero += 1;
        }
    }
    zero
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Outcome of one Lloyd run.
#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub labels: Vec<usize>,
    /// Row-major `k x dim`.
    pub centroids: Vec<f64>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub history: Vec<f64>,
}

pub const MAX_ITER: usize = 300;
/// Convergence tolerance on the summed squared centroid shift, relative to
/// the mean per-coordinate variance of the data. A fixed absolute tolerance
/// makes the iteration count grow with n on overlapping clusters.
pub const RELATIVE_TOL: f64 = 1e-4;

fn mean_variance(x: &Embedding) -> f64 {
    let (n, d) = (x.rows, x.dim);
    let mut mean = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for i in 0..n {
        for (j, v) in x.row(i).iter().enumerate() {
            mean[j] += v;
            sq[j] += v * v;
        }
    }
    let nf = n as f64;
    (0..d).map(|j| (sq[j] / nf - (mean[j] / nf).powi(2)).max(0.0)).sum::<f64>() / d as f64
}

/// k-means++ seeding.
pub fn kmeans_plus_plus(x: &Embedding, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (n, d) = (x.rows, x.dim);
    let mut centroids = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(x.row(first));
    let mut best: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(first))).collect();
    for _ in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, w) in best.iter().enumerate() {
                acc += w;
                if acc > u {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = x.row(pick).to_vec();
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(x.row(i), &c));
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}

fn assign(x: &Embedding, centroids: &[f64], k: usize, labels: &mut [usize], dist: &mut [f64]) -> f64 {
    let d = x.dim;
    let mut inertia = 0.0;
    for i in 0..x.rows {
        let p = x.row(i);
        let (mut bl, mut bd) = (0, f64::INFINITY);
        for c in 0..k {
            let dd = sq_dist(p, &centroids[c * d..(c + 1) * d]);
            if dd < bd {
                bd = dd;
                bl = c;
            }
        }
        labels[i] = bl;
        dist[i] = bd;
        inertia += bd;
    }
    inertia
}

/// Lloyd iterations from the given centroids, stopping when the labels are
/// stable, the centroids move less than [`RELATIVE_TOL`] allows, or after
/// [`MAX_ITER`] rounds. An
/// emptied cluster is re-seeded with the point farthest from its centroid.
pub fn lloyd(x: &Embedding, k: usize, mut centroids: Vec<f64>) -> KMeansRun {
    let (n, d) = (x.rows, x.dim);
    let mut labels = vec![0; n];
    let mut dist = vec![0.0; n];
    let mut history = Vec::new();
    let tol = RELATIVE_TOL * mean_variance(x);
    let mut inertia = assign(x, &centroids, k, &mut labels, &mut dist);
    history.push(inertia);
    for _ in 0..MAX_ITER {
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            sums[c * d..(c + 1) * d].iter_mut().zip(x.row(i)).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n).max_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap_or(0);
                sums[c * d..(c + 1) * d].copy_from_slice(x.row(far));
                dist[far] = 0.0;
            } else {
                sums[c * d..(c + 1) * d].iter_mut().for_each(|s| *s /= counts[c] as f64);
            }
        }
        let shift: f64 = (0..k)
            .map(|c| sq_dist(&sums[c * d..(c + 1) * d], &centroids[c * d..(c + 1) * d]))
            .sum();
        centroids = sums;
        let before = labels.clone();
        inertia = assign(x, &centroids, k, &mut labels, &mut dist);
        history.push(inertia);
        if shift <= tol || labels == before {
            break;
        }
    }
    KMeansRun {
        labels,
        centroids,
        inertia,
        history,
    }
}

/// Rows on which competing restarts are scored. Larger inputs are
/// subsampled for the restarts and only the winner is refined on all rows,
/// since Lloyd's iteration count keeps growing with n on overlapping clusters.
pub const RESTART_SAMPLE: usize = 20_000;

/// Best of `restarts` k-means++ runs.
pub fn kmeans(x: &Embedding, k: usize, restarts: usize, rng: &mut ChaCha8Rng) -> Result<KMeansRun> {
    if k == 0 || k > x.rows {
        return Err(Error::Config(format!("k = {k} with {} points", x.rows)));
    }
    let restarts = restarts.max(1);
    if restarts > 1 && x.rows > RESTART_SAMPLE {
        let mut rows = rand::seq::index::sample(rng, x.rows, RESTART_SAMPLE).into_vec();
        rows.sort_unstable();
        let data = rows.iter().flat_map(|&i| x.row(i).iter().copied()).collect();
        let sample = Embedding::new(rows.len(), x.dim, data)?;
        let best = best_of(&sample, k, restarts, rng);
        return Ok(lloyd(x, k, best.centroids));
    }
    Ok(best_of(x, k, restarts, rng))
}

fn best_of(x: &Embedding, k: usize, restarts: usize, rng: &mut ChaCha8Rng) -> KMeansRun {
    let mut best: Option<KMeansRun> = None;
    for _ in 0..restarts {
        let init = kmeans_plus_plus(x, k, rng);
        let run = lloyd(x, k, init);
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

/// How label identities are kept across snapshots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalSeeding {
    /// Snapshot `t > 0` starts from the centroids of `t - 1`.
    #[default]
    Previous,
    /// Every snapshot is clustered on its own.
    Independent,
}

pub const RESTARTS: usize = 10;

#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub labels: LabelMatrix,
    pub inertia: Vec<f64>,
    pub k: usize,
    /// Row-major `k x dim` centroids per snapshot.
    pub centroids: Vec<Vec<f64>>,
}

/// Relabels `run` so that its clusters line up with `reference` centroids,
/// matching clusters by minimum total centroid distance.
fn align_to(run: &mut KMeansRun, reference: &[f64], k: usize, d: usize) {
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| sq_dist(&run.centroids[a * d..(a + 1) * d], &reference[b * d..(b + 1) * d])).collect())
        .collect();
    let perm = crate::metrics::min_cost_assignment(&cost);
    for l in run.labels.iter_mut() {
        *l = perm[*l];
    }
    let mut centroids = vec![0.0; k * d];
    for a in 0..k {
        centroids[perm[a] * d..(perm[a] + 1) * d].copy_from_slice(&run.centroids[a * d..(a + 1) * d]);
    }
    run.centroids = centroids;
}

/// k-means on the rows of each snapshot (`rows t * n .. (t + 1) * n`).
///
/// Snapshot 0 keeps the best of [`RESTARTS`] k-means++ runs. With
/// [`TemporalSeeding::Previous`] each later snapshot runs once from the
/// previous centroids and once from a k-means++ start; the lower inertia
/// wins, and a winning fresh start is relabeled to match the previous
/// centroids.
pub fn kmeans_per_timestep(x: &Embedding, n: usize, k: usize, seeding: TemporalSeeding, seed: u64) -> Result<ClusterResult> {
    if n == 0 || x.rows % n != 0 {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.rows,
        });
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!("k = {k} with n = {n} nodes")));
    }
    let t_count = x.rows / n;
    let d = x.dim;
    let mut labels = Vec::with_capacity(x.rows);
    let mut inertia = Vec::with_capacity(t_count);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let block = x.block(t * n, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let run = match (seeding, centroids.last()) {
            (TemporalSeeding::Previous, Some(prev)) => {
                let warm = lloyd(&block, k, prev.clone());
                let mut fresh = kmeans(&block, k, 1, &mut rng)?;
                if fresh.inertia < warm.inertia {
                    align_to(&mut fresh, prev, k, d);
                    fresh
                } else {
                    warm
                }
            }
            _ => kmeans(&block, k, RESTARTS, &mut rng)?,
        };
        labels.extend_from_slice(&run.labels);
        inertia.push(run.inertia);
        centroids.push(run.centroids);
    }
    Ok(ClusterResult {
        labels: LabelMatrix::new(n, t_count, k, labels)?,
        inertia,
        k,
        centroids,
    })
}

/// Mean silhouette of a labeling. Points in singleton clusters score 0.
pub fn silhouette(x: &Embedding, labels: &[usize], k: usize) -> f64 {
    let n = x.rows;
    if n < 2 || k < 2 {
        return 0.0;
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.fill(0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += sq_dist(x.row(i), x.row(j)).sqrt();
            }
        }
        let own = labels[i];
        if counts[own] <= 1 {
            continue;
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            total += (b - a) / a.max(b).max(f64::MIN_POSITIVE);
        }
    }
    total / n as f64
}

/// Number of points the silhouette scan looks at; larger sets are
/// subsampled to keep the quadratic cost bounded.
pub const SILHOUETTE_SAMPLE: usize = 2000;

/// Picks `k` in `2..=k_max` maximizing the silhouette of k-means on `x`.
/// Returns the chosen `k` and the score for each candidate.
pub fn select_k_silhouette(x: &Embedding, k_max: usize, seed: u64) -> Result<(usize, Vec<(usize, f64)>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = if x.rows > SILHOUETTE_SAMPLE {
        let mut idx: Vec<usize> = (0..x.rows).collect();
        for i in 0..SILHOUETTE_SAMPLE {
            let j = rng.random_range(i..x.rows);
            idx.swap(i, j);
        }
        idx.truncate(SILHOUETTE_SAMPLE);
        idx.sort_unstable();
        let data = idx.iter().flat_map(|&i| x.row(i).iter().copied()).collect();
        Embedding::new(idx.len(), x.dim, data)?
    } else {
        x.clone()
    };
    let k_max = k_max.min(sample.rows);
    if k_max < 2 {
        return Err(Error::Config("silhouette scan needs at least two points".into()));
    }
    let mut scores = Vec::new();
    let mut best = (2, f64::NEG_INFINITY);
    for k in 2..=k_max {
        let run = kmeans(&sample, k, RESTARTS, &mut rng)?;
        let s = silhouette(&sample, &run.labels, k);
        scores.push((k, s));
        if s > best.1 {
            best = (k, s);
        }
    }
    Ok((best.0, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn emb(rows: &[&[f64]]) -> Embedding {
        let d = rows[0].len();
        Embedding::new(rows.len(), d, rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    #[test]
    fn normalizes_rows() {
        let mut x = emb(&[&[3.0, 4.0], &[0.0, 0.0], &[0.6, 0.8]]);
        assert_eq!(row_normalize(&mut x), 1);
        assert_abs_diff_eq!(x.row(0)[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(x.row(0)[1], 0.8, epsilon = 1e-15);
        assert_eq!(x.row(1), &[0.0, 0.0]);
        assert_abs_diff_eq!(x.row(2)[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(x.row(2)[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn identical_points_share_a_label() {
        let x = Embedding::new(10, 2, vec![1.0; 20]).unwrap();
        let r = kmeans_per_timestep(&x, 10, 3, TemporalSeeding::Previous, 1).unwrap();
        assert_eq!(r.inertia[0], 0.0);
        let first = r.labels.column(0)[0];
        assert!(r.labels.column(0).iter().all(|&l| l == first));
    }

    fn two_gaussians(n: usize, sep: f64, seed: u64) -> (Embedding, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(2 * n);
        let mut truth = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % 2;
            truth.push(c);
            let shift = if c == 0 { 0.0 } else { sep };
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            data.push(shift + a);
            data.push(b);
        }
        (Embedding::new(n, 2, data).unwrap(), truth)
    }

    #[test]
    fn repeated_clouds_keep_identities() {
        let (x, _) = two_gaussians(200, 6.0, 3);
        let mut data = x.as_slice().to_vec();
        data.extend_from_slice(x.as_slice());
        let y = Embedding::new(400, 2, data).unwrap();
        let r = kmeans_per_timestep(&y, 200, 2, TemporalSeeding::Previous, 5).unwrap();
        assert_eq!(r.labels.column(0), r.labels.column(1));
    }

    #[test]
    fn recovers_separated_mixture() {
        let (x, truth) = two_gaussians(1000, 10.0, 11);
        let r = kmeans_per_timestep(&x, 1000, 2, TemporalSeeding::Previous, 2).unwrap();
        let ov = crate::metrics::overlap(&truth, r.labels.column(0), 2).unwrap();
        assert_eq!(ov, 1.0);
    }

    #[test]
    fn inertia_never_increases() {
        for seed in 0..5 {
            let (x, _) = two_gaussians(300, 1.5, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = kmeans_plus_plus(&x, 4, &mut rng);
            let run = lloyd(&x, 4, init);
            for w in run.history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", run.history);
            }
        }
    }

    #[test]
    fn rejects_too_many_clusters() {
        let x = Embedding::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        assert!(kmeans_per_timestep(&x, 3, 4, TemporalSeeding::Previous, 0).is_err());
    }

    #[test]
    fn silhouette_prefers_true_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let centers = [(0.0, 0.0), (8.0, 0.0), (0.0, 8.0)];
        let mut data = Vec::new();
        for i in 0..300 {
            let (cx, cy) = centers[i % 3];
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            data.push(cx + a);
            data.push(cy + b);
        }
        let x = Embedding::new(300, 2, data).unwrap();
        let (k, scores) = select_k_silhouette(&x, 6, 1).unwrap();
        assert_eq!(k, 3, "{scores:?}");
    }

    #[test]
    fn silhouette_of_perfect_split_is_high() {
        let x = emb(&[&[0.0], &[0.1], &[10.0], &[10.1]]);
        let s = silhouette(&x, &[0, 0, 1, 1], 2);
        assert!(s > 0.98);
    }
}
