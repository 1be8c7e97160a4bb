//! Overlap, modularity and degree-based parameter estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LabelMatrix, Snapshot, TemporalGraph};

/// Hungarian algorithm on a square cost matrix. Returns `perm` with row `i`
/// assigned to column `perm[i]`, minimizing the total cost.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let k = cost.len();
    // Potentials and matching are 1-based; index 0 is a virtual column.
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut matched_row = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; k];
    for j in 1..=k {
        if matched_row[j] > 0 {
            perm[matched_row[j] - 1] = j - 1;
        }
    }
    perm
}

/// `counts[e][t]`: nodes with estimated label `e` and true label `t`.
fn confusion(truth: &[usize], est: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    if truth.len() != est.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: est.len(),
        });
    }
    let mut counts = vec![vec![0usize; k]; k];
    for (&t, &e) in truth.iter().zip(est) {
        if t >= k || e >= k {
            return Err(Error::Bounds(format!("label {} not below k = {k}", t.max(e))));
        }
        counts[e][t] += 1;
    }
    Ok(counts)
}

/// Relabeling of estimated classes maximizing agreement with the truth.
fn best_relabeling(counts: &[Vec<usize>]) -> Vec<usize> {
    let cost: Vec<Vec<f64>> = counts.iter().map(|row| row.iter().map(|&c| -(c as f64)).collect()).collect();
    min_cost_assignment(&cost)
}

fn rescale(accuracy: f64, k: usize) -> f64 {
    let chance = 1.0 / k as f64;
    (accuracy - chance) / (1.0 - chance)
}

/// Chance-corrected agreement `(acc - 1/k) / (1 - 1/k)`, maximized over
/// relabelings of `est`. Labels are `0..k`.
pub fn overlap(truth: &[usize], est: &[usize], k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Config("overlap needs k >= 2".into()));
    }
    if truth.is_empty() {
        return Err(Error::Config("overlap of empty label vectors".into()));
    }
    let counts = confusion(truth, est, k)?;
    let perm = best_relabeling(&counts);
    let hits: usize = (0..k).map(|e| counts[e][perm[e]]).sum();
    Ok(rescale(hits as f64 / truth.len() as f64, k))
}

/// Largest `k` accepted by [`overlap_brute_force`].
pub const BRUTE_FORCE_MAX_K: usize = 20;

/// [`overlap`] by enumerating all `k!` relabelings.
pub fn overlap_brute_force(truth: &[usize], est: &[usize], k: usize) -> Result<f64> {
    if k > BRUTE_FORCE_MAX_K {
        return Err(Error::Config(format!("brute force over {k}! relabelings refused")));
    }
    if k < 2 || truth.is_empty() {
        return Err(Error::Config("overlap needs k >= 2 and labels".into()));
    }
    let counts = confusion(truth, est, k)?;
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0;
    // Heap's algorithm.
    let mut c = vec![0usize; k];
    let score = |p: &[usize]| (0..k).map(|e| counts[e][p[e]]).sum::<usize>();
    best = best.max(score(&perm));
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.max(score(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(rescale(best as f64 / truth.len() as f64, k))
}

/// Overlap restricted to each true class, using the relabeling that is
/// optimal for the whole vector. `None` marks an empty class.
pub fn overlap_per_class(truth: &[usize], est: &[usize], k: usize) -> Result<Vec<Option<f64>>> {
    if k < 2 {
        return Err(Error::Config("overlap needs k >= 2".into()));
    }
    let counts = confusion(truth, est, k)?;
    let perm = best_relabeling(&counts);
    let mut size = vec![0usize; k];
    let mut hits = vec![0usize; k];
    for (&t, &e) in truth.iter().zip(est) {
        size[t] += 1;
        if perm[e] == t {
            hits[t] += 1;
        }
    }
    Ok((0..k)
        .map(|t| (size[t] > 0).then(|| rescale(hits[t] as f64 / size[t] as f64, k)))
        .collect())
}

/// Newman modularity of one snapshot under `labels`.
pub fn modularity(snap: &Snapshot, labels: &[usize]) -> Result<f64> {
    let m = snap.num_edges();
    if m == 0 {
        return Err(Error::EmptyGraph);
    }
    if labels.len() != snap.n() {
        return Err(Error::DimensionMismatch {
            expected: snap.n(),
            got: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |&x| x + 1);
    let mut inside = vec![0usize; k];
    let mut volume = vec![0usize; k];
    for &(i, j) in snap.edges() {
        if labels[i] == labels[j] {
            inside[labels[i]] += 1;
        }
    }
    for i in 0..snap.n() {
        volume[labels[i]] += snap.degree(i);
    }
    let two_m = 2.0 * m as f64;
    Ok((0..k)
        .map(|c| inside[c] as f64 / m as f64 - (volume[c] as f64 / two_m).powi(2))
        .sum())
}

/// Degree statistics and, given labels, class-structure estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    /// Mean degree over all nodes and snapshots.
    pub c_hat: f64,
    /// `mean(d^2) / c_hat^2`.
    pub phi_hat: f64,
    /// `k` times the mean number of same-label neighbors.
    pub c_in_hat: Option<f64>,
    /// `(c_in_hat - c_hat) / sqrt(c_hat) * sqrt(phi_hat)`.
    pub alpha_hat: Option<f64>,
    /// Label persistence inverted from the fraction of labels kept between
    /// consecutive snapshots, clamped to `[0, 1]`.
    pub eta_hat: Option<f64>,
}

pub fn estimate_parameters(g: &TemporalGraph, labels: Option<&LabelMatrix>) -> Result<EstimatorReport> {
    let (n, t_count) = (g.n(), g.num_snapshots());
    let slots = (n * t_count) as f64;
    let degrees = g.degree_sequence();
    let sum: f64 = degrees.as_slice().iter().map(|&d| d as f64).sum();
    let sum_sq: f64 = degrees.as_slice().iter().map(|&d| (d * d) as f64).sum();
    let c_hat = sum / slots;
    let phi_hat = if c_hat > 0.0 { sum_sq / (slots * c_hat * c_hat) } else { f64::NAN };
    let mut report = EstimatorReport {
        c_hat,
        phi_hat,
        c_in_hat: None,
        alpha_hat: None,
        eta_hat: None,
    };
    let Some(labels) = labels else {
        return Ok(report);
    };
    if !labels.matches(g) {
        return Err(Error::DimensionMismatch {
            expected: n * t_count,
            got: labels.n() * labels.num_snapshots(),
        });
    }
    let k = labels.k();
    let mut same = 0usize;
    for t in 0..t_count {
        let col = labels.column(t);
        same += g.snapshot(t).edges().iter().filter(|&&(i, j)| col[i] == col[j]).count();
    }
    // Each undirected edge counts for both endpoints.
    let c_in = k as f64 * 2.0 * same as f64 / slots;
    report.c_in_hat = Some(c_in);
    if c_hat > 0.0 {
        report.alpha_hat = Some((c_in - c_hat) / c_hat.sqrt() * phi_hat.sqrt());
    }
    if t_count >= 2 && k >= 2 {
        let mut kept = 0usize;
        for t in 1..t_count {
            kept += labels.column(t).iter().zip(labels.column(t - 1)).filter(|(a, b)| a == b).count();
        }
        let f = kept as f64 / (n * (t_count - 1)) as f64;
        let chance = 1.0 / k as f64;
        report.eta_hat = Some(((f - chance) / (1.0 - chance)).clamp(0.0, 1.0));
    }
    Ok(report)
}
