//! Dynamical degree-corrected stochastic block model.
//!
//! Labels follow a Markov chain: each node keeps its class with probability
//! `eta`, otherwise it redraws a class from `pi` (possibly the same one).
//! Given labels, every snapshot has independent edges with probability
//! `min(1, theta_i theta_j C[l_i][l_j] / n)`. With edge persistence `tau > 0`
//! each pair copies its previous state with probability `tau` and is
//! resampled otherwise.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::graph::{LabelMatrix, Snapshot, TemporalGraph};

/// Largest `n` sampled pair by pair; above it edges are drawn per block.
pub const PAIRWISE_MAX_N: usize = 2000;

const THETA_STREAM: u64 = 0;
const LABEL_STREAM: u64 = 1;
const SNAPSHOT_STREAM: u64 = 2;

/// How the degree-correction vector is produced. Every variant is
/// normalized to mean one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaSpec {
    #[default]
    Constant,
    /// Density proportional to `x^-exponent` on `[min, max]`, `max`
    /// defaulting to `3 sqrt(n)`. With `phi` set, the normalized sample is
    /// rescaled around its mean so that `mean(theta^2)` equals `phi`.
    PowerLaw {
        #[serde(default = "default_exponent")]
        exponent: f64,
        #[serde(default = "default_min")]
        min: f64,
        #[serde(default)]
        max: Option<f64>,
        #[serde(default)]
        phi: Option<f64>,
    },
    Explicit {
        values: Vec<f64>,
    },
}

fn default_exponent() -> f64 {
    3.5
}

fn default_min() -> f64 {
    3.0
}

impl ThetaSpec {
    /// Power law with the default exponent and support, rescaled to `phi`.
    /// `phi == 1` gives the constant vector.
    pub fn with_phi(phi: f64) -> Self {
        if phi == 1.0 {
            ThetaSpec::Constant
        } else {
            ThetaSpec::PowerLaw {
                exponent: default_exponent(),
                min: default_min(),
                max: None,
                phi: Some(phi),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    #[serde(rename = "T")]
    pub snapshots: usize,
    pub k: usize,
    /// Symmetric `k x k` affinity matrix.
    #[serde(rename = "C")]
    pub affinity: Vec<Vec<f64>>,
    #[serde(default)]
    pub theta: ThetaSpec,
    pub eta: f64,
    /// Class proportions; uniform when absent.
    #[serde(default)]
    pub pi: Option<Vec<f64>>,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ModelParams {
    /// `k` equal classes with `C = c_out` off the diagonal and `c_in` on it.
    pub fn symmetric(n: usize, snapshots: usize, k: usize, c_in: f64, c_out: f64, eta: f64, seed: u64) -> Self {
        let affinity = (0..k)
            .map(|a| (0..k).map(|b| if a == b { c_in } else { c_out }).collect())
            .collect();
        Self {
            n,
            snapshots,
            k,
            affinity,
            theta: ThetaSpec::Constant,
            eta,
            pi: None,
            tau: 0.0,
            seed,
        }
    }

    /// `k` equal classes with mean degree `c` and hardness `alpha`, where
    /// `lambda = alpha / sqrt(c phi)` and `phi` comes from `theta`.
    #[allow(clippy::too_many_arguments)]
    pub fn planted(
        n: usize,
        snapshots: usize,
        k: usize,
        c: f64,
        alpha: f64,
        phi: f64,
        eta: f64,
        seed: u64,
    ) -> Result<Self> {
        let lambda = alpha / (c * phi).sqrt();
        let c_in = c * (1.0 + (k as f64 - 1.0) * lambda);
        let c_out = c * (1.0 - lambda);
        if c_out < 0.0 {
            return Err(Error::Infeasible(format!(
                "alpha = {alpha} needs c_out = {c_out} < 0"
            )));
        }
        let mut p = Self::symmetric(n, snapshots, k, c_in, c_out, eta, seed);
        p.theta = ThetaSpec::with_phi(phi);
        Ok(p)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load_json(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn class_proportions(&self) -> Vec<f64> {
        self.pi
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.k as f64; self.k])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 || self.snapshots == 0 || self.k == 0 {
            return bad("n, T and k must be positive".into());
        }
        if self.affinity.len() != self.k || self.affinity.iter().any(|r| r.len() != self.k) {
            return bad(format!("C must be {0} x {0}", self.k));
        }
        for a in 0..self.k {
            for b in 0..self.k {
                let v = self.affinity[a][b];
                if !(v >= 0.0) || !v.is_finite() {
                    return bad(format!("C[{a}][{b}] = {v} must be finite and nonnegative"));
                }
                if v != self.affinity[b][a] {
                    return bad("C must be symmetric".into());
                }
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta = {} outside [0, 1]", self.eta));
        }
        if !(0.0..1.0).contains(&self.tau) && self.tau != 1.0 {
            return bad(format!("tau = {} outside [0, 1]", self.tau));
        }
        let pi = self.class_proportions();
        if pi.len() != self.k || pi.iter().any(|&p| !(p >= 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("pi must hold k nonnegative proportions summing to 1".into());
        }
        if let ThetaSpec::Explicit { values } = &self.theta {
            if values.len() != self.n || values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return bad("explicit theta needs n positive finite values".into());
            }
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// The degree-correction vector, normalized to mean one. Deterministic
    /// in the seed.
    pub fn theta_vector(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut theta = match &self.theta {
            ThetaSpec::Constant => return Ok(vec![1.0; n]),
            ThetaSpec::Explicit { values } => values.clone(),
            ThetaSpec::PowerLaw { exponent, min, max, .. } => {
                let max = max.unwrap_or(3.0 * (n as f64).sqrt());
                if !(*min > 0.0 && max > *min && *exponent > 1.0) {
                    return Err(Error::Config(format!(
                        "power law needs 0 < min < max and exponent > 1, got [{min}, {max}], {exponent}"
                    )));
                }
                let e = 1.0 - exponent;
                let (lo, hi) = (min.powf(e), max.powf(e));
                let mut rng = self.rng(THETA_STREAM);
                (0..n)
                    .map(|_| (lo + rng.random::<f64>() * (hi - lo)).powf(1.0 / e))
                    .collect()
            }
        };
        let mean = theta.iter().sum::<f64>() / n as f64;
        theta.iter_mut().for_each(|x| *x /= mean);
        if let ThetaSpec::PowerLaw { phi: Some(phi), .. } = self.theta {
            rescale_to_phi(&mut theta, phi)?;
        }
        Ok(theta)
    }
}

/// Affine rescaling `1 + s (theta - 1)` of a mean-one vector so that
/// `mean(theta^2) = phi`.
fn rescale_to_phi(theta: &mut [f64], phi: f64) -> Result<()> {
    if !(phi >= 1.0) {
        return Err(Error::Infeasible(format!("phi = {phi} < 1 is impossible with mean one")));
    }
    let n = theta.len() as f64;
    let var = theta.iter().map(|x| (x - 1.0) * (x - 1.0)).sum::<f64>() / n;
    if var == 0.0 {
        return if phi == 1.0 {
            Ok(())
        } else {
            Err(Error::Infeasible("constant theta cannot reach phi > 1".into()))
        };
    }
    let s = ((phi - 1.0) / var).sqrt();
    for x in theta.iter_mut() {
        *x = 1.0 + s * (*x - 1.0);
    }
    let min = theta.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(Error::Infeasible(format!(
            "rescaling to phi = {phi} makes theta nonpositive"
        )));
    }
    // Remove rounding drift so the mean is one to machine precision.
    let mean = theta.iter().sum::<f64>() / n;
    theta.iter_mut().for_each(|x| *x /= mean);
    Ok(())
}

/// Analytic model quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    /// Expected mean degree: the leading eigenvalue of `C Pi`.
    pub c: f64,
    /// `mean(theta^2)`.
    pub phi: f64,
    /// Second eigenvalue of `C Pi` divided by `c`.
    pub lambda: f64,
    /// `sqrt(c phi lambda^2)`.
    pub alpha: f64,
}

pub fn model_summary(params: &ModelParams) -> Result<ModelSummary> {
    params.validate()?;
    let k = params.k;
    let pi = params.class_proportions();
    // C Pi is similar to the symmetric Pi^1/2 C Pi^1/2.
    let s = DMatrix::from_fn(k, k, |a, b| pi[a].sqrt() * params.affinity[a][b] * pi[b].sqrt());
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let c = ev[0];
    let lambda = if k > 1 && c > 0.0 { ev[1] / c } else { 0.0 };
    let theta = params.theta_vector()?;
    let phi = theta.iter().map(|x| x * x).sum::<f64>() / theta.len() as f64;
    Ok(ModelSummary {
        c,
        phi,
        lambda,
        alpha: (c * phi * lambda * lambda).sqrt(),
    })
}

/// Two classes in proportion `ratio = pi_small / pi_large` with
/// `C Pi 1 = c 1` and second eigenvalue of `C Pi` equal to `s2`.
/// Returns `(C, pi)` with the small class first.
pub fn build_affinity_unequal(c: f64, s2: f64, ratio: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!("ratio = {ratio} outside (0, 1]")));
    }
    if !(s2 < c) {
        return Err(Error::Infeasible(format!("s2 = {s2} must be below c = {c}")));
    }
    let p1 = ratio / (1.0 + ratio);
    let p2 = 1.0 / (1.0 + ratio);
    // Row sums give C11 p1 + C12 p2 = C12 p1 + C22 p2 = c; the trace of
    // C Pi is c + s2. Solving yields the entries below.
    let c12 = c - s2;
    let c11 = c + s2 * p2 / p1;
    let c22 = c + s2 * p1 / p2;
    if c11 < 0.0 || c12 < 0.0 || c22 < 0.0 {
        return Err(Error::Infeasible(format!(
            "c = {c}, s2 = {s2}, ratio = {ratio} give a negative affinity"
        )));
    }
    Ok((vec![vec![c11, c12], vec![c12, c22]], vec![p1, p2]))
}

fn draw_class(rng: &mut impl Rng, cum: &[f64]) -> usize {
    let u = rng.random::<f64>() * cum[cum.len() - 1];
    cum.partition_point(|&x| x <= u).min(cum.len() - 1)
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    w.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

pub fn sample_labels(params: &ModelParams) -> Result<LabelMatrix> {
    params.validate()?;
    let (n, t_count) = (params.n, params.snapshots);
    let cum = cumulative(&params.class_proportions());
    let mut rng = params.rng(LABEL_STREAM);
    let mut data = Vec::with_capacity(n * t_count);
    data.extend((0..n).map(|_| draw_class(&mut rng, &cum)));
    for t in 1..t_count {
        for i in 0..n {
            let prev = data[(t - 1) * n + i];
            let keep = rng.random::<f64>() < params.eta;
            data.push(if keep { prev } else { draw_class(&mut rng, &cum) });
        }
    }
    LabelMatrix::new(n, t_count, params.k, data)
}

/// Side information from edge sampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SamplingReport {
    /// Pairs (summed over snapshots) whose edge probability exceeded one
    /// and was clamped.
    pub clamped_pairs: usize,
}

struct Sampler<'a> {
    params: &'a ModelParams,
    theta: Vec<f64>,
}

impl Sampler<'_> {
    fn prob(&self, i: usize, j: usize, li: usize, lj: usize) -> f64 {
        self.theta[i] * self.theta[j] * self.params.affinity[li][lj] / self.params.n as f64
    }

    fn pairwise(&self, labels: &[usize], rng: &mut impl Rng, report: &mut SamplingReport) -> Vec<(usize, usize)> {
        let n = self.params.n;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = self.prob(i, j, labels[i], labels[j]);
                if p > 1.0 {
                    report.clamped_pairs += 1;
                }
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    /// Poisson number of edges per class-pair block, endpoints drawn with
    /// probability proportional to theta inside their class. Repeated
    /// draws and self-pairs are discarded.
    fn blockwise(&self, labels: &[usize], rng: &mut impl Rng, report: &mut SamplingReport) -> Vec<(usize, usize)> {
        let (n, k) = (self.params.n, self.params.k);
        let mut members = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        let cums: Vec<Vec<f64>> = members
            .iter()
            .map(|m| cumulative(&m.iter().map(|&i| self.theta[i]).collect::<Vec<_>>()))
            .collect();
        let total = |a: usize| cums[a].last().copied().unwrap_or(0.0);
        let mut edges = Vec::new();
        for a in 0..k {
            for b in a..k {
                let c = self.params.affinity[a][b];
                if c == 0.0 || members[a].is_empty() || members[b].is_empty() {
                    continue;
                }
                report.clamped_pairs += self.count_overflow(&members[a], &members[b], c, a == b);
                let mean = if a == b {
                    total(a) * total(a) * c / (2.0 * n as f64)
                } else {
                    total(a) * total(b) * c / n as f64
                };
                let draws = Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0);
                for _ in 0..draws {
                    let i = members[a][draw_class(rng, &cums[a])];
                    let j = members[b][draw_class(rng, &cums[b])];
                    if i != j {
                        edges.push((i.min(j), i.max(j)));
                    }
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Pairs across two member lists with `theta_i theta_j C / n > 1`.
    fn count_overflow(&self, xa: &[usize], xb: &[usize], c: f64, same: bool) -> usize {
        let limit = self.params.n as f64 / c;
        let mut ta: Vec<f64> = xa.iter().map(|&i| self.theta[i]).collect();
        let mut tb: Vec<f64> = xb.iter().map(|&i| self.theta[i]).collect();
        ta.sort_by(f64::total_cmp);
        tb.sort_by(f64::total_cmp);
        if ta.last().unwrap() * tb.last().unwrap() <= limit {
            return 0;
        }
        // For each x in ta, count y in tb with x * y > limit.
        let mut count = 0usize;
        let mut j = tb.len();
        for &x in &ta {
            while j > 0 && x * tb[j - 1] > limit {
                j -= 1;
            }
            count += tb.len() - j;
        }
        if same {
            let self_pairs = ta.iter().filter(|&&x| x * x > limit).count();
            (count - self_pairs) / 2
        } else {
            count
        }
    }

    fn fresh(&self, labels: &[usize], rng: &mut impl Rng, report: &mut SamplingReport) -> Vec<(usize, usize)> {
        if self.params.n <= PAIRWISE_MAX_N {
            self.pairwise(labels, rng, report)
        } else {
            self.blockwise(labels, rng, report)
        }
    }
}

/// Each pair in `prev ∪ fresh` copies its previous state with probability
/// `tau` and takes its fresh state otherwise. Pairs absent from both stay
/// absent either way.
fn persist(prev: &[(usize, usize)], fresh: &[(usize, usize)], tau: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut a, mut b) = (0, 0);
    while a < prev.len() || b < fresh.len() {
        let (pair, in_prev, in_fresh) = match (prev.get(a), fresh.get(b)) {
            (Some(&p), Some(&f)) if p == f => {
                a += 1;
                b += 1;
                (p, true, true)
            }
            (Some(&p), Some(&f)) if p < f => {
                a += 1;
                (p, true, false)
            }
            (Some(&p), None) => {
                a += 1;
                (p, true, false)
            }
            (_, Some(&f)) => {
                b += 1;
                (f, false, true)
            }
            (None, None) => unreachable!(),
        };
        let copy = rng.random::<f64>() < tau;
        if (copy && in_prev) || (!copy && in_fresh) {
            out.push(pair);
        }
    }
    out
}

pub fn sample_snapshots(params: &ModelParams, labels: &LabelMatrix) -> Result<(TemporalGraph, SamplingReport)> {
    params.validate()?;
    if labels.n() != params.n || labels.num_snapshots() != params.snapshots || labels.k() > params.k {
        return Err(Error::Config("labels do not match the model dimensions".into()));
    }
    let sampler = Sampler {
        params,
        theta: params.theta_vector()?,
    };
    let mut report = SamplingReport::default();
    let mut per_time: Vec<Vec<(usize, usize)>> = Vec::with_capacity(params.snapshots);
    for t in 0..params.snapshots {
        let mut rng = params.rng(SNAPSHOT_STREAM + t as u64);
        let fresh = sampler.fresh(labels.column(t), &mut rng, &mut report);
        let mut edges = if t > 0 && params.tau > 0.0 {
            persist(&per_time[t - 1], &fresh, params.tau, &mut rng)
        } else {
            fresh
        };
        edges.sort_unstable();
        per_time.push(edges);
    }
    if report.clamped_pairs > 0 {
        log::warn!(
            "{} pair probabilities exceeded 1 and were clamped",
            report.clamped_pairs
        );
    }
    let snaps = per_time
        .into_iter()
        .map(|e| Snapshot::from_sorted_edges(params.n, e))
        .collect();
    Ok((TemporalGraph::new(params.n, snaps)?, report))
}

/// A labelled sample from the model.
#[derive(Debug, Clone)]
pub struct Sample {
    pub graph: TemporalGraph,
    pub labels: LabelMatrix,
    pub report: SamplingReport,
}

pub fn generate(params: &ModelParams) -> Result<Sample> {
    let labels = sample_labels(params)?;
    let (graph, report) = sample_snapshots(params, &labels)?;
    Ok(Sample {
        graph,
        labels,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eta_one_freezes_labels() {
        let p = ModelParams::symmetric(500, 4, 3, 5.0, 1.0, 1.0, 7);
        let l = sample_labels(&p).unwrap();
        for t in 1..4 {
            assert_eq!(l.column(t), l.column(0));
        }
    }

    #[test]
    fn eta_zero_is_uniform() {
        let p = ModelParams::symmetric(20000, 3, 4, 5.0, 1.0, 0.0, 3);
        let l = sample_labels(&p).unwrap();
        for t in 0..3 {
            let mut counts = [0usize; 4];
            l.column(t).iter().for_each(|&x| counts[x] += 1);
            for c in counts {
                let f = c as f64 / 20000.0;
                // sd = sqrt(0.25 * 0.75 / 20000) ~ 0.0031
                assert!((f - 0.25).abs() < 0.015, "{f}");
            }
        }
    }

    #[test]
    fn keep_fraction() {
        let p = ModelParams::symmetric(50000, 2, 2, 5.0, 1.0, 0.6, 11);
        let l = sample_labels(&p).unwrap();
        let kept = (0..p.n).filter(|&i| l.get(i, 0) == l.get(i, 1)).count() as f64 / p.n as f64;
        let expect = 0.6 + 0.4 / 2.0;
        let sd = (expect * (1.0 - expect) / p.n as f64).sqrt();
        assert!((kept - expect).abs() < 3.0 * sd, "{kept}");
    }

    #[test]
    fn empty_affinity_gives_empty_graph() {
        for n in [100, 3000] {
            let p = ModelParams::symmetric(n, 2, 2, 0.0, 0.0, 0.5, 1);
            let s = generate(&p).unwrap();
            assert_eq!(s.graph.num_spatial_edges(), 0);
        }
    }

    fn mean_degree_check(n: usize, c: f64, seed: u64) {
        let p = ModelParams::symmetric(n, 3, 1, c, c, 1.0, seed);
        let s = generate(&p).unwrap();
        let m = s.graph.num_spatial_edges() as f64;
        // Edge count is a sum of independent Bernoullis with mean
        // T * (n - 1) * c / 2.
        let mean = 3.0 * (n as f64 - 1.0) * c / 2.0;
        assert!((m - mean).abs() < 3.0 * mean.sqrt(), "n={n} m={m} mean={mean}");
    }

    #[test]
    fn erdos_renyi_mean_degree() {
        mean_degree_check(1500, 4.0, 5);
        mean_degree_check(20000, 4.0, 6);
    }

    #[test]
    fn full_persistence_copies() {
        for n in [300, 5000] {
            let mut p = ModelParams::symmetric(n, 4, 2, 8.0, 2.0, 0.5, 9);
            p.tau = 1.0;
            let s = generate(&p).unwrap();
            for t in 1..4 {
                assert_eq!(s.graph.snapshot(t), s.graph.snapshot(0));
            }
        }
    }

    #[test]
    fn persistence_repeat_fraction() {
        let mut p = ModelParams::symmetric(20000, 2, 2, 8.0, 2.0, 1.0, 21);
        p.tau = 0.4;
        let s = generate(&p).unwrap();
        let (a, b) = (s.graph.snapshot(0), s.graph.snapshot(1));
        let repeated = a.edges().iter().filter(|&&(i, j)| b.has_edge(i, j)).count() as f64;
        let frac = repeated / a.num_edges() as f64;
        // tau + (1 - tau) p_ij, with p_ij = O(1/n).
        let sd = (0.4 * 0.6 / a.num_edges() as f64).sqrt();
        assert!((frac - 0.4).abs() < 3.0 * sd + 1e-3, "{frac}");
    }

    #[test]
    fn reproducible() {
        let mut p = ModelParams::symmetric(2500, 3, 2, 7.0, 3.0, 0.7, 42);
        p.theta = ThetaSpec::with_phi(1.5);
        let a = generate(&p).unwrap();
        let b = generate(&p).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.labels, b.labels);
        p.seed = 43;
        assert_ne!(generate(&p).unwrap().graph, a.graph);
    }

    #[test]
    fn theta_normalization_and_phi() {
        let mut p = ModelParams::symmetric(10000, 1, 2, 5.0, 1.0, 0.5, 1);
        p.theta = ThetaSpec::with_phi(1.64);
        let th = p.theta_vector().unwrap();
        let mean = th.iter().sum::<f64>() / th.len() as f64;
        let phi = th.iter().map(|x| x * x).sum::<f64>() / th.len() as f64;
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi, 1.64, epsilon = 1e-9);
        assert!(th.iter().all(|&x| x > 0.0));

        p.theta = ThetaSpec::PowerLaw {
            exponent: 3.5,
            min: 3.0,
            max: None,
            phi: None,
        };
        let th = p.theta_vector().unwrap();
        let phi = th.iter().map(|x| x * x).sum::<f64>() / th.len() as f64;
        assert!(phi > 1.3 && phi < 1.9, "raw power-law phi {phi}");
    }

    #[test]
    fn summary_examples() {
        let p = ModelParams::symmetric(100, 2, 2, 10.0, 2.0, 0.5, 0);
        let s = model_summary(&p).unwrap();
        assert_abs_diff_eq!(s.c, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lambda, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.phi, 1.0, epsilon = 1e-15);

        let p = ModelParams::planted(5000, 2, 2, 6.0, 2.4f64.sqrt(), 1.6, 0.5, 1).unwrap();
        let s = model_summary(&p).unwrap();
        assert_abs_diff_eq!(s.c, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lambda, 0.5 * (1.6f64 / s.phi).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.alpha, 2.4f64.sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn unequal_affinity() {
        let (c, pi) = build_affinity_unequal(6.0, 2.5, 1.0).unwrap();
        assert_abs_diff_eq!(c[0][0], 8.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c[0][1], 3.5, epsilon = 1e-12);
        assert_eq!(pi, vec![0.5, 0.5]);
        assert!(build_affinity_unequal(6.0, 6.5, 0.5).is_err());
        assert!(matches!(
            build_affinity_unequal(2.0, -4.0, 0.1),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn overflow_is_counted() {
        let mut p = ModelParams::symmetric(400, 1, 1, 10.0, 10.0, 1.0, 2);
        let mut values = vec![1.0; 400];
        values[0] = 30.0;
        values[1] = 30.0;
        p.theta = ThetaSpec::Explicit { values };
        let s = generate(&p).unwrap();
        assert!(s.report.clamped_pairs >= 1);
        assert!(s.graph.snapshot(0).has_edge(0, 1));
    }

    #[test]
    fn block_overflow_count_matches_bruteforce() {
        let mut p = ModelParams::symmetric(3000, 1, 2, 400.0, 300.0, 1.0, 4);
        p.theta = ThetaSpec::with_phi(1.6);
        let theta = p.theta_vector().unwrap();
        let labels = sample_labels(&p).unwrap();
        let sampler = Sampler { params: &p, theta };
        let mut brute = 0;
        let lab = labels.column(0);
        for i in 0..p.n {
            for j in i + 1..p.n {
                if sampler.prob(i, j, lab[i], lab[j]) > 1.0 {
                    brute += 1;
                }
            }
        }
        let (_, report) = sample_snapshots(&p, &labels).unwrap();
        assert_eq!(report.clamped_pairs, brute);
        assert!(brute > 0);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"n": 50, "T": 3, "k": 2, "C": [[8, 2], [2, 8]], "eta": 0.7,
                       "theta": {"kind": "power_law", "phi": 1.5}, "seed": 4}"#;
        let p = ModelParams::from_json(text).unwrap();
        assert_eq!(p.snapshots, 3);
        assert_eq!(p.theta, ThetaSpec::with_phi(1.5));
        let back = ModelParams::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        assert!(ModelParams::from_json(r#"{"n": 5, "T": 1, "k": 2, "C": [[1, 2], [3, 1]], "eta": 0.5}"#).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn unequal_constraints(c in 2.0f64..12.0, frac in 0.05f64..0.95, ratio in 0.05f64..1.0) {
                let s2 = c * frac;
                if let Ok((cm, pi)) = build_affinity_unequal(c, s2, ratio) {
                    for row in &cm {
                        let sum = row[0] * pi[0] + row[1] * pi[1];
                        prop_assert!((sum - c).abs() < 1e-12);
                    }
                    let tr = cm[0][0] * pi[0] + cm[1][1] * pi[1];
                    prop_assert!((tr - c - s2).abs() < 1e-12);
                    prop_assert!((pi[0] / pi[1] - ratio).abs() < 1e-12);
                }
            }

            #[test]
            fn labels_in_range(n in 1usize..200, t in 1usize..5, k in 1usize..5, eta in 0.0f64..1.0, seed in 0u64..1000) {
                let p = ModelParams::symmetric(n, t, k, 3.0, 1.0, eta, seed);
                let l = sample_labels(&p).unwrap();
                prop_assert!(l.as_slice().iter().all(|&x| x < k));
            }

            #[test]
            fn graphs_are_simple(n in 2usize..150, seed in 0u64..1000, tau in 0.0f64..1.0) {
                let mut p = ModelParams::symmetric(n, 3, 2, 9.0, 3.0, 0.5, seed);
                p.tau = tau;
                let s = generate(&p).unwrap();
                for snap in s.graph.snapshots() {
                    prop_assert!(snap.edges().iter().all(|&(i, j)| i < j && j < n));
                    prop_assert!(snap.edges().windows(2).all(|w| w[0] < w[1]));
                }
            }
        }
    }
}
