//! End-to-end detection, the label-persistence grid search and the
//! experiment harnesses behind the command line.

use serde::{Deserialize, Serialize};

use crate::bethe_hessian::build_bethe_hessian;
use crate::cluster::{kmeans_per_timestep, row_normalize, select_k_silhouette, ClusterResult, Embedding, TemporalSeeding};
use crate::ddcsbm::{generate, ModelParams};
use crate::eigen::{extreme_eigs, negative_eigenpairs, SolverConfig};
use crate::error::{Error, Result};
use crate::fast_embed::{build_filter, default_sketch_dim, sketch, DEFAULT_ORDER};
use crate::graph::{LabelMatrix, Snapshot, TemporalGraph};
use crate::metrics::{estimate_parameters, modularity, overlap, overlap_per_class, EstimatorReport};
use crate::threshold::{alpha_c, lambda_d};

/// Drops from snapshot `t >= 1` every edge also present in the original
/// snapshot `t - 1`. Snapshot 0 is kept as is.
pub fn remove_repeated_edges(g: &TemporalGraph) -> TemporalGraph {
    let snaps = g.snapshots();
    let mut out = Vec::with_capacity(snaps.len());
    for (t, snap) in snaps.iter().enumerate() {
        if t == 0 {
            out.push(snap.clone());
            continue;
        }
        let prev = &snaps[t - 1];
        let kept = snap.edges().iter().copied().filter(|&(i, j)| !prev.has_edge(i, j));
        out.push(Snapshot::from_pairs(g.n(), kept).expect("edges come from a valid snapshot"));
    }
    TemporalGraph::new(g.n(), out).expect("same shape as the input")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaChoice {
    Fixed(f64),
    /// Try every candidate and keep the best mean modularity.
    Grid(Vec<f64>),
}

impl EtaChoice {
    pub fn default_grid() -> Self {
        EtaChoice::Grid((0..10).map(|i| i as f64 / 10.0).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Fixed(usize),
    /// Silhouette scan over `2..=max` on the middle snapshot.
    Auto { max: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Negative eigenvectors by Lanczos.
    #[default]
    Exact,
    /// Chebyshev-filtered random sketch.
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    pub eta: EtaChoice,
    pub k: KChoice,
    pub mode: Mode,
    pub cheb_order: usize,
    /// Sketch columns; `ceil(10 ln(nT))` when absent.
    pub sketch_dim: Option<usize>,
    pub remove_repeated_edges: bool,
    pub seeding: TemporalSeeding,
    /// Most negative eigenpairs to collect; `k T` when absent.
    pub cap: Option<usize>,
    pub eigen_tol: f64,
    pub seed: u64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            eta: EtaChoice::Fixed(0.5),
            k: KChoice::Fixed(2),
            mode: Mode::Exact,
            cheb_order: DEFAULT_ORDER,
            sketch_dim: None,
            remove_repeated_edges: true,
            seeding: TemporalSeeding::Previous,
            cap: None,
            eigen_tol: 1e-6,
            seed: 0,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |e: f64| {
            if (0.0..1.0).contains(&e) {
                Ok(())
            } else {
                Err(Error::Config(format!("eta = {e} must lie in [0, 1)")))
            }
        };
        match &self.eta {
            EtaChoice::Fixed(e) => check(*e)?,
            EtaChoice::Grid(c) if c.is_empty() => return Err(Error::Config("empty eta grid".into())),
            EtaChoice::Grid(c) => c.iter().try_for_each(|&e| check(e))?,
        }
        match self.k {
            KChoice::Fixed(k) if k < 1 => return Err(Error::Config("k must be positive".into())),
            KChoice::Auto { max } if max < 2 => return Err(Error::Config("auto k needs max >= 2".into())),
            _ => {}
        }
        if self.mode == Mode::Fast && self.cheb_order == 0 {
            return Err(Error::Config("Chebyshev order must be positive".into()));
        }
        Ok(())
    }
}

/// Wall-clock seconds per stage. Always zero on targets without a clock.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub hessian: f64,
    pub embed: f64,
    pub cluster: f64,
    pub total: f64,
}

#[derive(Clone, Copy)]
pub(crate) struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub(crate) fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub eta: f64,
    pub alpha_c: f64,
    /// Spatial coupling `lambda_d`.
    pub xi: f64,
    pub mode: Mode,
    pub k: usize,
    /// Negative eigenvalues found (exact mode only).
    pub m: Option<usize>,
    pub eigenvalues: Vec<f64>,
    pub next_value: Option<f64>,
    pub below_detectability: bool,
    pub mu_min: Option<f64>,
    pub mu_max: Option<f64>,
    pub sketch_dim: Option<usize>,
    pub cheb_order: Option<usize>,
    pub edges_removed: usize,
    pub zero_rows: usize,
    /// `(eta, mean modularity)` per candidate when a grid was searched.
    pub eta_scores: Option<Vec<(f64, f64)>>,
    pub timings: Timings,
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub clusters: ClusterResult,
    pub estimates: EstimatorReport,
    pub diagnostics: Diagnostics,
}

impl Detection {
    pub fn labels(&self) -> &LabelMatrix {
        &self.clusters.labels
    }
}

pub fn detect(g: &TemporalGraph, cfg: &DetectConfig) -> Result<Detection> {
    cfg.validate()?;
    match &cfg.eta {
        EtaChoice::Fixed(eta) => detect_with_eta(g, *eta, cfg),
        EtaChoice::Grid(candidates) => Ok(grid_search_eta(g, candidates, cfg)?.best),
    }
}

fn detect_with_eta(g: &TemporalGraph, eta: f64, cfg: &DetectConfig) -> Result<Detection> {
    let clock = Stopwatch::start();
    let (n, t_count) = (g.n(), g.num_snapshots());
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let cleaned;
    let work = if cfg.remove_repeated_edges && t_count >= 2 {
        cleaned = remove_repeated_edges(g);
        &cleaned
    } else {
        g
    };
    let edges_removed = g.num_spatial_edges() - work.num_spatial_edges();
    let estimates = estimate_parameters(work, None)?;
    if !(estimates.c_hat > 0.0) {
        return Err(Error::EmptyGraph);
    }
    let a_c = alpha_c(t_count, eta);
    let xi = lambda_d(t_count, eta, estimates.c_hat, estimates.phi_hat)?;
    let h = build_bethe_hessian(work, xi, eta)?;
    let t_hessian = clock.seconds();

    let solver = SolverConfig {
        tol: cfg.eigen_tol,
        seed: cfg.seed,
        ..SolverConfig::default()
    };
    let k_hint = match cfg.k {
        KChoice::Fixed(k) => k,
        KChoice::Auto { .. } => 2,
    };
    let cap = cfg.cap.unwrap_or(match cfg.k {
        KChoice::Fixed(k) => k * t_count,
        KChoice::Auto { max } => max * t_count,
    });
    let mut diag = Diagnostics {
        eta,
        alpha_c: a_c,
        xi,
        mode: cfg.mode,
        k: k_hint,
        m: None,
        eigenvalues: Vec::new(),
        next_value: None,
        below_detectability: false,
        mu_min: None,
        mu_max: None,
        sketch_dim: None,
        cheb_order: None,
        edges_removed,
        zero_rows: 0,
        eta_scores: None,
        timings: Timings::default(),
    };
    let exact = |diag: &mut Diagnostics| -> Result<Embedding> {
        let neg = negative_eigenpairs(&h, k_hint, cap, &solver)?;
        diag.m = Some(neg.m);
        diag.eigenvalues = neg.pairs.values.clone();
        diag.next_value = neg.next_value;
        diag.below_detectability = neg.below_detectability;
        diag.mu_max = Some(neg.mu_max);
        if neg.below_detectability {
            log::warn!("no negative eigenvalue: clustering the smallest eigenvector");
        }
        Embedding::new(h.dim(), neg.pairs.len(), neg.pairs.row_major())
    };
    let mut x = match cfg.mode {
        Mode::Exact => exact(&mut diag)?,
        Mode::Fast => {
            let (mu_min, mu_max) = extreme_eigs(&h, &solver)?;
            diag.mu_min = Some(mu_min);
            diag.mu_max = Some(mu_max);
            match build_filter(mu_min, mu_max, cfg.cheb_order) {
                Ok(filter) => {
                    let r = cfg.sketch_dim.unwrap_or_else(|| default_sketch_dim(h.dim()));
                    diag.sketch_dim = Some(r);
                    diag.cheb_order = Some(cfg.cheb_order);
                    sketch(&h, &filter, r, cfg.seed)?.y
                }
                Err(Error::NoNegativeSpectrum { .. }) => exact(&mut diag)?,
                Err(e) => return Err(e),
            }
        }
    };
    let t_embed = clock.seconds();
    diag.zero_rows = row_normalize(&mut x);
    let k = match cfg.k {
        KChoice::Fixed(k) => k,
        KChoice::Auto { max } => {
            let mid = t_count / 2;
            select_k_silhouette(&x.block(mid * n, n), max, cfg.seed)?.0
        }
    };
    diag.k = k;
    let clusters = kmeans_per_timestep(&x, n, k, cfg.seeding, cfg.seed)?;
    let t_total = clock.seconds();
    diag.timings = Timings {
        hessian: t_hessian,
        embed: t_embed - t_hessian,
        cluster: t_total - t_embed,
        total: t_total,
    };
    Ok(Detection {
        clusters,
        estimates,
        diagnostics: diag,
    })
}

/// Modularity averaged over the snapshots that have edges.
pub fn mean_modularity(g: &TemporalGraph, labels: &LabelMatrix) -> f64 {
    let scores: Vec<f64> = (0..g.num_snapshots())
        .filter_map(|t| modularity(g.snapshot(t), labels.column(t)).ok())
        .collect();
    if scores.is_empty() {
        f64::NAN
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub best_eta: f64,
    /// `(eta, mean modularity)` per candidate, in input order.
    pub scores: Vec<(f64, f64)>,
    pub best: Detection,
}

/// Runs detection for each candidate `eta` (the spatial coupling follows
/// from `alpha_c(T, eta)` each time) and keeps the one whose labels have the
/// highest mean modularity on the input graph. Ties go to the larger `eta`.
pub fn grid_search_eta(g: &TemporalGraph, candidates: &[f64], cfg: &DetectConfig) -> Result<GridSearch> {
    if candidates.is_empty() {
        return Err(Error::Config("empty eta grid".into()));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, f64, Detection)> = None;
    for &eta in candidates {
        let mut single = cfg.clone();
        single.eta = EtaChoice::Fixed(eta);
        single.validate()?;
        let det = detect_with_eta(g, eta, &single)?;
        let q = mean_modularity(g, det.labels());
        let q_cmp = if q.is_nan() { f64::NEG_INFINITY } else { q };
        scores.push((eta, q));
        let better = match &best {
            None => true,
            Some((b_eta, b_q, _)) => q_cmp > *b_q + 1e-12 || ((q_cmp - b_q).abs() <= 1e-12 && eta > *b_eta),
        };
        if better {
            best = Some((eta, q_cmp, det));
        }
    }
    let (best_eta, _, mut det) = best.expect("non-empty grid");
    det.diagnostics.eta_scores = Some(scores.clone());
    Ok(GridSearch {
        best_eta,
        scores,
        best: det,
    })
}

/// Model template for experiment grids: `k` equal classes, mean degree `c`
/// and `alpha = alpha_ratio * alpha_c(T, eta)` unless `alpha` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedModel {
    pub n: usize,
    #[serde(rename = "T")]
    pub snapshots: usize,
    pub k: usize,
    pub c: f64,
    pub phi: f64,
    pub eta: f64,
    pub tau: f64,
    pub alpha_ratio: f64,
    pub alpha: Option<f64>,
}

impl Default for PlantedModel {
    fn default() -> Self {
        Self {
            n: 1000,
            snapshots: 4,
            k: 2,
            c: 6.0,
            phi: 1.0,
            eta: 0.7,
            tau: 0.0,
            alpha_ratio: 1.5,
            alpha: None,
        }
    }
}

impl PlantedModel {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(self.alpha_ratio * alpha_c(self.snapshots, self.eta))
    }

    pub fn params(&self, seed: u64) -> Result<ModelParams> {
        let mut p = ModelParams::planted(self.n, self.snapshots, self.k, self.c, self.alpha(), self.phi, self.eta, seed)?;
        p.tau = self.tau;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridParam {
    AlphaRatio,
    Alpha,
    C,
    Eta,
    Tau,
}

impl GridParam {
    pub fn name(self) -> &'static str {
        match self {
            GridParam::AlphaRatio => "alpha_ratio",
            GridParam::Alpha => "alpha",
            GridParam::C => "c",
            GridParam::Eta => "eta",
            GridParam::Tau => "tau",
        }
    }

    fn apply(self, m: &mut PlantedModel, v: f64) {
        match self {
            GridParam::AlphaRatio => {
                m.alpha_ratio = v;
                m.alpha = None;
            }
            GridParam::Alpha => m.alpha = Some(v),
            GridParam::C => m.c = v,
            GridParam::Eta => m.eta = v,
            GridParam::Tau => m.tau = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub param: GridParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMetric {
    /// Overlap of the last snapshot.
    OverlapLast,
    /// Overlap averaged over snapshots.
    MeanOverlap,
    /// Largest connected component of the last cleaned snapshot, over `n`.
    GiantComponent,
    /// `alpha_hat` on the last cleaned snapshot with the planted labels.
    AlphaHat,
}

impl PhaseMetric {
    pub fn name(self) -> &'static str {
        match self {
            PhaseMetric::OverlapLast => "overlap_last",
            PhaseMetric::MeanOverlap => "mean_overlap",
            PhaseMetric::GiantComponent => "giant_component",
            PhaseMetric::AlphaHat => "alpha_hat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramSpec {
    pub model: PlantedModel,
    pub x: GridAxis,
    pub y: GridAxis,
    pub replicates: usize,
    pub metric: PhaseMetric,
    /// Used by the overlap metrics. With `oracle_eta` the planted `eta` of
    /// each cell replaces `detect.eta`.
    #[serde(default)]
    pub detect: DetectConfig,
    #[serde(default = "yes")]
    pub oracle_eta: bool,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl PhaseDiagramSpec {
    pub fn validate(&self) -> Result<()> {
        if self.x.values.is_empty() || self.y.values.is_empty() {
            return Err(Error::Config("phase diagram grids must be non-empty".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("at least one replicate is needed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub x: f64,
    pub y: f64,
    pub replicate: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub x_param: GridParam,
    pub y_param: GridParam,
    pub metric: PhaseMetric,
    pub rows: Vec<PhaseRow>,
}

impl PhaseTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_param,x,y_param,y,replicate,metric,value\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.x_param.name(),
                r.x,
                self.y_param.name(),
                r.y,
                r.replicate,
                self.metric.name(),
                r.value
            ));
        }
        s
    }

    /// Mean value per cell, as `(x, y, mean)` in grid order, ignoring NaN
    /// replicates.
    pub fn cell_means(&self) -> Vec<(f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64, usize)> = Vec::new();
        for r in &self.rows {
            let pos = out.iter().position(|c| c.0 == r.x && c.1 == r.y);
            let i = pos.unwrap_or_else(|| {
                out.push((r.x, r.y, 0.0, 0));
                out.len() - 1
            });
            if !r.value.is_nan() {
                out[i].2 += r.value;
                out[i].3 += 1;
            }
        }
        out.into_iter()
            .map(|(x, y, s, c)| (x, y, if c > 0 { s / c as f64 } else { f64::NAN }))
            .collect()
    }
}

/// Seed for one cell replicate, decorrelated from its neighbors.
pub fn cell_seed(base: u64, cell: usize, replicate: usize) -> u64 {
    let mut z = base ^ ((cell as u64) << 32) ^ (replicate as u64);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mean_overlap(truth: &LabelMatrix, est: &LabelMatrix) -> Result<f64> {
    let t_count = truth.num_snapshots();
    let mut total = 0.0;
    for t in 0..t_count {
        total += overlap(truth.column(t), est.column(t), truth.k().max(est.k()))?;
    }
    Ok(total / t_count as f64)
}

fn phase_cell(spec: &PhaseDiagramSpec, model: &PlantedModel, seed: u64) -> Result<f64> {
    let params = model.params(seed)?;
    let sample = generate(&params)?;
    let t_last = model.snapshots - 1;
    match spec.metric {
        PhaseMetric::GiantComponent => {
            let cleaned = remove_repeated_edges(&sample.graph);
            Ok(cleaned.snapshot(t_last).largest_component_fraction())
        }
        PhaseMetric::AlphaHat => {
            let cleaned = remove_repeated_edges(&sample.graph);
            let last = cleaned.slice(t_last..t_last + 1)?;
            let labels = LabelMatrix::new(model.n, 1, model.k, sample.labels.column(t_last).to_vec())?;
            let r = estimate_parameters(&last, Some(&labels))?;
            Ok(r.alpha_hat.unwrap_or(f64::NAN))
        }
        PhaseMetric::OverlapLast | PhaseMetric::MeanOverlap => {
            let mut cfg = spec.detect.clone();
            if spec.oracle_eta {
                cfg.eta = EtaChoice::Fixed(model.eta.min(0.999));
            }
            cfg.k = KChoice::Fixed(model.k);
            cfg.seed = seed;
            let det = detect(&sample.graph, &cfg)?;
            if spec.metric == PhaseMetric::OverlapLast {
                overlap(sample.labels.column(t_last), det.labels().column(t_last), model.k)
            } else {
                mean_overlap(&sample.labels, det.labels())
            }
        }
    }
}

/// Evaluates the metric on every grid cell and replicate. Failing cells
/// yield NaN and the sweep continues.
pub fn run_phase_diagram(spec: &PhaseDiagramSpec) -> Result<PhaseTable> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for (yi, &y) in spec.y.values.iter().enumerate() {
        for (xi, &x) in spec.x.values.iter().enumerate() {
            for rep in 0..spec.replicates {
                jobs.push((yi * spec.x.values.len() + xi, x, y, rep));
            }
        }
    }
    let run = |&(cell, x, y, rep): &(usize, f64, f64, usize)| {
        let mut model = spec.model.clone();
        spec.x.param.apply(&mut model, x);
        spec.y.param.apply(&mut model, y);
        let value = phase_cell(spec, &model, cell_seed(spec.seed, cell, rep)).unwrap_or_else(|e| {
            log::warn!("cell ({x}, {y}) replicate {rep}: {e}");
            f64::NAN
        });
        PhaseRow { x, y, replicate: rep, value }
    };
    #[cfg(feature = "parallel")]
    let rows = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows = jobs.iter().map(run).collect();
    Ok(PhaseTable {
        x_param: spec.x.param,
        y_param: spec.y.param,
        metric: spec.metric,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub model: ModelParams,
    pub replicates: usize,
    #[serde(default)]
    pub detect: DetectConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub replicate: usize,
    pub t: usize,
    pub overlap: f64,
    /// NaN for snapshots without edges.
    pub modularity: f64,
    pub inertia: f64,
    /// Overlap restricted to each planted class.
    pub per_class: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchRow>,
    pub mean_overlap: f64,
    pub diagnostics: Vec<Diagnostics>,
}

impl BenchmarkReport {
    pub fn to_csv(&self) -> String {
        let k = self.rows.first().map_or(0, |r| r.per_class.len());
        let mut s = String::from("replicate,t,overlap,modularity,inertia");
        for c in 0..k {
            s.push_str(&format!(",overlap_class_{c}"));
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}", r.replicate, r.t, r.overlap, r.modularity, r.inertia));
            for v in &r.per_class {
                match v {
                    Some(x) => s.push_str(&format!(",{x}")),
                    None => s.push_str(",NaN"),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Generates `replicates` graphs from the model (seed `model.seed + r`),
/// detects communities and scores every snapshot.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    if spec.replicates == 0 {
        return Err(Error::Config("at least one replicate is needed".into()));
    }
    let k = spec.model.k;
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut total = 0.0;
    for rep in 0..spec.replicates {
        let mut params = spec.model.clone();
        params.seed = spec.model.seed.wrapping_add(rep as u64);
        let sample = generate(&params)?;
        let mut cfg = spec.detect.clone();
        cfg.seed = cfg.seed.wrapping_add(rep as u64);
        let det = detect(&sample.graph, &cfg)?;
        let kk = k.max(det.clusters.k);
        for t in 0..params.snapshots {
            let truth = sample.labels.column(t);
            let est = det.labels().column(t);
            let ov = overlap(truth, est, kk)?;
            total += ov;
            rows.push(BenchRow {
                replicate: rep,
                t,
                overlap: ov,
                modularity: modularity(sample.graph.snapshot(t), est).unwrap_or(f64::NAN),
                inertia: det.clusters.inertia[t],
                per_class: overlap_per_class(truth, est, kk)?,
            });
        }
        diagnostics.push(det.diagnostics);
    }
    Ok(BenchmarkReport {
        mean_overlap: total / rows.len() as f64,
        rows,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, snaps: Vec<Vec<(usize, usize)>>) -> TemporalGraph {
        TemporalGraph::from_edges(n, snaps).unwrap()
    }

    #[test]
    fn removes_edges_seen_just_before() {
        let g = graph(3, vec![vec![(0, 1)], vec![(0, 1), (1, 2)]]);
        let r = remove_repeated_edges(&g);
        assert_eq!(r.snapshot(0).edges(), &[(0, 1)]);
        assert_eq!(r.snapshot(1).edges(), &[(1, 2)]);
    }

    #[test]
    fn identical_snapshots_empty_out() {
        let e = vec![(0, 1), (1, 2), (0, 2)];
        let g = graph(3, vec![e.clone(), e.clone(), e]);
        let r = remove_repeated_edges(&g);
        assert_eq!(r.snapshot(0).num_edges(), 3);
        assert_eq!(r.snapshot(1).num_edges(), 0);
        assert_eq!(r.snapshot(2).num_edges(), 0);
    }

    #[test]
    fn disjoint_snapshots_unchanged_and_idempotent() {
        let g = graph(4, vec![vec![(0, 1)], vec![(2, 3)], vec![(0, 1)]]);
        let r = remove_repeated_edges(&g);
        assert_eq!(r, g);
        assert_eq!(remove_repeated_edges(&r), r);
    }

    #[test]
    fn triple_repeat_comes_back() {
        // Compared with the raw previous snapshot, an edge present at
        // t, t + 1, t + 2 is removed at t + 1 and t + 2.
        let g = graph(2, vec![vec![(0, 1)], vec![(0, 1)], vec![(0, 1)], vec![], vec![(0, 1)]]);
        let r = remove_repeated_edges(&g);
        let counts: Vec<usize> = r.snapshots().iter().map(|s| s.num_edges()).collect();
        assert_eq!(counts, vec![1, 0, 0, 0, 1]);
    }

    fn planted(n: usize, t: usize, ratio: f64, eta: f64, seed: u64) -> (TemporalGraph, LabelMatrix) {
        let m = PlantedModel {
            n,
            snapshots: t,
            k: 2,
            c: 6.0,
            phi: 1.0,
            eta,
            tau: 0.0,
            alpha_ratio: ratio,
            alpha: None,
        };
        let s = generate(&m.params(seed).unwrap()).unwrap();
        (s.graph, s.labels)
    }

    #[test]
    fn detects_easy_instance() {
        let (g, truth) = planted(600, 3, 2.5, 0.7, 5);
        let cfg = DetectConfig {
            eta: EtaChoice::Fixed(0.7),
            ..Default::default()
        };
        let d = detect(&g, &cfg).unwrap();
        assert!(!d.diagnostics.below_detectability);
        assert!(mean_overlap(&truth, d.labels()).unwrap() > 0.5);
        let again = detect(&g, &cfg).unwrap();
        assert_eq!(again.labels(), d.labels());
    }

    #[test]
    fn fast_mode_runs() {
        let (g, truth) = planted(500, 2, 2.5, 0.7, 6);
        let cfg = DetectConfig {
            eta: EtaChoice::Fixed(0.7),
            mode: Mode::Fast,
            cheb_order: 60,
            sketch_dim: Some(30),
            ..Default::default()
        };
        let d = detect(&g, &cfg).unwrap();
        assert!(d.diagnostics.mu_min.unwrap() < 0.0);
        assert!(mean_overlap(&truth, d.labels()).unwrap() > 0.4);
    }

    #[test]
    fn static_coupling_is_per_snapshot() {
        // h = 0 decouples snapshots: detecting on the whole graph matches
        // detecting each snapshot on its own, up to label names.
        let (g, _) = planted(400, 2, 2.2, 0.5, 9);
        let cfg = DetectConfig {
            eta: EtaChoice::Fixed(0.0),
            remove_repeated_edges: false,
            seeding: TemporalSeeding::Independent,
            ..Default::default()
        };
        let joint = detect(&g, &cfg).unwrap();
        for t in 0..2 {
            let single = g.slice(t..t + 1).unwrap();
            let alone = detect(&single, &cfg).unwrap();
            let ov = overlap(alone.labels().column(0), joint.labels().column(t), 2).unwrap();
            assert!(ov > 0.97, "t = {t}: {ov}");
        }
    }

    #[test]
    fn grid_with_single_candidate() {
        let (g, _) = planted(300, 2, 2.5, 0.5, 1);
        let r = grid_search_eta(&g, &[0.4], &DetectConfig::default()).unwrap();
        assert_eq!(r.best_eta, 0.4);
        assert_eq!(r.scores.len(), 1);
        assert!(grid_search_eta(&g, &[], &DetectConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = DetectConfig { eta: EtaChoice::Fixed(1.0), ..Default::default() };
        assert!(c.validate().is_err());
        c.eta = EtaChoice::Grid(vec![]);
        assert!(c.validate().is_err());
        c.eta = EtaChoice::default_grid();
        assert!(c.validate().is_ok());
        let text = serde_json::to_string(&c).unwrap();
        let back: DetectConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn single_cell_diagram() {
        let spec = PhaseDiagramSpec {
            model: PlantedModel {
                n: 300,
                snapshots: 3,
                ..Default::default()
            },
            x: GridAxis {
                param: GridParam::AlphaRatio,
                values: vec![2.0],
            },
            y: GridAxis {
                param: GridParam::Tau,
                values: vec![0.3],
            },
            replicates: 1,
            metric: PhaseMetric::GiantComponent,
            detect: DetectConfig::default(),
            oracle_eta: true,
            seed: 3,
        };
        let table = run_phase_diagram(&spec).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(table.rows[0].value > 0.5);
        let csv = table.to_csv();
        assert!(csv.starts_with("x_param,x,y_param,y,replicate,metric,value\nalpha_ratio,2,tau,0.3,0,giant_component,"));
    }

    #[test]
    fn infeasible_cells_become_nan() {
        let spec = PhaseDiagramSpec {
            model: PlantedModel {
                n: 200,
                snapshots: 2,
                ..Default::default()
            },
            x: GridAxis {
                param: GridParam::Alpha,
                values: vec![50.0],
            },
            y: GridAxis {
                param: GridParam::Eta,
                values: vec![0.5],
            },
            replicates: 2,
            metric: PhaseMetric::AlphaHat,
            detect: DetectConfig::default(),
            oracle_eta: true,
            seed: 0,
        };
        let table = run_phase_diagram(&spec).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows.iter().all(|r| r.value.is_nan()));
    }

    #[test]
    fn benchmark_rows_and_csv() {
        let (c, pi) = crate::ddcsbm::build_affinity_unequal(6.0, 4.0, 0.5).unwrap();
        let mut model = ModelParams::symmetric(300, 2, 2, 1.0, 1.0, 0.8, 4);
        model.affinity = c;
        model.pi = Some(pi);
        let spec = BenchmarkSpec {
            model,
            replicates: 2,
            detect: DetectConfig {
                eta: EtaChoice::Fixed(0.8),
                ..Default::default()
            },
        };
        let r = run_benchmark(&spec).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.rows.iter().all(|row| row.per_class.len() == 2));
        let csv = r.to_csv();
        assert!(csv.starts_with("replicate,t,overlap,modularity,inertia,overlap_class_0,overlap_class_1\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
