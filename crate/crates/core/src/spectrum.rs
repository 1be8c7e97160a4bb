//! Weighted non-backtracking operator on the directed edges of the
//! supra-graph, and tools to compare its spectrum with the Bethe-Hessian.
//!
//! For a directed edge `u -> v`, `(B g)(u -> v)` sums `w(v -> x) g(v -> x)`
//! over the edges `v -> x` with `x != u`. Spatial edges carry weight `xi`,
//! temporal edges weight `h`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bethe_hessian::build_bethe_hessian;
use crate::eigen::{dense_spectrum, eigs_largest_real, ArnoldiConfig, EigenError, LinearOperator};
use crate::error::{Error, Result};
use crate::graph::{EdgeKind, TemporalGraph};
use crate::threshold::C64;

/// Largest directed-edge count for which the operator is also stored as a
/// dense matrix.
pub const DENSE_MAX: usize = 5000;

/// Directed edges of the supra-graph, grouped by source in increasing order
/// of `(source, target)`.
#[derive(Debug, Clone)]
pub struct DirectedEdgeIndex {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    reverse: Vec<u32>,
}

impl DirectedEdgeIndex {
    pub fn new(g: &TemporalGraph, xi: f64, h: f64) -> Result<Self> {
        let view = g.supra_view();
        let nodes = view.num_nodes();
        let count = 2 * (view.spatial_edge_count() + view.temporal_edge_count());
        if count > u32::MAX as usize {
            return Err(Error::Config(format!("{count} directed edges exceed u32 indexing")));
        }
        let mut offsets = Vec::with_capacity(nodes + 1);
        let mut targets = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        offsets.push(0);
        for u in 0..nodes {
            for (v, kind) in view.neighbors(u) {
                targets.push(v as u32);
                weights.push(match kind {
                    EdgeKind::Spatial => xi,
                    EdgeKind::Temporal => h,
                });
            }
            offsets.push(targets.len());
        }
        let mut index = Self {
            offsets,
            targets,
            weights,
            reverse: Vec::new(),
        };
        index.reverse = (0..index.len())
            .map(|e| {
                let (u, v) = index.endpoints(e);
                index.lookup(v, u).expect("supra-graph is undirected") as u32
            })
            .collect();
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Index of `u -> v`, if that edge exists.
    pub fn lookup(&self, u: usize, v: usize) -> Option<usize> {
        let span = self.offsets[u]..self.offsets[u + 1];
        self.targets[span.clone()].binary_search(&(v as u32)).ok().map(|k| span.start + k)
    }

    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        let u = self.offsets.partition_point(|&o| o <= e) - 1;
        (u, self.targets[e] as usize)
    }

    pub fn weight(&self, e: usize) -> f64 {
        self.weights[e]
    }

    pub fn reverse(&self, e: usize) -> usize {
        self.reverse[e] as usize
    }

    /// Edges leaving supra-node `u`.
    pub fn out_edges(&self, u: usize) -> std::ops::Range<usize> {
        self.offsets[u]..self.offsets[u + 1]
    }
}

#[derive(Debug, Clone)]
pub struct NbOperator {
    index: DirectedEdgeIndex,
    dense: Option<DMatrix<f64>>,
}

pub fn build_nb_operator(g: &TemporalGraph, xi: f64, h: f64) -> Result<NbOperator> {
    let index = DirectedEdgeIndex::new(g, xi, h)?;
    let mut op = NbOperator { index, dense: None };
    if op.dim() <= DENSE_MAX {
        op.dense = Some(op.materialize());
    }
    Ok(op)
}

impl NbOperator {
    pub fn index(&self) -> &DirectedEdgeIndex {
        &self.index
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// The stored dense matrix, present when `dim() <= DENSE_MAX`.
    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref()
    }

    /// Builds the dense matrix entry by entry from the successor lists,
    /// independently of the matrix-vector product.
    pub fn materialize(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for e in 0..d {
            let (u, v) = self.index.endpoints(e);
            for f in self.index.out_edges(v) {
                if self.index.targets[f] as usize != u {
                    m[(e, f)] = self.index.weights[f];
                }
            }
        }
        m
    }

    /// All eigenvalues, by dense eigensolve. Sorted by decreasing real part.
    pub fn dense_eigenvalues(&self) -> Vec<C64> {
        let owned;
        let m = match &self.dense {
            Some(m) => m,
            None => {
                owned = self.materialize();
                &owned
            }
        };
        let mut v = dense_spectrum(m);
        v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        v
    }
}

impl LinearOperator for NbOperator {
    fn dim(&self) -> usize {
        self.index.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let idx = &self.index;
        // Weighted outflow of every supra-node; the backtracking term is
        // subtracted per edge.
        let outflow: Vec<f64> = (0..idx.num_nodes())
            .map(|v| idx.out_edges(v).map(|f| idx.weights[f] * x[f]).sum())
            .collect();
        let row = |e: usize| {
            let v = idx.targets[e] as usize;
            let back = idx.reverse[e] as usize;
            outflow[v] - idx.weights[back] * x[back]
        };
        #[cfg(feature = "parallel")]
        if y.len() >= 50_000 {
            use rayon::prelude::*;
            y.par_iter_mut().enumerate().for_each(|(e, out)| *out = row(e));
            return;
        }
        y.iter_mut().enumerate().for_each(|(e, out)| *out = row(e));
    }
}

/// The `count` eigenvalues of largest real part, by restarted Arnoldi on the
/// matrix-vector product.
pub fn outlier_eigs(b: &NbOperator, count: usize, cfg: &ArnoldiConfig) -> Result<Vec<C64>, EigenError> {
    eigs_largest_real(b, count, cfg)
}

/// Imaginary parts below this fraction of the modulus count as real.
pub const REAL_TOL: f64 = 1e-8;

pub fn is_real(z: C64) -> bool {
    z.im.abs() < REAL_TOL * z.norm().max(f64::MIN_POSITIVE)
}

/// Dense Bethe-Hessian with arbitrary couplings (any `xi, h` with
/// `xi^2 != 1`, `h^2 != 1`). Couplings in `[0, 1)` go through the sparse
/// builder.
pub fn weighted_hessian_dense(g: &TemporalGraph, xi: f64, h: f64) -> Result<DMatrix<f64>> {
    if (0.0..1.0).contains(&xi) && (0.0..1.0).contains(&h) {
        return Ok(build_bethe_hessian(g, xi, h)?.to_dense());
    }
    if (xi * xi - 1.0).abs() < 1e-12 || (h * h - 1.0).abs() < 1e-12 {
        return Err(Error::Domain(format!("couplings xi = {xi}, h = {h} hit a pole")));
    }
    let view = g.supra_view();
    let d = view.num_nodes();
    let mut m = DMatrix::identity(d, d);
    for (u, v, kind) in view.edges() {
        let w = match kind {
            EdgeKind::Spatial => xi,
            EdgeKind::Temporal => h,
        };
        let off = -w / (1.0 - w * w);
        let diag = w * w / (1.0 - w * w);
        m[(u, v)] += off;
        m[(v, u)] += off;
        m[(u, u)] += diag;
        m[(v, v)] += diag;
    }
    Ok(m)
}

/// For each `y`: the number of real eigenvalues of `B_{xi,h}` at or above
/// `y`, and the number of eigenvalues of `H_{xi/y,h/y}` at or below zero.
/// Both come from dense eigensolves.
pub fn duality_check_grid(g: &TemporalGraph, xi: f64, h: f64, ys: &[f64]) -> Result<Vec<(usize, usize)>> {
    let b = build_nb_operator(g, xi, h)?;
    let spectrum = b.dense_eigenvalues();
    ys.iter()
        .map(|&y| {
            if !(y > 0.0) {
                return Err(Error::Domain(format!("y = {y} must be positive")));
            }
            let count_b = spectrum.iter().filter(|&&z| is_real(z) && z.re >= y).count();
            let hm = weighted_hessian_dense(g, xi / y, h / y)?;
            let count_h = SymmetricEigen::new(hm).eigenvalues.iter().filter(|&&mu| mu <= 0.0).count();
            Ok((count_b, count_h))
        })
        .collect()
}

pub fn duality_check(g: &TemporalGraph, xi: f64, h: f64, y: f64) -> Result<(usize, usize)> {
    Ok(duality_check_grid(g, xi, h, &[y])?[0])
}
