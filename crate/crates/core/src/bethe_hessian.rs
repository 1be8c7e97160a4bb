//! The dynamical Bethe-Hessian supra-matrix.
//!
//! For couplings `xi` (spatial) and `h` (temporal) and supra-node `i` at time
//! `t` (index `t * n + i`):
//!
//! * diagonal: `xi^2 d / (1 - xi^2) + (1 + h^2 (phi_t - 1)) / (1 - h^2)`,
//!   with `phi_t` the number of temporal neighbors (1 at the ends, 2 inside);
//! * spatial neighbors: `-xi / (1 - xi^2)`;
//! * the same node at `t +- 1`: `-h / (1 - h^2)`.
//!
//! A single snapshot gives the static matrix with diagonal
//! `1 + xi^2 d / (1 - xi^2)`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::eigen::LinearOperator;
use crate::error::{Error, Result};
use crate::graph::TemporalGraph;

/// Sparse symmetric `nT x nT` matrix in CSR form with full (not half)
/// storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SupraMatrix {
    n: usize,
    t_count: usize,
    xi: f64,
    h: f64,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// Row count above which products are split across threads. Each row is
/// still summed in a fixed order, so results do not depend on scheduling.
#[cfg(feature = "parallel")]
const PARALLEL_ROWS: usize = 20_000;

/// Stored entries to look ahead when prefetching rows of a block operand.
#[cfg(target_arch = "x86_64")]
const PREFETCH_DISTANCE: usize = 12;

fn check_coupling(name: &str, v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} must lie in [0, 1)")))
    }
}

pub fn build_bethe_hessian(g: &TemporalGraph, xi: f64, h: f64) -> Result<SupraMatrix> {
    check_coupling("xi", xi)?;
    check_coupling("h", h)?;
    let (n, t_count) = (g.n(), g.num_snapshots());
    let dim = n * t_count;
    if dim > u32::MAX as usize {
        return Err(Error::Config(format!("dimension {dim} exceeds u32 indexing")));
    }
    let spatial = -xi / (1.0 - xi * xi);
    let temporal = -h / (1.0 - h * h);
    let deg_weight = xi * xi / (1.0 - xi * xi);
    let nnz = dim + 2 * g.num_spatial_edges() + 2 * n * t_count.saturating_sub(1);
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for t in 0..t_count {
        let snap = g.snapshot(t);
        let time_term = if t_count == 1 {
            1.0
        } else {
            let phi_t = if t == 0 || t == t_count - 1 { 1.0 } else { 2.0 };
            (1.0 + h * h * (phi_t - 1.0)) / (1.0 - h * h)
        };
        for i in 0..n {
            let u = t * n + i;
            if t > 0 {
                cols.push((u - n) as u32);
                vals.push(temporal);
            }
            let nb = snap.neighbors(i);
            let split = nb.partition_point(|&j| j < i);
            for &j in &nb[..split] {
                cols.push((t * n + j) as u32);
                vals.push(spatial);
            }
            cols.push(u as u32);
            vals.push(deg_weight * nb.len() as f64 + time_term);
            for &j in &nb[split..] {
                cols.push((t * n + j) as u32);
                vals.push(spatial);
            }
            if t + 1 < t_count {
                cols.push((u + n) as u32);
                vals.push(temporal);
            }
            row_ptr.push(cols.len());
        }
    }
    debug_assert_eq!(cols.len(), nnz);
    Ok(SupraMatrix {
        n,
        t_count,
        xi,
        h,
        row_ptr,
        cols,
        vals,
    })
}

impl SupraMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_snapshots(&self) -> usize {
        self.t_count
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Stored entries of row `r` as `(column, value)`, columns increasing.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        let cols = &self.cols[span.clone()];
        match cols.binary_search(&(c as u32)) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// `H x`, checking the length.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        Ok(y)
    }

    /// Row `row` of `H x` for a row-major `dim x r` block `x`.
    fn product_row(&self, x: &[f64], r: usize, row: usize, out: &mut [f64]) {
        out.fill(0.0);
        for k in self.row_ptr[row]..self.row_ptr[row + 1] {
            #[cfg(target_arch = "x86_64")]
            if let Some(&ahead) = self.cols.get(k + PREFETCH_DISTANCE) {
                // SAFETY: prefetching is a hint and never faults.
                unsafe {
                    use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
                    let p = x.as_ptr().wrapping_add(ahead as usize * r) as *const i8;
                    _mm_prefetch(p, _MM_HINT_T0);
                    _mm_prefetch(p.wrapping_add(64), _MM_HINT_T0);
                }
            }
            let v = self.vals[k];
            let src = &x[self.cols[k] as usize * r..][..r];
            for (o, s) in out.iter_mut().zip(src) {
                *o += v * s;
            }
        }
    }

    /// Applies `H` to `r` columns at once. `x` and `y` are row-major
    /// `dim x r` blocks.
    pub fn apply_block(&self, x: &[f64], y: &mut [f64], r: usize) {
        assert_eq!(x.len(), self.dim() * r);
        assert_eq!(y.len(), self.dim() * r);
        #[cfg(feature = "parallel")]
        if self.dim() >= PARALLEL_ROWS {
            use rayon::prelude::*;
            y.par_chunks_exact_mut(r).enumerate().for_each(|(row, out)| self.product_row(x, r, row, out));
            return;
        }
        y.chunks_exact_mut(r).enumerate().for_each(|(row, out)| self.product_row(x, r, row, out));
    }

    /// Computes `H x` one row at a time and hands each row to `visit`, so
    /// callers can fold the product into other per-row updates in one pass.
    pub fn for_each_product_row(&self, x: &[f64], r: usize, mut visit: impl FnMut(usize, &[f64])) {
        assert_eq!(x.len(), self.dim() * r);
        let mut out = vec![0.0; r];
        for row in 0..self.dim() {
            self.product_row(x, r, row, &mut out);
            visit(row, &out);
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Writes `i j value` lines, one per stored entry.
    pub fn write_coordinates(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.dim(), self.dim(), self.nnz())?;
        for r in 0..self.dim() {
            for (c, v) in self.row(r) {
                writeln!(out, "{r} {c} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

impl LinearOperator for SupraMatrix {
    fn dim(&self) -> usize {
        SupraMatrix::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let kernel = |row: usize| -> f64 {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            acc
        };
        #[cfg(feature = "parallel")]
        if self.dim() >= PARALLEL_ROWS {
            use rayon::prelude::*;
            y.par_iter_mut().enumerate().for_each(|(row, out)| *out = kernel(row));
            return;
        }
        y.iter_mut().enumerate().for_each(|(row, out)| *out = kernel(row));
    }
}
