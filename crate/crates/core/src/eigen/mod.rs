//! Iterative eigensolvers on matrix-free operators.
//!
//! [`extreme_eigs`] and [`negative_eigenpairs`] serve the symmetric
//! Bethe-Hessian; [`arnoldi`] serves the non-symmetric non-backtracking
//! operator.

pub mod arnoldi;
pub mod lanczos;

use nalgebra::DMatrix;

pub use arnoldi::{eigs_largest_real, ArnoldiConfig};
pub use lanczos::{LanczosConfig, RitzPairs};

use crate::threshold::C64;

/// A square linear map applied without materializing it.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`; both slices have length `dim()`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// `shift * I - A`.
pub struct ShiftedNeg<'a> {
    pub op: &'a dyn LinearOperator,
    pub shift: f64,
}

impl LinearOperator for ShiftedNeg<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply(x, y);
        for (o, v) in y.iter_mut().zip(x) {
            *o = self.shift * v - *o;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// All eigenvalues of a dense real matrix, in no particular order.
///
/// Uses faer's Hessenberg QR, which handles the defective, highly
/// non-normal matrices that small non-backtracking operators produce.
pub fn dense_spectrum(m: &DMatrix<f64>) -> Vec<C64> {
    let d = m.nrows();
    if d == 0 {
        return Vec::new();
    }
    let fm = faer::Mat::<f64>::from_fn(d, d, |i, j| m[(i, j)]);
    match fm.eigenvalues() {
        Ok(ev) => ev.iter().map(|z| C64::new(z.re, z.im)).collect(),
        // Only reachable on non-finite input.
        Err(_) => vec![C64::new(f64::NAN, f64::NAN); d],
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EigenError {
    #[error("eigensolver stopped after {matvecs} products with {converged} of {wanted} pairs converged")]
    NotConverged {
        matvecs: usize,
        converged: usize,
        wanted: usize,
        partial: Box<EigenPairs>,
    },
    #[error("Arnoldi stopped after {matvecs} products with {converged} of {wanted} eigenvalues converged")]
    NotConvergedComplex {
        matvecs: usize,
        converged: usize,
        wanted: usize,
        partial: Vec<C64>,
    },
    #[error("could not build a start vector orthogonal to the locked subspace")]
    Breakdown,
}

/// Eigenpairs with ascending values; `vectors[j]` belongs to `values[j]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The vectors as a row-major `dim x m` block.
    pub fn row_major(&self) -> Vec<f64> {
        let m = self.vectors.len();
        let dim = self.vectors.first().map_or(0, Vec::len);
        let mut out = vec![0.0; dim * m];
        for (j, v) in self.vectors.iter().enumerate() {
            for (r, x) in v.iter().enumerate() {
                out[r * m + j] = *x;
            }
        }
        out
    }
}

/// Settings shared by the symmetric drivers.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Relative residual tolerance.
    pub tol: f64,
    /// Matrix-vector products allowed per stage, as a multiple of the
    /// dimension.
    pub matvecs_per_dim: usize,
    pub basis: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            matvecs_per_dim: 10,
            basis: 40,
            seed: 0x5eed,
        }
    }
}

impl SolverConfig {
    fn lanczos(&self, dim: usize, norm_hint: f64, stage: u64) -> LanczosConfig {
        LanczosConfig {
            tol: self.tol,
            norm_hint,
            max_matvecs: (self.matvecs_per_dim * dim).max(200),
            basis: self.basis,
            seed: self.seed.wrapping_add(stage),
        }
    }
}

/// Smallest and largest eigenvalues `(mu_min, mu_max)` of a symmetric
/// operator. The largest comes from Lanczos on `op`, the smallest from
/// Lanczos on `mu_max I - op`.
pub fn extreme_eigs(op: &dyn LinearOperator, cfg: &SolverConfig) -> Result<(f64, f64), EigenError> {
    let dim = op.dim();
    let top = lanczos::largest(op, 1, &[], &cfg.lanczos(dim, 0.0, 0))?;
    let mu_max = top.values[0];
    let shifted = ShiftedNeg { op, shift: mu_max };
    let bottom = lanczos::largest(&shifted, 1, &[], &cfg.lanczos(dim, mu_max.abs(), 1))?;
    Ok((mu_max - bottom.values[0], mu_max))
}

/// All eigenpairs below `-eps0`, found incrementally.
#[derive(Debug, Clone)]
pub struct NegativeSpectrum {
    /// The negative pairs, ascending. When none exists this holds the single
    /// smallest pair and `below_detectability` is set.
    pub pairs: EigenPairs,
    pub below_detectability: bool,
    /// Number of negative eigenvalues found (`0` when below detectability).
    pub m: usize,
    /// The first eigenvalue at or above `-eps0`, when it was computed.
    pub next_value: Option<f64>,
    pub mu_max: f64,
    pub eps0: f64,
    pub matvecs: usize,
}

/// Negative eigenpairs of a symmetric operator: the `k + 1` smallest pairs
/// first, then one more at a time with earlier pairs locked, until an
/// eigenvalue reaches `-eps0 = -1e-8 max(1, |mu_min|)` or `cap` pairs are
/// found. The value that stops the search is reported as `next_value`.
pub fn negative_eigenpairs(op: &dyn LinearOperator, k: usize, cap: usize, cfg: &SolverConfig) -> Result<NegativeSpectrum, EigenError> {
    let dim = op.dim();
    let cap = cap.max(1).min(dim);
    let mut matvecs = 0;
    let top = lanczos::largest(op, 1, &[], &cfg.lanczos(dim, 0.0, 0))?;
    matvecs += top.matvecs;
    let mu_max = top.values[0];
    let shifted = ShiftedNeg { op, shift: mu_max };
    let norm_hint = mu_max.abs();

    let first = (k + 1).min(cap + 1).min(dim);
    let stage0 = lanczos::largest(&shifted, first, &[], &cfg.lanczos(dim, norm_hint, 1)).map_err(|e| rebase(e, mu_max, &[]))?;
    matvecs += stage0.matvecs;
    let values: Vec<f64> = stage0.values.iter().map(|t| mu_max - t).collect();
    let eps0 = 1e-8 * values[0].abs().max(1.0);

    let mut pairs = EigenPairs::default();
    let mut next_value = None;
    for (j, &v) in values.iter().enumerate() {
        if v < -eps0 && pairs.len() < cap {
            pairs.values.push(v);
            pairs.vectors.push(stage0.vectors[j].clone());
            pairs.residuals.push(stage0.residuals[j]);
        } else {
            next_value = Some(v);
            break;
        }
    }
    let mut stage = 2;
    while next_value.is_none() && pairs.len() < dim {
        let one = lanczos::largest(&shifted, 1, &pairs.vectors, &cfg.lanczos(dim, norm_hint, stage)).map_err(|e| rebase(e, mu_max, &pairs.values))?;
        matvecs += one.matvecs;
        stage += 1;
        let v = mu_max - one.values[0];
        if v < -eps0 && pairs.len() < cap {
            pairs.values.push(v);
            pairs.vectors.push(one.vectors[0].clone());
            pairs.residuals.push(one.residuals[0]);
        } else {
            next_value = Some(v);
        }
    }
    // Locked stages may return values slightly out of order.
    sort_ascending(&mut pairs);
    if pairs.is_empty() {
        let v = values[0];
        return Ok(NegativeSpectrum {
            pairs: EigenPairs {
                values: vec![v],
                vectors: vec![stage0.vectors[0].clone()],
                residuals: vec![stage0.residuals[0]],
            },
            below_detectability: true,
            m: 0,
            next_value: values.get(1).copied(),
            mu_max,
            eps0,
            matvecs,
        });
    }
    let m = pairs.len();
    Ok(NegativeSpectrum {
        pairs,
        below_detectability: false,
        m,
        next_value,
        mu_max,
        eps0,
        matvecs,
    })
}

fn sort_ascending(p: &mut EigenPairs) {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p.values[a].total_cmp(&p.values[b]));
    p.values = idx.iter().map(|&i| p.values[i]).collect();
    p.vectors = idx.iter().map(|&i| std::mem::take(&mut p.vectors[i])).collect();
    p.residuals = idx.iter().map(|&i| p.residuals[i]).collect();
}

/// Converts a failure on the shifted operator back to original eigenvalues
/// and prepends the pairs already found.
fn rebase(e: EigenError, shift: f64, found: &[f64]) -> EigenError {
    match e {
        EigenError::NotConverged {
            matvecs,
            converged,
            wanted,
            partial,
        } => {
            let mut values: Vec<f64> = found.to_vec();
            values.extend(partial.values.iter().map(|t| shift - t));
            EigenError::NotConverged {
                matvecs,
                converged: converged + found.len(),
                wanted: wanted + found.len(),
                partial: Box::new(EigenPairs {
                    values,
                    vectors: partial.vectors,
                    residuals: partial.residuals,
                }),
            }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe_hessian::build_bethe_hessian;
    use crate::ddcsbm::{generate, ModelParams};
    use crate::threshold::lambda_d;
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;

    fn residual(op: &dyn LinearOperator, v: &[f64], mu: f64) -> f64 {
        let mut y = vec![0.0; v.len()];
        op.apply(v, &mut y);
        y.iter().zip(v).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn diagonal_extremes() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 0.5, 2.0]));
        let (lo, hi) = extreme_eigs(&d, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(lo, -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(hi, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn temporal_pair_extremes() {
        let g = crate::TemporalGraph::from_edges(1, vec![vec![], vec![]]).unwrap();
        let h = 0.6;
        let m = build_bethe_hessian(&g, 0.2, h).unwrap();
        let (lo, hi) = extreme_eigs(&m, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(lo, 1.0 / (1.0 + h), epsilon = 1e-10);
        assert_abs_diff_eq!(hi, 1.0 / (1.0 - h), epsilon = 1e-10);
    }

    #[test]
    fn identity_extremes() {
        let s = generate(&ModelParams::symmetric(50, 3, 2, 6.0, 2.0, 0.5, 1)).unwrap();
        let m = build_bethe_hessian(&s.graph, 0.0, 0.0).unwrap();
        let (lo, hi) = extreme_eigs(&m, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-12);
    }

    fn dense_sorted(op: &crate::bethe_hessian::SupraMatrix) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(op.to_dense()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn planted_hessian(n: usize, t: usize, eta: f64, ratio: f64, seed: u64) -> crate::bethe_hessian::SupraMatrix {
        let c = 6.0;
        let alpha = ratio * crate::threshold::alpha_c(t, eta);
        let p = ModelParams::planted(n, t, 2, c, alpha, 1.0, eta, seed).unwrap();
        let s = generate(&p).unwrap();
        let xi = lambda_d(t, eta, c, 1.0).unwrap();
        build_bethe_hessian(&s.graph, xi, eta).unwrap()
    }

    #[test]
    fn negative_pairs_match_dense() {
        for (seed, eta) in [(1, 0.7), (2, 0.2), (3, 0.95)] {
            let h = planted_hessian(400, 3, eta, 2.0, seed);
            let dense = dense_sorted(&h);
            let neg = negative_eigenpairs(&h, 2, 6, &SolverConfig::default()).unwrap();
            let eps0 = neg.eps0;
            let expected: Vec<f64> = dense.iter().copied().filter(|&v| v < -eps0).take(6).collect();
            assert!(!neg.below_detectability);
            assert_eq!(neg.pairs.values.len(), expected.len(), "seed {seed}: {:?} vs {:?}", neg.pairs.values, expected);
            for (a, b) in neg.pairs.values.iter().zip(&expected) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
            if expected.len() < 6 {
                assert_abs_diff_eq!(neg.next_value.unwrap(), dense[expected.len()], epsilon = 1e-8);
            }
            let scale = dense[0].abs().max(dense[dense.len() - 1].abs());
            for (v, mu) in neg.pairs.vectors.iter().zip(&neg.pairs.values) {
                assert!(residual(&h, v, *mu) <= 1e-6 * scale);
            }
            for i in 0..neg.pairs.len() {
                for j in 0..neg.pairs.len() {
                    let d = dot(&neg.pairs.vectors[i], &neg.pairs.vectors[j]);
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((d - e).abs() < 1e-10, "orthonormality {i} {j}: {d}");
                }
            }
        }
    }

    #[test]
    fn below_threshold_flag() {
        // Positive definite: tiny couplings keep H close to the identity.
        let s = generate(&ModelParams::symmetric(200, 2, 2, 4.0, 4.0, 0.5, 4)).unwrap();
        let h = build_bethe_hessian(&s.graph, 0.05, 0.05).unwrap();
        let neg = negative_eigenpairs(&h, 2, 4, &SolverConfig::default()).unwrap();
        assert!(neg.below_detectability);
        assert_eq!(neg.m, 0);
        assert_eq!(neg.pairs.len(), 1);
        assert!(neg.pairs.values[0] > 0.0);
    }

    #[test]
    fn larger_cap_is_superset() {
        let h = planted_hessian(300, 4, 0.1, 1.8, 7);
        let small = negative_eigenpairs(&h, 2, 3, &SolverConfig::default()).unwrap();
        let big = negative_eigenpairs(&h, 2, 8, &SolverConfig::default()).unwrap();
        assert!(small.m <= big.m);
        for v in &small.pairs.values {
            assert!(big.pairs.values.iter().any(|w| (w - v).abs() < 1e-8));
        }
    }

    #[test]
    fn shifted_operator() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0]));
        let s = ShiftedNeg { op: &d, shift: 5.0 };
        let mut y = [0.0; 2];
        s.apply(&[1.0, 1.0], &mut y);
        assert_eq!(y, [4.0, 2.0]);
    }
}
