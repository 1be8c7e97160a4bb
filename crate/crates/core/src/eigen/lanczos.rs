//! Thick-restart Lanczos for the largest eigenpairs of a symmetric operator.
//!
//! The basis is fully reorthogonalized (two Gram-Schmidt passes) and kept
//! orthogonal to a set of locked vectors, so the iteration acts on the
//! orthogonal complement of previously converged eigenvectors.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, EigenError, LinearOperator};

#[derive(Debug, Clone, Copy)]
pub struct LanczosConfig {
    /// Converged when `||A v - theta v|| <= tol * scale`.
    pub tol: f64,
    /// Lower bound for the operator norm used in the test above; the
    /// largest Ritz value magnitude seen so far is used when larger.
    pub norm_hint: f64,
    pub max_matvecs: usize,
    /// Krylov basis size before a restart.
    pub basis: usize,
    pub seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            norm_hint: 0.0,
            max_matvecs: usize::MAX,
            basis: 40,
            seed: 0,
        }
    }
}

/// Eigenpairs sorted by decreasing eigenvalue.
#[derive(Debug, Clone, Default)]
pub struct RitzPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

fn project_out(w: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(b, w);
        if c != 0.0 {
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// A unit vector orthogonal to `locked` and `basis`, or `None` when those
/// already span the space.
fn random_start(dim: usize, rng: &mut ChaCha8Rng, locked: &[Vec<f64>], basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let before = norm(&v);
        for _ in 0..2 {
            project_out(&mut v, locked);
            project_out(&mut v, basis);
        }
        let after = norm(&v);
        if after > 1e-8 * before {
            v.iter_mut().for_each(|x| *x /= after);
            return Some(v);
        }
    }
    None
}

/// Largest `nev` eigenpairs of `op` on the orthogonal complement of `locked`
/// (an orthonormal set).
pub fn largest(op: &dyn LinearOperator, nev: usize, locked: &[Vec<f64>], cfg: &LanczosConfig) -> Result<RitzPairs, EigenError> {
    let dim = op.dim();
    let avail = dim.saturating_sub(locked.len());
    let nev = nev.min(avail);
    if nev == 0 {
        return Ok(RitzPairs::default());
    }
    let m = cfg.basis.max(2 * nev + 10).min(avail);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    basis.push(random_start(dim, &mut rng, locked, &[]).ok_or(EigenError::Breakdown)?);
    let mut g = DMatrix::<f64>::zeros(m, m);
    let mut matvecs = 0usize;
    let mut scale = cfg.norm_hint.abs();
    let mut w = vec![0.0; dim];
    let mut coeff = vec![0.0; m];
    loop {
        // Expand the basis to m vectors; `beta` couples the last one to the
        // residual direction `w`.
        let mut beta = 0.0;
        let start = basis.len() - 1;
        for j in start..m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            project_out(&mut w, locked);
            coeff[..=j].fill(0.0);
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let c = dot(b, &w);
                    coeff[i] += c;
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            for i in 0..=j {
                g[(i, j)] = coeff[i];
                g[(j, i)] = coeff[i];
            }
            beta = norm(&w);
            if j + 1 < m {
                let tiny = beta <= 1e-12 * scale.max(coeff[j].abs()).max(f64::MIN_POSITIVE);
                let next = if tiny {
                    // Invariant subspace found; continue in a fresh
                    // direction with zero coupling.
                    beta = 0.0;
                    match random_start(dim, &mut rng, locked, &basis) {
                        Some(v) => v,
                        None => break,
                    }
                } else {
                    w.iter().map(|x| x / beta).collect()
                };
                basis.push(next);
            }
        }
        let k = basis.len();
        let eig = SymmetricEigen::new(g.view((0, 0), (k, k)).into_owned());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        scale = scale.max(theta.iter().fold(0.0f64, |a, &x| a.max(x.abs())));
        let last_row: Vec<f64> = order.iter().map(|&i| eig.eigenvectors[(k - 1, i)]).collect();
        let residual: Vec<f64> = last_row.iter().map(|y| (beta * y).abs()).collect();
        let tol = cfg.tol * scale.max(f64::MIN_POSITIVE);
        let converged = residual.iter().take(nev).take_while(|&&r| r <= tol).count();
        let ritz = |cols: &[usize]| -> Vec<Vec<f64>> {
            cols.iter()
                .map(|&c| {
                    let mut v = vec![0.0; dim];
                    for (i, b) in basis.iter().enumerate() {
                        let y = eig.eigenvectors[(i, c)];
                        v.iter_mut().zip(b).for_each(|(x, z)| *x += y * z);
                    }
                    v
                })
                .collect()
        };
        let exhausted = k < m || k == avail;
        if converged == nev || exhausted {
            return Ok(RitzPairs {
                values: theta[..nev].to_vec(),
                vectors: ritz(&order[..nev]),
                residuals: residual[..nev].to_vec(),
                matvecs,
            });
        }
        if matvecs >= cfg.max_matvecs {
            return Err(EigenError::NotConverged {
                matvecs,
                converged,
                wanted: nev,
                partial: Box::new(super::EigenPairs {
                    values: theta[..converged].to_vec(),
                    vectors: ritz(&order[..converged]),
                    residuals: residual[..converged].to_vec(),
                }),
            });
        }
        // Thick restart: keep the leading Ritz vectors plus the residual
        // direction. The projected matrix becomes an arrowhead.
        let keep = (nev + (m - nev) / 2).min(m - 2).max(nev);
        let mut kept = ritz(&order[..keep]);
        // Re-orthonormalize against rounding drift.
        for i in 0..kept.len() {
            let (done, rest) = kept.split_at_mut(i);
            project_out(&mut rest[0], done);
            let nrm = norm(&rest[0]);
            rest[0].iter_mut().for_each(|x| *x /= nrm);
        }
        let mut resid: Vec<f64> = if beta > 0.0 {
            w.iter().map(|x| x / beta).collect()
        } else {
            random_start(dim, &mut rng, locked, &kept).ok_or(EigenError::Breakdown)?
        };
        project_out(&mut resid, &kept);
        let rn = norm(&resid);
        resid.iter_mut().for_each(|x| *x /= rn);
        g.fill(0.0);
        for i in 0..keep {
            g[(i, i)] = theta[i];
            let s = if beta > 0.0 { beta * last_row[i] } else { 0.0 };
            g[(keep, i)] = s;
            g[(i, keep)] = s;
        }
        kept.push(resid);
        basis = kept;
    }
}
