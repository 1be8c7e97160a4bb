//! Restarted Arnoldi for the eigenvalues of largest real part of a
//! non-symmetric operator.
//!
//! Each cycle extends an orthonormal basis `V` with `A V_m = V_{m+1} G`,
//! computes Ritz values of the leading `m x m` block of `G`, and restarts from
//! a real orthonormal basis of the wanted Ritz vectors (real and imaginary
//! parts of complex pairs) plus the residual direction.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, EigenError, LinearOperator};
use crate::threshold::C64;

#[derive(Debug, Clone, Copy)]
pub struct ArnoldiConfig {
    /// Converged when the Ritz residual is below `tol` times the largest
    /// Ritz value magnitude.
    pub tol: f64,
    pub max_matvecs: usize,
    /// Basis size; `0` picks `max(2 count + 40, 60)`.
    pub basis: usize,
    pub seed: u64,
}

impl Default for ArnoldiConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_matvecs: 200_000,
            basis: 0,
            seed: 0xa5a5,
        }
    }
}

/// Operators up to this dimension are materialized and solved densely when
/// the Krylov basis would cover most of the space anyway.
const DENSE_FALLBACK: usize = 64;

fn sort_by_real(v: &mut [C64]) {
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// Dense eigenvalues of a materialized operator, sorted by decreasing real
/// part.
pub fn dense_eigenvalues(op: &dyn LinearOperator) -> Vec<C64> {
    let dim = op.dim();
    let mut m = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    let mut col = vec![0.0; dim];
    for c in 0..dim {
        e[c] = 1.0;
        op.apply(&e, &mut col);
        e[c] = 0.0;
        m.set_column(c, &DVector::from_column_slice(&col));
    }
    let mut v: Vec<C64> = if dim == 0 {
        Vec::new()
    } else {
        super::dense_spectrum(&m)
    };
    sort_by_real(&mut v);
    v
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(u, v)| *u += a * v);
}

fn unit_random(dim: usize, rng: &mut ChaCha8Rng, against: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        for _ in 0..2 {
            for b in against {
                let c = dot(b, &v);
                axpy(&mut v, -c, b);
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            return Some(v);
        }
    }
    None
}

/// Unit eigenvector of `g` for the eigenvalue `mu` by inverse iteration.
fn ritz_vector(g: &DMatrix<f64>, mu: C64, rng: &mut ChaCha8Rng) -> DVector<C64> {
    let m = g.nrows();
    let mut b = DVector::from_fn(m, |_, _| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let scale = g.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
    for attempt in 0..4 {
        let delta = Complex::new(1e-11 * scale * 10f64.powi(attempt), 0.0);
        let shifted = g.map(|x| Complex::new(x, 0.0)) - DMatrix::from_diagonal_element(m, m, mu + delta);
        let lu = shifted.lu();
        let mut ok = true;
        for _ in 0..3 {
            match lu.solve(&b) {
                Some(x) if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
                    let n = x.norm();
                    if n == 0.0 {
                        ok = false;
                        break;
                    }
                    b = x / Complex::new(n, 0.0);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            break;
        }
    }
    // Fix the phase so the largest entry is real.
    let (imax, _) = b.iter().enumerate().fold((0, 0.0), |(bi, bv), (i, z)| {
        if z.norm() > bv {
            (i, z.norm())
        } else {
            (bi, bv)
        }
    });
    let phase = b[imax] / Complex::new(b[imax].norm(), 0.0);
    b.map(|z| z / phase)
}

/// The `count` eigenvalues of largest real part, sorted by decreasing real
/// part.
pub fn eigs_largest_real(op: &dyn LinearOperator, count: usize, cfg: &ArnoldiConfig) -> Result<Vec<C64>, EigenError> {
    let dim = op.dim();
    let count = count.min(dim);
    if count == 0 {
        return Ok(Vec::new());
    }
    let m = if cfg.basis == 0 { (2 * count + 40).max(60) } else { cfg.basis.max(count + 4) };
    if dim <= DENSE_FALLBACK.max(m + 2) {
        let mut all = dense_eigenvalues(op);
        all.truncate(count);
        return Ok(all);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut basis: Vec<Vec<f64>> = vec![unit_random(dim, &mut rng, &[]).ok_or(EigenError::Breakdown)?];
    let mut g = DMatrix::<f64>::zeros(m + 1, m);
    let mut w = vec![0.0; dim];
    let mut coeff = vec![0.0; m + 1];
    let mut matvecs = 0usize;
    loop {
        let start = basis.len() - 1;
        for j in start..m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            coeff[..=j].fill(0.0);
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let c = dot(b, &w);
                    coeff[i] += c;
                    axpy(&mut w, -c, b);
                }
            }
            for i in 0..=j {
                g[(i, j)] = coeff[i];
            }
            let beta = dot(&w, &w).sqrt();
            let colscale = coeff[..=j].iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            if beta <= 1e-12 * colscale.max(1e-300) {
                g[(j + 1, j)] = 0.0;
                basis.push(unit_random(dim, &mut rng, &basis).ok_or(EigenError::Breakdown)?);
            } else {
                g[(j + 1, j)] = beta;
                basis.push(w.iter().map(|x| x / beta).collect());
            }
        }
        let gm = g.view((0, 0), (m, m)).into_owned();
        let mut ritz: Vec<C64> = super::dense_spectrum(&gm);
        sort_by_real(&mut ritz);
        let scale = ritz.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(1e-300);
        let beta = g[(m, m - 1)];

        // Wanted set, not splitting a conjugate pair at the boundary.
        let mut keep = (count + (m - count) / 2).min(m - 2).max(count);
        if keep < m && ritz[keep - 1].im != 0.0 && (ritz[keep] - ritz[keep - 1].conj()).norm() <= 1e-10 * scale {
            keep += 1;
        }
        let vecs: Vec<DVector<C64>> = ritz[..keep].iter().map(|&mu| ritz_vector(&gm, mu, &mut rng)).collect();
        let resid: Vec<f64> = vecs.iter().map(|y| beta.abs() * y[m - 1].norm()).collect();
        let converged = resid[..count].iter().take_while(|&&r| r <= cfg.tol * scale).count();
        if converged == count {
            return Ok(ritz[..count].to_vec());
        }
        if matvecs >= cfg.max_matvecs {
            return Err(EigenError::NotConvergedComplex {
                matvecs,
                converged,
                wanted: count,
                partial: ritz[..converged].to_vec(),
            });
        }

        // Real basis of the wanted invariant subspace of `gm`.
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(keep + 1);
        for (mu, y) in ritz[..keep].iter().zip(&vecs) {
            if mu.im.abs() <= 1e-12 * scale {
                cols.push(y.map(|z| z.re));
            } else if mu.im > 0.0 || !ritz[..keep].iter().any(|z| (z - mu.conj()).norm() <= 1e-10 * scale) {
                cols.push(y.map(|z| z.re));
                cols.push(y.map(|z| z.im));
            }
        }
        let mut wq: Vec<DVector<f64>> = Vec::with_capacity(cols.len());
        for mut c in cols {
            let before = c.norm();
            for _ in 0..2 {
                for q in &wq {
                    let d = q.dot(&c);
                    c.axpy(-d, q, 1.0);
                }
            }
            let n = c.norm();
            if n > 1e-8 * before && wq.len() < m - 1 {
                wq.push(c / n);
            }
        }
        let q = wq.len();
        let wmat = DMatrix::from_columns(&wq);
        let proj = wmat.transpose() * &gm * &wmat;
        let coupling = wmat.row(m - 1) * beta;

        let mut next: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        for c in 0..q {
            let mut v = vec![0.0; dim];
            for (i, b) in basis[..m].iter().enumerate() {
                let y = wmat[(i, c)];
                if y != 0.0 {
                    axpy(&mut v, y, b);
                }
            }
            next.push(v);
        }
        next.push(std::mem::take(&mut basis[m]));
        basis = next;
        g.fill(0.0);
        g.view_mut((0, 0), (q, q)).copy_from(&proj);
        for c in 0..q {
            g[(q, c)] = coupling[c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(DMatrix<f64>);

    impl LinearOperator for Dense {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            let r = &self.0 * DVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
        }
    }

    fn random_matrix(dim: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DMatrix::from_fn(dim, dim, |_, _| (rng.random::<f64>() - 0.5) / (dim as f64).sqrt());
        // A few planted outliers, one complex pair.
        for k in 0..4 {
            m[(k, k)] += 3.0 - 0.4 * k as f64;
        }
        m[(5, 6)] += 1.5;
        m[(6, 5)] -= 1.5;
        m[(5, 5)] += 2.0;
        m[(6, 6)] += 2.0;
        m
    }

    #[test]
    fn matches_dense_spectrum() {
        for seed in 0..3 {
            let a = Dense(random_matrix(300, seed));
            let dense = dense_eigenvalues(&a);
            let got = eigs_largest_real(&a, 10, &ArnoldiConfig::default()).unwrap();
            assert_eq!(got.len(), 10);
            for (x, y) in got.iter().zip(&dense) {
                assert!((x - y).norm() < 1e-8, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn small_operators_use_dense_path() {
        let a = Dense(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let got = eigs_largest_real(&a, 2, &ArnoldiConfig::default()).unwrap();
        assert!((got[0] - Complex::new(0.0, 1.0)).norm() < 1e-12);
        assert!((got[1] - Complex::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn reports_partial_results() {
        let a = Dense(random_matrix(300, 9));
        let cfg = ArnoldiConfig {
            max_matvecs: 10,
            ..Default::default()
        };
        match eigs_largest_real(&a, 40, &cfg) {
            Err(EigenError::NotConvergedComplex { wanted, .. }) => assert_eq!(wanted, 40),
            other => panic!("expected partial failure, got {other:?}"),
        }
    }
}
