//! Detectability threshold from the branching-process transition matrices.
//!
//! The `3T x 3T` matrix tracks a message on the supra-graph by the way it
//! arrived at time `t`: from `t + 1` (backward), along a spatial edge, or from
//! `t - 1` (forward). Spatial moves carry weight `a^2`, temporal moves `b^2`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

const BACKWARD: usize = 0;
const SPATIAL: usize = 1;
const FORWARD: usize = 2;

/// Dense nonnegative branching matrix, either the `2 x 2` infinite-horizon
/// form or the `3T x 3T` finite-horizon form.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    matrix: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        crate::eigen::dense_spectrum(&self.matrix)
    }
}

/// `[[a^2, 2 b^2], [a^2, b^2]]`, the `T -> infinity` matrix.
pub fn build_m_inf(a: f64, b: f64) -> TransitionMatrix {
    let (a2, b2) = (a * a, b * b);
    TransitionMatrix {
        matrix: DMatrix::from_row_slice(2, 2, &[a2, 2.0 * b2, a2, b2]),
    }
}

/// The finite-horizon matrix with boundary blocks at `t = 0` and `t = T - 1`.
pub fn build_mt(a: f64, b: f64, t_count: usize) -> Result<TransitionMatrix> {
    if t_count < 2 {
        return Err(Error::Domain(format!(
            "the finite-horizon matrix needs T >= 2, got {t_count}"
        )));
    }
    Ok(mt_any(a, b, t_count))
}

/// Same as [`build_mt`] but accepts `T = 1`, where only the spatial
/// self-transition survives.
fn mt_any(a: f64, b: f64, t_count: usize) -> TransitionMatrix {
    let (a2, b2) = (a * a, b * b);
    let dim = 3 * t_count;
    let mut m = DMatrix::zeros(dim, dim);
    let at = |t: usize, state: usize| 3 * t + state;
    for t in 0..t_count {
        // A spatial arrival continues spatially, or leaves forward/backward.
        m[(at(t, SPATIAL), at(t, SPATIAL))] = a2;
        if t > 0 {
            m[(at(t, SPATIAL), at(t, BACKWARD))] = b2;
        }
        if t + 1 < t_count {
            m[(at(t, SPATIAL), at(t, FORWARD))] = b2;
        }
        // Leaving forward lands at t + 1 as a forward arrival, which may
        // continue spatially or further forward.
        if t + 1 < t_count {
            m[(at(t, FORWARD), at(t + 1, SPATIAL))] = a2;
            if t + 2 < t_count {
                m[(at(t, FORWARD), at(t + 1, FORWARD))] = b2;
            }
        }
        if t > 0 {
            m[(at(t, BACKWARD), at(t - 1, SPATIAL))] = a2;
            if t > 1 {
                m[(at(t, BACKWARD), at(t - 1, BACKWARD))] = b2;
            }
        }
    }
    TransitionMatrix { matrix: m }
}

/// Largest eigenvalue modulus, by dense eigensolve.
pub fn spectral_radius(m: &TransitionMatrix) -> f64 {
    m.eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// True iff `rho(m) < 1`.
///
/// For a nonnegative `m`, `rho(m) < 1` exactly when `I - m` is a nonsingular
/// M-matrix, i.e. when every pivot of unpivoted Gaussian elimination on
/// `I - m` is positive. Entries of the finite-horizon matrix lie within five
/// diagonals of the main one and elimination without pivoting keeps that
/// band, so this costs `O(T)`.
fn subcritical(m: &TransitionMatrix) -> bool {
    let dim = m.dim();
    let band = 6.min(dim);
    let mut w = DMatrix::<f64>::identity(dim, dim) - m.as_matrix();
    for k in 0..dim {
        let pivot = w[(k, k)];
        if !(pivot > 0.0) {
            return false;
        }
        let end = (k + band).min(dim);
        for i in k + 1..end {
            let f = w[(i, k)] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k..end {
                w[(i, j)] -= f * w[(k, j)];
            }
        }
    }
    true
}

/// Number of snapshots, or the infinite-horizon limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

impl From<usize> for Horizon {
    fn from(t: usize) -> Self {
        Horizon::Finite(t)
    }
}

/// Bisection steps on `[1e-6, 1]`; the bracket shrinks below `1e-17`.
const BISECTION_STEPS: usize = 60;

/// The threshold `alpha_c(T, eta)`: the `alpha` at which the finite-horizon
/// matrix `M_T(alpha, eta)` has spectral radius one.
pub fn alpha_c(horizon: impl Into<Horizon>, eta: f64) -> f64 {
    let eta = eta.clamp(0.0, 1.0);
    match horizon.into() {
        Horizon::Infinite => ((1.0 - eta * eta) / (1.0 + eta * eta)).sqrt(),
        Horizon::Finite(0) | Horizon::Finite(1) => 1.0,
        Horizon::Finite(t) if eta == 1.0 => 1.0 / (t as f64).sqrt(),
        Horizon::Finite(t) => {
            let (mut lo, mut hi) = (1e-6, 1.0);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if subcritical(&mt_any(mid, eta, t)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

/// The operating coupling `alpha_c / sqrt(c * phi)`.
pub fn lambda_d(t_count: usize, eta: f64, c: f64, phi: f64) -> Result<f64> {
    let cphi = c * phi;
    if !(cphi > 0.0) {
        return Err(Error::Domain(format!("c * phi must be positive, got {cphi}")));
    }
    if cphi <= 1.0 {
        log::warn!("c * phi = {cphi} <= 1: snapshots have no giant component");
    }
    Ok(alpha_c(t_count, eta) / cphi.sqrt())
}

/// Radius of the disk holding the bulk spectrum of the weighted
/// non-backtracking operator with couplings `xi` (spatial) and `h` (temporal).
pub fn bulk_radius(xi: f64, h: f64, c: f64, phi: f64, t_count: usize) -> f64 {
    let a = (c * phi).sqrt() * xi;
    spectral_radius(&mt_any(a, h, t_count.max(1))).sqrt()
}

/// Predicted outliers of the non-backtracking spectrum, each list sorted by
/// modulus descending and restricted to modulus above the bulk radius.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedEigs {
    pub informative: Vec<C64>,
    pub uninformative: Vec<C64>,
    pub bulk_radius: f64,
}

impl PredictedEigs {
    /// Relative distance from `z` to the nearest predicted eigenvalue.
    pub fn relative_distance(&self, z: C64) -> f64 {
        self.informative
            .iter()
            .chain(&self.uninformative)
            .map(|p| (z - p).norm() / p.norm())
            .fold(f64::INFINITY, f64::min)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn predicted_isolated_eigs(
    xi: f64,
    h: f64,
    c: f64,
    phi: f64,
    lambda: f64,
    eta: f64,
    t_count: usize,
) -> PredictedEigs {
    let t_count = t_count.max(1);
    let radius = bulk_radius(xi, h, c, phi, t_count);
    let keep = |m: TransitionMatrix| {
        let mut v: Vec<C64> = m
            .eigenvalues()
            .into_iter()
            .filter(|z| z.norm() > radius)
            .collect();
        v.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
        v
    };
    PredictedEigs {
        informative: keep(mt_any((c * phi * xi * lambda).sqrt(), (eta * h).sqrt(), t_count)),
        uninformative: keep(mt_any((c * phi * xi).sqrt(), h.sqrt(), t_count)),
        bulk_radius: radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent construction: a multi-type branching process whose types
    /// are (time, arrival direction), written from the walk rules rather
    /// than from the block layout.
    fn branching_oracle(a2: f64, b2: f64, t_count: usize) -> DMatrix<f64> {
        #[derive(PartialEq, Clone, Copy)]
        enum Arr {
            Space,
            FromPast,
            FromFuture,
        }
        let kinds = [Arr::Space, Arr::FromPast, Arr::FromFuture];
        let idx = |t: usize, k: Arr| 3 * t + kinds.iter().position(|&x| x == k).unwrap();
        let mut m = DMatrix::zeros(3 * t_count, 3 * t_count);
        for t in 0..t_count {
            for &k in &kinds {
                let i = idx(t, k);
                m[(i, idx(t, Arr::Space))] += a2;
                if t + 1 < t_count && k != Arr::FromFuture {
                    m[(i, idx(t + 1, Arr::FromPast))] += b2;
                }
                if t > 0 && k != Arr::FromPast {
                    m[(i, idx(t - 1, Arr::FromFuture))] += b2;
                }
            }
        }
        m
    }

    fn radius_of(m: &DMatrix<f64>) -> f64 {
        crate::eigen::dense_spectrum(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn matches_branching_oracle_radius() {
        for t in 2..8 {
            for &(a, b) in &[(0.3, 0.2), (0.8, 0.5), (1.1, 0.9), (0.5, 1.0)] {
                let ours = spectral_radius(&build_mt(a, b, t).unwrap());
                let oracle = radius_of(&branching_oracle(a * a, b * b, t));
                assert_abs_diff_eq!(ours, oracle, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn boundary_rows_are_zero_and_can_be_dropped() {
        for t in 2..7 {
            let m = build_mt(0.7, 0.6, t).unwrap();
            let mm = m.as_matrix();
            let d = mm.nrows();
            assert!(mm.row(0).iter().all(|&x| x == 0.0));
            assert!(mm.row(d - 1).iter().all(|&x| x == 0.0));
            assert!(mm.iter().all(|&x| x >= 0.0));
            let inner = mm.view((1, 1), (d - 2, d - 2)).into_owned();
            let mut full: Vec<f64> = m.eigenvalues().iter().map(|z| z.norm()).collect();
            let mut red: Vec<f64> = crate::eigen::dense_spectrum(&inner).iter().map(|z| z.norm()).collect();
            full.sort_by(|a, b| b.total_cmp(a));
            red.sort_by(|a, b| b.total_cmp(a));
            for (x, y) in full.iter().zip(&red) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-9);
            }
            assert!(full[d - 2..].iter().all(|&x| x < 1e-9));
        }
    }

    #[test]
    fn build_examples() {
        assert_abs_diff_eq!(spectral_radius(&build_mt(0.7, 0.0, 2).unwrap()), 0.49, epsilon = 1e-12);
        assert_eq!(spectral_radius(&build_mt(0.0, 0.0, 5).unwrap()), 0.0);
        let b: f64 = 0.6;
        let a = (1.0 / (1.0 + b * b)).sqrt();
        assert_abs_diff_eq!(spectral_radius(&build_mt(a, b, 2).unwrap()), 1.0, epsilon = 1e-12);
        assert!(build_mt(1.0, 0.5, 1).is_err());
    }

    #[test]
    fn m_inf_radius() {
        assert_abs_diff_eq!(spectral_radius(&build_m_inf(1.0, 0.0)), 1.0, epsilon = 1e-14);
        for &(a, b) in &[(0.4, 0.3), (1.2, 0.7), (0.9, 0.9)] {
            let (a2, b2): (f64, f64) = (a * a, b * b);
            let closed = (a2 + b2 + ((a2 + b2).powi(2) + 4.0 * a2 * b2).sqrt()) / 2.0;
            assert_abs_diff_eq!(spectral_radius(&build_m_inf(a, b)), closed, epsilon = 1e-12);
        }
        for &eta in &[0.0, 0.3, 0.8] {
            let m = build_m_inf(alpha_c(Horizon::Infinite, eta), eta);
            assert_abs_diff_eq!(spectral_radius(&m), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn subcritical_agrees_with_eigensolve() {
        for t in [1, 2, 3, 6, 11] {
            for k in 1..40 {
                let a = 0.05 * k as f64;
                for &b in &[0.0, 0.35, 0.8, 1.0] {
                    let m = mt_any(a, b, t);
                    let rho = spectral_radius(&m);
                    if (rho - 1.0).abs() > 1e-9 {
                        assert_eq!(subcritical(&m), rho < 1.0, "t={t} a={a} b={b} rho={rho}");
                    }
                }
            }
        }
    }

    #[test]
    fn alpha_c_examples() {
        for t in [2, 3, 7] {
            assert_abs_diff_eq!(alpha_c(t, 0.0), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(alpha_c(t, 1.0), 1.0 / (t as f64).sqrt(), epsilon = 1e-15);
        }
        assert_eq!(alpha_c(1, 0.4), 1.0);
        let e: f64 = 0.5;
        let t3 = 2f64.sqrt() / (2.0 + e.powi(4) + e * e * (8.0 + e.powi(4)).sqrt()).sqrt();
        assert_abs_diff_eq!(alpha_c(3, e), t3, epsilon = 1e-8);
        // The root really is where the radius crosses one.
        let a = alpha_c(5, 0.45);
        assert_abs_diff_eq!(spectral_radius(&build_mt(a, 0.45, 5).unwrap()), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn lambda_d_examples() {
        assert_abs_diff_eq!(lambda_d(3, 0.0, 10.0, 1.0).unwrap(), 0.1f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(lambda_d(4, 1.0, 4.0, 1.0).unwrap(), 0.25, epsilon = 1e-15);
        assert!(lambda_d(4, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn bulk_radius_examples() {
        let (c, phi) = (6.0, 1.3);
        for &(t, eta) in &[(2, 0.3), (4, 0.7), (9, 0.9)] {
            let ld = lambda_d(t, eta, c, phi).unwrap();
            assert_abs_diff_eq!(bulk_radius(ld, eta, c, phi, t), 1.0, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(bulk_radius(0.3, 0.0, c, phi, 2), 0.3 * (c * phi).sqrt(), epsilon = 1e-12);
        assert_eq!(bulk_radius(0.0, 0.0, c, phi, 3), 0.0);
    }

    #[test]
    fn predictions() {
        let p = predicted_isolated_eigs(0.3, 0.5, 8.0, 1.2, 1.0, 1.0, 3);
        assert_eq!(p.informative, p.uninformative);

        let (c, phi, lambda, eta, t) = (10.0, 1.0, 0.6, 0.4, 3);
        let p = predicted_isolated_eigs(lambda, eta, c, phi, lambda, eta, t);
        let alpha = (c * phi * lambda * lambda).sqrt();
        let mu1 = spectral_radius(&build_mt(alpha, eta, t).unwrap());
        assert_abs_diff_eq!(p.informative[0].norm(), mu1, epsilon = 1e-9);
        assert_abs_diff_eq!(p.bulk_radius, mu1.sqrt(), epsilon = 1e-9);
        for w in p.uninformative.windows(2) {
            assert!(w[0].norm() >= w[1].norm());
        }
        assert!(p.uninformative.iter().all(|z| z.norm() > p.bulk_radius));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn alpha_c_decreasing_in_eta(t in 2usize..12, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
                let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
                prop_assert!(alpha_c(t, hi) <= alpha_c(t, lo) + 1e-10);
            }

            #[test]
            fn alpha_c_decreasing_in_t(t in 1usize..15, eta in 0.0f64..1.0) {
                prop_assert!(alpha_c(t + 1, eta) <= alpha_c(t, eta) + 1e-10);
                prop_assert!(alpha_c(Horizon::Infinite, eta) <= alpha_c(t, eta) + 1e-10);
            }

            #[test]
            fn radius_increasing_in_a(t in 2usize..8, a in 0.0f64..1.5, da in 0.0f64..0.5, b in 0.0f64..1.0) {
                let r1 = spectral_radius(&build_mt(a, b, t).unwrap());
                let r2 = spectral_radius(&build_mt(a + da, b, t).unwrap());
                prop_assert!(r2 >= r1 - 1e-9);
            }
        }
    }
}
