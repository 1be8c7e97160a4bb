//! Randomized embedding from a polynomial filter of the Bethe-Hessian.
//!
//! The projector onto eigenvalues below zero is approximated by a
//! Jackson-damped Chebyshev expansion of a step function and applied to a
//! Gaussian block `R` with `E[R R^T] = I`. Pairwise distances between rows of
//! the result concentrate around those of the exact negative eigenvectors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bethe_hessian::SupraMatrix;
use crate::cluster::Embedding;
use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 50;

/// Columns of `R` pushed through the recurrence together.
const COLUMN_BLOCK: usize = 16;

/// Damped Chebyshev expansion of the indicator of `[0, threshold]` on the
/// shifted spectrum `[0, interval]`, where `threshold = -mu_min` and
/// `interval = mu_max - mu_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebFilter {
    order: usize,
    mu_min: f64,
    interval: f64,
    /// Damped coefficients of `T_0 .. T_order` in the variable
    /// `s = 2 x / interval - 1`.
    coefficients: Vec<f64>,
}

/// Jackson damping factors `g_0 .. g_p`, with `g_0 = 1`.
pub fn jackson_damping(p: usize) -> Vec<f64> {
    let q = (p + 2) as f64;
    let a = std::f64::consts::PI / q;
    (0..=p)
        .map(|k| {
            let k = k as f64;
            ((q - k) * (k * a).cos() + (k * a).sin() / a.tan()) / q
        })
        .collect()
}

pub fn build_filter(mu_min: f64, mu_max: f64, p: usize) -> Result<ChebFilter> {
    if mu_min >= 0.0 {
        return Err(Error::NoNegativeSpectrum { mu_min });
    }
    if !(mu_max > 0.0) || p == 0 {
        return Err(Error::Config(format!("filter needs mu_max > 0 and p >= 1 (got {mu_max}, {p})")));
    }
    let interval = mu_max - mu_min;
    let s_cut = 2.0 * (-mu_min) / interval - 1.0;
    let theta = s_cut.clamp(-1.0, 1.0).acos();
    let pi = std::f64::consts::PI;
    let damping = jackson_damping(p);
    let coefficients = (0..=p)
        .map(|j| {
            let plain = if j == 0 {
                (pi - theta) / pi
            } else {
                -2.0 * (j as f64 * theta).sin() / (j as f64 * pi)
            };
            plain * damping[j]
        })
        .collect();
    Ok(ChebFilter {
        order: p,
        mu_min,
        interval,
        coefficients,
    })
}

impl ChebFilter {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `[0, mu_max - mu_min]`.
    pub fn interval(&self) -> (f64, f64) {
        (0.0, self.interval)
    }

    /// Cut-off on the shifted axis, `-mu_min`.
    pub fn threshold(&self) -> f64 {
        -self.mu_min
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// The filter at a point `x` of the shifted axis (Clenshaw recurrence).
    pub fn eval(&self, x: f64) -> f64 {
        let s = 2.0 * x / self.interval - 1.0;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coefficients.iter().skip(1).rev() {
            let b0 = 2.0 * s * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        self.coefficients[0] + s * b1 - b2
    }

    /// The filter at an eigenvalue `mu` of the unshifted matrix.
    pub fn eval_unshifted(&self, mu: f64) -> f64 {
        self.eval(mu - self.mu_min)
    }
}

/// Filtered sketch `Y`, one row per supra-node.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchEmbedding {
    pub y: Embedding,
    pub seed: u64,
}

impl SketchEmbedding {
    pub fn sketch_dim(&self) -> usize {
        self.y.dim()
    }
}

/// `ceil(10 ln(nT))`, at least 8.
pub fn default_sketch_dim(nt: usize) -> usize {
    let r = (10.0 * (nt.max(2) as f64).ln()).ceil() as usize;
    r.max(8)
}

/// Gaussian block with variance `1 / r`; column `j` is drawn from its own
/// stream so any column range can be regenerated independently.
fn gaussian_columns(dim: usize, cols: std::ops::Range<usize>, r: usize, seed: u64) -> Vec<f64> {
    let width = cols.len();
    let scale = 1.0 / (r as f64).sqrt();
    let mut out = vec![0.0; dim * width];
    for (c, j) in cols.enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        for row in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            out[row * width + c] = z * scale;
        }
    }
    out
}

/// `Y = f(H - mu_min I) R` by the three-term Chebyshev recurrence on
/// `S = (2 / interval)(H - mu_min I) - I`.
pub fn sketch(h: &SupraMatrix, filter: &ChebFilter, r: usize, seed: u64) -> Result<SketchEmbedding> {
    if r == 0 {
        return Err(Error::Config("sketch dimension must be positive".into()));
    }
    let dim = h.dim();
    let blocks: Vec<std::ops::Range<usize>> = (0..r)
        .step_by(COLUMN_BLOCK)
        .map(|s| s..(s + COLUMN_BLOCK).min(r))
        .collect();
    let run = |cols: &std::ops::Range<usize>| filter_block(h, filter, gaussian_columns(dim, cols.clone(), r, seed), cols.len());
    #[cfg(feature = "parallel")]
    let filtered: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        blocks.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let filtered: Vec<Vec<f64>> = blocks.iter().map(run).collect();
    let mut y = vec![0.0; dim * r];
    for (cols, acc) in blocks.iter().zip(&filtered) {
        let width = cols.len();
        for row in 0..dim {
            y[row * r + cols.start..row * r + cols.end].copy_from_slice(&acc[row * width..(row + 1) * width]);
        }
    }
    Ok(SketchEmbedding {
        y: Embedding::new(dim, r, y)?,
        seed,
    })
}

/// The filter applied to one row-major `dim x width` block. Each step does
/// the product, recurrence and accumulation in a single sweep over the rows.
fn filter_block(h: &SupraMatrix, filter: &ChebFilter, mut prev: Vec<f64>, width: usize) -> Vec<f64> {
    let scale = 2.0 / filter.interval;
    let offset = scale * filter.mu_min + 1.0;
    let coeffs = &filter.coefficients;
    let mut acc: Vec<f64> = prev.iter().map(|v| coeffs[0] * v).collect();
    if coeffs.len() == 1 {
        return acc;
    }
    // T_1(S) R = S R.
    let mut cur = vec![0.0; prev.len()];
    h.for_each_product_row(&prev, width, |row, hx| {
        let o = row * width;
        for j in 0..width {
            let v = scale * hx[j] - offset * prev[o + j];
            cur[o + j] = v;
            acc[o + j] += coeffs[1] * v;
        }
    });
    for &c in &coeffs[2..] {
        // T_{j+1} overwrites T_{j-1} row by row; each row of T_{j-1} is read
        // only for its own update.
        h.for_each_product_row(&cur, width, |row, hx| {
            let o = row * width;
            for j in 0..width {
                let v = 2.0 * (scale * hx[j] - offset * cur[o + j]) - prev[o + j];
                prev[o + j] = v;
                acc[o + j] += c * v;
            }
        });
        std::mem::swap(&mut prev, &mut cur);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe_hessian::build_bethe_hessian;
    use crate::ddcsbm::{generate, ModelParams};
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, SymmetricEigen};

    #[test]
    fn sketch_dims() {
        assert_eq!(default_sketch_dim(2), 8);
        assert_eq!(default_sketch_dim(1000), 70);
        assert_eq!(default_sketch_dim(22026), 100);
    }

    #[test]
    fn damping_starts_at_one_and_decays() {
        let g = jackson_damping(30);
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-14);
        assert!(g.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(g[30].abs() < 0.01);
    }

    #[test]
    fn rejects_nonnegative_spectrum() {
        assert!(matches!(build_filter(0.1, 2.0, 10), Err(Error::NoNegativeSpectrum { .. })));
    }

    #[test]
    fn midpoint_is_one_half() {
        let f = build_filter(-1.0, 1.0, 40).unwrap();
        assert_abs_diff_eq!(f.eval(1.0), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn sanity_band() {
        for &(lo, hi) in &[(-0.3, 2.0), (-1.0, 1.0), (-2.0, 0.5)] {
            for p in [20, 50, 100] {
                let f = build_filter(lo, hi, p).unwrap();
                let at0 = f.eval(0.0);
                let at_end = f.eval(hi - lo);
                assert!(at0 > 0.5 && at0 <= 1.2, "{at0}");
                assert!((-0.2..0.5).contains(&at_end), "{at_end}");
            }
        }
    }

    #[test]
    fn approximates_step_away_from_cut() {
        let (lo, hi) = (-0.7, 3.1);
        let f = build_filter(lo, hi, 200).unwrap();
        let len = hi - lo;
        let cut = -lo;
        let mut worst = 0.0f64;
        for i in 0..1000 {
            let x = len * i as f64 / 999.0;
            if (x - cut).abs() <= 0.02 * len {
                continue;
            }
            let exact = if x <= cut { 1.0 } else { 0.0 };
            worst = worst.max((f.eval(x) - exact).abs());
        }
        assert!(worst <= 0.05, "{worst}");
    }

    #[test]
    fn clenshaw_matches_direct_sum() {
        let f = build_filter(-0.4, 1.3, 12).unwrap();
        for i in 0..20 {
            let x = 1.7 * i as f64 / 19.0;
            let s = 2.0 * x / 1.7 - 1.0;
            let direct: f64 = f.coefficients().iter().enumerate().map(|(j, c)| c * (j as f64 * s.clamp(-1.0, 1.0).acos()).cos()).sum();
            assert_abs_diff_eq!(f.eval(x), direct, epsilon = 1e-12);
        }
    }

    fn planted_hessian(n: usize, t: usize, seed: u64) -> SupraMatrix {
        let p = ModelParams::planted(n, t, 2, 5.0, 1.8, 1.0, 0.6, seed).unwrap();
        let s = generate(&p).unwrap();
        let xi = crate::threshold::lambda_d(t, 0.6, 5.0, 1.0).unwrap();
        build_bethe_hessian(&s.graph, xi, 0.6).unwrap()
    }

    fn extremes(m: &DMatrix<f64>) -> (SymmetricEigen<f64, nalgebra::Dyn>, f64, f64) {
        let e = SymmetricEigen::new(m.clone());
        let lo = e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = e.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (e, lo, hi)
    }

    #[test]
    fn sketch_matches_dense_polynomial() {
        let h = planted_hessian(60, 2, 3);
        let dense = h.to_dense();
        let (e, lo, hi) = extremes(&dense);
        let f = build_filter(lo, hi, 30).unwrap();
        let r = 5;
        let sk = sketch(&h, &f, r, 9).unwrap();
        // Oracle: U f(Lambda) U^T R with the same R.
        let rmat = DMatrix::from_row_slice(h.dim(), r, &gaussian_columns(h.dim(), 0..r, r, 9));
        let fl = DMatrix::from_diagonal(&e.eigenvalues.map(|mu| f.eval_unshifted(mu)));
        let expect = &e.eigenvectors * fl * e.eigenvectors.transpose() * rmat;
        for row in 0..h.dim() {
            for c in 0..r {
                assert_abs_diff_eq!(sk.y.row(row)[c], expect[(row, c)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn diagonal_filter() {
        let f = build_filter(-1.0, 2.0, 150).unwrap();
        for &mu in &[-1.0, -0.6, -0.2, 0.2, 0.9, 2.0] {
            let exact = if mu <= 0.0 { 1.0 } else { 0.0 };
            assert!((f.eval_unshifted(mu) - exact).abs() <= 0.05, "{mu}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let h = planted_hessian(80, 3, 1);
        let f = build_filter(-0.5, 4.0, 20).unwrap();
        let a = sketch(&h, &f, 20, 77).unwrap();
        let b = sketch(&h, &f, 20, 77).unwrap();
        assert_eq!(a, b);
        let c = sketch(&h, &f, 20, 78).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn distances_concentrate_with_more_columns() {
        let h = planted_hessian(100, 2, 4);
        let (_, lo, hi) = extremes(&h.to_dense());
        let f = build_filter(lo, hi, 60).unwrap();
        let spread = |r: usize| {
            let d: Vec<f64> = (0..50)
                .map(|s| {
                    let y = sketch(&h, &f, r, 1000 + s).unwrap().y;
                    y.row(0).iter().zip(y.row(1)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                })
                .collect();
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d.len() as f64;
            var.sqrt() / mean
        };
        assert!(spread(16) >= 2.0 * spread(256));
    }
}
