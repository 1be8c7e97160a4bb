//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every entry point samples a planted two-class model from its own seed, so
//! the page is deterministic for a given set of slider positions.

use dynbethe::ddcsbm::generate;
use dynbethe::pipeline::{EtaChoice, KChoice, Mode, PlantedModel};
use dynbethe::spectrum::{build_nb_operator, DENSE_MAX};
use dynbethe::threshold::{alpha_c, predicted_isolated_eigs, Horizon};
use dynbethe::{detect, DetectConfig};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn planted(n: usize, t: usize, c: f64, phi: f64, eta: f64, alpha_ratio: f64) -> PlantedModel {
    PlantedModel {
        n,
        snapshots: t,
        k: 2,
        c,
        phi,
        eta,
        tau: 0.0,
        alpha_ratio,
        alpha: None,
    }
}

/// `alpha_c(T, eta)` on `points` evenly spaced values of `eta` in `[0, 1]`.
/// `t = 0` stands for an infinite horizon.
#[wasm_bindgen]
pub fn threshold_curve(t: usize, points: usize) -> Vec<f64> {
    let horizon = if t == 0 { Horizon::Infinite } else { Horizon::Finite(t) };
    let points = points.max(2);
    (0..points)
        .map(|i| alpha_c(horizon, i as f64 / (points - 1) as f64))
        .collect()
}

#[wasm_bindgen]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    predicted: Vec<f64>,
    bulk_radius: f64,
}

#[wasm_bindgen]
impl Spectrum {
    /// Interleaved `re, im` pairs of every eigenvalue.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.clone()
    }

    /// Interleaved `re, im` pairs of the predicted outliers.
    pub fn predicted(&self) -> Vec<f64> {
        self.predicted.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn bulk_radius(&self) -> f64 {
        self.bulk_radius
    }
}

/// Full spectrum of the weighted non-backtracking operator on a sampled
/// graph, with the predicted outlier positions for the same model.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn nb_spectrum(n: usize, t: usize, c: f64, eta: f64, alpha_ratio: f64, xi: f64, h: f64, seed: u64) -> Result<Spectrum, JsError> {
    let model = planted(n, t, c, 1.0, eta, alpha_ratio);
    let params = model.params(seed).map_err(js_err)?;
    let summary = dynbethe::ddcsbm::model_summary(&params).map_err(js_err)?;
    let sample = generate(&params).map_err(js_err)?;
    let b = build_nb_operator(&sample.graph, xi, h).map_err(js_err)?;
    if b.dim() > DENSE_MAX {
        return Err(JsError::new(&format!("operator dimension {} exceeds {DENSE_MAX}; lower n, T or c", b.dim())));
    }
    let pred = predicted_isolated_eigs(xi, h, summary.c, summary.phi, summary.lambda, eta, t);
    let flat = |zs: &[dynbethe::threshold::C64]| zs.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<f64>>();
    let both: Vec<_> = pred.informative.iter().chain(&pred.uninformative).copied().collect();
    Ok(Spectrum {
        eigenvalues: flat(&b.dense_eigenvalues()),
        predicted: flat(&both),
        bulk_radius: pred.bulk_radius,
    })
}

#[wasm_bindgen]
pub struct DetectionView {
    n: usize,
    truth: Vec<u32>,
    estimate: Vec<u32>,
    overlaps: Vec<f64>,
    eigenvalues: Vec<f64>,
}

#[wasm_bindgen]
impl DetectionView {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Planted labels, snapshot-major.
    pub fn truth(&self) -> Vec<u32> {
        self.truth.clone()
    }

    /// Estimated labels, snapshot-major.
    pub fn estimate(&self) -> Vec<u32> {
        self.estimate.clone()
    }

    pub fn overlaps(&self) -> Vec<f64> {
        self.overlaps.clone()
    }

    /// The negative eigenvalues used for the embedding (empty in fast mode).
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.clone()
    }
}

/// Samples a planted model and runs detection with the planted `eta`.
#[wasm_bindgen]
pub fn run_detection(n: usize, t: usize, eta: f64, alpha_ratio: f64, fast: bool, seed: u64) -> Result<DetectionView, JsError> {
    let model = planted(n, t, 6.0, 1.0, eta, alpha_ratio);
    let sample = generate(&model.params(seed).map_err(js_err)?).map_err(js_err)?;
    let cfg = DetectConfig {
        eta: EtaChoice::Fixed(eta.min(0.99)),
        k: KChoice::Fixed(2),
        mode: if fast { Mode::Fast } else { Mode::Exact },
        seed,
        ..Default::default()
    };
    let det = detect(&sample.graph, &cfg).map_err(js_err)?;
    let overlaps = (0..t)
        .map(|s| dynbethe::metrics::overlap(sample.labels.column(s), det.labels().column(s), 2))
        .collect::<dynbethe::Result<Vec<f64>>>()
        .map_err(js_err)?;
    let to_u32 = |v: &[usize]| v.iter().map(|&l| l as u32).collect::<Vec<u32>>();
    Ok(DetectionView {
        n,
        truth: to_u32(sample.labels.as_slice()),
        estimate: to_u32(det.labels().as_slice()),
        overlaps,
        eigenvalues: det.diagnostics.eigenvalues.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_curve_ends_at_known_values() {
        let curve = threshold_curve(4, 11);
        assert!((curve[10] - 0.5).abs() < 1e-12);
        assert!((curve[0] - 1.0).abs() < 1e-12);
        assert!(curve.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn spectrum_has_outliers_near_predictions() {
        let s = nb_spectrum(150, 2, 5.0, 0.7, 2.0, 0.35, 0.6, 1).ok().unwrap();
        assert!(!s.predicted().is_empty());
        let top = s.eigenvalues().chunks(2).map(|z| z[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!(top > s.bulk_radius());
    }

    #[test]
    fn detection_view_is_consistent() {
        let v = run_detection(300, 3, 0.7, 2.5, false, 4).ok().unwrap();
        assert_eq!(v.truth().len(), 900);
        assert_eq!(v.estimate().len(), 900);
        assert_eq!(v.overlaps().len(), 3);
        assert!(v.overlaps().iter().sum::<f64>() / 3.0 > 0.3);
    }
}
