//! Browser bindings for the demo page in `www/`.
//!
//! The plain functions are what the tests exercise; the `#[wasm_bindgen]`
//! wrappers only convert errors for JavaScript.

use qwalk::calibration::{Direction, SweepOptions};
use qwalk::evolution::{evolution_map_over_distance, two_photon_correlation, Spectrum};
use qwalk::experiment::{run_pipeline, Campaign, NoiseModel};
use qwalk::lattice::{CouplingMatrix, Device, DeviceConfig};
use wasm_bindgen::prelude::*;

/// Row-major `steps × n` intensities from `z = 0` to `z_max`.
pub fn walk(n: usize, gamma: f64, z_max: f64, steps: usize, input: usize) -> Result<Vec<f64>, String> {
    if steps == 0 {
        return Err("steps must be at least 1".into());
    }
    let grid: Vec<f64> = if steps == 1 {
        vec![z_max]
    } else {
        (0..steps).map(|i| z_max * i as f64 / (steps - 1) as f64).collect()
    };
    let map = evolution_map_over_distance(n, gamma, &grid, input).map_err(|e| e.to_string())?;
    Ok(map.rows().flatten().copied().collect())
}

/// Result of a synthetic stretch-and-reconstruct run.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Reconstruction {
    n_guides: usize,
    xi: Vec<f64>,
    intensities: Vec<f64>,
    theory: Vec<f64>,
    fidelity: Vec<f64>,
}

#[wasm_bindgen]
impl Reconstruction {
    #[wasm_bindgen(getter)]
    pub fn n_guides(&self) -> usize {
        self.n_guides
    }
    #[wasm_bindgen(getter)]
    pub fn xi(&self) -> Vec<f64> {
        self.xi.clone()
    }
    /// Row-major reconstructed map, one row per entry of `xi`.
    #[wasm_bindgen(getter)]
    pub fn intensities(&self) -> Vec<f64> {
        self.intensities.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn theory(&self) -> Vec<f64> {
        self.theory.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn fidelity(&self) -> Vec<f64> {
        self.fidelity.clone()
    }
}

/// Synthesizes a 450/532/630 nm stretch campaign on the default chip and
/// reconstructs it. A `budget` of 0 switches noise off.
pub fn reconstruction(points: usize, budget: f64, scatter: f64, seed: u64) -> Result<Reconstruction, String> {
    let device = Device::from_config(&DeviceConfig::default()).map_err(|e| e.to_string())?;
    let noise = if budget == 0.0 {
        NoiseModel::noiseless().with_seed(seed)
    } else {
        NoiseModel {
            photon_budget: Some(budget),
            scatter_fraction: scatter,
            ..NoiseModel::default().with_seed(seed)
        }
    };
    let campaign = Campaign::multi_wavelength(&device, points, noise).map_err(|e| e.to_string())?;
    let options = SweepOptions::new(Direction::Decreasing).with_slack(0.05);
    let out = run_pipeline(&device, &campaign, &options).map_err(|e| e.to_string())?;
    Ok(Reconstruction {
        n_guides: out.reconstructed.n_guides(),
        xi: out.reconstructed.xi_grid().to_vec(),
        intensities: out.reconstructed.rows().flatten().copied().collect(),
        theory: out.theory.rows().flatten().copied().collect(),
        fidelity: out.fidelity.values,
    })
}

/// Row-major `n × n` output correlation for photons entering guides `k`
/// and `l` of a uniform array after distance `z`.
pub fn correlation(n: usize, gamma: f64, z: f64, k: usize, l: usize) -> Result<Vec<f64>, String> {
    let spectrum = Spectrum::new(&CouplingMatrix::uniform(n, gamma).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let u = spectrum.propagator(z).map_err(|e| e.to_string())?;
    let gamma = two_photon_correlation(&u, k, l).map_err(|e| e.to_string())?;
    let m = gamma.as_matrix();
    Ok((0..n).flat_map(|q| (0..n).map(move |r| m[(q, r)])).collect())
}

#[wasm_bindgen]
pub fn simulate_map(n: usize, gamma: f64, z_max: f64, steps: usize, input: usize) -> Result<Vec<f64>, JsError> {
    walk(n, gamma, z_max, steps, input).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn reconstruct_demo(points: usize, budget: f64, scatter: f64, seed: u32) -> Result<Reconstruction, JsError> {
    reconstruction(points, budget, scatter, u64::from(seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn two_photon_map(n: usize, gamma: f64, z: f64, k: usize, l: usize) -> Result<Vec<f64>, JsError> {
    correlation(n, gamma, z, k, l).map_err(|e| JsError::new(&e))
}
