//! Device geometry and the physical coupling models that turn
//! (geometry, strain, wavelength) into a coupling matrix and a normalized
//! propagation length.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Static layout of the chip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_guides: usize,
    /// Centre-to-centre spacing of the main array, µm.
    pub pitch_um: f64,
    /// Propagation length, mm.
    pub chip_length_mm: f64,
    /// Spacing inside each flanking reference pair, µm. The pairs are far
    /// enough from the array that they never couple to it.
    pub reference_pitch_um: f64,
    /// Propagation constant, rad/µm. Only enters as a global phase.
    pub beta_per_um: f64,
}

impl ArrayGeometry {
    pub fn new(
        n_guides: usize,
        pitch_um: f64,
        chip_length_mm: f64,
        reference_pitch_um: f64,
        beta_per_um: f64,
    ) -> Result<Self> {
        if n_guides < 2 {
            return Err(invalid(format!("n_guides must be >= 2, got {n_guides}")));
        }
        for (name, v) in [
            ("pitch_um", pitch_um),
            ("chip_length_mm", chip_length_mm),
            ("reference_pitch_um", reference_pitch_um),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !beta_per_um.is_finite() {
            return Err(invalid("beta_per_um must be finite"));
        }
        Ok(Self {
            n_guides,
            pitch_um,
            chip_length_mm,
            reference_pitch_um,
            beta_per_um,
        })
    }

    /// Index of the central waveguide (the injection site used throughout).
    pub fn center(&self) -> usize {
        self.n_guides / 2
    }

    /// Global phase `βz` accumulated over the chip, in radians.
    pub fn global_phase(&self) -> f64 {
        self.beta_per_um * self.chip_length_mm * 1e3
    }
}

/// Evanescent coupling as a function of homogeneous transverse strain.
///
/// Stretching by a fraction `s` increases every gap by `base_pitch · s`, and
/// coupling decays exponentially with the gap:
/// `γ(s) = γ0 · exp(−κ · base_pitch · s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainCouplingModel {
    /// Coupling at zero strain, rad/mm.
    pub gamma0: f64,
    /// Decay constant of coupling with separation, 1/µm.
    pub kappa: f64,
    /// Unstrained separation, µm.
    pub base_pitch: f64,
}

impl StrainCouplingModel {
    pub fn new(gamma0: f64, kappa: f64, base_pitch: f64) -> Result<Self> {
        if !(gamma0.is_finite() && gamma0 > 0.0) {
            return Err(invalid(format!("gamma0 must be positive, got {gamma0}")));
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(invalid(format!("kappa must be positive, got {kappa}")));
        }
        if !(base_pitch.is_finite() && base_pitch > 0.0) {
            return Err(invalid(format!("base_pitch must be positive, got {base_pitch}")));
        }
        Ok(Self {
            gamma0,
            kappa,
            base_pitch,
        })
    }

    pub fn gamma_from_strain(&self, strain: f64) -> Result<f64> {
        if !(strain.is_finite() && strain >= 0.0) {
            return Err(invalid(format!("strain must be >= 0, got {strain}")));
        }
        Ok(self.gamma0 * (-self.kappa * self.base_pitch * strain).exp())
    }

    /// Coupling for a pair whose unstrained gap is `pitch` rather than
    /// `base_pitch`, at the same homogeneous strain.
    pub fn gamma_at_pitch(&self, pitch: f64, strain: f64) -> Result<f64> {
        let gamma = self.gamma_from_strain(strain)?;
        Ok(gamma * (-self.kappa * (pitch - self.base_pitch) * (1.0 + strain)).exp())
    }
}

/// Wavelength dependence of the coupling, as a multiplicative scale on `γ`.
///
/// Entries are `(wavelength nm, scale)` with wavelength strictly increasing
/// and scale strictly increasing (longer wavelengths have wider mode tails and
/// couple more strongly). Queries are linearly interpolated and never
/// extrapolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct WavelengthCouplingModel {
    table: Vec<(f64, f64)>,
}

impl WavelengthCouplingModel {
    pub fn new(table: Vec<(f64, f64)>) -> Result<Self> {
        if table.is_empty() {
            return Err(invalid("wavelength table is empty"));
        }
        for &(wl, scale) in &table {
            if !(wl.is_finite() && wl > 0.0) {
                return Err(invalid(format!("wavelength must be positive, got {wl}")));
            }
            if !(scale.is_finite() && scale > 0.0) {
                return Err(invalid(format!("scale factor must be positive, got {scale}")));
            }
        }
        for pair in table.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(invalid("wavelength table must be strictly increasing in wavelength"));
            }
            if pair[1].1 <= pair[0].1 {
                return Err(invalid(
                    "scale factors must increase with wavelength",
                ));
            }
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &[(f64, f64)] {
        &self.table
    }

    pub fn range(&self) -> (f64, f64) {
        (self.table[0].0, self.table[self.table.len() - 1].0)
    }

    pub fn scale(&self, wavelength: f64) -> Result<f64> {
        let (min, max) = self.range();
        if !(wavelength >= min && wavelength <= max) {
            return Err(Error::WavelengthOutOfRange {
                wavelength,
                min,
                max,
            });
        }
        let hi = self
            .table
            .iter()
            .position(|&(wl, _)| wl >= wavelength)
            .expect("in range");
        if hi == 0 || self.table[hi].0 == wavelength {
            return Ok(self.table[hi].1);
        }
        let (w0, s0) = self.table[hi - 1];
        let (w1, s1) = self.table[hi];
        let t = (wavelength - w0) / (w1 - w0);
        Ok(s0 + t * (s1 - s0))
    }
}

impl TryFrom<Vec<[f64; 2]>> for WavelengthCouplingModel {
    type Error = Error;

    fn try_from(rows: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(rows.into_iter().map(|[w, s]| (w, s)).collect())
    }
}

impl From<WavelengthCouplingModel> for Vec<[f64; 2]> {
    fn from(model: WavelengthCouplingModel) -> Self {
        model.table.into_iter().map(|(w, s)| [w, s]).collect()
    }
}

/// Real symmetric matrix of jumping rates with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    entries: DMatrix<f64>,
}

impl CouplingMatrix {
    /// Uniform nearest-neighbour array: `C[k][l] = γ` iff `|k − l| = 1`.
    pub fn uniform(n: usize, gamma: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("need at least 2 waveguides, got {n}")));
        }
        Self::nearest_neighbour(&vec![gamma; n - 1])
    }

    /// Nearest-neighbour chain with one rate per adjacent pair.
    pub fn nearest_neighbour(rates: &[f64]) -> Result<Self> {
        if rates.is_empty() {
            return Err(invalid("need at least one coupling rate"));
        }
        if let Some(bad) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(invalid(format!("coupling rates must be >= 0, got {bad}")));
        }
        let n = rates.len() + 1;
        let mut entries = DMatrix::zeros(n, n);
        for (k, &rate) in rates.iter().enumerate() {
            entries[(k, k + 1)] = rate;
            entries[(k + 1, k)] = rate;
        }
        Ok(Self { entries })
    }

    /// Arbitrary graph. The matrix must be square, exactly symmetric,
    /// nonnegative and have a zero diagonal.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: entries.ncols(),
            });
        }
        if n < 2 {
            return Err(invalid("need at least 2 waveguides"));
        }
        for k in 0..n {
            if entries[(k, k)] != 0.0 {
                return Err(invalid("diagonal must be zero"));
            }
            for l in 0..n {
                let v = entries[(k, l)];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid("entries must be finite and nonnegative"));
                }
                if v != entries[(l, k)] {
                    return Err(invalid("matrix must be symmetric"));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[(k, l)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Largest jumping rate; equals `γ` for a uniform array. Used as the
    /// rate that defines `ξ` for non-uniform graphs.
    pub fn max_rate(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Same graph with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(invalid(format!("scale must be >= 0, got {factor}")));
        }
        Ok(Self {
            entries: &self.entries * factor,
        })
    }
}

/// Distance in units of the coupling length `L_c = π/(2γ)`: `ξ = 2γz/π`.
pub fn normalized_length(gamma: f64, z: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(invalid(format!("gamma must be >= 0, got {gamma}")));
    }
    if !(z.is_finite() && z >= 0.0) {
        return Err(invalid(format!("z must be >= 0, got {z}")));
    }
    Ok(gamma * z / FRAC_PI_2)
}

/// `L_c = π/(2γ)`; infinite when there is no coupling.
pub fn coupling_length(gamma: f64) -> f64 {
    FRAC_PI_2 / gamma
}

/// Propagation distance that realizes `xi` at coupling `gamma`.
pub fn z_for_xi(gamma: f64, xi: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    if !(xi.is_finite() && xi >= 0.0) {
        return Err(invalid(format!("xi must be >= 0, got {xi}")));
    }
    Ok(xi * FRAC_PI_2 / gamma)
}

/// JSON device description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub n_guides: usize,
    pub pitch_um: f64,
    pub chip_length_mm: f64,
    /// Coupling at zero strain and at a wavelength with scale 1, rad/mm.
    pub gamma0_per_mm: f64,
    pub kappa_per_um: f64,
    pub wavelength_table: WavelengthCouplingModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_pitch_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_per_um: Option<f64>,
}

impl Default for DeviceConfig {
    /// A 51-guide, 17.5 µm pitch, 7 mm chip. `γ0` puts the unstretched
    /// 532 nm walk at `ξ = 0.38`; `κ` brings it to `ξ = 0.13` at +10 %
    /// strain; the wavelength table is a non-authoritative fit that spans
    /// `ξ` up to 0.8 at 630 nm.
    fn default() -> Self {
        let chip_length_mm = 7.0;
        let pitch_um = 17.5;
        Self {
            n_guides: 51,
            pitch_um,
            chip_length_mm,
            gamma0_per_mm: 0.38 * FRAC_PI_2 / chip_length_mm,
            kappa_per_um: (0.38f64 / 0.13).ln() / (pitch_um * 0.10),
            wavelength_table: WavelengthCouplingModel::new(vec![
                (450.0, 0.55),
                (532.0, 1.0),
                (630.0, 0.8 / 0.38),
            ])
            .expect("valid default table"),
            reference_pitch_um: None,
            beta_per_um: None,
        }
    }
}

impl DeviceConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Device::from_config(&config)?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A chip together with its coupling models.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub geometry: ArrayGeometry,
    pub strain_model: StrainCouplingModel,
    pub wavelength_model: WavelengthCouplingModel,
}

impl Device {
    pub fn from_config(config: &DeviceConfig) -> Result<Self> {
        let geometry = ArrayGeometry::new(
            config.n_guides,
            config.pitch_um,
            config.chip_length_mm,
            config.reference_pitch_um.unwrap_or(config.pitch_um),
            config.beta_per_um.unwrap_or(0.0),
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let strain_model =
            StrainCouplingModel::new(config.gamma0_per_mm, config.kappa_per_um, config.pitch_um)
                .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            geometry,
            strain_model,
            wavelength_model: config.wavelength_table.clone(),
        })
    }

    /// Array coupling at the given strain and wavelength, rad/mm.
    pub fn gamma_at(&self, strain: f64, wavelength: f64) -> Result<f64> {
        gamma_at(
            &self.geometry,
            &self.strain_model,
            &self.wavelength_model,
            strain,
            wavelength,
        )
    }

    /// Coupling inside the reference pairs.
    pub fn reference_gamma_at(&self, strain: f64, wavelength: f64) -> Result<f64> {
        let gamma = self
            .strain_model
            .gamma_at_pitch(self.geometry.reference_pitch_um, strain)?;
        Ok(gamma * self.wavelength_model.scale(wavelength)?)
    }

    /// Ratio between reference-pair and array coupling, independent of
    /// wavelength.
    pub fn reference_scale(&self, strain: f64) -> Result<f64> {
        let array = self.strain_model.gamma_from_strain(strain)?;
        let reference = self
            .strain_model
            .gamma_at_pitch(self.geometry.reference_pitch_um, strain)?;
        Ok(reference / array)
    }

    pub fn xi_at(&self, strain: f64, wavelength: f64) -> Result<f64> {
        normalized_length(self.gamma_at(strain, wavelength)?, self.geometry.chip_length_mm)
    }

    pub fn coupling_at(&self, strain: f64, wavelength: f64) -> Result<CouplingMatrix> {
        CouplingMatrix::uniform(self.geometry.n_guides, self.gamma_at(strain, wavelength)?)
    }
}

/// Array coupling from the strain model scaled by the wavelength model.
pub fn gamma_at(
    _geometry: &ArrayGeometry,
    strain_model: &StrainCouplingModel,
    wl_model: &WavelengthCouplingModel,
    strain: f64,
    wavelength: f64,
) -> Result<f64> {
    let scale = wl_model.scale(wavelength)?;
    Ok(strain_model.gamma_from_strain(strain)? * scale)
}
