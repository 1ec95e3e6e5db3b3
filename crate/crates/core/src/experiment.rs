//! Synthetic measurement campaigns: strain sweeps rendered into noisy
//! end-face snapshots with known ground truth.
//!
//! Each snapshot applies, in order: propagation loss, scattered light moved
//! onto fixed guides, photon counting, additive readout noise and clamping
//! at zero. Randomness comes from a ChaCha8 generator seeded per snapshot;
//! the per-snapshot seed is `splitmix64(master ^ splitmix64(stream))` with
//! `stream = (sweep << 32) | index`, so any snapshot can be regenerated from
//! the seed stored alongside it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::calibration::{CalibratedXi, ReferenceReading, SweepOptions};
use crate::error::{invalid, Error, Result};
use crate::evolution::{normalize, uniform_walk, EvolutionMap, Spectrum};
use crate::lattice::{normalized_length, CouplingMatrix, Device, DeviceConfig};
use crate::reconstruction::{calibrate_snapshots, fidelity_curve, reconstruct, FidelityCurve, Snapshot};

/// Largest strain a sweep may request.
pub const MAX_STRAIN: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Expected detected photons per frame before loss; `None` disables
    /// counting noise.
    pub photon_budget: Option<f64>,
    /// Fraction of the array power redistributed onto `scatter_sites`.
    pub scatter_fraction: f64,
    /// Guide offsets relative to the centre of the array.
    pub scatter_sites: Vec<i64>,
    /// Standard deviation of additive per-guide noise, as a fraction of the
    /// expected frame total.
    pub readout_sigma: f64,
    pub loss_db_per_mm: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            photon_budget: Some(1e4),
            scatter_fraction: 0.02,
            scatter_sites: vec![-3, 3],
            readout_sigma: 0.001,
            loss_db_per_mm: 0.1,
            seed: DEFAULT_SEED,
        }
    }
}

pub const DEFAULT_SEED: u64 = 20_170_815;

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            photon_budget: None,
            scatter_fraction: 0.0,
            scatter_sites: Vec::new(),
            readout_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.photon_budget {
            if !(b.is_finite() && b > 0.0) {
                return Err(invalid(format!("photon budget must be positive, got {b}")));
            }
        }
        if !(self.scatter_fraction >= 0.0 && self.scatter_fraction < 1.0) {
            return Err(invalid("scatter fraction must lie in [0, 1)"));
        }
        if self.scatter_fraction > 0.0 && self.scatter_sites.is_empty() {
            return Err(invalid("scatter fraction set but no scatter sites"));
        }
        if !(self.readout_sigma.is_finite() && self.readout_sigma >= 0.0) {
            return Err(invalid("readout sigma must be >= 0"));
        }
        if !(self.loss_db_per_mm.is_finite() && self.loss_db_per_mm >= 0.0) {
            return Err(invalid("loss must be >= 0 dB/mm"));
        }
        Ok(())
    }

    /// Power transmission over `length_mm`.
    pub fn loss_factor(&self, length_mm: f64) -> f64 {
        10f64.powf(-self.loss_db_per_mm * length_mm / 10.0)
    }

    /// Scatter sites as absolute indices for an `n`-guide array.
    pub fn absolute_sites(&self, n: usize) -> Result<Vec<usize>> {
        let center = (n / 2) as i64;
        self.scatter_sites
            .iter()
            .map(|&offset| {
                let k = center + offset;
                if k < 0 || k >= n as i64 {
                    Err(invalid(format!("scatter site {offset} outside {n}-guide array")))
                } else {
                    Ok(k as usize)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    /// Strictly increasing strains in `[0, MAX_STRAIN]`.
    pub strains: Vec<f64>,
    /// nm
    pub wavelength: f64,
    pub input_index: usize,
}

impl SweepPlan {
    /// `points` strains evenly spaced over `[0, strain_max]`.
    pub fn linear(wavelength: f64, strain_max: f64, points: usize, input_index: usize) -> Result<Self> {
        if points == 0 {
            return Err(invalid("sweep needs at least one point"));
        }
        let strains = if points == 1 {
            vec![0.0]
        } else {
            (0..points)
                .map(|i| strain_max * i as f64 / (points - 1) as f64)
                .collect()
        };
        let plan = Self {
            strains,
            wavelength,
            input_index,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strains.is_empty() {
            return Err(invalid("sweep plan has no strains"));
        }
        if self
            .strains
            .iter()
            .any(|s| !(*s >= 0.0 && *s <= MAX_STRAIN))
        {
            return Err(invalid(format!("strains must lie in [0, {MAX_STRAIN}]")));
        }
        if self.strains.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("strains must be strictly increasing"));
        }
        Ok(())
    }
}

/// One deformation state of the chip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanPoint {
    pub strain: f64,
    pub wavelength: f64,
    pub input_index: usize,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of snapshot `index` in sweep `sweep` of a campaign.
pub fn derive_seed(master: u64, sweep: u32, index: u32) -> u64 {
    let stream = (u64::from(sweep) << 32) | u64::from(index);
    splitmix64(master ^ splitmix64(stream))
}

/// Renders a normalized distribution into detector readings.
///
/// `sites` receive the scattered power; `loss` scales the total.
pub fn apply_noise<R: Rng + ?Sized>(
    frame: &[f64],
    loss: f64,
    noise: &NoiseModel,
    sites: &[usize],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut expected: Vec<f64> = frame.iter().map(|p| p * loss).collect();
    if noise.scatter_fraction > 0.0 && !sites.is_empty() {
        let moved = noise.scatter_fraction * loss;
        expected.iter_mut().for_each(|p| *p *= 1.0 - noise.scatter_fraction);
        let share = moved / sites.len() as f64;
        for &k in sites {
            expected[k] += share;
        }
    }
    let scale = noise.photon_budget.unwrap_or(1.0);
    let mut counts: Vec<f64> = match noise.photon_budget {
        Some(budget) => expected
            .iter()
            .map(|&p| {
                let mean = budget * p;
                if mean > 0.0 {
                    Poisson::new(mean)
                        .map(|d| d.sample(rng))
                        .map_err(|e| Error::Numerical(e.to_string()))
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<_>>()?,
        None => expected,
    };
    if noise.readout_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.readout_sigma * scale * loss)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        counts.iter_mut().for_each(|c| *c += normal.sample(rng));
    }
    counts.iter_mut().for_each(|c| *c = c.max(0.0));
    Ok(counts)
}

/// Simulates one end-face measurement, seeded by `noise.seed`.
pub fn synth_snapshot(device: &Device, point: PlanPoint, noise: &NoiseModel) -> Result<Snapshot> {
    noise.validate()?;
    let n = device.geometry.n_guides;
    if point.input_index >= n {
        return Err(Error::IndexOutOfRange {
            index: point.input_index,
            len: n,
        });
    }
    let length = device.geometry.chip_length_mm;
    let gamma = device.gamma_at(point.strain, point.wavelength)?;
    let spectrum = Spectrum::new(&CouplingMatrix::uniform(n, gamma)?)?;
    let frame = spectrum.frame(length, point.input_index)?;

    let theta = device.reference_gamma_at(point.strain, point.wavelength)? * length;
    let pair = [theta.cos().powi(2), theta.sin().powi(2)];

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let loss = noise.loss_factor(length);
    let sites = noise.absolute_sites(n)?;
    let raw = apply_noise(&frame.intensities, loss, noise, &sites, &mut rng)?;
    let reference_noise = NoiseModel {
        scatter_fraction: 0.0,
        ..noise.clone()
    };
    let mut reference = apply_noise(&pair, loss, &reference_noise, &[], &mut rng)?;
    if reference.iter().all(|&p| p == 0.0) {
        // A fully dark reference carries no information; keep the reading
        // valid with a single count in the bar arm.
        reference[0] = 1.0;
    }
    let snapshot = Snapshot {
        raw_intensities: raw,
        reference: ReferenceReading::new(reference[0], reference[1])?,
        strain: point.strain,
        wavelength: point.wavelength,
        seed: Some(noise.seed),
    };
    if snapshot.raw_intensities.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroPower);
    }
    Ok(snapshot)
}

/// All snapshots of one sweep, with seeds derived from `noise.seed`.
pub fn synth_sweep(plan: &SweepPlan, device: &Device, noise: &NoiseModel) -> Result<Vec<Snapshot>> {
    synth_sweep_indexed(plan, device, noise, 0)
}

fn synth_sweep_indexed(plan: &SweepPlan, device: &Device, noise: &NoiseModel, sweep: u32) -> Result<Vec<Snapshot>> {
    plan.validate()?;
    plan.strains
        .iter()
        .enumerate()
        .map(|(i, &strain)| {
            let seeded = noise.clone().with_seed(derive_seed(noise.seed, sweep, i as u32));
            synth_snapshot(
                device,
                PlanPoint {
                    strain,
                    wavelength: plan.wavelength,
                    input_index: plan.input_index,
                },
                &seeded,
            )
        })
        .collect()
}

/// A set of sweeps sharing one device and noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub plans: Vec<SweepPlan>,
    pub noise: NoiseModel,
}

impl Campaign {
    /// Single 532 nm sweep over the full strain range.
    pub fn single(device: &Device, wavelength: f64, points: usize, noise: NoiseModel) -> Result<Self> {
        Ok(Self {
            plans: vec![SweepPlan::linear(wavelength, MAX_STRAIN, points, device.geometry.center())?],
            noise,
        })
    }

    /// Sweeps at 450, 532 and 630 nm, together covering `ξ` from about 0.04
    /// to 0.8 on the default device.
    pub fn multi_wavelength(device: &Device, points: usize, noise: NoiseModel) -> Result<Self> {
        let plans = [450.0, 532.0, 630.0]
            .into_iter()
            .map(|wl| SweepPlan::linear(wl, MAX_STRAIN, points, device.geometry.center()))
            .collect::<Result<_>>()?;
        Ok(Self { plans, noise })
    }

    pub fn synthesize(&self, device: &Device) -> Result<Vec<Snapshot>> {
        let mut out = Vec::new();
        for (sweep, plan) in self.plans.iter().enumerate() {
            out.extend(synth_sweep_indexed(plan, device, &self.noise, sweep as u32)?);
        }
        Ok(out)
    }

    pub fn input_index(&self) -> Result<usize> {
        let first = self
            .plans
            .first()
            .ok_or_else(|| invalid("campaign has no sweeps"))?
            .input_index;
        if self.plans.iter().any(|p| p.input_index != first) {
            return Err(invalid("all sweeps of a campaign must share the input guide"));
        }
        Ok(first)
    }
}

/// Record of how a snapshot set was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub device: DeviceConfig,
    pub campaign: Campaign,
    pub master_seed: u64,
}

/// Nominal `ξ` of a snapshot according to the device model, used as the
/// branch prior when calibrating.
pub fn nominal_xi(device: &Device, snapshot: &Snapshot) -> Option<f64> {
    let gamma = device.reference_gamma_at(snapshot.strain, snapshot.wavelength).ok()?;
    normalized_length(gamma, device.geometry.chip_length_mm).ok()
}

/// Converts reference-pair `ξ` into array `ξ` when the reference couplers
/// have a different pitch from the array.
pub fn to_array_xi(device: &Device, snapshots: &[Snapshot], calibration: &mut [CalibratedXi]) -> Result<()> {
    for (s, c) in snapshots.iter().zip(calibration.iter_mut()) {
        let scale = device.reference_scale(s.strain)?;
        if scale != 1.0 {
            c.xi /= scale;
        }
    }
    Ok(())
}

/// Everything produced by running a campaign end to end.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub snapshots: Vec<Snapshot>,
    pub calibration: Vec<CalibratedXi>,
    pub reconstructed: EvolutionMap,
    pub theory: EvolutionMap,
    pub fidelity: FidelityCurve,
}

/// Synthesize, calibrate (with device-model priors), reconstruct on the
/// calibrated grid and score against the ideal walk.
pub fn run_pipeline(device: &Device, campaign: &Campaign, options: &SweepOptions) -> Result<PipelineOutput> {
    let snapshots = campaign.synthesize(device)?;
    let mut calibration = calibrate_snapshots(&snapshots, options, |s| nominal_xi(device, s))?;
    to_array_xi(device, &snapshots, &mut calibration)?;
    let reconstructed = reconstruct(&snapshots, &calibration, None)?;
    let theory = uniform_walk(device.geometry.n_guides, reconstructed.xi_grid(), campaign.input_index()?)?;
    let fidelity = fidelity_curve(&reconstructed, &theory)?;
    Ok(PipelineOutput {
        snapshots,
        calibration,
        reconstructed,
        theory,
        fidelity,
    })
}

/// Expected (noise-free) normalized frame for a plan point.
pub fn ideal_frame(device: &Device, point: PlanPoint) -> Result<Vec<f64>> {
    let gamma = device.gamma_at(point.strain, point.wavelength)?;
    let spectrum = Spectrum::new(&CouplingMatrix::uniform(device.geometry.n_guides, gamma)?)?;
    normalize(spectrum.frame(device.geometry.chip_length_mm, point.input_index)?.intensities)
}
