//! Propagation through the coupled array and the one- and two-photon
//! observables derived from it.
//!
//! The Heisenberg evolution of the creation operators in a lattice of
//! identical guides is `a†_k(z) = e^{iβz} Σ_l U_{k,l}(z) a†_l(0)` with
//! `U(z) = exp(izC)`. The common phase `e^{iβz}` is dropped everywhere
//! intensities are concerned. Because `C` is real symmetric,
//! `U = V · diag(e^{izλ}) · Vᵀ` where `C = V · diag(λ) · Vᵀ`; one
//! decomposition serves every propagation distance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::lattice::{normalized_length, CouplingMatrix};

/// Normalization tolerance for intensity rows and input states.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Eigendecomposition of a coupling matrix, shared across distances.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    rate: f64,
}

impl Spectrum {
    pub fn new(coupling: &CouplingMatrix) -> Result<Self> {
        let eigen = SymmetricEigen::try_new(coupling.as_matrix().clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))?;
        Ok(Self {
            eigenvalues: eigen.eigenvalues,
            eigenvectors: eigen.eigenvectors,
            rate: coupling.max_rate(),
        })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Rate used to convert distance to `ξ` (the largest coupling).
    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn phases(&self, z: f64) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .map(|&lambda| Complex64::from_polar(1.0, z * lambda))
            .collect()
    }

    pub fn propagator(&self, z: f64) -> Result<UnitaryPropagator> {
        check_distance(z)?;
        let n = self.n();
        if z == 0.0 {
            return Ok(UnitaryPropagator::identity(n));
        }
        let phases = self.phases(z);
        let v = &self.eigenvectors;
        let mut entries = DMatrix::<Complex64>::zeros(n, n);
        for l in 0..n {
            for k in l..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, phase) in phases.iter().enumerate() {
                    acc += phase * (v[(k, j)] * v[(l, j)]);
                }
                entries[(k, l)] = acc;
                entries[(l, k)] = acc;
            }
        }
        Ok(UnitaryPropagator {
            entries,
            xi: normalized_length(self.rate, z)?,
        })
    }

    /// Column `input` of `U(z)` without forming the full matrix.
    pub fn column(&self, z: f64, input: usize) -> Result<Vec<Complex64>> {
        check_distance(z)?;
        let n = self.n();
        if input >= n {
            return Err(Error::IndexOutOfRange { index: input, len: n });
        }
        if z == 0.0 {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[input] = Complex64::new(1.0, 0.0);
            return Ok(e);
        }
        let v = &self.eigenvectors;
        let weights: Vec<Complex64> = self
            .phases(z)
            .into_iter()
            .enumerate()
            .map(|(j, phase)| phase * v[(input, j)])
            .collect();
        Ok((0..n)
            .map(|k| {
                weights
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * v[(k, j)])
                    .sum()
            })
            .collect())
    }

    /// End-face intensities for single-site injection, at distance `z`.
    pub fn frame(&self, z: f64, input: usize) -> Result<IntensityFrame> {
        let column = self.column(z, input)?;
        IntensityFrame::from_raw(
            normalized_length(self.rate, z)?,
            column.iter().map(|a| a.norm_sqr()).collect(),
        )
    }
}

fn check_distance(z: f64) -> Result<()> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(invalid(format!("z must be >= 0, got {z}")));
    }
    Ok(())
}

/// `U(z) = exp(izC)`, tagged with the `ξ` it was evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryPropagator {
    entries: DMatrix<Complex64>,
    xi: f64,
}

impl UnitaryPropagator {
    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
            xi: 0.0,
        }
    }

    /// Wraps an arbitrary matrix, checking unitarity to `1e-10`.
    pub fn from_matrix(entries: DMatrix<Complex64>, xi: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                actual: entries.ncols(),
            });
        }
        let u = Self { entries, xi };
        let err = u.unitarity_error();
        if !(err < 1e-10) {
            return Err(invalid(format!("matrix is not unitary (error {err:e})")));
        }
        Ok(u)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.entries[(k, l)]
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// `max |U†U − I|` over all entries.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.n();
        let product = self.entries.adjoint() * &self.entries;
        let mut worst = 0.0f64;
        for k in 0..n {
            for l in 0..n {
                let target = if k == l { 1.0 } else { 0.0 };
                worst = worst.max((product[(k, l)] - target).norm());
            }
        }
        worst
    }

    /// Restores the common propagation phase `e^{iβz}` for amplitude-level
    /// output.
    pub fn with_global_phase(&self, phase: f64) -> Self {
        Self {
            entries: &self.entries * Complex64::from_polar(1.0, phase),
            xi: self.xi,
        }
    }

    /// Product `self · other`, e.g. to compose two propagation segments.
    pub fn then(&self, other: &UnitaryPropagator) -> Result<Self> {
        if other.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: other.n(),
            });
        }
        Ok(Self {
            entries: &other.entries * &self.entries,
            xi: self.xi + other.xi,
        })
    }
}

pub fn propagator(coupling: &CouplingMatrix, z: f64) -> Result<UnitaryPropagator> {
    Spectrum::new(coupling)?.propagator(z)
}

/// `U · input` for a normalized input state.
pub fn evolve_amplitudes(u: &UnitaryPropagator, input: &[Complex64]) -> Result<Vec<Complex64>> {
    if input.len() != u.n() {
        return Err(Error::DimensionMismatch {
            expected: u.n(),
            actual: input.len(),
        });
    }
    let norm: f64 = input.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(invalid(format!("input state norm is {norm}, expected 1")));
    }
    let v = DVector::from_column_slice(input);
    Ok((u.as_matrix() * v).iter().copied().collect())
}

/// Normalized end-face power distribution at one `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityFrame {
    pub xi: f64,
    pub intensities: Vec<f64>,
}

impl IntensityFrame {
    /// Divides `raw` by its total. Fails on negative entries or zero total.
    pub fn from_raw(xi: f64, raw: Vec<f64>) -> Result<Self> {
        Ok(Self {
            xi,
            intensities: normalize(raw)?,
        })
    }

    pub fn n(&self) -> usize {
        self.intensities.len()
    }
}

/// Scales a nonnegative vector to unit sum.
pub fn normalize(mut raw: Vec<f64>) -> Result<Vec<f64>> {
    if raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid("intensities must be finite and nonnegative"));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroPower);
    }
    raw.iter_mut().for_each(|v| *v /= total);
    Ok(raw)
}

/// `|U_{k,input}|²` for single-site injection.
pub fn intensity_frame(u: &UnitaryPropagator, input_index: usize) -> Result<IntensityFrame> {
    if input_index >= u.n() {
        return Err(Error::IndexOutOfRange {
            index: input_index,
            len: u.n(),
        });
    }
    let raw = u
        .as_matrix()
        .column(input_index)
        .iter()
        .map(|a| a.norm_sqr())
        .collect();
    IntensityFrame::from_raw(u.xi(), raw)
}

/// Stack of intensity frames on a strictly increasing `ξ` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionMap {
    xi_grid: Vec<f64>,
    n: usize,
    data: Vec<f64>,
}

impl EvolutionMap {
    /// Builds a map from rows, normalizing each one.
    pub fn new(xi_grid: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if xi_grid.is_empty() {
            return Err(invalid("evolution map needs at least one row"));
        }
        if xi_grid.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: xi_grid.len(),
                actual: rows.len(),
            });
        }
        check_grid(&xi_grid)?;
        let n = rows[0].len();
        let mut data = Vec::with_capacity(n * rows.len());
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            data.extend(normalize(row)?);
        }
        Ok(Self { xi_grid, n, data })
    }

    /// Builds a map from rows that are already normalized, keeping them
    /// bit-for-bit. Rows must sum to one within `tolerance`.
    pub fn from_normalized(xi_grid: Vec<f64>, rows: Vec<Vec<f64>>, tolerance: f64) -> Result<Self> {
        if xi_grid.is_empty() || xi_grid.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: xi_grid.len().max(1),
                actual: rows.len(),
            });
        }
        check_grid(&xi_grid)?;
        let n = rows[0].len();
        let mut data = Vec::with_capacity(n * rows.len());
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(invalid("intensities must be finite and nonnegative"));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > tolerance {
                return Err(invalid(format!("row sums to {total}, expected 1")));
            }
            data.extend(row);
        }
        Ok(Self { xi_grid, n, data })
    }

    pub fn from_frames(frames: Vec<IntensityFrame>) -> Result<Self> {
        let (grid, rows) = frames.into_iter().map(|f| (f.xi, f.intensities)).unzip();
        Self::new(grid, rows)
    }

    pub fn xi_grid(&self) -> &[f64] {
        &self.xi_grid
    }

    pub fn n_guides(&self) -> usize {
        self.n
    }

    pub fn n_rows(&self) -> usize {
        self.xi_grid.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n)
    }

    pub fn get(&self, row: usize, guide: usize) -> f64 {
        self.data[row * self.n + guide]
    }
}

/// Rejects empty, negative, non-finite or non-increasing grids.
pub fn check_grid(xi_grid: &[f64]) -> Result<()> {
    if xi_grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid("xi grid values must be finite and nonnegative"));
    }
    if xi_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("xi grid must be strictly increasing"));
    }
    Ok(())
}

/// Simulates the walk on `xi_grid`, realizing each `ξ` through `realize`,
/// which returns a coupling matrix and a distance with `2γz/π = ξ`. Any
/// realization gives the same map.
pub fn evolution_map<F>(mut realize: F, xi_grid: &[f64], input_index: usize) -> Result<EvolutionMap>
where
    F: FnMut(f64) -> Result<(CouplingMatrix, f64)>,
{
    check_grid(xi_grid)?;
    let mut frames = Vec::with_capacity(xi_grid.len());
    for &xi in xi_grid {
        let (coupling, z) = realize(xi)?;
        let mut frame = Spectrum::new(&coupling)?.frame(z, input_index)?;
        frame.xi = xi;
        frames.push(frame);
    }
    EvolutionMap::from_frames(frames)
}

/// Map for a fixed coupling matrix, with `ξ` realized by distance alone.
/// The decomposition is computed once.
pub fn evolution_map_fixed(
    coupling: &CouplingMatrix,
    xi_grid: &[f64],
    input_index: usize,
) -> Result<EvolutionMap> {
    check_grid(xi_grid)?;
    let spectrum = Spectrum::new(coupling)?;
    let rate = spectrum.rate();
    if rate <= 0.0 && xi_grid.iter().any(|&x| x > 0.0) {
        return Err(invalid("cannot reach xi > 0 without coupling"));
    }
    let frames = xi_grid
        .iter()
        .map(|&xi| {
            let z = if xi == 0.0 { 0.0 } else { crate::lattice::z_for_xi(rate, xi)? };
            let mut frame = spectrum.frame(z, input_index)?;
            frame.xi = xi;
            Ok(frame)
        })
        .collect::<Result<Vec<_>>>()?;
    EvolutionMap::from_frames(frames)
}

/// Theory map of a uniform `n`-guide array on an arbitrary `ξ` grid.
pub fn uniform_walk(n: usize, xi_grid: &[f64], input_index: usize) -> Result<EvolutionMap> {
    // With γ = π/2 the distance equals ξ.
    let coupling = CouplingMatrix::uniform(n, std::f64::consts::FRAC_PI_2)?;
    evolution_map_fixed(&coupling, xi_grid, input_index)
}

/// Map for a uniform array sampled at propagation distances `z_grid`.
pub fn evolution_map_over_distance(
    n: usize,
    gamma: f64,
    z_grid: &[f64],
    input_index: usize,
) -> Result<EvolutionMap> {
    let coupling = CouplingMatrix::uniform(n, gamma)?;
    let spectrum = Spectrum::new(&coupling)?;
    let frames = z_grid
        .iter()
        .map(|&z| spectrum.frame(z, input_index))
        .collect::<Result<Vec<_>>>()?;
    EvolutionMap::from_frames(frames)
}

/// Output statistics of two indistinguishable photons.
///
/// `gamma[q][r]` is the probability of detecting one photon in guide `q` and
/// one in `r` (or both in `q` when `q = r`); entries are symmetric and sum to
/// one over unordered pairs `q ≤ r`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonCorrelation {
    gamma: DMatrix<f64>,
}

impl TwoPhotonCorrelation {
    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn get(&self, q: usize, r: usize) -> f64 {
        self.gamma[(q, r)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// Sum over unordered pairs `q ≤ r`.
    pub fn total(&self) -> f64 {
        let n = self.n();
        (0..n).flat_map(|q| (q..n).map(move |r| (q, r))).map(|(q, r)| self.gamma[(q, r)]).sum()
    }
}

/// Two photons injected into guides `k` and `l` (possibly equal).
///
/// The pair amplitude is `U_{q,k}U_{r,l} + U_{q,l}U_{r,k}`; bunched outputs
/// (`q = r`) and a doubly occupied input (`k = l`) each carry the bosonic
/// `1/2` so that the result is a probability distribution.
pub fn two_photon_correlation(u: &UnitaryPropagator, k: usize, l: usize) -> Result<TwoPhotonCorrelation> {
    let n = u.n();
    for index in [k, l] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, len: n });
        }
    }
    let input_weight = if k == l { 0.5 } else { 1.0 };
    let mut gamma = DMatrix::<f64>::zeros(n, n);
    let mut total = 0.0;
    for q in 0..n {
        for r in q..n {
            let amplitude = u.get(q, k) * u.get(r, l) + u.get(q, l) * u.get(r, k);
            let output_weight = if q == r { 0.5 } else { 1.0 };
            let p = amplitude.norm_sqr() * input_weight * output_weight;
            gamma[(q, r)] = p;
            gamma[(r, q)] = p;
            total += p;
        }
    }
    if total <= 0.0 {
        return Err(Error::Numerical("two-photon distribution vanished".into()));
    }
    gamma /= total;
    Ok(TwoPhotonCorrelation { gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_distance_is_identity() {
        let coupling = CouplingMatrix::uniform(9, 0.3).unwrap();
        let u = propagator(&coupling, 0.0).unwrap();
        for k in 0..9 {
            for l in 0..9 {
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((u.get(k, l) - want).norm() < 1e-15);
            }
        }
        assert_eq!(u.xi(), 0.0);
    }

    #[test]
    fn two_guide_full_transfer() {
        let gamma = 0.7;
        let coupling = CouplingMatrix::uniform(2, gamma).unwrap();
        let u = propagator(&coupling, FRAC_PI_2 / gamma).unwrap();
        assert!(u.get(0, 0).norm() < 1e-14);
        assert!((u.get(0, 1).norm() - 1.0).abs() < 1e-14);
        assert!((u.xi() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_guide_closed_form() {
        let gamma = 0.4;
        let coupling = CouplingMatrix::uniform(2, gamma).unwrap();
        for z in [0.1, 1.0, 2.5, 7.0] {
            let u = propagator(&coupling, z).unwrap();
            let theta = gamma * z;
            assert!((u.get(0, 0) - c(theta.cos(), 0.0)).norm() < 1e-14);
            assert!((u.get(1, 0) - c(0.0, theta.sin())).norm() < 1e-14);
            let frame = intensity_frame(&u, 0).unwrap();
            assert!((frame.intensities[0] - theta.cos().powi(2)).abs() < 1e-14);
            assert!((frame.intensities[1] - theta.sin().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn propagator_symmetric_and_unitary() {
        let coupling = CouplingMatrix::nearest_neighbour(&[0.1, 0.3, 0.2, 0.05, 0.4]).unwrap();
        let u = propagator(&coupling, 3.7).unwrap();
        assert!(u.unitarity_error() < 1e-12);
        for k in 0..6 {
            for l in 0..6 {
                assert!((u.get(k, l) - u.get(l, k)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn column_matches_full_propagator() {
        let coupling = CouplingMatrix::uniform(11, 0.2).unwrap();
        let spectrum = Spectrum::new(&coupling).unwrap();
        let u = spectrum.propagator(4.0).unwrap();
        let col = spectrum.column(4.0, 3).unwrap();
        for k in 0..11 {
            assert!((col[k] - u.get(k, 3)).norm() < 1e-14);
        }
    }

    #[test]
    fn evolve_identity_and_unit_vector() {
        let u = UnitaryPropagator::identity(3);
        let input = vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)];
        assert_eq!(evolve_amplitudes(&u, &input).unwrap(), input);

        let coupling = CouplingMatrix::uniform(5, 0.3).unwrap();
        let u = propagator(&coupling, 2.0).unwrap();
        let mut e2 = vec![c(0.0, 0.0); 5];
        e2[2] = c(1.0, 0.0);
        let out = evolve_amplitudes(&u, &e2).unwrap();
        for k in 0..5 {
            assert!((out[k] - u.get(k, 2)).norm() < 1e-15);
        }
    }

    #[test]
    fn evolve_rejects_bad_input() {
        let u = UnitaryPropagator::identity(3);
        assert!(matches!(
            evolve_amplitudes(&u, &[c(1.0, 0.0)]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(evolve_amplitudes(&u, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn symmetric_input_gives_mirror_output() {
        let n = 21;
        let coupling = CouplingMatrix::uniform(n, 0.5).unwrap();
        let u = propagator(&coupling, 3.3).unwrap();
        let mut input = vec![c(0.0, 0.0); n];
        let a = 0.5f64.sqrt();
        input[7] = c(a, 0.0);
        input[13] = c(a, 0.0);
        let out = evolve_amplitudes(&u, &input).unwrap();
        let norm: f64 = out.iter().map(|x| x.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-10);
        for k in 0..n {
            assert!((out[k].norm_sqr() - out[n - 1 - k].norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_at_zero_is_delta() {
        let u = propagator(&CouplingMatrix::uniform(7, 1.0).unwrap(), 0.0).unwrap();
        let frame = intensity_frame(&u, 4).unwrap();
        assert_eq!(frame.intensities, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(intensity_frame(&u, 7), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn ballistic_profile_at_end_face() {
        // At ξ = 0.38 the central guide still dominates but the first
        // neighbours are lit symmetrically; at larger ξ the two outer lobes
        // overtake the centre.
        let n = 51;
        let gamma = 0.38 * FRAC_PI_2 / 7.0;
        let coupling = CouplingMatrix::uniform(n, gamma).unwrap();
        let spectrum = Spectrum::new(&coupling).unwrap();
        let frame = spectrum.frame(7.0, 25).unwrap();
        assert!((frame.xi - 0.38).abs() < 1e-12);
        let full = intensity_frame(&spectrum.propagator(7.0).unwrap(), 25).unwrap();
        for k in 0..n {
            assert!((frame.intensities[k] - full.intensities[k]).abs() < 1e-14);
        }
        assert!((frame.intensities[24] - frame.intensities[26]).abs() < 1e-14);

        let late = spectrum.frame(7.0 * 2.0 / 0.38, 25).unwrap();
        let peak = (0..n).max_by(|&a, &b| late.intensities[a].total_cmp(&late.intensities[b])).unwrap();
        assert_ne!(peak, 25);
        assert!((late.intensities[peak] - late.intensities[50 - peak]).abs() < 1e-12);
    }

    #[test]
    fn map_single_zero_row() {
        let coupling = CouplingMatrix::uniform(5, 0.1).unwrap();
        let map = evolution_map_fixed(&coupling, &[0.0], 2).unwrap();
        assert_eq!(map.n_rows(), 1);
        assert_eq!(map.row(0), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn map_rejects_unsorted_grid() {
        let coupling = CouplingMatrix::uniform(5, 0.1).unwrap();
        assert!(evolution_map_fixed(&coupling, &[0.2, 0.1], 2).is_err());
        assert!(evolution_map_fixed(&coupling, &[0.1, 0.1], 2).is_err());
    }

    #[test]
    fn hom_dip_on_balanced_coupler() {
        let coupling = CouplingMatrix::uniform(2, 1.0).unwrap();
        let u = propagator(&coupling, FRAC_PI_4).unwrap();
        assert!((u.xi() - 0.5).abs() < 1e-15);
        let g = two_photon_correlation(&u, 0, 1).unwrap();
        assert!(g.get(0, 1) < 1e-10);
        assert!((g.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((g.get(1, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_two_photon_single_pair() {
        let u = UnitaryPropagator::identity(5);
        let g = two_photon_correlation(&u, 1, 3).unwrap();
        for q in 0..5 {
            for r in q..5 {
                let want = if (q, r) == (1, 3) { 1.0 } else { 0.0 };
                assert_eq!(g.get(q, r), want);
            }
        }
        let g = two_photon_correlation(&u, 2, 2).unwrap();
        assert_eq!(g.get(2, 2), 1.0);
        assert!(two_photon_correlation(&u, 0, 5).is_err());
    }

    #[test]
    fn global_phase_leaves_intensities() {
        let coupling = CouplingMatrix::uniform(6, 0.3).unwrap();
        let u = propagator(&coupling, 2.0).unwrap();
        let phased = u.with_global_phase(1.234);
        assert_eq!(u.xi(), phased.xi());
        let a = intensity_frame(&u, 1).unwrap();
        let b = intensity_frame(&phased, 1).unwrap();
        for k in 0..6 {
            assert!((a.intensities[k] - b.intensities[k]).abs() < 1e-15);
        }
    }
}
