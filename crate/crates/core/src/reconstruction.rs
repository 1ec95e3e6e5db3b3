//! Stacking end-face snapshots into an evolution map and scoring it.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_sweep, CalibratedXi, Direction, ReferenceReading, SweepOptions};
use crate::error::{invalid, Error, Result};
use crate::evolution::{normalize, EvolutionMap};

/// Snapshots whose calibrated `ξ` agree within this are merged.
pub const DUPLICATE_XI_TOLERANCE: f64 = 1e-6;

/// One recorded end face: array intensities plus the reference reading
/// taken at the same deformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub raw_intensities: Vec<f64>,
    pub reference: ReferenceReading,
    pub strain: f64,
    /// nm
    pub wavelength: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Snapshot {
    pub fn validate(&self) -> Result<()> {
        if self
            .raw_intensities
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(invalid("snapshot intensities must be finite and nonnegative"));
        }
        if self.raw_intensities.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroPower);
        }
        self.reference.validate()
    }
}

pub fn normalize_frame(raw: &[f64]) -> Result<Vec<f64>> {
    normalize(raw.to_vec())
}

/// Calibrates every snapshot from its reference reading.
///
/// Snapshots are grouped by wavelength and each group is unfolded as one
/// sweep in order of increasing strain (so `ξ` decreases). `hint` may
/// supply a prior for the first (least strained) snapshot of each group.
/// The result is in the order of `snapshots`.
pub fn calibrate_snapshots<F>(snapshots: &[Snapshot], options: &SweepOptions, mut hint: F) -> Result<Vec<CalibratedXi>>
where
    F: FnMut(&Snapshot) -> Option<f64>,
{
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, s) in snapshots.iter().enumerate() {
        s.validate()?;
        groups.entry(s.wavelength.to_bits()).or_default().push(i);
    }
    let mut out = vec![None; snapshots.len()];
    for indices in groups.into_values() {
        let mut order = indices;
        order.sort_by(|&a, &b| snapshots[a].strain.total_cmp(&snapshots[b].strain).then(a.cmp(&b)));
        let readings: Vec<ReferenceReading> = order.iter().map(|&i| snapshots[i].reference).collect();
        let mut group_options = *options;
        group_options.direction = Direction::Decreasing;
        if let Some(h) = hint(&snapshots[order[0]]) {
            group_options.start_hint = Some(h);
        }
        let calibrated = calibrate_sweep(&readings, &group_options).map_err(|e| match e {
            Error::NonMonotone { index } => Error::NonMonotone { index: order[index] },
            other => other,
        })?;
        for (slot, value) in order.into_iter().zip(calibrated) {
            out[slot] = Some(value);
        }
    }
    Ok(out.into_iter().map(|v| v.expect("every snapshot calibrated")).collect())
}

/// Sorts, merges and optionally resamples calibrated frames.
///
/// Each point is `(ξ, raw intensities)`. Frames are normalized, sorted by
/// `ξ`, and frames within [`DUPLICATE_XI_TOLERANCE`] are averaged. With a
/// target grid the frames are linearly interpolated in `ξ` guide by guide
/// and renormalized; the grid must lie inside the observed range.
pub fn reconstruct_frames(points: Vec<(f64, Vec<f64>)>, target_grid: Option<&[f64]>) -> Result<EvolutionMap> {
    if points.len() < 2 {
        return Err(invalid(format!("reconstruction needs at least 2 snapshots, got {}", points.len())));
    }
    let n = points[0].1.len();
    let mut frames = points
        .into_iter()
        .map(|(xi, raw)| {
            if raw.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: raw.len() });
            }
            if !(xi.is_finite() && xi >= 0.0) {
                return Err(invalid(format!("calibrated xi must be >= 0, got {xi}")));
            }
            Ok((xi, normalize(raw)?))
        })
        .collect::<Result<Vec<_>>>()?;
    frames.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lexicographic(&a.1, &b.1)));

    let mut grid: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut i = 0;
    while i < frames.len() {
        let anchor = frames[i].0;
        let mut j = i + 1;
        while j < frames.len() && frames[j].0 - anchor <= DUPLICATE_XI_TOLERANCE {
            j += 1;
        }
        let count = (j - i) as f64;
        let xi = frames[i..j].iter().map(|f| f.0).sum::<f64>() / count;
        let mut row = vec![0.0; n];
        for (_, frame) in &frames[i..j] {
            row.iter_mut().zip(frame).for_each(|(acc, v)| *acc += v);
        }
        row.iter_mut().for_each(|v| *v /= count);
        grid.push(xi);
        rows.push(if j - i == 1 { row } else { normalize(row)? });
        i = j;
    }

    let Some(target) = target_grid else {
        return EvolutionMap::new(grid, rows);
    };
    if grid.len() < 2 {
        return Err(invalid("interpolation needs at least 2 distinct xi values"));
    }
    let (min, max) = (grid[0], grid[grid.len() - 1]);
    let slack = 1e-12;
    let mut out = Vec::with_capacity(target.len());
    for &xi in target {
        if !(xi >= min - slack && xi <= max + slack) {
            return Err(Error::Extrapolation { xi, min, max });
        }
        let hi = grid.partition_point(|&g| g < xi).clamp(1, grid.len() - 1);
        let lo = hi - 1;
        if let Some(k) = [lo, hi].into_iter().find(|&k| grid[k] == xi) {
            out.push(rows[k].clone());
            continue;
        }
        let t = ((xi - grid[lo]) / (grid[hi] - grid[lo])).clamp(0.0, 1.0);
        let row = rows[lo]
            .iter()
            .zip(&rows[hi])
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        out.push(normalize(row)?);
    }
    EvolutionMap::new(target.to_vec(), out)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Stacks snapshots using their calibrated `ξ` (paired by index).
pub fn reconstruct(
    snapshots: &[Snapshot],
    calibration: &[CalibratedXi],
    target_grid: Option<&[f64]>,
) -> Result<EvolutionMap> {
    if snapshots.len() != calibration.len() {
        return Err(Error::DimensionMismatch {
            expected: snapshots.len(),
            actual: calibration.len(),
        });
    }
    for s in snapshots {
        s.validate()?;
    }
    let points = snapshots
        .iter()
        .zip(calibration)
        .map(|(s, c)| (c.xi, s.raw_intensities.clone()))
        .collect();
    reconstruct_frames(points, target_grid)
}

/// Normalized overlap `Σ e·t / √(Σe² · Σt²)` of two intensity
/// distributions. Equals 1 exactly when the two are proportional.
pub fn fidelity(expt: &[f64], theory: &[f64]) -> Result<f64> {
    if expt.len() != theory.len() {
        return Err(Error::DimensionMismatch {
            expected: theory.len(),
            actual: expt.len(),
        });
    }
    if expt.iter().chain(theory).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid("fidelity needs finite nonnegative intensities"));
    }
    let cross: f64 = expt.iter().zip(theory).map(|(e, t)| e * t).sum();
    let ee: f64 = expt.iter().map(|e| e * e).sum();
    let tt: f64 = theory.iter().map(|t| t * t).sum();
    if ee == 0.0 || tt == 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok(cross / (ee * tt).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub xi_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl FidelityCurve {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Row-by-row fidelity of two maps sampled on the same grid.
pub fn fidelity_curve(expt: &EvolutionMap, theory: &EvolutionMap) -> Result<FidelityCurve> {
    if expt.n_rows() != theory.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: theory.n_rows(),
            actual: expt.n_rows(),
        });
    }
    if expt.n_guides() != theory.n_guides() {
        return Err(Error::DimensionMismatch {
            expected: theory.n_guides(),
            actual: expt.n_guides(),
        });
    }
    if let Some((a, b)) = expt
        .xi_grid()
        .iter()
        .zip(theory.xi_grid())
        .find(|(a, b)| (*a - *b).abs() > 1e-12)
    {
        return Err(invalid(format!("xi grids differ ({a} vs {b})")));
    }
    let values = expt
        .rows()
        .zip(theory.rows())
        .map(|(e, t)| fidelity(e, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelityCurve {
        xi_grid: expt.xi_grid().to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::uniform_walk;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_frame(&[2.0, 2.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(normalize_frame(&[0.0, 5.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(matches!(normalize_frame(&[0.0, 0.0]), Err(Error::ZeroPower)));
    }

    #[test]
    fn fidelity_examples() {
        assert_eq!(fidelity(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]).unwrap(), 1.0);
        assert_eq!(fidelity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let f = fidelity(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((f - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn fidelity_errors() {
        assert!(matches!(fidelity(&[1.0], &[1.0, 0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(fidelity(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroPower)));
        assert!(fidelity(&[-1.0, 2.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn two_snapshots_match_simulation() {
        let grid = [0.1, 0.3];
        let truth = uniform_walk(15, &grid, 7).unwrap();
        let points = vec![
            (0.3, truth.row(1).iter().map(|v| v * 40.0).collect()),
            (0.1, truth.row(0).iter().map(|v| v * 3.0).collect()),
        ];
        let map = reconstruct_frames(points, None).unwrap();
        assert_eq!(map.xi_grid(), &grid);
        for r in 0..2 {
            for k in 0..15 {
                assert!((map.get(r, k) - truth.get(r, k)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn duplicates_are_averaged() {
        let points = vec![
            (0.2, vec![1.0, 0.0]),
            (0.2 + 1e-8, vec![0.0, 3.0]),
            (0.5, vec![1.0, 1.0]),
        ];
        let map = reconstruct_frames(points, None).unwrap();
        assert_eq!(map.n_rows(), 2);
        assert!((map.xi_grid()[0] - (0.2 + 0.5e-8)).abs() < 1e-15);
        assert_eq!(map.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn interpolation_rules() {
        let points = vec![(0.0, vec![1.0, 0.0]), (1.0, vec![0.0, 1.0])];
        let map = reconstruct_frames(points.clone(), Some(&[0.0, 0.25, 1.0])).unwrap();
        assert_eq!(map.row(0), &[1.0, 0.0]);
        assert_eq!(map.row(1), &[0.75, 0.25]);
        assert_eq!(map.row(2), &[0.0, 1.0]);
        assert!(matches!(
            reconstruct_frames(points, Some(&[0.5, 1.1])),
            Err(Error::Extrapolation { .. })
        ));
        let same = vec![(0.4, vec![1.0, 0.0]), (0.4, vec![1.0, 0.0])];
        assert!(reconstruct_frames(same, Some(&[0.4])).is_err());
    }

    #[test]
    fn needs_two_snapshots() {
        assert!(reconstruct_frames(vec![(0.1, vec![1.0])], None).is_err());
    }

    #[test]
    fn curve_against_itself() {
        let map = uniform_walk(9, &[0.0, 0.2, 0.5], 4).unwrap();
        let curve = fidelity_curve(&map, &map).unwrap();
        assert!(curve.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let other = uniform_walk(9, &[0.0, 0.2, 0.6], 4).unwrap();
        assert!(fidelity_curve(&map, &other).is_err());
    }
}
