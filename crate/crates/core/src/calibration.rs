//! Recovering `ξ` from the flanking reference couplers.
//!
//! A two-guide coupler injected in one arm transfers `sin²(γz)` of the power
//! to its partner, so a single reading fixes `γz` only up to the folds of
//! `sin²`: `γz = mπ ± arcsin √x`. In units of `ξ` the candidates are
//! `2m + ξ₀` and `2m − ξ₀`, and we index them by `branch = ⌊ξ⌋`. A strain
//! sweep is unfolded by requiring the sequence to be monotone in strain and
//! to move smoothly from one reading to the next.

use std::f64::consts::FRAC_2_PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Readings with `x` this close to 0 or 1 are clamped onto the boundary.
pub const CLAMP_EPS: f64 = 1e-6;

/// Powers at the two outputs of a reference coupler, injected in the bar arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceReading {
    pub p_bar: f64,
    pub p_cross: f64,
}

impl ReferenceReading {
    pub fn new(p_bar: f64, p_cross: f64) -> Result<Self> {
        let r = Self { p_bar, p_cross };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_bar.is_finite() && self.p_bar >= 0.0)
            || !(self.p_cross.is_finite() && self.p_cross >= 0.0)
        {
            return Err(invalid("reference powers must be finite and nonnegative"));
        }
        if self.p_bar + self.p_cross <= 0.0 {
            return Err(Error::ZeroPower);
        }
        Ok(())
    }

    /// Cross-coupled fraction `p_cross / (p_bar + p_cross)`.
    pub fn cross_fraction(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.p_cross / (self.p_bar + self.p_cross))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedXi {
    pub xi: f64,
    pub branch: u32,
    /// Deviation of `xi` from the value predicted by extrapolating the two
    /// previous points of the sweep; zero where no prediction exists.
    pub residual: f64,
}

/// Expected direction of `ξ` along the sweep. Stretching lowers the
/// coupling, so a sweep in increasing strain is `Decreasing`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Increasing => "increasing",
            Direction::Decreasing => "decreasing",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "increasing" => Ok(Direction::Increasing),
            "decreasing" => Ok(Direction::Decreasing),
            other => Err(invalid(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub direction: Direction,
    /// Largest allowed change of `ξ` between consecutive readings.
    pub max_step: f64,
    /// Tolerated step against the declared direction (noise allowance).
    pub slack: f64,
    /// Rough prior for the first reading's `ξ`. Sweeps that never visit
    /// `ξ < 1` cannot be unfolded without one.
    pub start_hint: Option<f64>,
    pub max_branch: u32,
}

impl SweepOptions {
    pub fn new(direction: Direction) -> Self {
        Self {
            direction,
            max_step: 0.4,
            slack: 0.0,
            start_hint: None,
            max_branch: 7,
        }
    }

    pub fn with_slack(mut self, slack: f64) -> Self {
        self.slack = slack;
        self
    }

    pub fn with_start_hint(mut self, hint: f64) -> Self {
        self.start_hint = Some(hint);
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }
}

/// Principal-branch value `ξ₀ ∈ [0, 1]` of a reading.
fn principal_xi(reading: &ReferenceReading) -> Result<f64> {
    let mut x = reading.cross_fraction()?;
    if x < CLAMP_EPS {
        x = 0.0;
    } else if x > 1.0 - CLAMP_EPS {
        x = 1.0;
    }
    Ok(FRAC_2_PI * x.sqrt().asin())
}

/// `ξ` on a given branch for principal value `xi0`.
pub fn unfold(xi0: f64, branch: u32) -> f64 {
    let b = f64::from(branch);
    if branch.is_multiple_of(2) {
        b + xi0
    } else {
        b + 1.0 - xi0
    }
}

/// Single reading, principal branch.
pub fn xi_from_reference(reading: &ReferenceReading) -> Result<CalibratedXi> {
    Ok(CalibratedXi {
        xi: principal_xi(reading)?,
        branch: 0,
        residual: 0.0,
    })
}

/// `|dξ/dx|` at the reading's cross fraction; diverges at `x → 0` and
/// `x → 1`, where the coupler is least informative.
pub fn xi_sensitivity(reading: &ReferenceReading) -> Result<f64> {
    let x = reading.cross_fraction()?;
    Ok(FRAC_2_PI / (2.0 * (x * (1.0 - x)).sqrt()))
}

/// Weight of the start-hint penalty relative to the curvature cost.
const HINT_WEIGHT: f64 = 1e-2;

/// Unfolds a sweep ordered by strain into a monotone `ξ` sequence.
///
/// Every reading may sit on any branch up to `max_branch`. Among the branch
/// assignments that move in the declared direction (within `slack`) and
/// never step by more than `max_step`, the one with the smallest summed
/// squared second difference is chosen, i.e. the smoothest trajectory. The
/// search is a dynamic program over pairs of consecutive branches. Paths
/// shifted by a whole period are equally smooth; the hint (if any) picks
/// among them, otherwise the lowest `ξ` wins.
pub fn calibrate_sweep(readings: &[ReferenceReading], options: &SweepOptions) -> Result<Vec<CalibratedXi>> {
    if readings.is_empty() {
        return Err(invalid("calibration sweep needs at least one reading"));
    }
    if !(options.max_step > 0.0) || !(options.slack >= 0.0) {
        return Err(invalid("max_step must be positive and slack nonnegative"));
    }
    let principal = readings
        .iter()
        .map(principal_xi)
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(f64, f64, Vec<u32>)> = None;
    let mut furthest = 0;
    for start in 0..=options.max_branch {
        match smoothest_path(&principal, start, options) {
            Ok((curvature, branches)) => {
                let xi0 = unfold(principal[0], start);
                let score = curvature + options.start_hint.map_or(0.0, |h| HINT_WEIGHT * (xi0 - h).powi(2));
                let better = match &best {
                    None => true,
                    Some((s, x, _)) => score < s - 1e-12 || (score <= s + 1e-12 && xi0 < *x && options.start_hint.is_none()),
                };
                if better {
                    best = Some((score, xi0, branches));
                }
            }
            Err(index) => furthest = furthest.max(index),
        }
    }
    let Some((_, _, branches)) = best else {
        return Err(Error::NonMonotone { index: furthest });
    };

    let xi: Vec<f64> = principal.iter().zip(&branches).map(|(&p, &b)| unfold(p, b)).collect();
    Ok(xi
        .iter()
        .zip(&branches)
        .enumerate()
        .map(|(i, (&value, &branch))| CalibratedXi {
            xi: value,
            branch,
            residual: if i >= 2 { (value - (2.0 * xi[i - 1] - xi[i - 2])).abs() } else { 0.0 },
        })
        .collect())
}

fn allowed_step(from: f64, to: f64, repeated: bool, options: &SweepOptions) -> bool {
    let step = to - from;
    let along = (repeated && step == 0.0)
        || match options.direction {
            Direction::Increasing => step > -options.slack,
            Direction::Decreasing => step < options.slack,
        };
    along && step.abs() <= options.max_step
}

/// Minimum-curvature branch path with the first reading fixed on `start`.
/// On failure returns the first reading that no path can reach.
fn smoothest_path(principal: &[f64], start: u32, options: &SweepOptions) -> std::result::Result<(f64, Vec<u32>), usize> {
    let nb = options.max_branch as usize + 1;
    let n = principal.len();
    if n == 1 {
        return Ok((0.0, vec![start]));
    }
    let value = |i: usize, b: usize| unfold(principal[i], b as u32);
    let idx = |cur: usize, prev: usize| cur * nb + prev;
    // cost[(b_i, b_{i-1})] and the b_{i-2} that achieved it.
    let mut cost = vec![f64::INFINITY; nb * nb];
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(n);
    back.push(Vec::new());
    back.push(vec![usize::MAX; nb * nb]);
    let s = start as usize;
    let repeated = |i: usize| principal[i] == principal[i - 1];
    for b in 0..nb {
        if allowed_step(value(0, s), value(1, b), repeated(1), options) {
            cost[idx(b, s)] = 0.0;
        }
    }
    if cost.iter().all(|c| c.is_infinite()) {
        return Err(1);
    }
    for i in 2..n {
        let mut next = vec![f64::INFINITY; nb * nb];
        let mut ptr = vec![usize::MAX; nb * nb];
        for prev in 0..nb {
            for prev2 in 0..nb {
                let c = cost[idx(prev, prev2)];
                if c.is_infinite() {
                    continue;
                }
                let (x1, x2) = (value(i - 1, prev), value(i - 2, prev2));
                for cur in 0..nb {
                    let x = value(i, cur);
                    if !allowed_step(x1, x, repeated(i), options) {
                        continue;
                    }
                    let total = c + (x - 2.0 * x1 + x2).powi(2);
                    if total < next[idx(cur, prev)] {
                        next[idx(cur, prev)] = total;
                        ptr[idx(cur, prev)] = prev2;
                    }
                }
            }
        }
        if next.iter().all(|c| c.is_infinite()) {
            return Err(i);
        }
        cost = next;
        back.push(ptr);
    }
    let (best, _) = cost
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let mut branches = vec![0usize; n];
    branches[n - 1] = best / nb;
    branches[n - 2] = best % nb;
    for i in (2..n).rev() {
        branches[i - 2] = back[i][idx(branches[i], branches[i - 1])];
    }
    Ok((cost[best], branches.into_iter().map(|b| b as u32).collect()))
}
