//! Finite factor grids and points on them.
//!
//! A [`FactorGrid`] is the Cartesian product of per-factor level lists. It is
//! never enumerated; points are addressed either by their coordinates
//! ([`DesignPoint`]) or by per-factor level indices.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_DECIMALS: u32 = 12;

/// Per-factor finite level sets. Each level list is strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorGrid {
    levels: Vec<Vec<f64>>,
}

impl FactorGrid {
    pub fn new(levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one factor".into()));
        }
        for (i, lv) in levels.iter().enumerate() {
            if lv.is_empty() {
                return Err(Error::InvalidGrid(format!("factor {} has no levels", i + 1)));
            }
            if lv.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGrid(format!("factor {} has a non-finite level", i + 1)));
            }
            if lv.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGrid(format!(
                    "levels of factor {} are not strictly increasing",
                    i + 1
                )));
            }
            if lv.len() > u32::MAX as usize {
                return Err(Error::InvalidGrid(format!("factor {} has too many levels", i + 1)));
            }
        }
        Ok(Self { levels })
    }

    /// Builds a grid from per-factor level specs.
    pub fn from_specs(specs: &[LevelSpec]) -> Result<Self> {
        let levels = specs.iter().map(LevelSpec::levels).collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }

    pub fn factors(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self, factor: usize) -> &[f64] {
        &self.levels[factor]
    }

    pub fn all_levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn level_count(&self, factor: usize) -> usize {
        self.levels[factor].len()
    }

    pub fn is_binary(&self, factor: usize) -> bool {
        self.levels[factor].len() == 2
    }

    /// Number of grid points, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        self.levels
            .iter()
            .fold(1u128, |acc, lv| acc.saturating_mul(lv.len() as u128))
    }

    /// Approximate number of grid points as a float (never saturates).
    pub fn size_f64(&self) -> f64 {
        self.levels.iter().map(|lv| lv.len() as f64).product()
    }

    /// Width `hi - lo` of each factor, with degenerate (single-level) factors mapped to 1.
    pub fn ranges(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|lv| {
                let r = lv[lv.len() - 1] - lv[0];
                if r > 0.0 {
                    r
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Index of `value` among the levels of `factor` (exact match).
    pub fn level_index(&self, factor: usize, value: f64) -> Result<u32> {
        let lv = &self.levels[factor];
        lv.binary_search_by(|probe| probe.total_cmp(&value))
            .map(|i| i as u32)
            .map_err(|_| Error::OffGrid { factor, value })
    }

    /// Level indices of a coordinate vector.
    pub fn locate(&self, coords: &[f64]) -> Result<Vec<u32>> {
        if coords.len() != self.factors() {
            return Err(Error::DimensionMismatch {
                expected: self.factors(),
                got: coords.len(),
            });
        }
        coords
            .iter()
            .enumerate()
            .map(|(i, &v)| self.level_index(i, v))
            .collect()
    }

    pub fn coords_of(&self, idx: &[u32]) -> Vec<f64> {
        idx.iter()
            .zip(&self.levels)
            .map(|(&j, lv)| lv[j as usize])
            .collect()
    }

    pub fn coords_into(&self, idx: &[u32], out: &mut [f64]) {
        for ((o, &j), lv) in out.iter_mut().zip(idx).zip(&self.levels) {
            *o = lv[j as usize];
        }
    }

    /// Validates `coords` against the grid and wraps them in a [`DesignPoint`].
    pub fn point(&self, coords: Vec<f64>) -> Result<DesignPoint> {
        self.locate(&coords)?;
        Ok(DesignPoint { coords })
    }

    pub fn contains(&self, p: &DesignPoint) -> bool {
        self.locate(&p.coords).is_ok()
    }
}

/// Lower median of a level list: the `ceil(n/2)`-th smallest level.
pub fn median_level(levels: &[f64]) -> f64 {
    levels[median_index(levels.len())]
}

pub(crate) fn median_index(n: usize) -> usize {
    n.div_ceil(2).saturating_sub(1)
}

/// Specification of one factor's levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LevelSpec {
    /// `lo, lo + step, ..., hi`, decimal-exact.
    Range { lo: f64, hi: f64, step: f64 },
    /// An explicit list (sorted and validated on use).
    List(Vec<f64>),
}

impl LevelSpec {
    pub fn range(lo: f64, hi: f64, step: f64) -> Self {
        LevelSpec::Range { lo, hi, step }
    }

    pub fn levels(&self) -> Result<Vec<f64>> {
        match self {
            LevelSpec::Range { lo, hi, step } => range_levels(*lo, *hi, *step),
            LevelSpec::List(v) => {
                let mut v = v.clone();
                v.sort_by(f64::total_cmp);
                Ok(v)
            }
        }
    }
}

fn decimals(x: f64) -> Option<u32> {
    (0..=MAX_DECIMALS).find(|&d| {
        let s = x * 10f64.powi(d as i32);
        (s - s.round()).abs() <= 1e-9 * s.abs().max(1.0)
    })
}

/// Levels `lo + i*step` for `i = 0..n`, rounded to the decimal precision of
/// the inputs so that every level is the nearest double to its decimal value.
pub fn range_levels(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
        return Err(Error::InvalidGrid("non-finite range".into()));
    }
    if step <= 0.0 || hi < lo {
        return Err(Error::InvalidGrid(format!(
            "bad range [{lo}, {hi}] with step {step}"
        )));
    }
    let n_steps = ((hi - lo) / step).round();
    if ((hi - lo) - n_steps * step).abs() > 1e-9 * step.max((hi - lo).abs()) {
        return Err(Error::InvalidGrid(format!(
            "range [{lo}, {hi}] is not a multiple of step {step}"
        )));
    }
    let n_steps = n_steps as i64;
    let d = [lo, hi, step].iter().filter_map(|&v| decimals(v)).max();
    let levels = match d {
        Some(d) if [lo, hi, step].iter().all(|&v| decimals(v).is_some()) => {
            let scale = 10f64.powi(d as i32);
            let lo_i = (lo * scale).round() as i64;
            let step_i = (step * scale).round() as i64;
            (0..=n_steps)
                .map(|i| (lo_i + i * step_i) as f64 / scale)
                .collect::<Vec<_>>()
        }
        _ => (0..=n_steps).map(|i| lo + i as f64 * step).collect(),
    };
    let mut levels = levels;
    if let Some(last) = levels.last_mut() {
        *last = hi;
    }
    levels[0] = lo;
    Ok(levels)
}

/// A point of the design space, given by its factor coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesignPoint {
    coords: Vec<f64>,
}

impl DesignPoint {
    /// Wraps coordinates without grid validation; use [`FactorGrid::point`]
    /// when membership has to be checked.
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn k(&self) -> usize {
        self.coords.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

impl PartialEq for DesignPoint {
    fn eq(&self, other: &Self) -> bool {
        self.coords.len() == other.coords.len()
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(a, b)| a.to_bits() == b.to_bits() || a == b)
    }
}

impl Eq for DesignPoint {}

impl Hash for DesignPoint {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for c in &self.coords {
            // +0.0 and -0.0 compare equal, so hash them identically
            let c = if *c == 0.0 { 0.0f64 } else { *c };
            c.to_bits().hash(state);
        }
    }
}

impl fmt::Display for DesignPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<f64>> for DesignPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_levels_are_decimal_exact() {
        let lv = range_levels(-2.0, 2.0, 0.001).unwrap();
        assert_eq!(lv.len(), 4001);
        assert_eq!(lv[0], -2.0);
        assert_eq!(lv[4000], 2.0);
        assert_eq!(lv[2000], 0.0);
        assert_eq!(lv[1070], -0.93);
        assert_eq!(lv[261], -1.739);
        let lv = range_levels(0.125, 0.425, 0.001).unwrap();
        assert_eq!(lv.len(), 301);
        assert_eq!(lv[100], 0.225);
    }

    #[test]
    fn range_must_be_multiple_of_step() {
        assert!(range_levels(0.0, 1.0, 0.3).is_err());
        assert!(range_levels(1.0, 0.0, 0.1).is_err());
        assert!(range_levels(0.0, 1.0, 0.0).is_err());
        assert_eq!(range_levels(3.0, 3.0, 0.5).unwrap(), vec![3.0]);
    }

    #[test]
    fn medians() {
        assert_eq!(median_level(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median_level(&[1.0, 2.0, 3.0, 4.0]), 2.0);
        let lv = range_levels(0.0, 5.0, 0.001).unwrap();
        assert_eq!(lv.len(), 5001);
        assert_eq!(median_level(&lv), 2.5);
    }

    #[test]
    fn grid_validation() {
        assert!(FactorGrid::new(vec![]).is_err());
        assert!(FactorGrid::new(vec![vec![]]).is_err());
        assert!(FactorGrid::new(vec![vec![1.0, 1.0]]).is_err());
        assert!(FactorGrid::new(vec![vec![2.0, 1.0]]).is_err());
        let g = FactorGrid::new(vec![vec![-1.0, 1.0], vec![0.0, 0.5, 1.0]]).unwrap();
        assert_eq!(g.size(), 6);
        assert!(g.point(vec![1.0, 0.5]).is_ok());
        assert_eq!(
            g.point(vec![1.0, 0.25]).unwrap_err(),
            Error::OffGrid { factor: 1, value: 0.25 }
        );
        assert!(g.point(vec![1.0]).is_err());
        assert_eq!(g.locate(&[-1.0, 1.0]).unwrap(), vec![0, 2]);
    }

    #[test]
    fn huge_grid_size_saturates_without_enumeration() {
        let lv = range_levels(-2.0, 2.0, 0.001).unwrap();
        let g = FactorGrid::new(vec![lv; 12]).unwrap();
        assert_eq!(g.size(), u128::MAX);
        assert!(4001u128.checked_pow(12).is_none());
        let g = FactorGrid::new(vec![vec![0.0, 1.0]; 200]).unwrap();
        assert_eq!(g.size(), u128::MAX);
        assert!(g.size_f64() > 1e60);
    }

    #[test]
    fn point_equality_is_exact() {
        let a = DesignPoint::new(vec![0.1, 0.2]);
        let b = DesignPoint::new(vec![0.1, 0.2]);
        let c = DesignPoint::new(vec![0.1, 0.2000000001]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(DesignPoint::new(vec![0.0]), DesignPoint::new(vec![-0.0]));
    }
}
