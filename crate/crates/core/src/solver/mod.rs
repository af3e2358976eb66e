//! Weight optimization on a finite candidate set.
//!
//! The pipeline is [`kumar_yildirim_init`] for a nonsingular start,
//! [`optimize_weights`] (randomized pair exchange with a certified stopping
//! rule) and [`grp_pooling`] to merge nearby support points.
//!
//! The `*_indexed` functions work on a precomputed [`RegressionTable`] and are
//! what the exploration loop uses; the point-based wrappers are for callers
//! holding explicit candidate lists.

mod grp;
mod ky;
mod rex;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::grid::DesignPoint;
use crate::models::Model;

pub use grp::grp_indexed;
pub use ky::kumar_yildirim_indices;
pub use rex::{optimize_indexed, SweepRecord, WeightSolution};

/// Weights below this are dropped from the support.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Row counts below this are processed sequentially.
pub(crate) const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once `m / max d ≥ eff_opt` over the candidate set.
    pub eff_opt: f64,
    /// Pooling is accepted while efficiency relative to the unpooled design is `≥ eff_grp`.
    pub eff_grp: f64,
    /// Maximum number of exchange sweeps.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eff_opt: 1.0 - 1e-6,
            eff_grp: 1.0 - 1e-6,
            max_iters: 20_000,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eff_opt > 0.0 && self.eff_opt < 1.0) {
            return Err(Error::InvalidArgument(format!("eff_opt = {} not in (0, 1)", self.eff_opt)));
        }
        if !(self.eff_grp > 0.0 && self.eff_grp <= 1.0) {
            return Err(Error::InvalidArgument(format!("eff_grp = {} not in (0, 1]", self.eff_grp)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Regression vectors of a finite candidate set, one row of length `m` per point.
#[derive(Debug, Clone)]
pub struct RegressionTable {
    m: usize,
    rows: Vec<f64>,
}

impl RegressionTable {
    /// Fills row `i` with `eval(i, row)`; rows are computed in parallel for large `n`.
    pub fn build<F>(n: usize, m: usize, eval: F) -> Result<Self>
    where
        F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
    {
        let mut rows = vec![0.0; n * m];
        if n >= PAR_THRESHOLD {
            rows.par_chunks_mut(m)
                .enumerate()
                .try_for_each(|(i, r)| eval(i, r))?;
        } else {
            for (i, r) in rows.chunks_mut(m).enumerate() {
                eval(i, r)?;
            }
        }
        Ok(Self { m, rows })
    }

    pub fn from_points(points: &[DesignPoint], model: &Model) -> Result<Self> {
        Self::build(points.len(), model.m(), |i, r| model.regression(points[i].coords(), r))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.m..(i + 1) * self.m]
    }

    /// `M = Σ w_i f_i f_iᵀ` over `(index, weight)` pairs, exactly symmetric.
    pub fn info_matrix(&self, weights: &[(usize, f64)]) -> Vec<f64> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for &(i, w) in weights {
            let f = self.row(i);
            for r in 0..m {
                let wr = w * f[r];
                for c in r..m {
                    a[r * m + c] += wr * f[c];
                }
            }
        }
        for r in 0..m {
            for c in 0..r {
                a[r * m + c] = a[c * m + r];
            }
        }
        a
    }

    /// `fᵢᵀ A fᵢ` for every row.
    pub fn variances(&self, inv: &[f64], out: &mut Vec<f64>) {
        let n = self.len();
        out.resize(n, 0.0);
        let m = self.m;
        if n >= PAR_THRESHOLD {
            out.par_iter_mut()
                .with_min_len(1024)
                .enumerate()
                .for_each(|(i, d)| *d = crate::linalg::quad_form(inv, &self.rows[i * m..(i + 1) * m]));
        } else {
            for (i, d) in out.iter_mut().enumerate() {
                *d = crate::linalg::quad_form(inv, self.row(i));
            }
        }
    }
}

/// Index of each support point of `design` within `points`.
fn support_indices(points: &[DesignPoint], design: &Design) -> Result<Vec<(usize, f64)>> {
    let index: HashMap<&DesignPoint, usize> = points.iter().enumerate().map(|(i, p)| (p, i)).collect();
    if index.len() != points.len() {
        return Err(Error::InvalidArgument("candidate points are not distinct".into()));
    }
    design
        .iter()
        .map(|(p, &w)| {
            index
                .get(p)
                .map(|&i| (i, w))
                .ok_or_else(|| Error::InvalidArgument(format!("support point {p} is not a candidate")))
        })
        .collect()
}

/// Uniform design on `m` points with linearly independent regression vectors.
pub fn kumar_yildirim_init(points: &[DesignPoint], model: &Model, seed: u64) -> Result<Design> {
    let table = RegressionTable::from_points(points, model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = kumar_yildirim_indices(&table, &mut rng)?;
    Design::uniform(chosen.into_iter().map(|i| points[i].clone()).collect())
}

/// Result of [`optimize_weights`].
#[derive(Debug, Clone)]
pub struct OptimizedDesign {
    pub design: Design,
    pub phi: f64,
    /// `max d` over the candidate points for the returned design.
    pub max_variance: f64,
    /// Whether `m / max_variance ≥ eff_opt`.
    pub certified: bool,
    pub trace: Vec<SweepRecord>,
}

/// Optimizes the weights on `points` starting from `init`, whose support must lie in `points`.
pub fn optimize_weights(
    points: &[DesignPoint],
    model: &Model,
    init: &Design,
    cfg: &SolverConfig,
) -> Result<OptimizedDesign> {
    let table = RegressionTable::from_points(points, model)?;
    let start = support_indices(points, init)?;
    let sol = optimize_indexed(&table, &start, cfg)?;
    let design = Design::new(
        sol.weights.iter().map(|&(i, _)| points[i].clone()).collect(),
        sol.weights.iter().map(|&(_, w)| w).collect(),
    )?;
    Ok(OptimizedDesign {
        design,
        phi: sol.phi(),
        max_variance: sol.max_variance,
        certified: sol.certified,
        trace: sol.trace,
    })
}

/// Pools nearest support pairs while the efficiency relative to `design` stays `≥ cfg.eff_grp`.
///
/// `ranges` rescales each coordinate before distances are taken.
pub fn grp_pooling(design: &Design, model: &Model, ranges: &[f64], cfg: &SolverConfig) -> Result<Design> {
    if ranges.len() != design.k() {
        return Err(Error::DimensionMismatch {
            expected: design.k(),
            got: ranges.len(),
        });
    }
    let table = RegressionTable::from_points(design.points(), model)?;
    let coords: Vec<&[f64]> = design.points().iter().map(|p| p.coords()).collect();
    let start: Vec<(usize, f64)> = design.weights().iter().copied().enumerate().collect();
    let pooled = grp_indexed(&table, &start, |i| coords[i], ranges, cfg.eff_grp)?;
    Design::new(
        pooled.iter().map(|&(i, _)| design.points()[i].clone()).collect(),
        pooled.iter().map(|&(_, w)| w).collect(),
    )
}
