use indexmap::IndexSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::grid::{median_index, DesignPoint, FactorGrid};
use crate::info::information_matrix;
use crate::linalg::quad_form;
use crate::models::Model;

/// Largest factor count for which the corner/median grid is built.
pub const MAX_INI_FACTORS: usize = 20;

/// Where a point of an exploration set came from. A point can have several sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Grid,
    Random,
    LocalMax,
    Star,
}

impl Provenance {
    fn bit(self) -> u8 {
        match self {
            Provenance::Grid => 1,
            Provenance::Random => 2,
            Provenance::LocalMax => 4,
            Provenance::Star => 8,
        }
    }
}

/// A deduplicated set of grid points, stored as per-factor level indices in insertion order.
#[derive(Debug, Clone)]
pub struct ExplorationSet {
    points: IndexSet<Box<[u32]>>,
    tags: Vec<u8>,
}

impl ExplorationSet {
    pub fn new() -> Self {
        Self {
            points: IndexSet::new(),
            tags: Vec::new(),
        }
    }

    /// Inserts a point by level indices; returns its row.
    pub fn insert(&mut self, idx: Box<[u32]>, tag: Provenance) -> usize {
        let (row, fresh) = self.points.insert_full(idx);
        if fresh {
            self.tags.push(tag.bit());
        } else {
            self.tags[row] |= tag.bit();
        }
        row
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn indices(&self, row: usize) -> &[u32] {
        &self.points[row]
    }

    pub fn row_of(&self, idx: &[u32]) -> Option<usize> {
        self.points.get_index_of(idx)
    }

    pub fn has_tag(&self, row: usize, tag: Provenance) -> bool {
        self.tags[row] & tag.bit() != 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.points.iter().map(|b| &**b)
    }

    pub fn to_points(&self, grid: &FactorGrid) -> Vec<DesignPoint> {
        self.iter().map(|idx| DesignPoint::new(grid.coords_of(idx))).collect()
    }
}

impl Default for ExplorationSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Level indices of the minimum, median and maximum of a factor (minimum and
/// maximum only for binary factors).
fn corner_levels(n: usize) -> Vec<u32> {
    let mut v = vec![0, median_index(n) as u32, (n - 1) as u32];
    v.dedup();
    if n == 2 {
        v = vec![0, 1];
    }
    v
}

/// A uniformly random grid point: each factor's level drawn independently.
pub(crate) fn random_indices<R: Rng>(grid: &FactorGrid, rng: &mut R) -> Box<[u32]> {
    (0..grid.factors())
        .map(|i| rng.gen_range(0..grid.level_count(i)) as u32)
        .collect()
}

/// Corner/median grid together with `n_rnd` uniformly random grid points.
pub fn ini_indexed<R: Rng>(grid: &FactorGrid, n_rnd: usize, rng: &mut R) -> Result<ExplorationSet> {
    let k = grid.factors();
    if k > MAX_INI_FACTORS {
        return Err(Error::InvalidArgument(format!(
            "initial grid needs up to 3^{k} points; at most {MAX_INI_FACTORS} factors are supported"
        )));
    }
    let per_factor: Vec<Vec<u32>> = (0..k).map(|i| corner_levels(grid.level_count(i))).collect();
    let mut set = ExplorationSet::new();
    let mut pos = vec![0usize; k];
    'outer: loop {
        let idx: Box<[u32]> = pos.iter().zip(&per_factor).map(|(&p, lv)| lv[p]).collect();
        set.insert(idx, Provenance::Grid);
        for i in (0..k).rev() {
            pos[i] += 1;
            if pos[i] < per_factor[i].len() {
                continue 'outer;
            }
            pos[i] = 0;
        }
        break;
    }
    for _ in 0..n_rnd {
        set.insert(random_indices(grid, rng), Provenance::Random);
    }
    Ok(set)
}

/// Initial exploration set as design points.
pub fn ini(grid: &FactorGrid, n_rnd: usize, seed: u64) -> Result<Vec<DesignPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ini_indexed(grid, n_rnd, &mut rng)?.to_points(grid))
}

/// Adds `x` and every grid point differing from it in exactly one coordinate.
pub fn insert_star(set: &mut ExplorationSet, grid: &FactorGrid, x: &[u32]) {
    set.insert(x.into(), Provenance::Star);
    let mut y: Box<[u32]> = x.into();
    for i in 0..grid.factors() {
        for j in 0..grid.level_count(i) as u32 {
            if j != x[i] {
                y[i] = j;
                set.insert(y.clone(), Provenance::Star);
            }
        }
        y[i] = x[i];
    }
}

/// The star set of `x`: `x` followed by all single-coordinate substitutions,
/// factor by factor in level order.
pub fn star_set(grid: &FactorGrid, x: &DesignPoint) -> Result<Vec<DesignPoint>> {
    let idx = grid.locate(x.coords())?;
    let mut set = ExplorationSet::new();
    insert_star(&mut set, grid, &idx);
    Ok(set.to_points(grid))
}

/// Greedy ascent of `fᵀ A f` over star neighbourhoods, starting from `start`.
///
/// Each step scans the whole star set and moves to the point with the largest
/// value if it is strictly larger than the current one; ties go to the lowest
/// factor index, then the lowest level index.
pub(crate) fn climb(grid: &FactorGrid, model: &Model, inv: &[f64], start: Box<[u32]>) -> Result<Box<[u32]>> {
    let m = model.m();
    let mut x = start;
    let mut coords = grid.coords_of(&x);
    let mut f = vec![0.0; m];
    model.regression(&coords, &mut f)?;
    let mut current = quad_form(inv, &f);
    loop {
        let mut best: Option<(usize, usize)> = None;
        let mut best_d = current;
        for i in 0..grid.factors() {
            let keep = coords[i];
            for (j, &level) in grid.levels(i).iter().enumerate() {
                if j as u32 == x[i] {
                    continue;
                }
                coords[i] = level;
                model.regression(&coords, &mut f)?;
                let d = quad_form(inv, &f);
                if d > best_d {
                    best_d = d;
                    best = Some((i, j));
                }
            }
            coords[i] = keep;
        }
        match best {
            None => return Ok(x),
            Some((i, j)) => {
                x[i] = j as u32;
                coords[i] = grid.levels(i)[j];
                current = best_d;
            }
        }
    }
}

/// Terminal points of `n_loc` hill climbs of `fᵀ A f`, deduplicated and sorted.
/// Climb `c` draws its start from `rng_for(c)`.
pub(crate) fn local_search_with<F>(
    grid: &FactorGrid,
    model: &Model,
    inv: &[f64],
    n_loc: usize,
    rng_for: F,
) -> Result<Vec<Box<[u32]>>>
where
    F: Fn(usize) -> ChaCha8Rng + Sync,
{
    let mut out = (0..n_loc)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(c);
            climb(grid, model, inv, random_indices(grid, &mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Local maxima of the variance function of `design`, from `n_loc` random starts.
pub fn local_search(
    grid: &FactorGrid,
    model: &Model,
    design: &Design,
    n_loc: usize,
    seed: u64,
) -> Result<Vec<DesignPoint>> {
    for p in design.points() {
        grid.locate(p.coords())?;
    }
    let mi = information_matrix(design, model)?;
    let inv = mi.inverse()?;
    let pts = local_search_with(grid, model, inv, n_loc, |c| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(c as u64);
        r
    })?;
    Ok(pts.iter().map(|idx| DesignPoint::new(grid.coords_of(idx))).collect())
}
