use rand::Rng;
use rayon::prelude::*;

use super::{RegressionTable, PAR_THRESHOLD};
use crate::error::{Error, Result};
use crate::linalg::dot;

/// Projections below this fraction of the largest `‖f‖` count as zero.
const DEGENERACY: f64 = 1e-12;

/// Subtracts the components of `v` along the orthonormal `basis`, twice for stability.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
    n
}

/// Greedy selection of `m` rows with linearly independent regression vectors.
///
/// Each step draws a random direction orthogonal to the rows already chosen
/// and takes the row with the largest absolute inner product (lowest index on
/// ties). Fails with [`Error::Degenerate`] when every candidate lies in the
/// span of the chosen rows.
pub fn kumar_yildirim_indices<R: Rng>(table: &RegressionTable, rng: &mut R) -> Result<Vec<usize>> {
    let m = table.m();
    let n = table.len();
    if n < m {
        return Err(Error::Degenerate);
    }
    let scale = (0..n)
        .map(|i| dot(table.row(i), table.row(i)).sqrt())
        .fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Degenerate);
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut chosen = Vec::with_capacity(m);
    let mut proj = vec![0.0; n];
    for _ in 0..m {
        let mut u: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut u, &basis);
        if !(normalize(&mut u) > 0.0) {
            return Err(Error::Degenerate);
        }
        if n >= PAR_THRESHOLD {
            proj.par_iter_mut()
                .with_min_len(1024)
                .enumerate()
                .for_each(|(i, p)| *p = dot(&u, table.row(i)).abs());
        } else {
            for (i, p) in proj.iter_mut().enumerate() {
                *p = dot(&u, table.row(i)).abs();
            }
        }
        let (best, &top) = proj
            .iter()
            .enumerate()
            .fold((0, &proj[0]), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if !(top > DEGENERACY * scale) {
            return Err(Error::Degenerate);
        }
        let mut q = table.row(best).to_vec();
        orthogonalize(&mut q, &basis);
        if !(normalize(&mut q) > DEGENERACY * scale) {
            return Err(Error::Degenerate);
        }
        basis.push(q);
        chosen.push(best);
    }
    Ok(chosen)
}
