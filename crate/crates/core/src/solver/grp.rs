use super::RegressionTable;
use crate::error::{Error, Result};
use crate::linalg::{chol_logdet, cholesky};

fn log_det(table: &RegressionTable, weights: &[(usize, f64)]) -> Option<f64> {
    let m = table.m();
    cholesky(&table.info_matrix(weights), m).map(|l| chol_logdet(&l, m))
}

/// Repeatedly pools the nearest pair of support points.
///
/// Distances are Euclidean after dividing coordinate `j` by `ranges[j]`. The
/// pair `(k, l)`, `k < l` in input order, with the smallest distance is merged
/// into `k` if `w_k ≥ w_l` and into `l` otherwise. A merge is kept while the
/// pooled design is at least `eff_grp`-efficient relative to the input design;
/// the first rejected merge ends the procedure.
pub fn grp_indexed<'c, C>(
    table: &RegressionTable,
    weights: &[(usize, f64)],
    coords: C,
    ranges: &[f64],
    eff_grp: f64,
) -> Result<Vec<(usize, f64)>>
where
    C: Fn(usize) -> &'c [f64],
{
    let m = table.m() as f64;
    let base = log_det(table, weights).ok_or(Error::Singular)?;
    let floor = eff_grp.ln();
    let s = weights.len();
    let dist: Vec<f64> = (0..s * s)
        .map(|ij| {
            let (a, b) = (coords(weights[ij / s].0), coords(weights[ij % s].0));
            a.iter()
                .zip(b)
                .zip(ranges)
                .map(|((x, y), r)| ((x - y) / r).powi(2))
                .sum()
        })
        .collect();
    let mut current = weights.to_vec();
    let mut alive = vec![true; s];
    loop {
        let mut best: Option<(usize, usize)> = None;
        for k in 0..s {
            if !alive[k] {
                continue;
            }
            for l in (k + 1)..s {
                if alive[l] && best.map_or(true, |(bk, bl)| dist[k * s + l] < dist[bk * s + bl]) {
                    best = Some((k, l));
                }
            }
        }
        let Some((k, l)) = best else {
            break;
        };
        let (keep, drop) = if current[k].1 >= current[l].1 { (k, l) } else { (l, k) };
        let mut trial = current.clone();
        trial[keep].1 += trial[drop].1;
        trial[drop].1 = 0.0;
        let pooled: Vec<(usize, f64)> = trial.iter().copied().filter(|&(_, w)| w > 0.0).collect();
        match log_det(table, &pooled) {
            Some(ld) if (ld - base) / m >= floor => {
                current = trial;
                alive[drop] = false;
            }
            _ => break,
        }
    }
    Ok(current.into_iter().filter(|&(_, w)| w > 0.0).collect())
}
