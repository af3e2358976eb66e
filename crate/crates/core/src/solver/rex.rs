use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{RegressionTable, SolverConfig, WEIGHT_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::{chol_inverse, chol_logdet, cholesky, dot, mat_vec};

/// Rank-one updates between refactorizations within a sweep.
const REFACTOR_EVERY: usize = 1000;

/// One exchange sweep, recorded after the sweep-start refactorization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub iteration: usize,
    pub phi: f64,
    pub max_variance: f64,
    pub support_size: usize,
}

/// Output of [`optimize_indexed`].
#[derive(Debug, Clone)]
pub struct WeightSolution {
    pub m: usize,
    /// `(row, weight)` pairs sorted by row, all weights `≥ WEIGHT_FLOOR`.
    pub weights: Vec<(usize, f64)>,
    pub log_det: f64,
    pub max_variance: f64,
    /// Row attaining `max_variance` (lowest index on ties).
    pub argmax: usize,
    pub certified: bool,
    pub sweeps: usize,
    pub trace: Vec<SweepRecord>,
    /// Largest relative change of `Φ` caused by refactorizing the maintained inverse.
    pub refactor_drift: f64,
    pub rank_one_updates: usize,
}

impl WeightSolution {
    pub fn phi(&self) -> f64 {
        (self.log_det / self.m as f64).exp()
    }
}

struct State<'a> {
    table: &'a RegressionTable,
    m: usize,
    w: Vec<f64>,
    support: Vec<usize>,
    in_support: Vec<bool>,
    inv: Vec<f64>,
    log_det: f64,
    updates: usize,
    since_refactor: usize,
    drift: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl<'a> State<'a> {
    /// Drops floor-level weights and renormalizes. Returns whether anything changed.
    fn refresh_support(&mut self) -> bool {
        let before = self.support.len();
        let (w, flags) = (&mut self.w, &mut self.in_support);
        self.support.retain(|&i| {
            if w[i] < WEIGHT_FLOOR {
                w[i] = 0.0;
                flags[i] = false;
                false
            } else {
                true
            }
        });
        self.support.sort_unstable();
        let total: f64 = self.support.iter().map(|&i| self.w[i]).sum();
        if total != 1.0 {
            for &i in &self.support {
                self.w[i] /= total;
            }
        }
        before != self.support.len() || total != 1.0
    }

    fn weights(&self) -> Vec<(usize, f64)> {
        self.support.iter().map(|&i| (i, self.w[i])).collect()
    }

    /// Recomputes `M⁻¹` and `log det M` from the weights; `measure` records the drift
    /// of the maintained values.
    fn refactor(&mut self, measure: bool) -> Result<()> {
        let mat = self.table.info_matrix(&self.weights());
        let l = cholesky(&mat, self.m).ok_or(Error::Singular)?;
        let log_det = chol_logdet(&l, self.m);
        if measure && self.since_refactor > 0 {
            let rel = ((log_det - self.log_det) / self.m as f64).exp_m1().abs();
            self.drift = self.drift.max(rel);
        }
        self.log_det = log_det;
        self.inv = chol_inverse(&l, self.m);
        self.since_refactor = 0;
        Ok(())
    }

    /// Moves the D-optimal amount of weight from `v` to `u`. Returns whether `Φ` increased.
    fn exchange(&mut self, u: usize, v: usize) -> Result<bool> {
        if u == v {
            return Ok(false);
        }
        let (wu, wv) = (self.w[u], self.w[v]);
        if wu == 0.0 && wv == 0.0 {
            return Ok(false);
        }
        let (fu, fv) = (self.table.row(u), self.table.row(v));
        mat_vec(&self.inv, fu, &mut self.a);
        mat_vec(&self.inv, fv, &mut self.b);
        let du = dot(fu, &self.a);
        let dv = dot(fv, &self.b);
        let duv = dot(fv, &self.a);
        let den = du * dv - duv * duv;
        let gain = |t: f64| 1.0 + t * (du - dv) - t * t * den;
        let mut t = if den > 1e-14 * du * dv {
            ((du - dv) / (2.0 * den)).clamp(-wu, wv)
        } else if du > dv {
            wv
        } else {
            -wu
        };
        // Snap to emptying a point rather than leaving a floor-level residue.
        if t < wv && wv - t < WEIGHT_FLOOR && gain(wv) >= gain(t) {
            t = wv;
        }
        if t > -wu && wu + t < WEIGHT_FLOOR && gain(-wu) >= gain(t) {
            t = -wu;
        }
        let g = gain(t);
        if t == 0.0 || !(g > 1.0) {
            return Ok(false);
        }

        self.w[u] = if t == -wu { 0.0 } else { wu + t };
        self.w[v] = if t == wv { 0.0 } else { wv - t };
        for i in [u, v] {
            if !self.in_support[i] {
                self.in_support[i] = true;
                self.support.push(i);
            }
        }

        // (M + t f_u f_uᵀ − t f_v f_vᵀ)⁻¹ by the Woodbury identity.
        let c = t / g;
        let caa = c * (1.0 - t * dv);
        let cab = c * t * duv;
        let cbb = -c * (1.0 + t * du);
        let m = self.m;
        for r in 0..m {
            let (ar, br) = (self.a[r], self.b[r]);
            let pa = caa * ar + cab * br;
            let pb = cab * ar + cbb * br;
            for s in r..m {
                let delta = pa * self.a[s] + pb * self.b[s];
                self.inv[r * m + s] -= delta;
                if s != r {
                    self.inv[s * m + r] = self.inv[r * m + s];
                }
            }
        }
        self.log_det += g.ln();
        self.updates += 2;
        self.since_refactor += 2;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor(true)?;
        }
        Ok(true)
    }
}

/// Randomized pair-exchange weight optimization on the rows of `table`.
///
/// Each sweep refactorizes `M`, evaluates `d` on every row, and stops when
/// `m / max d ≥ eff_opt`. Otherwise it exchanges weight between the row of
/// largest `d` and the support row of smallest `d`, then over all pairs of
/// (support × candidates) in random order, where the candidates are the `2m`
/// rows of largest `d` together with the support.
pub fn optimize_indexed(
    table: &RegressionTable,
    init: &[(usize, f64)],
    cfg: &SolverConfig,
) -> Result<WeightSolution> {
    cfg.validate()?;
    let m = table.m();
    let n = table.len();
    if init.is_empty() {
        return Err(Error::InvalidDesign("empty initial design".into()));
    }
    let mut w = vec![0.0; n];
    for &(i, wi) in init {
        if i >= n {
            return Err(Error::InvalidArgument(format!("initial row {i} out of range")));
        }
        if !(wi.is_finite() && wi > 0.0) {
            return Err(Error::InvalidDesign(format!("weight {wi} is not positive")));
        }
        w[i] += wi;
    }
    let mut support: Vec<usize> = init.iter().map(|&(i, _)| i).collect();
    support.sort_unstable();
    support.dedup();
    let mut in_support = vec![false; n];
    support.iter().for_each(|&i| in_support[i] = true);
    let mut st = State {
        table,
        m,
        w,
        support,
        in_support,
        inv: vec![0.0; m * m],
        log_det: 0.0,
        updates: 0,
        since_refactor: 0,
        drift: 0.0,
        a: vec![0.0; m],
        b: vec![0.0; m],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut d = Vec::with_capacity(n);
    let mut trace = Vec::new();
    let threshold = m as f64 / cfg.eff_opt;
    let k_top = (2 * m).min(n);
    let mut order: Vec<usize> = Vec::new();

    for iteration in 0.. {
        if iteration > 0 {
            st.refactor(true)?;
        }
        if st.refresh_support() || iteration == 0 {
            st.refactor(false)?;
        }
        table.variances(&st.inv, &mut d);
        let (argmax, max_d) = d
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        trace.push(SweepRecord {
            iteration,
            phi: (st.log_det / m as f64).exp(),
            max_variance: max_d,
            support_size: st.support.len(),
        });
        let certified = max_d <= threshold;
        if certified || iteration + 1 >= cfg.max_iters {
            return Ok(WeightSolution {
                m,
                weights: st.weights(),
                log_det: st.log_det,
                max_variance: max_d,
                argmax,
                certified,
                sweeps: iteration + 1,
                trace,
                refactor_drift: st.drift,
                rank_one_updates: st.updates,
            });
        }

        // Candidates: the 2m rows of largest variance (ties to lower index) and the support.
        order.clear();
        order.extend(0..n);
        let by_variance = |a: &usize, b: &usize| d[*b].total_cmp(&d[*a]).then(a.cmp(b));
        if k_top < n {
            order.select_nth_unstable_by(k_top - 1, by_variance);
            order.truncate(k_top);
        }
        order.sort_unstable_by(by_variance);
        let mut cands = order.clone();
        for &i in &st.support {
            if !cands.contains(&i) {
                cands.push(i);
            }
        }

        let vmin = *st
            .support
            .iter()
            .min_by(|a, b| d[**a].total_cmp(&d[**b]).then(a.cmp(b)))
            .expect("support is nonempty");
        st.exchange(argmax, vmin)?;

        let mut sup = st.support.clone();
        sup.sort_unstable();
        sup.shuffle(&mut rng);
        cands.sort_unstable();
        cands.shuffle(&mut rng);
        for &v in &sup {
            for &u in &cands {
                if st.w[v] == 0.0 {
                    break;
                }
                st.exchange(u, v)?;
            }
        }
    }
    unreachable!()
}
