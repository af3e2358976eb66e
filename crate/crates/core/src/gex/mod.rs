//! The galaxy exploration loop.
//!
//! A run alternates a finite-set optimization ([`crate::solver`]) with the
//! construction of a new exploration set: local maxima of the current
//! variance function plus the star sets of the current support points. The
//! loop ends when a round improves `Φ` by a factor of at most `1/eff_stop`.

mod explore;

use std::time::Instant;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::design::{Design, DesignRecord};
use crate::error::{Error, Result};
use crate::grid::{DesignPoint, FactorGrid};
use crate::info::information_matrix;
use crate::linalg::{self, chol_inverse, chol_logdet, cholesky};
use crate::models::Model;
use crate::solver::{
    grp_indexed, kumar_yildirim_indices, optimize_indexed, RegressionTable, SolverConfig,
};

pub use explore::{
    ini, ini_indexed, insert_star, local_search, star_set, ExplorationSet, Provenance,
    MAX_INI_FACTORS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GexConfig {
    pub eff_opt: f64,
    pub eff_grp: f64,
    /// The loop stops once `Φ_old / Φ_new > eff_stop`.
    pub eff_stop: f64,
    /// Hill climbs per round.
    pub n_loc: usize,
    /// Random points in the initial exploration set.
    pub n_rnd: usize,
    pub seed: u64,
    /// Whiten the regression vectors with `M_KY^{-1/2}` before optimizing.
    pub reparametrize: bool,
    pub max_rounds: usize,
    /// Sweep cap of each weight optimization.
    pub max_sweeps: usize,
}

impl Default for GexConfig {
    fn default() -> Self {
        Self {
            eff_opt: 1.0 - 1e-6,
            eff_grp: 1.0 - 1e-6,
            eff_stop: 1.0 - 1e-6,
            n_loc: 50,
            n_rnd: 1000,
            seed: 0,
            reparametrize: false,
            max_rounds: 100,
            max_sweeps: SolverConfig::default().max_iters,
        }
    }
}

impl GexConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver(0).validate()?;
        if !(self.eff_stop > 0.0 && self.eff_stop < 1.0) {
            return Err(Error::InvalidArgument(format!("eff_stop = {} not in (0, 1)", self.eff_stop)));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidArgument("max_rounds must be positive".into()));
        }
        Ok(())
    }

    fn solver(&self, round: usize) -> SolverConfig {
        SolverConfig {
            eff_opt: self.eff_opt,
            eff_grp: self.eff_grp,
            max_iters: self.max_sweeps,
            seed: stream_seed(self.seed, Phase::Exchange, round as u64, 0),
        }
    }
}

#[derive(Clone, Copy)]
enum Phase {
    Initial = 1,
    Start = 2,
    Exchange = 3,
    Climb = 4,
}

/// An independent ChaCha stream for `(seed, phase, round, index)`.
fn rng_for(seed: u64, phase: Phase, round: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(((phase as u64) << 56) | (round << 28) | index);
    r
}

fn stream_seed(seed: u64, phase: Phase, round: u64, index: u64) -> u64 {
    use rand::RngCore;
    rng_for(seed, phase, round, index).next_u64()
}

/// One round of the loop; round 0 is the initial optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// `Φ` of the design kept after this round, in the original parametrization.
    pub phi: f64,
    pub support_size: usize,
    pub exploration_size: usize,
    /// Milliseconds since the start of the run.
    pub elapsed_ms: f64,
    pub sweeps: usize,
    /// Whether the weight optimization reached `eff_opt` on the exploration set.
    pub certified: bool,
    /// Whether the round's design was discarded because it did not improve `Φ`.
    pub kept_previous: bool,
    /// `phi` divided by the final `Φ` of the run.
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    pub phi: f64,
    /// `m / max d` over the final exploration set. Only covers the probed points.
    pub certificate_bound: f64,
    pub design: DesignRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub config: GexConfig,
    pub rounds: Vec<RoundRecord>,
    #[serde(rename = "final")]
    pub final_: FinalRecord,
    /// The round cap was reached before the stopping rule fired.
    pub round_cap_hit: bool,
}

#[derive(Debug, Clone)]
pub struct GexOutcome {
    pub design: Design,
    pub report: RunReport,
}

impl GexOutcome {
    pub fn phi(&self) -> f64 {
        self.report.final_.phi
    }
}

/// The model whitened by `M(ξ)^{-1/2}` and the factor `Φ(M(ξ))` that maps its
/// criterion values back to the original ones.
///
/// The factor is `|det R|^{-2/m}` of the matrix `R` actually applied, which
/// equals `Φ(M(ξ))` in exact arithmetic.
pub fn reparametrize(model: &Model, ini_design: &Design) -> Result<(Model, f64)> {
    let mi = information_matrix(ini_design, model)?;
    mi.log_det().ok_or(Error::Singular)?;
    let (r, scale) = whitening_of(&mi.to_dmatrix())?;
    Ok((model.reparametrized(&r)?, scale))
}

fn whitening_of(mat: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let r = linalg::inverse_sqrt(mat)?;
    let scale = (-2.0 * linalg::log_abs_det(&r) / mat.nrows() as f64).exp();
    Ok((r, scale))
}

fn whitening(table: &RegressionTable, weights: &[(usize, f64)]) -> Result<(DMatrix<f64>, f64)> {
    let m = table.m();
    let mat = table.info_matrix(weights);
    cholesky(&mat, m).ok_or(Error::Singular)?;
    whitening_of(&linalg::to_dmatrix(&mat, m))
}

fn build_table(set: &ExplorationSet, grid: &FactorGrid, model: &Model) -> Result<RegressionTable> {
    RegressionTable::build(set.len(), model.m(), |i, r| {
        let coords = grid.coords_of(set.indices(i));
        model.regression(&coords, r)
    })
}

/// A design held as level indices.
#[derive(Clone)]
struct Current {
    support: Vec<(Box<[u32]>, f64)>,
    log_det: f64,
}

/// Weight optimization then pooling on one exploration set.
fn opt(
    set: &ExplorationSet,
    table: &RegressionTable,
    grid: &FactorGrid,
    init: &[(usize, f64)],
    cfg: &SolverConfig,
) -> Result<(Current, usize, bool)> {
    let sol = optimize_indexed(table, init, cfg)?;
    let rows: Vec<usize> = sol.weights.iter().map(|p| p.0).collect();
    let sub = RegressionTable::build(rows.len(), table.m(), |i, r| {
        r.copy_from_slice(table.row(rows[i]));
        Ok(())
    })?;
    let coords: Vec<Vec<f64>> = rows.iter().map(|&i| grid.coords_of(set.indices(i))).collect();
    let local: Vec<(usize, f64)> = sol.weights.iter().enumerate().map(|(j, p)| (j, p.1)).collect();
    let pooled = grp_indexed(&sub, &local, |j| &coords[j], &grid.ranges(), cfg.eff_grp)?;
    let m = table.m();
    let l = cholesky(&sub.info_matrix(&pooled), m).ok_or(Error::Singular)?;
    let current = Current {
        support: pooled
            .iter()
            .map(|&(j, w)| (set.indices(rows[j]).into(), w))
            .collect(),
        log_det: chol_logdet(&l, m),
    };
    Ok((current, sol.sweeps, sol.certified))
}

fn to_design(grid: &FactorGrid, cur: &Current) -> Result<Design> {
    let mut pairs: Vec<(Vec<f64>, f64)> =
        cur.support.iter().map(|(idx, w)| (grid.coords_of(idx), *w)).collect();
    pairs.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Design::new(
        pairs.iter().map(|p| DesignPoint::new(p.0.clone())).collect(),
        pairs.iter().map(|p| p.1).collect(),
    )
}

/// Runs the galaxy exploration loop on `grid` for `model`.
pub fn run_gex(grid: &FactorGrid, model: &Model, cfg: &GexConfig) -> Result<GexOutcome> {
    cfg.validate()?;
    if grid.factors() != model.k() {
        return Err(Error::DimensionMismatch {
            expected: model.k(),
            got: grid.factors(),
        });
    }
    let start = Instant::now();
    let m = model.m();
    let mf = m as f64;
    let ms = |t: Instant| t.elapsed().as_secs_f64() * 1e3;

    let mut set = ini_indexed(grid, cfg.n_rnd, &mut rng_for(cfg.seed, Phase::Initial, 0, 0))?;
    let mut table = build_table(&set, grid, model)?;
    let chosen = kumar_yildirim_indices(&table, &mut rng_for(cfg.seed, Phase::Start, 0, 0))?;
    let init: Vec<(usize, f64)> = chosen.iter().map(|&i| (i, 1.0 / mf)).collect();

    let (work, scale) = if cfg.reparametrize {
        let (r, phi_ky) = whitening(&table, &init)?;
        let work = model.reparametrized(&r)?;
        table = build_table(&set, grid, &work)?;
        (work, phi_ky)
    } else {
        (model.clone(), 1.0)
    };
    let phi_of = |ld: f64| (ld / mf).exp() * scale;

    let (mut current, sweeps, certified) = opt(&set, &table, grid, &init, &cfg.solver(0))?;
    let mut rounds = vec![RoundRecord {
        round: 0,
        phi: phi_of(current.log_det),
        support_size: current.support.len(),
        exploration_size: set.len(),
        elapsed_ms: ms(start),
        sweeps,
        certified,
        kept_previous: false,
        efficiency: 0.0,
    }];

    let mut round_cap_hit = false;
    for round in 1.. {
        if round > cfg.max_rounds {
            round_cap_hit = true;
            break;
        }
        let old = current.clone();
        let inv = {
            let pairs: Vec<(usize, f64)> = (0..old.support.len()).map(|j| (j, old.support[j].1)).collect();
            let sub = RegressionTable::build(old.support.len(), m, |j, r| {
                work.regression(&grid.coords_of(&old.support[j].0), r)
            })?;
            let l = cholesky(&sub.info_matrix(&pairs), m).ok_or(Error::Singular)?;
            chol_inverse(&l, m)
        };
        let loc = explore::local_search_with(grid, &work, &inv, cfg.n_loc, |c| {
            rng_for(cfg.seed, Phase::Climb, round as u64, c as u64)
        })?;

        set = ExplorationSet::new();
        for (idx, _) in &old.support {
            insert_star(&mut set, grid, idx);
        }
        for idx in loc {
            set.insert(idx, Provenance::LocalMax);
        }
        table = build_table(&set, grid, &work)?;
        let init: Vec<(usize, f64)> = old
            .support
            .iter()
            .map(|(idx, w)| (set.row_of(idx).expect("support lies in its star set"), *w))
            .collect();
        let (candidate, sweeps, certified) = opt(&set, &table, grid, &init, &cfg.solver(round))?;
        let kept_previous = candidate.log_det < old.log_det;
        if !kept_previous {
            current = candidate;
        }
        rounds.push(RoundRecord {
            round,
            phi: phi_of(current.log_det),
            support_size: current.support.len(),
            exploration_size: set.len(),
            elapsed_ms: ms(start),
            sweeps,
            certified,
            kept_previous,
            efficiency: 0.0,
        });
        if ((old.log_det - current.log_det) / mf).exp() > cfg.eff_stop {
            break;
        }
    }

    // Certificate of the final design over the final exploration set.
    let rows: Vec<(usize, f64)> = current
        .support
        .iter()
        .map(|(idx, w)| (set.row_of(idx).expect("final support lies in the exploration set"), *w))
        .collect();
    let l = cholesky(&table.info_matrix(&rows), m).ok_or(Error::Singular)?;
    let mut d = Vec::new();
    table.variances(&chol_inverse(&l, m), &mut d);
    let max_d = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let design = to_design(grid, &current)?;
    let phi = phi_of(current.log_det);
    for r in &mut rounds {
        r.efficiency = r.phi / phi;
    }
    let report = RunReport {
        model: model.name().to_string(),
        config: *cfg,
        rounds,
        final_: FinalRecord {
            phi,
            certificate_bound: mf / max_d,
            design: design.to_record(phi, m),
        },
        round_cap_hit,
    };
    Ok(GexOutcome { design, report })
}
