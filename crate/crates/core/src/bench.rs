//! Timing comparison between closed-form set projection and a simulated
//! grid-search criterion.
//!
//! The workload is the two-firm entry game with `K` covariate bins whose
//! entry payoffs are shifted by known market shocks `ω_k ~ U[0,1]`. For
//! each `K` the closed-form methods compute projection intervals of all
//! four parameters; the simulated criterion is timed on one evaluation per
//! bin and extrapolated to a grid of `#(Θ)` points.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{entry_game, GameSpec};
use crate::identification::{project_query, FamilyKind, InequalityFamily, PhiInput, Sense, SetQuery, SolverSettings};
use crate::inference::CcpTable;
use crate::oracle::{exact_ccp, mc_unique_and_possible, SelectionRule};

/// Parameter value at which the benchmark choice probabilities are generated.
pub const BENCH_THETA: [f64; 4] = [0.0, 0.0, -0.5, -0.5];

#[derive(Clone, Debug, Serialize)]
pub struct BenchConfig {
    /// Numbers of covariate bins `K`.
    pub bins: Vec<usize>,
    /// Simulation draws `R` per evaluation of the simulated criterion.
    pub draws: usize,
    /// Grid size `#(Θ)` used to extrapolate grid-search cost.
    pub grid_points: u64,
    /// Repetitions averaged per entry.
    pub reps: usize,
    pub seed: u64,
    /// Largest `K` at which the sharp family is timed; larger rows report
    /// no sharp time.
    pub sharp_max_bins: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { bins: vec![1, 10, 100, 1000], draws: 10_000, grid_points: 100_000, reps: 1, seed: 0, sharp_max_bins: usize::MAX }
    }
}

impl BenchConfig {
    pub fn check(&self) -> Result<()> {
        if self.bins.is_empty() || self.bins.contains(&0) {
            return Err(Error::Invalid("bin counts must be positive".into()));
        }
        if self.draws < 1000 {
            return Err(Error::Invalid(format!("at least 1000 simulation draws are required, got {}", self.draws)));
        }
        if self.grid_points == 0 || self.reps == 0 {
            return Err(Error::Invalid("grid size and repetitions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub bins: usize,
    /// Seconds to project all coordinates of the singleton-bound set.
    pub abj_secs: f64,
    /// Seconds for the sharp set, when timed.
    pub sharp_secs: Option<f64>,
    /// Seconds per bin for one simulated-criterion evaluation.
    pub ct_tau: f64,
    /// Extrapolated grid-search seconds `τ · K · #(Θ)`.
    pub ct_secs: f64,
    /// Projection intervals `[lo, hi]` per coordinate, singleton bounds.
    pub abj_intervals: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchTable {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    /// Table with one column per `K` and rows ABJ, Sharp and CT, in seconds.
    pub fn render(&self) -> String {
        let cell = |v: Option<f64>| match v {
            None => "-".to_string(),
            Some(v) if v >= 1e4 => format!("{v:.1e}"),
            Some(v) => format!("{v:.3}"),
        };
        let mut lines = Vec::new();
        let head: Vec<String> = self.rows.iter().map(|r| r.bins.to_string()).collect();
        lines.push(format!("{:<6}{}", "K", head.iter().map(|h| format!("{h:>12}")).collect::<String>()));
        let mut row = |name: &str, f: &dyn Fn(&BenchRow) -> Option<f64>| {
            lines.push(format!("{name:<6}{}", self.rows.iter().map(|r| format!("{:>12}", cell(f(r)))).collect::<String>()));
        };
        row("ABJ", &|r| Some(r.abj_secs));
        row("Sharp", &|r| r.sharp_secs);
        row("CT", &|r| Some(r.ct_secs));
        lines.join("\n") + "\n"
    }
}

/// The `K`-bin workload: the game and its exact choice probabilities.
pub fn bench_game(k: usize, seed: u64) -> Result<(GameSpec, CcpTable)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
    let spec = entry_game(2, &shifts)?;
    let probs = (0..k)
        .map(|x| exact_ccp(&spec, &BENCH_THETA, x, &SelectionRule::SymmetricUniform, None))
        .collect::<Result<Vec<_>>>()?;
    let ccp = CcpTable::population(&spec, probs)?;
    Ok((spec, ccp))
}

/// Projection intervals of every coordinate, computed in parallel.
pub fn project_all(
    spec: &GameSpec,
    ccp: &CcpTable,
    family: &InequalityFamily,
    settings: &SolverSettings,
) -> Result<Vec<[f64; 2]>> {
    use rayon::prelude::*;
    let query = SetQuery::new(spec, PhiInput::Point(ccp), family)?;
    let d = spec.param_dim();
    let ends = (0..2 * d)
        .into_par_iter()
        .map(|j| {
            let mut p = vec![0.0; d];
            p[j / 2] = 1.0;
            let sense = if j % 2 == 0 { Sense::Min } else { Sense::Max };
            project_query(&query, &p, sense, settings).map(|(v, _)| v)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ends.chunks(2).map(|c| [c[0], c[1]]).collect())
}

fn ct_tau(spec: &GameSpec, ccp: &CcpTable, draws: usize, seed: u64, reps: usize) -> Result<f64> {
    let x = 0;
    let phi = ccp.bin(x).expect("benchmark bins all have probabilities");
    let start = Instant::now();
    let mut q = 0.0;
    for r in 0..reps {
        let (h1, h2) = mc_unique_and_possible(spec, &BENCH_THETA, x, draws, seed.wrapping_add(r as u64))?;
        q += h1
            .iter()
            .zip(&h2)
            .zip(phi)
            .map(|((lo, hi), p)| (lo - p).max(0.0).powi(2) + (p - hi).max(0.0).powi(2))
            .sum::<f64>();
    }
    std::hint::black_box(q);
    Ok(start.elapsed().as_secs_f64() / reps as f64)
}

/// Run the comparison described in the module documentation.
pub fn bench_compare(cfg: &BenchConfig, settings: &SolverSettings) -> Result<BenchTable> {
    cfg.check()?;
    let mut rows = Vec::with_capacity(cfg.bins.len());
    for &k in &cfg.bins {
        let (spec, ccp) = bench_game(k, cfg.seed)?;
        let abj = InequalityFamily::resolve(&spec, FamilyKind::AbjUpper, None)?;
        let sharp = InequalityFamily::resolve(&spec, FamilyKind::Sharp(spec.n_outcomes()), None)?;
        let mut abj_secs = 0.0;
        let mut sharp_secs = 0.0;
        let mut abj_intervals = Vec::new();
        for _ in 0..cfg.reps {
            let t = Instant::now();
            abj_intervals = project_all(&spec, &ccp, &abj, settings)?;
            abj_secs += t.elapsed().as_secs_f64();
            if k <= cfg.sharp_max_bins {
                let t = Instant::now();
                project_all(&spec, &ccp, &sharp, settings)?;
                sharp_secs += t.elapsed().as_secs_f64();
            }
        }
        let reps = cfg.reps as f64;
        let tau = ct_tau(&spec, &ccp, cfg.draws, cfg.seed, cfg.reps)?;
        log::info!("bench K={k}: abj {:.3}s", abj_secs / reps);
        rows.push(BenchRow {
            bins: k,
            abj_secs: abj_secs / reps,
            sharp_secs: (k <= cfg.sharp_max_bins).then_some(sharp_secs / reps),
            ct_tau: tau,
            ct_secs: tau * k as f64 * cfg.grid_points as f64,
            abj_intervals,
        });
    }
    Ok(BenchTable { config: cfg.clone(), rows })
}
