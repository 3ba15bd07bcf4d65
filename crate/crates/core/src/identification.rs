//! Criterion evaluation, membership, feasible points and projections of
//! identified sets defined by moment inequalities.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::binary::{core_determining_family, structural_family, BinaryGameView};
use crate::error::{Error, Result};
use crate::game::{GameSpec, OutcomeEvent, PayoffShift};
use crate::inference::{CcpTable, ConfidenceBand};
use crate::jet::{Jet, Order};
use crate::likelihood::{log_dominant_jet, log_singleton_jet};
use crate::mixing::MixingGrid;
use crate::solver::{self, BarrierSettings, ConstraintSet, Evaluation, Problem, SmoothMax, SolveStatus};

/// Which events enter the inequality family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FamilyKind {
    /// Singleton upper bounds.
    AbjUpper,
    /// Singleton upper bounds plus dominant-strategy lower bounds.
    AbjWithDominantLower,
    /// Connected events with at most this many outcomes (binary games).
    Sharp(usize),
}

impl FamilyKind {
    pub fn label(&self) -> String {
        match self {
            FamilyKind::AbjUpper => "abj".into(),
            FamilyKind::AbjWithDominantLower => "abj+lb".into(),
            FamilyKind::Sharp(k) => format!("sharp{k}"),
        }
    }
}

/// Direction of a moment inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Side {
    /// `φ(A|x) ≤ L(A|x;θ)`.
    Upper,
    /// `lower bound(y|x;θ) ≤ φ(y|x)`.
    Lower,
}

/// One inequality: an event, a bin and a side.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Moment {
    pub event: OutcomeEvent,
    pub bin: usize,
    pub side: Side,
}

/// A resolved family of moment inequalities.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityFamily {
    kind: FamilyKind,
    moments: Vec<Moment>,
    mixing: Option<MixingGrid>,
}

fn singleton_moments(spec: &GameSpec, side: Side) -> Vec<Moment> {
    (0..spec.n_bins())
        .flat_map(|x| {
            (0..spec.n_outcomes())
                .map(move |y| Moment { event: OutcomeEvent::from_sorted_unchecked(vec![y]), bin: x, side })
        })
        .collect()
}

impl InequalityFamily {
    /// Build the family for every bin of `spec`.
    ///
    /// Sharp families include every event that is connected for some θ in
    /// the parameter box, so the same list is valid wherever a solver goes;
    /// events disconnected at a given θ are implied there and do no harm.
    pub fn resolve(spec: &GameSpec, kind: FamilyKind, mixing: Option<MixingGrid>) -> Result<Self> {
        if let Some(g) = &mixing {
            g.check(spec)?;
        }
        let mut moments = match kind {
            FamilyKind::AbjUpper => singleton_moments(spec, Side::Upper),
            FamilyKind::AbjWithDominantLower => {
                let mut m = singleton_moments(spec, Side::Upper);
                m.extend(singleton_moments(spec, Side::Lower));
                m
            }
            FamilyKind::Sharp(k) => {
                let mut m = Vec::new();
                for x in 0..spec.n_bins() {
                    for event in structural_family(spec, x, k)? {
                        m.push(Moment { event, bin: x, side: Side::Upper });
                    }
                }
                m
            }
        };
        moments.sort();
        moments.dedup();
        Ok(InequalityFamily { kind, moments, mixing })
    }

    /// A family with an explicit moment list.
    pub fn from_moments(spec: &GameSpec, kind: FamilyKind, mut moments: Vec<Moment>, mixing: Option<MixingGrid>) -> Result<Self> {
        for m in &moments {
            spec.check_bin(m.bin)?;
            for &y in m.event.members() {
                spec.check_outcome(y)?;
            }
            if m.side == Side::Lower && !m.event.is_singleton() {
                return Err(Error::Contract("lower bounds are defined for single outcomes".into()));
            }
            if !m.event.is_singleton() {
                BinaryGameView::new(spec)?;
            }
        }
        moments.sort();
        moments.dedup();
        Ok(InequalityFamily { kind, moments, mixing })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }
    pub fn moments(&self) -> &[Moment] {
        &self.moments
    }
    pub fn mixing(&self) -> Option<&MixingGrid> {
        self.mixing.as_ref()
    }

    /// Convex in θ: singleton upper bounds without mixing.
    pub fn is_convex(&self) -> bool {
        self.kind == FamilyKind::AbjUpper && self.mixing.is_none()
    }

    /// The family to use at a specific θ. Sharp families are regenerated
    /// from the core-determining events at θ.
    pub fn at_theta(&self, spec: &GameSpec, theta: &[f64]) -> Result<InequalityFamily> {
        match self.kind {
            FamilyKind::Sharp(k) => {
                let mut moments = Vec::new();
                for x in 0..spec.n_bins() {
                    for event in core_determining_family(spec, theta, x, k)? {
                        moments.push(Moment { event, bin: x, side: Side::Upper });
                    }
                }
                Ok(InequalityFamily { kind: self.kind, moments, mixing: self.mixing.clone() })
            }
            _ => Ok(self.clone()),
        }
    }
}

/// Minimize or maximize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Min,
    Max,
}

/// Controls for the optimization-based operations.
#[derive(Clone, Debug)]
pub struct SolverSettings {
    pub starts: usize,
    /// Log-sum-exp smoothing constant for the first stage of feasibility
    /// search; zero or non-finite skips smoothing.
    pub smooth_alpha: f64,
    /// Largest optimized criterion accepted as membership.
    pub feas_tol: f64,
    /// Largest directly evaluated criterion accepted as membership.
    pub member_tol: f64,
    pub seed: u64,
    /// Cross-check convex projections by bisection on membership.
    pub verify_bisection: bool,
    /// Allowed gap between solver and bisection endpoints.
    pub bisection_tol: f64,
    pub barrier: BarrierSettings,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            starts: 4,
            smooth_alpha: 200.0,
            feas_tol: 1e-6,
            member_tol: 1e-9,
            seed: 0,
            verify_bisection: cfg!(debug_assertions),
            bisection_tol: 2e-3,
            barrier: BarrierSettings::default(),
        }
    }
}

/// Outcome of an optimization-based query.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    /// Criterion value `t*` for feasibility search, endpoint for projections.
    pub objective: f64,
    pub theta: Vec<f64>,
    /// Choice probabilities chosen inside a confidence band, per bin.
    pub phi: Option<Vec<Option<Vec<f64>>>>,
    /// Latent probabilities `q(y|x,ω_k)` indexed `[bin][node][outcome]`;
    /// empty for bins without data.
    pub latent: Option<Vec<Vec<Vec<f64>>>>,
    pub status: SolveStatus,
    pub starts_used: usize,
    pub seeds: Vec<u64>,
    pub start_points: Vec<Vec<f64>>,
    pub excluded_bins: Vec<usize>,
    /// Amount by which the constraints were relaxed to obtain an interior.
    pub relaxation: f64,
    /// Largest constraint value at the reported point.
    pub max_violation: f64,
    pub newton_steps: usize,
    /// Endpoint found by the independent bisection check.
    pub bisection: Option<f64>,
    /// `barrier` or `profile` for projections, `epigraph` otherwise.
    pub method: String,
}

/// Where the choice probabilities come from.
#[derive(Clone, Copy, Debug)]
pub enum PhiInput<'a> {
    Point(&'a CcpTable),
    Band(&'a ConfidenceBand),
}

/// A family paired with data, restricted to bins that have data.
pub struct SetQuery<'a> {
    spec: &'a GameSpec,
    phi: PhiInput<'a>,
    family: InequalityFamily,
    bins: Vec<usize>,
    excluded: Vec<usize>,
}

impl<'a> SetQuery<'a> {
    pub fn new(spec: &'a GameSpec, phi: PhiInput<'a>, family: &InequalityFamily) -> Result<Self> {
        let covered: Vec<bool> = match phi {
            PhiInput::Point(c) => {
                if c.n_bins() != spec.n_bins() || c.n_outcomes() != spec.n_outcomes() {
                    return Err(Error::Contract("choice probabilities do not match the game".into()));
                }
                (0..spec.n_bins()).map(|x| c.bin(x).is_some()).collect()
            }
            PhiInput::Band(b) => {
                if b.lower.len() != spec.n_bins() {
                    return Err(Error::Contract("confidence band does not match the game".into()));
                }
                (0..spec.n_bins()).map(|x| b.lower[x].is_some()).collect()
            }
        };
        for m in family.moments() {
            if m.bin >= spec.n_bins() || m.event.members().iter().any(|&y| y >= spec.n_outcomes()) {
                return Err(Error::Contract("family does not match the game".into()));
            }
        }
        let bins = (0..spec.n_bins()).filter(|&x| covered[x]).collect();
        let excluded = (0..spec.n_bins()).filter(|&x| !covered[x]).collect();
        Ok(SetQuery { spec, phi, family: family.clone(), bins, excluded })
    }

    pub fn family(&self) -> &InequalityFamily {
        &self.family
    }

    /// Optimal value of the feasibility program at a fixed θ: the exact
    /// maximal residual without latent variables, otherwise `min t` over
    /// the band and latent probabilities.
    pub fn fixed_theta_value(&self, theta: &[f64], settings: &SolverSettings) -> Result<f64> {
        self.spec.check_theta(theta)?;
        let prog = Program::build(self, Some(theta))?;
        if prog.infeasible {
            return Ok(f64::INFINITY);
        }
        if prog.rows.is_empty() {
            return Ok(f64::NEG_INFINITY);
        }
        let z0 = prog.start(theta)?;
        if prog.n_vars == 0 {
            let mut ev = Evaluation::default();
            prog.eval(&z0, Order::Value, &mut ev)?;
            return Ok(ev.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
        let problem = prog.problem(vec![0.0; prog.n_vars]);
        let solver::MaxOutcome { t, status, .. } = solver::minimize_max(&problem, &z0, None, &settings.barrier)?;
        if t > settings.feas_tol && status != SolveStatus::Optimal {
            return Err(Error::Solver(format!("feasibility program ended with status {}", status.as_str())));
        }
        Ok(t)
    }

    /// Multi-start minimization of the maximal residual over θ.
    pub fn find_feasible(&self, settings: &SolverSettings) -> Result<SolveReport> {
        let prog = Program::build(self, None)?;
        let starts = start_points(self.spec, settings.starts, settings.seed)?;
        let runs = self.feasible_runs(&prog, &starts, settings, false)?;
        let (idx, best) = runs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.t.total_cmp(&b.1.t).then(a.0.cmp(&b.0)))
            .expect("at least one start");
        let status = if best.t <= settings.feas_tol {
            SolveStatus::Optimal
        } else if runs.iter().all(|r| r.status != SolveStatus::Optimal) {
            SolveStatus::Stalled
        } else {
            SolveStatus::Infeasible
        };
        let _ = idx;
        Ok(self.report(&prog, best, status, settings, &starts, runs.iter().map(|r| r.steps).sum()))
    }

    fn report(
        &self,
        prog: &Program,
        run: &Run,
        status: SolveStatus,
        settings: &SolverSettings,
        starts: &[Vec<f64>],
        steps: usize,
    ) -> SolveReport {
        SolveReport {
            objective: run.t,
            theta: prog.theta_of(&run.z),
            phi: prog.phi_of(&run.z),
            latent: prog.latent_of(&run.z),
            status,
            starts_used: starts.len(),
            seeds: vec![settings.seed],
            start_points: starts.to_vec(),
            excluded_bins: self.excluded.clone(),
            relaxation: 0.0,
            max_violation: run.t,
            newton_steps: steps,
            bisection: None,
            method: "epigraph".into(),
        }
    }

    fn feasible_runs(&self, prog: &Program, starts: &[Vec<f64>], settings: &SolverSettings, early: bool) -> Result<Vec<Run>> {
        if prog.infeasible {
            return Ok(starts
                .iter()
                .map(|s| Run { z: prog.start(s).unwrap_or_default(), t: f64::INFINITY, status: SolveStatus::Infeasible, steps: 0 })
                .collect());
        }
        starts.par_iter().map(|s| prog.minimize_violation(s, settings, early)).collect()
    }
}

struct Run {
    z: Vec<f64>,
    t: f64,
    status: SolveStatus,
    steps: usize,
}

/// Latin-hypercube start points over the parameter box, preceded by its
/// center. Infinite bounds are replaced by a window of width 20.
pub fn start_points(spec: &GameSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Contract("at least one start is required".into()));
    }
    let d = spec.param_dim();
    let (lo, hi) = sampling_box(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![(0..d).map(|k| 0.5 * (lo[k] + hi[k])).collect::<Vec<f64>>()];
    let m = n - 1;
    if m > 0 {
        let mut strata: Vec<Vec<usize>> = (0..d)
            .map(|_| {
                let mut p: Vec<usize> = (0..m).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        for j in 0..m {
            let pt = (0..d)
                .map(|k| {
                    let v = (strata[k][j] as f64 + rng.random::<f64>()) / m as f64;
                    lo[k] + (hi[k] - lo[k]) * (0.02 + 0.96 * v)
                })
                .collect();
            pts.push(pt);
        }
        strata.clear();
    }
    Ok(pts)
}

fn sampling_box(spec: &GameSpec) -> (Vec<f64>, Vec<f64>) {
    let d = spec.param_dim();
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for k in 0..d {
        let (l, u) = (spec.lower()[k], spec.upper()[k]);
        lo[k] = if l.is_finite() { l } else if u.is_finite() { u - 20.0 } else { -10.0 };
        hi[k] = if u.is_finite() { u } else if l.is_finite() { l + 20.0 } else { 10.0 };
    }
    (lo, hi)
}

/// Functional form of a constraint row.
#[derive(Clone, Debug)]
enum Form {
    /// `log φ(A) - log L` (upper) or `log LB - log φ` (lower).
    Log { log_phi: f64 },
    /// `Σ z[vars] - L` (upper) or `LB - z[var]` (lower).
    Linear { vars: Vec<usize> },
}

#[derive(Clone, Debug)]
struct Row {
    event: OutcomeEvent,
    bin: usize,
    side: Side,
    shift: PayoffShift,
    form: Form,
}

/// The constraint system for a query, over `(θ, φ, q)` with θ optionally
/// held fixed.
struct Program<'s> {
    spec: &'s GameSpec,
    d: usize,
    theta_fixed: Option<Vec<f64>>,
    n_vars: usize,
    phi_offset: usize,
    q_offset: usize,
    bins: Vec<usize>,
    n_nodes: usize,
    phi_free: bool,
    rows: Vec<Row>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    eq_matrix: DMatrix<f64>,
    eq_rhs: Vec<f64>,
    /// A constraint with a model bound above a zero probability.
    infeasible: bool,
    /// Interior starting values for `(φ, q)`.
    aux_start: Vec<f64>,
}

impl<'s> Program<'s> {
    fn build(query: &SetQuery<'s>, theta_fixed: Option<&[f64]>) -> Result<Program<'s>> {
        let spec = query.spec;
        let d = spec.param_dim();
        let ny = spec.n_outcomes();
        let grid = query.family.mixing();
        let n_nodes = grid.map_or(0, |g| g.len());
        let nb = query.bins.len();
        let mut pos = vec![usize::MAX; spec.n_bins()];
        for (p, &x) in query.bins.iter().enumerate() {
            pos[x] = p;
        }
        // probability bounds per (bin position, outcome)
        let mut pl = vec![0.0; nb * ny];
        let mut pu = vec![0.0; nb * ny];
        let phi_free = matches!(query.phi, PhiInput::Band(_));
        for (p, &x) in query.bins.iter().enumerate() {
            match query.phi {
                PhiInput::Point(c) => {
                    let v = c.bin(x).unwrap();
                    pl[p * ny..(p + 1) * ny].copy_from_slice(v);
                    pu[p * ny..(p + 1) * ny].copy_from_slice(v);
                }
                PhiInput::Band(b) => {
                    let (l, u) = (b.lower[x].as_ref().unwrap(), b.upper[x].as_ref().unwrap());
                    if l.iter().zip(u).any(|(a, b)| !(0.0 <= *a && a <= b && *b <= 1.0)) {
                        return Err(Error::Invalid(format!("band for bin {x} is not ordered inside [0,1]")));
                    }
                    let (sl, su) = (l.iter().sum::<f64>(), u.iter().sum::<f64>());
                    if sl > 1.0 + 1e-9 || su < 1.0 - 1e-9 {
                        return Err(Error::Invalid(format!("band for bin {x} contains no probability vector")));
                    }
                    let (l, u) = if sl >= 1.0 - 1e-12 {
                        (l.clone(), l.clone())
                    } else if su <= 1.0 + 1e-12 {
                        (u.clone(), u.clone())
                    } else {
                        (l.clone(), u.clone())
                    };
                    pl[p * ny..(p + 1) * ny].copy_from_slice(&l);
                    pu[p * ny..(p + 1) * ny].copy_from_slice(&u);
                }
            }
        }
        let n_theta = if theta_fixed.is_some() { 0 } else { d };
        let phi_offset = n_theta;
        let n_phi = if phi_free { nb * ny } else { 0 };
        let q_offset = phi_offset + n_phi;
        let n_q = nb * n_nodes * ny;
        let n_vars = q_offset + n_q;
        let mut lower = Vec::with_capacity(n_vars);
        let mut upper = Vec::with_capacity(n_vars);
        if theta_fixed.is_none() {
            lower.extend_from_slice(spec.lower());
            upper.extend_from_slice(spec.upper());
        }
        // interior point of the band: φ = L + s (U - L)
        let mut phi0 = vec![0.0; nb * ny];
        for p in 0..nb {
            let (l, u) = (&pl[p * ny..(p + 1) * ny], &pu[p * ny..(p + 1) * ny]);
            let (sl, su) = (l.iter().sum::<f64>(), u.iter().sum::<f64>());
            let s = if su > sl { (1.0 - sl) / (su - sl) } else { 0.0 };
            for y in 0..ny {
                phi0[p * ny + y] = l[y] + s * (u[y] - l[y]);
            }
        }
        let mut aux_start = Vec::with_capacity(n_phi + n_q);
        if phi_free {
            lower.extend_from_slice(&pl);
            upper.extend_from_slice(&pu);
            aux_start.extend_from_slice(&phi0);
        }
        for p in 0..nb {
            for _ in 0..n_nodes {
                for y in 0..ny {
                    let zero = pu[p * ny + y] == 0.0;
                    lower.push(0.0);
                    upper.push(if zero { 0.0 } else { f64::INFINITY });
                    aux_start.push(phi0[p * ny + y]);
                }
            }
        }
        // equalities
        let mut eq_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        if phi_free {
            for p in 0..nb {
                eq_rows.push(((0..ny).map(|y| (phi_offset + p * ny + y, 1.0)).collect(), 1.0));
            }
        }
        if let Some(g) = grid {
            for p in 0..nb {
                for k in 0..n_nodes {
                    let base = q_offset + (p * n_nodes + k) * ny;
                    eq_rows.push(((0..ny).map(|y| (base + y, 1.0)).collect(), 1.0));
                }
                for y in 0..ny {
                    let mut row: Vec<(usize, f64)> = (0..n_nodes)
                        .map(|k| (q_offset + (p * n_nodes + k) * ny + y, g.weights()[k]))
                        .collect();
                    let rhs = if phi_free {
                        row.push((phi_offset + p * ny + y, -1.0));
                        0.0
                    } else {
                        pl[p * ny + y]
                    };
                    eq_rows.push((row, rhs));
                }
            }
        }
        let mut eq_matrix = DMatrix::zeros(eq_rows.len(), n_vars);
        let mut eq_rhs = Vec::with_capacity(eq_rows.len());
        for (r, (entries, rhs)) in eq_rows.into_iter().enumerate() {
            for (c, v) in entries {
                eq_matrix[(r, c)] = v;
            }
            eq_rhs.push(rhs);
        }
        // constraint rows
        let mut rows = Vec::new();
        let mut infeasible = false;
        for m in query.family.moments() {
            let p = pos[m.bin];
            if p == usize::MAX {
                continue;
            }
            let upper_zero = m.event.members().iter().all(|&y| pu[p * ny + y] == 0.0);
            if m.side == Side::Upper && upper_zero {
                continue;
            }
            if m.side == Side::Lower && upper_zero {
                infeasible = true;
                continue;
            }
            match grid {
                None if !phi_free => {
                    let phi: f64 = m.event.members().iter().map(|&y| pl[p * ny + y]).sum();
                    rows.push(Row {
                        event: m.event.clone(),
                        bin: m.bin,
                        side: m.side,
                        shift: PayoffShift::NONE,
                        form: Form::Log { log_phi: phi.ln() },
                    });
                }
                None => rows.push(Row {
                    event: m.event.clone(),
                    bin: m.bin,
                    side: m.side,
                    shift: PayoffShift::NONE,
                    form: Form::Linear { vars: m.event.members().iter().map(|&y| phi_offset + p * ny + y).collect() },
                }),
                Some(g) => {
                    for k in 0..n_nodes {
                        let base = q_offset + (p * n_nodes + k) * ny;
                        rows.push(Row {
                            event: m.event.clone(),
                            bin: m.bin,
                            side: m.side,
                            shift: g.shift(k),
                            form: Form::Linear { vars: m.event.members().iter().map(|&y| base + y).collect() },
                        });
                    }
                }
            }
        }
        Ok(Program {
            spec,
            d,
            theta_fixed: theta_fixed.map(|t| t.to_vec()),
            n_vars,
            phi_offset,
            q_offset,
            bins: query.bins.clone(),
            n_nodes,
            phi_free,
            rows,
            lower,
            upper,
            eq_matrix,
            eq_rhs,
            infeasible,
            aux_start,
        })
    }

    fn theta_free(&self) -> bool {
        self.theta_fixed.is_none()
    }

    /// Full start vector for a θ start.
    fn start(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let mut z = Vec::with_capacity(self.n_vars);
        if self.theta_free() {
            self.spec.check_theta(theta)?;
            z.extend_from_slice(theta);
        }
        z.extend_from_slice(&self.aux_start);
        Ok(z)
    }

    fn problem(&self, objective: Vec<f64>) -> Problem<'_> {
        Problem::new(self, objective, self.lower.clone(), self.upper.clone())
            .with_equalities(self.eq_matrix.clone(), self.eq_rhs.clone())
    }

    fn theta_of(&self, z: &[f64]) -> Vec<f64> {
        match &self.theta_fixed {
            Some(t) => t.clone(),
            None => z[..self.d].to_vec(),
        }
    }

    fn phi_of(&self, z: &[f64]) -> Option<Vec<Option<Vec<f64>>>> {
        if !self.phi_free {
            return None;
        }
        let ny = self.spec.n_outcomes();
        let mut out = vec![None; self.spec.n_bins()];
        for (p, &x) in self.bins.iter().enumerate() {
            let s = self.phi_offset + p * ny;
            out[x] = Some(z[s..s + ny].to_vec());
        }
        Some(out)
    }

    fn latent_of(&self, z: &[f64]) -> Option<Vec<Vec<Vec<f64>>>> {
        if self.n_nodes == 0 {
            return None;
        }
        let ny = self.spec.n_outcomes();
        let mut out = vec![Vec::new(); self.spec.n_bins()];
        for (p, &x) in self.bins.iter().enumerate() {
            out[x] = (0..self.n_nodes)
                .map(|k| {
                    let s = self.q_offset + (p * self.n_nodes + k) * ny;
                    z[s..s + ny].to_vec()
                })
                .collect();
        }
        Some(out)
    }

    /// Value of a row with derivatives in θ (empty when θ is fixed).
    fn row_jet(&self, row: &Row, theta: &[f64], order: Order) -> Result<Jet> {
        let order = if self.theta_free() { order } else { Order::Value };
        let spec = self.spec;
        let single = row.event.is_singleton();
        let y0 = row.event.members()[0];
        match (&row.form, row.side) {
            (Form::Log { log_phi }, Side::Upper) => {
                let ll = if single {
                    log_singleton_jet(spec, theta, y0, row.bin, &row.shift, order)?
                } else {
                    BinaryGameView::new(spec)?.union_jet(theta, &row.event, row.bin, &row.shift, order)?.ln()
                };
                let mut j = ll.neg();
                j.value += log_phi;
                Ok(j)
            }
            (Form::Log { log_phi }, Side::Lower) => {
                let mut j = log_dominant_jet(spec, theta, y0, row.bin, &row.shift, order)?;
                j.value -= log_phi;
                Ok(j)
            }
            (Form::Linear { .. }, Side::Upper) => {
                let l = if single {
                    log_singleton_jet(spec, theta, y0, row.bin, &row.shift, order)?.exp()
                } else {
                    BinaryGameView::new(spec)?.union_jet(theta, &row.event, row.bin, &row.shift, order)?
                };
                Ok(l.neg())
            }
            (Form::Linear { .. }, Side::Lower) => {
                Ok(log_dominant_jet(spec, theta, y0, row.bin, &row.shift, order)?.exp())
            }
        }
    }

    /// Smooth stage then exact polish from `theta0`, minimizing the maximal
    /// residual. With `early`, stop as soon as the residual is below
    /// `-feas_tol` or provably cannot get there.
    fn minimize_violation(&self, theta0: &[f64], settings: &SolverSettings, early: bool) -> Result<Run> {
        let z0 = self.start(theta0)?;
        let mut steps = 0;
        let mut z = z0.clone();
        if settings.smooth_alpha.is_finite() && settings.smooth_alpha > 0.0 && self.rows.len() > 1 {
            let smooth = SmoothMax { inner: self, alpha: settings.smooth_alpha };
            let problem = Problem::new(&smooth, vec![0.0; self.n_vars], self.lower.clone(), self.upper.clone())
                .with_equalities(self.eq_matrix.clone(), self.eq_rhs.clone());
            let loose = BarrierSettings { gap_tol: 1e-6, ..settings.barrier.clone() };
            if let Ok(out) = solver::minimize_max(&problem, &z0, None, &loose) {
                z = out.z;
                steps += out.newton_steps;
            }
        }
        let problem = self.problem(vec![0.0; self.n_vars]);
        let barrier = if early {
            BarrierSettings { abandon_above: Some(-settings.feas_tol), ..settings.barrier.clone() }
        } else {
            settings.barrier.clone()
        };
        let target = early.then_some(-settings.feas_tol);
        let mut out = match solver::minimize_max(&problem, &z, target, &barrier) {
            Ok(r) => r,
            Err(_) => solver::minimize_max(&problem, &z0, target, &barrier)?,
        };
        steps += out.newton_steps;
        if early && out.t > settings.feas_tol {
            // abandoned without reaching the tolerance: finish the solve
            out = solver::minimize_max(&problem, &out.z, None, &settings.barrier)?;
            steps += out.newton_steps;
        }
        Ok(Run { z: out.z, t: out.t, status: out.status, steps })
    }
}

impl<'s> ConstraintSet for Program<'s> {
    fn n_vars(&self) -> usize {
        self.n_vars
    }
    fn n_constraints(&self) -> usize {
        self.rows.len()
    }
    fn hess_block(&self) -> Range<usize> {
        if self.theta_free() {
            0..self.d
        } else {
            0..0
        }
    }
    fn eval(&self, z: &[f64], order: Order, out: &mut Evaluation) -> Result<()> {
        let rows = &self.rows;
        let theta: &[f64] = match &self.theta_fixed {
            Some(t) => t,
            None => &z[..self.d],
        };
        let n = self.n_vars;
        let m = rows.len();
        let kb = if self.theta_free() { self.d } else { 0 };
        let eval_row = |row: &Row| -> Result<Jet> {
            let mut j = self.row_jet(row, theta, order)?;
            if let Form::Linear { vars } = &row.form {
                let s: f64 = vars.iter().map(|&v| z[v]).sum();
                j.value += if row.side == Side::Upper { s } else { -s };
            }
            Ok(j)
        };
        let jets: Vec<Jet> = if m >= 256 {
            rows.par_iter().map(eval_row).collect::<Result<_>>()?
        } else {
            rows.iter().map(eval_row).collect::<Result<_>>()?
        };
        out.values.clear();
        out.values.extend(jets.iter().map(|j| j.value));
        out.jac.clear();
        out.hess.clear();
        if order >= Order::Gradient {
            out.jac.resize(m * n, 0.0);
            for (r, (row, j)) in rows.iter().zip(&jets).enumerate() {
                let dst = &mut out.jac[r * n..(r + 1) * n];
                if kb > 0 {
                    dst[..kb].copy_from_slice(&j.grad);
                }
                if let Form::Linear { vars } = &row.form {
                    let sign = if row.side == Side::Upper { 1.0 } else { -1.0 };
                    for &v in vars {
                        dst[v] += sign;
                    }
                }
            }
        }
        if order == Order::Hessian && kb > 0 {
            out.hess.reserve(m * kb * kb);
            for j in &jets {
                out.hess.extend_from_slice(&j.hess);
            }
        }
        Ok(())
    }
}

/// Maximal residual `Q(θ)` of the family at θ.
///
/// Without mixing this is the largest of `log φ(A|x) - log L(A|x;θ)` and
/// `log LB(y|x;θ) - log φ(y|x)`. With mixing it is the optimal value of the
/// program over latent probabilities, measured in probability units.
pub fn criterion_q(spec: &GameSpec, theta: &[f64], phi: &CcpTable, family: &InequalityFamily) -> Result<f64> {
    SetQuery::new(spec, PhiInput::Point(phi), family)?.fixed_theta_value(theta, &SolverSettings::default())
}

/// `Q(θ) ≤ 1e-9`, with sharp families regenerated at θ.
pub fn membership(spec: &GameSpec, theta: &[f64], phi: &CcpTable, family: &InequalityFamily) -> Result<bool> {
    let settings = SolverSettings::default();
    let fam = family.at_theta(spec, theta)?;
    let q = SetQuery::new(spec, PhiInput::Point(phi), &fam)?.fixed_theta_value(theta, &settings)?;
    Ok(q <= settings.member_tol)
}

/// Residual of one moment in log form with derivatives in θ.
pub fn moment_residual(spec: &GameSpec, theta: &[f64], phi: &CcpTable, moment: &Moment, order: Order) -> Result<Jet> {
    let fam = InequalityFamily { kind: FamilyKind::AbjUpper, moments: vec![moment.clone()], mixing: None };
    let query = SetQuery::new(spec, PhiInput::Point(phi), &fam)?;
    let prog = Program::build(&query, None)?;
    match prog.rows.first() {
        Some(row) => prog.row_jet(row, theta, order),
        None if prog.infeasible => Ok(Jet::constant(f64::INFINITY, spec.param_dim(), order)),
        None => Ok(Jet::constant(f64::NEG_INFINITY, spec.param_dim(), order)),
    }
}

/// Point θ minimizing the maximal residual, from several starts.
pub fn find_feasible_point(
    spec: &GameSpec,
    phi: &CcpTable,
    family: &InequalityFamily,
    settings: &SolverSettings,
) -> Result<SolveReport> {
    SetQuery::new(spec, PhiInput::Point(phi), family)?.find_feasible(settings)
}

/// Endpoint of the identified set's projection on `direction`.
pub fn project(
    spec: &GameSpec,
    phi: &CcpTable,
    family: &InequalityFamily,
    direction: &[f64],
    sense: Sense,
    settings: &SolverSettings,
) -> Result<(f64, SolveReport)> {
    let query = SetQuery::new(spec, PhiInput::Point(phi), family)?;
    project_query(&query, direction, sense, settings)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projection endpoint for a prepared query.
pub fn project_query(
    query: &SetQuery,
    direction: &[f64],
    sense: Sense,
    settings: &SolverSettings,
) -> Result<(f64, SolveReport)> {
    let spec = query.spec;
    spec.check_theta(direction)?;
    if !(direction.iter().map(|v| v * v).sum::<f64>() > 0.0) {
        return Err(Error::Contract("projection direction must be non-zero".into()));
    }
    let prog = Program::build(query, None)?;
    let starts = start_points(spec, settings.starts, settings.seed)?;
    let convex = query.family.is_convex() && matches!(query.phi, PhiInput::Point(_));
    let runs = if convex && !prog.infeasible {
        // any strictly interior point leads to the global optimum
        let mut runs = Vec::new();
        for s in &starts {
            let run = prog.minimize_violation(s, settings, true)?;
            let done = run.t < -settings.feas_tol;
            runs.push(run);
            if done {
                break;
            }
        }
        runs
    } else {
        query.feasible_runs(&prog, &starts, settings, true)?
    };
    log::debug!("projection phase I: {} runs, {} steps", runs.len(), runs.iter().map(|r| r.steps).sum::<usize>());
    let sign = if sense == Sense::Min { 1.0 } else { -1.0 };
    let mut objective = vec![0.0; prog.n_vars];
    for k in 0..prog.d {
        objective[k] = sign * direction[k];
    }
    let feasible: Vec<&Run> = runs.iter().filter(|r| r.t <= settings.feas_tol).collect();
    let total_steps: usize = runs.iter().map(|r| r.steps).sum();
    if feasible.is_empty() {
        let best = runs.iter().min_by(|a, b| a.t.total_cmp(&b.t)).expect("at least one start");
        let status = if runs.iter().all(|r| r.status != SolveStatus::Optimal) {
            SolveStatus::Stalled
        } else {
            SolveStatus::Infeasible
        };
        let mut rep = query.report(&prog, best, status, settings, &starts, total_steps);
        rep.objective = f64::NAN;
        rep.max_violation = best.t;
        return Ok((f64::NAN, rep));
    }
    let mut robust: Vec<&Run> = feasible.iter().copied().filter(|r| r.t < -settings.feas_tol).collect();
    if convex {
        robust.sort_by(|a, b| a.t.total_cmp(&b.t));
        robust.truncate(1);
    }
    let (endpoint, mut rep) = if robust.is_empty() {
        // No point clears the tolerance: the set is thin (typically an
        // implied equality), so walk the profile instead of the interior.
        let best = feasible.iter().min_by(|a, b| a.t.total_cmp(&b.t)).expect("non-empty");
        let (endpoint, z, profile_steps) =
            profile_endpoint(query, &prog, direction, sense, &best.z, &starts, settings.feas_tol, settings)?;
        let mut ev = Evaluation::default();
        prog.eval(&z, Order::Value, &mut ev)?;
        let viol = ev.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let run = Run { z, t: viol, status: SolveStatus::Optimal, steps: 0 };
        let mut rep = query.report(&prog, &run, SolveStatus::Optimal, settings, &starts, total_steps + profile_steps);
        rep.relaxation = settings.feas_tol;
        rep.method = "profile".into();
        (endpoint, rep)
    } else {
        let phase2: Vec<Result<Run>> = robust
            .par_iter()
            .map(|run| {
                let problem = prog.problem(objective.clone());
                let out = if convex {
                    solver::solve_primal_dual(&problem, &run.z, &settings.barrier)?
                } else {
                    solver::solve(&problem, &run.z, &settings.barrier)?
                };
                let mut ev = Evaluation::default();
                prog.eval(&out.z, Order::Value, &mut ev)?;
                let viol = ev.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                Ok(Run { z: out.z, t: viol, status: out.status, steps: out.newton_steps })
            })
            .collect();
        let mut best: Option<(f64, Run)> = None;
        let mut steps = total_steps;
        for r in phase2 {
            let run = r?;
            steps += run.steps;
            let theta = prog.theta_of(&run.z);
            let value = if run.status == SolveStatus::Unbounded { -sign * f64::INFINITY } else { dot(direction, &theta) };
            if best.as_ref().is_none_or(|(v, _)| sign * value < sign * *v) {
                best = Some((value, run));
            }
        }
        let (endpoint, run) = best.expect("at least one interior start");
        let status = match run.status {
            SolveStatus::Unbounded => SolveStatus::Optimal,
            s => s,
        };
        let mut rep = query.report(&prog, &run, status, settings, &starts, steps);
        rep.max_violation = run.t;
        rep.method = "barrier".into();
        (endpoint, rep)
    };
    rep.objective = endpoint;
    if settings.verify_bisection && convex && endpoint.is_finite() {
        let (b, _, _) = profile_endpoint(query, &prog, direction, sense, &feasible[0].z, &[], settings.member_tol, settings)?;
        rep.bisection = Some(b);
        if (b - endpoint).abs() > settings.bisection_tol {
            return Err(Error::Solver(format!(
                "projection endpoint {endpoint} and bisection endpoint {b} disagree"
            )));
        }
    }
    Ok((endpoint, rep))
}

/// Strictly interior point of the box on the slice `p·θ = c`, found by
/// interpolating between the corners that minimize and maximize `p·θ`.
/// Infinite bounds are replaced by ±1e3.
fn corner_slice_point(spec: &GameSpec, p: &[f64], c: f64) -> Option<Vec<f64>> {
    let d = spec.param_dim();
    let clampb = |v: f64| v.clamp(-1e3, 1e3);
    let lo: Vec<f64> = (0..d).map(|k| clampb(if p[k] >= 0.0 { spec.lower()[k] } else { spec.upper()[k] })).collect();
    let hi: Vec<f64> = (0..d).map(|k| clampb(if p[k] >= 0.0 { spec.upper()[k] } else { spec.lower()[k] })).collect();
    let (cl, ch) = (dot(p, &lo), dot(p, &hi));
    if !(c > cl && c < ch) {
        return None;
    }
    let lam = (c - cl) / (ch - cl);
    Some((0..d).map(|k| lo[k] + lam * (hi[k] - lo[k])).collect())
}

/// Shift `theta` along `p` onto the slice `p·θ = c` if that stays strictly
/// inside the box.
fn shifted_slice_point(spec: &GameSpec, p: &[f64], c: f64, theta: &[f64]) -> Option<Vec<f64>> {
    let pp = dot(p, p);
    let step = (c - dot(p, theta)) / pp;
    let t: Vec<f64> = theta.iter().zip(p).map(|(v, q)| v + step * q).collect();
    let inside = (0..t.len()).all(|k| {
        let (l, u) = (spec.lower()[k], spec.upper()[k]);
        (l == u && t[k] == l) || (t[k] > l && t[k] < u)
    });
    inside.then_some(t)
}

/// Result of searching one slice.
struct Slice {
    /// Variables of a point with maximal residual at most the tolerance.
    member: Option<Vec<f64>>,
    /// Smallest maximal residual found.
    t: f64,
    steps: usize,
}

/// Search the slice `p·θ = c` for a point whose maximal residual is at most
/// `tol`, trying the candidate starts in turn. The search stops at the
/// first success, or once two starts end at the same residual above `tol`.
fn profile_member(prog: &Program, p: &[f64], candidates: &[Vec<f64>], tol: f64, settings: &SolverSettings) -> Result<Slice> {
    let d = prog.d;
    let r = prog.eq_matrix.nrows();
    let mut eq = DMatrix::zeros(r + 1, prog.n_vars);
    eq.view_mut((0, 0), (r, prog.n_vars)).copy_from(&prog.eq_matrix);
    for k in 0..d {
        eq[(r, k)] = p[k];
    }
    let barrier = BarrierSettings { abandon_above: Some(tol), ..settings.barrier.clone() };
    let mut slice = Slice { member: None, t: f64::INFINITY, steps: 0 };
    let mut ends: Vec<f64> = Vec::new();
    for theta in candidates {
        let z0 = prog.start(theta)?;
        let mut rhs = prog.eq_rhs.clone();
        rhs.push(dot(p, theta));
        let problem = Problem::new(prog, vec![0.0; prog.n_vars], prog.lower.clone(), prog.upper.clone())
            .with_equalities(eq.clone(), rhs);
        let Ok(out) = solver::minimize_max(&problem, &z0, Some(tol), &barrier) else {
            continue;
        };
        slice.steps += out.newton_steps;
        slice.t = slice.t.min(out.t);
        if out.t <= tol {
            slice.member = Some(out.z);
            return Ok(slice);
        }
        if ends.iter().any(|&e| (e - out.t).abs() <= 1e-3 * (out.t - tol)) {
            break;
        }
        ends.push(out.t);
    }
    Ok(slice)
}

/// Endpoint of the projection on `p`, found from a point `z_in` that
/// satisfies the inequalities by stepping outward until a slice
/// `p·θ = c` holds no member and then locating the boundary.
///
/// Outside the set the smallest residual on a slice grows roughly linearly
/// in `c`, so the boundary search uses false position (Illinois variant)
/// with a bisection safeguard. Each slice is searched from the previous
/// member, a box-corner interpolation and the shifted `extra` starts.
/// Returns the endpoint, the variables at the last member, and the Newton
/// steps used.
fn profile_endpoint(
    query: &SetQuery,
    prog: &Program,
    p: &[f64],
    sense: Sense,
    z_in: &[f64],
    extra: &[Vec<f64>],
    tol: f64,
    settings: &SolverSettings,
) -> Result<(f64, Vec<f64>, usize)> {
    const WIDTH: f64 = 1e-6;
    let spec = query.spec;
    let dir = if sense == Sense::Min { -1.0 } else { 1.0 };
    let mut witness = z_in.to_vec();
    let candidates = |c: f64, w: &[f64]| -> Vec<Vec<f64>> {
        let mut v = Vec::new();
        v.extend(shifted_slice_point(spec, p, c, &prog.theta_of(w)));
        v.extend(corner_slice_point(spec, p, c));
        for s in extra {
            v.extend(shifted_slice_point(spec, p, c, s));
        }
        v
    };
    let mut steps = 0;
    // (c, residual - tol) on each side of the boundary
    let mut inside = (dot(p, &prog.theta_of(z_in)), -tol);
    let mut step = 0.05 * (1.0 + inside.0.abs());
    let mut outside = None;
    for _ in 0..60 {
        let c = inside.0 + dir * step;
        let s = profile_member(prog, p, &candidates(c, &witness), tol, settings)?;
        steps += s.steps;
        match s.member {
            Some(z) => {
                inside = (c, s.t.min(tol) - tol);
                witness = z;
                step *= 2.0;
            }
            None => {
                outside = Some((c, s.t - tol));
                break;
            }
        }
    }
    let Some(mut outside) = outside else {
        return Ok((dir * f64::INFINITY, witness, steps));
    };
    let mut last_side = 0i8;
    while (outside.0 - inside.0).abs() > WIDTH {
        let w = outside.0 - inside.0;
        let (fi, fo) = (inside.1, outside.1);
        let mut c = if fo.is_finite() && fo > fi { inside.0 - fi * w / (fo - fi) } else { inside.0 + 0.5 * w };
        // keep the trial strictly inside the bracket
        let margin = 0.25 * WIDTH * w.signum();
        if (c - inside.0) * w.signum() < margin.abs() || (outside.0 - c) * w.signum() < margin.abs() {
            c = inside.0 + 0.5 * w;
        }
        let s = profile_member(prog, p, &candidates(c, &witness), tol, settings)?;
        steps += s.steps;
        match s.member {
            Some(z) => {
                inside = (c, s.t.min(tol) - tol);
                witness = z;
                if last_side == 1 {
                    outside.1 *= 0.5;
                }
                last_side = 1;
            }
            None => {
                outside = (c, s.t - tol);
                if last_side == -1 {
                    inside.1 *= 0.5;
                }
                last_side = -1;
            }
        }
        // a trial that barely moves the bracket triggers a bisection step
        if (outside.0 - inside.0).abs() > 0.5 * w.abs() {
            let mid = 0.5 * (inside.0 + outside.0);
            let s = profile_member(prog, p, &candidates(mid, &witness), tol, settings)?;
            steps += s.steps;
            match s.member {
                Some(z) => {
                    inside = (mid, s.t.min(tol) - tol);
                    witness = z;
                }
                None => outside = (mid, s.t - tol),
            }
            last_side = 0;
        }
    }
    Ok((0.5 * (inside.0 + outside.0), witness, steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::entry2;

    fn table1() -> CcpTable {
        CcpTable::population(&entry2(), vec![vec![0.25, 0.304, 0.304, 0.142]]).unwrap()
    }

    #[test]
    fn criterion_at_origin() {
        let g = entry2();
        let fam = InequalityFamily::resolve(&g, FamilyKind::AbjUpper, None).unwrap();
        let q = criterion_q(&g, &[0.0; 4], &table1(), &fam).unwrap();
        assert!((q - (0.304f64 / 0.25).ln()).abs() < 1e-12);
        assert!(!membership(&g, &[0.0; 4], &table1(), &fam).unwrap());
    }

    #[test]
    fn degenerate_outcome_share() {
        let g = entry2();
        let th = [0.3, -0.1, -0.5, -0.5];
        let phi = CcpTable::population(&g, vec![vec![0.0, 0.0, 0.0, 1.0]]).unwrap();
        let fam = InequalityFamily::resolve(&g, FamilyKind::AbjUpper, None).unwrap();
        let q = criterion_q(&g, &th, &phi, &fam).unwrap();
        let l = crate::likelihood::singleton_likelihood(&g, &th, 3, 0).unwrap();
        assert!((q + l.ln()).abs() < 1e-12);
        let lb = InequalityFamily::resolve(&g, FamilyKind::AbjWithDominantLower, None).unwrap();
        assert_eq!(criterion_q(&g, &th, &phi, &lb).unwrap(), f64::INFINITY);
    }

    #[test]
    fn starts_are_inside_box() {
        let g = entry2().with_bounds(vec![-1.0, f64::NEG_INFINITY, -3.0, -3.0], vec![1.0, 2.0, 0.0, 0.0]).unwrap();
        let pts = start_points(&g, 6, 3).unwrap();
        assert_eq!(pts.len(), 6);
        for p in &pts {
            assert!(g.contains(p));
            assert!(p[2] < 0.0 && p[2] > -3.0);
        }
        assert_eq!(pts, start_points(&g, 6, 3).unwrap());
    }
}
