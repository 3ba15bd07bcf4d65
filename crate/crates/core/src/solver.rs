//! Log-barrier interior-point method for smooth inequality-constrained
//! programs with a linear objective, linear equalities and box bounds.
//!
//! Problems have the form
//! `min c·z  s.t.  g_j(z) ≤ rhs,  E z = e,  l ≤ z ≤ u`.
//! Coordinates with `l = u` are held fixed and equalities are handled in a
//! null-space basis, so every iterate satisfies them exactly up to rounding.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::jet::Order;

/// Values and derivatives of a batch of constraints.
#[derive(Clone, Debug, Default)]
pub struct Evaluation {
    /// `g_j(z)`.
    pub values: Vec<f64>,
    /// Row-major `m x n` Jacobian.
    pub jac: Vec<f64>,
    /// Per-constraint Hessians restricted to `hess_block`, each `k x k`.
    pub hess: Vec<f64>,
}

/// Smooth constraint functions `g_j`.
pub trait ConstraintSet: Sync {
    fn n_vars(&self) -> usize;
    fn n_constraints(&self) -> usize;
    /// Variables that may have non-zero second derivatives.
    fn hess_block(&self) -> Range<usize>;
    /// Fill `out`; Jacobian from `Order::Gradient`, Hessians from `Order::Hessian`.
    fn eval(&self, z: &[f64], order: Order, out: &mut Evaluation) -> Result<()>;
}

/// Termination state of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
    Stalled,
    Unbounded,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Stalled => "stalled",
            SolveStatus::Unbounded => "unbounded",
        }
    }
}

/// Barrier method controls.
#[derive(Clone, Debug)]
pub struct BarrierSettings {
    /// Stop when the duality-gap bound `(constraints + bounds) / τ` is below this.
    pub gap_tol: f64,
    /// Factor by which τ grows between centering steps.
    pub mu: f64,
    pub tau0: f64,
    pub max_newton: usize,
    /// Return as soon as the objective drops below this value.
    pub target: Option<f64>,
    /// Return once the duality-gap lower bound on the objective exceeds
    /// this value. The bound is global for convex programs and local
    /// otherwise.
    pub abandon_above: Option<f64>,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        BarrierSettings { gap_tol: 1e-9, mu: 10.0, tau0: 1.0, max_newton: 600, target: None, abandon_above: None }
    }
}

/// A program in the form described in the module docs.
pub struct Problem<'a> {
    pub constraints: &'a dyn ConstraintSet,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Equality rows `E` (`p x n`) and right-hand side `e`.
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: Vec<f64>,
    pub rhs: f64,
}

impl<'a> Problem<'a> {
    pub fn new(constraints: &'a dyn ConstraintSet, objective: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let n = constraints.n_vars();
        Problem { constraints, objective, lower, upper, eq_matrix: DMatrix::zeros(0, n), eq_rhs: Vec::new(), rhs: 0.0 }
    }

    pub fn with_equalities(mut self, matrix: DMatrix<f64>, rhs: Vec<f64>) -> Self {
        self.eq_matrix = matrix;
        self.eq_rhs = rhs;
        self
    }

    fn objective_at(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, v)| c * v).sum()
    }
}

/// Result of a barrier solve.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub z: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub newton_steps: usize,
}

/// Null-space parametrization `z = z0 + P N u` of the free coordinates
/// satisfying the equalities.
struct Reduced {
    free: Vec<usize>,
    basis: DMatrix<f64>,
}

fn reduce(problem: &Problem, z0: &[f64]) -> Result<Reduced> {
    let n = problem.constraints.n_vars();
    let free: Vec<usize> = (0..n).filter(|&k| problem.lower[k] < problem.upper[k]).collect();
    let p = problem.eq_matrix.nrows();
    if p > 0 {
        let r = &problem.eq_matrix * DVector::from_column_slice(z0);
        let resid = (0..p).map(|i| (r[i] - problem.eq_rhs[i]).abs()).fold(0.0, f64::max);
        if resid > 1e-8 {
            return Err(Error::Solver(format!("start violates equality constraints by {resid:e}")));
        }
    }
    let nf = free.len();
    let basis = if p == 0 {
        DMatrix::identity(nf, nf)
    } else {
        let ef = DMatrix::from_fn(p, nf, |i, j| problem.eq_matrix[(i, free[j])]);
        let gram = ef.transpose() * &ef;
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(1.0);
        let cols: Vec<usize> = (0..nf).filter(|&j| eig.eigenvalues[j] <= 1e-10 * top).collect();
        DMatrix::from_fn(nf, cols.len(), |i, j| eig.eigenvectors[(i, cols[j])])
    };
    Ok(Reduced { free, basis })
}

struct Barrier<'p, 'a> {
    problem: &'p Problem<'a>,
    free: &'p [usize],
    eval: Evaluation,
}

impl<'p, 'a> Barrier<'p, 'a> {
    /// Barrier value `τ c·z - Σ log(rhs - g) - Σ log(bound slack)`, or `None`
    /// outside the strict interior.
    fn value(&mut self, z: &[f64], tau: f64) -> Option<f64> {
        let pr = self.problem;
        let mut v = tau * pr.objective_at(z);
        for &k in self.free {
            if pr.lower[k].is_finite() {
                let s = z[k] - pr.lower[k];
                if !(s > 0.0) {
                    return None;
                }
                v -= s.ln();
            }
            if pr.upper[k].is_finite() {
                let s = pr.upper[k] - z[k];
                if !(s > 0.0) {
                    return None;
                }
                v -= s.ln();
            }
        }
        pr.constraints.eval(z, Order::Value, &mut self.eval).ok()?;
        for &g in &self.eval.values {
            let s = pr.rhs - g;
            if !(s > 0.0) || !s.is_finite() {
                return None;
            }
            v -= s.ln();
        }
        v.is_finite().then_some(v)
    }

    /// Gradient and Hessian over the free coordinates.
    fn derivatives(&mut self, z: &[f64], tau: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let pr = self.problem;
        let n = pr.constraints.n_vars();
        pr.constraints.eval(z, Order::Hessian, &mut self.eval)?;
        let mut grad = DVector::from_iterator(n, pr.objective.iter().map(|c| tau * c));
        let mut hess = DMatrix::<f64>::zeros(n, n);
        let block = pr.constraints.hess_block();
        let kb = block.len();
        let m = self.eval.values.len();
        for j in 0..m {
            let s = pr.rhs - self.eval.values[j];
            let inv = 1.0 / s;
            let row = &self.eval.jac[j * n..(j + 1) * n];
            let nz: Vec<usize> = (0..n).filter(|&a| row[a] != 0.0).collect();
            for &a in &nz {
                grad[a] += row[a] * inv;
                let wa = row[a] * inv * inv;
                for &b in &nz {
                    hess[(a, b)] += wa * row[b];
                }
            }
            if kb > 0 {
                let h = &self.eval.hess[j * kb * kb..(j + 1) * kb * kb];
                for a in 0..kb {
                    for b in 0..kb {
                        hess[(block.start + a, block.start + b)] += inv * h[a * kb + b];
                    }
                }
            }
        }
        for &k in self.free {
            if pr.lower[k].is_finite() {
                let s = z[k] - pr.lower[k];
                grad[k] -= 1.0 / s;
                hess[(k, k)] += 1.0 / (s * s);
            }
            if pr.upper[k].is_finite() {
                let s = pr.upper[k] - z[k];
                grad[k] += 1.0 / s;
                hess[(k, k)] += 1.0 / (s * s);
            }
        }
        let nf = self.free.len();
        let g = DVector::from_iterator(nf, self.free.iter().map(|&k| grad[k]));
        let h = DMatrix::from_fn(nf, nf, |a, b| hess[(self.free[a], self.free[b])]);
        Ok((g, h))
    }
}

/// Cholesky solve of `H d = -g`, adding a growing diagonal shift until the
/// factorization succeeds.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    if n == 0 {
        return Some(DVector::zeros(0));
    }
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 0.0;
    for _ in 0..40 {
        let mut m = h.clone();
        for i in 0..n {
            m[(i, i)] += shift;
        }
        if let Some(ch) = Cholesky::new(m) {
            let d = ch.solve(&(-g));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
    }
    None
}

/// Minimize from a strictly feasible start.
pub fn solve(problem: &Problem, z0: &[f64], settings: &BarrierSettings) -> Result<Outcome> {
    let n = problem.constraints.n_vars();
    if z0.len() != n || problem.objective.len() != n || problem.lower.len() != n || problem.upper.len() != n {
        return Err(Error::Solver("dimension mismatch in barrier problem".into()));
    }
    let red = reduce(problem, z0)?;
    let mut barrier = Barrier { problem, free: &red.free, eval: Evaluation::default() };
    let mut z = z0.to_vec();
    let mut tau = settings.tau0;
    if barrier.value(&z, tau).is_none() {
        return Err(Error::Solver("start point is not strictly feasible".into()));
    }
    let n_terms = problem.constraints.n_constraints()
        + red
            .free
            .iter()
            .map(|&k| problem.lower[k].is_finite() as usize + problem.upper[k].is_finite() as usize)
            .sum::<usize>();
    let mut steps = 0;
    let mut last_stalled;
    loop {
        last_stalled = false;
        // centering
        loop {
            if steps >= settings.max_newton {
                return Ok(Outcome { objective: problem.objective_at(&z), z, status: SolveStatus::MaxIter, newton_steps: steps });
            }
            let (g, h) = barrier.derivatives(&z, tau)?;
            let gr = red.basis.transpose() * &g;
            let hr = red.basis.transpose() * &h * &red.basis;
            let Some(du) = newton_direction(&hr, &gr) else {
                last_stalled = true;
                break;
            };
            let decrement = -gr.dot(&du);
            if decrement / 2.0 <= 1e-10 {
                break;
            }
            let dz = &red.basis * &du;
            // largest step keeping the box strictly feasible
            let mut smax: f64 = 1.0;
            for (a, &k) in red.free.iter().enumerate() {
                if dz[a] < 0.0 && problem.lower[k].is_finite() {
                    smax = smax.min(0.99 * (z[k] - problem.lower[k]) / -dz[a]);
                }
                if dz[a] > 0.0 && problem.upper[k].is_finite() {
                    smax = smax.min(0.99 * (problem.upper[k] - z[k]) / dz[a]);
                }
            }
            let f0 = barrier.value(&z, tau).expect("iterate stays interior");
            let slope = g.dot(&dz);
            let mut s = smax;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = {
                    let mut t = z.clone();
                    for (a, &k) in red.free.iter().enumerate() {
                        t[k] += s * dz[a];
                    }
                    t
                };
                if let Some(f1) = barrier.value(&trial, tau) {
                    if f1 <= f0 + 1e-4 * s * slope {
                        accepted = Some(trial);
                        break;
                    }
                }
                s *= 0.5;
            }
            steps += 1;
            match accepted {
                Some(t) => {
                    let moved = red.free.iter().any(|&k| t[k] != z[k]);
                    z = t;
                    if let Some(target) = settings.target {
                        if problem.objective_at(&z) < target {
                            return Ok(Outcome {
                                objective: problem.objective_at(&z),
                                z,
                                status: SolveStatus::Optimal,
                                newton_steps: steps,
                            });
                        }
                    }
                    if z.iter().any(|v| v.abs() > 1e12) {
                        return Ok(Outcome {
                            objective: problem.objective_at(&z),
                            z,
                            status: SolveStatus::Unbounded,
                            newton_steps: steps,
                        });
                    }
                    if !moved {
                        break;
                    }
                }
                None => {
                    last_stalled = decrement > 1e-6;
                    break;
                }
            }
        }
        if n_terms as f64 / tau < settings.gap_tol || n_terms == 0 {
            break;
        }
        if let Some(level) = settings.abandon_above {
            if !last_stalled && problem.objective_at(&z) - n_terms as f64 / tau > level {
                break;
            }
        }
        tau *= settings.mu;
    }
    let status = if last_stalled { SolveStatus::Stalled } else { SolveStatus::Optimal };
    Ok(Outcome { objective: problem.objective_at(&z), z, status, newton_steps: steps })
}

/// Primal-dual interior-point method for convex programs, from a strictly
/// feasible start.
///
/// Constraints become `f(z) + s = 0` with slacks `s > 0` and one multiplier
/// each, so a step may cross curved constraints and feasibility is
/// restored as the iteration converges. This keeps the iteration count low
/// when many nearly parallel constraints are close to binding, where the
/// pure barrier crawls along their envelope. Box bounds are treated as
/// linear constraints. Stops when the complementarity gap is below
/// `gap_tol` and the dual and primal residuals are negligible.
pub fn solve_primal_dual(problem: &Problem, z0: &[f64], settings: &BarrierSettings) -> Result<Outcome> {
    let n = problem.constraints.n_vars();
    if z0.len() != n || problem.objective.len() != n || problem.lower.len() != n || problem.upper.len() != n {
        return Err(Error::Solver("dimension mismatch in barrier problem".into()));
    }
    let red = reduce(problem, z0)?;
    let free = &red.free;
    let nf = free.len();
    let m = problem.constraints.n_constraints();
    // box constraints as `±(z_k - bound) ≤ 0` on free coordinates
    let boxes: Vec<(usize, f64, f64)> = free
        .iter()
        .enumerate()
        .flat_map(|(a, &k)| {
            let lo = problem.lower[k].is_finite().then_some((a, -1.0, problem.lower[k]));
            let hi = problem.upper[k].is_finite().then_some((a, 1.0, problem.upper[k]));
            lo.into_iter().chain(hi)
        })
        .collect();
    let total = m + boxes.len();
    if total == 0 || nf == 0 {
        return solve(problem, z0, settings);
    }
    let block = problem.constraints.hess_block();
    let kb = block.len();
    let pos: Vec<Option<usize>> = free.iter().map(|&k| block.contains(&k).then(|| k - block.start)).collect();

    struct Point {
        z: Vec<f64>,
        f: Vec<f64>,
        jac: DMatrix<f64>,
        hess: Vec<f64>,
    }
    let evaluate = |z: Vec<f64>| -> Result<Option<Point>> {
        let mut ev = Evaluation::default();
        problem.constraints.eval(&z, Order::Hessian, &mut ev)?;
        let mut f: Vec<f64> = ev.values.iter().map(|g| g - problem.rhs).collect();
        let mut jac = DMatrix::<f64>::zeros(total, nf);
        for j in 0..m {
            for (a, &k) in free.iter().enumerate() {
                jac[(j, a)] = ev.jac[j * n + k];
            }
        }
        for (b, &(a, sign, bound)) in boxes.iter().enumerate() {
            f.push(sign * (z[free[a]] - bound));
            jac[(m + b, a)] = sign;
        }
        if !f.iter().all(|v| v.is_finite()) {
            return Ok(None);
        }
        Ok(Some(Point { z, f, jac, hess: ev.hess }))
    };
    let c = DVector::from_iterator(nf, free.iter().map(|&k| problem.objective[k]));
    let c_scale = 1.0 + c.norm();
    let Some(mut pt) = evaluate(z0.to_vec())? else {
        return Err(Error::Solver("constraints are not finite at the start point".into()));
    };
    if pt.f.iter().any(|v| *v >= 0.0) {
        return Err(Error::Solver("start point is not strictly feasible".into()));
    }
    let mut slack: Vec<f64> = pt.f.iter().map(|v| -v).collect();
    let mut lambda: Vec<f64> = slack.iter().map(|s| 1.0 / (settings.tau0 * s)).collect();
    let sigma = 1.0 / settings.mu;

    // reduced dual residual, primal residual and complementarity
    let residuals = |pt: &Point, slack: &[f64], lambda: &[f64], target: f64| -> (DVector<f64>, Vec<f64>, Vec<f64>) {
        let rd = red.basis.transpose() * (&c + pt.jac.transpose() * DVector::from_column_slice(lambda));
        let rp: Vec<f64> = (0..total).map(|j| pt.f[j] + slack[j]).collect();
        let rc: Vec<f64> = (0..total).map(|j| slack[j] * lambda[j] - target).collect();
        (rd, rp, rc)
    };
    let norm = |rd: &DVector<f64>, rp: &[f64], rc: &[f64]| -> f64 {
        (rd.norm_squared() + rp.iter().map(|v| v * v).sum::<f64>() + rc.iter().map(|v| v * v).sum::<f64>()).sqrt()
    };
    let mut steps = 0;
    let status;
    loop {
        let gap: f64 = slack.iter().zip(&lambda).map(|(s, l)| s * l).sum();
        let target = sigma * gap / total as f64;
        let (rd, rp, rc) = residuals(&pt, &slack, &lambda, target);
        let primal = rp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gap <= settings.gap_tol && rd.norm() <= 1e-8 * c_scale && primal <= 1e-10 {
            status = SolveStatus::Optimal;
            break;
        }
        if steps >= settings.max_newton {
            status = SolveStatus::MaxIter;
            break;
        }
        // (H + Jᵀ Σ J) dz = -(r_d + Jᵀ (Σ r_p - r_c / s)),  Σ = λ / s
        let mut h = DMatrix::<f64>::zeros(nf, nf);
        if kb > 0 {
            for j in 0..m {
                let hj = &pt.hess[j * kb * kb..(j + 1) * kb * kb];
                for a in 0..nf {
                    let Some(pa) = pos[a] else { continue };
                    for b in 0..nf {
                        if let Some(pb) = pos[b] {
                            h[(a, b)] += lambda[j] * hj[pa * kb + pb];
                        }
                    }
                }
            }
        }
        let mut w = DVector::<f64>::zeros(total);
        for j in 0..total {
            let sig = lambda[j] / slack[j];
            w[j] = sig * rp[j] - rc[j] / slack[j];
            let row = pt.jac.row(j);
            for a in 0..nf {
                if row[a] == 0.0 {
                    continue;
                }
                let sa = sig * row[a];
                for b in 0..nf {
                    h[(a, b)] += sa * row[b];
                }
            }
        }
        let hr = red.basis.transpose() * &h * &red.basis;
        let gr = &rd + red.basis.transpose() * (pt.jac.transpose() * &w);
        let Some(du) = newton_direction(&hr, &gr) else {
            status = SolveStatus::Stalled;
            break;
        };
        let dz = &red.basis * &du;
        let jdz = &pt.jac * &dz;
        let dlambda: Vec<f64> = (0..total).map(|j| lambda[j] / slack[j] * (jdz[j] + rp[j]) - rc[j] / slack[j]).collect();
        let dslack: Vec<f64> = (0..total).map(|j| -(rc[j] + slack[j] * dlambda[j]) / lambda[j]).collect();
        let mut alpha: f64 = 1.0;
        for j in 0..total {
            if dslack[j] < 0.0 {
                alpha = alpha.min(-0.99 * slack[j] / dslack[j]);
            }
            if dlambda[j] < 0.0 {
                alpha = alpha.min(-0.99 * lambda[j] / dlambda[j]);
            }
        }
        let r0 = norm(&rd, &rp, &rc);
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = pt.z.clone();
            for (a, &k) in free.iter().enumerate() {
                trial[k] += alpha * dz[a];
            }
            if let Some(next) = evaluate(trial)? {
                let sl: Vec<f64> = (0..total).map(|j| slack[j] + alpha * dslack[j]).collect();
                let lt: Vec<f64> = (0..total).map(|j| lambda[j] + alpha * dlambda[j]).collect();
                let (rd1, rp1, rc1) = residuals(&next, &sl, &lt, target);
                if norm(&rd1, &rp1, &rc1) <= (1.0 - 0.01 * alpha) * r0 {
                    accepted = Some((next, sl, lt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        steps += 1;
        log::trace!("primal-dual step {steps}: gap {gap:e} dual {:e} primal {primal:e} alpha {alpha:e}", rd.norm());
        let Some((next, sl, lt)) = accepted else {
            status = SolveStatus::Stalled;
            break;
        };
        pt = next;
        slack = sl;
        lambda = lt;
        if pt.z.iter().any(|v| v.abs() > 1e12) {
            status = SolveStatus::Unbounded;
            break;
        }
    }
    Ok(Outcome { objective: problem.objective_at(&pt.z), z: pt.z, status, newton_steps: steps })
}

/// Result of [`minimize_max`]: the point, the exact maximal constraint
/// value there, and solver diagnostics.
#[derive(Clone, Debug)]
pub struct MaxOutcome {
    pub z: Vec<f64>,
    pub t: f64,
    pub status: SolveStatus,
    pub newton_steps: usize,
}

/// `g_j(z) - s ≤ 0` over `(z, s)`, the epigraph form of `min max_j g_j`.
pub struct Epigraph<'a> {
    pub inner: &'a dyn ConstraintSet,
}

impl<'a> ConstraintSet for Epigraph<'a> {
    fn n_vars(&self) -> usize {
        self.inner.n_vars() + 1
    }
    fn n_constraints(&self) -> usize {
        self.inner.n_constraints()
    }
    fn hess_block(&self) -> Range<usize> {
        self.inner.hess_block()
    }
    fn eval(&self, z: &[f64], order: Order, out: &mut Evaluation) -> Result<()> {
        let n = self.inner.n_vars();
        let s = z[n];
        let mut tmp = Evaluation::default();
        self.inner.eval(&z[..n], order, &mut tmp)?;
        let m = tmp.values.len();
        out.values.clear();
        out.values.extend(tmp.values.iter().map(|g| g - s));
        out.jac.clear();
        if order >= Order::Gradient {
            out.jac.reserve(m * (n + 1));
            for j in 0..m {
                out.jac.extend_from_slice(&tmp.jac[j * n..(j + 1) * n]);
                out.jac.push(-1.0);
            }
        }
        out.hess = tmp.hess;
        Ok(())
    }
}

/// Log-sum-exp smoothing `(1/α) log Σ_j exp(α g_j)` as a single constraint.
pub struct SmoothMax<'a> {
    pub inner: &'a dyn ConstraintSet,
    pub alpha: f64,
}

/// `(1/α) log Σ exp(α v_j)` and its softmax weights.
pub fn smooth_max(values: &[f64], alpha: f64) -> (f64, Vec<f64>) {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return (m, vec![0.0; values.len()]);
    }
    let w: Vec<f64> = values.iter().map(|v| (alpha * (v - m)).exp()).collect();
    let s: f64 = w.iter().sum();
    (m + s.ln() / alpha, w.into_iter().map(|v| v / s).collect())
}

impl<'a> ConstraintSet for SmoothMax<'a> {
    fn n_vars(&self) -> usize {
        self.inner.n_vars()
    }
    fn n_constraints(&self) -> usize {
        1
    }
    fn hess_block(&self) -> Range<usize> {
        0..self.inner.n_vars()
    }
    fn eval(&self, z: &[f64], order: Order, out: &mut Evaluation) -> Result<()> {
        let n = self.inner.n_vars();
        let mut tmp = Evaluation::default();
        self.inner.eval(z, order, &mut tmp)?;
        let (v, pi) = smooth_max(&tmp.values, self.alpha);
        out.values.clear();
        out.values.push(v);
        out.jac.clear();
        out.hess.clear();
        if order == Order::Value {
            return Ok(());
        }
        let mut grad = vec![0.0; n];
        for (j, p) in pi.iter().enumerate() {
            for k in 0..n {
                grad[k] += p * tmp.jac[j * n + k];
            }
        }
        out.jac.extend_from_slice(&grad);
        if order == Order::Hessian {
            let block = self.inner.hess_block();
            let kb = block.len();
            let mut h = vec![0.0; n * n];
            for (j, &p) in pi.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let row = &tmp.jac[j * n..(j + 1) * n];
                crate::jet::add_outer(&mut h, self.alpha * p, row, row);
                for a in 0..kb {
                    for b in 0..kb {
                        h[(block.start + a) * n + block.start + b] += p * tmp.hess[j * kb * kb + a * kb + b];
                    }
                }
            }
            crate::jet::add_outer(&mut h, -self.alpha, &grad, &grad);
            out.hess = h;
        }
        Ok(())
    }
}

/// Minimize `max_j g_j(z) - rhs` over the problem's box and equalities by a
/// barrier solve of the epigraph program started at `z0`.
///
/// Returns the final point (without the epigraph variable) and the exact
/// maximum constraint value there. With `target`, the solve stops as soon
/// as the epigraph variable falls below it.
pub fn minimize_max(problem: &Problem, z0: &[f64], target: Option<f64>, settings: &BarrierSettings) -> Result<MaxOutcome> {
    let n = problem.constraints.n_vars();
    let mut eval = Evaluation::default();
    problem.constraints.eval(z0, Order::Value, &mut eval)?;
    let worst = eval.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if problem.constraints.n_constraints() == 0 {
        return Ok(MaxOutcome { z: z0.to_vec(), t: f64::NEG_INFINITY, status: SolveStatus::Optimal, newton_steps: 0 });
    }
    if !worst.is_finite() {
        return Err(Error::Solver("constraint values at the start are not finite".into()));
    }
    let epi = Epigraph { inner: problem.constraints };
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut lower = problem.lower.clone();
    let mut upper = problem.upper.clone();
    // a distant floor keeps the epigraph program bounded
    lower.push(worst - 1e3);
    upper.push(f64::INFINITY);
    let mut eq = DMatrix::zeros(problem.eq_matrix.nrows(), n + 1);
    eq.view_mut((0, 0), (problem.eq_matrix.nrows(), n)).copy_from(&problem.eq_matrix);
    let mut start = z0.to_vec();
    start.push(worst + 1.0);
    let epi_problem = Problem {
        constraints: &epi,
        objective: obj,
        lower,
        upper,
        eq_matrix: eq,
        eq_rhs: problem.eq_rhs.clone(),
        rhs: 0.0,
    };
    let settings = BarrierSettings { target, ..settings.clone() };
    let out = solve(&epi_problem, &start, &settings)?;
    let z: Vec<f64> = out.z[..n].to_vec();
    problem.constraints.eval(&z, Order::Value, &mut eval)?;
    let t = eval.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(MaxOutcome { z, t, status: out.status, newton_steps: out.newton_steps })
}
