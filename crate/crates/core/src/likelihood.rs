//! Closed-form logit likelihoods and dominant-strategy lower bounds.

use crate::error::{Error, Result};
use crate::game::{GameSpec, PayoffShift};
use crate::inference::CcpTable;
use crate::jet::{add_outer, Jet, Order};

fn check(spec: &GameSpec, theta: &[f64], y: usize, x: usize) -> Result<()> {
    spec.check_theta(theta)?;
    spec.check_outcome(y)?;
    spec.check_bin(x)
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("non-finite {what}: {v}")))
    }
}

/// Log-sum-exp weights: returns `(lse, softmax)` of `u`.
fn softmax(u: &[f64], probs: &mut Vec<f64>) -> f64 {
    let m = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    probs.clear();
    let mut s = 0.0;
    for &v in u {
        let e = (v - m).exp();
        probs.push(e);
        s += e;
    }
    for p in probs.iter_mut() {
        *p /= s;
    }
    m + s.ln()
}

/// Action counts up to this use stack buffers.
const SMALL: usize = 8;

/// `log L(y|x;θ)` as a jet, with payoffs shifted by `shift`.
///
/// Each player contributes `v_i(y) - log Σ_a exp v_i(a, y_{-i})`; the Hessian
/// is minus the softmax covariance of the payoff gradients, so the result is
/// concave in θ.
pub fn log_singleton_jet(
    spec: &GameSpec,
    theta: &[f64],
    y: usize,
    x: usize,
    shift: &PayoffShift,
    order: Order,
) -> Result<Jet> {
    check(spec, theta, y, x)?;
    let d = spec.param_dim();
    let mut out = Jet::constant(0.0, d, order);
    // payoff gradients are coefficient rows plus the shift on entering actions
    let shift_at = |i: usize, z: usize| -> Option<(usize, f64)> { (spec.action(z, i) > 0).then_some(shift.param).flatten() };
    let mut small = [0.0f64; 2 * SMALL];
    let mut large = Vec::new();
    for i in 0..spec.n_players() {
        let na = spec.n_actions(i);
        let (u, pi) = if na <= SMALL {
            small.split_at_mut(SMALL)
        } else {
            large.resize(2 * na, 0.0);
            large.split_at_mut(na)
        };
        let (u, pi) = (&mut u[..na], &mut pi[..na]);
        for a in 0..na {
            let z = spec.deviate(y, i, a);
            u[a] = finite(spec.payoff_unchecked(theta, i, z, x, shift), "payoff index")?;
        }
        let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for a in 0..na {
            pi[a] = (u[a] - top).exp();
            total += pi[a];
        }
        for p in pi.iter_mut() {
            *p /= total;
        }
        let own = spec.action(y, i);
        out.value += u[own] - top - total.ln();
        if order == Order::Value {
            continue;
        }
        // grad += g_own - Σ π_a g_a
        for a in 0..na {
            let z = spec.deviate(y, i, a);
            let w = if a == own { 1.0 - pi[a] } else { -pi[a] };
            for (k, c) in spec.coef(i, z, x).iter().enumerate() {
                out.grad[k] += w * c;
            }
            if let Some((k, sv)) = shift_at(i, z) {
                out.grad[k] += w * sv;
            }
        }
        if order == Order::Hessian {
            // -Cov_π(g) = -Σ π_a g_a g_aᵀ + m mᵀ, accumulated as -Σ π_a (g_a - m)(g_a - m)ᵀ
            let mut mean = vec![0.0; d];
            for a in 0..na {
                let z = spec.deviate(y, i, a);
                for (k, c) in spec.coef(i, z, x).iter().enumerate() {
                    mean[k] += pi[a] * c;
                }
                if let Some((k, sv)) = shift_at(i, z) {
                    mean[k] += pi[a] * sv;
                }
            }
            let mut dev = vec![0.0; d];
            for a in 0..na {
                let z = spec.deviate(y, i, a);
                for (k, c) in spec.coef(i, z, x).iter().enumerate() {
                    dev[k] = c - mean[k];
                }
                if let Some((k, sv)) = shift_at(i, z) {
                    dev[k] += sv;
                }
                add_outer(&mut out.hess, -pi[a], &dev, &dev);
            }
        }
    }
    Ok(out)
}

/// `L(y|x;θ) = Π_i exp v_i(y) / Σ_a exp v_i(a, y_{-i})`.
pub fn singleton_likelihood(spec: &GameSpec, theta: &[f64], y: usize, x: usize) -> Result<f64> {
    Ok(log_singleton_jet(spec, theta, y, x, &PayoffShift::NONE, Order::Value)?.value.exp())
}

/// `log φ(y|x) - log L(y|x;θ)`; `-inf` when `φ(y|x) = 0`.
pub fn abj_residual(spec: &GameSpec, theta: &[f64], ccp: &CcpTable, y: usize, x: usize) -> Result<f64> {
    check(spec, theta, y, x)?;
    let phi = ccp.prob(y, x)?;
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::Numeric(format!("choice probability {phi} outside [0,1]")));
    }
    if phi == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let ll = log_singleton_jet(spec, theta, y, x, &PayoffShift::NONE, Order::Value)?.value;
    Ok(phi.ln() - ll)
}

/// `log` of the dominant-strategy lower bound as a jet.
///
/// For player `i`, `h_i(ỹ) = min_{y_{-i}} [v_i(y_i, y_{-i}) - v_i(ỹ, y_{-i})]` and
/// the factor is `1 / Σ_ỹ exp(-h_i(ỹ))`. `h_i` is piecewise affine; its
/// gradient is taken at the first minimizing opponent profile.
pub fn log_dominant_jet(
    spec: &GameSpec,
    theta: &[f64],
    y: usize,
    x: usize,
    shift: &PayoffShift,
    order: Order,
) -> Result<Jet> {
    check(spec, theta, y, x)?;
    let d = spec.param_dim();
    let mut out = Jet::constant(0.0, d, order);
    let mut neg_h = Vec::new();
    let mut arg = Vec::new();
    let mut pi = Vec::new();
    let mut ga = vec![0.0; d];
    let mut gb = vec![0.0; d];
    for i in 0..spec.n_players() {
        let own = spec.action(y, i);
        neg_h.clear();
        arg.clear();
        for alt in 0..spec.n_actions(i) {
            if alt == own {
                neg_h.push(0.0);
                arg.push(usize::MAX);
                continue;
            }
            let mut best = f64::INFINITY;
            let mut best_z = usize::MAX;
            for z in 0..spec.n_outcomes() {
                if spec.action(z, i) != own {
                    continue;
                }
                let diff = spec.payoff_unchecked(theta, i, z, x, shift)
                    - spec.payoff_unchecked(theta, i, spec.deviate(z, i, alt), x, shift);
                if diff < best {
                    best = diff;
                    best_z = z;
                }
            }
            neg_h.push(-finite(best, "payoff difference")?);
            arg.push(best_z);
        }
        let lse = softmax(&neg_h, &mut pi);
        out.value -= lse;
        if order == Order::Value {
            continue;
        }
        // gradient of -h for each alternative
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(neg_h.len());
        let mut mean = vec![0.0; d];
        for (alt, &z) in arg.iter().enumerate() {
            let mut g = vec![0.0; d];
            if z != usize::MAX {
                spec.payoff_grad(i, z, x, shift, &mut ga);
                spec.payoff_grad(i, spec.deviate(z, i, alt), x, shift, &mut gb);
                for k in 0..d {
                    g[k] = gb[k] - ga[k];
                }
            }
            for k in 0..d {
                mean[k] += pi[alt] * g[k];
            }
            dirs.push(g);
        }
        for k in 0..d {
            out.grad[k] -= mean[k];
        }
        if order == Order::Hessian {
            for (alt, g) in dirs.iter().enumerate() {
                add_outer(&mut out.hess, -pi[alt], g, g);
            }
            add_outer(&mut out.hess, 1.0, &mean, &mean);
        }
    }
    Ok(out)
}

/// Probability that every player's action in `y` is strictly dominant.
pub fn dominant_lower_bound(spec: &GameSpec, theta: &[f64], y: usize, x: usize) -> Result<f64> {
    Ok(log_dominant_jet(spec, theta, y, x, &PayoffShift::NONE, Order::Value)?.value.exp())
}
