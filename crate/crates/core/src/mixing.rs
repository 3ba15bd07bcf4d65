//! Discrete mixing over an unobserved market shock.

use crate::binary::BinaryGameView;
use crate::error::{Error, Result};
use crate::game::{GameSpec, OutcomeEvent, PayoffShift};
use crate::jet::{Jet, Order};
use crate::likelihood::{log_dominant_jet, log_singleton_jet};
use crate::logistic;

/// Support points and weights for the market shock `ω`.
///
/// The shock enters every non-baseline action payoff as `σ_ω · ω`. When
/// `scale_param` is set, `σ_ω` is the θ coordinate with that index and
/// `scale` is ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    scale: f64,
    scale_param: Option<usize>,
}

impl MixingGrid {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, scale: f64) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Invalid("mixing grid needs matching, non-empty nodes and weights".into()));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) || nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("mixing nodes must be finite and strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid("mixing weights must be non-negative and sum to one".into()));
        }
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(Error::Invalid("mixing scale must be a finite non-negative number".into()));
        }
        Ok(MixingGrid { nodes, weights, scale, scale_param: None })
    }

    /// `K` equal-weight nodes at the logistic quantiles `(2k-1)/(2K)`.
    pub fn logistic_quantiles(k: usize, scale: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Invalid("mixing grid needs at least one node".into()));
        }
        let nodes = (1..=k).map(|j| logistic::quantile((2 * j - 1) as f64 / (2 * k) as f64)).collect();
        MixingGrid::new(nodes, vec![1.0 / k as f64; k], scale)
    }

    /// Let θ coordinate `k` act as the scale.
    pub fn with_free_scale(mut self, k: usize) -> Self {
        self.scale_param = Some(k);
        self
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }
    pub fn scale_param(&self) -> Option<usize> {
        self.scale_param
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Payoff shift at node `k`.
    pub fn shift(&self, k: usize) -> PayoffShift {
        match self.scale_param {
            Some(p) => PayoffShift { constant: 0.0, param: Some((p, self.nodes[k])) },
            None => PayoffShift { constant: self.scale * self.nodes[k], param: None },
        }
    }

    pub fn check(&self, spec: &GameSpec) -> Result<()> {
        if let Some(p) = self.scale_param {
            if p >= spec.param_dim() {
                return Err(Error::Index(format!("mixing scale parameter {p}")));
            }
        }
        Ok(())
    }
}

/// Which model bound to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundKind {
    /// Singleton likelihood `L(y)`.
    UpperL,
    /// Dominant-strategy lower bound of a singleton.
    LowerDominant,
    /// Intersection probability `R(A)`.
    R,
    /// Union likelihood `L(A)`.
    UnionL,
}

/// Level of a bound at a fixed payoff shift, with derivatives.
pub fn bound_jet(
    spec: &GameSpec,
    theta: &[f64],
    kind: BoundKind,
    event: &OutcomeEvent,
    x: usize,
    shift: &PayoffShift,
    order: Order,
) -> Result<Jet> {
    let single = || {
        if event.is_singleton() {
            Ok(event.members()[0])
        } else {
            Err(Error::Contract(format!("{kind:?} needs a singleton event")))
        }
    };
    match kind {
        BoundKind::UpperL => log_singleton_jet(spec, theta, single()?, x, shift, order).map(|j| j.exp()),
        BoundKind::LowerDominant => log_dominant_jet(spec, theta, single()?, x, shift, order).map(|j| j.exp()),
        BoundKind::R => BinaryGameView::new(spec)?.intersection_jet(theta, event, x, shift, order),
        BoundKind::UnionL => {
            if event.is_singleton() {
                log_singleton_jet(spec, theta, event.members()[0], x, shift, order).map(|j| j.exp())
            } else {
                BinaryGameView::new(spec)?.union_jet(theta, event, x, shift, order)
            }
        }
    }
}

/// `Σ_k w_k · bound(A|x, ω_k; θ)`.
pub fn mixed_bound(
    spec: &GameSpec,
    theta: &[f64],
    grid: &MixingGrid,
    kind: BoundKind,
    event: &OutcomeEvent,
    x: usize,
) -> Result<f64> {
    grid.check(spec)?;
    let mut total = 0.0;
    for k in 0..grid.len() {
        total += grid.weights[k] * bound_jet(spec, theta, kind, event, x, &grid.shift(k), Order::Value)?.value;
    }
    Ok(total)
}
