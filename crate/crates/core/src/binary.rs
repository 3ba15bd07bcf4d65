//! Binary-action games: threshold algebra, intersection and union
//! likelihoods, and core-determining event families.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::game::{GameSpec, OutcomeEvent, PayoffShift};
use crate::jet::{add_outer, Jet, Order};
use crate::likelihood::log_singleton_jet;
use crate::logistic::{self, ExtReal};

/// Largest event handled by inclusion-exclusion.
pub const MAX_UNION_SIZE: usize = 16;

/// Intersection probabilities at or below this count as zero when testing
/// whether two outcomes can be equilibria simultaneously.
pub const ZERO_TOL: f64 = 1e-14;

/// Round-off tolerated in inclusion-exclusion before the result is clamped.
const CLAMP_TOL: f64 = 1e-10;

/// Read-only view of a game where every player has two actions.
///
/// With `ξ_i` the difference of the two action shocks, action 1 is a best
/// response iff `ξ_i ≥ -w_i(y_{-i})`, where `w_i` is the payoff gain from
/// action 1 over action 0.
#[derive(Clone, Copy, Debug)]
pub struct BinaryGameView<'a> {
    spec: &'a GameSpec,
}

impl<'a> BinaryGameView<'a> {
    pub fn new(spec: &'a GameSpec) -> Result<Self> {
        if !spec.is_binary() {
            return Err(Error::Unsupported("operation requires two actions per player".into()));
        }
        Ok(BinaryGameView { spec })
    }

    pub fn spec(&self) -> &'a GameSpec {
        self.spec
    }

    /// `w_i(y_{-i}, x; θ)` using the opponents' actions in `y`.
    pub fn entry_index(&self, theta: &[f64], i: usize, y: usize, x: usize, shift: &PayoffShift) -> f64 {
        let s = self.spec;
        s.payoff_unchecked(theta, i, s.deviate(y, i, 1), x, shift)
            - s.payoff_unchecked(theta, i, s.deviate(y, i, 0), x, shift)
    }

    fn entry_grad(&self, i: usize, y: usize, x: usize, shift: &PayoffShift, tmp: &mut [f64], out: &mut [f64]) {
        let s = self.spec;
        s.payoff_grad(i, s.deviate(y, i, 1), x, shift, out);
        s.payoff_grad(i, s.deviate(y, i, 0), x, shift, tmp);
        for (o, t) in out.iter_mut().zip(tmp.iter()) {
            *o -= t;
        }
    }

    /// Thresholds `(l_i, r_i)` on `ξ_i` supporting `y` for every player.
    pub fn thresholds(&self, theta: &[f64], y: usize, x: usize, shift: &PayoffShift) -> Vec<(ExtReal, ExtReal)> {
        (0..self.spec.n_players())
            .map(|i| {
                let cut = ExtReal::Finite(-self.entry_index(theta, i, y, x, shift));
                if self.spec.action(y, i) == 1 {
                    (cut, ExtReal::PosInf)
                } else {
                    (ExtReal::NegInf, cut)
                }
            })
            .collect()
    }

    fn cuts(&self, theta: &[f64], a: &[usize], x: usize, shift: &PayoffShift, order: Order) -> Result<Cuts> {
        let s = self.spec;
        let (n, k, d) = (s.n_players(), a.len(), s.param_dim());
        let mut cut = vec![0.0; n * k];
        let mut grad = if order > Order::Value { vec![0.0; n * k * d] } else { Vec::new() };
        let mut tmp = vec![0.0; d];
        for (m, &y) in a.iter().enumerate() {
            for i in 0..n {
                let w = self.entry_index(theta, i, y, x, shift);
                if !w.is_finite() {
                    return Err(Error::Numeric(format!("non-finite entry index {w}")));
                }
                cut[m * n + i] = -w;
                if order > Order::Value {
                    let g = &mut grad[(m * n + i) * d..(m * n + i + 1) * d];
                    self.entry_grad(i, y, x, shift, &mut tmp, g);
                    g.iter_mut().for_each(|v| *v = -*v);
                }
            }
        }
        let ins = a.iter().map(|&y| (0..n).map(|i| s.action(y, i) == 1).collect()).collect();
        Ok(Cuts { n, d, cut, grad, ins })
    }

    /// `R(A|x;θ)`, the probability that every outcome in `A` is an equilibrium.
    pub fn intersection_jet(
        &self,
        theta: &[f64],
        event: &OutcomeEvent,
        x: usize,
        shift: &PayoffShift,
        order: Order,
    ) -> Result<Jet> {
        check(self.spec, theta, x)?;
        let cuts = self.cuts(theta, event.members(), x, shift, order)?;
        let all: Vec<usize> = (0..event.len()).collect();
        let bounds = cuts.bounds_of(&all);
        Ok(cuts.rect_jet(&bounds, order))
    }

    /// `L(A|x;θ)`, the probability that some outcome in `A` is an
    /// equilibrium, by inclusion-exclusion over intersections.
    pub fn union_jet(
        &self,
        theta: &[f64],
        event: &OutcomeEvent,
        x: usize,
        shift: &PayoffShift,
        order: Order,
    ) -> Result<Jet> {
        check(self.spec, theta, x)?;
        let k = event.len();
        if k > MAX_UNION_SIZE {
            return Err(Error::Complexity { size: k, limit: MAX_UNION_SIZE });
        }
        if k == 1 {
            return log_singleton_jet(self.spec, theta, event.members()[0], x, shift, order).map(|j| j.exp());
        }
        let cuts = self.cuts(theta, event.members(), x, shift, order)?;
        let n = cuts.n;
        let full = 1usize << k;
        // Per subset and player: (lower cut, its member) and (upper cut, its member).
        let mut lo = vec![(f64::NEG_INFINITY, usize::MAX); full * n];
        let mut hi = vec![(f64::INFINITY, usize::MAX); full * n];
        let mut total = Jet::constant(0.0, cuts.d, order);
        for mask in 1..full {
            let m = mask.trailing_zeros() as usize;
            let prev = mask & (mask - 1);
            let mut empty = false;
            for i in 0..n {
                let (mut l, mut h) = (lo[prev * n + i], hi[prev * n + i]);
                let c = cuts.cut[m * n + i];
                if cuts.ins[m][i] {
                    if c > l.0 {
                        l = (c, m);
                    }
                } else if c < h.0 {
                    h = (c, m);
                }
                lo[mask * n + i] = l;
                hi[mask * n + i] = h;
                empty |= l.0 >= h.0;
            }
            if empty {
                continue;
            }
            let bounds: Vec<_> = (0..n).map(|i| (lo[mask * n + i], hi[mask * n + i])).collect();
            let r = cuts.rect_jet(&bounds, order);
            let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
            total.add_scaled(sign, &r);
        }
        if total.value < -CLAMP_TOL || total.value > 1.0 + CLAMP_TOL || !total.value.is_finite() {
            return Err(Error::Numeric(format!("inclusion-exclusion produced {}", total.value)));
        }
        total.value = total.value.clamp(0.0, 1.0);
        Ok(total)
    }

    /// Adjacency bitmasks: bit `z` of entry `y` is set when `R({y,z}|x;θ)`
    /// exceeds the zero tolerance.
    pub fn adjacency(&self, theta: &[f64], x: usize) -> Result<Vec<u64>> {
        check(self.spec, theta, x)?;
        let ny = self.spec.n_outcomes();
        if ny > 64 {
            return Err(Error::Complexity { size: ny, limit: 64 });
        }
        let mut adj = vec![0u64; ny];
        for y in 0..ny {
            for z in y + 1..ny {
                let ev = OutcomeEvent::from_sorted_unchecked(vec![y, z]);
                let r = self.intersection_jet(theta, &ev, x, &PayoffShift::NONE, Order::Value)?.value;
                if r > ZERO_TOL {
                    adj[y] |= 1 << z;
                    adj[z] |= 1 << y;
                }
            }
        }
        Ok(adj)
    }

    /// Adjacency that holds for some θ in the parameter box.
    ///
    /// Two outcomes can be equilibria together only if, for each player whose
    /// action differs, the payoff gain from action 1 is larger against the
    /// opponents of the outcome where the player plays 1. Each player is
    /// checked over the box separately, which can only add edges.
    pub fn potential_adjacency(&self, x: usize) -> Result<Vec<u64>> {
        self.spec.check_bin(x)?;
        let s = self.spec;
        let ny = s.n_outcomes();
        if ny > 64 {
            return Err(Error::Complexity { size: ny, limit: 64 });
        }
        let d = s.param_dim();
        let (mut g1, mut g0, mut tmp) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let mut adj = vec![0u64; ny];
        for y in 0..ny {
            'pair: for z in y + 1..ny {
                for i in 0..s.n_players() {
                    let (a, b) = match (s.action(y, i), s.action(z, i)) {
                        (1, 0) => (y, z),
                        (0, 1) => (z, y),
                        _ => continue,
                    };
                    // need w_i(a_{-i}) - w_i(b_{-i}) > 0 somewhere in the box
                    self.entry_grad(i, a, x, &PayoffShift::NONE, &mut tmp, &mut g1);
                    self.entry_grad(i, b, x, &PayoffShift::NONE, &mut tmp, &mut g0);
                    let zero = vec![0.0; d];
                    let off = self.entry_index(&zero, i, a, x, &PayoffShift::NONE)
                        - self.entry_index(&zero, i, b, x, &PayoffShift::NONE);
                    let mut best = off;
                    for k in 0..d {
                        let c = g1[k] - g0[k];
                        if c > 0.0 {
                            best += c * s.upper()[k];
                        } else if c < 0.0 {
                            best += c * s.lower()[k];
                        }
                    }
                    if best.is_nan() || best <= 1e-12 {
                        continue 'pair;
                    }
                }
                adj[y] |= 1 << z;
                adj[z] |= 1 << y;
            }
        }
        Ok(adj)
    }
}

fn check(spec: &GameSpec, theta: &[f64], x: usize) -> Result<()> {
    spec.check_theta(theta)?;
    spec.check_bin(x)
}

type Bound = ((f64, usize), (f64, usize));

struct Cuts {
    n: usize,
    d: usize,
    cut: Vec<f64>,
    grad: Vec<f64>,
    ins: Vec<Vec<bool>>,
}

impl Cuts {
    fn bounds_of(&self, members: &[usize]) -> Vec<Bound> {
        (0..self.n)
            .map(|i| {
                let mut l = (f64::NEG_INFINITY, usize::MAX);
                let mut h = (f64::INFINITY, usize::MAX);
                for &m in members {
                    let c = self.cut[m * self.n + i];
                    if self.ins[m][i] {
                        if c > l.0 {
                            l = (c, m);
                        }
                    } else if c < h.0 {
                        h = (c, m);
                    }
                }
                (l, h)
            })
            .collect()
    }

    fn g(&self, m: usize, i: usize) -> &[f64] {
        &self.grad[(m * self.n + i) * self.d..(m * self.n + i + 1) * self.d]
    }

    /// `Π_i max{0, F(hi_i) - F(lo_i)}` with derivatives.
    fn rect_jet(&self, bounds: &[Bound], order: Order) -> Jet {
        let d = self.d;
        let mut acc = Jet::constant(1.0, d, order);
        for (i, &((l, lm), (h, hm))) in bounds.iter().enumerate() {
            let fl = if lm == usize::MAX { 0.0 } else { logistic::cdf(l) };
            let fh = if hm == usize::MAX { 1.0 } else { logistic::cdf(h) };
            let diff = fh - fl;
            if diff <= 0.0 {
                return Jet::constant(0.0, d, order);
            }
            if order == Order::Value {
                acc.value *= diff;
                continue;
            }
            let mut f = Jet::constant(diff, d, order);
            if hm != usize::MAX {
                let gh = self.g(hm, i);
                for k in 0..d {
                    f.grad[k] += logistic::pdf(h) * gh[k];
                }
                if order == Order::Hessian {
                    add_outer(&mut f.hess, logistic::pdf_prime(h), gh, gh);
                }
            }
            if lm != usize::MAX {
                let gl = self.g(lm, i);
                for k in 0..d {
                    f.grad[k] -= logistic::pdf(l) * gl[k];
                }
                if order == Order::Hessian {
                    add_outer(&mut f.hess, -logistic::pdf_prime(l), gl, gl);
                }
            }
            acc = acc.mul(&f);
        }
        acc
    }
}

/// `R(A|x;θ)`.
pub fn intersection_probability(spec: &GameSpec, theta: &[f64], event: &OutcomeEvent, x: usize) -> Result<f64> {
    let view = BinaryGameView::new(spec)?;
    Ok(view.intersection_jet(theta, event, x, &PayoffShift::NONE, Order::Value)?.value)
}

/// `L(A|x;θ)`. Singletons work for any game; larger events need binary actions.
pub fn union_likelihood(spec: &GameSpec, theta: &[f64], event: &OutcomeEvent, x: usize) -> Result<f64> {
    if event.is_singleton() {
        return crate::likelihood::singleton_likelihood(spec, theta, event.members()[0], x);
    }
    let view = BinaryGameView::new(spec)?;
    Ok(view.union_jet(theta, event, x, &PayoffShift::NONE, Order::Value)?.value)
}

/// All connected vertex sets of size at most `k` in the graph `adj`,
/// ordered by size and then by members.
pub fn connected_sets(adj: &[u64], k: usize) -> Vec<u64> {
    let ny = adj.len();
    let mut out: Vec<u64> = (0..ny).map(|y| 1u64 << y).collect();
    let mut layer = out.clone();
    for _ in 1..k.min(ny) {
        let mut next = HashSet::new();
        for &s in &layer {
            let mut nb = 0u64;
            for y in 0..ny {
                if s >> y & 1 == 1 {
                    nb |= adj[y];
                }
            }
            nb &= !s;
            while nb != 0 {
                let v = nb.trailing_zeros();
                nb &= nb - 1;
                next.insert(s | 1 << v);
            }
        }
        let mut v: Vec<u64> = next.into_iter().collect();
        v.sort_by_key(|m| members_key(*m));
        out.extend(&v);
        layer = v;
        if layer.is_empty() {
            break;
        }
    }
    out
}

fn members_key(mask: u64) -> Vec<u32> {
    (0..64).filter(|b| mask >> b & 1 == 1).collect()
}

fn masks_to_events(masks: Vec<u64>) -> Vec<OutcomeEvent> {
    masks
        .into_iter()
        .map(|m| OutcomeEvent::from_sorted_unchecked(members_key(m).into_iter().map(|b| b as usize).collect()))
        .collect()
}

/// Events of size at most `k` that cannot be split into two parts whose
/// outcomes are never equilibria together at θ.
pub fn core_determining_family(spec: &GameSpec, theta: &[f64], x: usize, k: usize) -> Result<Vec<OutcomeEvent>> {
    let view = BinaryGameView::new(spec)?;
    if k == 0 || k > spec.n_outcomes() {
        return Err(Error::Contract(format!("family size bound {k} outside 1..={}", spec.n_outcomes())));
    }
    let adj = view.adjacency(theta, x)?;
    Ok(masks_to_events(connected_sets(&adj, k)))
}

/// Union over the parameter box of the core-determining families, up to
/// the per-player relaxation described in [`BinaryGameView::potential_adjacency`].
pub fn structural_family(spec: &GameSpec, x: usize, k: usize) -> Result<Vec<OutcomeEvent>> {
    let view = BinaryGameView::new(spec)?;
    if k == 0 || k > spec.n_outcomes() {
        return Err(Error::Contract(format!("family size bound {k} outside 1..={}", spec.n_outcomes())));
    }
    let adj = view.potential_adjacency(x)?;
    Ok(masks_to_events(connected_sets(&adj, k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::entry2;
    use crate::likelihood::singleton_likelihood;
    use crate::logistic::cdf;

    const T0: [f64; 4] = [0.0, 0.0, -0.5, -0.5];

    fn ev(g: &GameSpec, m: &[usize]) -> OutcomeEvent {
        OutcomeEvent::new(g, m.iter().cloned()).unwrap()
    }

    #[test]
    fn thresholds_have_one_infinite_side() {
        let g = entry2();
        let v = BinaryGameView::new(&g).unwrap();
        for y in 0..4 {
            for (l, r) in v.thresholds(&T0, y, 0, &PayoffShift::NONE) {
                assert!(matches!(l, ExtReal::NegInf) ^ matches!(r, ExtReal::PosInf));
            }
        }
        let t = v.thresholds(&T0, 3, 0, &PayoffShift::NONE);
        assert_eq!(t[0], (ExtReal::Finite(0.5), ExtReal::PosInf));
    }

    #[test]
    fn multiplicity_box() {
        let g = entry2();
        let r = intersection_probability(&g, &T0, &ev(&g, &[1, 2]), 0).unwrap();
        assert!((r - (cdf(0.5) - 0.5).powi(2)).abs() < 1e-15);
        assert!((r - 0.0149963).abs() < 1e-7);
        assert_eq!(intersection_probability(&g, &T0, &ev(&g, &[0, 3]), 0).unwrap(), 0.0);
        let u = union_likelihood(&g, &T0, &ev(&g, &[1, 2]), 0).unwrap();
        assert!((u - 0.607463).abs() < 1e-6);
        let all = union_likelihood(&g, &T0, &ev(&g, &[0, 1, 2, 3]), 0).unwrap();
        assert!((all - 1.0).abs() < 1e-14);
        for y in 0..4 {
            let s = singleton_likelihood(&g, &T0, y, 0).unwrap();
            let r = intersection_probability(&g, &T0, &ev(&g, &[y]), 0).unwrap();
            assert!((s - r).abs() < 1e-15);
        }
    }

    #[test]
    fn entry_core_family() {
        let g = entry2();
        let fam = core_determining_family(&g, &T0, 0, 4).unwrap();
        let want = vec![ev(&g, &[0]), ev(&g, &[1]), ev(&g, &[2]), ev(&g, &[3]), ev(&g, &[1, 2])];
        assert_eq!(fam, want);
        assert_eq!(core_determining_family(&g, &T0, 0, 1).unwrap().len(), 4);
        let fam0 = core_determining_family(&g, &[0.3, -0.2, 0.0, 0.0], 0, 4).unwrap();
        assert_eq!(fam0.len(), 4);
        assert!(core_determining_family(&g, &T0, 0, 5).is_err());
    }

    #[test]
    fn structural_family_respects_sign_box() {
        let g = entry2().with_bounds(vec![-5.0, -5.0, -5.0, -5.0], vec![5.0, 5.0, 0.0, 0.0]).unwrap();
        assert_eq!(structural_family(&g, 0, 4).unwrap().len(), 5);
        let free = entry2();
        let fam = structural_family(&free, 0, 4).unwrap();
        assert!(fam.contains(&ev(&g, &[0, 3])));
        assert!(!fam.contains(&ev(&g, &[0, 1])));
    }

    #[test]
    fn union_jet_matches_differences() {
        let g = crate::game::entry_game(3, &[0.1]).unwrap();
        let v = BinaryGameView::new(&g).unwrap();
        let th = [0.2, -0.1, 0.3, -0.9, -1.2, -0.6];
        let a = ev(&g, &[1, 2, 4, 7]);
        let j = v.union_jet(&th, &a, 0, &PayoffShift::NONE, Order::Hessian).unwrap();
        for k in 0..6 {
            let (mut p, mut m) = (th, th);
            p[k] += 1e-6;
            m[k] -= 1e-6;
            let jp = v.union_jet(&p, &a, 0, &PayoffShift::NONE, Order::Gradient).unwrap();
            let jm = v.union_jet(&m, &a, 0, &PayoffShift::NONE, Order::Gradient).unwrap();
            assert!(((jp.value - jm.value) / 2e-6 - j.grad[k]).abs() < 1e-8);
            for l in 0..6 {
                assert!(((jp.grad[l] - jm.grad[l]) / 2e-6 - j.hess[k * 6 + l]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn non_binary_is_rejected() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let mut b = crate::game::GameSpecBuilder::new(
            s(&["a", "b"]),
            vec![s(&["0", "1", "2"]), s(&["0", "1"])],
            s(&["x"]),
            s(&["t"]),
        )
        .unwrap();
        for y in 0..6 {
            for i in 0..2 {
                b.set_payoff(i, y, 0, &[y as f64], 0.0).unwrap();
            }
        }
        let g = b.build().unwrap();
        let a = ev(&g, &[0, 1]);
        assert!(matches!(intersection_probability(&g, &[0.1], &a, 0), Err(Error::Unsupported(_))));
        assert!(union_likelihood(&g, &[0.1], &ev(&g, &[4]), 0).is_ok());
    }
}
