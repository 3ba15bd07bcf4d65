//! Brute-force ground truth: equilibrium enumeration at drawn shocks,
//! dataset simulation, and Monte Carlo bound estimates.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::binary::BinaryGameView;
use crate::error::{Error, Result};
use crate::game::{GameSpec, OutcomeEvent, PayoffShift};
use crate::jet::Order;
use crate::mixing::MixingGrid;

/// Markets per independent random stream. Fixing the block size makes
/// results independent of the number of worker threads.
pub const BLOCK: usize = 4096;

/// Shocks for one market: `shocks[i][a]` is added to player `i`'s payoff
/// from action `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentDraw {
    pub shocks: Vec<Vec<f64>>,
    pub seed: Option<u64>,
}

impl LatentDraw {
    /// Binary view: `ξ_i` is the shock difference on action 1.
    pub fn binary(xi: &[f64]) -> Self {
        LatentDraw { shocks: xi.iter().map(|&v| vec![0.0, v]).collect(), seed: None }
    }

    fn check(&self, spec: &GameSpec) -> Result<()> {
        if self.shocks.len() != spec.n_players()
            || self.shocks.iter().enumerate().any(|(i, s)| s.len() != spec.n_actions(i))
        {
            return Err(Error::Invalid("shock dimensions do not match the game".into()));
        }
        Ok(())
    }
}

/// How one equilibrium is picked when several exist.
#[derive(Clone, Debug, PartialEq)]
pub enum SelectionRule {
    /// Uniform over the realized equilibrium set.
    SymmetricUniform,
    /// The first listed outcome that is an equilibrium; unlisted outcomes
    /// follow in index order.
    FirstListed(Vec<usize>),
    /// Probability proportional to a weight per outcome.
    CustomWeights(Vec<f64>),
}

impl SelectionRule {
    pub fn check(&self, spec: &GameSpec) -> Result<()> {
        match self {
            SelectionRule::SymmetricUniform => Ok(()),
            SelectionRule::FirstListed(list) => list.iter().try_for_each(|&y| spec.check_outcome(y)),
            SelectionRule::CustomWeights(w) => {
                if w.len() != spec.n_outcomes() || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Invalid("selection weights must be one finite, non-negative value per outcome".into()));
                }
                Ok(())
            }
        }
    }

    /// Probability of selecting `y` from the equilibrium set `eq`.
    pub fn prob(&self, eq: &[usize], y: usize) -> Result<f64> {
        if !eq.contains(&y) {
            return Ok(0.0);
        }
        match self {
            SelectionRule::SymmetricUniform => Ok(1.0 / eq.len() as f64),
            SelectionRule::FirstListed(_) => Ok(if self.first(eq) == y { 1.0 } else { 0.0 }),
            SelectionRule::CustomWeights(w) => {
                let s: f64 = eq.iter().map(|&z| w[z]).sum();
                if s <= 0.0 {
                    return Err(Error::DegenerateModel(format!("selection weights vanish on equilibrium set {eq:?}")));
                }
                Ok(w[y] / s)
            }
        }
    }

    fn first(&self, eq: &[usize]) -> usize {
        if let SelectionRule::FirstListed(list) = self {
            if let Some(&y) = list.iter().find(|y| eq.contains(y)) {
                return y;
            }
        }
        *eq.iter().min().expect("non-empty equilibrium set")
    }

    /// Pick one element of the non-empty set `eq` using uniform `u ∈ [0,1)`.
    pub fn select(&self, eq: &[usize], u: f64) -> Result<usize> {
        match self {
            SelectionRule::SymmetricUniform => Ok(eq[((u * eq.len() as f64) as usize).min(eq.len() - 1)]),
            SelectionRule::FirstListed(_) => Ok(self.first(eq)),
            SelectionRule::CustomWeights(w) => {
                let s: f64 = eq.iter().map(|&z| w[z]).sum();
                if s <= 0.0 {
                    return Err(Error::DegenerateModel(format!("selection weights vanish on equilibrium set {eq:?}")));
                }
                let mut acc = 0.0;
                for &z in eq {
                    acc += w[z] / s;
                    if u < acc {
                        return Ok(z);
                    }
                }
                Ok(*eq.iter().rev().find(|&&z| w[z] > 0.0).unwrap())
            }
        }
    }
}

/// One simulated market.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketRow {
    pub market_id: u64,
    pub bin: usize,
    pub outcome: usize,
    pub omega: Option<f64>,
}

/// A simulated or imported sample of markets.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketDataset {
    pub n_bins: usize,
    pub n_outcomes: usize,
    pub rows: Vec<MarketRow>,
}

impl MarketDataset {
    pub fn empty(spec: &GameSpec) -> Self {
        MarketDataset { n_bins: spec.n_bins(), n_outcomes: spec.n_outcomes(), rows: Vec::new() }
    }
    pub fn len(&self) -> usize {
        self.rows.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Deterministic payoff table `v_i(y)` for one bin and shift.
struct PayoffTable {
    n_players: usize,
    v: Vec<f64>,
}

impl PayoffTable {
    fn new(spec: &GameSpec, theta: &[f64], x: usize, shift: &PayoffShift) -> Self {
        let n = spec.n_players();
        let mut v = vec![0.0; spec.n_outcomes() * n];
        for y in 0..spec.n_outcomes() {
            for i in 0..n {
                v[y * n + i] = spec.payoff_unchecked(theta, i, y, x, shift);
            }
        }
        PayoffTable { n_players: n, v }
    }

    /// Pure Nash equilibria under `shocks`, weak inequalities.
    fn equilibria(&self, spec: &GameSpec, shocks: &[Vec<f64>], out: &mut Vec<usize>) {
        out.clear();
        let n = self.n_players;
        'outcome: for y in 0..spec.n_outcomes() {
            for i in 0..n {
                let own = spec.action(y, i);
                let u = self.v[y * n + i] + shocks[i][own];
                for a in 0..spec.n_actions(i) {
                    if a != own {
                        let z = spec.deviate(y, i, a);
                        if self.v[z * n + i] + shocks[i][a] > u {
                            continue 'outcome;
                        }
                    }
                }
            }
            out.push(y);
        }
    }
}

/// Set of pure-strategy Nash equilibria at a given shock draw.
pub fn enumerate_pure_nash(spec: &GameSpec, theta: &[f64], x: usize, draw: &LatentDraw) -> Result<Vec<usize>> {
    spec.check_theta(theta)?;
    spec.check_bin(x)?;
    draw.check(spec)?;
    let table = PayoffTable::new(spec, theta, x, &PayoffShift::NONE);
    let mut out = Vec::new();
    table.equilibria(spec, &draw.shocks, &mut out);
    Ok(out)
}

/// Uniform draw on the open interval (0, 1).
#[inline]
fn open01<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Fill `shocks` with fresh draws: logistic differences on action 1 for
/// binary games, independent type-I extreme value draws otherwise.
fn draw_shocks<R: RngCore>(spec: &GameSpec, binary: bool, rng: &mut R, shocks: &mut [Vec<f64>]) {
    for (i, s) in shocks.iter_mut().enumerate() {
        if binary {
            let u = open01(rng);
            s[0] = 0.0;
            s[1] = (u / (1.0 - u)).ln();
        } else {
            for a in 0..spec.n_actions(i) {
                s[a] = -(-open01(rng).ln()).ln();
            }
        }
    }
}

fn pick_index<R: RngCore>(weights: &[f64], rng: &mut R) -> usize {
    let u = open01(rng);
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// Simulate `n` independent markets.
///
/// Each market draws its bin from `bin_weights`, a mixing node when `grid`
/// is given, and the payoff shocks; one equilibrium is then chosen by
/// `selection`. A draw without any equilibrium aborts the simulation.
pub fn simulate_dataset(
    spec: &GameSpec,
    theta: &[f64],
    selection: &SelectionRule,
    n: usize,
    bin_weights: &[f64],
    grid: Option<&MixingGrid>,
    seed: u64,
) -> Result<MarketDataset> {
    spec.check_theta(theta)?;
    selection.check(spec)?;
    if bin_weights.len() != spec.n_bins()
        || bin_weights.iter().any(|w| !(*w >= 0.0))
        || (bin_weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::Invalid("bin weights must be a probability vector over the bins".into()));
    }
    if let Some(g) = grid {
        g.check(spec)?;
    }
    let n_nodes = grid.map_or(1, |g| g.len());
    let tables: Vec<PayoffTable> = (0..spec.n_bins())
        .flat_map(|x| {
            (0..n_nodes).map(move |k| (x, k))
        })
        .map(|(x, k)| {
            let shift = grid.map_or(PayoffShift::NONE, |g| g.shift(k));
            PayoffTable::new(spec, theta, x, &shift)
        })
        .collect();
    let binary = spec.is_binary();
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<Result<Vec<MarketRow>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b);
            let start = b * BLOCK;
            let end = ((b + 1) * BLOCK).min(n);
            let mut rows = Vec::with_capacity(end - start);
            let mut shocks: Vec<Vec<f64>> = (0..spec.n_players()).map(|i| vec![0.0; spec.n_actions(i)]).collect();
            let mut eq = Vec::new();
            for m in start..end {
                let x = if bin_weights.len() == 1 { 0 } else { pick_index(bin_weights, &mut rng) };
                let k = match grid {
                    Some(g) => pick_index(g.weights(), &mut rng),
                    None => 0,
                };
                draw_shocks(spec, binary, &mut rng, &mut shocks);
                tables[x * n_nodes + k].equilibria(spec, &shocks, &mut eq);
                if eq.is_empty() {
                    return Err(Error::DegenerateModel(format!(
                        "no pure-strategy equilibrium in market {m} (bin {x}, shocks {shocks:?})"
                    )));
                }
                let y = selection.select(&eq, rng.random::<f64>())?;
                rows.push(MarketRow { market_id: m as u64, bin: x, outcome: y, omega: grid.map(|g| g.nodes()[k]) });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    for p in parts {
        rows.extend(p?);
    }
    Ok(MarketDataset { n_bins: spec.n_bins(), n_outcomes: spec.n_outcomes(), rows })
}

/// Which Monte Carlo frequency to estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McKind {
    /// Some member of A is an equilibrium.
    L,
    /// Every member of A is an equilibrium.
    RCap,
    /// The singleton A is the unique equilibrium.
    H1,
    /// The singleton A is an equilibrium.
    H2,
}

/// Monte Carlo estimate with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub draws: usize,
}

impl McEstimate {
    fn from_hits(hits: usize, draws: usize) -> Self {
        let p = hits as f64 / draws as f64;
        McEstimate { estimate: p, std_error: (p * (1.0 - p) / draws as f64).sqrt(), draws }
    }

    /// `|estimate - value|` in standard errors, with a floor on the error
    /// so that exact zeros compare cleanly.
    pub fn z_score(&self, value: f64) -> f64 {
        let floor = 1.0 / self.draws as f64;
        (self.estimate - value).abs() / self.std_error.max(floor)
    }
}

/// Run `draws` markets in fixed-size blocks and count draws whose
/// equilibrium set satisfies `hit`.
fn count_hits<F>(spec: &GameSpec, table: &PayoffTable, draws: usize, seed: u64, hit: F) -> Result<usize>
where
    F: Fn(&[usize]) -> bool + Sync,
{
    let binary = spec.is_binary();
    let blocks = draws.div_ceil(BLOCK);
    let counts: Vec<usize> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b);
            let mut shocks: Vec<Vec<f64>> = (0..spec.n_players()).map(|i| vec![0.0; spec.n_actions(i)]).collect();
            let mut eq = Vec::new();
            let mut c = 0;
            for _ in b * BLOCK..((b + 1) * BLOCK).min(draws) {
                draw_shocks(spec, binary, &mut rng, &mut shocks);
                table.equilibria(spec, &shocks, &mut eq);
                c += hit(&eq) as usize;
            }
            c
        })
        .collect();
    Ok(counts.into_iter().sum())
}

/// Monte Carlo frequency of an equilibrium-set event.
pub fn mc_bounds(
    spec: &GameSpec,
    theta: &[f64],
    x: usize,
    event: &OutcomeEvent,
    draws: usize,
    kind: McKind,
    seed: u64,
) -> Result<McEstimate> {
    spec.check_theta(theta)?;
    spec.check_bin(x)?;
    if draws < 1000 {
        return Err(Error::Contract(format!("at least 1000 draws are required, got {draws}")));
    }
    if matches!(kind, McKind::H1 | McKind::H2) && !event.is_singleton() {
        return Err(Error::Contract(format!("{kind:?} is defined for singleton events only")));
    }
    let table = PayoffTable::new(spec, theta, x, &PayoffShift::NONE);
    let a = event.members();
    let hits = match kind {
        McKind::L | McKind::H2 => count_hits(spec, &table, draws, seed, |eq| a.iter().any(|y| eq.contains(y)))?,
        McKind::RCap => count_hits(spec, &table, draws, seed, |eq| a.iter().all(|y| eq.contains(y)))?,
        McKind::H1 => count_hits(spec, &table, draws, seed, |eq| eq.len() == 1 && eq[0] == a[0])?,
    };
    Ok(McEstimate::from_hits(hits, draws))
}

/// Simulated `(H1(y), H2(y))` for every outcome in one bin from a single
/// set of `draws` markets, single-threaded.
pub fn mc_unique_and_possible(
    spec: &GameSpec,
    theta: &[f64],
    x: usize,
    draws: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.check_theta(theta)?;
    spec.check_bin(x)?;
    let table = PayoffTable::new(spec, theta, x, &PayoffShift::NONE);
    let binary = spec.is_binary();
    let ny = spec.n_outcomes();
    let (mut h1, mut h2) = (vec![0usize; ny], vec![0usize; ny]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shocks: Vec<Vec<f64>> = (0..spec.n_players()).map(|i| vec![0.0; spec.n_actions(i)]).collect();
    let mut eq = Vec::new();
    for _ in 0..draws {
        draw_shocks(spec, binary, &mut rng, &mut shocks);
        table.equilibria(spec, &shocks, &mut eq);
        for &y in &eq {
            h2[y] += 1;
        }
        if eq.len() == 1 {
            h1[eq[0]] += 1;
        }
    }
    let r = draws as f64;
    Ok((h1.iter().map(|&c| c as f64 / r).collect(), h2.iter().map(|&c| c as f64 / r).collect()))
}

/// Exact choice probabilities of a binary game under a selection rule.
///
/// The probability that the equilibrium set is exactly `S` follows from the
/// intersection probabilities by Möbius inversion; the rule then splits
/// each region across its members. With a grid, node results are averaged.
pub fn exact_ccp(
    spec: &GameSpec,
    theta: &[f64],
    x: usize,
    selection: &SelectionRule,
    grid: Option<&MixingGrid>,
) -> Result<Vec<f64>> {
    let view = BinaryGameView::new(spec)?;
    selection.check(spec)?;
    let ny = spec.n_outcomes();
    if ny > 12 {
        return Err(Error::Complexity { size: ny, limit: 12 });
    }
    let nodes: Vec<(f64, PayoffShift)> = match grid {
        Some(g) => {
            g.check(spec)?;
            (0..g.len()).map(|k| (g.weights()[k], g.shift(k))).collect()
        }
        None => vec![(1.0, PayoffShift::NONE)],
    };
    let full = 1usize << ny;
    let mut ccp = vec![0.0; ny];
    for (w, shift) in nodes {
        // r[T] = Pr(T ⊆ G); r[∅] = 1
        let mut r = vec![0.0; full];
        r[0] = 1.0;
        for t in 1..full {
            let ev = OutcomeEvent::from_sorted_unchecked((0..ny).filter(|b| t >> b & 1 == 1).collect());
            r[t] = view.intersection_jet(theta, &ev, x, &shift, Order::Value)?.value;
        }
        // superset Möbius transform: p[S] = Σ_{T ⊇ S} (-1)^{|T\S|} r[T]
        let mut p = r;
        for b in 0..ny {
            for s in 0..full {
                if s >> b & 1 == 0 {
                    p[s] -= p[s | 1 << b];
                }
            }
        }
        if p[0] > 1e-12 {
            return Err(Error::DegenerateModel(format!(
                "no pure-strategy equilibrium with probability {}",
                p[0]
            )));
        }
        let mut eq = Vec::new();
        for (s, &ps) in p.iter().enumerate().skip(1) {
            if ps <= 0.0 {
                continue;
            }
            eq.clear();
            eq.extend((0..ny).filter(|b| s >> b & 1 == 1));
            for &y in &eq {
                ccp[y] += w * ps * selection.prob(&eq, y)?;
            }
        }
    }
    Ok(ccp)
}
