//! Game primitives: players, actions, covariate bins and affine payoffs.

use crate::error::{Error, Result};

/// A static discrete game whose payoffs are affine in θ.
///
/// Outcomes are indexed in mixed radix with player 0 most significant, so
/// for two binary players `(0,0)=0, (0,1)=1, (1,0)=2, (1,1)=3`.
#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    players: Vec<String>,
    actions: Vec<Vec<String>>,
    bins: Vec<String>,
    params: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    strides: Vec<usize>,
    n_outcomes: usize,
    coef: Vec<f64>,
    offset: Vec<f64>,
}

/// Additive heterogeneity applied to every action other than the first
/// (the outside option) of every player.
///
/// The shift is `constant + theta[k] * scale` when `param = Some((k, scale))`,
/// so a free scale parameter keeps payoffs affine in θ.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PayoffShift {
    pub constant: f64,
    pub param: Option<(usize, f64)>,
}

impl PayoffShift {
    pub const NONE: PayoffShift = PayoffShift { constant: 0.0, param: None };

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.constant + self.param.map_or(0.0, |(k, s)| theta[k] * s)
    }
}

impl GameSpec {
    pub fn n_players(&self) -> usize {
        self.players.len()
    }
    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }
    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }
    pub fn param_dim(&self) -> usize {
        self.params.len()
    }
    pub fn n_actions(&self, player: usize) -> usize {
        self.actions[player].len()
    }
    pub fn players(&self) -> &[String] {
        &self.players
    }
    pub fn action_labels(&self, player: usize) -> &[String] {
        &self.actions[player]
    }
    pub fn bins(&self) -> &[String] {
        &self.bins
    }
    pub fn param_names(&self) -> &[String] {
        &self.params
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// True when every player has exactly two actions.
    pub fn is_binary(&self) -> bool {
        self.actions.iter().all(|a| a.len() == 2)
    }

    /// Replace the parameter box.
    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<GameSpec> {
        check_bounds(self.params.len(), &lower, &upper)?;
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    /// Set one coordinate of the parameter box.
    pub fn set_bound(&mut self, k: usize, lower: f64, upper: f64) -> Result<()> {
        if k >= self.params.len() {
            return Err(Error::Index(format!("parameter {k}")));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::Invalid(format!("bad bounds [{lower}, {upper}] for {}", self.params[k])));
        }
        self.lower[k] = lower;
        self.upper[k] = upper;
        Ok(())
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p == name)
    }

    pub fn bin_index(&self, name: &str) -> Option<usize> {
        self.bins.iter().position(|b| b == name)
    }

    pub fn stride(&self, player: usize) -> usize {
        self.strides[player]
    }

    /// Action of `player` in outcome `y`.
    #[inline]
    pub fn action(&self, y: usize, player: usize) -> usize {
        (y / self.strides[player]) % self.actions[player].len()
    }

    /// Outcome obtained from `y` by switching `player` to action `a`.
    #[inline]
    pub fn deviate(&self, y: usize, player: usize, a: usize) -> usize {
        let cur = self.action(y, player);
        y + a * self.strides[player] - cur * self.strides[player]
    }

    pub fn outcome_index(&self, profile: &[usize]) -> Result<usize> {
        if profile.len() != self.n_players() {
            return Err(Error::Index(format!(
                "profile has {} entries, game has {} players",
                profile.len(),
                self.n_players()
            )));
        }
        let mut y = 0;
        for (i, &a) in profile.iter().enumerate() {
            if a >= self.actions[i].len() {
                return Err(Error::Index(format!("action {a} of player {i}")));
            }
            y += a * self.strides[i];
        }
        Ok(y)
    }

    pub fn outcome_profile(&self, y: usize) -> Vec<usize> {
        (0..self.n_players()).map(|i| self.action(y, i)).collect()
    }

    /// Outcome written with action labels, e.g. `(0,1)`.
    pub fn outcome_label(&self, y: usize) -> String {
        let parts: Vec<&str> =
            (0..self.n_players()).map(|i| self.actions[i][self.action(y, i)].as_str()).collect();
        format!("({})", parts.join(","))
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::Index(format!(
                "theta has length {}, expected {}",
                theta.len(),
                self.param_dim()
            )));
        }
        Ok(())
    }

    pub fn check_outcome(&self, y: usize) -> Result<()> {
        if y >= self.n_outcomes {
            return Err(Error::Index(format!("outcome {y} (|Y| = {})", self.n_outcomes)));
        }
        Ok(())
    }

    pub fn check_bin(&self, x: usize) -> Result<()> {
        if x >= self.bins.len() {
            return Err(Error::Index(format!("bin {x} (|X| = {})", self.bins.len())));
        }
        Ok(())
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(t, (l, u))| *t >= *l && *t <= *u)
    }

    #[inline]
    fn slot(&self, i: usize, y: usize, x: usize) -> usize {
        (x * self.n_outcomes + y) * self.players.len() + i
    }

    /// Coefficient vector `c[i][y][x]`.
    #[inline]
    pub fn coef(&self, i: usize, y: usize, x: usize) -> &[f64] {
        let d = self.params.len();
        let s = self.slot(i, y, x);
        &self.coef[s * d..(s + 1) * d]
    }

    /// Offset `b[i][y][x]`.
    #[inline]
    pub fn offset(&self, i: usize, y: usize, x: usize) -> f64 {
        self.offset[self.slot(i, y, x)]
    }

    /// Payoff with heterogeneity shift, no index checks.
    #[inline]
    pub(crate) fn payoff_unchecked(&self, theta: &[f64], i: usize, y: usize, x: usize, shift: &PayoffShift) -> f64 {
        let c = self.coef(i, y, x);
        let mut v = self.offset(i, y, x);
        for k in 0..c.len() {
            v += c[k] * theta[k];
        }
        if self.action(y, i) > 0 {
            v += shift.value(theta);
        }
        v
    }

    /// Gradient of the shifted payoff in θ, written into `out`.
    #[inline]
    pub(crate) fn payoff_grad(&self, i: usize, y: usize, x: usize, shift: &PayoffShift, out: &mut [f64]) {
        out.copy_from_slice(self.coef(i, y, x));
        if self.action(y, i) > 0 {
            if let Some((k, s)) = shift.param {
                out[k] += s;
            }
        }
    }
}

/// `v_i(y, x; θ) = c[i][y][x]·θ + b[i][y][x]`.
pub fn payoff_index(spec: &GameSpec, theta: &[f64], i: usize, y: usize, x: usize) -> Result<f64> {
    if i >= spec.n_players() {
        return Err(Error::Index(format!("player {i}")));
    }
    spec.check_outcome(y)?;
    spec.check_bin(x)?;
    spec.check_theta(theta)?;
    Ok(spec.payoff_unchecked(theta, i, y, x, &PayoffShift::NONE))
}

fn check_bounds(d: usize, lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.len() != d || upper.len() != d {
        return Err(Error::Invalid(format!("parameter box must have {d} coordinates")));
    }
    for k in 0..d {
        if lower[k].is_nan() || upper[k].is_nan() || lower[k] > upper[k] {
            return Err(Error::Invalid(format!("bad bounds [{}, {}] at coordinate {k}", lower[k], upper[k])));
        }
    }
    Ok(())
}

/// Incremental construction of a [`GameSpec`].
#[derive(Clone, Debug)]
pub struct GameSpecBuilder {
    spec: GameSpec,
    filled: Vec<bool>,
}

impl GameSpecBuilder {
    pub fn new(
        players: Vec<String>,
        actions: Vec<Vec<String>>,
        bins: Vec<String>,
        params: Vec<String>,
    ) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::Invalid("a game needs at least one player".into()));
        }
        if actions.len() != players.len() {
            return Err(Error::Invalid(format!(
                "{} players but {} action lists",
                players.len(),
                actions.len()
            )));
        }
        for (p, a) in players.iter().zip(&actions) {
            if a.len() < 2 {
                return Err(Error::Invalid(format!("player {p} needs at least two actions")));
            }
            let mut seen = a.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != a.len() {
                return Err(Error::Invalid(format!("duplicate action label for player {p}")));
            }
        }
        if bins.is_empty() {
            return Err(Error::Invalid("at least one covariate bin is required".into()));
        }
        if params.is_empty() {
            return Err(Error::Invalid("at least one parameter is required".into()));
        }
        let n_players = players.len();
        let mut strides = vec![1; n_players];
        for i in (0..n_players.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * actions[i + 1].len();
        }
        let n_outcomes = strides[0] * actions[0].len();
        let slots = bins.len() * n_outcomes * n_players;
        let d = params.len();
        let spec = GameSpec {
            players,
            actions,
            bins,
            lower: vec![f64::NEG_INFINITY; d],
            upper: vec![f64::INFINITY; d],
            params,
            strides,
            n_outcomes,
            coef: vec![0.0; slots * d],
            offset: vec![0.0; slots],
        };
        Ok(GameSpecBuilder { spec, filled: vec![false; slots] })
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn bounds(&mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<&mut Self> {
        check_bounds(self.spec.param_dim(), &lower, &upper)?;
        self.spec.lower = lower;
        self.spec.upper = upper;
        Ok(self)
    }

    /// Set `c[i][y][x]` and `b[i][y][x]`; each entry may be set once.
    pub fn set_payoff(&mut self, i: usize, y: usize, x: usize, c: &[f64], b: f64) -> Result<&mut Self> {
        let spec = &mut self.spec;
        if i >= spec.n_players() {
            return Err(Error::Index(format!("player {i}")));
        }
        spec.check_outcome(y)?;
        spec.check_bin(x)?;
        let d = spec.param_dim();
        if c.len() != d {
            return Err(Error::Invalid(format!("coefficient row has {} entries, expected {d}", c.len())));
        }
        if !b.is_finite() || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("payoff coefficients must be finite".into()));
        }
        let s = spec.slot(i, y, x);
        if self.filled[s] {
            return Err(Error::Invalid(format!(
                "duplicate payoff entry for player {}, outcome {}, bin {}",
                spec.players[i],
                spec.outcome_label(y),
                spec.bins[x]
            )));
        }
        self.filled[s] = true;
        spec.coef[s * d..(s + 1) * d].copy_from_slice(c);
        spec.offset[s] = b;
        Ok(self)
    }

    pub fn is_set(&self, i: usize, y: usize, x: usize) -> bool {
        self.filled[self.spec.slot(i, y, x)]
    }

    pub fn build(self) -> Result<GameSpec> {
        let spec = self.spec;
        for x in 0..spec.n_bins() {
            for y in 0..spec.n_outcomes() {
                for i in 0..spec.n_players() {
                    if !self.filled[spec.slot(i, y, x)] {
                        return Err(Error::Invalid(format!(
                            "missing payoff entry for player {}, outcome {}, bin {}",
                            spec.players[i],
                            spec.outcome_label(y),
                            spec.bins[x]
                        )));
                    }
                }
            }
        }
        Ok(spec)
    }
}

/// Entry game with `n_players` firms, actions `0` (stay out) and `1` (enter),
/// and `θ = (β_1..β_I, Δ_1..Δ_I)`. The entry payoff of firm `i` in bin `x` is
/// `β_i + Δ_i · (number of rival entrants) + bin_shifts[x]`; staying out pays 0.
pub fn entry_game(n_players: usize, bin_shifts: &[f64]) -> Result<GameSpec> {
    if n_players == 0 || bin_shifts.is_empty() {
        return Err(Error::Invalid("entry game needs players and bins".into()));
    }
    let players = (1..=n_players).map(|i| format!("firm{i}")).collect();
    let actions = vec![vec!["0".to_string(), "1".to_string()]; n_players];
    let bins = (0..bin_shifts.len()).map(|k| format!("x{k}")).collect();
    let params = (1..=n_players)
        .map(|i| format!("beta{i}"))
        .chain((1..=n_players).map(|i| format!("delta{i}")))
        .collect();
    let mut b = GameSpecBuilder::new(players, actions, bins, params)?;
    let d = 2 * n_players;
    let n_outcomes = 1usize << n_players;
    for (x, &shift) in bin_shifts.iter().enumerate() {
        for y in 0..n_outcomes {
            for i in 0..n_players {
                let mut c = vec![0.0; d];
                let mut off = 0.0;
                if b.spec().action(y, i) == 1 {
                    c[i] = 1.0;
                    c[n_players + i] =
                        (0..n_players).filter(|&j| j != i && b.spec().action(y, j) == 1).count() as f64;
                    off = shift;
                }
                b.set_payoff(i, y, x, &c, off)?;
            }
        }
    }
    b.bounds(vec![-5.0; d], vec![5.0; d])?;
    b.build()
}

/// The two-player, single-bin entry game used throughout the tests.
pub fn entry2() -> GameSpec {
    entry_game(2, &[0.0]).expect("static entry game is valid")
}

/// A non-empty set of outcomes, stored as sorted outcome indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomeEvent {
    members: Vec<usize>,
}

impl OutcomeEvent {
    pub fn new(spec: &GameSpec, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut m: Vec<usize> = members.into_iter().collect();
        if m.is_empty() {
            return Err(Error::Invalid("outcome events must be non-empty".into()));
        }
        for &y in &m {
            spec.check_outcome(y)?;
        }
        m.sort_unstable();
        let before = m.len();
        m.dedup();
        if m.len() != before {
            return Err(Error::Invalid("duplicate outcome in event".into()));
        }
        Ok(OutcomeEvent { members: m })
    }

    pub fn singleton(spec: &GameSpec, y: usize) -> Result<Self> {
        Self::new(spec, [y])
    }

    pub fn from_profiles(spec: &GameSpec, profiles: &[&[usize]]) -> Result<Self> {
        let ys = profiles.iter().map(|p| spec.outcome_index(p)).collect::<Result<Vec<_>>>()?;
        Self::new(spec, ys)
    }

    /// Event from a bitmask over outcome indices.
    pub fn from_mask(spec: &GameSpec, mask: u64) -> Result<Self> {
        Self::new(spec, (0..64).filter(|b| mask >> b & 1 == 1))
    }

    pub(crate) fn from_sorted_unchecked(members: Vec<usize>) -> Self {
        OutcomeEvent { members }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }

    pub fn contains(&self, y: usize) -> bool {
        self.members.binary_search(&y).is_ok()
    }

    pub fn label(&self, spec: &GameSpec) -> String {
        let parts: Vec<String> = self.members.iter().map(|&y| spec.outcome_label(y)).collect();
        format!("{{{}}}", parts.join(","))
    }
}
