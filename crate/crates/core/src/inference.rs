//! Choice-probability estimation, simultaneous confidence bands, and
//! confidence sets for the identified set.

use crate::error::{Error, Result};
use crate::game::{GameSpec, OutcomeEvent};
use crate::identification::{self, InequalityFamily, PhiInput, SetQuery, Sense, SolveReport, SolverSettings};
use crate::oracle::MarketDataset;

/// Conditional choice probabilities `φ(y|x)` with per-bin sample counts.
///
/// Bins without observations carry no probabilities. Population tables
/// (known φ, no sample) have every count at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CcpTable {
    n_outcomes: usize,
    probs: Vec<Option<Vec<f64>>>,
    counts: Vec<u64>,
}

impl CcpTable {
    pub fn new(spec: &GameSpec, probs: Vec<Option<Vec<f64>>>, counts: Vec<u64>) -> Result<Self> {
        if probs.len() != spec.n_bins() || counts.len() != spec.n_bins() {
            return Err(Error::Invalid(format!("choice probabilities must cover {} bins", spec.n_bins())));
        }
        for (x, p) in probs.iter().enumerate() {
            if let Some(p) = p {
                if p.len() != spec.n_outcomes() {
                    return Err(Error::Invalid(format!("bin {x}: expected {} probabilities", spec.n_outcomes())));
                }
                if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::Invalid(format!("bin {x}: probabilities must lie in [0,1]")));
                }
                let s: f64 = p.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(Error::Invalid(format!("bin {x}: probabilities sum to {s}")));
                }
            }
        }
        Ok(CcpTable { n_outcomes: spec.n_outcomes(), probs, counts })
    }

    /// Known probabilities for every bin, no sample counts. Rows are
    /// renormalized when they miss one by at most `1e-9`, which absorbs
    /// rounding in published values.
    pub fn population(spec: &GameSpec, probs: Vec<Vec<f64>>) -> Result<Self> {
        let n = probs.len();
        let probs = probs
            .into_iter()
            .map(|p| {
                let s: f64 = p.iter().sum();
                if (s - 1.0).abs() <= 1e-9 && s > 0.0 {
                    Some(p.iter().map(|v| v / s).collect())
                } else {
                    Some(p)
                }
            })
            .collect();
        CcpTable::new(spec, probs, vec![0; n])
    }

    pub fn n_bins(&self) -> usize {
        self.probs.len()
    }
    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }
    pub fn bin(&self, x: usize) -> Option<&[f64]> {
        self.probs.get(x).and_then(|p| p.as_deref())
    }
    pub fn count(&self, x: usize) -> u64 {
        self.counts[x]
    }
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bins with no probabilities.
    pub fn dropped_bins(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&x| self.probs[x].is_none()).collect()
    }

    pub fn prob(&self, y: usize, x: usize) -> Result<f64> {
        let p = self
            .probs
            .get(x)
            .ok_or_else(|| Error::Index(format!("bin {x}")))?
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("bin {x} has no observations")))?;
        p.get(y).copied().ok_or_else(|| Error::Index(format!("outcome {y}")))
    }

    /// `φ(A|x) = Σ_{y∈A} φ(y|x)`.
    pub fn event_prob(&self, event: &OutcomeEvent, x: usize) -> Result<f64> {
        event.members().iter().map(|&y| self.prob(y, x)).sum()
    }
}

/// Frequency estimator `φ̂(y|x) = count(y, x) / n^x`. Bins without markets
/// are dropped and logged.
pub fn frequency_ccp(spec: &GameSpec, data: &MarketDataset) -> Result<CcpTable> {
    if data.n_bins != spec.n_bins() || data.n_outcomes != spec.n_outcomes() {
        return Err(Error::Contract("dataset does not match the game".into()));
    }
    let ny = spec.n_outcomes();
    let mut counts = vec![0u64; spec.n_bins() * ny];
    let mut nx = vec![0u64; spec.n_bins()];
    for r in &data.rows {
        spec.check_bin(r.bin)?;
        spec.check_outcome(r.outcome)?;
        counts[r.bin * ny + r.outcome] += 1;
        nx[r.bin] += 1;
    }
    let probs: Vec<Option<Vec<f64>>> = (0..spec.n_bins())
        .map(|x| {
            (nx[x] > 0).then(|| {
                let mut p: Vec<f64> = (0..ny).map(|y| counts[x * ny + y] as f64 / nx[x] as f64).collect();
                // make the row sum exactly one
                let s: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= s);
                p
            })
        })
        .collect();
    let dropped: Vec<&str> = (0..spec.n_bins()).filter(|&x| nx[x] == 0).map(|x| spec.bins()[x].as_str()).collect();
    if !dropped.is_empty() {
        log::warn!("bins without observations dropped: {}", dropped.join(", "));
    }
    CcpTable::new(spec, probs, nx)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

fn poly(c: &[f64; 8], r: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * r + v)
}

/// Standard normal quantile `Φ⁻¹(p)` by Wichura's AS 241 (PPND16), accurate
/// to about 1e-16 relative.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let v = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -v
    } else {
        v
    }
}

/// Upper quantile `z(τ) = Φ⁻¹(1 - τ)`.
pub fn upper_quantile(tau: f64) -> f64 {
    -normal_quantile(tau)
}

/// Šidák-corrected level `1 - (1 - α)^{1/bins}`.
pub fn sidak_beta(alpha: f64, bins: usize) -> f64 {
    -((1.0 - alpha).ln() / bins as f64).exp_m1()
}

/// Simultaneous band for φ.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceBand {
    pub alpha: f64,
    pub beta: f64,
    pub lower: Vec<Option<Vec<f64>>>,
    pub upper: Vec<Option<Vec<f64>>>,
    pub estimate: CcpTable,
}

impl ConfidenceBand {
    /// The band `[φ, φ]`, i.e. no sampling uncertainty.
    pub fn degenerate(ccp: &CcpTable) -> Self {
        let probs: Vec<Option<Vec<f64>>> = (0..ccp.n_bins()).map(|x| ccp.bin(x).map(|p| p.to_vec())).collect();
        ConfidenceBand { alpha: 0.0, beta: 0.0, lower: probs.clone(), upper: probs, estimate: ccp.clone() }
    }

    /// Bins covered by the band.
    pub fn bins(&self) -> Vec<usize> {
        (0..self.lower.len()).filter(|&x| self.lower[x].is_some()).collect()
    }

    /// True when every covered bin of `phi` lies inside the band.
    pub fn contains(&self, phi: &CcpTable) -> bool {
        self.bins().into_iter().all(|x| {
            let (l, u) = (self.lower[x].as_ref().unwrap(), self.upper[x].as_ref().unwrap());
            match phi.bin(x) {
                Some(p) => p.iter().zip(l.iter().zip(u)).all(|(v, (a, b))| *v >= *a && *v <= *b),
                None => false,
            }
        })
    }
}

/// Fitzpatrick-Scott simultaneous band with half-width
/// `z(β/4) / (2 √n^x)`, clipped to `[0, 1]`.
///
/// `β` is Šidák-corrected over the bins that have observations; bins
/// without observations are left out of the band.
pub fn fs_band(ccp: &CcpTable, alpha: f64) -> Result<ConfidenceBand> {
    if !(alpha > 0.0 && alpha < 0.3) {
        return Err(Error::Invalid(format!("alpha must lie in (0, 0.3), got {alpha}")));
    }
    let bins: Vec<usize> = (0..ccp.n_bins()).filter(|&x| ccp.count(x) > 0 && ccp.bin(x).is_some()).collect();
    if bins.is_empty() {
        return Err(Error::Invalid("no bins with observations".into()));
    }
    let beta = sidak_beta(alpha, bins.len());
    if beta > 0.05 + 1e-12 {
        log::warn!("corrected level {beta:.4} exceeds 0.05; the band's coverage guarantee is weaker");
    }
    let z = upper_quantile(beta / 4.0);
    let mut lower = vec![None; ccp.n_bins()];
    let mut upper = vec![None; ccp.n_bins()];
    for x in bins {
        let h = z / (2.0 * (ccp.count(x) as f64).sqrt());
        let p = ccp.bin(x).unwrap();
        lower[x] = Some(p.iter().map(|v| (v - h).max(0.0)).collect());
        upper[x] = Some(p.iter().map(|v| (v + h).min(1.0)).collect());
    }
    Ok(ConfidenceBand { alpha, beta, lower, upper, estimate: ccp.clone() })
}

/// Whether some φ in the band (and latent mixing probabilities, when the
/// family mixes) satisfies every inequality at θ.
pub fn confidence_membership(
    spec: &GameSpec,
    theta: &[f64],
    band: &ConfidenceBand,
    family: &InequalityFamily,
    settings: &SolverSettings,
) -> Result<bool> {
    let query = SetQuery::new(spec, PhiInput::Band(band), family)?;
    let t = query.fixed_theta_value(theta, settings)?;
    Ok(t <= settings.feas_tol)
}

/// Endpoint of the confidence set's projection on direction `p`.
pub fn confidence_project(
    spec: &GameSpec,
    band: &ConfidenceBand,
    family: &InequalityFamily,
    direction: &[f64],
    sense: Sense,
    settings: &SolverSettings,
) -> Result<(f64, SolveReport)> {
    let query = SetQuery::new(spec, PhiInput::Band(band), family)?;
    identification::project_query(&query, direction, sense, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::entry2;
    use crate::oracle::{MarketDataset, MarketRow};

    #[test]
    fn quantile_fixture_values() {
        assert!((upper_quantile(0.0125) - 2.241_402_727_604_945_4).abs() < 1e-13);
        assert!((upper_quantile(0.025) - 1.959_963_984_540_054_2).abs() < 1e-13);
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!((normal_quantile(1e-10) + 6.361_340_902_404_056_2).abs() < 1e-12);
        assert!((normal_quantile(1e-300) + 37.047_096_299_361_2).abs() < 1e-9);
    }

    #[test]
    fn frequency_counts() {
        let g = crate::game::entry_game(2, &[0.0, 1.0, 2.0]).unwrap();
        let rows = (0..4)
            .map(|m| MarketRow { market_id: m, bin: 0, outcome: 0, omega: None })
            .chain([MarketRow { market_id: 9, bin: 2, outcome: 3, omega: None }])
            .collect();
        let data = MarketDataset { n_bins: 3, n_outcomes: 4, rows };
        let c = frequency_ccp(&g, &data).unwrap();
        assert_eq!(c.bin(0).unwrap(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.count(0), 4);
        assert_eq!(c.dropped_bins(), vec![1]);
        assert_eq!(c.total(), 5);
        assert!(c.prob(0, 1).is_err());
    }

    #[test]
    fn band_widths() {
        let g = entry2();
        let p = vec![0.25, 0.3, 0.3, 0.15];
        let c = CcpTable::new(&g, vec![Some(p.clone())], vec![2000]).unwrap();
        let b = fs_band(&c, 0.05).unwrap();
        let h = b.upper[0].as_ref().unwrap()[0] - 0.25;
        assert!((h - 0.025_06).abs() < 1e-5);
        assert!((sidak_beta(0.05, 40) - 0.001_281_5).abs() < 1e-7);
        let one = CcpTable::new(&g, vec![Some(vec![1.0, 0.0, 0.0, 0.0])], vec![10]).unwrap();
        let b1 = fs_band(&one, 0.05).unwrap();
        assert_eq!(b1.upper[0].as_ref().unwrap()[0], 1.0);
        assert_eq!(b1.lower[0].as_ref().unwrap()[1], 0.0);
        assert!(fs_band(&c, 0.3).is_err());
        assert!(b.contains(&c));
    }
}
