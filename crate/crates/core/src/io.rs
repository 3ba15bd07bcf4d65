//! File formats: game specifications, market data, choice probabilities,
//! bands, result tables and run manifests.
//!
//! A game specification is TOML with five sections:
//!
//! ```toml
//! [players]
//! names = ["firm1", "firm2"]
//!
//! [actions]
//! firm1 = ["out", "in"]
//! firm2 = ["out", "in"]
//!
//! [bins]
//! labels = ["all"]
//!
//! [coeff]
//! params = ["beta1", "beta2", "delta1", "delta2"]
//!
//! [[coeff.entry]]
//! player = "firm1"
//! outcome = ["in", "in"]
//! bin = "*"
//! c = { beta1 = 1.0, delta1 = 1.0 }
//! b = 0.0
//!
//! [bounds]
//! delta1 = [-5.0, 0.0]
//! ```
//!
//! Each `coeff.entry` sets `v_i(y, x; θ) = c·θ + b` for one player. Any
//! component of `outcome` and the `bin` may be `"*"`, which expands to all
//! labels. `c` is either a table keyed by parameter name (missing names are
//! zero) or a dense array of length `d`. Every (player, outcome, bin) must
//! be covered exactly once. Parameters without a `[bounds]` entry are
//! unbounded; `inf` and `-inf` are valid TOML floats.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::game::{GameSpec, GameSpecBuilder};
use crate::inference::{CcpTable, ConfidenceBand};
use crate::oracle::{MarketDataset, MarketRow};

/// Largest deviation from one at which a choice-probability row read from
/// a file is renormalized instead of rejected.
pub const CCP_SUM_TOL: f64 = 1e-6;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    players: PlayersSection,
    actions: BTreeMap<String, Vec<String>>,
    bins: BinsSection,
    coeff: CoeffSection,
    #[serde(default)]
    bounds: BTreeMap<String, [f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlayersSection {
    names: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BinsSection {
    labels: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffSection {
    params: Vec<String>,
    #[serde(default)]
    entry: Vec<CoeffEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffEntry {
    player: String,
    outcome: Vec<String>,
    #[serde(default = "wildcard")]
    bin: String,
    #[serde(default)]
    c: Coefficients,
    #[serde(default)]
    b: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Coefficients {
    Dense(Vec<f64>),
    Sparse(BTreeMap<String, f64>),
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients::Sparse(BTreeMap::new())
    }
}

fn wildcard() -> String {
    "*".into()
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

/// Read and validate a game specification file.
pub fn load_game_spec(path: impl AsRef<Path>) -> Result<GameSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_game_spec(&text).map_err(|e| match e {
        Error::Schema { path: p, message } => schema(format!("{}: {p}", path.display()), message),
        other => other,
    })
}

/// Parse a game specification from TOML text.
pub fn parse_game_spec(text: &str) -> Result<GameSpec> {
    let file: SpecFile = toml::from_str(text).map_err(|e| {
        let at = e
            .span()
            .map(|s| {
                let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            })
            .unwrap_or_else(|| "spec".into());
        schema(at, e.message().to_string())
    })?;

    let players = file.players.names;
    let mut actions = Vec::with_capacity(players.len());
    for p in &players {
        let a = file
            .actions
            .get(p)
            .ok_or_else(|| schema(format!("actions.{p}"), "missing action list for declared player"))?;
        if a.len() < 2 {
            return Err(schema(format!("actions.{p}"), "a player needs at least two actions"));
        }
        actions.push(a.clone());
    }
    if let Some(extra) = file.actions.keys().find(|k| !players.contains(k)) {
        return Err(schema(format!("actions.{extra}"), "actions given for an undeclared player"));
    }
    let params = file.coeff.params;
    let bins = file.bins.labels;
    let mut builder = GameSpecBuilder::new(players.clone(), actions.clone(), bins.clone(), params.clone())
        .map_err(|e| schema("spec", e.to_string()))?;

    let d = params.len();
    let n_outcomes = builder.spec().n_outcomes();
    for (n, entry) in file.coeff.entry.iter().enumerate() {
        let at = |field: &str| format!("coeff.entry[{n}].{field}");
        let i = players
            .iter()
            .position(|p| *p == entry.player)
            .ok_or_else(|| schema(at("player"), format!("unknown player {:?}", entry.player)))?;
        if entry.outcome.len() != players.len() {
            return Err(schema(
                at("outcome"),
                format!("outcome has {} components, the game has {} players", entry.outcome.len(), players.len()),
            ));
        }
        // allowed action indices per component
        let mut allowed = Vec::with_capacity(players.len());
        for (j, label) in entry.outcome.iter().enumerate() {
            if label == "*" {
                allowed.push(None);
            } else {
                let a = actions[j].iter().position(|l| l == label).ok_or_else(|| {
                    schema(at(&format!("outcome[{j}]")), format!("unknown action {label:?} for player {}", players[j]))
                })?;
                allowed.push(Some(a));
            }
        }
        let bin_set: Vec<usize> = if entry.bin == "*" {
            (0..bins.len()).collect()
        } else {
            vec![bins
                .iter()
                .position(|b| *b == entry.bin)
                .ok_or_else(|| schema(at("bin"), format!("unknown bin {:?}", entry.bin)))?]
        };
        let c = match &entry.c {
            Coefficients::Dense(v) => {
                if v.len() != d {
                    return Err(schema(at("c"), format!("dense row has {} entries, the game has d = {d}", v.len())));
                }
                v.clone()
            }
            Coefficients::Sparse(m) => {
                let mut v = vec![0.0; d];
                for (name, value) in m {
                    let k = params
                        .iter()
                        .position(|p| p == name)
                        .ok_or_else(|| schema(at(&format!("c.{name}")), "unknown parameter"))?;
                    v[k] = *value;
                }
                v
            }
        };
        for y in 0..n_outcomes {
            let matches = allowed
                .iter()
                .enumerate()
                .all(|(j, a)| a.is_none_or(|a| builder.spec().action(y, j) == a));
            if !matches {
                continue;
            }
            for &x in &bin_set {
                builder.set_payoff(i, y, x, &c, entry.b).map_err(|e| schema(format!("coeff.entry[{n}]"), e.to_string()))?;
            }
        }
    }

    let mut lower = vec![f64::NEG_INFINITY; d];
    let mut upper = vec![f64::INFINITY; d];
    for (name, [lo, hi]) in &file.bounds {
        let k = params
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| schema(format!("bounds.{name}"), "unknown parameter"))?;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(schema(format!("bounds.{name}"), format!("invalid interval [{lo}, {hi}]")));
        }
        lower[k] = *lo;
        upper[k] = *hi;
    }
    builder.bounds(lower, upper).map_err(|e| schema("bounds", e.to_string()))?;
    builder.build().map_err(|e| schema("coeff", e.to_string()))
}

/// Render a specification in the file format; parsing the result gives
/// back an identical game.
pub fn format_game_spec(spec: &GameSpec) -> String {
    let q = |s: &str| format!("{s:?}");
    let list = |v: &[String]| v.iter().map(|s| q(s)).collect::<Vec<_>>().join(", ");
    let num = |v: f64| {
        if v == f64::INFINITY {
            "inf".to_string()
        } else if v == f64::NEG_INFINITY {
            "-inf".to_string()
        } else {
            format!("{v:?}")
        }
    };
    let mut out = String::new();
    out.push_str(&format!("[players]\nnames = [{}]\n\n[actions]\n", list(spec.players())));
    for (i, p) in spec.players().iter().enumerate() {
        out.push_str(&format!("{} = [{}]\n", q(p), list(spec.action_labels(i))));
    }
    out.push_str(&format!("\n[bins]\nlabels = [{}]\n\n[coeff]\nparams = [{}]\n", list(spec.bins()), list(spec.param_names())));
    for x in 0..spec.n_bins() {
        for y in 0..spec.n_outcomes() {
            for i in 0..spec.n_players() {
                let outcome: Vec<String> = (0..spec.n_players())
                    .map(|j| q(&spec.action_labels(j)[spec.action(y, j)]))
                    .collect();
                let c: Vec<String> = spec.coef(i, y, x).iter().map(|&v| num(v)).collect();
                out.push_str(&format!(
                    "\n[[coeff.entry]]\nplayer = {}\noutcome = [{}]\nbin = {}\nc = [{}]\nb = {}\n",
                    q(&spec.players()[i]),
                    outcome.join(", "),
                    q(&spec.bins()[x]),
                    c.join(", "),
                    num(spec.offset(i, y, x))
                ));
            }
        }
    }
    out.push_str("\n[bounds]\n");
    for (k, name) in spec.param_names().iter().enumerate() {
        out.push_str(&format!("{} = [{}, {}]\n", q(name), num(spec.lower()[k]), num(spec.upper()[k])));
    }
    out
}

fn outcome_header(spec: &GameSpec) -> Vec<String> {
    (1..=spec.n_players()).map(|i| format!("y_{i}")).collect()
}

fn parse_outcome(spec: &GameSpec, fields: &[&str], line: u64) -> Result<usize> {
    let mut profile = Vec::with_capacity(fields.len());
    for (i, f) in fields.iter().enumerate() {
        let a = spec
            .action_labels(i)
            .iter()
            .position(|l| l == f)
            .ok_or_else(|| schema(format!("line {line}, y_{}", i + 1), format!("unknown action {f:?}")))?;
        profile.push(a);
    }
    spec.outcome_index(&profile)
}

fn parse_bin(spec: &GameSpec, field: &str, line: u64) -> Result<usize> {
    spec.bin_index(field)
        .ok_or_else(|| schema(format!("line {line}, x_bin"), format!("unknown bin {field:?}")))
}

fn outcome_fields(spec: &GameSpec, y: usize) -> Vec<String> {
    (0..spec.n_players()).map(|i| spec.action_labels(i)[spec.action(y, i)].clone()).collect()
}

fn check_header(found: &csv::StringRecord, expected: &[String], what: &str) -> Result<()> {
    let got: Vec<&str> = found.iter().collect();
    if got.len() < expected.len() || got[..expected.len()].iter().zip(expected).any(|(a, b)| a != b) {
        return Err(schema(
            format!("{what} header"),
            format!("expected columns {} but found {}", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Write market data as `market_id,x_bin,y_1,...,y_I[,omega]`, with bins
/// and actions written as labels. The `omega` column is present when any
/// row carries a shock.
pub fn write_dataset<W: std::io::Write>(spec: &GameSpec, data: &MarketDataset, out: W) -> Result<()> {
    let with_omega = data.rows.iter().any(|r| r.omega.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["market_id".to_string(), "x_bin".to_string()];
    header.extend(outcome_header(spec));
    if with_omega {
        header.push("omega".into());
    }
    w.write_record(&header)?;
    for r in &data.rows {
        let mut rec = vec![r.market_id.to_string(), spec.bins()[r.bin].clone()];
        rec.extend(outcome_fields(spec, r.outcome));
        if with_omega {
            rec.push(r.omega.map(|v| format!("{v:?}")).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read market data written by [`write_dataset`] or prepared by hand.
pub fn read_dataset<R: std::io::Read>(spec: &GameSpec, input: R) -> Result<MarketDataset> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut expected = vec!["market_id".to_string(), "x_bin".to_string()];
    expected.extend(outcome_header(spec));
    let header = r.headers()?.clone();
    check_header(&header, &expected, "data")?;
    let with_omega = match header.len() - expected.len() {
        0 => false,
        1 if &header[expected.len()] == "omega" => true,
        _ => return Err(schema("data header", format!("unexpected columns in {}", header.iter().collect::<Vec<_>>().join(",")))),
    };
    let mut data = MarketDataset::empty(spec);
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let market_id = rec[0]
            .parse()
            .map_err(|_| schema(format!("line {line}, market_id"), format!("not an integer: {:?}", &rec[0])))?;
        let bin = parse_bin(spec, &rec[1], line)?;
        let fields: Vec<&str> = (2..2 + spec.n_players()).map(|k| &rec[k]).collect();
        let outcome = parse_outcome(spec, &fields, line)?;
        let omega = if with_omega && !rec[expected.len()].is_empty() {
            Some(
                rec[expected.len()]
                    .parse()
                    .map_err(|_| schema(format!("line {line}, omega"), "not a number"))?,
            )
        } else {
            None
        };
        data.rows.push(MarketRow { market_id, bin, outcome, omega });
    }
    Ok(data)
}

/// Write choice probabilities as `x_bin,y_1,...,y_I,phi,n_x`. Dropped bins
/// are omitted.
pub fn write_ccp<W: std::io::Write>(spec: &GameSpec, ccp: &CcpTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x_bin".to_string()];
    header.extend(outcome_header(spec));
    header.extend(["phi".to_string(), "n_x".to_string()]);
    w.write_record(&header)?;
    for x in 0..spec.n_bins() {
        let Some(p) = ccp.bin(x) else { continue };
        for (y, v) in p.iter().enumerate() {
            let mut rec = vec![spec.bins()[x].clone()];
            rec.extend(outcome_fields(spec, y));
            rec.push(format!("{v:?}"));
            rec.push(ccp.count(x).to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read choice probabilities. Outcomes missing from a listed bin have
/// probability zero; bins with no rows are dropped. The `n_x` column is
/// optional. Rows summing to within [`CCP_SUM_TOL`] of one are
/// renormalized.
pub fn read_ccp<R: std::io::Read>(spec: &GameSpec, input: R) -> Result<CcpTable> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut expected = vec!["x_bin".to_string()];
    expected.extend(outcome_header(spec));
    expected.push("phi".into());
    let header = r.headers()?.clone();
    check_header(&header, &expected, "ccp")?;
    let with_n = match header.len() - expected.len() {
        0 => false,
        1 if &header[expected.len()] == "n_x" => true,
        _ => return Err(schema("ccp header", "only an optional n_x column may follow phi")),
    };
    let ny = spec.n_outcomes();
    let mut probs: Vec<Option<Vec<f64>>> = vec![None; spec.n_bins()];
    let mut seen = vec![false; spec.n_bins() * ny];
    let mut counts = vec![None::<u64>; spec.n_bins()];
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let x = parse_bin(spec, &rec[0], line)?;
        let fields: Vec<&str> = (1..1 + spec.n_players()).map(|k| &rec[k]).collect();
        let y = parse_outcome(spec, &fields, line)?;
        let v: f64 = rec[1 + spec.n_players()]
            .parse()
            .map_err(|_| schema(format!("line {line}, phi"), "not a number"))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(schema(format!("line {line}, phi"), format!("{v} is not a probability")));
        }
        if std::mem::replace(&mut seen[x * ny + y], true) {
            return Err(schema(format!("line {line}"), "duplicate (bin, outcome) row"));
        }
        probs[x].get_or_insert_with(|| vec![0.0; ny])[y] = v;
        if with_n {
            let n: u64 = rec[expected.len()]
                .parse()
                .map_err(|_| schema(format!("line {line}, n_x"), "not a non-negative integer"))?;
            if counts[x].is_some_and(|c| c != n) {
                return Err(schema(format!("line {line}, n_x"), "conflicting counts within a bin"));
            }
            counts[x] = Some(n);
        }
    }
    for (x, p) in probs.iter_mut().enumerate() {
        if let Some(p) = p {
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > CCP_SUM_TOL {
                return Err(schema(format!("bin {}", spec.bins()[x]), format!("probabilities sum to {s}")));
            }
            p.iter_mut().for_each(|v| *v /= s);
        }
    }
    CcpTable::new(spec, probs, counts.into_iter().map(|c| c.unwrap_or(0)).collect())
}

/// Write a band as `x_bin,y_1,...,y_I,estimate,lower,upper`.
pub fn write_band<W: std::io::Write>(spec: &GameSpec, band: &ConfidenceBand, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x_bin".to_string()];
    header.extend(outcome_header(spec));
    header.extend(["estimate", "lower", "upper"].map(String::from));
    w.write_record(&header)?;
    for x in band.bins() {
        let (est, lo, hi) = (
            band.estimate.bin(x).unwrap(),
            band.lower[x].as_ref().unwrap(),
            band.upper[x].as_ref().unwrap(),
        );
        for y in 0..spec.n_outcomes() {
            let mut rec = vec![spec.bins()[x].clone()];
            rec.extend(outcome_fields(spec, y));
            rec.extend([est[y], lo[y], hi[y]].map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub quantity: String,
    pub coordinate: String,
    pub lower: f64,
    pub upper: f64,
    pub status: String,
    pub seed: u64,
}

/// Write `quantity,coordinate,lower,upper,status,seed`.
pub fn write_results<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quantity", "coordinate", "lower", "upper", "status", "seed"])?;
    for r in rows {
        w.write_record([
            r.quantity.clone(),
            r.coordinate.clone(),
            format!("{:?}", r.lower),
            format!("{:?}", r.upper),
            r.status.clone(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Record of one run. Contains no timestamps or host details, so identical
/// inputs give byte-identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the canonical JSON rendering of `config`.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&fs::read(path)?) })
    }
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        // serde_json maps are sorted by key, so this rendering is canonical
        let canonical = serde_json::to_string(&config).expect("JSON values always serialize");
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: sha256_hex(canonical.as_bytes()),
            config,
            seeds,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(e.to_string()))?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::entry2;

    const ENTRY2: &str = include_str!("../examples/entry2.spec");

    #[test]
    fn bundled_spec_is_the_entry_game() {
        let spec = parse_game_spec(ENTRY2).unwrap();
        let reference = entry2();
        assert_eq!(spec.param_dim(), 4);
        for x in 0..1 {
            for y in 0..4 {
                for i in 0..2 {
                    assert_eq!(spec.coef(i, y, x), reference.coef(i, y, x));
                    assert_eq!(spec.offset(i, y, x), reference.offset(i, y, x));
                }
            }
        }
        assert_eq!(spec.lower(), reference.lower());
    }

    #[test]
    fn format_round_trips() {
        let spec = parse_game_spec(ENTRY2).unwrap();
        let again = parse_game_spec(&format_game_spec(&spec)).unwrap();
        assert_eq!(format_game_spec(&spec), format_game_spec(&again));
    }

    #[test]
    fn single_action_player_is_rejected() {
        let text = ENTRY2.replacen(r#"firm1 = ["0", "1"]"#, r#"firm1 = ["0"]"#, 1);
        let err = parse_game_spec(&text).unwrap_err().to_string();
        assert!(err.contains("actions.firm1"), "{err}");
    }

    #[test]
    fn missing_entry_names_the_slot() {
        let text = ENTRY2.replacen(r#"outcome = ["1", "1"]"#, r#"outcome = ["1", "0"]"#, 1);
        let err = parse_game_spec(&text).unwrap_err().to_string();
        assert!(err.contains("duplicate") || err.contains("missing"), "{err}");
        let cut = ENTRY2.rfind("[[coeff.entry]]").unwrap();
        let tail = &ENTRY2[cut..];
        let end = tail.find("\n\n").map_or(ENTRY2.len(), |e| cut + e);
        let text = format!("{}{}", &ENTRY2[..cut], &ENTRY2[end..]);
        let err = parse_game_spec(&text).unwrap_err().to_string();
        assert!(err.contains("missing payoff entry for player"), "{err}");
    }

    #[test]
    fn toml_errors_carry_a_line() {
        let err = parse_game_spec("[players]\nnames = [1, 2]\n").unwrap_err().to_string();
        assert!(err.starts_with("line 2"), "{err}");
    }

    #[test]
    fn dense_row_with_wrong_length() {
        let text = ENTRY2.replacen("c = { beta1 = 1.0 }", "c = [1.0, 0.0]", 1);
        let err = parse_game_spec(&text).unwrap_err().to_string();
        assert!(err.contains("d = 4"), "{err}");
    }

    #[test]
    fn ccp_file_renormalizes_rounding() {
        let spec = entry2();
        let text = "x_bin,y_1,y_2,phi\nx0,0,0,0.25\nx0,0,1,0.304\nx0,1,0,0.304\nx0,1,1,0.1420001\n";
        let ccp = read_ccp(&spec, text.as_bytes()).unwrap();
        let s: f64 = ccp.bin(0).unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        let bad = text.replace("0.1420001", "0.2");
        assert!(read_ccp(&spec, bad.as_bytes()).is_err());
    }

    #[test]
    fn manifest_hash_ignores_key_order() {
        let a = Manifest::new("x", serde_json::json!({"a": 1, "b": 2}), vec![1]);
        let b = Manifest::new("x", serde_json::json!({"b": 2, "a": 1}), vec![1]);
        assert_eq!(a.config_hash, b.config_hash);
    }
}
