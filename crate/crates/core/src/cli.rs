//! Command-line front end.
//!
//! Every subcommand reads its settings from flags, optionally layered over
//! a TOML run configuration given with `--config`; flags win. Exit codes:
//! 0 on success, 2 when θ is rejected or a set is empty, 1 on runtime
//! errors and 64 on usage errors.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{bench_compare, BenchConfig};
use crate::game::GameSpec;
use crate::identification::{
    criterion_q, find_feasible_point, project_query, FamilyKind, InequalityFamily, PhiInput, Sense, SetQuery,
    SolveReport, SolverSettings,
};
use crate::inference::{fs_band, frequency_ccp, CcpTable, ConfidenceBand};
use crate::io::{self, FileDigest, Manifest, ResultRow};
use crate::mixing::MixingGrid;
use crate::oracle::{simulate_dataset, MarketDataset, SelectionRule};
use crate::solver::SolveStatus;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REJECTED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "gameid", version, about = "Set identification for discrete games of complete information")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate market outcomes and write them as CSV.
    Simulate(SimulateArgs),
    /// Estimate choice probabilities (and optionally a band) from data.
    Ccp(CcpArgs),
    /// Check whether θ belongs to the identified set.
    Member(MemberArgs),
    /// Find a point of the identified set.
    Point(CommonArgs),
    /// Projection intervals of the identified set.
    Project(ProjectArgs),
    /// Projection intervals of the confidence set.
    Confproject(ProjectArgs),
    /// Time closed-form projections against simulated grid search.
    Bench(BenchArgs),
}

/// Flags shared by the estimation subcommands.
#[derive(Args, Debug, Default, Clone)]
struct CommonArgs {
    /// Game specification file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Market data CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Choice-probability CSV.
    #[arg(long)]
    ccp: Option<PathBuf>,
    /// abj, abj+lb, sharp or sharpK.
    #[arg(long)]
    family: Option<String>,
    /// Largest event size for the sharp family.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Level of the confidence band.
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of mixing nodes for the market shock.
    #[arg(long)]
    omega_nodes: Option<usize>,
    /// Shock scale: a number, `free` (parameter `sigma_omega`) or `free:NAME`.
    #[arg(long)]
    sigma_omega: Option<String>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    smooth_alpha: Option<f64>,
    /// Feasibility tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Box bound override `NAME=LO,HI`; repeatable.
    #[arg(long = "bound", allow_hyphen_values = true)]
    bounds: Vec<String>,
    /// Cross-check convex projections by bisection.
    #[arg(long)]
    verify: bool,
    /// Results CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run manifest (default: next to `--out`).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated θ.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Number of markets.
    #[arg(long)]
    n: Option<usize>,
    /// uniform, first:A/B,C/D or weights:W1,W2,...
    #[arg(long)]
    selection: Option<String>,
    /// Comma-separated bin probabilities (default: uniform).
    #[arg(long)]
    bin_weights: Option<String>,
}

#[derive(Args, Debug)]
struct CcpArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the confidence band here.
    #[arg(long)]
    band_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MemberArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, allow_hyphen_values = true)]
    theta: String,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Project every coordinate.
    #[arg(long)]
    all_coords: bool,
    /// Project one named coordinate; repeatable.
    #[arg(long = "coord")]
    coords: Vec<String>,
    /// Project on a comma-separated direction.
    #[arg(long, allow_hyphen_values = true)]
    direction: Option<String>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated bin counts.
    #[arg(long, default_value = "1,10,100,1000")]
    bins: String,
    /// Simulation draws per criterion evaluation.
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    /// Grid size used for extrapolation.
    #[arg(long, default_value_t = 100_000)]
    grid_points: u64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Skip the sharp family above this many bins.
    #[arg(long)]
    sharp_max_bins: Option<usize>,
}

/// Run configuration file. Relative paths resolve against the file's
/// directory.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub ccp: Option<PathBuf>,
    pub simulate: Option<SimulateBlock>,
    pub family: Option<String>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    #[serde(default)]
    pub bounds: BTreeMap<String, [f64; 2]>,
    pub mixing: Option<MixingBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub theta: Vec<f64>,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub selection: Option<String>,
    pub bin_weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingBlock {
    pub nodes: usize,
    /// Fixed scale.
    pub sigma: Option<f64>,
    /// Parameter acting as the scale.
    pub sigma_param: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub starts: Option<usize>,
    pub tol: Option<f64>,
    pub smooth_alpha: Option<f64>,
    pub seed: Option<u64>,
    pub verify: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub results: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

impl RunConfig {
    /// Read a configuration and check that its files exist.
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.spec, &mut cfg.data, &mut cfg.ccp].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                bail!("{}: referenced file {} does not exist", path.display(), p.display());
            }
        }
        for p in [&mut cfg.output.results, &mut cfg.output.manifest].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        let sources = [cfg.data.is_some(), cfg.ccp.is_some(), cfg.simulate.is_some()];
        if sources.iter().filter(|&&b| b).count() > 1 {
            bail!("{}: give only one of data, ccp or [simulate]", path.display());
        }
        Ok(cfg)
    }

    /// Overlay command-line flags.
    fn merge(mut self, a: &CommonArgs) -> anyhow::Result<RunConfig> {
        if a.data.is_some() || a.ccp.is_some() {
            self.data = None;
            self.ccp = None;
            self.simulate = None;
        }
        macro_rules! take {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = Some(v);
                }
            };
        }
        take!(self.spec, a.spec);
        take!(self.data, a.data);
        take!(self.ccp, a.ccp);
        take!(self.family, a.family);
        take!(self.k, a.k);
        take!(self.alpha, a.alpha);
        take!(self.solver.starts, a.starts);
        take!(self.solver.tol, a.tol);
        take!(self.solver.smooth_alpha, a.smooth_alpha);
        take!(self.solver.seed, a.seed);
        take!(self.output.results, a.out);
        take!(self.output.manifest, a.manifest);
        if a.verify {
            self.solver.verify = Some(true);
        }
        for b in &a.bounds {
            let (name, range) = b.split_once('=').ok_or_else(|| anyhow!("--bound expects NAME=LO,HI, got {b:?}"))?;
            let v = parse_list(range)?;
            if v.len() != 2 {
                bail!("--bound expects two numbers, got {range:?}");
            }
            self.bounds.insert(name.to_string(), [v[0], v[1]]);
        }
        if let Some(n) = a.omega_nodes {
            let m = self.mixing.get_or_insert_with(Default::default);
            m.nodes = n;
        }
        if let Some(s) = &a.sigma_omega {
            let m = self.mixing.get_or_insert_with(Default::default);
            if s == "free" {
                m.sigma_param = Some("sigma_omega".into());
                m.sigma = None;
            } else if let Some(name) = s.strip_prefix("free:") {
                m.sigma_param = Some(name.into());
                m.sigma = None;
            } else {
                m.sigma = Some(s.parse().with_context(|| format!("--sigma-omega {s:?}"))?);
                m.sigma_param = None;
            }
        }
        Ok(self)
    }

    fn settings(&self) -> SolverSettings {
        let mut s = SolverSettings::default();
        if let Some(v) = self.solver.starts {
            s.starts = v;
        }
        if let Some(v) = self.solver.tol {
            s.feas_tol = v;
        }
        if let Some(v) = self.solver.smooth_alpha {
            s.smooth_alpha = v;
        }
        if let Some(v) = self.solver.seed {
            s.seed = v;
        }
        if let Some(v) = self.solver.verify {
            s.verify_bisection = v;
        }
        s
    }

    fn game(&self) -> anyhow::Result<GameSpec> {
        let path = self.spec.as_ref().ok_or_else(|| anyhow!("a game specification is required (--spec)"))?;
        let mut spec = io::load_game_spec(path)?;
        for (name, [lo, hi]) in &self.bounds {
            let k = spec.param_index(name).ok_or_else(|| anyhow!("unknown parameter {name:?} in bounds"))?;
            spec.set_bound(k, *lo, *hi)?;
        }
        Ok(spec)
    }

    fn family(&self, spec: &GameSpec) -> anyhow::Result<InequalityFamily> {
        let name = self.family.as_deref().unwrap_or("abj");
        let kind = match name {
            "abj" => FamilyKind::AbjUpper,
            "abj+lb" => FamilyKind::AbjWithDominantLower,
            s if s.starts_with("sharp") => {
                let k = match &s[5..] {
                    "" => self.k.unwrap_or(spec.n_outcomes()),
                    digits => {
                        let k: usize = digits.parse().with_context(|| format!("family {s:?}"))?;
                        if self.k.is_some_and(|v| v != k) {
                            bail!("family {s:?} conflicts with --K {}", self.k.unwrap());
                        }
                        k
                    }
                };
                FamilyKind::Sharp(k)
            }
            other => bail!("unknown family {other:?}; expected abj, abj+lb, sharp or sharpK"),
        };
        let mixing = match &self.mixing {
            None => None,
            Some(m) => {
                let grid = MixingGrid::logistic_quantiles(m.nodes, m.sigma.unwrap_or(0.0))?;
                Some(match &m.sigma_param {
                    Some(name) => {
                        let k = spec.param_index(name).ok_or_else(|| anyhow!("unknown scale parameter {name:?}"))?;
                        grid.with_free_scale(k)
                    }
                    None => grid,
                })
            }
        };
        Ok(InequalityFamily::resolve(spec, kind, mixing)?)
    }

    fn dataset(&self, spec: &GameSpec) -> anyhow::Result<Option<MarketDataset>> {
        if let Some(p) = &self.data {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            return Ok(Some(io::read_dataset(spec, f).with_context(|| format!("reading {}", p.display()))?));
        }
        if let Some(sim) = &self.simulate {
            return Ok(Some(simulate_block(spec, sim, self.grid_for_simulation(spec)?.as_ref())?));
        }
        Ok(None)
    }

    fn grid_for_simulation(&self, spec: &GameSpec) -> anyhow::Result<Option<MixingGrid>> {
        match &self.mixing {
            None => Ok(None),
            Some(m) => {
                let grid = MixingGrid::logistic_quantiles(m.nodes, m.sigma.unwrap_or(0.0))?;
                Ok(Some(match &m.sigma_param {
                    Some(name) => grid.with_free_scale(
                        spec.param_index(name).ok_or_else(|| anyhow!("unknown scale parameter {name:?}"))?,
                    ),
                    None => grid,
                }))
            }
        }
    }

    fn ccp(&self, spec: &GameSpec) -> anyhow::Result<CcpTable> {
        if let Some(p) = &self.ccp {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            return Ok(io::read_ccp(spec, f).with_context(|| format!("reading {}", p.display()))?);
        }
        match self.dataset(spec)? {
            Some(d) => Ok(frequency_ccp(spec, &d)?),
            None => bail!("choice probabilities are required: give --ccp, --data or a [simulate] block"),
        }
    }

    fn inputs(&self) -> Vec<&PathBuf> {
        [&self.spec, &self.data, &self.ccp].into_iter().flatten().collect()
    }
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("not a number: {t:?}")))
        .collect()
}

fn parse_selection(spec: &GameSpec, s: &str) -> anyhow::Result<SelectionRule> {
    if s == "uniform" {
        return Ok(SelectionRule::SymmetricUniform);
    }
    if let Some(list) = s.strip_prefix("first:") {
        let mut order = Vec::new();
        for item in list.split(',') {
            let labels: Vec<&str> = item.split('/').collect();
            if labels.len() != spec.n_players() {
                bail!("outcome {item:?} needs {} action labels separated by '/'", spec.n_players());
            }
            let mut profile = Vec::new();
            for (i, l) in labels.iter().enumerate() {
                profile.push(
                    spec.action_labels(i)
                        .iter()
                        .position(|a| a == l.trim())
                        .ok_or_else(|| anyhow!("unknown action {l:?} for player {}", spec.players()[i]))?,
                );
            }
            order.push(spec.outcome_index(&profile)?);
        }
        return Ok(SelectionRule::FirstListed(order));
    }
    if let Some(w) = s.strip_prefix("weights:") {
        return Ok(SelectionRule::CustomWeights(parse_list(w)?));
    }
    bail!("unknown selection rule {s:?}; expected uniform, first:... or weights:...")
}

fn simulate_block(spec: &GameSpec, sim: &SimulateBlock, grid: Option<&MixingGrid>) -> anyhow::Result<MarketDataset> {
    let selection = parse_selection(spec, sim.selection.as_deref().unwrap_or("uniform"))?;
    let weights = match &sim.bin_weights {
        Some(w) => w.clone(),
        None => vec![1.0 / spec.n_bins() as f64; spec.n_bins()],
    };
    Ok(simulate_dataset(spec, &sim.theta, &selection, sim.n, &weights, grid, sim.seed)?)
}

/// Outcome of a subcommand before it is turned into an exit code.
struct Finished {
    rejected: bool,
}

struct Output<'a> {
    cfg: &'a RunConfig,
    command: &'a str,
    seeds: Vec<u64>,
}

impl Output<'_> {
    /// Write `body` to `--out` (or stdout) and the manifest.
    fn emit(&self, body: &[u8], extra: &[&Path]) -> anyhow::Result<()> {
        let Some(out) = &self.cfg.output.results else {
            std::io::stdout().write_all(body)?;
            if let Some(m) = &self.cfg.output.manifest {
                self.manifest(m, &[], extra)?;
            }
            return Ok(());
        };
        fs::write(out, body).with_context(|| format!("writing {}", out.display()))?;
        let manifest = self.cfg.output.manifest.clone().unwrap_or_else(|| {
            let mut p = out.clone().into_os_string();
            p.push(".manifest.json");
            PathBuf::from(p)
        });
        self.manifest(&manifest, &[out.as_path()], extra)
    }

    fn manifest(&self, path: &Path, outputs: &[&Path], extra: &[&Path]) -> anyhow::Result<()> {
        let config = serde_json::to_value(self.cfg)?;
        let mut m = Manifest::new(self.command, config, self.seeds.clone());
        for p in self.cfg.inputs() {
            m.inputs.push(FileDigest::of(p)?);
        }
        for p in outputs.iter().chain(extra) {
            m.outputs.push(FileDigest::of(p)?);
        }
        m.write(path)?;
        Ok(())
    }
}

fn results_csv(rows: &[ResultRow]) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    io::write_results(rows, &mut buf)?;
    Ok(buf)
}

fn status_label(lo: &SolveReport, hi: &SolveReport) -> String {
    if lo.status == hi.status {
        lo.status.as_str().into()
    } else {
        format!("{}/{}", lo.status.as_str(), hi.status.as_str())
    }
}

fn directions(spec: &GameSpec, a: &ProjectArgs) -> anyhow::Result<Vec<(String, Vec<f64>)>> {
    let d = spec.param_dim();
    let unit = |k: usize| {
        let mut p = vec![0.0; d];
        p[k] = 1.0;
        p
    };
    let mut out = Vec::new();
    if a.all_coords {
        out.extend((0..d).map(|k| (spec.param_names()[k].clone(), unit(k))));
    }
    for name in &a.coords {
        let k = spec.param_index(name).ok_or_else(|| anyhow!("unknown coordinate {name:?}"))?;
        out.push((name.clone(), unit(k)));
    }
    if let Some(s) = &a.direction {
        let p = parse_list(s)?;
        if p.len() != d {
            bail!("direction has {} entries, the parameter has {d}", p.len());
        }
        out.push((format!("p=({s})"), p));
    }
    if out.is_empty() {
        bail!("nothing to project: give --all-coords, --coord or --direction");
    }
    Ok(out)
}

fn run_project(cfg: &RunConfig, a: &ProjectArgs, confidence: bool) -> anyhow::Result<Finished> {
    let spec = cfg.game()?;
    let family = cfg.family(&spec)?;
    let settings = cfg.settings();
    let ccp = cfg.ccp(&spec)?;
    let band: ConfidenceBand;
    let (phi, quantity) = if confidence {
        band = fs_band(&ccp, cfg.alpha.unwrap_or(0.05))?;
        (PhiInput::Band(&band), "confidence_projection")
    } else {
        (PhiInput::Point(&ccp), "projection")
    };
    let query = SetQuery::new(&spec, phi, &family)?;
    let mut rows = Vec::new();
    let mut rejected = false;
    for (label, p) in directions(&spec, a)? {
        let (lo, rlo) = project_query(&query, &p, Sense::Min, &settings)?;
        let (hi, rhi) = project_query(&query, &p, Sense::Max, &settings)?;
        for r in [&rlo, &rhi] {
            if r.status != SolveStatus::Optimal {
                log::warn!("{label}: solver status {} ({} Newton steps)", r.status.as_str(), r.newton_steps);
            }
        }
        rejected |= [&rlo, &rhi].iter().any(|r| r.status == SolveStatus::Infeasible);
        eprintln!("{label}: [{lo:.6}, {hi:.6}] {}", family.kind().label());
        rows.push(ResultRow {
            quantity: quantity.into(),
            coordinate: label,
            lower: lo,
            upper: hi,
            status: status_label(&rlo, &rhi),
            seed: settings.seed,
        });
    }
    let out = Output { cfg, command: if confidence { "confproject" } else { "project" }, seeds: vec![settings.seed] };
    out.emit(&results_csv(&rows)?, &[])?;
    Ok(Finished { rejected })
}

fn run_member(cfg: &RunConfig, theta: &str) -> anyhow::Result<Finished> {
    let spec = cfg.game()?;
    let family = cfg.family(&spec)?;
    let settings = cfg.settings();
    let ccp = cfg.ccp(&spec)?;
    let theta = parse_list(theta)?;
    spec.check_theta(&theta)?;
    let q = criterion_q(&spec, &theta, &ccp, &family.at_theta(&spec, &theta)?)?;
    let member = q <= settings.member_tol;
    eprintln!("Q = {q:.6}");
    eprintln!("member: {member}");
    let rows = vec![ResultRow {
        quantity: "criterion".into(),
        coordinate: "Q".into(),
        lower: q,
        upper: q,
        status: if member { "member" } else { "nonmember" }.into(),
        seed: settings.seed,
    }];
    Output { cfg, command: "member", seeds: vec![] }.emit(&results_csv(&rows)?, &[])?;
    Ok(Finished { rejected: !member })
}

fn run_point(cfg: &RunConfig) -> anyhow::Result<Finished> {
    let spec = cfg.game()?;
    let family = cfg.family(&spec)?;
    let settings = cfg.settings();
    let ccp = cfg.ccp(&spec)?;
    let report = find_feasible_point(&spec, &ccp, &family, &settings)?;
    let found = report.objective <= settings.feas_tol;
    eprintln!("max residual = {:.3e}", report.objective);
    let status = if found { "feasible" } else { "infeasible" };
    let rows: Vec<ResultRow> = spec
        .param_names()
        .iter()
        .zip(&report.theta)
        .map(|(name, &v)| ResultRow {
            quantity: "feasible_point".into(),
            coordinate: name.clone(),
            lower: v,
            upper: v,
            status: status.into(),
            seed: settings.seed,
        })
        .collect();
    Output { cfg, command: "point", seeds: vec![settings.seed] }.emit(&results_csv(&rows)?, &[])?;
    Ok(Finished { rejected: !found })
}

fn run_simulate(cfg: &RunConfig, a: &SimulateArgs) -> anyhow::Result<Finished> {
    let spec = cfg.game()?;
    let mut sim = cfg.simulate.clone().unwrap_or_default();
    if let Some(t) = &a.theta {
        sim.theta = parse_list(t)?;
    }
    if let Some(n) = a.n {
        sim.n = n;
    }
    if let Some(s) = &a.selection {
        sim.selection = Some(s.clone());
    }
    if let Some(w) = &a.bin_weights {
        sim.bin_weights = Some(parse_list(w)?);
    }
    if let Some(seed) = cfg.solver.seed {
        sim.seed = seed;
    }
    if sim.theta.is_empty() {
        bail!("simulation needs --theta");
    }
    let data = simulate_block(&spec, &sim, cfg.grid_for_simulation(&spec)?.as_ref())?;
    let mut buf = Vec::new();
    io::write_dataset(&spec, &data, &mut buf)?;
    let mut cfg = cfg.clone();
    let seed = sim.seed;
    cfg.simulate = Some(sim);
    Output { cfg: &cfg, command: "simulate", seeds: vec![seed] }.emit(&buf, &[])?;
    Ok(Finished { rejected: false })
}

fn run_ccp(cfg: &RunConfig, a: &CcpArgs) -> anyhow::Result<Finished> {
    let spec = cfg.game()?;
    let data = cfg.dataset(&spec)?.ok_or_else(|| anyhow!("market data is required (--data or [simulate])"))?;
    let ccp = frequency_ccp(&spec, &data)?;
    for x in ccp.dropped_bins() {
        eprintln!("bin {} has no markets and was dropped", spec.bins()[x]);
    }
    let mut buf = Vec::new();
    io::write_ccp(&spec, &ccp, &mut buf)?;
    let mut extra = Vec::new();
    if let Some(path) = &a.band_out {
        let band = fs_band(&ccp, cfg.alpha.unwrap_or(0.05))?;
        io::write_band(&spec, &band, File::create(path).with_context(|| format!("creating {}", path.display()))?)?;
        extra.push(path.as_path());
    }
    let seeds = cfg.simulate.as_ref().map(|s| vec![s.seed]).unwrap_or_default();
    Output { cfg, command: "ccp", seeds }.emit(&buf, &extra)?;
    Ok(Finished { rejected: false })
}

fn run_bench(cfg: &RunConfig, a: &BenchArgs) -> anyhow::Result<Finished> {
    let settings = cfg.settings();
    let bins = a
        .bins
        .split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bin count {t:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let bc = BenchConfig {
        bins,
        draws: a.draws,
        grid_points: a.grid_points,
        reps: a.reps,
        seed: settings.seed,
        sharp_max_bins: a.sharp_max_bins.unwrap_or(usize::MAX),
    };
    let table = bench_compare(&bc, &settings)?;
    eprint!("{}", table.render());
    let mut rows = Vec::new();
    for r in &table.rows {
        let k = format!("K={}", r.bins);
        let mut push = |q: &str, v: f64| {
            rows.push(ResultRow { quantity: q.into(), coordinate: k.clone(), lower: v, upper: v, status: "ok".into(), seed: bc.seed })
        };
        push("seconds_abj", r.abj_secs);
        if let Some(s) = r.sharp_secs {
            push("seconds_sharp", s);
        }
        push("seconds_ct", r.ct_secs);
    }
    Output { cfg, command: "bench", seeds: vec![bc.seed] }.emit(&results_csv(&rows)?, &[])?;
    Ok(Finished { rejected: false })
}

fn dispatch(cli: &Cli) -> anyhow::Result<Finished> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Simulate(a) => run_simulate(&base.merge(&a.common)?, a),
        Command::Ccp(a) => run_ccp(&base.merge(&a.common)?, a),
        Command::Member(a) => run_member(&base.merge(&a.common)?, &a.theta),
        Command::Point(a) => run_point(&base.merge(a)?),
        Command::Project(a) => run_project(&base.merge(&a.common)?, a, false),
        Command::Confproject(a) => run_project(&base.merge(&a.common)?, a, true),
        Command::Bench(a) => run_bench(&base.merge(&a.common)?, a),
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let run = || match dispatch(&cli) {
        Ok(f) if f.rejected => EXIT_REJECTED,
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    };
    match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_ERROR
            }
        },
        None => run(),
    }
}
