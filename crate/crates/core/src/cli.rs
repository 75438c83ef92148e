//! Command-line front end: JSON run configs in, CSV and JSON out.
//!
//! Every command writes into `<out>/<config-hash>/` and finishes with a
//! `manifest.json`. Exit codes: 0 ok, 1 verify failure, 2 catalog error,
//! 3 solver error, 4 threshold unbounded, 64 usage.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{classify, Classification};
use crate::error::{Error, Result};
use crate::fbp_solver::{run, InitialData, SolverConfig, Terminal};
use crate::kinetics::{minimal_speed, validate_kpp, Nonlinearity, NonlinearitySpec};
use crate::phase_plane::ShootingTolerances;
use crate::threshold::{find_threshold, transition_evidence, Target, ThresholdResult, TransitionEvidence};
use crate::verify::{CriterionResult, Suite, Verifier};
use crate::wave_catalog::{catalog_for, write_atomic, ProblemParams, Regime, WaveCatalog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CATALOG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_UNBOUNDED: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

/// Samples checked by the KPP validation of a configured reaction term.
const KPP_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Value(f64),
    Named(BetaName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaName {
    /// `beta = c0`, the critical advection.
    #[serde(rename = "c0")]
    C0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default = "default_mu")]
    pub mu: f64,
    pub beta: BetaSpec,
}

fn default_mu() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub n_grid: usize,
    pub dt_max: f64,
    pub cfl: f64,
    pub t_max: f64,
    pub record_every: f64,
    pub snapshot_every: f64,
    pub level_m: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            n_grid: 1000,
            dt_max: 1e-3,
            cfl: 0.5,
            t_max: 60.0,
            record_every: 0.5,
            snapshot_every: 10.0,
            level_m: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    VanishToSpread,
    VanishToNonvanish,
    /// Both edges, lower one first.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub target: TargetSpec,
    pub rel_tol: f64,
    pub sigma_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub nonlinearity: NonlinearitySpec,
    pub problem: ProblemSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ShootingTolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialData>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdSection>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.params()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        let f = Nonlinearity::new(self.nonlinearity.clone());
        let report = validate_kpp(&f, KPP_SAMPLES);
        match report.violation {
            None => Ok(f),
            Some(v) => Err(Error::InvalidArgument(format!("nonlinearity fails the KPP conditions: {v:?}"))),
        }
    }

    pub fn params(&self) -> Result<ProblemParams> {
        let f = self.nonlinearity()?;
        let beta = match self.problem.beta {
            BetaSpec::Value(b) => b,
            BetaSpec::Named(BetaName::C0) => minimal_speed(&f),
        };
        let mut p = ProblemParams::new(f, self.problem.mu, beta)?;
        if let Some(t) = self.tolerances {
            p.tol = t;
        }
        Ok(p)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let init = self
            .initial
            .clone()
            .ok_or_else(|| Error::InvalidArgument("config needs an \"initial\" section".into()))?;
        let s = &self.solver;
        let c = SolverConfig {
            params: self.params()?,
            init,
            n_grid: s.n_grid,
            dt_max: s.dt_max,
            cfl: s.cfl,
            t_max: s.t_max,
            record_every: s.record_every,
            snapshot_every: s.snapshot_every,
            level_m: s.level_m,
        };
        c.validate()?;
        Ok(c)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Parser)]
#[command(name = "stefan-kpp", version, about = "Traveling waves and free-boundary runs for advective Fisher-KPP")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON run configuration.
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output root; results go to `<out>/<config-hash>/`.
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long = "t-max")]
    pub t_max: Option<f64>,
    #[arg(long = "n-grid")]
    pub n_grid: Option<usize>,
    /// Worker threads for independent simulations.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the wave catalog and write its profiles.
    Waves(Common),
    /// Run the free-boundary solver and classify the outcome.
    Simulate(Common),
    /// Locate the sharp threshold in sigma.
    Threshold(Common),
    /// Run an acceptance suite: waves, solver, thresholds, profiles or all.
    Verify {
        suite: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Catalog,
    Solver,
}

fn fail(phase: Phase, e: Error) -> Failure {
    let code = match e.root() {
        Error::InvalidArgument(_) | Error::InvalidInitialData(_) => EXIT_USAGE,
        Error::NoUpperClassFound { .. } => EXIT_UNBOUNDED,
        _ => match phase {
            Phase::Catalog => EXIT_CATALOG,
            Phase::Solver => EXIT_SOLVER,
        },
    };
    Failure::new(code, e.to_string())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_hash: &'a str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    terminal: Option<Terminal>,
    wall_time_s: f64,
    files: Vec<String>,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(root: &Path, hash: &str) -> Self {
        Output { dir: root.join(&hash[..16]), files: Vec::new() }
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(rel), bytes)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write(rel, &text)
    }

    fn finish(mut self, command: &str, cfg: &RunConfig, hash: &str, terminal: Option<Terminal>, start: Instant) -> Result<PathBuf> {
        let files = std::mem::take(&mut self.files);
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash: hash,
            config: cfg,
            terminal,
            wall_time_s: start.elapsed().as_secs_f64(),
            files,
        };
        self.json("manifest.json", &m)?;
        Ok(self.dir)
    }
}

fn load_config(common: &Common) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&common.config).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    if let Some(t) = common.t_max {
        cfg.solver.t_max = t;
    }
    if let Some(n) = common.n_grid {
        cfg.solver.n_grid = n;
    }
    Ok(cfg)
}

fn write_catalog(out: &mut Output, catalog: &WaveCatalog) -> Result<()> {
    out.json("catalog.json", &catalog.summary())?;
    for (name, profile) in catalog.named_profiles() {
        out.write(&format!("{name}.csv"), profile.to_csv().as_bytes())?;
    }
    Ok(())
}

pub fn cmd_waves(common: &Common) -> std::result::Result<PathBuf, Failure> {
    let start = Instant::now();
    let cfg = load_config(common)?;
    let hash = cfg.hash();
    let params = cfg.params().map_err(|e| fail(Phase::Catalog, e))?;
    let catalog = catalog_for(&params).map_err(|e| fail(Phase::Catalog, e))?;
    let mut out = Output::new(&common.out, &hash);
    write_catalog(&mut out, &catalog).map_err(|e| fail(Phase::Catalog, e))?;
    out.finish("waves", &cfg, &hash, None, start).map_err(|e| fail(Phase::Catalog, e))
}

pub fn cmd_simulate(common: &Common) -> std::result::Result<(PathBuf, Classification), Failure> {
    let start = Instant::now();
    let cfg = load_config(common)?;
    let hash = cfg.hash();
    let config = cfg.solver_config().map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let catalog = catalog_for(&config.params).map_err(|e| fail(Phase::Catalog, e))?;
    let traj = run(&config).map_err(|e| fail(Phase::Solver, e))?;
    let class = classify(&traj, &catalog);
    let mut out = Output::new(&common.out, &hash);
    let io = |e: Error| fail(Phase::Solver, e);
    out.json("catalog.json", &catalog.summary()).map_err(io)?;
    out.write("trajectory.csv", traj.to_csv().as_bytes()).map_err(io)?;
    for s in &traj.snapshots {
        out.write(&format!("snapshots/t={:.3}.csv", s.t), s.to_csv().as_bytes()).map_err(io)?;
    }
    out.json("classification.json", &class).map_err(io)?;
    let dir = out.finish("simulate", &cfg, &hash, Some(traj.terminal), start).map_err(io)?;
    Ok((dir, class))
}

#[derive(Debug, Serialize)]
struct ThresholdReport<'a> {
    regime: Regime,
    sigma_star: String,
    results: &'a [ThresholdResult],
    #[serde(skip_serializing_if = "Option::is_none")]
    transition_evidence: Option<TransitionEvidence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_max: Option<f64>,
}

pub fn cmd_threshold(common: &Common) -> std::result::Result<PathBuf, Failure> {
    let start = Instant::now();
    let cfg = load_config(common)?;
    let hash = cfg.hash();
    let section = cfg
        .threshold
        .clone()
        .ok_or_else(|| Failure::new(EXIT_USAGE, "config needs a \"threshold\" section"))?;
    let template = cfg.solver_config().map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let catalog = catalog_for(&template.params).map_err(|e| fail(Phase::Catalog, e))?;
    let targets: &[Target] = match section.target {
        TargetSpec::VanishToSpread => &[Target::VanishToSpread],
        TargetSpec::VanishToNonvanish => &[Target::VanishToNonvanish],
        TargetSpec::Both => &[Target::VanishToNonvanish, Target::VanishToSpread],
    };
    let mut out = Output::new(&common.out, &hash);
    let io = |e: Error| fail(Phase::Solver, e);
    let mut results = Vec::new();
    for &t in targets {
        match find_threshold(&template, &catalog, t, section.rel_tol, section.sigma_max, common.jobs) {
            Ok(r) => results.push(r),
            Err(e) if matches!(e.root(), Error::NoUpperClassFound { .. }) => {
                let report = ThresholdReport {
                    regime: catalog.regime,
                    sigma_star: "inf".into(),
                    results: &results,
                    transition_evidence: None,
                    sigma_max: Some(section.sigma_max),
                };
                out.json("threshold.json", &report).map_err(io)?;
                out.finish("threshold", &cfg, &hash, None, start).map_err(io)?;
                return Err(fail(Phase::Solver, e));
            }
            Err(e) => return Err(fail(Phase::Solver, e)),
        }
    }
    let evidence = match (catalog.regime, results.last()) {
        (Regime::Medium, Some(r)) => {
            let mut mid = template.clone();
            mid.init.sigma = r.midpoint();
            mid.t_max = 2.0 * template.t_max;
            transition_evidence(&mid, &catalog).ok()
        }
        _ => None,
    };
    let mut csv = String::from("target,sigma,verdict,t_decided,t_max\n");
    for r in &results {
        for e in &r.evaluations {
            csv.push_str(&format!("{:?},{:.12e},{:?},{:.6},{:.6}\n", r.target, e.sigma, e.verdict, e.t_decided, e.t_max));
        }
    }
    let last = results.last().expect("at least one target");
    let report = ThresholdReport {
        regime: catalog.regime,
        sigma_star: format!("{:.12e}", last.midpoint()),
        results: &results,
        transition_evidence: evidence,
        sigma_max: None,
    };
    out.json("threshold.json", &report).map_err(io)?;
    out.write("evaluations.csv", csv.as_bytes()).map_err(io)?;
    out.finish("threshold", &cfg, &hash, None, start).map_err(io)
}

#[derive(Debug, Serialize)]
struct VerifyReport<'a> {
    suite: &'a str,
    passed: bool,
    criteria: &'a [CriterionResult],
}

pub fn cmd_verify(suite: &str, out: Option<&Path>, jobs: usize) -> std::result::Result<Vec<CriterionResult>, Failure> {
    let s: Suite = suite.parse().map_err(|e: Error| Failure::new(EXIT_USAGE, e.to_string()))?;
    let v = Verifier::new(jobs);
    let ids = s.criteria();
    let results: Vec<CriterionResult> = if jobs > 1 {
        ids.par_iter().map(|&id| v.run_criterion(id)).collect()
    } else {
        ids.iter().map(|&id| v.run_criterion(id)).collect()
    };
    for r in &results {
        println!("{r}");
    }
    let passed = results.iter().all(|r| r.passed);
    if let Some(dir) = out {
        let report = VerifyReport { suite, passed, criteria: &results };
        let mut text = serde_json::to_vec_pretty(&report).map_err(|e| Failure::new(EXIT_VERIFY, e.to_string()))?;
        text.push(b'\n');
        write_atomic(&dir.join("verify.json"), &text).map_err(|e| Failure::new(EXIT_VERIFY, e.to_string()))?;
    }
    match results.iter().find(|r| !r.passed) {
        Some(r) => Err(Failure::new(EXIT_VERIFY, format!("criterion {} ({}) failed: {}", r.id, r.name, r.detail))),
        None => Ok(results),
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Waves(c) => with_pool(c.jobs, || cmd_waves(c)).map(|d| println!("{}", d.display())),
        Command::Simulate(c) => with_pool(c.jobs, || cmd_simulate(c)).map(|(d, class)| {
            println!("{}", d.display());
            println!("verdict: {:?}", class.verdict);
        }),
        Command::Threshold(c) => with_pool(c.jobs, || cmd_threshold(c)).map(|d| println!("{}", d.display())),
        Command::Verify { suite, out, jobs } => with_pool(*jobs, || cmd_verify(suite, out.as_deref(), *jobs)).map(|_| ()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "nonlinearity": {"name": "logistic"},
        "problem": {"mu": 1.0, "beta": 0.5},
        "initial": {"h0": 2.0, "shape": "cosine", "sigma": 1.0},
        "solver": {"n_grid": 200, "t_max": 5.0}
    }"#;

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = RunConfig::from_json(BASE).unwrap();
        assert_eq!(cfg.solver.record_every, 0.5);
        let sc = cfg.solver_config().unwrap();
        assert_eq!(sc.n_grid, 200);
        assert_eq!(sc.params.beta, 0.5);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = BASE.replace("\"t_max\": 5.0", "\"t_max\": 5.0, \"tmax\": 1");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::InvalidArgument(_))));
        let bad = BASE.replace("\"mu\": 1.0,", "\"mu\": 1.0, \"nu\": 2,");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn beta_may_be_c0() {
        let cfg = RunConfig::from_json(&BASE.replace("\"beta\": 0.5", "\"beta\": \"c0\"")).unwrap();
        assert_eq!(cfg.params().unwrap().beta, 2.0);
        assert!(RunConfig::from_json(&BASE.replace("\"beta\": 0.5", "\"beta\": \"c1\"")).is_err());
    }

    #[test]
    fn rejects_non_kpp_reaction() {
        let text = BASE.replace(
            r#"{"name": "logistic"}"#,
            r#"{"name": "polynomial", "params": {"coeffs": [0.0, 1.0, 4.0, -5.0]}}"#,
        );
        assert!(matches!(RunConfig::from_json(&text), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::from_json(BASE).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.solver.t_max = 6.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(main_with_args(["stefan-kpp", "frobnicate"]), EXIT_USAGE);
        assert_eq!(main_with_args(["stefan-kpp", "verify", "bogus"]), EXIT_USAGE);
        assert_eq!(main_with_args(["stefan-kpp", "waves", "-c", "/nonexistent.json"]), EXIT_USAGE);
    }
}
