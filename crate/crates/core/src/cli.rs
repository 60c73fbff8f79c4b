//! Command-line front end: configuration, the solve → analyze → report
//! pipeline and artifact emission.
//!
//! Subcommands: `solve`, `flow`, `sweep`, `convexity`, `barriers`, `all`.
//! Values come from `--config FILE` (TOML, sections below) and are
//! overridden by flags.
//!
//! ```toml
//! [domain]
//! kind = "ball"        # interval | ball | ellipse
//! dim = 2
//! radius = 1.0
//! resolution = 801
//!
//! [run]
//! lambda = [0.5]
//! lambda_max = 100.0
//! out = "out"
//! format = ["csv", "json"]
//! u0_fraction = 0.0    # flow start u0 = fraction·φ_λ
//!
//! [tolerances]
//! newton_tol = 1e-10
//!
//! [flow]               # FlowControls
//! [continuation]       # ContinuationControls
//! ```
//!
//! Artifacts in the output directory (`{i}` is the index into the λ list):
//!
//! | mode | files |
//! |---|---|
//! | solve | `solution.json`, `field_phi_{i}.csv` |
//! | flow | `flow.json`, `timeseries_{i}.csv`, `snapshot_{i}_{step}.csv` |
//! | sweep | `branch.json`, `branch.csv` |
//! | convexity | `convexity.json`, `hessian_field_{i}.csv` |
//! | barriers | `barriers.json`, `barrier_violation_{i}.csv` |
//!
//! plus `claims.json` and the sidecar `run_meta.txt`. Field CSVs have
//! columns `node_index,x[,y],class,value`; `branch.csv` has
//! `index,lambda,max_phi,mu1,residual_norm,newton_iterations`;
//! `timeseries_{i}.csv` has
//! `step,t,max_u,lyapunov,min_hessian_eig_w,steady_residual`.
//!
//! Exit codes: 0 success, 2 when a checked claim fails, 1 on any error.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::barriers::{check_barriers, lambda_bar_refined, BarrierReport, LambdaBar};
use crate::domain::{build_grid, DomainSpec, Grid, ScalarField};
use crate::error::{GelfandError, Result};
use crate::flow::{run_monitored, FlowControls, FlowSummary};
use crate::geometry::{boundary_g, convexity_report, default_k, mixed_derivative_ratio, ConvexityReport};
use crate::io::{fmt_f64, write_field_csv, write_json, write_run_meta, write_table_csv};
use crate::steady::{
    continue_branch, default_newton_tol, newton_solve, BranchSummary, ContinuationBranch,
    ContinuationControls, SteadySolution, SteadySummary,
};

/// Flow/Newton agreement required of a converged flow.
const AGREEMENT_TOL: f64 = 1e-6;
/// Allowed relative rise of the Lyapunov functional between records.
const LYAPUNOV_TOL: f64 = 1e-8;
/// Default fractions of `λ*` sampled when no λ list is given.
const DEFAULT_FRACTIONS: [f64; 3] = [0.1, 0.25, 0.5];
/// Fractions of `λ̄` at which `G` is sampled.
const G_SAMPLES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Flow,
    Sweep,
    Convexity,
    Barriers,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Ball,
    Ellipse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// `None` uses `1e-10·(1+λ)`.
    pub newton_tol: Option<f64>,
    pub steady_tol: f64,
    /// `None` uses `10h²‖w‖_∞`.
    pub conv_tol: Option<f64>,
    /// `None` uses `max(1e-8, 10h²)`.
    pub barrier_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub domain: DomainSpec,
    pub resolution: usize,
    /// Empty means fractions of the computed `λ*`.
    pub lambdas: Vec<f64>,
    /// Continuation cap.
    pub lambda_max: f64,
    pub tolerances: Tolerances,
    pub flow: FlowControls,
    pub continuation: ContinuationControls,
    pub u0_fraction: f64,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

impl RunConfig {
    pub fn new(mode: Mode, domain: DomainSpec, resolution: usize) -> Self {
        Self {
            mode,
            domain,
            resolution,
            lambdas: Vec::new(),
            lambda_max: 100.0,
            tolerances: Tolerances {
                newton_tol: None,
                steady_tol: FlowControls::default().steady_tol,
                conv_tol: None,
                barrier_tol: None,
            },
            flow: FlowControls::default(),
            continuation: ContinuationControls::default(),
            u0_fraction: 0.0,
            out: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }

    /// Every invariant violation, joined into one error.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if let Err(e) = self.domain.validate() {
            bad.push(strip(e));
        }
        let (lo, hi) = self.domain.resolution_bounds();
        if self.resolution < lo || self.resolution > hi {
            bad.push(format!(
                "resolution {} outside [{lo}, {hi}] for {}",
                self.resolution,
                self.domain.kind_name()
            ));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("newton_tol", t.newton_tol),
            ("steady_tol", Some(t.steady_tol)),
            ("conv_tol", t.conv_tol),
            ("barrier_tol", t.barrier_tol),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    bad.push(format!("{name} must be > 0"));
                }
            }
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            bad.push(format!("lambda must be ≥ 0 (got {l})"));
        }
        if !(self.lambda_max > 0.0 && self.lambda_max.is_finite()) {
            bad.push(format!("lambda_max must be > 0 (got {})", self.lambda_max));
        }
        if matches!(self.mode, Mode::Solve | Mode::Flow) && self.lambdas.is_empty() {
            bad.push("lambda is required for solve and flow".into());
        }
        if !(0.0..=1.0).contains(&self.u0_fraction) {
            bad.push(format!("u0_fraction must lie in [0, 1] (got {})", self.u0_fraction));
        }
        if self.formats.is_empty() {
            bad.push("format must name csv, json or both".into());
        }
        if let Err(e) = self.flow.validate() {
            bad.push(strip(e));
        }
        let c = &self.continuation;
        if !(c.ds_min > 0.0 && c.ds0 >= c.ds_min && c.ds_max >= c.ds0 && c.ds_max.is_finite()) {
            bad.push("continuation steps need 0 < ds_min ≤ ds0 ≤ ds_max".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(GelfandError::Config(bad.join("; ")))
        }
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn strip(e: GelfandError) -> String {
    let s = e.to_string();
    match s.split_once(": ") {
        Some((_, rest)) => rest.to_string(),
        None => s,
    }
}

#[derive(Debug, Parser)]
#[command(name = "gelfand", version, about = "Gelfand problem laboratory: flow, continuation and convexity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Newton solve at each λ.
    Solve(Flags),
    /// Run the parabolic flow at each λ.
    Flow(Flags),
    /// Continue the minimal branch up to the fold or `--lambda-max`.
    Sweep(Flags),
    /// f-convexity report at each λ.
    Convexity(Flags),
    /// Barrier sandwich, normal-derivative bounds and λ̄.
    Barriers(Flags),
    /// Everything above on one shared branch.
    All(Flags),
}

#[derive(Debug, Default, Args)]
struct Flags {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    domain: Option<DomainKind>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
    /// One or more λ values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    lambda: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda_max: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<Format>,
    #[arg(long, allow_negative_numbers = true)]
    newton_tol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    steady_tol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    conv_tol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    barrier_tol: Option<f64>,
    /// Flow time step (default h/2).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Flow start `u0 = fraction·φ_λ`.
    #[arg(long)]
    u0_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    domain: DomainSection,
    run: RunSection,
    tolerances: TolSection,
    flow: FlowControls,
    continuation: ContinuationControls,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DomainSection {
    kind: Option<DomainKind>,
    dim: Option<usize>,
    radius: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    length: Option<f64>,
    resolution: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunSection {
    lambda: Option<Vec<f64>>,
    lambda_max: Option<f64>,
    out: Option<PathBuf>,
    format: Option<Vec<Format>>,
    u0_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TolSection {
    newton_tol: Option<f64>,
    steady_tol: Option<f64>,
    conv_tol: Option<f64>,
    barrier_tol: Option<f64>,
}

fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| GelfandError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| GelfandError::Config(format!("{}: {e}", path.display())))
}

fn merge(mode: Mode, flags: Flags) -> Result<RunConfig> {
    let file = match &flags.config {
        Some(p) => read_file_config(p)?,
        None => FileConfig::default(),
    };
    let d = &file.domain;
    let kind = flags.domain.or(d.kind).unwrap_or(DomainKind::Interval);
    let domain = match kind {
        DomainKind::Interval => DomainSpec::interval(flags.length.or(d.length).unwrap_or(1.0)),
        DomainKind::Ball => DomainSpec::ball(
            flags.dim.or(d.dim).unwrap_or(2),
            flags.radius.or(d.radius).unwrap_or(1.0),
        ),
        DomainKind::Ellipse => DomainSpec::ellipse(
            flags.a.or(d.a).unwrap_or(1.0),
            flags.b.or(d.b).unwrap_or(1.0),
        ),
    };
    let default_resolution = if kind == DomainKind::Ellipse { 65 } else { 801 };
    let mut cfg = RunConfig::new(mode, domain, flags.resolution.or(d.resolution).unwrap_or(default_resolution));
    let r = file.run;
    cfg.lambdas = if flags.lambda.is_empty() { r.lambda.unwrap_or_default() } else { flags.lambda };
    if let Some(v) = flags.lambda_max.or(r.lambda_max) {
        cfg.lambda_max = v;
    }
    if let Some(v) = flags.out.or(r.out) {
        cfg.out = v;
    }
    if !flags.format.is_empty() {
        cfg.formats = flags.format;
    } else if let Some(f) = r.format {
        cfg.formats = f;
    }
    cfg.formats.sort_by_key(|f| *f as u8);
    cfg.formats.dedup();
    if let Some(v) = flags.u0_fraction.or(r.u0_fraction) {
        cfg.u0_fraction = v;
    }
    let t = file.tolerances;
    cfg.flow = file.flow;
    cfg.continuation = file.continuation;
    cfg.tolerances = Tolerances {
        newton_tol: flags.newton_tol.or(t.newton_tol).or(cfg.continuation.newton_tol),
        steady_tol: flags.steady_tol.or(t.steady_tol).unwrap_or(cfg.flow.steady_tol),
        conv_tol: flags.conv_tol.or(t.conv_tol),
        barrier_tol: flags.barrier_tol.or(t.barrier_tol),
    };
    cfg.flow.steady_tol = cfg.tolerances.steady_tol;
    cfg.continuation.newton_tol = cfg.tolerances.newton_tol;
    if let Some(dt) = flags.dt {
        cfg.flow.dt = Some(dt);
    }
    if let Some(n) = flags.max_steps {
        cfg.flow.max_steps = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parse a full argument list (program name first) into a validated config.
pub fn parse_args<I, T>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| GelfandError::Config(e.to_string()))?;
    from_cli(cli)
}

fn from_cli(cli: Cli) -> Result<RunConfig> {
    let (mode, flags) = match cli.command {
        Command::Solve(f) => (Mode::Solve, f),
        Command::Flow(f) => (Mode::Flow, f),
        Command::Sweep(f) => (Mode::Sweep, f),
        Command::Convexity(f) => (Mode::Convexity, f),
        Command::Barriers(f) => (Mode::Barriers, f),
        Command::All(f) => (Mode::All, f),
    };
    merge(mode, flags)
}

/// Load a TOML configuration file for `mode` without any flag overrides.
pub fn parse_config_file(path: &Path, mode: Mode) -> Result<RunConfig> {
    merge(mode, Flags { config: Some(path.to_path_buf()), ..Flags::default() })
}

/// One checked statement and its outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Claim {
    pub name: String,
    pub lambda: Option<f64>,
    pub holds: bool,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Outcome {
    pub claims: Vec<Claim>,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn all_hold(&self) -> bool {
        self.claims.iter().all(|c| c.holds)
    }

    /// `value ≤ bound`.
    fn at_most(&mut self, name: &str, lambda: Option<f64>, value: f64, bound: f64) {
        self.claims.push(Claim { name: name.into(), lambda, holds: value <= bound, value, bound });
    }

    /// `value > bound`.
    fn above(&mut self, name: &str, lambda: Option<f64>, value: f64, bound: f64) {
        self.claims.push(Claim { name: name.into(), lambda, holds: value > bound, value, bound });
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    domain: DomainSpec,
    resolution: usize,
    h: f64,
    solutions: &'a [SteadySummary],
}

#[derive(Serialize)]
struct FlowRun {
    #[serde(flatten)]
    summary: FlowSummary,
    u0_fraction: f64,
    /// `‖u(T) − φ_λ‖_∞` when the flow converged and Newton succeeded.
    newton_distance: Option<f64>,
}

#[derive(Serialize)]
struct FlowOutput<'a> {
    domain: DomainSpec,
    resolution: usize,
    runs: &'a [FlowRun],
}

#[derive(Serialize)]
struct ConvexityOutput<'a> {
    domain: DomainSpec,
    resolution: usize,
    lambda_star_estimate: f64,
    /// Threshold below which the convexity claims are checked.
    lambda_bar: f64,
    reports: &'a [ConvexityReport],
}

#[derive(Serialize)]
struct GSample {
    lambda: f64,
    g_min: f64,
}

#[derive(Serialize)]
struct BarriersOutput<'a> {
    domain: DomainSpec,
    resolution: usize,
    lambda_star_estimate: f64,
    lambda_bar: Option<LambdaBar>,
    k_used: f64,
    g_samples: &'a [GSample],
    reports: &'a [BarrierReport],
}

struct Runner<'c> {
    cfg: &'c RunConfig,
    grid: Arc<Grid>,
    outcome: Outcome,
    branch: Option<ContinuationBranch>,
}

impl<'c> Runner<'c> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn json(&self, name: &str, v: &impl Serialize) -> Result<()> {
        if self.cfg.wants(Format::Json) {
            write_json(&self.path(name), v)?;
        }
        Ok(())
    }

    fn field(&self, name: &str, f: &ScalarField) -> Result<()> {
        if self.cfg.wants(Format::Csv) {
            write_field_csv(&self.path(name), f)?;
        }
        Ok(())
    }

    fn branch(&mut self) -> Result<&ContinuationBranch> {
        if self.branch.is_none() {
            let b = continue_branch(&self.grid, self.cfg.lambda_max, self.cfg.continuation)?;
            self.branch = Some(b);
        }
        Ok(self.branch.as_ref().expect("branch computed above"))
    }

    fn lambdas(&mut self) -> Result<Vec<f64>> {
        if !self.cfg.lambdas.is_empty() {
            return Ok(self.cfg.lambdas.clone());
        }
        let ls = self.branch()?.lambda_star_estimate;
        Ok(DEFAULT_FRACTIONS.iter().map(|f| f * ls).collect())
    }

    fn newton_tol(&self, lambda: f64) -> f64 {
        self.cfg.tolerances.newton_tol.unwrap_or_else(|| default_newton_tol(lambda))
    }

    /// Minimal solution at `lambda`: from the branch when one exists,
    /// otherwise Newton from zero.
    fn solve(&self, lambda: f64) -> Result<SteadySolution> {
        match &self.branch {
            Some(b) => b.solve_at(lambda),
            None => newton_solve(&self.grid, lambda, &ScalarField::zeros(&self.grid), self.newton_tol(lambda)),
        }
    }

    fn sweep(&mut self) -> Result<()> {
        self.branch()?;
        let b = self.branch.as_ref().expect("branch computed above");
        self.json("branch.json", &b.summary())?;
        if self.cfg.wants(Format::Csv) {
            write_table_csv(
                &self.path("branch.csv"),
                ["index", "lambda", "max_phi", "mu1", "residual_norm", "newton_iterations"],
                b.points.iter().enumerate().map(|(i, p)| {
                    [
                        i.to_string(),
                        fmt_f64(p.lambda),
                        fmt_f64(p.max_phi),
                        fmt_f64(p.mu1),
                        fmt_f64(p.residual_norm),
                        p.newton_iterations.to_string(),
                    ]
                }),
            )?;
        }
        let summary: BranchSummary = b.summary();
        self.outcome.notes.push(format!(
            "branch: lambda_star_estimate = {}, termination = {:?}",
            summary.lambda_star_estimate, summary.termination_reason
        ));
        Ok(())
    }

    fn steady(&mut self) -> Result<()> {
        let mut out = Vec::new();
        for (i, &l) in self.lambdas()?.iter().enumerate() {
            let s = self.solve(l)?;
            self.outcome.at_most("newton_residual", Some(l), s.residual_norm, s.tolerance);
            self.outcome.above("minimal_mu1_positive", Some(l), s.mu1, 0.0);
            self.field(&format!("field_phi_{i}.csv"), &s.phi)?;
            out.push(s.summary());
        }
        self.json(
            "solution.json",
            &SolveOutput {
                domain: *self.grid.spec(),
                resolution: self.grid.resolution(),
                h: self.grid.spacing(),
                solutions: &out,
            },
        )
    }

    fn flow(&mut self) -> Result<()> {
        let mut runs = Vec::new();
        for (i, &l) in self.lambdas()?.iter().enumerate() {
            // Above λ* there is no steady state to compare with.
            let reference = match self.solve(l) {
                Ok(s) => Some(s),
                Err(e) => {
                    self.outcome.notes.push(format!("flow at lambda = {l}: no steady reference ({e})"));
                    None
                }
            };
            let u0 = match &reference {
                Some(s) => s.phi.map(|v| self.cfg.u0_fraction * v),
                None if self.cfg.u0_fraction == 0.0 => ScalarField::zeros(&self.grid),
                None => {
                    return Err(GelfandError::Flow(format!(
                        "u0_fraction > 0 needs a steady solution at lambda = {l}"
                    )))
                }
            };
            let rep = run_monitored(u0, l, &self.cfg.flow, reference.as_ref().map(|s| &s.phi))?;
            self.outcome.at_most("lyapunov_nonincreasing", Some(l), rep.max_lyapunov_increase(), LYAPUNOV_TOL);
            if let Some(v) = rep.max_comparison_violation {
                self.outcome.at_most("comparison_principle", Some(l), v, self.cfg.flow.comparison_tol);
            }
            let newton_distance = match (&reference, rep.converged) {
                (Some(s), true) => {
                    let d = rep.state.u.distance(&s.phi)?;
                    self.outcome.at_most("flow_newton_agreement", Some(l), d, AGREEMENT_TOL);
                    Some(d)
                }
                _ => None,
            };
            if let Some(bu) = rep.blow_up {
                self.outcome
                    .notes
                    .push(format!("flow at lambda = {l}: blow-up at t = {} (max u = {})", bu.t, bu.max_u));
            }
            if self.cfg.wants(Format::Csv) {
                write_table_csv(
                    &self.path(&format!("timeseries_{i}.csv")),
                    ["step", "t", "max_u", "lyapunov", "min_hessian_eig_w", "steady_residual"],
                    rep.series.iter().map(|r| {
                        [
                            r.step.to_string(),
                            fmt_f64(r.t),
                            fmt_f64(r.max_u),
                            fmt_f64(r.lyapunov),
                            fmt_f64(r.min_hessian_eig_w),
                            fmt_f64(r.steady_residual),
                        ]
                    }),
                )?;
                for (step, _, f) in &rep.snapshots {
                    self.field(&format!("snapshot_{i}_{step}.csv"), f)?;
                }
            }
            runs.push(FlowRun { summary: rep.summary(), u0_fraction: self.cfg.u0_fraction, newton_distance });
        }
        self.json(
            "flow.json",
            &FlowOutput { domain: *self.grid.spec(), resolution: self.grid.resolution(), runs: &runs },
        )
    }

    /// `λ̄` for the claims of this domain, refined by Newton solves: the ball
    /// threshold for `n ≥ 2`,
    /// `λ*` in one dimension (where `G = ½u_ν² + λ > 0` always), and the
    /// conservative estimate on the ellipse with `K` from `mixed`.
    fn claim_threshold(&mut self, mixed: f64) -> Result<(Option<LambdaBar>, f64, f64)> {
        let grid = Arc::clone(&self.grid);
        let b = self.branch()?;
        let ls = b.lambda_star_estimate;
        Ok(match *grid.spec() {
            DomainSpec::Interval { .. } | DomainSpec::RadialBall { dim: 1, .. } => (None, ls, 0.0),
            DomainSpec::RadialBall { .. } => {
                let lb = lambda_bar_refined(b, 0.0)?;
                (Some(lb), lb.lambda_bar, 0.0)
            }
            DomainSpec::Ellipse { .. } => {
                let k = default_k(&grid, mixed);
                let lb = lambda_bar_refined(b, k)?;
                (Some(lb), lb.lambda_bar, k)
            }
        })
    }

    fn mixed_ratio(&mut self, lambdas: &[f64]) -> Result<f64> {
        if self.grid.dimension() < 2 {
            return Ok(0.0);
        }
        self.branch()?;
        let mut m = 0.0f64;
        for &l in lambdas.iter().filter(|l| **l > 0.0) {
            m = m.max(mixed_derivative_ratio(&self.solve(l)?.phi)?.value);
        }
        Ok(m)
    }

    fn convexity(&mut self) -> Result<()> {
        let lambdas = self.lambdas()?;
        let mixed = self.mixed_ratio(&lambdas)?;
        let (_, threshold, k) = self.claim_threshold(mixed)?;
        let ls = self.branch()?.lambda_star_estimate;
        let is_ellipse = matches!(self.grid.spec(), DomainSpec::Ellipse { .. });
        let mut reports = Vec::new();
        for (i, &l) in lambdas.iter().enumerate() {
            let s = self.solve(l)?;
            let (mut rep, hess) = convexity_report(&s.phi, l, is_ellipse.then_some(k))?;
            if let Some(t) = self.cfg.tolerances.conv_tol {
                rep.conv_tol = t;
                rep.convex = rep.min_interior_eig >= -t;
            }
            if l > 0.0 && l < threshold {
                self.outcome.at_most("f_convexity", Some(l), -rep.min_interior_eig, rep.conv_tol);
                self.outcome.above("c1_positive", Some(l), rep.c1_estimate, 0.0);
                self.outcome.above("boundary_g_positive", Some(l), rep.boundary_min_g.value, 0.0);
            }
            self.field(&format!("hessian_field_{i}.csv"), &hess.field)?;
            reports.push(rep);
        }
        self.json(
            "convexity.json",
            &ConvexityOutput {
                domain: *self.grid.spec(),
                resolution: self.grid.resolution(),
                lambda_star_estimate: ls,
                lambda_bar: threshold,
                reports: &reports,
            },
        )
    }

    fn barriers(&mut self) -> Result<()> {
        let lambdas = self.lambdas()?;
        let mixed = self.mixed_ratio(&lambdas)?;
        let (lb, threshold, k) = self.claim_threshold(mixed)?;
        let b = self.branch()?;
        let ls = b.lambda_star_estimate;
        let table = b.table();
        let is_ball = matches!(self.grid.spec(), DomainSpec::RadialBall { .. });
        if !is_ball && !matches!(self.grid.spec(), DomainSpec::Ellipse { .. }) {
            return Err(GelfandError::Barriers(format!(
                "barriers need a ball or an ellipse (got {})",
                self.grid.spec().kind_name()
            )));
        }
        if let Some(lb) = lb {
            self.outcome.above("lambda_bar_positive", None, lb.lambda_bar, 0.0);
            if is_ball {
                self.outcome.at_most("lambda_bar_below_lambda_star", None, lb.lambda_bar, ls);
            }
        }
        let mut samples = Vec::new();
        if threshold > 0.0 && lb.is_some() {
            for f in G_SAMPLES {
                let l = f * threshold;
                let s = self.solve(l)?;
                let g = boundary_g(&s.phi, l, k)?.value;
                self.outcome.above("boundary_g_positive", Some(l), g, 0.0);
                samples.push(GSample { lambda: l, g_min: g });
            }
        }
        let mut reports = Vec::new();
        if is_ball {
            for (i, &l) in lambdas.iter().enumerate() {
                if l <= 0.0 {
                    self.outcome.notes.push("barriers skipped at lambda = 0".into());
                    continue;
                }
                let s = self.solve(l)?;
                let (mut rep, viol) = check_barriers(&s, (self.grid.dimension() >= 2).then_some(table.as_slice()))?;
                if let Some(t) = self.cfg.tolerances.barrier_tol {
                    rep.barrier_tol = t;
                }
                self.outcome.at_most("barrier_lower", Some(l), rep.lower_violation, rep.barrier_tol);
                self.outcome.at_most("barrier_upper", Some(l), rep.upper_violation, rep.barrier_tol);
                self.outcome.claims.push(Claim {
                    name: "normal_derivative_bounds".into(),
                    lambda: Some(l),
                    holds: rep.phi_nu_bounds_ok,
                    value: rep.phi_nu,
                    bound: rep.phi_nu_bounds[1],
                });
                self.field(&format!("barrier_violation_{i}.csv"), &viol)?;
                reports.push(rep);
            }
        }
        self.json(
            "barriers.json",
            &BarriersOutput {
                domain: *self.grid.spec(),
                resolution: self.grid.resolution(),
                lambda_star_estimate: ls,
                lambda_bar: lb,
                k_used: k,
                g_samples: &samples,
                reports: &reports,
            },
        )
    }
}

/// Run the configured pipeline and write its artifacts.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let started = Instant::now();
    fs::create_dir_all(&cfg.out)?;
    let grid = Arc::new(build_grid(cfg.domain, cfg.resolution)?);
    let mut r = Runner { cfg, grid, outcome: Outcome::default(), branch: None };
    match cfg.mode {
        Mode::Solve => r.steady()?,
        Mode::Flow => r.flow()?,
        Mode::Sweep => r.sweep()?,
        Mode::Convexity => r.convexity()?,
        Mode::Barriers => r.barriers()?,
        Mode::All => {
            r.sweep()?;
            r.steady()?;
            r.flow()?;
            r.convexity()?;
            if r.grid.dimension() >= 2 || matches!(cfg.domain, DomainSpec::RadialBall { .. }) {
                r.barriers()?;
            } else {
                r.outcome.notes.push("barriers skipped: the interval is not a ball".into());
            }
        }
    }
    r.json("claims.json", &r.outcome)?;
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    write_run_meta(
        &cfg.out,
        &[
            ("version", env!("CARGO_PKG_VERSION").to_string()),
            ("mode", format!("{:?}", cfg.mode).to_lowercase()),
            ("finished_unix", unix.to_string()),
            ("elapsed_seconds", format!("{:.3}", started.elapsed().as_secs_f64())),
            ("config", format!("{cfg:?}")),
        ],
    )?;
    Ok(r.outcome)
}

/// Entry point for the binary: parses `args`, runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { 1 } else { 0 };
        }
    };
    let result = from_cli(cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(o) => {
            for n in &o.notes {
                eprintln!("note: {n}");
            }
            for c in o.claims.iter().filter(|c| !c.holds) {
                eprintln!(
                    "claim violated: {} at lambda = {:?}: value {} vs bound {}",
                    c.name, c.lambda, c.value, c.bound
                );
            }
            if o.all_hold() {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<&str> {
        std::iter::once("gelfand").chain(s.split_whitespace()).collect()
    }

    #[test]
    fn flag_mapping() {
        let c = parse_args(args("sweep --domain ball --dim 1 --radius 0.5 --resolution 801")).unwrap();
        assert_eq!(c.mode, Mode::Sweep);
        assert_eq!(c.domain, DomainSpec::ball(1, 0.5));
        assert_eq!(c.resolution, 801);
        let mut expect = RunConfig::new(Mode::Sweep, DomainSpec::ball(1, 0.5), 801);
        expect.formats.sort_by_key(|f| *f as u8);
        assert_eq!(c, expect);
    }

    #[test]
    fn invariants_reported_together() {
        let e = parse_args(args("solve --domain ellipse --a 1 --b 2 --resolution 5 --newton-tol 0"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("require a ≥ b"), "{e}");
        assert!(e.contains("newton_tol must be > 0"), "{e}");
        assert!(e.contains("resolution 5"), "{e}");
        assert!(e.contains("lambda is required"), "{e}");
    }

    #[test]
    fn file_config_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(
            &p,
            "[domain]\nkind = \"ball\"\ndim = 3\nresolution = 201\n[run]\nlambda = [0.2, 0.4]\n[flow]\nmax_steps = 10\n",
        )
        .unwrap();
        let c = parse_config_file(&p, Mode::Flow).unwrap();
        assert_eq!(c.domain, DomainSpec::ball(3, 1.0));
        assert_eq!(c.lambdas, vec![0.2, 0.4]);
        assert_eq!(c.flow.max_steps, 10);
        let s = format!("flow --config {} --lambda 0.3 --dim 2", p.display());
        let c = parse_args(args(&s)).unwrap();
        assert_eq!(c.domain, DomainSpec::ball(2, 1.0));
        assert_eq!(c.lambdas, vec![0.3]);

        fs::write(&p, "[tolerances]\nnewton_tol = 0.0\n").unwrap();
        let e = parse_config_file(&p, Mode::Sweep).unwrap_err().to_string();
        assert!(e.contains("newton_tol must be > 0"), "{e}");
        fs::write(&p, "[domain]\nradious = 2.0\n").unwrap();
        let e = parse_config_file(&p, Mode::Sweep).unwrap_err().to_string();
        assert!(e.contains("radious"), "{e}");
    }
}
