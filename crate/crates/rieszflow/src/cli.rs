//! Command-line front end: one JSON report per run in its own directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::asymptotics::{self, Check, SweepReport};
use crate::cache::{obtain_operator, OperatorCache};
use crate::config::{parse_config, RunConfig};
use crate::energy;
use crate::error::Error;
use crate::evolve::{self, RunStatus};
use crate::grid::{ModelParams, ProfileKind, RadialDensity, RadialGrid};
use crate::riesz::RieszOperator;
use crate::steady::{self, Stationarity, SteadyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Stationary state of mass M.
    Steady,
    /// Normalized extremal and the sharp constant H*.
    Hls,
    /// Critical mass at m = m_c.
    Mc,
    /// Gradient-flow run from a perturbed steady state or a fixture.
    Evolve,
    /// Minimizers along decreasing s against the limit profile.
    SweepS,
    /// The m = p' sweep.
    FairLimit,
    /// Energy of a fixed density along decreasing s.
    Gamma,
    /// Energy breakdown and regime of a fixture.
    Energy,
}

#[derive(Debug, Parser)]
#[command(
    name = "rieszflow",
    version,
    about = "Aggregation-diffusion with a nonlinear Riesz potential"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Parent directory for the run directory [default: config `out`, else rieszflow-out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps and operator builds.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: String,
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct OperatorInfo {
    #[serde(rename = "N")]
    n_dim: usize,
    a: f64,
    n: usize,
    #[serde(rename = "R_dom")]
    r_dom: f64,
    sha256: String,
}

struct Output {
    result: Value,
    contracts: Vec<Check>,
    files: Vec<(String, String)>,
    summary: String,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    cache: Option<OperatorCache>,
    operators: Vec<OperatorInfo>,
}

impl Ctx<'_> {
    fn params(&self) -> &ModelParams {
        &self.cfg.model
    }

    fn grid(&self) -> crate::Result<Arc<RadialGrid>> {
        self.cfg.grid.build(self.cfg.model.n_dim)
    }

    fn operator(&mut self, grid: &Arc<RadialGrid>, a: f64) -> crate::Result<RieszOperator> {
        let (op, src) = obtain_operator(self.cache.as_ref(), grid, a)?;
        self.operators.push(OperatorInfo {
            n_dim: grid.n_dim(),
            a,
            n: grid.len(),
            r_dom: grid.r_dom(),
            sha256: src.sha256,
        });
        Ok(op)
    }

    fn half_operator(&mut self) -> crate::Result<RieszOperator> {
        let grid = self.grid()?;
        self.operator(&grid, self.params().half_order())
    }

    /// Records the operators a sweep built on `grid`.
    fn note_sweep(&mut self, grid: &RadialGrid, rows: &[asymptotics::SweepRow]) {
        for r in rows {
            if let Some(sha) = &r.operator_sha256 {
                self.operators.push(OperatorInfo {
                    n_dim: grid.n_dim(),
                    a: r.s / 2.0,
                    n: grid.len(),
                    r_dom: grid.r_dom(),
                    sha256: sha.clone(),
                });
            }
        }
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn to_value<T: Serialize>(x: &T) -> crate::Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn default_fixture(p: &ModelParams, grid: &RadialGrid) -> ProfileKind {
    ProfileKind::Indicator {
        radius: 0.8 * (p.mass / grid.omega()).powf(1.0 / p.dim()),
    }
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Parameter { .. }
        | Error::Config(_)
        | Error::Regime(_)
        | Error::Truncation(_)
        | Error::GridMismatch(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let out = execute(&cli);
    if out.exit_code == EXIT_OK || out.exit_code == EXIT_DIVERGENCE {
        println!("{}", out.summary);
    } else {
        eprintln!("{}", out.summary);
    }
    out.exit_code
}

pub fn execute(cli: &Cli) -> Outcome {
    let fail = |code: i32, summary: String| Outcome {
        exit_code: code,
        summary,
        run_dir: None,
    };
    let text = match fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            return fail(
                EXIT_CONFIG,
                format!("cannot read {}: {e}", cli.config.display()),
            )
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e.to_string()),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let cache = match OperatorCache::from_env() {
        Ok(c) => c,
        Err(e) => return fail(EXIT_NUMERICAL, format!("operator cache: {e}")),
    };
    let mut ctx = Ctx {
        cfg: &cfg,
        cache,
        operators: Vec::new(),
    };
    let result = match cli.threads {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, &mut ctx)),
            Err(e) => return fail(EXIT_CONFIG, format!("--threads {k}: {e}")),
        },
        None => dispatch(cli.command, &mut ctx),
    };
    let output = match result {
        Ok(o) => o,
        Err(e) => return fail(exit_code_for(&e), format!("{}: {e}", name_of(cli.command))),
    };
    let passed = output.contracts.iter().all(|c| c.passed);
    let report = json!({
        "command": cli.command,
        "config": cfg,
        "operators": ctx.operators,
        "passed": passed,
        "contracts": output.contracts,
        "result": output.result,
    });
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("rieszflow-out"));
    let dir = match write_run(&out_dir, cli.command, &cfg, &report, &output.files) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_NUMERICAL, format!("writing results: {e}")),
    };
    let failed: Vec<&str> = output
        .contracts
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    let tail = if failed.is_empty() {
        "[ok]".to_string()
    } else {
        format!("[failed: {}]", failed.join(", "))
    };
    Outcome {
        exit_code: if passed { EXIT_OK } else { EXIT_DIVERGENCE },
        summary: format!(
            "{}: {} {tail} -> {}",
            name_of(cli.command),
            output.summary,
            dir.display()
        ),
        run_dir: Some(dir),
    }
}

fn name_of(c: Command) -> String {
    c.to_possible_value()
        .map_or_else(String::new, |v| v.get_name().to_string())
}

/// Creates `<out>/<command>-<config digest>[-k]`; the first free name wins.
fn write_run(
    out: &Path,
    command: Command,
    cfg: &RunConfig,
    report: &Value,
    files: &[(String, String)],
) -> crate::Result<PathBuf> {
    fs::create_dir_all(out)?;
    let digest = hex::encode(Sha256::digest(serde_json::to_vec(cfg)?));
    let stem = format!("{}-{}", name_of(command), &digest[..12]);
    let mut dir = out.join(&stem);
    let mut k = 1;
    loop {
        match fs::create_dir(&dir) {
            Ok(()) => break,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                k += 1;
                dir = out.join(format!("{stem}-{k}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    for (name, body) in files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, body)?;
    }
    Ok(dir)
}

fn dispatch(command: Command, ctx: &mut Ctx) -> crate::Result<Output> {
    match command {
        Command::Steady => run_steady(ctx),
        Command::Hls => run_hls(ctx),
        Command::Mc => run_mc(ctx),
        Command::Evolve => run_evolve(ctx),
        Command::SweepS => run_sweep(ctx, false),
        Command::FairLimit => run_sweep(ctx, true),
        Command::Gamma => run_gamma(ctx),
        Command::Energy => run_energy(ctx),
    }
}

/// Contracts every converged stationary state should meet.
pub fn steady_contracts(p: &ModelParams, r: &SteadyReport, fp_tol: f64) -> Vec<Check> {
    let mut c = vec![
        check(
            "converged",
            r.converged,
            format!("el_residual {:.3e} against {fp_tol:.1e}", r.el_residual),
        ),
        check("monotone", r.monotone, String::new()),
        check(
            "sup_at_origin",
            r.rho.values().first() == Some(&r.sup_norm),
            format!("sup {:.6e}", r.sup_norm),
        ),
        check(
            "compact_support",
            !r.edge_supported,
            format!(
                "support radius {:.6e}, R_dom {}",
                r.support_radius, r.grid.r_dom
            ),
        ),
    ];
    match r.stationarity {
        Stationarity::Minimizer => {
            let ls = r.energy.lambda_star.unwrap_or(f64::NAN);
            c.push(check(
                "optimal_dilation_is_one",
                (ls - 1.0).abs() < 1e-3,
                format!("lambda_* = {ls:.9}"),
            ));
            c.push(check(
                "identity_defect",
                r.identity_defect < 1e-3,
                format!("{:.3e}", r.identity_defect),
            ));
            let rel = p.p_star() / p.p_conj() * (p.m_c() - p.m) / (p.m - 1.0) * r.energy.norm_m_m;
            let gap = (r.energy.free_energy - rel).abs() / rel.abs();
            c.push(check(
                "minimizer_energy_relation",
                gap < 1e-3,
                format!("F = {:.9e}, predicted {rel:.9e}", r.energy.free_energy),
            ));
        }
        Stationarity::SaddleWrtDilations => c.push(check(
            "dilation_maximum",
            r.dilation_shape == Some(steady::DilationShape::Maximum),
            format!("{:?}", r.dilation_shape),
        )),
        Stationarity::Extremal => {}
    }
    c
}

fn run_steady(ctx: &mut Ctx) -> crate::Result<Output> {
    let op = ctx.half_operator()?;
    let p = *ctx.params();
    let r = steady::solve_el(&p, &ctx.cfg.solver, &op)?;
    let contracts = steady_contracts(&p, &r, ctx.cfg.solver.fp_tol);
    Ok(Output {
        summary: format!(
            "el_residual={:.3e} energy={:.9e} support_radius={:.6} ({:?})",
            r.el_residual, r.energy.free_energy, r.support_radius, r.stationarity
        ),
        files: vec![("profile.csv".into(), r.rho.to_csv())],
        result: to_value(&r)?,
        contracts,
    })
}

/// Checks on a normalized extremal, including 50 random monotone fixtures.
pub fn extremal_contracts<R: Rng>(
    p: &ModelParams,
    op: &RieszOperator,
    r: &SteadyReport,
    rng: &mut R,
) -> crate::Result<Vec<Check>> {
    let l1 = r.rho.mass();
    let lm = r.rho.lp_norm(p.m)?;
    let opx = steady::operator_on(op, r.rho.grid())?;
    let c = energy::el_constants_extremal(p, &r.rho, &opx)?;
    let mine = r.constants.unwrap_or(c);
    let rel = ((c.a_s - mine.a_s) / c.a_s)
        .abs()
        .max(((c.c_s - mine.c_s) / c.c_s).abs());
    let q = r.energy.hls_quotient;
    let mut best = 0.0f64;
    for _ in 0..50 {
        let f = steady::random_monotone_profile(op.grid(), rng);
        best = best.max(energy::free_energy(p, op, &f)?.hls_quotient);
    }
    Ok(vec![
        check(
            "normalization",
            (l1 - 1.0).abs() <= 1e-8 && (lm - 1.0).abs() <= 1e-8,
            format!("|h|_1 = {l1:.15}, |h|_m = {lm:.15}"),
        ),
        check(
            "el_residual",
            r.el_residual < 1e-5,
            format!("{:.3e}", r.el_residual),
        ),
        check(
            "constants_match",
            rel < 1e-3,
            format!("relative gap {rel:.3e}"),
        ),
        check(
            "beats_random_fixtures",
            q >= best,
            format!("quotient {q:.9e}, best of 50 random {best:.9e}"),
        ),
        check("monotone", r.monotone, String::new()),
    ])
}

fn run_hls(ctx: &mut Ctx) -> crate::Result<Output> {
    let op = ctx.half_operator()?;
    let p = *ctx.params();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let (est, r) =
        steady::estimate_hstar(&p, &ctx.cfg.solver, &op, ctx.cfg.random_inits, &mut rng)?;
    let mut contracts = extremal_contracts(&p, &op, &r, &mut rng)?;
    contracts.push(check(
        "below_upper_bound",
        est.below_bound,
        format!("H* = {:.9e}, H_s^p' = {:.9e}", est.value, est.upper_bound),
    ));
    contracts.push(check(
        "random_inits_agree",
        est.agree,
        format!("relative spread {:.3e}", est.relative_spread),
    ));
    Ok(Output {
        summary: format!(
            "H*={:.12e} bound={:.6e} spread={:.2e}",
            est.value, est.upper_bound, est.relative_spread
        ),
        files: vec![("extremal.csv".into(), r.rho.to_csv())],
        result: json!({ "hstar": est, "extremal": r }),
        contracts,
    })
}

fn run_mc(ctx: &mut Ctx) -> crate::Result<Output> {
    let op = ctx.half_operator()?;
    let p = *ctx.params();
    let (study, ext) = steady::critical_mass_study(&p, &ctx.cfg.solver, &op)?;
    let ratio = study.energy_at_mc.abs() / study.interaction_at_mc;
    let contracts = vec![
        check(
            "extremal_converged",
            ext.converged,
            format!("el_residual {:.3e}", ext.el_residual),
        ),
        check(
            "energy_vanishes_at_mc",
            study.vanishes,
            format!("|F|/interaction = {ratio:.3e}"),
        ),
        check(
            "supercritical_dilation_negative",
            study.blow_down,
            format!(
                "min F = {:.6e}",
                study
                    .supercritical
                    .iter()
                    .map(|x| x.1)
                    .fold(f64::INFINITY, f64::min)
            ),
        ),
    ];
    Ok(Output {
        summary: format!(
            "M_c={:.12e} H*={:.9e} |F(M_c h)|/interaction={ratio:.2e}",
            study.critical_mass, study.hstar
        ),
        files: vec![("extremal.csv".into(), ext.rho.to_csv())],
        result: json!({ "critical_mass": study, "extremal": ext }),
        contracts,
    })
}

fn perturb(rho: &RadialDensity, noise: f64, mass: f64, seed: u64) -> crate::Result<RadialDensity> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = rho
        .values()
        .iter()
        .map(|x| x * (1.0 + noise * rng.gen_range(-1.0..=1.0)))
        .collect();
    let d = RadialDensity::new(rho.grid().clone(), v)?;
    let m = d.mass();
    d.scaled(mass / m)
}

fn run_evolve(ctx: &mut Ctx) -> crate::Result<Output> {
    let op = ctx.half_operator()?;
    let p = *ctx.params();
    let grid = op.grid().clone();
    let reference = if p.m > p.m_c() && !p.is_critical() {
        Some(steady::solve_el(&p, &ctx.cfg.solver, &op)?)
    } else {
        None
    };
    let init = match (ctx.cfg.fixture, &reference) {
        (Some(kind), _) => RadialDensity::profile(grid.clone(), kind, p.mass)?,
        (None, Some(r)) => perturb(&r.rho, ctx.cfg.noise, p.mass, ctx.cfg.seed)?,
        (None, None) => RadialDensity::profile(grid.clone(), default_fixture(&p, &grid), p.mass)?,
    };
    let refd = reference.as_ref().map(|r| &r.rho);
    let run = evolve::run(&p, &op, &init, &ctx.cfg.evolve, refd)?;
    let mut contracts = vec![
        check(
            "mass_conserved",
            run.mass_drift < 1e-10,
            format!("drift {:.3e}", run.mass_drift),
        ),
        check(
            "energy_nonincreasing",
            run.energy_violations == 0,
            format!(
                "{} violations, max rise {:.3e}",
                run.energy_violations, run.max_energy_rise
            ),
        ),
        check(
            "no_blowup",
            run.status != RunStatus::BlowupSuspected,
            format!("{:?}", run.status),
        ),
        check(
            "within_step_limit",
            run.status != RunStatus::StepLimit,
            format!("{} steps", run.steps),
        ),
    ];
    if reference.is_some() {
        contracts.push(check(
            "relaxed_to_steady",
            run.converged,
            format!(
                "final L1 distance {:.3e}",
                run.record
                    .dist_ref
                    .last()
                    .copied()
                    .flatten()
                    .unwrap_or(f64::NAN)
            ),
        ));
    }
    let mut files = vec![
        ("trajectory.csv".to_string(), run.record.to_csv()),
        ("final_profile.csv".to_string(), run.final_rho.to_csv()),
    ];
    for (k, (_, snap)) in run.snapshots.iter().enumerate() {
        files.push((format!("snapshots/profile_{k:05}.csv"), snap.to_csv()));
    }
    Ok(Output {
        summary: format!(
            "status={:?} steps={} t={:.6e} mass_drift={:.2e}",
            run.status, run.steps, run.t_final, run.mass_drift
        ),
        result: json!({
            "run": run,
            "snapshot_times": run.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(),
            "reference": reference,
        }),
        files,
        contracts,
    })
}

fn sweep_files(report: &SweepReport) -> Vec<(String, String)> {
    let mut files = vec![("sweep.csv".to_string(), report.to_csv())];
    for r in &report.rows {
        if let Some(rho) = &r.profile {
            files.push((format!("profiles/s_{}.csv", r.s), rho.to_csv()));
        }
    }
    files
}

fn run_sweep(ctx: &mut Ctx, fair: bool) -> crate::Result<Output> {
    let p = *ctx.params();
    let grid = ctx.grid()?;
    let s_list = ctx
        .cfg
        .s_list
        .clone()
        .unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]);
    let report = if fair {
        asymptotics::fair_limit_study(&p, &s_list, &ctx.cfg.solver, &grid, ctx.cache.as_ref())?
    } else {
        asymptotics::sweep_s(&p, &s_list, &ctx.cfg.solver, &grid, ctx.cache.as_ref())?
    };
    ctx.note_sweep(&grid, &report.rows);
    let last = report.rows.last();
    let summary = match (fair, last) {
        (false, Some(r)) => format!(
            "final L1_err={} energy={}",
            r.l1_err.map_or("-".into(), |x| format!("{x:.6e}")),
            r.energy.map_or("-".into(), |x| format!("{x:.9e}"))
        ),
        (true, Some(r)) => format!(
            "final sup_norm={} support_radius={} energy={}",
            r.sup_norm.map_or("-".into(), |x| format!("{x:.6e}")),
            r.support_radius.map_or("-".into(), |x| format!("{x:.6e}")),
            r.energy.map_or("-".into(), |x| format!("{x:.6e}"))
        ),
        (_, None) => String::new(),
    };
    let mut contracts = report.checks.clone();
    if contracts.is_empty() {
        contracts.push(check(
            "all_rows_converged",
            report.all_rows_ok(),
            String::new(),
        ));
    }
    Ok(Output {
        summary,
        files: sweep_files(&report),
        result: to_value(&report)?,
        contracts,
    })
}

fn fixture_density(ctx: &Ctx, grid: &Arc<RadialGrid>) -> crate::Result<RadialDensity> {
    let p = ctx.params();
    match ctx.cfg.fixture {
        Some(kind) => RadialDensity::profile(grid.clone(), kind, p.mass),
        None if p.m > p.p_conj() => Ok(asymptotics::limit_profile(p, grid)?.density),
        None => RadialDensity::profile(grid.clone(), default_fixture(p, grid), p.mass),
    }
}

fn run_gamma(ctx: &mut Ctx) -> crate::Result<Output> {
    let p = *ctx.params();
    let grid = ctx.grid()?;
    let rho = fixture_density(ctx, &grid)?;
    let s_list = ctx
        .cfg
        .s_list
        .clone()
        .unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05, 0.01, 0.001]);
    let table = asymptotics::gamma_probe(&p, &rho, &s_list, ctx.cache.as_ref())?;
    for s in &s_list {
        let (_, src) = obtain_operator(ctx.cache.as_ref(), &grid, s / 2.0)?;
        ctx.operators.push(OperatorInfo {
            n_dim: grid.n_dim(),
            a: s / 2.0,
            n: grid.len(),
            r_dom: grid.r_dom(),
            sha256: src.sha256,
        });
    }
    let last = table.rows.last().map_or(f64::NAN, |r| r.relative_gap);
    let contracts = vec![
        check(
            "gap_decreasing",
            table.gap_trend.holds,
            format!("{} violations", table.gap_trend.violations),
        ),
        check(
            "final_gap_below_one_percent",
            table.final_below_one_percent,
            format!("{last:.3e}"),
        ),
    ];
    let mut csv = String::from("s,energy,gap,relative_gap\n");
    for r in &table.rows {
        csv.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e}\n",
            r.s, r.energy, r.gap, r.relative_gap
        ));
    }
    Ok(Output {
        summary: format!(
            "F_0={:.9e} final relative gap={last:.3e}",
            table.limit_energy
        ),
        files: vec![
            ("gamma.csv".into(), csv),
            ("density.csv".into(), rho.to_csv()),
        ],
        result: to_value(&table)?,
        contracts,
    })
}

fn run_energy(ctx: &mut Ctx) -> crate::Result<Output> {
    let p = *ctx.params();
    let op = ctx.half_operator()?;
    let rho = fixture_density(ctx, op.grid())?;
    let b = energy::free_energy(&p, &op, &rho)?;
    let regime = energy::classify_regime(&p, ctx.cfg.hstar).ok();
    let bound = energy::hls_upper_bound(&p).ok();
    let mut contracts = vec![check(
        "finite",
        b.free_energy.is_finite(),
        format!("F = {:.9e}", b.free_energy),
    )];
    if let (Some(ls), Some(lv), Some(k)) = (b.lambda_star, b.lambda_value, b.kappa) {
        let at = energy::dilation_profile(&p, &b, ls);
        let gap = (at - k * lv).abs() / (k * lv).abs();
        contracts.push(check(
            "optimal_dilation_value",
            gap < 1e-8,
            format!("F(rho^lambda*) = {at:.12e}, kappa*Lambda = {:.12e}", k * lv),
        ));
    }
    Ok(Output {
        summary: format!(
            "F={:.12e} hls_quotient={:.9e} lambda_*={}",
            b.free_energy,
            b.hls_quotient,
            b.lambda_star.map_or("-".into(), |x| format!("{x:.9}"))
        ),
        files: vec![("density.csv".into(), rho.to_csv())],
        result: json!({ "energy": b, "regime": regime, "hls_upper_bound": bound }),
        contracts,
    })
}
