//! Command-line front end.
//!
//! Every subcommand reads a [`Config`] (file plus flag overrides), writes its
//! CSV/JSON artifacts to `output_dir`, and prints one summary line per check.
//! Exit codes: 0 success, 1 negative verdict, 2 configuration error, 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::catalog;
use crate::config::{key_reference, Config};
use crate::error::{Error, Result};
use crate::flow::{first_integral_defect, flow};
use crate::integrability::{weak_integrability_verdict, IntegralFamily, VerdictOptions};
use crate::lie::{
    conservation_summary, integrate_rigid_body, momentum_independence_check, momentum_involution_check,
    random_states, InertiaOperator, RigidBodyState,
};
use crate::sampling::{phase_samples, DEFAULT_MOMENTUM_BOX, DEFAULT_SAMPLE_COUNT};
use crate::system::{poisson_bracket, PhasePoint, TonelliSystem};
use crate::weakkam::{
    alpha_table, beta_from_alpha, energy_level_check, oracle, solve_weak_kam, AlphaTable, DiscreteActionParams,
    LaxOleinik, SolverOptions, WeakKamResult,
};

/// Environment variable fixing the number of worker threads.
pub const WORKERS_ENV: &str = "TONELLI_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const DEFAULT_DELTA: f64 = 1e-3;
const RIGID_BODY_STATES: usize = 100;

#[derive(Parser, Debug)]
#[command(name = "tonelli", version, about = "Weak KAM and integrability experiments for Tonelli Hamiltonians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file of `key = value` lines; flags override its entries.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Print summaries as one JSON object per line.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Poisson bracket {f, g} over a phase-space sample set.
    Bracket,
    /// Hamiltonian flow of an observable from (x0, p0).
    Flow,
    /// Effective Hamiltonian α over a grid of cohomology classes.
    Alpha,
    /// Critical subsolution, Aubry set and rotation vector for one class.
    Weakkam,
    /// Projected Aubry set for one class, cross-checked on small 1-D grids.
    Aubry,
    /// Mather's β function by discrete conjugation of an α table.
    Beta,
    /// Weak-integrability verdict for a family of integrals.
    Check,
    /// Free rigid body on SO(3).
    Rigidbody,
    /// List the accepted configuration keys.
    Keys,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Bracket => "bracket",
            Command::Flow => "flow",
            Command::Alpha => "alpha",
            Command::Weakkam => "weakkam",
            Command::Aubry => "aubry",
            Command::Beta => "beta",
            Command::Check => "check",
            Command::Rigidbody => "rigidbody",
            Command::Keys => "keys",
        }
    }
}

macro_rules! overrides {
    ($($field:ident, $long:literal, $key:literal;)*) => {
        /// Flag overrides of configuration keys.
        #[derive(Args, Debug, Default, Clone)]
        pub struct Overrides {
            $(
                #[arg(long = $long, global = true, allow_hyphen_values = true, value_name = "VALUE", help_heading = "Configuration")]
                pub $field: Option<String>,
            )*
            /// Any configuration key, as `key=value`.
            #[arg(long = "set", global = true, value_name = "KEY=VALUE", help_heading = "Configuration")]
            pub set: Vec<String>,
        }

        impl Overrides {
            pub fn to_config(&self) -> Result<Config> {
                let mut cfg = Config::new();
                $(
                    if let Some(v) = &self.$field {
                        cfg.set($key, v)?;
                    }
                )*
                for kv in &self.set {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::config("set", format!("expected key=value, got `{kv}`")))?;
                    cfg.set(k, v)?;
                }
                Ok(cfg)
            }
        }
    };
}

overrides! {
    system, "system", "system";
    dim, "dim", "dim";
    eps, "eps", "eps";
    mass, "mass", "mass";
    shift, "shift", "shift";
    linear, "linear", "linear";
    terms, "terms", "terms";
    n, "N", "n";
    h, "h", "h";
    vmax, "vmax", "vmax";
    quadrature, "quadrature", "quadrature";
    c, "c", "c";
    c_grid, "c-grid", "c_grid";
    h_grid, "h-grid", "h_grid";
    delta, "delta", "delta";
    tol, "tol", "tol";
    max_iter, "max-iter", "max_iter";
    relaxation, "relaxation", "relaxation";
    tol_aubry, "tol-aubry", "tol_aubry";
    rotation_steps, "rotation-steps", "rotation_steps";
    integrals, "integrals", "integrals";
    f, "f", "f";
    g, "g", "g";
    x0, "x0", "x0";
    p0, "p0", "p0";
    t, "t", "t";
    dt, "dt", "dt";
    seed, "seed", "seed";
    output_dir, "output-dir", "output_dir";
    samples, "samples", "samples";
    momentum_box, "momentum-box", "momentum_box";
    sv_tol, "sv-tol", "sv_tol";
    inertia, "inertia", "inertia";
    attitude, "attitude", "attitude";
    output_stride, "output-stride", "output_stride";
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerdictFailed,
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Success) => EXIT_OK,
        Ok(Outcome::VerdictFailed) => EXIT_VERDICT_FAILED,
        Err(e) if e.is_config() => EXIT_CONFIG,
        Err(_) => EXIT_NUMERICAL,
    }
}

/// Parses `args` (program name first), runs the subcommand, and returns the exit code.
/// Summaries go to `out`, diagnostics to `err`.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = run(&cli, out);
    if let Err(e) = &result {
        let stage = cli.command.name();
        let _ = writeln!(err, "error: {stage}: {e}");
    }
    exit_code(&result)
}

/// Sizes the global worker pool from the environment; a no-op when unset or already built.
pub fn init_workers() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::config(WORKERS_ENV, format!("`{v}` is not a worker count")))?;
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// The configuration file merged with the flag overrides.
pub fn effective_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::new(),
    };
    cfg.merge(&cli.overrides.to_config()?);
    Ok(cfg)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    let cfg = effective_config(cli)?;
    if cli.command == Command::Keys {
        write!(out, "{}", key_reference())?;
        return Ok(Outcome::Success);
    }
    let mut ctx = Context::new(cli.command.name(), cfg, cli.json, out)?;
    match cli.command {
        Command::Bracket => bracket(&mut ctx),
        Command::Flow => flow_cmd(&mut ctx),
        Command::Alpha => alpha(&mut ctx),
        Command::Weakkam => weakkam(&mut ctx),
        Command::Aubry => aubry(&mut ctx),
        Command::Beta => beta(&mut ctx),
        Command::Check => check(&mut ctx),
        Command::Rigidbody => rigidbody(&mut ctx),
        Command::Keys => unreachable!("handled above"),
    }
}

struct Context<'a> {
    command: &'static str,
    cfg: Config,
    hash: String,
    seed: u64,
    dir: PathBuf,
    json: bool,
    out: &'a mut dyn Write,
}

impl<'a> Context<'a> {
    fn new(command: &'static str, cfg: Config, json: bool, out: &'a mut dyn Write) -> Result<Self> {
        let hash = cfg.hash(command);
        let seed = cfg.seed()?;
        let dir = cfg.output_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::config("output_dir", format!("{}: {e}", dir.display())))?;
        Ok(Context {
            command,
            cfg,
            hash,
            seed,
            dir,
            json,
            out,
        })
    }

    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn create(&self, file: &str) -> Result<BufWriter<File>> {
        let path = self.path(file);
        let f = File::create(&path).map_err(|e| Error::config("output_dir", format!("{}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    /// One summary line: `name key=value ...` or a JSON object.
    fn line(&mut self, name: &str, fields: Vec<(&str, Value)>) -> Result<()> {
        if self.json {
            let mut obj = serde_json::Map::new();
            obj.insert("check".into(), Value::String(name.into()));
            for (k, v) in fields {
                obj.insert(k.into(), v);
            }
            writeln!(self.out, "{}", Value::Object(obj))?;
        } else {
            let parts: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={}", plain(v))).collect();
            writeln!(self.out, "{name} {}", parts.join(" "))?;
        }
        Ok(())
    }

    /// Writes `<command>.json` with provenance, tolerances and results.
    fn report(&mut self, tolerances: Value, results: Value) -> Result<()> {
        let report = json!({
            "command": self.command,
            "config_hash": self.hash,
            "seed": self.seed,
            "config": self.cfg.entries(),
            "tolerances": tolerances,
            "results": results,
        });
        let file = format!("{}.json", self.command);
        let mut w = self.create(&file)?;
        serde_json::to_writer_pretty(&mut w, &report).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        let hash = self.hash.clone();
        let seed = self.seed;
        let path = self.path(&file).display().to_string();
        self.line("report", vec![("path", json!(path)), ("config_hash", json!(hash)), ("seed", json!(seed))])
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x:.6e}"),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(plain).collect::<Vec<_>>().join(","),
        Value::Bool(b) => if *b { "PASS".into() } else { "FAIL".into() },
        other => other.to_string(),
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn point_or_zero(cfg: &Config, key: &str, dim: usize) -> Result<Vec<f64>> {
    match cfg.vector(key)? {
        Some(v) if v.len() == dim => Ok(v),
        Some(v) => Err(Error::config(key, format!("expected {dim} entries, got {}", v.len()))),
        None => Ok(vec![0.0; dim]),
    }
}

fn solver_tolerances(params: &DiscreteActionParams, opts: &SolverOptions) -> Value {
    json!({
        "N": params.n,
        "h": params.h,
        "vmax": params.vmax,
        "quadrature": format!("{:?}", params.quadrature).to_lowercase(),
        "tol": opts.tol,
        "max_iter": opts.max_iter,
        "relaxation": opts.relaxation,
        "tol_aubry": opts.tol_aubry,
        "rotation_steps": opts.rotation_steps,
    })
}

fn not_converged(what: &str, c: &[f64]) -> Error {
    Error::domain(format!("{what}: value iteration did not converge for c = ({})", fmt_vec(c)))
}

struct WeakKamSetup {
    sys: TonelliSystem,
    params: DiscreteActionParams,
    opts: SolverOptions,
}

fn weakkam_setup(cfg: &Config) -> Result<WeakKamSetup> {
    let sys = cfg.system()?;
    let params = cfg.action_params(sys.dim())?;
    let opts = cfg.solver_options()?;
    Ok(WeakKamSetup { sys, params, opts })
}

fn bracket(ctx: &mut Context) -> Result<Outcome> {
    let sys = ctx.cfg.system()?;
    let dim = sys.dim();
    let f = catalog::observable(ctx.cfg.text("f").unwrap_or("H"), &sys)?;
    let g_name = ctx.cfg.text("g").ok_or_else(|| Error::config("g", "missing second observable"))?;
    let g = catalog::observable(g_name, &sys)?;
    let count = ctx.cfg.int_or("samples", DEFAULT_SAMPLE_COUNT as u64)? as usize;
    let pbox = ctx.cfg.real_or("momentum_box", DEFAULT_MOMENTUM_BOX)?;
    let mut samples = phase_samples(dim, count, pbox, ctx.seed);
    if ctx.cfg.contains("x0") || ctx.cfg.contains("p0") {
        samples.insert(0, PhasePoint::new(point_or_zero(&ctx.cfg, "x0", dim)?, point_or_zero(&ctx.cfg, "p0", dim)?));
    }
    let values = samples
        .par_iter()
        .map(|z| poisson_bracket(&f, &g, z))
        .collect::<Result<Vec<_>>>()?;
    let mut w = ctx.create("bracket.csv")?;
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.extend((1..=dim).map(|i| format!("p{i}")));
    header.push("bracket".into());
    writeln!(w, "{}", header.join(","))?;
    for (z, v) in samples.iter().zip(&values) {
        writeln!(w, "{},{},{v}", fmt_vec(z.x()), fmt_vec(z.p()))?;
    }
    w.flush()?;
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let name = format!("bracket[{},{}]", f.name(), g.name());
    ctx.line(&name, vec![("max_abs", json!(max)), ("samples", json!(samples.len()))])?;
    ctx.report(
        json!({"samples": samples.len(), "momentum_box": pbox, "fd_step": f.fd_step()}),
        json!({"name": name, "max_abs": max}),
    )?;
    Ok(Outcome::Success)
}

fn flow_cmd(ctx: &mut Context) -> Result<Outcome> {
    let sys = ctx.cfg.system()?;
    let dim = sys.dim();
    let f = catalog::observable(ctx.cfg.text("f").unwrap_or("H"), &sys)?;
    let z0 = PhasePoint::new(point_or_zero(&ctx.cfg, "x0", dim)?, point_or_zero(&ctx.cfg, "p0", dim)?);
    let t = ctx.cfg.real_or("t", 1.0)?;
    let dt = ctx.cfg.real_or("dt", 1e-2)?;
    let traj = flow(&f, &z0, t, dt)?;
    let mut w = ctx.create("flow.csv")?;
    traj.write_csv(&sys, &mut w)?;
    w.flush()?;
    let drift = first_integral_defect(&f, &traj);
    let energy_drift = first_integral_defect(sys.hamiltonian(), &traj);
    let end = traj.last();
    let name = format!("flow[{}]", f.name());
    ctx.line(
        &name,
        vec![
            ("x", json!(end.x())),
            ("p", json!(end.p())),
            ("drift", json!(drift)),
            ("energy_drift", json!(energy_drift)),
        ],
    )?;
    ctx.report(
        json!({"t": t, "dt": dt}),
        json!({"x": end.x(), "p": end.p(), "drift": drift, "energy_drift": energy_drift, "steps": traj.len() - 1}),
    )?;
    Ok(Outcome::Success)
}

fn alpha_lines(ctx: &mut Context, table: &AlphaTable) -> Result<()> {
    for r in &table.rows {
        ctx.line(
            &format!("alpha[c={}]", fmt_vec(&r.c)),
            vec![
                ("alpha", json!(r.alpha)),
                ("rotation_vector", json!(r.rotation_vector)),
                ("converged", json!(r.converged)),
            ],
        )?;
    }
    Ok(())
}

fn alpha_json(table: &AlphaTable) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| json!({"c": r.c, "alpha": r.alpha, "rotation_vector": r.rotation_vector, "converged": r.converged}))
        .collect();
    json!({"rows": rows, "monotone_in_abs_c": table.monotone_in_abs_c})
}

fn check_converged(table: &AlphaTable) -> Result<()> {
    match table.rows.iter().find(|r| !r.converged) {
        Some(r) => Err(not_converged("alpha", &r.c)),
        None => Ok(()),
    }
}

fn alpha(ctx: &mut Context) -> Result<Outcome> {
    let s = weakkam_setup(&ctx.cfg)?;
    let grid = ctx.cfg.class_grid(s.sys.dim())?;
    let table = alpha_table(&s.sys, &grid, &s.params, &s.opts)?;
    let mut w = ctx.create("alpha.csv")?;
    table.write_csv(&mut w)?;
    w.flush()?;
    alpha_lines(ctx, &table)?;
    ctx.report(solver_tolerances(&s.params, &s.opts), alpha_json(&table))?;
    check_converged(&table)?;
    Ok(Outcome::Success)
}

fn weakkam_json(wk: &WeakKamResult, energy_defect: f64) -> Value {
    json!({
        "c": wk.c.as_slice(),
        "alpha": wk.alpha,
        "converged": wk.converged,
        "iterations": wk.iterations,
        "residual": wk.residual,
        "rotation_vector": wk.rotation_vector,
        "rotation_flagged": wk.rotation_flagged,
        "energy_defect": energy_defect,
        "aubry_nodes": wk.aubry_nodes.len(),
        "tol_aubry": wk.tol_aubry,
    })
}

fn weakkam(ctx: &mut Context) -> Result<Outcome> {
    let s = weakkam_setup(&ctx.cfg)?;
    let c = ctx.cfg.class(s.sys.dim())?;
    let wk = solve_weak_kam(&s.sys, &c, &s.params, &s.opts)?;
    let energy = energy_level_check(&s.sys, &wk);
    let mut w = ctx.create("weakkam.csv")?;
    wk.write_grid_csv(&mut w)?;
    w.flush()?;
    ctx.line(
        &format!("weakkam[c={}]", fmt_vec(c.as_slice())),
        vec![
            ("alpha", json!(wk.alpha)),
            ("converged", json!(wk.converged)),
            ("iterations", json!(wk.iterations)),
            ("rotation_vector", json!(wk.rotation_vector)),
            ("energy_defect", json!(energy)),
        ],
    )?;
    ctx.report(solver_tolerances(&s.params, &s.opts), weakkam_json(&wk, energy))?;
    if !wk.converged {
        return Err(not_converged("weakkam", c.as_slice()));
    }
    Ok(Outcome::Success)
}

fn aubry(ctx: &mut Context) -> Result<Outcome> {
    let s = weakkam_setup(&ctx.cfg)?;
    let dim = s.sys.dim();
    let c = ctx.cfg.class(dim)?;
    let wk = solve_weak_kam(&s.sys, &c, &s.params, &s.opts)?;
    let mut w = ctx.create("aubry.csv")?;
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.extend((1..=dim).map(|i| format!("p{i}")));
    header.push("indicator".into());
    writeln!(w, "{}", header.join(","))?;
    for (node, z) in wk.aubry_nodes.iter().zip(wk.aubry_points()) {
        writeln!(w, "{},{},{}", fmt_vec(z.x()), fmt_vec(z.p()), wk.indicator.values()[*node])?;
    }
    w.flush()?;
    // the Peierls barrier is affordable only on small 1-D grids
    let disagreement = if dim == 1 && s.params.n <= 128 {
        let op = LaxOleinik::new(&s.sys, &c, &s.params)?;
        let diag = oracle::peierls_diagonal(&op)?;
        let mut on_pair = vec![false; diag.len()];
        for i in &wk.aubry_nodes {
            on_pair[*i] = true;
        }
        Some(diag.iter().zip(&on_pair).filter(|(d, a)| (**d <= wk.tol_aubry) != **a).count())
    } else {
        None
    };
    ctx.line(
        &format!("aubry[c={}]", fmt_vec(c.as_slice())),
        vec![
            ("nodes", json!(wk.aubry_nodes.len())),
            ("of", json!(wk.u.len())),
            ("tol_aubry", json!(wk.tol_aubry)),
            ("peierls_disagreement", json!(disagreement)),
        ],
    )?;
    let mut results = weakkam_json(&wk, energy_level_check(&s.sys, &wk));
    results["peierls_disagreement"] = json!(disagreement);
    ctx.report(solver_tolerances(&s.params, &s.opts), results)?;
    if !wk.converged {
        return Err(not_converged("aubry", c.as_slice()));
    }
    Ok(Outcome::Success)
}

fn beta(ctx: &mut Context) -> Result<Outcome> {
    let s = weakkam_setup(&ctx.cfg)?;
    let dim = s.sys.dim();
    if !ctx.cfg.contains("c_grid") {
        return Err(Error::config("c_grid", "β needs an α table over a grid of classes"));
    }
    let grid = ctx.cfg.class_grid(dim)?;
    let hs = ctx.cfg.rotation_grid(dim)?;
    let delta = ctx.cfg.real_or("delta", DEFAULT_DELTA)?;
    let table = alpha_table(&s.sys, &grid, &s.params, &s.opts)?;
    check_converged(&table)?;
    let mut w = ctx.create("alpha.csv")?;
    table.write_csv(&mut w)?;
    w.flush()?;
    let beta = beta_from_alpha(&table, &hs, delta)?;
    let mut w = ctx.create("beta.csv")?;
    beta.write_csv(&mut w)?;
    w.flush()?;
    let mut rows = Vec::new();
    for r in &beta.rows {
        ctx.line(
            &format!("beta[h={}]", fmt_vec(&r.h)),
            vec![
                ("beta", json!(r.beta)),
                ("slope_gap", json!(r.slope_gap)),
                ("argmax_c", json!(r.argmax_c)),
            ],
        )?;
        rows.push(json!({"h": r.h, "beta": r.beta, "slope_gap": r.slope_gap, "argmax_c": r.argmax_c}));
    }
    let mut tol = solver_tolerances(&s.params, &s.opts);
    tol["delta"] = json!(delta);
    ctx.report(tol, json!({"alpha": alpha_json(&table), "beta": rows}))?;
    Ok(Outcome::Success)
}

/// Verdict thresholds and flow settings from the configuration.
pub fn verdict_options(cfg: &Config) -> Result<VerdictOptions> {
    let d = VerdictOptions::default();
    Ok(VerdictOptions {
        seed: cfg.seed()?,
        sample_count: cfg.int_or("samples", d.sample_count as u64)? as usize,
        momentum_box: cfg.real_or("momentum_box", d.momentum_box)?,
        sv_tol: cfg.real_or("sv_tol", d.sv_tol)?,
        commutation_tol: cfg.real_or("commutation_tol", d.commutation_tol)?,
        involution_tol: cfg.real_or("involution_tol", d.involution_tol)?,
        graph_spacings: cfg.real_or("graph_spacings", d.graph_spacings)?,
        aubry_spacings: cfg.real_or("aubry_spacings", d.aubry_spacings)?,
        constancy_tol: cfg.real_or("constancy_tol", d.constancy_tol)?,
        flow_t: cfg.real_or("t", d.flow_t)?,
        flow_dt: cfg.real_or("dt", d.flow_dt)?,
        graph_seeds: cfg.int_or("graph_seeds", d.graph_seeds as u64)? as usize,
        solver: cfg.solver_options()?,
    })
}

fn check(ctx: &mut Context) -> Result<Outcome> {
    let s = weakkam_setup(&ctx.cfg)?;
    let spec = ctx
        .cfg
        .text("integrals")
        .ok_or_else(|| Error::config("integrals", "missing integral family"))?;
    let fam = IntegralFamily::parse(spec, &s.sys)?;
    let classes = ctx.cfg.class_grid(s.sys.dim())?;
    let vopts = verdict_options(&ctx.cfg)?;
    let report = weak_integrability_verdict(&s.sys, &fam, &classes, &s.params, &vopts)?;
    for r in &report.records {
        ctx.line(
            &r.name,
            vec![
                ("value", json!(r.value)),
                ("threshold", json!(r.threshold)),
                ("pass", json!(r.pass)),
                ("seed", json!(r.seed)),
            ],
        )?;
    }
    let failing: Vec<String> = report.failing().map(|r| r.name.clone()).collect();
    ctx.line("verdict", vec![("pass", json!(report.passed())), ("failing", json!(failing))])?;
    let mut tol = solver_tolerances(&s.params, &vopts.solver);
    for (k, v) in [
        ("samples", json!(vopts.sample_count)),
        ("momentum_box", json!(vopts.momentum_box)),
        ("sv_tol", json!(vopts.sv_tol)),
        ("commutation_tol", json!(vopts.commutation_tol)),
        ("involution_tol", json!(vopts.involution_tol)),
        ("graph_spacings", json!(vopts.graph_spacings)),
        ("aubry_spacings", json!(vopts.aubry_spacings)),
        ("constancy_tol", json!(vopts.constancy_tol)),
        ("flow_t", json!(vopts.flow_t)),
        ("flow_dt", json!(vopts.flow_dt)),
        ("graph_seeds", json!(vopts.graph_seeds)),
    ] {
        tol[k] = v;
    }
    let results = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
    ctx.report(tol, results)?;
    Ok(if report.passed() {
        Outcome::Success
    } else {
        Outcome::VerdictFailed
    })
}

fn triple(cfg: &Config, key: &str, default: [f64; 3]) -> Result<[f64; 3]> {
    match cfg.vector(key)? {
        Some(v) => <[f64; 3]>::try_from(v.as_slice())
            .map_err(|_| Error::config(key, format!("expected 3 entries, got {}", v.len()))),
        None => Ok(default),
    }
}

fn rigidbody(ctx: &mut Context) -> Result<Outcome> {
    let inertia = InertiaOperator::new(triple(&ctx.cfg, "inertia", [1.0, 2.0, 3.0])?)?;
    let p0 = Vector3::from(triple(&ctx.cfg, "p0", [1.0, 0.1, 0.1])?);
    let attitude = Vector3::from(triple(&ctx.cfg, "attitude", [0.0; 3])?);
    let t = ctx.cfg.real_or("t", 10.0)?;
    let dt = ctx.cfg.real_or("dt", 1e-3)?;
    let stride = ctx.cfg.int_or("output_stride", 10)? as usize;
    let count = ctx.cfg.int_or("samples", RIGID_BODY_STATES as u64)? as usize;
    let sv_tol = ctx.cfg.real_or("sv_tol", crate::integrability::DEFAULT_SV_TOL)?;

    let s0 = RigidBodyState::from_axis_angle(attitude, p0);
    let traj = integrate_rigid_body(&inertia, &s0, t, dt)?;
    let mut w = ctx.create("rigidbody.csv")?;
    traj.write_csv(&inertia, stride, &mut w)?;
    w.flush()?;
    let summary = conservation_summary(&inertia, &traj);
    let states = random_states(count, ctx.seed);
    let rank = momentum_independence_check(&states, sv_tol);
    let involution = momentum_involution_check(&states, 1.0, 1.0);

    for (name, value) in [
        ("energy_drift", summary.energy_drift),
        ("casimir_drift", summary.casimir_drift),
        ("spatial_momentum_drift", summary.spatial_momentum_drift),
        ("orthogonality_defect", summary.orthogonality_defect),
    ] {
        ctx.line(name, vec![("value", json!(value))])?;
    }
    ctx.line("independence_rank", vec![("min_rank", json!(rank)), ("states", json!(count))])?;
    ctx.line(
        "momentum_involution",
        vec![
            ("max_momentum", json!(involution.max_momentum)),
            ("max_commutator", json!(involution.max_commutator)),
        ],
    )?;
    ctx.report(
        json!({"t": t, "dt": dt, "sv_tol": sv_tol, "states": count}),
        json!({
            "conservation": summary,
            "independence_rank": rank,
            "involution": involution,
            "final_body_momentum": traj.states.last().map(|s| [s.body_momentum.x, s.body_momentum.y, s.body_momentum.z]),
        }),
    )?;
    Ok(Outcome::Success)
}

/// Reads the artifacts a subcommand wrote, for callers that post-process them.
pub fn read_report(dir: &Path, command: &str) -> Result<Value> {
    let path = dir.join(format!("{command}.json"));
    let text = std::fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
