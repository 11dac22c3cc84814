//! Command-line front end. Every output embeds the resolved configuration so
//! a file alone is enough to reproduce it.
//!
//! Exit codes: 0 success, 1 a mathematical check failed, 2 usage or parse error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Signed;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::grassmann::{monomial_name, Parity};
use crate::ns_algebra::{
    check_algebra_axioms, is_singular, is_singular_level2, params_from_kappa_ns, singular_vector_32,
    singularity_report, virasoro_level2_vector, virasoro_params, Half, ModuleParams,
};
use crate::scalar::{parse_rational, rational_to_f64, Scalar, Surd};
use crate::sde::{
    closed_form_32, closed_form_32alt, euler_maruyama_partial, loewner_flow, mc_martingale, pathwise_convergence,
    supertrace_hull, BrownianPath, CGrassmann, GridSpec, MonteCarloConfig, DEFAULT_SWALLOW_EPS,
};
use crate::superfield::SuperPoint;
use crate::walk::{allocation_32, allocation_32alt, martingale_drift, match_singular, SdeSystem, WalkSpec};

const CSV_HELP: &str = "\
CSV columns:
  sde        t, status, then z_<grade>_re, z_<grade>_im for every even grade and
             theta_<grade>_re, theta_<grade>_im for every odd grade; grades are
             Grassmann monomials such as 1, p0p1, p3. status is ok or swallowed.
  trace      supertrace polyline: t, re, im
             loewner points: re, im, swallowed_at (empty if never), g_re, g_im
             hull raster (--format csv): rows of 0/1 cells, top row first
Lines starting with `#` carry the resolved configuration as JSON.
Environment: SUPER_SLE_SEED supplies --seed when the flag is absent.";

#[derive(Parser, Debug)]
#[command(name = "supersle", version, about = "Graded stochastic Loewner evolutions and NS singular vectors", after_help = CSV_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact checks: algebra axioms, singular vectors, drift/singular-vector matching.
    Verify(VerifyArgs),
    /// Integrate a walk's superspace SDE, or run a pathwise convergence study.
    Sde(SdeArgs),
    /// Monte-Carlo estimate of the drift of G_t|Δ⟩ in the quotient module.
    Martingale(MartingaleArgs),
    /// Sample supertrace or Loewner hulls.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMode {
    Supertrace,
    Loewner,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Positive rational κ, e.g. `2` or `8/3`.
    #[arg(long, default_value = "2")]
    pub kappa: String,
    /// Master seed.
    #[arg(long, env = "SUPER_SLE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent (trace: base name of the written files).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for parallel sections.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SdeArgs {
    #[command(flatten)]
    pub common: Common,
    /// `32`, `32alt`, `virasoro`, or `file:<path>` with a JSON walk spec.
    #[arg(long, default_value = "32")]
    pub spec: String,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Initial body of z as `re` or `(re,im)`.
    #[arg(long, default_value = "2")]
    pub z0: String,
    /// Write a convergence study over dt, dt/10... down to --dt instead of one path.
    #[arg(long)]
    pub convergence: bool,
    /// Paths for --convergence.
    #[arg(long, default_value_t = 200)]
    pub paths: usize,
}

#[derive(Args, Debug)]
pub struct MartingaleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "32")]
    pub spec: String,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long = "T", default_value_t = 0.25)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Level cutoff, e.g. `7/2`.
    #[arg(long, default_value = "7/2")]
    pub cutoff: String,
    /// Rational shift added to Δ, detuning the module.
    #[arg(long, default_value = "0")]
    pub delta_shift: String,
    #[arg(long, conflicts_with = "expect_drift")]
    pub expect_martingale: bool,
    #[arg(long)]
    pub expect_drift: bool,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = TraceMode::Supertrace)]
    pub mode: TraceMode,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Raster resolution (cells per side).
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
}

/// Fully resolved configuration echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub kappa: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub format: Format,
    #[serde(skip_serializing_if = "Map::is_empty")]
    pub extra: Map,
}

type Map = serde_json::Map<String, Value>;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = match &cli.command {
        Command::Verify(a) => a.common.threads,
        Command::Sde(a) => a.common.threads,
        Command::Martingale(a) => a.common.threads,
        Command::Trace(a) => a.common.threads,
    };
    let go = || match cli.command {
        Command::Verify(a) => cmd_verify(&a),
        Command::Sde(a) => cmd_sde(&a),
        Command::Martingale(a) => cmd_martingale(&a),
        Command::Trace(a) => cmd_trace(&a),
    };
    let result = match threads {
        Some(0) => Err(Failure::Usage("--threads must be positive".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(go),
            Err(e) => Err(Failure::Usage(e.to_string())),
        },
        None => go(),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Check(msg)) => {
            eprintln!("FAIL: {msg}");
            1
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn parse_kappa(s: &str) -> std::result::Result<BigRational, Failure> {
    let k = parse_rational(s).map_err(|e| Failure::Usage(format!("--kappa: {e}")))?;
    if !k.is_positive() {
        return Err(Failure::Usage(format!("--kappa must be positive, got {k}")));
    }
    Ok(k)
}

/// Resolves `(dt, steps)` so that `dt · steps` equals `T` to within one ulp.
fn resolve_grid(dt: f64, horizon: f64, steps: Option<usize>) -> std::result::Result<usize, Failure> {
    if !(dt > 0.0) || !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Failure::Usage(format!("need dt > 0 and T >= 0, got dt={dt}, T={horizon}")));
    }
    let steps = steps.unwrap_or_else(|| (horizon / dt).round() as usize);
    let ulp = if horizon == 0.0 { 0.0 } else { f64::EPSILON * horizon.abs() };
    if (dt * steps as f64 - horizon).abs() > ulp {
        return Err(Failure::Usage(format!("dt·steps = {} does not reproduce T = {horizon}", dt * steps as f64)));
    }
    Ok(steps)
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_document(config: &RunConfig, result: Value) -> String {
    let mut s = serde_json::to_string_pretty(&json!({ "config": config, "result": result })).expect("serializable");
    s.push('\n');
    s
}

fn csv_header(config: &RunConfig) -> String {
    format!("# config: {}\n", serde_json::to_string(config).expect("serializable"))
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
    detail: Value,
}

fn cmd_verify(a: &VerifyArgs) -> Outcome {
    let kappa = parse_kappa(&a.common.kappa)?;
    let config = RunConfig {
        command: "verify",
        kappa: kappa.to_string(),
        dt: None,
        horizon: None,
        steps: None,
        paths: None,
        seed: a.common.seed,
        spec: None,
        out: a.common.out.as_ref().map(|p| p.display().to_string()),
        format: Format::Json,
        extra: Map::new(),
    };
    let ns = params_from_kappa_ns(&kappa)?;
    let vir = virasoro_params(&kappa)?;
    let mut checks = Vec::new();

    let axioms = check_algebra_axioms(&ns.c, 7);
    checks.push(Check {
        name: "algebra axioms".into(),
        pass: axioms.is_ok(),
        detail: match &axioms {
            Ok(n) => json!({ "jacobi_triples": n }),
            Err(msg) => json!(msg),
        },
    });

    let v2 = virasoro_level2_vector::<Surd>(&kappa, 0)?;
    let s2 = is_singular_level2(&v2)?;
    checks.push(Check {
        name: "virasoro level-2 singular vector".into(),
        pass: s2.singular,
        detail: json!({ "c": vir.c.to_string(), "delta": vir.delta.to_string() }),
    });

    let chi = singular_vector_32::<Surd>(&ns, 0);
    let s32 = is_singular(&chi)?;
    checks.push(Check {
        name: "NS level-3/2 singular vector".into(),
        pass: s32.singular,
        detail: serde_json::to_value(singularity_report(&ns, &s32)).expect("serializable"),
    });

    let (y, eta, _) = allocation_32::<Surd>();
    let spec32 = WalkSpec::spec_32(&kappa, &y, &eta)?;
    let (y2, eta2, _) = allocation_32alt::<Surd>();
    let spec_alt = WalkSpec::spec_32alt(&kappa, &y2, &eta2)?;
    for (name, spec) in [("32", &spec32), ("32alt", &spec_alt)] {
        let m = match_singular(spec, &kappa)?;
        checks.push(Check {
            name: format!("drift vector of walk {name} proportional to chi"),
            pass: m.matched(),
            detail: json!({
                "proportionality": m.proportionality.to_string(),
                "residual": m.residual.to_string(),
            }),
        });
        let md = martingale_drift(spec, &ns, Half(7))?;
        checks.push(Check {
            name: format!("walk {name} is a martingale in the quotient"),
            pass: md.is_zero(),
            detail: json!(md.to_string()),
        });
    }
    let sle = WalkSpec::<Surd>::virasoro(&kappa, 0)?;
    let md = martingale_drift(&sle, &vir, Half(6))?;
    checks.push(Check {
        name: "SLE walk is a martingale in the Virasoro quotient".into(),
        pass: md.is_zero(),
        detail: json!(md.to_string()),
    });

    let failed = checks.iter().find(|c| !c.pass).map(|c| c.name.clone());
    let result = json!({
        "status": if failed.is_none() { "PASS" } else { "FAIL" },
        "ns": { "c": ns.c.to_string(), "delta": ns.delta.to_string() },
        "virasoro": { "c": vir.c.to_string(), "delta": vir.delta.to_string() },
        "checks": checks,
    });
    emit(a.common.out.as_deref(), &json_document(&config, result))?;
    match failed {
        Some(name) => Err(Failure::Check(name)),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------

enum Resolved {
    Builtin32,
    Builtin32Alt,
    Virasoro,
    File(WalkSpec<Complex64>, Option<SuperPoint<Complex64>>),
}

fn resolve_spec(spec: &str) -> std::result::Result<Resolved, Failure> {
    match spec {
        "32" => Ok(Resolved::Builtin32),
        "32alt" => Ok(Resolved::Builtin32Alt),
        "virasoro" => Ok(Resolved::Virasoro),
        other => {
            let path = other
                .strip_prefix("file:")
                .ok_or_else(|| Failure::Usage(format!("unknown spec `{other}`; use 32, 32alt, virasoro or file:<path>")))?;
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))?;
            let value: Value = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("parse error in {path}: {e}")))?;
            let (spec, init) = WalkSpec::<Complex64>::from_json(&value)?;
            Ok(Resolved::File(spec, init))
        }
    }
}

fn parse_z0(s: &str) -> std::result::Result<Complex64, Failure> {
    Complex64::parse_text(s).map_err(|e| Failure::Usage(format!("--z0: {e}")))
}

struct SdeSetup {
    system: SdeSystem<Complex64>,
    init: SuperPoint<Complex64>,
    y: CGrassmann,
    eta: CGrassmann,
}

fn sde_setup(resolved: Resolved, kappa: &BigRational, z0: Complex64) -> std::result::Result<SdeSetup, Failure> {
    let point = |n: usize, theta: CGrassmann| SuperPoint::new(CGrassmann::scalar(n, z0), theta);
    let out = match resolved {
        Resolved::Builtin32 => {
            let (y, eta, th) = allocation_32::<Complex64>();
            let spec = WalkSpec::spec_32(kappa, &y, &eta)?;
            SdeSetup { system: SdeSystem::from_spec(&spec), init: point(4, th)?, y, eta }
        }
        Resolved::Builtin32Alt => {
            let (y, eta, th) = allocation_32alt::<Complex64>();
            let spec = WalkSpec::spec_32alt(kappa, &y, &eta)?;
            SdeSetup { system: SdeSystem::from_spec(&spec), init: point(2, th)?, y, eta }
        }
        Resolved::Virasoro => {
            let spec = WalkSpec::<Complex64>::virasoro(kappa, 0)?;
            SdeSetup {
                system: SdeSystem::from_spec(&spec),
                init: point(0, CGrassmann::zero(0))?,
                y: CGrassmann::zero(0),
                eta: CGrassmann::zero(0),
            }
        }
        Resolved::File(spec, init) => {
            let n = spec.generators();
            let init = match init {
                Some(p) => p,
                None => point(n, CGrassmann::zero(n))?,
            };
            SdeSetup { system: SdeSystem::from_spec(&spec), init, y: CGrassmann::zero(n), eta: CGrassmann::zero(n) }
        }
    };
    Ok(out)
}

fn grade_masks(n: usize, parity: Parity) -> Vec<u16> {
    (0..(1u32 << n)).map(|m| m as u16).filter(|m| Parity::of_mask(*m) == parity).collect()
}

fn grade_label(mask: u16) -> String {
    if mask == 0 {
        "1".into()
    } else {
        monomial_name(mask)
    }
}

fn cmd_sde(a: &SdeArgs) -> Outcome {
    let kappa = parse_kappa(&a.common.kappa)?;
    let steps = resolve_grid(a.dt, a.horizon, a.steps)?;
    let z0 = parse_z0(&a.z0)?;
    let format = a.common.format.unwrap_or(if a.convergence { Format::Json } else { Format::Csv });
    let resolved = resolve_spec(&a.spec)?;
    let is_builtin = matches!(resolved, Resolved::Builtin32 | Resolved::Builtin32Alt);
    let which = a.spec.clone();
    let setup = sde_setup(resolved, &kappa, z0)?;
    let mut extra = Map::new();
    extra.insert("z0".into(), json!(a.z0));
    extra.insert("convergence".into(), json!(a.convergence));
    let config = RunConfig {
        command: "sde",
        kappa: kappa.to_string(),
        dt: Some(a.dt),
        horizon: Some(a.horizon),
        steps: Some(steps),
        paths: a.convergence.then_some(a.paths),
        seed: a.common.seed,
        spec: Some(which.clone()),
        out: a.common.out.as_ref().map(|p| p.display().to_string()),
        format,
        extra,
    };
    let kf = rational_to_f64(&kappa);

    if a.convergence {
        if !is_builtin {
            return Err(Failure::Usage("--convergence needs a walk with a closed form (32 or 32alt)".into()));
        }
        if a.paths == 0 {
            return Err(Failure::Usage("--paths must be positive".into()));
        }
        if format != Format::Json {
            return Err(Failure::Usage("convergence studies are written as JSON".into()));
        }
        let dts = [a.dt * 100.0, a.dt * 10.0, a.dt];
        let (y, eta) = (setup.y.clone(), setup.eta.clone());
        let study = if which == "32" {
            pathwise_convergence(
                &setup.system,
                |init, path| {
                    let cf = closed_form_32(init, path, kf, &y, &eta)?;
                    let (z, t) = cf.terminal();
                    Ok((z.clone(), t.clone()))
                },
                &setup.init,
                a.horizon,
                &dts,
                a.paths,
                a.common.seed,
                10,
            )?
        } else {
            pathwise_convergence(
                &setup.system,
                |init, path| {
                    let cf = closed_form_32alt(init, path, kf, &eta)?;
                    let (z, t) = cf.terminal();
                    Ok((z.clone(), t.clone()))
                },
                &setup.init,
                a.horizon,
                &dts,
                a.paths,
                a.common.seed,
                10,
            )?
        };
        let result = json!({
            "study": study,
            "strictly_decreasing": study.strictly_decreasing(),
            "exact_to_roundoff": study.exact(),
        });
        return emit(a.common.out.as_deref(), &json_document(&config, result));
    }

    let path = BrownianPath::sample(setup.system.brownian_dim(), a.dt, steps, a.common.seed);
    let run = euler_maruyama_partial(&setup.system, &setup.init, &path, DEFAULT_SWALLOW_EPS)?;
    let n = setup.init.generators();
    let even = grade_masks(n, Parity::Even);
    let odd = grade_masks(n, Parity::Odd);
    let status: Vec<&str> = (0..run.path.len())
        .map(|k| if run.stopped.is_some() && k + 1 == run.path.len() { "swallowed" } else { "ok" })
        .collect();
    let text = match format {
        Format::Csv => {
            let mut s = csv_header(&config);
            s.push_str("t,status");
            for m in &even {
                let g = grade_label(*m);
                write!(s, ",z_{g}_re,z_{g}_im").unwrap();
            }
            for m in &odd {
                let g = grade_label(*m);
                write!(s, ",theta_{g}_re,theta_{g}_im").unwrap();
            }
            s.push('\n');
            for k in 0..run.path.len() {
                write!(s, "{},{}", run.path.times[k], status[k]).unwrap();
                for m in &even {
                    let c = run.path.z[k].coeff(*m);
                    write!(s, ",{},{}", c.re + 0.0, c.im + 0.0).unwrap();
                }
                for m in &odd {
                    let c = run.path.theta[k].coeff(*m);
                    write!(s, ",{},{}", c.re + 0.0, c.im + 0.0).unwrap();
                }
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let rows: Vec<Value> = (0..run.path.len())
                .map(|k| {
                    json!({
                        "t": run.path.times[k],
                        "status": status[k],
                        "z": run.path.z[k].to_string(),
                        "theta": run.path.theta[k].to_string(),
                    })
                })
                .collect();
            json_document(&config, json!({ "stopped": run.stopped.as_ref().map(|e| e.to_string()), "path": rows }))
        }
    };
    emit(a.common.out.as_deref(), &text)
}

// ---------------------------------------------------------------------------

fn cmd_martingale(a: &MartingaleArgs) -> Outcome {
    let kappa = parse_kappa(&a.common.kappa)?;
    if a.paths == 0 {
        return Err(Failure::Usage("--paths must be positive".into()));
    }
    let steps = resolve_grid(a.dt, a.horizon, a.steps)?;
    let cutoff_r = parse_rational(&a.cutoff).map_err(|e| Failure::Usage(format!("--cutoff: {e}")))?;
    let twice = &cutoff_r * BigRational::from_integer(2.into());
    if !twice.is_integer() || twice.is_negative() {
        return Err(Failure::Usage(format!("--cutoff must be a non-negative half-integer, got {cutoff_r}")));
    }
    let cutoff = Half(twice.to_integer().try_into().map_err(|_| Failure::Usage("--cutoff too large".into()))?);
    let shift = parse_rational(&a.delta_shift).map_err(|e| Failure::Usage(format!("--delta-shift: {e}")))?;
    if a.common.format == Some(Format::Csv) {
        return Err(Failure::Usage("martingale reports are written as JSON".into()));
    }
    let resolved = resolve_spec(&a.spec)?;
    let mut extra = Map::new();
    extra.insert("cutoff".into(), json!(cutoff.to_string()));
    extra.insert("delta_shift".into(), json!(shift.to_string()));
    extra.insert("expect_martingale".into(), json!(a.expect_martingale));
    extra.insert("expect_drift".into(), json!(a.expect_drift));
    let config = RunConfig {
        command: "martingale",
        kappa: kappa.to_string(),
        dt: Some(a.dt),
        horizon: Some(a.horizon),
        steps: Some(steps),
        paths: Some(a.paths),
        seed: a.common.seed,
        spec: Some(a.spec.clone()),
        out: a.common.out.as_ref().map(|p| p.display().to_string()),
        format: Format::Json,
        extra,
    };
    let cfg = MonteCarloConfig { paths: a.paths, horizon: a.horizon, dt: a.dt, seed: a.common.seed, cutoff };
    let shifted = |p: ModuleParams| {
        let d = &p.delta + &shift;
        p.with_delta(d)
    };
    let report = match resolved {
        Resolved::Builtin32 => {
            let (y, eta, _) = allocation_32::<Surd>();
            let spec = WalkSpec::spec_32(&kappa, &y, &eta)?;
            mc_martingale(&spec, &shifted(params_from_kappa_ns(&kappa)?), &cfg)?
        }
        Resolved::Builtin32Alt => {
            let (y, eta, _) = allocation_32alt::<Surd>();
            let spec = WalkSpec::spec_32alt(&kappa, &y, &eta)?;
            mc_martingale(&spec, &shifted(params_from_kappa_ns(&kappa)?), &cfg)?
        }
        Resolved::Virasoro => {
            let spec = WalkSpec::<Surd>::virasoro(&kappa, 0)?;
            mc_martingale(&spec, &shifted(virasoro_params(&kappa)?), &cfg)?
        }
        Resolved::File(spec, _) => mc_martingale(&spec, &shifted(params_from_kappa_ns(&kappa)?), &cfg)?,
    };
    let within = report.within(3.0);
    let exceeds = report.exceeds(5.0);
    let result = json!({
        "all_within_3se": within,
        "some_beyond_5se": exceeds,
        "max_z": if report.max_z().is_finite() { json!(report.max_z()) } else { json!("inf") },
        "report": report,
    });
    emit(a.common.out.as_deref(), &json_document(&config, result))?;
    if a.expect_martingale && !within {
        return Err(Failure::Check("a projected drift exceeds 3 standard errors".into()));
    }
    if a.expect_drift && !exceeds {
        return Err(Failure::Check("no projected drift exceeds 5 standard errors".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_trace(a: &TraceArgs) -> Outcome {
    let kappa = parse_kappa_allow_zero(&a.common.kappa)?;
    if a.grid == 0 {
        return Err(Failure::Usage("--grid must be positive".into()));
    }
    let steps = resolve_grid(a.dt, a.horizon, a.steps)?;
    let format = a.common.format.unwrap_or(Format::Csv);
    let mut extra = Map::new();
    extra.insert("mode".into(), json!(a.mode));
    extra.insert("grid".into(), json!(a.grid));
    let config = RunConfig {
        command: "trace",
        kappa: kappa.to_string(),
        dt: Some(a.dt),
        horizon: Some(a.horizon),
        steps: Some(steps),
        paths: None,
        seed: a.common.seed,
        spec: None,
        out: a.common.out.as_ref().map(|p| p.display().to_string()),
        format,
        extra,
    };
    let kf = rational_to_f64(&kappa);
    let header = serde_json::to_string(&config).expect("serializable");
    let (raster, points_csv, summary) = match a.mode {
        TraceMode::Supertrace => {
            let hull = supertrace_hull(kf, a.horizon, a.dt, a.common.seed, a.grid, None)?;
            let mut s = csv_header(&config);
            s.push_str("t,re,im\n");
            for (t, z) in hull.times.iter().zip(&hull.trace) {
                writeln!(s, "{t},{},{}", z.re, z.im).unwrap();
            }
            let summary = json!({
                "seed": a.common.seed,
                "trace_start": [hull.trace[0].re, hull.trace[0].im],
                "trace_end": [hull.trace[hull.trace.len() - 1].re, hull.trace[hull.trace.len() - 1].im],
                "hull_cells": hull.raster.count(),
                "grid": hull.raster.grid,
            });
            (hull.raster, s, summary)
        }
        TraceMode::Loewner => {
            let half = 2.0 + 2.0 * ((kf + 4.0) * a.horizon).sqrt();
            let grid = GridSpec::new(-half, half, 0.0, half, a.grid, a.grid.div_ceil(2))?;
            let flow = loewner_flow(kf, &grid, a.horizon, a.dt, a.common.seed)?;
            let mut s = csv_header(&config);
            s.push_str("re,im,swallowed_at,g_re,g_im\n");
            for p in &flow.points {
                let sw = p.swallowed_at.map(|t| t.to_string()).unwrap_or_default();
                writeln!(s, "{},{},{sw},{},{}", p.z_re, p.z_im, p.g_re, p.g_im).unwrap();
            }
            let summary = json!({
                "seed": a.common.seed,
                "swallowed": flow.raster.count(),
                "points": flow.points.len(),
                "grid": grid,
            });
            (flow.raster, s, summary)
        }
    };
    if let Some(base) = a.common.out.as_deref() {
        let (raster_text, ext) = match format {
            Format::Csv => (format!("# config: {header}\n{}", raster.to_csv()), ".csv"),
            Format::Json => (raster.to_pgm(&format!("config: {header}")), ".pgm"),
        };
        let raster_path = with_suffix(base, &format!("_hull{ext}"));
        let points_path = with_suffix(base, if a.mode == TraceMode::Supertrace { "_trace.csv" } else { "_points.csv" });
        emit(Some(&raster_path), &raster_text)?;
        emit(Some(&points_path), &points_csv)?;
    }
    println!("{}", serde_json::to_string(&json!({ "config": config, "result": summary })).expect("serializable"));
    Ok(())
}

/// Trace sampling accepts κ = 0 (deterministic flow).
fn parse_kappa_allow_zero(s: &str) -> std::result::Result<BigRational, Failure> {
    let k = parse_rational(s).map_err(|e| Failure::Usage(format!("--kappa: {e}")))?;
    if k.is_negative() {
        return Err(Failure::Usage(format!("--kappa must be non-negative, got {k}")));
    }
    Ok(k)
}
