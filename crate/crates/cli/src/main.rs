//! `lcspec`: command-line driver for the half-line limit-circle spectral
//! solver. Subcommands cover the pipeline stages: classify the coefficient
//! field, build Jost solutions, tabulate connection coefficients, solve for
//! eigenvalues, apply resolvents, evaluate the spectral transform, and run
//! the identity verification suite.

mod config;
mod emit;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use lcspec_core::connection::{verify_lc2p, ConnectionEvaluator};
use lcspec_core::extensions::{
    eigenvalues, omega_from_t, resolvent_apply, spectral_transform, t_from_omega, ExtensionPoint,
    TParam,
};
use lcspec_core::field::{check_lc_conditions, ConditionConfig};
use lcspec_core::grid::{Grid, NODES_PER_PERIOD};
use lcspec_core::ode::wronskian;
use lcspec_core::quasiresolvent::{
    boundary_form, inner, ode_residual_l2, Quasiresolvent, SampledFunction,
};
use lcspec_core::{CoefficientField, LcError};

use config::{parse_complex, RunConfig};

const I: Complex64 = Complex64::I;

#[derive(Parser)]
#[command(name = "lcspec", version, about = "Half-line limit-circle spectral solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Path to the run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output path; stdout when omitted (overrides the config's output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Multiply all configured tolerances by this factor.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the limit-circle hypotheses for the configured field.
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Build the Jost solution at a spectral parameter.
    Jost {
        #[command(flatten)]
        common: Common,
        /// Spectral parameter, RE+IMi.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
    },
    /// Tabulate connection coefficients over a z-grid.
    Connect {
        #[command(flatten)]
        common: Common,
        /// Spectral parameters, RE+IMi (repeatable; falls back to the config grid).
        #[arg(long, allow_hyphen_values = true)]
        z: Vec<String>,
    },
    /// Eigenvalues of the self-adjoint realizations on an interval.
    Eigs {
        #[command(flatten)]
        common: Common,
        /// Boundary parameters, RE+IMi with |omega| = 1 (repeatable).
        #[arg(long, allow_hyphen_values = true)]
        omega: Vec<String>,
        /// Deficiency parameters, converted through the Mobius link (repeatable; "inf" allowed).
        #[arg(long, allow_hyphen_values = true)]
        t: Vec<String>,
        /// Search interval LO,HI.
        #[arg(long, allow_hyphen_values = true)]
        interval: Option<String>,
    },
    /// Apply the resolvent of one realization to a built-in right-hand side.
    Resolve {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        omega: String,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        /// Gaussian right-hand side center.
        #[arg(long, default_value_t = 2.0)]
        h_center: f64,
        /// Gaussian right-hand side width.
        #[arg(long, default_value_t = 0.4)]
        h_width: f64,
    },
    /// Cauchy transform of the spectral measure over a z-grid.
    Transform {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        omega: String,
        #[arg(long, allow_hyphen_values = true)]
        z: Vec<String>,
        #[arg(long, default_value_t = 2.0)]
        h_center: f64,
        #[arg(long, default_value_t = 0.4)]
        h_width: f64,
    },
    /// Run the identity verification suite.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

enum AppError {
    Config(String),
    Numeric(String),
    Verification,
    /// Stdout closed early (e.g. piped into `head`); not an error.
    Pipe,
}

impl From<LcError> for AppError {
    fn from(e: LcError) -> Self {
        match e {
            LcError::Config(msg) => AppError::Config(msg),
            other => AppError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            AppError::Pipe
        } else {
            AppError::Numeric(format!("i/o error: {e}"))
        }
    }
}

type AppResult<T> = Result<T, AppError>;

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("LCSPEC_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(AppError::Verification) => ExitCode::from(4),
        Err(AppError::Pipe) => ExitCode::SUCCESS,
    }
}

fn load(common: &Common) -> AppResult<(RunConfig, CoefficientField)> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let cfg = RunConfig::parse(&text).map_err(AppError::Config)?;
    let field = cfg.build_field().map_err(AppError::Config)?;
    if !(common.tol_scale > 0.0) {
        return Err(AppError::Config("--tol-scale must be positive".into()));
    }
    Ok((cfg, field))
}

fn build_evaluator(
    cfg: &RunConfig,
    field: &CoefficientField,
    z_scale: Complex64,
    tol_scale: f64,
) -> AppResult<ConnectionEvaluator> {
    let mut ev = match cfg.x_inf {
        Some(x_inf) => {
            let grid = Arc::new(Grid::build(field, x_inf, NODES_PER_PERIOD)?);
            ConnectionEvaluator::with_grid(grid)?
        }
        None => ConnectionEvaluator::new(field, z_scale)?,
    };
    ev.tol = cfg.tolerances.volterra_tol * tol_scale;
    ev.cfg.rtol = cfg.tolerances.ode_tol * tol_scale;
    ev.cfg.atol = ev.cfg.rtol * 1e-2;
    Ok(ev)
}

/// Open the output stream: --out, else the config's output path, else stdout.
fn sink(common: &Common, cfg: &RunConfig) -> AppResult<Box<dyn Write>> {
    let path = common
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o| PathBuf::from(&o.path)));
    match path {
        Some(p) => {
            let f = fs::File::create(&p)
                .map_err(|e| AppError::Config(format!("cannot write {}: {e}", p.display())))?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn format_of(common: &Common, cfg: &RunConfig) -> String {
    common
        .format
        .clone()
        .or_else(|| cfg.output.as_ref().and_then(|o| o.format.clone()))
        .unwrap_or_else(|| "csv".to_string())
}

fn parse_z_list(flags: &[String], cfg: &RunConfig) -> AppResult<Vec<Complex64>> {
    if !flags.is_empty() {
        return flags
            .iter()
            .map(|s| parse_complex(s).map_err(AppError::Config))
            .collect();
    }
    let zs: Vec<Complex64> = cfg.grids.z.iter().map(|c| c.to_complex()).collect();
    if zs.is_empty() {
        return Err(AppError::Config(
            "no spectral parameters: pass --z or configure grids.z".into(),
        ));
    }
    Ok(zs)
}

fn run(cmd: Cmd) -> AppResult<()> {
    match cmd {
        Cmd::Classify { common } => classify(common),
        Cmd::Jost { common, z } => jost(common, z),
        Cmd::Connect { common, z } => connect(common, z),
        Cmd::Eigs {
            common,
            omega,
            t,
            interval,
        } => eigs(common, omega, t, interval),
        Cmd::Resolve {
            common,
            omega,
            z,
            h_center,
            h_width,
        } => resolve(common, omega, z, h_center, h_width),
        Cmd::Transform {
            common,
            omega,
            z,
            h_center,
            h_width,
        } => transform(common, omega, z, h_center, h_width),
        Cmd::Verify { common } => verify(common),
    }
}

fn classify(common: Common) -> AppResult<()> {
    let (cfg, field) = load(&common)?;
    let far_cutoff = cfg.x_inf.unwrap_or(field.x0 + 30.0);
    let report = check_lc_conditions(&field, far_cutoff, ConditionConfig::default())?;
    let v = serde_json::to_value(&report).map_err(|e| AppError::Numeric(e.to_string()))?;
    let mut w = sink(&common, &cfg)?;
    emit::write_json(&mut *w, &v)?;
    Ok(())
}

fn jost(common: Common, z: String) -> AppResult<()> {
    let (cfg, field) = load(&common)?;
    let z = parse_complex(&z).map_err(AppError::Config)?;
    let ev = build_evaluator(&cfg, &field, z, common.tol_scale)?;
    let (f, _) = ev.jost_pair(z)?;
    let meta = json!({
        "z": {"re": z.re, "im": z.im},
        "x_inf": f.x_inf,
        "tail_bound": f.tail_bound,
        "iterations": f.iterations,
    });
    if format_of(&common, &cfg) == "json" {
        let v = json!({
            "meta": meta,
            "x": f.sol.grid.xs,
            "u_re": f.sol.u.iter().map(|c| c.re).collect::<Vec<_>>(),
            "u_im": f.sol.u.iter().map(|c| c.im).collect::<Vec<_>>(),
            "pu_re": f.sol.v.iter().map(|c| c.re).collect::<Vec<_>>(),
            "pu_im": f.sol.v.iter().map(|c| c.im).collect::<Vec<_>>(),
        });
        let mut w = sink(&common, &cfg)?;
        emit::write_json(&mut *w, &v)?;
    } else {
        let mut w = sink(&common, &cfg)?;
        emit::solution_csv(&mut *w, &f.sol)?;
        drop(w);
        // Sidecar with the solver metadata.
        let mut err = std::io::stderr().lock();
        emit::write_json(&mut err, &meta)?;
    }
    Ok(())
}

fn connect(common: Common, z: Vec<String>) -> AppResult<()> {
    let (cfg, field) = load(&common)?;
    let zs = parse_z_list(&z, &cfg)?;
    let z_scale = zs
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap();
    let ev = build_evaluator(&cfg, &field, z_scale, common.tol_scale)?;
    let rows: Vec<emit::ConnectRow> = zs
        .par_iter()
        .map(|&z| -> Result<emit::ConnectRow, LcError> {
            let c = ev.connect(z)?;
            Ok(emit::ConnectRow {
                z,
                sigma_plus: c.sigma_plus,
                sigma_minus: c.sigma_minus,
                tau_plus: c.tau_plus,
                tau_minus: c.tau_minus,
                wro_residual: c.normalization_gap(),
            })
        })
        .collect::<Result<_, _>>()?;
    let mut w = sink(&common, &cfg)?;
    if format_of(&common, &cfg) == "json" {
        let v: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                json!({
                    "z": {"re": r.z.re, "im": r.z.im},
                    "sigma_plus": {"re": r.sigma_plus.re, "im": r.sigma_plus.im},
                    "sigma_minus": {"re": r.sigma_minus.re, "im": r.sigma_minus.im},
                    "tau_plus": {"re": r.tau_plus.re, "im": r.tau_plus.im},
                    "tau_minus": {"re": r.tau_minus.re, "im": r.tau_minus.im},
                    "wro_residual": r.wro_residual,
                })
            })
            .collect();
        emit::write_json(&mut *w, &serde_json::Value::Array(v))?;
    } else {
        emit::connect_csv(&mut *w, &rows)?;
    }
    Ok(())
}

fn parse_omegas(
    omega: &[String],
    t: &[String],
    cfg: &RunConfig,
    ev: &ConnectionEvaluator,
) -> AppResult<Vec<ExtensionPoint>> {
    let mut out = Vec::new();
    let mut raw: Vec<String> = omega.to_vec();
    if raw.is_empty() && t.is_empty() {
        raw = cfg.grids.omegas.clone();
    }
    for s in &raw {
        let w = parse_complex(s).map_err(AppError::Config)?;
        out.push(ExtensionPoint::new(w)?);
    }
    if !t.is_empty() {
        let c0 = ev.connect(Complex64::ZERO)?;
        for s in t {
            let tp = if s == "inf" || s == "infinity" {
                TParam::Infinity
            } else {
                TParam::Real(
                    s.parse()
                        .map_err(|_| AppError::Config(format!("bad deficiency parameter {s:?}")))?,
                )
            };
            out.push(omega_from_t(&c0, tp)?);
        }
    }
    if out.is_empty() {
        return Err(AppError::Config(
            "no boundary parameter: pass --omega/--t or configure grids.omegas".into(),
        ));
    }
    Ok(out)
}

fn eigs(
    common: Common,
    omega: Vec<String>,
    t: Vec<String>,
    interval: Option<String>,
) -> AppResult<()> {
    let (cfg, field) = load(&common)?;
    let interval = match interval {
        Some(s) => {
            let parts: Vec<&str> = s.split(',').collect();
            if parts.len() != 2 {
                return Err(AppError::Config("--interval expects LO,HI".into()));
            }
            let lo: f64 = parts[0]
                .trim()
                .parse()
                .map_err(|_| AppError::Config(format!("bad interval bound {:?}", parts[0])))?;
            let hi: f64 = parts[1]
                .trim()
                .parse()
                .map_err(|_| AppError::Config(format!("bad interval bound {:?}", parts[1])))?;
            (lo, hi)
        }
        None => cfg
            .grids
            .interval
            .ok_or_else(|| AppError::Config("no interval: pass --interval or configure".into()))?,
    };
    let z_scale = Complex64::new(interval.0.abs().max(interval.1.abs()).max(1.0), 0.0);
    let ev = match cfg.x_inf {
        Some(_) => build_evaluator(&cfg, &field, z_scale, common.tol_scale)?,
        None => {
            // Scan grids grow quickly with the interval end; use the looser
            // truncation threshold (the roots are solved to self-consistency).
            let mut ev = ConnectionEvaluator::with_tail_threshold(&field, z_scale, 1e-7)?;
            ev.tol = cfg.tolerances.volterra_tol * common.tol_scale;
            ev.cfg.rtol = cfg.tolerances.ode_tol * common.tol_scale;
            ev.cfg.atol = ev.cfg.rtol * 1e-2;
            ev
        }
    };
    let omegas = parse_omegas(&omega, &t, &cfg, &ev)?;
    let mut reports = Vec::new();
    for om in &omegas {
        let rep = eigenvalues(&ev, om, interval, cfg.tolerances.fit_tol * common.tol_scale)?;
        reports.push(emit::eigen_report_json(&rep));
    }
    let v = if reports.len() == 1 {
        reports.pop().unwrap()
    } else {
        serde_json::Value::Array(reports)
    };
    let mut w = sink(&common, &cfg)?;
    emit::write_json(&mut *w, &v)?;
    Ok(())
}

fn resolve(
    common: Common,
    omega: String,
    z: String,
    h_center: f64,
    h_width: f64,
) -> AppResult<()> {
    let (cfg, field) = load(&common)?;
    let z = parse_complex(&z).map_err(AppError::Config)?;
    let om = ExtensionPoint::new(parse_complex(&omega).map_err(AppError::Config)?)?;
    let ev = build_evaluator(&cfg, &field, z, common.tol_scale)?;
    let h = SampledFunction::gaussian(ev.grid(), h_center, h_width);
    let u = resolvent_apply(&ev, &om, z, &h)?;
    let residual = ode_residual_l2(&u, &h)?;
    let h_norm = inner(ev.grid(), &h.values, &h.values)?.re.sqrt();
    if format_of(&common, &cfg) == "json" {
        let v = json!({
            "z": {"re": z.re, "im": z.im},
            "omega": {"re": om.omega.re, "im": om.omega.im},
            "residual": residual,
            "h_norm": h_norm,
            "x": u.grid.xs,
            "u_re": u.u.iter().map(|c| c.re).collect::<Vec<_>>(),
            "u_im": u.u.iter().map(|c| c.im).collect::<Vec<_>>(),
            "pu_re": u.v.iter().map(|c| c.re).collect::<Vec<_>>(),
            "pu_im": u.v.iter().map(|c| c.im).collect::<Vec<_>>(),
        });
        let mut w = sink(&common, &cfg)?;
        emit::write_json(&mut *w, &v)?;
    } else {
        let mut w = sink(&common, &cfg)?;
        emit::solution_csv(&mut *w, &u)?;
        drop(w);
        eprintln!("residual = {residual:.3e} (||h|| = {h_norm:.3e})");
    }
    Ok(())
}

fn transform(
    common: Common,
    omega: String,
    z: Vec<String>,
    h_center: f64,
    h_width: f64,
) -> AppResult<()> {
    let (cfg, field) = load(&common)?;
    let zs = parse_z_list(&z, &cfg)?;
    if let Some(z) = zs.iter().find(|z| z.im == 0.0) {
        return Err(AppError::Config(format!(
            "transform needs Im z != 0, got z = {z}"
        )));
    }
    let om = ExtensionPoint::new(parse_complex(&omega).map_err(AppError::Config)?)?;
    let z_scale = zs
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap();
    let ev = build_evaluator(&cfg, &field, z_scale, common.tol_scale)?;
    let h = SampledFunction::gaussian(ev.grid(), h_center, h_width);
    let rows: Vec<(Complex64, Complex64)> = zs
        .par_iter()
        .map(|&z| -> Result<(Complex64, Complex64), LcError> {
            Ok((z, spectral_transform(&ev, &om, z, &h)?))
        })
        .collect::<Result<_, _>>()?;
    let mut w = sink(&common, &cfg)?;
    if format_of(&common, &cfg) == "json" {
        let v: Vec<serde_json::Value> = rows
            .iter()
            .map(|(z, f)| {
                json!({"z": {"re": z.re, "im": z.im}, "F": {"re": f.re, "im": f.im}})
            })
            .collect();
        emit::write_json(&mut *w, &serde_json::Value::Array(v))?;
    } else {
        emit::transform_csv(&mut *w, &rows)?;
    }
    Ok(())
}

struct IdentityCheck {
    tag: &'static str,
    description: &'static str,
    measured: f64,
    limit: f64,
}

impl IdentityCheck {
    fn pass(&self) -> bool {
        self.measured <= self.limit
    }
}

fn verify(common: Common) -> AppResult<()> {
    let (cfg, field) = load(&common)?;
    let ev = build_evaluator(&cfg, &field, I, common.tol_scale)?;
    let mut checks = Vec::new();

    // Wro: normalization of the connection coefficients.
    let mut worst = 0.0f64;
    for z in [Complex64::ZERO, I] {
        worst = worst.max(ev.connect(z)?.normalization_gap());
    }
    checks.push(IdentityCheck {
        tag: "Wro",
        description: "connection coefficient normalization",
        measured: worst,
        limit: 1e-6,
    });

    // Jo1B: Wronskian of the Jost pair.
    let (f, fbar) = ev.jost_pair(I)?;
    let w = wronskian(&f.sol, &fbar, ev.grid().match_index());
    checks.push(IdentityCheck {
        tag: "Jo1B",
        description: "jost pair wronskian",
        measured: (w - 2.0 * I).norm(),
        limit: 1e-6,
    });

    // LC2p: dissipation identity at z = i.
    let (lhs, rhs, gap) = verify_lc2p(&ev, I)?;
    checks.push(IdentityCheck {
        tag: "LC2p",
        description: "dissipation identity",
        measured: gap / lhs.abs().max(rhs.abs()),
        limit: 1e-4,
    });

    // qres1: quasiresolvent equation residual.
    let h = SampledFunction::gaussian(ev.grid(), field.x0 + 1.0, 0.4);
    let h_norm = inner(ev.grid(), &h.values, &h.values)?.re.sqrt();
    let qr = Quasiresolvent::new(&ev, I)?;
    let u = qr.apply(&h)?;
    checks.push(IdentityCheck {
        tag: "qres1",
        description: "quasiresolvent equation",
        measured: ode_residual_l2(&u, &h)? / h_norm,
        limit: 1e-6,
    });

    // ABS: boundary form at infinity on the regular solution.
    let bundle = ev.solutions(I)?;
    let s_phi = (bundle.coeffs.sigma_plus, bundle.coeffs.sigma_minus);
    let (bl, br, _) = boundary_form(&ev, &bundle.phi, s_phi, &bundle.phi, s_phi)?;
    checks.push(IdentityCheck {
        tag: "ABS",
        description: "boundary form at infinity",
        measured: (bl - br).norm() / bl.norm().max(br.norm()).max(1.0),
        limit: 1e-4,
    });

    // EX1: unimodularity and invertibility of the parameter link.
    let c0 = ev.connect(Complex64::ZERO)?;
    let mut worst_mod = 0.0f64;
    for t in [TParam::Real(0.0), TParam::Real(1.0), TParam::Infinity] {
        let om = omega_from_t(&c0, t)?;
        worst_mod = worst_mod.max((om.omega.norm() - 1.0).abs());
        if let (TParam::Real(t0), TParam::Real(t1)) = (t, t_from_omega(&c0, &om)?) {
            worst_mod = worst_mod.max((t1 - t0).abs() * 1e-10 / 1e-8);
        }
    }
    checks.push(IdentityCheck {
        tag: "EX1",
        description: "unimodular parameter link",
        measured: worst_mod,
        limit: 1e-10,
    });

    let all_pass = checks.iter().all(|c| c.pass());
    for c in &checks {
        println!(
            "{:<6} {:<38} {} (measured {:.2e}, limit {:.0e})",
            c.tag,
            c.description,
            if c.pass() { "pass" } else { "FAIL" },
            c.measured,
            c.limit
        );
    }
    println!("verify: {}", if all_pass { "all pass" } else { "FAILED" });
    let v = json!({
        "pass": all_pass,
        "identities": checks.iter().map(|c| json!({
            "tag": c.tag,
            "description": c.description,
            "measured": c.measured,
            "limit": c.limit,
            "pass": c.pass(),
        })).collect::<Vec<_>>(),
    });
    if common.out.is_some() || cfg.output.is_some() {
        let mut w = sink(&common, &cfg)?;
        emit::write_json(&mut *w, &v)?;
    }
    if all_pass {
        Ok(())
    } else {
        Err(AppError::Verification)
    }
}
