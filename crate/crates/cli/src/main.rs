use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use tlrcool::config::{self, Format, RunConfig};
use tlrcool::cooling::{cooling_limits, evaluate, CoolingReport};
use tlrcool::optimize::optimize;
use tlrcool::output::{reports_csv, spectrum_csv, sweep_csv, CsvDocument, CsvValue, JsonDocument, REPORT_COLUMNS};
use tlrcool::spectrum::Spectra;
use tlrcool::stability::Verdict;
use tlrcool::steady_state::solve_working_point;
use tlrcool::sweep::run_sweep;
use tlrcool::validation::run_checks;
use tlrcool::ModelError;

const EXIT_USAGE: u8 = 1;
const EXIT_UNSTABLE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "tlrcool",
    version,
    about = "Back-action cooling of a mechanical resonator by a driven transmission-line resonator"
)]
struct Cli {
    /// TOML configuration file; defaults are used for anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted-path override, e.g. `system.kappa=0.1` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output format for documents.
    #[arg(long, global = true, value_parser = ["json", "csv"])]
    format: Option<String>,
    /// Write the document to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grid evaluation.
    #[arg(long, global = true, env = "TLRCOOL_WORKERS")]
    workers: Option<usize>,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct PointArgs {
    /// Effective detuning Δ (ω_b units unless the config is SI).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "delta0")]
    delta: Option<String>,
    /// Bare detuning Δ0; Δ is then solved from the steady state.
    #[arg(long, allow_hyphen_values = true)]
    delta0: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Steady state: every branch of the detuning cubic with its stability.
    Steady(PointArgs),
    /// Noise spectra on a uniform frequency grid.
    Spectrum {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        omega_min: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        omega_max: f64,
        #[arg(long, default_value_t = 601)]
        points: usize,
    },
    /// Full cooling report for one point.
    Cool(PointArgs),
    /// Grid scan over the axes of the [sweep] section.
    Sweep,
    /// Minimize the phonon number over the [optimize] bounds.
    Optimize,
    /// Closed-form cooling limits.
    Limits,
    /// Oracle comparison and identity checks.
    Validate(PointArgs),
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let code = match e {
            ModelError::NoStationaryState | ModelError::SingularSusceptibility { .. } => EXIT_UNSTABLE,
            ModelError::NotConverged { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(cli: &Cli, point: Option<&PointArgs>) -> Result<RunConfig, Failure> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut overrides = cli.set.clone();
    if let Some(t) = cli.tol {
        overrides.push(format!("numerics.rel_tol={t}"));
    }
    if let Some(f) = &cli.format {
        overrides.push(format!("output.format=\"{f}\""));
    }
    if let Some(p) = point {
        // A detuning on the command line replaces whichever one the file set.
        if let Some(d) = &p.delta {
            overrides.push(format!("drive.delta={}", quote(d)));
        }
        if let Some(d) = &p.delta0 {
            overrides.push(format!("drive.delta0={}", quote(d)));
        }
        let mut cfg = config::load_with(&text, &overrides, &cleared(p))?;
        if let Some(out) = &cli.out {
            cfg.out = Some(out.display().to_string());
        }
        return Ok(cfg);
    }
    let mut cfg = config::load(&text, &overrides)?;
    if let Some(out) = &cli.out {
        cfg.out = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn cleared(p: &PointArgs) -> Vec<&'static str> {
    match (&p.delta, &p.delta0) {
        (Some(_), _) => vec!["drive.delta0"],
        (_, Some(_)) => vec!["drive.delta"],
        _ => vec![],
    }
}

/// Numbers pass through; anything else (unit suffixes) becomes a TOML string.
fn quote(v: &str) -> String {
    if v.parse::<f64>().is_ok() {
        v.to_string()
    } else {
        format!("\"{v}\"")
    }
}

/// Document to `--out` (or the config's output path) or stdout.
fn write_document(cfg: &RunConfig, text: &str) -> Result<(), Failure> {
    match &cfg.out {
        Some(path) => fs::write(path, text).map_err(|e| fail(EXIT_USAGE, format!("{path}: {e}"))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn wants_document(cli: &Cli, cfg: &RunConfig) -> bool {
    cli.format.is_some() || cfg.out.is_some()
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Steady(point) => steady(cli, &load_config(cli, Some(point))?),
        Command::Spectrum {
            point,
            omega_min,
            omega_max,
            points,
        } => spectrum(&load_config(cli, Some(point))?, *omega_min, *omega_max, *points),
        Command::Cool(point) => cool(cli, &load_config(cli, Some(point))?),
        Command::Sweep => sweep(cli, &load_config(cli, None)?),
        Command::Optimize => optimize_cmd(cli, &load_config(cli, None)?),
        Command::Limits => limits(cli, &load_config(cli, None)?),
        Command::Validate(point) => validate(cli, &load_config(cli, Some(point))?),
    }
}

fn steady(cli: &Cli, cfg: &RunConfig) -> Result<u8, Failure> {
    let ss = solve_working_point(&cfg.system, &cfg.drive, cfg.numerics.margin)?;
    if wants_document(cli, cfg) {
        let text = match cfg.format {
            Format::Json => JsonDocument::new("steady", cfg.to_json(), &ss).emit(),
            Format::Csv => {
                let rows = ss
                    .branches
                    .iter()
                    .map(|b| {
                        vec![
                            CsvValue::Number(b.point.delta),
                            CsvValue::Number(b.point.delta0),
                            CsvValue::Number(b.point.a_mean.re),
                            CsvValue::Number(b.point.a_mean.im),
                            CsvValue::Number(b.point.x_mean),
                            CsvValue::Number(b.point.g_eff),
                            CsvValue::Text(b.stability.to_string()),
                        ]
                    })
                    .collect();
                CsvDocument {
                    kind: "steady".into(),
                    config: cfg.to_json(),
                    header: ["delta", "delta0", "re_a", "im_a", "x_mean", "g_eff", "stability"]
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                    rows,
                }
                .emit()
            }
        };
        write_document(cfg, &text)?;
        return Ok(0);
    }
    println!(
        "branches: {}{}",
        ss.branches.len(),
        if ss.multistable { " (multistable)" } else { "" }
    );
    for (i, b) in ss.branches.iter().enumerate() {
        let wp = &b.point;
        println!(
            "{} delta = {:.10}  delta0 = {:.10}  <a> = {:.6e} {:+.6e}i  <x> = {:.6e}  g = {:.6e}  {}",
            if i == 0 { "*" } else { " " },
            wp.delta,
            wp.delta0,
            wp.a_mean.re,
            wp.a_mean.im,
            wp.x_mean,
            wp.g_eff,
            b.stability
        );
    }
    println!("linearization_ok: {}", ss.linearization_ok);
    Ok(0)
}

fn spectrum(cfg: &RunConfig, lo: f64, hi: f64, n: usize) -> Result<u8, Failure> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || n < 2 {
        return Err(fail(EXIT_USAGE, "need omega_min < omega_max and at least 2 points"));
    }
    let ss = solve_working_point(&cfg.system, &cfg.drive, cfg.numerics.margin)?;
    if ss.principal_stability != Verdict::Stable {
        return Err(fail(
            EXIT_UNSTABLE,
            format!("working point is {}", ss.principal_stability),
        ));
    }
    let spectra = Spectra::new(&cfg.system, &ss.principal).with_thermal(cfg.numerics.thermal);
    let samples = (0..n)
        .map(|i| spectra.sample(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect::<Result<Vec<_>, _>>()?;
    let mut config = cfg.to_json();
    config["spectrum"] = json!({ "omega_min": lo, "omega_max": hi, "points": n });
    let text = match cfg.format {
        Format::Csv => spectrum_csv(&samples, config).emit(),
        Format::Json => JsonDocument::new("spectrum", config, &samples).emit(),
    };
    write_document(cfg, &text)?;
    Ok(0)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"))
}

fn print_report(r: &CoolingReport) {
    println!("delta            {:.6}  (delta0 {:.6})", r.delta, r.delta0);
    println!("stability        {}", r.stability);
    println!("|<a>|            {:.6e}", r.cavity_amplitude);
    println!("n_b              {:.6}", r.n_b);
    println!("n_bf exact       {}", opt(r.n_bf_exact));
    println!(
        "n_bf approx      {}{}",
        opt(r.n_bf_approx),
        if r.n_bf_approx_valid {
            ""
        } else {
            "  (outside validity)"
        }
    );
    println!("n_ca             {}", opt(r.n_ca));
    println!(
        "T_eff            {}{}",
        opt(r.t_eff),
        if r.t_eff_valid { "" } else { "  (outside validity)" }
    );
    println!("gamma_ca(w_b)    {:.6e}", r.gamma_ca_at_wb);
    println!("equipartition    {}", opt(r.equipartition_ratio));
    println!("evaluations      {}  converged {}", r.n_evaluations, r.converged);
    let f = &r.flags;
    println!(
        "flags            weak_coupling={} high_q={} cond20={} cond22={} rwa={} linear={}",
        f.weak_coupling, f.high_quality_cavity, f.condition_20, f.condition_22, f.rwa_ok, f.linearization_ok
    );
    for w in &r.warnings {
        println!("warning          {w:?}");
    }
}

fn cool(cli: &Cli, cfg: &RunConfig) -> Result<u8, Failure> {
    let r = evaluate(&cfg.system, &cfg.drive, &cfg.eval_options())?;
    if wants_document(cli, cfg) {
        let text = match cfg.format {
            Format::Json => JsonDocument::new("cool", cfg.to_json(), &r).emit(),
            Format::Csv => {
                let cols: Vec<String> = REPORT_COLUMNS.iter().map(|s| s.to_string()).collect();
                reports_csv("cool", &[&r], &cols, cfg.to_json()).emit()
            }
        };
        write_document(cfg, &text)?;
    } else {
        print_report(&r);
    }
    if r.stability != Verdict::Stable {
        eprintln!("error: working point is {}", r.stability);
        return Ok(EXIT_UNSTABLE);
    }
    if !r.converged {
        eprintln!("error: quadrature did not reach the requested tolerance");
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(0)
}

fn sweep(cli: &Cli, cfg: &RunConfig) -> Result<u8, Failure> {
    let spec = cfg.sweep_spec()?;
    let outputs = &cfg.sweep.as_ref().expect("validated by sweep_spec").outputs;
    let table = run_sweep(&spec, cli.workers)?;
    let text = match cfg.format {
        Format::Csv => sweep_csv(&table, outputs, cfg.to_json()).emit(),
        Format::Json => JsonDocument::new("sweep", cfg.to_json(), &table).emit(),
    };
    write_document(cfg, &text)?;
    let failed = table.points.iter().filter(|p| p.cell.report().is_none()).count();
    let not_converged = table
        .points
        .iter()
        .filter_map(|p| p.cell.report())
        .filter(|r| !r.converged)
        .count();
    if cfg.out.is_some() {
        println!(
            "{} points, {} without a report, {} not converged",
            table.points.len(),
            failed,
            not_converged
        );
    }
    Ok(if not_converged > 0 { EXIT_NOT_CONVERGED } else { 0 })
}

fn optimize_cmd(cli: &Cli, cfg: &RunConfig) -> Result<u8, Failure> {
    let mut spec = cfg.optimize_spec()?;
    spec.workers = cli.workers;
    let o = optimize(&spec)?;
    if wants_document(cli, cfg) {
        let text = match cfg.format {
            Format::Json => JsonDocument::new("optimize", cfg.to_json(), &o).emit(),
            Format::Csv => {
                let mut doc = reports_csv(
                    "optimize",
                    &[&o.report],
                    &REPORT_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                    cfg.to_json(),
                );
                let mut header: Vec<String> = o.params.iter().map(|(p, _)| p.to_string()).collect();
                header.extend(["objective".to_string(), "evaluations".to_string()]);
                let mut row: Vec<CsvValue> = o.params.iter().map(|&(_, v)| CsvValue::Number(v)).collect();
                row.extend([CsvValue::Number(o.value), CsvValue::Number(o.evaluations as f64)]);
                header.append(&mut doc.header);
                row.append(&mut doc.rows[0]);
                doc.header = header;
                doc.rows = vec![row];
                doc.emit()
            }
        };
        write_document(cfg, &text)?;
    } else {
        for (p, v) in &o.params {
            println!("{p:<16} {v:.6}");
        }
        println!("objective        {:.6}", o.value);
        println!("evaluations      {}", o.evaluations);
        println!();
        print_report(&o.report);
    }
    Ok(0)
}

fn limits(cli: &Cli, cfg: &RunConfig) -> Result<u8, Failure> {
    let l = cooling_limits(&cfg.system);
    if wants_document(cli, cfg) {
        let text = match cfg.format {
            Format::Json => JsonDocument::new("limits", cfg.to_json(), &l).emit(),
            Format::Csv => {
                let v: Value = serde_json::to_value(l).expect("limits serialize");
                let obj = v.as_object().expect("struct");
                CsvDocument {
                    kind: "limits".into(),
                    config: cfg.to_json(),
                    header: obj.keys().cloned().collect(),
                    rows: vec![obj
                        .values()
                        .map(|x| CsvValue::Number(x.as_f64().unwrap_or(f64::NAN)))
                        .collect()],
                }
                .emit()
            }
        };
        write_document(cfg, &text)?;
        return Ok(0);
    }
    println!("resolved sideband  n >= {:.6e}", l.resolved_sideband);
    println!("doppler            n >= {:.6e}", l.doppler);
    println!("classical          T/T_eff <= {:.6e}", l.classical_ratio);
    println!("optimal delta      {:.6}", l.optimal_delta);
    println!("n_ca minimum       {:.6e}", l.n_ca_minimum);
    Ok(0)
}

fn validate(cli: &Cli, cfg: &RunConfig) -> Result<u8, Failure> {
    let checks = run_checks(&cfg.system, &cfg.drive, &cfg.eval_options())?;
    let ok = checks.iter().all(|c| c.pass);
    if wants_document(cli, cfg) {
        let text = match cfg.format {
            Format::Json => JsonDocument::new("validate", cfg.to_json(), &checks).emit(),
            Format::Csv => CsvDocument {
                kind: "validate".into(),
                config: cfg.to_json(),
                header: vec!["check".into(), "pass".into(), "detail".into()],
                rows: checks
                    .iter()
                    .map(|c| {
                        vec![
                            CsvValue::Text(c.name.clone()),
                            CsvValue::Bool(c.pass),
                            CsvValue::Text(c.detail.clone()),
                        ]
                    })
                    .collect(),
            }
            .emit(),
        };
        write_document(cfg, &text)?;
    }
    if !wants_document(cli, cfg) || cfg.out.is_some() {
        for c in &checks {
            println!("[{}] {:<32} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        println!(
            "{} of {} checks passed",
            checks.iter().filter(|c| c.pass).count(),
            checks.len()
        );
    }
    Ok(if ok { 0 } else { EXIT_VALIDATION })
}
