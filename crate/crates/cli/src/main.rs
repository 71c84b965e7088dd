//! `qet`: derive constants, run the protocol, certify passivity, sweep and
//! maximize the extracted energy, export circuits.
//!
//! Exit codes: 0 success, 1 certified-property violation, 2 configuration
//! error, 3 I/O error.

mod config;
mod format;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use qet_core::model::{build_observables, derive_constants, quasi_vacuum};
use qet_core::optimize::{maximize_kappa, sweep};
use qet_core::passivity::{
    delta_e_conditional, slp_min_kraus, slp_min_unitary, LocalOpKind, LocalOpSpec, PassivityReport,
};
use qet_core::protocol::{execute, export_qasm, ProtocolPlans};
use qet_core::{DerivedConstants, QetError, RunReport};

use config::{Mode, OutputFormat, Overrides, RunConfig, Target, VariantArg};
use format::{csv_string, fixed, json_string, sig12};

#[derive(Debug)]
pub enum CliError {
    Violation(String),
    Config(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Violation(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Violation(m) => write!(f, "property violated: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<QetError> for CliError {
    fn from(e: QetError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "qet", version, about = "Enhanced quantum energy teleportation toolkit")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, env = "QET_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    shots: Option<u64>,
    #[arg(long, value_enum, global = true)]
    mode: Option<Mode>,
    #[arg(long, value_enum, global = true)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum, global = true)]
    output: Option<OutputFormat>,
    /// Output file (export: output directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long = "h-a", global = true)]
    h_a: Option<f64>,
    #[arg(long = "h-b", global = true)]
    h_b: Option<f64>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived model constants.
    Derive,
    /// Energy ledger of the three protocol steps.
    Table1,
    /// Certify strong local passivity of the post-measurement state.
    Slp {
        #[arg(long, value_enum)]
        target: Option<Target>,
    },
    /// Extracted energy over a (κ, h_B) grid.
    Sweep,
    /// Maximize the extracted energy over κ.
    Maximize,
    /// Write one OpenQASM 3 file per step.
    Export,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qet: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        shots: cli.shots,
        mode: cli.mode,
        variant: cli.variant,
        output: cli.output,
        h_a: cli.h_a,
        h_b: cli.h_b,
        kappa: cli.kappa,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Derive => emit(&cmd_derive(&cfg)?, out),
        Command::Table1 => {
            let (text, result) = cmd_table1(&cfg)?;
            emit(&text, out)?;
            result
        }
        Command::Slp { target } => {
            let (text, result) = cmd_slp(&cfg, target.unwrap_or(cfg.slp.target))?;
            emit(&text, out)?;
            result
        }
        Command::Sweep => {
            let path = out.or(cfg.sweep_out.as_deref());
            emit(&cmd_sweep(&cfg)?, path)
        }
        Command::Maximize => emit(&cmd_maximize(&cfg)?, out),
        Command::Export => {
            let text = cmd_export(&cfg, out.unwrap_or(Path::new(".")))?;
            emit(&text, None)
        }
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn constants(cfg: &RunConfig) -> Result<DerivedConstants, CliError> {
    Ok(derive_constants(&cfg.params)?)
}

fn cmd_derive(cfg: &RunConfig) -> Result<String, CliError> {
    let c = constants(cfg)?;
    let rows = [
        ("h_A", c.params.h_a),
        ("h_B", c.params.h_b),
        ("kappa", c.params.kappa),
        ("x_A", c.x_a),
        ("x_B", c.x_b),
        ("s", c.s),
        ("theta", c.theta),
        ("phi", c.phi),
        ("delta", c.delta),
        ("f_A", c.f_a),
        ("f_B", c.f_b),
        ("f_V", c.f_v),
        ("h_C", c.h_c),
        ("transfer_energy", c.transfer_energy()),
    ];
    match cfg.output.unwrap_or(OutputFormat::Table) {
        OutputFormat::Table => Ok(rows
            .iter()
            .map(|(k, v)| format!("{k} = {}\n", fixed(*v, 6)))
            .collect()),
        OutputFormat::Csv => csv_string(
            &["name", "value"],
            &rows.iter().map(|(k, v)| vec![k.to_string(), sig12(*v)]).collect::<Vec<_>>(),
        ),
        OutputFormat::Json => Ok(json_string(&json!({
            "command": "derive",
            "constants": c,
            "transfer_energy": c.transfer_energy(),
        }))),
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Exact => "exact",
        Mode::Sampled => "sampled",
        Mode::Noisy => "noisy",
    }
}

/// Spectral bounds of `(H_A, H_V + H_B, H_C)`.
fn spectral_bounds(c: &DerivedConstants) -> [(f64, f64); 3] {
    let h_a = c.params.h_a;
    let bob = c.params.h_b.hypot(2.0 * c.params.kappa);
    let off = c.f_v + c.f_b;
    [
        (c.f_a - h_a, c.f_a + h_a),
        (off - bob, off + bob),
        (0.0, 2.0 * c.h_c),
    ]
}

fn check_bounds(c: &DerivedConstants, report: &RunReport) -> Result<(), CliError> {
    let names = ["<H_A>", "<H_V+H_B>", "<H_C>"];
    for (k, s) in report.steps.iter().enumerate() {
        for (((e, se), (lo, hi)), name) in s
            .energies()
            .iter()
            .zip(s.standard_errors())
            .zip(spectral_bounds(c))
            .zip(names)
        {
            let slack = 5.0 * se + 1e-9;
            if *e < lo - slack || *e > hi + slack {
                return Err(CliError::Violation(format!(
                    "step {} {name} = {e} outside [{lo}, {hi}]",
                    k + 1
                )));
            }
        }
    }
    Ok(())
}

fn cmd_table1(cfg: &RunConfig) -> Result<(String, Result<(), CliError>), CliError> {
    let c = constants(cfg)?;
    let plans = ProtocolPlans::new(&c, cfg.variant);
    let mode = cfg.execution_mode();
    let report = execute(&c, &plans, &mode)?;
    let check = check_bounds(&c, &report);
    let text = match cfg.output.unwrap_or(OutputFormat::Table) {
        OutputFormat::Table => table1_text(cfg, &report),
        OutputFormat::Csv => {
            let mut rows = Vec::new();
            let names = ["H_A", "H_V+H_B", "H_C"];
            for (k, s) in report.steps.iter().enumerate() {
                for ((name, e), se) in names.iter().zip(s.energies()).zip(s.standard_errors()) {
                    rows.push(vec![(k + 1).to_string(), name.to_string(), sig12(e), sig12(se)]);
                }
            }
            let se = |i: usize| {
                let a = report.steps[2].standard_errors()[i];
                let b = report.steps[1].standard_errors()[i];
                sig12(a.hypot(b))
            };
            rows.push(vec!["3-2".into(), "H_V+H_B".into(), sig12(report.extracted), se(1)]);
            rows.push(vec!["3-2".into(), "H_C".into(), sig12(report.stored), se(2)]);
            csv_string(&["step", "observable", "energy", "se"], &rows)?
        }
        OutputFormat::Json => {
            let sampled = cfg.mode != Mode::Exact;
            json_string(&json!({
                "command": "table1",
                "mode": mode_name(cfg.mode),
                "variant": cfg.variant,
                "seed": sampled.then_some(cfg.seed),
                "shots": sampled.then_some(cfg.shots),
                "params": c.params,
                "report": report,
            }))
        }
    };
    Ok((text, check))
}

fn table1_text(cfg: &RunConfig, report: &RunReport) -> String {
    let sampled = cfg.mode != Mode::Exact;
    let cell = |e: f64, se: f64| {
        if sampled {
            format!("{}±{}", fixed(e, 3), fixed(se, 3))
        } else {
            fixed(e, 3)
        }
    };
    let mut s = String::new();
    let _ = write!(s, "Energy ledger (mode: {}, variant: {}", mode_name(cfg.mode), cfg.variant);
    if sampled {
        let _ = write!(s, ", shots: {}, seed: {}", cfg.shots, cfg.seed);
    }
    s.push_str(")\n");
    let _ = writeln!(s, "{:<6}{:>16}{:>16}{:>16}", "step", "<H_A>", "<H_V+H_B>", "<H_C>");
    for (k, st) in report.steps.iter().enumerate() {
        let cells: Vec<String> = st
            .energies()
            .iter()
            .zip(st.standard_errors())
            .map(|(e, se)| cell(*e, se))
            .collect();
        let _ = writeln!(s, "{:<6}{:>16}{:>16}{:>16}", k + 1, cells[0], cells[1], cells[2]);
    }
    let _ = writeln!(s, "{:<24}{:>10}", "Extracted Δ(E_V+E_B)", fixed(report.extracted, 3));
    let _ = writeln!(s, "{:<24}{:>10}", "Stored energy ΔE_C", fixed(report.stored, 3));
    s
}

fn describe_op(op: &LocalOpSpec) -> String {
    match &op.kind {
        LocalOpKind::Unitary { alpha, beta, gamma } => format!(
            "Rz({})·Ry({})·Rz({}) on qubit {} (rotation angle {:.2e} rad)",
            fixed(*alpha, 6),
            fixed(*beta, 6),
            fixed(*gamma, 6),
            op.target,
            op.rotation_angle().unwrap_or(f64::NAN)
        ),
        LocalOpKind::KrausPair { .. } => format!("Kraus pair on qubit {}", op.target),
    }
}

fn cmd_slp(cfg: &RunConfig, target: Target) -> Result<(String, Result<(), CliError>), CliError> {
    let c = constants(cfg)?;
    let h = build_observables(&c).h_ab_pair;
    let rho = quasi_vacuum(&c);
    let q = target.qubit();
    let unitary = slp_min_unitary(&rho, &h, q, cfg.slp.grid_n, cfg.slp.refine_iters)?;
    let kraus = match cfg.slp.kraus_starts {
        0 => None,
        n => Some(slp_min_kraus(&rho, &h, q, n, cfg.slp.refine_iters, cfg.seed)?),
    };
    let conditional = delta_e_conditional(
        &rho,
        0,
        &LocalOpSpec::unitary(0.0, -2.0 * c.delta, 0.0, 1),
        &LocalOpSpec::unitary(0.0, 2.0 * c.delta, 0.0, 1),
        &h,
    )?;
    let reports: Vec<&PassivityReport> = std::iter::once(&unitary).chain(kraus.as_ref()).collect();
    let certified = reports.iter().all(|r| r.certifies_slp());
    let min = reports.iter().map(|r| r.min_delta_e).fold(f64::INFINITY, f64::min);
    let label = match target {
        Target::A => "A",
        Target::B => "B",
    };
    let text = match cfg.output.unwrap_or(OutputFormat::Table) {
        OutputFormat::Table => {
            let mut s = String::new();
            let verdict = if certified { "SLP certified" } else { "SLP VIOLATED" };
            let _ = writeln!(s, "min ΔE = {} ({verdict})", fixed(min, 6));
            let _ = writeln!(s, "target = {label}");
            for r in &reports {
                let _ = writeln!(
                    s,
                    "{:?}: min ΔE = {:.3e}, {} evaluations, argmin {}",
                    r.method,
                    r.min_delta_e,
                    r.evaluations,
                    describe_op(&r.argmin)
                );
            }
            let _ = writeln!(s, "conditional strategy ΔE = {}", fixed(conditional, 6));
            s
        }
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    vec![
                        label.to_string(),
                        serde_json::to_value(r.method).unwrap().as_str().unwrap().to_string(),
                        sig12(r.min_delta_e),
                        r.evaluations.to_string(),
                        r.argmin.rotation_angle().map(sig12).unwrap_or_default(),
                        r.certifies_slp().to_string(),
                    ]
                })
                .collect();
            csv_string(
                &["target", "method", "min_delta_e", "evaluations", "argmin_rotation", "certified"],
                &rows,
            )?
        }
        OutputFormat::Json => json_string(&json!({
            "command": "slp",
            "target": label,
            "certified": certified,
            "unitary": unitary,
            "kraus": kraus,
            "conditional_delta_e": conditional,
            "params": c.params,
        })),
    };
    let result = if certified {
        Ok(())
    } else {
        Err(CliError::Violation(format!("min ΔE = {min:e} below −1e-8 on qubit {label}")))
    };
    Ok((text, result))
}

fn cmd_sweep(cfg: &RunConfig) -> Result<String, CliError> {
    let rows = sweep(&cfg.sweep)?;
    match cfg.output.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => csv_string(
            &["kappa", "h_B", "energy"],
            &rows
                .iter()
                .map(|r| vec![sig12(r.kappa), sig12(r.h_b), sig12(r.energy)])
                .collect::<Vec<_>>(),
        ),
        OutputFormat::Table => {
            let mut s = format!("{:>10}{:>10}{:>10}\n", "kappa", "h_B", "energy");
            for r in &rows {
                let _ = writeln!(s, "{:>10}{:>10}{:>10}", fixed(r.kappa, 3), fixed(r.h_b, 3), fixed(r.energy, 3));
            }
            Ok(s)
        }
        OutputFormat::Json => Ok(json_string(&json!({
            "command": "sweep",
            "h_A": cfg.sweep.h_a,
            "rows": rows,
        }))),
    }
}

fn cmd_maximize(cfg: &RunConfig) -> Result<String, CliError> {
    let m = cfg.maximize;
    let r = maximize_kappa(m.h_a, m.h_b, m.bracket, m.tol)?;
    match cfg.output.unwrap_or(OutputFormat::Table) {
        OutputFormat::Table => Ok(format!(
            "h_A = {}\nh_B = {}\nκ* = {}\nE* = {}\niterations = {}\nbracket = ({}, {})\n",
            fixed(m.h_a, 3),
            fixed(m.h_b, 3),
            fixed(r.kappa_star, 6),
            fixed(r.e_star, 6),
            r.iterations,
            fixed(r.bracket.0, 3),
            fixed(r.bracket.1, 3)
        )),
        OutputFormat::Csv => csv_string(
            &["h_A", "h_B", "kappa_star", "e_star", "iterations", "bracket_lo", "bracket_hi"],
            &[vec![
                sig12(m.h_a),
                sig12(m.h_b),
                sig12(r.kappa_star),
                sig12(r.e_star),
                r.iterations.to_string(),
                sig12(r.bracket.0),
                sig12(r.bracket.1),
            ]],
        ),
        OutputFormat::Json => Ok(json_string(&json!({
            "command": "maximize",
            "h_A": m.h_a,
            "h_B": m.h_b,
            "tol": m.tol,
            "optimum": r,
        }))),
    }
}

fn cmd_export(cfg: &RunConfig, dir: &Path) -> Result<String, CliError> {
    let c = constants(cfg)?;
    let plans = ProtocolPlans::new(&c, cfg.variant);
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for k in 1..=3 {
        let path = dir.join(format!("qet_{}_step{k}.qasm", cfg.variant));
        emit(&export_qasm(&plans, k)?, Some(&path))?;
        files.push(path.display().to_string());
    }
    Ok(match cfg.output.unwrap_or(OutputFormat::Table) {
        OutputFormat::Json => json_string(&json!({
            "command": "export",
            "variant": cfg.variant,
            "files": files,
        })),
        OutputFormat::Csv => csv_string(
            &["step", "path"],
            &files
                .iter()
                .enumerate()
                .map(|(i, f)| vec![(i + 1).to_string(), f.clone()])
                .collect::<Vec<_>>(),
        )?,
        OutputFormat::Table => files.iter().map(|f| format!("wrote {f}\n")).collect(),
    })
}
