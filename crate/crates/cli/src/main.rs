use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use semilinear_core::app::{
    catalog_listing, exit_code, parse_config, run_convergence_study, run_kernel_check, run_solve,
    write_json, AppError, RunConfig,
};

/// Solve and certify (-Δ + k²) u + f(u) = 0 on a box with zero boundary values.
#[derive(Parser)]
#[command(name = "semilinear", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve with damped Picard, certify, and write solution CSV + report JSON.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve on successively doubled grids and estimate the order of convergence.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Compare discrete Green's kernel columns against the Yukawa kernel (3D only).
    KernelCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the built-in nonlinearities.
    Catalog,
}

fn config_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn output_path(dir: &Path, configured: Option<&PathBuf>, default: &str) -> PathBuf {
    let p = configured
        .cloned()
        .unwrap_or_else(|| PathBuf::from(default));
    if p.is_absolute() {
        p
    } else {
        dir.join(p)
    }
}

fn load(path: &Path) -> Result<(RunConfig, PathBuf), AppError> {
    Ok((parse_config(path)?, config_dir(path)))
}

fn solve(path: &Path) -> Result<i32, AppError> {
    let (config, dir) = load(path)?;
    let outcome = run_solve(&config, &dir)?;
    let r = &outcome.report;
    println!("outcome: {}", r.outcome);
    if !r.sign_condition.passed {
        if let (Some(u), Some(p)) = (r.sign_condition.witness, r.sign_condition.witness_product) {
            eprintln!("sign condition violated at u = {u}: u f(u) = {p}");
        }
    }
    if !r.continuity.passed {
        if let (Some(u), Some(j)) = (r.continuity.jump_near, r.continuity.jump_size) {
            eprintln!("undeclared discontinuity near u = {u} (jump {j})");
        }
    }
    if let Some(s) = &r.solve {
        println!(
            "iterations: {}  residual: {:.3e}  update: {:.3e}",
            s.iterations, s.final_residual, s.final_update
        );
    }
    if let Some(c) = &r.certificates {
        println!(
            "certificates: residual={} apriori={} amplitude={} energy={} max_principle={}",
            c.residual.pass,
            c.apriori_sup.pass,
            c.amplitude.pass,
            c.energy.pass,
            c.max_principle.pass
        );
    }
    println!("hash: {}", r.hash);
    Ok(outcome.exit_code)
}

fn study(path: &Path, levels: usize) -> Result<i32, AppError> {
    let (config, dir) = load(path)?;
    let report = run_convergence_study(&config, levels)?;
    for (i, l) in report.levels.iter().enumerate() {
        println!(
            "level {i}: cells {:?}  h {:.4e}  {:?}  sup|u| {:.6e}",
            l.cells, l.h, l.status, l.sup_u
        );
    }
    for (d, p) in report
        .differences
        .iter()
        .zip(std::iter::once(None).chain(report.orders.iter().copied().map(Some)))
    {
        match p {
            Some(p) => println!("difference {d:.4e}  order {p:.3}"),
            None => println!("difference {d:.4e}"),
        }
    }
    let out = output_path(&dir, config.output.study_json.as_ref(), "study.json");
    write_json(&out, &report)?;
    println!("wrote {}", out.display());
    Ok(if report.complete {
        exit_code::SUCCESS
    } else {
        exit_code::NOT_CONVERGED
    })
}

fn kernel_check(path: &Path) -> Result<i32, AppError> {
    let (config, dir) = load(path)?;
    let report = run_kernel_check(&config)?;
    for s in &report.sources {
        println!(
            "source {:>7} {:?}: worst ratio {:.5}  min {:.3e}  {}",
            s.source_index,
            s.source,
            s.worst_ratio,
            s.min_value,
            if s.pass { "pass" } else { "FAIL" }
        );
    }
    let m = &report.yukawa_mass;
    println!(
        "yukawa mass: {:.8} vs {:.8} (rel err {:.2e}) {}",
        m.value,
        m.expected,
        m.relative_error,
        if m.pass { "pass" } else { "FAIL" }
    );
    let out = output_path(&dir, config.output.kernel_json.as_ref(), "kernel.json");
    write_json(&out, &report)?;
    println!("wrote {}", out.display());
    Ok(if report.pass {
        exit_code::SUCCESS
    } else {
        exit_code::CERTIFICATE_FAILED
    })
}

fn catalog() -> i32 {
    for e in catalog_listing() {
        print!("{:<12} a = {:<10.6} {}", e.label, e.a, e.formula);
        for d in &e.discontinuities {
            print!("  [jump at {}: {} -> {}]", d.point, d.left, d.right);
        }
        println!();
    }
    exit_code::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { config } => solve(config),
        Command::Study { config, levels } => study(config, *levels),
        Command::KernelCheck { config } => kernel_check(config),
        Command::Catalog => Ok(catalog()),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
