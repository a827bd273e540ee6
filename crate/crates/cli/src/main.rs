//! `qc` — batch verification front end. Every subcommand runs a fixed
//! suite of checks and writes a JSON report; exit code 0 means every
//! record passed, 1 means at least one failed, 2 means the invocation
//! itself was invalid.

mod checks;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use checks::{ConfigError, Ctx};
use report::Report;

#[derive(Parser)]
#[command(name = "qc", version, about = "verification suites for the quartic Carleman toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// spatial dimension for the symbolic suites
    #[arg(long, default_value_t = 2, global = true)]
    d: usize,

    /// localization radius; defaults to the suite's own {4, 8} sweep
    #[arg(long = "R", global = true)]
    r: Option<f64>,

    /// weight strength coefficient in alpha = coeff * R^(4/3);
    /// defaults to the certified threshold
    #[arg(long, global = true)]
    alpha_coeff: Option<f64>,

    /// stretched-exponential weight strength for convexity suites
    #[arg(long, default_value_t = 0.05, global = true)]
    lambda: f64,

    /// points per spatial axis for numeric suites
    #[arg(long, default_value_t = 128, global = true)]
    grid: usize,

    /// relative tolerance for cross-validation checks
    #[arg(long, default_value_t = 1e-6, global = true)]
    tol: f64,

    /// seed for randomized suites (echoed in the report)
    #[arg(long, default_value_t = 7_355_608, global = true)]
    seed: u64,

    /// report output directory (or QC_OUT_DIR, or the working directory)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// directory of reference displays overriding the embedded set
    #[arg(long, global = true)]
    refs: Option<PathBuf>,

    /// potential for the evolution suite: zero | const:<level>
    #[arg(long = "V", default_value = "zero", global = true)]
    v: String,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    /// conjugated-operator and split displays against the references
    VerifySymbolic,
    /// commutator case displays, erratum flag, and the sum identity
    VerifyCommutators,
    /// integration-by-parts normal form against the transcribed summary
    VerifyForm,
    /// exact rational lower-bound certificate plus random soundness
    Certify,
    /// numeric cross-validation: quadrature, weighted quotients, Rayleigh minima
    CarlemanNumeric,
    /// propagator invariants: unitarity, exact modes, reversal, convexity
    Evolve,
    /// interpolation bounds, forcing recovery, and the matrix identity
    Logconvexity,
    /// fourth-order semigroup kernel values and decay envelope
    HeatKernel,
    /// end-to-end localized annular lower-bound chain
    LowerBoundDemo,
    /// every suite in sequence, one combined report
    All,
}

impl Cmd {
    fn name(self) -> &'static str {
        match self {
            Cmd::VerifySymbolic => "verify-symbolic",
            Cmd::VerifyCommutators => "verify-commutators",
            Cmd::VerifyForm => "verify-form",
            Cmd::Certify => "certify",
            Cmd::CarlemanNumeric => "carleman-numeric",
            Cmd::Evolve => "evolve",
            Cmd::Logconvexity => "logconvexity",
            Cmd::HeatKernel => "heat-kernel",
            Cmd::LowerBoundDemo => "lower-bound-demo",
            Cmd::All => "all",
        }
    }

    fn run(self, ctx: &Ctx) -> Result<Vec<report::CheckRecord>, ConfigError> {
        match self {
            Cmd::VerifySymbolic => checks::verify_symbolic(ctx),
            Cmd::VerifyCommutators => checks::verify_commutators(ctx),
            Cmd::VerifyForm => checks::verify_form(ctx),
            Cmd::Certify => checks::certify(ctx),
            Cmd::CarlemanNumeric => checks::carleman_numeric(ctx),
            Cmd::Evolve => checks::evolve_cmd(ctx),
            Cmd::Logconvexity => checks::logconvexity(ctx),
            Cmd::HeatKernel => checks::heat_kernel(ctx),
            Cmd::LowerBoundDemo => checks::lower_bound(ctx),
            Cmd::All => {
                let mut all = Vec::new();
                for sub in [
                    Cmd::VerifySymbolic,
                    Cmd::VerifyCommutators,
                    Cmd::VerifyForm,
                    Cmd::Certify,
                    Cmd::CarlemanNumeric,
                    Cmd::Evolve,
                    Cmd::Logconvexity,
                    Cmd::HeatKernel,
                    Cmd::LowerBoundDemo,
                ] {
                    for mut rec in sub.run(ctx)? {
                        rec.name = format!("{}:{}", sub.name(), rec.name);
                        all.push(rec);
                    }
                }
                Ok(all)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !(cli.tol > 0.0) || !(cli.lambda > 0.0) {
        eprintln!("qc: tolerances must be positive");
        return ExitCode::from(2);
    }
    if cli.grid < 16 {
        eprintln!("qc: need at least 16 grid points per axis");
        return ExitCode::from(2);
    }
    if let Some(r) = cli.r {
        if !(r >= 2.0) {
            eprintln!("qc: the localization radius must be at least 2");
            return ExitCode::from(2);
        }
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("QC_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Ctx {
        d: cli.d,
        r: cli.r,
        alpha_coeff: cli.alpha_coeff,
        lambda: cli.lambda,
        grid: cli.grid,
        tol: cli.tol,
        seed: cli.seed,
        out: out.clone(),
        refs: cli.refs.clone(),
        v: cli.v.clone(),
    };

    let start = Instant::now();
    let records = match cli.command.run(&ctx) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("qc: {e}");
            return ExitCode::from(2);
        }
    };
    let report = Report {
        command: cli.command.name().into(),
        version: env!("CARGO_PKG_VERSION"),
        seed: cli.seed,
        config: serde_json::json!({
            "d": cli.d,
            "R": cli.r,
            "alpha_coeff": cli.alpha_coeff,
            "lambda": cli.lambda,
            "grid": cli.grid,
            "tol": cli.tol,
            "refs": cli.refs,
            "out": out,
            "V": cli.v,
        }),
        wall_ms: start.elapsed().as_millis(),
        records,
    };
    let failed = report.any_failed();
    match report.write(&out) {
        Ok(path) => println!(
            "{}: {} checks, {} — {}",
            report.command,
            report.records.len(),
            if failed { "FAILED" } else { "ok" },
            path.display()
        ),
        Err(e) => {
            eprintln!("qc: writing report: {e}");
            return ExitCode::from(2);
        }
    }
    ExitCode::from(if failed { 1 } else { 0 })
}
