use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use flow_core::error::Error;
use flow_core::exec::Execution;
use flow_core::experiments::{
    cpu_timing_comparison, per_step_cost_ratios, run_experiment, ProblemConfig, ProblemKind, RunReport,
};
use flow_core::timestepping::Scheme;
use flow_core::verify::{property_suite, standard_temporal_convergence};

const EXIT_ERROR: u8 = 1;
const EXIT_BLOW_UP: u8 = 4;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "flow", version, about = "Long-time stable BDF flow solver and stability checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one cavity experiment and write its time series as CSV.
    Run(RunArgs),
    /// Run the randomized property suite.
    Verify(VerifyArgs),
    /// Compare wall-clock cost of the two schemes.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    dc: Option<f64>,
    #[arg(long)]
    ri: Option<f64>,
    #[arg(long)]
    ra: Option<f64>,
    #[arg(long)]
    le: Option<f64>,
    #[arg(long)]
    pr: Option<f64>,
    #[arg(long)]
    n_ratio: Option<f64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file; command line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip the energy ledger and bound checks.
    #[arg(long)]
    no_bounds: bool,
    /// Use the sequential code path.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Also run the temporal convergence study of both schemes.
    #[arg(long)]
    convergence: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value = "nse")]
    problem: ProblemKind,
    #[arg(long, value_delimiter = ',', default_value = "1,0.1,0.01")]
    dts: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    t_end: f64,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    /// Largest accepted ratio between the per-step costs of the schemes.
    #[arg(long, default_value_t = 3.0)]
    max_ratio: f64,
    #[arg(long)]
    sequential: bool,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn build_config(args: &RunArgs) -> anyhow::Result<ProblemConfig> {
    let mut cfg = match (&args.config, args.problem) {
        (Some(path), problem) => {
            let cfg = ProblemConfig::from_file(path, problem)?;
            if let Some(p) = problem {
                if p != cfg.problem {
                    bail!("--problem {p} conflicts with problem {} in {}", cfg.problem, path.display());
                }
            }
            cfg
        }
        (None, Some(p)) => ProblemConfig::new(p),
        (None, None) => bail!("either --problem or --config is required"),
    };
    if let Some(v) = args.scheme {
        cfg.scheme = v;
    }
    if let Some(v) = args.dt {
        cfg.dt = v;
    }
    if let Some(v) = args.t_end {
        cfg.t_end = v;
    }
    if let Some(v) = args.nx {
        cfg.nx = v;
    }
    if let Some(v) = args.ny {
        cfg.ny = v;
    }
    for (slot, v) in [
        (&mut cfg.nu, args.nu),
        (&mut cfg.kappa, args.kappa),
        (&mut cfg.dc, args.dc),
        (&mut cfg.ri, args.ri),
    ] {
        if v.is_some() {
            *slot = v;
        }
    }
    for (slot, v) in [
        (&mut cfg.ra, args.ra),
        (&mut cfg.le, args.le),
        (&mut cfg.pr, args.pr),
        (&mut cfg.n_ratio, args.n_ratio),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if cfg.out.is_none() {
        bail!("an output path is required (--out or 'out' in the config file)");
    }
    if args.no_bounds {
        cfg.check_bounds = false;
    }
    if args.sequential {
        cfg.execution = Execution::Sequential;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(r: &RunReport) {
    let c = &r.config;
    println!(
        "{} {} dt={} t_end={} mesh={}x{}: {} steps in {:.2}s",
        c.problem,
        c.scheme,
        c.dt,
        c.t_end,
        c.nx,
        c.ny,
        r.steps(),
        r.elapsed_s
    );
    if let Some(last) = r.records.last() {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6e}"));
        println!(
            "final |u| = {:.6e}, |T| = {}, |C| = {}",
            last.l2_u,
            opt(last.l2_t),
            opt(last.l2_c)
        );
    }
    println!(
        "max solve residual {:.2e}, max |Bu|/|u| {:.2e}, max |mean p| {:.2e}",
        r.max_solver_residual, r.max_divergence_ratio, r.max_abs_pressure_mean
    );
    if r.bounds_checked {
        println!(
            "energy identity residual {:.2e}, ledger violations {}, stated-form failures {}",
            r.max_identity_residual,
            r.violations.len(),
            r.printed_failures
        );
        println!(
            "max |u|^2/(C_u B) = {:.3e} (last quarter {:.3e}), sup |u| last quarter {:.6e}",
            r.max_bound_ratio, r.final_quarter_bound_ratio, r.final_quarter_max_u
        );
    }
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<u8> {
    let cfg = build_config(args)?;
    let report = run_experiment(&cfg)?;
    print_report(&report);
    if let Some(out) = &cfg.out {
        println!("wrote {}", out.display());
    }
    match report.check() {
        Ok(()) => Ok(0),
        Err(e) => {
            eprintln!("check failed: {e}");
            Ok(EXIT_CHECK_FAILED)
        }
    }
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<u8> {
    let mut ok = true;
    for outcome in property_suite(args.seed)? {
        ok &= outcome.passed;
        println!("{outcome}");
    }
    if args.convergence {
        for scheme in [Scheme::Blebdf, Scheme::Bdf2] {
            let s = standard_temporal_convergence(scheme, Execution::Parallel)?;
            let pass = (1.8..=2.2).contains(&s.fitted_order);
            ok &= pass;
            let rates: Vec<String> = s.rates.iter().map(|r| format!("{r:.3}")).collect();
            println!(
                "{} temporal-order {scheme}: fitted {:.3}, successive [{}]",
                if pass { "PASS" } else { "FAIL" },
                s.fitted_order,
                rates.join(", ")
            );
        }
    }
    Ok(if ok { 0 } else { EXIT_CHECK_FAILED })
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<u8> {
    let mut cfg = ProblemConfig::new(args.problem);
    cfg.t_end = args.t_end;
    cfg.nx = args.nx.unwrap_or(cfg.nx);
    cfg.ny = args.ny.unwrap_or(cfg.ny);
    cfg.nu = args.nu.or(cfg.nu);
    cfg.execution = execution(args.sequential);
    let rows = cpu_timing_comparison(&cfg, &args.dts, &[Scheme::Blebdf, Scheme::Bdf2])
        .context("timing run failed")?;
    println!("{:>10} {:>8} {:>8} {:>12} {:>14}", "dt", "scheme", "steps", "seconds", "per_step_s");
    for r in &rows {
        println!(
            "{:>10} {:>8} {:>8} {:>12.4} {:>14.6e}",
            r.dt,
            r.scheme.to_string(),
            r.steps,
            r.seconds,
            r.per_step()
        );
    }
    let mut ok = true;
    for (dt, ratio) in per_step_cost_ratios(&rows) {
        let pass = ratio <= args.max_ratio;
        ok &= pass;
        println!(
            "{} dt={dt}: per-step cost ratio {ratio:.3} (limit {})",
            if pass { "PASS" } else { "FAIL" },
            args.max_ratio
        );
    }
    Ok(if ok { 0 } else { EXIT_CHECK_FAILED })
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::BlowUp { .. }) => EXIT_BLOW_UP,
        Some(Error::BoundViolation(_)) => EXIT_CHECK_FAILED,
        _ => EXIT_ERROR,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
