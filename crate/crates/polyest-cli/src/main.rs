//! Command-line interface: design contrasts for an instance, run single
//! estimations, Monte-Carlo simulations, full configured experiments, and
//! the acceptance verification suite.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use polyest::conic::SolverOptions;
use polyest::design::DesignMode;
use polyest::estimator::{estimate, monte_carlo_risk};
use polyest::instance::{load_instance, read_vector_csv, save_instance};

use polyest_cli::accept;
use polyest_cli::bundle::{read_design_bundle, write_design_bundle};
use polyest_cli::config::ExperimentConfig;
use polyest_cli::experiments::{design_with_pilot, run_experiment, Program};
use polyest_cli::report::emit_report;

#[derive(Parser)]
#[command(
    name = "polyest",
    about = "Polyhedral estimate design with certified risk bounds over ellitope-polytope signal sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DesignArgs {
    /// Instance descriptor JSON.
    #[arg(long)]
    instance: PathBuf,
    /// Per-column confidence level; mutually exclusive with --epsilon.
    #[arg(long)]
    delta: Option<f64>,
    /// Target risk level; the confidence split is chosen by a pilot design.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value = "full")]
    mode: String,
    /// Program builder: auto, master, or gaussian.
    #[arg(long, default_value = "auto")]
    program: String,
    /// Seed for the randomized contrast extraction.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the design bundle.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Design bundle directory produced by the design subcommand.
    #[arg(long)]
    design: PathBuf,
    /// Observation vector CSV.
    #[arg(long)]
    omega: PathBuf,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    design: PathBuf,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Run trials sequentially even when the parallel feature is enabled.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct RunExpArgs {
    /// Experiment configuration JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the design program and write the contrast bundle.
    Design(DesignArgs),
    /// Recover a signal from a single observation.
    Estimate(EstimateArgs),
    /// Monte-Carlo risk simulation of a designed contrast.
    Simulate(SimulateArgs),
    /// Run a configured experiment end to end.
    RunExp(RunExpArgs),
    /// Run the acceptance suite; exits nonzero on any failure.
    Verify,
}

fn parse_program(name: &str, inst: &polyest::instance::ProblemInstance) -> Result<Program> {
    Ok(match name {
        "auto" => Program::auto(inst),
        "master" => Program::Master,
        "gaussian" => Program::Gaussian,
        other => anyhow::bail!("unknown program {other}"),
    })
}

fn cmd_design(args: DesignArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let mode: DesignMode = args.mode.parse()?;
    let program = parse_program(&args.program, &inst)?;
    let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
    let designed = match (args.delta, args.epsilon) {
        (Some(_), Some(_)) => anyhow::bail!("pass either --delta or --epsilon, not both"),
        (None, None) => anyhow::bail!("one of --delta or --epsilon is required"),
        (Some(delta), None) => {
            // Fixed confidence split: design once at the given delta.
            use polyest::design::{assemble_contrast, certified_risk, ContrastSide, DesignOptions};
            let opts = DesignOptions::with_mode(mode);
            let sol = match program {
                Program::Gaussian => polyest::design::solve_master_gaussian(&inst, delta, &opts)?,
                Program::Master => polyest::design::solve_master(&inst, delta, &opts)?,
            };
            let norm = inst.noise.norm(delta, inst.m())?;
            let contrast = assemble_contrast(&sol, &norm, &mut rng, &opts)?;
            let (epsilon, bound) = certified_risk(
                &sol,
                contrast.count_side(ContrastSide::Ellitope),
                contrast.count_side(ContrastSide::Polytope),
                delta,
            );
            polyest_cli::experiments::DesignedEstimator {
                mode,
                solution: sol,
                contrast,
                delta,
                epsilon,
                bound,
            }
        }
        (None, Some(epsilon)) => design_with_pilot(program, &inst, epsilon, mode, &mut rng)?,
    };
    let files = write_design_bundle(&args.out, &designed)?;
    println!(
        "designed {} contrast columns; eps = {}, certified bound = {}",
        designed.contrast.ncols(),
        designed.epsilon,
        designed.bound
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let (contrast, meta) = read_design_bundle(&args.design)?;
    let omega = read_vector_csv(&args.omega)?;
    let est = estimate(
        &omega,
        &contrast,
        &inst.signal,
        &inst.a,
        &inst.b,
        &SolverOptions::default(),
    )?;
    let out = serde_json::json!({
        "x_hat": est.x_hat.iter().cloned().collect::<Vec<f64>>(),
        "w_hat": est.w_hat.iter().cloned().collect::<Vec<f64>>(),
        "residual": est.residual,
        "bound": meta.bound,
        "epsilon": meta.epsilon,
    });
    if let Some(parent) = args.out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&args.out, serde_json::to_string_pretty(&out)?)?;
    println!("residual {}; wrote {}", est.residual, args.out.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let (contrast, meta) = read_design_bundle(&args.design)?;
    let report = monte_carlo_risk(
        &inst,
        &contrast,
        meta.bound,
        meta.epsilon,
        args.trials,
        args.seed,
        !args.sequential,
        &SolverOptions::default(),
    )?;
    std::fs::create_dir_all(&args.out)?;
    let mut csv = String::from("trial,error,bound,covered\n");
    for (i, t) in report.trials.iter().enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{}\n",
            t.error,
            meta.bound,
            if t.covered { 1 } else { 0 }
        ));
    }
    std::fs::write(args.out.join("errors.csv"), csv)?;
    let summary = serde_json::json!({
        "trials": args.trials,
        "epsilon": report.epsilon,
        "bound": report.bound,
        "quantile": report.quantile,
        "coverage": report.coverage,
        "exceed_fraction": report.exceed_fraction(),
        "seed": args.seed,
    });
    std::fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "coverage {} over {} trials (bound {})",
        report.coverage, args.trials, report.bound
    );
    Ok(())
}

fn cmd_run_exp(args: RunExpArgs) -> Result<()> {
    let cfg: ExperimentConfig = serde_json::from_str(
        &std::fs::read_to_string(&args.config)
            .with_context(|| format!("reading {}", args.config.display()))?,
    )?;
    let record = run_experiment(&cfg, args.seed, !args.sequential)?;
    let files = emit_report(&record, &args.out)?;

    // Export the generated instance so single-shot subcommands can replay it.
    let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
    rng.set_stream(0);
    let inst = polyest_cli::experiments::build_instance(&cfg, &mut rng)?;
    let inst_path = save_instance(&args.out.join("instance"), &inst)?;

    for d in &record.designs {
        println!(
            "{}: bound {} (eps {}, delta {}, columns {}+{})",
            d.mode, d.bound, d.epsilon, d.delta, d.cols_ellitope, d.cols_polytope
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    println!("wrote {}", inst_path.display());
    Ok(())
}

fn cmd_verify() -> Result<ExitCode> {
    let results = accept::run_all();
    let mut ok = true;
    for r in &results {
        println!("{}", r.line());
        ok &= r.pass;
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Design(args) => cmd_design(args).map(|()| ExitCode::SUCCESS),
        Command::Estimate(args) => cmd_estimate(args).map(|()| ExitCode::SUCCESS),
        Command::Simulate(args) => cmd_simulate(args).map(|()| ExitCode::SUCCESS),
        Command::RunExp(args) => cmd_run_exp(args).map(|()| ExitCode::SUCCESS),
        Command::Verify => cmd_verify(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
