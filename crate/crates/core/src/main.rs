use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qstrack::harness::{run_experiment, ExperimentConfig, Status};

#[derive(Parser)]
#[command(
    name = "qstrack",
    version,
    about = "Online quantum state tracking experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, estimate and write trajectory.csv and report.json.
    Run(RunArgs),
    /// Run and evaluate the properties; exits nonzero if any fails.
    Verify(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Opg,
    Kf,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Oracle,
    Physical,
}

#[derive(Args)]
struct RunArgs {
    /// Key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write figure1.svg.
    #[arg(long)]
    plot: bool,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut pairs = Vec::new();
        let mut add = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                pairs.push((key.to_string(), v));
            }
        };
        add("n", self.qubits.map(|v| v.to_string()));
        add("l", self.window.map(|v| v.to_string()));
        add("T", self.steps.map(|v| v.to_string()));
        add("noise_std", self.noise_std.map(|v| v.to_string()));
        add("gamma", self.gamma.map(|v| v.to_string()));
        add("tau", self.tau.map(|v| v.to_string()));
        add("seed", self.seed.map(|v| v.to_string()));
        add(
            "algorithms",
            self.algorithm.map(|a| {
                match a {
                    AlgorithmArg::Opg => "opg",
                    AlgorithmArg::Kf => "kf",
                    AlgorithmArg::Both => "both",
                }
                .to_string()
            }),
        );
        add(
            "mode",
            self.mode.map(|m| {
                match m {
                    ModeArg::Oracle => "oracle",
                    ModeArg::Physical => "physical",
                }
                .to_string()
            }),
        );
        add(
            "out_dir",
            self.out.as_ref().map(|p| p.display().to_string()),
        );
        if self.plot {
            add("plot", Some("true".into()));
        }
        pairs
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (args, verify) = match &cli.command {
        Command::Run(args) => (args, false),
        Command::Verify(args) => (args, true),
    };
    let cfg = match ExperimentConfig::from_file(&args.config, &args.overrides()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("qstrack: {e}");
            return ExitCode::from(2);
        }
    };
    let artifacts = match run_experiment(&cfg) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("qstrack: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("trajectory: {}", artifacts.trajectory_csv.display());
    println!("report:     {}", artifacts.report_json.display());
    if let Some(svg) = &artifacts.plot_svg {
        println!("plot:       {}", svg.display());
    }
    for report in &artifacts.reports {
        if let Some(last) = report.rows.last() {
            println!(
                "{:>3}: final D = {:.4e} at k = {}",
                report.algorithm, last.d, last.k
            );
        }
    }
    if !verify {
        return ExitCode::SUCCESS;
    }
    for (name, outcome) in &artifacts.verdict.properties {
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        println!("[{tag}] {name}: {}", outcome.detail);
    }
    if artifacts.verdict.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
