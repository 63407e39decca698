use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use densepoly::config::{parse_weight, Experiment, ExperimentConfig};
use densepoly::report::Artifacts;
use densepoly::{suite, Fleet, Result, WeightKind};

#[derive(Parser)]
#[command(
    name = "densepoly",
    version,
    about = "Weighted polynomial approximation experiments"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML experiment configuration; missing keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write whitespace-separated `.dat` files.
    #[arg(long, global = true)]
    plot_data: bool,
    /// Record wall-clock seconds (output is then not byte-reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Discrete conjugates, the exp/conj lemma and biconjugates.
    Conjugate,
    /// Kernel checks.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Approximation stages and the full pipeline.
    Approx {
        #[command(subcommand)]
        action: ApproxAction,
    },
    /// Fourier–Laplace transforms of discrete functionals.
    Flt,
    /// Weighted sequence spaces.
    Seq,
    /// Every experiment listed in the configuration.
    Suite,
}

#[derive(Subcommand)]
enum KernelAction {
    Check,
}

#[derive(Subcommand)]
enum ApproxAction {
    Run(ApproxArgs),
}

#[derive(Args)]
struct ApproxArgs {
    /// `power:A` or `log_penalty:C:B`.
    #[arg(long, value_parser = parse_weight)]
    weight: Option<WeightKind>,
    /// Fleet function for the pipeline.
    #[arg(long = "f")]
    f: Option<Fleet>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// Largest cutoff scale.
    #[arg(long)]
    nu: Option<usize>,
    /// Largest mollifier parameter.
    #[arg(long)]
    lambda: Option<f64>,
    /// Largest polynomial degree.
    #[arg(long)]
    nmax: Option<usize>,
}

fn configure(cli: &Cli) -> Result<ExperimentConfig> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &g.out {
        cfg.out_dir = out.display().to_string();
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    cfg.plot_data |= g.plot_data;
    cfg.timing |= g.timing;
    let only = |e| vec![e];
    match &cli.command {
        Command::Conjugate => cfg.experiments = only(Experiment::Conjugate),
        Command::Kernel { .. } => cfg.experiments = only(Experiment::Kernel),
        Command::Flt => cfg.experiments = only(Experiment::Flt),
        Command::Seq => cfg.experiments = only(Experiment::Seq),
        Command::Suite => {}
        Command::Approx {
            action: ApproxAction::Run(a),
        } => {
            cfg.experiments = only(Experiment::Approx);
            if let Some(w) = a.weight {
                cfg.weight = w;
            }
            let ap = &mut cfg.approx;
            if let Some(f) = a.f {
                ap.pipeline_f = f;
            }
            if let Some(m) = a.m {
                ap.m = m;
            }
            if let Some(e) = a.eps {
                ap.eps = e;
            }
            if let Some(n) = a.nu {
                ap.nu_max = n;
            }
            if let Some(l) = a.lambda {
                ap.lambda_max = l;
            }
            if let Some(n) = a.nmax {
                ap.n_max = n;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(a: &Artifacts) {
    for c in &a.summary.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {:<44} value={:.6e} bound={:.6e}",
            c.name, c.value, c.bound
        );
    }
    println!(
        "{} passed, {} failed",
        a.summary.passed(),
        a.summary.failed()
    );
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = configure(cli)?;
    let artifacts = suite::run(&cfg)?;
    let files = artifacts.write(std::path::Path::new(&cfg.out_dir), cfg.plot_data)?;
    print_summary(&artifacts);
    println!("wrote {} files to {}", files.len(), cfg.out_dir);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
