use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use physml_cli::commands;
use physml_cli::config::{
    DiscoverParams, DistmatchParams, EmulateParams, FklParams, GibbsParams, JgpParams, LfmParams,
    PriorParams, ReproduceParams, Scale, SynthParams,
};
use physml_cli::reproduce::{reproduce_all, ReproduceOptions};
use physml_cli::{config::resolve, run_method, CliError, CliResult, GlobalArgs};

#[derive(Parser, Debug)]
#[command(
    name = "physml",
    version,
    about = "Run physics-aware ML experiments and the acceptance suite"
)]
struct Cli {
    /// Master seed; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config: {"method", "seed", "params", "out"}.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-seed loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthetic datasets.
    Synth {
        #[command(subcommand)]
        action: SynthAction,
    },
    /// Blended real/simulated Gaussian process.
    Jgp {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Kernel ridge regression with a distribution-matching penalty.
    Distmatch {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Kernel regression with a dependence reward on physical models.
    Fkl {
        #[command(subcommand)]
        action: CurveAction,
    },
    /// Active versus space-filling emulator design.
    Emulate {
        #[command(subcommand)]
        action: BenchAction,
    },
    /// Cause-prior recovery by Monte-Carlo EM.
    Prior {
        #[command(subcommand)]
        action: FitAction,
    },
    /// Latent force model on a planted multi-output series.
    Lfm {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Sparse polynomial ODE discovery.
    Discover {
        #[command(subcommand)]
        action: DiscoverAction,
    },
    /// Gibbs sampling of the noisy logistic map posterior.
    Gibbs {
        #[command(subcommand)]
        action: GibbsAction,
    },
    /// Run every acceptance criterion and write a summary table.
    ReproduceAll(ReproduceArgs),
}

#[derive(Subcommand, Debug)]
enum SynthAction {
    Export,
}

#[derive(Subcommand, Debug)]
enum RunAction {
    Run,
}

#[derive(Subcommand, Debug)]
enum CurveAction {
    Curve,
}

#[derive(Subcommand, Debug)]
enum BenchAction {
    Bench,
}

#[derive(Subcommand, Debug)]
enum FitAction {
    Fit,
}

#[derive(Subcommand, Debug)]
enum DiscoverAction {
    Run {
        /// CSV with a header and columns t, x_1, ..., x_d on a uniform time grid.
        #[arg(long)]
        traj: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum GibbsAction {
    Logistic {
        /// Number of simulated series.
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Full,
    Smoke,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    /// Comma-separated criterion ids to run.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
    /// Force the thresholds of these criteria to zero (self-test of the failure path).
    #[arg(long, value_delimiter = ',', hide = true)]
    inject_zero_threshold: Vec<u32>,
}

fn keep<P>(_: &mut P) {}

fn dispatch(cli: Cli) -> CliResult<bool> {
    let g = GlobalArgs {
        seed: cli.seed,
        out: cli.out,
        config: cli.config,
    };
    match cli.command {
        Command::Synth { .. } => {
            run_method::<SynthParams, _, _>("synth export", &g, keep::<_>, commands::synth_export)?;
        }
        Command::Jgp { .. } => {
            run_method::<JgpParams, _, _>("jgp", &g, keep::<_>, commands::jgp_run)?;
        }
        Command::Distmatch { .. } => {
            run_method::<DistmatchParams, _, _>(
                "distmatch",
                &g,
                keep::<_>,
                commands::distmatch_run,
            )?;
        }
        Command::Fkl { .. } => {
            run_method::<FklParams, _, _>("fkl", &g, keep::<_>, commands::fkl_curve)?;
        }
        Command::Emulate { .. } => {
            run_method::<EmulateParams, _, _>("emulate", &g, keep::<_>, commands::emulate_bench)?;
        }
        Command::Prior { .. } => {
            run_method::<PriorParams, _, _>("prior", &g, keep::<_>, commands::prior_fit)?;
        }
        Command::Lfm { .. } => {
            run_method::<LfmParams, _, _>("lfm", &g, keep::<_>, commands::lfm_run)?;
        }
        Command::Discover {
            action: DiscoverAction::Run { traj },
        } => {
            run_method::<DiscoverParams, _, _>("discover", &g, keep::<_>, |_, p, out| {
                commands::discover_run(p, traj.as_deref(), out)
            })?;
        }
        Command::Gibbs {
            action: GibbsAction::Logistic { trials },
        } => {
            let adjust = |p: &mut GibbsParams| {
                if let Some(t) = trials {
                    p.trials = t;
                }
            };
            run_method::<GibbsParams, _, _>("gibbs", &g, adjust, commands::gibbs_logistic)?;
        }
        Command::ReproduceAll(args) => {
            let r = resolve::<ReproduceParams>(
                "reproduce-all",
                g.config.as_deref(),
                g.seed,
                g.out.clone(),
            )?;
            let scale = match args.scale {
                Some(ScaleArg::Full) => Scale::Full,
                Some(ScaleArg::Smoke) => Scale::Smoke,
                None => r.params.scale,
            };
            let opts = ReproduceOptions {
                only: args.only,
                inject_zero: args.inject_zero_threshold,
                ..ReproduceOptions::new(r.seed, scale)
            };
            let rows = reproduce_all(&opts, &r.out)?;
            for row in &rows {
                println!("{}", row.line());
            }
            return Ok(rows.iter().all(|r| r.pass));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!(
                "{}",
                CliError::validation(format!("--threads: {e}")).to_json_line()
            );
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
