//! `selfsim`: simulation, canonicalization and verification runs from the
//! command line or from a JSON config.
//!
//! Exit status: 0 when every check passes, 1 on a failed check or a runtime
//! error, 2 on a config or schema error.

mod config;
mod jobs;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{
    load, ComponentSelection, ConfigError, FragMode, Job, LampertiMode, NuFile, Output, ProcessFile, RunConfig, Task,
    Tolerances,
};
use selfsim::levy::LevyModel;

#[derive(Parser)]
#[command(name = "selfsim", version, about = "Self-similar Markov processes: simulation and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed; every random stream is derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Directory for the CSV and report files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// File name prefix; defaults to the subcommand name.
    #[arg(long)]
    prefix: Option<String>,
    /// Do not print the report on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ComponentArgs {
    /// Registered component family.
    #[arg(long)]
    component: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta: f64,
    /// Registered diffeomorphism to push the components through.
    #[arg(long)]
    psi: Option<String>,
    #[arg(long)]
    grid_size: Option<usize>,
}

impl From<ComponentArgs> for ComponentSelection {
    fn from(a: ComponentArgs) -> Self {
        ComponentSelection {
            component: a.component,
            alpha: a.alpha,
            beta: a.beta,
            psi: a.psi,
            grid_size: a.grid_size,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a Lévy model and write the path.
    Simulate {
        /// JSON Lévy model.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Build a self-similar process from its driver.
    Lamperti {
        /// JSON process: psi, driver, alpha, beta, start.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = LampertiMode::Trajectory)]
        mode: LampertiMode,
        /// Evaluation time; defaults to the horizon.
        #[arg(long)]
        t: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Canonical map of a component family onto a standard group.
    Canonicalize {
        #[command(flatten)]
        component: ComponentArgs,
        #[arg(long)]
        quad_tol: Option<f64>,
        #[arg(long)]
        homomorphism_tol: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Good-component and group checks.
    Verify {
        #[command(flatten)]
        component: ComponentArgs,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Lévy process on the T group, big-jump removal and recentering.
    Tgroup {
        /// JSON two-dimensional Lévy model of the pair.
        #[arg(long)]
        model: PathBuf,
        /// Sup-norm threshold of removed jumps.
        #[arg(long, default_value_t = 1.0)]
        big: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Tagged fragment of a fragmentation with erosion.
    Frag {
        #[arg(long, value_enum, default_value_t = FragMode::Equivalence)]
        mode: FragMode,
        /// JSON dislocation measure: atoms, erosion, optional alpha.
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        x0: f64,
        #[arg(long, default_value_t = 1.0)]
        t_probe: f64,
        /// KS level.
        #[arg(long)]
        level: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory of the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

fn from_flags(common: Common, tolerances: Tolerances, task: Task) -> Result<(Job, bool), ConfigError> {
    let output = Output {
        dir: common.out_dir,
        prefix: common.prefix.unwrap_or_else(|| task.name().as_str().to_string()),
    };
    let job = Job::new(common.seed, common.n_paths, common.horizon, output, tolerances, task)?;
    Ok((job, common.quiet))
}

fn resolve(command: Command) -> Result<(Job, bool), ConfigError> {
    match command {
        Command::Simulate { model, common } => {
            let model: LevyModel = load(&model)?;
            from_flags(common, Tolerances::default(), Task::simulate(model, "model")?)
        }
        Command::Lamperti { spec, mode, t, common } => {
            let process: ProcessFile = load(&spec)?;
            from_flags(common, Tolerances::default(), Task::lamperti(&process, mode, t, "spec")?)
        }
        Command::Canonicalize {
            component,
            quad_tol,
            homomorphism_tol,
            common,
        } => {
            let tolerances = Tolerances {
                quad: quad_tol,
                homomorphism: homomorphism_tol,
                ..Tolerances::default()
            };
            from_flags(common, tolerances, Task::canonicalize(component.into())?)
        }
        Command::Verify { component, tol, common } => {
            let tolerances = Tolerances {
                check: tol,
                ..Tolerances::default()
            };
            from_flags(common, tolerances, Task::verify(component.into())?)
        }
        Command::Tgroup { model, big, common } => {
            let model: LevyModel = load(&model)?;
            from_flags(common, Tolerances::default(), Task::tgroup(model, big, "model")?)
        }
        Command::Frag {
            mode,
            nu,
            alpha,
            x0,
            t_probe,
            level,
            common,
        } => {
            let nu: NuFile = load(&nu)?;
            let tolerances = Tolerances {
                level,
                ..Tolerances::default()
            };
            from_flags(common, tolerances, Task::frag(&nu, alpha, mode, x0, t_probe, "nu")?)
        }
        Command::Run { config, out_dir, quiet } => {
            let run: RunConfig = load(&config)?;
            let base = config.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut job = run.into_job(&config.display().to_string(), base)?;
            if let Some(dir) = out_dir {
                job.output.dir = dir;
            }
            Ok((job, quiet))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (job, quiet) = match resolve(cli.command) {
        Ok(resolved) => resolved,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match jobs::execute(&job) {
        Ok(outcome) => {
            if !quiet {
                println!("{}", serde_json::to_string_pretty(&outcome.report).expect("serializable"));
            }
            for file in &outcome.files {
                eprintln!("wrote {}", file.display());
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("check failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
