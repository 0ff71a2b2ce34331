//! `landmark-dyn`: geodesic and stochastic experiments on landmark spaces.

mod commands;
mod config;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use landmark_core::KernelSpec;

use config::{
    parse_kernel, ClassifyParams, ExperimentConfig, Figure1Params, Format, Job, LengthParams, OutputSpec, Params,
    ReproParams, SdeParams, ShootParams, TwobodyParams,
};
use output::{envelope, write_artifacts, write_atomic, Outcome};

const KERNEL_HELP: &str = "Kernel: a name (laplacian, c1_bessel, gaussian), name:key=value,... \
(log_modified:c=1.5, power_gap:D=1,gamma=2) or an inline TOML table";

#[derive(Parser, Debug)]
#[command(name = "landmark-dyn", version, about = "Geodesic and stochastic dynamics on landmark configuration spaces")]
#[command(after_help = "Exit status: 0 on success, 2 when a verdict is inconclusive, 1 on errors.\n\
The LANDMARK_DYN_THREADS environment variable caps the number of worker threads.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide geodesic completeness from the kernel's behavior at collision
    Classify(ClassifyCmd),
    /// Integrate the landmark geodesic equations from an initial state
    Shoot(ShootCmd),
    /// Two-landmark system in center-of-mass coordinates
    Twobody(TwobodyCmd),
    /// Monte-Carlo hitting probability of the radial diffusion
    Sde(SdeCmd),
    /// Length of a sampled curve and its collision and escape bounds
    Length(LengthCmd),
    /// Plot data for the kernels exp(-r) and 2(1+r)exp(-r) on [0, 4]
    Figure1(PresetCmd<Figure1Params>),
    /// Reproduce the closed-form laplacian head-on collision
    ReproCollision(PresetCmd<ReproParams>),
    /// Run an experiment described by a TOML config file
    Run(RunCmd),
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Directory for report artifacts; without it only stdout is used
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Artifact formats to write into --out-dir [default: all produced]
    #[arg(long, value_enum, value_delimiter = ',')]
    formats: Vec<Format>,
}

impl OutputArgs {
    fn spec(&self) -> OutputSpec {
        OutputSpec { dir: self.out_dir.clone(), formats: self.formats.clone() }
    }
}

#[derive(Args, Debug)]
struct ClassifyCmd {
    #[arg(long, value_parser = parse_kernel, help = KERNEL_HELP)]
    kernel: KernelSpec,
    #[command(flatten)]
    params: ClassifyParams,
    /// Print the JSON report instead of a one-line summary
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct ShootCmd {
    #[arg(long, value_parser = parse_kernel, help = KERNEL_HELP)]
    kernel: KernelSpec,
    #[command(flatten)]
    params: ShootParams,
    /// Trajectory CSV: t, x_i_k, p_i_k, H, P_k, L_m (0-based indices)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct TwobodyCmd {
    #[arg(long, value_parser = parse_kernel, help = KERNEL_HELP)]
    kernel: KernelSpec,
    #[command(flatten)]
    params: TwobodyParams,
    /// CSV of the simulated reduced trajectory
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SdeCmd {
    #[arg(long, value_parser = parse_kernel, help = KERNEL_HELP)]
    kernel: KernelSpec,
    #[command(flatten)]
    params: SdeParams,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct LengthCmd {
    #[arg(long, value_parser = parse_kernel, help = KERNEL_HELP)]
    kernel: KernelSpec,
    #[command(flatten)]
    params: LengthParams,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct PresetCmd<P: Args> {
    #[command(flatten)]
    params: P,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct RunCmd {
    /// Experiment config (TOML); unknown keys are rejected
    #[arg(long)]
    config: PathBuf,
}

/// How a finished job is reported.
struct Emit {
    output: OutputSpec,
    /// Extra CSV destination given by --out.
    csv_to: Option<PathBuf>,
    text: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(true) => ExitCode::from(2),
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("LANDMARK_DYN_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("LANDMARK_DYN_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            anyhow::bail!("LANDMARK_DYN_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Returns whether the verdict was inconclusive.
fn run(cmd: Command) -> Result<bool> {
    let plain = |out: &OutputArgs| Emit { output: out.spec(), csv_to: None, text: false };
    let (job, emit) = match cmd {
        Command::Classify(c) => (
            Job::new(Some(c.kernel), Params::Classify(c.params))?,
            Emit { output: c.out.spec(), csv_to: None, text: !c.json },
        ),
        Command::Shoot(c) => (
            Job::new(Some(c.kernel), Params::Shoot(c.params))?,
            Emit { output: c.output.spec(), csv_to: c.out, text: false },
        ),
        Command::Twobody(c) => {
            if c.out.is_some() && !c.params.simulate {
                anyhow::bail!("--out needs --simulate");
            }
            (
                Job::new(Some(c.kernel), Params::Twobody(c.params))?,
                Emit { output: c.output.spec(), csv_to: c.out, text: false },
            )
        }
        Command::Sde(c) => (Job::new(Some(c.kernel), Params::Sde(c.params))?, plain(&c.out)),
        Command::Length(c) => (Job::new(Some(c.kernel), Params::Length(c.params))?, plain(&c.out)),
        Command::Figure1(c) => (Job::new(None, Params::Figure1(c.params))?, plain(&c.out)),
        Command::ReproCollision(c) => (Job::new(None, Params::ReproCollision(c.params))?, plain(&c.out)),
        Command::Run(c) => {
            let base = c.config.parent().map(Path::to_path_buf).unwrap_or_default();
            let (job, output) = ExperimentConfig::load(&c.config)?.into_job(&base)?;
            (job, Emit { output, csv_to: None, text: false })
        }
    };
    let outcome = commands::execute(&job)?;
    emit_outcome(&job, &outcome, &emit)?;
    Ok(outcome.inconclusive)
}

fn emit_outcome(job: &Job, out: &Outcome, emit: &Emit) -> Result<()> {
    let report = envelope(job, &out.result)?;
    if let Some(dir) = &emit.output.dir {
        for path in write_artifacts(dir, job.command.stem(), &emit.output.formats, &report, out)? {
            eprintln!("wrote {}", path.display());
        }
    }
    if let Some(path) = &emit.csv_to {
        let table = out.csv.as_ref().context("this command produces no CSV")?;
        write_atomic(path, &table.to_csv()?)?;
        eprintln!("wrote {}", path.display());
    }
    if emit.text {
        println!("{}", out.summary);
    } else {
        print!("{report}");
        eprintln!("{}", out.summary);
    }
    Ok(())
}
