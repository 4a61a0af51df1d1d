use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robomorph::sim::TerrainKind;
use robomorph_cli::commands;
use robomorph_cli::error::CliError;
use robomorph_cli::report;
use robomorph_cli::RunConfig;

/// Grammar-constrained robot design search.
#[derive(Parser)]
#[command(name = "robomorph", version)]
struct Cli {
    /// Log generator traffic and other details to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut config = RunConfig::load(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration as TOML.
    PrintConfig,
    /// Sample the initial few-shot designs and write them with their MJCF.
    Init(RunArgs),
    /// Run the evolution loop, writing a trace, summary and manifest.
    Evolve {
        #[command(flatten)]
        run: RunArgs,
        /// Continue the trace already in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Compile a design text file to MJCF.
    Compile {
        design: PathBuf,
        /// Keep collisions between robot bodies.
        #[arg(long)]
        collisions: bool,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train a gait for one design and print its fitness report as JSON.
    Eval {
        design: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Overrides the configured terrain.
        #[arg(long)]
        terrain: Option<TerrainKind>,
    },
    /// Best-fitness CSV, confidence intervals across traces and a plot,
    /// written to `<output_dir>/report`.
    Report {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::PrintConfig => {
            let _ = write!(stdout, "{}", RunConfig::default().to_toml());
        }
        Command::Init(args) => {
            let config = args.load()?;
            let files = commands::init(&config, &mut stdout)?;
            let _ = writeln!(stdout, "wrote {} files to {}", files.len(), config.output_dir.display());
        }
        Command::Evolve { run, resume } => {
            let config = run.load()?;
            commands::evolve(&config, resume, &mut stdout)?;
        }
        Command::Compile {
            design,
            collisions,
            output,
        } => {
            let (xml, model) = commands::compile_design(&read(&design)?, collisions)?;
            match output {
                Some(path) => {
                    let mut f = commands::create_output(&path)?;
                    f.write_all(xml.as_bytes()).map_err(|e| CliError::io(&path, e))?;
                    eprintln!(
                        "{}: {} bodies, {} joints, {} actuators",
                        path.display(),
                        model.bodies.len(),
                        model.joints.len(),
                        model.actuators.len()
                    );
                }
                None => {
                    let _ = stdout.write_all(xml.as_bytes());
                }
            }
        }
        Command::Eval { design, run, terrain } => {
            let mut config = run.load()?;
            if let Some(t) = terrain {
                config.evolution.terrain = t;
            }
            let result = commands::eval(&config, &read(&design)?)?;
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&result).expect("json"));
        }
        Command::Report { traces, run } => {
            let out = run.load()?.output_dir.join("report");
            for path in report::write_report(&traces, &out)? {
                let _ = writeln!(stdout, "wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
