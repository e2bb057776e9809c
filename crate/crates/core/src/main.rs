use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use softarm::experiments::{run_all_quadrants, run_periodic, run_quadrant, thread_limit, validate, QuadrantRun};
use softarm::mesh::{generate_arm, write_mesh, ArmParams};
use softarm::scene::{ActuationMode, SceneConfig};
use softarm::Error;

/// Soft pneumatic arm simulator.
///
/// Exit codes: 0 success, 1 validation or convergence failure, 2 config error.
#[derive(Parser)]
#[command(name = "softarm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the arm meshes (spa.tmesh, spine.tmesh) into a directory.
    GenMesh {
        #[arg(long)]
        out: PathBuf,
        /// Override an arm parameter, e.g. `--param length=0.1`. Repeatable.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
    /// Run an experiment and write its trajectory log.
    Run {
        #[command(subcommand)]
        experiment: Experiment,
    },
    /// Run the numerical validation suite.
    Validate,
    /// Print the default scene configuration as TOML.
    DumpConfig,
}

#[derive(Args)]
struct Common {
    /// Scene configuration (TOML); defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the plot columns next to the CSV (`<out stem>.plot.csv`).
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Experiment {
    /// Antiphase sinusoidal actuation of the left and right cavity pairs.
    Periodic {
        #[command(flatten)]
        common: Common,
    },
    /// Closed-loop reaching of a quadrant target.
    Quadrant {
        #[command(flatten)]
        common: Common,
        /// Quadrant 1..4.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4), required_unless_present = "all_quadrants")]
        q: Option<u8>,
        /// Target tip displacement from rest in meters, "x,y,z".
        #[arg(long, allow_hyphen_values = true, conflicts_with = "all_quadrants")]
        target: Option<String>,
        /// Run all four quadrants concurrently (bounded by SOFTARM_THREADS);
        /// logs go to `<out stem>_q<n>.csv`.
        #[arg(long)]
        all_quadrants: bool,
    },
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Run(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenMesh { out, params } => gen_mesh(&out, &params),
        Command::Run { experiment } => match experiment {
            Experiment::Periodic { common } => periodic(&common),
            Experiment::Quadrant {
                common,
                q,
                target,
                all_quadrants,
            } => {
                if all_quadrants {
                    all(&common)
                } else {
                    let target = target.as_deref().map(parse_target).transpose()?;
                    quadrant(&common, usize::from(q.unwrap_or(1)), target)
                }
            }
        },
        Command::Validate => {
            let report = validate()?;
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Run("validation failed".into()))
            }
        }
        Command::DumpConfig => {
            print!("{}", SceneConfig::default().to_toml());
            Ok(())
        }
    }
}

fn gen_mesh(out: &Path, params: &[String]) -> Result<(), Failure> {
    let mut arm = ArmParams::default();
    for p in params {
        let (key, value) = p
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("expected KEY=VALUE, got {p:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("{key}: not a number: {value:?}")))?;
        arm.set(key.trim(), value)?;
    }
    let model = generate_arm(&arm)?;
    std::fs::create_dir_all(out).map_err(|e| Failure::Run(format!("{}: {e}", out.display())))?;
    write_mesh(&model.spa, out.join("spa.tmesh"))?;
    write_mesh(&model.spine, out.join("spine.tmesh"))?;
    println!(
        "spa: {} nodes, {} tets; spine: {} nodes, {} tets",
        model.spa.vertices.len(),
        model.spa.tets.len(),
        model.spine.vertices.len(),
        model.spine.tets.len()
    );
    Ok(())
}

fn load_config(common: &Common) -> Result<SceneConfig, Failure> {
    Ok(match &common.config {
        Some(path) => SceneConfig::load(path)?,
        None => SceneConfig::default(),
    })
}

fn plot_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".plot.csv");
    out.with_file_name(name)
}

fn write_log(log: &softarm::experiments::TrajectoryLog, out: &Path, plot: bool) -> Result<(), Failure> {
    log.write_csv(out)?;
    if plot {
        log.write_plotdata(plot_path(out))?;
    }
    Ok(())
}

fn periodic(common: &Common) -> Result<(), Failure> {
    let mut cfg = load_config(common)?;
    cfg.mode = ActuationMode::Periodic;
    let run = run_periodic(&cfg)?;
    write_log(&run.log, &common.out, common.plot)?;
    let r = &run.report;
    println!(
        "peak-to-peak tip displacement [cm]: x {:.3}, y {:.3}, z {:.3}",
        100.0 * r.delta_x,
        100.0 * r.delta_y,
        100.0 * r.delta_z
    );
    match r.period {
        Some(p) => println!("tip y period: {p:.3} s"),
        None => println!("tip y period: none detected"),
    }
    println!(
        "P_left in [{}, {}], P_right in [{}, {}]",
        r.p_left.0, r.p_left.1, r.p_right.0, r.p_right.1
    );
    Ok(())
}

fn parse_target(s: &str) -> Result<[f64; 3], Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Failure::Config(format!("target must be \"x,y,z\" in meters, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut t = [0.0; 3];
    for (slot, part) in t.iter_mut().zip(parts) {
        *slot = part.parse().map_err(|_| bad())?;
    }
    Ok(t)
}

fn summarize(run: &QuadrantRun) {
    let r = &run.report;
    let cm = |v: [f64; 3]| format!("({:.3}, {:.3}, {:.3})", 100.0 * v[0], 100.0 * v[1], 100.0 * v[2]);
    println!("Q{}: target {} cm, final tip {} cm", r.quadrant, cm(r.target), cm(r.final_tip));
    println!(
        "    pressures {:?}, e_k {:.1} -> {:.1}, settling {}, stopped at {:.2} s{}",
        r.final_pressures.map(|p| (p * 1e4).round() / 1e4),
        r.initial_error,
        r.final_error,
        r.settling_time.map_or("-".to_string(), |t| format!("{t:.2} s")),
        r.duration,
        if r.stalled { " (controller fixed point)" } else { "" }
    );
}

fn quadrant(common: &Common, q: usize, target: Option<[f64; 3]>) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let run = run_quadrant(&cfg, q, target)?;
    write_log(&run.log, &common.out, common.plot)?;
    summarize(&run);
    converged(&run)
}

fn converged(run: &QuadrantRun) -> Result<(), Failure> {
    if run.report.converged {
        Ok(())
    } else {
        Err(Failure::Run(format!(
            "Q{} did not converge within {} s (final e_k {})",
            run.report.quadrant, run.report.duration, run.report.final_error
        )))
    }
}

fn all(common: &Common) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let stem = common.out.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let mut failure = None;
    for (i, run) in run_all_quadrants(&cfg, thread_limit()).into_iter().enumerate() {
        let run = run?;
        let out = common.out.with_file_name(format!("{stem}_q{}.csv", i + 1));
        write_log(&run.log, &out, common.plot)?;
        summarize(&run);
        if let Err(e) = converged(&run) {
            failure.get_or_insert(e);
        }
    }
    failure.map_or(Ok(()), Err)
}
