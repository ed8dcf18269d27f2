use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gic::controllers::ControllerKind;
use gic::io::{load_scenario, summary_table, write_trace_csv_file};
use gic::simulation::{run_scenario, Scenario, Trace};
use gic::{verify, GicError, Result};

#[derive(Parser)]
#[command(name = "gic", version, about = "Geometric impedance control on SE(3)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario with one controller.
    Run {
        #[command(flatten)]
        common: Overrides,
        #[arg(long, value_parser = parse_controller)]
        controller: Option<ControllerKind>,
        /// CSV trace path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one scenario under several controllers and print the RMS table.
    Compare {
        #[command(flatten)]
        common: Overrides,
        /// Repeatable; columns follow the command-line order.
        #[arg(long = "controller", value_parser = parse_controller, required = true)]
        controllers: Vec<ControllerKind>,
        /// Directory for one CSV trace per controller.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical identity suite.
    Verify,
}

#[derive(Args)]
struct Overrides {
    /// Bundled scenario name (regulation, tracking) or a scenario file.
    #[arg(long, default_value = "regulation")]
    scenario: String,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    kp: Option<f64>,
    #[arg(long)]
    ko: Option<f64>,
    #[arg(long)]
    kd: Option<f64>,
    #[arg(long = "lambda-g")]
    lambda_g: Option<f64>,
}

fn parse_controller(s: &str) -> std::result::Result<ControllerKind, String> {
    s.parse::<ControllerKind>().map_err(|_| {
        let known: Vec<_> = ControllerKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown controller '{s}' (expected one of: {})", known.join(", "))
    })
}

impl Overrides {
    fn scenario(&self) -> Result<Scenario> {
        let mut sc = load_scenario(&self.scenario)?;
        if let Some(dt) = self.dt {
            sc.dt = dt;
        }
        if let Some(d) = self.duration {
            sc.duration = d;
        }
        let g = &mut sc.gains;
        let diag = |m: &nalgebra::Matrix3<f64>, k: Option<f64>| {
            k.map_or(*m, |k| nalgebra::Matrix3::identity() * k)
        };
        let kd = self.kd.map_or(g.kd, |k| nalgebra::Matrix6::identity() * k);
        *g = gic::geometry::Gains::new(
            diag(&g.kp, self.kp),
            diag(&g.kr, self.ko),
            kd,
            self.lambda_g.unwrap_or(g.lambda_g),
        )?;
        sc.validate()?;
        Ok(sc)
    }
}

fn run_one(scenario: &Scenario, kind: ControllerKind, out: Option<&Path>) -> Result<Trace> {
    let trace = run_scenario(&scenario.clone().with_controller(kind))?;
    if let Some(path) = out {
        write_trace_csv_file(&trace, path)?;
    }
    Ok(trace)
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run { common, controller, out } => {
            let sc = common.scenario()?;
            let kind = controller.unwrap_or(sc.controller);
            let trace = run_one(&sc, kind, out.as_deref())?;
            print!("{}", summary_table(&[(kind.name().to_string(), &trace)]));
            if let Some(path) = out {
                println!("trace written to {}", path.display());
            }
            Ok(true)
        }
        Command::Compare { common, controllers, out } => {
            let sc = common.scenario()?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
            }
            let paths: Vec<Option<PathBuf>> = controllers
                .iter()
                .map(|k| out.as_ref().map(|d| d.join(format!("{}_{}.csv", sc.name, k.name()))))
                .collect();
            let traces: Vec<Result<Trace>> = std::thread::scope(|s| {
                let handles: Vec<_> = controllers
                    .iter()
                    .zip(&paths)
                    .map(|(&k, p)| {
                        let sc = &sc;
                        s.spawn(move || run_one(sc, k, p.as_deref()))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
            });
            let mut ok = Vec::new();
            for (k, t) in controllers.iter().zip(traces) {
                match t {
                    Ok(t) => ok.push((k.name().to_string(), t)),
                    Err(e) => eprintln!("{k}: {e}"),
                }
            }
            if ok.is_empty() {
                return Ok(false);
            }
            let table: Vec<(String, &Trace)> = ok.iter().map(|(n, t)| (n.clone(), t)).collect();
            print!("{}", summary_table(&table));
            Ok(ok.len() == controllers.len())
        }
        Command::Verify => {
            let mut failed = Vec::new();
            for check in verify::run_all() {
                println!("{check}");
                if !check.passed() {
                    failed.push(check.name);
                }
            }
            if failed.is_empty() {
                Ok(true)
            } else {
                eprintln!("failed checks: {}", failed.join(", "));
                Ok(false)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                GicError::Parse { .. } | GicError::Io(_) => 3,
                _ => 1,
            })
        }
    }
}
