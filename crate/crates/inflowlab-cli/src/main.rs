use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inflowlab::config::RunConfig;
use inflowlab::par::Exec;
use inflowlab::scenario::{self, RunReport, Scenario};
use inflowlab::transport::LagrangianField;
use inflowlab::Error;

#[derive(Parser)]
#[command(name = "inflowlab", version, about = "Vorticity transport through an inflow/outflow channel")]
struct Cli {
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Set a configuration value by dotted path, e.g. `domain.Nx=32`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// The data are expected to violate zeroth-order compatibility; pass
    /// when the resulting jump is detected instead.
    #[arg(long)]
    expect_jump: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, check compatibility and write diagnostics.
    Run(Common),
    /// Recompute compatibility and diagnostics from the snapshots of a run.
    Verify(Common),
    /// Write the scenario data as grid dumps.
    Manufacture(Common),
    /// Render `report.json` as text and a gnuplot-ready table.
    Report {
        /// Directory holding `report.json`.
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Format(_) | Error::InvalidInput(_) => 2,
        _ => 3,
    }
}

fn kind(e: &Error) -> &'static str {
    match exit_code(e) {
        2 => "config",
        _ => "numeric",
    }
}

fn setup(c: &Common) -> Result<(RunConfig, Scenario, PathBuf), Error> {
    let (cfg, sc) = scenario::load(&c.config, &c.overrides)?;
    let out = c.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    Ok((cfg, sc, out))
}

fn finish(report: &RunReport, quiet: bool) -> u8 {
    if !quiet {
        print!("{}", scenario::render_text(report));
    }
    if report.pass {
        0
    } else {
        1
    }
}

fn gnuplot_table(r: &RunReport) -> String {
    let csv = r.diagnostics.to_csv();
    let mut lines = csv.lines();
    let mut s = format!("# {}\n", lines.next().unwrap_or_default().replace(',', " "));
    for l in lines {
        s.push_str(&l.replace(',', " "));
        s.push('\n');
    }
    s
}

fn execute(cli: &Cli) -> Result<u8, Error> {
    let exec = Exec::Parallel;
    match &cli.command {
        Command::Run(c) => {
            let (cfg, sc, out) = setup(c)?;
            let (field, report) = scenario::run(&cfg, &sc, c.expect_jump, exec)?;
            scenario::write_artifacts(&cfg, &out, Some(&field), &report)?;
            Ok(finish(&report, cli.quiet))
        }
        Command::Verify(c) => {
            let (cfg, sc, out) = setup(c)?;
            let field = LagrangianField::load(&out.join("snapshots"))?;
            let report = scenario::verify(&cfg, &sc, &field, c.expect_jump, exec)?;
            std::fs::write(out.join("verify.json"), serde_json::to_string_pretty(&report)?)?;
            Ok(finish(&report, cli.quiet))
        }
        Command::Manufacture(c) => {
            let (cfg, sc, out) = setup(c)?;
            scenario::write_problem_data(&cfg, &sc, &out.join("data"), exec)?;
            if !cli.quiet {
                println!("wrote {}", out.join("data").display());
            }
            Ok(0)
        }
        Command::Report { out } => {
            let report = scenario::load_report(out)?;
            let text = scenario::render_text(&report);
            std::fs::write(out.join("report.txt"), &text)?;
            std::fs::write(out.join("history.dat"), gnuplot_table(&report))?;
            if !cli.quiet {
                print!("{text}");
            }
            Ok(0)
        }
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("INFLOWLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("INFLOWLAB_THREADS: expected a worker count, got {v:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("INFLOWLAB_THREADS: {e}")))?;
    }
    Ok(())
}

fn report_error(e: &Error, out: Option<&Path>) {
    let body = serde_json::json!({ "error": kind(e), "message": e.to_string() });
    eprintln!("{body}");
    if let Some(dir) = out.filter(|d| d.is_dir()) {
        let _ = std::fs::write(dir.join("error.json"), body.to_string());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| execute(&cli));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let out = match &cli.command {
                Command::Run(c) | Command::Verify(c) | Command::Manufacture(c) => c.out.as_deref(),
                Command::Report { out } => Some(out.as_path()),
            };
            report_error(&e, out);
            ExitCode::from(exit_code(&e))
        }
    }
}
