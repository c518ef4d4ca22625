use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rost_core::io::to_canonical_json;
use rost_core::problem::Problem;
use rost_core::Error;

/// Optimal stopping boundaries and Rost barrier embeddings for Brownian motion.
#[derive(Parser, Debug)]
#[command(name = "rost", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Problem spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Suppress progress messages.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Validate,
    Payoff,
    Solve,
    Reverse,
    Embed,
    Verify,
}

/// Exit codes: 0 success, 1 failed check, 2 unreadable spec, 3 rejected
/// measures, 4 grid too narrow.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::InvalidMeasure(_) => 2,
        Error::NoGap { .. } | Error::AtomAtGapEdge(_) | Error::AssumptionsFailed(_) | Error::OriginOutsideInitialHull { .. } => 3,
        Error::DomainTooNarrow { .. } | Error::ClassificationConflict { .. } => 4,
        _ => 1,
    }
}

struct Out<'a> {
    dir: &'a Path,
    quiet: bool,
}

impl Out<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<(), Error> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        if !self.quiet {
            eprintln!("wrote {}", path.display());
        }
        Ok(())
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let text = fs::read_to_string(&cli.spec).map_err(|e| Error::Parse(format!("{}: {e}", cli.spec.display())))?;
    let problem = Problem::from_json(&text)?;
    fs::create_dir_all(&cli.out)?;
    let out = Out { dir: &cli.out, quiet: cli.quiet };
    let horizon = problem.spec.horizon;

    match cli.command {
        Command::Validate => {
            let report = problem.validate();
            out.write("validation.json", &to_canonical_json(&report)?)?;
            for m in &report.messages {
                eprintln!("{m}");
            }
            if !report.ok() {
                return Err(Error::AssumptionsFailed(report.messages.join("; ")));
            }
            Ok(true)
        }
        Command::Payoff => {
            let payoff = problem.payoff();
            let (lo, hi) = {
                let b = payoff.breakpoints();
                (b[0] - 1.0, b[b.len() - 1] + 1.0)
            };
            out.write("payoff.csv", &payoff.to_csv(lo, hi, 2001))?;
            Ok(true)
        }
        Command::Solve => {
            out.note(&format!("solving to T = {horizon}"));
            let solved = problem.solve(horizon)?;
            let times: Vec<f64> = (0..=4).map(|k| horizon * k as f64 / 4.0).collect();
            out.write("value.csv", &solved.surface.slices_csv(&times, false))?;
            out.write("excess.csv", &solved.surface.slices_csv(&times, true))?;
            out.write("boundaries.csv", &solved.boundaries.to_csv())?;
            let meta = serde_json::json!({
                "solve": solved.surface.metadata(),
                "snapping": problem.snapping,
                "summary": solved.summary,
                "invariants": problem.invariants(&solved, None),
            });
            out.write("solve.json", &to_canonical_json(&meta)?)?;
            Ok(true)
        }
        Command::Reverse => {
            let solved = problem.solve(horizon)?;
            out.write("barrier.csv", &solved.barrier.to_csv())?;
            out.write("inverse.csv", &problem.inverse_csv(&solved.barrier, 2001))?;
            out.write("detectors.json", &to_canonical_json(&problem.detectors(&solved.barrier))?)?;
            Ok(true)
        }
        Command::Embed => {
            let h = problem.embedding_horizon();
            out.note(&format!("solving to T = {h} for the barrier"));
            let solved = problem.solve(h)?;
            let report = problem.embed(&solved.barrier)?;
            let mut samples = String::from("# exit values of absorbed paths; space units\nw\n");
            for w in &report.samples {
                samples.push_str(&format!("{w:.12}\n"));
            }
            out.write("samples.csv", &samples)?;
            out.write("embedding.json", &to_canonical_json(&report)?)?;
            Ok(true)
        }
        Command::Verify => {
            if !problem.validate().ok() {
                return Err(Error::AssumptionsFailed(problem.validate().messages.join("; ")));
            }
            let report = problem.verify()?;
            for c in &report.checks {
                out.note(&format!("{} {}: {} (threshold {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold));
            }
            out.write("verify.json", &to_canonical_json(&report)?)?;
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("ROST_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
