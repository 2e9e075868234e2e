//! `patchsim`: run analog-computer netlists, reproduce the canned demos and
//! classify representation schemes.
//!
//! Exit codes: 0 ok, 1 parse/validate/usage error, 2 run failed or
//! diverged, 3 scheme is not analog.

mod demo;
mod plot;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use patchsim_core::repclass::{classify, RepScheme};
use patchsim_core::signal::{write_csv, Trace};
use patchsim_core::{format, parse, run, RunError};

use demo::{run_demo, Demo};
use plot::{plot_svg, PlotSpec};

#[derive(Parser)]
#[command(name = "patchsim", version, about = "Analog computer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a netlist and write probed traces as CSV.
    Run {
        netlist: PathBuf,
        /// CSV output path; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also plot every probe to this SVG file.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run a canned demonstration: springmass, gibbs, drift, sine-integral,
    /// adc-roundtrip.
    Demo {
        name: Demo,
        #[arg(short = 'd', long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Decide whether a `Q,P` CSV of quantity/magnitude pairs is analog.
    Classify {
        pairs: PathBuf,
        #[arg(short, long)]
        resolution: f64,
    },
    /// Print a netlist in canonical form.
    Fmt { netlist: PathBuf },
}

/// An error carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: 1, error }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let code = if matches!(e, RunError::Netlist(_)) { 1 } else { 2 };
        Failure {
            code,
            error: e.into(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)
}

fn cmd_run(netlist: &Path, output: Option<&Path>, svg: Option<&Path>) -> CmdResult {
    let src = read(netlist)?;
    let doc = parse(&src).map_err(|e| usage(anyhow!("{}: {e}", netlist.display())))?;
    let result = run(&doc).map_err(|e| match e {
        RunError::Netlist(e) => usage(anyhow!("{}: {e}", netlist.display())),
        other => other.into(),
    })?;

    for o in result.overloads() {
        eprintln!("warning: net `{}` overloaded at {}", o.net, o.overload);
    }

    let traces: Vec<&Trace> = result.traces().collect();
    let written = match output {
        Some(path) => File::create(path)
            .map_err(anyhow::Error::from)
            .and_then(|f| Ok(write_csv(BufWriter::new(f), &traces)?))
            .with_context(|| format!("writing {}", path.display())),
        None => write_csv(io::stdout().lock(), &traces).context("writing CSV"),
    };
    written.map_err(|error| Failure { code: 2, error })?;

    if let Some(path) = svg {
        plot_svg(&result, &PlotSpec::for_result(&result), path)
            .map_err(|error| Failure { code: 2, error })?;
    }
    Ok(0)
}

fn cmd_demo(demo: Demo, out_dir: &Path) -> CmdResult {
    let report = run_demo(demo, out_dir).map_err(|error| Failure { code: 2, error })?;
    print!("{report}");
    Ok(0)
}

fn read_pairs(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "Q" || &headers[1] != "P" {
        bail!("{}: expected header `Q,P`", path.display());
    }
    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let field = |k: usize| -> anyhow::Result<f64> {
            record
                .get(k)
                .ok_or_else(|| anyhow!("line {line}: missing field"))?
                .parse()
                .with_context(|| format!("line {line}: `{}` is not a number", &record[k]))
        };
        pairs.push((field(0)?, field(1)?));
    }
    Ok(pairs)
}

fn cmd_classify(path: &Path, resolution: f64) -> CmdResult {
    let pairs = read_pairs(path).map_err(usage)?;
    let scheme = RepScheme::from_tuples(&pairs, resolution)
        .map_err(|e| usage(anyhow!("{}: {e}", path.display())))?;
    let verdict = classify(&scheme);
    println!("{}", verdict.tag);
    if verdict.tag.is_analog() {
        let direction = if verdict.against_increasing.is_empty() {
            "increasing"
        } else {
            "decreasing"
        };
        println!("consistent with analog representation ({direction}) at r = {resolution}");
        if verdict.degenerate {
            println!("note: no two magnitudes differ by at least r; both orderings hold");
        }
        return Ok(0);
    }
    println!("not consistent with analog representation at r = {resolution}");
    for (i, j) in verdict.witnesses() {
        let (a, b) = (&scheme.pairs()[i], &scheme.pairs()[j]);
        println!(
            "witness ({i}, {j}): Q {} vs {}, P {} vs {}",
            a.quantity, b.quantity, a.magnitude, b.magnitude
        );
    }
    Ok(3)
}

fn cmd_fmt(netlist: &Path) -> CmdResult {
    let src = read(netlist)?;
    let doc = parse(&src).map_err(|e| usage(anyhow!("{}: {e}", netlist.display())))?;
    print!("{}", format(&doc));
    io::stdout().flush().map_err(|e| usage(e.into()))?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Run {
            netlist,
            output,
            svg,
        } => cmd_run(netlist, output.as_deref(), svg.as_deref()),
        Command::Demo { name, out_dir } => cmd_demo(*name, out_dir),
        Command::Classify { pairs, resolution } => cmd_classify(pairs, *resolution),
        Command::Fmt { netlist } => cmd_fmt(netlist),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
