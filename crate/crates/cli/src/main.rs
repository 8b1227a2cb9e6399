use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use nearflat_cli::{exit, run, Command, RunConfig};

/// Verification runs for nearly Euclidean Sobolev stability on radial
/// asymptotically flat metrics. Every flag can also be set through an
/// environment variable with the `NEARFLAT_` prefix.
#[derive(Parser, Debug)]
#[command(name = "nearflat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Run every certificate in the configuration.
    Verify(RunArgs),
    /// Run the metric sweep and write the sweep table.
    Sweep(RunArgs),
    /// Run only the `[dp]` section.
    Dp(RunArgs),
    /// Summarize a report written by an earlier run.
    Report {
        /// Directory holding `report.json`.
        #[arg(long, env = "NEARFLAT_OUT")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, env = "NEARFLAT_CONFIG")]
    config: PathBuf,
    /// Output directory; defaults to `out_dir` from the config, then `out/<name>`.
    #[arg(long, env = "NEARFLAT_OUT")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, env = "NEARFLAT_JOBS")]
    jobs: Option<usize>,
    /// Multiplier on every certificate tolerance.
    #[arg(long, env = "NEARFLAT_TOL_SCALE")]
    tol_scale: Option<f64>,
    /// Shells of the `d_p` family mesh.
    #[arg(long, env = "NEARFLAT_RESOLUTION")]
    resolution: Option<usize>,
}

fn execute(args: &RunArgs, command: Command) -> anyhow::Result<i32> {
    let cfg = match RunConfig::load(&args.config).and_then(|c| c.with_overrides(args.tol_scale, args.resolution)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return Ok(exit::CONFIG);
        }
    };
    if command == Command::Dp && cfg.dp.is_none() {
        eprintln!("config error: {} has no [dp] section", args.config.display());
        return Ok(exit::CONFIG);
    }
    if let Some(n) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&cfg.name));
    let output = match run(&cfg, command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(e.exit_code());
        }
    };
    output
        .report
        .write(&out)
        .with_context(|| format!("writing report to {}", out.display()))?;
    for (name, bytes) in &output.dumps {
        std::fs::write(out.join(name), bytes).with_context(|| format!("writing {name}"))?;
    }
    let timings = serde_json::to_string_pretty(&output.timings)? + "\n";
    std::fs::write(out.join("timings.json"), timings).context("writing timings")?;
    print!("{}", output.report.summary_text());
    println!("report written to {} ({:.1} s)", out.display(), output.timings.total());
    Ok(if output.report.all_passed() { exit::PASS } else { exit::CHECK_FAILURES })
}

fn summarize(out: &Path) -> anyhow::Result<i32> {
    let path = out.join("report.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    // non-finite parameters are stored as null, so read loosely
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let summary: nearflat_cli::report::Summary =
        serde_json::from_value(value["summary"].clone()).context("report has no summary")?;
    let name = value["name"].as_str().unwrap_or("report");
    println!(
        "{name}: {} certificates, {} passed, {} failed, {} flagged",
        summary.certificates,
        summary.passed,
        summary.failures.len(),
        summary.flagged.len()
    );
    for f in &summary.failures {
        println!("  FAIL {f}");
    }
    if let Some(rows) = value["metrics"].as_array() {
        for m in rows {
            let r = &m["row"];
            println!(
                "  {}: delta_hat={} epsilon={} eta={} mu={}",
                m["label"].as_str().unwrap_or("?"),
                r["deficit"],
                r["epsilon"],
                r["eta"],
                r["mu"]
            );
        }
    }
    Ok(if summary.failures.is_empty() { exit::PASS } else { exit::CHECK_FAILURES })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Sub::Verify(a) => execute(a, Command::Verify),
        Sub::Sweep(a) => execute(a, Command::Sweep),
        Sub::Dp(a) => execute(a, Command::Dp),
        Sub::Report { out } => summarize(out),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::NUMERICAL as u8)
        }
    }
}
