use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use srkrylov::harness::{build_problem, describe_problem, format_summary, run_experiment, summarize_rows, ExperimentConfig, ExperimentOutcome, Role, PRESETS};
use srkrylov::problems::write_matrix_market;

#[derive(Parser)]
#[command(name = "srkrylov", version, about = "Short-recurrence Krylov recycling experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a test matrix in Matrix Market format.
    Gen {
        /// e.g. `poisson m=100`, `tridiag n=100`, `cdr h=1/16`
        #[arg(long)]
        problem: String,
        #[arg(long)]
        out: PathBuf,
        /// Also print a condition estimate.
        #[arg(long)]
        cond: bool,
    },
    /// Run one experiment and write its convergence history as CSV.
    Solve(RunArgs),
    /// Run presets and print timings and a summary table.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Run every preset (skipping any whose data is missing).
        #[arg(long)]
        all: bool,
    },
    /// Aggregate a history CSV into a per-method table.
    Summarize {
        csv: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Flat `key = value` config file, applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    rhs: Option<String>,
    #[arg(long)]
    pipeline: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_mv: Option<usize>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(p), _) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => match (&self.problem, &self.pipeline) {
                (Some(problem), Some(pipeline)) => {
                    let rhs = self.rhs.clone().unwrap_or_else(|| "ones".into());
                    ExperimentConfig::parse(&format!("problem = {problem}\nrhs = {rhs}\npipeline = {pipeline}\n"))?
                }
                _ => bail!("give --config, --preset, or both --problem and --pipeline"),
            },
        };
        if self.config.is_some() {
            if let Some(p) = &self.preset {
                cfg.set("preset", p)?;
            }
        }
        let over = [
            ("problem", self.problem.clone()),
            ("rhs", self.rhs.clone()),
            ("pipeline", self.pipeline.clone()),
            ("tol", self.tol.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("max_mv", self.max_mv.map(|v| v.to_string())),
        ];
        for (k, v) in over {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        Ok(cfg)
    }
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn report(out: &ExperimentOutcome) {
    for s in &out.stages {
        let role = match s.role {
            Role::First => "first",
            Role::Payload => "payload",
            Role::Recycled => "recycled",
            Role::Reference => "reference",
        };
        let status = if s.converged { "ok" } else if s.role == Role::Payload { "built" } else { "NOT CONVERGED" };
        eprintln!("{:<9} rhs {:>2}  {:<48} mv {:>5}  rd {:>5}  rel {:.2e}  {status}", role, s.rhs_index, s.method, s.mv_total, s.rd_total, s.rel_resnorm);
        for n in s.notes.iter().filter(|n| !n.starts_with("omegas=")) {
            eprintln!("          {n}");
        }
    }
}

fn run(cfg: &ExperimentConfig, quiet: bool) -> Result<(ExperimentOutcome, f64)> {
    let t = Instant::now();
    let out = run_experiment(cfg)?;
    let secs = t.elapsed().as_secs_f64();
    if let Some(why) = &out.skipped {
        eprintln!("skipped: {why}");
    } else if !quiet {
        report(&out);
    }
    Ok((out, secs))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Gen { problem, out, cond } => {
            let spec = problem.parse()?;
            let a = build_problem(&spec)?.context("matrix file not found")?;
            write_matrix_market(&a, &out)?;
            if cond {
                eprintln!("{}", describe_problem(&a)?);
            } else {
                eprintln!("N={} nnz={}", a.nrows(), a.nnz());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Solve(args) => {
            let cfg = args.config()?;
            let (out, _) = run(&cfg, false)?;
            let mut w = writer(cfg.out.as_deref())?;
            out.write_csv(&mut w)?;
            w.flush()?;
            Ok(if out.all_converged() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Cmd::Bench { run: args, all } => {
            let cfgs = if all {
                PRESETS
                    .iter()
                    .map(|p| RunArgs { preset: Some(p.to_string()), ..args.clone() }.config())
                    .collect::<Result<Vec<_>>>()?
            } else {
                vec![args.config()?]
            };
            let mut ok = true;
            let mut rows = Vec::new();
            for cfg in &cfgs {
                let (out, secs) = run(cfg, true)?;
                if out.skipped.is_none() {
                    eprintln!("{}: {} rows in {secs:.2}s", cfg.problem, out.rows.len());
                }
                ok &= out.all_converged();
                rows.extend(out.rows);
            }
            if let Some(p) = &args.out {
                let mut w = writer(Some(p))?;
                srkrylov::harness::write_rows(&rows, &mut w)?;
                w.flush()?;
            }
            let tol = cfgs.first().map_or(1e-8, |c| c.tol);
            print!("{}", format_summary(&summarize_rows(&rows, tol)));
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Cmd::Summarize { csv, tol, out } => {
            let f = File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
            let table = srkrylov::harness::summarize(f, tol)?;
            let mut w = writer(out.as_deref())?;
            w.write_all(format_summary(&table).as_bytes())?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
