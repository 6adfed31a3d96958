use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crm_core::bench::{
    self, bench_polyhedral_prod, bench_soc, performance_profile, run_stats, summary_json,
    BenchConfig, BenchMethod, BenchReport, ExportFormat, GapTrace, RunRecord,
};
use crm_core::instances::{
    gen_polyhedral_instance, gen_soc_instance, gen_start, read_problem, write_problem,
};
use crm_core::methods::{run, run_composite, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crm_core::{
    ConeCertificate, InstanceKind, IterationTrace, Method, ProdOrdering, SolverConfig, Status,
};

#[derive(Parser)]
#[command(
    name = "crm-bench",
    version,
    about = "Circumcentered-reflection, MAP and DRM feasibility benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem file with every applicable method.
    Solve(SolveArgs),
    /// Run a randomized benchmark.
    Bench {
        #[command(subcommand)]
        experiment: Experiment,
    },
    /// Performance profile from a runs CSV.
    Profile(ProfileArgs),
    /// Write a random problem file.
    Generate(GenerateArgs),
}

#[derive(Subcommand)]
enum Experiment {
    /// Second-order cone ∩ affine subspace: CRM, MAP, DRM.
    Soc(BenchArgs),
    /// Polyhedra in the product space: CRM-prod, MAP-prod, DRM-prod.
    Poly(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ExportFormat::Csv,
            Format::Json => ExportFormat::Json,
        }
    }
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; format chosen by --format.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write (method, iteration, gap) rows to this CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Defaults to 100 for soc and 1 for poly.
    #[arg(long)]
    instances: Option<usize>,
    /// Defaults to 10 for soc and 20 for poly.
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Cone experiment: where the feasibility certificate sits.
    #[arg(long, value_enum, default_value_t = Certificate::Boundary)]
    certificate: Certificate,
    /// Polyhedral experiment: number of slack rows (default: uniform in 1..=m).
    #[arg(long = "slack-rows")]
    slack_rows: Option<usize>,
    /// Check the Fejér inequality against the certificate on every CRM step.
    #[arg(long)]
    audit: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Certificate {
    Boundary,
    Interior,
}

#[derive(Args)]
struct SolveArgs {
    problem: PathBuf,
    /// Restrict to one method (crm, map, drm, serialcrm, averagedcrm).
    #[arg(long)]
    method: Option<Method>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ProfileArgs {
    runs: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Soc,
    Poly,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    family: Family,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Returns the number of failed runs.
fn dispatch(command: Command) -> Result<usize> {
    match command {
        Command::Solve(args) => solve(args),
        Command::Bench { experiment } => {
            let (args, mut config, runner): (
                _,
                _,
                fn(&BenchConfig) -> crm_core::Result<BenchReport>,
            ) = match experiment {
                Experiment::Soc(a) => (a, BenchConfig::soc(), bench_soc),
                Experiment::Poly(a) => (a, BenchConfig::polyhedral(), bench_polyhedral_prod),
            };
            config.n = args.n;
            config.instances = args.instances.unwrap_or(config.instances);
            config.starts = args.starts.unwrap_or(config.starts);
            config.tol = args.common.tol;
            config.max_iter = args.common.max_iter;
            config.base_seed = args.common.seed;
            config.jobs = args.jobs;
            config.keep_first_trace = args.common.trace.is_some();
            config.certificate = match args.certificate {
                Certificate::Boundary => ConeCertificate::Boundary,
                Certificate::Interior => ConeCertificate::Interior,
            };
            config.slack_rows = args.slack_rows;
            config.audit = args.audit;
            let report = runner(&config)?;
            print!("{}", report.table());
            if let Some(f) = &report.fejer {
                println!("fejer checks: {}, violations: {}", f.checks, f.violations);
            }
            emit(&report, &args.common)?;
            Ok(report.failures())
        }
        Command::Profile(args) => profile(args),
        Command::Generate(args) => {
            let instance = match args.family {
                Family::Soc => gen_soc_instance(args.n, args.seed)?,
                Family::Poly => gen_polyhedral_instance(args.n, args.seed)?,
            };
            write_problem(&instance, &args.out)?;
            println!(
                "wrote {} (n={}, m={})",
                args.out.display(),
                instance.n,
                instance.m
            );
            Ok(0)
        }
    }
}

fn emit(report: &BenchReport, common: &Common) -> Result<()> {
    if let Some(path) = &common.out {
        bench::export(report, common.format.into(), path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &common.trace {
        bench::write_traces_csv(&report.traces, create(path)?)?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn solve(args: SolveArgs) -> Result<usize> {
    let instance = read_problem(&args.problem)
        .with_context(|| format!("reading {}", args.problem.display()))?;
    let common = &args.common;
    let start = gen_start(&instance, common.seed)?;
    let config = |method| {
        SolverConfig::new(method)
            .with_tol(common.tol)
            .with_max_iter(common.max_iter)
    };

    let mut results: Vec<(BenchMethod, Method, IterationTrace)> = Vec::new();
    match instance.kind {
        InstanceKind::AffineConic => {
            let u = instance.affine.as_ref().expect("validated");
            let methods: Vec<Method> = match (args.method, instance.sets.len()) {
                (Some(m), _) => vec![m],
                (None, 1) => vec![Method::Crm, Method::Map, Method::Drm],
                (None, _) => vec![Method::SerialCrm, Method::AveragedCrm],
            };
            for m in methods {
                let trace = if instance.sets.len() == 1 {
                    run(&instance.sets[0], u, &start.raw, &config(m))?
                } else {
                    run_composite(&instance.sets, u, &start.raw, &config(m))?
                };
                let label = match m {
                    Method::Map => BenchMethod::Map,
                    Method::Drm => BenchMethod::Drm,
                    _ => BenchMethod::Crm,
                };
                results.push((label, m, trace));
            }
        }
        InstanceKind::Polyhedral => {
            let w = instance.product()?;
            let methods: Vec<Method> = match args.method {
                Some(m @ (Method::Crm | Method::Map | Method::Drm)) => vec![m],
                Some(m) => bail!("{m} has no product-space form"),
                None => vec![Method::Crm, Method::Map, Method::Drm],
            };
            for m in methods {
                let trace = crm_core::run_prod(
                    &w,
                    &start.projected,
                    &config(m),
                    ProdOrdering::DiagonalFirst,
                )?;
                let label = match m {
                    Method::Map => BenchMethod::MapProd,
                    Method::Drm => BenchMethod::DrmProd,
                    _ => BenchMethod::CrmProd,
                };
                results.push((label, m, trace));
            }
        }
    }

    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "{:<12} {:>10} {:>12} status",
        "method", "iterations", "final_gap"
    )?;
    for (_, m, t) in &results {
        writeln!(
            stdout,
            "{:<12} {:>10} {:>12.3e} {}",
            m.name(),
            t.iterations,
            t.final_gap(),
            t.status
        )?;
    }

    let runs: Vec<RunRecord> = results
        .iter()
        .map(|(label, _, t)| RunRecord {
            instance_seed: instance.seed,
            start_seed: start.seed,
            method: *label,
            iterations: t.iterations,
            final_gap: t.final_gap(),
            status: t.status,
        })
        .collect();
    if let Some(path) = &common.out {
        match common.format {
            Format::Csv => bench::write_runs_csv(&runs, create(path)?)?,
            Format::Json => {
                let labels: Vec<BenchMethod> = results.iter().map(|r| r.0).collect();
                let stats: Vec<_> = labels.iter().map(|&m| run_stats(&runs, m)).collect();
                let profile = performance_profile(&bench::cost_matrix(&runs, &labels), &labels)?;
                std::fs::write(path, summary_json(&stats, &profile)?)?;
            }
        }
    }
    if let Some(path) = &common.trace {
        let traces: Vec<GapTrace> = results
            .iter()
            .map(|(label, _, t)| GapTrace {
                method: *label,
                gaps: t.gaps.clone(),
            })
            .collect();
        bench::write_traces_csv(&traces, create(path)?)?;
    }
    Ok(results
        .iter()
        .filter(|r| r.2.status != Status::Converged)
        .count())
}

fn profile(args: ProfileArgs) -> Result<usize> {
    let runs = bench::read_runs_csv(
        File::open(&args.runs).with_context(|| format!("opening {}", args.runs.display()))?,
    )?;
    let mut methods: Vec<BenchMethod> = runs.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    let curves = performance_profile(&bench::cost_matrix(&runs, &methods), &methods)?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    match args.format {
        Format::Json => {
            let stats: Vec<_> = methods.iter().map(|&m| run_stats(&runs, m)).collect();
            writeln!(out, "{}", summary_json(&stats, &curves)?)?;
        }
        Format::Csv => {
            writeln!(out, "method,tau,fraction_solved")?;
            for c in &curves {
                for (tau, frac) in c.thresholds.iter().zip(&c.fraction_solved) {
                    writeln!(out, "{},{},{}", c.method, tau, frac)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(0)
}
