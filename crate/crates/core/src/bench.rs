//! Benchmark harness: the SOC and product-space experiments, iteration
//! statistics, performance profiles and CSV/JSON export.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{
    gen_polyhedral_instance_with, gen_soc_instance_with, gen_start, ConeCertificate,
    ProblemInstance, StartPoint,
};
use crate::methods::{run_with, Method, SolverConfig, Status, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::point::Point;
use crate::product_space::{lift, run_prod_with, ProdOrdering};

pub const RUNS_CSV_HEADER: [&str; 6] = [
    "instance_seed",
    "start_seed",
    "method",
    "iterations",
    "final_gap",
    "status",
];
pub const SUMMARY_SCHEMA_VERSION: u64 = 1;
/// Fejér audit slack, relative to `1 + ||z - s||^2`.
pub const FEJER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BenchMethod {
    #[serde(rename = "crm")]
    Crm,
    #[serde(rename = "map")]
    Map,
    #[serde(rename = "drm")]
    Drm,
    #[serde(rename = "crm-prod")]
    CrmProd,
    #[serde(rename = "map-prod")]
    MapProd,
    #[serde(rename = "drm-prod")]
    DrmProd,
}

impl BenchMethod {
    pub const SOC: [BenchMethod; 3] = [BenchMethod::Crm, BenchMethod::Map, BenchMethod::Drm];
    pub const PROD: [BenchMethod; 3] = [
        BenchMethod::CrmProd,
        BenchMethod::MapProd,
        BenchMethod::DrmProd,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            BenchMethod::Crm => "crm",
            BenchMethod::Map => "map",
            BenchMethod::Drm => "drm",
            BenchMethod::CrmProd => "crm-prod",
            BenchMethod::MapProd => "map-prod",
            BenchMethod::DrmProd => "drm-prod",
        }
    }

    pub const fn solver(self) -> Method {
        match self {
            BenchMethod::Crm | BenchMethod::CrmProd => Method::Crm,
            BenchMethod::Map | BenchMethod::MapProd => Method::Map,
            BenchMethod::Drm | BenchMethod::DrmProd => Method::Drm,
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::SOC, Self::PROD]
            .concat()
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::parse("method", format!("unknown method `{s}`")))
    }
}

/// One row of the runs CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_seed: u64,
    pub start_seed: u64,
    pub method: BenchMethod,
    pub iterations: usize,
    pub final_gap: f64,
    #[serde(with = "status_str")]
    pub status: Status,
}

mod status_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: &Status, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(s.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Status, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Mean, min, median and max of a list of iteration counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub min: usize,
    pub median: f64,
    pub max: usize,
}

/// Even-length medians average the two central order statistics.
pub fn summarize(counts: &[usize]) -> Result<Summary> {
    if counts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let len = sorted.len();
    let median = if len % 2 == 1 {
        sorted[len / 2] as f64
    } else {
        0.5 * (sorted[len / 2 - 1] + sorted[len / 2]) as f64
    };
    Ok(Summary {
        mean: sorted.iter().sum::<usize>() as f64 / len as f64,
        min: sorted[0],
        median,
        max: sorted[len - 1],
    })
}

/// Per-method iteration statistics. Runs that did not converge are left out
/// of the statistics and counted in `failures`; when every run failed the
/// summary is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub method: BenchMethod,
    pub iteration_counts: Vec<usize>,
    #[serde(flatten)]
    pub summary: Option<Summary>,
    pub failures: usize,
}

pub fn run_stats(runs: &[RunRecord], method: BenchMethod) -> RunStats {
    let mine = runs.iter().filter(|r| r.method == method);
    let (ok, failed): (Vec<_>, Vec<_>) = mine.partition(|r| r.status == Status::Converged);
    let iteration_counts: Vec<usize> = ok.iter().map(|r| r.iterations).collect();
    RunStats {
        method,
        summary: summarize(&iteration_counts).ok(),
        iteration_counts,
        failures: failed.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub method: BenchMethod,
    pub thresholds: Vec<f64>,
    pub fraction_solved: Vec<f64>,
}

/// Dolan–Moré performance profile.
///
/// `costs[run][method]` is the iteration count, `None` for a failed run.
/// Each cost is divided by the best cost of its run (failures get an
/// infinite ratio); a method's curve at `tau` is the fraction of runs with
/// ratio `<= tau`. All curves share the grid of distinct finite ratios.
pub fn performance_profile(
    costs: &[Vec<Option<usize>>],
    methods: &[BenchMethod],
) -> Result<Vec<ProfileCurve>> {
    if costs.is_empty() || methods.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ratios: Vec<Vec<f64>> = costs
        .iter()
        .map(|row| {
            if row.len() != methods.len() {
                return Err(Error::DimensionMismatch {
                    expected: methods.len(),
                    found: row.len(),
                });
            }
            let best = row.iter().flatten().min().copied();
            Ok(row
                .iter()
                .map(|c| match (c, best) {
                    (Some(c), Some(b)) if b > 0 => *c as f64 / b as f64,
                    (Some(c), Some(_)) if *c == 0 => 1.0,
                    _ => f64::INFINITY,
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut grid: Vec<f64> = ratios
        .iter()
        .flatten()
        .copied()
        .filter(|r| r.is_finite())
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let runs = costs.len() as f64;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(j, &method)| ProfileCurve {
            method,
            fraction_solved: grid
                .iter()
                .map(|tau| ratios.iter().filter(|row| row[j] <= *tau).count() as f64 / runs)
                .collect(),
            thresholds: grid.clone(),
        })
        .collect())
}

/// Groups runs by `(instance_seed, start_seed)` into a cost matrix.
pub fn cost_matrix(runs: &[RunRecord], methods: &[BenchMethod]) -> Vec<Vec<Option<usize>>> {
    let mut keys: Vec<(u64, u64)> = runs
        .iter()
        .map(|r| (r.instance_seed, r.start_seed))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.iter()
        .map(|key| {
            methods
                .iter()
                .map(|m| {
                    runs.iter()
                        .find(|r| (r.instance_seed, r.start_seed) == *key && r.method == *m)
                        .filter(|r| r.status == Status::Converged)
                        .map(|r| r.iterations)
                })
                .collect()
        })
        .collect()
}

/// Number of paired runs where `worse` needed fewer iterations than `better`.
pub fn order_violations(runs: &[RunRecord], better: BenchMethod, worse: BenchMethod) -> usize {
    cost_matrix(runs, &[better, worse])
        .iter()
        .filter(|row| match (row[0], row[1]) {
            (Some(b), Some(w)) => b > w,
            (None, Some(_)) => true,
            _ => false,
        })
        .count()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub instances: usize,
    pub starts: usize,
    pub n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub base_seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Check the Fejér inequality against the certificate on every CRM step.
    pub audit: bool,
    /// Keep the gap sequences of the first (instance, start) pair.
    pub keep_first_trace: bool,
    /// Cone instances only.
    pub certificate: ConeCertificate,
    /// Polyhedral instances only: fixed number of slack rows instead of a uniform draw.
    pub slack_rows: Option<usize>,
}

impl BenchConfig {
    /// Defaults for the second-order cone experiment: 100 instances × 10 starts, n = 200.
    pub fn soc() -> Self {
        BenchConfig {
            instances: 100,
            starts: 10,
            n: 200,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            base_seed: 0,
            jobs: None,
            audit: false,
            keep_first_trace: false,
            certificate: ConeCertificate::Boundary,
            slack_rows: None,
        }
    }

    /// Defaults for the polyhedral product-space experiment: 1 instance × 20 starts, n = 200.
    pub fn polyhedral() -> Self {
        BenchConfig {
            instances: 1,
            starts: 20,
            ..Self::soc()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.instances == 0 || self.starts == 0 {
            return Err(Error::InvalidConfig(
                "instance and start counts must be positive".into(),
            ));
        }
        if self.n < 2 {
            return Err(Error::BadDimension(self.n));
        }
        SolverConfig::new(Method::Crm)
            .with_tol(self.tol)
            .with_max_iter(self.max_iter)
            .validate()
    }
}

/// Fejér monotonicity tally: `||z+ - s||^2 <= ||z - s||^2 - ||z - z+||^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FejerAudit {
    pub checks: usize,
    pub violations: usize,
    /// Largest relative excess observed (negative when every check held with room).
    pub worst_excess: f64,
}

impl FejerAudit {
    pub fn new() -> Self {
        FejerAudit {
            checks: 0,
            violations: 0,
            worst_excess: f64::NEG_INFINITY,
        }
    }

    pub fn check(&mut self, anchor: &Point, z: &Point, next: &Point) {
        let before = z.distance(anchor).powi(2);
        let after = next.distance(anchor).powi(2);
        let step = z.distance(next).powi(2);
        let excess = (after - (before - step)) / (1.0 + before);
        self.checks += 1;
        self.worst_excess = self.worst_excess.max(excess);
        if excess > FEJER_SLACK {
            self.violations += 1;
        }
    }

    pub fn merge(&mut self, other: &FejerAudit) {
        self.checks += other.checks;
        self.violations += other.violations;
        self.worst_excess = self.worst_excess.max(other.worst_excess);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTrace {
    pub method: BenchMethod,
    pub gaps: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub methods: Vec<BenchMethod>,
    /// Sorted by `(instance_seed, start_seed, method)`.
    pub runs: Vec<RunRecord>,
    pub stats: Vec<RunStats>,
    pub profile: Vec<ProfileCurve>,
    pub fejer: Option<FejerAudit>,
    pub traces: Vec<GapTrace>,
    /// Candidate instances dropped because no infeasible start could be drawn.
    pub skipped_instances: usize,
}

impl BenchReport {
    pub fn stats_for(&self, method: BenchMethod) -> Option<&RunStats> {
        self.stats.iter().find(|s| s.method == method)
    }

    pub fn failures(&self) -> usize {
        self.stats.iter().map(|s| s.failures).sum()
    }

    /// Plain-text table with one line per method.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>10} {:>7} {:>9} {:>7} {:>9}\n",
            "method", "mean", "min", "median", "max", "failures"
        );
        for s in &self.stats {
            match &s.summary {
                Some(sum) => {
                    out += &format!(
                        "{:<10} {:>10.3} {:>7} {:>9.1} {:>7} {:>9}\n",
                        s.method.name(),
                        sum.mean,
                        sum.min,
                        sum.median,
                        sum.max,
                        s.failures
                    )
                }
                None => {
                    out += &format!(
                        "{:<10} {:>10} {:>7} {:>9} {:>7} {:>9}\n",
                        s.method.name(),
                        "-",
                        "-",
                        "-",
                        "-",
                        s.failures
                    )
                }
            }
        }
        if self.skipped_instances > 0 {
            out += &format!(
                "skipped instances (no infeasible start): {}\n",
                self.skipped_instances
            );
        }
        out
    }
}

/// `splitmix64` of `parent` advanced by `index + 1` golden-ratio increments.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut z = parent.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Candidate instance seeds tried per requested instance before giving up.
pub const MAX_INSTANCE_CANDIDATES: usize = 20;

type Drawn = (ProblemInstance, Vec<StartPoint>);

/// Walks candidate seeds `derive_seed(base_seed, 0), derive_seed(base_seed, 1), ...`
/// and keeps the first `config.instances` whose starts can all be drawn.
/// Candidates are evaluated in parallel batches but admitted in index order.
fn draw_instances<G>(config: &BenchConfig, generate: &G) -> Result<(Vec<Drawn>, usize)>
where
    G: Fn(usize, u64) -> Result<ProblemInstance> + Sync,
{
    let limit = config.instances.saturating_mul(MAX_INSTANCE_CANDIDATES);
    let mut admitted = Vec::with_capacity(config.instances);
    let mut skipped = 0;
    let mut next = 0;
    while admitted.len() < config.instances {
        if next >= limit {
            return Err(Error::ExhaustedRejection(limit));
        }
        let batch = (config.instances - admitted.len()).min(limit - next);
        let drawn: Vec<Option<Drawn>> = (next..next + batch)
            .into_par_iter()
            .map(|i| {
                let instance = generate(config.n, derive_seed(config.base_seed, i as u64))?;
                let starts = (0..config.starts)
                    .map(|j| gen_start(&instance, derive_seed(instance.seed, j as u64)))
                    .collect::<Result<Vec<_>>>();
                match starts {
                    Ok(starts) => Ok(Some((instance, starts))),
                    Err(Error::ExhaustedRejection(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        next += batch;
        for d in drawn {
            match d {
                Some(d) if admitted.len() < config.instances => admitted.push(d),
                Some(_) => {}
                None => skipped += 1,
            }
        }
    }
    Ok((admitted, skipped))
}

struct PairOutcome {
    runs: Vec<RunRecord>,
    fejer: FejerAudit,
    traces: Vec<GapTrace>,
}

fn with_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

fn bench<G, R>(
    config: &BenchConfig,
    methods: &[BenchMethod],
    generate: G,
    solve: R,
) -> Result<BenchReport>
where
    G: Fn(usize, u64) -> Result<ProblemInstance> + Sync,
    R: Fn(
            &ProblemInstance,
            &Point,
            BenchMethod,
            &SolverConfig,
            &mut FejerAudit,
        ) -> Result<crate::methods::IterationTrace>
        + Sync,
{
    config.validate()?;
    with_pool(config.jobs, || {
        let (instances, skipped_instances) = draw_instances(config, &generate)?;
        let pairs: Vec<(usize, usize)> = (0..instances.len())
            .flat_map(|i| (0..config.starts).map(move |j| (i, j)))
            .collect();
        let outcomes: Vec<PairOutcome> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (instance, starts) = &instances[i];
                let start = &starts[j];
                let mut fejer = FejerAudit::new();
                let mut runs = Vec::new();
                let mut traces = Vec::new();
                for &method in methods {
                    let solver = SolverConfig::new(method.solver())
                        .with_tol(config.tol)
                        .with_max_iter(config.max_iter);
                    let trace = solve(instance, &start.projected, method, &solver, &mut fejer)?;
                    runs.push(RunRecord {
                        instance_seed: instance.seed,
                        start_seed: start.seed,
                        method,
                        iterations: trace.iterations,
                        final_gap: trace.final_gap(),
                        status: trace.status,
                    });
                    if config.keep_first_trace && i == 0 && j == 0 {
                        traces.push(GapTrace {
                            method,
                            gaps: trace.gaps,
                        });
                    }
                }
                Ok(PairOutcome {
                    runs,
                    fejer,
                    traces,
                })
            })
            .collect::<Result<_>>()?;

        let mut runs = Vec::with_capacity(outcomes.len() * methods.len());
        let mut fejer = FejerAudit::new();
        let mut traces = Vec::new();
        for o in outcomes {
            runs.extend(o.runs);
            fejer.merge(&o.fejer);
            traces.extend(o.traces);
        }
        sort_runs(&mut runs);
        let stats = methods.iter().map(|&m| run_stats(&runs, m)).collect();
        let profile = performance_profile(&cost_matrix(&runs, methods), methods)?;
        Ok(BenchReport {
            methods: methods.to_vec(),
            runs,
            stats,
            profile,
            fejer: config.audit.then_some(fejer),
            traces,
            skipped_instances,
        })
    })?
}

pub fn sort_runs(runs: &mut [RunRecord]) {
    runs.sort_by_key(|r| (r.instance_seed, r.start_seed, r.method));
}

/// CRM, MAP and DRM on random second-order cone systems.
pub fn bench_soc(config: &BenchConfig) -> Result<BenchReport> {
    let generate = |n, seed| gen_soc_instance_with(n, seed, config.certificate);
    bench(
        config,
        &BenchMethod::SOC,
        generate,
        |inst, z0, method, solver, fejer| {
            let u = inst.affine.as_ref().expect("affine-conic instance");
            let cone = inst.cone();
            match (
                config.audit && method == BenchMethod::Crm,
                &inst.certificate,
            ) {
                (true, Some(cert)) => run_with(cone, u, z0, solver, &mut |z, next| {
                    fejer.check(cert, z, next)
                }),
                _ => run_with(cone, u, z0, solver, &mut |_, _| {}),
            }
        },
    )
}

/// CRM-prod, MAP-prod and DRM-prod on random polyhedra.
pub fn bench_polyhedral_prod(config: &BenchConfig) -> Result<BenchReport> {
    let generate = |n, seed| gen_polyhedral_instance_with(n, seed, config.slack_rows);
    bench(
        config,
        &BenchMethod::PROD,
        generate,
        |inst, z0, method, solver, fejer| solve_prod(inst, z0, method, solver, config.audit, fejer),
    )
}

fn solve_prod(
    inst: &ProblemInstance,
    z0: &Point,
    method: BenchMethod,
    solver: &SolverConfig,
    audit: bool,
    fejer: &mut FejerAudit,
) -> Result<crate::methods::IterationTrace> {
    let w = inst.product()?;
    match (audit && method == BenchMethod::CrmProd, &inst.certificate) {
        (true, Some(cert)) => {
            let anchor = lift(cert, w.blocks());
            run_prod_with(
                &w,
                z0,
                solver,
                ProdOrdering::DiagonalFirst,
                &mut |z, next| fejer.check(&anchor, z, next),
            )
        }
        _ => run_prod_with(&w, z0, solver, ProdOrdering::DiagonalFirst, &mut |_, _| {}),
    }
}

/// Runs CSV with the fixed column order; an empty slice gives a header-only file.
pub fn write_runs_csv<W: Write>(runs: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(RUNS_CSV_HEADER)?;
    for r in runs {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs_csv<R: std::io::Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != RUNS_CSV_HEADER {
        return Err(Error::parse(
            "csv header",
            format!("expected {}", RUNS_CSV_HEADER.join(",")),
        ));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::parse(format!("csv row {}", i + 1), e.to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub schema: u64,
    pub stats: Vec<RunStats>,
    pub profile: Vec<ProfileCurve>,
}

pub fn summary_json(stats: &[RunStats], profile: &[ProfileCurve]) -> Result<String> {
    let file = SummaryFile {
        schema: SUMMARY_SCHEMA_VERSION,
        stats: stats.to_vec(),
        profile: profile.to_vec(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::parse("summary", e.to_string()))
}

/// `method,iteration,gap` rows, one per recorded gap.
pub fn write_traces_csv<W: Write>(traces: &[GapTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "iteration", "gap"])?;
    for t in traces {
        for (k, g) in t.gaps.iter().enumerate() {
            w.write_record([t.method.name().to_string(), k.to_string(), g.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Output format for exported results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Writes the runs CSV or the JSON summary of `report` to `path`.
pub fn export(report: &BenchReport, format: ExportFormat, path: impl AsRef<Path>) -> Result<()> {
    let mut file = File::create(path)?;
    match format {
        ExportFormat::Csv => write_runs_csv(&report.runs, &mut file),
        ExportFormat::Json => {
            file.write_all(summary_json(&report.stats, &report.profile)?.as_bytes())?;
            Ok(())
        }
    }
}
