//! Command-line front end.
//!
//! Exit status: 0 success, 2 infeasible (or validation failed), 3 parse or
//! configuration error, 4 timeout before any tour was found.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::clustering::{
    attach_stations, build_cost_matrix, cluster, dump_clustering, validate_clustering, CostType,
};
use crate::error::{Error, Result};
use crate::instance::{
    self, generate_random, make_stochastic, parse_benchmark, parse_scenario_name, GeneratorParams,
    Instance, ParseOptions, RelSigma,
};
use crate::mipexport::{build_model, write_model};
use crate::oracle::{simulate_with_traces, write_traces, McReport};
use crate::pipeline::{solve_instance, PipelineConfig, PipelineOutput};
use crate::rectsp::SearchConfig;
use crate::routeeval::{check_solution, load_solution, save_solution, FeasibilityReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_TIMEOUT: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "recvrp",
    version,
    about = "Robust energy-capacitated vehicle routing"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
    Csv,
}

/// Flags shared by every command. Each may also come from a `RECVRP_*`
/// environment variable or from the JSON config file, in that order of
/// precedence after the command line.
#[derive(Debug, Clone, Args, Default)]
pub struct Common {
    /// Energy chance-constraint probability.
    #[arg(long, global = true, env = "RECVRP_PE")]
    pub pe: Option<f64>,
    /// Tour-time quantile used as the cost.
    #[arg(long, global = true, env = "RECVRP_PT")]
    pub pt: Option<f64>,
    /// Clustering cost function: F1, F2 or F3.
    #[arg(long, global = true, env = "RECVRP_COST_TYPE")]
    pub cost_type: Option<CostType>,
    #[arg(long, global = true, env = "RECVRP_SEED")]
    pub seed: Option<u64>,
    /// Relative sigma applied to every edge (0 makes the instance deterministic).
    #[arg(long, global = true, env = "RECVRP_SIGMA")]
    pub sigma: Option<f64>,
    /// Customers per subgroup in the tour search.
    #[arg(long, global = true, env = "RECVRP_SUBGROUP_SIZE")]
    pub subgroup_size: Option<usize>,
    /// Search timeout per group, in seconds.
    #[arg(long, global = true, env = "RECVRP_TIMEOUT")]
    pub timeout: Option<f64>,
    #[arg(long, global = true, env = "RECVRP_THREADS")]
    pub threads: Option<usize>,
    /// Output directory; results go to stdout when absent.
    #[arg(long, global = true, env = "RECVRP_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "RECVRP_FORMAT")]
    pub format: Option<Format>,
    /// JSON file with defaults for any of the flags above.
    #[arg(long, global = true, env = "RECVRP_CONFIG")]
    pub config: Option<PathBuf>,
    /// Charge rate assumed for benchmark files, which do not carry one.
    #[arg(long, global = true, env = "RECVRP_CHARGE_RATE")]
    pub charge_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    pe: Option<f64>,
    pt: Option<f64>,
    cost_type: Option<CostType>,
    seed: Option<u64>,
    sigma: Option<f64>,
    subgroup_size: Option<usize>,
    timeout: Option<f64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
    format: Option<Format>,
    charge_rate: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate random instances.
    Gen(GenArgs),
    /// Cluster, route and check an instance.
    Solve { instance: PathBuf },
    /// Check a solution and replay it under sampled edge times and energies.
    Validate(ValidateArgs),
    /// Solve every instance in a directory and tabulate the results.
    Bench(BenchArgs),
    /// Write the mixed-integer model of an instance.
    ExportMip { instance: PathBuf },
    /// Print and check the clustering of an instance.
    Cluster { instance: PathBuf },
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scenario name such as SR-n20-k22; overrides --nodes and --depots.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, default_value_t = 11)]
    pub nodes: usize,
    /// Vehicles per depot, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub depots: Vec<usize>,
    /// Number of instances, with consecutive seeds.
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long, default_value_t = 100.0)]
    pub map_size: f64,
    #[arg(long)]
    pub copies: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Write per-sample traces as CSV.
    #[arg(long)]
    pub traces: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of `.recvrp` or `.evrp` instances.
    pub dir: Option<PathBuf>,
    /// Random scenarios to generate and average over `--seeds` seeds.
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 100.0)]
    pub map_size: f64,
    /// CSV of `name,cost[,reported_gap]` reference values.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Leave out the wall-clock columns.
    #[arg(long)]
    pub no_timings: bool,
}

/// Effective settings after merging flags, environment and config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub p_e: Option<f64>,
    pub p_t: Option<f64>,
    pub cost_type: CostType,
    pub seed: u64,
    pub sigma: Option<f64>,
    pub subgroup_size: Option<usize>,
    pub timeout: Option<Duration>,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub charge_rate: Option<f64>,
}

impl RunConfig {
    fn from_common(c: &Common) -> Result<Self> {
        let file: FileConfig = match &c.config {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                .map_err(|e| Error::parse(e.line(), format!("config: {e}")))?,
            None => FileConfig::default(),
        };
        let timeout = match c.timeout.or(file.timeout) {
            Some(t) if !(t >= 0.0) || !t.is_finite() => {
                return Err(Error::Validation(format!(
                    "timeout must be a nonnegative number of seconds, got {t}"
                )))
            }
            t => t.map(Duration::from_secs_f64),
        };
        let threads = c.threads.or(file.threads).unwrap_or(1);
        if threads == 0 {
            return Err(Error::Validation("threads must be at least 1".into()));
        }
        Ok(Self {
            p_e: c.pe.or(file.pe),
            p_t: c.pt.or(file.pt),
            cost_type: c.cost_type.or(file.cost_type).unwrap_or_default(),
            seed: c.seed.or(file.seed).unwrap_or(0),
            sigma: c.sigma.or(file.sigma),
            subgroup_size: c.subgroup_size.or(file.subgroup_size),
            timeout,
            threads,
            out: c.out.clone().or(file.out),
            format: c.format.or(file.format).unwrap_or_default(),
            charge_rate: c.charge_rate.or(file.charge_rate),
        })
    }

    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            r_param: None,
            search: SearchConfig {
                subgroup_target_size: self.subgroup_size,
                timeout: self.timeout,
                parallel_width: self.threads,
                cost_type: self.cost_type,
            },
        }
    }

    /// Applies probability and sigma overrides.
    fn adjust(&self, mut inst: Instance) -> Result<Instance> {
        if let Some(p) = self.p_e {
            inst.robustness.p_e = p;
        }
        if let Some(p) = self.p_t {
            inst.robustness.p_t = p;
        }
        inst.robustness.validate()?;
        if let Some(s) = self.sigma {
            inst = make_stochastic(&inst, RelSigma::Fixed(s), self.seed)?;
        }
        Ok(inst)
    }

    fn load_instance(&self, path: &Path) -> Result<Instance> {
        let text = std::fs::read_to_string(path)?;
        let inst = if text.trim_start().starts_with(instance::MAGIC) {
            instance::load(&text)?
        } else {
            let mut opts = ParseOptions::default();
            if let Some(c) = self.charge_rate {
                opts.charge_rate = c;
            }
            parse_benchmark(&text, &opts)?
        };
        self.adjust(inst)
    }

    /// Writes `body` to `<out>/<file>` or to `stdout`.
    fn emit(
        &self,
        stdout: &mut dyn Write,
        stderr: &mut dyn Write,
        file: &str,
        body: &str,
    ) -> Result<()> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let p = dir.join(file);
                std::fs::write(&p, body)?;
                writeln!(stderr, "wrote {}", p.display())?;
            }
            None => stdout.write_all(body.as_bytes())?,
        }
        Ok(())
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InfeasibleGroup {
            timed_out: true, ..
        } => EXIT_TIMEOUT,
        Error::InfeasibleGroup { .. }
        | Error::InfeasibleClustering(_)
        | Error::InfeasibleRoute(_)
        | Error::Infeasible(_)
        | Error::Plan(_) => EXIT_INFEASIBLE,
        Error::Parse { .. }
        | Error::Validation(_)
        | Error::Domain(_)
        | Error::RefusedTooLarge(_)
        | Error::Io(_) => EXIT_CONFIG,
    }
}

/// Runs the command line and returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match dispatch(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let cfg = RunConfig::from_common(&cli.common)?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(&cfg, a, stdout, stderr),
        Command::Solve { instance } => cmd_solve(&cfg, instance, stdout, stderr),
        Command::Validate(a) => cmd_validate(&cfg, a, stdout, stderr),
        Command::Bench(a) => cmd_bench(&cfg, a, stdout, stderr),
        Command::ExportMip { instance } => {
            let inst = cfg.load_instance(instance)?;
            let text = write_model(&build_model(&inst)?);
            cfg.emit(stdout, stderr, &format!("{}.lp", inst.name), &text)?;
            Ok(EXIT_OK)
        }
        Command::Cluster { instance } => cmd_cluster(&cfg, instance, stdout, stderr),
    }
}

fn cmd_gen(
    cfg: &RunConfig,
    a: &GenArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32> {
    let (nodes, depots) = match &a.scenario {
        Some(s) => parse_scenario_name(s)
            .ok_or_else(|| Error::Validation(format!("cannot read scenario name `{s}`")))?,
        None => (a.nodes, a.depots.clone()),
    };
    if a.count > 1 && cfg.out.is_none() {
        return Err(Error::Validation("--count above 1 needs --out".into()));
    }
    for k in 0..a.count {
        let seed = cfg.seed + k;
        let mut p = GeneratorParams::new(nodes, depots.clone(), seed);
        p.map_size = a.map_size;
        p.n_max = a.n_max;
        if let Some(c) = a.copies {
            p.station_copies = c;
        }
        if let Some(s) = cfg.sigma {
            p.rel_sigma = RelSigma::Fixed(s);
        }
        if let Some(pe) = cfg.p_e {
            p.robustness.p_e = pe;
        }
        if let Some(pt) = cfg.p_t {
            p.robustness.p_t = pt;
        }
        let inst = generate_random(&p)?;
        cfg.emit(
            stdout,
            stderr,
            &format!("{}-s{seed}.recvrp", inst.name),
            &instance::save(&inst),
        )?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SolveJson<'a> {
    instance: &'a str,
    routes: Vec<RouteJson>,
    cost_report: &'a crate::routeeval::CostReport,
    deterministic_time: f64,
    timed_out: bool,
    feasible: bool,
}

#[derive(Serialize)]
struct RouteJson {
    vehicle_id: usize,
    nodes: Vec<usize>,
    charging: Vec<(usize, f64)>,
}

fn solve_json(inst: &Instance, out: &PipelineOutput) -> String {
    let sol = &out.solution;
    let j = SolveJson {
        instance: &inst.name,
        routes: sol
            .routes
            .iter()
            .zip(&sol.plans)
            .map(|(r, p)| RouteJson {
                vehicle_id: r.vehicle_id,
                nodes: r.nodes.iter().map(|n| n.0).collect(),
                charging: p.tau.iter().map(|(&k, &t)| (k, t)).collect(),
            })
            .collect(),
        cost_report: &sol.cost_report,
        deterministic_time: sol.cost_report.mean_time,
        timed_out: out.timed_out,
        feasible: out.feasibility.is_feasible(),
    };
    serde_json::to_string_pretty(&j).expect("serializable") + "\n"
}

fn cmd_solve(
    cfg: &RunConfig,
    path: &Path,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32> {
    let inst = cfg.load_instance(path)?;
    let out = solve_instance(&inst, &cfg.pipeline())?;
    let body = match cfg.format {
        Format::Json => solve_json(&inst, &out),
        _ => save_solution(&out.solution, &inst.name),
    };
    let ext = if cfg.format == Format::Json {
        "json"
    } else {
        "sol"
    };
    cfg.emit(stdout, stderr, &format!("{}.{ext}", inst.name), &body)?;
    let c = &out.solution.cost_report;
    writeln!(
        stderr,
        "cost {} (global {}, deterministic {})",
        c.per_route_sum, c.global, c.mean_time
    )?;
    let t = &out.timings;
    writeln!(
        stderr,
        "time clustering {:.6}s routing {:.6}s checking {:.6}s",
        t.clustering.as_secs_f64(),
        t.routing.as_secs_f64(),
        t.checking.as_secs_f64()
    )?;
    if out.timed_out {
        writeln!(
            stderr,
            "warning: search timed out; the best tour found so far is reported"
        )?;
    }
    if !out.feasibility.is_feasible() {
        write!(stderr, "{}", out.feasibility)?;
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(EXIT_OK)
}

/// Largest acceptable violation rate: the nominal `1 - p_e` plus three
/// binomial standard errors.
pub fn violation_bound(p_e: f64, samples: usize) -> f64 {
    let q = 1.0 - p_e;
    q + 3.0 * (q * p_e / samples as f64).sqrt()
}

#[derive(Serialize)]
struct ValidateJson<'a> {
    feasible: bool,
    violations: Vec<String>,
    violation_bound: f64,
    monte_carlo: &'a McReport,
}

fn cmd_validate(
    cfg: &RunConfig,
    a: &ValidateArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32> {
    let inst = cfg.load_instance(&a.instance)?;
    let (_, sol) = load_solution(&std::fs::read_to_string(&a.solution)?)?;
    let report: FeasibilityReport = check_solution(&sol, &inst);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    let (mc, traces) = pool.install(|| simulate_with_traces(&sol, &inst, a.samples, cfg.seed));
    let bound = violation_bound(inst.robustness.p_e, mc.samples);
    let body = match cfg.format {
        Format::Json => {
            let j = ValidateJson {
                feasible: report.is_feasible(),
                violations: report.violations.iter().map(|v| v.to_string()).collect(),
                violation_bound: bound,
                monte_carlo: &mc,
            };
            serde_json::to_string_pretty(&j).expect("serializable") + "\n"
        }
        _ => format!("{report}violation_bound {bound}\n{mc}"),
    };
    cfg.emit(stdout, stderr, &format!("{}.mc", inst.name), &body)?;
    if let Some(p) = &a.traces {
        std::fs::write(p, write_traces(&traces))?;
    }
    if !report.is_feasible() {
        return Ok(EXIT_INFEASIBLE);
    }
    if mc.soc_violation_rate > bound {
        writeln!(
            stderr,
            "violation rate {} exceeds {bound}",
            mc.soc_violation_rate
        )?;
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(EXIT_OK)
}

fn cmd_cluster(
    cfg: &RunConfig,
    path: &Path,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32> {
    let inst = cfg.load_instance(path)?;
    let z = build_cost_matrix(&inst, None)?;
    let clu = attach_stations(&cluster(&inst, &z, cfg.cost_type)?, &inst, &z);
    let problems = validate_clustering(&clu, &inst);
    let mut body = dump_clustering(&clu);
    if problems.is_empty() {
        body.push_str("valid yes\n");
    } else {
        for p in &problems {
            body.push_str(&format!("invalid {p}\n"));
        }
    }
    cfg.emit(stdout, stderr, &format!("{}.clu", inst.name), &body)?;
    Ok(if problems.is_empty() {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub name: String,
    pub status: String,
    pub runs: u64,
    pub solved: u64,
    pub cost: Option<f64>,
    pub deterministic: Option<f64>,
    pub clustering_s: Option<f64>,
    pub routing_s: Option<f64>,
    pub total_s: Option<f64>,
    pub reference: Option<f64>,
    pub gap_pct: Option<f64>,
    pub reported_gap: Option<f64>,
    pub gap_mismatch: bool,
}

/// Percent gap of `cost` over `reference`.
pub fn gap_percent(cost: f64, reference: f64) -> f64 {
    (cost - reference) / reference * 100.0
}

fn read_reference(path: &Path) -> Result<Vec<(String, f64, Option<f64>)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("name,") {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(k + 1, format!("invalid number `{s}`")))
        };
        match f.as_slice() {
            [n, c] => out.push((n.to_string(), num(c)?, None)),
            [n, c, g] => out.push((n.to_string(), num(c)?, Some(num(g)?))),
            _ => return Err(Error::parse(k + 1, "expected name,cost[,reported_gap]")),
        }
    }
    Ok(out)
}

fn bench_row(
    name: String,
    runs: Vec<Result<PipelineOutput>>,
    reference: Option<(f64, Option<f64>)>,
) -> BenchRow {
    let total = runs.len() as u64;
    let mut errors = Vec::new();
    let ok: Vec<PipelineOutput> = runs
        .into_iter()
        .filter_map(|r| r.map_err(|e| errors.push(e.to_string())).ok())
        .collect();
    let n = ok.len() as f64;
    let mean = |f: &dyn Fn(&PipelineOutput) -> f64| {
        (!ok.is_empty()).then(|| ok.iter().map(f).sum::<f64>() / n)
    };
    let cost = mean(&|o| o.solution.cost());
    let gap = match (cost, reference) {
        (Some(c), Some((r, _))) => Some(gap_percent(c, r)),
        _ => None,
    };
    let reported_gap = reference.and_then(|r| r.1);
    let status = if ok.len() as u64 == total {
        "ok".to_string()
    } else if ok.is_empty() {
        format!("failed: {}", errors.first().cloned().unwrap_or_default())
    } else {
        format!("partial {}/{}", ok.len(), total)
    };
    BenchRow {
        name,
        status,
        runs: total,
        solved: ok.len() as u64,
        cost,
        deterministic: mean(&|o| o.solution.cost_report.mean_time),
        clustering_s: mean(&|o| o.timings.clustering.as_secs_f64()),
        routing_s: mean(&|o| o.timings.routing.as_secs_f64()),
        total_s: mean(&|o| {
            (o.timings.clustering + o.timings.routing + o.timings.checking).as_secs_f64()
        }),
        reference: reference.map(|r| r.0),
        gap_pct: gap,
        reported_gap,
        gap_mismatch: matches!((gap, reported_gap), (Some(g), Some(r)) if (g - r).abs() > 0.05),
    }
}

fn csv_table(rows: &[BenchRow], timings: bool) -> String {
    let o = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    let mut out = String::from("name,status,runs,solved,cost,deterministic");
    if timings {
        out.push_str(",clustering_s,routing_s,total_s");
    }
    out.push_str(",reference,gap_pct,reported_gap,gap_mismatch\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            r.name,
            r.status.replace(',', ";"),
            r.runs,
            r.solved,
            o(r.cost),
            o(r.deterministic)
        ));
        if timings {
            out.push_str(&format!(
                ",{},{},{}",
                o(r.clustering_s),
                o(r.routing_s),
                o(r.total_s)
            ));
        }
        out.push_str(&format!(
            ",{},{},{},{}\n",
            o(r.reference),
            o(r.gap_pct),
            o(r.reported_gap),
            r.gap_mismatch
        ));
    }
    out
}

fn cmd_bench(
    cfg: &RunConfig,
    a: &BenchArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32> {
    let refs = match &a.reference {
        Some(p) => read_reference(p)?,
        None => Vec::new(),
    };
    let lookup = |name: &str| refs.iter().find(|r| r.0 == name).map(|r| (r.1, r.2));
    let pc = cfg.pipeline();
    let mut rows = Vec::new();
    if let Some(dir) = &a.dir {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|x| x.to_str()),
                    Some("recvrp" | "evrp")
                )
            })
            .collect();
        files.sort();
        for f in files {
            let stem: String = f
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("?")
                .to_string();
            let run = cfg
                .load_instance(&f)
                .and_then(|inst| solve_instance(&inst, &pc));
            let reference = lookup(&stem);
            rows.push(bench_row(stem, vec![run], reference));
        }
    }
    for s in &a.scenarios {
        let (nodes, depots) = parse_scenario_name(s)
            .ok_or_else(|| Error::Validation(format!("cannot read scenario name `{s}`")))?;
        let runs = (0..a.seeds.max(1))
            .map(|k| {
                let mut p = GeneratorParams::new(nodes, depots.clone(), cfg.seed + k);
                p.map_size = a.map_size;
                if let Some(sig) = cfg.sigma {
                    p.rel_sigma = RelSigma::Fixed(sig);
                }
                let mut inst = generate_random(&p)?;
                if let Some(pe) = cfg.p_e {
                    inst.robustness.p_e = pe;
                }
                if let Some(pt) = cfg.p_t {
                    inst.robustness.p_t = pt;
                }
                inst.robustness.validate()?;
                solve_instance(&inst, &pc)
            })
            .collect();
        rows.push(bench_row(s.clone(), runs, lookup(s)));
    }
    let timings = !a.no_timings;
    let body = match cfg.format {
        Format::Json => {
            let rows: Vec<BenchRow> = rows
                .into_iter()
                .map(|mut r| {
                    if !timings {
                        (r.clustering_s, r.routing_s, r.total_s) = (None, None, None);
                    }
                    r
                })
                .collect();
            serde_json::to_string_pretty(&rows).expect("serializable") + "\n"
        }
        _ => csv_table(&rows, timings),
    };
    cfg.emit(stdout, stderr, "bench.csv", &body)?;
    Ok(EXIT_OK)
}
