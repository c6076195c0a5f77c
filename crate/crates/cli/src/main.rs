//! `cachecost`: solve, cross-check, simulate and sweep cost-aware coded caching.
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cachecost::sim::{default_file_length, simulate_with_transcripts, Demand, SimulationReport};
use cachecost::sweep::{run_sweep, write_csv, Axis, Manifest, SweepParam, SweepSpec};
use cachecost::verify::{linspace, run_verify, VerifyGrid, VerifyReport};
use cachecost::{solve, uncoded_is_optimal, Config, Error};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cachecost", version, about)]
struct Cli {
    /// JSON file with default parameters; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Print JSON instead of a table
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal placement for one instance
    Solve {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Also write the JSON result here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed form against the vertex oracle, over a grid or one instance
    Verify {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Byte-level placement and delivery at the optimum
    Simulate {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Units per file (default 2520·K)
        #[arg(long)]
        file_length: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Requested file per user, 1-based, comma-separated (default 1,2,..,K)
        #[arg(long, value_delimiter = ',')]
        demand: Option<Vec<usize>>,
        /// Write report and transcripts as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a two-axis grid and emit one CSV row per point
    Sweep {
        #[command(flatten)]
        instance: InstanceArgs,
        /// figure1, figure2 or figure3
        #[arg(long)]
        preset: Option<String>,
        /// Outer axis, e.g. `alpha=0:1:21` or `n=5,10,20`
        #[arg(long)]
        outer: Option<String>,
        /// Inner axis
        #[arg(long)]
        inner: Option<String>,
        /// Dataset path (stdout if absent)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Manifest path (default `<out>.manifest.json`)
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct InstanceArgs {
    #[arg(short = 'k', long)]
    users: Option<usize>,
    #[arg(short = 'n', long)]
    files: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Accept placement cost scale above 1
    #[arg(long)]
    allow_rho_gt_1: bool,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 8)]
    k_max: usize,
    /// N/K ratios
    #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
    multipliers: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    rho_min: f64,
    #[arg(long, default_value_t = 0.5)]
    rho_max: f64,
    #[arg(long, default_value_t = 50)]
    rho_steps: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha_min: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 50)]
    alpha_steps: usize,
}

/// Contents of `--config`. A sweep manifest also loads, through its `spec`.
#[derive(Deserialize, Default)]
struct FileConfig {
    users: Option<usize>,
    files: Option<usize>,
    rho: Option<f64>,
    alpha: Option<f64>,
    #[serde(default)]
    allow_rho_gt_1: bool,
    seed: Option<u64>,
    file_length: Option<usize>,
    demand: Option<Vec<usize>>,
    #[serde(alias = "spec")]
    sweep: Option<SweepSpec>,
}

enum Failure {
    Usage(String),
    Check(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Check(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Check(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::DecodeFailure { .. } | Error::Invariant(_) => Failure::Check(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Solve { instance, out } => cmd_solve(&resolve(&instance, &file)?, cli.json, out),
        Command::Verify { instance, grid, out } => cmd_verify(&instance, &grid, &file, cli.json, out),
        Command::Simulate { instance, file_length, seed, demand, out } => {
            let config = resolve(&instance, &file)?;
            let f = file_length.or(file.file_length).unwrap_or(default_file_length(config.users()));
            let seed = seed.or(file.seed).unwrap_or(0);
            let demand = match demand.or(file.demand.clone()) {
                Some(d) => {
                    if d.contains(&0) {
                        return Err(Failure::Usage("demand is 1-based".into()));
                    }
                    Demand::new(d.iter().map(|n| n - 1).collect(), config.users(), config.files())?
                }
                None => Demand::identity(config.users()),
            };
            cmd_simulate(&config, f, seed, &demand, cli.json, out)
        }
        Command::Sweep { instance, preset, outer, inner, out, manifest } => {
            let spec = sweep_spec(&instance, &file, preset, outer, inner)?;
            cmd_sweep(&spec, cli.json, out, manifest)
        }
    }
}

fn resolve(args: &InstanceArgs, file: &FileConfig) -> Result<Config, Failure> {
    let allow = args.allow_rho_gt_1 || file.allow_rho_gt_1;
    let rho = args.rho.or(file.rho);
    if let Some(r) = rho {
        if r > 1.0 && !allow {
            return Err(Failure::Usage(format!("rho = {r} exceeds 1 (pass --allow-rho-gt-1)")));
        }
    }
    let missing = |name: &str| Failure::Usage(format!("missing --{name}"));
    let users = args.users.or(file.users).ok_or_else(|| missing("users"))?;
    let files = args.files.or(file.files).ok_or_else(|| missing("files"))?;
    let rho = rho.ok_or_else(|| missing("rho"))?;
    let alpha = args.alpha.or(file.alpha).ok_or_else(|| missing("alpha"))?;
    let config = if allow {
        Config::with_unbounded_rho(users, files, rho, alpha)
    } else {
        Config::new(users, files, rho, alpha)
    };
    Ok(config?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_failure(path, e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_failure(path, e))
}

fn echo(c: &Config) -> String {
    format!("K={} N={} rho={} alpha={}", c.users(), c.files(), c.rho(), c.alpha())
}

fn cmd_solve(config: &Config, as_json: bool, out: Option<PathBuf>) -> Outcome {
    let sol = solve(config);
    sol.check_invariants(config)?;
    let uncoded = uncoded_is_optimal(config);
    let x = sol.allocation.subfile_fractions();
    let doc = json!({
        "config": config,
        "regime": sol.regime,
        "support": sol.support,
        "y": sol.allocation.shares(),
        "x": x,
        "r_placement": sol.r_placement,
        "r_delivery": sol.r_delivery,
        "uncoded_is_optimal": uncoded,
    });
    if as_json {
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    } else {
        let support: Vec<String> = sol.support.iter().map(|t| t.to_string()).collect();
        println!("{}", echo(config));
        println!("regime           {}", sol.regime);
        println!("support          {{{}}}", support.join(", "));
        println!("R_o (placement)  {:.12}", sol.r_placement);
        println!("R_p (delivery)   {:.12}", sol.r_delivery);
        println!("uncoded optimal  {} (alpha <= sigma_{{K-1}}, any rho)", if uncoded { "yes" } else { "no" });
        println!("{:>3}  {:>16}  {:>16}", "t", "y_t", "x_t");
        for (t, (y, x)) in sol.allocation.shares().iter().zip(&x).enumerate() {
            println!("{t:>3}  {y:>16.12}  {x:>16.12}");
        }
    }
    if let Some(path) = out {
        write_json(&path, &doc)?;
    }
    Ok(())
}

fn cmd_verify(
    instance: &InstanceArgs,
    grid: &GridArgs,
    file: &FileConfig,
    as_json: bool,
    out: Option<PathBuf>,
) -> Outcome {
    let single = instance.users.or(file.users).is_some()
        || instance.files.or(file.files).is_some()
        || instance.rho.or(file.rho).is_some()
        || instance.alpha.or(file.alpha).is_some();
    let points = if single {
        VerifyGrid::single(resolve(instance, file)?)
    } else {
        if grid.k_min < 1 || grid.k_min > grid.k_max {
            return Err(Failure::Usage(format!("empty users range {}..={}", grid.k_min, grid.k_max)));
        }
        let users: Vec<usize> = (grid.k_min..=grid.k_max).collect();
        VerifyGrid::product(
            &users,
            &grid.multipliers,
            &linspace(grid.rho_min, grid.rho_max, grid.rho_steps),
            &linspace(grid.alpha_min, grid.alpha_max, grid.alpha_steps),
            instance.allow_rho_gt_1 || file.allow_rho_gt_1,
        )?
    };
    let report = run_verify(&points);
    if as_json {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        print_verify(&report);
    }
    if let Some(path) = out {
        write_json(&path, &report)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check(match report.failures.first() {
            Some(first) => format!("verification failed at {first}"),
            None => "verification failed".into(),
        }))
    }
}

fn print_verify(r: &VerifyReport) {
    println!("points                  {}", r.points);
    println!("max objective gap       {:e}", r.max_discrepancy);
    if let Some(c) = &r.worst_config {
        println!("  at                    {}", echo(c));
    }
    println!("allocation mismatches   {}", r.allocation_mismatches);
    println!("tied allocations        {}", r.tied_allocation_differences);
    println!("invariant violations    {}", r.invariant_violations);
    println!("claims passed           {}/{}", r.claims_passed, r.claims_checked);
    for f in &r.failures {
        println!("  {f}");
    }
}

fn cmd_simulate(
    config: &Config,
    file_length: usize,
    seed: u64,
    demand: &Demand,
    as_json: bool,
    out: Option<PathBuf>,
) -> Outcome {
    let sol = solve(config);
    let (report, placement, delivery) =
        simulate_with_transcripts(config, &sol.allocation, file_length, seed, demand)?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        print_simulation(config, &report);
    }
    if let Some(path) = out {
        let doc = json!({
            "config": config,
            "report": report,
            "placement": placement.export(),
            "delivery": delivery.export(),
        });
        write_json(&path, &doc)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check(format!("simulation check failed for {}", echo(config))))
    }
}

fn print_simulation(config: &Config, r: &SimulationReport) {
    let sizes: Vec<String> = r.sizes.iter().map(|s| s.to_string()).collect();
    let demand: Vec<String> = r.demand.iter().map(|d| d.to_string()).collect();
    println!("{}  F={}  seed={}", echo(config), r.file_length, r.seed);
    println!("demand      {}", demand.join(","));
    println!("s_t         {}", sizes.join(" "));
    println!("{:<10}  {:>14}  {:>14}  {:>10}  {:>10}", "phase", "measured", "formula", "delta", "bound");
    for (name, c) in [("placement", &r.placement), ("delivery", &r.delivery)] {
        println!(
            "{name:<10}  {:>14.10}  {:>14.10}  {:>10.3e}  {:>10.3e}",
            c.measured,
            c.formula_quantized,
            c.delta(),
            c.bound
        );
    }
    let ok = r.decoded.iter().filter(|&&d| d).count();
    println!("decoded     {ok}/{}", r.decoded.len());
}

fn parse_axis(text: &str) -> Result<Axis, Failure> {
    let (name, values) = text
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("axis '{text}' should look like alpha=0:1:21")))?;
    Ok(Axis::parse(name.trim().parse::<SweepParam>()?, values)?)
}

fn sweep_spec(
    instance: &InstanceArgs,
    file: &FileConfig,
    preset: Option<String>,
    outer: Option<String>,
    inner: Option<String>,
) -> Result<SweepSpec, Failure> {
    let base = match preset {
        Some(name) => Some(SweepSpec::preset(&name)?),
        None => file.sweep.clone(),
    };
    let outer = outer.map(|t| parse_axis(&t)).transpose()?;
    let inner = inner.map(|t| parse_axis(&t)).transpose()?;
    let mut spec = match (base, outer, inner) {
        (Some(mut s), o, i) => {
            if let Some(o) = o {
                s.axes[0] = o;
            }
            if let Some(i) = i {
                s.axes[1] = i;
            }
            s
        }
        (None, Some(o), Some(i)) => {
            let first = |p: SweepParam| {
                [&o, &i].into_iter().find(|a| a.param == p).map(|a| a.values[0])
            };
            SweepSpec {
                users: 0,
                files: first(SweepParam::Files).map_or(0, |v| v as usize),
                rho: first(SweepParam::Rho).unwrap_or(f64::NAN),
                alpha: first(SweepParam::Alpha).unwrap_or(f64::NAN),
                axes: [o, i],
                allow_rho_gt_1: false,
            }
        }
        _ => return Err(Failure::Usage("sweep needs --preset, a config sweep, or both --outer and --inner".into())),
    };
    if let Some(k) = instance.users.or(file.users) {
        spec.users = k;
    }
    if let Some(n) = instance.files.or(file.files) {
        spec.files = n;
    }
    if let Some(r) = instance.rho.or(file.rho) {
        spec.rho = r;
    }
    if let Some(a) = instance.alpha.or(file.alpha) {
        spec.alpha = a;
    }
    spec.allow_rho_gt_1 |= instance.allow_rho_gt_1 || file.allow_rho_gt_1;
    let swept = |p: SweepParam| spec.axes.iter().any(|a| a.param == p);
    for (p, unset) in [
        (SweepParam::Files, spec.files == 0),
        (SweepParam::Rho, spec.rho.is_nan()),
        (SweepParam::Alpha, spec.alpha.is_nan()),
    ] {
        if unset && !swept(p) {
            return Err(Failure::Usage(format!("missing fixed --{}", p.name())));
        }
    }
    if spec.users == 0 {
        return Err(Failure::Usage("missing --users".into()));
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_sweep(spec: &SweepSpec, as_json: bool, out: Option<PathBuf>, manifest: Option<PathBuf>) -> Outcome {
    let rows = run_sweep(spec)?;
    let emit = |w: &mut dyn Write| -> io::Result<()> {
        if as_json {
            serde_json::to_writer_pretty(&mut *w, &rows)?;
            writeln!(w)
        } else {
            write_csv(&rows, w)
        }
    };
    match &out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_failure(path, e))?;
            let mut w = BufWriter::new(file);
            emit(&mut w).and_then(|_| w.flush()).map_err(|e| io_failure(path, e))?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            match emit(&mut lock) {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                    return Err(Failure::Io(format!("stdout: {e}")))
                }
                _ => {}
            }
        }
    }
    let manifest_path = manifest.or_else(|| {
        out.map(|p| {
            let mut s = p.into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = manifest_path {
        write_json(&path, &Manifest::new(spec, rows.len()))?;
        eprintln!("{} rows, manifest {}", rows.len(), path.display());
    }
    Ok(())
}
