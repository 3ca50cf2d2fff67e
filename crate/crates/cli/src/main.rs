//! `ramiflow` command line: solve, evaluate, convert and check urban
//! planning and branched transport instances stored as JSON files.
//!
//! Exit status is 0 on success, 2 when an input or flag is invalid and 3 when
//! `verify` finds a relation that does not hold.

mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ramiflow::equivalence::{flux_to_pattern, pattern_to_flux, single_path_reroute, verify_equivalence, verify_flux};
use ramiflow::flux_graph::{divergence, graph_cost, CostSpec};
use ramiflow::graph_reduce::path_decompose;
use ramiflow::instances;
use ramiflow::io;
use ramiflow::measures::{wasserstein1, DiscreteMeasure};
use ramiflow::network::{cost_sigma, d_sigma, extract_sigma, wasserstein_dsigma_with, NetworkSet};
use ramiflow::pattern::pattern_cost;
use ramiflow::solver::{solve_discrete_report, SolveConfig};
use ramiflow::Execution;

#[derive(Parser, Debug)]
#[command(name = "ramiflow", version, about = "Urban planning and branched transport on discrete measures")]
struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for a cheap flux between two measures.
    Solve(SolveArgs),
    /// Cost of a graph, a pattern or a network.
    Eval(EvalArgs),
    /// Convert between graphs, patterns, path measures and networks.
    Convert(ConvertArgs),
    /// Check the cost relations between the flux, pattern and network forms.
    Verify(VerifyArgs),
    /// Two-speed distance between two points.
    Dsigma(DsigmaArgs),
    /// Transport cost between two measures, Euclidean or two-speed.
    Wasserstein(WassersteinArgs),
    /// Draw a graph as SVG and dump its edges as CSV.
    Render(RenderArgs),
}

#[derive(Args, Debug, Clone)]
struct CostArgs {
    /// Branched transport exponent in (0, 1].
    #[arg(long, conflicts_with_all = ["eps", "a"])]
    alpha: Option<f64>,
    /// Urban planning network cost per unit length.
    #[arg(long, requires = "a")]
    eps: Option<f64>,
    /// Urban planning off-network travel rate, above 1.
    #[arg(long, requires = "eps")]
    a: Option<f64>,
}

impl CostArgs {
    fn spec(&self) -> Result<CostSpec> {
        let spec = match (self.alpha, self.eps, self.a) {
            (Some(alpha), None, None) => CostSpec::branched(alpha)?,
            (None, Some(eps), Some(a)) => CostSpec::urban(eps, a)?,
            _ => bail!("give either --alpha or both --eps and --a"),
        };
        Ok(spec)
    }
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_steiner: Option<usize>,
}

impl SearchArgs {
    fn config(&self, execution: Execution) -> SolveConfig {
        let base = SolveConfig::default();
        SolveConfig {
            seed: self.seed,
            restarts: self.restarts.unwrap_or(base.restarts),
            max_steiner: self.max_steiner.unwrap_or(base.max_steiner),
            execution,
            ..base
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    cost: CostArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    mu_plus: PathBuf,
    #[arg(long)]
    mu_minus: PathBuf,
    /// Graph output; printed to stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Cost trace CSV; defaults to `<output>.trace.csv` next to the graph.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["graph", "pattern", "sigma"]))]
struct EvalArgs {
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    pattern: Option<PathBuf>,
    /// Network set; needs both measures and urban planning parameters.
    #[arg(long, requires_all = ["mu_plus", "mu_minus"])]
    sigma: Option<PathBuf>,
    #[arg(long)]
    mu_plus: Option<PathBuf>,
    #[arg(long)]
    mu_minus: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-2)]
    refine: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum Target {
    Graph,
    Pattern,
    Paths,
    Network,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["graph", "pattern"]))]
struct ConvertArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    pattern: Option<PathBuf>,
    #[arg(long, value_enum)]
    to: Target,
    /// Reroute fibres so that common endpoints share one route (graph input).
    #[arg(long)]
    single_path: bool,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    cost: CostArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, requires = "mu_minus", conflicts_with = "suite")]
    mu_plus: Option<PathBuf>,
    #[arg(long, requires = "mu_plus", conflicts_with = "suite")]
    mu_minus: Option<PathBuf>,
    /// Check this flux instead of solving; its divergence gives the measures
    /// unless they are passed as well.
    #[arg(long, conflicts_with = "suite")]
    graph: Option<PathBuf>,
    /// Check this many seeded random instances (up to 3 atoms per side).
    #[arg(long)]
    suite: Option<u64>,
    #[arg(long, default_value_t = 1e-2)]
    refine: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DsigmaArgs {
    #[arg(long)]
    sigma: PathBuf,
    #[arg(long)]
    a: f64,
    #[arg(long, default_value_t = 1e-2)]
    refine: f64,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    from: Coords,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    to: Coords,
}

#[derive(Args, Debug)]
struct WassersteinArgs {
    #[arg(long)]
    mu_plus: PathBuf,
    #[arg(long)]
    mu_minus: PathBuf,
    /// Use the two-speed metric of this network (needs --a).
    #[arg(long, requires = "a")]
    sigma: Option<PathBuf>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, default_value_t = 1e-2)]
    refine: f64,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("out").required(true).multiple(true).args(["svg", "csv"]))]
struct RenderArgs {
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long)]
    graph: PathBuf,
    /// Network set drawn underneath the graph.
    #[arg(long)]
    sigma: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// A point given on the command line as `x,y,...`.
#[derive(Debug, Clone)]
struct Coords(Vec<f64>);

fn parse_point(s: &str) -> std::result::Result<Coords, String> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("bad coordinate {c:?}: {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(Coords)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load<T>(path: &Path, parse: impl Fn(&str) -> ramiflow::Result<T>) -> Result<T> {
    parse(&read(path)?).with_context(|| format!("invalid {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn measures(plus: &Path, minus: &Path) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    Ok((load(plus, io::read_measure)?, load(minus, io::read_measure)?))
}

/// What a successful run found.
enum Outcome {
    Done,
    VerificationFailed,
}

fn solve(args: SolveArgs, exec: Execution) -> Result<Outcome> {
    let spec = args.cost.spec()?;
    let (plus, minus) = measures(&args.mu_plus, &args.mu_minus)?;
    let out = solve_discrete_report(&plus, &minus, spec, &args.search.config(exec))?;
    let graph = io::write_graph(&out.graph);
    let trace_path = args.trace.clone().or_else(|| args.output.as_ref().map(|o| o.with_extension("trace.csv")));
    if let Some(path) = &trace_path {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["step", "cost"])?;
        for (i, c) in out.trace.iter().enumerate() {
            w.serialize((i, c))?;
        }
        write(path, &String::from_utf8(w.into_inner()?)?)?;
    }
    match &args.output {
        Some(path) => {
            write(path, &graph)?;
            println!("{:?}", out.cost);
        }
        None => print!("{graph}"),
    }
    if out.budget_exhausted {
        eprintln!("warning: a restart hit the move budget before reaching a local optimum");
    }
    Ok(Outcome::Done)
}

fn eval(args: EvalArgs) -> Result<Outcome> {
    let value = if let Some(path) = &args.graph {
        graph_cost(&load(path, io::read_graph)?, args.cost.spec()?)
    } else if let Some(path) = &args.pattern {
        pattern_cost(&load(path, io::read_pattern)?, args.cost.spec()?)?
    } else {
        let (Some(eps), Some(a)) = (args.cost.eps, args.cost.a) else {
            bail!("a network is priced with urban planning parameters --eps and --a");
        };
        let sigma = load(args.sigma.as_deref().expect("input group"), io::read_network)?;
        let (plus, minus) = measures(args.mu_plus.as_deref().unwrap(), args.mu_minus.as_deref().unwrap())?;
        cost_sigma(&sigma, &plus, &minus, eps, a, args.refine)?
    };
    println!("{value:?}");
    Ok(Outcome::Done)
}

fn convert(args: ConvertArgs) -> Result<Outcome> {
    let network = |chi: &ramiflow::IrrigationPattern| -> Result<NetworkSet> {
        match (args.eps, args.a) {
            (Some(eps), Some(a)) => Ok(extract_sigma(chi, eps, a)),
            _ => Err(anyhow!("--to network needs --eps and --a")),
        }
    };
    let text = if let Some(path) = &args.graph {
        let g = load(path, io::read_graph)?;
        let chi = if args.single_path { single_path_reroute(&g) } else { flux_to_pattern(&g) };
        match args.to {
            Target::Graph => io::write_graph(&g),
            Target::Pattern => io::write_pattern(&chi),
            Target::Paths => io::write_paths(&path_decompose(&g)?),
            Target::Network => io::write_network(&network(&chi)?),
        }
    } else {
        let chi = load(args.pattern.as_deref().expect("input group"), io::read_pattern)?;
        match args.to {
            Target::Graph => io::write_graph(&pattern_to_flux(&chi)),
            Target::Pattern => io::write_pattern(&chi),
            Target::Paths => io::write_paths(&path_decompose(&pattern_to_flux(&chi))?),
            Target::Network => io::write_network(&network(&chi)?),
        }
    };
    write(&args.output, &text)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct SuiteEntry {
    seed: u64,
    report: ramiflow::equivalence::VerifyReport,
}

#[derive(Serialize)]
struct SuiteReport {
    instances: Vec<SuiteEntry>,
    pass: bool,
}

fn verify(args: VerifyArgs, exec: Execution) -> Result<Outcome> {
    let spec = args.cost.spec()?;
    let cfg = args.search.config(exec);
    let (text, pass) = if let Some(n) = args.suite {
        let runs = exec.map(n as usize, |i| {
            let seed = args.search.seed + i as u64;
            let (plus, minus) = instances::random_instance(seed, 3, 4.0);
            verify_equivalence(&plus, &minus, spec, &cfg, args.refine).map(|v| SuiteEntry { seed, report: v.report })
        });
        let instances = runs.into_iter().collect::<ramiflow::Result<Vec<_>>>()?;
        let pass = instances.iter().all(|e| e.report.pass);
        (io::write_report(&SuiteReport { instances, pass }), pass)
    } else {
        let v = match (&args.graph, &args.mu_plus, &args.mu_minus) {
            (Some(g), p, m) => {
                let g = load(g, io::read_graph)?;
                let (plus, minus) = match (p, m) {
                    (Some(p), Some(m)) => measures(p, m)?,
                    _ => divergence(&g),
                };
                verify_flux(&g, &plus, &minus, spec, args.refine)?
            }
            (None, Some(p), Some(m)) => {
                let (plus, minus) = measures(p, m)?;
                verify_equivalence(&plus, &minus, spec, &cfg, args.refine)?
            }
            _ => bail!("give --mu-plus and --mu-minus, --graph, or --suite"),
        };
        (io::write_report(&v.report), v.report.pass)
    };
    match &args.output {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(if pass { Outcome::Done } else { Outcome::VerificationFailed })
}

fn dsigma(args: DsigmaArgs) -> Result<Outcome> {
    let sigma = load(&args.sigma, io::read_network)?;
    println!("{:?}", d_sigma(&args.from.0, &args.to.0, &sigma, args.a, args.refine)?);
    Ok(Outcome::Done)
}

fn wasserstein(args: WassersteinArgs, exec: Execution) -> Result<Outcome> {
    let (plus, minus) = measures(&args.mu_plus, &args.mu_minus)?;
    let value = match &args.sigma {
        Some(path) => {
            let sigma = load(path, io::read_network)?;
            wasserstein_dsigma_with(&plus, &minus, &sigma, args.a.expect("required"), args.refine, exec)?.0
        }
        None => wasserstein1(&plus, &minus)?.0,
    };
    println!("{value:?}");
    Ok(Outcome::Done)
}

fn render(args: RenderArgs) -> Result<Outcome> {
    let spec = args.cost.spec()?;
    let g = load(&args.graph, io::read_graph)?;
    let sigma = args.sigma.as_deref().map(|p| load(p, io::read_network)).transpose()?;
    if let Some(path) = &args.svg {
        write(path, &render::svg(&g, spec, sigma.as_ref()))?;
    }
    if let Some(path) = &args.csv {
        write(path, &render::csv(&g, spec)?)?;
    }
    Ok(Outcome::Done)
}

/// Caps the worker pool at `RAMIFLOW_THREADS` when it is set.
fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("RAMIFLOW_THREADS") else { return Ok(()) };
    let n: usize = value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        anyhow!("RAMIFLOW_THREADS must be a positive integer, got {value:?}")
    })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome> {
    configure_threads()?;
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Solve(a) => solve(a, exec),
        Command::Eval(a) => eval(a),
        Command::Convert(a) => convert(a),
        Command::Verify(a) => verify(a, exec),
        Command::Dsigma(a) => dsigma(a),
        Command::Wasserstein(a) => wasserstein(a, exec),
        Command::Render(a) => render(a),
    }
}

fn main() -> ExitCode {
    // Clap exits with status 2 on usage errors by itself.
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
