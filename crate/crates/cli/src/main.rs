use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use rrg_core::chebyshev::{self, rn_rule, Basis, FunctionSpec, LinStatMode};
use rrg_core::graph::{sample_graph, GraphFile, PermutationGraph};
use rrg_core::harness::{self, ExperimentArgs, ExperimentConfig, GlobalArgs, OutputFormat, Statistic};
use rrg_core::parallel::{with_threads, Execution};
use rrg_core::walks::{count_cnbw, count_cycles, CnbwMethod};
use rrg_core::{rng, spectra, words, Error};

#[derive(Parser, Debug)]
#[command(name = "rrg", version, about = "Random regular graphs from random permutations")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Source of the graph for single-graph commands.
#[derive(clap::Args, Debug, Clone)]
struct GraphArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Read the graph from a JSON file written by `sample` instead.
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AdkMethod {
    Closed,
    Ie,
    Enum,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Number a(d,k) of cyclically reduced words of length k.
    Adk {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "closed")]
        method: AdkMethod,
        /// Emit `d,k,a` for every d' <= d and k' <= k.
        #[arg(long)]
        table: bool,
    },
    /// Sample a graph and print it as JSON.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
    },
    /// Cycle counts C_1..C_r.
    Cycles {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        r: usize,
    },
    /// Cyclically non-backtracking walk counts CNBW_1..CNBW_r.
    Cnbw {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value = "transfer")]
        method: CnbwMethod,
    },
    /// Spectrum of the adjacency matrix.
    Spectrum {
        #[command(flatten)]
        graph: GraphArgs,
        /// Write all eigenvalues to this CSV file.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Linear eigenvalue statistic of one graph.
    Linstat {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long = "f", default_value = "square")]
        function: FunctionSpec,
        #[arg(long = "K")]
        k_max: Option<usize>,
        #[arg(long, value_enum, default_value = "fixed")]
        mode: LinStatMode,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, conflicts_with = "r")]
        beta: Option<f64>,
    },
    /// Monte Carlo experiment over many sampled graphs.
    Experiment(ExperimentArgs),
    /// Check the size-biased coupling on random planted cycles.
    CouplingCheck {
        #[arg(long, default_value_t = 60)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Length of the planted cycle.
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        /// Instead, run the coupling from every permutation of n points with
        /// a loop planted at vertex 1 and compare with the conditional law.
        #[arg(long)]
        exact: bool,
    },
    /// Audit the edge-discrepancy property on random vertex subsets.
    Discrepancy {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
    },
}

/// A command's result: text for stdout (or `--out`) and an exit code.
/// `text` is `None` when the command already wrote its own files.
struct Outcome {
    text: Option<String>,
    code: u8,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text: Some(text), code: 0 }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.global.threads;
    match with_threads(threads, || run(&cli)) {
        Ok(outcome) => match outcome.text.as_deref().map_or(Ok(()), |t| emit(&cli.global, t)) {
            Ok(()) => ExitCode::from(outcome.code),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::IdentityViolation { .. } | Error::Inconsistent(_) => 3,
        _ => 2,
    }
}

fn emit(global: &GlobalArgs, text: &str) -> rrg_core::Result<()> {
    match &global.out {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn format_of(global: &GlobalArgs) -> OutputFormat {
    global.format.unwrap_or_default()
}

fn load_graph(args: &GraphArgs, seed: u64) -> rrg_core::Result<PermutationGraph> {
    match &args.graph {
        Some(path) => read_graph(path),
        None => sample_graph(args.n, args.d, seed),
    }
}

fn read_graph(path: &Path) -> rrg_core::Result<PermutationGraph> {
    let file: GraphFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    PermutationGraph::from_file(file)
}

/// `k,value` rows (or a JSON array of objects).
fn table(format: OutputFormat, key: &str, rows: &[(String, String)]) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = format!("{key},value\n");
            for (k, v) in rows {
                let _ = writeln!(out, "{k},{v}");
            }
            out
        }
        OutputFormat::Json => {
            let items: Vec<_> = rows
                .iter()
                .map(|(k, v)| {
                    let value: serde_json::Value = serde_json::from_str(v).unwrap_or_else(|_| json!(v));
                    json!({ key: k.parse::<u64>().map(|x| json!(x)).unwrap_or(json!(k)), "value": value })
                })
                .collect();
            pretty(&json!(items))
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn run(cli: &Cli) -> rrg_core::Result<Outcome> {
    let seed = cli.global.seed.unwrap_or(0);
    let format = format_of(&cli.global);
    match &cli.command {
        Command::Adk { d, k, method, table: as_table } => {
            let value = |d: usize, k: usize| -> rrg_core::Result<String> {
                if d == 0 || k == 0 {
                    return Err(Error::Config("need d >= 1 and k >= 1".into()));
                }
                Ok(match method {
                    AdkMethod::Closed => words::a_closed_form(d, k).to_string(),
                    AdkMethod::Ie => words::a_inclusion_exclusion(d, k).to_string(),
                    AdkMethod::Enum => words::enumerate_cyclically_reduced(d, k)?.len().to_string(),
                })
            };
            if !as_table {
                return Ok(Outcome::ok(format!("{}\n", value(*d, *k)?)));
            }
            let mut out = String::from("d,k,a\n");
            for dd in 1..=*d {
                for kk in 1..=*k {
                    let _ = writeln!(out, "{dd},{kk},{}", value(dd, kk)?);
                }
            }
            Ok(Outcome::ok(out))
        }
        Command::Sample { n, d } => {
            let g = sample_graph(*n, *d, seed)?;
            Ok(Outcome::ok(format!("{}\n", serde_json::to_string(&g.to_file())?)))
        }
        Command::Cycles { graph, r } => {
            let g = load_graph(graph, seed)?;
            let counts = count_cycles(&g, *r)?;
            let rows: Vec<_> = counts.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
            Ok(Outcome::ok(table(format, "k", &rows)))
        }
        Command::Cnbw { graph, r, method } => {
            let g = load_graph(graph, seed)?;
            let counts = count_cnbw(&g, *r, *method)?;
            let rows: Vec<_> = counts.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
            Ok(Outcome::ok(table(format, "k", &rows)))
        }
        Command::Spectrum { graph, emit } => {
            let g = load_graph(graph, seed)?;
            let spec = spectra::eigenvalues(&g.adjacency(), g.d())?;
            let scale = ((2 * g.d() - 1) as f64).sqrt();
            if let Some(path) = emit {
                let mut csv = String::from("i,eigenvalue,scaled\n");
                for (i, v) in spec.values().iter().enumerate() {
                    let _ = writeln!(csv, "{},{},{v}", i + 1, v * scale);
                }
                std::fs::write(path, csv)?;
            }
            let v = spec.values();
            let rows = vec![
                ("lambda1".to_string(), (v[0] * scale).to_string()),
                ("lambda2".to_string(), v.get(1).map_or(f64::NAN, |x| x * scale).to_string()),
                ("lambda_n".to_string(), (v[v.len() - 1] * scale).to_string()),
                ("max_nontrivial".to_string(), spectra::second_eigenvalue_of(&spec).to_string()),
                ("ramanujan".to_string(), (2.0 * scale).to_string()),
            ];
            Ok(Outcome::ok(table(format, "quantity", &rows)))
        }
        Command::Linstat { graph, function, k_max, mode, r, beta } => {
            let g = load_graph(graph, seed)?;
            let k_max = k_max.or(function.degree()).unwrap_or(10);
            let basis = match mode {
                LinStatMode::Fixed => Basis::Gamma { d: g.d() },
                LinStatMode::Growing => Basis::Phi,
            };
            let series = function.series(k_max, basis)?;
            let r = match (r, beta) {
                (Some(r), _) => *r,
                (None, Some(b)) => rn_rule(g.n(), g.d(), *b).map_err(|e| Error::Config(e.to_string()))?,
                (None, None) if *mode == LinStatMode::Growing => {
                    return Err(Error::Config("growing mode needs --r or --beta".into()))
                }
                (None, None) => k_max,
            };
            let spec = spectra::eigenvalues(&g.adjacency(), g.d())?;
            let result = chebyshev::linear_statistic(&spec, &series, *mode, r)?;
            let value = json!({
                "raw": result.raw,
                "centered": result.centered,
                "per_k_contributions": result.per_k_contributions,
                "mode": result.mode,
                "n": result.n,
                "d": result.d,
                "r": result.r,
            });
            Ok(Outcome::ok(pretty(&value)))
        }
        Command::Experiment(args) => {
            let cfg = args.resolve(&cli.global)?;
            run_report(&cfg, &cli.global)
        }
        Command::CouplingCheck { n, d, k, trials, exact } => {
            if *exact {
                let law = harness::coupling_exact_law(*n, &harness::loop_trail(0)?)?;
                let mut out = String::from("image,count\n");
                for (img, c) in &law.outcomes {
                    let one_based: Vec<String> = img.iter().map(|v| (v + 1).to_string()).collect();
                    let _ = writeln!(out, "{},{c}", one_based.join(" "));
                }
                let _ = writeln!(out, "# support {}, uniform {}", law.support, law.uniform);
                return Ok(Outcome { text: Some(out), code: if law.uniform { 0 } else { 3 } });
            }
            let cfg = ExperimentConfig {
                stat: Statistic::Coupling,
                n: *n,
                d: *d,
                cycle_length: *k,
                trials: *trials,
                seed,
                format,
                execution: Execution::Parallel,
                threads: cli.global.threads,
                ..Default::default()
            };
            run_report(&cfg, &cli.global)
        }
        Command::Discrepancy { graph, pairs, m } => {
            let g = load_graph(graph, seed)?;
            let mut stream = rng::substream(seed, 1);
            let sets = spectra::sample_pairs(g.n(), *pairs, &mut stream);
            let report = spectra::discrepancy_check(&g, &sets, *m)?;
            let text = match format {
                OutputFormat::Csv => {
                    let mut out = String::from("size_a,size_b,edges,mu,outcome\n");
                    for r in &report.records {
                        let outcome = serde_json::to_value(r.outcome)?;
                        let _ = writeln!(out, "{},{},{},{},{}", r.size_a, r.size_b, r.edges, r.mu, outcome.as_str().unwrap_or(""));
                    }
                    out
                }
                OutputFormat::Json => pretty(&serde_json::to_value(&report)?),
            };
            let violations = report.violations();
            if violations > 0 {
                eprintln!("{violations} pairs violate the discrepancy property");
            }
            Ok(Outcome { text: Some(text), code: if violations > 0 { 3 } else { 0 } })
        }
    }
}

fn run_report(cfg: &ExperimentConfig, global: &GlobalArgs) -> rrg_core::Result<Outcome> {
    let report = harness::run_experiment(cfg)?;
    for a in report.hard_failures() {
        eprintln!("assertion failed: {}: {}", a.name, a.detail);
    }
    for p in &report.points {
        if p.partial_failure() {
            eprintln!("{} of {} trials failed at n={}, d={}", p.failures.len(), p.trials, p.n, p.d);
        }
    }
    let code = report.exit_code() as u8;
    let text = match (&global.out, cfg.format) {
        (Some(path), format) => {
            report.write(path, format)?;
            None
        }
        (None, OutputFormat::Json) => Some(report.to_json()),
        (None, OutputFormat::Csv) => Some(format!("{}\n{}", report.trials_csv(), report.aggregate_csv())),
    };
    Ok(Outcome { text, code })
}
