use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use fracdec::config::{ExperimentConfig, GraphSource};
use fracdec::error::{CliError, CliResult, EXIT_INVALID};
use fracdec::formats::{read_json, to_json_text};
use fracdec::{run, write_outcome, Runtime};
use fracdec_core::lporacle::LpBudget;

/// Exact fractional clique decompositions of uniform hypergraphs.
///
/// Exit status: 0 success, 1 invalid input, 2 precondition or deficiency
/// failure (the report says why), 3 resource budget exceeded, 4 internal.
#[derive(Parser, Debug)]
#[command(name = "fracdec", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Simplex pivot budget.
    #[arg(long, global = true)]
    budget_pivots: Option<u64>,
    /// Largest LP, in columns, the oracle will attempt.
    #[arg(long, global = true)]
    budget_columns: Option<usize>,
    /// Largest support a packing may materialize.
    #[arg(long, global = true)]
    materialize_limit: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Write per-edge exact values as `edge_rank,numerator,denominator`.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Save the configuration this invocation runs, for `run --config`.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Weights of the symmetric decomposition of `K_{rq}^r - e`.
    SolveMissingEdge {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        q: usize,
        /// Write the expanded clique packing here.
        #[arg(long)]
        expand: Option<PathBuf>,
    },
    /// Packing of `K_{rq}^r` with prescribed boundary values.
    Fix {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        q: usize,
        /// JSON array of `"p/q"` targets in edge rank order.
        #[arg(long, conflicts_with = "target")]
        targets: Option<PathBuf>,
        /// One target for every edge.
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact `q`-clique decomposition from an almost `rq`-clique one.
    AlmostToFull {
        #[arg(long)]
        packing: PathBuf,
        /// Defaults to the family clique size divided by `r`.
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decomposition of `K_n^r` minus a union of matchings.
    Matching {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        q: usize,
        /// JSON file with one matching (list of edges) or a list of them.
        /// May be repeated.
        #[arg(long = "matching")]
        matchings: Vec<PathBuf>,
        /// Keep probability `a/b`.
        #[arg(long)]
        p: Option<String>,
        /// Only report the exact deficiency of each edge.
        #[arg(long)]
        deficiency_only: bool,
        #[arg(long)]
        expand: Option<PathBuf>,
    },
    /// Deficiency of the uniform `k`-set family.
    Sample {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: usize,
        /// Comma separated vertices of one edge.
        #[arg(long)]
        edge: Option<String>,
        /// Monte Carlo sample count at `--edge`.
        #[arg(long)]
        mc: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Clique size for the threshold comparison.
        #[arg(long)]
        q: Option<usize>,
        /// Density `a/b` for the tail bound, together with `--s`.
        #[arg(long, requires = "s")]
        d: Option<String>,
        #[arg(long, requires = "d")]
        s: Option<usize>,
    },
    /// Exact LP feasibility of a `q`-clique decomposition.
    Lp {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        q: usize,
        /// Symmetry used to shrink the LP: none, edge or matching.
        #[arg(long, default_value = "none")]
        orbit: String,
        #[arg(long)]
        emit_certificate: Option<PathBuf>,
    },
    /// Constants for a target `epsilon`.
    Params {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        vacuity_budget: Option<u64>,
    },
    /// End-to-end decomposition of a dense graph.
    Pipeline {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        q: usize,
        /// empirical, lp or analytic.
        #[arg(long, default_value = "empirical")]
        strategy: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-validate a packing against its host graph.
    Verify {
        #[arg(long)]
        packing: PathBuf,
        /// Must equal the packing's host when given.
        #[arg(long)]
        graph: Option<String>,
        /// Allowed deficiency `a/b`; 0 demands an exact decomposition.
        #[arg(long)]
        eta: Option<String>,
    },
    /// Run a saved configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn graph_source(arg: &str) -> CliResult<GraphSource> {
    if arg.trim_start().starts_with('{') {
        let spec = serde_json::from_str(arg).map_err(|source| CliError::Json {
            context: "inline graph".into(),
            source,
        })?;
        Ok(GraphSource::Inline(spec))
    } else {
        Ok(GraphSource::Path(arg.into()))
    }
}

/// One matching is a list of edges; a file may also hold a list of those.
fn read_matchings(paths: &[PathBuf]) -> CliResult<Vec<Value>> {
    let mut out = Vec::new();
    for path in paths {
        let v: Value = read_json(path)?;
        let nested = v.get(0).and_then(|e| e.get(0)).is_some_and(Value::is_array);
        match v {
            Value::Array(list) if nested => out.extend(list),
            other => out.push(other),
        }
    }
    Ok(out)
}

fn parse_edge_arg(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad vertex {t:?} in --edge")))
        })
        .collect()
}

fn set(cfg: &mut ExperimentConfig, key: &str, v: impl Into<Value>) {
    cfg.parameters.insert(key.into(), v.into());
}

fn set_opt<T: Into<Value>>(cfg: &mut ExperimentConfig, key: &str, v: Option<T>) {
    if let Some(v) = v {
        set(cfg, key, v);
    }
}

fn output(cfg: &mut ExperimentConfig, name: &str, path: Option<PathBuf>) {
    if let Some(p) = path {
        cfg.output_paths.insert(name.into(), p);
    }
}

fn build_config(cmd: Command) -> CliResult<ExperimentConfig> {
    let mut cfg;
    match cmd {
        Command::Run { config } => return read_json(&config),
        Command::SolveMissingEdge { r, q, expand } => {
            cfg = ExperimentConfig::new("solve-missing-edge");
            set(&mut cfg, "r", r);
            set(&mut cfg, "q", q);
            output(&mut cfg, "packing", expand);
        }
        Command::Fix {
            r,
            q,
            targets,
            target,
            out,
        } => {
            cfg = ExperimentConfig::new("fix");
            set(&mut cfg, "r", r);
            set(&mut cfg, "q", q);
            if let Some(path) = targets {
                let list: Value = read_json(&path)?;
                set(&mut cfg, "targets", list);
            }
            set_opt(&mut cfg, "target", target);
            output(&mut cfg, "packing", out);
        }
        Command::AlmostToFull { packing, q, out } => {
            cfg = ExperimentConfig::new("almost-to-full");
            cfg.inputs.packing = Some(packing);
            set_opt(&mut cfg, "q", q);
            output(&mut cfg, "packing", out);
        }
        Command::Matching {
            n,
            r,
            q,
            matchings,
            p,
            deficiency_only,
            expand,
        } => {
            cfg = ExperimentConfig::new("matching");
            set(&mut cfg, "n", n);
            set(&mut cfg, "r", r);
            set(&mut cfg, "q", q);
            set(&mut cfg, "matchings", read_matchings(&matchings)?);
            set_opt(&mut cfg, "p", p);
            if deficiency_only {
                set(&mut cfg, "deficiency_only", true);
            }
            output(&mut cfg, "packing", expand);
        }
        Command::Sample {
            graph,
            k,
            m,
            edge,
            mc,
            seed,
            q,
            d,
            s,
        } => {
            cfg = ExperimentConfig::new("sample");
            cfg.inputs.graph = Some(graph_source(&graph)?);
            cfg.seed = seed;
            set(&mut cfg, "k", k);
            set(&mut cfg, "m", m);
            if let Some(e) = edge {
                set(&mut cfg, "edge", parse_edge_arg(&e)?);
            }
            set_opt(&mut cfg, "mc", mc);
            set_opt(&mut cfg, "q", q);
            set_opt(&mut cfg, "d", d);
            set_opt(&mut cfg, "s", s);
        }
        Command::Lp {
            graph,
            q,
            orbit,
            emit_certificate,
        } => {
            cfg = ExperimentConfig::new("lp");
            cfg.inputs.graph = Some(graph_source(&graph)?);
            set(&mut cfg, "q", q);
            set(&mut cfg, "orbit", orbit);
            output(&mut cfg, "certificate", emit_certificate);
        }
        Command::Params {
            r,
            eps,
            q,
            vacuity_budget,
        } => {
            cfg = ExperimentConfig::new("params");
            set(&mut cfg, "r", r);
            set(&mut cfg, "eps", eps);
            set(&mut cfg, "q", q);
            set_opt(&mut cfg, "vacuity_budget", vacuity_budget);
        }
        Command::Pipeline {
            graph,
            q,
            strategy,
            k,
            m,
            eps,
            p,
            out,
        } => {
            cfg = ExperimentConfig::new("pipeline");
            cfg.inputs.graph = Some(graph_source(&graph)?);
            set(&mut cfg, "q", q);
            set(&mut cfg, "strategy", strategy);
            set_opt(&mut cfg, "k", k);
            set_opt(&mut cfg, "m", m);
            set_opt(&mut cfg, "eps", eps);
            set_opt(&mut cfg, "p", p);
            output(&mut cfg, "packing", out);
        }
        Command::Verify { packing, graph, eta } => {
            cfg = ExperimentConfig::new("verify");
            cfg.inputs.packing = Some(packing);
            cfg.inputs.graph = graph.as_deref().map(graph_source).transpose()?;
            set_opt(&mut cfg, "eta", eta);
        }
    }
    Ok(cfg)
}

fn runtime(g: &Global) -> Runtime {
    let d = Runtime::default();
    Runtime {
        workers: g.workers,
        lp_budget: LpBudget {
            max_pivots: g.budget_pivots.unwrap_or(d.lp_budget.max_pivots),
            max_columns: g.budget_columns.unwrap_or(d.lp_budget.max_columns),
        },
        materialize_limit: g.materialize_limit.unwrap_or(d.materialize_limit),
    }
}

fn save(path: &Path, cfg: &ExperimentConfig) -> CliResult<()> {
    std::fs::write(path, to_json_text(cfg)).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn main_inner(cli: Cli) -> CliResult<u8> {
    let mut cfg = build_config(cli.command)?;
    output(&mut cfg, "report", cli.global.report.clone());
    output(&mut cfg, "csv", cli.global.csv.clone());
    if let Some(path) = &cli.global.save_config {
        save(path, &cfg)?;
    }
    let outcome = run(&cfg, &runtime(&cli.global))?;
    if let Some(report) = write_outcome(&cfg, &outcome)? {
        print!("{report}");
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_INVALID);
        }
    };
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
