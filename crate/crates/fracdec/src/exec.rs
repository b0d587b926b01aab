//! Command dispatch: one [`ExperimentConfig`] in, artifacts and an exit
//! status out.

use std::path::PathBuf;
use std::sync::Arc;

use fracdec_core::calculus::{almost_to_full, fix_packing};
use fracdec_core::hypercore::unrank_edge;
use fracdec_core::lporacle::{
    build_feasibility_lp, feasible_with, orbit_reduce, verify_certificate, Certificate, LPInstance, LpBudget,
    OrbitSignature,
};
use fracdec_core::matchdist::{decompose_minus_matchings, deficiency_report, MatchingSettings};
use fracdec_core::orchestrator::{main_parameters_with, pipeline, PipelineSettings, Strategy, DEFAULT_VACUITY_BUDGET};
use fracdec_core::rational::{ratio, to_f64, to_fraction_string};
use fracdec_core::sampler::{family_deficiency_exact, tail_bound, uniform_family_packing, MC_GENERATOR};
use fracdec_core::symdecomp::{build_matrix, missing_edge_packing, solve_weights};
use fracdec_core::{BoundaryReport, ExplicitPacking, Hypergraph, Matching, Rational, VertexSet};
use num_traits::Zero;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Resolved};
use crate::error::{kind_code, CliError, CliResult, EXIT_OK, EXIT_PRECONDITION};
use crate::formats::{boundary_csv, parse_matchings, rational_json, to_json_text, Meta, PackingFile};
use crate::par;

pub const COMMANDS: &[&str] = &[
    "solve-missing-edge",
    "fix",
    "almost-to-full",
    "matching",
    "sample",
    "lp",
    "params",
    "pipeline",
    "verify",
];

const DETERMINISTIC: &str = "none (deterministic)";
const MAX_LISTED_VIOLATIONS: usize = 64;

/// Resource settings that never change results, only whether a run fits.
#[derive(Clone, Debug)]
pub struct Runtime {
    pub workers: Option<usize>,
    pub lp_budget: LpBudget,
    pub materialize_limit: usize,
}

impl Default for Runtime {
    fn default() -> Self {
        Runtime {
            workers: None,
            lp_budget: LpBudget::default(),
            materialize_limit: fracdec_core::DEFAULT_MATERIALIZE_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Artifact {
    Json(String),
    Csv(String),
}

impl Artifact {
    pub fn text(&self) -> &str {
        match self {
            Artifact::Json(s) | Artifact::Csv(s) => s,
        }
    }
}

/// What a run produced. `artifacts` is sorted by name.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: u8,
    pub artifacts: Vec<(String, Artifact)>,
}

impl Outcome {
    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    resolved: Resolved,
    digest: String,
    rt: &'a Runtime,
    generator: &'static str,
    artifacts: Vec<(String, Artifact)>,
}

impl Ctx<'_> {
    fn meta(&self) -> Meta {
        Meta {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.cfg.command.clone(),
            config_digest: self.digest.clone(),
            seed: self.cfg.seed,
            generator: self.generator.into(),
        }
    }

    fn json(&mut self, name: &str, mut body: Value) {
        body["meta"] = serde_json::to_value(self.meta()).expect("meta serializes");
        self.artifacts.push((name.into(), Artifact::Json(to_json_text(&body))));
    }

    fn packing(&mut self, name: &str, p: &ExplicitPacking) {
        let file = PackingFile::from_packing(p, self.meta());
        self.artifacts.push((name.into(), Artifact::Json(to_json_text(&file))));
    }

    /// CSV with the provenance as leading `#` comment lines.
    fn csv(&mut self, name: &str, body: String) {
        let m = self.meta();
        let seed = m.seed.map_or("none".to_string(), |s| s.to_string());
        let head = format!(
            "# tool={} version={} command={} config_digest={} seed={} generator={}\n",
            m.tool, m.version, m.command, m.config_digest, seed, m.generator
        );
        self.artifacts.push((name.into(), Artifact::Csv(head + &body)));
    }

    fn graph(&self) -> CliResult<Hypergraph> {
        match &self.resolved.graph {
            Some(g) => g.build(),
            None => Err(CliError::usage(format!("{} needs an input graph", self.cfg.command))),
        }
    }

    fn wants(&self, name: &str) -> bool {
        self.cfg.output_paths.contains_key(name)
    }
}

/// Runs one configuration. Failures that come with a report (deficiency,
/// infeasibility, failed validation, pipeline stage failures) return
/// `Ok` with a nonzero exit code; other failures return `Err`.
pub fn run(cfg: &ExperimentConfig, rt: &Runtime) -> CliResult<Outcome> {
    if !COMMANDS.contains(&cfg.command.as_str()) {
        return Err(CliError::usage(format!(
            "unknown command {:?}; expected one of {}",
            cfg.command,
            COMMANDS.join(", ")
        )));
    }
    for name in cfg.output_paths.keys() {
        if !["report", "packing", "certificate", "csv"].contains(&name.as_str()) {
            return Err(CliError::usage(format!("unknown artifact {name:?}")));
        }
    }
    let resolved = cfg.resolve()?;
    let digest = cfg.digest(&resolved);
    let mut ctx = Ctx {
        cfg,
        resolved,
        digest,
        rt,
        generator: DETERMINISTIC,
        artifacts: Vec::new(),
    };
    let mut body = || -> CliResult<u8> {
        match cfg.command.as_str() {
            "solve-missing-edge" => solve_missing_edge(&mut ctx),
            "fix" => fix(&mut ctx),
            "almost-to-full" => almost_to_full_cmd(&mut ctx),
            "matching" => matching(&mut ctx),
            "sample" => sample(&mut ctx),
            "lp" => lp(&mut ctx),
            "params" => params(&mut ctx),
            "pipeline" => pipeline_cmd(&mut ctx),
            "verify" => verify(&mut ctx),
            _ => unreachable!("command list checked above"),
        }
    };
    let exit_code = match rt.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::usage(format!("cannot start {w} workers: {e}")))?
            .install(body)?,
        None => body()?,
    };
    let mut artifacts = ctx.artifacts;
    artifacts.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(Outcome { exit_code, artifacts })
}

/// Writes the artifacts named in `output_paths`; returns the report when it
/// has no destination.
pub fn write_outcome(cfg: &ExperimentConfig, out: &Outcome) -> CliResult<Option<String>> {
    let mut stdout = None;
    for (name, art) in &out.artifacts {
        match cfg.output_paths.get(name) {
            Some(path) => write_file(path, art.text())?,
            None if name == "report" => stdout = Some(art.text().to_string()),
            None => {}
        }
    }
    Ok(stdout)
}

fn write_file(path: &PathBuf, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })
}

fn validation_json(host: &Hypergraph, rep: &BoundaryReport) -> Value {
    let violations: Vec<Value> = rep
        .violations
        .iter()
        .take(MAX_LISTED_VIOLATIONS)
        .map(|&rank| {
            let edge = unrank_edge(host.n(), host.r(), rank).expect("host rank");
            let i = host.edge_index(rank).expect("host rank");
            json!({ "rank": rank, "edge": edge.as_slice(), "boundary": rational_json(&rep.per_edge[i].1) })
        })
        .collect();
    let worst = rep.worst_edge().map(|rank| {
        let edge = unrank_edge(host.n(), host.r(), rank).expect("host rank");
        json!({ "rank": rank, "edge": edge.as_slice() })
    });
    json!({
        "pass": rep.pass,
        "tolerance": rational_json(&rep.tolerance),
        "min_boundary": rational_json(&rep.min_boundary),
        "max_boundary": rational_json(&rep.max_boundary),
        "eta": rational_json(&rep.eta),
        "worst_edge": worst,
        "violation_count": rep.violations.len(),
        "violations": violations,
    })
}

fn packing_summary(p: &ExplicitPacking) -> Value {
    json!({
        "support": p.len(),
        "total_weight": rational_json(&p.total_weight()),
        "family": crate::formats::FamilySpec::from(fracdec_core::PackingView::family(p)),
        "host": { "n": p.host_arc().n(), "r": p.host_arc().r(), "edges": p.host_arc().edge_count() },
    })
}

/// Validates at `eta = 0`, records the packing and returns the validation.
fn emit_exact(ctx: &mut Ctx<'_>, p: &ExplicitPacking) -> (u8, Value) {
    let rep = par::validate(p, &Rational::zero());
    if ctx.wants("packing") {
        ctx.packing("packing", p);
    }
    if ctx.wants("csv") {
        if let Ok(text) = boundary_csv(&rep.per_edge) {
            ctx.csv("csv", text);
        }
    }
    let code = if rep.pass { EXIT_OK } else { EXIT_PRECONDITION };
    (code, validation_json(p.host_arc(), &rep))
}

fn error_json(e: &fracdec_core::Error) -> Value {
    let mut v = json!({ "message": e.to_string(), "exit_code": kind_code(e.kind()) });
    if let fracdec_core::Error::Deficiency {
        depth,
        max_eta,
        threshold,
        witness,
    } = e
    {
        v["deficiency"] = json!({
            "depth": depth,
            "max_eta": rational_json(max_eta),
            "threshold": rational_json(threshold),
            "witness": witness,
        });
    }
    v
}

/// Turns a core error into a reported failure when it is a precondition;
/// other kinds propagate.
fn reported<T>(ctx: &mut Ctx<'_>, r: fracdec_core::Result<T>, mut report: Value) -> CliResult<Result<T, u8>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e) if kind_code(e.kind()) == EXIT_PRECONDITION => {
            report["status"] = json!("failed");
            report["error"] = error_json(&e);
            ctx.json("report", report);
            Ok(Err(EXIT_PRECONDITION))
        }
        Err(e) => Err(e.into()),
    }
}

fn solve_missing_edge(ctx: &mut Ctx<'_>) -> CliResult<u8> {
    let p = ctx.cfg.params();
    p.only(&["r", "q"])?;
    let (r, q) = (p.usize("r")?, p.usize("q")?);
    let w = solve_weights(q, r)?;
    let a = build_matrix(q, r)?;
    let matrix: Vec<Vec<String>> =
        a.a.iter()
            .map(|row| row.iter().map(u128::to_string).collect())
            .collect();
    let mut report = json!({
        "status": "ok",
        "r": r,
        "q": q,
        "n": r * q,
        "weights": w.0.iter().map(rational_json).collect::<Vec<_>>(),
        "matrix": matrix,
    });
    let mut code = EXIT_OK;
    if ctx.wants("packing") || ctx.wants("csv") {
        let e = VertexSet::new((0..r).collect())?;
        let packing = missing_edge_packing(q, r, &e)?.expand();
        let (c, validation) = emit_exact(ctx, &packing);
        report["missing_edge"] = json!(e.as_slice());
        report["packing"] = packing_summary(&packing);
        report["validation"] = validation;
        code = c;
    }
    ctx.json("report", report);
    Ok(code)
}

fn fix(ctx: &mut Ctx<'_>) -> CliResult<u8> {
    let p = ctx.cfg.params();
    p.only(&["r", "q", "targets", "target"])?;
    let (r, q) = (p.usize("r")?, p.usize("q")?);
    let edges = Hypergraph::complete(r * q, r)?.edge_count();
    let targets: Vec<Rational> = match (p.opt_as::<Vec<Value>>("targets")?, p.opt_rational("target")?) {
        (Some(list), None) => list
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(fracdec_core::rational::parse_rational(s)?),
                other => Err(CliError::usage(format!("target {other} is not a \"p/q\" string"))),
            })
            .collect::<CliResult<_>>()?,
        (None, Some(t)) => vec![t; edges],
        _ => return Err(CliError::usage("fix needs exactly one of \"targets\" or \"target\"")),
    };
    let mut report = json!({ "r": r, "q": q, "edges": edges });
    let packing = match reported(ctx, fix_packing(&targets, q, r), report.clone())? {
        Ok(p) => p,
        Err(code) => return Ok(code),
    };
    let values = par::boundary_all(&packing);
    let matches = values == targets;
    if ctx.wants("packing") {
        ctx.packing("packing", &packing);
    }
    if ctx.wants("csv") {
        let per_edge: Vec<(u64, Rational)> = packing.host_arc().edge_ranks().iter().copied().zip(values).collect();
        ctx.csv("csv", boundary_csv(&per_edge)?);
    }
    report["status"] = json!(if matches { "ok" } else { "failed" });
    report["matches_targets"] = json!(matches);
    report["packing"] = packing_summary(&packing);
    ctx.json("report", report);
    Ok(if matches { EXIT_OK } else { EXIT_PRECONDITION })
}

fn input_packing(ctx: &Ctx<'_>) -> CliResult<ExplicitPacking> {
    match &ctx.resolved.packing {
        Some(f) => f.to_packing(),
        None => Err(CliError::usage(format!("{} needs an input packing", ctx.cfg.command))),
    }
}

fn almost_to_full_cmd(ctx: &mut Ctx<'_>) -> CliResult<u8> {
    let p = ctx.cfg.params();
    p.only(&["q"])?;
    let input = input_packing(ctx)?;
    let r = input.host_arc().r();
    let q = match (p.opt_usize("q")?, fracdec_core::PackingView::family(&input)) {
        (Some(q), _) => q,
        (None, fracdec_core::Family::Clique { q: big }) if big % r == 0 => big / r,
        (None, f) => return Err(CliError::usage(format!("cannot infer q from family {f:?}; pass q"))),
    };
    let report = json!({ "r": r, "q": q, "input": packing_summary(&input) });
    let out = match reported(
        ctx,
        almost_to_full(&input, q, r, ctx.rt.materialize_limit),
        report.clone(),
    )? {
        Ok(p) => p,
        Err(code) => return Ok(code),
    };
    let (code, validation) = emit_exact(ctx, &out);
    let mut report = report;
    report["status"] = json!(if code == EXIT_OK { "ok" } else { "failed" });
    report["packing"] = packing_summary(&out);
    report["validation"] = validation;
    ctx.json("report", report);
    Ok(code)
}

fn deficiency_json(rep: &fracdec_core::matchdist::DeficiencyReport) -> Value {
    json!({
        "pass": rep.pass,
        "max_eta": rational_json(&rep.max_eta),
        "threshold": rational_json(&rep.threshold),
        "witness": rep.witness.as_ref().map(|w| w.as_slice().to_vec()),
    })
}

fn matching(ctx: &mut Ctx<'_>) -> CliResult<u8> {
    let p = ctx.cfg.params();
    p.only(&["n", "r", "q", "p", "matchings", "deficiency_only"])?;
    let (n, r, q) = (p.usize("n")?, p.usize("r")?, p.usize("q")?);
    let prob = p.opt_rational("p")?.unwrap_or_else(|| ratio(1, 2));
    let raw: Vec<Vec<Vec<usize>>> = p.opt_as("matchings")?.unwrap_or_default();
    let ms = parse_matchings(n, r, &raw)?;
    let deficiency_only = p.opt_bool("deficiency_only")?.unwrap_or(false);
    let mut report = json!({
        "n": n, "r": r, "q": q, "p": rational_json(&prob), "matchings": ms.len(),
    });
    if deficiency_only {
        let [m] = ms.as_slice() else {
            return Err(CliError::usage("deficiency-only mode needs exactly one matching"));
        };
        let rep = deficiency_report(n, r, q, m, &prob)?;
        if ctx.wants("csv") {
            ctx.csv("csv", boundary_csv(&rep.per_edge_eta)?);
        }
        report["status"] = json!(if rep.pass { "ok" } else { "failed" });
        report["deficiency"] = deficiency_json(&rep);
        ctx.json("report", report);
        return Ok(if rep.pass { EXIT_OK } else { EXIT_PRECONDITION });
    }
    if let [m] = ms.as_slice() {
        report["deficiency"] = deficiency_json(&deficiency_report(n, r, q, m, &prob)?);
    }
    let settings = MatchingSettings {
        p: prob,
        limit: ctx.rt.materialize_limit,
    };
    let packing = match reported(ctx, decompose_minus_matchings(n, r, q, &ms, &settings), report.clone())? {
        Ok(p) => p,
        Err(code) => return Ok(code),
    };
    let (code, validation) = emit_exact(ctx, &packing);
    report["status"] = json!(if code == EXIT_OK { "ok" } else { "failed" });
    report["packing"] = packing_summary(&packing);
    report["validation"] = validation;
    ctx.json("report", report);
    Ok(code)
}

fn parse_edge(g: &Hypergraph, raw: &[usize]) -> CliResult<VertexSet> {
    let e = VertexSet::new(raw.to_vec())?;
    if !g.contains(&e) {
        return Err(fracdec_core::Error::NotAnEdge(e.into_vec()).into());
    }
    Ok(e)
}

fn sample(ctx: &mut Ctx<'_>) -> CliResult<u8> {
    let p = ctx.cfg.params();
    p.only(&["k", "m", "edge", "mc", "d", "s", "q"])?;
    let g = ctx.graph()?;
    let (k, m) = (p.usize("k")?, p.usize("m")?);
    let fam = uniform_family_packing(&g, k, m)?;
    let limit = ctx.rt.materialize_limit;
    let mut report = json!({ "status": "ok", "n": g.n(), "r": g.r(), "k": k, "m": m });
    let edge: Option<Vec<usize>> = p.opt_as("edge")?;
    let mc = p.opt_u64("mc")?;
    match edge {
        Some(raw) => {
            let e = parse_edge(&g, &raw)?;
            report["edge"] = json!(e.as_slice());
            report["exact"] = match family_deficiency_exact(&fam, &e, limit) {
                Ok(v) => rational_json(&v),
                Err(err) if kind_code(err.kind()) == crate::error::EXIT_BUDGET => Value::Null,
                Err(err) => return Err(err.into()),
            };
            if let Some(samples) = mc {
                if samples == 0 {
                    return Err(CliError::usage("mc needs at least one sample"));
                }
                ctx.generator = MC_GENERATOR;
                let est = par::family_deficiency_mc(&fam, &e, samples, ctx.cfg.seed.unwrap_or(0));
                report["mc"] = json!({
                    "samples": est.samples,
                    "misses": est.misses,
                    "estimate": est.estimate,
                    "std_error": est.std_error,
                    "seed": est.seed,
                    "generator": est.generator,
                });
            }
        }
        None => {
            if mc.is_some() {
                return Err(CliError::usage("mc needs an edge"));
            }
            let mut worst: Option<(Rational, VertexSet)> = None;
            for e in g.edges() {
                let eta = family_deficiency_exact(&fam, &e, limit)?;
                if worst.as_ref().map_or(true, |(w, _)| eta > *w) {
                    worst = Some((eta, e));
                }
            }
            if let Some((eta, e)) = worst {
                report["max_eta"] = rational_json(&eta);
                report["witness"] = json!(e.as_slice());
                if let Some(q) = p.opt_usize("q")? {
                    let threshold = fracdec_core::rational::binom_q((g.r() * q) as i64, g.r() as i64).recip();
                    report["threshold"] = rational_json(&threshold);
                    report["within_threshold"] = json!(eta <= threshold);
                }
            }
        }
    }
    if let (Some(d), Some(s)) = (p.opt_rational("d")?, p.opt_usize("s")?) {
        let t = tail_bound(g.n(), g.r(), k, m, to_f64(&d), s)?;
        report["tail_bound"] = json!({
            "s": t.s,
            "good": t.good,
            "pool": t.pool.to_string(),
            "terms": t.terms.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "ratio": rational_json(&t.ratio),
            "r2_bound": t.r2_bound,
            "power_bound": t.power_bound,
            "log_simplified": t.log_simplified,
            "simplified_bound": t.simplified_bound,
            "per_edge_bound": t.per_edge_bound,
            "precondition": t.precondition,
        });
    }
    ctx.json("report", report);
    Ok(EXIT_OK)
}

fn complement_matching(g: &Hypergraph) -> CliResult<Matching> {
    let edges = g.complement().edges().map(VertexSet::into_vec).collect();
    Matching::new(g.n(), g.r(), edges)
        .map_err(|e| CliError::usage(format!("matching orbits need a complement that is a matching: {e}")))
}

fn certificate_json(l: &LPInstance, c: &Certificate) -> Value {
    let nonzero = |keys: &[Vec<usize>], vals: &[Rational], key: &str, val: &str| -> Vec<Value> {
        keys.iter()
            .zip(vals)
            .filter(|(_, v)| !v.is_zero())
            .map(|(k, v)| json!({ key: k, val: to_fraction_string(v) }))
            .collect()
    };
    match c {
        Certificate::Feasible { x } => json!({
            "kind": "feasible",
            "x": nonzero(&l.col_keys, x, "clique", "weight"),
        }),
        Certificate::Infeasible { y } => json!({
            "kind": "infeasible",
            "y": nonzero(&l.row_keys, y, "edge", "value"),
        }),
    }
}

fn lp(ctx: &mut Ctx<'_>) -> CliResult<u8> {
    let p = ctx.cfg.params();
    p.only(&["q", "orbit"])?;
    let g = ctx.graph()?;
    let q = p.usize("q")?;
    let orbit = p.opt_str("orbit")?.unwrap_or("none");
    let l = build_feasibility_lp(&g, q)?;
    let budget = ctx.rt.lp_budget;
    let mut report = json!({ "q": q, "rows": l.rows(), "cols": l.cols(), "orbit": orbit });
    let (cert, pivots) = match orbit {
        "none" => {
            let s = feasible_with(&l, &budget)?;
            (s.certificate, s.pivots)
        }
        "edge" | "matching" => {
            let sig = if orbit == "edge" {
                let missing: Vec<VertexSet> = g.complement().edges().collect();
                let [e] = missing.as_slice() else {
                    return Err(CliError::usage(format!(
                        "edge orbits need exactly one missing edge, found {}",
                        missing.len()
                    )));
                };
                OrbitSignature::edge(e)
            } else {
                OrbitSignature::matching(&complement_matching(&g)?)
            };
            let red = orbit_reduce(&l, &sig)?;
            report["reduced_rows"] = json!(red.instance.rows());
            report["reduced_cols"] = json!(red.instance.cols());
            let s = feasible_with(&red.instance, &budget)?;
            (red.expand(&s.certificate)?, s.pivots)
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown orbit {other:?}; expected none, edge or matching"
            )))
        }
    };
    let verified = verify_certificate(&l, &cert)?;
    if !verified {
        return Err(fracdec_core::Error::Internal("certificate failed verification".into()).into());
    }
    report["feasible"] = json!(cert.is_feasible());
    report["pivots"] = json!(pivots);
    report["verified"] = json!(verified);
    report["status"] = json!(if cert.is_feasible() { "ok" } else { "failed" });
    ctx.json("certificate", certificate_json(&l, &cert));
    ctx.json("report", report);
    Ok(if cert.is_feasible() { EXIT_OK } else { EXIT_PRECONDITION })
}

fn params(ctx: &mut Ctx<'_>) -> CliResult<u8> {
    let p = ctx.cfg.params();
    p.only(&["r", "eps", "q", "vacuity_budget"])?;
    let (r, q) = (p.usize("r")?, p.usize("q")?);
    let eps = p.rational("eps")?;
    let budget = p.opt_u64("vacuity_budget")?.unwrap_or(DEFAULT_VACUITY_BUDGET);
    let rep = main_parameters_with(r, &eps, q, budget)?;
    let checks: Vec<Value> = rep
        .checks
        .iter()
        .map(|c| json!({ "name": c.name, "lhs": c.lhs, "rhs": c.rhs, "holds": c.holds }))
        .collect();
    let report = json!({
        "status": "ok",
        "r": rep.r,
        "epsilon": rational_json(&rep.epsilon),
        "q": rep.q,
        "c": rep.c,
        "m": rep.m.to_string(),
        "exponent": rep.exponent,
        "beta_log2": rep.beta_log2,
        "ln_alpha": rep.ln_alpha,
        "k": rep.k.as_ref().map(ToString::to_string),
        "ln_k": rep.ln_k,
        "ln_d": rep.ln_d,
        "ln_final_bound": rep.ln_final_bound,
        "ln_target": rep.ln_target,
        "checks": checks,
        "all_hold": rep.all_hold(),
        "vacuity_budget": rep.vacuity_budget,
        "vacuous": rep.vacuous,
    });
    ctx.json("report", report);
    Ok(EXIT_OK)
}

fn pipeline_cmd(ctx: &mut Ctx<'_>) -> CliResult<u8> {
    let p = ctx.cfg.params();
    p.only(&[
        "q",
        "strategy",
        "k",
        "m",
        "eps",
        "p",
        "direct_when_exact",
        "vacuity_budget",
    ])?;
    let g = ctx.graph()?;
    let q = p.usize("q")?;
    let strategy = match p.opt_str("strategy")?.unwrap_or("empirical") {
        "empirical" => Strategy::Empirical {
            k: p.usize("k")?,
            m: p.usize("m")?,
        },
        "lp" => Strategy::LpFallback {
            k: p.usize("k")?,
            m: p.usize("m")?,
        },
        "analytic" => Strategy::Analytic {
            epsilon: p.rational("eps")?,
        },
        other => {
            return Err(CliError::usage(format!(
                "unknown strategy {other:?}; expected empirical, lp or analytic"
            )))
        }
    };
    let settings = PipelineSettings {
        matching: MatchingSettings {
            p: p.opt_rational("p")?.unwrap_or_else(|| ratio(1, 2)),
            limit: ctx.rt.materialize_limit,
        },
        lp_budget: ctx.rt.lp_budget,
        limit: ctx.rt.materialize_limit,
        vacuity_budget: p.opt_u64("vacuity_budget")?.unwrap_or(DEFAULT_VACUITY_BUDGET),
        direct_when_exact: p.opt_bool("direct_when_exact")?.unwrap_or(true),
    };
    let rep = pipeline(&g, q, &strategy, &settings);
    let stages: Vec<Value> = rep
        .stages
        .iter()
        .map(|s| json!({ "stage": s.stage.name(), "passed": s.passed, "detail": s.detail }))
        .collect();
    let mut report = json!({
        "q": q,
        "strategy": format!("{:?}", rep.strategy),
        "stages": stages,
        "family_eta": rep.family_eta.as_ref().map(rational_json),
        "pieces": rep.pieces,
        "distinct_pieces": rep.distinct_pieces,
        "max_matchings": rep.max_matchings,
        "inner_clique_size": rep.inner_clique_size,
    });
    let code = match &rep.outcome {
        Ok(packing) => {
            let (code, validation) = emit_exact(ctx, packing);
            report["status"] = json!(if code == EXIT_OK { "ok" } else { "failed" });
            report["packing"] = packing_summary(packing);
            report["validation"] = validation;
            code
        }
        Err((stage, e)) => {
            report["status"] = json!("failed");
            report["failed_stage"] = json!(stage.name());
            report["error"] = error_json(e);
            kind_code(e.kind())
        }
    };
    ctx.json("report", report);
    Ok(code)
}

fn verify(ctx: &mut Ctx<'_>) -> CliResult<u8> {
    let p = ctx.cfg.params();
    p.only(&["eta"])?;
    let eta = p.opt_rational("eta")?.unwrap_or_else(Rational::zero);
    let packing = input_packing(ctx)?;
    if ctx.resolved.graph.is_some() {
        let g = ctx.graph()?;
        if g != **packing.host_arc() {
            return Err(CliError::usage("the packing's host differs from the given graph"));
        }
    }
    let rep = par::validate(&packing, &eta);
    if ctx.wants("csv") {
        ctx.csv("csv", boundary_csv(&rep.per_edge)?);
    }
    let host = Arc::clone(packing.host_arc());
    let mut report = json!({ "packing": packing_summary(&packing), "validation": validation_json(&host, &rep) });
    report["status"] = json!(if rep.pass { "pass" } else { "fail" });
    ctx.json("report", report);
    Ok(if rep.pass { EXIT_OK } else { EXIT_PRECONDITION })
}
