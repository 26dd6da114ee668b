//! Named verification suites behind the driver's `verify` command.
//!
//! Each suite builds its spaces, measures its constants, asserts a fixed
//! list of facts, and hands back a deterministic result block ready for the
//! report envelope. Defaults are sized for quick runs; the knobs in
//! [`SuiteConfig`] scale everything up.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::covers::{boundary_cover_projection, cover_pullback_check, horoball_cover, ColoredCover};
use crate::embed::{
    compose_embedding, distortion_report, exact_ball_pairs, exact_domain_pairs, free_product_join,
    lower_bound_excess, restriction_check,
};
use crate::error::{RelhypError, Result};
use crate::graph::{cycle_graph, path_graph, WeightedGraph};
use crate::groups::{configured_cap, parse_spec_text, Ball, CosetTable, PeripheralMode, RelHypSpec};
use crate::hnn::{build_partition, dr_disjointness, dual_graph, lipschitz_audit, tech1_scan, HnnBall, HnnSpec, StableAction};
use crate::horoball::estimate_error_scan;
use crate::projections::{fit_distance_formula, verify_axioms, AuditLevel, ProjectionTable};
use crate::quasitree::{
    bottleneck_check, build_projection_complex, build_quasitree_of_spaces, coset_pieces,
    default_grid, sample_pairs, BottleneckReport,
};
use crate::report::{Report, Table};
use crate::words::{Alphabet, FactorSpec};

pub const SUITE_NAMES: [&str; 7] = [
    "horoball",
    "axioms",
    "distform",
    "quasitree",
    "embed",
    "covers",
    "hnn",
];

/// Knobs shared by every suite. Unset fields take per-suite defaults and the
/// effective values are echoed into the run's config block.
#[derive(Debug, Clone, Default)]
pub struct SuiteConfig {
    /// A parsed spec file, when one was given on the command line.
    pub input: Option<SpecInput>,
    /// Raw text of that file, hashed into the report.
    pub input_text: Option<String>,
    pub radius: Option<u32>,
    pub depth: Option<u32>,
    pub cutoff_l: Option<f64>,
    pub threshold_k: Option<f64>,
    pub seed: Option<u64>,
}

/// What a spec file can describe: a group presentation or a bare base graph.
#[derive(Debug, Clone)]
pub enum SpecInput {
    Group(RelHypSpec),
    Graph { id: String, graph: WeightedGraph },
}

/// Parses either spec dialect; files opening with a `graph = ...` line are
/// base graphs, everything else goes through the group grammar.
pub fn parse_any_spec(text: &str) -> Result<SpecInput> {
    let first_key = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .and_then(|l| l.split('=').next())
        .map(str::trim);
    if first_key == Some("graph") {
        let (id, graph) = parse_graph_text(text)?;
        Ok(SpecInput::Graph { id, graph })
    } else {
        Ok(SpecInput::Group(parse_spec_text(text)?))
    }
}

/// Base-graph dialect: a single `graph = <kind> <n>` line with kind one of
/// `path` (n edges), `cycle` (n vertices) or `f2ball` (radius-n ball of the
/// rank-2 free group).
pub fn parse_graph_text(text: &str) -> Result<(String, WeightedGraph)> {
    let mut found = None;
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, val) = line.split_once('=').ok_or_else(|| {
            RelhypError::Parse(format!("expected `key = value`, got {line:?}"))
        })?;
        match key.trim() {
            "graph" => {
                let mut it = val.trim().split_whitespace();
                let kind = it
                    .next()
                    .ok_or_else(|| RelhypError::Parse("graph line needs a kind".into()))?;
                let arg: u32 = it
                    .next()
                    .ok_or_else(|| RelhypError::Parse(format!("graph kind {kind:?} needs a size")))?
                    .parse()
                    .map_err(|_| RelhypError::Parse(format!("bad graph size in {line:?}")))?;
                if it.next().is_some() {
                    return Err(RelhypError::Parse(format!("trailing tokens in {line:?}")));
                }
                found = Some(build_base_graph(kind, arg)?);
            }
            other => {
                return Err(RelhypError::Parse(format!(
                    "unknown key {other:?} in graph spec"
                )))
            }
        }
    }
    found.ok_or_else(|| RelhypError::Parse("graph spec needs a `graph = ...` line".into()))
}

fn build_base_graph(kind: &str, arg: u32) -> Result<(String, WeightedGraph)> {
    match kind {
        "path" => {
            if arg == 0 {
                return Err(RelhypError::Parse("path needs at least one edge".into()));
            }
            Ok((format!("path{arg}"), path_graph(arg as usize)))
        }
        "cycle" => {
            if arg < 3 {
                return Err(RelhypError::Parse("cycle needs at least 3 vertices".into()));
            }
            Ok((format!("cycle{arg}"), cycle_graph(arg as usize)))
        }
        "f2ball" => {
            let ab = Alphabet::new(vec![FactorSpec::Free(2)])?;
            let ball = Ball::build_raw(ab, arg, configured_cap())?;
            Ok((format!("f2ball{arg}"), ball.graph().clone()))
        }
        other => Err(RelhypError::Parse(format!("unknown graph kind {other:?}"))),
    }
}

/// Outcome of one suite: the pass verdict, the echoed configuration, the
/// bytes the content hash should cover, a JSON result block, an optional
/// residual table, and the first failing assertion with its witness.
#[derive(Debug)]
pub struct SuiteRun {
    pub name: &'static str,
    pub pass: bool,
    pub config: BTreeMap<String, String>,
    pub input: String,
    pub results: Value,
    pub table: Option<Table>,
    pub failure: Option<String>,
}

/// Ordered assertion list; the first failure keeps its witness.
struct Checks {
    items: Vec<(String, bool)>,
    failure: Option<String>,
}

impl Checks {
    fn new() -> Checks {
        Checks {
            items: Vec::new(),
            failure: None,
        }
    }

    fn check(&mut self, name: &str, ok: bool, witness: impl FnOnce() -> String) {
        if !ok && self.failure.is_none() {
            self.failure = Some(format!("{name}: {}", witness()));
        }
        self.items.push((name.to_string(), ok));
    }

    fn pass(&self) -> bool {
        self.items.iter().all(|(_, ok)| *ok)
    }

    fn to_value(&self) -> Value {
        Value::Object(
            self.items
                .iter()
                .map(|(k, v)| (k.clone(), Value::Bool(*v)))
                .collect(),
        )
    }
}

/// Wraps a finished run in the report envelope: the failure witness joins
/// the results, the suite name joins the config echo.
pub fn suite_report(run: SuiteRun) -> (Report, Option<Table>) {
    let mut results = run.results;
    if let Some(failure) = &run.failure {
        results["failure"] = Value::String(failure.clone());
    }
    let mut config = run.config;
    config.insert("suite".into(), run.name.into());
    let report = Report::new(
        format!("verify {}", run.name),
        config,
        run.input.as_bytes(),
        run.pass,
        results,
    );
    (report, run.table)
}

pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<SuiteRun> {
    match name {
        "horoball" => horoball_suite(cfg),
        "axioms" => axioms_suite(cfg),
        "distform" => distform_suite(cfg),
        "quasitree" => quasitree_suite(cfg),
        "embed" => embed_suite(cfg),
        "covers" => covers_suite(cfg),
        "hnn" => hnn_suite(cfg),
        other => Err(RelhypError::Parse(format!(
            "unknown suite {other:?}; expected one of {SUITE_NAMES:?}"
        ))),
    }
}

fn input_line(cfg: &SuiteConfig, builtin: &str) -> String {
    cfg.input_text
        .clone()
        .unwrap_or_else(|| format!("builtin:{builtin}"))
}

fn group_inputs(cfg: &SuiteConfig, defaults: &[&[FactorSpec]]) -> Result<Vec<RelHypSpec>> {
    match &cfg.input {
        Some(SpecInput::Group(spec)) => Ok(vec![spec.clone()]),
        Some(SpecInput::Graph { id, .. }) => Err(RelhypError::InvalidSpec(format!(
            "this suite takes a group spec, not base graph {id:?}"
        ))),
        None => defaults
            .iter()
            .map(|fs| RelHypSpec::new(fs.to_vec(), PeripheralMode::AllFactors))
            .collect(),
    }
}

fn z1z1() -> &'static [FactorSpec] {
    &[FactorSpec::FreeAbelian(1), FactorSpec::FreeAbelian(1)]
}

fn z2z2() -> &'static [FactorSpec] {
    &[FactorSpec::FreeAbelian(2), FactorSpec::FreeAbelian(2)]
}

fn within_ratio(a: f64, b: f64, tol: f64) -> bool {
    a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 && a / b <= tol && b / a <= tol
}

/// Double-sweep diameter estimate; exact on trees, a lower bound elsewhere.
fn approx_diameter(g: &WeightedGraph) -> f64 {
    if g.vertex_count() == 0 {
        return 0.0;
    }
    let d0 = g.dijkstra(0);
    let far = d0
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i as u32)
        .unwrap_or(0);
    g.dijkstra(far)
        .into_iter()
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// horoball: estimate vs exact distance on combinatorial horoballs
// ---------------------------------------------------------------------------

fn horoball_suite(cfg: &SuiteConfig) -> Result<SuiteRun> {
    let depth = cfg.depth.unwrap_or(8);
    let deeper = depth + 4;
    let error_bound = 8.0;
    let graphs: Vec<(String, WeightedGraph)> = match &cfg.input {
        Some(SpecInput::Graph { id, graph }) => vec![(id.clone(), graph.clone())],
        Some(SpecInput::Group(spec)) => {
            return Err(RelhypError::InvalidSpec(format!(
                "horoball suite takes a base graph, not group {:?}",
                spec.id()
            )))
        }
        None => vec![
            build_base_graph("path", 20)?,
            build_base_graph("cycle", 12)?,
            build_base_graph("f2ball", 3)?,
        ],
    };
    let builtin = graphs.iter().map(|(id, _)| id.as_str()).collect::<Vec<_>>().join(",");

    let mut checks = Checks::new();
    let mut rows = Vec::new();
    let mut table = Table::new(&["graph", "depth", "pairs", "max_error"]);
    let mut overall = 0.0f64;
    for (id, g) in &graphs {
        let lo = estimate_error_scan(g, depth, id)?;
        let hi = estimate_error_scan(g, deeper, id)?;
        overall = overall.max(lo.max_error);
        let gap = (lo.max_error - hi.max_error).abs();
        checks.check(
            &format!("error within additive bound ({id})"),
            lo.max_error <= error_bound,
            || format!("max error {} at pair {:?}", lo.max_error, lo.argmax_pair),
        );
        checks.check(
            &format!("depth stability ({id})"),
            gap < 1.0,
            || format!("depth {depth} error {} vs depth {deeper} error {}", lo.max_error, hi.max_error),
        );
        table.push(vec![
            id.clone(),
            depth.to_string(),
            lo.pair_count.to_string(),
            crate::report::num(lo.max_error),
        ]);
        table.push(vec![
            id.clone(),
            deeper.to_string(),
            hi.pair_count.to_string(),
            crate::report::num(hi.max_error),
        ]);
        rows.push(json!({
            "graph": id,
            "scan": lo,
            "deeper_scan": hi,
            "gap": gap,
        }));
    }

    let mut config = BTreeMap::new();
    config.insert("depth".into(), depth.to_string());
    config.insert("deeper_depth".into(), deeper.to_string());
    config.insert("error_bound".into(), crate::report::num(error_bound));
    config.insert("cap".into(), configured_cap().to_string());
    Ok(SuiteRun {
        name: "horoball",
        pass: checks.pass(),
        config,
        input: input_line(cfg, &builtin),
        results: json!({
            "max_error": overall,
            "graphs": rows,
            "checks": checks.to_value(),
        }),
        table: Some(table),
        failure: checks.failure,
    })
}

// ---------------------------------------------------------------------------
// axioms: projection family audit at two radii
// ---------------------------------------------------------------------------

fn axioms_suite(cfg: &SuiteConfig) -> Result<SuiteRun> {
    let lo = cfg.radius.unwrap_or(4);
    let hi = lo + 2;
    let specs = group_inputs(cfg, &[z1z1(), z2z2()])?;
    let builtin = specs.iter().map(|s| s.id()).collect::<Vec<_>>().join(",");

    let mut checks = Checks::new();
    let mut rows = Vec::new();
    let mut table = Table::new(&["spec", "radius", "family", "xi0", "xi3", "max_witnesses"]);
    for spec in &specs {
        let id = spec.id();
        let mut reports = Vec::new();
        for r in [lo, hi] {
            let ball = Ball::build(spec, r, configured_cap())?;
            let cosets = CosetTable::build(spec, &ball);
            let tab = ProjectionTable::build(spec, &ball, &cosets, r / 2)?;
            let rep = verify_axioms(&tab, &ball, &cosets, AuditLevel::Exhaustive);
            table.push(vec![
                id.clone(),
                r.to_string(),
                rep.family_size.to_string(),
                crate::report::num(rep.xi0),
                crate::report::num(rep.xi3),
                rep.max_witness_count.to_string(),
            ]);
            reports.push(rep);
        }
        let (a, b) = (&reports[0], &reports[1]);
        checks.check(
            &format!("xi0 radius-stable ({id})"),
            (a.xi0 - b.xi0).abs() < 1e-9,
            || format!("xi0 {} at radius {lo} vs {} at {hi}", a.xi0, b.xi0),
        );
        checks.check(
            &format!("xi3 radius-stable ({id})"),
            (a.xi3 - b.xi3).abs() < 1e-9,
            || format!("xi3 {} at radius {lo} vs {} at {hi}", a.xi3, b.xi3),
        );
        checks.check(
            &format!("witness counts bounded ({id})"),
            a.count_bound_ok && b.count_bound_ok,
            || format!("max witnesses {} / {}", a.max_witness_count, b.max_witness_count),
        );
        rows.push(json!({ "spec": id, "lo": a, "hi": b }));
    }

    let mut config = BTreeMap::new();
    config.insert("radius".into(), lo.to_string());
    config.insert("hi_radius".into(), hi.to_string());
    config.insert("cap".into(), configured_cap().to_string());
    Ok(SuiteRun {
        name: "axioms",
        pass: checks.pass(),
        config,
        input: input_line(cfg, &builtin),
        results: json!({ "specs": rows, "checks": checks.to_value() }),
        table: Some(table),
        failure: checks.failure,
    })
}

// ---------------------------------------------------------------------------
// distform: distance formula fit at two radii
// ---------------------------------------------------------------------------

fn distform_suite(cfg: &SuiteConfig) -> Result<SuiteRun> {
    let lo = cfg.radius.unwrap_or(4);
    let hi = lo + 2;
    let cutoff = cfg.cutoff_l.unwrap_or(4.0);
    let specs = group_inputs(cfg, &[z1z1(), z2z2()])?;
    let builtin = specs.iter().map(|s| s.id()).collect::<Vec<_>>().join(",");

    let mut checks = Checks::new();
    let mut rows = Vec::new();
    let mut table = Table::new(&["spec", "radius", "word", "dist", "formula", "residual"]);
    for spec in &specs {
        let id = spec.id();
        let mut fits = Vec::new();
        for r in [lo, hi] {
            let ball = Ball::build(spec, r, configured_cap())?;
            let fit = fit_distance_formula(spec, &ball, cutoff)?;
            for row in &fit.worst {
                table.push(vec![
                    id.clone(),
                    r.to_string(),
                    row.word.clone(),
                    crate::report::num(row.dist),
                    crate::report::num(row.formula),
                    crate::report::num(row.residual),
                ]);
            }
            fits.push(fit);
        }
        let (a, b) = (&fits[0], &fits[1]);
        checks.check(
            &format!("constants finite ({id})"),
            a.lambda.is_finite() && a.mu.is_finite() && b.lambda.is_finite() && b.mu.is_finite(),
            || format!("fits ({}, {}) and ({}, {})", a.lambda, a.mu, b.lambda, b.mu),
        );
        checks.check(
            &format!("lambda radius-stable ({id})"),
            within_ratio(a.lambda, b.lambda, 1.1),
            || format!("lambda {} at radius {lo} vs {} at {hi}", a.lambda, b.lambda),
        );
        checks.check(
            &format!("mu growth bounded ({id})"),
            b.mu <= a.mu + 2.0 + 1e-9,
            || format!("mu {} at radius {lo} vs {} at {hi}", a.mu, b.mu),
        );
        rows.push(json!({ "spec": id, "lo": a, "hi": b }));
    }

    let mut config = BTreeMap::new();
    config.insert("radius".into(), lo.to_string());
    config.insert("hi_radius".into(), hi.to_string());
    config.insert("cutoff_l".into(), crate::report::num(cutoff));
    config.insert("cap".into(), configured_cap().to_string());
    Ok(SuiteRun {
        name: "distform",
        pass: checks.pass(),
        config,
        input: input_line(cfg, &builtin),
        results: json!({ "specs": rows, "checks": checks.to_value() }),
        table: Some(table),
        failure: checks.failure,
    })
}

// ---------------------------------------------------------------------------
// quasitree: bottleneck certification, with a raw-graph control mode
// ---------------------------------------------------------------------------

fn graph_bottleneck(g: &WeightedGraph, count: usize, seed: u64) -> BottleneckReport {
    let n = g.vertex_count();
    let max_pairs = n.saturating_mul(n.saturating_sub(1)) / 2;
    let pairs = sample_pairs(g, count.min(max_pairs), seed);
    let grid = default_grid(approx_diameter(g));
    bottleneck_check(g, &pairs, &grid)
}

fn quasitree_suite(cfg: &SuiteConfig) -> Result<SuiteRun> {
    let seed = cfg.seed.unwrap_or(7);
    let pair_count = 60;

    if let Some(SpecInput::Graph { id, graph }) = &cfg.input {
        // control mode: test the raw graph itself for bottlenecked geometry
        let threshold = cfg.threshold_k.unwrap_or(4.0);
        let rep = graph_bottleneck(graph, pair_count, seed);
        let mut checks = Checks::new();
        checks.check("every pair lands on the grid", rep.failures == 0, || {
            format!("{} pairs escaped, first {:?}", rep.failures, rep.witness)
        });
        checks.check(
            "bottleneck delta within threshold",
            rep.delta <= threshold,
            || format!("delta {} > {} at pair {:?}", rep.delta, threshold, rep.witness),
        );
        let mut config = BTreeMap::new();
        config.insert("mode".into(), "control".into());
        config.insert("threshold_k".into(), crate::report::num(threshold));
        config.insert("seed".into(), seed.to_string());
        config.insert("pairs".into(), pair_count.to_string());
        return Ok(SuiteRun {
            name: "quasitree",
            pass: checks.pass(),
            config,
            input: input_line(cfg, id),
            results: json!({
                "mode": "control",
                "graph": id,
                "report": rep,
                "checks": checks.to_value(),
            }),
            table: None,
            failure: checks.failure,
        });
    }

    let lo = cfg.radius.unwrap_or(4);
    let hi = lo + 2;
    let specs = group_inputs(cfg, &[z1z1()])?;
    let spec = &specs[0];
    let id = spec.id();

    let mut checks = Checks::new();
    let mut radial = Vec::new();
    let mut deltas = Vec::new();
    for r in [lo, hi] {
        let ball = Ball::build(spec, r, configured_cap())?;
        let cosets = CosetTable::build(spec, &ball);
        let tab = ProjectionTable::build(spec, &ball, &cosets, r / 2)?;
        let ax = verify_axioms(&tab, &ball, &cosets, AuditLevel::Exhaustive);
        let k = cfg.threshold_k.unwrap_or(ax.xi3 + 1.0);
        let complex = build_projection_complex(&tab, k)?;
        let pieces = coset_pieces(&ball, &cosets, &tab);
        let qt = build_quasitree_of_spaces(&ball, &cosets, &tab, &complex, &pieces)?;
        let rep = graph_bottleneck(qt.graph(), pair_count, seed);
        checks.check(
            &format!("quasitree certified at radius {r}"),
            rep.failures == 0,
            || format!("{} pairs escaped, first {:?}", rep.failures, rep.witness),
        );
        deltas.push(rep.delta);
        radial.push(json!({
            "radius": r,
            "threshold_k": k,
            "xi3": ax.xi3,
            "vertices": qt.graph().vertex_count(),
            "report": rep,
        }));
    }
    checks.check(
        "delta radius-stable",
        deltas[1] <= deltas[0] + 1.0 + 1e-9,
        || format!("delta {} at radius {lo} vs {} at {hi}", deltas[0], deltas[1]),
    );

    // a 24-cycle is nobody's quasi-tree; the certificate must refuse it
    let control = graph_bottleneck(&cycle_graph(24), pair_count, seed);
    checks.check("cycle control stays thick", control.delta >= 5.0, || {
        format!("control delta {}", control.delta)
    });

    let mut config = BTreeMap::new();
    config.insert("mode".into(), "group".into());
    config.insert("radius".into(), lo.to_string());
    config.insert("hi_radius".into(), hi.to_string());
    config.insert("seed".into(), seed.to_string());
    config.insert("pairs".into(), pair_count.to_string());
    config.insert(
        "threshold_k".into(),
        cfg.threshold_k.map_or("xi3+1".into(), crate::report::num),
    );
    config.insert("cap".into(), configured_cap().to_string());
    Ok(SuiteRun {
        name: "quasitree",
        pass: checks.pass(),
        config,
        input: input_line(cfg, &id),
        results: json!({
            "mode": "group",
            "spec": id,
            "radii": radial,
            "control": { "graph": "cycle24", "report": control },
            "checks": checks.to_value(),
        }),
        table: None,
        failure: checks.failure,
    })
}

// ---------------------------------------------------------------------------
// embed: product-of-trees embeddings, composed and joined
// ---------------------------------------------------------------------------

fn embed_suite(cfg: &SuiteConfig) -> Result<SuiteRun> {
    let lo = cfg.radius.unwrap_or(4);
    let hi = lo + 2;
    let cutoff = cfg.cutoff_l.unwrap_or(4.0);
    let k = cfg.threshold_k.unwrap_or(4.0);
    let specs = group_inputs(cfg, &[z1z1(), z2z2()])?;
    let builtin = specs.iter().map(|s| s.id()).collect::<Vec<_>>().join(",");

    let mut checks = Checks::new();
    let mut compose_rows = Vec::new();
    for spec in &specs {
        let id = spec.id();
        let mut fits = Vec::new();
        let mut excesses = Vec::new();
        for r in [lo, hi] {
            let ball = Ball::build(spec, r, configured_cap())?;
            let cosets = CosetTable::build(spec, &ball);
            let tab = ProjectionTable::build(spec, &ball, &cosets, r / 2)?;
            let complex = build_projection_complex(&tab, k)?;
            let emb = compose_embedding(spec, &ball, &cosets, &tab, &complex)?;
            let pairs = exact_domain_pairs(&emb, &ball);
            let rep = distortion_report(&emb, &ball, &pairs)?;
            let df = fit_distance_formula(spec, &ball, cutoff)?;
            let excess = lower_bound_excess(&emb, &ball, &pairs, df.lambda, df.mu)?;
            excesses.push(excess);
            compose_rows.push(json!({
                "spec": id,
                "radius": r,
                "trees": emb.certified_tree_count(),
                "distortion": rep,
                "formula_fit": { "lambda": df.lambda, "mu": df.mu },
                "lower_bound_excess": excess,
            }));
            fits.push(rep);
        }
        let (a, b) = (&fits[0], &fits[1]);
        checks.check(
            &format!("compose distortion finite ({id})"),
            a.lambda.is_finite() && a.mu.is_finite() && b.lambda.is_finite() && b.mu.is_finite(),
            || format!("fits ({}, {}) and ({}, {})", a.lambda, a.mu, b.lambda, b.mu),
        );
        checks.check(
            &format!("compose fit radius-stable ({id})"),
            within_ratio(a.lambda, b.lambda, 1.1) && b.mu <= a.mu + 2.0 + 1e-9,
            || format!("({}, {}) at radius {lo} vs ({}, {}) at {hi}", a.lambda, a.mu, b.lambda, b.mu),
        );
        checks.check(
            &format!("formula lower bound holds ({id})"),
            excesses.iter().all(|&e| e <= 1.0 + 1e-9),
            || format!("excess {:?}", excesses),
        );
    }

    // the join construction is specific to two-factor free products; it runs
    // on its builtin example unless the caller supplied a spec
    let mut join_block = Value::Null;
    if cfg.input.is_none() {
        let join_spec = RelHypSpec::new(
            vec![FactorSpec::FreeAbelian(2), FactorSpec::Free(2)],
            PeripheralMode::AllFactors,
        )?;
        let jid = join_spec.id();
        let (jlo, jhi) = (lo, lo + 1);
        let mut fixed_fits = Vec::new();
        let mut join_rows = Vec::new();
        let mut last = None;
        for r in [jlo, jhi] {
            let ball = Ball::build(&join_spec, r, configured_cap())?;
            let cosets = CosetTable::build(&join_spec, &ball);
            let emb = free_product_join(&join_spec, &ball, &cosets)?;
            let pairs = exact_ball_pairs(&ball, r);
            let rep = distortion_report(&emb, &ball, &pairs)?;
            let fixed_pairs = exact_ball_pairs(&ball, jlo);
            let fixed = distortion_report(&emb, &ball, &fixed_pairs)?;
            join_rows.push(json!({
                "radius": r,
                "trees": emb.certified_tree_count(),
                "distortion": rep,
                "fixed_pair_fit": { "lambda": fixed.lambda, "mu": fixed.mu },
            }));
            fixed_fits.push(fixed);
            last = Some((ball, cosets, emb));
        }
        let (ball, cosets, emb) = last.expect("two join radii ran");
        let restriction = restriction_check(&join_spec, &ball, &cosets, &emb)?;
        checks.check(
            &format!("join certified trees ({jid})"),
            emb.certified_tree_count() == 2,
            || format!("{} certified trees", emb.certified_tree_count()),
        );
        checks.check(
            &format!("join fixed-pair fit radius-stable ({jid})"),
            within_ratio(fixed_fits[0].lambda, fixed_fits[1].lambda, 1.1)
                && within_ratio(fixed_fits[0].mu.max(1e-12), fixed_fits[1].mu.max(1e-12), 1.1),
            || {
                format!(
                    "({}, {}) vs ({}, {})",
                    fixed_fits[0].lambda, fixed_fits[0].mu, fixed_fits[1].lambda, fixed_fits[1].mu
                )
            },
        );
        checks.check(
            &format!("join restriction error ({jid})"),
            restriction.max_error <= 1.0 + 1e-9,
            || format!("max restriction error {}", restriction.max_error),
        );
        join_block = json!({
            "spec": jid,
            "radii": join_rows,
            "restriction": restriction,
        });
    }

    let mut config = BTreeMap::new();
    config.insert("radius".into(), lo.to_string());
    config.insert("hi_radius".into(), hi.to_string());
    config.insert("cutoff_l".into(), crate::report::num(cutoff));
    config.insert("threshold_k".into(), crate::report::num(k));
    config.insert("cap".into(), configured_cap().to_string());
    Ok(SuiteRun {
        name: "embed",
        pass: checks.pass(),
        config,
        input: input_line(cfg, &builtin),
        results: json!({
            "compose": compose_rows,
            "join": join_block,
            "checks": checks.to_value(),
        }),
        table: None,
        failure: checks.failure,
    })
}

// ---------------------------------------------------------------------------
// covers: banded horoball covers, pullbacks, boundary projections
// ---------------------------------------------------------------------------

fn covers_suite(cfg: &SuiteConfig) -> Result<SuiteRun> {
    let depth = cfg.depth.unwrap_or(8);
    let (base_id, base) = match &cfg.input {
        Some(SpecInput::Graph { id, graph }) => (id.clone(), graph.clone()),
        Some(SpecInput::Group(spec)) => {
            return Err(RelhypError::InvalidSpec(format!(
                "covers suite takes a base graph, not group {:?}",
                spec.id()
            )))
        }
        None => build_base_graph("path", 200)?,
    };

    let mut checks = Checks::new();
    let hb = horoball_cover(&base, depth, 2.0, 2, 2.0)?;
    let pullback = cover_pullback_check(&hb, &base)?;
    checks.check("cover uses three colors", hb.report.colors_used == 3, || {
        format!("{} colors", hb.report.colors_used)
    });
    checks.check("cover multiplicity bounded", hb.report.multiplicity <= 3, || {
        format!("multiplicity {}", hb.report.multiplicity)
    });
    checks.check(
        "pullback slices consistent",
        pullback.ok && pullback.ratio_spread <= 1.05,
        || format!("spread {} ok {}", pullback.ratio_spread, pullback.ok),
    );

    let mut table = Table::new(&["level", "subsets", "max_diameter", "min_separation"]);
    for s in &pullback.slices {
        table.push(vec![
            s.level.to_string(),
            s.subsets.to_string(),
            crate::report::num(s.measured_max_diameter),
            crate::report::num(s.measured_min_separation),
        ]);
    }

    // boundary half: free-group cylinders must project to a partition
    let ab = Alphabet::new(vec![FactorSpec::Free(2)])?;
    let fball = Ball::build_raw(ab, 5, configured_cap())?;
    let sphere: Vec<u32> = fball.sphere(5).collect();
    let cylinders = ColoredCover {
        classes: vec![fball.sphere(3).map(|v| vec![v]).collect()],
    };
    let proj = boundary_cover_projection(fball.graph(), 0, &sphere, &cylinders, 3.0, 0.2)?;
    checks.check(
        "cylinder projection multiplicity",
        proj.report.multiplicity == 1,
        || format!("multiplicity {}", proj.report.multiplicity),
    );
    checks.check(
        "cylinder shadows cover the sphere",
        proj.report.dropped_empty == 0,
        || format!("{} empty shadows", proj.report.dropped_empty),
    );

    let mut config = BTreeMap::new();
    config.insert("depth".into(), depth.to_string());
    config.insert("big_r".into(), crate::report::num(2.0));
    config.insert("base_colors".into(), "2".into());
    config.insert("ratio".into(), crate::report::num(2.0));
    config.insert("cap".into(), configured_cap().to_string());
    Ok(SuiteRun {
        name: "covers",
        pass: checks.pass(),
        config,
        input: input_line(cfg, &base_id),
        results: json!({
            "horoball": { "base": base_id, "cover": hb.report, "pullback": pullback },
            "cylinders": proj.report,
            "checks": checks.to_value(),
        }),
        table: Some(table),
        failure: checks.failure,
    })
}

// ---------------------------------------------------------------------------
// hnn: separation lemmas and banded partitions on the three vertex models
// ---------------------------------------------------------------------------

fn hnn_models() -> Result<Vec<HnnSpec>> {
    Ok(vec![
        HnnSpec::new(FactorSpec::FreeAbelian(1), vec![0], StableAction::Identity)?,
        HnnSpec::new(FactorSpec::FreeAbelian(1), vec![0], StableAction::Inversion)?,
        HnnSpec::new(FactorSpec::FreeAbelian(2), vec![0], StableAction::Identity)?,
    ])
}

fn hnn_suite(cfg: &SuiteConfig) -> Result<SuiteRun> {
    if cfg.input.is_some() {
        return Err(RelhypError::InvalidSpec(
            "hnn suite runs its three builtin vertex models and takes no spec".into(),
        ));
    }
    let line_radius = cfg.radius.unwrap_or(12);
    let tree_radius = line_radius.min(7);
    let band_r = cfg.cutoff_l.unwrap_or(4.0) as u32;
    let collar_r = cfg.depth.unwrap_or(1);

    let mut checks = Checks::new();
    let mut rows = Vec::new();
    let mut table = Table::new(&["model", "radius", "vertices", "pieces", "tech2_min", "tech1_checked"]);
    for spec in hnn_models()? {
        let id = spec.id();
        let radius = if spec.branched() { tree_radius } else { line_radius };
        let ball = HnnBall::build(&spec, radius, configured_cap() as usize)?;
        let k = dual_graph(&ball)?;
        lipschitz_audit(&ball, &k)?;

        let tech2 = dr_disjointness(&ball, &k, band_r, collar_r)?;
        checks.check(
            &format!("sphere spacing ({id})"),
            tech2.failures == 0 && tech2.min_distance.map_or(true, |d| d >= 2.0 * collar_r as f64),
            || format!("{} failures, min {:?}", tech2.failures, tech2.min_distance),
        );

        // scope: the partition's own piece cosets
        let scope: Vec<u32> = (0..k.vertex_count() as u32)
            .filter(|&u| {
                k.in_k1(u)
                    && k.t_edge_outward(u)
                    && k.level(u) % band_r == 0
                    && k.level(u) + collar_r <= radius
            })
            .collect();
        let tech1 = tech1_scan(&ball, &k, collar_r, &scope)?;
        checks.check(
            &format!("fiber separation ({id})"),
            tech1.failures == 0,
            || format!("{} failures over {} triples", tech1.failures, tech1.checked),
        );

        let part = build_partition(&ball, &k, band_r, collar_r)?;
        checks.check(&format!("partition audit ({id})"), part.report.pass, || {
            format!("{:?}", part.report)
        });

        table.push(vec![
            id.clone(),
            radius.to_string(),
            ball.vertex_count().to_string(),
            part.report.piece_count.to_string(),
            tech2.min_distance.map_or("-".into(), crate::report::num),
            tech1.checked.to_string(),
        ]);
        rows.push(json!({
            "model": id,
            "radius": radius,
            "vertices": ball.vertex_count(),
            "dual_vertices": k.vertex_count(),
            "tech2": tech2,
            "tech1": tech1,
            "partition": part.report,
        }));
    }

    let mut config = BTreeMap::new();
    config.insert("line_radius".into(), line_radius.to_string());
    config.insert("tree_radius".into(), tree_radius.to_string());
    config.insert("band_r".into(), band_r.to_string());
    config.insert("collar_r".into(), collar_r.to_string());
    config.insert("cap".into(), configured_cap().to_string());
    Ok(SuiteRun {
        name: "hnn",
        pass: checks.pass(),
        config,
        input: input_line(cfg, "hnn-models"),
        results: json!({ "models": rows, "checks": checks.to_value() }),
        table: Some(table),
        failure: checks.failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_a_parse_error() {
        let err = run_suite("nope", &SuiteConfig::default());
        assert!(matches!(err, Err(RelhypError::Parse(_))));
    }

    #[test]
    fn graph_grammar_round_trips() {
        let (id, g) = parse_graph_text("# base\ngraph = path 20\n").unwrap();
        assert_eq!(id, "path20");
        assert_eq!(g.vertex_count(), 21);
        let (id, g) = parse_graph_text("graph = cycle 12").unwrap();
        assert_eq!(id, "cycle12");
        assert_eq!(g.vertex_count(), 12);
        assert!(parse_graph_text("graph = torus 3").is_err());
        assert!(parse_graph_text("graph = cycle").is_err());
        assert!(parse_graph_text("size = 3").is_err());
    }

    #[test]
    fn spec_dialects_dispatch_on_leading_key() {
        match parse_any_spec("graph = cycle 24\n").unwrap() {
            SpecInput::Graph { id, .. } => assert_eq!(id, "cycle24"),
            other => panic!("expected graph, got {other:?}"),
        }
        match parse_any_spec("factors = Z2, Z2\nperipheral_mode = all\n").unwrap() {
            SpecInput::Group(spec) => assert_eq!(spec.id(), "Z2*Z2/all"),
            other => panic!("expected group, got {other:?}"),
        }
    }

    #[test]
    fn cycle_control_fails_quasitree_with_witness() {
        let cfg = SuiteConfig {
            input: Some(parse_any_spec("graph = cycle 24").unwrap()),
            input_text: Some("graph = cycle 24".into()),
            ..SuiteConfig::default()
        };
        let run = run_suite("quasitree", &cfg).unwrap();
        assert!(!run.pass);
        let failure = run.failure.expect("failing check recorded");
        assert!(failure.contains("delta"), "{failure}");
        assert!(run.results["report"]["witness"].is_array());
    }

    #[test]
    fn horoball_suite_passes_on_the_path() {
        let cfg = SuiteConfig {
            input: Some(parse_any_spec("graph = path 20").unwrap()),
            input_text: Some("graph = path 20".into()),
            depth: Some(8),
            ..SuiteConfig::default()
        };
        let run = run_suite("horoball", &cfg).unwrap();
        assert!(run.pass, "{:?}", run.failure);
        assert!(run.results["max_error"].as_f64().unwrap() <= 8.0);
        assert_eq!(run.config["depth"], "8");
    }

    #[test]
    fn suites_reject_mismatched_inputs() {
        let group = SuiteConfig {
            input: Some(parse_any_spec("factors = Z1, Z1\nperipheral_mode = all").unwrap()),
            ..SuiteConfig::default()
        };
        assert!(matches!(
            run_suite("horoball", &group),
            Err(RelhypError::InvalidSpec(_))
        ));
        let graph = SuiteConfig {
            input: Some(parse_any_spec("graph = path 4").unwrap()),
            ..SuiteConfig::default()
        };
        assert!(matches!(
            run_suite("axioms", &graph),
            Err(RelhypError::InvalidSpec(_))
        ));
        assert!(matches!(
            run_suite("hnn", &graph),
            Err(RelhypError::InvalidSpec(_))
        ));
    }
}
