//! Command-line driver: builds spaces, runs verification suites, writes
//! deterministic JSON reports with CSV residual tables next to them.
//!
//! Exit codes: 0 success, 1 parse or usage error, 2 vertex cap exceeded,
//! 3 suite assertion failure (the report carries the failing witness).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use relhyp::embed::{compose_embedding, distortion_report, exact_domain_pairs};
use relhyp::groups::{configured_cap, Ball, CosetTable};
use relhyp::horoball::build_horoball;
use relhyp::projections::ProjectionTable;
use relhyp::quasitree::build_projection_complex;
use relhyp::report::{num, Report, Table};
use relhyp::suites::{
    parse_any_spec, run_suite, suite_report, SpecInput, SuiteConfig, SuiteRun, SUITE_NAMES,
};
use relhyp::{RelhypError, Result};

#[derive(Parser)]
#[command(name = "relhyp", version, about = "metric laboratory for relatively hyperbolic groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the space a spec describes and report its size data.
    ///
    /// Group specs produce the Cayley ball with its peripheral cosets;
    /// base-graph specs produce the combinatorial horoball over the graph.
    BuildSpace {
        /// Spec file (group or base-graph dialect).
        #[arg(long)]
        spec: PathBuf,
        /// Ball radius for group specs.
        #[arg(long, default_value_t = 4)]
        radius: u32,
        /// Horoball depth for base-graph specs.
        #[arg(long, default_value_t = 8)]
        depth: u32,
        /// Report path; the graph itself lands next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one named verification suite.
    Verify {
        /// One of: horoball, axioms, distform, quasitree, embed, covers, hnn.
        suite: String,
        /// Spec file overriding the suite's builtin examples.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        radius: Option<u32>,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long = "cutoff-L")]
        cutoff_l: Option<f64>,
        #[arg(long = "threshold-K")]
        threshold_k: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; residual CSV lands next to it. Stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the product-of-trees embedding of a group spec and write the
    /// tree coordinates of every ball vertex.
    Embed {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 4)]
        radius: u32,
        /// Projection-complex threshold.
        #[arg(long = "threshold-K", default_value_t = 4.0)]
        threshold_k: f64,
        /// Report path; the coordinate CSV lands next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every suite with default settings into one directory.
    ReportBundle {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| {
        let fatal = e.use_stderr();
        let _ = e.print();
        std::process::exit(if fatal { 1 } else { 0 });
    });
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &RelhypError) -> u8 {
    match e {
        RelhypError::CapExceeded { .. } => 2,
        _ => 1,
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::BuildSpace {
            spec,
            radius,
            depth,
            out,
        } => build_space(&spec, radius, depth, out.as_deref()),
        Command::Verify {
            suite,
            spec,
            radius,
            depth,
            cutoff_l,
            threshold_k,
            seed,
            out,
        } => {
            let mut cfg = SuiteConfig {
                radius,
                depth,
                cutoff_l,
                threshold_k,
                seed,
                ..SuiteConfig::default()
            };
            if let Some(path) = spec {
                let text = read_spec(&path)?;
                cfg.input = Some(parse_any_spec(&text)?);
                cfg.input_text = Some(text);
            }
            let run = run_suite(&suite, &cfg)?;
            let pass = run.pass;
            emit_run(run, out.as_deref())?;
            Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
        Command::Embed {
            spec,
            radius,
            threshold_k,
            out,
        } => embed_cmd(&spec, radius, threshold_k, out.as_deref()),
        Command::ReportBundle { out, seed } => bundle(&out, seed),
    }
}

fn read_spec(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| RelhypError::Parse(format!("cannot read spec {}: {e}", path.display())))
}

/// Writes the report (and its table) or prints the JSON to stdout.
fn emit_report(report: &Report, table: Option<&Table>, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            report.write(path)?;
            if let Some(t) = table {
                t.write(&path.with_extension("csv"))?;
            }
            let verdict = if report.pass { "pass" } else { "FAIL" };
            println!("{}: {verdict} ({})", report.command, path.display());
        }
        None => {
            let verdict = if report.pass { "pass" } else { "FAIL" };
            eprintln!("{}: {verdict}", report.command);
            print!("{}", report.to_json());
        }
    }
    Ok(())
}

fn emit_run(run: SuiteRun, out: Option<&Path>) -> Result<()> {
    let (report, table) = suite_report(run);
    emit_report(&report, table.as_ref(), out)
}

fn build_space(spec_path: &Path, radius: u32, depth: u32, out: Option<&Path>) -> Result<ExitCode> {
    let text = read_spec(spec_path)?;
    let mut config = BTreeMap::new();
    config.insert("cap".into(), configured_cap().to_string());
    let results = match parse_any_spec(&text)? {
        SpecInput::Group(spec) => {
            config.insert("radius".into(), radius.to_string());
            let ball = Ball::build(&spec, radius, configured_cap())?;
            let cosets = CosetTable::build(&spec, &ball);
            if let Some(path) = out {
                ball.graph().write_file(&path.with_extension("graph"))?;
            }
            let spheres: Vec<usize> = (0..=radius).map(|r| ball.sphere(r).len()).collect();
            json!({
                "spec": spec.id(),
                "radius": radius,
                "vertices": ball.graph().vertex_count(),
                "edges": ball.graph().edges().len(),
                "sphere_sizes": spheres,
                "cosets": cosets.cosets().len(),
                "peripheral_families": cosets.peripheral_count(),
            })
        }
        SpecInput::Graph { id, graph } => {
            config.insert("depth".into(), depth.to_string());
            let horoball = build_horoball(&graph, depth)?;
            if let Some(path) = out {
                horoball.write_files(&path.with_extension("graph"))?;
            }
            json!({
                "graph": id,
                "depth": depth,
                "base_vertices": graph.vertex_count(),
                "vertices": horoball.graph().vertex_count(),
                "edges": horoball.graph().edges().len(),
            })
        }
    };
    let report = Report::new("build-space", config, text.as_bytes(), true, results);
    emit_report(&report, None, out)?;
    Ok(ExitCode::SUCCESS)
}

fn embed_cmd(spec_path: &Path, radius: u32, threshold_k: f64, out: Option<&Path>) -> Result<ExitCode> {
    let text = read_spec(spec_path)?;
    let spec = match parse_any_spec(&text)? {
        SpecInput::Group(spec) => spec,
        SpecInput::Graph { id, .. } => {
            return Err(RelhypError::InvalidSpec(format!(
                "embed takes a group spec, not base graph {id:?}"
            )))
        }
    };
    let ball = Ball::build(&spec, radius, configured_cap())?;
    let cosets = CosetTable::build(&spec, &ball);
    let table = ProjectionTable::build(&spec, &ball, &cosets, radius / 2)?;
    let complex = build_projection_complex(&table, threshold_k)?;
    let emb = compose_embedding(&spec, &ball, &cosets, &table, &complex)?;
    let pairs = exact_domain_pairs(&emb, &ball);
    let fit = distortion_report(&emb, &ball, &pairs)?;
    if let Some(path) = out {
        let file = std::fs::File::create(path.with_extension("csv"))?;
        emb.write_csv(&ball, std::io::BufWriter::new(file))?;
    }
    let mut config = BTreeMap::new();
    config.insert("radius".into(), radius.to_string());
    config.insert("threshold_k".into(), num(threshold_k));
    config.insert("cap".into(), configured_cap().to_string());
    let results = json!({
        "spec": spec.id(),
        "trees": emb.certified_tree_count(),
        "domain": pairs.len(),
        "distortion": fit,
    });
    let report = Report::new("embed", config, text.as_bytes(), true, results);
    emit_report(&report, None, out)?;
    Ok(ExitCode::SUCCESS)
}

fn bundle(out: &Path, seed: Option<u64>) -> Result<ExitCode> {
    std::fs::create_dir_all(out)?;
    let cfg = SuiteConfig {
        seed,
        ..SuiteConfig::default()
    };
    let mut entries = Vec::new();
    let mut hashes = String::new();
    let mut all_pass = true;
    for name in SUITE_NAMES {
        let run = run_suite(name, &cfg)?;
        all_pass &= run.pass;
        let (report, table) = suite_report(run);
        let path = out.join(format!("{name}.json"));
        report.write(&path)?;
        if let Some(t) = &table {
            t.write(&path.with_extension("csv"))?;
        }
        hashes.push_str(&format!("{name}:{}\n", report.content_hash));
        entries.push(json!({
            "suite": name,
            "pass": report.pass,
            "report": format!("{name}.json"),
        }));
        let verdict = if report.pass { "pass" } else { "FAIL" };
        println!("verify {name}: {verdict} ({})", path.display());
    }
    let mut config = BTreeMap::new();
    config.insert("seed".into(), seed.map_or("default".into(), |s| s.to_string()));
    config.insert("cap".into(), configured_cap().to_string());
    let index = Report::new(
        "report-bundle",
        config,
        hashes.as_bytes(),
        all_pass,
        json!({ "suites": entries }),
    );
    index.write(&out.join("bundle.json"))?;
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(3) })
}
