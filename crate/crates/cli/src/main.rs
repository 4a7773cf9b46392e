//! singloc: scenario runner for singular-locus computations on 2-D Finsler
//! surfaces. Commands emit deterministic JSON/CSV/PGM/SVG artifacts; exit
//! codes are 0 (pass), 2 (usage), 3 (numeric failure), 4 (verification
//! failure).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use singloc_core::clarke;
use singloc_core::error::Error;
use singloc_core::export::{
    write_grid_csv, write_grid_pgm, write_json, write_segment_csv, SvgCanvas,
};
use singloc_core::fgeod::{self, TraceSense};
use singloc_core::field::check_lipschitz;
use singloc_core::geom::Point2;
use singloc_core::march::Grid;
use singloc_core::scenario::{self, Scenario};
use singloc_core::singular::{self, SingularLabel};

#[derive(Parser)]
#[command(name = "singloc", version, about = "singular loci of 1-Lipschitz fields on Finsler surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Built-in scenario name (see `singloc scenario list`)
    #[arg(long)]
    scenario: Option<String>,
    /// JSON scenario description file
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    /// Grid resolution override
    #[arg(long)]
    grid: Option<usize>,
    /// Probe length for direction fans
    #[arg(long)]
    delta: Option<f64>,
    /// Angular resolution for direction fans
    #[arg(long)]
    angres: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Field grid, heatmap and metadata; optionally print a probe value
    Distmap {
        #[command(flatten)]
        common: Common,
        /// Probe point "x,y": print f(x, y) and skip file output
        #[arg(long)]
        probe: Option<String>,
    },
    /// Extract the singular locus graph, verify the local-tree property
    Singular {
        #[command(flatten)]
        common: Common,
    },
    /// Critical-value cover estimate with refinement trend
    Sard {
        #[command(flatten)]
        common: Common,
        /// Cover interval width
        #[arg(long, default_value_t = 1e-2)]
        cover: f64,
    },
    /// Run the scenario invariant suite; exit 0 iff all checks pass
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Trace the maximal f-geodesic through a probe point
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        probe: String,
        /// forward, backward or both
        #[arg(long, default_value = "both")]
        sense: String,
    },
    /// Clarke generalized differential at a probe point
    Clarke {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        probe: String,
    },
    /// Level-set contours at a value
    Levelset {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        value: f64,
    },
    /// Scenario utilities
    Scenario {
        #[command(subcommand)]
        sub: ScenarioCmd,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// List shipped scenario names
    List,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Precondition(_) | Error::InvalidMetric(_) => 2,
        _ => 3,
    }
}

fn load_scenario(common: &Common) -> Result<Scenario, Error> {
    let mut sc = match (&common.scenario, &common.scenario_file) {
        (Some(name), _) => scenario::by_name(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            let spec: scenario::ScenarioSpec = serde_json::from_str(&text)?;
            spec.build()?
        }
        (None, None) => {
            return Err(Error::InvalidInput(
                "one of --scenario or --scenario-file is required".into(),
            ))
        }
    };
    if let Some(g) = common.grid {
        sc.config.grid_n = g;
    }
    if let Some(d) = common.delta {
        sc.config.delta = d;
    }
    if let Some(r) = common.angres {
        sc.config.angular_res = r;
        sc.config.extraction_angular_res = r.min(360);
    }
    if let Some(s) = common.seed {
        sc.config.seed = s;
    }
    Ok(sc)
}

fn parse_probe(s: &str) -> Result<Point2, Error> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidInput(format!("probe must be \"x,y\", got '{s}'")));
    }
    let x: f64 = parts[0].trim().parse().map_err(|_| Error::InvalidInput("bad probe x".into()))?;
    let y: f64 = parts[1].trim().parse().map_err(|_| Error::InvalidInput("bad probe y".into()))?;
    Ok(Point2::new(x, y))
}

fn meta(sc: &Scenario, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "tool": "singloc",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": sc.name,
        "config": {
            "grid_n": sc.config.grid_n,
            "delta": sc.config.delta,
            "angular_res": sc.config.angular_res,
            "trunc_k": sc.config.trunc_k,
            "seed": sc.config.seed,
        },
        "command": extra,
    })
}

fn ensure_out(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn field_grid(sc: &Scenario) -> Grid {
    Grid::from_fn(sc.window, sc.config.grid_n, sc.config.grid_n, |p| sc.field.eval(p))
}

fn cmd_distmap(common: &Common, probe: &Option<String>) -> Result<(), Error> {
    let sc = load_scenario(common)?;
    if let Some(probe) = probe {
        let p = parse_probe(probe)?;
        println!("{:?}", sc.field.eval(p));
        return Ok(());
    }
    ensure_out(&common.out)?;
    let grid = field_grid(&sc);
    write_grid_csv(&common.out.join(format!("{}_field.csv", sc.name)), &grid)?;
    write_grid_pgm(&common.out.join(format!("{}_field.pgm", sc.name)), &grid)?;
    write_json(
        &common.out.join(format!("{}_field.json", sc.name)),
        &meta(&sc, json!({"cmd": "distmap"})),
    )?;
    println!("wrote {} field artifacts to {}", sc.name, common.out.display());
    Ok(())
}

fn cmd_singular(common: &Common) -> Result<(), Error> {
    let sc = load_scenario(common)?;
    ensure_out(&common.out)?;
    let mut graph = singular::extract_singular_locus(
        &sc.field,
        &sc.metric,
        sc.window,
        sc.config.grid_n,
        sc.config.delta,
        sc.config.extraction_angular_res,
    )?;
    singular::measure_edges(&mut graph, &sc.metric);
    let ball = (0.05 * sc.window.diagonal()).max(4.5 * graph.grid_spacing);
    let tree = singular::verify_local_tree(&graph, &sc.metric, ball, 25, sc.config.seed)?;
    write_json(&common.out.join(format!("{}_singular.json", sc.name)), &graph)?;
    write_json(&common.out.join(format!("{}_tree.json", sc.name)), &tree)?;
    write_json(
        &common.out.join(format!("{}_singular_meta.json", sc.name)),
        &meta(&sc, json!({"cmd": "singular", "ball_radius": ball})),
    )?;

    let grid = field_grid(&sc);
    let mut svg = SvgCanvas::new(sc.window, 768);
    svg.raster(&grid);
    for e in &graph.edges {
        let color = match e.label {
            SingularLabel::UpperSingular => "#d62728",
            SingularLabel::LowerSingular => "#1f77b4",
            _ => "#999999",
        };
        svg.polyline(&e.polyline, color, 2.0);
    }
    for &v in &graph.vertices {
        let n = &graph.nodes[v];
        let color = match n.label {
            SingularLabel::UpperSingular => "#d62728",
            SingularLabel::LowerSingular => "#1f77b4",
            _ => "#999999",
        };
        svg.circle(n.pos, 3.0, color);
    }
    svg.save(&common.out.join(format!("{}_singular.svg", sc.name)))?;
    println!(
        "locus: {} nodes, {} vertices, {} edges; tree pass = {}; undetermined {:.3}%",
        graph.nodes.len(),
        graph.vertices.len(),
        graph.edges.len(),
        tree.pass,
        100.0 * graph.undetermined_fraction
    );
    Ok(())
}

fn cmd_sard(common: &Common, cover: f64) -> Result<(), Error> {
    let sc = load_scenario(common)?;
    ensure_out(&common.out)?;
    let est = clarke::estimate_critical_values(
        &sc.field,
        &sc.metric,
        sc.window,
        sc.config.grid_n,
        cover,
    )?;
    write_json(&common.out.join(format!("{}_sard.json", sc.name)), &est)?;
    write_json(
        &common.out.join(format!("{}_sard_meta.json", sc.name)),
        &meta(&sc, json!({"cmd": "sard", "cover": cover})),
    )?;
    println!(
        "critical values: {:?}; bound {:.6} at width {:.1e}",
        est.critical_values, est.measure_upper_bound, cover
    );
    for (w, b) in &est.refinement {
        println!("  width {:.2e} -> bound {:.6e}", w, b);
    }
    Ok(())
}

fn cmd_verify(common: &Common) -> Result<bool, Error> {
    let sc = load_scenario(common)?;
    let mut all = scenario::verify_scenario(&sc);

    // locus extraction, tree property and the undetermined budget
    match singular::extract_singular_locus(
        &sc.field,
        &sc.metric,
        sc.window,
        sc.config.grid_n,
        sc.config.delta,
        sc.config.extraction_angular_res,
    ) {
        Ok(graph) => {
            all.push(scenario::CheckResult {
                name: "undetermined_fraction".into(),
                pass: graph.undetermined_fraction < 0.01,
                detail: format!("{:.4}%", 100.0 * graph.undetermined_fraction),
            });
            if graph.node_count() > 1 {
                let ball = (0.05 * sc.window.diagonal()).max(4.5 * graph.grid_spacing);
                match singular::verify_local_tree(&graph, &sc.metric, ball, 25, sc.config.seed) {
                    Ok(tree) => all.push(scenario::CheckResult {
                        name: "local_tree".into(),
                        pass: tree.pass,
                        detail: format!(
                            "balls {}, cycles {}, conn failures {}",
                            tree.balls_tested, tree.cycles_found, tree.connectivity_failures
                        ),
                    }),
                    Err(e) => all.push(scenario::CheckResult {
                        name: "local_tree".into(),
                        pass: false,
                        detail: e.to_string(),
                    }),
                }
            }
        }
        Err(e) => all.push(scenario::CheckResult {
            name: "locus_extraction".into(),
            pass: false,
            detail: format!("precondition: {e}"),
        }),
    }

    // Lipschitz gate on the shipped tolerances
    match check_lipschitz(&sc.field, 400, 300, sc.config.seed) {
        Ok(rep) => all.push(scenario::CheckResult {
            name: "lipschitz_gate".into(),
            pass: rep.max_violation <= 1e-6 && rep.gradient_norm_max <= 1.0 + 1e-3,
            detail: format!("violation {:.2e} grad {:.6}", rep.max_violation, rep.gradient_norm_max),
        }),
        Err(e) => all.push(scenario::CheckResult {
            name: "lipschitz_gate".into(),
            pass: false,
            detail: e.to_string(),
        }),
    }

    let mut ok = true;
    for c in &all {
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("{status} {} {} :: {}", sc.name, c.name, c.detail);
        ok &= c.pass;
    }
    Ok(ok)
}

fn cmd_trace(common: &Common, probe: &str, sense: &str) -> Result<(), Error> {
    let sc = load_scenario(common)?;
    ensure_out(&common.out)?;
    let p = parse_probe(probe)?;
    let step = sc.config.delta / 16.0;
    let max_len = 4.0 * sc.window.diagonal();
    let result = match sense {
        "forward" => {
            fgeod::trace_f_geodesic(&sc.field, &sc.metric, p, TraceSense::Forward, step, max_len)?
                .certificate
        }
        "backward" => {
            fgeod::trace_f_geodesic(&sc.field, &sc.metric, p, TraceSense::Backward, step, max_len)?
                .certificate
        }
        "both" => {
            let fan = fgeod::direction_fan(&sc.field, &sc.metric, p, sc.config.delta, sc.config.angular_res);
            let dir = fan
                .outgoing
                .first()
                .or_else(|| fan.incoming.first())
                .ok_or_else(|| Error::NumericFailure("no f-geodesic through the probe".into()))?
                .dir;
            let seg = singloc_core::geodesic::integrate_geodesic(
                &sc.metric,
                p,
                dir,
                (sc.config.delta / 2.0).max(1e-6),
                step,
                None,
            )?;
            let cert = fgeod::certify_f_geodesic(&sc.field, &seg, None);
            let ext = fgeod::maximal_extension(&sc.field, &sc.metric, &cert)?;
            println!(
                "maximal f-geodesic: t in [{:.6}, {:.6}], backward {:?} at ({:.4},{:.4}), forward {:?} at ({:.4},{:.4})",
                ext.certificate.segment.t0,
                ext.certificate.segment.t1,
                ext.backward_reason,
                ext.backward_end.x,
                ext.backward_end.y,
                ext.forward_reason,
                ext.forward_end.x,
                ext.forward_end.y
            );
            ext.certificate
        }
        other => return Err(Error::InvalidInput(format!("unknown sense '{other}'"))),
    };
    write_segment_csv(&common.out.join(format!("{}_trace.csv", sc.name)), &result.segment)?;
    write_json(&common.out.join(format!("{}_trace.json", sc.name)), &result)?;
    let grid = field_grid(&sc);
    let mut svg = SvgCanvas::new(sc.window, 768);
    svg.raster(&grid);
    let pts: Vec<Point2> = result.segment.samples.iter().map(|s| s.pos).collect();
    svg.polyline(&pts, "#2ca02c", 2.0);
    svg.circle(p, 4.0, "#ff7f0e");
    svg.save(&common.out.join(format!("{}_trace.svg", sc.name)))?;
    println!(
        "trace: residual {:.3e} (tol {:.3e}), certified = {}",
        result.residual, result.tol, result.certified
    );
    Ok(())
}

fn cmd_clarke(common: &Common, probe: &str) -> Result<(), Error> {
    let sc = load_scenario(common)?;
    let p = parse_probe(probe)?;
    let fan = fgeod::direction_fan(&sc.field, &sc.metric, p, sc.config.delta, sc.config.angular_res);
    let cd = clarke::generalized_differential(&sc.field, &sc.metric, p, &fan)?;
    let critical = clarke::is_critical(&cd, clarke::CRITICAL_TOL);
    let payload = json!({
        "meta": meta(&sc, json!({"cmd": "clarke", "probe": [p.x, p.y]})),
        "differential": cd,
        "critical": critical,
        "distance_to_zero": cd.distance_to_zero(),
    });
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(())
}

fn cmd_levelset(common: &Common, value: f64) -> Result<(), Error> {
    let sc = load_scenario(common)?;
    ensure_out(&common.out)?;
    let est = clarke::estimate_critical_values(
        &sc.field,
        &sc.metric,
        sc.window,
        (sc.config.grid_n / 2).max(64),
        1e-2,
    )?;
    let ls = clarke::extract_level_set(&sc.field, sc.window, sc.config.grid_n, value, &est.critical_points)?;
    write_json(&common.out.join(format!("{}_levelset.json", sc.name)), &ls)?;
    let grid = field_grid(&sc);
    let mut svg = SvgCanvas::new(sc.window, 768);
    svg.raster(&grid);
    for c in &ls.components {
        svg.polyline(&c.polyline, if c.regular { "#2ca02c" } else { "#d62728" }, 2.0);
    }
    svg.save(&common.out.join(format!("{}_levelset.svg", sc.name)))?;
    println!(
        "level {} -> {} components ({} regular)",
        value,
        ls.components.len(),
        ls.components.iter().filter(|c| c.regular).count()
    );
    Ok(())
}

fn run() -> Result<u8, Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Distmap { common, probe } => cmd_distmap(common, probe).map(|_| 0),
        Command::Singular { common } => cmd_singular(common).map(|_| 0),
        Command::Sard { common, cover } => cmd_sard(common, *cover).map(|_| 0),
        Command::Verify { common } => cmd_verify(common).map(|ok| if ok { 0 } else { 4 }),
        Command::Trace { common, probe, sense } => cmd_trace(common, probe, sense).map(|_| 0),
        Command::Clarke { common, probe } => cmd_clarke(common, probe).map(|_| 0),
        Command::Levelset { common, value } => cmd_levelset(common, *value).map(|_| 0),
        Command::Scenario { sub: ScenarioCmd::List } => {
            for name in scenario::list() {
                println!("{name}");
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
