//! Subcommand definitions and implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use clustersync::dynamics::{estimate_alpha, DEFAULT_ALPHA_SAMPLES, DEFAULT_DELTA};
use clustersync::metrics::{
    dis_metric, k_metric, lyapunov_v, var_metric, weight_convergence_report, MetricTrace,
};
use clustersync::simulator::{
    observed_region, random_initial_states, random_initial_weights, simulate_adaptive,
    simulate_fixed, CoupledSystem, Coupling, RunStatus, SimulationRun,
};
use clustersync::spectral::{build_normalized_laplacian, left_perron_vector, WeightedLaplacian};
use clustersync::synchronizability::{cs_optimize, DEFAULT_BUDGET};
use clustersync::ClusteredGraph;
use rayon::prelude::*;

use crate::config::{load_graph, output_dir, RunConfig};
use crate::error::{CliError, CliResult, EXIT_CONDITION, EXIT_OK};
use crate::output::{ensure_dir, write_file, Chart, Series, Table};
use crate::report::{finite, RunMode, RunSummary, StructureSection, SweepRow, SyncReport};

/// Widening applied to the observed uncoupled extent when estimating alpha.
const REGION_MARGIN: f64 = 0.2;

#[derive(Debug, Parser)]
#[command(
    name = "clustersync",
    version,
    about = "Cluster synchronization of coupled node dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structural conditions and classify every cluster.
    Check {
        /// Graph file (JSON).
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the cluster synchronizability and the coupling threshold.
    Spectrum(SpectrumArgs),
    /// Run the network with fixed coupling strength.
    Simulate(RunArgs),
    /// Run the network with adaptive coupling weights.
    Adapt(RunArgs),
    /// Run fixed-coupling simulations for several coupling strengths.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Coupling strengths, comma separated.
        #[arg(long = "values", value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Graph file (JSON). Optional when --config names one.
    pub graph: Option<PathBuf>,
    /// Known alpha of the node dynamics.
    #[arg(long, conflicts_with = "estimate_alpha")]
    pub alpha: Option<f64>,
    /// Estimate alpha from the configured dynamics on the region visited by
    /// the uncoupled network.
    #[arg(long)]
    pub estimate_alpha: bool,
    /// Run configuration (dynamics, horizon, step) used for the estimate.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Evaluation budget of the diagonal optimizer.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// Pairs sampled for the alpha estimate.
    #[arg(long, default_value_t = DEFAULT_ALPHA_SAMPLES)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flags shared by the simulation commands; each overrides the config.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Fixed coupling strength.
    #[arg(long)]
    pub c: Option<f64>,
    /// Adaptation gain.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> CliResult<(RunConfig, PathBuf)> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(c) = self.c {
            cfg.c = Some(c);
        }
        if let Some(rho) = self.rho {
            cfg.rho = rho;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.t_end {
            cfg.t_end = t;
        }
        if let Some(h) = self.h {
            cfg.h = h;
        }
        cfg.validate()?;
        let out = output_dir(self.out.as_deref(), cfg.output.as_deref());
        Ok((cfg, out))
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Check { graph, out } => cmd_check(&graph, out.as_deref()),
        Command::Spectrum(args) => cmd_spectrum(&args),
        Command::Simulate(args) => cmd_run(&args, RunMode::Fixed),
        Command::Adapt(args) => cmd_run(&args, RunMode::Adaptive),
        Command::Sweep { run, values } => cmd_sweep(&run, &values),
    }
}

fn write_report(dir: &Path, report: &SyncReport) -> CliResult<()> {
    ensure_dir(dir)?;
    write_file(&dir.join("report.json"), &report.to_json())
}

fn print_structure(s: &StructureSection) {
    let verdict = |b: bool| if b { "holds" } else { "FAILS" };
    println!(
        "graph: {} vertices, {} edges, {} clusters ({})",
        s.vertices,
        s.edges,
        s.clusters,
        if s.connected {
            "connected"
        } else {
            "disconnected"
        }
    );
    println!(
        "common inter-cluster coupling: {}",
        verdict(s.common_inter_cluster.holds)
    );
    for v in &s.common_inter_cluster.violations {
        println!(
            "  cluster {}: vertices {} and {} reach different clusters {:?}",
            v.cluster + 1,
            v.a + 1,
            v.b + 1,
            v.differing.iter().map(|k| k + 1).collect::<Vec<_>>()
        );
    }
    println!(
        "every cluster within one component: {}",
        verdict(s.same_component.holds)
    );
    for (k, ok) in s.same_component.per_cluster.iter().enumerate() {
        if !ok {
            println!("  cluster {} spans several components", k + 1);
        }
    }
    for (k, class) in s.classes.iter().enumerate() {
        println!("cluster {}: {class}", k + 1);
    }
    match &s.coexistence {
        clustersync::graph::CoexistenceReport::NotApplicable => {
            println!("class coexistence: not applicable (graph is disconnected)")
        }
        clustersync::graph::CoexistenceReport::Checked { flagged } if flagged.is_empty() => {
            println!("class coexistence: consistent")
        }
        clustersync::graph::CoexistenceReport::Checked { flagged } => {
            for (a, b) in flagged {
                println!(
                    "class coexistence: clusters {} and {} cannot coexist",
                    a + 1,
                    b + 1
                );
            }
        }
    }
}

pub fn cmd_check(graph_path: &Path, out: Option<&Path>) -> CliResult<i32> {
    let graph = load_graph(graph_path)?;
    let structure = StructureSection::of(&graph);
    print_structure(&structure);
    let ok = structure.conditions_hold();
    let report = SyncReport {
        structure: Some(structure),
        ..SyncReport::default()
    };
    write_report(&output_dir(out, None), &report)?;
    Ok(if ok { EXIT_OK } else { EXIT_CONDITION })
}

fn uncoupled(graph: &ClusteredGraph, cfg: &RunConfig) -> CliResult<CoupledSystem> {
    Ok(CoupledSystem::new(
        graph.clone(),
        cfg.dynamics(graph)?,
        Coupling::Fixed {
            c: 0.0,
            laplacian: build_normalized_laplacian(graph),
        },
    )?)
}

pub fn cmd_spectrum(args: &SpectrumArgs) -> CliResult<i32> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => match &args.graph {
            Some(g) => RunConfig::for_graph(g),
            None => {
                return Err(CliError::Usage(
                    "a graph file or --config is required".into(),
                ))
            }
        },
    };
    if let Some(g) = &args.graph {
        cfg.graph = g.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    if let Some(a) = args.alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(CliError::Usage("alpha: must be positive and finite".into()));
        }
    }
    let graph = cfg.load_graph()?;
    let structure = StructureSection::of(&graph);
    if !structure.conditions_hold() {
        eprintln!("warning: structural conditions fail; the threshold carries no guarantee");
    }

    let estimate = if args.estimate_alpha {
        let system = uncoupled(&graph, &cfg)?;
        let x0 = random_initial_states(graph.m(), system.n(), cfg.seed);
        let region = observed_region(&system, &x0, cfg.t_end, 0.0, cfg.h, REGION_MARGIN)?;
        Some(estimate_alpha(
            &system.dynamics,
            &region,
            args.samples,
            cfg.seed,
            DEFAULT_DELTA,
        )?)
    } else {
        None
    };
    let alpha = args.alpha.or(estimate.as_ref().map(|e| e.alpha));

    let l = build_normalized_laplacian(&graph);
    let result = cs_optimize(&graph, &l, args.budget, alpha)?;
    println!("cs (Perron diagonal): {:.6}", result.cs_fixed);
    println!("cs (optimized diagonal): {:.6}", result.cs_best);
    let d: Vec<String> = result.d_best.iter().map(|v| format!("{v:.4}")).collect();
    println!("optimized diagonal: [{}]", d.join(", "));
    if let Some(e) = &estimate {
        println!("alpha estimate: {:.6} from {} samples", e.alpha, e.samples);
    }
    if let Some(c) = result.c_min {
        println!("coupling threshold c_min: {c:.6}");
    }
    let positive = result.cs_best > 0.0;
    if !positive {
        eprintln!("{}", clustersync::Error::NotSynchronizable(result.cs_best));
    }
    let report = SyncReport {
        structure: Some(structure),
        synchronizability: Some(result),
        alpha: estimate,
        ..SyncReport::default()
    };
    write_report(
        &output_dir(args.out.as_deref(), cfg.output.as_deref()),
        &report,
    )?;
    Ok(if positive { EXIT_OK } else { EXIT_CONDITION })
}

fn states_table(run: &SimulationRun) -> Table {
    let mut header = vec!["t".to_string()];
    for i in 0..run.m {
        for k in 0..run.n {
            header.push(format!("x{}_{}", i + 1, k + 1));
        }
    }
    let mut t = Table::new(header);
    for (time, s) in run.times.iter().zip(&run.states) {
        let mut row = vec![*time];
        row.extend_from_slice(s);
        t.push(row);
    }
    t
}

fn weights_table(run: &SimulationRun, weights: &[Vec<f64>]) -> Table {
    let mut header = vec!["t".to_string()];
    header.extend(
        run.directed_edges
            .iter()
            .map(|(i, j)| format!("w{}_{}", i + 1, j + 1)),
    );
    let mut t = Table::new(header);
    for (time, w) in run.times.iter().zip(weights) {
        let mut row = vec![*time];
        row.extend_from_slice(w);
        t.push(row);
    }
    t
}

fn metrics_table(k: &MetricTrace, dis: Option<&MetricTrace>, v: &MetricTrace) -> Table {
    let mut t = Table::new(["t", "K", "dis", "V"]);
    for (idx, time) in k.times.iter().enumerate() {
        let d = dis.map_or(f64::NAN, |d| d.values[idx]);
        t.push(vec![*time, k.values[idx], d, v.values[idx]]);
    }
    t
}

fn trace_series(trace: &MetricTrace, name: &str) -> Series {
    Series {
        name: name.to_string(),
        points: trace
            .times
            .iter()
            .copied()
            .zip(trace.values.iter().copied())
            .collect(),
    }
}

pub fn cmd_run(args: &RunArgs, mode: RunMode) -> CliResult<i32> {
    let (cfg, out) = args.resolve()?;
    let graph = cfg.load_graph()?;
    let dynamics = cfg.dynamics(&graph)?;
    let l = build_normalized_laplacian(&graph);
    let d = left_perron_vector(&l)?;
    let x0 = random_initial_states(graph.m(), dynamics.dim(), cfg.seed);

    let (run, c, rho) = match mode {
        RunMode::Fixed => {
            let c = cfg.c.ok_or_else(|| {
                CliError::Usage("c: required for fixed coupling (config or --c)".into())
            })?;
            let system =
                CoupledSystem::new(graph.clone(), dynamics, Coupling::Fixed { c, laplacian: l })?;
            (
                simulate_fixed(&system, &x0, cfg.t_end, cfg.h, cfg.sample_every)?,
                Some(c),
                None,
            )
        }
        RunMode::Adaptive => {
            let count = graph.directed_edges().len();
            let system = CoupledSystem::new(
                graph.clone(),
                dynamics,
                Coupling::Adaptive {
                    rho: vec![cfg.rho; count],
                    d: d.clone(),
                },
            )?;
            let w0 = random_initial_weights(count, cfg.seed);
            (
                simulate_adaptive(&system, &x0, &w0, cfg.t_end, cfg.h, cfg.sample_every)?,
                None,
                Some(cfg.rho),
            )
        }
    };

    let k = k_metric(&run, &graph);
    let dis = if graph.n_clusters() >= 2 {
        Some(dis_metric(&run, &graph)?)
    } else {
        None
    };
    let v = lyapunov_v(&run, &graph, d.as_slice());
    let window = cfg.window();
    let var = if run.is_completed() {
        var_metric(&run, &graph, window).ok()
    } else {
        None
    };
    let weights = match (&run.weights, run.is_completed()) {
        (Some(_), true) => Some(weight_convergence_report(&run, &graph)?),
        _ => None,
    };

    ensure_dir(&out)?;
    write_file(&out.join("states.csv"), &states_table(&run).to_csv())?;
    write_file(
        &out.join("metrics.csv"),
        &metrics_table(&k, dis.as_ref(), &v).to_csv(),
    )?;
    let mut series = vec![trace_series(&k, "K"), trace_series(&v, "V")];
    if let Some(dis) = &dis {
        series.push(trace_series(dis, "dis"));
    }
    let chart = Chart {
        title: format!(
            "{} coupling, seed {}",
            if mode == RunMode::Fixed {
                "fixed"
            } else {
                "adaptive"
            },
            cfg.seed
        ),
        x_label: "t".into(),
        y_label: "value".into(),
        log_y: true,
        series,
    };
    write_file(&out.join("metrics.svg"), &chart.to_svg())?;
    if let Some(w) = &run.weights {
        let table = weights_table(&run, w);
        write_file(&out.join("weights.csv"), &table.to_csv())?;
        let series = (1..table.header.len())
            .map(|col| Series {
                name: table.header[col].clone(),
                points: table.rows.iter().map(|r| (r[0], r[col])).collect(),
            })
            .collect();
        let chart = Chart {
            title: "coupling weights".into(),
            x_label: "t".into(),
            y_label: "w".into(),
            log_y: false,
            series,
        };
        write_file(&out.join("weights.svg"), &chart.to_svg())?;
    }

    let summary = RunSummary {
        mode,
        c,
        rho,
        seed: cfg.seed,
        t_end: cfg.t_end,
        h: cfg.h,
        status: run.status,
        k_final: k.last().and_then(finite),
        var: var.and_then(finite),
        var_window: window,
        dis_min: dis
            .as_ref()
            .and_then(|d| d.min_over(window.0, window.1))
            .and_then(finite),
        v_final: v.last().and_then(finite),
        weights,
    };
    print_summary(&summary);
    let report = SyncReport {
        structure: Some(StructureSection::of(&graph)),
        runs: vec![summary],
        ..SyncReport::default()
    };
    write_report(&out, &report)?;
    println!("artifacts written to {}", out.display());
    match run.status {
        RunStatus::Completed => Ok(EXIT_OK),
        RunStatus::Diverged { t } => {
            eprintln!("error: run diverged at t = {t}; partial artifacts kept");
            Ok(EXIT_CONDITION)
        }
    }
}

fn print_summary(s: &RunSummary) {
    let show = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
    println!("status: {:?}", s.status);
    println!("K(T): {}", show(s.k_final));
    println!(
        "var on [{}, {}]: {}",
        s.var_window.0,
        s.var_window.1,
        show(s.var)
    );
    println!("min dis on the same window: {}", show(s.dis_min));
    if let Some(w) = &s.weights {
        println!(
            "intra-cluster weights converged: {}/{} (max oscillation {:.3e})",
            w.intra_converged, w.intra_total, w.max_intra_oscillation
        );
    }
}

/// Sorts coupling values and drops exact duplicates, warning about each.
pub fn normalize_sweep_values(values: &[f64]) -> CliResult<Vec<f64>> {
    if values.is_empty() {
        return Err(CliError::Usage(
            "values: at least one coupling strength is required".into(),
        ));
    }
    if let Some(bad) = values.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(CliError::Usage(format!(
            "values: {bad} is not a nonnegative finite number"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    for c in sorted {
        if out.last() == Some(&c) {
            eprintln!("warning: duplicate coupling strength {c} ignored");
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

fn sweep_row(
    graph: &ClusteredGraph,
    cfg: &RunConfig,
    laplacian: &WeightedLaplacian,
    x0: &[f64],
    c: f64,
) -> CliResult<SweepRow> {
    let system = CoupledSystem::new(
        graph.clone(),
        cfg.dynamics(graph)?,
        Coupling::Fixed {
            c,
            laplacian: laplacian.clone(),
        },
    )?;
    let run = simulate_fixed(&system, x0, cfg.t_end, cfg.h, cfg.sample_every)?;
    let var = if run.is_completed() {
        var_metric(&run, graph, cfg.window()).ok().and_then(finite)
    } else {
        None
    };
    Ok(SweepRow {
        c,
        var,
        status: run.status,
    })
}

pub fn cmd_sweep(args: &RunArgs, values: &[f64]) -> CliResult<i32> {
    let values = normalize_sweep_values(values)?;
    let (cfg, out) = args.resolve()?;
    let graph = cfg.load_graph()?;
    let dim = cfg.dynamics(&graph)?.dim();
    let laplacian = build_normalized_laplacian(&graph);
    let x0 = random_initial_states(graph.m(), dim, cfg.seed);
    // indexed parallel collect keeps the sorted order
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&c| sweep_row(&graph, &cfg, &laplacian, &x0, c))
        .collect::<CliResult<_>>()?;

    let mut table = Table::new(["c", "var", "completed"]);
    for r in &rows {
        let completed = if r.status == RunStatus::Completed {
            1.0
        } else {
            0.0
        };
        table.push(vec![r.c, r.var.unwrap_or(f64::NAN), completed]);
        let shown = r.var.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        match r.status {
            RunStatus::Completed => println!("c = {}: var = {shown}", r.c),
            RunStatus::Diverged { t } => println!("c = {}: diverged at t = {t}", r.c),
        }
    }
    ensure_dir(&out)?;
    write_file(&out.join("sweep.csv"), &table.to_csv())?;
    let chart = Chart {
        title: "var against coupling strength".into(),
        x_label: "c".into(),
        y_label: "var".into(),
        log_y: true,
        series: vec![Series {
            name: "var".into(),
            points: rows
                .iter()
                .map(|r| (r.c, r.var.unwrap_or(f64::NAN)))
                .collect(),
        }],
    };
    write_file(&out.join("sweep.svg"), &chart.to_svg())?;
    let report = SyncReport {
        structure: Some(StructureSection::of(&graph)),
        sweep: rows,
        ..SyncReport::default()
    };
    write_report(&out, &report)?;
    println!("artifacts written to {}", out.display());
    Ok(EXIT_OK)
}
