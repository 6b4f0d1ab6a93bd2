//! Command-line front end: config ingestion, experiment commands, file
//! output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use epitest_core::harness::{self, PointAggregate};
use epitest_core::netgen::{degree_stats, generate};
use epitest_core::ode::write_trajectory_csv;
use epitest_core::plot::{line_chart, Series};
use epitest_core::testing::write_test_log_csv;
use epitest_core::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "epitest",
    about = "Epidemic simulator with budget-constrained dual-test quarantine protocols",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replicate count override.
    #[arg(long)]
    replicates: Option<usize>,
    /// Also emit SVG charts next to the CSV files.
    #[arg(long)]
    plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the deterministic compartmental model and export the
    /// trajectory CSV.
    Ode {
        #[command(flatten)]
        common: Common,
    },
    /// Generate the contact network, export its edge list and print
    /// degree statistics.
    Netgen {
        #[command(flatten)]
        common: Common,
    },
    /// One stochastic run: trajectory CSV, test log, summary line.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also dump per-node daily states (large file).
        #[arg(long)]
        node_log: bool,
    },
    /// Sweep the budget split over the configured lambda1 grid.
    SweepLambda1 {
        #[command(flatten)]
        common: Common,
    },
    /// Test-1-only runs across reporting delays.
    SweepDelay {
        #[command(flatten)]
        common: Common,
        /// Delays (days) to evaluate.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2, 3, 4])]
        delays: Vec<u32>,
    },
    /// Budget sweeps across contact densities.
    SweepMu {
        #[command(flatten)]
        common: Common,
        /// Contact densities (edges per arriving node) to evaluate.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 10, 20, 30])]
        mus: Vec<usize>,
    },
    /// Print the default configuration as JSON.
    DefaultConfig,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ode { common } => ode(&common),
        Command::Netgen { common } => netgen(&common),
        Command::Run { common, node_log } => run(&common, node_log),
        Command::SweepLambda1 { common } => sweep_lambda1(&common),
        Command::SweepDelay { common, delays } => sweep_delay(&common, &delays),
        Command::SweepMu { common, mus } => sweep_mu(&common, &mus),
        Command::DefaultConfig => {
            println!("{}", ExperimentConfig::default().to_json_pretty());
            Ok(())
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(replicates) = common.replicates {
        cfg.replicates = replicates;
    }
    cfg.validate()?;
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    Ok(cfg)
}

fn create(out_dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = out_dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn ode(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let trajectory = harness::ode_run(&cfg)?;
    let mut out = create(&common.out, "ode.csv")?;
    write_trajectory_csv(&mut out, &trajectory, cfg.ode.stride)?;
    out.flush()?;
    if common.plots {
        let day_points = |pick: fn(&epitest_core::Compartments) -> f64| {
            trajectory.iter().map(|(t, s)| (*t, pick(s))).collect::<Vec<_>>()
        };
        let svg = line_chart(
            "compartment fractions",
            "day",
            "population fraction",
            &[
                Series::new("S", day_points(|s| s.s)),
                Series::new("I", day_points(|s| s.i)),
                Series::new("R", day_points(|s| s.r)),
                Series::new("Q total", day_points(|s| s.q_s + s.q_i + s.q_r)),
            ],
        );
        fs::write(common.out.join("ode.svg"), svg)?;
    }
    println!("wrote {} trajectory points to {}", trajectory.len(), common.out.display());
    Ok(())
}

fn netgen(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let graph = generate(&cfg.net_config(cfg.master_seed))?;
    let mut out = create(&common.out, "graph.edges")?;
    graph.write_edge_list(&mut out)?;
    out.flush()?;
    let stats = degree_stats(&graph);
    println!(
        "nodes={} edges={} degree min/mean/max = {}/{:.2}/{}",
        graph.n_nodes(),
        graph.n_edges(),
        stats.min,
        stats.mean,
        stats.max
    );
    if let Some(a) = stats.tail_exponent {
        println!("fitted degree-tail exponent: {a:.2}");
    }
    Ok(())
}

fn run(common: &Common, node_log: bool) -> Result<()> {
    let cfg = load_config(common)?;
    let outcome = if node_log {
        let mut log = create(&common.out, "nodes.csv")?;
        writeln!(log, "day,node,stage,quarantined,t_n")?;
        let outcome = harness::run_once_observed(&cfg, cfg.master_seed, &mut |day, world| {
            harness::write_node_log_row(&mut log, day, world).expect("node log write");
        })?;
        log.flush()?;
        outcome
    } else {
        harness::run_once(&cfg, cfg.master_seed)?
    };

    let mut traj = create(&common.out, "trajectory.csv")?;
    harness::write_run_csv(&mut traj, &outcome)?;
    traj.flush()?;

    let mut test_log = create(&common.out, "test_log.csv")?;
    write_test_log_csv(
        &mut test_log,
        &outcome.confusion,
        [&cfg.tests[0].label, &cfg.tests[1].label],
    )?;
    test_log.flush()?;

    if common.plots {
        let series = |label: &str, pick: fn(&epitest_core::metrics::DailyRow) -> usize| {
            Series::new(
                label,
                outcome
                    .trajectory
                    .iter()
                    .map(|row| (row.day as f64, pick(row) as f64))
                    .collect(),
            )
        };
        let svg = line_chart(
            "epidemic curve",
            "day",
            "nodes",
            &[
                series("S total", |r| r.counts.s + r.counts.q_s),
                series("I total", |r| r.counts.total_infectious()),
                series("R total", |r| r.counts.r + r.counts.q_r),
                series("Q total", |r| r.counts.total_quarantined()),
                series("tested", |r| r.tested),
            ],
        );
        fs::write(common.out.join("trajectory.svg"), svg)?;
    }

    println!(
        "peak infection = {}, total quarantine days = {}, utility = {}",
        outcome.peak_infection, outcome.quarantine_days, outcome.utility
    );
    Ok(())
}

fn write_sweep_outputs(
    common: &Common,
    basename: &str,
    points: &[PointAggregate],
) -> Result<()> {
    let mut per_rep = create(&common.out, &format!("{basename}_points.csv"))?;
    harness::write_points_csv(&mut per_rep, points)?;
    per_rep.flush()?;
    let mut agg = create(&common.out, &format!("{basename}_aggregate.csv"))?;
    harness::write_aggregate_csv(&mut agg, points)?;
    agg.flush()?;
    Ok(())
}

fn sweep_plot(
    common: &Common,
    name: &str,
    x_label: &str,
    points: &[PointAggregate],
    x: fn(&PointAggregate) -> f64,
) -> Result<()> {
    if !common.plots {
        return Ok(());
    }
    let ip = Series::new(
        "mean peak infection",
        points.iter().map(|p| (x(p), p.mean_ip)).collect(),
    )
    .with_whiskers(points.iter().map(|p| (p.ip_lo, p.ip_hi)).collect());
    let dq = Series::new(
        "mean quarantine days",
        points.iter().map(|p| (x(p), p.mean_dq)).collect(),
    )
    .with_whiskers(points.iter().map(|p| (p.dq_lo, p.dq_hi)).collect());
    let f = Series::new("mean utility", points.iter().map(|p| (x(p), p.mean_f)).collect());
    fs::write(
        common.out.join(format!("{name}_ip.svg")),
        line_chart("peak infection", x_label, "nodes", &[ip]),
    )?;
    fs::write(
        common.out.join(format!("{name}_dq.svg")),
        line_chart("total quarantine days", x_label, "person-days", &[dq]),
    )?;
    fs::write(
        common.out.join(format!("{name}_f.svg")),
        line_chart("utility", x_label, "f", &[f]),
    )?;
    Ok(())
}

fn sweep_lambda1(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let sweep = harness::sweep_lambda1(&cfg)?;
    write_sweep_outputs(common, "lambda1", &sweep.points)?;
    sweep_plot(common, "lambda1", "lambda1", &sweep.points, |p| p.lambda1)?;
    let best = epitest_core::metrics::argmin_utility(&sweep.utility_curve())?;
    println!(
        "swept {} points x {} replicates; utility minimum at lambda1 = {best}",
        sweep.points.len(),
        cfg.replicates
    );
    Ok(())
}

fn sweep_delay(common: &Common, delays: &[u32]) -> Result<()> {
    let cfg = load_config(common)?;
    let result = harness::sweep_delay(&cfg, delays)?;
    write_sweep_outputs(common, "delay", &result.points)?;
    let mut reference = create(&common.out, "delay_reference.csv")?;
    harness::write_aggregate_csv(&mut reference, std::slice::from_ref(&result.rapid_reference))?;
    reference.flush()?;
    sweep_plot(common, "delay", "delay (days)", &result.points, |p| p.delay as f64)?;
    for p in &result.points {
        println!(
            "delay {}: mean Ip = {:.1}, mean sumDQ = {:.0}",
            p.delay, p.mean_ip, p.mean_dq
        );
    }
    println!(
        "instant-test reference: mean Ip = {:.1}, mean sumDQ = {:.0}",
        result.rapid_reference.mean_ip, result.rapid_reference.mean_dq
    );
    Ok(())
}

fn sweep_mu(common: &Common, mus: &[usize]) -> Result<()> {
    let cfg = load_config(common)?;
    let result = harness::sweep_mu(&cfg, mus)?;
    for point in &result.per_mu {
        let name = format!("mu{}", point.mu);
        write_sweep_outputs(common, &name, &point.sweep.points)?;
        sweep_plot(common, &name, "lambda1", &point.sweep.points, |p| p.lambda1)?;
        println!(
            "mu {}: Ip slope vs lambda1 = {:.3e}, utility minimum at lambda1 = {}",
            point.mu, point.ip_slope, point.argmin_lambda1
        );
    }
    Ok(())
}
