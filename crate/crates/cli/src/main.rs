use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use defect_ssl::dataset::synth_defect_data;
use defect_ssl::harness::report::{budgets, summary_text, treatment_values};
use defect_ssl::harness::{
    aggregate_report, cost_estimate, method_registry, read_results, run_to_dir, write_report, ExperimentConfig,
    GroupBy, Metric, ReportConfig,
};
use defect_ssl::scott_knott::{sk_rank, Goal, SkConfig, TreatmentSamples};

#[derive(Parser)]
#[command(name = "defect-ssl", version, about = "Semi-supervised defect prediction benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write results plus a report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record per-cell wall-clock seconds.
        #[arg(long)]
        timing: bool,
        /// Skip the report bundle.
        #[arg(long)]
        no_report: bool,
    },
    /// Scott-Knott ranking of one metric from a results file.
    Rank {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        metric: String,
        /// Defaults to the metric's natural direction.
        #[arg(long, value_enum)]
        goal: Option<GoalArg>,
        /// Rank only this budget (default: every budget present).
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, default_value = "method")]
        group_by: String,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the full report bundle from a results file.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "method")]
        group_by: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Labeling cost of a budget; without --fraction prints the standard table.
    Cost {
        #[arg(long)]
        files: u64,
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// List the method registry.
    Methods,
    /// Write a synthetic process-metric dataset.
    Synth {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        ratio: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GoalArg {
    Max,
    Min,
}

fn group_by(name: &str) -> Result<GroupBy> {
    GroupBy::from_name(name).with_context(|| format!("unknown grouping `{name}`"))
}

fn run(
    config: &Path,
    seed: Option<u64>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
    timing: bool,
    no_report: bool,
) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(config).with_context(|| format!("reading {}", config.display()))?;
    let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    if let Some(o) = out {
        cfg.out_dir = std::env::current_dir()?.join(o);
    }
    cfg.record_timing |= timing;
    let (path, rows) = run_to_dir(&cfg, &base)?;
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    println!("wrote {} rows ({errors} error rows) to {}", rows.len(), path.display());
    if no_report {
        return Ok(());
    }
    let report_cfg = ReportConfig {
        seed: cfg.seed,
        ..Default::default()
    };
    match aggregate_report(&rows, &report_cfg) {
        Ok(bundle) => {
            let dir = path.parent().unwrap_or(Path::new("."));
            for p in write_report(dir, &bundle)? {
                info!("wrote {}", p.display());
            }
            println!("report written to {}", dir.display());
        }
        Err(e) => warn!("no report: {e}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn rank(
    results: &Path,
    metric: &str,
    goal: Option<GoalArg>,
    budget: Option<f64>,
    grouping: &str,
    resamples: usize,
    seed: u64,
) -> Result<()> {
    let metric = Metric::from_column(metric).with_context(|| format!("unknown metric `{metric}`"))?;
    let grouping = group_by(grouping)?;
    let goal = match goal {
        Some(GoalArg::Max) => Goal::Maximize,
        Some(GoalArg::Min) => Goal::Minimize,
        None => metric.goal(),
    };
    let rows = read_results(results).with_context(|| format!("reading {}", results.display()))?;
    let selected = match budget {
        Some(b) => vec![b],
        None => budgets(&rows),
    };
    if selected.is_empty() {
        bail!("{} holds no result rows", results.display());
    }
    for b in selected {
        let treatments: Vec<TreatmentSamples> = treatment_values(&rows, grouping, metric, b)
            .into_iter()
            .filter(|(_, v)| v.len() >= 2)
            .map(|(n, v)| TreatmentSamples::new(n, v))
            .collect();
        if treatments.is_empty() {
            bail!(
                "no treatment has two or more `{}` values at budget {b}",
                metric.column()
            );
        }
        let cfg = SkConfig {
            resamples,
            goal,
            seed,
            ..Default::default()
        };
        let table = sk_rank(&treatments, &cfg)?;
        let orientation = match goal {
            Goal::Maximize => "rank 1 is worst",
            Goal::Minimize => "rank 1 is best",
        };
        println!(
            "{} at budget {b}: {} groups, {orientation}{}",
            metric.column(),
            table.n_groups(),
            if table.blurred() { ", BLURRED" } else { "" }
        );
        let width = treatments.iter().map(|t| t.name.len()).max().unwrap_or(0);
        for name in table.groups.iter().flatten() {
            println!(
                "  {:>4}  {:<width$}  {:.4}",
                table.ascending_rank(name).unwrap_or(0),
                name,
                table.medians[name]
            );
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            jobs,
            out,
            timing,
            no_report,
        } => run(&config, seed, jobs, out, timing, no_report)?,
        Command::Rank {
            results,
            metric,
            goal,
            budget,
            group_by,
            resamples,
            seed,
        } => rank(&results, &metric, goal, budget, &group_by, resamples, seed)?,
        Command::Report {
            results,
            out,
            group_by: g,
            seed,
        } => {
            let rows = read_results(&results).with_context(|| format!("reading {}", results.display()))?;
            let cfg = ReportConfig {
                group_by: group_by(&g)?,
                seed,
                ..Default::default()
            };
            let bundle = aggregate_report(&rows, &cfg)?;
            write_report(&out, &bundle)?;
            print!("{}", summary_text(&bundle));
        }
        Command::Cost { files, fraction } => {
            let fractions = match fraction {
                Some(f) => vec![f],
                None => vec![0.025, 0.05, 0.10, 0.20, 1.0],
            };
            println!("{:>8}  {:>12}  {:>8}  {:>12}", "fraction", "files", "hours", "dollars");
            for f in fractions {
                let c = cost_estimate(files, f)?;
                println!("{:>8}  {:>12}  {:>8}  {:>12.1}", f, c.files, c.hours, c.dollars);
            }
        }
        Command::Methods => {
            for d in method_registry() {
                println!(
                    "{:<28} {:<11} {:<7} {}",
                    d.id,
                    d.family.as_str(),
                    d.teaching_mode.as_str(),
                    d.view_mode.as_str()
                );
            }
        }
        Command::Synth {
            rows,
            ratio,
            out,
            separation,
            seed,
        } => {
            if rows < 20 || !(ratio > 0.0 && ratio < 1.0) {
                bail!("--rows must be at least 20 and --ratio lie in (0, 1)");
            }
            let ds = synth_defect_data(rows, ratio, separation, seed);
            ds.write_csv(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {rows} rows ({} defective) to {}",
                ds.defect_count(),
                out.display()
            );
        }
    }
    Ok(())
}
