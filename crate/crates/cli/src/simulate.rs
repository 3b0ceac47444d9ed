use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use hybridsched_core::metrics::{self, Scenario};
use hybridsched_core::model::Millis;
use hybridsched_core::scheduler::SchedulerPolicy;
use hybridsched_core::sim::{load_clusters, run_trace, SimConfig, SimError, SubmissionTrace};

use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Submission trace (JSON).
    #[arg(long)]
    trace: PathBuf,
    /// Cluster topology (JSON array).
    #[arg(long)]
    clusters: PathBuf,
    /// Overrides the trace's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Event log destination. Without it the log goes to stdout, unless
    /// `--compare-baseline` is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also run a statically partitioned baseline and print the comparison.
    #[arg(long)]
    compare_baseline: bool,
    /// Abort if virtual time passes this point with jobs still live.
    #[arg(long)]
    horizon_ms: Option<Millis>,
    #[arg(long)]
    no_backfill: bool,
    /// Let rigid jobs that list the cloud kind run on cloud nodes.
    #[arg(long)]
    rigid_on_cloud: bool,
    #[arg(long, default_value_t = 1)]
    retry_budget: u32,
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::NonTerminating { .. } => CliError::NonTerminating(e.to_string()),
        e => CliError::Input(e.to_string()),
    }
}

pub fn run(args: &Args, json: bool) -> Result<(), CliError> {
    let input = |p: &PathBuf, e: &dyn std::fmt::Display| CliError::Input(format!("{}: {e}", p.display()));
    let mut trace = SubmissionTrace::load(&args.trace).map_err(|e| input(&args.trace, &e))?;
    let clusters = load_clusters(&args.clusters).map_err(|e| input(&args.clusters, &e))?;
    if let Some(seed) = args.seed {
        trace.rng_seed = seed;
    }
    let mut config = SimConfig {
        policy: SchedulerPolicy {
            backfill: !args.no_backfill,
            hybrid_rigid_on_cloud: args.rigid_on_cloud,
            ..SchedulerPolicy::default()
        },
        retry_budget: args.retry_budget,
        ..SimConfig::default()
    };
    if let Some(h) = args.horizon_ms {
        config.horizon_ms = h;
    }

    let out = run_trace(&trace, &clusters, config).map_err(sim_error)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| input(path, &e))?;
            let mut w = BufWriter::new(file);
            out.log
                .write_canonical(&mut w)
                .and_then(|()| w.flush())
                .map_err(|e| input(path, &e))?;
        }
        None if !args.compare_baseline => {
            let mut stdout = std::io::stdout().lock();
            out.log
                .write_canonical(&mut stdout)
                .map_err(|e| CliError::Input(format!("writing log: {e}")))?;
        }
        None => {}
    }
    eprintln!("{} events, finished at {} ms", out.log.len(), out.end_ms);

    if args.compare_baseline {
        let baseline = Scenario {
            label: "partitioned".into(),
            clusters: clusters.clone(),
            config: SimConfig {
                policy: SchedulerPolicy {
                    static_partition: true,
                    ..config.policy
                },
                ..config
            },
        };
        let hybrid = Scenario {
            label: "hybrid".into(),
            clusters,
            config,
        };
        let c = metrics::compare(&trace, &baseline, &hybrid).map_err(|e| match e {
            metrics::MetricsError::Sim(e) => sim_error(e),
            e => CliError::Input(e.to_string()),
        })?;
        if json {
            let text = serde_json::to_string_pretty(&c).expect("comparison serializes");
            println!("{text}");
        } else {
            print!("{}", metrics::render_comparison(&c));
        }
    }
    Ok(())
}
