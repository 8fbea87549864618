//! Command-line front end: ingest/generate → extract → calibrate → score →
//! optimize → report.
//!
//! Exit codes: 0 ok, 2 config error, 3 data error, 4 runtime error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use scrisk::network::Mode;

#[derive(Parser)]
#[command(name = "scrisk", version, about = "Supply-chain systemic risk scoring and rewiring")]
struct Cli {
    /// Worker threads for cascade evaluation (default: SCRISK_WORKERS env
    /// var, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum ModeArg {
    Weighted,
    Unweighted,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Weighted => Mode::Weighted,
            ModeArg::Unweighted => Mode::Unweighted,
        }
    }
}

/// Shared network-loading flags.
#[derive(Args, Debug)]
struct NetInput {
    /// Edge-list CSV (header: source,target,source_nace3,target_nace3[,weight]).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "weighted")]
    mode: ModeArg,
    /// Ingestion threshold on raw link weights (monetary units).
    #[arg(long)]
    min_weight: Option<f64>,
}

/// Shared calibration flags.
#[derive(Args, Debug)]
struct CalibrationArgs {
    /// Essentiality CSV (header: supplier_nace2,buyer_nace2,class).
    #[arg(long)]
    essentiality: Option<PathBuf>,
    /// Run with an all-Essential matrix when no file is given.
    #[arg(long)]
    default_essential: bool,
    /// Fallback class for pairs missing from the matrix (E, N or I).
    #[arg(long, default_value = "N")]
    default_class: String,
    /// Maximum fractional production loss from losing all non-essential
    /// inputs, in [0,1].
    #[arg(long)]
    gamma_ne: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Load, filter and re-emit an edge list in canonical form.
    Ingest {
        #[command(flatten)]
        net: NetInput,
        #[arg(long)]
        output: PathBuf,
        /// Write ingestion statistics JSON here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Generate a synthetic network plus essentiality matrix.
    Generate {
        #[arg(long, default_value_t = 200)]
        firms: usize,
        #[arg(long, default_value_t = 12)]
        sectors: usize,
        #[arg(long, default_value_t = 2.1)]
        degree_exp: f64,
        #[arg(long, default_value_t = 2.0)]
        weight_exp: f64,
        #[arg(long, default_value_t = 0.15)]
        reciprocity: f64,
        #[arg(long, default_value_t = 0.35)]
        ess_density: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        ess_output: Option<PathBuf>,
        /// Provenance JSON (spec + seed); defaults next to the output.
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Cut a subnetwork out of a loaded network.
    Extract {
        #[command(subcommand)]
        method: ExtractCommand,
    },
    /// Calibrate and emit the per-firm risk profile.
    Esri {
        #[command(flatten)]
        net: NetInput,
        #[command(flatten)]
        calibration: CalibrationArgs,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        t_max: Option<usize>,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Minimize mean risk by constrained link rewiring.
    Optimize {
        #[command(flatten)]
        net: NetInput,
        #[command(flatten)]
        calibration: CalibrationArgs,
        /// Inverse-temperature schedule: `0`, `fixed:<beta>` or
        /// `linear:<beta_max>:<total_steps>`.
        #[arg(long)]
        beta: Option<String>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Full-swap weight tolerance (monetary units).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Out-strength band around empirical values (fraction).
        #[arg(long)]
        band: Option<f64>,
        #[arg(long)]
        record_every: Option<u64>,
        #[arg(long)]
        snapshot_every: Option<u64>,
        #[arg(long)]
        recompute_shares: bool,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        t_max: Option<usize>,
        /// Flat key=value config file; explicit flags win.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replay a previous run bit-identically from its manifest
        /// (overrides every other input flag).
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Summarize a finished optimize run: metrics table and SVG plots.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
        /// Optional β=0 (configuration model) run to include in the table.
        #[arg(long)]
        beta0_run_dir: Option<PathBuf>,
        #[arg(long)]
        output_dir: PathBuf,
        /// Firms shown in the profile comparison plot.
        #[arg(long, default_value_t = 100)]
        top_k: usize,
    },
}

#[derive(Subcommand)]
enum ExtractCommand {
    /// Seed firms of one sector plus overrepresented Tier-1 groups.
    SeedSector {
        #[command(flatten)]
        net: NetInput,
        #[arg(long)]
        seed_sector: String,
        #[arg(long, default_value_t = 16)]
        supplier_groups: usize,
        #[arg(long, default_value_t = 8)]
        customer_groups: usize,
        #[arg(long, default_value_t = 5)]
        min_group_size: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Greedy-modularity community closest to a target size.
    Community {
        #[command(flatten)]
        net: NetInput,
        /// 2-digit divisions kept before clustering, e.g. "10-33" or "10,22".
        #[arg(long)]
        divisions: String,
        #[arg(long)]
        target_size: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

fn init_workers(flag: Option<usize>) {
    let count = flag.or_else(|| {
        std::env::var("SCRISK_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = count {
        if n > 0 {
            // the global pool can only be configured once; later calls no-op
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() {
    let cli = Cli::parse();
    init_workers(cli.workers);
    let result = match cli.command {
        Command::Ingest { net, output, summary } => commands::ingest(net, output, summary),
        Command::Generate {
            firms,
            sectors,
            degree_exp,
            weight_exp,
            reciprocity,
            ess_density,
            seed,
            output,
            ess_output,
            provenance,
        } => commands::generate(
            firms, sectors, degree_exp, weight_exp, reciprocity, ess_density, seed, output,
            ess_output, provenance,
        ),
        Command::Extract { method } => match method {
            ExtractCommand::SeedSector {
                net,
                seed_sector,
                supplier_groups,
                customer_groups,
                min_group_size,
                output,
            } => commands::extract_seed(
                net,
                seed_sector,
                supplier_groups,
                customer_groups,
                min_group_size,
                output,
            ),
            ExtractCommand::Community {
                net,
                divisions,
                target_size,
                output,
            } => commands::extract_community(net, divisions, target_size, output),
        },
        Command::Esri {
            net,
            calibration,
            tol,
            t_max,
            output_dir,
        } => commands::esri(net, calibration, tol, t_max, output_dir),
        Command::Optimize {
            net,
            calibration,
            beta,
            steps,
            seed,
            epsilon,
            band,
            record_every,
            snapshot_every,
            recompute_shares,
            tol,
            t_max,
            config,
            manifest,
            output_dir,
        } => commands::optimize(commands::OptimizeArgs {
            net,
            calibration,
            beta,
            steps,
            seed,
            epsilon,
            band,
            record_every,
            snapshot_every,
            recompute_shares,
            tol,
            t_max,
            config,
            manifest,
            output_dir,
        }),
        Command::Report {
            run_dir,
            beta0_run_dir,
            output_dir,
            top_k,
        } => commands::report(run_dir, beta0_run_dir, output_dir, top_k),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
