//! Subcommand implementations.

use std::path::PathBuf;
use std::time::Instant;

use scrisk::artifacts::{
    self, file_digest, profile_summary, write_json, write_profile_csv, FileRunSink, ReportRow,
    RunManifest, RunSummary,
};
use scrisk::cascade::{self, CascadeConfig};
use scrisk::edgelist::{self, LoadOptions};
use scrisk::error::{Error, Result};
use scrisk::extract as xt;
use scrisk::metrics;
use scrisk::network::ScNetwork;
use scrisk::optimizer::{self, AnnealSchedule, RunConfig};
use scrisk::plot;
use scrisk::production::{self, Essentiality, EssentialityMatrix, ProductionModel};
use scrisk::rewire::SwapConstraints;
use scrisk::synth::{self, Provenance, SynthSpec};
use scrisk::weight::Weight;

use crate::config::FileConfig;
use crate::{CalibrationArgs, NetInput};

fn load_options(min_weight: Option<f64>) -> Result<LoadOptions> {
    Ok(match min_weight {
        Some(v) => LoadOptions {
            min_weight: Weight::from_f64(v)?,
        },
        None => LoadOptions::default(),
    })
}

fn load_net(net: &NetInput) -> Result<ScNetwork> {
    let opts = load_options(net.min_weight)?;
    edgelist::load_edge_list(&net.input, net.mode.into(), &opts)
}

fn default_class(calibration: &CalibrationArgs) -> Result<Essentiality> {
    if calibration.default_essential {
        return Ok(Essentiality::Essential);
    }
    Essentiality::from_code(&calibration.default_class).map_err(Error::Config)
}

fn load_essentiality(calibration: &CalibrationArgs) -> Result<EssentialityMatrix> {
    let default = default_class(calibration)?;
    match &calibration.essentiality {
        Some(path) => EssentialityMatrix::load_csv(path, default),
        None => Ok(EssentialityMatrix::uniform(default)),
    }
}

fn calibrate(net: &ScNetwork, calibration: &CalibrationArgs) -> Result<ProductionModel> {
    let ess = load_essentiality(calibration)?;
    production::calibrate(net, &ess, calibration.gamma_ne.unwrap_or(0.5))
}

pub fn ingest(net_args: NetInput, output: PathBuf, summary: Option<PathBuf>) -> Result<()> {
    let opts = load_options(net_args.min_weight)?;
    let (net, stats) =
        edgelist::load_edge_list_with_stats(&net_args.input, net_args.mode.into(), &opts)?;
    edgelist::write_edge_list(&net, &output)?;
    println!(
        "ingested {} rows: {} firms, {} links kept ({} below threshold, {} self-loops, {} merged)",
        stats.rows,
        net.n_firms(),
        net.n_links(),
        stats.dropped_below_min,
        stats.dropped_self_loops,
        stats.merged_duplicates
    );
    if let Some(path) = summary {
        write_json(
            &serde_json::json!({
                "rows": stats.rows,
                "kept_links": stats.kept,
                "n_firms": net.n_firms(),
                "dropped_below_min": stats.dropped_below_min,
                "dropped_self_loops": stats.dropped_self_loops,
                "dropped_zero_weight": stats.dropped_zero_weight,
                "merged_duplicates": stats.merged_duplicates,
                "mode": net.mode(),
            }),
            path,
        )?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn generate(
    firms: usize,
    sectors: usize,
    degree_exp: f64,
    weight_exp: f64,
    reciprocity: f64,
    ess_density: f64,
    seed: u64,
    output: PathBuf,
    ess_output: Option<PathBuf>,
    provenance: Option<PathBuf>,
) -> Result<()> {
    let spec = SynthSpec {
        n_firms: firms,
        n_sectors: sectors,
        degree_exponent: degree_exp,
        weight_exponent: weight_exp,
        reciprocity_target: reciprocity,
        essentiality_density: ess_density,
        seed,
    };
    let (net, ess) = synth::generate_synthetic(&spec)?;
    edgelist::write_edge_list(&net, &output)?;
    let ess_path = ess_output.unwrap_or_else(|| output.with_extension("essentiality.csv"));
    ess.write_csv(&ess_path)?;
    let prov_path = provenance.unwrap_or_else(|| output.with_extension("provenance.json"));
    write_json(
        &Provenance {
            spec,
            n_firms: net.n_firms(),
            n_links: net.n_links(),
        },
        prov_path,
    )?;
    println!(
        "generated {} firms, {} links → {}",
        net.n_firms(),
        net.n_links(),
        output.display()
    );
    Ok(())
}

pub fn extract_seed(
    net_args: NetInput,
    seed_sector: String,
    supplier_groups: usize,
    customer_groups: usize,
    min_group_size: usize,
    output: PathBuf,
) -> Result<()> {
    let net = load_net(&net_args)?;
    let spec = xt::SeedSectorSpec {
        seed_sector,
        n_supplier_groups: supplier_groups,
        n_customer_groups: customer_groups,
        min_group_size,
    };
    let sub = xt::extract_seed_sector(&net, &spec)?;
    edgelist::write_edge_list(&sub, &output)?;
    write_json(
        &serde_json::json!({ "method": "seed-sector", "spec": spec,
                             "n_firms": sub.n_firms(), "n_links": sub.n_links() }),
        output.with_extension("provenance.json"),
    )?;
    println!("extracted {} firms, {} links", sub.n_firms(), sub.n_links());
    Ok(())
}

pub fn extract_community(
    net_args: NetInput,
    divisions: String,
    target_size: usize,
    output: PathBuf,
) -> Result<()> {
    let net = load_net(&net_args)?;
    let spec = xt::CommunitySpec {
        section_filter: divisions,
        target_size,
    };
    let sub = xt::extract_community(&net, &spec)?;
    edgelist::write_edge_list(&sub, &output)?;
    write_json(
        &serde_json::json!({ "method": "community", "spec": spec,
                             "n_firms": sub.n_firms(), "n_links": sub.n_links() }),
        output.with_extension("provenance.json"),
    )?;
    println!("extracted {} firms, {} links", sub.n_firms(), sub.n_links());
    Ok(())
}

pub fn esri(
    net_args: NetInput,
    calibration: CalibrationArgs,
    tol: Option<f64>,
    t_max: Option<usize>,
    output_dir: PathBuf,
) -> Result<()> {
    let net = load_net(&net_args)?;
    let model = calibrate(&net, &calibration)?;
    let cfg = CascadeConfig {
        tol: tol.unwrap_or(1e-6),
        t_max: t_max.unwrap_or(1000),
    };
    let profile = cascade::risk_profile(&net, &model, &cfg)?;
    std::fs::create_dir_all(&output_dir)
        .map_err(|e| Error::io(output_dir.display().to_string(), e))?;
    write_profile_csv(&net, &profile, output_dir.join("profile.csv"))?;
    write_json(
        &profile_summary(&net, &profile, 20),
        output_dir.join("summary.json"),
    )?;
    println!("mean ESRI = {}", profile.mean);
    if !profile.converged() {
        eprintln!(
            "warning: {} cascade(s) hit t_max before tol",
            profile.non_converged.len()
        );
    }
    Ok(())
}

pub struct OptimizeArgs {
    pub net: NetInput,
    pub calibration: CalibrationArgs,
    pub beta: Option<String>,
    pub steps: Option<u64>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub band: Option<f64>,
    pub record_every: Option<u64>,
    pub snapshot_every: Option<u64>,
    pub recompute_shares: bool,
    pub tol: Option<f64>,
    pub t_max: Option<usize>,
    pub config: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub output_dir: PathBuf,
}

pub fn parse_beta(spec: &str) -> Result<AnnealSchedule> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("bad --beta '{spec}', want 0, fixed:<v> or linear:<max>:<steps>"));
    match parts.as_slice() {
        ["0"] => Ok(AnnealSchedule::fixed(0.0)),
        [v] => v.parse().map(AnnealSchedule::fixed).map_err(|_| bad()),
        ["fixed", v] => v.parse().map(AnnealSchedule::fixed).map_err(|_| bad()),
        ["linear", max, steps] => {
            let beta_max: f64 = max.parse().map_err(|_| bad())?;
            let total: u64 = steps.parse().map_err(|_| bad())?;
            Ok(AnnealSchedule::linear(beta_max, total))
        }
        _ => Err(bad()),
    }
}

/// Resolves flags + optional config file into the manifest that fully
/// determines a run.
fn resolve_manifest(args: &OptimizeArgs) -> Result<RunManifest> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let steps = file.resolve(args.steps, "steps", 10_000)?;
    let beta_spec: Option<String> = file.resolve_opt(args.beta.clone(), "beta")?;
    let schedule = match beta_spec {
        Some(s) => parse_beta(&s)?,
        None => AnnealSchedule::linear(10_000.0, steps),
    };
    let seed = file.resolve(args.seed, "seed", 1)?;
    let epsilon = file.resolve(args.epsilon, "epsilon", 3000.0)?;
    let band = file.resolve(args.band, "band", 0.20)?;
    let record_every = file.resolve(args.record_every, "record_every", 1)?;
    let snapshot_every = file.resolve(args.snapshot_every, "snapshot_every", 0)?;
    let tol = file.resolve(args.tol, "tol", 1e-6)?;
    let t_max = file.resolve(args.t_max, "t_max", 1000)?;
    let gamma_ne = file.resolve(args.calibration.gamma_ne, "gamma_ne", 0.5)?;
    let min_weight = file.resolve(args.net.min_weight, "min_weight", 3000.0)?;
    let recompute_shares = args.recompute_shares
        || file.get("recompute_shares").map(|v| v == "true").unwrap_or(false);

    let config = RunConfig {
        steps,
        schedule,
        constraints: SwapConstraints {
            epsilon: Weight::from_f64(epsilon)?,
            out_strength_band: band,
            resample_factor: 10,
        },
        cascade: CascadeConfig { tol, t_max },
        seed,
        record_every,
        snapshot_every,
        recompute_shares,
    };
    let default = default_class(&args.calibration)?;
    Ok(RunManifest {
        tool_version: artifacts::TOOL_VERSION.to_string(),
        command: "optimize".to_string(),
        network_path: args.net.input.display().to_string(),
        network_digest: file_digest(&args.net.input)?,
        essentiality_path: args
            .calibration
            .essentiality
            .as_ref()
            .map(|p| p.display().to_string()),
        essentiality_digest: args
            .calibration
            .essentiality
            .as_ref()
            .map(file_digest)
            .transpose()?,
        default_essentiality: default.code().to_string(),
        mode: args.net.mode.into(),
        min_weight,
        gamma_ne,
        config,
        elapsed_seconds: 0.0,
    })
}

fn manifest_inputs(manifest: &RunManifest) -> Result<(ScNetwork, ProductionModel)> {
    let opts = LoadOptions {
        min_weight: Weight::from_f64(manifest.min_weight)?,
    };
    let digest = file_digest(&manifest.network_path)?;
    if digest != manifest.network_digest {
        return Err(Error::Data(format!(
            "network file {} changed since the manifest was written",
            manifest.network_path
        )));
    }
    let net = edgelist::load_edge_list(&manifest.network_path, manifest.mode, &opts)?;
    let default = Essentiality::from_code(&manifest.default_essentiality).map_err(Error::Config)?;
    let ess = match &manifest.essentiality_path {
        Some(path) => {
            if let Some(expected) = &manifest.essentiality_digest {
                if &file_digest(path)? != expected {
                    return Err(Error::Data(format!(
                        "essentiality file {path} changed since the manifest was written"
                    )));
                }
            }
            EssentialityMatrix::load_csv(path, default)?
        }
        None => EssentialityMatrix::uniform(default),
    };
    let model = production::calibrate(&net, &ess, manifest.gamma_ne)?;
    Ok((net, model))
}

pub fn optimize(args: OptimizeArgs) -> Result<()> {
    let mut manifest = match &args.manifest {
        Some(path) => RunManifest::read(path)?,
        None => resolve_manifest(&args)?,
    };
    let (mut net, model) = manifest_inputs(&manifest)?;

    std::fs::create_dir_all(&args.output_dir)
        .map_err(|e| Error::io(args.output_dir.display().to_string(), e))?;
    edgelist::write_edge_list(&net, args.output_dir.join("initial.csv"))?;
    manifest.write(args.output_dir.join("manifest.json"))?;

    let mut sink = FileRunSink::create(&args.output_dir)?;
    let started = Instant::now();
    let result = optimizer::run(&mut net, &model, &manifest.config, &mut sink);
    manifest.elapsed_seconds = started.elapsed().as_secs_f64();
    manifest.write(args.output_dir.join("manifest.json"))?;
    let result = result?;

    edgelist::write_edge_list(&net, args.output_dir.join("final.csv"))?;
    if let Some(best) = &result.best_snapshot {
        let best_net = best.restore()?;
        edgelist::write_edge_list(&best_net, args.output_dir.join("best.csv"))?;
    }
    write_json(&RunSummary::from(&result), args.output_dir.join("summary.json"))?;
    println!(
        "{} steps, {} accepted: mean ESRI {} → {} (best {} at step {})",
        result.steps,
        result.accepted,
        result.initial_mean,
        result.final_mean,
        result.best_mean,
        result.best_step
    );
    Ok(())
}

fn metrics_row(artifact: &str, mean_esri: f64, baseline_mean: f64, net: &ScNetwork) -> ReportRow {
    let reduction = if baseline_mean > 0.0 {
        (mean_esri - baseline_mean) / baseline_mean * 100.0
    } else {
        0.0
    };
    ReportRow {
        artifact: artifact.to_string(),
        mean_esri,
        esri_reduction_pct: reduction,
        metrics: metrics::compute_metrics(net),
    }
}

pub fn report(
    run_dir: PathBuf,
    beta0_run_dir: Option<PathBuf>,
    output_dir: PathBuf,
    top_k: usize,
) -> Result<()> {
    let manifest_path = run_dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::Data(format!(
            "{} is not a run directory (missing manifest.json)",
            run_dir.display()
        )));
    }
    let manifest = RunManifest::read(&manifest_path)?;
    let mut missing = Vec::new();
    for name in ["trajectory.csv", "final.csv", "initial.csv"] {
        if !run_dir.join(name).exists() {
            missing.push(name);
        }
    }
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "run directory {} is missing: {}",
            run_dir.display(),
            missing.join(", ")
        )));
    }
    std::fs::create_dir_all(&output_dir)
        .map_err(|e| Error::io(output_dir.display().to_string(), e))?;

    // networks are re-scored with the manifest's calibration inputs
    let (empirical, model) = manifest_inputs(&manifest)?;
    let no_filter = LoadOptions {
        min_weight: Weight::ZERO,
    };
    let final_net = edgelist::load_edge_list(run_dir.join("final.csv"), manifest.mode, &no_filter)?;
    if final_net.n_firms() != empirical.n_firms() {
        return Err(Error::Data(
            "final network covers a different firm set than the input".into(),
        ));
    }
    let shares = cascade::market_shares(&empirical, &model);
    let cfg = &manifest.config.cascade;
    let profile_before = cascade::risk_profile_with_shares(&empirical, &model, &shares, cfg)?;
    // final.csv preserves firm ids only through external names; remap via loader order
    let final_aligned = align_firms(&empirical, &final_net)?;
    let profile_after = cascade::risk_profile_with_shares(&final_aligned, &model, &shares, cfg)?;

    let mut rows = vec![
        metrics_row("empirical", profile_before.mean, profile_before.mean, &empirical),
        metrics_row("risk_mitigated", profile_after.mean, profile_before.mean, &final_aligned),
    ];
    if let Some(dir) = &beta0_run_dir {
        let b0 = edgelist::load_edge_list(dir.join("final.csv"), manifest.mode, &no_filter)?;
        let b0_aligned = align_firms(&empirical, &b0)?;
        let b0_profile = cascade::risk_profile_with_shares(&b0_aligned, &model, &shares, cfg)?;
        rows.push(metrics_row(
            "configuration_model",
            b0_profile.mean,
            profile_before.mean,
            &b0_aligned,
        ));
    }
    std::fs::write(output_dir.join("summary.csv"), artifacts::report_table_csv(&rows))
        .map_err(|e| Error::io(output_dir.display().to_string(), e))?;
    write_json(&rows, output_dir.join("summary.json"))?;

    // profile diff table
    let diff = optimizer::compare_profiles(&profile_before, &profile_after)?;
    let mut diff_csv = String::from("firm,esri_before,esri_after,delta\n");
    for firm in empirical.firms() {
        diff_csv.push_str(&format!(
            "{},{},{},{}\n",
            firm.external,
            profile_before.esri[firm.id.index()],
            profile_after.esri[firm.id.index()],
            diff.delta[firm.id.index()]
        ));
    }
    std::fs::write(output_dir.join("profile_diff.csv"), diff_csv)
        .map_err(|e| Error::io(output_dir.display().to_string(), e))?;

    // plots
    let trajectory = artifacts::read_trajectory_csv(run_dir.join("trajectory.csv"))?;
    let points: Vec<(f64, f64)> = trajectory
        .iter()
        .map(|r| (r.step as f64, r.mean_esri))
        .collect();
    std::fs::write(
        output_dir.join("trajectory.svg"),
        plot::trajectory_svg(&points, profile_before.mean, "mean ESRI vs rewiring steps"),
    )
    .map_err(|e| Error::io(output_dir.display().to_string(), e))?;
    std::fs::write(
        output_dir.join("profile_compare.svg"),
        plot::profile_compare_svg(
            &profile_before.esri,
            &profile_after.esri,
            top_k,
            "risk profile before/after rewiring",
        ),
    )
    .map_err(|e| Error::io(output_dir.display().to_string(), e))?;
    for (name, net, profile) in [
        ("degree_vs_esri_empirical.svg", &empirical, &profile_before),
        ("degree_vs_esri_final.svg", &final_aligned, &profile_after),
    ] {
        let points: Vec<(f64, f64)> = net
            .firms()
            .iter()
            .map(|f| {
                let k = net.in_links(f.id).len() + net.out_links(f.id).len();
                (k as f64, profile.esri[f.id.index()])
            })
            .collect();
        std::fs::write(
            output_dir.join(name),
            plot::scatter_loglog_svg(&points, "total degree", "ESRI", "degree vs risk"),
        )
        .map_err(|e| Error::io(output_dir.display().to_string(), e))?;
    }

    // metrics per stored snapshot
    let snap_dir = run_dir.join("snapshots");
    let mut series: Vec<(String, ScNetwork)> = Vec::new();
    if snap_dir.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&snap_dir)
            .map_err(|e| Error::io(snap_dir.display().to_string(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        entries.sort();
        for path in entries {
            match edgelist::load_edge_list(&path, manifest.mode, &no_filter) {
                Ok(net) => {
                    let label = path.file_stem().unwrap().to_string_lossy().to_string();
                    series.push((label, net));
                }
                Err(e) => eprintln!("warning: skipping snapshot {}: {e}", path.display()),
            }
        }
    }
    let mut rows_csv = String::from("snapshot,metric,value\n");
    for (label, metric, value) in
        metrics::metrics_trajectory(series.iter().map(|(l, n)| (l.clone(), n)))
    {
        rows_csv.push_str(&format!("{label},{metric},{value}\n"));
    }
    std::fs::write(output_dir.join("metrics_trajectory.csv"), rows_csv)
        .map_err(|e| Error::io(output_dir.display().to_string(), e))?;

    println!(
        "report written to {}: mean ESRI {} → {} ({:+.1}%)",
        output_dir.display(),
        profile_before.mean,
        profile_after.mean,
        (profile_after.mean - profile_before.mean) / profile_before.mean * 100.0
    );
    Ok(())
}

/// Rebuilds `other` with firm ids aligned to `reference` (matching external
/// ids), so profiles computed on both index the same firms.
fn align_firms(reference: &ScNetwork, other: &ScNetwork) -> Result<ScNetwork> {
    use scrisk::network::NetworkBuilder;
    if reference.n_firms() != other.n_firms() {
        return Err(Error::Data("firm sets differ".into()));
    }
    let mut b = NetworkBuilder::new(other.mode());
    for firm in reference.firms() {
        b.add_firm(
            &firm.external,
            reference.sector_code(firm.sector).clone(),
        );
    }
    let mut ids: Vec<_> = other.live_links().to_vec();
    ids.sort_unstable();
    for id in ids {
        let l = other.link(id);
        let s = b
            .firm_id(&other.firm(l.source).external)
            .ok_or_else(|| Error::Data("firm sets differ".into()))?;
        let t = b
            .firm_id(&other.firm(l.target).external)
            .ok_or_else(|| Error::Data("firm sets differ".into()))?;
        b.add_link(s, t, l.weight)?;
    }
    b.finish()
}
