//! Acceptance suite. One test per criterion; each prints a `criterion N:
//! PASS` line (visible with `--nocapture`). The desk-scale trend criteria
//! (5 and 10) share one pair of 20,000-step runs on the committed
//! equilibrated fixture, so expect this suite to take several minutes.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use scrisk::cascade::{
    market_shares, risk_profile_with_shares, run_cascade, CascadeConfig, RiskProfile,
};
use scrisk::edgelist::{self, LoadOptions};
use scrisk::network::{FirmId, Mode, ScNetwork};
use scrisk::optimizer::{
    compare_profiles, decide_accept, run, AnnealSchedule, NullSink, RunConfig,
};
use scrisk::production::{calibrate, Essentiality, EssentialityMatrix, ProductionModel};
use scrisk::rewire::{apply, revert, sample_swap, EditOp, StrengthTables, SwapConstraints};
use scrisk::synth::{generate_synthetic, SynthSpec};
use scrisk::weight::Weight;

fn fixture_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures"))
}

// ---------------------------------------------------------------------------
// criterion 1 — oracle equivalence on small random networks
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_oracle_equivalence() {
    let started = Instant::now();
    // run both implementations to the numerical fixed point; stopping at a
    // looser tol could differ by one iteration right at the threshold
    let cfg = CascadeConfig {
        tol: 1e-15,
        t_max: 20_000,
    };
    let mut networks = 0;
    let mut worst = 0.0f64;
    for seed in 0..60u64 {
        let n_firms = 4 + (seed as usize % 9); // 4..=12
        let spec = SynthSpec {
            n_firms,
            n_sectors: 2 + (seed as usize % 3).min(n_firms - 1),
            degree_exponent: 2.0,
            weight_exponent: 3.0,
            reciprocity_target: 0.1,
            essentiality_density: 0.4,
            seed,
        };
        let (net, ess) = generate_synthetic(&spec).unwrap();
        let model = calibrate(&net, &ess, 0.5).unwrap();
        let shares = market_shares(&net, &model);
        let profile = risk_profile_with_shares(&net, &model, &shares, &cfg).unwrap();
        let oracle = common::naive_esri_profile(&net, &ess, 0.5, cfg.tol, cfg.t_max);
        for (i, (a, b)) in profile.esri.iter().zip(&oracle).enumerate() {
            let diff = (a - b).abs();
            worst = worst.max(diff);
            assert!(
                diff < 1e-9,
                "seed {seed} firm {i}: engine {a} vs oracle {b}"
            );
        }
        networks += 1;
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(networks >= 50);
    assert!(elapsed < 60.0, "criterion 1 runtime {elapsed:.1}s ≥ 60s");
    println!(
        "criterion 1: PASS — {networks} networks, max |engine−oracle| = {worst:.2e}, {elapsed:.1}s"
    );
}

// ---------------------------------------------------------------------------
// criterion 2 — swap invariants over 10^5 accepted swaps
// ---------------------------------------------------------------------------

fn affected_sources(net: &ScNetwork, ops: &[EditOp]) -> BTreeSet<FirmId> {
    let mut firms = BTreeSet::new();
    for op in ops {
        match *op {
            EditOp::SetSource { from, to, .. } => {
                firms.insert(from);
                firms.insert(to);
            }
            EditOp::Remove { source, .. } | EditOp::CreateAt { source, .. } => {
                firms.insert(source);
            }
            EditOp::AddWeight { link, .. } | EditOp::SubWeight { link, .. } => {
                if let Some(l) = net.link_opt(link) {
                    firms.insert(l.source);
                }
            }
        }
    }
    firms
}

fn band_ok(net: &ScNetwork, firm: FirmId, band_milli: u128) -> bool {
    let emp = net.firm(firm).out_strength0.hundredths() as u128;
    let cur = net.cur_out_strength(firm).hundredths() as u128 * 1000;
    cur >= emp * (1000 - band_milli) && cur <= emp * (1000 + band_milli)
}

fn run_swap_storm(net: &mut ScNetwork, swaps: usize, seed: u64) -> (usize, usize) {
    let constraints = SwapConstraints::default();
    let empirical = StrengthTables::capture(net);
    let total0 = net.total_weight();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partials = 0;
    let mut merges = 0;
    for step in 0..swaps {
        let proposal = sample_swap(net, &mut rng, &constraints).unwrap();
        if proposal.kind == scrisk::rewire::SwapKind::Partial {
            partials += 1;
        }
        apply(net, &proposal).unwrap();
        if proposal
            .ops
            .iter()
            .any(|op| matches!(op, EditOp::AddWeight { .. }))
        {
            merges += 1;
        }
        // at every step: exact total weight and the band on touched firms
        assert_eq!(net.total_weight(), total0, "step {step}: total weight");
        for firm in affected_sources(net, &proposal.ops) {
            assert!(
                band_ok(net, firm, 200),
                "step {step}: {firm:?} left its out-strength band"
            );
        }
        if (step + 1) % 5000 == 0 {
            empirical.verify(net, &constraints).unwrap();
        }
    }
    empirical.verify(net, &constraints).unwrap();
    (partials, merges)
}

#[test]
fn criterion_2_swap_invariants() {
    let started = Instant::now();
    let spec = SynthSpec {
        n_firms: 500,
        n_sectors: 10,
        degree_exponent: 2.0,
        weight_exponent: 2.5,
        reciprocity_target: 0.10,
        essentiality_density: 0.3,
        seed: 1234,
    };
    let (weighted, _) = generate_synthetic(&spec).unwrap();
    let mut net = weighted.clone();
    let (partials, merges) = run_swap_storm(&mut net, 100_000, 7);
    let weighted_elapsed = started.elapsed().as_secs_f64();
    assert!(
        weighted_elapsed < 300.0,
        "criterion 2 weighted runtime {weighted_elapsed:.1}s ≥ 300s"
    );
    assert!(partials > 0 && merges > 0, "storm must exercise splits and merges");

    // unweighted variant: binarize through the loader
    let mut text = String::new();
    edgelist::render_edge_list(&weighted, &mut text);
    let (mut unweighted, _) = edgelist::parse_edge_list(
        &text,
        "mem",
        Mode::Unweighted,
        &LoadOptions {
            min_weight: Weight::ZERO,
        },
    )
    .unwrap();
    let degrees: Vec<(usize, usize)> = unweighted
        .firms()
        .iter()
        .map(|f| (unweighted.in_links(f.id).len(), unweighted.out_links(f.id).len()))
        .collect();
    run_swap_storm(&mut unweighted, 100_000, 8);
    let after: Vec<(usize, usize)> = unweighted
        .firms()
        .iter()
        .map(|f| (unweighted.in_links(f.id).len(), unweighted.out_links(f.id).len()))
        .collect();
    assert_eq!(degrees, after, "per-node degrees drifted");
    unweighted.check_index_consistency().unwrap();

    println!(
        "criterion 2: PASS — 2×100000 swaps ({partials} partial, {merges} merged), weighted in {weighted_elapsed:.1}s, total {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// criterion 3 — reversibility over 10^4 apply/revert cycles
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_reversibility() {
    let spec = SynthSpec {
        n_firms: 120,
        n_sectors: 6,
        degree_exponent: 2.0,
        weight_exponent: 2.5,
        reciprocity_target: 0.15,
        essentiality_density: 0.3,
        seed: 99,
    };
    let (mut net, _) = generate_synthetic(&spec).unwrap();
    let constraints = SwapConstraints::default();
    let original = net.link_multiset();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut merges = 0;
    for cycle in 0..10_000 {
        let proposal = sample_swap(&net, &mut rng, &constraints).unwrap();
        if proposal
            .ops
            .iter()
            .any(|op| matches!(op, EditOp::AddWeight { .. }))
        {
            merges += 1;
        }
        apply(&mut net, &proposal).unwrap();
        revert(&mut net, &proposal).unwrap();
        assert_eq!(net.link_multiset(), original, "cycle {cycle} broke the multiset");
    }
    assert!(merges > 0, "cycles must include partial-swap merges");
    net.check_index_consistency().unwrap();
    println!("criterion 3: PASS — 10000 apply/revert cycles ({merges} with merges), multiset exact");
}

// ---------------------------------------------------------------------------
// criterion 4 — MH acceptance law
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_acceptance_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 10_000;
    let hits = (0..n)
        .filter(|_| decide_accept(0.001, 1000.0, &mut rng))
        .count();
    let rate = hits as f64 / n as f64;
    let p = (-1.0f64).exp();
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!(
        (rate - p).abs() < 3.0 * sigma,
        "rate {rate} vs e^-1 {p} ± {}",
        3.0 * sigma
    );
    println!(
        "criterion 4: PASS — acceptance {rate:.4} vs e^-1 = {p:.4} (3σ = {:.4})",
        3.0 * sigma
    );
}

// ---------------------------------------------------------------------------
// criteria 5 & 10 — annealing reduces risk; top firms drive the reduction
// ---------------------------------------------------------------------------

struct TrendOutcome {
    initial: RiskProfile,
    annealed: RiskProfile,
    anneal_change: f64,
    /// Relative deviation of the β=0 trajectory average from the initial
    /// level (the reference table reports configuration-model rows as
    /// trajectory averages after burn-in).
    beta0_avg_change: f64,
    beta0_end_change: f64,
    anneal_secs: f64,
    beta0_secs: f64,
}

fn load_trend_fixture() -> (ScNetwork, ProductionModel) {
    let net = edgelist::load_edge_list(
        fixture_dir().join("accept_net.csv"),
        Mode::Weighted,
        &LoadOptions {
            min_weight: Weight::ZERO,
        },
    )
    .unwrap();
    let ess = EssentialityMatrix::load_csv(
        fixture_dir().join("accept_ess.csv"),
        Essentiality::NonEssential,
    )
    .unwrap();
    let model = calibrate(&net, &ess, 0.5).unwrap();
    (net, model)
}

fn trend_outcome() -> &'static TrendOutcome {
    static OUTCOME: OnceLock<TrendOutcome> = OnceLock::new();
    OUTCOME.get_or_init(|| {
        let (net, model) = load_trend_fixture();
        assert_eq!(net.n_firms(), 200);
        let steps = 20_000u64;
        let cascade = CascadeConfig::default();
        let shares = market_shares(&net, &model);
        let initial = risk_profile_with_shares(&net, &model, &shares, &cascade).unwrap();

        let mut annealed_net = net.clone();
        let cfg = RunConfig {
            cascade,
            ..RunConfig::new(steps, AnnealSchedule::linear(12_000.0, steps), 2024)
        };
        let t0 = Instant::now();
        let anneal = run(&mut annealed_net, &model, &cfg, &mut NullSink).unwrap();
        let anneal_secs = t0.elapsed().as_secs_f64();

        let mut beta0_net = net.clone();
        let cfg0 = RunConfig {
            cascade,
            ..RunConfig::new(steps, AnnealSchedule::fixed(0.0), 2025)
        };
        let t0 = Instant::now();
        let beta0 = run(&mut beta0_net, &model, &cfg0, &mut NullSink).unwrap();
        let beta0_secs = t0.elapsed().as_secs_f64();
        let beta0_avg = beta0
            .trajectory
            .iter()
            .map(|r| r.mean_esri)
            .sum::<f64>()
            / beta0.trajectory.len() as f64;

        let annealed =
            risk_profile_with_shares(&annealed_net, &model, &shares, &cascade).unwrap();
        assert!((annealed.mean - anneal.final_mean).abs() < 1e-12);
        TrendOutcome {
            initial,
            annealed,
            anneal_change: (anneal.final_mean - anneal.initial_mean) / anneal.initial_mean,
            beta0_avg_change: (beta0_avg - beta0.initial_mean) / beta0.initial_mean,
            beta0_end_change: (beta0.final_mean - beta0.initial_mean) / beta0.initial_mean,
            anneal_secs,
            beta0_secs,
        }
    })
}

#[test]
fn criterion_5_annealing_reduces_risk_and_beta0_holds() {
    let outcome = trend_outcome();
    assert!(
        outcome.anneal_change <= -0.10,
        "annealing changed mean by {:+.1}%, need ≤ −10%",
        outcome.anneal_change * 100.0
    );
    assert!(
        outcome.beta0_avg_change.abs() <= 0.10,
        "β=0 trajectory average deviates {:+.1}% from initial, need within ±10%",
        outcome.beta0_avg_change * 100.0
    );
    println!(
        "criterion 5: PASS — annealing {:+.1}% (run {:.0}s), β=0 avg dev {:+.1}% / endpoint {:+.1}% (run {:.0}s)",
        outcome.anneal_change * 100.0,
        outcome.anneal_secs,
        outcome.beta0_avg_change * 100.0,
        outcome.beta0_end_change * 100.0,
        outcome.beta0_secs
    );
}

#[test]
fn criterion_10_top_firms_lose_risk() {
    let outcome = trend_outcome();
    let diff = compare_profiles(&outcome.initial, &outcome.annealed).unwrap();
    let top10 = diff.top_k_mean_delta(10);
    assert!(
        top10 < 0.0,
        "mean ESRI delta of the 10 riskiest initial firms is {top10:+.5}, expected < 0"
    );
    println!(
        "criterion 10: PASS — top-10 riskiest firms' mean ESRI delta {top10:+.5}"
    );
}

// ---------------------------------------------------------------------------
// criterion 6 — monotone, convergent cascades on the fixture suite
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_monotone_convergent_cascades() {
    let cfg = CascadeConfig::default();
    let mut cascades = 0usize;

    // explicit componentwise monotonicity across iteration prefixes
    let spec = SynthSpec {
        n_firms: 12,
        n_sectors: 3,
        degree_exponent: 2.0,
        weight_exponent: 3.0,
        reciprocity_target: 0.1,
        essentiality_density: 0.4,
        seed: 5,
    };
    let (small, ess) = generate_synthetic(&spec).unwrap();
    let model = calibrate(&small, &ess, 0.5).unwrap();
    let shares = market_shares(&small, &model);
    for origin in small.firms().iter().map(|f| f.id) {
        let mut prev: Option<Vec<f64>> = None;
        for t_cap in 1..=15 {
            let capped = CascadeConfig {
                tol: 1e-15,
                t_max: t_cap,
            };
            let state = run_cascade(&small, &model, &shares, origin, &capped).unwrap();
            if let Some(prev) = &prev {
                for (a, b) in prev.iter().zip(&state.h) {
                    assert!(b <= a, "h increased between iteration prefixes");
                }
            }
            prev = Some(state.h);
        }
    }

    // every cascade on the fixture suite converges below tol before t_max
    let mut suites: Vec<(ScNetwork, ProductionModel)> = Vec::new();
    for seed in [5u64, 6, 7] {
        let spec = SynthSpec {
            n_firms: 40,
            n_sectors: 5,
            degree_exponent: 2.2,
            weight_exponent: 3.0,
            reciprocity_target: 0.05,
            essentiality_density: 0.2,
            seed,
        };
        let (net, ess) = generate_synthetic(&spec).unwrap();
        let model = calibrate(&net, &ess, 0.5).unwrap();
        suites.push((net, model));
    }
    suites.push(load_trend_fixture());
    for (net, model) in &suites {
        let shares = market_shares(net, model);
        for origin in net.firms().iter().map(|f| f.id) {
            let state = run_cascade(net, model, &shares, origin, &cfg).unwrap();
            assert!(
                state.converged,
                "origin {origin:?} hit t_max before tol on a fixture"
            );
            assert!(state.t <= cfg.t_max);
            cascades += 1;
        }
    }
    println!("criterion 6: PASS — {cascades} cascades converged, prefix monotonicity verified");
}

// ---------------------------------------------------------------------------
// criterion 7 — annealing schedule arithmetic
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_schedule_arithmetic() {
    let schedule = AnnealSchedule::linear(12_800.0, 50_000);
    let beta = schedule.beta(25_000);
    assert_eq!(beta, 6_400.0);
    println!("criterion 7: PASS — β(25000; linear 12800/50000) = {beta}");
}

// ---------------------------------------------------------------------------
// criterion 8 — metrics vs brute force
// ---------------------------------------------------------------------------

fn metrics_match(net: &ScNetwork, label: &str) {
    let got = scrisk::metrics::compute_metrics(net);
    let want = common::reference_metrics(net);
    assert_eq!(got.n_nodes, want.n_nodes, "{label}: n_nodes");
    assert_eq!(got.n_links, want.n_links, "{label}: n_links");
    assert_eq!(got.diameter, want.diameter, "{label}: diameter");
    assert_eq!(got.top3_scc_sizes, want.top3_scc_sizes, "{label}: scc");
    assert_eq!(got.largest_wcc_size, want.largest_wcc_size, "{label}: wcc");
    for (name, a, b) in [
        ("mean_total_degree", got.mean_total_degree, want.mean_total_degree),
        (
            "mean_neighbor_total_degree",
            got.mean_neighbor_total_degree,
            want.mean_neighbor_total_degree,
        ),
        ("global_clustering", got.global_clustering, want.global_clustering),
        ("avg_shortest_path", got.avg_shortest_path, want.avg_shortest_path),
        ("reciprocity", got.reciprocity, want.reciprocity),
    ] {
        assert!((a - b).abs() <= 1e-12, "{label}: {name} {a} vs {b}");
    }
}

#[test]
fn criterion_8_metrics_vs_brute_force() {
    let started = Instant::now();
    let mut total = 0u64;
    for n in 1..=5usize {
        let pairs: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|i| (0..n as u32).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        let m = pairs.len();
        let count = 1u32 << m;
        (0..count).into_par_iter().for_each(|mask| {
            let arcs: Vec<(u32, u32)> = (0..m)
                .filter(|&b| mask & (1 << b) != 0)
                .map(|b| pairs[b])
                .collect();
            let net = common::net_from_arcs(n, &arcs);
            metrics_match(&net, &format!("n={n} mask={mask}"));
        });
        total += count as u64;
    }
    // 100 random 8-node digraphs, parallel links included
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for case in 0..100 {
        let mut arcs = Vec::new();
        for _ in 0..rng.random_range(0..40) {
            let s = rng.random_range(0..8u32);
            let t = rng.random_range(0..8u32);
            if s != t {
                arcs.push((s, t));
            }
        }
        let net = common::net_from_arcs(8, &arcs);
        metrics_match(&net, &format!("random8 {case}"));
    }
    println!(
        "criterion 8: PASS — {total} enumerated digraphs + 100 random 8-node graphs in {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// criterion 9 — manifest replay determinism through the CLI
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_manifest_replay_determinism() {
    let bin = env!("CARGO_BIN_EXE_scrisk");
    let dir = std::env::temp_dir().join(format!("scrisk-accept9-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let net = dir.join("net.csv").display().to_string();
    let ess = dir.join("ess.csv").display().to_string();
    let run_cmd = |args: &[&str]| {
        let out = std::process::Command::new(bin)
            .args(args)
            .env("SCRISK_WORKERS", "2")
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{:?}: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
    };
    run_cmd(&[
        "generate", "--firms", "50", "--sectors", "5", "--seed", "31", "--output", &net,
        "--ess-output", &ess,
    ]);
    let run1 = dir.join("run1").display().to_string();
    run_cmd(&[
        "optimize", "--input", &net, "--essentiality", &ess, "--steps", "80", "--beta",
        "linear:6000:80", "--seed", "17", "--output-dir", &run1,
    ]);
    let replay = dir.join("replay").display().to_string();
    let manifest = dir.join("run1/manifest.json").display().to_string();
    run_cmd(&[
        "optimize", "--input", &net, "--manifest", &manifest, "--output-dir", &replay,
    ]);
    let a = std::fs::read(dir.join("run1/trajectory.csv")).unwrap();
    let b = std::fs::read(dir.join("replay/trajectory.csv")).unwrap();
    assert_eq!(a, b, "trajectory bytes differ under manifest replay");
    std::fs::remove_dir_all(&dir).ok();
    println!("criterion 9: PASS — replayed trajectory is byte-identical ({} bytes)", a.len());
}

// ---------------------------------------------------------------------------
// fixture regeneration (not part of the suite)
// ---------------------------------------------------------------------------

/// Rebuilds the committed trend fixture: a fixed-seed 200-firm weighted
/// synthetic network equilibrated by β=0 pre-runs so it is typical of its
/// constrained configuration ensemble, like the empirical networks the
/// trend criteria mirror. Equilibration runs in two phases — the second
/// re-derives market shares from the phase-one state exactly as the
/// acceptance test will after loading the fixture. Run with:
/// `cargo test -p scrisk --test acceptance regenerate_trend_fixture -- --ignored --nocapture`
#[test]
#[ignore]
fn regenerate_trend_fixture() {
    let spec = SynthSpec {
        n_firms: 200,
        n_sectors: 6,
        degree_exponent: 2.2,
        weight_exponent: 3.0,
        reciprocity_target: 0.05,
        essentiality_density: 0.15,
        seed: 42,
    };
    let (net, ess) = generate_synthetic(&spec).unwrap();

    let equilibrate = |start: &ScNetwork, steps: u64, seed: u64| {
        let model = calibrate(start, &ess, 0.5).unwrap();
        let mut state = start.clone();
        let cfg = RunConfig {
            cascade: CascadeConfig::default(),
            ..RunConfig::new(steps, AnnealSchedule::fixed(0.0), seed)
        };
        let result = run(&mut state, &model, &cfg, &mut NullSink).unwrap();
        println!(
            "equilibration ({steps} steps, seed {seed}): mean {:.5} -> {:.5}, {} links",
            result.initial_mean,
            result.final_mean,
            state.n_links()
        );
        (state, result)
    };
    let (phase1, r1) = equilibrate(&net, 30_000, 1);
    // round-trip through the edge list so firm indexing matches a reload
    let mut text = String::new();
    edgelist::render_edge_list(&phase1, &mut text);
    let (phase1, _) = edgelist::parse_edge_list(
        &text,
        "mem",
        Mode::Weighted,
        &LoadOptions {
            min_weight: Weight::ZERO,
        },
    )
    .unwrap();
    let (phase2, r2) = equilibrate(&phase1, 20_000, 1);

    edgelist::write_edge_list(&phase2, fixture_dir().join("accept_net.csv")).unwrap();
    ess.write_csv(fixture_dir().join("accept_ess.csv")).unwrap();
    scrisk::artifacts::write_json(
        &serde_json::json!({
            "generator_spec": spec,
            "equilibration": [
                { "steps": 30000, "seed": 1, "mean_from": r1.initial_mean, "mean_to": r1.final_mean },
                { "steps": 20000, "seed": 1, "recalibrated": true,
                  "mean_from": r2.initial_mean, "mean_to": r2.final_mean },
            ],
        }),
        fixture_dir().join("accept_provenance.json"),
    )
    .unwrap();
}
