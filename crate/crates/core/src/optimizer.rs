//! Metropolis-Hastings chain over network configurations, minimizing the
//! network-average ESRI, with fixed-β and linear simulated-annealing
//! schedules.
//!
//! Each step samples a constraint-preserving swap (resampling on out-strength
//! band rejections), applies it, recomputes the mean ESRI, and accepts with
//! probability min(1, exp(−β·ΔE)) where ΔE is the mean change. Rejected moves
//! revert exactly. β=0 accepts everything (the configuration-model baseline).
//! The step counter advances once per accept/reject decision; band-rejected
//! proposals resample within the same step.
//!
//! Market shares and production parameters stay frozen at their empirical
//! calibration unless `recompute_shares` is set.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{
    market_shares, market_shares_current, risk_profile_with_shares, CascadeConfig, MarketShares,
    RiskProfile,
};
use crate::error::{Error, Result};
use crate::network::{FirmId, NetworkSnapshot, ScNetwork};
use crate::production::ProductionModel;
use crate::rewire::{self, StrengthTables, SwapConstraints, SwapKind, SwapProposal};

/// Inverse-temperature schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum AnnealSchedule {
    Fixed { beta: f64 },
    /// β(step) = beta_max · step / total_steps.
    Linear { beta_max: f64, total_steps: u64 },
}

impl AnnealSchedule {
    pub fn fixed(beta: f64) -> AnnealSchedule {
        AnnealSchedule::Fixed { beta }
    }

    pub fn linear(beta_max: f64, total_steps: u64) -> AnnealSchedule {
        AnnealSchedule::Linear {
            beta_max,
            total_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AnnealSchedule::Fixed { beta } => beta >= 0.0 && beta.is_finite(),
            AnnealSchedule::Linear {
                beta_max,
                total_steps,
            } => beta_max >= 0.0 && beta_max.is_finite() && total_steps >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid schedule {self:?}")))
        }
    }

    pub fn beta(&self, step: u64) -> f64 {
        match *self {
            AnnealSchedule::Fixed { beta } => beta,
            AnnealSchedule::Linear {
                beta_max,
                total_steps,
            } => beta_max * step as f64 / total_steps as f64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub steps: u64,
    pub schedule: AnnealSchedule,
    pub constraints: SwapConstraints,
    pub cascade: CascadeConfig,
    pub seed: u64,
    /// Trajectory record cadence (1 = every MH decision).
    pub record_every: u64,
    /// Snapshot + invariant-verification cadence (0 = never).
    pub snapshot_every: u64,
    /// Recompute market shares from current strengths after accepted swaps.
    pub recompute_shares: bool,
}

impl RunConfig {
    pub fn new(steps: u64, schedule: AnnealSchedule, seed: u64) -> RunConfig {
        RunConfig {
            steps,
            schedule,
            constraints: SwapConstraints::default(),
            cascade: CascadeConfig::default(),
            seed,
            record_every: 1,
            snapshot_every: 0,
            recompute_shares: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::Config("steps must be ≥ 1".into()));
        }
        self.schedule.validate()?;
        self.constraints.validate()?;
        self.cascade.validate()
    }
}

/// One trajectory row per recorded MH decision.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: u64,
    pub beta: f64,
    pub mean_esri: f64,
    pub accepted: bool,
    pub kind: SwapKind,
    pub link_count: usize,
    /// All cascades of this step's evaluation converged below tol.
    pub converged: bool,
}

impl TrajectoryRecord {
    pub const CSV_HEADER: &'static str = "step,beta,mean_esri,accepted,kind,link_count";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.step, self.beta, self.mean_esri, self.accepted, self.kind, self.link_count
        )
    }
}

/// Acceptance rule: accept with probability min(1, exp(−β·ΔE)).
pub fn decide_accept(delta_e: f64, beta: f64, rng: &mut impl Rng) -> bool {
    let p = (-beta * delta_e).exp().min(1.0);
    rng.random::<f64>() < p
}

pub struct MhOutcome {
    pub accepted: bool,
    pub mean: f64,
    pub proposal: SwapProposal,
    pub converged: bool,
}

/// One MH decision: sample a swap, apply, re-score, accept or revert.
pub fn mh_step(
    net: &mut ScNetwork,
    model: &ProductionModel,
    shares: &MarketShares,
    current_mean: f64,
    beta: f64,
    constraints: &SwapConstraints,
    cascade_cfg: &CascadeConfig,
    rng: &mut impl Rng,
) -> Result<MhOutcome> {
    let proposal = rewire::sample_swap(net, rng, constraints)?;
    rewire::apply(net, &proposal)?;
    let profile = risk_profile_with_shares(net, model, shares, cascade_cfg)?;
    let delta_e = profile.mean - current_mean;
    if decide_accept(delta_e, beta, rng) {
        Ok(MhOutcome {
            accepted: true,
            mean: profile.mean,
            proposal,
            converged: profile.converged(),
        })
    } else {
        rewire::revert(net, &proposal)?;
        Ok(MhOutcome {
            accepted: false,
            mean: current_mean,
            proposal,
            converged: profile.converged(),
        })
    }
}

/// Streaming observer for run artifacts; records arrive in step order.
pub trait RunSink {
    fn record(&mut self, record: &TrajectoryRecord) -> Result<()> {
        let _ = record;
        Ok(())
    }
    /// Called for each accepted move, in chain order.
    fn accepted_move(&mut self, step: u64, proposal: &SwapProposal) -> Result<()> {
        let _ = (step, proposal);
        Ok(())
    }
    fn snapshot(&mut self, step: u64, net: &ScNetwork) -> Result<()> {
        let _ = (step, net);
        Ok(())
    }
}

/// No-op sink.
pub struct NullSink;

impl RunSink for NullSink {}

/// Buffers accepted moves (chain-replay tests).
#[derive(Default)]
pub struct MoveLog {
    pub moves: Vec<(u64, SwapProposal)>,
}

impl RunSink for MoveLog {
    fn accepted_move(&mut self, step: u64, proposal: &SwapProposal) -> Result<()> {
        self.moves.push((step, proposal.clone()));
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub initial_mean: f64,
    pub final_mean: f64,
    pub best_mean: f64,
    pub best_step: u64,
    pub accepted: u64,
    pub steps: u64,
    /// Decisions whose ESRI evaluation had non-converged cascades.
    pub non_converged_steps: u64,
    pub trajectory: Vec<TrajectoryRecord>,
    #[serde(skip)]
    pub best_snapshot: Option<NetworkSnapshot>,
}

/// Runs the full chain on `net` in place. Deterministic given the seed.
pub fn run(
    net: &mut ScNetwork,
    model: &ProductionModel,
    cfg: &RunConfig,
    sink: &mut dyn RunSink,
) -> Result<RunResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shares = market_shares(net, model);
    let empirical = StrengthTables::capture(net);

    let initial = risk_profile_with_shares(net, model, &shares, &cfg.cascade)?;
    let mut mean = initial.mean;
    let mut best_mean = mean;
    let mut best_step = 0u64;
    let mut best_snapshot = net.snapshot();
    let mut accepted = 0u64;
    let mut non_converged_steps = 0u64;
    let mut trajectory = Vec::new();

    for step in 1..=cfg.steps {
        let beta = cfg.schedule.beta(step);
        let outcome = mh_step(
            net,
            model,
            &shares,
            mean,
            beta,
            &cfg.constraints,
            &cfg.cascade,
            &mut rng,
        )?;
        mean = outcome.mean;
        if outcome.accepted {
            accepted += 1;
            sink.accepted_move(step, &outcome.proposal)?;
            if cfg.recompute_shares {
                shares = market_shares_current(net);
            }
            if mean < best_mean {
                best_mean = mean;
                best_step = step;
                best_snapshot = net.snapshot();
            }
        }
        if !outcome.converged {
            non_converged_steps += 1;
        }
        if cfg.record_every > 0 && step % cfg.record_every == 0 {
            let record = TrajectoryRecord {
                step,
                beta,
                mean_esri: mean,
                accepted: outcome.accepted,
                kind: outcome.proposal.kind,
                link_count: net.n_links(),
                converged: outcome.converged,
            };
            sink.record(&record)?;
            trajectory.push(record);
        }
        if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 {
            empirical.verify(net, &cfg.constraints)?;
            sink.snapshot(step, net)?;
        }
    }

    Ok(RunResult {
        initial_mean: initial.mean,
        final_mean: mean,
        best_mean,
        best_step,
        accepted,
        steps: cfg.steps,
        non_converged_steps,
        trajectory,
        best_snapshot: Some(best_snapshot),
    })
}

/// Per-firm comparison of two risk profiles over the same firm set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileDiff {
    /// after − before, per firm.
    pub delta: Vec<f64>,
    pub mean_before: f64,
    pub mean_after: f64,
    /// Firms ranked by descending ESRI in the "before" profile.
    pub rank_before: Vec<FirmId>,
    /// Firms ranked by descending ESRI in the "after" profile.
    pub rank_after: Vec<FirmId>,
}

impl ProfileDiff {
    /// Mean ESRI delta over the k riskiest "before" firms.
    pub fn top_k_mean_delta(&self, k: usize) -> f64 {
        let top: Vec<FirmId> = self.rank_before.iter().copied().take(k).collect();
        if top.is_empty() {
            return 0.0;
        }
        top.iter().map(|f| self.delta[f.index()]).sum::<f64>() / top.len() as f64
    }

    pub fn mean_delta(&self) -> f64 {
        if self.delta.is_empty() {
            0.0
        } else {
            self.delta.iter().sum::<f64>() / self.delta.len() as f64
        }
    }
}

pub fn compare_profiles(before: &RiskProfile, after: &RiskProfile) -> Result<ProfileDiff> {
    if before.len() != after.len() {
        return Err(Error::Data(format!(
            "profiles cover different firm sets ({} vs {})",
            before.len(),
            after.len()
        )));
    }
    let delta = before
        .esri
        .iter()
        .zip(&after.esri)
        .map(|(b, a)| a - b)
        .collect();
    Ok(ProfileDiff {
        delta,
        mean_before: before.mean,
        mean_after: after.mean,
        rank_before: before.ranked(),
        rank_after: after.ranked(),
    })
}
