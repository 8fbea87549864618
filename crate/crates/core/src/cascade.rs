//! Shock-cascade simulation and the per-firm systemic risk index (ESRI).
//!
//! A single firm failure propagates both downstream (customers lose inputs,
//! discounted by how replaceable the failed supplier is) and upstream
//! (suppliers lose demand). Production levels h_i ∈ [0,1] update
//! synchronously with a min-accumulator, so the sequence is componentwise
//! non-increasing and the fixed-point iteration always terminates.
//!
//! Update rules per iteration, for every firm i:
//!  (a) delivered input of product k:  Σ_{j→i, p_j=k} W_ji·(1 − m_j·(1−h_j))
//!  (b) h_down = normalized GLPF of the delivered amounts
//!  (c) h_up   = Σ_{i→j} W_ij·h_j / s_i_out(0)   (1 when s_i_out(0)=0)
//!  (d) h_i ← min(h_i, h_down, h_up), with the shocked firm pinned at 0.
//!
//! ESRI of the shocked firm is the production-weighted total loss
//! Σ_i share_i·(1−h_i(T)).
//!
//! Time-zero quantities: s_out(0) in rule (c) and the ESRI weights are the
//! out-strengths of the network being evaluated at cascade start, so every
//! unshocked firm begins at h = 1 and the loss measures what the shock
//! destroys relative to the current pre-shock state. Market shares and the
//! technical coefficients (α, β̄, x0, Π(0)) stay frozen at their empirical
//! calibration while the network is rewired — per-product in-strengths are
//! swap-invariant, so delivered fractions stay well-defined. The link
//! structure is read from the current network on every evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{FirmId, ScNetwork, SectorId};
use crate::production::ProductionModel;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CascadeConfig {
    /// Convergence threshold on max_i |Δh_i|.
    pub tol: f64,
    /// Iteration cap.
    pub t_max: usize,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            tol: 1e-6,
            t_max: 1000,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.t_max < 1 {
            return Err(Error::Config("t_max must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Supplier replaceability proxies: m_j = firm j's share of the total
/// empirical out-strength of its product's producers.
#[derive(Clone, Debug)]
pub struct MarketShares {
    m: Vec<f64>,
}

impl MarketShares {
    pub fn get(&self, firm: FirmId) -> f64 {
        self.m[firm.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.m
    }

    /// Uniform shares (testing limit behaviors).
    pub fn constant(n: usize, value: f64) -> MarketShares {
        MarketShares { m: vec![value; n] }
    }
}

/// Market shares from the model's frozen empirical strengths. In unweighted
/// networks strengths equal degrees, so this is the degree-based variant
/// automatically.
pub fn market_shares(net: &ScNetwork, model: &ProductionModel) -> MarketShares {
    shares_from_strengths(net, |firm| model.s_out0_f64(firm))
}

/// Market shares from the current (possibly rewired) out-strengths.
pub fn market_shares_current(net: &ScNetwork) -> MarketShares {
    shares_from_strengths(net, |firm| net.cur_out_strength(firm).to_f64())
}

fn shares_from_strengths(net: &ScNetwork, strength: impl Fn(FirmId) -> f64) -> MarketShares {
    let mut totals = vec![0.0f64; net.n_sectors()];
    for firm in net.firms() {
        totals[firm.sector.index()] += strength(firm.id);
    }
    let m = net
        .firms()
        .iter()
        .map(|f| {
            let tot = totals[f.sector.index()];
            if tot > 0.0 {
                strength(f.id) / tot
            } else {
                0.0
            }
        })
        .collect();
    MarketShares { m }
}

/// Production levels after one shock simulation.
#[derive(Clone, Debug)]
pub struct CascadeState {
    /// h_i(T) per firm, in [0,1]; h[shocked] = 0.
    pub h: Vec<f64>,
    /// Iterations performed.
    pub t: usize,
    /// Whether max|Δh| fell below tol before the cap. The min-accumulator
    /// makes h monotone, so `false` means tolerance not reached, never
    /// oscillation; the state is still returned.
    pub converged: bool,
}

/// Per-firm ESRI values and their network mean.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiskProfile {
    pub esri: Vec<f64>,
    /// Arithmetic mean over all firms.
    pub mean: f64,
    /// Shock origins whose cascade hit t_max before tol.
    pub non_converged: Vec<u32>,
}

impl RiskProfile {
    pub fn len(&self) -> usize {
        self.esri.len()
    }

    pub fn is_empty(&self) -> bool {
        self.esri.is_empty()
    }

    pub fn converged(&self) -> bool {
        self.non_converged.is_empty()
    }

    /// Firm ids sorted by descending ESRI (ties by id for determinism).
    pub fn ranked(&self) -> Vec<FirmId> {
        let mut ids: Vec<u32> = (0..self.esri.len() as u32).collect();
        ids.sort_by(|&a, &b| {
            self.esri[b as usize]
                .partial_cmp(&self.esri[a as usize])
                .unwrap()
                .then(a.cmp(&b))
        });
        ids.into_iter().map(FirmId).collect()
    }
}

/// Compact read-only view of the current links plus frozen model data,
/// shared by all parallel cascade workers.
struct Engine {
    n: usize,
    gamma_ne: f64,
    // per-firm input slots (essential first, then non-essential)
    slot_start: Vec<u32>,
    slot_pi0: Vec<f64>,
    /// number of essential slots per firm (prefix of its slot range)
    n_essential: Vec<u32>,
    ne_sum0: Vec<f64>,
    has_ne: Vec<bool>,
    // in-edges: (supplier, slot index or SKIP, weight)
    in_start: Vec<u32>,
    in_edges: Vec<(u32, u32, f64)>,
    // out-edges: (customer, weight)
    out_start: Vec<u32>,
    out_edges: Vec<(u32, f64)>,
    s_out0: Vec<f64>,
    shares: Vec<f64>,
    production_share: Vec<f64>,
}

const SKIP_SLOT: u32 = u32::MAX;

impl Engine {
    fn build(net: &ScNetwork, model: &ProductionModel, shares: &MarketShares) -> Engine {
        let n = net.n_firms();
        assert_eq!(n, model.n_firms(), "model calibrated for a different network");
        let mut slot_start = Vec::with_capacity(n + 1);
        let mut slot_pi0 = Vec::new();
        let mut n_essential = Vec::with_capacity(n);
        let mut ne_sum0 = Vec::with_capacity(n);
        let mut has_ne = Vec::with_capacity(n);
        // product → slot lookup, rebuilt per firm
        let mut slot_of: std::collections::HashMap<(u32, SectorId), u32> =
            std::collections::HashMap::new();
        for i in 0..n {
            let firm = FirmId(i as u32);
            let p = model.params(firm);
            slot_start.push(slot_pi0.len() as u32);
            let mut local = 0u32;
            for &(product, _, pi0) in &p.essential {
                slot_of.insert((i as u32, product), local);
                slot_pi0.push(pi0);
                local += 1;
            }
            n_essential.push(local);
            for &(product, pi0) in &p.non_essential {
                slot_of.insert((i as u32, product), local);
                slot_pi0.push(pi0);
                local += 1;
            }
            ne_sum0.push(p.ne_sum0);
            has_ne.push(!p.non_essential.is_empty() && p.inv_alpha_ne > 0.0);
        }
        slot_start.push(slot_pi0.len() as u32);

        let mut in_start = Vec::with_capacity(n + 1);
        let mut in_edges = Vec::with_capacity(net.n_links());
        let mut out_start = Vec::with_capacity(n + 1);
        let mut out_edges = Vec::with_capacity(net.n_links());
        for i in 0..n {
            let firm = FirmId(i as u32);
            in_start.push(in_edges.len() as u32);
            for &id in net.in_links(firm) {
                let l = net.link(id);
                let slot = slot_of
                    .get(&(i as u32, l.product))
                    .copied()
                    .unwrap_or(SKIP_SLOT);
                in_edges.push((l.source.0, slot, l.weight.to_f64()));
            }
        }
        in_start.push(in_edges.len() as u32);
        for i in 0..n {
            let firm = FirmId(i as u32);
            out_start.push(out_edges.len() as u32);
            for &id in net.out_links(firm) {
                let l = net.link(id);
                out_edges.push((l.target.0, l.weight.to_f64()));
            }
        }
        out_start.push(out_edges.len() as u32);

        // pre-shock (cascade t=0) out-strengths of the network under
        // evaluation: demand losses and ESRI weights measure against the
        // current baseline, not the calibration-time one
        let s_out0: Vec<f64> = (0..n)
            .map(|i| net.cur_out_strength(FirmId(i as u32)).to_f64())
            .collect();
        let total_out: f64 = s_out0.iter().sum();
        let production_share: Vec<f64> = s_out0
            .iter()
            .map(|&s| if total_out > 0.0 { s / total_out } else { 0.0 })
            .collect();
        Engine {
            n,
            gamma_ne: model.gamma_ne,
            slot_start,
            slot_pi0,
            n_essential,
            ne_sum0,
            has_ne,
            in_start,
            in_edges,
            out_start,
            out_edges,
            s_out0,
            shares: shares.values().to_vec(),
            production_share,
        }
    }

    fn run(&self, shocked: usize, cfg: &CascadeConfig, scratch: &mut Scratch) -> CascadeState {
        let n = self.n;
        scratch.reset(n, self.slot_pi0.len());
        let h_cur = &mut scratch.h_cur;
        let h_next = &mut scratch.h_next;
        let acc = &mut scratch.acc;
        h_cur[shocked] = 0.0;

        let mut t = 0;
        let mut converged = false;
        while t < cfg.t_max {
            t += 1;
            let mut max_delta = 0.0f64;
            for i in 0..n {
                if i == shocked {
                    h_next[i] = 0.0;
                    continue;
                }
                // (a): delivered amounts per input slot
                let s0 = self.slot_start[i] as usize;
                let s1 = self.slot_start[i + 1] as usize;
                for a in acc[s0..s1].iter_mut() {
                    *a = 0.0;
                }
                for &(sup, slot, w) in
                    &self.in_edges[self.in_start[i] as usize..self.in_start[i + 1] as usize]
                {
                    if slot != SKIP_SLOT {
                        let hs = h_cur[sup as usize];
                        acc[s0 + slot as usize] += w * (1.0 - self.shares[sup as usize] * (1.0 - hs));
                    }
                }
                // (b): normalized GLPF
                let mut h_down = 1.0f64;
                let n_es = self.n_essential[i] as usize;
                for k in 0..n_es {
                    h_down = h_down.min(acc[s0 + k] / self.slot_pi0[s0 + k]);
                }
                if self.has_ne[i] {
                    let ne_del: f64 = acc[s0 + n_es..s1].iter().sum();
                    h_down =
                        h_down.min(1.0 - self.gamma_ne + self.gamma_ne * ne_del / self.ne_sum0[i]);
                }
                // (c): upstream demand
                let h_up = if self.s_out0[i] > 0.0 {
                    let sold: f64 = self.out_edges
                        [self.out_start[i] as usize..self.out_start[i + 1] as usize]
                        .iter()
                        .map(|&(cust, w)| w * h_cur[cust as usize])
                        .sum();
                    sold / self.s_out0[i]
                } else {
                    1.0
                };
                // (d): min-accumulator
                let next = h_cur[i].min(h_down).min(h_up).max(0.0);
                debug_assert!(next <= h_cur[i] + f64::EPSILON, "monotonicity violated");
                let delta = h_cur[i] - next;
                if delta > max_delta {
                    max_delta = delta;
                }
                h_next[i] = next;
            }
            std::mem::swap(h_cur, h_next);
            if max_delta < cfg.tol {
                converged = true;
                break;
            }
        }
        CascadeState {
            h: h_cur.clone(),
            t,
            converged,
        }
    }

    fn esri_of_state(&self, h: &[f64]) -> f64 {
        self.production_share
            .iter()
            .zip(h)
            .map(|(share, hi)| share * (1.0 - hi))
            .sum()
    }
}

struct Scratch {
    h_cur: Vec<f64>,
    h_next: Vec<f64>,
    acc: Vec<f64>,
}

impl Scratch {
    fn new() -> Scratch {
        Scratch {
            h_cur: Vec::new(),
            h_next: Vec::new(),
            acc: Vec::new(),
        }
    }

    fn reset(&mut self, n: usize, slots: usize) {
        self.h_cur.clear();
        self.h_cur.resize(n, 1.0);
        self.h_next.clear();
        self.h_next.resize(n, 1.0);
        self.acc.clear();
        self.acc.resize(slots, 0.0);
    }
}

/// Simulates the failure of `shocked` on the current network.
pub fn run_cascade(
    net: &ScNetwork,
    model: &ProductionModel,
    shares: &MarketShares,
    shocked: FirmId,
    cfg: &CascadeConfig,
) -> Result<CascadeState> {
    cfg.validate()?;
    if shocked.index() >= net.n_firms() {
        return Err(Error::Data(format!("unknown firm {shocked:?}")));
    }
    let engine = Engine::build(net, model, shares);
    let mut scratch = Scratch::new();
    Ok(engine.run(shocked.index(), cfg, &mut scratch))
}

/// ESRI of one firm: production-weighted total loss after its failure.
pub fn esri(
    net: &ScNetwork,
    model: &ProductionModel,
    shares: &MarketShares,
    firm: FirmId,
    cfg: &CascadeConfig,
) -> Result<(f64, bool)> {
    cfg.validate()?;
    if firm.index() >= net.n_firms() {
        return Err(Error::Data(format!("unknown firm {firm:?}")));
    }
    let engine = Engine::build(net, model, shares);
    let mut scratch = Scratch::new();
    let state = engine.run(firm.index(), cfg, &mut scratch);
    Ok((engine.esri_of_state(&state.h), state.converged))
}

/// ESRI for every firm, cascades evaluated in parallel over shock origins.
/// Results are indexed by firm id, so the outcome is identical regardless of
/// worker count.
pub fn risk_profile(net: &ScNetwork, model: &ProductionModel, cfg: &CascadeConfig) -> Result<RiskProfile> {
    let shares = market_shares(net, model);
    risk_profile_with_shares(net, model, &shares, cfg)
}

pub fn risk_profile_with_shares(
    net: &ScNetwork,
    model: &ProductionModel,
    shares: &MarketShares,
    cfg: &CascadeConfig,
) -> Result<RiskProfile> {
    cfg.validate()?;
    let engine = Engine::build(net, model, shares);
    let n = net.n_firms();
    let results: Vec<(f64, bool)> = (0..n)
        .into_par_iter()
        .map_init(Scratch::new, |scratch, i| {
            let state = engine.run(i, cfg, scratch);
            (engine.esri_of_state(&state.h), state.converged)
        })
        .collect();
    let esri: Vec<f64> = results.iter().map(|&(v, _)| v).collect();
    let non_converged: Vec<u32> = results
        .iter()
        .enumerate()
        .filter(|(_, &(_, c))| !c)
        .map(|(i, _)| i as u32)
        .collect();
    // sequential sum: mean independent of worker count
    let mean = if n > 0 {
        esri.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    Ok(RiskProfile {
        esri,
        mean,
        non_converged,
    })
}
