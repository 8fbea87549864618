//! Reversible two-link swaps that preserve production constraints.
//!
//! A swap exchanges the suppliers of two links that share the same
//! (source-sector, target-sector) pair. When the two weights differ by at
//! most `epsilon` the links are swapped whole (a *full swap*): in-strengths
//! stay exact, the two suppliers' out-strengths shift by ±|w1−w2| and the
//! move is rejected if either would leave its allowed band around the
//! empirical value. When the difference exceeds `epsilon`, the heavier link
//! is split and only the smaller weight crosses over (a *partial swap*),
//! which preserves all four endpoint strengths exactly at the cost of one
//! extra link. In unweighted networks all weights are 1, so every move is a
//! full swap, and extra exclusions keep the graph simple.
//!
//! Every proposal carries an explicit edit script; applying then reverting
//! restores the link multiset exactly, including un-merging any parallel
//! link the swap merged onto.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{FirmId, LinkId, Mode, ScNetwork};
use crate::weight::Weight;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SwapConstraints {
    /// Weight tolerance for full swaps (monetary units; irrelevant for
    /// unweighted networks where all weights are equal).
    pub epsilon: Weight,
    /// Allowed relative deviation of out-strengths from their empirical
    /// values, checked per-mille (default 0.20 → [0.8, 1.2]·empirical).
    pub out_strength_band: f64,
    /// Resample budget factor: up to `factor · n_links` attempts before
    /// giving up on finding an eligible pair.
    pub resample_factor: usize,
}

impl Default for SwapConstraints {
    fn default() -> Self {
        SwapConstraints {
            epsilon: Weight::from_hundredths(300_000),
            out_strength_band: 0.20,
            resample_factor: 10,
        }
    }
}

impl SwapConstraints {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.out_strength_band) {
            return Err(Error::Config(format!(
                "out_strength_band must be in [0,1), got {}",
                self.out_strength_band
            )));
        }
        if self.resample_factor == 0 {
            return Err(Error::Config("resample_factor must be ≥ 1".into()));
        }
        Ok(())
    }

    fn band_milli(&self) -> u64 {
        (self.out_strength_band * 1000.0).round() as u64
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwapKind {
    Full,
    Partial,
}

impl std::fmt::Display for SwapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SwapKind::Full => f.write_str("full"),
            SwapKind::Partial => f.write_str("partial"),
        }
    }
}

/// One step of a reversible edit script.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditOp {
    /// Move a link to a new source firm within the same sector.
    SetSource {
        link: LinkId,
        from: FirmId,
        to: FirmId,
    },
    Remove {
        link: LinkId,
        source: FirmId,
        target: FirmId,
        weight: Weight,
    },
    /// Recreate/insert at a specific free slot (deterministic ids).
    CreateAt {
        link: LinkId,
        source: FirmId,
        target: FirmId,
        weight: Weight,
    },
    /// Merge weight onto an existing parallel link.
    AddWeight { link: LinkId, delta: Weight },
    SubWeight { link: LinkId, delta: Weight },
}

impl EditOp {
    fn inverse(&self) -> EditOp {
        match *self {
            EditOp::SetSource { link, from, to } => EditOp::SetSource {
                link,
                from: to,
                to: from,
            },
            EditOp::Remove {
                link,
                source,
                target,
                weight,
            } => EditOp::CreateAt {
                link,
                source,
                target,
                weight,
            },
            EditOp::CreateAt {
                link,
                source,
                target,
                weight,
            } => EditOp::Remove {
                link,
                source,
                target,
                weight,
            },
            EditOp::AddWeight { link, delta } => EditOp::SubWeight { link, delta },
            EditOp::SubWeight { link, delta } => EditOp::AddWeight { link, delta },
        }
    }

    fn execute(&self, net: &mut ScNetwork) -> Result<()> {
        match *self {
            EditOp::SetSource { link, from, to } => {
                let l = net
                    .link_opt(link)
                    .ok_or_else(|| Error::Integrity(format!("dead link {link:?} in edit")))?;
                if l.source != from {
                    return Err(Error::Integrity(format!(
                        "edit expects {link:?} sourced at {from:?}, found {:?}",
                        l.source
                    )));
                }
                net.set_source(link, to)
            }
            EditOp::Remove {
                link,
                source,
                target,
                weight,
            } => {
                let l = net
                    .link_opt(link)
                    .ok_or_else(|| Error::Integrity(format!("dead link {link:?} in edit")))?;
                if l.source != source || l.target != target || l.weight != weight {
                    return Err(Error::Integrity(format!("edit mismatch on {link:?}")));
                }
                net.remove_link(link).map(|_| ())
            }
            EditOp::CreateAt {
                link,
                source,
                target,
                weight,
            } => net.insert_link_at(link, source, target, weight),
            EditOp::AddWeight { link, delta } => net.add_weight(link, delta),
            EditOp::SubWeight { link, delta } => net.sub_weight(link, delta),
        }
    }
}

/// A reversible swap move, valid only against the exact network version it
/// was proposed on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SwapProposal {
    pub version: u64,
    pub kind: SwapKind,
    pub link1: LinkId,
    pub link2: LinkId,
    /// min(w1, w2); for a partial swap, the amount crossing over.
    pub swap_amount: Weight,
    pub ops: Vec<EditOp>,
}

impl SwapProposal {
    pub fn created_links(&self) -> impl Iterator<Item = &EditOp> {
        self.ops
            .iter()
            .filter(|op| matches!(op, EditOp::CreateAt { .. }))
    }

    pub fn removed_links(&self) -> impl Iterator<Item = &EditOp> {
        self.ops.iter().filter(|op| matches!(op, EditOp::Remove { .. }))
    }
}

/// Why a structurally valid pair was rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapRejection {
    /// A supplier's out-strength would leave its allowed band.
    OutStrengthBand { firm: FirmId },
}

#[derive(Debug)]
pub enum ProposalOutcome {
    Proposal(SwapProposal),
    Rejected(SwapRejection),
}

/// Samples link1 uniformly over live links, then link2 uniformly over the
/// eligible bridges with the same (source-sector, target-sector) pair.
///
/// Exclusions: bridge sources must differ from link1's target (self-loop
/// guard) and bridge targets from link1's source; unweighted networks
/// additionally exclude in-neighbors of link1's target as sources and
/// out-neighbors of link1's source as targets (multi-edge and trivial-swap
/// guards). An empty bridge set resamples link1, up to
/// `resample_factor · n_links` attempts.
pub fn find_two_links(
    net: &ScNetwork,
    rng: &mut impl Rng,
    constraints: &SwapConstraints,
) -> Result<(LinkId, LinkId)> {
    if net.n_links() < 2 {
        return Err(Error::SwapExhausted { attempts: 0 });
    }
    let budget = constraints.resample_factor.saturating_mul(net.n_links());
    let mut eligible: Vec<LinkId> = Vec::new();
    for attempt in 0..budget {
        let link1 = net.live_links()[rng.random_range(0..net.n_links())];
        eligible.clear();
        collect_bridges(net, link1, &mut eligible);
        if eligible.is_empty() {
            let _ = attempt;
            continue;
        }
        let link2 = eligible[rng.random_range(0..eligible.len())];
        return Ok((link1, link2));
    }
    Err(Error::SwapExhausted { attempts: budget })
}

fn collect_bridges(net: &ScNetwork, link1: LinkId, out: &mut Vec<LinkId>) {
    let l1 = net.link(link1);
    let src_sector = net.firm(l1.source).sector;
    let tgt_sector = net.firm(l1.target).sector;
    let unweighted = net.mode() == Mode::Unweighted;
    let (in_nbrs_of_target, out_nbrs_of_source) = if unweighted {
        let inn: std::collections::HashSet<FirmId> = net
            .in_links(l1.target)
            .iter()
            .map(|&id| net.link(id).source)
            .collect();
        let outn: std::collections::HashSet<FirmId> = net
            .out_links(l1.source)
            .iter()
            .map(|&id| net.link(id).target)
            .collect();
        (inn, outn)
    } else {
        Default::default()
    };
    for &cand in net.links_between_sectors(src_sector, tgt_sector) {
        if cand == link1 {
            continue;
        }
        let l2 = net.link(cand);
        if l2.source == l1.target || l2.target == l1.source {
            continue;
        }
        if unweighted
            && (in_nbrs_of_target.contains(&l2.source) || out_nbrs_of_source.contains(&l2.target))
        {
            continue;
        }
        out.push(cand);
    }
}

/// True when every eligible bridge for every choice of link1 is empty.
/// Exhaustive feasibility scan, test/diagnostic support.
pub fn any_eligible_pair(net: &ScNetwork) -> bool {
    let mut buf = Vec::new();
    for &link1 in net.live_links() {
        buf.clear();
        collect_bridges(net, link1, &mut buf);
        if !buf.is_empty() {
            return true;
        }
    }
    false
}

/// Builds the reversible edit script for swapping the suppliers of the two
/// links' targets. Weighted full swaps are rejected when a supplier's
/// out-strength would leave its band.
pub fn propose_swap(
    net: &ScNetwork,
    link1: LinkId,
    link2: LinkId,
    constraints: &SwapConstraints,
) -> Result<ProposalOutcome> {
    constraints.validate()?;
    if link1 == link2 {
        return Err(Error::Integrity("swap needs two distinct links".into()));
    }
    let l1 = net
        .link_opt(link1)
        .ok_or_else(|| Error::Integrity(format!("dead link {link1:?}")))?;
    let l2 = net
        .link_opt(link2)
        .ok_or_else(|| Error::Integrity(format!("dead link {link2:?}")))?;
    if net.firm(l1.source).sector != net.firm(l2.source).sector
        || net.firm(l1.target).sector != net.firm(l2.target).sector
    {
        return Err(Error::Integrity("links do not share a sector pair".into()));
    }
    if l2.source == l1.target || l2.target == l1.source {
        return Err(Error::Integrity("swap would create a self-loop".into()));
    }
    let (w1, w2) = (l1.weight, l2.weight);
    let residue = w1.abs_diff(w2);
    if residue > constraints.epsilon {
        Ok(ProposalOutcome::Proposal(build_partial(
            net, link1, link2,
        )))
    } else {
        // full swap: i and k trade w1 against w2
        if let Some(firm) = band_violation(net, l1.source, l2.source, w1, w2, constraints) {
            return Ok(ProposalOutcome::Rejected(SwapRejection::OutStrengthBand {
                firm,
            }));
        }
        Ok(ProposalOutcome::Proposal(build_full(net, link1, link2)))
    }
}

/// Returns the first supplier whose new out-strength would leave
/// [1−band, 1+band]·empirical. Exact per-mille integer arithmetic.
fn band_violation(
    net: &ScNetwork,
    source1: FirmId,
    source2: FirmId,
    w1: Weight,
    w2: Weight,
    constraints: &SwapConstraints,
) -> Option<FirmId> {
    if source1 == source2 {
        return None; // net zero change
    }
    let milli = constraints.band_milli();
    let check = |firm: FirmId, lose: Weight, gain: Weight| -> bool {
        let cur = net.cur_out_strength(firm).hundredths();
        let new = cur + gain.hundredths() - lose.hundredths().min(cur);
        debug_assert!(cur >= lose.hundredths());
        let emp = net.firm(firm).out_strength0.hundredths() as u128;
        let new = new as u128 * 1000;
        new >= emp * (1000 - milli as u128) && new <= emp * (1000 + milli as u128)
    };
    if !check(source1, w1, w2) {
        return Some(source1);
    }
    if !check(source2, w2, w1) {
        return Some(source2);
    }
    None
}

fn build_full(net: &ScNetwork, link1: LinkId, link2: LinkId) -> SwapProposal {
    let l1 = net.link(link1);
    let l2 = net.link(link2);
    let (i, j, w1) = (l1.source, l1.target, l1.weight);
    let (k, l, w2) = (l2.source, l2.target, l2.weight);
    let mut ops = Vec::with_capacity(2);
    // k→j carries w1 (in-strength of j anchored), i→l carries w2
    match net.parallel_link(k, j, &[link1, link2]) {
        Some(existing) if net.mode() == Mode::Weighted => {
            ops.push(EditOp::Remove {
                link: link1,
                source: i,
                target: j,
                weight: w1,
            });
            ops.push(EditOp::AddWeight {
                link: existing,
                delta: w1,
            });
        }
        _ => ops.push(EditOp::SetSource {
            link: link1,
            from: i,
            to: k,
        }),
    }
    match net.parallel_link(i, l, &[link1, link2]) {
        Some(existing) if net.mode() == Mode::Weighted => {
            ops.push(EditOp::Remove {
                link: link2,
                source: k,
                target: l,
                weight: w2,
            });
            ops.push(EditOp::AddWeight {
                link: existing,
                delta: w2,
            });
        }
        _ => ops.push(EditOp::SetSource {
            link: link2,
            from: k,
            to: i,
        }),
    }
    SwapProposal {
        version: net.version(),
        kind: SwapKind::Full,
        link1,
        link2,
        swap_amount: w1.min(w2),
        ops,
    }
}

fn build_partial(net: &ScNetwork, link1: LinkId, link2: LinkId) -> SwapProposal {
    let l1 = net.link(link1);
    let l2 = net.link(link2);
    let (i, j) = (l1.source, l1.target);
    let (k, l) = (l2.source, l2.target);
    let (big, small, small_id) = if l1.weight >= l2.weight {
        (link1, l2.weight, link2)
    } else {
        (link2, l1.weight, link1)
    };
    let small_link = net.link(small_id);
    let (small_src, small_tgt) = (small_link.source, small_link.target);

    let mut ops = Vec::with_capacity(4);
    ops.push(EditOp::SubWeight {
        link: big,
        delta: small,
    });
    ops.push(EditOp::Remove {
        link: small_id,
        source: small_src,
        target: small_tgt,
        weight: small,
    });
    // cross links k→j and i→l at the small weight; merge onto a surviving
    // parallel record where one exists (the reduced big link included)
    let mut planned = net.plan_insert_ids(&[small_id], 2).into_iter();
    let mut next_id = move || planned.next().expect("planned id");
    for (src, tgt) in [(k, j), (i, l)] {
        match net.parallel_link(src, tgt, &[small_id]) {
            Some(existing) => ops.push(EditOp::AddWeight {
                link: existing,
                delta: small,
            }),
            None => ops.push(EditOp::CreateAt {
                link: next_id(),
                source: src,
                target: tgt,
                weight: small,
            }),
        }
    }
    SwapProposal {
        version: net.version(),
        kind: SwapKind::Partial,
        link1,
        link2,
        swap_amount: small,
        ops,
    }
}

/// Applies a proposal built against the network's current version.
pub fn apply(net: &mut ScNetwork, proposal: &SwapProposal) -> Result<()> {
    if net.version() != proposal.version {
        return Err(Error::StaleProposal {
            expected: proposal.version,
            actual: net.version(),
        });
    }
    for (idx, op) in proposal.ops.iter().enumerate() {
        if let Err(e) = op.execute(net) {
            // roll back the prefix so errors do not corrupt the network
            for done in proposal.ops[..idx].iter().rev() {
                done.inverse()
                    .execute(net)
                    .expect("rollback of validated prefix");
            }
            return Err(e);
        }
    }
    net.bump_version();
    Ok(())
}

/// Reverts a proposal that was just applied.
pub fn revert(net: &mut ScNetwork, proposal: &SwapProposal) -> Result<()> {
    if net.version() != proposal.version + 1 {
        return Err(Error::StaleProposal {
            expected: proposal.version + 1,
            actual: net.version(),
        });
    }
    for op in proposal.ops.iter().rev() {
        op.inverse().execute(net)?;
    }
    net.unbump_version();
    Ok(())
}

/// Samples pairs until one yields a proposal, resampling on band rejections
/// (the weighted full-swap case), within the constraint budget.
pub fn sample_swap(
    net: &ScNetwork,
    rng: &mut impl Rng,
    constraints: &SwapConstraints,
) -> Result<SwapProposal> {
    let budget = constraints.resample_factor.saturating_mul(net.n_links().max(1));
    for _ in 0..budget {
        let (link1, link2) = find_two_links(net, rng, constraints)?;
        match propose_swap(net, link1, link2, constraints)? {
            ProposalOutcome::Proposal(p) => return Ok(p),
            ProposalOutcome::Rejected(_) => continue,
        }
    }
    Err(Error::SwapExhausted { attempts: budget })
}

/// Empirical strength tables captured before rewiring starts, used to verify
/// the swap invariants by full recomputation from the links.
///
/// Exactness guarantees by mode: per-product in-strengths are exact always;
/// the sector-to-sector flow matrix (output by receiving industry) is exact
/// always; in unweighted networks every per-firm degree and sales-per-buyer-
/// sector figure is also exact, while in weighted networks a firm's sales
/// composition shifts only inside the swapped buyer sector by exactly its
/// out-strength delta, which the band bounds.
#[derive(Clone, Debug)]
pub struct StrengthTables {
    in_by_product: Vec<std::collections::BTreeMap<crate::network::SectorId, Weight>>,
    out_by_buyer_sector: Vec<std::collections::BTreeMap<crate::network::SectorId, Weight>>,
    sector_flows: std::collections::BTreeMap<(crate::network::SectorId, crate::network::SectorId), Weight>,
    out_total: Vec<Weight>,
    in_degree: Vec<usize>,
    out_degree: Vec<usize>,
    total_weight: Weight,
}

fn sector_flow_matrix(
    net: &ScNetwork,
) -> std::collections::BTreeMap<(crate::network::SectorId, crate::network::SectorId), Weight> {
    let mut m = std::collections::BTreeMap::new();
    for (_, l) in net.links() {
        let key = (l.product, net.firm(l.target).sector);
        *m.entry(key).or_insert(Weight::ZERO) += l.weight;
    }
    m
}

impl StrengthTables {
    pub fn capture(net: &ScNetwork) -> StrengthTables {
        StrengthTables {
            in_by_product: net
                .firms()
                .iter()
                .map(|f| net.recompute_in_strengths(f.id))
                .collect(),
            out_by_buyer_sector: net
                .firms()
                .iter()
                .map(|f| net.recompute_out_by_buyer_sector(f.id))
                .collect(),
            sector_flows: sector_flow_matrix(net),
            out_total: net
                .firms()
                .iter()
                .map(|f| net.cur_out_strength(f.id))
                .collect(),
            in_degree: net.firms().iter().map(|f| net.in_links(f.id).len()).collect(),
            out_degree: net.firms().iter().map(|f| net.out_links(f.id).len()).collect(),
            total_weight: net.total_weight(),
        }
    }

    /// Checks every swap invariant against the captured empirical state:
    /// exact per-product in-strengths, exact sector-to-sector flows, total
    /// weight conservation, the out-strength band (weighted), and exact
    /// degrees, sales composition and simplicity (unweighted).
    pub fn verify(&self, net: &ScNetwork, constraints: &SwapConstraints) -> Result<()> {
        let milli = constraints.band_milli() as u128;
        for firm in net.firms() {
            let idx = firm.id.index();
            if net.recompute_in_strengths(firm.id) != self.in_by_product[idx] {
                return Err(Error::Integrity(format!(
                    "in-strengths of {:?} changed",
                    firm.id
                )));
            }
            match net.mode() {
                Mode::Weighted => {
                    let emp = self.out_total[idx].hundredths() as u128;
                    let cur = net.cur_out_strength(firm.id).hundredths() as u128 * 1000;
                    if cur < emp * (1000 - milli) || cur > emp * (1000 + milli) {
                        return Err(Error::Integrity(format!(
                            "out-strength of {:?} left its band",
                            firm.id
                        )));
                    }
                }
                Mode::Unweighted => {
                    if net.in_links(firm.id).len() != self.in_degree[idx]
                        || net.out_links(firm.id).len() != self.out_degree[idx]
                    {
                        return Err(Error::Integrity(format!(
                            "degrees of {:?} changed",
                            firm.id
                        )));
                    }
                    if net.recompute_out_by_buyer_sector(firm.id) != self.out_by_buyer_sector[idx]
                    {
                        return Err(Error::Integrity(format!(
                            "sales per buyer sector of {:?} changed",
                            firm.id
                        )));
                    }
                }
            }
        }
        if sector_flow_matrix(net) != self.sector_flows {
            return Err(Error::Integrity(
                "sector-to-sector flow matrix changed".into(),
            ));
        }
        if net.total_weight() != self.total_weight {
            return Err(Error::Integrity("total weight changed".into()));
        }
        net.check_index_consistency()
    }
}
