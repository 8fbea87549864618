//! Supply-chain network data model.
//!
//! Firms are dense integer handles into flat arrays; links live in a slab
//! with stable ids so swap edit scripts stay valid across removals. The
//! structure maintains three secondary indexes that the rewiring machinery
//! depends on: a live-link list for uniform sampling, per-firm in/out
//! adjacency, and a (source-sector, target-sector) bucket index.
//!
//! Networks are effectively immutable while cascades run; all mutation goes
//! through the `pub(crate)` editing methods used by the rewiring module on a
//! single control thread.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weight::Weight;

/// Dense firm handle, `0..n_firms`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FirmId(pub u32);

impl FirmId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for FirmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

impl fmt::Display for FirmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Stable link handle into the link slab.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

/// Interned sector code handle.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SectorId(pub u32);

impl SectorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for SectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Industry classification code as it appears in the input (NACE group level,
/// e.g. "102"). The 2-digit division is its prefix.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct SectorCode(String);

impl SectorCode {
    pub fn new(code: &str) -> std::result::Result<SectorCode, String> {
        let code = code.trim();
        if code.is_empty() {
            return Err("empty sector code".into());
        }
        Ok(SectorCode(code.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// 2-digit division prefix (the whole code if shorter).
    pub fn nace2(&self) -> &str {
        let end = self.0.len().min(2);
        &self.0[..end]
    }
}

impl fmt::Display for SectorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Weighted,
    Unweighted,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Weighted => f.write_str("weighted"),
            Mode::Unweighted => f.write_str("unweighted"),
        }
    }
}

/// A firm with its load-time (empirical) strengths. Frozen after construction.
#[derive(Clone, Debug)]
pub struct Firm {
    pub id: FirmId,
    /// External identifier from the input file.
    pub external: String,
    pub sector: SectorId,
    /// Empirical out-strength at load time.
    pub out_strength0: Weight,
    /// Empirical in-strength per input product (source sector), Π_ik(0).
    pub in_strength0_by_product: BTreeMap<SectorId, Weight>,
}

/// A directed supply link. `product` is the source firm's sector.
#[derive(Clone, Debug)]
pub struct SupplyLink {
    pub source: FirmId,
    pub target: FirmId,
    pub weight: Weight,
    pub product: SectorId,
    // positions inside secondary indexes, maintained by ScNetwork
    pos_live: u32,
    pos_bucket: u32,
    pos_out: u32,
    pos_in: u32,
}

#[derive(Clone, Default)]
struct SectorTable {
    codes: Vec<SectorCode>,
    by_code: HashMap<String, SectorId>,
}

impl SectorTable {
    fn intern(&mut self, code: SectorCode) -> SectorId {
        if let Some(&id) = self.by_code.get(code.as_str()) {
            return id;
        }
        let id = SectorId(self.codes.len() as u32);
        self.by_code.insert(code.as_str().to_string(), id);
        self.codes.push(code);
        id
    }

    fn get(&self, code: &str) -> Option<SectorId> {
        self.by_code.get(code).copied()
    }
}

/// Directed multigraph of firms and supply links.
#[derive(Clone)]
pub struct ScNetwork {
    mode: Mode,
    firms: Vec<Firm>,
    sectors: SectorTable,
    slab: Vec<Option<SupplyLink>>,
    free: Vec<u32>,
    live: Vec<LinkId>,
    out_adj: Vec<Vec<LinkId>>,
    in_adj: Vec<Vec<LinkId>>,
    buckets: HashMap<(SectorId, SectorId), Vec<LinkId>>,
    cur_out_strength: Vec<Weight>,
    total_weight: Weight,
    version: u64,
}

impl fmt::Debug for ScNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ScNetwork({} firms, {} links, {})",
            self.firms.len(),
            self.live.len(),
            self.mode
        )
    }
}

impl ScNetwork {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n_firms(&self) -> usize {
        self.firms.len()
    }

    pub fn n_links(&self) -> usize {
        self.live.len()
    }

    pub fn firms(&self) -> &[Firm] {
        &self.firms
    }

    pub fn firm(&self, id: FirmId) -> &Firm {
        &self.firms[id.index()]
    }

    pub fn firm_by_external(&self, external: &str) -> Option<&Firm> {
        self.firms.iter().find(|f| f.external == external)
    }

    pub fn link(&self, id: LinkId) -> &SupplyLink {
        self.slab[id.index()].as_ref().expect("dangling link id")
    }

    pub fn link_opt(&self, id: LinkId) -> Option<&SupplyLink> {
        self.slab.get(id.index()).and_then(|s| s.as_ref())
    }

    /// Live link ids in sampling order (arbitrary but deterministic).
    pub fn live_links(&self) -> &[LinkId] {
        &self.live
    }

    pub fn links(&self) -> impl Iterator<Item = (LinkId, &SupplyLink)> {
        self.live.iter().map(move |&id| (id, self.link(id)))
    }

    pub fn out_links(&self, firm: FirmId) -> &[LinkId] {
        &self.out_adj[firm.index()]
    }

    pub fn in_links(&self, firm: FirmId) -> &[LinkId] {
        &self.in_adj[firm.index()]
    }

    pub fn sector_code(&self, id: SectorId) -> &SectorCode {
        &self.sectors.codes[id.index()]
    }

    pub fn sector_id(&self, code: &str) -> Option<SectorId> {
        self.sectors.get(code)
    }

    pub fn n_sectors(&self) -> usize {
        self.sectors.codes.len()
    }

    /// Current (possibly rewired) out-strength.
    pub fn cur_out_strength(&self, firm: FirmId) -> Weight {
        self.cur_out_strength[firm.index()]
    }

    pub fn total_weight(&self) -> Weight {
        self.total_weight
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Links whose (source sector, target sector) matches the given pair.
    pub fn links_between_sectors(&self, source: SectorId, target: SectorId) -> &[LinkId] {
        self.buckets
            .get(&(source, target))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// True if any live link source→target exists.
    pub fn has_link(&self, source: FirmId, target: FirmId) -> bool {
        let (scan, by_target) = if self.out_adj[source.index()].len() <= self.in_adj[target.index()].len()
        {
            (&self.out_adj[source.index()], true)
        } else {
            (&self.in_adj[target.index()], false)
        };
        scan.iter().any(|&id| {
            let l = self.link(id);
            if by_target {
                l.target == target
            } else {
                l.source == source
            }
        })
    }

    /// Smallest live link id with the exact (source, target) pair, skipping
    /// the given ids. Deterministic merge-target choice.
    pub fn parallel_link(&self, source: FirmId, target: FirmId, skip: &[LinkId]) -> Option<LinkId> {
        self.out_adj[source.index()]
            .iter()
            .copied()
            .filter(|&id| self.link(id).target == target && !skip.contains(&id))
            .min()
    }

    /// Canonical multiset of (source, target, weight-hundredths), sorted.
    pub fn link_multiset(&self) -> Vec<(u32, u32, u64)> {
        let mut v: Vec<(u32, u32, u64)> = self
            .links()
            .map(|(_, l)| (l.source.0, l.target.0, l.weight.hundredths()))
            .collect();
        v.sort_unstable();
        v
    }

    /// Recomputes per-product in-strengths of a firm from the live links.
    pub fn recompute_in_strengths(&self, firm: FirmId) -> BTreeMap<SectorId, Weight> {
        let mut m = BTreeMap::new();
        for &id in &self.in_adj[firm.index()] {
            let l = self.link(id);
            *m.entry(l.product).or_insert(Weight::ZERO) += l.weight;
        }
        m
    }

    /// Recomputes a firm's sales per buyer sector from the live links.
    pub fn recompute_out_by_buyer_sector(&self, firm: FirmId) -> BTreeMap<SectorId, Weight> {
        let mut m = BTreeMap::new();
        for &id in &self.out_adj[firm.index()] {
            let l = self.link(id);
            *m.entry(self.firm(l.target).sector).or_insert(Weight::ZERO) += l.weight;
        }
        m
    }

    pub fn snapshot(&self) -> NetworkSnapshot {
        let mut links: Vec<SnapshotLink> = self
            .links()
            .map(|(_, l)| SnapshotLink {
                source: l.source.0,
                target: l.target.0,
                weight: l.weight,
            })
            .collect();
        links.sort_unstable_by_key(|l| (l.source, l.target, l.weight));
        NetworkSnapshot {
            format_version: SNAPSHOT_FORMAT_VERSION,
            mode: self.mode,
            firms: self
                .firms
                .iter()
                .map(|f| (f.external.clone(), self.sector_code(f.sector).clone()))
                .collect(),
            links,
        }
    }

    /// Checks every secondary index against a brute-force scan. Test support.
    pub fn check_index_consistency(&self) -> Result<()> {
        let mut n_live = 0usize;
        for (idx, slot) in self.slab.iter().enumerate() {
            let Some(l) = slot else { continue };
            n_live += 1;
            let id = LinkId(idx as u32);
            if l.source == l.target {
                return Err(Error::Integrity(format!("self-loop at {id:?}")));
            }
            if self.live.get(l.pos_live as usize) != Some(&id) {
                return Err(Error::Integrity(format!("live index broken for {id:?}")));
            }
            if self.out_adj[l.source.index()].get(l.pos_out as usize) != Some(&id) {
                return Err(Error::Integrity(format!("out index broken for {id:?}")));
            }
            if self.in_adj[l.target.index()].get(l.pos_in as usize) != Some(&id) {
                return Err(Error::Integrity(format!("in index broken for {id:?}")));
            }
            let key = (self.firms[l.source.index()].sector, self.firms[l.target.index()].sector);
            let bucket = self.buckets.get(&key).map(Vec::as_slice).unwrap_or(&[]);
            if bucket.get(l.pos_bucket as usize) != Some(&id) {
                return Err(Error::Integrity(format!("bucket index broken for {id:?}")));
            }
            if l.product != self.firms[l.source.index()].sector {
                return Err(Error::Integrity(format!("product mismatch for {id:?}")));
            }
        }
        if n_live != self.live.len() {
            return Err(Error::Integrity("live list size mismatch".into()));
        }
        let bucket_total: usize = self.buckets.values().map(Vec::len).sum();
        let out_total: usize = self.out_adj.iter().map(Vec::len).sum();
        let in_total: usize = self.in_adj.iter().map(Vec::len).sum();
        if bucket_total != n_live || out_total != n_live || in_total != n_live {
            return Err(Error::Integrity("secondary index holds stale entries".into()));
        }
        let mut total = Weight::ZERO;
        for f in &self.firms {
            let out: Weight = self.out_adj[f.id.index()]
                .iter()
                .map(|&id| self.link(id).weight)
                .sum();
            if out != self.cur_out_strength[f.id.index()] {
                return Err(Error::Integrity(format!(
                    "cached out-strength of {:?} drifted",
                    f.id
                )));
            }
            total += out;
        }
        if total != self.total_weight {
            return Err(Error::Integrity("cached total weight drifted".into()));
        }
        if self.mode == Mode::Unweighted {
            for (_, l) in self.links() {
                if l.weight != Weight::UNIT {
                    return Err(Error::Integrity("unweighted link with weight != 1".into()));
                }
            }
            let mut seen = std::collections::HashSet::new();
            for (_, l) in self.links() {
                if !seen.insert((l.source, l.target)) {
                    return Err(Error::Integrity(format!(
                        "duplicate pair {:?}->{:?} in unweighted network",
                        l.source, l.target
                    )));
                }
            }
        }
        Ok(())
    }

    // ---- mutation (rewiring only, single control thread) ----

    pub(crate) fn bump_version(&mut self) -> u64 {
        self.version += 1;
        self.version
    }

    pub(crate) fn unbump_version(&mut self) {
        self.version -= 1;
    }

    /// Link ids that consecutive insertions would receive if the listed
    /// removals happen first, in order. Mirrors the slab free-list (LIFO).
    pub(crate) fn plan_insert_ids(&self, removed_first: &[LinkId], count: usize) -> Vec<LinkId> {
        let mut free = self.free.clone();
        for id in removed_first {
            free.push(id.0);
        }
        let mut next_fresh = self.slab.len() as u32;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            match free.pop() {
                Some(id) => out.push(LinkId(id)),
                None => {
                    out.push(LinkId(next_fresh));
                    next_fresh += 1;
                }
            }
        }
        out
    }

    pub(crate) fn insert_link(
        &mut self,
        source: FirmId,
        target: FirmId,
        weight: Weight,
    ) -> Result<LinkId> {
        if source == target {
            return Err(Error::Integrity(format!(
                "self-loop {source:?}->{target:?} rejected"
            )));
        }
        if weight.is_zero() {
            return Err(Error::Integrity("zero-weight link rejected".into()));
        }
        if self.mode == Mode::Unweighted {
            if weight != Weight::UNIT {
                return Err(Error::Integrity(
                    "unweighted links must have weight 1".into(),
                ));
            }
            if self.has_link(source, target) {
                return Err(Error::Integrity(format!(
                    "duplicate pair {source:?}->{target:?} in unweighted network"
                )));
            }
        }
        let id = match self.free.pop() {
            Some(slot) => LinkId(slot),
            None => {
                self.slab.push(None);
                LinkId((self.slab.len() - 1) as u32)
            }
        };
        let product = self.firms[source.index()].sector;
        let key = (product, self.firms[target.index()].sector);
        let bucket = self.buckets.entry(key).or_default();
        let link = SupplyLink {
            source,
            target,
            weight,
            product,
            pos_live: self.live.len() as u32,
            pos_bucket: bucket.len() as u32,
            pos_out: self.out_adj[source.index()].len() as u32,
            pos_in: self.in_adj[target.index()].len() as u32,
        };
        bucket.push(id);
        self.live.push(id);
        self.out_adj[source.index()].push(id);
        self.in_adj[target.index()].push(id);
        self.slab[id.index()] = Some(link);
        self.cur_out_strength[source.index()] += weight;
        self.total_weight += weight;
        Ok(id)
    }

    /// Inserts at a specific slot: either a freed one or the next fresh slot
    /// past the slab (planned ids from `plan_insert_ids`).
    pub(crate) fn insert_link_at(
        &mut self,
        id: LinkId,
        source: FirmId,
        target: FirmId,
        weight: Weight,
    ) -> Result<()> {
        if id.index() >= self.slab.len() {
            while self.slab.len() < id.index() {
                self.slab.push(None);
                self.free.push((self.slab.len() - 1) as u32);
            }
            self.slab.push(None);
            self.free.push(id.0);
        } else {
            let pos = self
                .free
                .iter()
                .rposition(|&s| s == id.0)
                .ok_or_else(|| Error::Integrity(format!("slot {id:?} is not free")))?;
            // keep LIFO order for the remaining slots
            self.free.remove(pos);
            self.free.push(id.0);
        }
        let got = self.insert_link(source, target, weight)?;
        debug_assert_eq!(got, id);
        Ok(())
    }

    pub(crate) fn remove_link(&mut self, id: LinkId) -> Result<SupplyLink> {
        let link = self.slab[id.index()]
            .take()
            .ok_or_else(|| Error::Integrity(format!("remove of dead link {id:?}")))?;

        // live list
        let last = self.live.pop().expect("live list empty");
        if last != id {
            self.live[link.pos_live as usize] = last;
            self.slab[last.index()].as_mut().unwrap().pos_live = link.pos_live;
        }
        // out adjacency
        let out = &mut self.out_adj[link.source.index()];
        let last = out.pop().expect("out adjacency empty");
        if last != id {
            out[link.pos_out as usize] = last;
            self.slab[last.index()].as_mut().unwrap().pos_out = link.pos_out;
        }
        // in adjacency
        let inn = &mut self.in_adj[link.target.index()];
        let last = inn.pop().expect("in adjacency empty");
        if last != id {
            inn[link.pos_in as usize] = last;
            self.slab[last.index()].as_mut().unwrap().pos_in = link.pos_in;
        }
        // sector bucket
        let key = (link.product, self.firms[link.target.index()].sector);
        let bucket = self.buckets.get_mut(&key).expect("bucket missing");
        let last = bucket.pop().expect("bucket empty");
        if last != id {
            bucket[link.pos_bucket as usize] = last;
            self.slab[last.index()].as_mut().unwrap().pos_bucket = link.pos_bucket;
        }

        self.cur_out_strength[link.source.index()] -= link.weight;
        self.total_weight -= link.weight;
        self.free.push(id.0);
        Ok(link)
    }

    /// Moves a link to a new source firm. The new source must share the old
    /// source's sector so the link's product (and bucket) stay unchanged.
    pub(crate) fn set_source(&mut self, id: LinkId, new_source: FirmId) -> Result<()> {
        let (old_source, target, weight, product, pos_out) = {
            let l = self.slab[id.index()]
                .as_ref()
                .ok_or_else(|| Error::Integrity(format!("retarget of dead link {id:?}")))?;
            (l.source, l.target, l.weight, l.product, l.pos_out)
        };
        if new_source == old_source {
            return Ok(());
        }
        if new_source == target {
            return Err(Error::Integrity("retarget would create self-loop".into()));
        }
        if self.firms[new_source.index()].sector != product {
            return Err(Error::Integrity(
                "retarget source sector differs from link product".into(),
            ));
        }
        if self.mode == Mode::Unweighted && self.has_link(new_source, target) {
            return Err(Error::Integrity(
                "retarget would duplicate a pair in unweighted network".into(),
            ));
        }
        // detach from old source's out adjacency
        let out = &mut self.out_adj[old_source.index()];
        let last = out.pop().expect("out adjacency empty");
        if last != id {
            out[pos_out as usize] = last;
            self.slab[last.index()].as_mut().unwrap().pos_out = pos_out;
        }
        // attach to the new one
        let new_pos = self.out_adj[new_source.index()].len() as u32;
        self.out_adj[new_source.index()].push(id);
        let l = self.slab[id.index()].as_mut().unwrap();
        l.source = new_source;
        l.pos_out = new_pos;
        self.cur_out_strength[old_source.index()] -= weight;
        self.cur_out_strength[new_source.index()] += weight;
        Ok(())
    }

    pub(crate) fn add_weight(&mut self, id: LinkId, delta: Weight) -> Result<()> {
        let source = {
            let l = self.slab[id.index()]
                .as_mut()
                .ok_or_else(|| Error::Integrity(format!("weight change on dead link {id:?}")))?;
            l.weight += delta;
            l.source
        };
        self.cur_out_strength[source.index()] += delta;
        self.total_weight += delta;
        Ok(())
    }

    pub(crate) fn sub_weight(&mut self, id: LinkId, delta: Weight) -> Result<()> {
        let source = {
            let l = self.slab[id.index()]
                .as_mut()
                .ok_or_else(|| Error::Integrity(format!("weight change on dead link {id:?}")))?;
            if l.weight <= delta {
                return Err(Error::Integrity(
                    "weight reduction would zero out a link".into(),
                ));
            }
            l.weight -= delta;
            l.source
        };
        self.cur_out_strength[source.index()] -= delta;
        self.total_weight -= delta;
        Ok(())
    }
}

pub(crate) const SNAPSHOT_FORMAT_VERSION: u32 = 1;

/// In-memory network state sufficient to rebuild a link-set-identical
/// network. Serializable for on-disk round trips.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub format_version: u32,
    pub mode: Mode,
    /// (external id, sector code) per firm, indexed by FirmId.
    pub firms: Vec<(String, SectorCode)>,
    pub links: Vec<SnapshotLink>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnapshotLink {
    pub source: u32,
    pub target: u32,
    pub weight: Weight,
}

impl NetworkSnapshot {
    pub fn restore(&self) -> Result<ScNetwork> {
        let mut b = NetworkBuilder::new(self.mode);
        for (external, sector) in &self.firms {
            b.add_firm(external, sector.clone());
        }
        for l in &self.links {
            b.add_link(FirmId(l.source), FirmId(l.target), l.weight)?;
        }
        b.finish()
    }
}

/// Incremental network constructor used by the loader, generators and
/// extraction; computes empirical strengths on `finish`.
pub struct NetworkBuilder {
    mode: Mode,
    sectors: SectorTable,
    firms: Vec<(String, SectorId)>,
    by_external: HashMap<String, FirmId>,
    links: Vec<(FirmId, FirmId, Weight)>,
}

impl NetworkBuilder {
    pub fn new(mode: Mode) -> NetworkBuilder {
        NetworkBuilder {
            mode,
            sectors: SectorTable::default(),
            firms: Vec::new(),
            by_external: HashMap::new(),
            links: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Adds (or finds) a firm by external id. A second registration with a
    /// different sector is an integrity error surfaced by `finish`.
    pub fn add_firm(&mut self, external: &str, sector: SectorCode) -> FirmId {
        if let Some(&id) = self.by_external.get(external) {
            // conflict detection happens in try_add_firm callers; keep id
            return id;
        }
        let sector = self.sectors.intern(sector);
        let id = FirmId(self.firms.len() as u32);
        self.firms.push((external.to_string(), sector));
        self.by_external.insert(external.to_string(), id);
        id
    }

    /// Like `add_firm` but errors when the firm was already registered with a
    /// different sector.
    pub fn try_add_firm(&mut self, external: &str, sector: SectorCode) -> Result<FirmId> {
        if let Some(&id) = self.by_external.get(external) {
            let existing = self.firms[id.index()].1;
            let code = &self.sectors.codes[existing.index()];
            if code != &sector {
                return Err(Error::Integrity(format!(
                    "firm '{external}' declared with sectors '{code}' and '{sector}'"
                )));
            }
            return Ok(id);
        }
        Ok(self.add_firm(external, sector))
    }

    pub fn firm_id(&self, external: &str) -> Option<FirmId> {
        self.by_external.get(external).copied()
    }

    pub fn add_link(&mut self, source: FirmId, target: FirmId, weight: Weight) -> Result<()> {
        if source == target {
            return Err(Error::Integrity("self-loop in builder".into()));
        }
        if weight.is_zero() {
            return Err(Error::Integrity("zero-weight link in builder".into()));
        }
        if self.mode == Mode::Unweighted && weight != Weight::UNIT {
            return Err(Error::Integrity(
                "unweighted links must have weight 1".into(),
            ));
        }
        self.links.push((source, target, weight));
        Ok(())
    }

    pub fn finish(self) -> Result<ScNetwork> {
        let n = self.firms.len();
        if self.mode == Mode::Unweighted {
            let mut seen = std::collections::HashSet::new();
            for &(s, t, _) in &self.links {
                if !seen.insert((s, t)) {
                    return Err(Error::Integrity(format!(
                        "duplicate pair {s:?}->{t:?} in unweighted network"
                    )));
                }
            }
        }
        let firms: Vec<Firm> = self
            .firms
            .iter()
            .enumerate()
            .map(|(i, (external, sector))| Firm {
                id: FirmId(i as u32),
                external: external.clone(),
                sector: *sector,
                out_strength0: Weight::ZERO,
                in_strength0_by_product: BTreeMap::new(),
            })
            .collect();
        let mut net = ScNetwork {
            mode: self.mode,
            firms,
            sectors: self.sectors,
            slab: Vec::with_capacity(self.links.len()),
            free: Vec::new(),
            live: Vec::with_capacity(self.links.len()),
            out_adj: vec![Vec::new(); n],
            in_adj: vec![Vec::new(); n],
            buckets: HashMap::new(),
            cur_out_strength: vec![Weight::ZERO; n],
            total_weight: Weight::ZERO,
            version: 0,
        };
        for (s, t, w) in self.links {
            net.insert_link(s, t, w)?;
        }
        // freeze empirical strengths
        for i in 0..n {
            let id = FirmId(i as u32);
            net.firms[i].out_strength0 = net.cur_out_strength[i];
            net.firms[i].in_strength0_by_product = net.recompute_in_strengths(id);
        }
        Ok(net)
    }
}
