//! Subnetwork extraction: seed-sector Tier-1 induction and greedy-modularity
//! community selection. Both return induced subgraphs (every link between
//! retained firms kept, none added) with strengths re-derived from the
//! retained links.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{FirmId, NetworkBuilder, ScNetwork, SectorId};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedSectorSpec {
    /// Sector code of the seed firms. Codes longer than the data's group
    /// level fall back to their 3-digit prefix when nothing matches exactly.
    pub seed_sector: String,
    pub n_supplier_groups: usize,
    pub n_customer_groups: usize,
    /// Minimum Tier-1 firm count for a group to qualify.
    pub min_group_size: usize,
}

impl Default for SeedSectorSpec {
    fn default() -> Self {
        SeedSectorSpec {
            seed_sector: String::new(),
            n_supplier_groups: 16,
            n_customer_groups: 8,
            min_group_size: 5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommunitySpec {
    /// 2-digit division filter: comma-separated codes and/or ranges,
    /// e.g. "10-33" or "10,22,35".
    pub section_filter: String,
    pub target_size: usize,
}

/// Induced subgraph on a firm set, firms re-indexed densely in ascending
/// old-id order; external ids and sectors carried over.
pub fn induced_subgraph(net: &ScNetwork, keep: &BTreeSet<FirmId>) -> Result<ScNetwork> {
    let mut b = NetworkBuilder::new(net.mode());
    let mut map: HashMap<FirmId, FirmId> = HashMap::new();
    for &old in keep {
        let firm = net.firm(old);
        let new = b.add_firm(&firm.external, net.sector_code(firm.sector).clone());
        map.insert(old, new);
    }
    let mut ids: Vec<_> = net.live_links().to_vec();
    ids.sort_unstable();
    for id in ids {
        let l = net.link(id);
        if let (Some(&s), Some(&t)) = (map.get(&l.source), map.get(&l.target)) {
            b.add_link(s, t, l.weight)?;
        }
    }
    b.finish()
}

fn seed_firms(net: &ScNetwork, seed: &str) -> Vec<FirmId> {
    let exact: Vec<FirmId> = net
        .firms()
        .iter()
        .filter(|f| net.sector_code(f.sector).as_str() == seed)
        .map(|f| f.id)
        .collect();
    if !exact.is_empty() || seed.len() <= 3 {
        return exact;
    }
    let prefix = &seed[..3];
    net.firms()
        .iter()
        .filter(|f| net.sector_code(f.sector).as_str() == prefix)
        .map(|f| f.id)
        .collect()
}

/// Ranks the sector groups of a Tier-1 firm set by overrepresentation
/// (share among Tier-1 ÷ share in the full network), keeps qualifying groups
/// of at least `min_size` Tier-1 firms, and returns the top `n` group ids.
fn top_overrepresented_groups(
    net: &ScNetwork,
    tier1: &BTreeSet<FirmId>,
    min_size: usize,
    n: usize,
) -> Vec<SectorId> {
    if tier1.is_empty() {
        return Vec::new();
    }
    let mut tier1_counts: BTreeMap<SectorId, usize> = BTreeMap::new();
    for &f in tier1 {
        *tier1_counts.entry(net.firm(f).sector).or_insert(0) += 1;
    }
    let mut full_counts: HashMap<SectorId, usize> = HashMap::new();
    for f in net.firms() {
        *full_counts.entry(f.sector).or_insert(0) += 1;
    }
    let t1_total = tier1.len() as f64;
    let full_total = net.n_firms() as f64;
    let mut ranked: Vec<(SectorId, f64)> = tier1_counts
        .iter()
        .filter(|&(_, &count)| count >= min_size)
        .map(|(&sector, &count)| {
            let tier1_share = count as f64 / t1_total;
            let full_share = full_counts[&sector] as f64 / full_total;
            (sector, tier1_share / full_share)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    ranked.into_iter().take(n).map(|(s, _)| s).collect()
}

/// Seed-sector extraction: seed firms plus their Tier-1 suppliers and
/// customers from the most overrepresented sector groups, induced, largest
/// weakly connected component.
pub fn extract_seed_sector(net: &ScNetwork, spec: &SeedSectorSpec) -> Result<ScNetwork> {
    if spec.n_supplier_groups < 1 || spec.n_customer_groups < 1 || spec.min_group_size < 1 {
        return Err(Error::Config("extraction counts must be ≥ 1".into()));
    }
    let seeds = seed_firms(net, &spec.seed_sector);
    if seeds.is_empty() {
        return Err(Error::Data(format!(
            "no firms in seed sector '{}'",
            spec.seed_sector
        )));
    }
    let seed_set: BTreeSet<FirmId> = seeds.iter().copied().collect();
    let seed_sectors: BTreeSet<SectorId> = seeds.iter().map(|&f| net.firm(f).sector).collect();

    // Tier-1 neighbors, excluding firms of the seed class on both sides
    let mut suppliers: BTreeSet<FirmId> = BTreeSet::new();
    let mut customers: BTreeSet<FirmId> = BTreeSet::new();
    for &s in &seeds {
        for &id in net.in_links(s) {
            let src = net.link(id).source;
            if !seed_sectors.contains(&net.firm(src).sector) {
                suppliers.insert(src);
            }
        }
        for &id in net.out_links(s) {
            let tgt = net.link(id).target;
            if !seed_sectors.contains(&net.firm(tgt).sector) {
                customers.insert(tgt);
            }
        }
    }

    let sup_groups = top_overrepresented_groups(
        net,
        &suppliers,
        spec.min_group_size,
        spec.n_supplier_groups,
    );
    let cust_groups = top_overrepresented_groups(
        net,
        &customers,
        spec.min_group_size,
        spec.n_customer_groups,
    );

    let mut keep = seed_set;
    for &f in &suppliers {
        if sup_groups.contains(&net.firm(f).sector) {
            keep.insert(f);
        }
    }
    for &f in &customers {
        if cust_groups.contains(&net.firm(f).sector) {
            keep.insert(f);
        }
    }
    let induced = induced_subgraph(net, &keep)?;
    largest_wcc(&induced)
}

/// Restricts a network to its largest weakly connected component.
pub fn largest_wcc(net: &ScNetwork) -> Result<ScNetwork> {
    let n = net.n_firms();
    if n == 0 {
        return Err(Error::Data("empty network".into()));
    }
    let mut comp = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if comp[start] != u32::MAX {
            continue;
        }
        comp[start] = next;
        queue.push_back(FirmId(start as u32));
        while let Some(u) = queue.pop_front() {
            let mut visit = |v: FirmId| {
                if comp[v.index()] == u32::MAX {
                    comp[v.index()] = next;
                    queue.push_back(v);
                }
            };
            for &id in net.out_links(u) {
                visit(net.link(id).target);
            }
            for &id in net.in_links(u) {
                visit(net.link(id).source);
            }
        }
        next += 1;
    }
    let mut counts = vec![0usize; next as usize];
    for &c in &comp {
        counts[c as usize] += 1;
    }
    let best = counts
        .iter()
        .enumerate()
        .max_by_key(|&(i, &c)| (c, std::cmp::Reverse(i)))
        .map(|(i, _)| i as u32)
        .unwrap();
    let keep: BTreeSet<FirmId> = (0..n)
        .filter(|&i| comp[i] == best)
        .map(|i| FirmId(i as u32))
        .collect();
    induced_subgraph(net, &keep)
}

/// Parses a division filter like "10-33" or "10,22,35" into a predicate set.
fn parse_division_filter(filter: &str) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for token in filter.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        if let Some((lo, hi)) = token.split_once('-') {
            let lo: u32 = lo
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad division range '{token}'")))?;
            let hi: u32 = hi
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad division range '{token}'")))?;
            if lo > hi {
                return Err(Error::Config(format!("bad division range '{token}'")));
            }
            for d in lo..=hi {
                out.insert(format!("{d:02}"));
            }
        } else {
            out.insert(token.to_string());
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty division filter".into()));
    }
    Ok(out)
}

/// Community extraction: induce on firms whose 2-digit division passes the
/// filter, partition with greedy modularity maximization on the collapsed
/// undirected graph, and return the community whose size is closest to the
/// target as an induced directed subgraph.
pub fn extract_community(net: &ScNetwork, spec: &CommunitySpec) -> Result<ScNetwork> {
    if spec.target_size < 1 {
        return Err(Error::Config("target_size must be ≥ 1".into()));
    }
    let divisions = parse_division_filter(&spec.section_filter)?;
    let keep: BTreeSet<FirmId> = net
        .firms()
        .iter()
        .filter(|f| divisions.contains(net.sector_code(f.sector).nace2()))
        .map(|f| f.id)
        .collect();
    if keep.is_empty() {
        return Err(Error::Data(format!(
            "division filter '{}' matches no firms",
            spec.section_filter
        )));
    }
    let filtered = induced_subgraph(net, &keep)?;
    let communities = greedy_modularity_communities(&filtered);
    let chosen = communities
        .iter()
        .min_by_key(|c| {
            (
                c.len().abs_diff(spec.target_size),
                c.iter().next().copied().map(|f| f.0).unwrap_or(u32::MAX),
            )
        })
        .ok_or_else(|| Error::Data("no communities found".into()))?;
    induced_subgraph(&filtered, chosen)
}

/// Greedy modularity maximization (successive community merges by best ΔQ)
/// on the collapsed undirected unit-weight graph. Merging stops when no pair
/// improves modularity. Deterministic: ties break on the smallest community
/// pair.
pub fn greedy_modularity_communities(net: &ScNetwork) -> Vec<BTreeSet<FirmId>> {
    let n = net.n_firms();
    if n == 0 {
        return Vec::new();
    }
    // collapsed undirected simple adjacency
    let mut und: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
    for (_, l) in net.links() {
        und[l.source.index()].insert(l.target.0);
        und[l.target.index()].insert(l.source.0);
    }
    let m: usize = und.iter().map(|s| s.len()).sum::<usize>() / 2;
    if m == 0 {
        return (0..n)
            .map(|i| BTreeSet::from([FirmId(i as u32)]))
            .collect();
    }
    let two_m = (2 * m) as f64;

    // community state: edge counts between communities, degree sums, members
    let mut alive: Vec<bool> = vec![true; n];
    let mut members: Vec<BTreeSet<u32>> = (0..n as u32).map(|i| BTreeSet::from([i])).collect();
    let mut deg_sum: Vec<f64> = und.iter().map(|s| s.len() as f64).collect();
    let mut between: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); n];
    for (u, nbrs) in und.iter().enumerate() {
        for &v in nbrs {
            if (v as usize) > u {
                between[u].insert(v, 1.0);
                between[v as usize].insert(u as u32, 1.0);
            }
        }
    }

    loop {
        // best ΔQ = e_uv/m − 2·(d_u/2m)·(d_v/2m)
        let mut best: Option<(f64, u32, u32)> = None;
        for u in 0..n as u32 {
            if !alive[u as usize] {
                continue;
            }
            for (&v, &e_uv) in &between[u as usize] {
                if v <= u {
                    continue;
                }
                let dq = e_uv / m as f64
                    - 2.0 * (deg_sum[u as usize] / two_m) * (deg_sum[v as usize] / two_m);
                let cand = (dq, u, v);
                best = match best {
                    None => Some(cand),
                    Some(b) if dq > b.0 + 1e-15 => Some(cand),
                    Some(b) => Some(b),
                };
            }
        }
        let Some((dq, u, v)) = best else { break };
        if dq <= 0.0 {
            break;
        }
        // merge v into u
        let v_members = std::mem::take(&mut members[v as usize]);
        members[u as usize].extend(v_members);
        deg_sum[u as usize] += deg_sum[v as usize];
        alive[v as usize] = false;
        let v_between = std::mem::take(&mut between[v as usize]);
        between[u as usize].remove(&v);
        for (w, e) in v_between {
            if w == u {
                continue;
            }
            *between[u as usize].entry(w).or_insert(0.0) += e;
            let bw = &mut between[w as usize];
            bw.remove(&v);
            *bw.entry(u).or_insert(0.0) += e;
        }
    }

    (0..n)
        .filter(|&i| alive[i])
        .map(|i| members[i].iter().map(|&f| FirmId(f)).collect())
        .collect()
}

/// Modularity of a partition on the collapsed undirected unit-weight graph.
pub fn modularity(net: &ScNetwork, partition: &[BTreeSet<FirmId>]) -> f64 {
    let n = net.n_firms();
    let mut und: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
    for (_, l) in net.links() {
        und[l.source.index()].insert(l.target.0);
        und[l.target.index()].insert(l.source.0);
    }
    let m: usize = und.iter().map(|s| s.len()).sum::<usize>() / 2;
    if m == 0 {
        return 0.0;
    }
    let mut comm_of = vec![usize::MAX; n];
    for (c, set) in partition.iter().enumerate() {
        for f in set {
            comm_of[f.index()] = c;
        }
    }
    let mut internal = vec![0usize; partition.len()];
    let mut deg = vec![0usize; partition.len()];
    for (u, nbrs) in und.iter().enumerate() {
        let cu = comm_of[u];
        deg[cu] += nbrs.len();
        for &v in nbrs {
            if (v as usize) > u && comm_of[v as usize] == cu {
                internal[cu] += 1;
            }
        }
    }
    let two_m = (2 * m) as f64;
    (0..partition.len())
        .map(|c| internal[c] as f64 / m as f64 - (deg[c] as f64 / two_m).powi(2))
        .sum()
}
