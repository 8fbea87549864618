//! Shared test support: an independent straight-line reimplementation of the
//! cascade rules and brute-force graph measures. Everything here takes only
//! the raw network, the essentiality table and run parameters — calibration,
//! market shares and the iteration are all recomputed from their defining
//! formulas with plain maps, no shared code with the engine under test.

#![allow(dead_code)]

use std::collections::BTreeMap;

use scrisk::network::{FirmId, ScNetwork};
use scrisk::production::{Essentiality, EssentialityMatrix};

/// Per-firm ESRI by direct transcription of the update rules:
///   delivered_k(i) = Σ_{j→i, p_j=k} W_ji · (1 − m_j · (1 − h_j))
///   h_down(i) = clamp(min(min_es delivered_k/α_ik, β̄ + (1/α)·Σ_ne delivered_k, x0), 0, x0) / x0
///   h_up(i)   = Σ_{i→j} W_ij · h_j / s_out(i)   (1 if s_out(i) = 0)
///   h(i) ← min(h(i), h_down, h_up); shocked pinned at 0.
pub fn naive_esri_profile(
    net: &ScNetwork,
    ess: &EssentialityMatrix,
    gamma_ne: f64,
    tol: f64,
    t_max: usize,
) -> Vec<f64> {
    let n = net.n_firms();
    // strengths and input baskets recomputed from the links
    let mut s_out = vec![0.0f64; n];
    let mut pi0: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new(); n];
    for (_, l) in net.links() {
        let w = l.weight.to_f64();
        s_out[l.source.index()] += w;
        let product = net.sector_code(l.product).as_str().to_string();
        *pi0[l.target.index()].entry(product).or_insert(0.0) += w;
    }
    let x0: Vec<f64> = s_out.iter().map(|&s| if s > 0.0 { s } else { 1.0 }).collect();

    // market shares within each product (= sector of the producer)
    let mut sector_total: BTreeMap<String, f64> = BTreeMap::new();
    for firm in net.firms() {
        let sector = net.sector_code(firm.sector).as_str().to_string();
        *sector_total.entry(sector).or_insert(0.0) += s_out[firm.id.index()];
    }
    let m: Vec<f64> = net
        .firms()
        .iter()
        .map(|f| {
            let total = sector_total[net.sector_code(f.sector).as_str()];
            if total > 0.0 {
                s_out[f.id.index()] / total
            } else {
                0.0
            }
        })
        .collect();

    // input classification per firm at division granularity
    #[derive(Clone)]
    struct Inputs {
        essential: Vec<(String, f64)>,     // (product, Π_ik(0))
        non_essential: Vec<(String, f64)>,
        ne_sum0: f64,
    }
    let inputs: Vec<Inputs> = net
        .firms()
        .iter()
        .map(|f| {
            let buyer_div = net.sector_code(f.sector).nace2().to_string();
            let mut essential = Vec::new();
            let mut non_essential = Vec::new();
            for (product, &amount) in &pi0[f.id.index()] {
                let sup_div = &product[..product.len().min(2)];
                match ess.lookup(sup_div, &buyer_div) {
                    Essentiality::Essential => essential.push((product.clone(), amount)),
                    Essentiality::NonEssential => non_essential.push((product.clone(), amount)),
                    Essentiality::Irrelevant => {}
                }
            }
            let ne_sum0 = non_essential.iter().map(|&(_, a)| a).sum();
            Inputs {
                essential,
                non_essential,
                ne_sum0,
            }
        })
        .collect();

    let total_out: f64 = s_out.iter().sum();
    let mut esri = vec![0.0f64; n];
    for origin in 0..n {
        let mut h = vec![1.0f64; n];
        h[origin] = 0.0;
        let mut t = 0;
        while t < t_max {
            t += 1;
            let mut next = vec![0.0f64; n];
            let mut max_delta = 0.0f64;
            for i in 0..n {
                if i == origin {
                    next[i] = 0.0;
                    continue;
                }
                // delivered amounts per product
                let mut delivered: BTreeMap<String, f64> = BTreeMap::new();
                for &id in net.in_links(FirmId(i as u32)) {
                    let l = net.link(id);
                    let j = l.source.index();
                    let amount = l.weight.to_f64() * (1.0 - m[j] * (1.0 - h[j]));
                    let product = net.sector_code(l.product).as_str().to_string();
                    *delivered.entry(product).or_insert(0.0) += amount;
                }
                let inp = &inputs[i];
                let mut output = x0[i];
                for (product, amount0) in &inp.essential {
                    let alpha = amount0 / x0[i];
                    let got = delivered.get(product).copied().unwrap_or(0.0);
                    output = output.min(got / alpha);
                }
                if !inp.non_essential.is_empty() && gamma_ne > 0.0 {
                    let beta_bar = x0[i] * (1.0 - gamma_ne);
                    let inv_alpha = gamma_ne * x0[i] / inp.ne_sum0;
                    let got: f64 = inp
                        .non_essential
                        .iter()
                        .map(|(p, _)| delivered.get(p).copied().unwrap_or(0.0))
                        .sum();
                    output = output.min(beta_bar + inv_alpha * got);
                }
                let h_down = output.clamp(0.0, x0[i]) / x0[i];
                let h_up = if s_out[i] > 0.0 {
                    let sold: f64 = net
                        .out_links(FirmId(i as u32))
                        .iter()
                        .map(|&id| {
                            let l = net.link(id);
                            l.weight.to_f64() * h[l.target.index()]
                        })
                        .sum();
                    sold / s_out[i]
                } else {
                    1.0
                };
                next[i] = h[i].min(h_down).min(h_up).max(0.0);
                max_delta = max_delta.max(h[i] - next[i]);
            }
            h = next;
            if max_delta < tol {
                break;
            }
        }
        esri[origin] = if total_out > 0.0 {
            (0..n).map(|i| s_out[i] / total_out * (1.0 - h[i])).sum()
        } else {
            0.0
        };
    }
    esri
}

/// Brute-force reference for the network measures, on adjacency matrices:
/// Floyd–Warshall paths, cubic triangle counting, reachability-based SCCs.
pub struct ReferenceMetrics {
    pub n_nodes: usize,
    pub n_links: usize,
    pub mean_total_degree: f64,
    pub mean_neighbor_total_degree: f64,
    pub global_clustering: f64,
    pub diameter: usize,
    pub avg_shortest_path: f64,
    pub top3_scc_sizes: Vec<usize>,
    pub largest_wcc_size: usize,
    pub reciprocity: f64,
}

pub fn reference_metrics(net: &ScNetwork) -> ReferenceMetrics {
    let n = net.n_firms();
    let mut multi = vec![vec![0usize; n]; n];
    for (_, l) in net.links() {
        multi[l.source.index()][l.target.index()] += 1;
    }
    let adj: Vec<Vec<bool>> = multi
        .iter()
        .map(|row| row.iter().map(|&c| c > 0).collect())
        .collect();
    let und: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| adj[i][j] || adj[j][i]).collect())
        .collect();

    let k_tot: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| multi[i][j] + multi[j][i])
                .sum::<usize>()
        })
        .collect();
    let mean_total_degree = if n > 0 {
        k_tot.iter().sum::<usize>() as f64 / n as f64
    } else {
        0.0
    };

    let mut nn_sum = 0.0;
    let mut nn_count = 0usize;
    for i in 0..n {
        let nbrs: Vec<usize> = (0..n).filter(|&j| j != i && und[i][j]).collect();
        if nbrs.is_empty() {
            continue;
        }
        nn_sum += nbrs.iter().map(|&j| k_tot[j] as f64).sum::<f64>() / nbrs.len() as f64;
        nn_count += 1;
    }
    let mean_neighbor_total_degree = if nn_count > 0 {
        nn_sum / nn_count as f64
    } else {
        0.0
    };

    // transitivity: closed triples / connected triples, both by triple loops
    let mut closed = 0usize;
    let mut triples = 0usize;
    for center in 0..n {
        for a in 0..n {
            for b in (a + 1)..n {
                if a == center || b == center {
                    continue;
                }
                if und[center][a] && und[center][b] {
                    triples += 1;
                    if und[a][b] {
                        closed += 1;
                    }
                }
            }
        }
    }
    let global_clustering = if triples > 0 {
        closed as f64 / triples as f64
    } else {
        0.0
    };

    // reciprocity over directed simple links
    let mut simple = 0usize;
    let mut recip = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j && adj[i][j] {
                simple += 1;
                if adj[j][i] {
                    recip += 1;
                }
            }
        }
    }
    let reciprocity = if simple > 0 {
        recip as f64 / simple as f64
    } else {
        0.0
    };

    // undirected distances by Floyd–Warshall
    const INF: usize = usize::MAX / 4;
    let mut dist = vec![vec![INF; n]; n];
    for i in 0..n {
        dist[i][i] = 0;
        for j in 0..n {
            if i != j && und[i][j] {
                dist[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = dist[i][k] + dist[k][j];
                if via < dist[i][j] {
                    dist[i][j] = via;
                }
            }
        }
    }
    // weak components from distances
    let mut comp = vec![usize::MAX; n];
    let mut next_comp = 0;
    for i in 0..n {
        if comp[i] != usize::MAX {
            continue;
        }
        for j in 0..n {
            if dist[i][j] < INF {
                comp[j] = next_comp;
            }
        }
        next_comp += 1;
    }
    let mut comp_sizes = vec![0usize; next_comp];
    for &c in &comp {
        comp_sizes[c] += 1;
    }
    let (largest_comp, largest_wcc_size) = comp_sizes
        .iter()
        .enumerate()
        .max_by_key(|&(i, &s)| (s, std::cmp::Reverse(i)))
        .map(|(i, &s)| (i, s))
        .unwrap_or((0, 0));
    let mut diameter = 0usize;
    let mut sum = 0usize;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j && comp[i] == largest_comp && comp[j] == largest_comp {
                diameter = diameter.max(dist[i][j]);
                sum += dist[i][j];
                pairs += 1;
            }
        }
    }
    let avg_shortest_path = if pairs > 0 {
        sum as f64 / pairs as f64
    } else {
        0.0
    };

    // SCCs from directed reachability (Warshall closure)
    let mut reach = adj.clone();
    for i in 0..n {
        reach[i][i] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let mut scc = vec![usize::MAX; n];
    let mut n_scc = 0;
    for i in 0..n {
        if scc[i] != usize::MAX {
            continue;
        }
        for j in 0..n {
            if reach[i][j] && reach[j][i] {
                scc[j] = n_scc;
            }
        }
        n_scc += 1;
    }
    let mut scc_sizes = vec![0usize; n_scc];
    for &c in &scc {
        scc_sizes[c] += 1;
    }
    scc_sizes.sort_unstable_by(|a, b| b.cmp(a));
    scc_sizes.truncate(3);

    ReferenceMetrics {
        n_nodes: n,
        n_links: net.n_links(),
        mean_total_degree,
        mean_neighbor_total_degree,
        global_clustering,
        diameter,
        avg_shortest_path,
        top3_scc_sizes: scc_sizes,
        largest_wcc_size,
        reciprocity,
    }
}

/// Builds a network from dense arcs over one sector per node index pattern.
pub fn net_from_arcs(n: usize, arcs: &[(u32, u32)]) -> ScNetwork {
    use scrisk::network::{Mode, NetworkBuilder, SectorCode};
    use scrisk::weight::Weight;
    let mut b = NetworkBuilder::new(Mode::Weighted);
    for i in 0..n {
        b.add_firm(&format!("F{i}"), SectorCode::new("101").unwrap());
    }
    for &(s, t) in arcs {
        b.add_link(FirmId(s), FirmId(t), Weight::from_f64(10.0).unwrap())
            .unwrap();
    }
    b.finish().unwrap()
}
