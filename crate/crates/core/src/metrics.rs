//! Network measures reported before/after rewiring.
//!
//! Conventions: ⟨k_tot⟩ counts multi-edges (it equals 2L/N); reciprocity,
//! SCC and WCC are taken on the directed simple graph (multi-edges
//! collapsed); clustering is transitivity (3·triangles / connected triples)
//! and diameter / average shortest path are computed on the collapsed
//! undirected graph, the latter two restricted to its largest weakly
//! connected component and averaged over ordered reachable pairs. The mean
//! neighbor total degree averages over nodes with at least one undirected
//! neighbor. A single-node component has diameter and average path 0.

use serde::{Deserialize, Serialize};

use crate::network::ScNetwork;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_nodes: usize,
    pub n_links: usize,
    /// Mean total (in+out) degree, multi-edges counted.
    pub mean_total_degree: f64,
    /// Mean over nodes of the mean total degree of their undirected neighbors.
    pub mean_neighbor_total_degree: f64,
    /// Transitivity of the collapsed undirected simple graph.
    pub global_clustering: f64,
    /// Diameter of the largest WCC of the collapsed undirected graph.
    pub diameter: usize,
    /// Average shortest path over ordered reachable pairs in that WCC.
    pub avg_shortest_path: f64,
    /// Sizes of the up-to-three largest strongly connected components.
    pub top3_scc_sizes: Vec<usize>,
    pub largest_wcc_size: usize,
    /// Fraction of directed simple links whose reverse also exists.
    pub reciprocity: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "n_nodes,n_links,mean_total_degree,mean_neighbor_total_degree,global_clustering,diameter,avg_shortest_path,top3_scc_sizes,largest_wcc_size,reciprocity";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.n_nodes,
            self.n_links,
            self.mean_total_degree,
            self.mean_neighbor_total_degree,
            self.global_clustering,
            self.diameter,
            self.avg_shortest_path,
            self.top3_scc_sizes
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            self.largest_wcc_size,
            self.reciprocity
        )
    }
}

pub fn compute_metrics(net: &ScNetwork) -> MetricsReport {
    let n = net.n_firms();
    let n_links = net.n_links();

    // total degree with multi-edges
    let mut k_tot = vec![0usize; n];
    for (_, l) in net.links() {
        k_tot[l.source.index()] += 1;
        k_tot[l.target.index()] += 1;
    }
    let mean_total_degree = if n > 0 {
        k_tot.iter().sum::<usize>() as f64 / n as f64
    } else {
        0.0
    };

    // directed simple adjacency (sorted, deduped)
    let mut dir_adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (_, l) in net.links() {
        dir_adj[l.source.index()].push(l.target.0);
    }
    for row in &mut dir_adj {
        row.sort_unstable();
        row.dedup();
    }

    // collapsed undirected adjacency
    let mut und_adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (u, row) in dir_adj.iter().enumerate() {
        for &v in row {
            und_adj[u].push(v);
            und_adj[v as usize].push(u as u32);
        }
    }
    for row in &mut und_adj {
        row.sort_unstable();
        row.dedup();
    }

    // reciprocity over directed simple links
    let mut simple_links = 0usize;
    let mut reciprocated = 0usize;
    for (u, row) in dir_adj.iter().enumerate() {
        for &v in row {
            simple_links += 1;
            if dir_adj[v as usize].binary_search(&(u as u32)).is_ok() {
                reciprocated += 1;
            }
        }
    }
    let reciprocity = if simple_links > 0 {
        reciprocated as f64 / simple_links as f64
    } else {
        0.0
    };

    // mean neighbor total degree
    let mut nn_sum = 0.0;
    let mut nn_count = 0usize;
    for nbrs in &und_adj {
        if nbrs.is_empty() {
            continue;
        }
        let mean_nbr =
            nbrs.iter().map(|&v| k_tot[v as usize] as f64).sum::<f64>() / nbrs.len() as f64;
        nn_sum += mean_nbr;
        nn_count += 1;
    }
    let mean_neighbor_total_degree = if nn_count > 0 {
        nn_sum / nn_count as f64
    } else {
        0.0
    };

    // transitivity on the undirected simple graph
    let mut triangles = 0usize; // each counted 3 times (once per corner pair scan)
    let mut triples = 0usize;
    for (u, nbrs) in und_adj.iter().enumerate() {
        let d = nbrs.len();
        triples += d * d.saturating_sub(1) / 2;
        for a in 0..d {
            for b in (a + 1)..d {
                let (x, y) = (nbrs[a], nbrs[b]);
                if x as usize != u
                    && y as usize != u
                    && und_adj[x as usize].binary_search(&y).is_ok()
                {
                    triangles += 1;
                }
            }
        }
    }
    // `triangles` here is the number of closed triples / ... each triangle is
    // seen once per corner, i.e. 3 times, which is exactly the 3·triangles
    // numerator of the transitivity definition.
    let global_clustering = if triples > 0 {
        triangles as f64 / triples as f64
    } else {
        0.0
    };

    // weakly connected components on the undirected adjacency
    let wcc = components(&und_adj);
    let largest_wcc: Vec<u32> = largest_component(&wcc, n);
    let largest_wcc_size = largest_wcc.len();

    // BFS all-pairs inside the largest WCC
    let (diameter, avg_shortest_path) = bfs_paths(&und_adj, &largest_wcc);

    // strongly connected components on the directed simple graph
    let mut scc_sizes = scc_sizes(&dir_adj);
    scc_sizes.sort_unstable_by(|a, b| b.cmp(a));
    scc_sizes.truncate(3);

    MetricsReport {
        n_nodes: n,
        n_links,
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

fn components(adj: &[Vec<u32>]) -> Vec<u32> {
    let n = adj.len();
    let mut comp = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if comp[start] != u32::MAX {
            continue;
        }
        comp[start] = next;
        queue.push_back(start as u32);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u as usize] {
                if comp[v as usize] == u32::MAX {
                    comp[v as usize] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    comp
}

fn largest_component(comp: &[u32], n: usize) -> Vec<u32> {
    if n == 0 {
        return Vec::new();
    }
    let n_comp = comp.iter().map(|&c| c + 1).max().unwrap_or(0) as usize;
    let mut counts = vec![0usize; n_comp];
    for &c in comp {
        counts[c as usize] += 1;
    }
    let best = counts
        .iter()
        .enumerate()
        .max_by_key(|&(i, &c)| (c, std::cmp::Reverse(i)))
        .map(|(i, _)| i as u32)
        .unwrap_or(0);
    (0..n as u32).filter(|&v| comp[v as usize] == best).collect()
}

fn bfs_paths(adj: &[Vec<u32>], nodes: &[u32]) -> (usize, f64) {
    if nodes.len() <= 1 {
        return (0, 0.0);
    }
    let n = adj.len();
    let mut dist = vec![u32::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    let mut diameter = 0usize;
    let mut sum = 0u64;
    let mut pairs = 0u64;
    for &start in nodes {
        for d in dist.iter_mut() {
            *d = u32::MAX;
        }
        dist[start as usize] = 0;
        queue.clear();
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &v in &adj[u as usize] {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        for &other in nodes {
            if other == start {
                continue;
            }
            let d = dist[other as usize];
            debug_assert_ne!(d, u32::MAX, "WCC must be connected");
            diameter = diameter.max(d as usize);
            sum += d as u64;
            pairs += 1;
        }
    }
    let avg = if pairs > 0 { sum as f64 / pairs as f64 } else { 0.0 };
    (diameter, avg)
}

/// Iterative Tarjan SCC; returns component sizes.
fn scc_sizes(adj: &[Vec<u32>]) -> Vec<usize> {
    let n = adj.len();
    let mut index = vec![u32::MAX; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut sizes = Vec::new();
    let mut counter = 0u32;
    // explicit DFS stack: (node, next child index)
    let mut dfs: Vec<(u32, usize)> = Vec::new();
    for root in 0..n as u32 {
        if index[root as usize] != u32::MAX {
            continue;
        }
        dfs.push((root, 0));
        index[root as usize] = counter;
        low[root as usize] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        while let Some(&mut (u, ref mut child)) = dfs.last_mut() {
            if *child < adj[u as usize].len() {
                let v = adj[u as usize][*child];
                *child += 1;
                if index[v as usize] == u32::MAX {
                    index[v as usize] = counter;
                    low[v as usize] = counter;
                    counter += 1;
                    stack.push(v);
                    on_stack[v as usize] = true;
                    dfs.push((v, 0));
                } else if on_stack[v as usize] {
                    low[u as usize] = low[u as usize].min(index[v as usize]);
                }
            } else {
                dfs.pop();
                if let Some(&mut (parent, _)) = dfs.last_mut() {
                    low[parent as usize] = low[parent as usize].min(low[u as usize]);
                }
                if low[u as usize] == index[u as usize] {
                    let mut size = 0usize;
                    loop {
                        let v = stack.pop().expect("tarjan stack underflow");
                        on_stack[v as usize] = false;
                        size += 1;
                        if v == u {
                            break;
                        }
                    }
                    sizes.push(size);
                }
            }
        }
    }
    sizes
}

/// Metrics for a labeled series of networks (run snapshots), long-form rows
/// `(label, metric, value)` for plotting.
pub fn metrics_trajectory<'a>(
    series: impl IntoIterator<Item = (String, &'a ScNetwork)>,
) -> Vec<(String, String, f64)> {
    let mut rows = Vec::new();
    for (label, net) in series {
        let m = compute_metrics(net);
        let mut push = |name: &str, value: f64| rows.push((label.clone(), name.to_string(), value));
        push("n_nodes", m.n_nodes as f64);
        push("n_links", m.n_links as f64);
        push("mean_total_degree", m.mean_total_degree);
        push("mean_neighbor_total_degree", m.mean_neighbor_total_degree);
        push("global_clustering", m.global_clustering);
        push("diameter", m.diameter as f64);
        push("avg_shortest_path", m.avg_shortest_path);
        push("largest_scc_size", m.top3_scc_sizes.first().copied().unwrap_or(0) as f64);
        push("largest_wcc_size", m.largest_wcc_size as f64);
        push("reciprocity", m.reciprocity);
    }
    rows
}
