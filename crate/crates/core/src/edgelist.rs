//! Edge-list file ingestion and serialization.
//!
//! Format: UTF-8 CSV with header `source,target,source_nace3,target_nace3,weight`;
//! unweighted files omit the weight column. Weights are decimals with at most
//! two fractional digits and serialize with exactly two, so write→load→write
//! is byte-stable.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{Mode, NetworkBuilder, ScNetwork, SectorCode};
use crate::weight::Weight;

pub const HEADER_WEIGHTED: &str = "source,target,source_nace3,target_nace3,weight";
pub const HEADER_UNWEIGHTED: &str = "source,target,source_nace3,target_nace3";

/// Default ingestion threshold: links below 3000 monetary units are dropped.
pub fn default_min_weight() -> Weight {
    Weight::from_hundredths(300_000)
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    /// Minimum link weight kept at ingestion. Applies to weighted inputs
    /// only; unweighted links always weigh exactly 1.
    pub min_weight: Weight,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            min_weight: default_min_weight(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub rows: usize,
    pub kept: usize,
    pub dropped_below_min: usize,
    pub dropped_self_loops: usize,
    pub dropped_zero_weight: usize,
    /// Duplicate (source,target) pairs merged in unweighted mode.
    pub merged_duplicates: usize,
}

pub fn load_edge_list(path: impl AsRef<Path>, mode: Mode, opts: &LoadOptions) -> Result<ScNetwork> {
    load_edge_list_with_stats(path, mode, opts).map(|(net, _)| net)
}

pub fn load_edge_list_with_stats(
    path: impl AsRef<Path>,
    mode: Mode,
    opts: &LoadOptions,
) -> Result<(ScNetwork, LoadStats)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_edge_list(&text, &path.display().to_string(), mode, opts)
}

struct Row<'a> {
    line: usize,
    source: &'a str,
    target: &'a str,
    source_sector: SectorCode,
    target_sector: SectorCode,
    weight: Weight,
}

pub fn parse_edge_list(
    text: &str,
    path: &str,
    mode: Mode,
    opts: &LoadOptions,
) -> Result<(ScNetwork, LoadStats)> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty file".to_string()))?;
    let header = header.trim_start_matches('\u{feff}').trim();
    let has_weight_col = match header {
        HEADER_WEIGHTED => true,
        HEADER_UNWEIGHTED => false,
        other => {
            return Err(err(
                1,
                format!("unrecognized header '{other}', expected '{HEADER_WEIGHTED}' or '{HEADER_UNWEIGHTED}'"),
            ))
        }
    };
    if mode == Mode::Weighted && !has_weight_col {
        return Err(err(1, "weighted mode requires a weight column".to_string()));
    }

    let mut stats = LoadStats::default();
    let mut rows: Vec<Row> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        stats.rows += 1;
        let fields: Vec<&str> = trimmed.split(',').collect();
        let expected = if has_weight_col { 5 } else { 4 };
        if fields.len() != expected {
            return Err(err(
                line,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let source = fields[0].trim();
        let target = fields[1].trim();
        if source.is_empty() || target.is_empty() {
            return Err(err(line, "empty firm id".to_string()));
        }
        let source_sector = SectorCode::new(fields[2]).map_err(|m| err(line, m))?;
        let target_sector = SectorCode::new(fields[3]).map_err(|m| err(line, m))?;
        let weight = if has_weight_col {
            Weight::parse(fields[4]).map_err(|m| err(line, m))?
        } else {
            Weight::UNIT
        };

        if source == target {
            stats.dropped_self_loops += 1;
            continue;
        }
        if weight.is_zero() {
            stats.dropped_zero_weight += 1;
            continue;
        }
        // The monetary threshold only makes sense for monetary weights.
        if has_weight_col && weight < opts.min_weight {
            stats.dropped_below_min += 1;
            continue;
        }
        rows.push(Row {
            line,
            source,
            target,
            source_sector,
            target_sector,
            weight,
        });
    }

    let mut builder = NetworkBuilder::new(mode);
    // firms come from surviving rows only, in first-appearance order
    for row in &rows {
        builder
            .try_add_firm(row.source, row.source_sector.clone())
            .map_err(|e| err(row.line, e.to_string()))?;
        builder
            .try_add_firm(row.target, row.target_sector.clone())
            .map_err(|e| err(row.line, e.to_string()))?;
    }
    match mode {
        Mode::Weighted => {
            for row in &rows {
                let s = builder.firm_id(row.source).unwrap();
                let t = builder.firm_id(row.target).unwrap();
                builder.add_link(s, t, row.weight)?;
            }
        }
        Mode::Unweighted => {
            // binarize: filter already ran on raw weights, duplicates merge
            let mut seen = std::collections::HashSet::new();
            for row in &rows {
                let s = builder.firm_id(row.source).unwrap();
                let t = builder.firm_id(row.target).unwrap();
                if seen.insert((s, t)) {
                    builder.add_link(s, t, Weight::UNIT)?;
                } else {
                    stats.merged_duplicates += 1;
                }
            }
        }
    }
    let net = builder.finish()?;
    stats.kept = net.n_links();
    Ok((net, stats))
}

/// Writes the network as an edge list; round-trips exactly through
/// `load_edge_list` with a zero minimum weight.
pub fn write_edge_list(net: &ScNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    render_edge_list(net, &mut out);
    let mut f =
        fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(out.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn render_edge_list(net: &ScNetwork, out: &mut String) {
    use std::fmt::Write;
    let weighted = net.mode() == Mode::Weighted;
    out.push_str(if weighted { HEADER_WEIGHTED } else { HEADER_UNWEIGHTED });
    out.push('\n');
    let mut ids: Vec<_> = net.live_links().to_vec();
    ids.sort_unstable();
    for id in ids {
        let l = net.link(id);
        let s = net.firm(l.source);
        let t = net.firm(l.target);
        let ss = net.sector_code(s.sector);
        let ts = net.sector_code(t.sector);
        if weighted {
            writeln!(out, "{},{},{},{},{}", s.external, t.external, ss, ts, l.weight).unwrap();
        } else {
            writeln!(out, "{},{},{},{}", s.external, t.external, ss, ts).unwrap();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_filter() -> LoadOptions {
        LoadOptions {
            min_weight: Weight::ZERO,
        }
    }

    #[test]
    fn self_loops_dropped() {
        // 3 rows, one self-loop: 2 firms, 2 links survive
        let text = "source,target,source_nace3,target_nace3,weight\n\
                    A,B,101,102,5000\n\
                    B,A,102,101,4000\n\
                    A,A,101,101,9000\n";
        let (net, stats) =
            parse_edge_list(text, "t", Mode::Weighted, &LoadOptions::default()).unwrap();
        assert_eq!(net.n_firms(), 2);
        assert_eq!(net.n_links(), 2);
        assert_eq!(stats.dropped_self_loops, 1);
    }

    #[test]
    fn min_weight_filter_drops_rows_and_stranded_firms() {
        let text = "source,target,source_nace3,target_nace3,weight\n\
                    A,B,101,102,2999\n\
                    B,C,102,103,3000\n";
        let (net, stats) =
            parse_edge_list(text, "t", Mode::Weighted, &LoadOptions::default()).unwrap();
        assert_eq!(stats.dropped_below_min, 1);
        assert_eq!(net.n_links(), 1);
        // A appears only in the dropped row and must not exist
        assert!(net.firm_by_external("A").is_none());
        assert_eq!(net.n_firms(), 2);
    }

    #[test]
    fn strengths_equal_independent_matrix_sums() {
        // 10-row pseudo-random file; oracle: dense weight-matrix column sums
        let text = "source,target,source_nace3,target_nace3,weight\n\
                    F0,F1,101,102,4100.25\n\
                    F0,F2,101,103,3600\n\
                    F1,F2,102,103,5000.5\n\
                    F2,F0,103,101,7000\n\
                    F3,F1,101,102,3200.75\n\
                    F1,F3,102,101,4500\n\
                    F2,F3,103,101,3900.01\n\
                    F3,F0,101,101,6100\n\
                    F0,F3,101,101,3050\n\
                    F1,F0,102,101,8800.99\n";
        let (net, _) =
            parse_edge_list(text, "t", Mode::Weighted, &LoadOptions::default()).unwrap();
        let n = net.n_firms();
        let mut w = vec![vec![0u64; n]; n];
        for (_, l) in net.links() {
            w[l.source.index()][l.target.index()] += l.weight.hundredths();
        }
        for firm in net.firms() {
            let i = firm.id.index();
            let row_sum: u64 = (0..n).map(|j| w[i][j]).sum();
            assert_eq!(firm.out_strength0.hundredths(), row_sum, "out {i}");
            let col_sum: u64 = (0..n).map(|j| w[j][i]).sum();
            let in_total: u64 = firm
                .in_strength0_by_product
                .values()
                .map(|v| v.hundredths())
                .sum();
            assert_eq!(in_total, col_sum, "in {i}");
        }
    }

    #[test]
    fn sector_conflict_is_integrity_error() {
        let text = "source,target,source_nace3,target_nace3,weight\n\
                    A,B,101,102,5000\n\
                    A,C,103,104,5000\n";
        let res = parse_edge_list(text, "t", Mode::Weighted, &no_filter());
        assert!(matches!(res, Err(Error::Parse { line: 3, .. })), "{res:?}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "source,target,source_nace3,target_nace3,weight\n\
                    A,B,101,102,5000\n\
                    A,B,101\n";
        match parse_edge_list(text, "t", Mode::Weighted, &no_filter()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unweighted_load_binarizes_and_merges() {
        let text = "source,target,source_nace3,target_nace3,weight\n\
                    A,B,101,102,5000\n\
                    A,B,101,102,6000\n\
                    B,A,102,101,2999\n";
        let (net, stats) =
            parse_edge_list(text, "t", Mode::Unweighted, &LoadOptions::default()).unwrap();
        // raw filter keeps the two A->B rows, they merge to one unit link
        assert_eq!(net.n_links(), 1);
        assert_eq!(stats.merged_duplicates, 1);
        assert_eq!(stats.dropped_below_min, 1);
        for (_, l) in net.links() {
            assert_eq!(l.weight, Weight::UNIT);
        }
    }

    #[test]
    fn write_load_round_trip_bit_exact() {
        for text in [
            "source,target,source_nace3,target_nace3,weight\n\
             A,B,101,102,5000.00\nB,A,102,101,4000.00\n",
            "source,target,source_nace3,target_nace3,weight\n\
             A,B,101,102,3000.25\nB,C,102,103,9999.99\nC,A,103,101,3000.00\n",
            "source,target,source_nace3,target_nace3\nA,B,101,102\nB,A,102,101\n",
        ] {
            let mode = if text.starts_with(HEADER_WEIGHTED) {
                Mode::Weighted
            } else {
                Mode::Unweighted
            };
            let (net, _) = parse_edge_list(text, "t", mode, &no_filter()).unwrap();
            let mut rendered = String::new();
            render_edge_list(&net, &mut rendered);
            let (net2, _) = parse_edge_list(&rendered, "t", mode, &no_filter()).unwrap();
            let mut rendered2 = String::new();
            render_edge_list(&net2, &mut rendered2);
            assert_eq!(rendered, rendered2);
            assert_eq!(net.link_multiset(), net2.link_multiset());
        }
    }
}
