//! Minimal SVG rendering for run reports: trajectory lines, before/after
//! profile bars and log-log scatters. No styling knobs; artifacts are meant
//! to be glanced at after a batch run.

use std::fmt::Write;

const W: f64 = 900.0;
const H: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(1e-12);
        MARGIN_L + (v - self.x_min) / span * (W - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(1e-12);
        H - MARGIN_B - (v - self.y_min) / span * (H - MARGIN_T - MARGIN_B)
    }
}

fn open_svg(out: &mut String, title: &str) {
    write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>
"#,
        W / 2.0,
        escape(title)
    )
    .unwrap();
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_L;
    let y0 = H - MARGIN_B;
    writeln!(
        out,
        r#"<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}" stroke="black"/>
<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#,
        W - MARGIN_R
    )
    .unwrap();
    for i in 0..=4 {
        let fx = frame.x_min + (frame.x_max - frame.x_min) * i as f64 / 4.0;
        let fy = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 4.0;
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            frame.x(fx),
            y0 + 16.0,
            format_tick(fx)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            frame.y(fy) + 3.0,
            format_tick(fy)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        (MARGIN_L + W - MARGIN_R) / 2.0,
        H - 12.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (MARGIN_T + H - MARGIN_B) / 2.0,
        (MARGIN_T + H - MARGIN_B) / 2.0,
        escape(y_label)
    )
    .unwrap();
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Mean-risk trajectory with a dashed line at the initial level.
pub fn trajectory_svg(points: &[(f64, f64)], initial: f64, title: &str) -> String {
    let mut out = String::new();
    open_svg(&mut out, title);
    if points.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let x_max = points.iter().map(|p| p.0).fold(f64::MIN, f64::max);
    let y_all_min = points.iter().map(|p| p.1).fold(initial, f64::min);
    let y_all_max = points.iter().map(|p| p.1).fold(initial, f64::max);
    let pad = (y_all_max - y_all_min).max(1e-9) * 0.08;
    let frame = Frame {
        x_min: 0.0,
        x_max: x_max.max(1.0),
        y_min: y_all_min - pad,
        y_max: y_all_max + pad,
    };
    axes(&mut out, &frame, "step", "mean ESRI");
    writeln!(
        out,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="6 4"/>"#,
        frame.x(frame.x_min),
        frame.y(initial),
        frame.x(frame.x_max),
        frame.y(initial)
    )
    .unwrap();
    let mut path = String::from("M");
    for (i, &(x, y)) in points.iter().enumerate() {
        if i > 0 {
            path.push('L');
        }
        write!(path, "{:.2} {:.2}", frame.x(x), frame.y(y)).unwrap();
    }
    writeln!(
        out,
        r#"<path d="{path}" fill="none" stroke="black" stroke-width="1.2"/>"#
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

/// Top-k before/after risk profile bars. The main panel ranks firms by the
/// "before" profile; the inset re-ranks the "after" profile so the two
/// distributions compare shape to shape.
pub fn profile_compare_svg(before: &[f64], after: &[f64], top_k: usize, title: &str) -> String {
    let mut out = String::new();
    open_svg(&mut out, title);
    let mut order: Vec<usize> = (0..before.len()).collect();
    order.sort_by(|&a, &b| before[b].partial_cmp(&before[a]).unwrap().then(a.cmp(&b)));
    order.truncate(top_k);
    let k = order.len();
    if k == 0 {
        out.push_str("</svg>\n");
        return out;
    }
    let y_max = order
        .iter()
        .map(|&i| before[i].max(after[i]))
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let frame = Frame {
        x_min: 0.0,
        x_max: k as f64,
        y_min: 0.0,
        y_max: y_max * 1.05,
    };
    axes(&mut out, &frame, "rank in initial profile", "ESRI");
    let slot = (W - MARGIN_L - MARGIN_R) / k as f64;
    for (rank, &firm) in order.iter().enumerate() {
        let x = frame.x(rank as f64);
        let hb = frame.y(0.0) - frame.y(before[firm]);
        let ha = frame.y(0.0) - frame.y(after[firm]);
        writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ccc9c"/>"##,
            x,
            frame.y(before[firm]),
            (slot * 0.55).max(0.5),
            hb
        )
        .unwrap();
        writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="black"/>"#,
            x + slot * 0.3,
            frame.y(after[firm]),
            (slot * 0.4).max(0.4),
            ha
        )
        .unwrap();
    }
    // inset: both profiles rank-ordered independently
    let inset = Frame {
        x_min: 0.0,
        x_max: k as f64,
        y_min: 0.0,
        y_max: y_max * 1.05,
    };
    let (ix, iy, iw, ih) = (W - 320.0, MARGIN_T + 10.0, 280.0, 160.0);
    writeln!(
        out,
        r#"<rect x="{ix}" y="{iy}" width="{iw}" height="{ih}" fill="white" stroke="gray"/>"#
    )
    .unwrap();
    let mut sorted_after: Vec<f64> = after.to_vec();
    sorted_after.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sorted_after.truncate(k);
    let map_x = |r: usize| ix + 6.0 + (iw - 12.0) * r as f64 / k as f64;
    let map_y = |v: f64| iy + ih - 6.0 - (ih - 12.0) * (v / inset.y_max);
    for (color, series) in [
        ("#9ccc9c", order.iter().map(|&i| before[i]).collect::<Vec<_>>()),
        ("black", sorted_after),
    ] {
        let mut path = String::from("M");
        for (r, v) in series.iter().enumerate() {
            if r > 0 {
                path.push('L');
            }
            write!(path, "{:.2} {:.2}", map_x(r), map_y(*v)).unwrap();
        }
        writeln!(
            out,
            r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="1.2"/>"#
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Log-log scatter (degree or strength vs risk). Zero values are clamped to
/// the smallest positive value on each axis.
pub fn scatter_loglog_svg(points: &[(f64, f64)], x_label: &str, y_label: &str, title: &str) -> String {
    let mut out = String::new();
    open_svg(&mut out, title);
    let positive = |sel: fn(&(f64, f64)) -> f64| {
        points
            .iter()
            .map(sel)
            .filter(|&v| v > 0.0)
            .fold(f64::MAX, f64::min)
    };
    let min_x = positive(|p| p.0);
    let min_y = positive(|p| p.1);
    if points.is_empty() || min_x == f64::MAX || min_y == f64::MAX {
        out.push_str("</svg>\n");
        return out;
    }
    let lx = |v: f64| v.max(min_x).log10();
    let ly = |v: f64| v.max(min_y).log10();
    let frame = Frame {
        x_min: points.iter().map(|p| lx(p.0)).fold(f64::MAX, f64::min),
        x_max: points.iter().map(|p| lx(p.0)).fold(f64::MIN, f64::max),
        y_min: points.iter().map(|p| ly(p.1)).fold(f64::MAX, f64::min),
        y_max: points.iter().map(|p| ly(p.1)).fold(f64::MIN, f64::max),
    };
    axes(
        &mut out,
        &frame,
        &format!("log10 {x_label}"),
        &format!("log10 {y_label}"),
    );
    for &(x, y) in points {
        writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="none" stroke="black" stroke-opacity="0.6"/>"#,
            frame.x(lx(x)),
            frame.y(ly(y))
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_documents_are_well_formed_enough() {
        let svg = trajectory_svg(&[(0.0, 0.5), (1.0, 0.4), (2.0, 0.35)], 0.5, "run");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<path"));
        let svg = profile_compare_svg(&[0.5, 0.2, 0.1], &[0.1, 0.2, 0.05], 3, "profiles");
        assert!(svg.matches("<rect").count() >= 6);
        let svg = scatter_loglog_svg(&[(1.0, 0.1), (10.0, 0.5)], "degree", "risk", "scatter");
        assert!(svg.contains("<circle"));
        // empty inputs degrade gracefully
        assert!(trajectory_svg(&[], 0.0, "t").ends_with("</svg>\n"));
        assert!(scatter_loglog_svg(&[], "x", "y", "t").ends_with("</svg>\n"));
    }
}
