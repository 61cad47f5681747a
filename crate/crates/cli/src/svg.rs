//! Minimal static SVG renderings of already-emitted data.
//!
//! The data files are the contract; these figures are a convenience and
//! plot nothing that is not in the CSV/JSON exports.

use cohort_shapley::bootstrap::FeatureSummary;
use cohort_shapley::report::Histogram;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;

const PALETTE: [&str; 6] = [
    "#4e79a7", "#e15759", "#59a14f", "#f28e2b", "#b07aa1", "#76b7b2",
];

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<style>text{{font:12px sans-serif}}</style>\n\
         <text x=\"{MARGIN}\" y=\"18\">{title}</text>\n"
    )
}

/// Overlaid translucent bars, one color per group.
pub fn histogram(h: &Histogram, feature: &str) -> String {
    let nbins = h.counts.len();
    let max_count = h
        .counts
        .iter()
        .flat_map(|row| row.iter())
        .copied()
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let bar_w = plot_w / nbins as f64;

    let mut out = header(&format!("attribution histogram: {feature}"));
    for (g, group) in h.groups.iter().enumerate() {
        let color = PALETTE[g % PALETTE.len()];
        for (b, row) in h.counts.iter().enumerate() {
            let count = row[g] as f64;
            if count == 0.0 {
                continue;
            }
            let x = MARGIN + b as f64 * bar_w;
            let bh = plot_h * count / max_count;
            let y = HEIGHT - MARGIN - bh;
            out.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bar_w:.2}\" height=\"{bh:.2}\" \
                 fill=\"{color}\" fill-opacity=\"0.45\"/>\n"
            ));
        }
        let lx = MARGIN + 8.0;
        let ly = 30.0 + 14.0 * g as f64;
        out.push_str(&format!(
            "<rect x=\"{lx}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\
             <text x=\"{:.2}\" y=\"{ly}\">{group}</text>\n",
            ly - 9.0,
            lx + 14.0
        ));
    }
    // Axis line and the zero tick.
    out.push_str(&format!(
        "<line x1=\"{MARGIN}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#333\"/>\n",
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    ));
    let lo = h.first_bin as f64 * h.bin_width;
    let hi = (h.first_bin + nbins as i64) as f64 * h.bin_width;
    if lo < 0.0 && hi > 0.0 {
        let zx = MARGIN + plot_w * (0.0 - lo) / (hi - lo);
        out.push_str(&format!(
            "<line x1=\"{zx:.2}\" y1=\"{MARGIN}\" x2=\"{zx:.2}\" y2=\"{}\" \
             stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n",
            HEIGHT - MARGIN
        ));
    }
    out.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"{0}\">{lo:.3}</text>\
         <text x=\"{1}\" y=\"{0}\" text-anchor=\"end\">{hi:.3}</text>\n</svg>\n",
        HEIGHT - MARGIN + 16.0,
        WIDTH - MARGIN
    ));
    out
}

/// One mirrored density shape per (series, feature) summary.
pub fn violins(summaries: &[FeatureSummary], feature_names: &[String]) -> String {
    let k = summaries.len().max(1);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let slot = plot_w / k as f64;

    let lo = summaries
        .iter()
        .flat_map(|s| s.violin.iter().map(|p| p.0))
        .fold(f64::INFINITY, f64::min);
    let hi = summaries
        .iter()
        .flat_map(|s| s.violin.iter().map(|p| p.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let y_of = |v: f64| HEIGHT - MARGIN - plot_h * (v - lo) / span;

    let mut out = header("bootstrap attribution violins");
    for (i, s) in summaries.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let cx = MARGIN + slot * (i as f64 + 0.5);
        let dmax = s
            .violin
            .iter()
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(1e-300);
        let half = slot * 0.42;
        let mut right: Vec<String> = Vec::new();
        let mut left: Vec<String> = Vec::new();
        for &(v, d) in &s.violin {
            let w = half * d / dmax;
            right.push(format!("{:.2},{:.2}", cx + w, y_of(v)));
            left.push(format!("{:.2},{:.2}", cx - w, y_of(v)));
        }
        left.reverse();
        out.push_str(&format!(
            "<polygon points=\"{} {}\" fill=\"{color}\" fill-opacity=\"0.5\" stroke=\"{color}\"/>\n",
            right.join(" "),
            left.join(" ")
        ));
        // Point estimate marker.
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#d00\"/>\n",
            cx - 5.0,
            y_of(s.mean),
            cx + 5.0,
            y_of(s.mean)
        ));
        out.push_str(&format!(
            "<text x=\"{cx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}:{}</text>\n",
            HEIGHT - MARGIN + 16.0,
            s.series,
            feature_names[s.feature]
        ));
    }
    if lo < 0.0 && hi > 0.0 {
        out.push_str(&format!(
            "<line x1=\"{MARGIN}\" y1=\"{0:.2}\" x2=\"{1}\" y2=\"{0:.2}\" \
             stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n",
            y_of(0.0),
            WIDTH - MARGIN
        ));
    }
    out.push_str("</svg>\n");
    out
}
