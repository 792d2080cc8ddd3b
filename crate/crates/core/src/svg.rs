//! Static SVG boxplots of replicated index estimates.

use std::fmt::Write as _;

use crate::allocation::Strategy;
use crate::bench::StrategySummary;
use crate::model::Group;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 64.0;

fn color(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Fixed(_) => "#d62728",
        Strategy::Opt => "#2ca02c",
        Strategy::Sqrt => "#1f77b4",
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn ordered<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut seen = Vec::new();
    for item in items {
        if !seen.contains(&item) {
            seen.push(item);
        }
    }
    seen
}

/// One panel per group; inside a panel, boxes are clustered by budget and
/// coloured by strategy. Whiskers span min to max and the dashed line marks
/// the true index.
pub fn boxplot_svg(summaries: &[StrategySummary], title: &str) -> String {
    let groups: Vec<Group> = ordered(summaries.iter().map(|s| s.group.clone()));
    let mut budgets: Vec<u64> = ordered(summaries.iter().map(|s| s.budget));
    budgets.sort_unstable();
    let strategies: Vec<Strategy> = ordered(summaries.iter().map(|s| s.strategy));

    let width = PANEL_W * groups.len().max(1) as f64;
    let height = PANEL_H + 28.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(
        out,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );

    for (gi, group) in groups.iter().enumerate() {
        let cells: Vec<&StrategySummary> = summaries.iter().filter(|s| &s.group == group).collect();
        let truth = cells.first().map_or(0.0, |s| s.truth);
        let (mut lo, mut hi) = (truth, truth);
        for s in &cells {
            lo = lo.min(s.min);
            hi = hi.max(s.max);
        }
        let pad = ((hi - lo) * 0.08).max(1e-3);
        let (lo, hi) = (lo - pad, hi + pad);

        let x0 = gi as f64 * PANEL_W + MARGIN_L;
        let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
        let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
        let y = |v: f64| MARGIN_T + (hi - v) / (hi - lo) * plot_h;

        let _ = writeln!(
            out,
            r#"<g class="panel" id="panel-{}">"#,
            escape(&group.label())
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">S{{{}}}</text>"#,
            x0 + plot_w / 2.0,
            escape(&group.label())
        );
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.1}" y="{MARGIN_T:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#444"/>"##
        );
        for t in 0..=4 {
            let v = lo + (hi - lo) * t as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#,
                x0 - 4.0,
                y(v) + 4.0
            );
        }

        let slot = plot_w / budgets.len().max(1) as f64;
        let box_w = slot / (strategies.len() as f64 + 1.0);
        for (bi, budget) in budgets.iter().enumerate() {
            let cx = x0 + slot * (bi as f64 + 0.5);
            let _ = writeln!(
                out,
                r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">T={budget}</text>"#,
                MARGIN_T + plot_h + 16.0
            );
            for (si, strategy) in strategies.iter().enumerate() {
                let Some(s) = cells
                    .iter()
                    .find(|s| s.budget == *budget && s.strategy == *strategy)
                else {
                    continue;
                };
                let bx = x0 + slot * bi as f64 + box_w * (si as f64 + 0.5);
                let mid = bx + box_w / 2.0;
                let c = color(*strategy);
                let _ = writeln!(
                    out,
                    r#"<g class="box" data-strategy="{strategy}" data-T="{budget}">"#
                );
                let _ = writeln!(
                    out,
                    r#"<line x1="{mid:.1}" y1="{:.1}" x2="{mid:.1}" y2="{:.1}" stroke="{c}"/>"#,
                    y(s.max),
                    y(s.min)
                );
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{c}" fill-opacity="0.35" stroke="{c}"/>"#,
                    bx + 1.0,
                    y(s.q3),
                    (box_w - 2.0).max(1.0),
                    (y(s.q1) - y(s.q3)).max(0.5)
                );
                let _ = writeln!(
                    out,
                    r#"<line x1="{:.1}" y1="{2:.1}" x2="{:.1}" y2="{2:.1}" stroke="{c}" stroke-width="2"/>"#,
                    bx + 1.0,
                    bx + box_w - 1.0,
                    y(s.median)
                );
                let _ = writeln!(out, "</g>");
            }
        }
        let _ = writeln!(
            out,
            r#"<line class="truth" x1="{x0:.1}" y1="{1:.1}" x2="{:.1}" y2="{1:.1}" stroke="red" stroke-dasharray="6 4"/>"#,
            x0 + plot_w,
            y(truth)
        );
        let _ = writeln!(out, "</g>");
    }

    let mut lx = MARGIN_L;
    for strategy in &strategies {
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{strategy}</text>"#,
            PANEL_H + 6.0,
            color(*strategy),
            lx + 14.0,
            PANEL_H + 15.0
        );
        lx += 90.0;
    }
    out.push_str("</svg>\n");
    out
}
