//! Static HTML report of mined patterns.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{EventId, EventOntology};
use crate::miner::Pattern;

/// Pixel region behind one member transaction of a pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiRef {
    pub doc_id: String,
    pub row: u32,
    pub col: u32,
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCount {
    pub event: EventId,
    pub name: String,
    pub patterns: usize,
}

/// Pattern counts for every event of the ontology, in id order.
pub fn event_counts(patterns: &[Pattern], ontology: &EventOntology) -> Vec<EventCount> {
    ontology
        .events()
        .iter()
        .map(|e| EventCount {
            event: e.id,
            name: e.name.clone(),
            patterns: patterns.iter().filter(|p| p.event == e.id).count(),
        })
        .collect()
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

const MAX_ROIS_PER_CARD: usize = 12;

pub fn render_html(
    patterns: &[Pattern],
    rois: &[Vec<RoiRef>],
    ontology: &EventOntology,
) -> String {
    let counts = event_counts(patterns, ontology);
    let event_name = |e: EventId| ontology.name(e).unwrap_or("unknown").to_string();
    let mut h = String::new();
    h.push_str(
        r#"<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="UTF-8">
<title>Multimodal pattern report</title>
<style>
body { font-family: Helvetica, Arial, sans-serif; margin: 2rem; color: #1d1d1f; background: #f5f5f7; }
table { border-collapse: collapse; margin-bottom: 2rem; background: #fff; }
th, td { border: 1px solid #d2d2d7; padding: 0.3rem 0.8rem; text-align: left; }
.cards { display: flex; flex-wrap: wrap; gap: 1rem; }
.card { background: #fff; border: 1px solid #d2d2d7; border-radius: 8px; padding: 1rem; width: 22rem; }
.card h3 { margin: 0 0 0.5rem 0; }
.meta { color: #6e6e73; font-size: 0.9rem; }
.rois { font-family: monospace; font-size: 0.8rem; }
</style>
</head>
<body>
<h1>Multimodal pattern report</h1>
"#,
    );
    let _ = writeln!(h, "<p>{} patterns across {} events.</p>", patterns.len(), counts.len());

    h.push_str("<h2>Patterns per event</h2>\n<table>\n<tr><th>Event</th><th>Patterns</th></tr>\n");
    for c in &counts {
        let _ = writeln!(h, "<tr><td>{}</td><td>{}</td></tr>", escape(&c.name), c.patterns);
    }
    let _ = writeln!(h, "<tr><th>Total</th><th>{}</th></tr>\n</table>", patterns.len());

    if patterns.is_empty() {
        h.push_str("<p>No patterns were found (0 patterns).</p>\n");
    } else {
        h.push_str("<h2>Patterns</h2>\n<div class=\"cards\">\n");
        for (i, p) in patterns.iter().enumerate() {
            let title = p.name.as_deref().unwrap_or("(unnamed)");
            let _ = writeln!(h, "<div class=\"card\" id=\"pattern-{i}\">");
            let _ = writeln!(h, "<h3>{}</h3>", escape(title));
            let _ = writeln!(
                h,
                "<div class=\"meta\">event: {} &middot; support: {} &middot; confidence: {:.4}</div>",
                escape(&event_name(p.event)),
                p.support_count,
                p.confidence
            );
            let _ = writeln!(
                h,
                "<div class=\"meta\">filters: {:?} &middot; word clusters: {:?}</div>",
                p.visual_items, p.text_items
            );
            if p.name_blacklisted {
                h.push_str("<div class=\"meta\">top name removed by the event blacklist</div>\n");
            }
            h.push_str("<ul class=\"rois\">\n");
            let members = rois.get(i).map_or(&[][..], Vec::as_slice);
            for r in members.iter().take(MAX_ROIS_PER_CARD) {
                let _ = writeln!(
                    h,
                    "<li>{} cell ({}, {}) x [{}, {}) y [{}, {})</li>",
                    escape(&r.doc_id),
                    r.row,
                    r.col,
                    r.x0,
                    r.x1,
                    r.y0,
                    r.y1
                );
            }
            if members.len() > MAX_ROIS_PER_CARD {
                let _ = writeln!(h, "<li>... {} more</li>", members.len() - MAX_ROIS_PER_CARD);
            }
            h.push_str("</ul>\n</div>\n");
        }
        h.push_str("</div>\n");
    }
    h.push_str("</body>\n</html>\n");
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EventDef;

    fn ontology() -> EventOntology {
        EventOntology::new(vec![EventDef {
            id: 0,
            name: "meet <summit>".into(),
            triggers: ["summit".to_string()].into_iter().collect(),
        }])
        .unwrap()
    }

    #[test]
    fn empty_report_states_zero_patterns() {
        let html = render_html(&[], &[], &ontology());
        assert!(html.contains("0 patterns"));
        assert!(html.contains("meet &lt;summit&gt;"));
        assert!(html.trim_end().ends_with("</html>"));
    }

    #[test]
    fn cards_show_names_and_rois() {
        let p = Pattern {
            event: 0,
            visual_items: vec![3],
            text_items: vec![1],
            support_count: 40,
            antecedent_count: 40,
            confidence: 1.0,
            member_tx: vec![0],
            name: Some("world leaders".into()),
            name_score: Some(3.0),
            name_blacklisted: false,
        };
        let roi = RoiRef {
            doc_id: "d1".into(),
            row: 0,
            col: 0,
            x0: 0,
            y0: 0,
            x1: 132,
            y1: 132,
        };
        let html = render_html(&[p], &[vec![roi]], &ontology());
        assert!(html.contains("<h3>world leaders</h3>"));
        assert!(html.contains("support: 40"));
        assert!(html.contains("d1 cell (0, 0) x [0, 132)"));
    }
}
