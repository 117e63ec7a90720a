//! DOT and SVG renderings of flux networks.
//!
//! Line width is proportional to `√|Q|`; zero-flux edges are omitted and
//! edges point in the flow direction.

use std::fmt::Write as _;

use crate::centrality::{default_zero_tol, orient_by_flux};
use crate::graph::{FluxAssignment, Network};

/// Stroke width given to the edge carrying the largest flux.
const MAX_WIDTH: f64 = 6.0;

fn width_scale(q: &FluxAssignment) -> f64 {
    let qmax = q.values().iter().fold(0.0f64, |m, q| m.max(q.abs()));
    if qmax > 0.0 {
        MAX_WIDTH / qmax.sqrt()
    } else {
        0.0
    }
}

/// Directed DOT graph of the nonzero-flux edges. Node positions are pinned
/// when the network has coordinates.
pub fn to_dot(net: &Network, q: &FluxAssignment) -> String {
    let onet = orient_by_flux(net, q, default_zero_tol(net));
    let scale = width_scale(q);
    let mut out = String::from("digraph network {\n  node [shape=point];\n");
    for v in 0..net.vertex_count() {
        let s = net.sources()[v];
        match net.coordinates() {
            Some(c) => writeln!(
                out,
                "  {v} [pos=\"{:.6},{:.6}!\", source=\"{s}\"];",
                c[v][0], c[v][1]
            ),
            None => writeln!(out, "  {v} [source=\"{s}\"];"),
        }
        .expect("writing to a String");
    }
    for &(a, b) in onet.directed_edges() {
        let e = net.find_edge(a, b).expect("oriented edge exists");
        let flux = q.values()[e].abs();
        writeln!(
            out,
            "  {a} -> {b} [penwidth={:.6}, flux=\"{flux}\"];",
            scale * flux.sqrt()
        )
        .expect("writing to a String");
    }
    out.push_str("}\n");
    out
}

/// Direct coordinate plot; `None` when the network has no coordinates.
pub fn to_svg(net: &Network, q: &FluxAssignment) -> Option<String> {
    let coords = net.coordinates()?;
    let onet = orient_by_flux(net, q, default_zero_tol(net));
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in coords {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    let span = (xmax - xmin).max(ymax - ymin).max(1e-9);
    let px = 600.0 / span;
    let margin = 20.0;
    let width = (xmax - xmin) * px + 2.0 * margin;
    let height = (ymax - ymin) * px + 2.0 * margin;
    let map = |p: [f64; 2]| (margin + (p[0] - xmin) * px, margin + (ymax - p[1]) * px);
    let scale = width_scale(q) * 0.75;

    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" viewBox=\"0 0 {width:.1} {height:.1}\">"
    )
    .expect("writing to a String");
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g stroke=\"black\" stroke-linecap=\"round\">\n");
    for &(a, b) in onet.directed_edges() {
        let e = net.find_edge(a, b).expect("oriented edge exists");
        let (x1, y1) = map(coords[a]);
        let (x2, y2) = map(coords[b]);
        writeln!(
            out,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke-width=\"{:.3}\"/>",
            scale * q.values()[e].abs().sqrt()
        )
        .expect("writing to a String");
    }
    out.push_str("</g>\n");
    for (v, &s) in net.sources().iter().enumerate() {
        if s > 0.0 {
            let (x, y) = map(coords[v]);
            writeln!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"red\"/>")
                .expect("writing to a String");
        }
    }
    out.push_str("</svg>\n");
    Some(out)
}
