//! Minimal SVG line charts of probed traces.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use patchsim_core::signal::Trace;
use patchsim_core::SimResult;

/// Upper bound on vertices per polyline.
pub const MAX_POINTS: usize = 2000;

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Style {
    pub stroke: &'static str,
    pub dash: Option<&'static str>,
}

/// Series styles in assignment order. Black first, grey dashed second.
pub const PALETTE: [Style; 6] = [
    Style { stroke: "#000000", dash: None },
    Style { stroke: "#888888", dash: Some("6 3") },
    Style { stroke: "#1f77b4", dash: None },
    Style { stroke: "#d62728", dash: Some("2 2") },
    Style { stroke: "#2ca02c", dash: Some("8 2 2 2") },
    Style { stroke: "#9467bd", dash: None },
];

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub width: u32,
    pub height: u32,
    pub series: Vec<(String, Style)>,
    pub x_label: String,
    pub y_label: String,
}

impl PlotSpec {
    /// One series per net, styled from [`PALETTE`] in order.
    pub fn for_nets<S: AsRef<str>>(nets: &[S]) -> Self {
        Self {
            width: 800,
            height: 400,
            series: nets
                .iter()
                .enumerate()
                .map(|(i, n)| (n.as_ref().to_string(), PALETTE[i % PALETTE.len()]))
                .collect(),
            x_label: "t".into(),
            y_label: "value".into(),
        }
    }

    /// All probes of a result.
    pub fn for_result(result: &SimResult) -> Self {
        let nets: Vec<&str> = result.traces().map(Trace::name).collect();
        Self::for_nets(&nets)
    }
}

/// Indices kept after decimation: evenly strided, always including the
/// last sample.
pub fn decimate(len: usize) -> Vec<usize> {
    if len <= MAX_POINTS {
        return (0..len).collect();
    }
    let stride = (len - 1).div_ceil(MAX_POINTS - 1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(result: &SimResult, spec: &PlotSpec) -> Result<String> {
    if spec.series.is_empty() {
        bail!("plot needs at least one series");
    }
    let traces = spec
        .series
        .iter()
        .map(|(net, _)| {
            result
                .trace(net)
                .with_context(|| format!("net `{net}` is not probed"))
        })
        .collect::<Result<Vec<_>>>()?;

    let (x0, x1) = extent(traces.iter().flat_map(|t| t.grid().times()));
    let (y0, y1) = extent(traces.iter().flat_map(|t| t.values().iter().copied()));
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    let pw = w - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = h - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#444444" stroke-width="1"/>"##
    );

    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let bottom = MARGIN_TOP + ph;
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="#444444"/><text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
            bottom + 5.0,
            bottom + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_LEFT}" y2="{py:.2}" stroke="#444444"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        h - 10.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0,
        escape(&spec.y_label)
    );

    for (k, (trace, (net, style))) in traces.iter().zip(&spec.series).enumerate() {
        let values = trace.values();
        let points: Vec<String> = decimate(values.len())
            .into_iter()
            .map(|i| format!("{:.2},{:.2}", sx(trace.grid().time(i)), sy(values[i])))
            .collect();
        let dash = style
            .dash
            .map(|d| format!(r#" stroke-dasharray="{d}""#))
            .unwrap_or_default();
        let _ = writeln!(
            svg,
            r#"<polyline data-net="{}" fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
            escape(net),
            style.stroke,
            points.join(" ")
        );
        let ly = MARGIN_TOP + 15.0 + 15.0 * k as f64;
        let lx = MARGIN_LEFT + pw - 90.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="1.5"{dash}/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            lx + 25.0,
            style.stroke,
            lx + 30.0,
            ly + 4.0,
            escape(net)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

pub fn plot_svg(result: &SimResult, spec: &PlotSpec, path: &Path) -> Result<()> {
    let svg = render_svg(result, spec)?;
    fs::write(path, svg).with_context(|| format!("writing {}", path.display()))
}
