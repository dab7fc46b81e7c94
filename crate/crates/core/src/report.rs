//! Static SVG line charts of fold-mean metrics against μ, and table export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{persist_summary, Metric, SweepSummary};
use crate::regularizers::RegularizerKind;

/// Canvas size, colors and axis labels of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub width: u32,
    pub height: u32,
    /// Colors handed out to datasets in name order, cycling if needed.
    pub palette: Vec<String>,
    pub x_label: String,
    /// Defaults to the metric name.
    pub y_label: Option<String>,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            width: 640,
            height: 420,
            palette: [
                "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
                "#7f7f7f",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            x_label: "μ".to_string(),
            y_label: None,
        }
    }
}

impl PlotStyle {
    pub fn validate(&self) -> Result<()> {
        if self.width < 100 || self.height < 100 {
            return Err(Error::InvalidParameter(format!(
                "plot size {}x{} is too small",
                self.width, self.height
            )));
        }
        if self.palette.is_empty() {
            return Err(Error::InvalidParameter("plot palette is empty".into()));
        }
        Ok(())
    }

    fn color(&self, i: usize) -> &str {
        &self.palette[i % self.palette.len()]
    }
}

/// One chart of the result figures: which regularizer was trained and
/// which metric is plotted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Panel {
    pub id: &'static str,
    pub kind: RegularizerKind,
    pub metric: Metric,
}

impl Panel {
    pub fn file_name(&self) -> String {
        format!("{}_{}__{}.svg", self.id, self.kind, self.metric.name())
    }
}

const fn panel(id: &'static str, kind: RegularizerKind, metric: Metric) -> Panel {
    Panel { id, kind, metric }
}

/// Direct effects, indirect effects between the three criteria, effects
/// through accuracy and balance, and the effect panels on the changeable
/// decomposition terms.
pub const FIGURE_PANELS: [Panel; 20] = {
    use Metric as M;
    use RegularizerKind as K;
    [
        panel("direct1", K::Ind, M::NInd),
        panel("direct2", K::Sep, M::NSep),
        panel("direct3", K::Suf, M::NSuf),
        panel("indirect1", K::Ind, M::NSep),
        panel("indirect2", K::Sep, M::NInd),
        panel("indirect3", K::Sep, M::NSuf),
        panel("indirect4", K::Suf, M::NSep),
        panel("accbal1", K::Bal, M::NSep),
        panel("accbal2", K::Bal, M::NSuf),
        panel("accbal3", K::NegAcc, M::NSep),
        panel("accbal4", K::NegAcc, M::NSuf),
        panel("effect1", K::NegAcc, M::NInd),
        panel("effect2", K::NegAcc, M::Bal),
        panel("effect3", K::NegAcc, M::NegAcc),
        panel("effect4", K::Bal, M::NInd),
        panel("effect5", K::Bal, M::Bal),
        panel("effect6", K::Bal, M::NegAcc),
        panel("effect7", K::Ind, M::NegAcc),
        panel("effect8", K::Sep, M::NegAcc),
        panel("effect9", K::Suf, M::NegAcc),
    ]
};

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Series per dataset: `(μ, fold mean)` with `None` where undefined.
type Series = BTreeMap<String, Vec<(f64, Option<f64>)>>;

fn collect_series(summaries: &[SweepSummary], kind: RegularizerKind, metric: Metric) -> Series {
    let mut series: Series = BTreeMap::new();
    for s in summaries {
        for row in s.rows.iter().filter(|r| r.kind == kind) {
            series
                .entry(row.dataset.clone())
                .or_default()
                .push((row.mu, row.mean(metric)));
        }
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
    }
    series
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|i| lo + (hi - lo) * i as f64 / count as f64)
        .collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

/// Renders the chart as an SVG document.
pub fn render_metric_vs_mu(
    summaries: &[SweepSummary],
    kind: RegularizerKind,
    metric: Metric,
    style: &PlotStyle,
) -> Result<String> {
    style.validate()?;
    let series = collect_series(summaries, kind, metric);
    if series.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no summary rows for regularizer {kind}"
        )));
    }

    let mus = series.values().flatten().map(|p| p.0);
    let (x_lo, x_hi) = mus.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    let (x_lo, x_hi) = if x_hi > x_lo { (x_lo, x_hi) } else { (x_lo - 1.0, x_lo + 1.0) };
    let values: Vec<f64> = series.values().flatten().filter_map(|p| p.1).collect();
    let v_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let (y_lo, y_hi) = if metric.is_normalized() {
        (0.0, if v_max.is_finite() { v_max.max(1.0) * 1.05 } else { 1.05 })
    } else if values.is_empty() {
        (0.0, 1.0)
    } else {
        let lo = v_min.min(0.0);
        let hi = v_max.max(0.0);
        let span = if hi > lo { hi - lo } else { 1.0 };
        (if lo < 0.0 { lo - 0.05 * span } else { 0.0 }, if hi > 0.0 { hi + 0.05 * span } else { 0.05 * span })
    };

    let (w, h) = (style.width as f64, style.height as f64);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 55.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let sx = |x: f64| left + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let y_label = style.y_label.clone().unwrap_or_else(|| metric.name().to_string());
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text class="title" x="{:.2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{} → {}</text>"#,
        left + plot_w / 2.0,
        kind,
        escape(metric.name())
    );

    // Axes and ticks.
    let _ = writeln!(svg, r#"<g class="axes" stroke="black" stroke-width="1" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{l:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}"/>"#,
        l = left,
        r = left + plot_w,
        b = top + plot_h
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{l:.2}" y1="{t:.2}" x2="{l:.2}" y2="{b:.2}"/>"#,
        l = left,
        t = top,
        b = top + plot_h
    );
    for t in nice_ticks(x_lo, x_hi, 5) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{b2:.2}"/><text x="{x:.2}" y="{ty:.2}" text-anchor="middle" stroke="none">{}</text>"#,
            fmt_tick(t),
            b = top + plot_h,
            b2 = top + plot_h + 5.0,
            ty = top + plot_h + 18.0
        );
    }
    for t in nice_ticks(y_lo, y_hi, 5) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{l2:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end" stroke="none">{}</text>"#,
            fmt_tick(t),
            l = left,
            l2 = left - 5.0,
            tx = left - 8.0,
            ty = y + 4.0
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        left + plot_w / 2.0,
        h - 12.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text class="y-label" x="18" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {:.2})">{}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(&y_label)
    );

    // Curves; undefined values split a curve into separate polylines.
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = style.color(i);
        let _ = writeln!(svg, r#"<g class="series" data-dataset="{}" stroke="{color}" fill="{color}">"#, escape(name));
        let mut segments: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for &(mu, v) in pts {
            match v {
                Some(v) => segments.last_mut().expect("nonempty").push((sx(mu), sy(v))),
                None => segments.push(Vec::new()),
            }
        }
        for seg in segments.iter().filter(|s| !s.is_empty()) {
            let points: Vec<String> = seg.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke-width="2"/>"#,
                points.join(" ")
            );
            for (x, y) in seg {
                let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" stroke="none"/>"#);
            }
        }
        let _ = writeln!(svg, "</g>");
    }

    // Legend.
    let _ = writeln!(svg, r#"<g class="legend" font-family="sans-serif" font-size="12">"#);
    for (i, name) in series.keys().enumerate() {
        let y = top + 10.0 + 20.0 * i as f64;
        let x = left + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/><text class="legend-entry" x="{tx:.2}" y="{ty:.2}">{}</text>"#,
            style.color(i),
            escape(name),
            x2 = x + 20.0,
            tx = x + 26.0,
            ty = y + 4.0
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes one chart: fold-mean `metric` against μ for models trained with
/// `kind`, one curve per dataset.
pub fn plot_metric_vs_mu(
    summaries: &[SweepSummary],
    kind: RegularizerKind,
    metric: Metric,
    style: &PlotStyle,
    path: impl AsRef<Path>,
) -> Result<()> {
    let svg = render_metric_vs_mu(summaries, kind, metric, style)?;
    std::fs::write(path, svg)?;
    Ok(())
}

/// Writes every figure panel whose regularizer appears in `summaries`.
pub fn plot_figures(
    summaries: &[SweepSummary],
    style: &PlotStyle,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for p in FIGURE_PANELS {
        let present = summaries.iter().any(|s| s.rows.iter().any(|r| r.kind == p.kind));
        if !present {
            continue;
        }
        let path = dir.join(p.file_name());
        plot_metric_vs_mu(summaries, p.kind, p.metric, style, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes the summary as CSV; readable with [`crate::experiment::load_summary`].
pub fn export_table(summary: &SweepSummary, path: impl AsRef<Path>) -> Result<()> {
    persist_summary(summary, path)
}
