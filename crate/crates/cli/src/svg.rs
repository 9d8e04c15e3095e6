//! Self-contained SVG line plots: polylines, ticks, grid lines, and a
//! legend, nothing else. Output is a pure function of the input data, so
//! identical data gives byte-identical documents.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
}

const PLOT_W: f64 = 560.0;
const PLOT_H: f64 = 240.0;
const MARGIN_L: f64 = 76.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;
const PANEL_W: f64 = MARGIN_L + PLOT_W + MARGIN_R;
const PANEL_H: f64 = MARGIN_T + PLOT_H + MARGIN_B;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// One axis: data range plus the mapping onto pixels.
struct Axis {
    lo: f64,
    hi: f64,
    scale: Scale,
}

impl Axis {
    /// Span the finite (and, on log axes, positive) values, padded by 4% in
    /// mapped coordinates.
    fn fit(values: impl Iterator<Item = f64>, scale: Scale) -> Option<Axis> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.filter(|v| usable(*v, scale)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return None;
        }
        let (mut mlo, mut mhi) = (map(lo, scale), map(hi, scale));
        if mlo == mhi {
            mlo -= 0.5;
            mhi += 0.5;
        } else {
            let pad = 0.04 * (mhi - mlo);
            mlo -= pad;
            mhi += pad;
        }
        let unmap = |m: f64| match scale {
            Scale::Linear => m,
            Scale::Log => 10f64.powf(m),
        };
        Some(Axis {
            lo: unmap(mlo),
            hi: unmap(mhi),
            scale,
        })
    }

    /// Fraction of the axis length at data value v.
    fn frac(&self, v: f64) -> f64 {
        let (a, b) = (map(self.lo, self.scale), map(self.hi, self.scale));
        (map(v, self.scale) - a) / (b - a)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        match self.scale {
            Scale::Linear => linear_ticks(self.lo, self.hi),
            Scale::Log => log_ticks(self.lo, self.hi),
        }
    }
}

fn usable(v: f64, scale: Scale) -> bool {
    v.is_finite() && (scale == Scale::Linear || v > 0.0)
}

fn map(v: f64, scale: Scale) -> f64 {
    match scale {
        Scale::Linear => v,
        Scale::Log => v.log10(),
    }
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = mag
        * if norm < 1.5 {
            1.0
        } else if norm < 3.5 {
            2.0
        } else if norm < 7.5 {
            5.0
        } else {
            10.0
        };
    let mut ticks = Vec::new();
    let mut k = (lo / step).ceil();
    while k * step <= hi + 1e-9 * step {
        let v = k * step;
        // snap values within a rounding error of zero
        let v = if v.abs() < 1e-12 * step { 0.0 } else { v };
        ticks.push((v, fmt_tick(v)));
        k += 1.0;
    }
    ticks
}

fn log_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let klo = lo.log10().ceil() as i64;
    let khi = hi.log10().floor() as i64;
    if khi < klo {
        return vec![(lo, fmt_tick(lo)), (hi, fmt_tick(hi))];
    }
    let count = khi - klo + 1;
    let step = ((count + 7) / 8).max(1);
    (klo..=khi)
        .step_by(step as usize)
        .map(|k| (10f64.powi(k as i32), format!("1e{k}")))
        .collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        return format!("{v:e}");
    }
    let mut s = format!("{v:.4}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render stacked panels into one SVG document. Fails with a usage message
/// when a panel has no series with at least two drawable points.
pub fn render(panels: &[Panel]) -> Result<String, String> {
    if panels.is_empty() {
        return Err("nothing to plot".into());
    }
    let width = PANEL_W;
    let height = PANEL_H * panels.len() as f64;
    let mut doc = String::new();
    let _ = writeln!(
        doc,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.2}\" height=\"{height:.2}\" \
         viewBox=\"0 0 {width:.2} {height:.2}\" font-family=\"monospace\" font-size=\"11\">"
    );
    let _ = writeln!(
        doc,
        "<rect x=\"0\" y=\"0\" width=\"{width:.2}\" height=\"{height:.2}\" fill=\"white\"/>"
    );

    for (idx, panel) in panels.iter().enumerate() {
        render_panel(&mut doc, panel, idx)?;
    }
    doc.push_str("</svg>\n");
    Ok(doc)
}

fn render_panel(doc: &mut String, panel: &Panel, idx: usize) -> Result<(), String> {
    let drawable: Vec<(&Series, Vec<(f64, f64)>)> = panel
        .series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|&(x, y)| usable(x, panel.x_scale) && usable(y, panel.y_scale))
                .collect();
            (s, pts)
        })
        .filter(|(_, pts)| pts.len() >= 2)
        .collect();
    if drawable.is_empty() {
        return Err(format!(
            "panel {:?} has no series with at least 2 plottable points",
            panel.title
        ));
    }

    let x_axis = Axis::fit(
        drawable.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.0)),
        panel.x_scale,
    )
    .expect("drawable series imply a finite x range");
    let y_axis = Axis::fit(
        drawable.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.1)),
        panel.y_scale,
    )
    .expect("drawable series imply a finite y range");

    let top = PANEL_H * idx as f64 + MARGIN_T;
    let left = MARGIN_L;
    let right = left + PLOT_W;
    let bottom = top + PLOT_H;
    let px = |f: f64| left + f * PLOT_W;
    let py = |f: f64| bottom - f * PLOT_H;

    let _ = writeln!(
        doc,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
        left + PLOT_W / 2.0,
        top - 12.0,
        escape(&panel.title)
    );

    // grid and ticks
    for (v, label) in x_axis.ticks() {
        let x = px(x_axis.frac(v));
        let _ = writeln!(
            doc,
            "<line x1=\"{x:.2}\" y1=\"{top:.2}\" x2=\"{x:.2}\" y2=\"{bottom:.2}\" stroke=\"#eeeeee\"/>"
        );
        let _ = writeln!(
            doc,
            "<line x1=\"{x:.2}\" y1=\"{bottom:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#333333\"/>",
            bottom + 5.0
        );
        let _ = writeln!(
            doc,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            bottom + 18.0,
            escape(&label)
        );
    }
    for (v, label) in y_axis.ticks() {
        let y = py(y_axis.frac(v));
        let _ = writeln!(
            doc,
            "<line x1=\"{left:.2}\" y1=\"{y:.2}\" x2=\"{right:.2}\" y2=\"{y:.2}\" stroke=\"#eeeeee\"/>"
        );
        let _ = writeln!(
            doc,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{left:.2}\" y2=\"{y:.2}\" stroke=\"#333333\"/>",
            left - 5.0
        );
        let _ = writeln!(
            doc,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            left - 8.0,
            y + 4.0,
            escape(&label)
        );
    }

    let _ = writeln!(
        doc,
        "<rect x=\"{left:.2}\" y=\"{top:.2}\" width=\"{PLOT_W:.2}\" height=\"{PLOT_H:.2}\" \
         fill=\"none\" stroke=\"#333333\"/>"
    );
    let _ = writeln!(
        doc,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        left + PLOT_W / 2.0,
        bottom + 38.0,
        escape(&panel.x_label)
    );
    let _ = writeln!(
        doc,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 {:.2} {:.2})\">{}</text>",
        left - 56.0,
        top + PLOT_H / 2.0,
        left - 56.0,
        top + PLOT_H / 2.0,
        escape(&panel.y_label)
    );

    let _ = writeln!(
        doc,
        "<clipPath id=\"clip{idx}\"><rect x=\"{left:.2}\" y=\"{top:.2}\" \
         width=\"{PLOT_W:.2}\" height=\"{PLOT_H:.2}\"/></clipPath>"
    );
    for (i, (_, pts)) in drawable.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x_axis.frac(x)), py(y_axis.frac(y))))
            .collect();
        let _ = writeln!(
            doc,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
             clip-path=\"url(#clip{idx})\" points=\"{}\"/>",
            points.join(" ")
        );
    }

    let labelled = drawable.iter().any(|(s, _)| !s.label.is_empty());
    if labelled {
        for (i, (s, _)) in drawable.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let y = top + 14.0 + 16.0 * i as f64;
            let _ = writeln!(
                doc,
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
                 stroke=\"{color}\" stroke-width=\"1.5\"/>",
                right - 150.0,
                right - 128.0
            );
            let _ = writeln!(
                doc,
                "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
                right - 122.0,
                y + 4.0,
                escape(&s.label)
            );
        }
    }
    Ok(())
}
