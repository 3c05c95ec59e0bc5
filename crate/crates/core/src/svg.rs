//! Minimal static SVG charts: box plots and grouped bar charts.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 7] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3"];

/// Minimum, lower quartile, median, upper quartile, maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

struct Frame {
    body: String,
    y_max: f64,
}

impl Frame {
    fn new(title: &str, y_label: &str, y_max: f64) -> Self {
        let y_max = if y_max.is_finite() && y_max > 0.0 { y_max } else { 1.0 };
        let mut body = String::new();
        let _ = write!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = write!(
            body,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/><text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let (x0, y0, y1) = (LEFT, HEIGHT - BOTTOM, TOP);
        let _ = write!(
            body,
            r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#,
            WIDTH - RIGHT
        );
        for t in 0..=4 {
            let v = y_max * t as f64 / 4.0;
            let y = y0 - (y0 - y1) * t as f64 / 4.0;
            let _ = write!(
                body,
                r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                x0 - 6.0,
                y + 4.0,
                format_tick(v)
            );
        }
        let _ = write!(
            body,
            r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
        Self { body, y_max }
    }

    fn y(&self, v: f64) -> f64 {
        let plot = HEIGHT - BOTTOM - TOP;
        HEIGHT - BOTTOM - plot * (v / self.y_max).clamp(0.0, 1.0)
    }

    fn x_label(&mut self, x: f64, text: &str) {
        let _ = write!(
            self.body,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 18.0,
            escape(text)
        );
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn slot_width(count: usize) -> f64 {
    (WIDTH - LEFT - RIGHT) / count.max(1) as f64
}

/// One box per label.
pub fn boxplot(title: &str, y_label: &str, labels: &[String], boxes: &[FiveNumber]) -> String {
    let y_max = boxes.iter().map(|b| b.max).fold(0.0f64, f64::max) * 1.05;
    let mut frame = Frame::new(title, y_label, y_max);
    let slot = slot_width(boxes.len());
    for (idx, (label, b)) in labels.iter().zip(boxes).enumerate() {
        let cx = LEFT + slot * (idx as f64 + 0.5);
        let half = slot * 0.3;
        let color = PALETTE[idx % PALETTE.len()];
        let (ymin, yq1, ymed, yq3, ymax) = (frame.y(b.min), frame.y(b.q1), frame.y(b.median), frame.y(b.q3), frame.y(b.max));
        let _ = write!(
            frame.body,
            r#"<line x1="{cx:.2}" y1="{ymin:.2}" x2="{cx:.2}" y2="{yq1:.2}" stroke="black"/><line x1="{cx:.2}" y1="{yq3:.2}" x2="{cx:.2}" y2="{ymax:.2}" stroke="black"/><rect x="{:.2}" y="{yq3:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.6" stroke="black"/><line x1="{:.2}" y1="{ymed:.2}" x2="{:.2}" y2="{ymed:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            2.0 * half,
            (yq1 - yq3).max(0.0),
            cx - half,
            cx + half,
        );
        frame.x_label(cx, label);
    }
    frame.finish()
}

/// Bars grouped by category, one colour per series.
pub fn grouped_bars(title: &str, y_label: &str, categories: &[String], series: &[(String, Vec<f64>)]) -> String {
    let y_max = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0f64, f64::max)
        * 1.05;
    let mut frame = Frame::new(title, y_label, y_max);
    let slot = slot_width(categories.len());
    let bar = slot * 0.8 / series.len().max(1) as f64;
    for (c, category) in categories.iter().enumerate() {
        let left = LEFT + slot * c as f64 + slot * 0.1;
        for (s, (_, values)) in series.iter().enumerate() {
            let v = values.get(c).copied().unwrap_or(0.0);
            let top = frame.y(v);
            let _ = write!(
                frame.body,
                r#"<rect x="{:.2}" y="{top:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
                left + bar * s as f64,
                HEIGHT - BOTTOM - top,
                PALETTE[s % PALETTE.len()]
            );
        }
        frame.x_label(LEFT + slot * (c as f64 + 0.5), category);
    }
    for (s, (name, _)) in series.iter().enumerate() {
        let x = WIDTH - RIGHT - 110.0;
        let y = TOP + 14.0 * s as f64;
        let _ = write!(
            frame.body,
            r#"<rect x="{x}" y="{y}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            PALETTE[s % PALETTE.len()],
            x + 14.0,
            y + 9.0,
            escape(name)
        );
    }
    frame.finish()
}
