//! Minimal SVG emitters: line charts, heatmaps, confusion matrices.

use std::fmt::Write as _;

const MARGIN: f64 = 52.0;

fn color_ramp(t: f64) -> String {
    // Dark blue -> yellow.
    let t = t.clamp(0.0, 1.0);
    let r = (40.0 + 215.0 * t) as u8;
    let g = (40.0 + 190.0 * t) as u8;
    let b = (90.0 + (40.0 - 90.0) * t) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn svg_header(width: f64, height: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n\
         <text x=\"{x}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{title}</text>\n",
        x = width / 2.0,
    )
}

/// One labelled series of (x, y) points.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Line chart with markers; axes auto-scale to the data.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
) -> String {
    let (width, height) = (560.0, 380.0);
    let (pw, ph) = (width - 2.0 * MARGIN, height - 2.0 * MARGIN);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x0, mut x1) = all.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = all.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x0 == x1 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y0 == y1 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pad = (y1 - y0) * 0.06;
    y0 -= pad;
    y1 += pad;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| height - MARGIN - (y - y0) / (y1 - y0) * ph;

    let mut svg = svg_header(width, height, title);
    // Axes and ticks.
    let _ = write!(
        svg,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = height - MARGIN,
        r = width - MARGIN,
        t = MARGIN,
    );
    for k in 0..=4 {
        let xv = x0 + (x1 - x0) * k as f64 / 4.0;
        let yv = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = write!(
            svg,
            "<text x=\"{x}\" y=\"{yb}\" text-anchor=\"middle\">{xv:.1}</text>\n\
             <text x=\"{xl}\" y=\"{y}\" text-anchor=\"end\">{yv:.1}</text>\n",
            x = sx(xv),
            yb = height - MARGIN + 16.0,
            xl = MARGIN - 6.0,
            y = sy(yv) + 4.0,
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{cx}\" y=\"{by}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"14\" y=\"{cy}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {cy})\">{y_label}</text>\n",
        cx = width / 2.0,
        by = height - 10.0,
        cy = height / 2.0,
    );

    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    for (si, s) in series.iter().enumerate() {
        let color = palette[si % palette.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| format!("{}{:.2},{:.2}", if i == 0 { "M" } else { "L" }, sx(x), sy(y)))
            .collect();
        let _ = write!(svg, "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n", path.join(" "));
        for &(x, y) in &s.points {
            let _ = write!(svg, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n", sx(x), sy(y));
        }
        let _ = write!(
            svg,
            "<rect x=\"{lx}\" y=\"{ly}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\">{label}</text>\n",
            lx = width - MARGIN - 150.0,
            ly = MARGIN + 8.0 + si as f64 * 16.0,
            tx = width - MARGIN - 136.0,
            ty = MARGIN + 17.0 + si as f64 * 16.0,
            label = s.label,
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heatmap of a row-major matrix with row/column labels; each cell prints
/// its value.
pub fn heatmap(
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[f64],
    value_range: (f64, f64),
) -> String {
    let rows = row_labels.len();
    let cols = col_labels.len();
    assert_eq!(values.len(), rows * cols);
    let cell = 34.0;
    let width = MARGIN + cols as f64 * cell + 30.0;
    let height = MARGIN + rows as f64 * cell + 40.0;
    let mut svg = svg_header(width, height, title);
    let (lo, hi) = value_range;
    let span = (hi - lo).max(1e-12);

    for (j, label) in col_labels.iter().enumerate() {
        let _ = write!(
            svg,
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\">{label}</text>\n",
            x = MARGIN + (j as f64 + 0.5) * cell,
            y = MARGIN - 8.0,
        );
    }
    for (i, label) in row_labels.iter().enumerate() {
        let _ = write!(
            svg,
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"end\">{label}</text>\n",
            x = MARGIN - 6.0,
            y = MARGIN + (i as f64 + 0.65) * cell,
        );
    }
    for i in 0..rows {
        for j in 0..cols {
            let v = values[i * cols + j];
            let t = (v - lo) / span;
            let _ = write!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"{fill}\" stroke=\"white\"/>\n\
                 <text x=\"{tx:.1}\" y=\"{ty:.1}\" text-anchor=\"middle\" font-size=\"9\" fill=\"{tc}\">{v:.1}</text>\n",
                x = MARGIN + j as f64 * cell,
                y = MARGIN + i as f64 * cell,
                fill = color_ramp(t),
                tx = MARGIN + (j as f64 + 0.5) * cell,
                ty = MARGIN + (i as f64 + 0.62) * cell,
                tc = if t > 0.55 { "black" } else { "white" },
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Confusion-matrix rendering (counts).
pub fn confusion_svg(title: &str, cm: &crate::metrics::ConfusionMatrix) -> String {
    let labels: Vec<String> = (0..cm.n_classes).map(|c| c.to_string()).collect();
    let values: Vec<f64> = cm.counts.iter().map(|&c| c as f64).collect();
    let max = values.iter().copied().fold(0.0, f64::max).max(1.0);
    heatmap(title, &labels, &labels, &values, (0.0, max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_wellformed_svg() {
        let svg = line_chart(
            "accuracy vs length",
            "n_t",
            "accuracy [%]",
            &[Series { label: "type", points: vec![(1.0, 95.0), (5.0, 97.0), (34.0, 99.0)] }],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("accuracy vs length"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn heatmap_has_one_cell_per_entry() {
        let svg = heatmap(
            "m",
            &["a".into(), "b".into()],
            &["x".into(), "y".into(), "z".into()],
            &[0.0, 50.0, 100.0, 25.0, 75.0, 10.0],
            (0.0, 100.0),
        );
        assert_eq!(svg.matches("<rect").count(), 7); // 6 cells + background
    }
}
