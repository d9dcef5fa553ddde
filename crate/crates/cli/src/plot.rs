//! Minimal static SVG plotting: three stacked time panels plus one phase
//! panel, dashed reference line, colored realizations, and an arrow at the
//! initial condition. No dependencies; output bytes are deterministic.

#[derive(Clone)]
pub struct Line {
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub dashed: bool,
}

#[derive(Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Line>,
    /// Draws an arrow pointing at this data-space location.
    pub marker: Option<(f64, f64)>,
}

const PALETTE: [&str; 7] = [
    "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
pub const REFERENCE_COLOR: &str = "#1f77b4";

pub fn realization_color(k: usize) -> String {
    PALETTE[k % PALETTE.len()].to_string()
}

struct Rect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// Renders the canonical layout: `left` panels stacked on the left, the
/// phase panel filling the right half.
pub fn figure_svg(left: &[Panel; 3], phase: &Panel) -> String {
    let width = 1180.0;
    let height = 780.0;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    for (i, panel) in left.iter().enumerate() {
        let area = Rect {
            x: 70.0,
            y: 40.0 + 250.0 * i as f64,
            w: 440.0,
            h: 200.0,
        };
        draw_panel(&mut svg, panel, &area);
    }
    let area = Rect {
        x: 620.0,
        y: 60.0,
        w: 500.0,
        h: 640.0,
    };
    draw_panel(&mut svg, phase, &area);

    svg.push_str("</svg>\n");
    svg
}

fn data_bounds(panel: &Panel) -> ((f64, f64), (f64, f64)) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for line in &panel.lines {
        for &(x, y) in &line.points {
            xs = (xs.0.min(x), xs.1.max(x));
            ys = (ys.0.min(y), ys.1.max(y));
        }
    }
    if let Some((x, y)) = panel.marker {
        xs = (xs.0.min(x), xs.1.max(x));
        ys = (ys.0.min(y), ys.1.max(y));
    }
    if !xs.0.is_finite() || xs.0 == xs.1 {
        xs = (xs.0.min(0.0), xs.0.max(0.0) + 1.0);
    }
    if !ys.0.is_finite() || ys.0 == ys.1 {
        ys = (ys.0 - 0.5, ys.0 + 0.5);
    }
    let pad = |lo: f64, hi: f64| {
        let span = hi - lo;
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    (pad(xs.0, xs.1), pad(ys.0, ys.1))
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

fn draw_panel(svg: &mut String, panel: &Panel, area: &Rect) {
    let ((x0, x1), (y0, y1)) = data_bounds(panel);
    let map_x = |x: f64| area.x + (x - x0) / (x1 - x0) * area.w;
    let map_y = |y: f64| area.y + area.h - (y - y0) / (y1 - y0) * area.h;

    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        area.x, area.y, area.w, area.h
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        area.x + area.w / 2.0,
        area.y - 8.0,
        panel.title
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        area.x + area.w / 2.0,
        area.y + area.h + 32.0,
        panel.x_label
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 {} {})\">{}</text>\n",
        area.x - 48.0,
        area.y + area.h / 2.0,
        area.x - 48.0,
        area.y + area.h / 2.0,
        panel.y_label
    ));

    // Ticks.
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let px = map_x(fx);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"#333\" stroke-width=\"1\"/>\n",
            area.y + area.h,
            area.y + area.h + 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            area.y + area.h + 16.0,
            fmt_tick(fx)
        ));
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let py = map_y(fy);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{}\" y2=\"{py}\" stroke=\"#333\" stroke-width=\"1\"/>\n",
            area.x - 4.0,
            area.x
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            area.x - 7.0,
            py + 4.0,
            fmt_tick(fy)
        ));
    }

    for line in &panel.lines {
        if line.points.is_empty() {
            continue;
        }
        let stride = (line.points.len() / 1500).max(1);
        let mut d = String::new();
        for (i, &(x, y)) in line.points.iter().step_by(stride).enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            d.push_str(&format!("{cmd}{:.2},{:.2} ", map_x(x), map_y(y)));
        }
        // Always include the final point.
        if let Some(&(x, y)) = line.points.last() {
            d.push_str(&format!("L{:.2},{:.2}", map_x(x), map_y(y)));
        }
        let dash = if line.dashed {
            " stroke-dasharray=\"6,4\""
        } else {
            ""
        };
        svg.push_str(&format!(
            "<path d=\"{d}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.4\"{dash}/>\n",
            line.color
        ));
    }

    if let Some((mx, my)) = panel.marker {
        let px = map_x(mx);
        let py = map_y(my);
        let (tx, ty) = (px + 38.0, py - 38.0);
        svg.push_str(&format!(
            "<line x1=\"{tx}\" y1=\"{ty}\" x2=\"{}\" y2=\"{}\" stroke=\"#000\" stroke-width=\"1.2\"/>\n",
            px + 5.0,
            py - 5.0
        ));
        svg.push_str(&format!(
            "<polygon points=\"{px},{py} {},{} {},{}\" fill=\"#000\"/>\n",
            px + 9.0,
            py - 3.0,
            px + 3.0,
            py - 9.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">(S0, I0)</text>\n",
            tx + 3.0,
            ty - 3.0
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_panel() -> Panel {
        Panel {
            title: "demo".into(),
            x_label: "t".into(),
            y_label: "y".into(),
            lines: vec![Line {
                points: (0..100).map(|i| (i as f64, (i as f64).sin())).collect(),
                color: REFERENCE_COLOR.into(),
                dashed: true,
            }],
            marker: Some((0.0, 0.0)),
        }
    }

    #[test]
    fn svg_output_is_wellformed_and_deterministic() {
        let panels = [sample_panel(), sample_panel(), sample_panel()];
        let a = figure_svg(&panels, &sample_panel());
        let b = figure_svg(&panels, &sample_panel());
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert!(a.contains("stroke-dasharray"));
        assert!(a.contains("polygon"));
    }

    #[test]
    fn degenerate_data_does_not_produce_nan_coordinates() {
        let flat = Panel {
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            lines: vec![Line {
                points: vec![(1.0, 2.0), (1.0, 2.0)],
                color: "red".into(),
                dashed: false,
            }],
            marker: None,
        };
        let svg = figure_svg(&[sample_panel(), flat, sample_panel()], &sample_panel());
        assert!(!svg.contains("NaN"));
    }
}
