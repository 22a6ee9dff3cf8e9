//! Minimal static SVG plots: line charts for spectra and eigenvalue curves,
//! grouped boxplots with bound bars for error distributions. Output is plain
//! SVG text with fixed-precision coordinates, so identical inputs produce
//! identical bytes.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f6fb2", "#d1495b", "#3a7d44", "#8d5a97", "#c77d2e", "#4a4a4a"];

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
    }
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(1e-300);
        MARGIN_L + (v - self.x_min) / span * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(1e-300);
        HEIGHT - MARGIN_B - (v - self.y_min) / span * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn axes(frame: &Frame, log_y: bool) -> String {
    let mut s = String::new();
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    s.push_str(&format!(
        "<rect x=\"{x0}\" y=\"{y1}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        x1 - x0,
        y0 - y1
    ));
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let yv = frame.y_min + f * (frame.y_max - frame.y_min);
        let y = frame.y(yv);
        let label = if log_y { fmt_tick(10f64.powf(yv)) } else { fmt_tick(yv) };
        s.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{}\" x2=\"{x1}\" y2=\"{}\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n",
            fmt(y),
            fmt(y)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{label}</text>\n",
            x0 - 6.0,
            fmt(y + 3.0)
        ));
        let xv = frame.x_min + f * (frame.x_max - frame.x_min);
        let x = frame.x(xv);
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
            fmt(x),
            y0 + 16.0,
            fmt_tick(xv)
        ));
    }
    s
}

/// Line chart of one or more series indexed by position. `log_y` plots
/// `log10` of the values (nonpositive values are clipped to the smallest
/// positive one).
pub fn line_chart(title: &str, series: &[(&str, &[f64])], log_y: bool) -> String {
    let mut out = svg_open(title);
    let max_len = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let mut transformed: Vec<(String, Vec<f64>)> = Vec::new();
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let floor = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .filter(|&&v| v > 0.0)
        .fold(f64::INFINITY, |a, &b| a.min(b));
    for (name, vals) in series {
        let vs: Vec<f64> = vals
            .iter()
            .map(|&v| if log_y { v.max(floor.min(1e-300)).log10() } else { v })
            .collect();
        for &v in &vs {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
        transformed.push((name.to_string(), vs));
    }
    if !y_min.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    if y_max - y_min < 1e-12 {
        y_max = y_min + 1.0;
    }
    let frame = Frame { x_min: 0.0, x_max: (max_len.max(2) - 1) as f64, y_min, y_max };
    out.push_str(&axes(&frame, log_y));
    for (i, (name, vals)) in transformed.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = vals
            .iter()
            .enumerate()
            .map(|(k, &v)| format!("{},{}", fmt(frame.x(k as f64)), fmt(frame.y(v))))
            .collect();
        out.push_str(&format!(
            "<polyline class=\"series\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{name}</text>\n",
            WIDTH - MARGIN_R - 150.0,
            MARGIN_T + 14.0 * (i as f64 + 1.0)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn quantiles(sorted: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = sorted.len();
    let q = |p: f64| -> f64 {
        let idx = ((n as f64 - 1.0) * p).round() as usize;
        sorted[idx.min(n - 1)]
    };
    (sorted[0], q(0.25), q(0.5), q(0.75), sorted[n - 1])
}

/// Grouped boxplots (min, quartiles, max whiskers) with optional horizontal
/// bound bars per group.
pub fn boxplot(title: &str, groups: &[(&str, &[f64], Option<f64>)]) -> String {
    let mut out = svg_open(title);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, vals, bound) in groups {
        for &v in vals.iter() {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
        if let Some(b) = bound {
            y_min = y_min.min(*b);
            y_max = y_max.max(*b);
        }
    }
    if !y_min.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    let pad = (y_max - y_min).max(1e-12) * 0.08;
    let frame = Frame {
        x_min: 0.0,
        x_max: groups.len() as f64,
        y_min: (y_min - pad).min(0.0),
        y_max: y_max + pad,
    };
    out.push_str(&axes(&frame, false));
    let slot = (WIDTH - MARGIN_L - MARGIN_R) / groups.len().max(1) as f64;
    for (i, (name, vals, bound)) in groups.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let cx = MARGIN_L + slot * (i as f64 + 0.5);
        let half = slot * 0.18;
        out.push_str(&format!("<g class=\"box\" data-name=\"{name}\">\n"));
        if !vals.is_empty() {
            let mut sorted = vals.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (lo, q1, med, q3, hi) = quantiles(&sorted);
            let (ylo, yq1, ymed, yq3, yhi) =
                (frame.y(lo), frame.y(q1), frame.y(med), frame.y(q3), frame.y(hi));
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\"/>\n",
                fmt(cx), fmt(ylo), fmt(cx), fmt(yq1)
            ));
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\"/>\n",
                fmt(cx), fmt(yq3), fmt(cx), fmt(yhi)
            ));
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\" fill-opacity=\"0.25\" stroke=\"{color}\"/>\n",
                fmt(cx - half), fmt(yq3), fmt(2.0 * half), fmt((yq1 - yq3).max(0.5))
            ));
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                fmt(cx - half), fmt(ymed), fmt(cx + half), fmt(ymed)
            ));
        }
        if let Some(b) = bound {
            let yb = frame.y(*b);
            out.push_str(&format!(
                "<line class=\"bound\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"red\" stroke-width=\"2\"/>\n",
                fmt(cx - half * 1.6), fmt(yb), fmt(cx + half * 1.6), fmt(yb)
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{name}</text>\n",
            fmt(cx),
            HEIGHT - MARGIN_B + 32.0
        ));
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_deterministic() {
        let data = [1.0, 0.5, 0.25, 0.125];
        let a = line_chart("t", &[("s", &data)], true);
        let b = line_chart("t", &[("s", &data)], true);
        assert_eq!(a, b);
        assert!(a.contains("polyline"));
    }

    #[test]
    fn boxplot_counts_groups() {
        let g1 = [1.0, 2.0, 3.0];
        let g2 = [0.5, 0.7];
        let g3 = [2.0];
        let svg = boxplot(
            "e",
            &[
                ("a", &g1[..], Some(2.5)),
                ("b", &g2[..], Some(1.0)),
                ("c", &g3[..], None),
            ],
        );
        assert_eq!(svg.matches("<g class=\"box\"").count(), 3);
        assert_eq!(svg.matches("class=\"bound\"").count(), 2);
    }
}
