//! Minimal static SVG plotting (lines, stems, heat maps).

use std::fmt::Write as _;

const W: f64 = 800.0;
const H: f64 = 500.0;
const ML: f64 = 70.0;
const MR: f64 = 25.0;
const MT: f64 = 45.0;
const MB: f64 = 55.0;

pub struct LineSeries<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub label: &'a str,
    pub color: &'a str,
    pub dashed: bool,
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.06 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        ML + (x - self.x_lo) / (self.x_hi - self.x_lo) * (W - ML - MR)
    }

    fn sy(&self, y: f64) -> f64 {
        H - MB - (y - self.y_lo) / (self.y_hi - self.y_lo) * (H - MT - MB)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{x}" y="26" font-family="sans-serif" font-size="17" text-anchor="middle">{title}</text>
"##,
        x = W / 2.0,
        title = escape(title),
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        r##"<rect x="{ml}" y="{mt}" width="{w}" height="{h}" fill="none" stroke="#333" stroke-width="1"/>
"##,
        ml = ML,
        mt = MT,
        w = W - ML - MR,
        h = H - MT - MB,
    );
    for i in 0..=5 {
        let fx = f.x_lo + (f.x_hi - f.x_lo) * i as f64 / 5.0;
        let fy = f.y_lo + (f.y_hi - f.y_lo) * i as f64 / 5.0;
        let sx = f.sx(fx);
        let sy = f.sy(fy);
        let _ = write!(
            out,
            concat!(
                r##"<line x1="{sx}" y1="{yb}" x2="{sx}" y2="{yb2}" stroke="#333"/>"##,
                r##"<text x="{sx}" y="{yt}" font-family="sans-serif" font-size="11" text-anchor="middle">{fx}</text>"##,
                r##"<line x1="{xl}" y1="{sy}" x2="{xl2}" y2="{sy}" stroke="#333"/>"##,
                r##"<text x="{xt}" y="{syt}" font-family="sans-serif" font-size="11" text-anchor="end">{fy}</text>"##,
                "\n"
            ),
            sx = sx,
            yb = H - MB,
            yb2 = H - MB + 5.0,
            yt = H - MB + 18.0,
            fx = trim_num(fx),
            xl = ML - 5.0,
            xl2 = ML,
            sy = sy,
            xt = ML - 8.0,
            syt = sy + 4.0,
            fy = trim_num(fy),
        );
    }
    let _ = write!(
        out,
        concat!(
            r##"<text x="{xc}" y="{yb}" font-family="sans-serif" font-size="13" text-anchor="middle">{xl}</text>"##,
            r##"<text x="18" y="{yc}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {yc})">{yl}</text>"##,
            "\n"
        ),
        xc = (ML + W - MR) / 2.0,
        yb = H - 12.0,
        xl = escape(x_label),
        yc = (MT + H - MB) / 2.0,
        yl = escape(y_label),
    );
}

fn trim_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Multi-series line plot.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[LineSeries<'_>]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (x_lo, x_hi) = finite_range(series.iter().flat_map(|s| s.xs.iter().cloned()));
    let (y_lo, y_hi) = finite_range(series.iter().flat_map(|s| s.ys.iter().cloned()));
    let f = Frame {
        x_lo,
        x_hi,
        y_lo,
        y_hi,
    };
    axes(&mut out, &f, x_label, y_label);
    for s in series {
        let mut path = String::new();
        for (i, (&x, &y)) in s.xs.iter().zip(s.ys).enumerate() {
            let _ = write!(
                path,
                "{}{:.2},{:.2} ",
                if i == 0 { "M" } else { "L" },
                f.sx(x),
                f.sy(y)
            );
        }
        let dash = if s.dashed { r##" stroke-dasharray="7,4""## } else { "" };
        let _ = write!(
            out,
            "<path d=\"{path}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"{dash}/>\n",
            s.color
        );
    }
    // Legend.
    for (i, s) in series.iter().enumerate() {
        let y = MT + 16.0 + 18.0 * i as f64;
        let _ = write!(
            out,
            concat!(
                r##"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="{c}" stroke-width="2"{dash}/>"##,
                r##"<text x="{xt}" y="{yt}" font-family="sans-serif" font-size="12">{label}</text>"##,
                "\n"
            ),
            x0 = ML + 12.0,
            x1 = ML + 40.0,
            y = y,
            c = s.color,
            dash = if s.dashed { r##" stroke-dasharray="7,4""## } else { "" },
            xt = ML + 46.0,
            yt = y + 4.0,
            label = escape(s.label),
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Stem plot (one vertical line per sample) with an optional threshold line.
pub fn stem_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    threshold: Option<f64>,
) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (x_lo, x_hi) = finite_range(xs.iter().cloned());
    let (_, y_hi) = finite_range(ys.iter().cloned().chain(std::iter::once(1e-6)));
    let f = Frame {
        x_lo,
        x_hi,
        y_lo: 0.0,
        y_hi: y_hi.max(1e-6),
    };
    axes(&mut out, &f, x_label, y_label);
    let base = f.sy(0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        if y <= 0.0 {
            continue;
        }
        let _ = write!(
            out,
            "<line x1=\"{sx:.2}\" y1=\"{base:.2}\" x2=\"{sx:.2}\" y2=\"{sy:.2}\" stroke=\"#c0392b\" stroke-width=\"1.4\"/>\n",
            sx = f.sx(x),
            sy = f.sy(y),
        );
    }
    if let Some(th) = threshold {
        let sy = f.sy(th);
        if sy.is_finite() {
            let _ = write!(
                out,
                "<line x1=\"{x0}\" y1=\"{sy:.2}\" x2=\"{x1}\" y2=\"{sy:.2}\" stroke=\"#2980b9\" stroke-width=\"1\" stroke-dasharray=\"4,4\"/>\n",
                x0 = ML,
                x1 = W - MR,
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Blue-white-red style map through a compact 7-stop gradient.
fn colormap(v: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, (u8, u8, u8)); 7] = [
        (0.0, (68, 1, 84)),
        (0.17, (70, 50, 127)),
        (0.33, (54, 92, 141)),
        (0.5, (39, 127, 142)),
        (0.67, (31, 161, 135)),
        (0.83, (74, 194, 109)),
        (1.0, (253, 231, 37)),
    ];
    let v = v.clamp(0.0, 1.0);
    for w in STOPS.windows(2) {
        let (a, ca) = w[0];
        let (b, cb) = w[1];
        if v <= b {
            let t = (v - a) / (b - a);
            let mix = |x: u8, y: u8| (x as f64 + t * (y as f64 - x as f64)).round() as u8;
            return (mix(ca.0, cb.0), mix(ca.1, cb.1), mix(ca.2, cb.2));
        }
    }
    STOPS[6].1
}

/// Heat map of a row-major `(nx, ny)` field over physical extents.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    values: &[f64],
    nx: usize,
    ny: usize,
    extent: (f64, f64, f64, f64),
) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (x_lo, x_hi, y_lo, y_hi) = extent;
    let f = Frame {
        x_lo,
        x_hi,
        y_lo,
        y_hi,
    };
    axes(&mut out, &f, x_label, y_label);
    let (v_lo, v_hi) = finite_range(values.iter().cloned());
    let cw = (W - ML - MR) / nx as f64;
    let ch = (H - MT - MB) / ny as f64;
    for i in 0..nx {
        for j in 0..ny {
            let v = values[i * ny + j];
            let (r, g, b) = colormap((v - v_lo) / (v_hi - v_lo).max(1e-300));
            let x = ML + i as f64 * cw;
            let y = H - MB - (j + 1) as f64 * ch;
            let _ = write!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"rgb({r},{g},{b})\"/>\n",
                w = cw + 0.5,
                h = ch + 0.5,
            );
        }
    }
    let _ = write!(
        out,
        "<text x=\"{x}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"11\">range [{lo}, {hi}]</text>\n",
        x = ML,
        y = MT - 6.0,
        lo = trim_num(v_lo),
        hi = trim_num(v_hi),
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_wellformed_svg() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.5, 1.5, 1.0];
        let line = line_plot(
            "t&est<",
            "x",
            "y",
            &[LineSeries {
                xs: &xs,
                ys: &ys,
                label: "a",
                color: "#c0392b",
                dashed: false,
            }],
        );
        assert!(line.starts_with("<svg"));
        assert!(line.ends_with("</svg>\n"));
        assert!(line.contains("&amp;"));

        let stem = stem_plot("p", "t", "p", &xs, &[0.0, 0.4, 0.9], Some(1e-6));
        assert!(stem.contains("stroke-dasharray"));
        assert!(stem.ends_with("</svg>\n"));

        let map = heatmap("m", "x", "z", &[0.0, 0.3, 0.6, 1.0], 2, 2, (0.0, 1.0, 0.0, 1.0));
        assert!(map.matches("<rect").count() >= 5);
        assert!(map.ends_with("</svg>\n"));
    }

    #[test]
    fn empty_stem_plot_is_valid() {
        let stem = stem_plot("empty", "t", "p", &[0.0, 1.0], &[0.0, 0.0], Some(1e-6));
        assert!(stem.starts_with("<svg") && stem.ends_with("</svg>\n"));
    }
}
