//! Minimal self-contained SVG line plots and histograms.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

fn tx(v: f64, s: Scale) -> Option<f64> {
    match s {
        Scale::Linear => Some(v),
        Scale::Log if v > 0.0 => Some(v.log10()),
        Scale::Log => None,
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        let w = lo.abs().max(1.0) * 0.5;
        return (lo - w, hi + w);
    }
    (lo, hi)
}

fn header(s: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, esc(xlabel)).unwrap();
    writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(ylabel)
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    )
    .unwrap();
}

fn esc(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn ticks(s: &mut String, (x0, x1): (f64, f64), (y0, y1): (f64, f64), xs: Scale, ys: Scale) {
    let lab = |v: f64, sc: Scale| match sc {
        Scale::Linear => format!("{v:.3e}"),
        Scale::Log => format!("1e{v:.1}"),
    };
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let px = PAD + f * (W - 2.0 * PAD);
        let py = H - PAD - f * (H - 2.0 * PAD);
        writeln!(s, r#"<text x="{px:.1}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, H - PAD + 14.0, lab(x0 + f * (x1 - x0), xs)).unwrap();
        writeln!(s, r#"<text x="{}" y="{py:.1}" text-anchor="end" font-size="10">{}</text>"#, PAD - 4.0, lab(y0 + f * (y1 - y0), ys)).unwrap();
    }
}

/// Line plot of several series. Points that cannot be shown on a log axis
/// are dropped.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], xs: Scale, ys: Scale) -> String {
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|se| {
            se.points
                .iter()
                .filter_map(|&(x, y)| Some((tx(x, xs)?, tx(y, ys)?)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    let xr = range(pts.iter().flatten().map(|p| p.0));
    let yr = range(pts.iter().flatten().map(|p| p.1));
    let map = |(x, y): (f64, f64)| {
        (
            PAD + (x - xr.0) / (xr.1 - xr.0) * (W - 2.0 * PAD),
            H - PAD - (y - yr.0) / (yr.1 - yr.0) * (H - 2.0 * PAD),
        )
    };
    let mut s = String::new();
    header(&mut s, title, xlabel, ylabel);
    ticks(&mut s, xr, yr, xs, ys);
    for (k, (se, p)) in series.iter().zip(&pts).enumerate() {
        let c = COLORS[k % COLORS.len()];
        let path: Vec<String> = p
            .iter()
            .map(|&q| {
                let (a, b) = map(q);
                format!("{a:.2},{b:.2}")
            })
            .collect();
        if !path.is_empty() {
            writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
        }
        let ly = PAD + 14.0 + 14.0 * k as f64;
        writeln!(s, r#"<text x="{}" y="{ly}" fill="{c}">{}</text>"#, W - PAD - 150.0, esc(&se.label)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Histogram of `values` in `bins` equal bins.
pub fn histogram(title: &str, xlabel: &str, values: &[f64], bins: usize) -> String {
    let vals: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let xr = range(vals.iter().copied());
    let bins = bins.max(1);
    let mut counts = vec![0usize; bins];
    for v in &vals {
        let b = (((v - xr.0) / (xr.1 - xr.0)) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut s = String::new();
    header(&mut s, title, xlabel, "count");
    ticks(&mut s, xr, (0.0, top), Scale::Linear, Scale::Linear);
    let bw = (W - 2.0 * PAD) / bins as f64;
    for (k, &c) in counts.iter().enumerate() {
        let h = c as f64 / top * (H - 2.0 * PAD);
        writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="#1f77b4" stroke="white"/>"##,
            PAD + k as f64 * bw,
            H - PAD - h,
            bw
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_wellformed() {
        let se = [Series { label: "a<b".into(), points: vec![(1.0, 0.0), (2.0, 3.0)] }];
        let p = line_plot("t", "x", "y", &se, Scale::Log, Scale::Log);
        assert!(p.starts_with("<svg") && p.ends_with("</svg>\n"));
        assert!(p.contains("a&lt;b"));
        let h = histogram("h", "r", &[0.1, 0.2, 0.2, 0.9], 4);
        assert_eq!(h.matches("<rect x=").count(), 5);
    }
}
