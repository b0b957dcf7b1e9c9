use std::fmt::Write as _;
use std::path::Path;

use inr_shape::metrics::{FeatureDistribution, FeatureSteerability};

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 40.0;

fn frame(title: &str, body: &str, x_label: &str) -> String {
    format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{cx}" y="20" text-anchor="middle">{title}</text>
<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>
<text x="{cx}" y="{lx}" text-anchor="middle">{x_label}</text>
{body}</svg>
"##,
        cx = W / 2.0,
        b = H - PAD,
        r = W - PAD,
        lx = H - 10.0,
    )
}

fn tick(x: f64, y: f64, label: f64) -> String {
    format!("<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"middle\" font-size=\"10\">{label:.3}</text>\n")
}

/// Overlaid density histograms of training and generated values.
pub fn histogram_svg(d: &FeatureDistribution) -> String {
    let h = &d.histogram;
    let nb = h.first.len();
    let density = |counts: &[usize]| -> Vec<f64> {
        let total: usize = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
    };
    let (a, b) = (density(&h.first), density(&h.second));
    let top = a.iter().chain(&b).cloned().fold(0.0, f64::max).max(1e-12);
    let bw = (W - 2.0 * PAD) / nb.max(1) as f64;
    let mut body = String::new();
    for (series, colour) in [(&a, "#1f77b4"), (&b, "#d62728")] {
        for (i, v) in series.iter().enumerate() {
            let hgt = v / top * (H - 2.0 * PAD);
            let _ = writeln!(
                body,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{colour}\" fill-opacity=\"0.45\"/>",
                PAD + i as f64 * bw,
                H - PAD - hgt,
                bw,
                hgt
            );
        }
    }
    if let (Some(lo), Some(hi)) = (h.edges.first(), h.edges.last()) {
        body += &tick(PAD, H - PAD + 14.0, *lo);
        body += &tick(W - PAD, H - PAD + 14.0, *hi);
    }
    body += "<text x=\"360\" y=\"50\" fill=\"#1f77b4\">training</text>\n";
    body += "<text x=\"360\" y=\"66\" fill=\"#d62728\">generated</text>\n";
    frame(&format!("{} (KS {:.3})", d.feature, d.ks), &body, &d.feature)
}

/// Conditioned against measured values with the identity line.
pub fn scatter_svg(s: &FeatureSteerability) -> String {
    let all = s.conditioned.iter().chain(&s.measured);
    let lo = all.clone().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let px = |v: f64| PAD + (v - lo) / span * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (v - lo) / span * (H - 2.0 * PAD);
    let mut body = String::new();
    let _ = writeln!(
        body,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"grey\" stroke-dasharray=\"4\"/>",
        px(lo),
        py(lo),
        px(hi),
        py(hi)
    );
    for (c, m) in s.conditioned.iter().zip(&s.measured) {
        let _ = writeln!(body, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"#2ca02c\"/>", px(*c), py(*m));
    }
    if lo.is_finite() {
        body += &tick(PAD, H - PAD + 14.0, lo);
        body += &tick(W - PAD, H - PAD + 14.0, hi);
    }
    let pcc = s.pcc.map_or("undefined".to_string(), |p| format!("{p:.3}"));
    frame(
        &format!("{}: measured vs conditioned (PCC {pcc})", s.feature),
        &body,
        "conditioned",
    )
}

pub fn write(dir: &Path, name: &str, svg: &str) -> inr_shape::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, svg).map_err(|e| io_err(&path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> inr_shape::Error {
    inr_shape::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
