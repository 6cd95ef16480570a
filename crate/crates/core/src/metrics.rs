//! PSNR, SSIM and NRMSE, and the per-label aggregation used for result tables.

use std::fmt::Write as _;

use thiserror::Error;

use crate::codec::rgb_to_ycbcr;
use crate::media::RgbImage;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("image dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("images must be at least {min}x{min} for SSIM, got {width}x{height}")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("reference image is all zero")]
    ZeroReference,
    #[error("no rows to aggregate")]
    Empty,
    #[error("malformed report: {0}")]
    Parse(String),
}

/// Which samples the metrics are computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricChannels {
    /// All three RGB channels.
    #[default]
    Rgb,
    /// Only the BT.601 luma plane.
    Luma,
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const PEAK: f64 = 255.0;

fn check_dims(a: &RgbImage, b: &RgbImage) -> Result<(), MetricsError> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(MetricsError::DimensionMismatch((a.width(), a.height()), (b.width(), b.height())));
    }
    Ok(())
}

fn planes(img: &RgbImage, mode: MetricChannels) -> Vec<Vec<f64>> {
    match mode {
        MetricChannels::Rgb => (0..3).map(|c| img.data().iter().skip(c).step_by(3).map(|&v| v as f64).collect()).collect(),
        MetricChannels::Luma => vec![rgb_to_ycbcr(img).y.iter().map(|&v| v as f64).collect()],
    }
}

/// Peak signal-to-noise ratio in dB over all RGB samples; `+inf` when the
/// images are identical.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64, MetricsError> {
    psnr_with(a, b, MetricChannels::Rgb)
}

pub fn psnr_with(a: &RgbImage, b: &RgbImage, mode: MetricChannels) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let (pa, pb) = (planes(a, mode), planes(b, mode));
    let mut sum = 0.0;
    let mut n = 0usize;
    for (x, y) in pa.iter().zip(&pb) {
        sum += x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
        n += x.len();
    }
    let mse = sum / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

/// `||a - b|| / ||b||` with `b` as the reference.
pub fn nrmse(a: &RgbImage, reference: &RgbImage) -> Result<f64, MetricsError> {
    nrmse_with(a, reference, MetricChannels::Rgb)
}

pub fn nrmse_with(a: &RgbImage, reference: &RgbImage, mode: MetricChannels) -> Result<f64, MetricsError> {
    check_dims(a, reference)?;
    let (pa, pb) = (planes(a, mode), planes(reference, mode));
    let (mut err, mut norm) = (0.0, 0.0);
    for (x, y) in pa.iter().zip(&pb) {
        for (p, q) in x.iter().zip(y) {
            err += (p - q) * (p - q);
            norm += q * q;
        }
    }
    if norm == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    Ok((err / norm).sqrt())
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable "valid" Gaussian filtering of a `w`×`h` plane.
fn filter_valid(src: &[f64], w: usize, h: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = win.iter().zip(&line[x..x + SSIM_WINDOW]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|k| win[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let win = gaussian_window();
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let prod = |f: &dyn Fn(f64, f64) -> f64| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect::<Vec<_>>();
    let mu_a = filter_valid(a, w, h, &win);
    let mu_b = filter_valid(b, w, h, &win);
    let aa = filter_valid(&prod(&|x, _| x * x), w, h, &win);
    let bb = filter_valid(&prod(&|_, y| y * y), w, h, &win);
    let ab = filter_valid(&prod(&|x, y| x * y), w, h, &win);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total / mu_a.len() as f64
}

/// Mean SSIM (11×11 Gaussian window, σ = 1.5, K1 = 0.01, K2 = 0.03,
/// L = 255), averaged over the RGB channels.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64, MetricsError> {
    ssim_with(a, b, MetricChannels::Rgb)
}

pub fn ssim_with(a: &RgbImage, b: &RgbImage, mode: MetricChannels) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall { width: w, height: h, min: SSIM_WINDOW });
    }
    let (pa, pb) = (planes(a, mode), planes(b, mode));
    let n = pa.len() as f64;
    Ok(pa.iter().zip(&pb).map(|(x, y)| ssim_plane(x, y, w, h)).sum::<f64>() / n)
}

/// Scores of one image against its reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub ssim: f64,
    pub psnr: f64,
    pub nrmse: f64,
}

/// Computes all three metrics; `reference` is the second argument.
pub fn score(image: &RgbImage, reference: &RgbImage, mode: MetricChannels) -> Result<MetricRow, MetricsError> {
    Ok(MetricRow {
        ssim: ssim_with(image, reference, mode)?,
        psnr: psnr_with(image, reference, mode)?,
        nrmse: nrmse_with(image, reference, mode)?,
    })
}

/// Averaged metrics for one labelled result row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub label: String,
    pub ssim: f64,
    pub psnr: f64,
    pub nrmse: f64,
    /// Number of rows aggregated.
    pub count: usize,
    /// Rows whose PSNR was infinite and were left out of the PSNR mean.
    pub infinite_psnr: usize,
    /// Plain-codec reference rows, shaded in the rendered table.
    pub baseline: bool,
}

/// Averages metric rows. Infinite PSNR values are excluded from the PSNR
/// mean (it stays `+inf` if every row is infinite).
pub fn aggregate(rows: &[MetricRow], label: &str) -> Result<MetricReport, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = rows.len() as f64;
    let finite: Vec<f64> = rows.iter().map(|r| r.psnr).filter(|p| p.is_finite()).collect();
    let psnr = if finite.is_empty() { f64::INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    Ok(MetricReport {
        label: label.to_string(),
        ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        psnr,
        nrmse: rows.iter().map(|r| r.nrmse).sum::<f64>() / n,
        count: rows.len(),
        infinite_psnr: rows.len() - finite.len(),
        baseline: false,
    })
}

/// Orders rows by SSIM, best first; baseline rows fall wherever their score
/// puts them among the models.
pub fn sort_by_ssim(reports: &mut [MetricReport]) {
    reports.sort_by(|a, b| b.ssim.total_cmp(&a.ssim));
}

fn fmt_psnr(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p:.6}")
    }
}

/// Aligned text table in the `# | Model | SSIM | PSNR | NRMSE` layout;
/// baseline rows carry no rank.
pub fn render_table(reports: &[MetricReport]) -> String {
    let label_w = reports.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:>3}  {:<label_w$}  {:>9}  {:>10}  {:>9}  {:>5}", "#", "Model", "SSIM", "PSNR", "NRMSE", "n");
    let mut rank = 0;
    for r in reports {
        let idx = if r.baseline {
            "-".to_string()
        } else {
            rank += 1;
            rank.to_string()
        };
        let _ = writeln!(
            out,
            "{:>3}  {:<label_w$}  {:>9.6}  {:>10}  {:>9.6}  {:>5}",
            idx,
            r.label,
            r.ssim,
            fmt_psnr(r.psnr),
            r.nrmse,
            r.count
        );
    }
    out
}

const CSV_HEADER: &str = "label,ssim,psnr,nrmse,n,baseline";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn to_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{:.6},{},{:.6},{},{}",
            csv_field(&r.label),
            r.ssim,
            fmt_psnr(r.psnr),
            r.nrmse,
            r.count,
            u8::from(r.baseline)
        );
    }
    out
}

fn split_csv_line(line: &str) -> Result<Vec<String>, MetricsError> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', false) if cur.is_empty() => quoted = true,
            ('"', true) => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    cur.push('"');
                } else {
                    quoted = false;
                }
            }
            (',', false) => fields.push(std::mem::take(&mut cur)),
            (c, _) => cur.push(c),
        }
    }
    if quoted {
        return Err(MetricsError::Parse("unterminated quote".into()));
    }
    fields.push(cur);
    Ok(fields)
}

/// Parses the output of [`to_csv`]. Values round-trip at the printed
/// precision (six decimals).
pub fn parse_csv(text: &str) -> Result<Vec<MetricReport>, MetricsError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(MetricsError::Parse("missing header".into()));
    }
    let num = |s: &str| -> Result<f64, MetricsError> {
        s.parse::<f64>().map_err(|_| MetricsError::Parse(format!("bad number {s:?}")))
    };
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let f = split_csv_line(line)?;
        if f.len() != 6 {
            return Err(MetricsError::Parse(format!("expected 6 fields, got {}", f.len())));
        }
        out.push(MetricReport {
            label: f[0].clone(),
            ssim: num(&f[1])?,
            psnr: num(&f[2])?,
            nrmse: num(&f[3])?,
            count: f[4].parse().map_err(|_| MetricsError::Parse("bad count".into()))?,
            infinite_psnr: 0,
            baseline: f[5] == "1",
        });
    }
    Ok(out)
}
