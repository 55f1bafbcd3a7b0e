//! Full-reference quality metrics: band-wise PSNR and SSIM, pixel-wise
//! spectral angle, and their means.

use crate::error::{Error, Result};
use crate::tensor::HsiCube;

/// Value reported for a zero-error band.
pub const PSNR_CAP_DB: f64 = 100.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_RANGE: f64 = 1.0;

/// `10·log10(peak² / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(reference: &[f64], test: &[f64], peak: f64) -> Result<f64> {
    if reference.len() != test.len() || reference.is_empty() {
        return Err(Error::shape(format!(
            "PSNR needs equal nonempty inputs, got {} and {}",
            reference.len(),
            test.len()
        )));
    }
    if !(peak > 0.0) {
        return Err(Error::arg(format!("PSNR peak must be positive, got {peak}")));
    }
    let mse = reference.iter().zip(test).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / reference.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable Gaussian filtering over every fully-contained 11×11 window of a
/// band stored mode-1 fastest (`h` rows, `w` columns). Output is
/// `(h − 10) × (w − 10)`, rows fastest.
fn filter_valid(band: &[f64], h: usize, w: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let oh = h - SSIM_WINDOW + 1;
    let ow = w - SSIM_WINDOW + 1;
    // filter down each column first
    let mut tmp = vec![0.0; oh * w];
    for j in 0..w {
        let col = &band[j * h..(j + 1) * h];
        for i in 0..oh {
            tmp[i + oh * j] = kernel.iter().zip(&col[i..i + SSIM_WINDOW]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for j in 0..ow {
        for i in 0..oh {
            out[i + oh * j] = (0..SSIM_WINDOW).map(|d| kernel[d] * tmp[i + oh * (j + d)]).sum();
        }
    }
    out
}

/// Mean SSIM of one `h × w` band (mode-1 fastest layout), Gaussian window
/// 11×11 with σ = 1.5, `K1 = 0.01`, `K2 = 0.03`, dynamic range 1.
pub fn ssim(reference: &[f64], test: &[f64], h: usize, w: usize) -> Result<f64> {
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::arg(format!("SSIM needs bands of at least 11x11, got {h}x{w}")));
    }
    if reference.len() != h * w || test.len() != h * w {
        return Err(Error::shape(format!(
            "SSIM band length must be {}, got {} and {}",
            h * w,
            reference.len(),
            test.len()
        )));
    }
    let kernel = gaussian_window();
    let sq = |v: &[f64]| v.iter().map(|a| a * a).collect::<Vec<_>>();
    let cross: Vec<f64> = reference.iter().zip(test).map(|(a, b)| a * b).collect();
    let mu_x = filter_valid(reference, h, w, &kernel);
    let mu_y = filter_valid(test, h, w, &kernel);
    let xx = filter_valid(&sq(reference), h, w, &kernel);
    let yy = filter_valid(&sq(test), h, w, &kernel);
    let xy = filter_valid(&cross, h, w, &kernel);
    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|q| {
            let (mx, my) = (mu_x[q], mu_y[q]);
            let vx = xx[q] - mx * mx;
            let vy = yy[q] - my * my;
            let cov = xy[q] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Spectral angle `arccos(⟨a, b⟩ / (‖a‖‖b‖))` in radians. Two zero spectra have angle 0; a zero spectrum
/// against a nonzero one has angle π/2.
pub fn sam(reference: &[f64], test: &[f64]) -> Result<f64> {
    if reference.len() != test.len() || reference.is_empty() {
        return Err(Error::shape(format!(
            "SAM needs equal nonempty spectra, got {} and {}",
            reference.len(),
            test.len()
        )));
    }
    let na = reference.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb = test.iter().map(|b| b * b).sum::<f64>().sqrt();
    if na == 0.0 && nb == 0.0 {
        return Ok(0.0);
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    // 2·atan2(‖â − b̂‖, ‖â + b̂‖) stays accurate near 0 and π, unlike acos.
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in reference.iter().zip(test) {
        let (ua, ub) = (a / na, b / nb);
        diff += (ua - ub) * (ua - ub);
        sum += (ua + ub) * (ua + ub);
    }
    Ok(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub psnr_per_band: Vec<f64>,
    pub ssim_per_band: Vec<f64>,
    /// Spectral angle per pixel (radians), mode-1 fastest.
    pub sam_per_pixel: Vec<f64>,
    pub mpsnr: f64,
    pub mssim: f64,
    pub msam: f64,
}

impl MetricsReport {
    /// Per-band CSV rows followed by a summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("band,psnr,ssim\n");
        for (k, (p, s)) in self.psnr_per_band.iter().zip(&self.ssim_per_band).enumerate() {
            out.push_str(&format!("{},{:.6},{:.6}\n", k + 1, p, s));
        }
        out.push_str(&format!(
            "mean,{:.6},{:.6}\nmsam,{:.6},\n",
            self.mpsnr, self.mssim, self.msam
        ));
        out
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// All metrics of `test` against `reference` (peak 1).
pub fn evaluate(reference: &HsiCube, test: &HsiCube) -> Result<MetricsReport> {
    reference.check_same(test)?;
    let [h, w, p] = reference.dims();
    let mut psnr_per_band = Vec::with_capacity(p);
    let mut ssim_per_band = Vec::with_capacity(p);
    for k in 0..p {
        psnr_per_band.push(psnr(reference.band(k), test.band(k), 1.0)?);
        ssim_per_band.push(ssim(reference.band(k), test.band(k), h, w)?);
    }
    let plane = h * w;
    let mut a = vec![0.0; p];
    let mut b = vec![0.0; p];
    let mut sam_per_pixel = Vec::with_capacity(plane);
    for q in 0..plane {
        for k in 0..p {
            a[k] = reference.as_slice()[q + plane * k];
            b[k] = test.as_slice()[q + plane * k];
        }
        sam_per_pixel.push(sam(&a, &b)?);
    }
    Ok(MetricsReport {
        mpsnr: mean(&psnr_per_band),
        mssim: mean(&ssim_per_band),
        msam: mean(&sam_per_pixel),
        psnr_per_band,
        ssim_per_band,
        sam_per_pixel,
    })
}
