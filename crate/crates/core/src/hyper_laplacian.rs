//! Adaptive estimation of the hyper-Laplacian exponents of the three gradient
//! directions.
//!
//! Each direction's gradient histogram is modeled as a discretized
//! `exp(−k|x|^p)` density convolved with the histogram of differenced Gaussian
//! noise; `(k, p)` is found by Nelder–Mead on the squared histogram mismatch.

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::nelder_mead::{nelder_mead, Bounds, NelderMeadOptions};
use crate::priors::{diff_forward, TvWeights};
use crate::tensor::HsiCube;

/// Uniform, zero-centered bin grid with an odd bin count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistGrid {
    pub half_range: f64,
    pub bins: usize,
}

impl HistGrid {
    pub fn new(half_range: f64, bins: usize) -> Result<Self> {
        if !(half_range > 0.0 && half_range.is_finite()) {
            return Err(Error::arg(format!("histogram range must be positive, got {half_range}")));
        }
        if bins < 3 || bins.is_multiple_of(2) {
            return Err(Error::arg(format!("histogram bin count must be odd and >= 3, got {bins}")));
        }
        Ok(Self { half_range, bins })
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_range / self.bins as f64
    }

    /// Index of the bin centered on zero.
    pub fn center(&self) -> usize {
        self.bins / 2
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        (b as f64 - self.center() as f64) * self.width()
    }

    pub fn edges(&self) -> Vec<f64> {
        let w = self.width();
        (0..=self.bins).map(|e| -self.half_range + e as f64 * w).collect()
    }

    /// Bin of `v`; values beyond the range land in the outermost bins.
    fn locate(&self, v: f64) -> usize {
        let half = self.center();
        let steps = ((v.abs() / self.width()) + 0.5).floor();
        let steps = if steps >= half as f64 { half } else { steps as usize };
        if v < 0.0 {
            half - steps
        } else {
            half + steps
        }
    }
}

/// Normalized histogram on a [`HistGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub grid: HistGrid,
    pub masses: Vec<f64>,
}

impl Histogram {
    pub fn bin_edges(&self) -> Vec<f64> {
        self.grid.edges()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Average of the histogram and its mirror image.
    pub fn symmetrized(&self) -> Histogram {
        let n = self.masses.len();
        let masses = (0..n).map(|b| 0.5 * (self.masses[b] + self.masses[n - 1 - b])).collect();
        Histogram { grid: self.grid, masses }
    }

    fn from_weights(grid: HistGrid, mut masses: Vec<f64>) -> Result<Histogram> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::arg("histogram has no mass inside its grid"));
        }
        masses.iter_mut().for_each(|m| *m /= total);
        Ok(Histogram { grid, masses })
    }
}

/// Histogram of `values` on `bins` uniform bins over `[−half_range, half_range]`,
/// tails clamped into the end bins.
pub fn histogram(values: &[f64], half_range: f64, bins: usize) -> Result<Histogram> {
    let grid = HistGrid::new(half_range, bins)?;
    if values.is_empty() {
        return Err(Error::arg("cannot build a histogram from no samples"));
    }
    let mut counts = vec![0.0; bins];
    for &v in values {
        if !v.is_finite() {
            return Err(Error::arg("histogram input contains non-finite values"));
        }
        counts[grid.locate(v)] += 1.0;
    }
    let n = values.len() as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    Ok(Histogram { grid, masses: counts })
}

/// Discretized hyper-Laplacian density `∝ exp(−k|x|^p)`, evaluated at bin centers.
pub fn hyper_laplacian_histogram(k: f64, p: f64, grid: HistGrid) -> Result<Histogram> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::arg(format!("hyper-Laplacian scale must be positive, got {k}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::arg(format!("hyper-Laplacian exponent must lie in (0, 1], got {p}")));
    }
    let half = grid.center();
    // Build one side and mirror it, so the result is exactly symmetric.
    let side: Vec<f64> = (0..=half).map(|s| (-k * (s as f64 * grid.width()).powf(p)).exp()).collect();
    let masses = (0..grid.bins).map(|b| side[b.abs_diff(half)]).collect();
    Histogram::from_weights(grid, masses)
}

/// Histogram of a zero-mean Gaussian with standard deviation `std`, integrated
/// exactly per bin with tails folded into the end bins.
pub fn gaussian_histogram(std: f64, grid: HistGrid) -> Result<Histogram> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::arg(format!("Gaussian std must be finite and >= 0, got {std}")));
    }
    let mut masses = vec![0.0; grid.bins];
    if std == 0.0 {
        masses[grid.center()] = 1.0;
        return Ok(Histogram { grid, masses });
    }
    let cdf = |x: f64| 0.5 * (1.0 + erf(x / (std * std::f64::consts::SQRT_2)));
    let half = grid.center();
    let w = grid.width();
    let side: Vec<f64> = (0..=half)
        .map(|s| {
            let lo = (s as f64 - 0.5) * w;
            if s == half {
                1.0 - cdf(lo)
            } else if s == 0 {
                cdf(0.5 * w) - cdf(-0.5 * w)
            } else {
                cdf(lo + w) - cdf(lo)
            }
        })
        .collect();
    for (b, m) in masses.iter_mut().enumerate() {
        *m = side[b.abs_diff(half)];
    }
    Histogram::from_weights(grid, masses)
}

/// Linear convolution truncated to the shared grid and renormalized.
pub fn convolve_hist(a: &Histogram, b: &Histogram) -> Result<Histogram> {
    if a.grid != b.grid {
        return Err(Error::arg(format!(
            "histogram grids differ: {:?} vs {:?}",
            a.grid, b.grid
        )));
    }
    Histogram::from_weights(a.grid, convolve_same(&a.masses, &b.masses))
}

/// Centered "same"-size linear convolution of two odd-length sequences.
fn convolve_same(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() as isize;
    let half = n / 2;
    let mut out = vec![0.0; a.len()];
    for (j, &aj) in a.iter().enumerate() {
        if aj == 0.0 {
            continue;
        }
        // out[i] += a[j] * b[i − j + half]
        let j = j as isize;
        let lo = (j - half).max(0);
        let hi = (j - half + n).min(n);
        for i in lo..hi {
            out[i as usize] += aj * b[(i - j + half) as usize];
        }
    }
    out
}

/// Robust std of the original noise behind a gradient field of i.i.d. noise:
/// `MAD / 0.6745`, divided by `√2` to undo the differencing.
pub fn estimate_noise_sigma(gradients: &[f64]) -> Result<f64> {
    if gradients.is_empty() {
        return Err(Error::arg("cannot estimate noise from an empty gradient field"));
    }
    let mut v: Vec<f64> = gradients.to_vec();
    let med = median(&mut v);
    let mut dev: Vec<f64> = gradients.iter().map(|g| (g - med).abs()).collect();
    let mad = median(&mut dev);
    Ok(mad / 0.6745 / std::f64::consts::SQRT_2)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Search settings for [`fit_direction`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub grid: HistGrid,
    pub k_range: (f64, f64),
    pub p_range: (f64, f64),
    pub start: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grid: HistGrid { half_range: 1.0, bins: 255 },
            k_range: (0.5, 500.0),
            p_range: (0.1, 1.0),
            start: (10.0, 0.7),
        }
    }
}

/// Fitted parameters of one gradient direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionFit {
    /// Std of the underlying (undifferenced) Gaussian noise.
    pub sigma: f64,
    pub k: f64,
    pub p: f64,
    /// Squared histogram mismatch at `(k, p)`.
    pub residual: f64,
}

/// Exponents and scales for the height, width and band directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperLaplacianFit {
    pub directions: [DirectionFit; 3],
}

impl HyperLaplacianFit {
    pub fn p(&self) -> [f64; 3] {
        [self.directions[0].p, self.directions[1].p, self.directions[2].p]
    }

    pub fn sigma(&self) -> [f64; 3] {
        [self.directions[0].sigma, self.directions[1].sigma, self.directions[2].sigma]
    }
}

/// Squared mismatch between an observed gradient histogram and the model
/// `h_f(k, p) ⊗ h_noise`.
pub fn fit_objective(observed: &Histogram, noise: &Histogram, k: f64, p: f64) -> Result<f64> {
    let model = convolve_hist(&hyper_laplacian_histogram(k, p, observed.grid)?, noise)?;
    Ok(observed.masses.iter().zip(&model.masses).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Fits `(k, p)` to gradient samples whose noise comes from Gaussian noise of
/// std `sigma` (the differenced noise thus has variance `2σ²`).
pub fn fit_direction(gradients: &[f64], sigma: f64) -> Result<DirectionFit> {
    fit_direction_with(gradients, sigma, &FitOptions::default())
}

pub fn fit_direction_with(gradients: &[f64], sigma: f64, opts: &FitOptions) -> Result<DirectionFit> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::arg(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    if gradients.is_empty() {
        return Err(Error::arg("cannot fit an empty gradient field"));
    }
    let grid = opts.grid;
    let observed = histogram(gradients, grid.half_range, grid.bins)?.symmetrized();
    let noise = gaussian_histogram(std::f64::consts::SQRT_2 * sigma, grid)?;

    // Search over (ln k, p): the k box spans three decades.
    let bounds = Bounds::new(
        [opts.k_range.0.ln(), opts.p_range.0],
        [opts.k_range.1.ln(), opts.p_range.1],
    )?;
    let objective = |x: &[f64; 2]| {
        fit_objective(&observed, &noise, x[0].exp(), x[1]).unwrap_or(f64::INFINITY)
    };
    let nm = NelderMeadOptions { x_tol: 1e-6, ..NelderMeadOptions::default() };
    let mut best = nelder_mead(objective, [opts.start.0.ln(), opts.start.1], bounds, nm)?;
    // One restart from the optimum guards against a prematurely collapsed simplex.
    let again = nelder_mead(objective, best.point, bounds, nm)?;
    if again.value < best.value {
        best = again;
    }
    let k = best.point[0].exp().clamp(opts.k_range.0, opts.k_range.1);
    let p = best.point[1];
    Ok(DirectionFit { sigma, k, p, residual: fit_objective(&observed, &noise, k, p)? })
}

/// Estimates per-direction exponents from the unweighted circular gradients of `y`.
pub fn estimate_p(y: &HsiCube) -> Result<HyperLaplacianFit> {
    if y.dims().iter().any(|&d| d < 2) {
        return Err(Error::arg(format!(
            "exponent estimation needs every dimension >= 2, got {:?}",
            y.dims()
        )));
    }
    if !y.is_finite() {
        return Err(Error::arg("input cube contains non-finite values"));
    }
    let grads = diff_forward(y, TvWeights::unit());
    let mut fits = Vec::with_capacity(3);
    for block in grads.blocks() {
        let sigma = estimate_noise_sigma(block.as_slice())?;
        fits.push(fit_direction(block.as_slice(), sigma)?);
    }
    Ok(HyperLaplacianFit { directions: [fits[0], fits[1], fits[2]] })
}
