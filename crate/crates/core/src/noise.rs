//! Seeded simulation of the six mixed-noise cases: Gaussian noise, column
//! stripes, dead lines and salt-and-pepper impulses.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::HsiCube;

/// Closed interval `[lo, hi]` from which a per-band value is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn validate_unit(&self, name: &str) -> Result<()> {
        if !(self.lo >= 0.0 && self.lo <= self.hi && self.hi <= 1.0) {
            return Err(Error::arg(format!(
                "{name} range must satisfy 0 <= lo <= hi <= 1, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

/// Column-stripe layouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StripeKind {
    None,
    /// A per-band fraction (drawn from the range) of random columns.
    Random(Range),
    /// Every `⌈1/coverage⌉`-th column.
    Periodic(f64),
    /// Half the coverage periodic, half random.
    Mixed(f64),
    /// Two contiguous blocks of 5–15 columns per band.
    WideVertical,
}

impl StripeKind {
    pub fn name(&self) -> &'static str {
        match self {
            StripeKind::None => "none",
            StripeKind::Random(_) => "random",
            StripeKind::Periodic(_) => "periodic",
            StripeKind::Mixed(_) => "mixed",
            StripeKind::WideVertical => "wide_vertical",
        }
    }

    /// Coverage as a range (zero for `None`, unused for `WideVertical`).
    pub fn coverage(&self) -> Range {
        match *self {
            StripeKind::None | StripeKind::WideVertical => Range::fixed(0.0),
            StripeKind::Random(r) => r,
            StripeKind::Periodic(c) | StripeKind::Mixed(c) => Range::fixed(c),
        }
    }

    /// Parses a kind name with its coverage.
    pub fn from_parts(name: &str, coverage: Range) -> Result<Self> {
        Ok(match name {
            "none" => StripeKind::None,
            "random" => StripeKind::Random(coverage),
            "periodic" => StripeKind::Periodic(coverage.hi),
            "mixed" => StripeKind::Mixed(coverage.hi),
            "wide_vertical" => StripeKind::WideVertical,
            other => return Err(Error::arg(format!("unknown stripe kind '{other}'"))),
        })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            StripeKind::Random(r) => r.validate_unit("stripe coverage"),
            StripeKind::Periodic(c) | StripeKind::Mixed(c) => {
                if !(c > 0.0 && c <= 1.0) {
                    return Err(Error::arg(format!("stripe coverage must lie in (0, 1], got {c}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Dead-line placement: which bands get dead columns and how many/how wide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadlineSpec {
    /// Fraction of bands receiving dead lines (at least one band when > 0).
    pub band_fraction: f64,
    pub count: (usize, usize),
    pub width: (usize, usize),
}

impl DeadlineSpec {
    pub const NONE: DeadlineSpec = DeadlineSpec { band_fraction: 0.0, count: (0, 0), width: (1, 1) };

    fn validate(&self) -> Result<()> {
        if !(self.band_fraction >= 0.0 && self.band_fraction <= 1.0) {
            return Err(Error::arg(format!(
                "deadline band fraction must lie in [0, 1], got {}",
                self.band_fraction
            )));
        }
        if self.count.0 > self.count.1 || self.width.0 == 0 || self.width.0 > self.width.1 {
            return Err(Error::arg(format!(
                "invalid deadline count {:?} or width {:?}",
                self.count, self.width
            )));
        }
        Ok(())
    }
}

impl Default for DeadlineSpec {
    fn default() -> Self {
        Self { band_fraction: 0.2, count: (1, 3), width: (1, 3) }
    }
}

/// Full description of one simulated degradation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub case_id: u8,
    /// Per-band Gaussian noise std range. The noise tables label this column σ²,
    /// but the reported noisy-image PSNRs match a standard deviation.
    pub gaussian_sigma: Range,
    /// Per-band salt-and-pepper fraction range.
    pub impulse_ratio: Range,
    pub stripe: StripeKind,
    /// Stripe biases are drawn from `[−amplitude, amplitude]`.
    pub stripe_amplitude: f64,
    pub deadlines: DeadlineSpec,
    pub seed: u64,
}

pub const DEFAULT_STRIPE_AMPLITUDE: f64 = 0.25;

impl NoiseSpec {
    /// The preset for simulated case 1–6.
    pub fn case(case_id: u8, seed: u64) -> Result<Self> {
        let ranged = Range::new(0.0, 0.2);
        let (gaussian_sigma, impulse_ratio, stripe) = match case_id {
            1 => (ranged, ranged, StripeKind::None),
            2 => (Range::fixed(0.1), Range::fixed(0.2), StripeKind::Random(Range::new(0.4, 0.5))),
            3 => (ranged, ranged, StripeKind::Random(Range::new(0.6, 0.7))),
            4 => (ranged, ranged, StripeKind::Periodic(0.4)),
            5 => (ranged, ranged, StripeKind::Mixed(0.4)),
            6 => (ranged, ranged, StripeKind::WideVertical),
            other => return Err(Error::arg(format!("noise case must be 1..=6, got {other}"))),
        };
        Ok(Self {
            case_id,
            gaussian_sigma,
            impulse_ratio,
            stripe,
            stripe_amplitude: DEFAULT_STRIPE_AMPLITUDE,
            deadlines: DeadlineSpec::default(),
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.case_id) {
            return Err(Error::arg(format!("noise case must be 1..=6, got {}", self.case_id)));
        }
        self.gaussian_sigma.validate_unit("gaussian sigma")?;
        self.impulse_ratio.validate_unit("impulse ratio")?;
        self.stripe.validate()?;
        if !(self.stripe_amplitude >= 0.0 && self.stripe_amplitude.is_finite()) {
            return Err(Error::arg(format!(
                "stripe amplitude must be finite and >= 0, got {}",
                self.stripe_amplitude
            )));
        }
        self.deadlines.validate()
    }
}

/// Everything added to the truth, for ground-truth evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseComponents {
    pub gaussian: HsiCube,
    /// 1 where a voxel was overwritten by an impulse, else 0.
    pub impulse_mask: HsiCube,
    pub stripe_field: HsiCube,
    /// 1 where a voxel belongs to a dead line, else 0.
    pub deadline_mask: HsiCube,
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian noise with per-band std `sigma_per_band`. Returns `(noisy, noise)`.
pub fn add_gaussian(t: &HsiCube, sigma_per_band: &[f64], rng: &mut impl Rng) -> Result<(HsiCube, HsiCube)> {
    let [h, w, p] = t.dims();
    if sigma_per_band.len() != p {
        return Err(Error::shape(format!("need {p} band sigmas, got {}", sigma_per_band.len())));
    }
    if sigma_per_band.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::arg("Gaussian sigma must be finite and >= 0"));
    }
    let mut noise = HsiCube::zeros(t.dims())?;
    for (k, &sigma) in sigma_per_band.iter().enumerate() {
        if sigma == 0.0 {
            continue;
        }
        for v in noise.band_mut(k).iter_mut().take(h * w) {
            let z: f64 = rng.sample(StandardNormal);
            *v = sigma * z;
        }
    }
    Ok((t + &noise, noise))
}

/// Salt-and-pepper noise: each voxel of band `k` is, with probability
/// `ratio_per_band[k]`, set to 0 or 1 with equal odds. Returns `(noisy, mask)`.
pub fn add_impulse(t: &HsiCube, ratio_per_band: &[f64], rng: &mut impl Rng) -> Result<(HsiCube, HsiCube)> {
    let p = t.dims()[2];
    if ratio_per_band.len() != p {
        return Err(Error::shape(format!("need {p} band ratios, got {}", ratio_per_band.len())));
    }
    if ratio_per_band.iter().any(|r| !(*r >= 0.0 && *r <= 1.0)) {
        return Err(Error::arg("impulse ratio must lie in [0, 1]"));
    }
    let mut out = t.clone();
    let mut mask = HsiCube::zeros(t.dims())?;
    for (k, &ratio) in ratio_per_band.iter().enumerate() {
        if ratio == 0.0 {
            continue;
        }
        let band = out.band_mut(k);
        let mut hits = Vec::new();
        for (idx, v) in band.iter_mut().enumerate() {
            if rng.random_bool(ratio) {
                *v = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
                hits.push(idx);
            }
        }
        let mband = mask.band_mut(k);
        for idx in hits {
            mband[idx] = 1.0;
        }
    }
    Ok((out, mask))
}

/// Zeroes `width` columns starting at `col` in band `band`.
pub fn apply_deadline(t: &mut HsiCube, mask: &mut HsiCube, band: usize, col: usize, width: usize) {
    let [h, w, _] = t.dims();
    for j in col..(col + width).min(w) {
        for i in 0..h {
            t.set(i, j, band, 0.0);
            mask.set(i, j, band, 1.0);
        }
    }
}

/// Dead lines in a seeded subset of bands. Returns `(noisy, mask)`.
pub fn add_deadlines(t: &HsiCube, spec: &DeadlineSpec, rng: &mut impl Rng) -> Result<(HsiCube, HsiCube)> {
    spec.validate()?;
    let [_, w, p] = t.dims();
    let mut out = t.clone();
    let mut mask = HsiCube::zeros(t.dims())?;
    if spec.band_fraction == 0.0 || spec.count.1 == 0 {
        return Ok((out, mask));
    }
    let n_bands = ((spec.band_fraction * p as f64).round() as usize).clamp(1, p);
    let mut bands = sample(rng, p, n_bands).into_vec();
    bands.sort_unstable();
    for band in bands {
        let count = rng.random_range(spec.count.0..=spec.count.1);
        for _ in 0..count {
            let width = rng.random_range(spec.width.0..=spec.width.1).min(w);
            let col = rng.random_range(0..=w - width);
            apply_deadline(&mut out, &mut mask, band, col, width);
        }
    }
    Ok((out, mask))
}

fn random_cols(rng: &mut impl Rng, w: usize, coverage: f64) -> Vec<usize> {
    let n = ((coverage * w as f64).round() as usize).min(w);
    let mut cols = sample(rng, w, n).into_vec();
    cols.sort_unstable();
    cols
}

fn nonzero_bias(rng: &mut impl Rng, amplitude: f64) -> f64 {
    let mag = rng.random_range(0.5 * amplitude..=amplitude);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// Additive column stripes, constant down each column. Returns `(noisy, stripe_field)`.
pub fn add_stripes(t: &HsiCube, kind: StripeKind, amplitude: f64, rng: &mut impl Rng) -> Result<(HsiCube, HsiCube)> {
    kind.validate()?;
    let [h, w, p] = t.dims();
    let mut field = HsiCube::zeros(t.dims())?;
    let set_col = |field: &mut HsiCube, j: usize, k: usize, bias: f64| {
        for i in 0..h {
            field.set(i, j, k, bias);
        }
    };
    for k in 0..p {
        match kind {
            StripeKind::None => {}
            StripeKind::Random(cov) => {
                let coverage = cov.draw(rng);
                for j in random_cols(rng, w, coverage) {
                    let bias = rng.random_range(-amplitude..=amplitude);
                    set_col(&mut field, j, k, bias);
                }
            }
            StripeKind::Periodic(coverage) => {
                let period = (1.0 / coverage).ceil() as usize;
                let bias = nonzero_bias(rng, amplitude);
                for j in (0..w).step_by(period.max(1)) {
                    set_col(&mut field, j, k, bias);
                }
            }
            StripeKind::Mixed(coverage) => {
                let period = (2.0 / coverage).ceil() as usize;
                let bias = nonzero_bias(rng, amplitude);
                for j in (0..w).step_by(period.max(1)) {
                    set_col(&mut field, j, k, bias);
                }
                for j in random_cols(rng, w, 0.5 * coverage) {
                    let extra = rng.random_range(-amplitude..=amplitude);
                    let current = field.get(0, j, k);
                    set_col(&mut field, j, k, current + extra);
                }
            }
            StripeKind::WideVertical => {
                for _ in 0..2 {
                    let width = rng.random_range(5..=15usize).min(w);
                    let start = rng.random_range(0..=w - width);
                    let bias = nonzero_bias(rng, amplitude);
                    for j in start..start + width {
                        set_col(&mut field, j, k, bias);
                    }
                }
            }
        }
    }
    Ok((t + &field, field))
}

/// Applies Gaussian → stripes → dead lines → impulse noise, all driven by `spec.seed`.
pub fn simulate_case(truth: &HsiCube, spec: &NoiseSpec) -> Result<(HsiCube, NoiseComponents)> {
    spec.validate()?;
    let p = truth.dims()[2];
    let mut rng = rng_from_seed(spec.seed);

    let sigmas: Vec<f64> = (0..p).map(|_| spec.gaussian_sigma.draw(&mut rng)).collect();
    let ratios: Vec<f64> = (0..p).map(|_| spec.impulse_ratio.draw(&mut rng)).collect();

    let (noisy, gaussian) = add_gaussian(truth, &sigmas, &mut rng)?;
    let (noisy, stripe_field) = add_stripes(&noisy, spec.stripe, spec.stripe_amplitude, &mut rng)?;
    let (noisy, deadline_mask) = add_deadlines(&noisy, &spec.deadlines, &mut rng)?;
    let (noisy, impulse_mask) = add_impulse(&noisy, &ratios, &mut rng)?;
    Ok((noisy, NoiseComponents { gaussian, impulse_mask, stripe_field, deadline_mask }))
}
