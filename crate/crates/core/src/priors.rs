//! Weighted circular difference operators and the shrinkage steps of the
//! spatial–spectral hyper-Laplacian prior.

use crate::error::{Error, Result};
use crate::tensor::HsiCube;

/// Per-direction weights `(w_h, w_w, w_p)` of the difference operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvWeights {
    pub w_h: f64,
    pub w_w: f64,
    pub w_p: f64,
}

impl TvWeights {
    pub fn new(w_h: f64, w_w: f64, w_p: f64) -> Result<Self> {
        let w = Self { w_h, w_w, w_p };
        w.validate()?;
        Ok(w)
    }

    /// Unvalidated constructor, for operators where all-zero weights are meaningful.
    pub const fn raw(w_h: f64, w_w: f64, w_p: f64) -> Self {
        Self { w_h, w_w, w_p }
    }

    pub fn unit() -> Self {
        Self::raw(1.0, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ws = self.as_array();
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::arg(format!("TV weights must be finite and >= 0, got {ws:?}")));
        }
        if ws.iter().all(|&w| w == 0.0) {
            return Err(Error::arg("at least one TV weight must be positive"));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.w_h, self.w_w, self.w_p]
    }
}

impl Default for TvWeights {
    fn default() -> Self {
        Self::raw(1.0, 1.0, 0.5)
    }
}

/// Differences along height, width and band, each the shape of the source cube.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientStack {
    pub gx: HsiCube,
    pub gy: HsiCube,
    pub gz: HsiCube,
}

impl GradientStack {
    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        Ok(Self { gx: HsiCube::zeros(dims)?, gy: HsiCube::zeros(dims)?, gz: HsiCube::zeros(dims)? })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.gx.dims()
    }

    pub fn blocks(&self) -> [&HsiCube; 3] {
        [&self.gx, &self.gy, &self.gz]
    }

    pub fn blocks_mut(&mut self) -> [&mut HsiCube; 3] {
        [&mut self.gx, &mut self.gy, &mut self.gz]
    }

    fn check(&self) -> Result<()> {
        self.gx.check_same(&self.gy)?;
        self.gx.check_same(&self.gz)
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Copy) -> Result<Self> {
        Ok(Self {
            gx: self.gx.zip_map(&other.gx, f)?,
            gy: self.gy.zip_map(&other.gy, f)?,
            gz: self.gz.zip_map(&other.gz, f)?,
        })
    }

    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        self.gx.axpy(s, &other.gx)?;
        self.gy.axpy(s, &other.gy)?;
        self.gz.axpy(s, &other.gz)
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        Ok(self.gx.dot(&other.gx)? + self.gy.dot(&other.gy)? + self.gz.dot(&other.gz)?)
    }

    pub fn fro_norm(&self) -> f64 {
        (self.gx.fro_norm_sq() + self.gy.fro_norm_sq() + self.gz.fro_norm_sq()).sqrt()
    }
}

/// Weighted circular forward differences:
/// `gx(i,j,k) = w_h·(t(i+1 mod h, j, k) − t(i,j,k))`, likewise along `j` and `k`.
pub fn diff_forward(t: &HsiCube, weights: TvWeights) -> GradientStack {
    let [h, w, p] = t.dims();
    let src = t.as_slice();
    let mut gx = vec![0.0; src.len()];
    let mut gy = vec![0.0; src.len()];
    let mut gz = vec![0.0; src.len()];
    let plane = h * w;
    for k in 0..p {
        let kn = if k + 1 == p { 0 } else { k + 1 };
        for j in 0..w {
            let jn = if j + 1 == w { 0 } else { j + 1 };
            for i in 0..h {
                let in_ = if i + 1 == h { 0 } else { i + 1 };
                let idx = i + h * j + plane * k;
                let v = src[idx];
                gx[idx] = weights.w_h * (src[in_ + h * j + plane * k] - v);
                gy[idx] = weights.w_w * (src[i + h * jn + plane * k] - v);
                gz[idx] = weights.w_p * (src[i + h * j + plane * kn] - v);
            }
        }
    }
    let dims = t.dims();
    GradientStack {
        gx: HsiCube::new(dims, gx).expect("dims already validated"),
        gy: HsiCube::new(dims, gy).expect("dims already validated"),
        gz: HsiCube::new(dims, gz).expect("dims already validated"),
    }
}

/// Adjoint of [`diff_forward`]: weighted circular backward differences, negated.
pub fn diff_adjoint(g: &GradientStack, weights: TvWeights) -> Result<HsiCube> {
    g.check()?;
    let dims = g.dims();
    let [h, w, p] = dims;
    let (gx, gy, gz) = (g.gx.as_slice(), g.gy.as_slice(), g.gz.as_slice());
    let plane = h * w;
    let mut out = vec![0.0; gx.len()];
    for k in 0..p {
        let kp = if k == 0 { p - 1 } else { k - 1 };
        for j in 0..w {
            let jp = if j == 0 { w - 1 } else { j - 1 };
            for i in 0..h {
                let ip = if i == 0 { h - 1 } else { i - 1 };
                let idx = i + h * j + plane * k;
                out[idx] = weights.w_h * (gx[ip + h * j + plane * k] - gx[idx])
                    + weights.w_w * (gy[i + h * jp + plane * k] - gy[idx])
                    + weights.w_p * (gz[i + h * j + plane * kp] - gz[idx]);
            }
        }
    }
    HsiCube::new(dims, out)
}

/// Soft-thresholding: the proximal map of `delta·|x|`.
#[inline]
pub fn soft_threshold(x: f64, delta: f64) -> f64 {
    if x > delta {
        x - delta
    } else if x < -delta {
        x + delta
    } else {
        0.0
    }
}

pub fn soft_threshold_cube(t: &HsiCube, delta: f64) -> HsiCube {
    t.map(|v| soft_threshold(v, delta))
}

const GST_ITERATIONS: usize = 10;

/// Threshold below which the generalized shrinkage returns zero.
pub fn gst_threshold(tau: f64, p: f64) -> f64 {
    if p == 1.0 {
        return tau;
    }
    let a = 2.0 * tau * (1.0 - p);
    a.powf(1.0 / (2.0 - p)) + tau * p * a.powf((p - 1.0) / (2.0 - p))
}

/// Generalized soft-thresholding: a global minimizer of `tau·|x|^p + ½(x − y)²`.
pub fn gst_shrink(y: f64, tau: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if !(tau >= 0.0) {
        return Err(Error::arg(format!("shrinkage threshold must be >= 0, got {tau}")));
    }
    Ok(gst_unchecked(y, tau, p, gst_threshold(tau, p)))
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::arg(format!("hyper-Laplacian exponent must lie in (0, 1], got {p}")));
    }
    Ok(())
}

#[inline]
fn gst_unchecked(y: f64, tau: f64, p: f64, threshold: f64) -> f64 {
    if p == 1.0 {
        return soft_threshold(y, tau);
    }
    let mag = y.abs();
    if mag <= threshold {
        return 0.0;
    }
    let mut x = mag;
    for _ in 0..GST_ITERATIONS {
        x = mag - tau * p * x.powf(p - 1.0);
        if !(x > 0.0 && x <= mag) {
            return 0.0;
        }
    }
    x.copysign(y)
}

/// Blockwise generalized shrinkage with a shared threshold and per-direction exponents.
pub fn ahsstv_prox(g: &GradientStack, tau: f64, p: [f64; 3]) -> Result<GradientStack> {
    if !(tau >= 0.0) {
        return Err(Error::arg(format!("shrinkage threshold must be >= 0, got {tau}")));
    }
    for &pi in &p {
        check_exponent(pi)?;
    }
    let shrink = |block: &HsiCube, pi: f64| {
        let thr = gst_threshold(tau, pi);
        block.map(|v| gst_unchecked(v, tau, pi, thr))
    };
    Ok(GradientStack { gx: shrink(&g.gx, p[0]), gy: shrink(&g.gy, p[1]), gz: shrink(&g.gz, p[2]) })
}
