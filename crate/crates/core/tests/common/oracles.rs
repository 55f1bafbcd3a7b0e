//! Slow, direct reference implementations used to cross-check the library.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

use lrtdahl::priors::{diff_forward, GradientStack};
use lrtdahl::{HsiCube, TvWeights};

/// `½(x − y)² + τ|x|^p`.
pub fn gst_objective(x: f64, y: f64, tau: f64, p: f64) -> f64 {
    0.5 * (x - y) * (x - y) + tau * x.abs().powf(p)
}

/// Minimizer of [`gst_objective`] by dense grid search on `[min(0,y), max(0,y)]`
/// followed by golden-section refinement around the best grid cell.
pub fn gst_grid_search(y: f64, tau: f64, p: f64) -> f64 {
    let (lo, hi) = if y >= 0.0 { (0.0, y) } else { (y, 0.0) };
    let n = 200_000;
    let step = (hi - lo) / n as f64;
    let f = |x: f64| gst_objective(x, y, tau, p);
    let mut best = (f(0.0), 0.0);
    for i in 0..=n {
        let x = lo + i as f64 * step;
        let v = f(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    if step == 0.0 {
        return best.1;
    }
    let (mut a, mut b) = ((best.1 - step).max(lo), (best.1 + step).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let refined = 0.5 * (a + b);
    if f(refined) < best.0 {
        refined
    } else {
        best.1
    }
}

/// Dense matrix of the weighted forward-difference operator, built column by
/// column from unit impulses. Rows are `[gx; gy; gz]` in layout order.
pub fn dense_diff(dims: [usize; 3], weights: TvWeights) -> DMatrix<f64> {
    let n = dims.iter().product::<usize>();
    let mut d = DMatrix::zeros(3 * n, n);
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let g = diff_forward(&HsiCube::new(dims, e).unwrap(), weights);
        for (b, block) in g.blocks().iter().enumerate() {
            for (r, &v) in block.as_slice().iter().enumerate() {
                d[(b * n + r, c)] = v;
            }
        }
    }
    d
}

/// Solves `(a·I + b·DᵀD) z = rhs` with a dense LU factorization.
pub fn dense_solve(rhs: &HsiCube, weights: TvWeights, a: f64, b: f64) -> HsiCube {
    let dims = rhs.dims();
    let n = rhs.len();
    let d = dense_diff(dims, weights);
    let m = DMatrix::identity(n, n) * a + (d.transpose() * &d) * b;
    let x = m.lu().solve(&DVector::from_column_slice(rhs.as_slice())).expect("nonsingular");
    HsiCube::new(dims, x.as_slice().to_vec()).unwrap()
}

/// `‖(a·I + b·DᵀD) z − rhs‖` evaluated densely.
pub fn dense_residual(z: &HsiCube, rhs: &HsiCube, weights: TvWeights, a: f64, b: f64) -> f64 {
    let n = z.len();
    let d = dense_diff(z.dims(), weights);
    let m = DMatrix::identity(n, n) * a + (d.transpose() * &d) * b;
    let zv = DVector::from_column_slice(z.as_slice());
    (m * zv - DVector::from_column_slice(rhs.as_slice())).norm()
}

/// Full linear convolution followed by the centered crop and renormalization.
pub fn naive_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut full = vec![0.0; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            full[i + j] += a[i] * b[j];
        }
    }
    let half = n / 2;
    let crop: Vec<f64> = full[half..half + n].to_vec();
    let total: f64 = crop.iter().sum();
    crop.iter().map(|v| v / total).collect()
}

pub fn naive_psnr(reference: &[f64], test: &[f64]) -> f64 {
    let mut mse = 0.0;
    for i in 0..reference.len() {
        mse += (reference[i] - test[i]).powi(2);
    }
    mse /= reference.len() as f64;
    if mse == 0.0 {
        100.0
    } else {
        (10.0 * (1.0 / mse).log10()).min(100.0)
    }
}

/// SSIM with an explicit 2-D Gaussian window evaluated at every valid position.
pub fn naive_ssim(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    let size = 11;
    let sigma: f64 = 1.5;
    let mut win = vec![vec![0.0; size]; size];
    let mut total = 0.0;
    for a in 0..size {
        for b in 0..size {
            let da = a as f64 - 5.0;
            let db = b as f64 - 5.0;
            win[a][b] = (-(da * da + db * db) / (2.0 * sigma * sigma)).exp();
            total += win[a][b];
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    let mut count = 0;
    for j0 in 0..=w - size {
        for i0 in 0..=h - size {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for b in 0..size {
                for a in 0..size {
                    let g = win[a][b] / total;
                    let idx = (i0 + a) + h * (j0 + b);
                    mx += g * x[idx];
                    my += g * y[idx];
                    xx += g * x[idx] * x[idx];
                    yy += g * y[idx] * y[idx];
                    xy += g * x[idx] * y[idx];
                }
            }
            let vx = xx - mx * mx;
            let vy = yy - my * my;
            let cov = xy - mx * my;
            acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}

/// Spectral angle through `acos` of the clamped cosine.
pub fn naive_sam(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// One-sided Jacobi SVD: the `r` leading left singular vectors of `m`
/// (columns, descending singular values).
pub fn jacobi_left_singular(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let mut a = m.clone();
    let cols = a.ncols();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt().max(f64::MIN_POSITIVE));
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let cp = a.column(p).clone_owned();
                let cq = a.column(q).clone_owned();
                a.set_column(p, &(&cp * c - &cq * s));
                a.set_column(q, &(&cp * s + &cq * c));
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = (0..cols).map(|c| (a.column(c).norm(), c)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut u = DMatrix::zeros(m.nrows(), r);
    for (k, &(norm, c)) in order.iter().take(r).enumerate() {
        u.set_column(k, &(a.column(c) / norm));
    }
    u
}

/// Truncated-HOSVD reconstruction error computed with the Jacobi oracle.
pub fn hosvd_oracle_error(t: &HsiCube, ranks: [usize; 3]) -> f64 {
    use lrtdahl::tensor::{mode_product, unfold};
    let mut factors = Vec::new();
    for n in 0..3 {
        factors.push(jacobi_left_singular(&unfold(t, n + 1).unwrap(), ranks[n]));
    }
    let mut approx = t.clone();
    for n in 0..3 {
        let proj = &factors[n] * factors[n].transpose();
        approx = mode_product(&approx, &proj, n + 1).unwrap();
    }
    (&approx - t).fro_norm()
}

/// Samples of `exp(−k|g|^p)` by inverse transform (`k|g|^p ~ Gamma(1/p, 1)`)
/// plus differenced Gaussian noise of std `√2·sigma`.
pub fn hyper_laplacian_samples(k: f64, p: f64, sigma: f64, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let gamma = Gamma::new(1.0 / p, 1.0).unwrap();
    let normal = Normal::new(0.0, std::f64::consts::SQRT_2 * sigma).unwrap();
    (0..n)
        .map(|_| {
            let mag = (gamma.sample(rng) / k).powf(1.0 / p);
            let signed = if rng.random_bool(0.5) { mag } else { -mag };
            signed + normal.sample(rng)
        })
        .collect()
}

/// Inner product of two gradient stacks through plain loops.
pub fn stack_dot(a: &GradientStack, b: &GradientStack) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.blocks().iter().zip(b.blocks().iter()) {
        for (u, v) in x.as_slice().iter().zip(y.as_slice()) {
            s += u * v;
        }
    }
    s
}
