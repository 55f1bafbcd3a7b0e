//! Box-constrained Nelder–Mead simplex search.

use crate::error::{Error, Result};

/// Axis-aligned search box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<const N: usize> {
    pub lo: [f64; N],
    pub hi: [f64; N],
}

impl<const N: usize> Bounds<N> {
    pub fn new(lo: [f64; N], hi: [f64; N]) -> Result<Self> {
        for d in 0..N {
            if !(lo[d].is_finite() && hi[d].is_finite() && lo[d] < hi[d]) {
                return Err(Error::arg(format!(
                    "degenerate bounds on coordinate {d}: [{}, {}]",
                    lo[d], hi[d]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: &[f64; N]) -> bool {
        (0..N).all(|d| x[d] >= self.lo[d] && x[d] <= self.hi[d])
    }

    pub fn project(&self, mut x: [f64; N]) -> [f64; N] {
        for d in 0..N {
            x[d] = x[d].clamp(self.lo[d], self.hi[d]);
        }
        x
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Stop once `f(worst) − f(best)` falls below this.
    pub f_tol: f64,
    /// Also require every vertex within this distance (per coordinate) of the best one.
    pub x_tol: f64,
    pub max_iter: usize,
    /// Initial simplex edge, as a fraction of each coordinate's box width.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { f_tol: 1e-8, x_tol: f64::INFINITY, max_iter: 500, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<const N: usize> {
    pub point: [f64; N],
    pub value: f64,
    pub iterations: usize,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `objective` over `bounds` starting from `start`.
///
/// Trial points are projected onto the box before evaluation, so every
/// evaluated point (and the returned minimum) lies inside it.
pub fn nelder_mead<const N: usize>(
    mut objective: impl FnMut(&[f64; N]) -> f64,
    start: [f64; N],
    bounds: Bounds<N>,
    opts: NelderMeadOptions,
) -> Result<Minimum<N>> {
    if !bounds.contains(&start) {
        return Err(Error::arg(format!("start {start:?} lies outside the search box")));
    }
    let mut eval = |x: &[f64; N]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((start, eval(&start)));
    for d in 0..N {
        let step = opts.initial_step * (bounds.hi[d] - bounds.lo[d]);
        let mut x = start;
        x[d] = if x[d] + step <= bounds.hi[d] { x[d] + step } else { x[d] - step };
        let x = bounds.project(x);
        simplex.push((x, eval(&x)));
    }

    let mut iterations = 0;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0];
        let worst = simplex[N];
        let spread = worst.1 - best.1;
        let size = simplex
            .iter()
            .flat_map(|(x, _)| (0..N).map(move |d| (x[d] - best.0[d]).abs()))
            .fold(0.0, f64::max);
        if (spread < opts.f_tol && size < opts.x_tol) || iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for d in 0..N {
                centroid[d] += x[d] / N as f64;
            }
        }
        let toward = |from: &[f64; N], coef: f64| {
            let mut y = [0.0; N];
            for d in 0..N {
                y[d] = centroid[d] + coef * (from[d] - centroid[d]);
            }
            bounds.project(y)
        };

        let xr = toward(&worst.0, -REFLECT);
        let fr = eval(&xr);
        if fr < best.1 {
            let xe = toward(&xr, EXPAND);
            let fe = eval(&xe);
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
            continue;
        }
        let contracted = if fr < worst.1 {
            let xc = toward(&xr, CONTRACT);
            let fc = eval(&xc);
            (fc <= fr).then_some((xc, fc))
        } else {
            let xc = toward(&worst.0, CONTRACT);
            let fc = eval(&xc);
            (fc < worst.1).then_some((xc, fc))
        };
        match contracted {
            Some(v) => simplex[N] = v,
            None => {
                for vertex in simplex.iter_mut().skip(1) {
                    let mut x = [0.0; N];
                    for d in 0..N {
                        x[d] = best.0[d] + SHRINK * (vertex.0[d] - best.0[d]);
                    }
                    let x = bounds.project(x);
                    *vertex = (x, eval(&x));
                }
            }
        }
    }
    let (point, value) = simplex[0];
    Ok(Minimum { point, value, iterations })
}
