//! Fixed-rank Tucker approximation by higher-order orthogonal iteration.

use crate::error::{Error, Result};
use crate::tensor::{leading_left_basis, mode_product, unfold, HsiCube, Matrix};

/// Target multilinear rank `(r1, r2, r3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TuckerRanks {
    pub r1: usize,
    pub r2: usize,
    pub r3: usize,
}

impl TuckerRanks {
    pub fn new(r1: usize, r2: usize, r3: usize) -> Result<Self> {
        if r1 == 0 || r2 == 0 || r3 == 0 {
            return Err(Error::arg(format!("Tucker ranks must be >= 1, got ({r1}, {r2}, {r3})")));
        }
        Ok(Self { r1, r2, r3 })
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.r1, self.r2, self.r3]
    }

    /// Checks `r_n <= dim_n` for every mode.
    pub fn validate_for(&self, dims: [usize; 3]) -> Result<()> {
        for (n, (&r, &d)) in self.as_array().iter().zip(dims.iter()).enumerate() {
            if r == 0 || r > d {
                return Err(Error::arg(format!(
                    "mode-{} rank {} out of range 1..={} for dims {:?}",
                    n + 1,
                    r,
                    d,
                    dims
                )));
            }
        }
        Ok(())
    }
}

/// Core tensor plus one column-orthonormal factor per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerFactors {
    pub core: HsiCube,
    pub factors: [Matrix; 3],
}

impl TuckerFactors {
    pub fn ranks(&self) -> [usize; 3] {
        self.core.dims()
    }

    pub fn full_dims(&self) -> [usize; 3] {
        [self.factors[0].nrows(), self.factors[1].nrows(), self.factors[2].nrows()]
    }
}

/// `core ×₁ F1 ×₂ F2 ×₃ F3`.
pub fn reconstruct(f: &TuckerFactors) -> Result<HsiCube> {
    let core_dims = f.core.dims();
    for n in 0..3 {
        if f.factors[n].ncols() != core_dims[n] {
            return Err(Error::shape(format!(
                "factor {} has {} columns but core mode-{} size is {}",
                n + 1,
                f.factors[n].ncols(),
                n + 1,
                core_dims[n]
            )));
        }
    }
    let t = mode_product(&f.core, &f.factors[0], 1)?;
    let t = mode_product(&t, &f.factors[1], 2)?;
    mode_product(&t, &f.factors[2], 3)
}

/// `t ×₁ F1ᵀ ×₂ F2ᵀ ×₃ F3ᵀ`, skipping mode `skip` when given.
fn project(t: &HsiCube, factors: &[Matrix; 3], skip: Option<usize>) -> Result<HsiCube> {
    let mut out = t.clone();
    for n in 0..3 {
        if Some(n) != skip {
            out = mode_product(&out, &factors[n].transpose(), n + 1)?;
        }
    }
    Ok(out)
}

/// Truncated higher-order SVD: factor `n` spans the top-`r_n` left singular
/// subspace of the mode-`n` unfolding of `t`.
pub fn hosvd_init(t: &HsiCube, ranks: TuckerRanks) -> Result<TuckerFactors> {
    ranks.validate_for(t.dims())?;
    let r = ranks.as_array();
    let factors = [
        leading_left_basis(&unfold(t, 1)?, r[0]),
        leading_left_basis(&unfold(t, 2)?, r[1]),
        leading_left_basis(&unfold(t, 3)?, r[2]),
    ];
    let core = project(t, &factors, None)?;
    Ok(TuckerFactors { core, factors })
}

/// Result of [`hooi_traced`]: the fit plus the reconstruction error after
/// initialization (entry 0) and after each accepted sweep.
#[derive(Debug, Clone)]
pub struct HooiTrace {
    pub factors: TuckerFactors,
    pub errors: Vec<f64>,
}

/// Higher-order orthogonal iteration from a truncated-HOSVD start.
///
/// Stops once the relative change of the reconstruction error drops below
/// `tol` or after `max_iter` sweeps.
pub fn hooi(t: &HsiCube, ranks: TuckerRanks, max_iter: usize, tol: f64) -> Result<TuckerFactors> {
    Ok(hooi_traced(t, ranks, max_iter, tol)?.factors)
}

pub fn hooi_traced(t: &HsiCube, ranks: TuckerRanks, max_iter: usize, tol: f64) -> Result<HooiTrace> {
    if max_iter == 0 {
        return Err(Error::arg("HOOI max_iter must be >= 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::arg(format!("HOOI tol must be positive, got {tol}")));
    }
    let mut fit = hosvd_init(t, ranks)?;
    let norm_sq = t.fro_norm_sq();
    // With orthonormal factors, ‖t − recon‖² = ‖t‖² − ‖core‖².
    let residual = |core: &HsiCube| (norm_sq - core.fro_norm_sq()).max(0.0).sqrt();
    let mut err = residual(&fit.core);
    let mut errors = vec![err];
    let r = ranks.as_array();
    for _ in 0..max_iter {
        if err == 0.0 {
            break;
        }
        let mut factors = fit.factors.clone();
        for n in 0..3 {
            let partial = project(t, &factors, Some(n))?;
            factors[n] = leading_left_basis(&unfold(&partial, n + 1)?, r[n]);
        }
        let core = project(t, &factors, None)?;
        let next = residual(&core);
        if next > err {
            // rounding-level increase: keep the previous (better) fit
            break;
        }
        let change = (err - next) / err;
        fit = TuckerFactors { core, factors };
        err = next;
        errors.push(err);
        if change < tol {
            break;
        }
    }
    Ok(HooiTrace { factors: fit, errors })
}

/// HOOI fit followed by reconstruction; the projection used by the solver.
pub fn low_rank_approx(t: &HsiCube, ranks: TuckerRanks, max_iter: usize, tol: f64) -> Result<HsiCube> {
    reconstruct(&hooi(t, ranks, max_iter, tol)?)
}
