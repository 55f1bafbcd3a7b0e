//! ADMM solver for the double low-rank model with adaptive hyper-Laplacian
//! spatial–spectral regularization.
//!
//! The observation is split as `y = clean + sparse + stripes + noise`. Each
//! outer iteration updates, in order: the low-rank image `x` (HOOI), the
//! auxiliary image `z` (FFT solve), the gradient variable `f` (generalized
//! shrinkage), the low-rank stripes `b` (HOOI), the sparse noise `s`
//! (soft-thresholding), then the multipliers and the penalty `beta`.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::hyper_laplacian::{estimate_p, HyperLaplacianFit};
use crate::periodic::PeriodicSolver;
use crate::priors::{ahsstv_prox, diff_adjoint, diff_forward, soft_threshold, GradientStack, TvWeights};
use crate::tensor::HsiCube;
use crate::tucker::{hooi, low_rank_approx, reconstruct, TuckerRanks};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Weight of the hyper-Laplacian gradient prior.
    pub lambda1: f64,
    /// Weight of the sparse-noise ℓ1 term.
    pub lambda2: f64,
    pub beta0: f64,
    pub beta_max: f64,
    pub beta_growth: f64,
    pub weights: TvWeights,
    /// Image Tucker ranks; `None` picks `(0.8h, 0.8w, min(10, p))`.
    pub ranks_x: Option<TuckerRanks>,
    /// Stripe Tucker ranks; `None` picks `(1, 0.5w, 0.5p)`.
    pub ranks_b: Option<TuckerRanks>,
    /// Stop when `‖x_{k+1} − x_k‖² / ‖x_k‖²` drops to this value.
    pub epsilon: f64,
    pub k_max: usize,
    /// Fixed exponents `(p_h, p_w, p_p)`; skips estimation when set.
    pub p_override: Option<[f64; 3]>,
    pub hooi_max_iter: usize,
    pub hooi_tol: f64,
    /// When false the stripe component is pinned to zero.
    pub model_stripes: bool,
    /// Weight of the stripe low-rank penalty: the stripe core is
    /// soft-thresholded by `stripe_shrink / β` after each HOOI fit. Zero
    /// leaves the plain fixed-rank fit.
    pub stripe_shrink: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.002,
            lambda2: 0.02,
            beta0: 0.01,
            beta_max: 1e6,
            beta_growth: 1.05,
            weights: TvWeights::default(),
            ranks_x: None,
            ranks_b: None,
            epsilon: 1e-6,
            k_max: 100,
            p_override: None,
            hooi_max_iter: 10,
            hooi_tol: 1e-4,
            model_stripes: true,
            stripe_shrink: 1.0,
        }
    }
}

fn frac_rank(dim: usize, frac: f64) -> usize {
    ((dim as f64 * frac).round() as usize).clamp(1, dim)
}

impl SolverConfig {
    pub fn default_ranks_x(dims: [usize; 3]) -> TuckerRanks {
        TuckerRanks {
            r1: frac_rank(dims[0], 0.8),
            r2: frac_rank(dims[1], 0.8),
            r3: dims[2].min(10),
        }
    }

    pub fn default_ranks_b(dims: [usize; 3]) -> TuckerRanks {
        TuckerRanks { r1: 1, r2: frac_rank(dims[1], 0.5), r3: frac_rank(dims[2], 0.5) }
    }

    pub fn resolved_ranks_x(&self, dims: [usize; 3]) -> TuckerRanks {
        self.ranks_x.unwrap_or_else(|| Self::default_ranks_x(dims))
    }

    pub fn resolved_ranks_b(&self, dims: [usize; 3]) -> TuckerRanks {
        self.ranks_b.unwrap_or_else(|| Self::default_ranks_b(dims))
    }

    /// Checks scalar invariants and, when `dims` is given, the ranks against it.
    pub fn validate(&self, dims: Option<[usize; 3]>) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::arg(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        nonneg("lambda1", self.lambda1)?;
        nonneg("lambda2", self.lambda2)?;
        nonneg("stripe_shrink", self.stripe_shrink)?;
        if !(self.beta0 > 0.0 && self.beta_max.is_finite() && self.beta0 <= self.beta_max) {
            return Err(Error::arg(format!(
                "need 0 < beta0 <= beta_max, got {} and {}",
                self.beta0, self.beta_max
            )));
        }
        if !(self.beta_growth >= 1.0 && self.beta_growth.is_finite()) {
            return Err(Error::arg(format!("beta_growth must be >= 1, got {}", self.beta_growth)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::arg(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.k_max == 0 || self.hooi_max_iter == 0 {
            return Err(Error::arg("k_max and hooi_max_iter must be >= 1"));
        }
        if !(self.hooi_tol > 0.0) {
            return Err(Error::arg(format!("hooi_tol must be positive, got {}", self.hooi_tol)));
        }
        self.weights.validate()?;
        if let Some(p) = self.p_override {
            if p.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                return Err(Error::arg(format!("p_override entries must lie in (0, 1], got {p:?}")));
            }
        }
        if let Some(dims) = dims {
            self.resolved_ranks_x(dims).validate_for(dims)?;
            self.resolved_ranks_b(dims).validate_for(dims)?;
        }
        Ok(())
    }
}

/// All iterates of the ADMM loop.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: HsiCube,
    pub z: HsiCube,
    pub s: HsiCube,
    pub b: HsiCube,
    pub f: GradientStack,
    pub lam1: HsiCube,
    pub lam2: GradientStack,
    pub beta: f64,
    /// Exponents used by the gradient shrinkage.
    pub p: [f64; 3],
    pub iter: usize,
    pub rel_change_history: Vec<f64>,
}

impl SolverState {
    /// Zero-initialized state.
    pub fn new(dims: [usize; 3], beta: f64, p: [f64; 3]) -> Result<Self> {
        Ok(Self {
            x: HsiCube::zeros(dims)?,
            z: HsiCube::zeros(dims)?,
            s: HsiCube::zeros(dims)?,
            b: HsiCube::zeros(dims)?,
            f: GradientStack::zeros(dims)?,
            lam1: HsiCube::zeros(dims)?,
            lam2: GradientStack::zeros(dims)?,
            beta,
            p,
            iter: 0,
            rel_change_history: Vec::new(),
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.x.dims()
    }
}

/// `y = clean + sparse + stripes + residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationDecomposition {
    pub clean: HsiCube,
    pub sparse: HsiCube,
    pub stripes: HsiCube,
    pub residual: HsiCube,
}

impl ObservationDecomposition {
    /// Builds the decomposition with `residual` chosen so that summing
    /// `clean + sparse + stripes + residual` left to right reproduces `y`
    /// bit for bit. When the partial sum sits on a finer grid than any usable
    /// residual, the clean value is moved by a few ulps until one exists.
    pub fn assemble(y: &HsiCube, clean: HsiCube, sparse: HsiCube, stripes: HsiCube) -> Result<Self> {
        y.check_same(&clean)?;
        y.check_same(&sparse)?;
        y.check_same(&stripes)?;
        let (mut clean, mut sparse, mut stripes) = (clean, sparse, stripes);
        let mut residual = Vec::with_capacity(y.len());
        for (((&yv, c), sv), bv) in y
            .as_slice()
            .iter()
            .zip(clean.as_mut_slice())
            .zip(sparse.as_mut_slice())
            .zip(stripes.as_mut_slice())
        {
            let (c2, s2, b2, r) = exact_split(yv, *c, *sv, *bv);
            (*c, *sv, *bv) = (c2, s2, b2);
            residual.push(r);
        }
        let residual = HsiCube::new(y.dims(), residual)?;
        Ok(Self { clean, sparse, stripes, residual })
    }

    /// `clean + sparse + stripes + residual`, summed in that order.
    pub fn recompose(&self) -> HsiCube {
        let data = self
            .clean
            .as_slice()
            .iter()
            .zip(self.sparse.as_slice())
            .zip(self.stripes.as_slice())
            .zip(self.residual.as_slice())
            .map(|(((&c, &s), &b), &r)| c + s + b + r)
            .collect();
        HsiCube::new(self.clean.dims(), data).expect("dims already validated")
    }
}

/// `r` with `partial + r == y` in floating point, nudged by ulps when the
/// plain difference rounds.
fn exact_remainder(y: f64, partial: f64) -> Option<f64> {
    let mut r = y - partial;
    for _ in 0..4 {
        let sum = partial + r;
        if sum == y {
            return Some(r);
        }
        r = if sum < y { r.next_up() } else { r.next_down() };
    }
    (partial + r == y).then_some(r)
}

/// Components and residual with `c + s + b + r == y` exactly. When the plain
/// remainder cannot do it, the components are snapped to a common power-of-two
/// grid a few ulps of the largest magnitude wide, on which every partial sum
/// is exact. That fails only if `y` carries bits finer than the grid.
fn exact_split(y: f64, c: f64, s: f64, b: f64) -> (f64, f64, f64, f64) {
    if let Some(r) = exact_remainder(y, c + s + b) {
        return (c, s, b, r);
    }
    let largest = c.abs().max(s.abs()).max(b.abs()).max(y.abs());
    let grid = 2f64.powi(largest.log2().ceil() as i32 + 3 - 52);
    let snap = |v: f64| (v / grid).round() * grid;
    let (c, s, b) = (snap(c), snap(s), snap(b));
    let partial = c + s + b;
    (c, s, b, exact_remainder(y, partial).unwrap_or(y - partial))
}

/// One row per outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub rel_change: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub records: Vec<IterationRecord>,
    /// Exponents used (estimated or overridden).
    pub p: [f64; 3],
    /// Present when the exponents were estimated.
    pub fit: Option<HyperLaplacianFit>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
}

impl Diagnostics {
    pub fn rel_change_history(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rel_change).collect()
    }

    /// CSV with header `iter,rel_change,beta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,rel_change,beta\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:e},{:e}", r.iter, r.rel_change, r.beta);
        }
        out
    }
}

/// HOOI fit of `(β·z − Λ1)/β` at the image ranks.
pub fn update_x(state: &SolverState, cfg: &SolverConfig) -> Result<HsiCube> {
    let mut target = state.z.clone();
    target.axpy(-1.0 / state.beta, &state.lam1)?;
    let ranks = cfg.resolved_ranks_x(state.dims());
    low_rank_approx(&target, ranks, cfg.hooi_max_iter, cfg.hooi_tol)
}

/// Right-hand side `y − b − s + Λ1 + β·x + Dᵀ(β·f − Λ2)` of the `z` normal equation.
pub fn z_rhs(state: &SolverState, cfg: &SolverConfig, y: &HsiCube) -> Result<HsiCube> {
    let mut rhs = y.clone();
    rhs.axpy(-1.0, &state.b)?;
    rhs.axpy(-1.0, &state.s)?;
    rhs.axpy(1.0, &state.lam1)?;
    rhs.axpy(state.beta, &state.x)?;
    let beta = state.beta;
    let g = state.f.zip_map(&state.lam2, |f, l| beta * f - l)?;
    rhs.axpy(1.0, &diff_adjoint(&g, cfg.weights)?)?;
    Ok(rhs)
}

/// Solves `((1 + β)·I + β·DᵀD) z = rhs` exactly via the 3-D FFT.
pub fn update_z(state: &SolverState, cfg: &SolverConfig, y: &HsiCube) -> Result<HsiCube> {
    let solver = PeriodicSolver::new(state.dims(), cfg.weights);
    update_z_with(&solver, state, cfg, y)
}

fn update_z_with(solver: &PeriodicSolver, state: &SolverState, cfg: &SolverConfig, y: &HsiCube) -> Result<HsiCube> {
    let rhs = z_rhs(state, cfg, y)?;
    solver.solve(&rhs, 1.0 + state.beta, state.beta)
}

/// Generalized shrinkage of `D(z) + Λ2/β` with threshold `λ1/β`.
pub fn update_f(state: &SolverState, cfg: &SolverConfig) -> Result<GradientStack> {
    let mut input = diff_forward(&state.z, cfg.weights);
    input.axpy(1.0 / state.beta, &state.lam2)?;
    ahsstv_prox(&input, cfg.lambda1 / state.beta, state.p)
}

/// HOOI fit of `y − z − s` at the stripe ranks with its core soft-thresholded
/// by `stripe_shrink / β`, or zero when stripes are not modeled.
///
/// With the factors fixed this is the exact minimizer of
/// `β/2·‖b − target‖² + stripe_shrink·‖core‖₁`.
pub fn update_b(state: &SolverState, cfg: &SolverConfig, y: &HsiCube) -> Result<HsiCube> {
    if !cfg.model_stripes {
        return HsiCube::zeros(state.dims());
    }
    let mut target = y.clone();
    target.axpy(-1.0, &state.z)?;
    target.axpy(-1.0, &state.s)?;
    let ranks = cfg.resolved_ranks_b(state.dims());
    let mut fit = hooi(&target, ranks, cfg.hooi_max_iter, cfg.hooi_tol)?;
    if cfg.stripe_shrink > 0.0 {
        let tau = cfg.stripe_shrink / state.beta;
        fit.core = fit.core.map(|c| soft_threshold(c, tau));
    }
    reconstruct(&fit)
}

/// Soft-thresholding of `y − z − b` at `λ2`.
pub fn update_s(state: &SolverState, cfg: &SolverConfig, y: &HsiCube) -> Result<HsiCube> {
    let lambda = cfg.lambda2;
    let resid = y.zip_map(&state.z, |a, b| a - b)?;
    resid.zip_map(&state.b, |r, b| soft_threshold(r - b, lambda))
}

/// Dual ascent `Λ1 += β(x − z)`, `Λ2 += β(D(z) − f)`, followed by
/// `β ← min(growth·β, β_max)`. Returns the new `(Λ1, Λ2, β)`.
pub fn update_multipliers(state: &SolverState, cfg: &SolverConfig) -> Result<(HsiCube, GradientStack, f64)> {
    let beta = state.beta;
    let mut lam1 = state.lam1.clone();
    lam1.axpy(beta, &(&state.x - &state.z))?;
    let dz = diff_forward(&state.z, cfg.weights);
    let mut lam2 = state.lam2.clone();
    lam2.axpy(beta, &dz.zip_map(&state.f, |a, b| a - b)?)?;
    let next_beta = (beta * cfg.beta_growth).min(cfg.beta_max);
    Ok((lam1, lam2, next_beta))
}

/// Relative change `‖x_new − x_old‖² / ‖x_old‖²`.
///
/// The first iteration starts from the zero image, where the ratio is
/// undefined; it is reported as 1. Later, a zero previous iterate yields 0 if
/// the new one is also zero and 1 otherwise.
fn relative_change(old: &HsiCube, new: &HsiCube, first: bool) -> f64 {
    let denom = old.fro_norm_sq();
    if first {
        return 1.0;
    }
    if denom == 0.0 {
        return if new.fro_norm_sq() == 0.0 { 0.0 } else { 1.0 };
    }
    (new - old).fro_norm_sq() / denom
}

/// Runs the full restoration on `y` (expected normalized to `[0, 1]` per band).
pub fn solve(y: &HsiCube, cfg: &SolverConfig) -> Result<(ObservationDecomposition, Diagnostics)> {
    let started = Instant::now();
    if !y.is_finite() {
        return Err(Error::arg("input cube contains non-finite values"));
    }
    let dims = y.dims();
    cfg.validate(Some(dims))?;

    let (p, fit) = match cfg.p_override {
        Some(p) => (p, None),
        None => {
            let fit = estimate_p(y)?;
            (fit.p(), Some(fit))
        }
    };

    let mut state = SolverState::new(dims, cfg.beta0, p)?;
    let fft = PeriodicSolver::new(dims, cfg.weights);
    let mut records = Vec::with_capacity(cfg.k_max);
    let mut converged = false;

    while state.iter < cfg.k_max {
        let x_prev = state.x.clone();
        state.x = update_x(&state, cfg)?;
        state.z = update_z_with(&fft, &state, cfg, y)?;
        state.f = update_f(&state, cfg)?;
        state.b = update_b(&state, cfg, y)?;
        state.s = update_s(&state, cfg, y)?;
        let beta_used = state.beta;
        let (lam1, lam2, beta) = update_multipliers(&state, cfg)?;
        state.lam1 = lam1;
        state.lam2 = lam2;
        state.beta = beta;

        let rel = relative_change(&x_prev, &state.x, state.iter == 0);
        state.iter += 1;
        state.rel_change_history.push(rel);
        records.push(IterationRecord { iter: state.iter, rel_change: rel, beta: beta_used });
        if rel <= cfg.epsilon {
            converged = true;
            break;
        }
    }

    let decomposition = ObservationDecomposition::assemble(y, state.x, state.s, state.b)?;
    let diagnostics = Diagnostics {
        iterations: records.len(),
        records,
        p,
        fit,
        converged,
        wall_time: started.elapsed(),
    };
    Ok((decomposition, diagnostics))
}
