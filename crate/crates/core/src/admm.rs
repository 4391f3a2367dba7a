//! Online proximal-gradient ADMM.
//!
//! Each sampling time runs one cross-update of the triple `(p, e, λ)` for
//!
//! ```text
//! min_{ρ, e}  (1/2γ)‖e‖² + ‖vec(ρ − ρ_{k−1})‖²   s.t.  𝒜_k vec(ρ) + e = b_k,  ρ a density matrix
//! ```
//!
//! 1. `p`: one linearized proximal step
//!    `p̃ = p_{k−1} − (α/τ₁) 𝒜†(𝒜 p_{k−1} + e_{k−1} − b − λ_{k−1}/α)`,
//!    with `τ₁ = τ/η`, followed by projection onto the density set.
//! 2. `e`: the exact minimizer
//!    `e_k = (αγ/(1 + αγ)) (b + λ_{k−1}/α − 𝒜 p_k)`.
//! 3. `λ`: `λ_k = λ_{k−1} − α(𝒜 p_k + e_k − b)`.
//!
//! Steps 2 and 3 together force `e_k = γ λ_k` after every iteration.
//!
//! Parameters follow `α = √T`, `η = τ/(α σ_m)` with `σ_m = λ_max(𝒜†𝒜)`, so
//! the step scale `α/τ₁ = αη/τ` reduces to `1/σ_m` and the proximal metric
//! `P_k = τI − αη 𝒜_k†𝒜_k` is positive semidefinite for every row subset of
//! the reference matrix.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{max_eigenvalue, project_to_density, unvec, CMatrix, CVector, DensityMatrix};
use crate::sim::MeasurementWindow;

/// Most negative admissible eigenvalue of `P_k`.
pub const PROX_PSD_TOL: f64 = -1e-9;
/// Below this `P_k` is treated as singular and reported once.
pub const PROX_STRICT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmParams {
    pub alpha: f64,
    pub eta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub sigma_m: f64,
    pub horizon: usize,
}

/// `λ_max(A†A)`, computed on the smaller of the two Gram matrices.
pub fn gram_max_eigenvalue(a: &CMatrix) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.adjoint()
    } else {
        a.adjoint() * a
    };
    Ok(max_eigenvalue(&gram)?.max(0.0))
}

impl AdmmParams {
    pub fn derive(horizon: usize, a_ref: &CMatrix, tau: f64, gamma: f64) -> Result<Self> {
        if horizon < 1 {
            return Err(Error::config("T", "horizon must be ≥ 1"));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::config("tau", "tau must be finite and > 0"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::config("gamma", "gamma must be finite and > 0"));
        }
        let sigma_m = gram_max_eigenvalue(a_ref)?;
        if sigma_m.is_nan() || sigma_m <= 0.0 {
            return Err(Error::config(
                "sampling_matrix",
                "degenerate reference sampling matrix (σ_m = 0)",
            ));
        }
        let alpha = (horizon as f64).sqrt();
        let params = AdmmParams {
            alpha,
            eta: tau / (alpha * sigma_m),
            gamma,
            tau,
            sigma_m,
            horizon,
        };
        let min = params.prox_min_eigenvalue(a_ref)?;
        if min < PROX_PSD_TOL {
            return Err(Error::Numeric(format!(
                "proximal metric is indefinite: λ_min(P) = {min:e}"
            )));
        }
        if min < PROX_STRICT_TOL {
            log::debug!("proximal metric P is singular on the reference window (λ_min = {min:e})");
        }
        Ok(params)
    }

    /// `α/τ₁` with `τ₁ = τ/η`.
    pub fn step_scale(&self) -> f64 {
        self.alpha * self.eta / self.tau
    }

    /// `α γ / (1 + α γ)`
    pub fn noise_shrinkage(&self) -> f64 {
        let ag = self.alpha * self.gamma;
        ag / (1.0 + ag)
    }

    /// Smallest eigenvalue of `P = τI − αη A†A`.
    pub fn prox_min_eigenvalue(&self, a: &CMatrix) -> Result<f64> {
        Ok(self.tau - self.alpha * self.eta * gram_max_eigenvalue(a)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState {
    pub p: CVector,
    pub e: DVector<f64>,
    pub lambda: DVector<f64>,
    pub k: usize,
    /// `‖p_k − p̃‖₂` of the most recent projection.
    pub projection_residual: f64,
}

impl AdmmState {
    /// Starts at `initial` with empty noise and dual vectors (`λ₁ = 0`).
    pub fn new(initial: &DensityMatrix) -> Self {
        AdmmState {
            p: initial.vectorized(),
            e: DVector::zeros(0),
            lambda: DVector::zeros(0),
            k: 0,
            projection_residual: 0.0,
        }
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        DensityMatrix::from_vectorized(&self.p)
    }

    /// `e` and `λ` zero-padded at the newest positions to the window length.
    fn aligned(&self, len: usize) -> Result<(DVector<f64>, DVector<f64>)> {
        if self.e.len() != self.lambda.len() {
            return Err(Error::Dimension(format!(
                "noise estimate has length {}, dual variable {}",
                self.e.len(),
                self.lambda.len()
            )));
        }
        if self.e.len() > len {
            return Err(Error::Dimension(format!(
                "window shrank from {} to {len} rows",
                self.e.len()
            )));
        }
        let pad = |v: &DVector<f64>| {
            let mut out = DVector::zeros(len);
            out.rows_mut(0, v.len()).copy_from(v);
            out
        };
        Ok((pad(&self.e), pad(&self.lambda)))
    }
}

fn check_state(state: &AdmmState, window: &MeasurementWindow) -> Result<()> {
    if state.p.len() != window.sampling_matrix.ncols() {
        return Err(Error::Dimension(format!(
            "estimate has length {}, sampling matrix has {} columns",
            state.p.len(),
            window.sampling_matrix.ncols()
        )));
    }
    Ok(())
}

/// Unconstrained gradient point `p̃`.
pub fn gradient_point(
    state: &AdmmState,
    window: &MeasurementWindow,
    params: &AdmmParams,
) -> Result<CVector> {
    check_state(state, window)?;
    let (e, lambda) = state.aligned(window.effective_length())?;
    let residual = window.apply(&state.p)? + e - &window.record - lambda / params.alpha;
    let grad = window.apply_adjoint(&residual)?;
    Ok(&state.p - grad * crate::linalg::c(params.step_scale(), 0.0))
}

/// The `p` update: gradient step then projection onto the density set.
pub fn rho_update(
    state: &AdmmState,
    window: &MeasurementWindow,
    params: &AdmmParams,
) -> Result<CVector> {
    let p_tilde = gradient_point(state, window, params)?;
    Ok(project_to_density(&unvec(&p_tilde)?)?.vectorized())
}

/// Closed-form minimizer of `(1/2γ)‖e‖² + (α/2)‖𝒜p + e − b − λ/α‖²`.
pub fn e_update(
    p_new: &CVector,
    state: &AdmmState,
    window: &MeasurementWindow,
    params: &AdmmParams,
) -> Result<DVector<f64>> {
    let (_, lambda) = state.aligned(window.effective_length())?;
    let target = &window.record + lambda / params.alpha - window.apply(p_new)?;
    Ok(target * params.noise_shrinkage())
}

/// `λ_k = λ_{k−1} − α(𝒜 p_k + e_k − b)`.
pub fn dual_update(
    p_new: &CVector,
    e_new: &DVector<f64>,
    state: &AdmmState,
    window: &MeasurementWindow,
    params: &AdmmParams,
) -> Result<DVector<f64>> {
    let (_, lambda) = state.aligned(window.effective_length())?;
    if e_new.len() != lambda.len() {
        return Err(Error::Dimension(format!(
            "noise estimate has length {}, window has {} rows",
            e_new.len(),
            lambda.len()
        )));
    }
    let residual = window.apply(p_new)? + e_new - &window.record;
    Ok(lambda - residual * params.alpha)
}

/// One full `(p, e, λ)` iteration at time `state.k + 1`.
pub fn step(
    state: &AdmmState,
    window: &MeasurementWindow,
    params: &AdmmParams,
) -> Result<AdmmState> {
    if window.time != state.k + 1 {
        return Err(Error::Range(format!(
            "window is for time {}, estimator is at {}",
            window.time, state.k
        )));
    }
    let min = params.prox_min_eigenvalue(&window.sampling_matrix)?;
    if min < PROX_PSD_TOL {
        return Err(Error::Numeric(format!(
            "proximal metric is indefinite at k = {}: λ_min(P) = {min:e}",
            window.time
        )));
    }
    let p_tilde = gradient_point(state, window, params)?;
    let p = project_to_density(&unvec(&p_tilde)?)?.vectorized();
    let e = e_update(&p, state, window, params)?;
    let lambda = dual_update(&p, &e, state, window, params)?;
    Ok(AdmmState {
        projection_residual: (&p - &p_tilde).norm(),
        p,
        e,
        lambda,
        k: window.time,
    })
}
