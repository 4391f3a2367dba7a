//! Kalman-filter state estimation: a gain-matrix descent step followed by
//! projection onto the density set.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eigenvalues, project_to_density, unvec, CMatrix, CVector, DensityMatrix,
};
use crate::sim::MeasurementWindow;

/// Largest accepted condition number of `I + AA†`.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// `K = A†(I + AA†)⁻¹`, via a Cholesky solve of the small Gram system.
pub fn kalman_gain(a: &CMatrix) -> Result<CMatrix> {
    if !a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numeric(
            "sampling matrix has non-finite entries".into(),
        ));
    }
    let rows = a.nrows();
    let gram = CMatrix::identity(rows, rows) + a * a.adjoint();
    let w = hermitian_eigenvalues(&gram)?;
    let (lo, hi) = w.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    if rows > 0 && !(lo > 0.0 && hi / lo <= MAX_GRAM_CONDITION) {
        return Err(Error::Numeric(format!(
            "Gram system is ill-conditioned (cond = {:e})",
            hi / lo
        )));
    }
    let chol = Cholesky::new(gram)
        .ok_or_else(|| Error::Numeric("Cholesky factorization of I + AA† failed".into()))?;
    // (I + AA†) X = A  ⇒  K = X†
    Ok(chol.solve(a).adjoint())
}

/// `‖(I + AA†)K† − A‖_F`
pub fn gain_residual(a: &CMatrix, k: &CMatrix) -> f64 {
    let rows = a.nrows();
    let gram = DMatrix::identity(rows, rows) + a * a.adjoint();
    (gram * k.adjoint() - a).norm()
}

#[derive(Clone, Debug, PartialEq)]
pub struct KfState {
    pub p: CVector,
    pub k: usize,
    /// `‖E_k‖₂ = ‖p_k − p̂_k‖₂` of the most recent step.
    pub last_projection_residual: f64,
}

impl KfState {
    pub fn new(initial: &DensityMatrix) -> Self {
        KfState {
            p: initial.vectorized(),
            k: 0,
            last_projection_residual: 0.0,
        }
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        DensityMatrix::from_vectorized(&self.p)
    }
}

/// `p̂ = p − K(𝒜p − b)`
pub fn kf_descend(state: &KfState, window: &MeasurementWindow) -> Result<CVector> {
    let a = &*window.sampling_matrix;
    if state.p.len() != a.ncols() {
        return Err(Error::Dimension(format!(
            "estimate has length {}, sampling matrix has {} columns",
            state.p.len(),
            a.ncols()
        )));
    }
    let gain = kalman_gain(a)?;
    let innovation = a * &state.p - window.record.map(|y| c(y, 0.0));
    Ok(&state.p - gain * innovation)
}

/// Projects `p̂` onto the density set; returns `(p, ‖p − p̂‖₂)`.
pub fn kf_project(p_hat: &CVector) -> Result<(CVector, f64)> {
    let p = project_to_density(&unvec(p_hat)?)?.vectorized();
    let residual = (&p - p_hat).norm();
    Ok((p, residual))
}

pub fn step(state: &KfState, window: &MeasurementWindow) -> Result<KfState> {
    if window.time != state.k + 1 {
        return Err(Error::Range(format!(
            "window is for time {}, estimator is at {}",
            window.time, state.k
        )));
    }
    let p_hat = kf_descend(state, window)?;
    let (p, residual) = kf_project(&p_hat)?;
    Ok(KfState {
        p,
        k: window.time,
        last_projection_residual: residual,
    })
}
