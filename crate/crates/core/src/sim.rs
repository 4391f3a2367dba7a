//! True-state simulation and measurement records.
//!
//! The state follows the discrete Kraus evolution `ρ_k = Σ_i A_i ρ_{k−1} A_i†`
//! and the measured operators follow the adjoint recursion
//! `M_k = Σ_i A_i† M_{k−1} A_i`. Together they satisfy the duality
//! `tr(M_m ρ_s) = tr(M_1 ρ_{s+m−1})`, which is what lets a window of past
//! scalar readings `y_i = tr(M_1 ρ_i)` be written as linear functionals of a
//! single state.

use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eigen, hermitian_map, hermitian_part, pauli_observable, vec, CMatrix, CVector,
    DensityMatrix, Pauli, PauliString,
};

/// Completeness tolerance `‖Σ A†A − I‖_F`.
pub const COMPLETENESS_TOL: f64 = 1e-10;

pub type SimRng = ChaCha8Rng;

/// Independent random streams derived from one experiment seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Hamiltonian = 1,
    InitialState = 2,
    RecordNoise = 3,
    OracleNoise = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

fn gaussian(rng: &mut SimRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Knobs of the simulated weak-measurement dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsConfig {
    pub qubits: usize,
    /// Weak-measurement strength `λ_w`.
    pub coupling_strength: f64,
    pub hamiltonian_seed: u64,
    /// RMS energy `sqrt(tr(H²)/d)` of the random Hamiltonian; zero disables it.
    pub hamiltonian_scale: f64,
    pub dt: f64,
    pub observable: PauliString,
}

impl DynamicsConfig {
    pub fn new(qubits: usize, seed: u64) -> Self {
        DynamicsConfig {
            qubits,
            coupling_strength: 0.5,
            hamiltonian_seed: seed,
            hamiltonian_scale: 1.0,
            dt: 0.1,
            observable: PauliString::z_first(qubits),
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits == 0 {
            return Err(Error::config("n", "qubit count must be ≥ 1"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("dt", "dt must be finite and > 0"));
        }
        if !(self.hamiltonian_scale.is_finite() && self.hamiltonian_scale >= 0.0) {
            return Err(Error::config(
                "hamiltonian_scale",
                "hamiltonian_scale must be finite and ≥ 0",
            ));
        }
        if !(0.0..=1.0).contains(&self.coupling_strength) {
            return Err(Error::config(
                "coupling_strength",
                "coupling_strength must lie in [0, 1]",
            ));
        }
        if self.observable.len() != self.qubits {
            return Err(Error::config(
                "observable",
                format!(
                    "observable `{}` has {} labels for {} qubits",
                    self.observable,
                    self.observable.len(),
                    self.qubits
                ),
            ));
        }
        Ok(())
    }

    pub fn observable_matrix(&self) -> Result<CMatrix> {
        pauli_observable(self.qubits, &self.observable.0)
    }
}

/// Operators `{A_i}` with `Σ A_i† A_i = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    dim: usize,
    operators: Vec<CMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::Dimension("Kraus set must be nonempty".into()))?;
        let dim = first.nrows();
        if operators
            .iter()
            .any(|a| a.nrows() != dim || a.ncols() != dim)
        {
            return Err(Error::Dimension(format!(
                "Kraus operators must all be {dim}x{dim}"
            )));
        }
        let set = KrausSet { dim, operators };
        let defect = set.completeness_defect();
        if defect.is_nan() || defect > COMPLETENESS_TOL {
            return Err(Error::Numeric(format!(
                "Kraus set is not complete: ‖Σ A†A − I‖_F = {defect:e}"
            )));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn completeness_defect(&self) -> f64 {
        let sum = self
            .operators
            .iter()
            .fold(CMatrix::zeros(self.dim, self.dim), |acc, a| {
                acc + a.adjoint() * a
            });
        (sum - CMatrix::identity(self.dim, self.dim)).norm()
    }
}

/// Random 2-local Hamiltonian: every single-qubit Pauli term and every
/// two-qubit product on every pair, with Gaussian weights rescaled so that
/// `sqrt(tr(H²)/d) = scale`.
pub fn random_two_local_hamiltonian(
    qubits: usize,
    scale: f64,
    rng: &mut SimRng,
) -> Result<CMatrix> {
    let d = 1usize << qubits;
    let axes = [Pauli::X, Pauli::Y, Pauli::Z];
    let mut terms: Vec<Vec<Pauli>> = Vec::new();
    for i in 0..qubits {
        for &a in &axes {
            let mut labels = vec![Pauli::I; qubits];
            labels[i] = a;
            terms.push(labels);
        }
        for j in i + 1..qubits {
            for &a in &axes {
                for &b in &axes {
                    let mut labels = vec![Pauli::I; qubits];
                    labels[i] = a;
                    labels[j] = b;
                    terms.push(labels);
                }
            }
        }
    }
    let weights: Vec<f64> = terms.iter().map(|_| gaussian(rng)).collect();
    // Pauli strings are orthogonal with tr(P P') = d δ, so tr(H²)/d = Σ w².
    let rms = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let mut h = CMatrix::zeros(d, d);
    if rms == 0.0 || scale == 0.0 {
        return Ok(h);
    }
    for (labels, w) in terms.iter().zip(&weights) {
        h += pauli_observable(qubits, labels)? * c(scale * w / rms, 0.0);
    }
    Ok(h)
}

/// `exp(−i H dt)` for Hermitian `H`.
pub fn propagator(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    let (w, v) = hermitian_eigen(h)?;
    let mut scaled = v.clone();
    for (mut col, &e) in scaled.column_iter_mut().zip(w.iter()) {
        col *= c(0.0, -e * dt).exp();
    }
    Ok(scaled * v.adjoint())
}

/// The two-outcome weak-measurement set `{U √((I + λO)/2), U √((I − λO)/2)}`
/// with `U = exp(−iHΔt)`.
pub fn make_kraus(cfg: &DynamicsConfig) -> Result<KrausSet> {
    cfg.validate()?;
    let o = cfg.observable_matrix()?;
    let (w, _) = hermitian_eigen(&o)?;
    let spectral = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if cfg.coupling_strength * spectral > 1.0 + 1e-12 {
        return Err(Error::config(
            "coupling_strength",
            format!("λ_w·‖O‖ = {} exceeds 1", cfg.coupling_strength * spectral),
        ));
    }
    let mut rng = stream_rng(cfg.hamiltonian_seed, Stream::Hamiltonian);
    let h = random_two_local_hamiltonian(cfg.qubits, cfg.hamiltonian_scale, &mut rng)?;
    let u = propagator(&h, cfg.dt)?;
    let lambda = cfg.coupling_strength;
    let plus = hermitian_map(&o, |x| ((1.0 + lambda * x) / 2.0).max(0.0).sqrt())?;
    let minus = hermitian_map(&o, |x| ((1.0 - lambda * x) / 2.0).max(0.0).sqrt())?;
    KrausSet::new(vec![&u * plus, &u * minus])
}

fn check_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!(
            "{what} has dimension {got}, Kraus set acts on {want}"
        )));
    }
    Ok(())
}

/// One step of `ρ ↦ Σ A ρ A†`.
pub fn evolve(rho: &DensityMatrix, ks: &KrausSet) -> Result<DensityMatrix> {
    check_dim("state", rho.dim(), ks.dim())?;
    let next = ks
        .operators()
        .iter()
        .fold(CMatrix::zeros(ks.dim(), ks.dim()), |acc, a| {
            acc + a * rho.matrix() * a.adjoint()
        });
    Ok(DensityMatrix::from_trusted(hermitian_part(&next)))
}

/// One step of `M ↦ Σ A† M A`.
pub fn heisenberg_update(m_prev: &CMatrix, ks: &KrausSet) -> Result<CMatrix> {
    if !m_prev.is_square() {
        return Err(Error::Dimension(
            "measurement operator must be square".into(),
        ));
    }
    check_dim("measurement operator", m_prev.nrows(), ks.dim())?;
    Ok(ks
        .operators()
        .iter()
        .fold(CMatrix::zeros(ks.dim(), ks.dim()), |acc, a| {
            acc + a.adjoint() * m_prev * a
        }))
}

/// `[M_1, …, M_count]` starting from `m1`.
pub fn heisenberg_sequence(m1: &CMatrix, ks: &KrausSet, count: usize) -> Result<Vec<CMatrix>> {
    let mut ops = Vec::with_capacity(count);
    if count == 0 {
        return Ok(ops);
    }
    ops.push(m1.clone());
    while ops.len() < count {
        let next = heisenberg_update(ops.last().expect("nonempty"), ks)?;
        ops.push(next);
    }
    Ok(ops)
}

/// `tr(M₁† ρ) + ε`, `ε ~ N(0, noise_std²)`.
pub fn measure(rho: &DensityMatrix, m1: &CMatrix, noise_std: f64, rng: &mut SimRng) -> Result<f64> {
    if m1.shape() != rho.matrix().shape() {
        return Err(Error::Dimension(format!(
            "operator {:?} does not match state {:?}",
            m1.shape(),
            rho.matrix().shape()
        )));
    }
    let expectation = crate::linalg::hs_inner(m1, rho.matrix());
    if expectation.im.abs() > 1e-9 {
        return Err(Error::config(
            "observable",
            format!("measurement operator is not Hermitian (tr = {expectation})"),
        ));
    }
    let noise = if noise_std > 0.0 {
        noise_std * gaussian(rng)
    } else {
        0.0
    };
    Ok(expectation.re + noise)
}

/// Scalar readings `y_1, y_2, …`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasurementRecord {
    pub values: Vec<f64>,
    pub noise_std: f64,
}

impl MeasurementRecord {
    pub fn new(noise_std: f64) -> Self {
        MeasurementRecord {
            values: Vec::new(),
            noise_std,
        }
    }

    pub fn push(&mut self, y: f64) {
        self.values.push(y);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The pair `(𝒜_k, b_k)` for time `k`.
///
/// Row `j` (0-based) of the sampling matrix is `vec(M_{j+1})†` and pairs
/// with record entry `y_{k − l_eff + j + 1}`: the oldest reading goes with
/// `M_1`. Under the duality identity the noiseless record is then exactly
/// `𝒜_k vec(ρ_{k − l_eff + 1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementWindow {
    pub sampling_matrix: Arc<CMatrix>,
    pub record: DVector<f64>,
    pub window_length: usize,
    pub time: usize,
}

impl MeasurementWindow {
    pub fn effective_length(&self) -> usize {
        self.record.len()
    }

    /// `Re(𝒜 p)`.
    pub fn apply(&self, p: &CVector) -> Result<DVector<f64>> {
        if p.len() != self.sampling_matrix.ncols() {
            return Err(Error::Dimension(format!(
                "state of length {} against sampling matrix with {} columns",
                p.len(),
                self.sampling_matrix.ncols()
            )));
        }
        Ok((&*self.sampling_matrix * p).map(|z| z.re))
    }

    /// `𝒜† r` for a real vector `r`.
    pub fn apply_adjoint(&self, r: &DVector<f64>) -> Result<CVector> {
        if r.len() != self.sampling_matrix.nrows() {
            return Err(Error::Dimension(format!(
                "vector of length {} against sampling matrix with {} rows",
                r.len(),
                self.sampling_matrix.nrows()
            )));
        }
        Ok(self.sampling_matrix.ad_mul(&r.map(|x| c(x, 0.0))))
    }
}

/// Stacks `vec(M_1)†, …, vec(M_rows)†`.
pub fn sampling_matrix(operators: &[CMatrix], rows: usize) -> Result<CMatrix> {
    if operators.len() < rows {
        return Err(Error::Range(format!(
            "need {rows} measurement operators, have {}",
            operators.len()
        )));
    }
    let cols = operators.first().map_or(0, |m| m.len());
    let mut a = CMatrix::zeros(rows, cols);
    for (j, m) in operators.iter().take(rows).enumerate() {
        let v = vec(m)?;
        if v.len() != cols {
            return Err(Error::Dimension(
                "measurement operators differ in size".into(),
            ));
        }
        a.row_mut(j).copy_from(&v.adjoint());
    }
    Ok(a)
}

fn window_record(history: &MeasurementRecord, k: usize, l: usize) -> Result<DVector<f64>> {
    if k < 1 {
        return Err(Error::Range("window time k must be ≥ 1".into()));
    }
    if l < 1 {
        return Err(Error::Range("window length l must be ≥ 1".into()));
    }
    if history.len() < k {
        return Err(Error::Range(format!(
            "record holds {} readings, window needs {k}",
            history.len()
        )));
    }
    let l_eff = k.min(l);
    Ok(DVector::from_column_slice(&history.values[k - l_eff..k]))
}

/// Builds `(𝒜_k, b_k)` with `l_eff = min(k, l)`.
pub fn build_window(
    history: &MeasurementRecord,
    operators: &[CMatrix],
    k: usize,
    l: usize,
) -> Result<MeasurementWindow> {
    let record = window_record(history, k, l)?;
    let a = sampling_matrix(operators, record.len())?;
    Ok(MeasurementWindow {
        sampling_matrix: Arc::new(a),
        record,
        window_length: l,
        time: k,
    })
}

/// [`build_window`] with the sampling matrices cached per effective length,
/// so a long run shares one full-length matrix.
#[derive(Clone, Debug)]
pub struct WindowBuilder {
    operators: Vec<CMatrix>,
    window_length: usize,
    cache: Vec<Option<Arc<CMatrix>>>,
}

impl WindowBuilder {
    pub fn new(operators: Vec<CMatrix>, window_length: usize) -> Result<Self> {
        if window_length < 1 {
            return Err(Error::Range("window length l must be ≥ 1".into()));
        }
        if operators.len() < window_length {
            return Err(Error::Range(format!(
                "need {window_length} measurement operators, have {}",
                operators.len()
            )));
        }
        Ok(WindowBuilder {
            operators,
            window_length,
            cache: vec![None; window_length + 1],
        })
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn sampling_matrix(&mut self, rows: usize) -> Result<Arc<CMatrix>> {
        if rows == 0 || rows > self.window_length {
            return Err(Error::Range(format!("no sampling matrix with {rows} rows")));
        }
        if let Some(a) = &self.cache[rows] {
            return Ok(Arc::clone(a));
        }
        let a = Arc::new(sampling_matrix(&self.operators, rows)?);
        self.cache[rows] = Some(Arc::clone(&a));
        Ok(a)
    }

    pub fn window(&mut self, history: &MeasurementRecord, k: usize) -> Result<MeasurementWindow> {
        let record = window_record(history, k, self.window_length)?;
        let sampling_matrix = self.sampling_matrix(record.len())?;
        Ok(MeasurementWindow {
            sampling_matrix,
            record,
            window_length: self.window_length,
            time: k,
        })
    }
}

/// Replaces `b_k` by `Re(𝒜_k vec(ρ_true)) + e_k` with fresh Gaussian `e_k`.
///
/// Returns the new window together with the injected noise, which is the
/// feasible comparator `e*` for this step.
pub fn synth_oracle_record(
    rho_true: &DensityMatrix,
    window: &MeasurementWindow,
    noise_std: f64,
    rng: &mut SimRng,
) -> Result<(MeasurementWindow, DVector<f64>)> {
    let clean = window.apply(&rho_true.vectorized())?;
    let noise = DVector::from_fn(clean.len(), |_, _| {
        if noise_std > 0.0 {
            noise_std * gaussian(rng)
        } else {
            0.0
        }
    });
    let out = MeasurementWindow {
        record: &clean + &noise,
        ..window.clone()
    };
    Ok((out, noise))
}

/// Haar-style random pure state from complex Gaussian amplitudes.
pub fn random_pure_state(dim: usize, rng: &mut SimRng) -> Result<DensityMatrix> {
    let psi = CVector::from_fn(dim, |_, _| c(gaussian(rng), gaussian(rng)));
    DensityMatrix::pure(&psi)
}
