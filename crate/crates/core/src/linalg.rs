//! Dense complex-matrix primitives shared by the simulator and both estimators.
//!
//! Vectorization is column-stacking: entry `i + j*d` of `vec(m)` is `m[(i, j)]`.
//! With this convention `tr(M† ρ) = vec(M)† vec(ρ)` under the standard inner
//! product, which is the identity the windowed measurement model relies on.
//! nalgebra stores matrices column-major, so `vec` is a copy of the backing
//! slice.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance on `‖ρ − ρ†‖_F` for a valid density matrix.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on `|tr ρ − 1|`.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of a density matrix.
pub const PSD_TOL: f64 = -1e-10;

const EIGEN_MAX_SWEEPS_PER_DIM: usize = 1000;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Column-stacks a square matrix.
pub fn vec(m: &CMatrix) -> Result<CVector> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "vec needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(CVector::from_column_slice(m.as_slice()))
}

/// Inverse of [`vec`].
pub fn unvec(v: &CVector) -> Result<CMatrix> {
    let d = square_side(v.len())?;
    Ok(CMatrix::from_column_slice(d, d, v.as_slice()))
}

/// Side length `d` of a vectorized `d x d` matrix.
pub fn square_side(len: usize) -> Result<usize> {
    let d = (len as f64).sqrt().round() as usize;
    if d == 0 || d * d != len {
        return Err(Error::Dimension(format!(
            "length {len} is not a nonzero perfect square"
        )));
    }
    Ok(d)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `(m + m†) / 2`
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// Eigen-decomposition of the Hermitian part of `m`.
///
/// Returns real eigenvalues (unsorted, as produced by the solver) and the
/// unitary whose columns are the matching eigenvectors.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(DVector<f64>, CMatrix)> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_finite(m) {
        return Err(Error::Numeric(
            "eigendecomposition of a matrix with non-finite entries".into(),
        ));
    }
    let h = hermitian_part(m);
    let n = h.nrows().max(1);
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, EIGEN_MAX_SWEEPS_PER_DIM * n)
        .ok_or_else(|| Error::Numeric("Hermitian eigensolver did not converge".into()))?;
    Ok((eig.eigenvalues, eig.eigenvectors))
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<DVector<f64>> {
    hermitian_eigen(m).map(|(w, _)| w)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue(m: &CMatrix) -> Result<f64> {
    let w = hermitian_eigenvalues(m)?;
    Ok(w.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// `V diag(w) V†`
pub fn from_eigen(values: &DVector<f64>, vectors: &CMatrix) -> CMatrix {
    let mut scaled = vectors.clone();
    for (mut col, &w) in scaled.column_iter_mut().zip(values.iter()) {
        col *= c(w, 0.0);
    }
    scaled * vectors.adjoint()
}

/// Applies `f` to the eigenvalues of a Hermitian matrix.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let (w, v) = hermitian_eigen(m)?;
    Ok(hermitian_part(&from_eigen(&w.map(f), &v)))
}

/// Euclidean projection onto the probability simplex `{x ≥ 0, Σx = 1}`.
///
/// Sort-based threshold method: find the largest `r` with
/// `u_r > (Σ_{j≤r} u_j − 1) / r` over the descending sort `u`, then shift
/// by that threshold and clip at zero.
pub fn simplex_project(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Dimension(
            "simplex projection of an empty vector".into(),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(
            "simplex projection of a non-finite vector".into(),
        ));
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    Ok(v.iter().map(|&x| (x - theta).max(0.0)).collect())
}

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates `m` against the density-matrix invariants.
    pub fn new(m: CMatrix) -> Result<Self> {
        check_density(&m)?;
        Ok(DensityMatrix(m))
    }

    /// Skips validation; for matrices that are density matrices by construction.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        debug_assert!(m.is_square());
        DensityMatrix(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(CMatrix::identity(dim, dim).scale(1.0 / dim as f64))
    }

    /// `|ψ⟩⟨ψ|` for a normalized copy of `psi`.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numeric("cannot normalize state vector".into()));
        }
        let psi = psi.unscale(norm);
        Ok(DensityMatrix(hermitian_part(&(&psi * psi.adjoint()))))
    }

    pub fn from_vectorized(p: &CVector) -> Result<Self> {
        Self::new(unvec(p)?)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn vectorized(&self) -> CVector {
        CVector::from_column_slice(self.0.as_slice())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let w = hermitian_eigenvalues(&self.0)?;
        Ok(w.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

/// Checks the three density-matrix invariants at the crate tolerances.
pub fn check_density(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "density matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_finite(m) {
        return Err(Error::Numeric(
            "density matrix has non-finite entries".into(),
        ));
    }
    let herm = hermiticity_defect(m);
    if herm > HERMITIAN_TOL {
        return Err(Error::Numeric(format!(
            "matrix is not Hermitian: ‖ρ − ρ†‖_F = {herm:e}"
        )));
    }
    let tr = m.trace();
    if (tr - c(1.0, 0.0)).norm() > TRACE_TOL {
        return Err(Error::Numeric(format!("trace is {tr}, expected 1")));
    }
    let min = hermitian_eigenvalues(m)?
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < PSD_TOL {
        return Err(Error::Numeric(format!(
            "matrix is not positive semidefinite: min eigenvalue {min:e}"
        )));
    }
    Ok(())
}

/// Closest density matrix to the Hermitian part of `h` in Frobenius norm.
///
/// The Hermitian part is diagonalized and its eigenvalues are replaced by
/// their projection onto the probability simplex. Degenerate eigenvalues
/// need no tie-breaking: equal eigenvalues map to equal projected values, so
/// every choice of eigenbasis gives the same matrix.
pub fn project_to_density(h: &CMatrix) -> Result<DensityMatrix> {
    let (w, v) = hermitian_eigen(h)?;
    let projected = DVector::from_vec(simplex_project(w.as_slice())?);
    Ok(DensityMatrix::from_trusted(hermitian_part(&from_eigen(
        &projected, &v,
    ))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
        match self {
            Pauli::I => CMatrix::from_row_slice(2, 2, &[l, o, o, l]),
            Pauli::X => CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }

    pub fn label(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(ch: char) -> Result<Self> {
        match ch.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::config(
                "observable",
                format!("unknown Pauli label `{other}`"),
            )),
        }
    }
}

/// A tensor product of single-qubit Pauli labels, written like `ZIII`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    /// `Z` on the first qubit, identity elsewhere.
    pub fn z_first(n: usize) -> Self {
        let mut labels = vec![Pauli::I; n];
        if let Some(first) = labels.first_mut() {
            *first = Pauli::Z;
        }
        PauliString(labels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .filter(|ch| !ch.is_whitespace() && *ch != ',')
            .map(Pauli::try_from)
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|p| write!(f, "{}", p.label()))
    }
}

/// `σ_{spec[0]} ⊗ … ⊗ σ_{spec[n-1]}`, qubit 0 being the most significant factor.
pub fn pauli_observable(n: usize, spec: &[Pauli]) -> Result<CMatrix> {
    if spec.len() != n {
        return Err(Error::config(
            "observable",
            format!("expected {n} Pauli labels, got {}", spec.len()),
        ));
    }
    Ok(spec
        .iter()
        .fold(CMatrix::identity(1, 1), |acc, p| kron(&acc, &p.matrix())))
}

/// `tr(a† b)`, i.e. the Hilbert–Schmidt inner product.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}
