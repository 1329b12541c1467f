//! Dense complex operator algebra.
//!
//! [`Operator`] wraps a square `ndarray` matrix of `Complex64` entries and
//! carries a cheap hermiticity hint so that routines restricted to
//! Hermitian input (spectral exponentials, eigendecomposition) can verify
//! their preconditions without callers re-checking.
//!
//! Two matrix-exponential routes are provided and cross-checked in tests:
//! a spectral path for Hermitian generators ([`Operator::matexp_unitary`])
//! and Padé scaling-and-squaring for arbitrary complex matrices
//! ([`Operator::expm`]).

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Tolerance for the relative hermiticity check `max|A−A†| ≤ tol·max|A|`.
const HERMITICITY_RTOL: f64 = 1e-12;

/// A dense complex square matrix with a hermiticity hint.
#[derive(Debug, Clone)]
pub struct Operator {
    mat: Array2<C64>,
    hermitian_hint: bool,
}

impl PartialEq for Operator {
    /// Entrywise matrix equality; the hermiticity hint is a cache, not
    /// part of the operator's identity.
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl Operator {
    /// Wraps a square matrix, detecting hermiticity automatically.
    pub fn new(mat: Array2<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}×{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let hint = hermiticity_deviation(&mat) <= HERMITICITY_RTOL * max_abs_of(&mat).max(1e-300);
        Ok(Self { mat, hermitian_hint: hint })
    }

    /// Zero operator of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        Self { mat: Array2::zeros((dim, dim)), hermitian_hint: true }
    }

    /// Identity operator of the given dimension.
    pub fn identity(dim: usize) -> Self {
        let mut mat = Array2::zeros((dim, dim));
        for i in 0..dim {
            mat[(i, i)] = C64::new(1.0, 0.0);
        }
        Self { mat, hermitian_hint: true }
    }

    /// Diagonal operator from real entries.
    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut mat = Array2::zeros((diag.len(), diag.len()));
        for (i, &d) in diag.iter().enumerate() {
            mat[(i, i)] = C64::new(d, 0.0);
        }
        Self { mat, hermitian_hint: true }
    }

    /// Diagonal operator from complex entries.
    pub fn from_complex_diag(diag: &[C64]) -> Self {
        let mut mat = Array2::zeros((diag.len(), diag.len()));
        let mut herm = true;
        for (i, &d) in diag.iter().enumerate() {
            mat[(i, i)] = d;
            herm &= d.im.abs() <= HERMITICITY_RTOL * d.norm().max(1e-300);
        }
        Self { mat, hermitian_hint: herm }
    }

    /// Rank-one operator |a⟩⟨b| from two state vectors.
    pub fn outer(a: &Array1<C64>, b: &Array1<C64>) -> Self {
        let n = a.len();
        let mut mat = Array2::zeros((n, b.len()));
        for i in 0..n {
            for j in 0..b.len() {
                mat[(i, j)] = a[i] * b[j].conj();
            }
        }
        // outer products are square only if dims agree; callers use them as such
        Self { hermitian_hint: false, mat }
    }

    /// Matrix dimension (row count).
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Borrow the underlying matrix.
    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    /// Consume into the underlying matrix.
    pub fn into_matrix(self) -> Array2<C64> {
        self.mat
    }

    /// Entry access.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    /// Whether the hermiticity hint is set (input verified at build time).
    pub fn is_hermitian(&self) -> bool {
        self.hermitian_hint
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mat = self.mat.t().mapv(|z| z.conj());
        Self { mat, hermitian_hint: self.hermitian_hint }
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        Self { mat: self.mat.dot(&rhs.mat), hermitian_hint: false }
    }

    /// Scaled sum `self + c·rhs`.
    pub fn add_scaled(&self, c: C64, rhs: &Self) -> Self {
        let mat = &self.mat + &rhs.mat.mapv(|z| c * z);
        Self::reclassify(mat)
    }

    /// Scalar multiple.
    pub fn scale(&self, c: C64) -> Self {
        Self::reclassify(self.mat.mapv(|z| c * z))
    }

    /// Commutator `[self, rhs]`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        let mat = self.mat.dot(&rhs.mat) - rhs.mat.dot(&self.mat);
        Self::reclassify(mat)
    }

    /// Trace.
    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        max_abs_of(&self.mat)
    }

    /// Tensor product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let mat = ndarray::linalg::kron(&self.mat, &rhs.mat);
        Self { mat, hermitian_hint: self.hermitian_hint && rhs.hermitian_hint }
    }

    /// Apply to a state vector: `self · ψ`.
    pub fn apply(&self, psi: &Array1<C64>) -> Array1<C64> {
        self.mat.dot(psi)
    }

    /// Largest deviation from hermiticity, `max |A − A†|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.mat)
    }

    fn require_hermitian(&self) -> Result<()> {
        let dev = self.hermiticity_deviation();
        if dev > HERMITICITY_RTOL * self.max_abs().max(1e-300) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(())
    }

    fn reclassify(mat: Array2<C64>) -> Self {
        let hint = hermiticity_deviation(&mat) <= HERMITICITY_RTOL * max_abs_of(&mat).max(1e-300);
        Self { mat, hermitian_hint: hint }
    }

    /// Unitary propagator `U = exp(−i 2π H t)` for a Hermitian generator
    /// `H` in GHz and time `t` in ns, computed through the spectral
    /// decomposition.
    ///
    /// Rejects non-Hermitian input; use [`Operator::expm`] for general
    /// matrices.
    pub fn matexp_unitary(&self, t_ns: f64) -> Result<Self> {
        self.require_hermitian()?;
        let (vals, vecs) = self.eigendecompose()?;
        let phases: Vec<C64> = vals
            .iter()
            .map(|&l| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * l * t_ns))
            .collect();
        let d = Operator::from_complex_diag(&phases);
        Ok(vecs.mul(&d).mul(&vecs.dagger()))
    }

    /// General matrix exponential `exp(self)` by Padé scaling-and-squaring.
    ///
    /// Works for arbitrary complex matrices; for Hermitian generators it
    /// agrees with the spectral path to ~1e−12 and serves as the
    /// independent cross-check route.
    pub fn expm(&self) -> Self {
        let mat = expm_pade(&self.mat);
        Self { mat, hermitian_hint: false }
    }

    /// Eigendecomposition of a Hermitian operator.
    ///
    /// Returns eigenvalues in ascending order and the unitary whose k-th
    /// column is the k-th eigenvector, so `H = V diag(λ) V†`.
    pub fn eigendecompose(&self) -> Result<(Vec<f64>, Operator)> {
        self.require_hermitian()?;
        let n = self.dim();
        let na = ndarray_to_na(&self.mat);
        // symmetric/hermitian eigensolver; nalgebra does not sort, so order
        // ascending ourselves and permute eigenvector columns to match
        let eig = na.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let mut vals = Vec::with_capacity(n);
        let mut vecs = Array2::<C64>::zeros((n, n));
        for (col, &k) in order.iter().enumerate() {
            vals.push(eig.eigenvalues[k]);
            for row in 0..n {
                vecs[(row, col)] = eig.eigenvectors[(row, k)];
            }
        }
        Ok((vals, Operator { mat: vecs, hermitian_hint: false }))
    }
}

impl std::ops::Add<&Operator> for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        let mat = &self.mat + &rhs.mat;
        Operator { mat, hermitian_hint: self.hermitian_hint && rhs.hermitian_hint }
    }
}

impl std::ops::Sub<&Operator> for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        let mat = &self.mat - &rhs.mat;
        Operator { mat, hermitian_hint: self.hermitian_hint && rhs.hermitian_hint }
    }
}

impl std::ops::Mul<&Operator> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator::mul(self, rhs)
    }
}

impl std::ops::Mul<&Operator> for f64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        rhs.scale(C64::new(self, 0.0))
    }
}

fn max_abs_of(mat: &Array2<C64>) -> f64 {
    mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermiticity_deviation(mat: &Array2<C64>) -> f64 {
    let n = mat.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
        }
    }
    dev
}

fn ndarray_to_na(mat: &Array2<C64>) -> nalgebra::DMatrix<C64> {
    let n = mat.nrows();
    nalgebra::DMatrix::from_fn(n, mat.ncols(), |i, j| mat[(i, j)])
}

fn na_to_ndarray(mat: &nalgebra::DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((mat.nrows(), mat.ncols()), |(i, j)| mat[(i, j)])
}

/// Padé(13) scaling-and-squaring matrix exponential on arbitrary complex
/// input (Higham's method with the standard degree-13 coefficients).
fn expm_pade(a: &Array2<C64>) -> Array2<C64> {
    const PADE13: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    // 1-norm estimate for scaling
    let norm1: f64 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    // theta_13 ≈ 5.37; choose s with ||A/2^s|| ≤ theta
    let s = if norm1 > 5.371_920_351_148_152 {
        ((norm1 / 5.371_920_351_148_152).log2().ceil() as i32).max(0)
    } else {
        0
    };
    let scale = C64::new((0.5f64).powi(s), 0.0);
    let a1 = ndarray_to_na(a).map(|z| z * scale);

    let id = nalgebra::DMatrix::<C64>::identity(n, n);
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let c = |k: usize| C64::new(PADE13[k], 0.0);
    let u_inner = &a6 * (&a6 * c(13) + &a4 * c(11) + &a2 * c(9))
        + &a6 * c(7)
        + &a4 * c(5)
        + &a2 * c(3)
        + &id * c(1);
    let u = &a1 * u_inner;
    let v = &a6 * (&a6 * c(12) + &a4 * c(10) + &a2 * c(8))
        + &a6 * c(6)
        + &a4 * c(4)
        + &a2 * c(2)
        + &id * c(0);

    // (V − U) X = (V + U)
    let vmu = &v - &u;
    let vpu = &v + &u;
    let mut x = vmu
        .lu()
        .solve(&vpu)
        .expect("Padé denominator is singular; input matrix is pathological");
    for _ in 0..s {
        x = &x * &x;
    }
    na_to_ndarray(&x)
}
