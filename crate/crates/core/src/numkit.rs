//! Dense complex linear-algebra kernels.
//!
//! Everything here works on small square matrices (the dilated problem is
//! 4x4), so the routines favour accuracy and simplicity over asymptotic cost.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Complex column vector (state vectors).
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Dense square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self(DMatrix::identity(dim, dim))
    }

    /// Builds a matrix from row-major entries; panics unless `entries.len()` is a
    /// perfect square.
    pub fn from_row_slice(entries: &[C64]) -> Self {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        assert!(dim >= 1 && dim * dim == entries.len(), "entry count must be dim^2");
        Self(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self(DMatrix::from_fn(dim, dim, f))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { ZERO })
    }

    /// Wraps an nalgebra matrix; panics if it is not square.
    pub fn from_inner(m: DMatrix<C64>) -> Self {
        assert!(m.is_square() && m.nrows() >= 1, "matrix must be square and non-empty");
        Self(m)
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Row-major copy of the entries.
    pub fn entries(&self) -> Vec<C64> {
        let n = self.dim();
        (0..n * n).map(|k| self.0[(k / n, k % n)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// max |M - M†| over entries.
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    /// (M + M†)/2
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    pub fn commutator(&self, other: &ComplexMatrix) -> Self {
        self * other - other * self
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(&self.0 * C64::new(factor, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        self.0
            .column_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Spectral norm (largest singular value).
    pub fn opnorm(&self) -> f64 {
        self.singular_values()[0]
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.0.clone().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn try_inverse(&self) -> Option<Self> {
        self.0.clone().try_inverse().map(Self)
    }

    pub fn mul_vec(&self, v: &CVector) -> CVector {
        &self.0 * v
    }

    /// Conjugation `U† M U`.
    pub fn congruence(&self, u: &ComplexMatrix) -> Self {
        Self(u.0.adjoint() * &self.0 * &u.0)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(&self.0 $op &rhs.0)
            }
        }
        impl $trait<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(self.0 $op rhs.0)
            }
        }
        impl $trait<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(self.0 $op &rhs.0)
            }
        }
        impl $trait<ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix(&self.0 $op rhs.0)
            }
        }
    };
}

impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);
impl_binop!(Mul, mul, *);

impl Mul<C64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: C64) -> ComplexMatrix {
        ComplexMatrix(&self.0 * rhs)
    }
}

impl Mul<C64> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: C64) -> ComplexMatrix {
        ComplexMatrix(self.0 * rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-self.0)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 += &rhs.0;
    }
}

/// The Pauli matrices in the order (I, x, y, z).
pub fn pauli(index: usize) -> ComplexMatrix {
    let e = match index {
        0 => [ONE, ZERO, ZERO, ONE],
        1 => [ZERO, ONE, ONE, ZERO],
        2 => [ZERO, -I, I, ZERO],
        3 => [ONE, ZERO, ZERO, -ONE],
        _ => panic!("Pauli index must be 0..4"),
    };
    ComplexMatrix::from_row_slice(&e)
}

/// Uniform time discretization with `n_nodes` nodes spanning `[t0, t1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    n_nodes: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_nodes: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs finite t1 > t0, got [{t0}, {t1}]"
            )));
        }
        if n_nodes < 2 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs at least 2 nodes, got {n_nodes}"
            )));
        }
        Ok(Self { t0, t1, n_nodes })
    }

    /// Grid on `[t0, t1]` with spacing as close as possible to `dt` (never coarser).
    pub fn with_step(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let steps = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(t0, t1, steps + 1)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_steps(&self) -> usize {
        self.n_nodes - 1
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps() {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes).map(|k| self.time(k))
    }

    /// The grid with every step split into `substeps` equal parts.
    pub fn refine(&self, substeps: usize) -> Self {
        let substeps = substeps.max(1);
        Self { t0: self.t0, t1: self.t1, n_nodes: self.n_steps() * substeps + 1 }
    }

    /// Index of the node nearest to `t` (clamped to the grid).
    pub fn nearest_index(&self, t: f64) -> usize {
        let k = ((t - self.t0) / self.dt()).round();
        (k.max(0.0) as usize).min(self.n_steps())
    }
}

/// A sequence of operators sampled on a time grid.
#[derive(Clone, Debug)]
pub struct OperatorSeries {
    pub grid: TimeGrid,
    pub ops: Vec<ComplexMatrix>,
}

impl OperatorSeries {
    pub fn new(grid: TimeGrid, ops: Vec<ComplexMatrix>) -> Result<Self> {
        if ops.len() != grid.n_nodes() {
            return Err(Error::DimensionMismatch { expected: grid.n_nodes(), found: ops.len() });
        }
        Ok(Self { grid, ops })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn get(&self, k: usize) -> &ComplexMatrix {
        &self.ops[k]
    }

    pub fn last(&self) -> &ComplexMatrix {
        self.ops.last().expect("series is never empty")
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &ComplexMatrix)> {
        self.grid.times().zip(self.ops.iter())
    }

    /// Linear interpolation between the nodes bracketing `t`.
    pub fn interpolate(&self, t: f64) -> ComplexMatrix {
        let dt = self.grid.dt();
        let x = ((t - self.grid.t0()) / dt).clamp(0.0, self.grid.n_steps() as f64);
        let k = (x.floor() as usize).min(self.grid.n_steps() - 1);
        let f = x - k as f64;
        self.ops[k].scale(1.0 - f) + self.ops[k + 1].scale(f)
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermEig {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, ordered like `values`.
    pub vectors: ComplexMatrix,
}

pub fn herm_eig(m: &ComplexMatrix, tol: f64) -> Result<HermEig> {
    let residual = m.hermitian_residual();
    if residual > tol {
        return Err(Error::NotHermitian { residual, tol });
    }
    let eig = m.hermitian_part().0.symmetric_eigen();
    let n = m.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermEig { values, vectors })
}

/// Matrix exponential by scaling and squaring around a diagonal [6/6] Padé
/// approximant. The input need not be normal.
pub fn expm(a: &ComplexMatrix) -> ComplexMatrix {
    const DEGREE: usize = 6;
    const THETA: f64 = 0.5;

    let n = a.dim();
    let norm = a.norm_1();
    if norm == 0.0 {
        return ComplexMatrix::identity(n);
    }
    let squarings = if norm > THETA { (norm / THETA).log2().ceil() as i32 } else { 0 };
    let scaled = &a.0 * C64::new(2f64.powi(-squarings), 0.0);

    let mut coeff = 1.0;
    let mut power = DMatrix::<C64>::identity(n, n);
    let mut even = DMatrix::<C64>::identity(n, n);
    let mut odd = DMatrix::<C64>::zeros(n, n);
    for k in 0..DEGREE {
        coeff *= (DEGREE - k) as f64 / ((k + 1) * (2 * DEGREE - k)) as f64;
        power = &power * &scaled;
        if (k + 1) % 2 == 0 {
            even += &power * C64::new(coeff, 0.0);
        } else {
            odd += &power * C64::new(coeff, 0.0);
        }
    }
    let numer = &even + &odd;
    let denom = &even - &odd;
    let mut result = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for scaled norm <= 0.5");
    for _ in 0..squarings {
        result = &result * &result;
    }
    ComplexMatrix(result)
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Eigenvalues in `[-tol, 0)` are clamped to zero.
pub fn sqrtm_psd(m: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let herm_tol = tol.max(1e-12 * m.max_abs());
    let eig = herm_eig(m, herm_tol)?;
    let roots = eig
        .values
        .iter()
        .map(|&lam| {
            if lam < -tol {
                Err(Error::NotPositive { eigenvalue: lam })
            } else {
                Ok(lam.max(0.0).sqrt())
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(spectral_compose(&eig.vectors, &roots))
}

/// `V diag(d) V†`
pub fn spectral_compose(vectors: &ComplexMatrix, diag: &[f64]) -> ComplexMatrix {
    let scaled = ComplexMatrix::from_fn(vectors.dim(), |i, j| vectors[(i, j)] * diag[j]);
    &scaled * &vectors.adjoint()
}

/// Time-ordered propagator `T exp(∫ G dt)` sampled on `grid`, using one
/// midpoint exponential per step: `U(t+dt) = expm(dt G(t + dt/2)) U(t)`.
pub fn ordered_propagator<F>(generator: F, grid: &TimeGrid) -> OperatorSeries
where
    F: Fn(f64) -> ComplexMatrix,
{
    ordered_propagator_refined(generator, grid, 1)
}

/// As [`ordered_propagator`], stepping `substeps` times between grid nodes and
/// keeping only the node values.
pub fn ordered_propagator_refined<F>(generator: F, grid: &TimeGrid, substeps: usize) -> OperatorSeries
where
    F: Fn(f64) -> ComplexMatrix,
{
    let fine = grid.refine(substeps);
    let substeps = substeps.max(1);
    let h = fine.dt();
    let dim = generator(grid.t0()).dim();
    let mut u = ComplexMatrix::identity(dim);
    let mut ops = Vec::with_capacity(grid.n_nodes());
    ops.push(u.clone());
    for k in 0..fine.n_steps() {
        let step = expm(&generator(fine.time(k) + 0.5 * h).scale(h));
        u = &step * &u;
        if (k + 1) % substeps == 0 {
            ops.push(u.clone());
        }
    }
    OperatorSeries { grid: *grid, ops }
}

/// Solves `A X + X A = C` for Hermitian positive definite `A` and Hermitian `C`.
pub fn sylvester_hermitian(a: &ComplexMatrix, c: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.dim() != c.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: c.dim() });
    }
    let eig = herm_eig(a, 1e-10 * a.max_abs().max(1.0))?;
    let scale = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let c_tilde = c.congruence(&eig.vectors);
    let x_tilde = sylvester_diagonal(&eig.values, &c_tilde, scale)?;
    Ok(&(&eig.vectors * &x_tilde) * &eig.vectors.adjoint())
}

/// Sylvester solve with `A = diag(values)`: `X_ij = C_ij / (λ_i + λ_j)`.
pub(crate) fn sylvester_diagonal(values: &[f64], c: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    let n = values.len();
    let floor = 1e-14 * scale;
    for i in 0..n {
        for j in 0..n {
            let sum = values[i] + values[j];
            if sum <= floor {
                return Err(Error::SingularPair { sum });
            }
        }
    }
    Ok(ComplexMatrix::from_fn(n, |i, j| c[(i, j)] / (values[i] + values[j])))
}
