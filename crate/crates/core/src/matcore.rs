//! Small dense complex linear algebra.
//!
//! Every matrix in this crate is at most 8x8 (in practice 2x2 or 4x4), so
//! the routines here favour accuracy and simplicity over asymptotic speed:
//! scaling-and-squaring Taylor exponential, closed-form 2x2 eigenpairs,
//! explicitly shifted QR for larger general matrices and cyclic Jacobi for
//! Hermitian ones.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Eigenvector matrices with a condition number above this are flagged defective.
pub const DEFECTIVE_CONDITION: f64 = 1e8;

/// Eigenvalues at or below this are rejected by [`herm_funct`].
pub const POSITIVITY_THRESHOLD: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-10;
const TAYLOR_ORDER: u32 = 13;
const MAX_DIM: usize = 8;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = re(1.0);
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from rows; panics on ragged input (intended for literals).
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), dim, "matrix rows must have length {dim}");
            data.extend_from_slice(r);
        }
        Self { dim, data }
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_columns(cols: &[ComplexVector]) -> Result<Self> {
        let dim = cols.len();
        let mut m = Self::zeros(dim);
        for (j, col) in cols.iter().enumerate() {
            if col.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: col.dim(),
                });
            }
            for i in 0..dim {
                m[(i, j)] = col[i];
            }
        }
        Ok(m)
    }

    pub fn pauli_x() -> Self {
        Self::from_rows(&[[re(0.0), re(1.0)], [re(1.0), re(0.0)]])
    }

    pub fn pauli_y() -> Self {
        Self::from_rows(&[[re(0.0), -I], [I, re(0.0)]])
    }

    pub fn pauli_z() -> Self {
        Self::from_rows(&[[re(1.0), re(0.0)], [re(0.0), re(-1.0)]])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        ComplexVector::new((0..self.dim).map(|i| self[(i, j)]).collect())
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, k: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * k).collect(),
        }
    }

    pub fn scale_re(&self, k: f64) -> Self {
        self.scale(re(k))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.distance(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Kronecker product `self ⊗ other`; `self` indexes the outer (first) factor.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(self.dim, v.dim(), "matrix-vector dimension mismatch");
        let n = self.dim;
        ComplexVector::new((0..n).map(|i| (0..n).map(|j| self[(i, j)] * v[j]).sum()).collect())
    }

    /// Hermitian part `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_re(0.5)
    }

    pub fn determinant(&self) -> C64 {
        lu_solve(self, None).map(|(det, _)| det).unwrap_or(re(0.0))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:>+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_re(-1.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

/// Complex state vector (kets).
#[derive(Clone, PartialEq)]
pub struct ComplexVector {
    amps: Vec<C64>,
}

impl ComplexVector {
    pub fn new(amps: Vec<C64>) -> Self {
        assert!(!amps.is_empty(), "vector dimension must be positive");
        Self { amps }
    }

    pub fn from_re(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&x| re(x)).collect())
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut amps = vec![re(0.0); dim];
        amps[index] = re(1.0);
        Self { amps }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() < tol
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::NotNormalized {
                norm_sqr: self.norm_sqr(),
            });
        }
        Ok(self.scale(re(1.0 / n)))
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim(), other.dim());
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `⟨self|m|self⟩`.
    pub fn expectation(&self, m: &ComplexMatrix) -> C64 {
        self.inner(&m.mul_vec(self))
    }

    pub fn scale(&self, k: C64) -> Self {
        Self::new(self.amps.iter().map(|a| a * k).collect())
    }

    /// `|self⟩⟨other|`.
    pub fn outer(&self, other: &Self) -> ComplexMatrix {
        let n = self.dim();
        assert_eq!(n, other.dim());
        let mut m = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.amps[i] * other.amps[j].conj();
            }
        }
        m
    }

    pub fn projector(&self) -> ComplexMatrix {
        self.outer(self)
    }

    /// Tensor product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Self::new(amps)
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl Index<usize> for ComplexVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.amps[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.amps[i]
    }
}

impl Add for &ComplexVector {
    type Output = ComplexVector;
    fn add(self, rhs: &ComplexVector) -> ComplexVector {
        ComplexVector::new(self.amps.iter().zip(&rhs.amps).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &ComplexVector {
    type Output = ComplexVector;
    fn sub(self, rhs: &ComplexVector) -> ComplexVector {
        ComplexVector::new(self.amps.iter().zip(&rhs.amps).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Debug for ComplexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexVector[")?;
        for z in &self.amps {
            write!(f, " {:+.6e}{:+.6e}i", z.re, z.im)?;
        }
        write!(f, " ]")
    }
}

fn check_input(a: &ComplexMatrix) -> Result<()> {
    if a.dim() > MAX_DIM {
        return Err(Error::DimensionMismatch {
            expected: MAX_DIM,
            found: a.dim(),
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite { stage: "input".into() });
    }
    Ok(())
}

/// Matrix exponential `e^A`.
///
/// Scales `A` by `2^-k` so that its 1-norm is at most 0.5, sums the
/// order-13 Taylor series (truncation below 1e-15 relative at that norm)
/// and squares back `k` times. Defective inputs need no special handling.
pub fn mat_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_input(a)?;
    let n = a.dim();
    let norm = a.norm1();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let x = a.scale_re(0.5f64.powi(squarings));

    let id = ComplexMatrix::identity(n);
    let mut acc = id.clone();
    for j in (1..=TAYLOR_ORDER).rev() {
        acc = &id + &(&x * &acc).scale_re(1.0 / j as f64);
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite {
            stage: "taylor series".into(),
        });
    }
    for step in 0..squarings {
        acc = &acc * &acc;
        if !acc.is_finite() {
            return Err(Error::NonFinite {
                stage: format!("squaring step {} of {}", step + 1, squarings),
            });
        }
    }
    Ok(acc)
}

/// Gaussian elimination with partial pivoting. Returns the determinant and,
/// when `rhs` is given, the solution `A X = rhs` (or the inverse when `rhs`
/// is the identity).
fn lu_solve(a: &ComplexMatrix, rhs: Option<&ComplexMatrix>) -> Option<(C64, ComplexMatrix)> {
    let n = a.dim();
    let mut m = a.clone();
    let mut x = rhs.cloned().unwrap_or_else(|| ComplexMatrix::identity(n));
    let mut det = re(1.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[(p, col)].norm().total_cmp(&m[(q, col)].norm()))
            .unwrap();
        if m[(pivot, col)].norm() == 0.0 {
            return Some((re(0.0), x));
        }
        if pivot != col {
            for j in 0..n {
                m.data.swap(pivot * n + j, col * n + j);
                x.data.swap(pivot * n + j, col * n + j);
            }
            det = -det;
        }
        let p = m[(col, col)];
        det *= p;
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[(r, col)] / p;
            if f == re(0.0) {
                continue;
            }
            for j in 0..n {
                let mc = m[(col, j)];
                let xc = x[(col, j)];
                m[(r, j)] -= f * mc;
                x[(r, j)] -= f * xc;
            }
        }
    }
    for r in 0..n {
        let p = m[(r, r)];
        for j in 0..n {
            x[(r, j)] /= p;
        }
    }
    Some((det, x))
}

/// Inverse of a non-singular matrix.
pub fn mat_inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_input(a)?;
    let n = a.dim();
    let (det, inv) = lu_solve(a, None).expect("square input");
    let scale = a.frobenius_norm().powi(n as i32);
    if !(det.norm() > 1e-14 * scale) || !inv.is_finite() {
        return Err(Error::Singular { det: det.norm() });
    }
    Ok(inv)
}

/// Eigenvalues with right eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Sorted ascending by real part, then imaginary part.
    pub eigenvalues: Vec<C64>,
    /// Unit-norm eigenvectors as columns, in the order of `eigenvalues`.
    pub right_eigenvectors: ComplexMatrix,
    /// 2-norm condition number of the eigenvector matrix.
    pub condition: f64,
    pub defective: bool,
}

impl EigenDecomposition {
    pub fn eigenvector(&self, k: usize) -> ComplexVector {
        self.right_eigenvectors.column(k)
    }

    /// `V diag(λ) V⁻¹`.
    pub fn reconstruct(&self) -> Result<ComplexMatrix> {
        let v = &self.right_eigenvectors;
        let vinv = mat_inverse(v)?;
        Ok(&(v * &ComplexMatrix::from_diag(&self.eigenvalues)) * &vinv)
    }

    /// Largest pairwise eigenvalue distance (`|λ₊ − λ₋|` in two dimensions).
    pub fn spread(&self) -> f64 {
        let ev = &self.eigenvalues;
        let mut best = 0.0f64;
        for i in 0..ev.len() {
            for j in i + 1..ev.len() {
                best = best.max((ev[i] - ev[j]).norm());
            }
        }
        best
    }
}

fn cmp_eigen(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Eigendecomposition of a general complex matrix.
///
/// 2x2 inputs use the closed-form quadratic; larger ones go through a
/// complex Schur form computed by explicitly shifted QR on the Hessenberg
/// reduction. Defective (or nearly defective) inputs are returned with
/// `defective = true` rather than as an error.
pub fn eig_decompose(a: &ComplexMatrix) -> Result<EigenDecomposition> {
    check_input(a)?;
    let (values, vectors) = match a.dim() {
        1 => (vec![a[(0, 0)]], vec![ComplexVector::basis(1, 0)]),
        2 => eig_2x2(a),
        _ => eig_schur(a)?,
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| cmp_eigen(&values[i], &values[j]));
    let eigenvalues: Vec<C64> = order.iter().map(|&i| values[i]).collect();
    let cols: Vec<ComplexVector> = order.iter().map(|&i| vectors[i].clone()).collect();
    let right_eigenvectors = ComplexMatrix::from_columns(&cols)?;
    let condition = condition_number(&right_eigenvectors);
    Ok(EigenDecomposition {
        eigenvalues,
        right_eigenvectors,
        condition,
        defective: !(condition <= DEFECTIVE_CONDITION),
    })
}

fn eig_2x2(m: &ComplexMatrix) -> (Vec<C64>, Vec<ComplexVector>) {
    let (a, b, cc, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * cc;
    let disc = (half_tr * half_tr - det).sqrt();
    // Pick the larger-magnitude root first and get the other from the
    // product of roots to avoid cancellation.
    let l1 = if (half_tr + disc).norm() >= (half_tr - disc).norm() {
        half_tr + disc
    } else {
        half_tr - disc
    };
    let l2 = if l1.norm() > 0.0 { det / l1 } else { half_tr - disc };
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let vec_for = |lam: C64, fallback: usize| {
        let v1 = ComplexVector::new(vec![b, lam - a]);
        let v2 = ComplexVector::new(vec![lam - d, cc]);
        let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
        if v.norm() <= 1e-14 * scale {
            ComplexVector::basis(2, fallback)
        } else {
            v.normalized().expect("nonzero vector")
        }
    };
    let (v1, v2) = (vec_for(l1, 0), vec_for(l2, 1));
    (vec![l1, l2], vec![v1, v2])
}

/// Complex Givens rotation `G = [[c, s], [-s̄, c]]` with `G (x, y)ᵀ = (r, 0)ᵀ`.
fn givens(x: C64, y: C64) -> (f64, C64) {
    let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
    if r == 0.0 {
        return (1.0, re(0.0));
    }
    if x.norm() == 0.0 {
        return (0.0, y.conj() / y.norm());
    }
    let phase = x / x.norm();
    (x.norm() / r, phase * y.conj() / r)
}

fn rotate_rows(m: &mut ComplexMatrix, p: usize, q: usize, cs: f64, sn: C64, cols: std::ops::Range<usize>) {
    for j in cols {
        let (a, b) = (m[(p, j)], m[(q, j)]);
        m[(p, j)] = a * cs + sn * b;
        m[(q, j)] = -sn.conj() * a + b * cs;
    }
}

/// Multiplies columns `p, q` on the right by `G†`.
fn rotate_cols(m: &mut ComplexMatrix, p: usize, q: usize, cs: f64, sn: C64, rows: std::ops::Range<usize>) {
    for i in rows {
        let (a, b) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = a * cs + b * sn.conj();
        m[(i, q)] = -a * sn + b * cs;
    }
}

/// Unitary Hessenberg reduction via Givens rotations; returns (H, Q) with A = Q H Q†.
fn hessenberg(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.dim();
    let mut h = a.clone();
    let mut q = ComplexMatrix::identity(n);
    for col in 0..n.saturating_sub(2) {
        for row in (col + 2..n).rev() {
            let (cs, sn) = givens(h[(row - 1, col)], h[(row, col)]);
            rotate_rows(&mut h, row - 1, row, cs, sn, 0..n);
            rotate_cols(&mut h, row - 1, row, cs, sn, 0..n);
            rotate_cols(&mut q, row - 1, row, cs, sn, 0..n);
            h[(row, col)] = re(0.0);
        }
    }
    (h, q)
}

fn eig_schur(a: &ComplexMatrix) -> Result<(Vec<C64>, Vec<ComplexVector>)> {
    let n = a.dim();
    let (mut t, mut q) = hessenberg(a);
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let off = t[(l, l - 1)].norm();
            let diag = t[(l, l)].norm() + t[(l - 1, l - 1)].norm();
            if off <= eps * diag.max(f64::MIN_POSITIVE) || off < f64::MIN_POSITIVE {
                t[(l, l - 1)] = re(0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 100 * n {
            return Err(Error::NonFinite {
                stage: "QR iteration did not converge".into(),
            });
        }
        // Wilkinson shift from the trailing 2x2 block.
        let (p, r) = (hi - 1, hi);
        let (ta, tb, tc, td) = (t[(p, p)], t[(p, r)], t[(r, p)], t[(r, r)]);
        let half = (ta - td) * 0.5;
        let disc = (half * half + tb * tc).sqrt();
        let mut mu = if (half + disc).norm() >= (half - disc).norm() {
            td - tb * tc / (half + disc)
        } else {
            td - tb * tc / (half - disc)
        };
        if !mu.is_finite() {
            mu = td;
        }
        if iter.is_multiple_of(10) {
            // exceptional shift to break cycles
            mu = td + re(t[(r, p)].norm());
        }
        for k in l..=hi {
            t[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (cs, sn) = givens(t[(k, k)], t[(k + 1, k)]);
            rotate_rows(&mut t, k, k + 1, cs, sn, k..n);
            t[(k + 1, k)] = re(0.0);
            rots.push((k, cs, sn));
        }
        // Rows above the window take the column rotations too, so the
        // full matrix stays a unitary similarity of the input.
        for &(k, cs, sn) in &rots {
            rotate_cols(&mut t, k, k + 1, cs, sn, 0..(k + 2).min(hi + 1));
            rotate_cols(&mut q, k, k + 1, cs, sn, 0..n);
        }
        for k in l..=hi {
            t[(k, k)] += mu;
        }
    }

    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let tnorm = t.max_abs().max(f64::MIN_POSITIVE);
    let small = eps * tnorm;
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        let lam = values[k];
        let mut y = vec![re(0.0); n];
        y[k] = re(1.0);
        for j in (0..k).rev() {
            let s: C64 = (j + 1..=k).map(|m| t[(j, m)] * y[m]).sum();
            let mut d = t[(j, j)] - lam;
            if d.norm() < small {
                d = re(small);
            }
            y[j] = -s / d;
        }
        let v = q.mul_vec(&ComplexVector::new(y));
        vectors.push(v.normalized()?);
    }
    Ok((values, vectors))
}

/// 2-norm condition number from the singular values of `v`.
fn condition_number(v: &ComplexMatrix) -> f64 {
    let gram = &v.adjoint() * v;
    match hermitian_eigen(&gram) {
        Ok((vals, _)) => {
            let max = vals.iter().cloned().fold(f64::MIN, f64::max);
            let min = vals.iter().cloned().fold(f64::MAX, f64::min);
            if min <= 0.0 {
                f64::INFINITY
            } else {
                (max / min).sqrt()
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi.
///
/// Returns ascending real eigenvalues and the unitary matrix whose columns
/// are the matching eigenvectors.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    check_input(a)?;
    let scale = a.max_abs().max(1.0);
    let dev = a.hermitian_deviation();
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let n = a.dim();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let norm = m.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * norm {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let g = m[(p, q)];
                let r = g.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = g / r;
                let theta = (m[(q, q)].re - m[(p, p)].re) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                // U = D·P with D = diag(.., e^{-i arg g} at q, ..), P the real Jacobi rotation.
                let ph = phase.conj();
                let (u_pp, u_pq, u_qp, u_qq) = (re(cs), re(sn), -ph * sn, ph * cs);
                for i in 0..n {
                    let (x, y) = (m[(i, p)], m[(i, q)]);
                    m[(i, p)] = x * u_pp + y * u_qp;
                    m[(i, q)] = x * u_pq + y * u_qq;
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = x * u_pp + y * u_qp;
                    v[(i, q)] = x * u_pq + y * u_qq;
                }
                for j in 0..n {
                    let (x, y) = (m[(p, j)], m[(q, j)]);
                    m[(p, j)] = u_pp.conj() * x + u_qp.conj() * y;
                    m[(q, j)] = u_pq.conj() * x + u_qq.conj() * y;
                }
                m[(p, q)] = re(0.0);
                m[(q, p)] = re(0.0);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let cols: Vec<ComplexVector> = order.iter().map(|&i| v.column(i)).collect();
    Ok((values, ComplexMatrix::from_columns(&cols)?))
}

/// Spectral functions accepted by [`herm_funct`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralFunction {
    Sqrt,
    InvSqrt,
    Inverse,
}

impl SpectralFunction {
    fn apply(self, x: f64) -> f64 {
        match self {
            SpectralFunction::Sqrt => x.sqrt(),
            SpectralFunction::InvSqrt => 1.0 / x.sqrt(),
            SpectralFunction::Inverse => 1.0 / x,
        }
    }
}

/// Applies `f` to the spectrum of a positive-definite Hermitian matrix.
pub fn herm_funct(a: &ComplexMatrix, f: SpectralFunction) -> Result<ComplexMatrix> {
    let (vals, v) = hermitian_eigen(a)?;
    if let Some(&bad) = vals.iter().find(|&&x| !(x > POSITIVITY_THRESHOLD)) {
        return Err(Error::NotPositive { eigenvalue: bad });
    }
    let diag: Vec<C64> = vals.iter().map(|&x| re(f.apply(x))).collect();
    let out = &(&v * &ComplexMatrix::from_diag(&diag)) * &v.adjoint();
    Ok(out.hermitian_part())
}

/// Applies an arbitrary real function to the spectrum of a Hermitian matrix.
pub fn herm_map(a: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let (vals, v) = hermitian_eigen(a)?;
    let diag: Vec<C64> = vals.iter().map(|&x| re(f(x))).collect();
    let out = &(&v * &ComplexMatrix::from_diag(&diag)) * &v.adjoint();
    if !out.is_finite() {
        return Err(Error::NonFinite {
            stage: "spectral map".into(),
        });
    }
    Ok(out.hermitian_part())
}
