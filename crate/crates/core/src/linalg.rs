//! Dense real-matrix kernels for the small block orders that appear in
//! level-structured generators.
//!
//! Everything here is deliberately plain: row-major storage, partial-pivoting
//! LU, and uniformization for the action of a matrix exponential. Block orders
//! are `m1 * m2`, so in practice a few dozen rows at most.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Relative pivot threshold for [`Lu::factor`]: a pivot smaller than
/// `PIVOT_TOL * ‖a‖∞` is reported as singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Poisson tail mass at which the uniformization series is cut.
pub const UNIFORMIZATION_TAIL: f64 = 1e-12;

// Largest Λ·t handled in one uniformization step; keeps e^{-Λt} far from underflow.
const MAX_STEP_RATE_TIME: f64 = 40.0;

/// A dense real matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Square matrix with `diag` on the diagonal.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. All rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s·I`.
    pub fn shift_diagonal(&self, s: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] += s;
        }
        m
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Smallest entry (`+∞` for an empty matrix).
    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// `self · v` for a column vector `v`.
    pub fn mul_vec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.cols, v.len());
        Vector(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = rhs.row(k);
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn add_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] += block[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

/// A real vector. Used both as a row vector (stationary vectors, `v·A`)
/// and as a column vector (`A·v`); the operation names say which.
#[derive(Clone, PartialEq, Default)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn norm1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * s).collect())
    }

    /// Row-vector product `self · a`.
    pub fn mul_mat(&self, a: &Matrix) -> Vector {
        debug_assert_eq!(self.len(), a.rows());
        let mut out = vec![0.0; a.cols()];
        for (i, &x) in self.0.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(a.row(i)) {
                *o += x * v;
            }
        }
        Vector(out)
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Kronecker product of two vectors.
    pub fn kron(&self, other: &Vector) -> Vector {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in &self.0 {
            for b in &other.0 {
                out.push(a * b);
            }
        }
        Vector(out)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vector{:?}", self.0)
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron_product(a: &Matrix, b: &Matrix) -> Matrix {
    let (m, n) = (b.rows, b.cols);
    let mut out = Matrix::zeros(a.rows * m, a.cols * n);
    for p in 0..a.rows {
        for r in 0..a.cols {
            let s = a[(p, r)];
            if s == 0.0 {
                continue;
            }
            for q in 0..m {
                for t in 0..n {
                    out[(p * m + q, r * n + t)] = s * b[(q, t)];
                }
            }
        }
    }
    out
}

/// Kronecker sum `a ⊕ b = a ⊗ I + I ⊗ b`.
pub fn kron_sum(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || !b.is_square() {
        return Err(Error::Dimension(format!(
            "Kronecker sum needs square inputs, got {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let left = kron_product(a, &Matrix::identity(b.rows));
    let right = kron_product(&Matrix::identity(a.rows), b);
    Ok(&left + &right)
}

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "cannot factor a {}x{} matrix",
                a.rows, a.cols
            )));
        }
        if !a.is_finite() {
            return Err(Error::NonFinite("LU input".into()));
        }
        let n = a.rows;
        let threshold = PIVOT_TOL * a.norm_inf();
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold || pivot == 0.0 {
                return Err(Error::SingularMatrix {
                    pivot,
                    column: k,
                    threshold,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv = 1.0 / lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] * inv;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    /// Solves `A·x = b`.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solves `x·A = b` for a row vector `x`.
    pub fn solve_row_vec(&self, b: &[f64]) -> Vec<f64> {
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ w = b, Lᵀ z = w, then x = Pᵀ z.
        let n = self.n;
        let mut w = b.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * w[j];
            }
            w[i] = s / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= self.lu[j * n + i] * w[j];
            }
            w[i] = s;
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = w[k];
        }
        x
    }

    /// Solves `A·X = B`.
    pub fn solve_mat(&self, b: &Matrix) -> Matrix {
        let bt = b.transpose();
        let mut out = Matrix::zeros(b.cols, b.rows);
        for j in 0..b.cols {
            let col = self.solve_vec(bt.row(j));
            out.data[j * b.rows..(j + 1) * b.rows].copy_from_slice(&col);
        }
        out.transpose()
    }

    /// Solves `X·A = B`, i.e. returns `B·A⁻¹`.
    pub fn right_solve_mat(&self, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(b.rows, b.cols);
        for i in 0..b.rows {
            let row = self.solve_row_vec(b.row(i));
            out.data[i * b.cols..(i + 1) * b.cols].copy_from_slice(&row);
        }
        out
    }

    pub fn inverse(&self) -> Matrix {
        self.solve_mat(&Matrix::identity(self.n))
    }
}

/// Solves `a·x = b` by partial-pivoting LU.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, matrix has {}",
            b.rows, a.rows
        )));
    }
    Ok(Lu::factor(a)?.solve_mat(b))
}

/// Solves `a·x = b` for a column vector.
pub fn solve_linear_vec(a: &Matrix, b: &Vector) -> Result<Vector> {
    if a.rows != b.len() {
        return Err(Error::Dimension(format!(
            "right-hand side has {} entries, matrix has {} rows",
            b.len(),
            a.rows
        )));
    }
    Ok(Vector(Lu::factor(a)?.solve_vec(&b.0)))
}

/// `b · a⁻¹`.
pub fn right_divide(b: &Matrix, a: &Matrix) -> Result<Matrix> {
    if a.rows != b.cols {
        return Err(Error::Dimension(format!(
            "cannot right-divide {}x{} by {}x{}",
            b.rows, b.cols, a.rows, a.cols
        )));
    }
    Ok(Lu::factor(a)?.right_solve_mat(b))
}

/// True when the directed graph of nonzero off-diagonal entries of `q` is
/// strongly connected.
pub fn is_irreducible(q: &Matrix) -> bool {
    let n = q.rows;
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { q[(i, j)] } else { q[(j, i)] };
                if j != i && w != 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Stationary probability vector `α` of an irreducible generator: `α·q = 0`,
/// `α·e = 1`. One balance equation is replaced by the normalization row.
pub fn stationary_vector(q: &Matrix) -> Result<Vector> {
    if !q.is_square() {
        return Err(Error::Dimension(format!(
            "generator must be square, got {}x{}",
            q.rows, q.cols
        )));
    }
    let n = q.rows;
    if n == 0 {
        return Err(Error::NotIrreducible("empty generator".into()));
    }
    if !is_irreducible(q) {
        return Err(Error::NotIrreducible(
            "off-diagonal pattern is not strongly connected".into(),
        ));
    }
    let mut a = q.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let lu = Lu::factor(&a).map_err(|e| Error::NotIrreducible(e.to_string()))?;
    let alpha = lu.solve_vec(&rhs);
    if alpha.iter().any(|&v| v < -1e-10) {
        return Err(Error::NotIrreducible(
            "balance equations admit no nonnegative solution".into(),
        ));
    }
    Ok(Vector(alpha.into_iter().map(|v| v.max(0.0)).collect()))
}

/// A linear operator acting on row vectors from the right, `v ↦ v·T`.
/// Lets [`exp_action_op`] run on structured matrices without densifying them.
pub trait RowOperator {
    fn dim(&self) -> usize;
    fn apply_row(&self, v: &[f64]) -> Vec<f64>;
    /// `max |T_ii|`, the uniformization rate.
    fn max_abs_diagonal(&self) -> f64;
}

impl RowOperator for Matrix {
    fn dim(&self) -> usize {
        self.rows
    }

    fn apply_row(&self, v: &[f64]) -> Vec<f64> {
        Vector(v.to_vec()).mul_mat(self).0
    }

    fn max_abs_diagonal(&self) -> f64 {
        self.diagonal().iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Block-tridiagonal square matrix with equal block orders.
#[derive(Clone, Debug)]
pub struct BlockTridiagonal {
    /// `lower[i]` sits at block `(i+1, i)`.
    pub lower: Vec<Matrix>,
    pub diag: Vec<Matrix>,
    /// `upper[i]` sits at block `(i, i+1)`.
    pub upper: Vec<Matrix>,
}

impl BlockTridiagonal {
    pub fn block_order(&self) -> usize {
        self.diag.first().map_or(0, Matrix::rows)
    }

    pub fn levels(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let m = self.block_order();
        let n = self.levels();
        let mut out = Matrix::zeros(n * m, n * m);
        for i in 0..n {
            out.set_block(i * m, i * m, &self.diag[i]);
            if i + 1 < n {
                out.set_block(i * m, (i + 1) * m, &self.upper[i]);
                out.set_block((i + 1) * m, i * m, &self.lower[i]);
            }
        }
        out
    }
}

impl RowOperator for BlockTridiagonal {
    fn dim(&self) -> usize {
        self.levels() * self.block_order()
    }

    fn apply_row(&self, v: &[f64]) -> Vec<f64> {
        let m = self.block_order();
        let n = self.levels();
        let mut out = vec![0.0; n * m];
        let seg = |i: usize| Vector(v[i * m..(i + 1) * m].to_vec());
        for i in 0..n {
            let vi = seg(i);
            let mut acc = vi.mul_mat(&self.diag[i]);
            if i > 0 {
                acc = acc.add(&seg(i - 1).mul_mat(&self.upper[i - 1]));
            }
            if i + 1 < n {
                acc = acc.add(&seg(i + 1).mul_mat(&self.lower[i]));
            }
            out[i * m..(i + 1) * m].copy_from_slice(&acc.0);
        }
        out
    }

    fn max_abs_diagonal(&self) -> f64 {
        self.diag.iter().map(|d| d.max_abs_diagonal()).fold(0.0, f64::max)
    }
}

/// `v · exp(t_mat · t)` by uniformization.
pub fn exp_action(t_mat: &Matrix, v: &Vector, t: f64) -> Result<Vector> {
    if !t_mat.is_square() || t_mat.rows != v.len() {
        return Err(Error::Dimension(format!(
            "exp_action: {}x{} matrix with vector of length {}",
            t_mat.rows,
            t_mat.cols,
            v.len()
        )));
    }
    exp_action_op(t_mat, v, t)
}

/// [`exp_action`] for any [`RowOperator`].
///
/// With `Λ = max|T_ii|` and `P = I + T/Λ`, `v·exp(Tt) = Σ_n Pois(n; Λt)·v·Pⁿ`.
/// The time span is split so each step has `Λ·Δt ≤ 40`; each step's series
/// stops once the accumulated Poisson weight is within
/// [`UNIFORMIZATION_TAIL`] of one.
pub fn exp_action_op<T: RowOperator + ?Sized>(op: &T, v: &Vector, t: f64) -> Result<Vector> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time must be finite and nonnegative, got {t}"
        )));
    }
    let rate = op.max_abs_diagonal();
    if t == 0.0 || rate == 0.0 {
        return Ok(v.clone());
    }
    let steps = ((rate * t) / MAX_STEP_RATE_TIME).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let lt = rate * dt;
    let mut cur = v.0.clone();
    for _ in 0..steps {
        let mut weight = (-lt).exp();
        let mut cumulative = weight;
        let mut term = cur.clone();
        let mut acc: Vec<f64> = term.iter().map(|x| x * weight).collect();
        let mut n = 0usize;
        while 1.0 - cumulative > UNIFORMIZATION_TAIL {
            n += 1;
            let next = op.apply_row(&term);
            // term ← term·P = term + term·T/Λ
            for (t_i, x) in term.iter_mut().zip(&next) {
                *t_i += x / rate;
            }
            weight *= lt / n as f64;
            cumulative += weight;
            for (a, x) in acc.iter_mut().zip(&term) {
                *a += weight * x;
            }
            if n > 10_000 {
                return Err(Error::NonConvergent(
                    "uniformization series did not reach its tail bound".into(),
                ));
            }
        }
        cur = acc;
    }
    Ok(Vector(cur))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.rows == b.rows && a.cols == b.cols && (a - b).max_abs() <= tol
    }

    // Scaling-and-squaring with a Taylor core; independent of uniformization.
    fn expm_reference(a: &Matrix) -> Matrix {
        let norm = a.norm_inf();
        let s = if norm > 0.25 {
            (norm / 0.25).log2().ceil() as i32
        } else {
            0
        };
        let scaled = a.scale(0.5f64.powi(s));
        let n = a.rows();
        let mut result = Matrix::identity(n);
        let mut term = Matrix::identity(n);
        for k in 1..30 {
            term = term.matmul(&scaled).scale(1.0 / k as f64);
            result += &term;
        }
        for _ in 0..s {
            result = result.matmul(&result);
        }
        result
    }

    #[test]
    fn kron_product_small_cases() {
        let x = Matrix::from_rows(&[[3.5]]).unwrap();
        let one = Matrix::from_rows(&[[1.0]]).unwrap();
        assert_eq!(kron_product(&one, &x), x);
        assert_eq!(
            kron_product(&Matrix::identity(2), &Matrix::identity(3)),
            Matrix::identity(6)
        );
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[[2.0]]).unwrap();
        let expect = Matrix::from_rows(&[[0.0, 2.0], [2.0, 0.0]]).unwrap();
        assert_eq!(kron_product(&a, &b), expect);
    }

    #[test]
    fn kron_product_index_rule() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let b = Matrix::from_rows(&[[7.0, 8.0], [9.0, 10.0], [11.0, 12.0]]).unwrap();
        let k = kron_product(&a, &b);
        assert_eq!((k.rows(), k.cols()), (6, 6));
        for p in 0..2 {
            for r in 0..3 {
                for q in 0..3 {
                    for s in 0..2 {
                        assert_eq!(k[(p * 3 + q, r * 2 + s)], a[(p, r)] * b[(q, s)]);
                    }
                }
            }
        }
    }

    #[test]
    fn kron_sum_cases() {
        let x = Matrix::from_rows(&[[2.0]]).unwrap();
        let y = Matrix::from_rows(&[[-5.0]]).unwrap();
        assert_eq!(kron_sum(&x, &y).unwrap(), Matrix::from_rows(&[[-3.0]]).unwrap());
        assert_eq!(
            kron_sum(&Matrix::identity(2), &Matrix::identity(2)).unwrap(),
            Matrix::identity(4).scale(2.0)
        );
        let rect = Matrix::zeros(2, 3);
        assert!(matches!(
            kron_sum(&rect, &Matrix::identity(2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn kron_sum_of_order_two_hidden_blocks() {
        // C2 ⊕ C1 for the order-2 pair: diag entries c2_ii + c1_jj, expanded by hand.
        let c1 = Matrix::from_rows(&[[-10.0, 0.0], [1.0, -1.0]]).unwrap();
        let c2 = Matrix::from_rows(&[[-5.0, 1.0], [2.0, -7.0]]).unwrap();
        let s = kron_sum(&c2, &c1).unwrap();
        assert_eq!(s.diagonal(), vec![-15.0, -6.0, -17.0, -8.0]);
        // Reversing the operands permutes the phase order.
        let swapped = kron_sum(&c1, &c2).unwrap();
        assert_eq!(swapped.diagonal(), vec![-15.0, -17.0, -6.0, -8.0]);
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let b = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(solve_linear(&Matrix::identity(2), &b).unwrap(), b);
        let a = Matrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]).unwrap();
        let x = solve_linear_vec(&a, &Vector(vec![2.0, 4.0])).unwrap();
        assert_eq!(x, Vector(vec![1.0, 1.0]));
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        match Lu::factor(&a) {
            Err(Error::SingularMatrix { column, .. }) => assert_eq!(column, 1),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn solve_random_well_conditioned() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 8;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = rng.gen_range(-1.0..1.0);
            }
            a[(i, i)] += 8.0;
        }
        let x = Matrix::from_vec(n, 1, (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect()).unwrap();
        let b = a.matmul(&x);
        let got = solve_linear(&a, &b).unwrap();
        assert!(approx(&got, &x, 1e-10));
        let residual = (&a.matmul(&got) - &b).max_abs();
        assert!(residual <= 1e-12 * b.max_abs());
    }

    #[test]
    fn right_divide_matches_inverse() {
        let a = Matrix::from_rows(&[[4.0, 1.0, 0.0], [1.0, 5.0, 2.0], [0.0, 2.0, 6.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0, 0.0, 2.0], [0.5, 1.0, -1.0]]).unwrap();
        let x = right_divide(&b, &a).unwrap();
        assert!(approx(&x.matmul(&a), &b, 1e-13));
        let inv = Lu::factor(&a).unwrap().inverse();
        assert!(approx(&a.matmul(&inv), &Matrix::identity(3), 1e-13));
    }

    #[test]
    fn stationary_vectors_of_order_two_maps() {
        let q1 = Matrix::from_rows(&[[-1.0, 1.0], [1.0, -1.0]]).unwrap();
        let a1 = stationary_vector(&q1).unwrap();
        assert!((a1.0[0] - 0.5).abs() < 1e-14 && (a1.0[1] - 0.5).abs() < 1e-14);
        let q2 = Matrix::from_rows(&[[-5.0, 5.0], [4.0, -4.0]]).unwrap();
        let a2 = stationary_vector(&q2).unwrap();
        assert!((a2.0[0] - 4.0 / 9.0).abs() < 1e-14);
        assert!((a2.0[1] - 5.0 / 9.0).abs() < 1e-14);
        assert!(a2.mul_mat(&q2).norm_inf() < 1e-12);
        let zero = Matrix::from_rows(&[[0.0]]).unwrap();
        assert_eq!(stationary_vector(&zero).unwrap(), Vector(vec![1.0]));
    }

    #[test]
    fn reducible_generator_is_rejected() {
        let q = Matrix::from_rows(&[[-1.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(stationary_vector(&q), Err(Error::NotIrreducible(_))));
    }

    #[test]
    fn exp_action_basics() {
        let t = Matrix::from_rows(&[[-3.0]]).unwrap();
        let v = Vector(vec![1.0]);
        assert_eq!(exp_action(&t, &v, 0.0).unwrap(), v);
        let got = exp_action(&t, &v, 0.7).unwrap();
        assert!((got.0[0] - (-2.1f64).exp()).abs() < 1e-12);
        assert!(exp_action(&t, &v, -1.0).is_err());
    }

    #[test]
    fn exp_action_matches_scaling_and_squaring() {
        let t = Matrix::from_rows(&[[-2.0, 1.5], [0.3, -1.0]]).unwrap();
        let v = Vector(vec![0.6, 0.4]);
        for &time in &[0.1, 1.0, 3.7, 25.0] {
            let reference = v.mul_mat(&expm_reference(&t.scale(time)));
            let got = exp_action(&t, &v, time).unwrap();
            assert!(
                got.sub(&reference).norm_inf() < 1e-10,
                "t={time}: {got:?} vs {reference:?}"
            );
        }
    }

    #[test]
    fn block_tridiagonal_operator_matches_dense() {
        let d = Matrix::from_rows(&[[-3.0, 1.0], [0.5, -2.0]]).unwrap();
        let u = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.5]]).unwrap();
        let l = Matrix::from_rows(&[[0.5, 0.5], [0.2, 0.3]]).unwrap();
        let bt = BlockTridiagonal {
            lower: vec![l.clone(), l],
            diag: vec![d.clone(), d.clone(), d],
            upper: vec![u.clone(), u],
        };
        let dense = bt.to_dense();
        let v = Vector(vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.1]);
        let a = Vector(bt.apply_row(&v.0));
        assert!(a.sub(&v.mul_mat(&dense)).norm_inf() < 1e-15);
        let e1 = exp_action_op(&bt, &v, 1.3).unwrap();
        let e2 = exp_action(&dense, &v, 1.3).unwrap();
        assert!(e1.sub(&e2).norm_inf() < 1e-13);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn square(n: usize) -> impl Strategy<Value = Matrix> {
            proptest::collection::vec(-5.0f64..5.0, n * n)
                .prop_map(move |d| Matrix::from_vec(n, n, d).unwrap())
        }

        fn generator(n: usize) -> impl Strategy<Value = Matrix> {
            proptest::collection::vec(0.01f64..3.0, n * n).prop_map(move |d| {
                let mut m = Matrix::from_vec(n, n, d).unwrap();
                for i in 0..n {
                    m[(i, i)] = 0.0;
                    let s: f64 = m.row(i).iter().sum();
                    m[(i, i)] = -s;
                }
                m
            })
        }

        proptest! {
            #[test]
            fn kron_sum_mixed_product(a in square(3), b in square(2)) {
                let s = kron_sum(&a, &b).unwrap();
                let lhs = s.mul_vec(&Vector::ones(6));
                let ae = a.mul_vec(&Vector::ones(3));
                let be = b.mul_vec(&Vector::ones(2));
                let rhs = ae.kron(&Vector::ones(2)).add(&Vector::ones(3).kron(&be));
                prop_assert!(lhs.sub(&rhs).norm_inf() < 1e-12);
            }

            #[test]
            fn product_of_stationary_vectors_is_stationary(q2 in generator(3), q1 in generator(2)) {
                let a2 = stationary_vector(&q2).unwrap();
                let a1 = stationary_vector(&q1).unwrap();
                let s = kron_sum(&q2, &q1).unwrap();
                prop_assert!(a2.kron(&a1).mul_mat(&s).norm_inf() < 1e-12);
            }

            #[test]
            fn exp_action_contracts_for_subgenerators(q in generator(3), leak in 0.0f64..2.0,
                                                      t in 0.0f64..5.0,
                                                      v in proptest::collection::vec(0.0f64..1.0, 3)) {
                let sub = q.shift_diagonal(-leak);
                let v = Vector(v);
                let out = exp_action(&sub, &v, t).unwrap();
                prop_assert!(out.norm1() <= v.norm1() * (1.0 + 1e-12) + 1e-15);
            }
        }
    }
}
