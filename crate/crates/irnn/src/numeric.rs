//! Minimal dense numerics: row-major matrix and vector containers, an LU
//! linear solve with partial pivoting, the sigmoid activation, and a seeded
//! random number generator.
//!
//! Shape mismatches are programmer error and panic with both shapes in the
//! message; numeric failure modes (singular systems) are reported as errors.

use crate::error::{Error, Result};

/// Pivot magnitudes below this are treated as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows: expected {c} columns");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    /// Wrap an existing row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "buffer length {} does not match shape {rows}x{cols}",
            data.len()
        );
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Vec<f64> {
        &mut self.data
    }

    /// `A·x`; panics if `A.cols != x.len`.
    pub fn matvec(&self, x: &Vector) -> Vector {
        assert_eq!(
            self.cols,
            x.len(),
            "matvec dimension mismatch: matrix {}x{} times vector of length {}",
            self.rows,
            self.cols,
            x.len()
        );
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.data.iter()) {
                acc += a * b;
            }
            out[i] = acc;
        }
        Vector::from_vec(out)
    }

    /// Accumulate `A·x` into `out` over raw slices (hot-path variant).
    #[inline]
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(self.cols, x.len());
        debug_assert_eq!(self.rows, out.len());
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            out[i] += acc;
        }
    }

    /// `Aᵀ·x` without materializing the transpose; panics if `A.rows != x.len`.
    pub fn matvec_t(&self, x: &Vector) -> Vector {
        assert_eq!(
            self.rows,
            x.len(),
            "matvec_t dimension mismatch: matrix {}x{} transposed times vector of length {}",
            self.rows,
            self.cols,
            x.len()
        );
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x.data[i];
            let row = self.row(i);
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += a * xi;
            }
        }
        Vector::from_vec(out)
    }

    /// `A·B`; panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul dimension mismatch: {}x{} times {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn transposed(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Row-scaling `diag(d)·A`; panics if `d.len != A.rows`.
    pub fn scale_rows(&self, d: &Vector) -> Matrix {
        assert_eq!(
            self.rows,
            d.len(),
            "scale_rows dimension mismatch: matrix {}x{}, diagonal of length {}",
            self.rows,
            self.cols,
            d.len()
        );
        let mut out = self.clone();
        for i in 0..self.rows {
            let s = d.data[i];
            for v in &mut out.data[i * self.cols..(i + 1) * self.cols] {
                *v *= s;
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.shape(),
            other.shape(),
            "add dimension mismatch: {:?} vs {:?}",
            self.shape(),
            other.shape()
        );
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Matrix::from_vec(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.shape(),
            other.shape(),
            "sub dimension mismatch: {:?} vs {:?}",
            self.shape(),
            other.shape()
        );
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Matrix::from_vec(self.rows, self.cols, data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dense vector of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector { data: vec![0.0; len] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn from_slice(data: &[f64]) -> Self {
        Vector { data: data.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: f64) {
        self.data[i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Vec<f64> {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(
            self.len(),
            other.len(),
            "vector add length mismatch: {} vs {}",
            self.len(),
            other.len()
        );
        Vector::from_vec(self.iter().zip(other.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        assert_eq!(
            self.len(),
            other.len(),
            "vector sub length mismatch: {} vs {}",
            self.len(),
            other.len()
        );
        Vector::from_vec(self.iter().zip(other.iter()).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector::from_vec(self.iter().map(|a| a * s).collect())
    }

    pub fn norm2(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector { data }
    }
}

/// Outer product `u·vᵀ` (u.len × v.len).
pub fn outer(u: &Vector, v: &Vector) -> Matrix {
    let mut out = Matrix::zeros(u.len(), v.len());
    for i in 0..u.len() {
        let ui = u.get(i);
        for j in 0..v.len() {
            out.set(i, j, ui * v.get(j));
        }
    }
    out
}

/// Solve `A·X = B` by LU decomposition with partial pivoting.
///
/// `A` must be square with `A.rows == B.rows`. Returns a structured error
/// carrying the pivot index when a pivot falls below [`SINGULARITY_THRESHOLD`].
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    assert_eq!(
        a.rows, a.cols,
        "solve_linear requires a square matrix, got {}x{}",
        a.rows, a.cols
    );
    assert_eq!(
        a.rows, b.rows,
        "solve_linear dimension mismatch: A is {}x{}, B is {}x{}",
        a.rows, a.cols, b.rows, b.cols
    );
    let n = a.rows;
    let mut lu = a.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // Partial pivoting: largest magnitude in column k at or below the diagonal.
        let mut pivot_row = k;
        let mut pivot_val = lu[k * n + k].abs();
        for i in (k + 1)..n {
            let v = lu[i * n + k].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = i;
            }
        }
        if pivot_val < SINGULARITY_THRESHOLD {
            return Err(Error::SingularSystem {
                pivot_index: k,
                pivot: lu[pivot_row * n + k],
            });
        }
        if pivot_row != k {
            for j in 0..n {
                lu.swap(k * n + j, pivot_row * n + j);
            }
            perm.swap(k, pivot_row);
        }
        let pivot = lu[k * n + k];
        for i in (k + 1)..n {
            let factor = lu[i * n + k] / pivot;
            lu[i * n + k] = factor;
            for j in (k + 1)..n {
                lu[i * n + j] -= factor * lu[k * n + j];
            }
        }
    }

    // Forward/back substitution per right-hand-side column.
    let mut x = Matrix::zeros(n, b.cols);
    let mut col = vec![0.0; n];
    for j in 0..b.cols {
        for i in 0..n {
            col[i] = b.get(perm[i], j);
        }
        for i in 1..n {
            let mut acc = col[i];
            for k in 0..i {
                acc -= lu[i * n + k] * col[k];
            }
            col[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = col[i];
            for k in (i + 1)..n {
                acc -= lu[i * n + k] * col[k];
            }
            col[i] = acc / lu[i * n + i];
        }
        for i in 0..n {
            x.set(i, j, col[i]);
        }
    }
    Ok(x)
}

/// Solve `A·x = b` for a single right-hand side.
pub fn solve_linear_vec(a: &Matrix, b: &Vector) -> Result<Vector> {
    let bm = Matrix::from_vec(b.len(), 1, b.data().to_vec());
    let x = solve_linear(a, &bm)?;
    Ok(Vector::from_vec(x.data().to_vec()))
}

#[inline]
fn sigmoid_scalar(x: f64) -> f64 {
    // Branch on sign so the exponential never overflows.
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise logistic sigmoid `1/(1+exp(-x))`.
pub fn sigmoid(x: &Vector) -> Vector {
    Vector::from_vec(x.iter().map(|&v| sigmoid_scalar(v)).collect())
}

/// Sigmoid derivative evaluated from the output value: `y·(1-y)`.
pub fn sigmoid_prime_from_output(y: &Vector) -> Vector {
    Vector::from_vec(y.iter().map(|&v| v * (1.0 - v)).collect())
}

/// Dominant-eigenvalue magnitude estimate by power iteration.
pub fn spectral_radius(m: &Matrix, iterations: usize) -> f64 {
    assert_eq!(m.rows, m.cols, "spectral_radius requires a square matrix");
    let n = m.rows;
    if n == 0 {
        return 0.0;
    }
    // Deterministic start with unequal entries so no eigendirection is missed
    // by symmetry.
    let mut v = Vector::from_vec((0..n).map(|i| 1.0 + 0.01 * i as f64).collect());
    let mut radius = 0.0;
    for _ in 0..iterations {
        let w = m.matvec(&v);
        let norm = w.norm2();
        if norm == 0.0 || !norm.is_finite() {
            return norm;
        }
        radius = norm / v.norm2();
        v = w.scale(1.0 / norm);
    }
    radius
}

/// Seedable 64-bit generator (SplitMix64) with uniform and normal draws.
///
/// Identical seeds produce identical sequences bit-exactly; a normal draw
/// consumes exactly two uniform draws (Box-Muller), so draw order is fixed.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`; panics unless `lo < hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        assert!(lo < hi, "invalid uniform range: [{lo}, {hi})");
        lo + (hi - lo) * self.uniform01()
    }

    /// Normal draw via the Box-Muller transform; panics unless `sd > 0`.
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        assert!(sd > 0.0, "invalid normal standard deviation: {sd}");
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform01();
        let r = (-2.0 * u1.ln()).sqrt();
        mean + sd * r * (std::f64::consts::TAU * u2).cos()
    }
}
