//! Dense row-major matrices and attention vectors.
//!
//! Tensors arrive as `f32` but every kernel here works in `f64`; the
//! `f32 -> f64 -> f32` trip is exact, so nothing is lost at the boundary.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Rows whose Euclidean norm falls below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// An `N x D` row-major matrix of token embeddings, one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TokenMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput);
        }
        let expected = rows.checked_mul(cols).ok_or(Error::DimensionMismatch {
            what: "matrix element count",
            expected: usize::MAX,
            found: data.len(),
        })?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "matrix element count",
                expected,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(TokenMatrix { rows, cols, data })
    }

    pub fn from_f32(rows: usize, cols: usize, data: &[f32]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&v| f64::from(v)).collect())
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Narrows every element to `f32` (round to nearest).
    pub fn to_f32_vec(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }

    /// Largest absolute element.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.rows,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, data)
    }
}

/// Attention key vectors of one layer. Same layout as [`TokenMatrix`], but no
/// row may be the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyMatrix(TokenMatrix);

impl KeyMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_tokens(TokenMatrix::new(rows, cols, data)?)
    }

    pub fn from_f32(rows: usize, cols: usize, data: &[f32]) -> Result<Self> {
        Self::from_tokens(TokenMatrix::from_f32(rows, cols, data)?)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::from_tokens(TokenMatrix::from_rows(rows)?)
    }

    pub fn from_tokens(m: TokenMatrix) -> Result<Self> {
        if let Some(index) = m.iter_rows().position(|r| norm(r) < ZERO_NORM) {
            return Err(Error::ZeroRow { index });
        }
        Ok(KeyMatrix(m))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.0.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.0.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn as_tokens(&self) -> &TokenMatrix {
        &self.0
    }

    pub fn into_tokens(self) -> TokenMatrix {
        self.0
    }
}

/// Dense `N x N` matrix of pairwise cosine similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// CLS-to-patch attention scores of one layer: nonnegative, finite, with at
/// least one strictly positive entry. Need not sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionVector(Vec<f64>);

impl AttentionVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (index, &s) in scores.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFiniteValue { index });
            }
            if s < 0.0 {
                return Err(Error::NegativeAttention { index });
            }
        }
        if !scores.iter().any(|&s| s > 0.0) {
            return Err(Error::NoPositiveAttention);
        }
        Ok(AttentionVector(scores))
    }

    pub fn from_f32(scores: &[f32]) -> Result<Self> {
        Self::new(scores.iter().map(|&v| f64::from(v)).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn scores(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Number of strictly positive scores.
    pub fn support(&self) -> usize {
        self.0.iter().filter(|&&s| s > 0.0).count()
    }

    /// Rescaled copy whose entries sum to one.
    pub fn normalized(&self) -> AttentionVector {
        let total = self.sum();
        AttentionVector(self.0.iter().map(|s| s / total).collect())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Scales every key row to unit Euclidean norm.
pub fn normalize_rows(keys: &KeyMatrix) -> Result<KeyMatrix> {
    let m = keys.as_tokens();
    let mut data = Vec::with_capacity(m.rows * m.cols);
    for (index, row) in m.iter_rows().enumerate() {
        let n = norm(row);
        if n < ZERO_NORM {
            return Err(Error::ZeroRow { index });
        }
        data.extend(row.iter().map(|v| v / n));
    }
    Ok(KeyMatrix(TokenMatrix {
        rows: m.rows,
        cols: m.cols,
        data,
    }))
}

/// `S = K K^T` for row-normalized keys. Only the upper triangle is computed;
/// the result is exactly symmetric.
pub fn similarity_matrix(keys_normalized: &KeyMatrix) -> SimilarityMatrix {
    let n = keys_normalized.rows();
    let mut data = alloc::vec![0.0; n * n];
    for i in 0..n {
        let ri = keys_normalized.row(i);
        for j in i..n {
            let s = dot(ri, keys_normalized.row(j));
            data[i * n + j] = s;
            data[j * n + i] = s;
        }
    }
    SimilarityMatrix { n, data }
}
