//! Dense/sparse matrix value types, quantization parameters, and the seeded
//! synthetic generator for pruned int8 weight matrices.

use crate::error::{Error, Result};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Row-major signed 8-bit matrix; the ground-truth representation for
/// weights and activations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseMatrixI8 {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
}

impl DenseMatrixI8 {
    /// Builds a matrix from row-major data; `data.len()` must equal `rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<i8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::DimMismatch {
                context: "row-major data length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0; rows.saturating_mul(cols)])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i8) {
        self.data[r * self.cols + c] = v;
    }

    /// One row as a contiguous slice.
    pub fn row(&self, r: usize) -> &[i8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Raw bytes of the row-major data (two's-complement view of the i8s).
    pub fn as_bytes(&self) -> &[u8] {
        as_bytes(&self.data)
    }

    /// Number of non-zero entries.
    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

/// Reinterprets an i8 slice as its underlying bytes (same layout, no copy).
pub fn as_bytes(v: &[i8]) -> &[u8] {
    // SAFETY: i8 and u8 have identical size, alignment, and validity.
    unsafe { std::slice::from_raw_parts(v.as_ptr().cast::<u8>(), v.len()) }
}

/// One row of a sparse matrix: strictly ascending column indices and the
/// values stored at them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseRow {
    pub columns: Vec<u32>,
    pub values: Vec<i8>,
}

impl SparseRow {
    /// Validates ascending order, the column bound, and matching lengths.
    pub fn new(columns: Vec<u32>, values: Vec<i8>, cols: usize) -> Result<Self> {
        if columns.len() != values.len() {
            return Err(Error::DimMismatch {
                context: "sparse row values length",
                expected: columns.len(),
                got: values.len(),
            });
        }
        for w in columns.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidParam(format!(
                    "sparse row columns not strictly ascending: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = columns.last() {
            if last as usize >= cols {
                return Err(Error::InvalidParam(format!(
                    "column {last} out of range for width {cols}"
                )));
            }
        }
        Ok(Self { columns, values })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Splits a dense matrix into per-row sparse form (non-zero entries only).
pub fn to_sparse_rows(m: &DenseMatrixI8) -> Vec<SparseRow> {
    (0..m.rows())
        .map(|r| {
            let row = m.row(r);
            let mut columns = Vec::new();
            let mut values = Vec::new();
            for (c, &v) in row.iter().enumerate() {
                if v != 0 {
                    columns.push(c as u32);
                    values.push(v);
                }
            }
            SparseRow { columns, values }
        })
        .collect()
}

/// Rebuilds the dense matrix from sparse rows; the inverse of [`to_sparse_rows`].
pub fn densify(rows: usize, cols: usize, sparse: &[SparseRow]) -> Result<DenseMatrixI8> {
    if sparse.len() != rows {
        return Err(Error::DimMismatch {
            context: "sparse row count",
            expected: rows,
            got: sparse.len(),
        });
    }
    let mut m = DenseMatrixI8::zeros(rows, cols)?;
    for (r, row) in sparse.iter().enumerate() {
        for (&c, &v) in row.columns.iter().zip(&row.values) {
            if c as usize >= cols {
                return Err(Error::InvalidParam(format!(
                    "column {c} out of range for width {cols}"
                )));
            }
            m.set(r, c as usize, v);
        }
    }
    Ok(m)
}

/// Per-tensor quantization parameters shared by the inference kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizationParams {
    pub input_zero_point: i16,
    pub output_zero_point: i16,
    pub multiplier: i32,
    pub shift: u8,
}

impl QuantizationParams {
    pub fn new(
        input_zero_point: i16,
        output_zero_point: i16,
        multiplier: i32,
        shift: u8,
    ) -> Result<Self> {
        if multiplier <= 0 {
            return Err(Error::InvalidParam(format!(
                "requantization multiplier must be positive, got {multiplier}"
            )));
        }
        if shift > 31 {
            return Err(Error::InvalidParam(format!(
                "shift must be 0..=31, got {shift}"
            )));
        }
        Ok(Self {
            input_zero_point,
            output_zero_point,
            multiplier,
            shift,
        })
    }
}

/// Shape, sparsity, and seed for the synthetic pruned-matrix generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub rows: usize,
    pub cols: usize,
    /// Fraction of zero entries, in [0, 1).
    pub sparsity: f64,
    pub seed: u64,
}

/// Number of non-zeros the generator will place: round((1 - sparsity) * rows * cols).
pub fn expected_nnz(spec: &GeneratorSpec) -> usize {
    ((1.0 - spec.sparsity) * (spec.rows * spec.cols) as f64).round() as usize
}

/// Generates a matrix with exactly `round((1-sparsity)*rows*cols)` non-zeros
/// at uniformly drawn positions (without replacement). Kept values are drawn
/// uniformly from [-127, 127] excluding 0, so zero never masquerades as a
/// kept weight and negation is always safe. Deterministic for a fixed spec.
pub fn generate_uniform_sparse(spec: &GeneratorSpec) -> Result<DenseMatrixI8> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(Error::EmptyMatrix {
            rows: spec.rows,
            cols: spec.cols,
        });
    }
    if !(0.0..1.0).contains(&spec.sparsity) {
        return Err(Error::InvalidSparsity(spec.sparsity));
    }
    let total = spec.rows * spec.cols;
    let nnz = expected_nnz(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let positions = rand::seq::index::sample(&mut rng, total, nnz);
    let value_dist = Uniform::new_inclusive(-127i8, 127i8);
    let mut data = vec![0i8; total];
    for p in positions {
        let mut v = value_dist.sample(&mut rng);
        while v == 0 {
            v = value_dist.sample(&mut rng);
        }
        data[p] = v;
    }
    DenseMatrixI8::new(spec.rows, spec.cols, data)
}

/// Fully dense random i8 matrix (activation synthesis); deterministic per seed.
pub fn generate_activations(pixels: usize, cols: usize, seed: u64) -> Result<DenseMatrixI8> {
    if pixels == 0 || cols == 0 {
        return Err(Error::EmptyMatrix { rows: pixels, cols });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-128i16, 127i16);
    let data = (0..pixels * cols)
        .map(|_| dist.sample(&mut rng) as i8)
        .collect();
    DenseMatrixI8::new(pixels, cols, data)
}
