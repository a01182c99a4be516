//! Quantized matrix-vector and matrix-matrix kernels.
//!
//! The dense routines are exact scalar oracles; the sparse kernels execute
//! through a [`VectorEngine`] and must produce bit-identical results. Two
//! multiply strategies exist for dCSR weights: value-buffered (scatter the
//! row into a dense buffer, then contiguous dot products — same
//! multiply count as dense) and index-buffered (keep gather offsets, touch
//! only stored elements). Activation matrices are pixel-major with each
//! pixel's channels contiguous, so per-pixel slices feed the engine
//! directly.
//!
//! All kernels compute `y[p,r] = Σ_c W[r,c]·(x[p,c] − x_zp) + bias[r]`
//! using the identity `Σ w·(x − zp) = Σ w·x − zp·Σw`; the weight-sum
//! correction and mask/intercept recurrences are scalar bookkeeping and
//! are not counted as vector work.

use crate::baselines::ri::RiMatrix;
use crate::container::{for_each_group, DcsrMatrix, RowIndex};
use crate::engine::{LaneVector, Predicate, VectorEngine};
use crate::error::{Error, Result};
use crate::matrix::{as_bytes, DenseMatrixI8};

/// Requantization of a 32-bit accumulator back to int8.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequantSpec {
    pub multiplier: i32,
    pub shift: u8,
    pub output_zero_point: i16,
}

impl RequantSpec {
    pub fn new(multiplier: i32, shift: u8, output_zero_point: i16) -> Result<Self> {
        if multiplier <= 0 {
            return Err(Error::InvalidParam(format!(
                "requant multiplier {multiplier} must be positive"
            )));
        }
        if shift > 31 {
            return Err(Error::InvalidParam(format!(
                "requant shift {shift} outside 0..=31"
            )));
        }
        Ok(Self {
            multiplier,
            shift,
            output_zero_point,
        })
    }

    /// Identity mapping (multiplier 1, shift 0, zero point 0).
    pub fn identity() -> Self {
        Self {
            multiplier: 1,
            shift: 0,
            output_zero_point: 0,
        }
    }
}

/// `clamp(zp + round(acc·multiplier / 2^shift), -128, 127)` with ties
/// rounding away from zero; the intermediate product is 64-bit.
pub fn requantize(acc: i32, spec: &RequantSpec) -> i8 {
    let scaled = acc as i64 * spec.multiplier as i64;
    let rounded = if spec.shift == 0 {
        scaled
    } else {
        let half = 1i64 << (spec.shift - 1);
        if scaled >= 0 {
            (scaled + half) >> spec.shift
        } else {
            -((-scaled + half) >> spec.shift)
        }
    };
    (spec.output_zero_point as i64 + rounded).clamp(i8::MIN as i64, i8::MAX as i64) as i8
}

/// Applies [`requantize`] to a whole accumulator buffer.
pub fn quantize_outputs(raw: &[i32], spec: &RequantSpec) -> Vec<i8> {
    raw.iter().map(|&acc| requantize(acc, spec)).collect()
}

/// Multiply-accumulate lanes a dense kernel spends on this shape.
pub fn dense_mac_lanes(rows: usize, cols: usize, pixels: usize) -> u64 {
    rows as u64 * cols as u64 * pixels as u64
}

fn check_bias(bias: &[i32], rows: usize) -> Result<()> {
    if bias.len() != rows {
        return Err(Error::DimMismatch {
            context: "bias length vs weight rows",
            expected: rows,
            got: bias.len(),
        });
    }
    Ok(())
}

fn check_x(x: &[i8], cols: usize) -> Result<()> {
    if x.len() != cols {
        return Err(Error::DimMismatch {
            context: "activation length vs weight columns",
            expected: cols,
            got: x.len(),
        });
    }
    Ok(())
}

fn check_activations(a: &DenseMatrixI8, cols: usize) -> Result<()> {
    if a.cols() != cols {
        return Err(Error::DimMismatch {
            context: "activation channels vs weight columns",
            expected: cols,
            got: a.cols(),
        });
    }
    Ok(())
}

fn check_engine<E: VectorEngine>(engine: &E, group_size: usize) -> Result<()> {
    if engine.group_size() != group_size {
        return Err(Error::DimMismatch {
            context: "engine lanes vs container group size",
            expected: group_size,
            got: engine.group_size(),
        });
    }
    Ok(())
}

fn narrow(acc: i64) -> Result<i32> {
    i32::try_from(acc).map_err(|_| Error::AccumulatorOverflow)
}

/// Scalar reference: `y[r] = Σ_c W[r,c]·(x[c] − x_zp) + bias[r]`.
pub fn dense_spmv(w: &DenseMatrixI8, x: &[i8], x_zp: i16, bias: &[i32]) -> Result<Vec<i32>> {
    check_x(x, w.cols())?;
    check_bias(bias, w.rows())?;
    let mut out = Vec::with_capacity(w.rows());
    for (r, &b) in bias.iter().enumerate() {
        let mut acc = 0i64;
        for (&wv, &xv) in w.row(r).iter().zip(x) {
            acc += wv as i64 * (xv as i64 - x_zp as i64);
        }
        out.push(narrow(acc + b as i64)?);
    }
    Ok(out)
}

/// Scalar reference over a pixel batch; outputs are pixel-major
/// (`out[p·rows + r]`).
pub fn dense_spmm(
    w: &DenseMatrixI8,
    a: &DenseMatrixI8,
    x_zp: i16,
    bias: &[i32],
) -> Result<Vec<i32>> {
    check_activations(a, w.cols())?;
    check_bias(bias, w.rows())?;
    let mut out = Vec::with_capacity(a.rows() * w.rows());
    for p in 0..a.rows() {
        out.extend(dense_spmv(w, a.row(p), x_zp, bias)?);
    }
    Ok(out)
}

/// Signed sum of a row's stored weights (padding zeros are inert).
fn row_weight_sum(values: &[i8]) -> i64 {
    values.iter().map(|&v| v as i64).sum()
}

/// Sparse matrix-vector product by direct extraction: each group's
/// offsets are recomposed, the activations gathered, and the stored
/// weights multiplied in place — decode and compute fused.
pub fn dcsr_spmv<E: VectorEngine>(
    d: &DcsrMatrix,
    x: &[i8],
    x_zp: i16,
    bias: &[i32],
    engine: &mut E,
) -> Result<Vec<i32>> {
    d.validate()?;
    check_engine(engine, d.group_size())?;
    check_x(x, d.cols())?;
    check_bias(bias, d.rows())?;
    let idx = RowIndex::build(d);
    let weights = d.values_with_slack();
    let xbuf = as_bytes(x);
    let mut out = Vec::with_capacity(d.rows());
    for (r, &b) in bias.iter().enumerate() {
        let mut acc = 0i32;
        for_each_group(d, &idx, r, engine, |eng, grp| {
            let w = eng.load_contiguous(&weights, grp.elem_start)?;
            let xv = eng.gather_i8(xbuf, grp.intercept, &grp.offsets, grp.active)?;
            acc = eng.dot_acc_i32(acc, &w, &xv, grp.active)?;
            Ok(())
        })?;
        let (e0, e1) = d.element_range(r);
        let wsum = row_weight_sum(&d.values[e0..e1]);
        out.push(narrow(acc as i64 - x_zp as i64 * wsum + b as i64)?);
    }
    Ok(out)
}

/// Pads each pixel's channel slice to a whole number of lane groups so
/// whole-group contiguous loads stay in bounds (the tail lanes are zero
/// and excluded by predication).
fn padded_pixels(a: &DenseMatrixI8, padded_cols: usize) -> Vec<u8> {
    let mut buf = vec![0u8; a.rows() * padded_cols];
    for p in 0..a.rows() {
        buf[p * padded_cols..p * padded_cols + a.cols()].copy_from_slice(as_bytes(a.row(p)));
    }
    buf
}

/// Value-buffered sparse matrix-matrix product: each weight row is
/// decoded once and scattered into a zero-initialized dense row buffer,
/// then every pixel runs plain contiguous dot products against it. The
/// multiply count matches the dense kernel exactly — this variant buys
/// decode reuse, not fewer multiplies.
pub fn dcsr_spmm_vb<E: VectorEngine>(
    d: &DcsrMatrix,
    a: &DenseMatrixI8,
    x_zp: i16,
    bias: &[i32],
    engine: &mut E,
) -> Result<Vec<i32>> {
    d.validate()?;
    check_engine(engine, d.group_size())?;
    check_activations(a, d.cols())?;
    check_bias(bias, d.rows())?;
    let g = d.group_size();
    let chunks = d.cols().div_ceil(g);
    let padded_cols = chunks * g;
    let tail_lanes = d.cols() - (chunks - 1) * g;
    let xpad = padded_pixels(a, padded_cols);
    let idx = RowIndex::build(d);
    let weights = d.values_with_slack();
    let pixels = a.rows();
    let mut out = vec![0i32; pixels * d.rows()];
    let mut row_buf = vec![0u8; padded_cols];
    for r in 0..d.rows() {
        row_buf.fill(0);
        for_each_group(d, &idx, r, engine, |eng, grp| {
            let w = eng.load_contiguous(&weights, grp.elem_start)?;
            eng.scatter_i8(&mut row_buf, grp.intercept, &grp.offsets, &w, grp.active)
        })?;
        let (e0, e1) = d.element_range(r);
        let wsum = row_weight_sum(&d.values[e0..e1]);
        for p in 0..pixels {
            let xrow = &xpad[p * padded_cols..(p + 1) * padded_cols];
            let mut acc = 0i32;
            for k in 0..chunks {
                let wv = engine.load_contiguous(&row_buf, k * g)?;
                let xv = engine.load_contiguous(xrow, k * g)?;
                let lanes = if k + 1 == chunks { tail_lanes } else { g };
                acc = engine.dot_acc_i32(acc, &wv, &xv, Predicate::first(lanes))?;
            }
            out[p * d.rows() + r] = narrow(acc as i64 - x_zp as i64 * wsum + bias[r] as i64)?;
        }
    }
    Ok(out)
}

/// One buffered group of a weight row: everything a pixel pass needs.
struct BufferedGroup {
    offsets: LaneVector,
    weights: LaneVector,
    active: Predicate,
    intercept: i64,
}

/// Index-buffered sparse matrix-matrix product: each weight row's gather
/// offsets, intercepts, and weight lanes are recomposed once into a row
/// buffer; every pixel then gathers its activations and multiplies only
/// the stored elements.
pub fn dcsr_spmm_ib<E: VectorEngine>(
    d: &DcsrMatrix,
    a: &DenseMatrixI8,
    x_zp: i16,
    bias: &[i32],
    engine: &mut E,
) -> Result<Vec<i32>> {
    d.validate()?;
    check_engine(engine, d.group_size())?;
    check_activations(a, d.cols())?;
    check_bias(bias, d.rows())?;
    let idx = RowIndex::build(d);
    let weights = d.values_with_slack();
    let pixels = a.rows();
    let mut out = vec![0i32; pixels * d.rows()];
    let mut row_buf: Vec<BufferedGroup> = Vec::new();
    for r in 0..d.rows() {
        row_buf.clear();
        for_each_group(d, &idx, r, engine, |eng, grp| {
            let w = eng.load_contiguous(&weights, grp.elem_start)?;
            row_buf.push(BufferedGroup {
                offsets: grp.offsets,
                weights: w,
                active: grp.active,
                intercept: grp.intercept,
            });
            Ok(())
        })?;
        let (e0, e1) = d.element_range(r);
        let wsum = row_weight_sum(&d.values[e0..e1]);
        for p in 0..pixels {
            let xrow = as_bytes(a.row(p));
            let mut acc = 0i32;
            for grp in &row_buf {
                let xv = engine.gather_i8(xrow, grp.intercept, &grp.offsets, grp.active)?;
                acc = engine.dot_acc_i32(acc, &grp.weights, &xv, grp.active)?;
            }
            out[p * d.rows() + r] = narrow(acc as i64 - x_zp as i64 * wsum + bias[r] as i64)?;
        }
    }
    Ok(out)
}

/// One gather-ready run of consecutive relative-indexed elements.
struct RiRun {
    elem_start: usize,
    base: i64,
    offsets: LaneVector,
    active: Predicate,
}

/// Scalar index extraction: cumulative-sums a row's deltas and packs the
/// columns into runs of at most `g` elements whose offsets fit the
/// engine's unsigned 8-bit gather; a run splits early if its span grows
/// past 255 (possible for wide groups and delta widths).
fn extract_ri_runs(w: &RiMatrix, row: usize, g: usize) -> Vec<RiRun> {
    let (e0, e1) = (w.row_ptr[row] as usize, w.row_ptr[row + 1] as usize);
    let mut runs = Vec::new();
    let mut cursor = 0usize;
    let mut lanes: Vec<u8> = Vec::with_capacity(g);
    let mut start = e0;
    let mut base = 0usize;
    for e in e0..e1 {
        cursor += w.delta(e) as usize;
        if lanes.is_empty() {
            base = cursor;
        } else if lanes.len() == g || cursor - base > u8::MAX as usize {
            runs.push(RiRun {
                elem_start: start,
                base: base as i64,
                offsets: LaneVector::from_slice(&lanes),
                active: Predicate::first(lanes.len()),
            });
            start = e;
            base = cursor;
            lanes.clear();
        }
        lanes.push((cursor - base) as u8);
    }
    if !lanes.is_empty() {
        runs.push(RiRun {
            elem_start: start,
            base: base as i64,
            offsets: LaneVector::from_slice(&lanes),
            active: Predicate::first(lanes.len()),
        });
    }
    runs
}

fn values_with_slack(values: &[i8], g: usize) -> Vec<u8> {
    let mut buf = Vec::with_capacity(values.len() + g);
    buf.extend(values.iter().map(|&v| v as u8));
    buf.resize(values.len() + g - 1, 0);
    buf
}

/// Relative-indexing matrix-vector product: scalar index extraction per
/// run, then engine gathers and dot products. Padding elements ride along
/// as multiplications by zero.
pub fn ri_spmv<E: VectorEngine>(
    w: &RiMatrix,
    x: &[i8],
    x_zp: i16,
    bias: &[i32],
    engine: &mut E,
) -> Result<Vec<i32>> {
    check_x(x, w.cols())?;
    check_bias(bias, w.rows())?;
    let g = engine.group_size();
    let weights = values_with_slack(&w.values, g);
    let xbuf = as_bytes(x);
    let mut out = Vec::with_capacity(w.rows());
    for (r, &b) in bias.iter().enumerate() {
        let mut acc = 0i32;
        for run in extract_ri_runs(w, r, g) {
            let wv = engine.load_contiguous(&weights, run.elem_start)?;
            let xv = engine.gather_i8(xbuf, run.base, &run.offsets, run.active)?;
            acc = engine.dot_acc_i32(acc, &wv, &xv, run.active)?;
        }
        let (e0, e1) = (w.row_ptr[r] as usize, w.row_ptr[r + 1] as usize);
        let wsum = row_weight_sum(&w.values[e0..e1]);
        out.push(narrow(acc as i64 - x_zp as i64 * wsum + b as i64)?);
    }
    Ok(out)
}

/// Relative-indexing matrix-matrix product: runs are extracted once per
/// weight row and reused by every pixel.
pub fn ri_spmm<E: VectorEngine>(
    w: &RiMatrix,
    a: &DenseMatrixI8,
    x_zp: i16,
    bias: &[i32],
    engine: &mut E,
) -> Result<Vec<i32>> {
    check_activations(a, w.cols())?;
    check_bias(bias, w.rows())?;
    let g = engine.group_size();
    let weights = values_with_slack(&w.values, g);
    let pixels = a.rows();
    let mut out = vec![0i32; pixels * w.rows()];
    for r in 0..w.rows() {
        let runs = extract_ri_runs(w, r, g);
        let mut weight_lanes = Vec::with_capacity(runs.len());
        for run in &runs {
            weight_lanes.push(engine.load_contiguous(&weights, run.elem_start)?);
        }
        let (e0, e1) = (w.row_ptr[r] as usize, w.row_ptr[r + 1] as usize);
        let wsum = row_weight_sum(&w.values[e0..e1]);
        for p in 0..pixels {
            let xrow = as_bytes(a.row(p));
            let mut acc = 0i32;
            for (run, wv) in runs.iter().zip(&weight_lanes) {
                let xv = engine.gather_i8(xrow, run.base, &run.offsets, run.active)?;
                acc = engine.dot_acc_i32(acc, wv, &xv, run.active)?;
            }
            out[p * w.rows() + r] = narrow(acc as i64 - x_zp as i64 * wsum + bias[r] as i64)?;
        }
    }
    Ok(out)
}
