//! Whole-matrix dCSR container: assembly from per-row delta products,
//! bit-exact binary serialization, engine-driven decode, and footprint
//! accounting.
//!
//! The binary image is little-endian: a 28-byte header (`DCSR`, version,
//! group size, base bit-width, flags, five u32 totals) followed by the
//! sections `row_ptr`, `slopes`, `mask_ptr`, `intercept_deltas`,
//! `tracking`, `base_nibbles`, `masks`, `values`, each starting on a
//! 4-byte boundary with zero fill between and after.

use crate::dbe::{self, mask_count, mask_width_bytes, EncodedGroup};
use crate::dle::{self, DleParams, GROUP_SIZES, MAX_LANE_DELTA, MAX_LANE_OFFSET};
use crate::engine::{LaneVector, Predicate, ScalarEngine, VectorEngine};
use crate::error::{Error, Result};
use crate::footprint::FootprintBreakdown;
use crate::matrix::{to_sparse_rows, DenseMatrixI8};
use crate::wire::{align_up, Cursor};
use rayon::prelude::*;

pub const CONTAINER_MAGIC: [u8; 4] = *b"DCSR";
pub const CONTAINER_VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 28;

/// A weight matrix in delta-compressed sparse row form.
///
/// All streams are row-major concatenations; `row_ptr` indexes elements in
/// `values`, `mask_ptr` counts lane masks. Group-granular streams
/// (`intercept_deltas`, `tracking_bytes`) hold one entry per group, rows
/// concatenated; nibbles are stored interleaved two groups per byte lane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DcsrMatrix {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) group_size: usize,
    pub(crate) row_ptr: Vec<u32>,
    pub(crate) slopes: Vec<u16>,
    pub(crate) mask_ptr: Vec<u32>,
    pub(crate) intercept_deltas: Vec<i8>,
    pub(crate) tracking_bytes: Vec<u8>,
    pub(crate) base_nibble_bytes: Vec<u8>,
    pub(crate) masks: Vec<u8>,
    pub(crate) values: Vec<i8>,
}

impl DcsrMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    /// Stored elements, padding included.
    pub fn total_elements(&self) -> usize {
        self.values.len()
    }

    /// Lane groups across all rows.
    pub fn total_groups(&self) -> usize {
        self.tracking_bytes.len()
    }

    /// Extension lane masks across all rows.
    pub fn total_masks(&self) -> usize {
        *self.mask_ptr.last().unwrap_or(&0) as usize
    }

    /// Stored elements that are inserted padding (their value is 0; live
    /// weights are never 0 because zeros belong to the sparse background).
    pub fn padding_elements(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0).count()
    }

    /// Value stream as bytes with `group_size - 1` zero slack bytes so the
    /// last, possibly partial group still admits a whole-group load.
    pub(crate) fn values_with_slack(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.values.len() + self.group_size);
        buf.extend(self.values.iter().map(|&v| v as u8));
        buf.resize(self.values.len() + self.group_size - 1, 0);
        buf
    }

    /// Element range of one row in the value stream.
    pub(crate) fn element_range(&self, row: usize) -> (usize, usize) {
        (self.row_ptr[row] as usize, self.row_ptr[row + 1] as usize)
    }

    /// Checks every structural invariant the streams must satisfy.
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::EmptyMatrix {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if !GROUP_SIZES.contains(&self.group_size) {
            return Err(Error::InvalidParam(format!(
                "group size {} not one of {GROUP_SIZES:?}",
                self.group_size
            )));
        }
        expect_len("row_ptr", self.row_ptr.len(), self.rows + 1)?;
        expect_len("slopes", self.slopes.len(), self.rows)?;
        expect_len("mask_ptr", self.mask_ptr.len(), self.rows + 1)?;
        if self.row_ptr[0] != 0 || self.mask_ptr[0] != 0 {
            return Err(Error::CorruptContainer(
                "pointer tables must start at 0".into(),
            ));
        }
        if self.row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::CorruptContainer("row_ptr not non-decreasing".into()));
        }
        if self.mask_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::CorruptContainer(
                "mask_ptr not non-decreasing".into(),
            ));
        }
        expect_len(
            "values",
            self.values.len(),
            self.row_ptr[self.rows] as usize,
        )?;

        let g = self.group_size;
        let mut total_groups = 0usize;
        let mut nibble_bytes = 0usize;
        for r in 0..self.rows {
            let len = (self.row_ptr[r + 1] - self.row_ptr[r]) as usize;
            let groups = len.div_ceil(g);
            total_groups += groups;
            nibble_bytes += groups.div_ceil(2) * g;
        }
        expect_len(
            "intercept_deltas",
            self.intercept_deltas.len(),
            total_groups,
        )?;
        expect_len("tracking", self.tracking_bytes.len(), total_groups)?;
        expect_len("base_nibbles", self.base_nibble_bytes.len(), nibble_bytes)?;
        expect_len(
            "masks",
            self.masks.len(),
            self.total_masks() * mask_width_bytes(g),
        )?;

        let mut group_base = 0usize;
        for r in 0..self.rows {
            let len = (self.row_ptr[r + 1] - self.row_ptr[r]) as usize;
            let groups = len.div_ceil(g);
            let expected = (self.mask_ptr[r + 1] - self.mask_ptr[r]) as usize;
            let counted: usize = self.tracking_bytes[group_base..group_base + groups]
                .iter()
                .map(|&t| mask_count(t))
                .sum();
            if counted != expected {
                return Err(Error::MaskCountMismatch(format!(
                    "row {r} tracking bytes imply {counted} masks, mask_ptr implies {expected}"
                )));
            }
            group_base += groups;
        }
        Ok(())
    }
}

fn expect_len(context: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

/// Per-row starting offsets into the group-granular and nibble streams,
/// derived from `row_ptr` once per traversal.
pub(crate) struct RowIndex {
    pub group_base: Vec<usize>,
    pub nibble_base: Vec<usize>,
}

impl RowIndex {
    pub fn build(d: &DcsrMatrix) -> Self {
        let g = d.group_size;
        let mut group_base = Vec::with_capacity(d.rows + 1);
        let mut nibble_base = Vec::with_capacity(d.rows + 1);
        let (mut gb, mut nb) = (0usize, 0usize);
        for r in 0..=d.rows {
            group_base.push(gb);
            nibble_base.push(nb);
            if r < d.rows {
                let len = (d.row_ptr[r + 1] - d.row_ptr[r]) as usize;
                let groups = len.div_ceil(g);
                gb += groups;
                nb += groups.div_ceil(2) * g;
            }
        }
        Self {
            group_base,
            nibble_base,
        }
    }
}

/// One decoded group handed to a row-traversal callback.
pub(crate) struct GroupCtx {
    /// Global element offset of the group's first lane.
    pub elem_start: usize,
    /// Predicate covering the lanes actually present (the final group of
    /// a row may be partial).
    pub active: Predicate,
    /// Group intercept: base column of lane 0 before per-lane offsets.
    pub intercept: i64,
    /// Per-lane column offsets `lane * slope + residual`, each 0..=255.
    pub offsets: LaneVector,
}

/// Streams one row through the engine: per nibble pair one contiguous
/// load, per group a nibble extraction, the extension ORs its tracking
/// byte calls for, and the affine lane-offset add. The callback receives
/// each group exactly once — every kernel builds on this single decode.
/// Mask words and intercept recurrences are scalar bookkeeping.
pub(crate) fn for_each_group<E, F>(
    d: &DcsrMatrix,
    idx: &RowIndex,
    row: usize,
    engine: &mut E,
    mut f: F,
) -> Result<()>
where
    E: VectorEngine,
    F: FnMut(&mut E, &GroupCtx) -> Result<()>,
{
    let g = d.group_size;
    let (e0, e1) = d.element_range(row);
    let len = e1 - e0;
    if len == 0 {
        return Ok(());
    }
    let groups = len.div_ceil(g);
    let slope = d.slopes[row];
    let group_base = idx.group_base[row];
    let nibble_base = idx.nibble_base[row];
    let width = mask_width_bytes(g);
    let mut mask_cursor = d.mask_ptr[row] as usize;
    let mut pair = LaneVector::ZERO;
    let mut intercept = 0i64;
    for j in 0..groups {
        let nibbles = if j % 2 == 0 {
            pair = engine.load_contiguous(&d.base_nibble_bytes, nibble_base + j / 2 * g)?;
            engine.shr4(&pair)
        } else {
            engine.and_0x0f(&pair)
        };
        let tracking = d.tracking_bytes[group_base + j];
        let mut deltas = nibbles;
        for bit in dbe::EXTENSION_BITS {
            if tracking & (1 << (bit - 4)) != 0 {
                let lanes = read_mask(&d.masks, mask_cursor, width)?;
                mask_cursor += 1;
                deltas = engine.masked_or_const(&deltas, Predicate::from_bits(lanes), 1 << bit);
            }
        }
        let offsets = engine.add_lane_index_scaled(&deltas, slope)?;
        let dn = d.intercept_deltas[group_base + j] as i64;
        intercept = if j == 0 {
            dn
        } else {
            intercept + slope as i64 * g as i64 + dn
        };
        let lane_count = g.min(len - j * g);
        f(
            engine,
            &GroupCtx {
                elem_start: e0 + j * g,
                active: Predicate::first(lane_count),
                intercept,
                offsets,
            },
        )?;
    }
    Ok(())
}

fn read_mask(masks: &[u8], cursor: usize, width: usize) -> Result<u32> {
    let start = cursor * width;
    let end = start + width;
    if end > masks.len() {
        return Err(Error::CorruptContainer(format!(
            "mask stream overrun at mask {cursor}"
        )));
    }
    let mut word = [0u8; 4];
    word[..width].copy_from_slice(&masks[start..end]);
    Ok(u32::from_le_bytes(word))
}

/// Encodes a dense matrix: per row pad → delta-decompose → nibble-split,
/// then concatenate the per-row products into one container. Rows encode
/// independently and in parallel.
pub fn encode_matrix(m: &DenseMatrixI8, group_size: usize) -> Result<DcsrMatrix> {
    let params = DleParams::new(group_size, m.cols())?;
    let sparse = to_sparse_rows(m);

    struct RowProduct {
        values: Vec<i8>,
        slope: u16,
        intercept_deltas: Vec<i8>,
        groups: Vec<EncodedGroup>,
    }

    let products: Vec<RowProduct> = sparse
        .par_iter()
        .map(|row| {
            let enc = dle::encode_row(row, &params)?;
            let groups = enc
                .encoding
                .lane_deltas
                .chunks(group_size)
                .map(|chunk| dbe::decompose_group(chunk, group_size))
                .collect::<Result<Vec<_>>>()?;
            Ok(RowProduct {
                values: enc.values,
                slope: enc.encoding.slope,
                intercept_deltas: enc.encoding.intercept_deltas,
                groups,
            })
        })
        .collect::<Result<_>>()?;

    let mut d = DcsrMatrix {
        rows: m.rows(),
        cols: m.cols(),
        group_size,
        row_ptr: Vec::with_capacity(m.rows() + 1),
        slopes: Vec::with_capacity(m.rows()),
        mask_ptr: Vec::with_capacity(m.rows() + 1),
        intercept_deltas: Vec::new(),
        tracking_bytes: Vec::new(),
        base_nibble_bytes: Vec::new(),
        masks: Vec::new(),
        values: Vec::new(),
    };
    d.row_ptr.push(0);
    d.mask_ptr.push(0);
    let width = mask_width_bytes(group_size);
    for p in products {
        d.values.extend_from_slice(&p.values);
        d.slopes.push(p.slope);
        d.intercept_deltas.extend_from_slice(&p.intercept_deltas);
        for pair in p.groups.chunks(2) {
            let second = pair.get(1).map(|g| g.base_nibbles.as_slice());
            d.base_nibble_bytes.extend(dbe::interleave_pair(
                &pair[0].base_nibbles,
                second,
                group_size,
            ));
        }
        let mut row_masks = 0u32;
        for grp in &p.groups {
            d.tracking_bytes.push(grp.tracking);
            for &mask in &grp.masks {
                d.masks.extend_from_slice(&mask.to_le_bytes()[..width]);
                row_masks += 1;
            }
        }
        let elements = u32::try_from(d.values.len())
            .map_err(|_| Error::FormatLimit("element count exceeds u32".into()))?;
        d.row_ptr.push(elements);
        d.mask_ptr.push(d.mask_ptr.last().unwrap() + row_masks);
    }
    debug_assert!(d.validate().is_ok());
    Ok(d)
}

/// Decodes back to dense through an explicit engine, so the caller can
/// observe the operation counts.
pub fn decode_matrix_with<E: VectorEngine>(
    d: &DcsrMatrix,
    engine: &mut E,
) -> Result<DenseMatrixI8> {
    d.validate()?;
    if engine.group_size() != d.group_size {
        return Err(Error::DimMismatch {
            context: "engine lanes vs container group size",
            expected: d.group_size,
            got: engine.group_size(),
        });
    }
    let idx = RowIndex::build(d);
    let weights = d.values_with_slack();
    let mut dense = vec![0u8; d.rows * d.cols];
    for r in 0..d.rows {
        let row_buf = &mut dense[r * d.cols..(r + 1) * d.cols];
        for_each_group(d, &idx, r, engine, |eng, grp| {
            let w = eng.load_contiguous(&weights, grp.elem_start)?;
            eng.scatter_i8(row_buf, grp.intercept, &grp.offsets, &w, grp.active)
        })?;
    }
    DenseMatrixI8::new(d.rows, d.cols, dense.into_iter().map(|b| b as i8).collect())
}

/// Decodes back to dense with a fresh scalar engine.
pub fn decode_matrix(d: &DcsrMatrix) -> Result<DenseMatrixI8> {
    let mut engine = ScalarEngine::new(d.group_size)?;
    decode_matrix_with(d, &mut engine)
}

/// Summary of a [`audit_group_constraints`] walk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroupAudit {
    pub groups: usize,
    /// Largest stored lane residual seen (bound: 127).
    pub max_residual: u8,
    /// Largest computed lane offset seen across all `g` lanes (bound: 255).
    pub max_offset: u32,
}

/// Audits every stored group against the encoding bounds with an
/// independent scalar walk (no engine, no shared decode path): residuals
/// stay within 127, every lane's `lane·slope + residual` offset within
/// 255 (absent tail lanes included — they still pass through the offset
/// computation), and the reconstructed columns are strictly increasing
/// and inside the row width.
pub fn audit_group_constraints(d: &DcsrMatrix) -> Result<GroupAudit> {
    d.validate()?;
    let g = d.group_size;
    let width = mask_width_bytes(g);
    let mut audit = GroupAudit::default();
    let mut group_base = 0usize;
    let mut nibble_base = 0usize;
    for r in 0..d.rows {
        let (e0, e1) = d.element_range(r);
        let len = e1 - e0;
        let groups = len.div_ceil(g);
        let m = d.slopes[r] as u32;
        let mut mask_cursor = d.mask_ptr[r] as usize;
        let mut intercept = 0i64;
        let mut prev_col: Option<i64> = None;
        for j in 0..groups {
            let count = g.min(len - j * g);
            let tracking = d.tracking_bytes[group_base + j];
            let mut masks = Vec::with_capacity(3);
            for bit in dbe::EXTENSION_BITS {
                if tracking & (1 << (bit - 4)) != 0 {
                    masks.push((bit, read_mask(&d.masks, mask_cursor, width)?));
                    mask_cursor += 1;
                }
            }
            let dn = d.intercept_deltas[group_base + j] as i64;
            intercept = if j == 0 {
                dn
            } else {
                intercept + m as i64 * g as i64 + dn
            };
            for lane in 0..g {
                let byte = d.base_nibble_bytes[nibble_base + j / 2 * g + lane];
                let mut delta = if j % 2 == 0 { byte >> 4 } else { byte & 0x0F };
                for &(bit, mask) in &masks {
                    if mask & (1 << lane) != 0 {
                        delta |= 1 << bit;
                    }
                }
                if lane >= count && delta != 0 {
                    return Err(Error::CorruptContainer(format!(
                        "row {r} group {j}: absent lane {lane} has residual {delta}"
                    )));
                }
                if delta as i64 > MAX_LANE_DELTA {
                    return Err(Error::ConstraintViolation(format!(
                        "row {r} group {j} lane {lane}: residual {delta} > {MAX_LANE_DELTA}"
                    )));
                }
                let offset = lane as u32 * m + delta as u32;
                if offset as i64 > MAX_LANE_OFFSET {
                    return Err(Error::ConstraintViolation(format!(
                        "row {r} group {j} lane {lane}: offset {offset} > {MAX_LANE_OFFSET}"
                    )));
                }
                audit.max_residual = audit.max_residual.max(delta);
                audit.max_offset = audit.max_offset.max(offset);
                if lane < count {
                    let col = offset as i64 + intercept;
                    if col < 0 || col >= d.cols as i64 {
                        return Err(Error::CorruptContainer(format!(
                            "row {r} group {j} lane {lane}: column {col} outside 0..{}",
                            d.cols
                        )));
                    }
                    if prev_col.is_some_and(|p| p >= col) {
                        return Err(Error::CorruptContainer(format!(
                            "row {r}: columns not strictly increasing at group {j} lane {lane}"
                        )));
                    }
                    prev_col = Some(col);
                }
            }
            audit.groups += 1;
        }
        group_base += groups;
        nibble_base += groups.div_ceil(2) * g;
    }
    Ok(audit)
}

struct SectionLayout {
    row_ptr: (usize, usize),
    slopes: (usize, usize),
    mask_ptr: (usize, usize),
    intercept_deltas: (usize, usize),
    tracking: (usize, usize),
    base_nibbles: (usize, usize),
    masks: (usize, usize),
    values: (usize, usize),
    file_len: usize,
}

fn layout(d: &DcsrMatrix) -> SectionLayout {
    let mut at = HEADER_BYTES;
    let mut place = |len: usize| {
        let start = align_up(at);
        at = start + len;
        (start, len)
    };
    let row_ptr = place((d.rows + 1) * 4);
    let slopes = place(d.rows * 2);
    let mask_ptr = place((d.rows + 1) * 4);
    let intercept_deltas = place(d.intercept_deltas.len());
    let tracking = place(d.tracking_bytes.len());
    let base_nibbles = place(d.base_nibble_bytes.len());
    let masks = place(d.masks.len());
    let values = place(d.values.len());
    SectionLayout {
        row_ptr,
        slopes,
        mask_ptr,
        intercept_deltas,
        tracking,
        base_nibbles,
        masks,
        values,
        file_len: align_up(at),
    }
}

/// Serializes to the bit-exact binary image.
pub fn serialize(d: &DcsrMatrix) -> Vec<u8> {
    let lay = layout(d);
    let mut out = vec![0u8; lay.file_len];
    out[0..4].copy_from_slice(&CONTAINER_MAGIC);
    out[4] = CONTAINER_VERSION;
    out[5] = d.group_size as u8;
    out[6] = 4; // base nibble width
    out[7] = 0; // flags
    out[8..12].copy_from_slice(&(d.rows as u32).to_le_bytes());
    out[12..16].copy_from_slice(&(d.cols as u32).to_le_bytes());
    out[16..20].copy_from_slice(&(d.values.len() as u32).to_le_bytes());
    out[20..24].copy_from_slice(&(d.tracking_bytes.len() as u32).to_le_bytes());
    out[24..28].copy_from_slice(&(d.total_masks() as u32).to_le_bytes());

    let mut put = |(start, len): (usize, usize), bytes: &[u8]| {
        debug_assert_eq!(bytes.len(), len);
        out[start..start + len].copy_from_slice(bytes);
    };
    let mut row_ptr_bytes = Vec::with_capacity(lay.row_ptr.1);
    for &p in &d.row_ptr {
        row_ptr_bytes.extend_from_slice(&p.to_le_bytes());
    }
    put(lay.row_ptr, &row_ptr_bytes);
    let mut slope_bytes = Vec::with_capacity(lay.slopes.1);
    for &s in &d.slopes {
        slope_bytes.extend_from_slice(&s.to_le_bytes());
    }
    put(lay.slopes, &slope_bytes);
    let mut mask_ptr_bytes = Vec::with_capacity(lay.mask_ptr.1);
    for &p in &d.mask_ptr {
        mask_ptr_bytes.extend_from_slice(&p.to_le_bytes());
    }
    put(lay.mask_ptr, &mask_ptr_bytes);
    put(
        lay.intercept_deltas,
        &d.intercept_deltas
            .iter()
            .map(|&v| v as u8)
            .collect::<Vec<_>>(),
    );
    put(lay.tracking, &d.tracking_bytes);
    put(lay.base_nibbles, &d.base_nibble_bytes);
    put(lay.masks, &d.masks);
    put(
        lay.values,
        &d.values.iter().map(|&v| v as u8).collect::<Vec<_>>(),
    );
    out
}

/// Parses and validates a binary image.
pub fn deserialize(bytes: &[u8]) -> Result<DcsrMatrix> {
    let mut cur = Cursor::new(bytes);
    let header = cur.take(HEADER_BYTES, "header")?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != CONTAINER_MAGIC {
        return Err(Error::BadMagic {
            expected: CONTAINER_MAGIC,
            got: magic,
        });
    }
    if header[4] != CONTAINER_VERSION {
        return Err(Error::BadVersion(header[4]));
    }
    let group_size = header[5] as usize;
    if header[6] != 4 {
        return Err(Error::CorruptContainer(format!(
            "unsupported base bit-width {}",
            header[6]
        )));
    }
    if header[7] != 0 {
        return Err(Error::CorruptContainer(format!(
            "unsupported flags {:#04x}",
            header[7]
        )));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let rows = word(8);
    let cols = word(12);
    let total_elements = word(16);
    let total_groups = word(20);
    let total_masks = word(24);
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix { rows, cols });
    }
    if !GROUP_SIZES.contains(&group_size) {
        return Err(Error::InvalidParam(format!(
            "group size {group_size} not one of {GROUP_SIZES:?}"
        )));
    }

    let row_ptr = cur.u32s(rows + 1, "row_ptr")?;
    let slopes = cur.u16s(rows, "slopes")?;
    let mask_ptr = cur.u32s(rows + 1, "mask_ptr")?;
    let nibble_bytes: usize = row_ptr
        .windows(2)
        .map(|w| {
            let len = w[1].saturating_sub(w[0]) as usize;
            len.div_ceil(group_size).div_ceil(2) * group_size
        })
        .sum();
    let intercept_deltas = cur
        .bytes(total_groups, "intercept_deltas")?
        .iter()
        .map(|&b| b as i8)
        .collect();
    let tracking_bytes = cur.bytes(total_groups, "tracking")?.to_vec();
    let base_nibble_bytes = cur.bytes(nibble_bytes, "base_nibbles")?.to_vec();
    let masks = cur
        .bytes(total_masks * mask_width_bytes(group_size), "masks")?
        .to_vec();
    let values = cur
        .bytes(total_elements, "values")?
        .iter()
        .map(|&b| b as i8)
        .collect();

    let d = DcsrMatrix {
        rows,
        cols,
        group_size,
        row_ptr,
        slopes,
        mask_ptr,
        intercept_deltas,
        tracking_bytes,
        base_nibble_bytes,
        masks,
        values,
    };
    d.validate()?;
    if d.total_groups() != total_groups {
        return Err(Error::CorruptContainer(format!(
            "header says {total_groups} groups, row_ptr implies {}",
            d.total_groups()
        )));
    }
    if d.total_masks() != total_masks {
        return Err(Error::CorruptContainer(format!(
            "header says {total_masks} masks, mask_ptr implies {}",
            d.total_masks()
        )));
    }
    Ok(d)
}

/// Per-section byte sizes of the core streams (header and alignment fill
/// reported alongside, outside the core total).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectionSizes {
    pub row_ptr_bytes: u64,
    pub slope_bytes: u64,
    pub mask_ptr_bytes: u64,
    pub intercept_bytes: u64,
    pub tracking_bytes: u64,
    pub nibble_bytes: u64,
    pub mask_bytes: u64,
    pub value_stream_bytes: u64,
    pub header_bytes: u64,
    pub alignment_fill_bytes: u64,
}

impl SectionSizes {
    /// Sum of the core sections — what [`footprint`] reports as total.
    pub fn core_total(&self) -> u64 {
        self.row_ptr_bytes
            + self.slope_bytes
            + self.mask_ptr_bytes
            + self.intercept_bytes
            + self.tracking_bytes
            + self.nibble_bytes
            + self.mask_bytes
            + self.value_stream_bytes
    }

    /// Exact serialized file size.
    pub fn file_bytes(&self) -> u64 {
        self.core_total() + self.header_bytes + self.alignment_fill_bytes
    }
}

/// Measures every section of the container.
pub fn section_sizes(d: &DcsrMatrix) -> SectionSizes {
    let lay = layout(d);
    let s = SectionSizes {
        row_ptr_bytes: lay.row_ptr.1 as u64,
        slope_bytes: lay.slopes.1 as u64,
        mask_ptr_bytes: lay.mask_ptr.1 as u64,
        intercept_bytes: lay.intercept_deltas.1 as u64,
        tracking_bytes: lay.tracking.1 as u64,
        nibble_bytes: lay.base_nibbles.1 as u64,
        mask_bytes: lay.masks.1 as u64,
        value_stream_bytes: lay.values.1 as u64,
        header_bytes: HEADER_BYTES as u64,
        alignment_fill_bytes: 0,
    };
    SectionSizes {
        alignment_fill_bytes: lay.file_len as u64 - s.core_total() - HEADER_BYTES as u64,
        ..s
    }
}

/// Byte accounting over the core streams: live weights vs inserted
/// padding vs structural metadata.
pub fn footprint(d: &DcsrMatrix) -> FootprintBreakdown {
    let s = section_sizes(d);
    let padding = d.padding_elements() as u64;
    let values = s.value_stream_bytes - padding;
    let metadata = s.core_total() - s.value_stream_bytes;
    FootprintBreakdown::new(values, padding, metadata, d.rows, d.cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Counters;
    use crate::matrix::{generate_uniform_sparse, GeneratorSpec};

    fn example_1x16() -> DenseMatrixI8 {
        let mut m = DenseMatrixI8::zeros(1, 16).unwrap();
        for (i, &c) in [0usize, 3, 7, 9, 12, 15].iter().enumerate() {
            m.set(0, c, (i + 1) as i8);
        }
        m
    }

    #[test]
    fn encodes_reference_row() {
        let d = encode_matrix(&example_1x16(), 4).unwrap();
        assert_eq!(d.row_ptr, vec![0, 6]);
        assert_eq!(d.slopes, vec![3]);
        assert_eq!(d.mask_ptr, vec![0, 0]);
        assert_eq!(d.intercept_deltas, vec![0, 0]);
        assert_eq!(d.tracking_bytes, vec![0, 0]);
        assert_eq!(d.base_nibble_bytes, vec![0x00, 0x00, 0x10, 0x00]);
        assert!(d.masks.is_empty());
        assert_eq!(d.values, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(d.padding_elements(), 0);
    }

    #[test]
    fn all_zero_matrix_has_empty_streams() {
        let m = DenseMatrixI8::zeros(8, 8).unwrap();
        let d = encode_matrix(&m, 4).unwrap();
        assert!(d.row_ptr.iter().all(|&p| p == 0));
        assert!(d.values.is_empty());
        assert!(d.tracking_bytes.is_empty());
        assert_eq!(decode_matrix(&d).unwrap(), m);
        let f = footprint(&d);
        assert_eq!((f.values_bytes, f.padding_bytes), (0, 0));
        assert_eq!(f.metadata_bytes, 36 + 16 + 36); // the three row tables
    }

    #[test]
    fn decode_inverts_encode_on_random_matrix() {
        let m = generate_uniform_sparse(&GeneratorSpec {
            rows: 256,
            cols: 256,
            sparsity: 0.9,
            seed: 42,
        })
        .unwrap();
        for g in [2, 4, 16] {
            let d = encode_matrix(&m, g).unwrap();
            assert_eq!(decode_matrix(&d).unwrap(), m, "group size {g}");
        }
    }

    #[test]
    fn padding_survives_round_trip_and_is_counted() {
        let mut m = DenseMatrixI8::zeros(1, 300).unwrap();
        m.set(0, 0, 7);
        m.set(0, 299, -7);
        let d = encode_matrix(&m, 2).unwrap();
        assert_eq!(d.values, vec![7, 0, -7]);
        assert_eq!(d.padding_elements(), 1);
        assert_eq!(decode_matrix(&d).unwrap(), m);
        let f = footprint(&d);
        assert_eq!((f.values_bytes, f.padding_bytes), (2, 1));
    }

    #[test]
    fn extension_masks_round_trip() {
        // residuals above 15 force extension planes
        let mut m = DenseMatrixI8::zeros(2, 64).unwrap();
        for &c in &[0usize, 1, 2, 40] {
            m.set(0, c, 3);
        }
        for &c in &[5usize, 20, 33, 63] {
            m.set(1, c, -3);
        }
        let d = encode_matrix(&m, 4).unwrap();
        assert!(d.total_masks() > 0);
        assert_eq!(decode_matrix(&d).unwrap(), m);
    }

    #[test]
    fn serializes_reference_row_to_golden_bytes() {
        let d = encode_matrix(&example_1x16(), 4).unwrap();
        let bytes = serialize(&d);
        let expected: Vec<u8> = [
            b"DCSR".as_slice(),
            &[1, 4, 4, 0],
            &1u32.to_le_bytes(),
            &16u32.to_le_bytes(),
            &6u32.to_le_bytes(),
            &2u32.to_le_bytes(),
            &0u32.to_le_bytes(),
            &[0, 0, 0, 0, 6, 0, 0, 0], // row_ptr
            &[3, 0, 0, 0],             // slope + fill
            &[0; 8],                   // mask_ptr
            &[0, 0, 0, 0],             // intercept deltas + fill
            &[0, 0, 0, 0],             // tracking + fill
            &[0x00, 0x00, 0x10, 0x00], // nibbles
            &[1, 2, 3, 4, 5, 6, 0, 0], // values + fill
        ]
        .concat();
        assert_eq!(bytes, expected);
        assert_eq!(deserialize(&bytes).unwrap(), d);
    }

    #[test]
    fn serialization_round_trips_random_matrices() {
        for (g, seed) in [(2, 1u64), (8, 2), (32, 3)] {
            let m = generate_uniform_sparse(&GeneratorSpec {
                rows: 33,
                cols: 127,
                sparsity: 0.8,
                seed,
            })
            .unwrap();
            let d = encode_matrix(&m, g).unwrap();
            let bytes = serialize(&d);
            assert_eq!(bytes.len() % 4, 0);
            assert_eq!(deserialize(&bytes).unwrap(), d);
        }
    }

    #[test]
    fn deserialize_rejects_damage() {
        let d = encode_matrix(&example_1x16(), 4).unwrap();
        let good = serialize(&d);

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(deserialize(&bad), Err(Error::BadMagic { .. })));

        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(deserialize(&bad), Err(Error::BadVersion(9))));

        let mut bad = good.clone();
        bad[7] = 1;
        assert!(matches!(deserialize(&bad), Err(Error::CorruptContainer(_))));

        assert!(matches!(
            deserialize(&good[..good.len() - 5]),
            Err(Error::Truncated { .. })
        ));

        // a tracking byte that promises masks the stream does not carry
        let mut bad = good.clone();
        bad[52] = 0b001;
        assert!(matches!(
            deserialize(&bad),
            Err(Error::MaskCountMismatch(_))
        ));
    }

    #[test]
    fn footprint_matches_reference_accounting() {
        let d = encode_matrix(&example_1x16(), 4).unwrap();
        let f = footprint(&d);
        assert_eq!(f.values_bytes, 6);
        assert_eq!(f.padding_bytes, 0);
        assert_eq!(f.metadata_bytes, 26); // 4 nibble + 2 tracking + 2 step + 2 slope + 8 row_ptr + 8 mask_ptr
        assert_eq!(f.total_bytes, 32);
        assert_eq!(f.compression_ratio, 0.5);
        let s = section_sizes(&d);
        assert_eq!(s.core_total(), f.total_bytes);
        assert_eq!(s.file_bytes(), serialize(&d).len() as u64);
        assert_eq!(s.header_bytes, 28);
        assert_eq!(s.alignment_fill_bytes, 8);
    }

    #[test]
    fn decode_issues_expected_operation_mix() {
        let d = encode_matrix(&example_1x16(), 4).unwrap();
        let mut engine = ScalarEngine::new(4).unwrap();
        decode_matrix_with(&d, &mut engine).unwrap();
        // 1 nibble-pair load + 2 weight loads, shr4 + and, 2 affine adds,
        // 2 scatters, no extension ORs, no gathers
        assert_eq!(
            engine.counters(),
            Counters {
                contiguous_loads: 3,
                gather_loads: 0,
                scatter_stores: 2,
                mac_lanes: 0,
                vector_ops: 9,
            }
        );
    }

    #[test]
    fn engine_group_size_must_match_container() {
        let d = encode_matrix(&example_1x16(), 4).unwrap();
        let mut engine = ScalarEngine::new(8).unwrap();
        assert!(matches!(
            decode_matrix_with(&d, &mut engine),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn partial_tail_group_decodes() {
        // 5 elements with g=4: second group holds a single lane
        let mut m = DenseMatrixI8::zeros(1, 32).unwrap();
        for &c in &[1usize, 6, 11, 17, 23] {
            m.set(0, c, 9);
        }
        let d = encode_matrix(&m, 4).unwrap();
        assert_eq!(d.base_nibble_bytes.len(), 4);
        assert_eq!(decode_matrix(&d).unwrap(), m);
    }

    #[test]
    fn audit_accepts_encoded_matrices_and_catches_tampering() {
        let m = generate_uniform_sparse(&GeneratorSpec {
            rows: 64,
            cols: 256,
            sparsity: 0.9,
            seed: 5,
        })
        .unwrap();
        let mut d = encode_matrix(&m, 16).unwrap();
        let audit = audit_group_constraints(&d).unwrap();
        assert_eq!(audit.groups, d.tracking_bytes.len());
        assert!(audit.max_residual <= 127);
        assert!(audit.max_offset <= 255);

        // an inflated slope pushes the top lane's offset out of range
        d.slopes[0] = 300;
        assert!(matches!(
            audit_group_constraints(&d),
            Err(Error::ConstraintViolation(_) | Error::CorruptContainer(_))
        ));
    }
}
