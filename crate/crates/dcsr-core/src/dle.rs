//! Delta-linear encoding of sorted column indices.
//!
//! A sparse row's column indices are modeled per lane group as an affine
//! ramp `lane * slope` plus a group intercept; what remains after removing
//! the ramp and the group minimum is a small non-negative residual per
//! lane. Rows whose residuals or intercept steps exceed the storable
//! ranges are repaired by inserting zero-valued padding columns.

use crate::error::{Error, Result};
use crate::matrix::SparseRow;

/// Lane-group sizes the codec supports.
pub const GROUP_SIZES: [usize; 5] = [2, 4, 8, 16, 32];

/// Maximum residual storable in a base nibble plus three extension bits.
pub const MAX_LANE_DELTA: i64 = 127;
/// Maximum per-lane gather offset (`lane * slope + residual`).
pub const MAX_LANE_OFFSET: i64 = 255;

/// Encoding parameters for one matrix: lane-group width and row width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DleParams {
    pub group_size: usize,
    pub row_width: usize,
}

impl DleParams {
    pub fn new(group_size: usize, row_width: usize) -> Result<Self> {
        if !GROUP_SIZES.contains(&group_size) {
            return Err(Error::InvalidParam(format!(
                "group size {group_size} not one of {GROUP_SIZES:?}"
            )));
        }
        if row_width == 0 || row_width > u16::MAX as usize {
            return Err(Error::InvalidParam(format!(
                "row width {row_width} outside 1..=65535"
            )));
        }
        Ok(Self {
            group_size,
            row_width,
        })
    }
}

/// One row's delta-linear decomposition.
///
/// `lane_deltas[p]` is the residual of the element at in-row position `p`;
/// `intercept_deltas[j]` is the step from group `j-1`'s predicted intercept
/// (`previous + slope * group_size`) to group `j`'s actual one, with entry 0
/// holding the absolute first intercept.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RowEncoding {
    pub slope: u16,
    pub lane_deltas: Vec<u8>,
    pub intercept_deltas: Vec<i8>,
}

impl RowEncoding {
    /// Number of stored elements, padding included.
    pub fn len(&self) -> usize {
        self.lane_deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lane_deltas.is_empty()
    }

    /// Group count (`ceil(len / group_size)`).
    pub fn group_count(&self, group_size: usize) -> usize {
        self.lane_deltas.len().div_ceil(group_size)
    }

    /// Absolute group intercepts, unrolled from the stored deltas.
    pub fn intercepts(&self, group_size: usize) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.intercept_deltas.len());
        let mut prev = 0i64;
        for (j, &dn) in self.intercept_deltas.iter().enumerate() {
            let n = if j == 0 {
                dn as i64
            } else {
                prev + self.slope as i64 * group_size as i64 + dn as i64
            };
            out.push(n);
            prev = n;
        }
        out
    }
}

/// Rounded-to-nearest ratio of row width to element count (ties up), the
/// expected column stride between consecutive elements. Zero for empty rows.
pub fn compute_slope(element_count: usize, row_width: usize) -> u16 {
    if element_count == 0 {
        return 0;
    }
    ((2 * row_width + element_count) / (2 * element_count)) as u16
}

/// Raw (unclamped) decomposition used for constraint checking.
struct RawRow {
    slope: u16,
    lane_deltas: Vec<i64>,
    intercept_deltas: Vec<i64>,
}

/// Which storable-range bounds a raw decomposition exceeds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConstraintCheck {
    /// Some residual exceeds [`MAX_LANE_DELTA`].
    pub lane_delta_exceeded: bool,
    /// Some `lane * slope + residual` exceeds [`MAX_LANE_OFFSET`].
    pub lane_offset_exceeded: bool,
    /// Some intercept delta falls outside `i8`.
    pub intercept_exceeded: bool,
}

impl ConstraintCheck {
    pub fn ok(&self) -> bool {
        !(self.lane_delta_exceeded || self.lane_offset_exceeded || self.intercept_exceeded)
    }
}

fn raw_decompose(columns: &[u32], params: &DleParams) -> RawRow {
    let g = params.group_size;
    let slope = compute_slope(columns.len(), params.row_width);
    let m = slope as i64;
    let mut lane_deltas = Vec::with_capacity(columns.len());
    let mut intercepts = Vec::new();
    for chunk in columns.chunks(g) {
        let deltas: Vec<i64> = chunk
            .iter()
            .enumerate()
            .map(|(lane, &c)| c as i64 - lane as i64 * m)
            .collect();
        let intercept = *deltas.iter().min().expect("chunks are non-empty");
        lane_deltas.extend(deltas.iter().map(|d| d - intercept));
        intercepts.push(intercept);
    }
    let mut intercept_deltas = Vec::with_capacity(intercepts.len());
    let mut prev = 0i64;
    for (j, &n) in intercepts.iter().enumerate() {
        let dn = if j == 0 { n } else { n - (prev + m * g as i64) };
        intercept_deltas.push(dn);
        prev = n;
    }
    RawRow {
        slope,
        lane_deltas,
        intercept_deltas,
    }
}

fn check(raw: &RawRow, group_size: usize) -> ConstraintCheck {
    let m = raw.slope as i64;
    let mut c = ConstraintCheck::default();
    for (p, &d) in raw.lane_deltas.iter().enumerate() {
        if d > MAX_LANE_DELTA {
            c.lane_delta_exceeded = true;
        }
        if (p % group_size) as i64 * m + d > MAX_LANE_OFFSET {
            c.lane_offset_exceeded = true;
        }
    }
    // A partial final group still runs the whole-register offset
    // computation; its absent lanes carry zero residuals but the full
    // `lane * slope` ramp, so the top lane must stay storable too.
    if !raw.lane_deltas.len().is_multiple_of(group_size)
        && (group_size as i64 - 1) * m > MAX_LANE_OFFSET
    {
        c.lane_offset_exceeded = true;
    }
    if raw
        .intercept_deltas
        .iter()
        .any(|&dn| dn < i8::MIN as i64 || dn > i8::MAX as i64)
    {
        c.intercept_exceeded = true;
    }
    c
}

/// Decomposes sorted column indices, or reports which bound they exceed.
pub fn decompose_row(columns: &[u32], params: &DleParams) -> Result<RowEncoding> {
    debug_assert!(columns.windows(2).all(|w| w[0] < w[1]));
    let raw = raw_decompose(columns, params);
    let chk = check(&raw, params.group_size);
    if !chk.ok() {
        return Err(Error::ConstraintViolation(format!(
            "row not representable (residual>127: {}, offset>255: {}, intercept step out of i8: {})",
            chk.lane_delta_exceeded, chk.lane_offset_exceeded, chk.intercept_exceeded
        )));
    }
    Ok(RowEncoding {
        slope: raw.slope,
        lane_deltas: raw.lane_deltas.iter().map(|&d| d as u8).collect(),
        intercept_deltas: raw.intercept_deltas.iter().map(|&d| d as i8).collect(),
    })
}

/// Inverse of [`decompose_row`]: rebuilds the absolute column indices.
pub fn reconstruct_columns(enc: &RowEncoding, group_size: usize) -> Vec<u32> {
    let m = enc.slope as i64;
    let intercepts = enc.intercepts(group_size);
    enc.lane_deltas
        .iter()
        .enumerate()
        .map(|(p, &d)| {
            let lane = (p % group_size) as i64;
            (lane * m + d as i64 + intercepts[p / group_size]) as u32
        })
        .collect()
}

/// Inserts zero-valued padding columns until the row decomposes within
/// bounds. Each round splits the widest free span at its midpoint; a fully
/// dense row always decomposes, so this terminates.
pub fn insert_padding(columns: &[u32], params: &DleParams) -> Result<Vec<u32>> {
    let mut cols: Vec<u32> = columns.to_vec();
    if let Some(&last) = cols.last() {
        if last as usize >= params.row_width {
            return Err(Error::InvalidParam(format!(
                "column index {last} outside row width {}",
                params.row_width
            )));
        }
    }
    for _ in 0..=params.row_width {
        let raw = raw_decompose(&cols, params);
        if check(&raw, params.group_size).ok() {
            return Ok(cols);
        }
        let at = widest_gap_midpoint(&cols, params.row_width)
            .ok_or_else(|| Error::ConstraintViolation("dense row failed decomposition".into()))?;
        let pos = cols.partition_point(|&c| c < at);
        cols.insert(pos, at);
    }
    Err(Error::ConstraintViolation(
        "padding did not converge within row width".into(),
    ))
}

/// Midpoint of the widest gap between occupied columns (virtual boundaries
/// at -1 and the row width; ties resolve to the leftmost gap). `None` when
/// every column is occupied.
fn widest_gap_midpoint(columns: &[u32], row_width: usize) -> Option<u32> {
    let mut best: Option<(i64, i64)> = None; // (free positions, left edge)
    let mut left = -1i64;
    let edges = columns
        .iter()
        .map(|&c| c as i64)
        .chain(std::iter::once(row_width as i64));
    for right in edges {
        let free = right - left - 1;
        if free > 0 && best.is_none_or(|(bf, _)| free > bf) {
            best = Some((free, left));
        }
        left = right;
    }
    best.map(|(free, left)| {
        let right = left + free + 1;
        ((left + right) / 2) as u32
    })
}

/// A row after padding: final columns/values and the delta decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedRow {
    pub columns: Vec<u32>,
    pub values: Vec<i8>,
    pub encoding: RowEncoding,
    pub padding: usize,
}

/// Pads and decomposes one sparse row; padding elements carry value 0.
pub fn encode_row(row: &SparseRow, params: &DleParams) -> Result<EncodedRow> {
    let columns = insert_padding(&row.columns, params)?;
    let encoding = decompose_row(&columns, params)?;
    let mut values = vec![0i8; columns.len()];
    let mut src = 0usize;
    for (i, &c) in columns.iter().enumerate() {
        if src < row.columns.len() && row.columns[src] == c {
            values[i] = row.values[src];
            src += 1;
        }
    }
    debug_assert_eq!(src, row.columns.len());
    let padding = columns.len() - row.columns.len();
    Ok(EncodedRow {
        columns,
        values,
        encoding,
        padding,
    })
}
