//! Block compressed sparse row with fixed 2x2 blocks.

use crate::error::{Error, Result};
use crate::footprint::FootprintBreakdown;
use crate::matrix::DenseMatrixI8;
use crate::wire::{Cursor, Writer};

pub const BCSR_MAGIC: [u8; 4] = *b"BCSR";
const VERSION: u8 = 1;
const U16_LIMIT: usize = u16::MAX as usize;
pub const BLOCK_DIM: usize = 2;
const BLOCK_AREA: usize = BLOCK_DIM * BLOCK_DIM;

/// 2x2 block CSR: a block is stored iff it holds at least one non-zero,
/// and stored blocks keep their zero cells. Odd matrix dimensions are
/// padded virtually with zero rows/columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BcsrMatrix {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    /// Four bytes per block, row-major within the block.
    pub(crate) block_values: Vec<i8>,
    pub(crate) block_col_idx: Vec<u16>,
    pub(crate) block_row_ptr: Vec<u16>,
}

impl BcsrMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn blocks(&self) -> usize {
        self.block_col_idx.len()
    }

    pub fn block_rows(&self) -> usize {
        self.rows.div_ceil(BLOCK_DIM)
    }
}

pub fn encode_bcsr(m: &DenseMatrixI8) -> Result<BcsrMatrix> {
    let block_rows = m.rows().div_ceil(BLOCK_DIM);
    let block_cols = m.cols().div_ceil(BLOCK_DIM);
    if block_rows > U16_LIMIT {
        return Err(Error::FormatLimit(format!(
            "BCSR row pointers are 16-bit; {block_rows} block rows exceed {U16_LIMIT}"
        )));
    }
    if block_cols > U16_LIMIT + 1 {
        return Err(Error::FormatLimit(format!(
            "BCSR block column indices are 16-bit; {block_cols} block columns exceed {}",
            U16_LIMIT + 1
        )));
    }
    let mut b = BcsrMatrix {
        rows: m.rows(),
        cols: m.cols(),
        block_values: Vec::new(),
        block_col_idx: Vec::new(),
        block_row_ptr: Vec::with_capacity(block_rows + 1),
    };
    b.block_row_ptr.push(0);
    let cell = |r: usize, c: usize| -> i8 {
        if r < m.rows() && c < m.cols() {
            m.get(r, c)
        } else {
            0
        }
    };
    for br in 0..block_rows {
        for bc in 0..block_cols {
            let block = [
                cell(br * 2, bc * 2),
                cell(br * 2, bc * 2 + 1),
                cell(br * 2 + 1, bc * 2),
                cell(br * 2 + 1, bc * 2 + 1),
            ];
            if block.iter().any(|&v| v != 0) {
                if b.blocks() == U16_LIMIT {
                    return Err(Error::FormatLimit(format!(
                        "BCSR row pointers are 16-bit; block count exceeds {U16_LIMIT}"
                    )));
                }
                b.block_values.extend_from_slice(&block);
                b.block_col_idx.push(bc as u16);
            }
        }
        b.block_row_ptr.push(b.blocks() as u16);
    }
    Ok(b)
}

pub fn decode_bcsr(b: &BcsrMatrix) -> Result<DenseMatrixI8> {
    let mut m = DenseMatrixI8::zeros(b.rows, b.cols)?;
    let block_rows = b.block_rows();
    if b.block_row_ptr.len() != block_rows + 1
        || b.block_row_ptr[0] != 0
        || b.block_row_ptr.windows(2).any(|w| w[0] > w[1])
        || b.block_row_ptr[block_rows] as usize != b.blocks()
        || b.block_values.len() != b.blocks() * BLOCK_AREA
    {
        return Err(Error::CorruptContainer(
            "BCSR stream lengths inconsistent".into(),
        ));
    }
    for br in 0..block_rows {
        for e in b.block_row_ptr[br] as usize..b.block_row_ptr[br + 1] as usize {
            let bc = b.block_col_idx[e] as usize;
            if bc >= b.cols.div_ceil(BLOCK_DIM) {
                return Err(Error::CorruptContainer(format!(
                    "BCSR block column {bc} outside width {}",
                    b.cols
                )));
            }
            for i in 0..BLOCK_DIM {
                for j in 0..BLOCK_DIM {
                    let (r, c) = (br * 2 + i, bc * 2 + j);
                    let v = b.block_values[e * BLOCK_AREA + i * BLOCK_DIM + j];
                    if r < b.rows && c < b.cols {
                        m.set(r, c, v);
                    } else if v != 0 {
                        return Err(Error::CorruptContainer(
                            "BCSR virtual padding cell holds a non-zero".into(),
                        ));
                    }
                }
            }
        }
    }
    Ok(m)
}

/// 4 value bytes per block + 2 per block column index + 2 per block row
/// pointer; zero cells inside stored blocks count as padding.
pub fn footprint_bcsr(b: &BcsrMatrix) -> FootprintBreakdown {
    let stored = b.block_values.len() as u64;
    let live = b.block_values.iter().filter(|&&v| v != 0).count() as u64;
    let metadata = b.blocks() as u64 * 2 + (b.block_rows() as u64 + 1) * 2;
    FootprintBreakdown::new(live, stored - live, metadata, b.rows, b.cols)
}

pub fn serialize_bcsr(b: &BcsrMatrix) -> Vec<u8> {
    let mut w = Writer::new();
    w.raw(&BCSR_MAGIC);
    w.raw(&[VERSION, 0, 0, 0]);
    w.raw(&(b.rows as u32).to_le_bytes());
    w.raw(&(b.cols as u32).to_le_bytes());
    w.raw(&(b.blocks() as u32).to_le_bytes());
    w.bytes(&b.block_values.iter().map(|&v| v as u8).collect::<Vec<_>>());
    w.u16s(&b.block_col_idx);
    w.u16s(&b.block_row_ptr);
    w.finish()
}

pub fn deserialize_bcsr(bytes: &[u8]) -> Result<BcsrMatrix> {
    let mut cur = Cursor::new(bytes);
    let header = cur.take(20, "BCSR header")?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != BCSR_MAGIC {
        return Err(Error::BadMagic {
            expected: BCSR_MAGIC,
            got: magic,
        });
    }
    if header[4] != VERSION {
        return Err(Error::BadVersion(header[4]));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols, blocks) = (word(8), word(12), word(16));
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix { rows, cols });
    }
    if blocks > U16_LIMIT {
        return Err(Error::FormatLimit(
            "BCSR header exceeds 16-bit limits".into(),
        ));
    }
    let block_values = cur
        .bytes(blocks * BLOCK_AREA, "BCSR block values")?
        .iter()
        .map(|&v| v as i8)
        .collect();
    let block_col_idx = cur.u16s(blocks, "BCSR block col_idx")?;
    let block_row_ptr = cur.u16s(rows.div_ceil(BLOCK_DIM) + 1, "BCSR block row_ptr")?;
    let b = BcsrMatrix {
        rows,
        cols,
        block_values,
        block_col_idx,
        block_row_ptr,
    };
    decode_bcsr(&b)?; // structural validation
    Ok(b)
}
