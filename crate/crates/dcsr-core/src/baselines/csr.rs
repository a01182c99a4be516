//! Compressed sparse row with 16-bit index arrays.

use crate::error::{Error, Result};
use crate::footprint::FootprintBreakdown;
use crate::matrix::DenseMatrixI8;
use crate::wire::{Cursor, Writer};

pub const CSR_MAGIC: [u8; 4] = *b"CSRX";
const VERSION: u8 = 1;
const U16_LIMIT: usize = u16::MAX as usize;

/// CSR with unsigned 16-bit column indices and row pointers, the common
/// embedded trade-off; it caps the format at 65535 stored values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrMatrix16 {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) values: Vec<i8>,
    pub(crate) col_idx: Vec<u16>,
    pub(crate) row_ptr: Vec<u16>,
}

impl CsrMatrix16 {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

pub fn encode_csr(m: &DenseMatrixI8) -> Result<CsrMatrix16> {
    if m.rows() > U16_LIMIT {
        return Err(Error::FormatLimit(format!(
            "CSR-16 row pointers are 16-bit; {} rows exceed {U16_LIMIT}",
            m.rows()
        )));
    }
    if m.cols() > U16_LIMIT + 1 {
        return Err(Error::FormatLimit(format!(
            "CSR-16 column indices are 16-bit; width {} exceeds {}",
            m.cols(),
            U16_LIMIT + 1
        )));
    }
    let nnz = m.nnz();
    if nnz > U16_LIMIT {
        return Err(Error::FormatLimit(format!(
            "CSR-16 row pointers are 16-bit; {nnz} non-zeros exceed {U16_LIMIT}"
        )));
    }
    let mut c = CsrMatrix16 {
        rows: m.rows(),
        cols: m.cols(),
        values: Vec::with_capacity(nnz),
        col_idx: Vec::with_capacity(nnz),
        row_ptr: Vec::with_capacity(m.rows() + 1),
    };
    c.row_ptr.push(0);
    for r in 0..m.rows() {
        for (col, &v) in m.row(r).iter().enumerate() {
            if v != 0 {
                c.values.push(v);
                c.col_idx.push(col as u16);
            }
        }
        c.row_ptr.push(c.values.len() as u16);
    }
    Ok(c)
}

pub fn decode_csr(c: &CsrMatrix16) -> Result<DenseMatrixI8> {
    let mut m = DenseMatrixI8::zeros(c.rows, c.cols)?;
    if c.row_ptr.len() != c.rows + 1 || c.row_ptr[0] != 0 {
        return Err(Error::CorruptContainer("CSR row_ptr malformed".into()));
    }
    if c.row_ptr.windows(2).any(|w| w[0] > w[1])
        || c.row_ptr[c.rows] as usize != c.values.len()
        || c.col_idx.len() != c.values.len()
    {
        return Err(Error::CorruptContainer(
            "CSR stream lengths inconsistent".into(),
        ));
    }
    for r in 0..c.rows {
        for e in c.row_ptr[r] as usize..c.row_ptr[r + 1] as usize {
            let col = c.col_idx[e] as usize;
            if col >= c.cols {
                return Err(Error::CorruptContainer(format!(
                    "CSR column {col} outside width {}",
                    c.cols
                )));
            }
            m.set(r, col, c.values[e]);
        }
    }
    Ok(m)
}

/// `nnz` value bytes + 2 bytes per column index + 2 per row pointer.
pub fn footprint_csr(c: &CsrMatrix16) -> FootprintBreakdown {
    let nnz = c.values.len() as u64;
    let metadata = nnz * 2 + (c.rows as u64 + 1) * 2;
    FootprintBreakdown::new(nnz, 0, metadata, c.rows, c.cols)
}

pub fn serialize_csr(c: &CsrMatrix16) -> Vec<u8> {
    let mut w = Writer::new();
    w.raw(&CSR_MAGIC);
    w.raw(&[VERSION, 0, 0, 0]);
    w.raw(&(c.rows as u32).to_le_bytes());
    w.raw(&(c.cols as u32).to_le_bytes());
    w.raw(&(c.values.len() as u32).to_le_bytes());
    w.bytes(&c.values.iter().map(|&v| v as u8).collect::<Vec<_>>());
    w.u16s(&c.col_idx);
    w.u16s(&c.row_ptr);
    w.finish()
}

pub fn deserialize_csr(bytes: &[u8]) -> Result<CsrMatrix16> {
    let mut cur = Cursor::new(bytes);
    let header = cur.take(20, "CSR header")?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != CSR_MAGIC {
        return Err(Error::BadMagic {
            expected: CSR_MAGIC,
            got: magic,
        });
    }
    if header[4] != VERSION {
        return Err(Error::BadVersion(header[4]));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols, nnz) = (word(8), word(12), word(16));
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix { rows, cols });
    }
    if rows > U16_LIMIT || nnz > U16_LIMIT {
        return Err(Error::FormatLimit(
            "CSR-16 header exceeds 16-bit limits".into(),
        ));
    }
    let values = cur
        .bytes(nnz, "CSR values")?
        .iter()
        .map(|&b| b as i8)
        .collect();
    let col_idx = cur.u16s(nnz, "CSR col_idx")?;
    let row_ptr = cur.u16s(rows + 1, "CSR row_ptr")?;
    let c = CsrMatrix16 {
        rows,
        cols,
        values,
        col_idx,
        row_ptr,
    };
    decode_csr(&c)?; // structural validation
    Ok(c)
}
