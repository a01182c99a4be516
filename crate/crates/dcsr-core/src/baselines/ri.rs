//! Relative indexing: fixed-width column deltas with zero padding.
//!
//! Each element stores the gap to its predecessor in `b` bits (the first
//! element of a row stores its absolute column). Gaps wider than `2^b - 1`
//! are bridged by inserting zero-valued padding elements carrying the
//! maximum delta, so the padding volume grows with sparsity.

use crate::error::{Error, Result};
use crate::footprint::FootprintBreakdown;
use crate::matrix::DenseMatrixI8;
use crate::wire::{Cursor, Writer};

pub const RI_MAGIC: [u8; 4] = *b"RIDX";
const VERSION: u8 = 1;
const U16_LIMIT: usize = u16::MAX as usize;

/// Default delta width: 4 bits.
pub const DEFAULT_DELTA_BITS: u8 = 4;

/// Sparse matrix as bit-packed column deltas plus a value stream in which
/// padding elements hold 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiMatrix {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) delta_bits: u8,
    pub(crate) values: Vec<i8>,
    /// Deltas packed LSB-first: element `e` occupies bits
    /// `[e*delta_bits, (e+1)*delta_bits)`.
    pub(crate) deltas: Vec<u8>,
    pub(crate) row_ptr: Vec<u16>,
}

impl RiMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn delta_bits(&self) -> u8 {
        self.delta_bits
    }

    /// Stored elements, padding included.
    pub fn total_elements(&self) -> usize {
        self.values.len()
    }

    /// Inserted gap-bridging elements (value 0).
    pub fn padding_elements(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0).count()
    }

    pub(crate) fn delta(&self, element: usize) -> u8 {
        read_packed(&self.deltas, element, self.delta_bits)
    }
}

fn check_bits(b: u8) -> Result<()> {
    if !(2..=8).contains(&b) {
        return Err(Error::InvalidParam(format!(
            "delta width {b} outside 2..=8"
        )));
    }
    Ok(())
}

fn write_packed(buf: &mut Vec<u8>, element: usize, bits: u8, value: u8) {
    let off = element * bits as usize;
    let (byte, shift) = (off / 8, off % 8);
    if byte + 1 >= buf.len() {
        buf.resize(byte + 2, 0);
    }
    let word = (value as u16) << shift;
    buf[byte] |= word as u8;
    buf[byte + 1] |= (word >> 8) as u8;
}

fn read_packed(buf: &[u8], element: usize, bits: u8) -> u8 {
    let off = element * bits as usize;
    let (byte, shift) = (off / 8, off % 8);
    let hi = buf.get(byte + 1).copied().unwrap_or(0) as u16;
    let word = buf[byte] as u16 | hi << 8;
    (word >> shift) as u8 & ((1u16 << bits) - 1) as u8
}

pub fn encode_ri(m: &DenseMatrixI8, delta_bits: u8) -> Result<RiMatrix> {
    check_bits(delta_bits)?;
    if m.rows() > U16_LIMIT {
        return Err(Error::FormatLimit(format!(
            "relative-indexing row pointers are 16-bit; {} rows exceed {U16_LIMIT}",
            m.rows()
        )));
    }
    let max_delta = (1u32 << delta_bits) - 1;
    let mut r = RiMatrix {
        rows: m.rows(),
        cols: m.cols(),
        delta_bits,
        values: Vec::new(),
        deltas: Vec::new(),
        row_ptr: Vec::with_capacity(m.rows() + 1),
    };
    r.row_ptr.push(0);
    let mut packed = Vec::new();
    let push = |packed: &mut Vec<u8>, values: &mut Vec<i8>, delta: u32, v: i8| -> Result<()> {
        if values.len() == U16_LIMIT {
            return Err(Error::FormatLimit(format!(
                "relative-indexing row pointers are 16-bit; element count exceeds {U16_LIMIT}"
            )));
        }
        write_packed(packed, values.len(), delta_bits, delta as u8);
        values.push(v);
        Ok(())
    };
    for row in 0..m.rows() {
        let mut cursor = 0usize;
        for (col, &v) in m.row(row).iter().enumerate() {
            if v == 0 {
                continue;
            }
            let mut gap = (col - cursor) as u32;
            while gap > max_delta {
                push(&mut packed, &mut r.values, max_delta, 0)?;
                gap -= max_delta;
            }
            push(&mut packed, &mut r.values, gap, v)?;
            cursor = col;
        }
        r.row_ptr.push(r.values.len() as u16);
    }
    // trim the write-side slack byte
    packed.truncate((r.values.len() * delta_bits as usize).div_ceil(8));
    r.deltas = packed;
    Ok(r)
}

pub fn decode_ri(r: &RiMatrix) -> Result<DenseMatrixI8> {
    check_bits(r.delta_bits)?;
    let mut m = DenseMatrixI8::zeros(r.rows, r.cols)?;
    if r.row_ptr.len() != r.rows + 1
        || r.row_ptr[0] != 0
        || r.row_ptr.windows(2).any(|w| w[0] > w[1])
        || r.row_ptr[r.rows] as usize != r.values.len()
        || r.deltas.len() != (r.values.len() * r.delta_bits as usize).div_ceil(8)
    {
        return Err(Error::CorruptContainer(
            "relative-indexing streams inconsistent".into(),
        ));
    }
    for row in 0..r.rows {
        let mut cursor = 0usize;
        for e in r.row_ptr[row] as usize..r.row_ptr[row + 1] as usize {
            cursor += r.delta(e) as usize;
            if cursor >= r.cols {
                return Err(Error::CorruptContainer(format!(
                    "relative-indexing column {cursor} outside width {}",
                    r.cols
                )));
            }
            let v = r.values[e];
            if v != 0 {
                m.set(row, cursor, v);
            }
        }
    }
    Ok(m)
}

/// One value byte per element + the packed delta stream + row pointers.
pub fn footprint_ri(r: &RiMatrix) -> FootprintBreakdown {
    let total = r.values.len() as u64;
    let padding = r.padding_elements() as u64;
    let metadata = r.deltas.len() as u64 + (r.rows as u64 + 1) * 2;
    FootprintBreakdown::new(total - padding, padding, metadata, r.rows, r.cols)
}

pub fn serialize_ri(r: &RiMatrix) -> Vec<u8> {
    let mut w = Writer::new();
    w.raw(&RI_MAGIC);
    w.raw(&[VERSION, r.delta_bits, 0, 0]);
    w.raw(&(r.rows as u32).to_le_bytes());
    w.raw(&(r.cols as u32).to_le_bytes());
    w.raw(&(r.values.len() as u32).to_le_bytes());
    w.bytes(&r.values.iter().map(|&v| v as u8).collect::<Vec<_>>());
    w.bytes(&r.deltas);
    w.u16s(&r.row_ptr);
    w.finish()
}

pub fn deserialize_ri(bytes: &[u8]) -> Result<RiMatrix> {
    let mut cur = Cursor::new(bytes);
    let header = cur.take(20, "RI header")?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != RI_MAGIC {
        return Err(Error::BadMagic {
            expected: RI_MAGIC,
            got: magic,
        });
    }
    if header[4] != VERSION {
        return Err(Error::BadVersion(header[4]));
    }
    let delta_bits = header[5];
    check_bits(delta_bits)?;
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols, total) = (word(8), word(12), word(16));
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix { rows, cols });
    }
    if rows > U16_LIMIT || total > U16_LIMIT {
        return Err(Error::FormatLimit(
            "relative-indexing header exceeds 16-bit limits".into(),
        ));
    }
    let values = cur
        .bytes(total, "RI values")?
        .iter()
        .map(|&b| b as i8)
        .collect();
    let deltas = cur
        .bytes((total * delta_bits as usize).div_ceil(8), "RI deltas")?
        .to_vec();
    let row_ptr = cur.u16s(rows + 1, "RI row_ptr")?;
    let r = RiMatrix {
        rows,
        cols,
        delta_bits,
        values,
        deltas,
        row_ptr,
    };
    decode_ri(&r)?; // structural validation
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{generate_uniform_sparse, GeneratorSpec};

    fn pad_fraction(r: &RiMatrix) -> f64 {
        let pad = r.padding_elements() as f64;
        let live = (r.total_elements() - r.padding_elements()) as f64;
        pad / live
    }

    #[test]
    fn wide_gap_inserts_one_pad() {
        let mut m = DenseMatrixI8::zeros(1, 32).unwrap();
        m.set(0, 0, 11);
        m.set(0, 20, -4);
        let r = encode_ri(&m, 4).unwrap();
        assert_eq!(r.values, vec![11, 0, -4]);
        assert_eq!((r.delta(0), r.delta(1), r.delta(2)), (0, 15, 5));
        assert_eq!(r.deltas, vec![0xF0, 0x05]);
        assert_eq!(r.row_ptr, vec![0, 3]);
        assert_eq!(decode_ri(&r).unwrap(), m);
    }

    #[test]
    fn adjacent_columns_need_no_padding() {
        let mut m = DenseMatrixI8::zeros(1, 8).unwrap();
        for c in 0..3 {
            m.set(0, c, (c + 1) as i8);
        }
        let r = encode_ri(&m, 4).unwrap();
        assert_eq!(r.padding_elements(), 0);
        assert_eq!(r.deltas, vec![0x10, 0x01]);
        assert_eq!(decode_ri(&r).unwrap(), m);
    }

    #[test]
    fn distant_first_column_pads_from_zero() {
        let mut m = DenseMatrixI8::zeros(1, 64).unwrap();
        m.set(0, 40, 9);
        let r = encode_ri(&m, 4).unwrap();
        assert_eq!(r.values, vec![0, 0, 9]);
        assert_eq!((r.delta(0), r.delta(1), r.delta(2)), (15, 15, 10));
        assert_eq!(decode_ri(&r).unwrap(), m);
    }

    #[test]
    fn round_trips_across_delta_widths() {
        let m = generate_uniform_sparse(&GeneratorSpec {
            rows: 48,
            cols: 96,
            sparsity: 0.9,
            seed: 21,
        })
        .unwrap();
        for b in 2..=8 {
            let r = encode_ri(&m, b).unwrap();
            assert_eq!(decode_ri(&r).unwrap(), m, "delta width {b}");
        }
        assert!(encode_ri(&m, 1).is_err());
        assert!(encode_ri(&m, 9).is_err());
    }

    #[test]
    fn padding_fraction_matches_expectation_at_80_percent() {
        let m = generate_uniform_sparse(&GeneratorSpec {
            rows: 256,
            cols: 256,
            sparsity: 0.8,
            seed: 4,
        })
        .unwrap();
        let r = encode_ri(&m, 4).unwrap();
        let frac = pad_fraction(&r);
        assert!(
            (0.02..=0.06).contains(&frac),
            "padding fraction {frac:.4} outside [0.02, 0.06]"
        );
    }

    #[test]
    fn padding_fraction_grows_with_sparsity() {
        let mean = |sparsity: f64| -> f64 {
            (0..5)
                .map(|seed| {
                    let m = generate_uniform_sparse(&GeneratorSpec {
                        rows: 128,
                        cols: 128,
                        sparsity,
                        seed,
                    })
                    .unwrap();
                    pad_fraction(&encode_ri(&m, 4).unwrap())
                })
                .sum::<f64>()
                / 5.0
        };
        let series: Vec<f64> = [0.5, 0.7, 0.8, 0.9, 0.95]
            .iter()
            .map(|&s| mean(s))
            .collect();
        assert!(
            series.windows(2).all(|w| w[0] <= w[1]),
            "padding fractions not monotone: {series:?}"
        );
    }

    #[test]
    fn enforces_element_count_limit() {
        let m = generate_uniform_sparse(&GeneratorSpec {
            rows: 300,
            cols: 300,
            sparsity: 0.0,
            seed: 0,
        })
        .unwrap();
        assert!(matches!(encode_ri(&m, 4), Err(Error::FormatLimit(_))));
    }

    #[test]
    fn serialization_round_trips_and_rejects_damage() {
        let m = generate_uniform_sparse(&GeneratorSpec {
            rows: 23,
            cols: 57,
            sparsity: 0.88,
            seed: 13,
        })
        .unwrap();
        let r = encode_ri(&m, 4).unwrap();
        let bytes = serialize_ri(&r);
        assert_eq!(deserialize_ri(&bytes).unwrap(), r);

        let mut bad = bytes.clone();
        bad[5] = 11; // delta width outside 2..=8
        assert!(matches!(deserialize_ri(&bad), Err(Error::InvalidParam(_))));
        assert!(matches!(
            deserialize_ri(&bytes[..8]),
            Err(Error::Truncated { .. })
        ));
    }
}
