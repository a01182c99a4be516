//! File ingestion/egress: Matrix Market coordinate files for sparse
//! interchange and the `DMI8` little-endian binary for dense matrices.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrixI8;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MM_HEADER: &str = "%%MatrixMarket matrix coordinate integer general";
const DMI8_MAGIC: [u8; 4] = *b"DMI8";

/// Parses a coordinate-format, integer-field Matrix Market file (1-based
/// indices) into a dense matrix.
pub fn load_matrix_market(path: &Path) -> Result<DenseMatrixI8> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();

    let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))??;
    if header.trim() != MM_HEADER {
        return Err(parse_err(1, &format!("unsupported header {header:?}")));
    }

    let mut lineno = 1usize;
    let mut size_line = None;
    for line in &mut lines {
        let line = line?;
        lineno += 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some((lineno, line));
        break;
    }
    let (size_lineno, size_line) =
        size_line.ok_or_else(|| parse_err(lineno, "missing size line"))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|f| {
            f.parse::<usize>()
                .map_err(|_| parse_err(size_lineno, "bad size field"))
        })
        .collect::<Result<_>>()?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(parse_err(size_lineno, "size line must be `rows cols nnz`"));
    };
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix { rows, cols });
    }

    let mut m = DenseMatrixI8::zeros(rows, cols)?;
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        lineno += 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let [r, c, v] = fields[..] else {
            return Err(parse_err(lineno, "entry must be `row col value`"));
        };
        let r: usize = r.parse().map_err(|_| parse_err(lineno, "bad row index"))?;
        let c: usize = c
            .parse()
            .map_err(|_| parse_err(lineno, "bad column index"))?;
        let v: i64 = v.parse().map_err(|_| parse_err(lineno, "bad value"))?;
        if r < 1 || r > rows || c < 1 || c > cols {
            return Err(parse_err(
                lineno,
                &format!("index ({r},{c}) outside {rows}x{cols}"),
            ));
        }
        if !(-128..=127).contains(&v) {
            return Err(Error::ValueRange {
                line: lineno,
                value: v,
            });
        }
        m.set(r - 1, c - 1, v as i8);
        seen += 1;
    }
    if seen != nnz {
        return Err(parse_err(
            lineno,
            &format!("size line promised {nnz} entries, found {seen}"),
        ));
    }
    Ok(m)
}

/// Writes the non-zero entries of `m` as a Matrix Market coordinate file.
pub fn store_matrix_market(m: &DenseMatrixI8, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MM_HEADER}")?;
    writeln!(w, "{} {} {}", m.rows(), m.cols(), m.nnz())?;
    for r in 0..m.rows() {
        for (c, &v) in m.row(r).iter().enumerate() {
            if v != 0 {
                writeln!(w, "{} {} {}", r + 1, c + 1, v)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the `DMI8` dense binary format.
pub fn load_dense_binary(path: &Path) -> Result<DenseMatrixI8> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_dense_binary(&bytes)
}

/// Parses `DMI8` bytes: magic, u32 rows, u32 cols, rows*cols i8 row-major.
pub fn parse_dense_binary(bytes: &[u8]) -> Result<DenseMatrixI8> {
    if bytes.len() < 12 {
        return Err(Error::Truncated {
            section: "DMI8 header",
            needed: 12,
            had: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != DMI8_MAGIC {
        return Err(Error::BadMagic {
            expected: DMI8_MAGIC,
            got: magic,
        });
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix { rows, cols });
    }
    let need = 12 + rows * cols;
    if bytes.len() < need {
        return Err(Error::Truncated {
            section: "DMI8 payload",
            needed: need,
            had: bytes.len(),
        });
    }
    let data = bytes[12..need].iter().map(|&b| b as i8).collect();
    DenseMatrixI8::new(rows, cols, data)
}

/// Writes the `DMI8` dense binary format.
pub fn store_dense_binary(m: &DenseMatrixI8, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&DMI8_MAGIC)?;
    w.write_all(&(m.rows() as u32).to_le_bytes())?;
    w.write_all(&(m.cols() as u32).to_le_bytes())?;
    w.write_all(m.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse {
        line,
        msg: msg.to_string(),
    }
}
