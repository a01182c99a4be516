//! Little-endian byte-stream plumbing shared by the binary containers:
//! 4-byte section alignment, a bounds-checked reader, and a section writer.

use crate::error::{Error, Result};

pub(crate) const SECTION_ALIGN: usize = 4;

pub(crate) fn align_up(n: usize) -> usize {
    n.div_ceil(SECTION_ALIGN) * SECTION_ALIGN
}

/// Bounds-checked section reader.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                section,
                needed: end,
                had: self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    /// Skips to the next section boundary.
    pub fn align(&mut self, section: &'static str) -> Result<()> {
        let target = align_up(self.pos);
        if target > self.bytes.len() {
            return Err(Error::Truncated {
                section,
                needed: target,
                had: self.bytes.len(),
            });
        }
        self.pos = target;
        Ok(())
    }

    /// Aligned section of `count` raw bytes.
    pub fn bytes(&mut self, count: usize, section: &'static str) -> Result<&'a [u8]> {
        self.align(section)?;
        self.take(count, section)
    }

    /// Aligned section of `count` little-endian u16 words.
    pub fn u16s(&mut self, count: usize, section: &'static str) -> Result<Vec<u16>> {
        let raw = self.bytes(count * 2, section)?;
        Ok(raw
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    /// Aligned section of `count` little-endian u32 words.
    pub fn u32s(&mut self, count: usize, section: &'static str) -> Result<Vec<u32>> {
        let raw = self.bytes(count * 4, section)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Section writer that zero-fills to each boundary.
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self { buf: Vec::new() }
    }

    pub fn align(&mut self) {
        self.buf.resize(align_up(self.buf.len()), 0);
    }

    pub fn bytes(&mut self, bytes: &[u8]) {
        self.align();
        self.buf.extend_from_slice(bytes);
    }

    pub fn u16s(&mut self, words: &[u16]) {
        self.align();
        for w in words {
            self.buf.extend_from_slice(&w.to_le_bytes());
        }
    }

    /// Raw header bytes at the current (unaligned) position.
    pub fn raw(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn finish(mut self) -> Vec<u8> {
        self.align();
        self.buf
    }
}
