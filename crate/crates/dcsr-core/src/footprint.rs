//! Byte accounting shared by every storage format.

/// Where a format's bytes go: live weight values, inserted zero padding,
/// and structural metadata (pointers, indices, masks, slopes, ...).
///
/// `total_bytes` counts payload sections only — container headers and
/// file-alignment filler are excluded so formats compare on substance.
/// `compression_ratio` is dense bytes (`rows * cols`, one byte per weight)
/// over `total_bytes`; values above 1 mean the format beats dense storage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootprintBreakdown {
    pub values_bytes: u64,
    pub padding_bytes: u64,
    pub metadata_bytes: u64,
    pub total_bytes: u64,
    pub compression_ratio: f64,
}

impl FootprintBreakdown {
    pub fn new(
        values_bytes: u64,
        padding_bytes: u64,
        metadata_bytes: u64,
        rows: usize,
        cols: usize,
    ) -> Self {
        let total_bytes = values_bytes + padding_bytes + metadata_bytes;
        let dense = (rows as u64 * cols as u64) as f64;
        Self {
            values_bytes,
            padding_bytes,
            metadata_bytes,
            total_bytes,
            compression_ratio: dense / total_bytes as f64,
        }
    }

    /// Ratio of structural overhead to live weight bytes.
    pub fn metadata_to_values(&self) -> f64 {
        self.metadata_bytes as f64 / self.values_bytes as f64
    }
}
