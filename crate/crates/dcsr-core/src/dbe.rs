//! Dynamic bitwidth extension for lane-delta groups.
//!
//! Each group stores one 4-bit base nibble per lane. Deltas above 15 are
//! completed by up to three extension planes (bits 4, 5, 6): a 3-bit
//! tracking field says which planes are present, and each present plane
//! carries one lane mask whose set bits receive that power of two. Planes
//! with no set lanes are omitted entirely, which is what makes sparse,
//! well-clustered rows cheap.

use crate::error::{Error, Result};

/// Extension planes available above the base nibble (bit 4, 5, 6).
pub const EXTENSION_BITS: [u8; 3] = [4, 5, 6];

/// One group's bitwidth-decomposed lane deltas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedGroup {
    /// Low nibble per lane, zero-filled to the group size.
    pub base_nibbles: Vec<u8>,
    /// Bit `b-4` is set when extension plane `b` is present.
    pub tracking: u8,
    /// Lane masks for present planes, ascending plane order, lane 0 = LSB.
    pub masks: Vec<u32>,
}

/// Splits lane deltas (each in `0..=127`) into nibbles plus extension
/// planes. Lanes beyond `deltas.len()` store a zero nibble.
pub fn decompose_group(deltas: &[u8], group_size: usize) -> Result<EncodedGroup> {
    if deltas.is_empty() || deltas.len() > group_size {
        return Err(Error::InvalidParam(format!(
            "group holds {} deltas, expected 1..={group_size}",
            deltas.len()
        )));
    }
    let mut base_nibbles = vec![0u8; group_size];
    let mut tracking = 0u8;
    let mut masks = Vec::new();
    for (lane, &d) in deltas.iter().enumerate() {
        if d > 127 {
            return Err(Error::LaneOverflow {
                lane,
                value: d as u32,
            });
        }
        base_nibbles[lane] = d & 0x0F;
    }
    for bit in EXTENSION_BITS {
        let mut mask = 0u32;
        for (lane, &d) in deltas.iter().enumerate() {
            if d & (1 << bit) != 0 {
                mask |= 1 << lane;
            }
        }
        if mask != 0 {
            tracking |= 1 << (bit - 4);
            masks.push(mask);
        }
    }
    Ok(EncodedGroup {
        base_nibbles,
        tracking,
        masks,
    })
}

/// Rebuilds full lane deltas from nibbles, tracking field, and masks.
/// Returns one delta per lane of the group; absent lanes come back 0.
pub fn recompose_group(group: &EncodedGroup) -> Result<Vec<u8>> {
    let mut out = group.base_nibbles.clone();
    let mut next_mask = 0usize;
    for bit in EXTENSION_BITS {
        if group.tracking & (1 << (bit - 4)) == 0 {
            continue;
        }
        let mask = *group.masks.get(next_mask).ok_or_else(|| {
            Error::MaskCountMismatch(format!(
                "tracking {:#05b} expects more masks than the {} provided",
                group.tracking,
                group.masks.len()
            ))
        })?;
        next_mask += 1;
        for (lane, v) in out.iter_mut().enumerate() {
            if mask & (1 << lane) != 0 {
                *v |= 1 << bit;
            }
        }
    }
    if next_mask != group.masks.len() {
        return Err(Error::MaskCountMismatch(format!(
            "tracking {:#05b} uses {next_mask} masks but {} were provided",
            group.tracking,
            group.masks.len()
        )));
    }
    Ok(out)
}

/// Packs two groups' nibbles into one byte per lane: the earlier group in
/// the high nibble, the later (possibly absent) in the low. Output always
/// spans the full group size.
pub fn interleave_pair(first: &[u8], second: Option<&[u8]>, group_size: usize) -> Vec<u8> {
    let mut out = vec![0u8; group_size];
    for (lane, slot) in out.iter_mut().enumerate() {
        let hi = first.get(lane).copied().unwrap_or(0);
        let lo = second.and_then(|s| s.get(lane).copied()).unwrap_or(0);
        debug_assert!(hi <= 0x0F && lo <= 0x0F);
        *slot = (hi << 4) | lo;
    }
    out
}

/// Splits interleaved bytes back into (earlier, later) nibble vectors.
pub fn deinterleave_pair(bytes: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let first = bytes.iter().map(|b| b >> 4).collect();
    let second = bytes.iter().map(|b| b & 0x0F).collect();
    (first, second)
}

/// Number of lane masks a group with this tracking field carries.
pub fn mask_count(tracking: u8) -> usize {
    (tracking & 0b111).count_ones() as usize
}

/// Bytes each serialized lane mask occupies for a given group size.
pub fn mask_width_bytes(group_size: usize) -> usize {
    group_size.div_ceil(8)
}
