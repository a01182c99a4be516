//! Lane-masked vector execution model.
//!
//! Kernels express all data-parallel work through [`VectorEngine`] so that
//! memory traffic and multiply-accumulate work are observable: every
//! operation bumps [`Counters`]. The portable [`ScalarEngine`] implements
//! the contract one lane at a time; lane count is fixed per engine and
//! matches the codec group size.

use crate::dle::GROUP_SIZES;
use crate::error::{Error, Result};

/// Widest supported lane group.
pub const MAX_LANES: usize = 32;

/// Fixed-width register of unsigned byte lanes; only the engine's first
/// `group_size` lanes are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneVector {
    pub lanes: [u8; MAX_LANES],
}

impl LaneVector {
    pub const ZERO: Self = Self {
        lanes: [0; MAX_LANES],
    };

    /// Builds a register from up to [`MAX_LANES`] bytes, zero-filling the rest.
    pub fn from_slice(values: &[u8]) -> Self {
        let mut lanes = [0u8; MAX_LANES];
        lanes[..values.len()].copy_from_slice(values);
        Self { lanes }
    }

    pub fn splat(value: u8) -> Self {
        Self {
            lanes: [value; MAX_LANES],
        }
    }

    /// Lane reinterpreted as a signed byte.
    pub fn as_i8(&self, lane: usize) -> i8 {
        self.lanes[lane] as i8
    }
}

impl Default for LaneVector {
    fn default() -> Self {
        Self::ZERO
    }
}

/// Per-lane activity mask; lane `l` maps to bit `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Predicate {
    pub bits: u32,
}

impl Predicate {
    pub const NONE: Self = Self { bits: 0 };

    pub fn from_bits(bits: u32) -> Self {
        Self { bits }
    }

    /// All of the first `n` lanes active.
    pub fn first(n: usize) -> Self {
        debug_assert!(n <= MAX_LANES);
        if n == 32 {
            Self { bits: u32::MAX }
        } else {
            Self {
                bits: (1u32 << n) - 1,
            }
        }
    }

    pub fn get(&self, lane: usize) -> bool {
        self.bits >> lane & 1 != 0
    }

    pub fn active_lanes(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }
}

/// Work and traffic tally for one engine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// Whole-group loads from consecutive bytes.
    pub contiguous_loads: u64,
    /// Indexed (gather) loads.
    pub gather_loads: u64,
    /// Indexed (scatter) stores.
    pub scatter_stores: u64,
    /// Active multiply-accumulate lanes across all dot operations.
    pub mac_lanes: u64,
    /// Every engine operation, memory or ALU.
    pub vector_ops: u64,
}

impl Counters {
    pub fn merge(&mut self, other: &Counters) {
        self.contiguous_loads += other.contiguous_loads;
        self.gather_loads += other.gather_loads;
        self.scatter_stores += other.scatter_stores;
        self.mac_lanes += other.mac_lanes;
        self.vector_ops += other.vector_ops;
    }

    /// Stable name/value pairs for reporting.
    pub fn as_pairs(&self) -> [(&'static str, u64); 5] {
        [
            ("contiguous_loads", self.contiguous_loads),
            ("gather_loads", self.gather_loads),
            ("scatter_stores", self.scatter_stores),
            ("mac_lanes", self.mac_lanes),
            ("vector_ops", self.vector_ops),
        ]
    }
}

/// Lane-parallel operations the kernels are written against.
///
/// Memory operands are plain byte buffers; signedness is an interpretation
/// applied by the arithmetic ops. Out-of-bounds access, duplicate scatter
/// targets, byte overflow in address math, and 32-bit accumulator overflow
/// are all hard errors rather than silent wraps.
pub trait VectorEngine {
    /// Lanes this engine processes per operation.
    fn group_size(&self) -> usize;

    fn counters(&self) -> Counters;

    fn reset_counters(&mut self);

    /// Loads `group_size` consecutive bytes starting at `offset`.
    fn load_contiguous(&mut self, buf: &[u8], offset: usize) -> Result<LaneVector>;

    /// Indexed load: active lane `l` reads `buf[base + offsets[l]]`,
    /// inactive lanes produce 0. Active reads must stay in bounds.
    fn gather_i8(
        &mut self,
        buf: &[u8],
        base: i64,
        offsets: &LaneVector,
        active: Predicate,
    ) -> Result<LaneVector>;

    /// Indexed store: active lane `l` writes `values[l]` to
    /// `buf[base + offsets[l]]`. Duplicate active targets are rejected.
    fn scatter_i8(
        &mut self,
        buf: &mut [u8],
        base: i64,
        offsets: &LaneVector,
        values: &LaneVector,
        active: Predicate,
    ) -> Result<()>;

    /// ORs `constant` into the active lanes.
    fn masked_or_const(&mut self, v: &LaneVector, active: Predicate, constant: u8) -> LaneVector;

    /// Logical right shift of every lane by four.
    fn shr4(&mut self, v: &LaneVector) -> LaneVector;

    /// Keeps the low nibble of every lane.
    fn and_0x0f(&mut self, v: &LaneVector) -> LaneVector;

    /// Adds `constant` to every lane; overflow past 255 is an error.
    fn add_lane_const(&mut self, v: &LaneVector, constant: u8) -> Result<LaneVector>;

    /// Adds `lane * scale` to each lane; overflow past 255 is an error.
    fn add_lane_index_scaled(&mut self, v: &LaneVector, scale: u16) -> Result<LaneVector>;

    /// `acc + sum over active lanes of a[l] * b[l]`, lanes read as signed
    /// bytes, accumulated in checked 32-bit arithmetic.
    fn dot_acc_i32(
        &mut self,
        acc: i32,
        a: &LaneVector,
        b: &LaneVector,
        active: Predicate,
    ) -> Result<i32>;
}

/// Reference engine: straightforward per-lane loops.
#[derive(Debug, Clone)]
pub struct ScalarEngine {
    group_size: usize,
    counters: Counters,
}

impl ScalarEngine {
    pub fn new(group_size: usize) -> Result<Self> {
        if !GROUP_SIZES.contains(&group_size) {
            return Err(Error::InvalidParam(format!(
                "group size {group_size} not one of {GROUP_SIZES:?}"
            )));
        }
        Ok(Self {
            group_size,
            counters: Counters::default(),
        })
    }
}

impl VectorEngine for ScalarEngine {
    fn group_size(&self) -> usize {
        self.group_size
    }

    fn counters(&self) -> Counters {
        self.counters
    }

    fn reset_counters(&mut self) {
        self.counters = Counters::default();
    }

    fn load_contiguous(&mut self, buf: &[u8], offset: usize) -> Result<LaneVector> {
        let end = offset + self.group_size;
        if end > buf.len() {
            return Err(Error::Truncated {
                section: "contiguous lane load",
                needed: end,
                had: buf.len(),
            });
        }
        self.counters.contiguous_loads += 1;
        self.counters.vector_ops += 1;
        Ok(LaneVector::from_slice(&buf[offset..end]))
    }

    fn gather_i8(
        &mut self,
        buf: &[u8],
        base: i64,
        offsets: &LaneVector,
        active: Predicate,
    ) -> Result<LaneVector> {
        let mut out = LaneVector::ZERO;
        for lane in 0..self.group_size {
            if !active.get(lane) {
                continue;
            }
            let index = base + offsets.lanes[lane] as i64;
            if index < 0 || index as usize >= buf.len() {
                return Err(Error::GatherOutOfBounds {
                    lane,
                    index,
                    len: buf.len(),
                });
            }
            out.lanes[lane] = buf[index as usize];
        }
        self.counters.gather_loads += 1;
        self.counters.vector_ops += 1;
        Ok(out)
    }

    fn scatter_i8(
        &mut self,
        buf: &mut [u8],
        base: i64,
        offsets: &LaneVector,
        values: &LaneVector,
        active: Predicate,
    ) -> Result<()> {
        let mut targets = [0i64; MAX_LANES];
        let mut count = 0usize;
        for lane in 0..self.group_size {
            if !active.get(lane) {
                continue;
            }
            let index = base + offsets.lanes[lane] as i64;
            if index < 0 || index as usize >= buf.len() {
                return Err(Error::ScatterOutOfBounds {
                    lane,
                    index,
                    len: buf.len(),
                });
            }
            if targets[..count].contains(&index) {
                return Err(Error::DuplicateScatterOffset { index });
            }
            targets[count] = index;
            count += 1;
        }
        for lane in 0..self.group_size {
            if active.get(lane) {
                buf[(base + offsets.lanes[lane] as i64) as usize] = values.lanes[lane];
            }
        }
        self.counters.scatter_stores += 1;
        self.counters.vector_ops += 1;
        Ok(())
    }

    fn masked_or_const(&mut self, v: &LaneVector, active: Predicate, constant: u8) -> LaneVector {
        let mut out = *v;
        for lane in 0..self.group_size {
            if active.get(lane) {
                out.lanes[lane] |= constant;
            }
        }
        self.counters.vector_ops += 1;
        out
    }

    fn shr4(&mut self, v: &LaneVector) -> LaneVector {
        let mut out = *v;
        for lane in out.lanes[..self.group_size].iter_mut() {
            *lane >>= 4;
        }
        self.counters.vector_ops += 1;
        out
    }

    fn and_0x0f(&mut self, v: &LaneVector) -> LaneVector {
        let mut out = *v;
        for lane in out.lanes[..self.group_size].iter_mut() {
            *lane &= 0x0F;
        }
        self.counters.vector_ops += 1;
        out
    }

    fn add_lane_const(&mut self, v: &LaneVector, constant: u8) -> Result<LaneVector> {
        let mut out = *v;
        for (lane, slot) in out.lanes[..self.group_size].iter_mut().enumerate() {
            let sum = *slot as u32 + constant as u32;
            if sum > u8::MAX as u32 {
                return Err(Error::LaneOverflow { lane, value: sum });
            }
            *slot = sum as u8;
        }
        self.counters.vector_ops += 1;
        Ok(out)
    }

    fn add_lane_index_scaled(&mut self, v: &LaneVector, scale: u16) -> Result<LaneVector> {
        let mut out = *v;
        for (lane, slot) in out.lanes[..self.group_size].iter_mut().enumerate() {
            let sum = *slot as u32 + lane as u32 * scale as u32;
            if sum > u8::MAX as u32 {
                return Err(Error::LaneOverflow { lane, value: sum });
            }
            *slot = sum as u8;
        }
        self.counters.vector_ops += 1;
        Ok(out)
    }

    fn dot_acc_i32(
        &mut self,
        acc: i32,
        a: &LaneVector,
        b: &LaneVector,
        active: Predicate,
    ) -> Result<i32> {
        let mut acc = acc;
        let mut active_count = 0u64;
        for lane in 0..self.group_size {
            if !active.get(lane) {
                continue;
            }
            active_count += 1;
            let prod = a.as_i8(lane) as i32 * b.as_i8(lane) as i32;
            acc = acc.checked_add(prod).ok_or(Error::AccumulatorOverflow)?;
        }
        self.counters.mac_lanes += active_count;
        self.counters.vector_ops += 1;
        Ok(acc)
    }
}
