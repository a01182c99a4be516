//! Reference sparse formats the codec is compared against: 16-bit CSR,
//! 2x2 block CSR, and fixed-width relative indexing.

pub mod bcsr;
pub mod csr;
pub mod ri;

pub use bcsr::{decode_bcsr, encode_bcsr, footprint_bcsr, BcsrMatrix};
pub use csr::{decode_csr, encode_csr, footprint_csr, CsrMatrix16};
pub use ri::{decode_ri, encode_ri, footprint_ri, RiMatrix};
