//! Limited-precision layered QC-LDPC syndrome decoding for CV-QKD reconciliation.
//!
//! Building blocks: quasi-cyclic codes and their construction, a BIAWGN
//! channel, float and fixed-point layered BP, the residual-error erase stage,
//! a cycle-level model of the decoder datapath, and the secret-key-rate model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bits;
pub mod channel;
pub mod construction;
pub mod decoder;
pub mod erasure;
pub mod error;
pub mod pipeline;
pub mod qc_code;
pub mod quantize;
pub mod skr;
pub mod stats;

pub use bits::BitVector;
pub use error::{Error, Result};
pub use qc_code::{expand, BaseMatrix, QCCode};
pub use quantize::{FixedFormat, PhiTable, QValue};
