//! Universal classical source compression with quantum side information and
//! its application to finite-size key-rate analysis of the B92 protocol.

pub mod b92;
pub mod compression;
pub mod entropy;
pub mod error;
pub mod field;
pub mod hashing;
pub mod linalg;
pub mod optimizer;
pub mod schur_weyl;
pub mod selftest;

pub use error::{Error, Result};
