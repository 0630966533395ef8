//! Link-level simulation of RIS-assisted multiuser uplink systems with
//! iterative detection and decoding.

pub mod channel;
pub mod config;
pub mod deployment;
pub mod detector;
pub mod error;
pub mod harness;
pub mod idd;
pub mod ldpc;
pub mod linalg;
pub mod oracle;
pub mod ris_design;
pub mod selftest;

pub use error::{Error, Result};
