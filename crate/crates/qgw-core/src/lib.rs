#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop, clippy::large_enum_variant)]

extern crate alloc;

pub mod cbase;
pub mod cfact;
pub mod error;
pub mod fiber;
pub mod fixtures;
pub mod gns;
pub mod hopf;
pub mod linalg;
pub mod pmu;
pub mod report;
pub mod rng;
pub mod rtensor;
pub mod staralg;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, OperatorSubspace, Tolerance, C64};
