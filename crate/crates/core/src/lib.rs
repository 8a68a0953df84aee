//! Simulation library for relay-assisted optical CDMA links through oceanic
//! turbulence.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ber;
pub mod error;
pub mod mai;
pub mod numerics;
pub mod ooc;
pub mod reference;
pub mod scenario;
pub mod transport;
pub mod sim;
pub mod turbulence;

pub use error::{Error, Result};
