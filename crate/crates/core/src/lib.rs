//! Wireless topology discovery on linear backbone networks: a slotted-ALOHA
//! protocol simulator and the matching closed-form neighbor-discovery model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod error;
pub mod model;
pub mod protocol;
pub mod simulator;

pub use error::{Error, Result};
