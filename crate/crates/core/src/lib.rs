// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod gp;
pub mod inverse;
pub mod stability;

pub use error::{Error, Result};
