#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autograd;
pub mod cli;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod pretrain;
pub mod tensor;
pub mod tokenizer;

pub use error::{Error, Result};
