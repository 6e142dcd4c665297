pub mod acg;
pub mod bench;
pub mod error;
pub mod fsutil;
pub mod gate;
pub mod graphs;
pub mod llm;
pub mod rbac;
pub mod repair;
pub mod solidity;

pub use error::{Error, Result};
