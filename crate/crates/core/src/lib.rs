#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod compression;
pub mod cli;
pub mod cte;
pub mod error;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod repository;
pub mod router;
