//! Code-anchored semidefinite relaxation receivers for LDPC-coded MIMO.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detector;
pub mod exit;
pub mod extraction;
pub mod harness;
pub mod ldpc;
pub mod mimo;
pub mod sdr;
pub mod solver;
pub mod turbo;
