//! Lens prescriptions as text: the ODDL format, validation, paraxial and real
//! ray tracing, the hierarchical reward, DrGRPO advantages and a local
//! optimizer.

// `!(x > 0.0)` is used on purpose so NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod grpo;
pub mod optimizer;
pub mod prescription;
pub mod render;
pub mod reward;
pub mod tracer;
pub mod validation;
