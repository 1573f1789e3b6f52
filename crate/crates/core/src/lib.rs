// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bortz;
pub mod cli;
pub mod coning;
pub(crate) mod dd;
pub mod error;
pub mod quadrature;
pub mod rate_model;
pub mod rk;
pub mod so3;
pub mod trajectory;
