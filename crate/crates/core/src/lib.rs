#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Component sizes of sparse Erdős–Rényi graphs `G(n, c/n)` through a
//! conditional compound Poisson representation.
//!
//! The numerical core is generic over the scalar type (`f32`, `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod connectivity;
pub mod duality;
pub mod ensemble;
pub mod exactgraph;
pub mod error;
pub mod logspace;
pub mod mdpcheck;
pub mod optimize;
pub mod panjer;
pub mod rates;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DualityPair = duality::DualityPair<f64>;
pub type BorelWeights = duality::BorelWeights<f64>;
pub type MuTable = connectivity::MuTable<f64>;
pub type JumpLaw = ensemble::JumpLaw<f64>;
pub type ThetaChoice = ensemble::ThetaChoice<f64>;
pub type ExactLaw = exactgraph::ExactLaw<f64>;
pub type CompoundSumTable = panjer::CompoundSumTable<f64>;
pub type ConditionalEnsemble = panjer::ConditionalEnsemble<f64>;
pub type QuadraticRate = rates::QuadraticRate<f64>;
pub type LdpRate = rates::LdpRate<f64>;
