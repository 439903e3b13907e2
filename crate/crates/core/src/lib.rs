//! Information-theoretically secure multi-server verifiable delegation of
//! matrix-vector products over `Z_q`.
//!
//! A client additively shares a matrix `F` and an input `x`, sends each of
//! `k` non-colluding servers the shares a [`covering::CoveringScheme`]
//! assigns it, and checks every partial product `F_u x_v` against a secret
//! random vector before summing them into `F x`. No single server learns
//! anything about `F` or `x`, and a wrong answer is accepted with probability
//! at most about `ab / q`.
//!
//! Layers, bottom up: [`field`], [`sharing`], [`covering`], [`protocol`],
//! then the applications [`polydelegate`] and [`pir`], the networked
//! [`transport`], and the [`perf`] harness.

pub mod covering;
pub mod error;
pub mod field;
pub mod perf;
pub mod pir;
pub mod polydelegate;
pub mod protocol;
pub mod sharing;
pub mod testing;
pub mod transport;

pub use covering::{pi_s, pi_w, CoveringScheme};
pub use error::{Error, Result};
pub use field::{FieldElement, FieldMatrix, FieldModulus, FieldVector};
pub use protocol::{
    compute, key_gen, prob_gen, verify, FunctionKeyMaterial, InputKeyMaterial, ServerOutput, Verified, VerifyOutcome,
};
