//! Macroscopicity of the two-mirror mechanical state produced by a
//! matter-wave–optomechanics interface.
//!
//! The crate evaluates the interference-based measure `I(W)` in closed form
//! ([`measure`]), cross-checks it against brute-force phase-space quadrature
//! of the defining functional ([`oracle`]), and generates parameter-sweep
//! datasets ([`sweep`], [`emit`]).

pub mod emit;
pub mod error;
pub mod measure;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod sweep;
pub mod wigner;

pub use error::{Error, Result};
pub use measure::{macroscopicity, MacroResult};
pub use model::{make_params, ModelParams};
pub use wigner::{normalization, phonon_number, PhasePoint};
