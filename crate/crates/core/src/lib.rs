//! Adversary-matrix laboratory for orthogonal-array search problems.
//!
//! The library builds, for a concrete per-subset collection of orthogonal
//! arrays, the block-structured adversary operators associated with the
//! induced search problem, and certifies their spectral properties: norms
//! of the stacked operator, of its coordinate-mapped variants, of the
//! valid-column restriction, and the resulting adversary-bound ratio.
//!
//! Modules:
//! - [`algebra`]: exact arithmetic over `Z_q` and `GF(p)`, binomials,
//!   subset enumeration.
//! - [`oa`]: orthogonal arrays, generators, strength/consistency checks,
//!   the problem function, and the collection file format.
//! - [`scheme`]: Hamming-scheme weight projectors, dense and matrix-free.
//! - [`adversary`]: coefficient schedules, block operators, masks, dense
//!   materialization.
//! - [`spectral`]: power-iteration norms, the certificate ratio, and the
//!   inequality suite.
//! - [`cli`]: the command-line surface.

pub mod algebra;
pub mod adversary;
pub mod cli;
pub mod error;
pub mod oa;
pub mod scheme;
pub mod spectral;

pub use error::{Error, Result};

/// Enumeration and materialization ceilings. Everything dense exists for
/// cross-validation; these keep accidental blowups from taking the process
/// down with them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Caps {
    /// Max rows/columns of a dense projector.
    pub dense_projector: usize,
    /// Max entries of a dense operator materialization.
    pub dense_entries: u128,
    /// Max `q^n` for full input enumeration (validity census).
    pub enumeration: u128,
    /// Max `q^n` for matrix-free operator work.
    pub qn: u128,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            dense_projector: 4096,
            dense_entries: 10_000_000,
            enumeration: 10_000_000,
            qn: 10_000_000,
        }
    }
}
