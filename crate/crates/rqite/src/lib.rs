//! Ground-state energy estimation for local qubit Hamiltonians by
//! dequantized randomized imaginary-time evolution.
//!
//! The scan in [`rqite`] evaluates the residue `R(x) = D_β(H−x) − D_{2β}(H−x)`
//! of the guiding-state partition function on an ε-grid and stops where it
//! collapses. Partition functions come from one of four backends: dense
//! diagonalization ([`oracle`]), truncated cluster/moment series
//! ([`expansion`]), simulated Hadamard-test sampling ([`hadamard`]) or
//! conformal-map continuation ([`continuation`]).

pub mod caps;
pub mod cli;
pub mod continuation;
pub mod error;
pub mod expansion;
pub mod graph;
pub mod hadamard;
pub mod hamiltonian;
pub mod oracle;
pub mod rqite;
pub mod series;

pub use caps::Caps;
pub use error::{Error, Result};
