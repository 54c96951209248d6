//! Numerical KAK decompositions for the classical compact matrix groups.
//!
//! The crate provides, in layers:
//!
//! - [`densela`]: a dense float64/complex128 matrix carrier with the
//!   factorization primitives the decompositions need (unitary EVD, real
//!   Schur form, cosine-sine decomposition, skew exponentials, CSG square
//!   roots).
//! - [`involution`]: the Cartan-involution calculus — canonical forms,
//!   classification, composition, compatible sets, gradings and the
//!   2-recursive lift table.
//! - [`kak`]: the ten numerical KAK decompositions (types A, AI, AII, AIII,
//!   BD, BDI, DIII, C, CI, CII) plus the horizontal decomposition.
//! - [`recursion`]: recursive decomposition plans (parameter-optimal chains,
//!   repeated BDI, QSD/Block-ZXZ, completely orthogonal/symplectic) and the
//!   engine that executes them.
//! - [`pauli`]: Pauli-word algebra, DLA closure, the even/odd-commutator
//!   Cartan split, frustration graphs, Jordan-Wigner Majoranas, and the
//!   horizontal-placement embedding.
//! - [`hamsim`]: the fixed-depth compiler turning free-fermionic time
//!   evolution into Pauli-rotation circuits, with an exact-diagonalization
//!   byproduct.
//! - [`synth`]: qubit-level unitary synthesis (quantum Shannon / Block-ZXZ
//!   multiplexed-rotation emission, completely orthogonal/symplectic
//!   variants).
//!
//! Runnable walkthroughs for each capability live in `examples/`; the
//! `cartan-kak` binary exposes the same functionality as subcommands.

pub mod cli;
pub mod densela;
pub mod hamsim;
pub mod involution;
pub mod kak;
pub mod pauli;
pub mod recursion;
pub mod rep;
pub mod synth;
pub mod testing;
