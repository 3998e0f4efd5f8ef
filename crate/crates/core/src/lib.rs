//! Higher-order Ising Hamiltonians for hybrid SAT formulas.
//!
//! Boolean constraints (XOR, cardinality, clauses, arbitrary truth tables) are
//! compiled to their Walsh-Fourier multilinear polynomials over `{-1, +1}`
//! spins, where `-1` means `true`. A weighted sum of these hyperedge
//! polynomials is the Hamiltonian; its minimum over the hypercube equals
//! `-sum(w_e)` exactly when the formula is satisfiable.
//!
//! Symmetric constraints are evaluated and differentiated through
//! elementary-symmetric profiles built by convolving `[1, a_j]` factors, with
//! prefix/suffix (bidirectional) cumulative convolutions giving the whole
//! edge gradient at once. Three continuous relaxations of the Hamiltonian are
//! minimised with ADAM using exact, forward-difference or Moreau-envelope
//! gradients.

pub mod cli;
pub mod constraints;
pub mod convolution;
pub mod error;
pub mod estimators;
pub mod hamiltonian;
pub mod instances;
pub mod optimizer;
pub mod par;

pub use constraints::{Constraint, ConstraintKind, FourierTable, Literal};
pub use error::{Error, Result};
pub use estimators::{GradientProvider, MoreauParams};
pub use hamiltonian::{HyperEdge, HyperIsingModel, Relaxation, SpinState};
pub use instances::{HybridFormula, PleSpec, WeightRule};
pub use optimizer::{AdamConfig, TrialConfig, TrialResult};
pub use par::Exec;

/// A Boolean spin. `-1` is `true`, `+1` is `false`.
pub type Spin = i8;
