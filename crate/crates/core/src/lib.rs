//! Compiles a nondeterministic machine, an input `x`, and a time bound `T`
//! into a total local map `D` that sends a clause index to a 3SAT clause.
//! The induced CNF is satisfiable iff the machine accepts `x` with some
//! witness, and every output bit of `D` is a shallow decision tree.
//!
//! The crate is organized around a small set of building blocks:
//!
//! * [`localmap`] - forests of decision trees, the representation of every
//!   low-locality function produced here, plus exact locality measurement.
//! * [`counter`] - the carry-explicit counter whose increment has per-bit
//!   locality 2.
//! * [`circuit`] - implicitly represented circuits (label space + type map +
//!   child map), evaluation and acyclicity checking.
//! * [`machine`] - the nondeterministic multi-tape machine model, reference
//!   simulator and witness search.
//! * [`stepcircuit`] - turns a space-bounded child-computing machine into an
//!   implicit circuit whose child map has constant locality.
//! * [`routing`] - the switch network over shift-structured layered graphs,
//!   its local child map, and a permutation router.
//! * [`fetch`] - the chain-of-copies circuit that resolves bits of a
//!   hardwired string with a label-length/locality tradeoff.
//! * [`checkers`] - pairwise configuration checkers, the reference validity
//!   oracle and the prover side.
//! * [`assembler`] - the global label space, region dispatch, clause
//!   emission, and the final local map `D`.
//! * [`dimacs`], [`solver`], [`witness`] - CNF export, solver integration,
//!   brute-force oracle and witness decoding.

pub mod assembler;
pub mod bits;
pub mod cdcl;
pub mod checkers;
pub mod circuit;
pub mod counter;
pub mod dimacs;
pub mod fetch;
pub mod fixtures;
pub mod localmap;
pub mod machine;
pub mod routing;
pub mod solver;
pub mod stepcircuit;
pub mod witness;

pub use assembler::{Assembler, Clause, Lit, Params, Region};
pub use bits::Bits;
pub use circuit::{GateType, ImplicitCircuit};
pub use counter::CarryCounter;
pub use localmap::{DecisionTree, LocalMap, LocalityReport};
pub use machine::{Configuration, MachineSpec, Trace};
