//! Exact construction and verification of fractional clique decompositions
//! of uniform hypergraphs.
//!
//! Every weight and every boundary value in this crate is an exact rational.
//! Floating point appears only in the diagnostic bound evaluations of
//! [`sampler::tail_bound`], [`orchestrator::main_parameters`] and
//! [`orchestrator::chernoff_report`], never in a validation path.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the command
//! line front end and parallel evaluation live in the `fracdec` crate.
//!
//! Module map:
//!
//! * [`hypercore`]: uniform hypergraphs, colex ranking, cliques, links.
//! * [`packing`]: fractional packings and the boundary operator.
//! * [`symdecomp`]: symmetric decompositions of `K_n^r` and `K_{rq}^r - e`.
//! * [`calculus`]: concatenation, fixing, almost-to-full conversion.
//! * [`matchdist`]: quasi-independent sampling around matchings.
//! * [`sampler`]: exploration orderings and uniform `k`-set families.
//! * [`lporacle`]: exact Phase-I simplex with verifiable certificates.
//! * [`orchestrator`]: parameter calculus and the end-to-end pipeline.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calculus;
pub mod combin;
pub mod error;
pub mod hypercore;
pub mod lporacle;
pub mod matchdist;
pub mod orchestrator;
pub mod packing;
pub mod rational;
pub mod sampler;
pub mod symdecomp;

pub use error::{Error, Result};
pub use hypercore::{Hypergraph, Matching, VertexSet};

pub use packing::{BoundaryReport, ExplicitPacking, Family, PackingView};
pub use rational::Rational;

/// Default cap on the number of support elements a packing may materialize.
pub const DEFAULT_MATERIALIZE_LIMIT: usize = 1 << 20;
