//! Exact-arithmetic building blocks for the combinatorial side of Floer-type
//! theories: finite poset models for manifolds with generalised corners,
//! stratum cochain complexes with validated sign data, flow categories with
//! energy-truncated morphism tables, Floer complexes over truncated Novikov
//! rings, continuation bimodules and tree multimodules, symmetric cubical
//! chains, and a discrete-Morse ingestion layer that produces real flow
//! categories checked against an independent simplicial-homology oracle.
//!
//! Everything is exact: scalars are arbitrary-precision rationals or prime
//! field elements, Novikov coefficients carry explicit precision cutoffs, and
//! every structural identity (d² = 0, chain-map equations, monoidality) is
//! verified rather than assumed.

pub mod bimod;
pub mod coeff;
pub mod cubical;
pub mod floer;
pub mod flowcat;
pub mod homalg;
pub mod morse;
pub mod report;
pub mod stratcx;
pub mod stratmodel;
pub mod trees;

pub use coeff::{BaseField, GammaElt, GammaMonoid, NovikovElement, Scalar};
pub use homalg::{GradedComplex, GradedLine, SparseMat};
pub use stratmodel::StratPoset;
