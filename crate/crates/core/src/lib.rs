//! Exact-arithmetic laboratory for Sherali-Adams style refutations of the
//! k-partite clique system.
//!
//! The crate provides:
//!
//! - the seeded k-partite block random graph model ([`graph`]),
//! - the clique polynomial system and the monomial/rectangle bridge ([`formula`]),
//! - certificate verification and size accounting ([`proof`]),
//! - exact rational LPs for minimum-coefficient certificates and their dual
//!   pseudo-measures ([`lp`], [`simplex`]),
//! - pattern-graph cores, boundaries and counting audits ([`patterns`]),
//! - the truncated character measure with three evaluation strategies
//!   ([`measure`]),
//! - pseudorandomness checkers, rectangle decomposition and Monte Carlo
//!   validators ([`wellbehaved`]),
//! - batch validation suites and CSV report plumbing ([`validate`], [`report`]).

pub mod bitset;
pub mod formula;
pub mod graph;
pub mod guards;
pub mod lp;
pub mod measure;
pub mod patterns;
pub mod proof;
pub mod rational;
pub mod report;
pub mod simplex;
pub mod validate;
pub mod wellbehaved;

pub use graph::{BlockGraph, Rectangle, Tuple};
pub use rational::Rat;
