//! Satisfiability checking and interpolation for the theory of arrays with
//! a `diff` operation, by ordered rewriting and completion.
//!
//! The pipeline is: [`preprocess`] flattens a constraint and guesses an
//! index partition, [`completion`] turns each guess into a modular
//! constraint or a failure, and [`satcheck`] reads a model off a modular
//! constraint. [`interpolate`] runs the same machinery on a pair of
//! constraints and reconstructs an interpolant from the proof tree.

pub mod cli;
pub mod completion;
pub mod interpolate;
pub mod oracle;
pub mod ordering;
pub mod preprocess;
pub mod rewrite;
pub mod satcheck;
pub mod terms;

pub use ordering::{lpo_compare, orient, Comparison, Orientation, Precedence};
pub use rewrite::{ReductionStrategy, RewriteSystem, StrategyRegistry};
pub use terms::{Const, Constraint, Formula, FreshGen, Literal, Sort, Term};
