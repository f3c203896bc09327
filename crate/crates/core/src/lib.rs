//! Hyper space exploration engine.
//!
//! The workflow runs in five steps, each backed by a module:
//!
//! 1. [`hyperspace`] declares design, use-case and target-indicator spaces.
//! 2. [`dove`] builds space-filling experiment plans over design x use case.
//! 3. [`runner`] executes plans against simulators and stores the results.
//! 4. [`surrogate`] fits polynomial or Kriging surrogates with validation.
//! 5. [`analysis`] and [`meta`] extract Pareto fronts and potential envelopes
//!    and drive the refinement loop, including optimization of the surrogate
//!    configuration itself.
//!
//! [`exemplars`] holds two desk-scale vehicle simulators used to exercise the
//! whole chain, and [`cli`] is the `hse` command-line front end.

pub mod analysis;
pub mod benchmarks;
pub mod cli;
pub mod dove;
pub mod exemplars;
pub mod hyperspace;
pub mod meta;
pub mod rng;
pub mod runner;
pub mod surrogate;
pub mod util;
