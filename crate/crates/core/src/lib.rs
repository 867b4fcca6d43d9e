//! Knowledge-based two-phase commit with a Byzantine coordinator.
//!
//! The crate generates every run of the knowledge-based programs for the
//! coordinator and the participants, evaluates formulas of the logic of
//! knowledge and linear time over the resulting interpreted system under
//! synchronous perfect recall, checks concrete predicates against the
//! knowledge tests they replace, and searches for termination bounds.
//!
//! ```
//! use kbp_commit::{check, generate, parse, Config, Policy};
//!
//! let config = Config { d: 2, byzantine_policy: Policy::Never, ..Config::default() };
//! let system = generate(&config).unwrap();
//! assert_eq!(system.runs().len(), 8);
//! let verdict = check(&system, &parse("G !(outcome1=commit & vote2=no)").unwrap()).unwrap();
//! assert!(verdict.holds);
//! ```

pub mod analysis;
pub mod atoms;
pub mod checker;
pub mod config;
pub mod error;
pub mod generator;
pub mod logic;
pub mod protocol;
pub mod refinement;
pub mod system;
pub mod trace;

pub use analysis::{find_longest, find_shortest, run_table2, spec_formula, BoundsResult, SpecId};
pub use checker::{check, holds, indistinguishable, Verdict};
pub use config::{Config, Policy};
pub use error::{Error, Result};
pub use generator::{generate, generate_with, EpistemicOracle, KnowledgeOracle};
pub use logic::{parse, Formula};
pub use refinement::{builtin_candidates, verify_candidate, CandidatePredicate};
pub use system::{InterpretedSystem, Point, Run};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/semantics.md")]
    mod semantics {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/refinement.md")]
    mod refinement {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
}
