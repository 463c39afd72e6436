//! Relative bisimulation for leakage contracts.
//!
//! A contract system `C` and a hardware system `H` are related at a quad
//! `(s1, s2, h1, h2)` when equal contract traces from `s1, s2` imply equal
//! hardware traces from `h1, h2`. This crate provides exact oracles for that
//! statement on finite systems, the nested fixpoint that characterizes it, and
//! a small proof kernel whose accepted scripts imply it.

pub mod error;
pub mod explicit;
pub mod fixpoint;
pub mod kernel;
pub mod lockstep;
pub mod lts;
pub mod obs;
pub mod oracle;
pub mod random;
pub mod script;
pub mod universe;
pub mod upto;

pub use error::{Error, Result};
pub use explicit::{ExplicitInstance, ExplicitSystem};
pub use fixpoint::{
    compute_bisim, compute_rbisim, compute_rbisim_lockstep, compute_rbisim_relaxed, compute_rbisim_traced,
    rbisim_functional, Justification, RbisimComputation,
};
pub use kernel::{ClosureBudget, ClosureReport, Failure, Goal, Hypothesis, Kernel, KernelState, Mutation, Rule, Verdict};
pub use lockstep::{LockstepGoal, LockstepRule};
pub use lts::{
    encode_termination, reachable_states, trace_prefix, FnPartial, PartialSystem, Quad, Terminating, TracePrefix,
    TransitionSystem,
};
pub use obs::Obs;
pub use oracle::{lockstep_rel, rel_trace_eq, trace_lasso, traces_equal, Lasso, PairGraphVerdict, DEFAULT_BUDGET};
pub use script::{
    parse_lockstep_script, parse_quads, parse_script, print_lockstep_script, print_quads, print_script, Case,
    LockstepScript, ProofScript, Side, SideProof, StateSyntax, UpToStep,
};
pub use universe::{QuadRelation, QuadSet, QuadUniverse};
pub use upto::{check_compatibility, registry, Compatibility, CompatibilityReport, Replacement, UpToEnv, UpToFunction, UpToKind};
