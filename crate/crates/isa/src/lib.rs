//! A toy three-instruction ISA (`load`, `add`, `beqz`) over two registers,
//! with the semantics used in the case studies:
//!
//! * the architectural step and the vanilla cache-leaking hardware,
//! * branch-speculating hardware against the always-mispredict contract,
//! * out-of-order hardware with a one-instruction buffer against the
//!   sequential contract.
//!
//! Every model is a [`rbisim_core::PartialSystem`]; running off the end of
//! the program halts. Contracts then leak `halt` forever and hardware keeps
//! leaking its final cache.

pub mod asm;
pub mod error;
pub mod machine;
pub mod ooo;
pub mod speculation;

pub use asm::{parse_program, print_program};
pub use error::{IsaError, Result};
pub use machine::{ArchState, Instruction, Machine, Program, Reg, SeqContract, Value, ValueDomain, VanillaHardware, VanillaHwState};
pub use ooo::{
    build_ooo_instance, delayable, in_ooo_invariant, ooo_next_leak, ooo_quad, seq_next_leak, OooHardware, OooRule, OooState,
    OooSystem, Schedule, Scheduler, SeqSystem,
};
pub use speculation::{
    am_next_leak, am_quad, build_am_instance, in_am_invariant, spec_hw_next_leak, AmContract, AmRule, AmState, AmSystem,
    Checkpoint, Prediction, Predictor, SpecHardware, SpecHwState, SpecRule, SpecSystem, Window,
};
