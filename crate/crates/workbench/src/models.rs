//! The two case-study models behind one interface.

use rbisim_core::{ClosureBudget, KernelState, Obs, Quad, QuadRelation, TransitionSystem};
use rbisim_isa::{
    am_quad, build_am_instance, build_ooo_instance, in_am_invariant, in_ooo_invariant, ooo_quad, AmRule, AmState,
    AmSystem, ArchState, Machine, OooRule, OooState, OooSystem, Predictor, Program, Scheduler, SeqSystem, SpecRule,
    SpecSystem, SpecHwState,
};
use rbisim_isa::{OooHardware, SeqContract};

/// What the enumerator and the closure check need from a model instance.
///
/// Hardware states are driven with an empty cache: `h_step` reports the
/// address the step pushed, if any, and returns the successor with its cache
/// cleared again.
pub trait CaseModel {
    type C: KernelState;
    type H: KernelState;
    type CSys: TransitionSystem<State = Self::C>;
    type HSys: TransitionSystem<State = Self::H>;

    fn contract(&self) -> &Self::CSys;
    fn hardware(&self) -> &Self::HSys;
    fn initial(&self, s: &ArchState, cache: &[u32]) -> (Self::C, Self::H);
    fn quad(&self, s1: &ArchState, s2: &ArchState, cache: &[u32]) -> Quad<Self::C, Self::H>;

    fn c_pending(&self, c: &Self::C) -> Option<u32>;
    fn h_pending(&self, h: &Self::H) -> Option<u32>;
    fn c_step(&self, c: &Self::C) -> (Self::C, Obs);
    fn h_step(&self, h: &Self::H) -> (Self::H, Option<u32>);

    /// The per-side part of the invariant: `h` runs exactly `c`.
    fn matches(&self, c: &Self::C, h: &Self::H) -> bool;
    fn c_pc(&self, c: &Self::C) -> usize;

    fn invariant(&self) -> QuadRelation<Self::C, Self::H>;
    fn budget(&self) -> ClosureBudget;

    fn c_rule(&self, c: &Self::C) -> &'static str;
    fn h_rule(&self, h: &Self::H) -> &'static str;
}

fn spec_rule(r: SpecRule) -> &'static str {
    match r {
        SpecRule::Rollback => "hw:Rollback",
        SpecRule::Commit => "hw:Commit",
        SpecRule::Step => "hw:Step",
        SpecRule::BranchNext => "hw:BranchNext",
        SpecRule::BranchJump => "hw:BranchJump",
        SpecRule::Idle => "hw:Idle",
        SpecRule::Halted => "hw:Halted",
    }
}

fn am_rule(r: AmRule) -> &'static str {
    match r {
        AmRule::Step => "am:Step",
        AmRule::Rollback => "am:Rollback",
        AmRule::Branch => "am:Branch",
        AmRule::Idle => "am:Idle",
        AmRule::Halted => "am:Halted",
    }
}

fn ooo_rule(r: Option<OooRule>) -> &'static str {
    match r {
        Some(OooRule::Execute) => "ooo:Execute",
        Some(OooRule::ExecuteHeap) => "ooo:ExecuteHeap",
        Some(OooRule::Delay) => "ooo:Delay",
        Some(OooRule::Halted) => "ooo:Halted",
        None => "ooo:Invalid",
    }
}

/// Speculating hardware against the always-mispredict contract.
pub struct AmModel {
    pub contract: AmSystem,
    pub hardware: SpecSystem,
    pub w: u32,
    /// Defaults to `w + 2` consecutive contract and `w + 2` hardware steps.
    pub budget: ClosureBudget,
}

impl AmModel {
    pub fn new(machine: Machine, program: &Program, predictor: &Predictor, w: u32) -> rbisim_isa::Result<Self> {
        let (contract, hardware) = build_am_instance(machine, program, predictor, w)?;
        Ok(AmModel {
            contract,
            hardware,
            w,
            budget: ClosureBudget::new(w + 2, w + 2),
        })
    }
}

impl CaseModel for AmModel {
    type C = AmState;
    type H = SpecHwState;
    type CSys = AmSystem;
    type HSys = SpecSystem;

    fn contract(&self) -> &AmSystem {
        &self.contract
    }
    fn hardware(&self) -> &SpecSystem {
        &self.hardware
    }
    fn initial(&self, s: &ArchState, cache: &[u32]) -> (AmState, SpecHwState) {
        (AmState::initial(s.clone()), SpecHwState::initial(s.clone(), cache.to_vec()))
    }
    fn quad(&self, s1: &ArchState, s2: &ArchState, cache: &[u32]) -> Quad<AmState, SpecHwState> {
        am_quad(s1, s2, cache)
    }
    fn c_pending(&self, c: &AmState) -> Option<u32> {
        self.contract.inner().pending_load(c)
    }
    fn h_pending(&self, h: &SpecHwState) -> Option<u32> {
        self.hardware.inner().pending_load(h)
    }
    fn c_step(&self, c: &AmState) -> (AmState, Obs) {
        self.contract.step(c)
    }
    fn h_step(&self, h: &SpecHwState) -> (SpecHwState, Option<u32>) {
        match self.hardware.inner().next(h) {
            None => (h.clone(), None),
            Some(mut n) => {
                let pushed = (n.s.c.len() > h.s.c.len()).then(|| n.s.c[0]);
                n.s.c.clear();
                (n, pushed)
            }
        }
    }
    fn matches(&self, c: &AmState, h: &SpecHwState) -> bool {
        !c.is_speculating() && !h.is_speculating() && c.sigma == h.s.arch
    }
    fn c_pc(&self, c: &AmState) -> usize {
        c.sigma.pc
    }
    fn invariant(&self) -> QuadRelation<AmState, SpecHwState> {
        QuadRelation::intensional("I_am", in_am_invariant)
    }
    fn budget(&self) -> ClosureBudget {
        self.budget
    }
    fn c_rule(&self, c: &AmState) -> &'static str {
        am_rule(self.contract.inner().rule(c))
    }
    fn h_rule(&self, h: &SpecHwState) -> &'static str {
        spec_rule(self.hardware.inner().rule(h))
    }
}

/// Out-of-order hardware against the sequential contract.
pub struct OooModel {
    pub contract: SeqSystem,
    pub hardware: OooSystem,
    /// Defaults to 3 consecutive contract and 2 hardware steps.
    pub budget: ClosureBudget,
}

impl OooModel {
    pub fn new(machine: Machine, program: &Program, scheduler: &Scheduler) -> rbisim_isa::Result<Self> {
        let (contract, hardware) = build_ooo_instance(machine, program, scheduler)?;
        Ok(OooModel {
            contract,
            hardware,
            budget: ClosureBudget::new(3, 2),
        })
    }

    /// Without the scheduler validity check; see [`OooHardware::new_unchecked`].
    pub fn new_unchecked(machine: Machine, program: &Program, scheduler: &Scheduler) -> Self {
        OooModel {
            contract: rbisim_core::encode_termination(SeqContract::new(machine, program.clone())),
            hardware: rbisim_core::encode_termination(OooHardware::new_unchecked(
                machine,
                program.clone(),
                scheduler.clone(),
            )),
            budget: ClosureBudget::new(3, 2),
        }
    }
}

impl CaseModel for OooModel {
    type C = ArchState;
    type H = OooState;
    type CSys = SeqSystem;
    type HSys = OooSystem;

    fn contract(&self) -> &SeqSystem {
        &self.contract
    }
    fn hardware(&self) -> &OooSystem {
        &self.hardware
    }
    fn initial(&self, s: &ArchState, cache: &[u32]) -> (ArchState, OooState) {
        (s.clone(), OooState::initial(s.clone(), cache.to_vec()))
    }
    fn quad(&self, s1: &ArchState, s2: &ArchState, cache: &[u32]) -> Quad<ArchState, OooState> {
        ooo_quad(s1, s2, cache)
    }
    fn c_pending(&self, c: &ArchState) -> Option<u32> {
        let c_sys = self.contract.inner();
        c_sys.machine.load_address(c, c_sys.program.get(c.pc)?)
    }
    fn h_pending(&self, h: &OooState) -> Option<u32> {
        self.hardware.inner().pending_load(h)
    }
    fn c_step(&self, c: &ArchState) -> (ArchState, Obs) {
        self.contract.step(c)
    }
    fn h_step(&self, h: &OooState) -> (OooState, Option<u32>) {
        match self.hardware.inner().next(h).expect("scheduler checked when the model was built") {
            None => (h.clone(), None),
            Some(mut n) => {
                let pushed = (n.s.c.len() > h.s.c.len()).then(|| n.s.c[0]);
                n.s.c.clear();
                (n, pushed)
            }
        }
    }
    fn matches(&self, c: &ArchState, h: &OooState) -> bool {
        h.buf.is_none() && *c == h.s.arch
    }
    fn c_pc(&self, c: &ArchState) -> usize {
        c.pc
    }
    fn invariant(&self) -> QuadRelation<ArchState, OooState> {
        QuadRelation::intensional("I_ooo", in_ooo_invariant)
    }
    fn budget(&self) -> ClosureBudget {
        self.budget
    }
    fn c_rule(&self, c: &ArchState) -> &'static str {
        if self.contract.is_halted(c) {
            "seq:Halted"
        } else {
            "seq:Step"
        }
    }
    fn h_rule(&self, h: &OooState) -> &'static str {
        ooo_rule(self.hardware.inner().rule(h).ok())
    }
}
