//! Branch-speculating hardware and the always-mispredict contract.

use std::collections::BTreeMap;
use std::fmt;

use rbisim_core::{encode_termination, Obs, PartialSystem, Terminating};
use serde::{Deserialize, Serialize};

use crate::asm::parse_table;
use crate::error::{IsaError, Result};
use crate::machine::{strip_common_suffix, ArchState, Instruction, Machine, Program, VanillaHwState};

/// Remaining speculation steps. `Infinite` means not speculating.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Window {
    Finite(u32),
    Infinite,
}

impl Window {
    /// `∞ - 1 = ∞`; callers never decrement 0.
    pub fn dec(self) -> Window {
        match self {
            Window::Finite(n) => Window::Finite(n - 1),
            Window::Infinite => Window::Infinite,
        }
    }

    pub fn is_zero(self) -> bool {
        self == Window::Finite(0)
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Finite(n) => write!(f, "{n}"),
            Window::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Whether the prediction matched the architectural outcome.
    pub correct: bool,
    pub rollback: ArchState,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpecHwState {
    pub s: VanillaHwState,
    pub omega: Window,
    pub cp: Option<Checkpoint>,
}

impl SpecHwState {
    pub fn initial(arch: ArchState, cache: Vec<u32>) -> Self {
        SpecHwState {
            s: VanillaHwState::new(arch, cache),
            omega: Window::Infinite,
            cp: None,
        }
    }

    pub fn is_speculating(&self) -> bool {
        self.cp.is_some()
    }

    pub fn well_formed(&self, w: u32) -> bool {
        match (&self.cp, self.omega) {
            (None, Window::Infinite) => true,
            (Some(_), Window::Finite(n)) => n <= w,
            _ => false,
        }
    }
}

impl fmt::Display for SpecHwState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{} c={:?}, {}, ", self.s.arch, self.s.c, self.omega)?;
        match &self.cp {
            None => write!(f, "bot>"),
            Some(cp) => write!(f, "({}, {})>", cp.correct, cp.rollback),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Prediction {
    Jump,
    Next,
}

/// Branch predictor: a fixed table from pc to prediction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predictor {
    table: BTreeMap<usize, Prediction>,
    fallback: Option<Prediction>,
}

impl Predictor {
    pub fn constant(p: Prediction) -> Self {
        Predictor {
            table: BTreeMap::new(),
            fallback: Some(p),
        }
    }

    pub fn from_table(entries: impl IntoIterator<Item = (usize, Prediction)>) -> Self {
        Predictor {
            table: entries.into_iter().collect(),
            fallback: None,
        }
    }

    /// Predicts `jump` and `next` for alternate branches of `p`, in pc order.
    pub fn alternating(p: &Program) -> Self {
        Self::from_table(p.branch_pcs().enumerate().map(|(k, pc)| {
            (pc, if k % 2 == 0 { Prediction::Jump } else { Prediction::Next })
        }))
    }

    pub fn predict(&self, pc: usize) -> Option<Prediction> {
        self.table.get(&pc).copied().or(self.fallback)
    }

    /// The table restricted to the branches of `p`.
    pub fn on(&self, p: &Program) -> Result<Vec<(usize, Prediction)>> {
        p.branch_pcs()
            .map(|pc| {
                self.predict(pc)
                    .map(|x| (pc, x))
                    .ok_or_else(|| IsaError::InvalidPredictor(format!("no prediction for the branch at pc {pc}")))
            })
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_table(
            text,
            |t| match t {
                "jump" => Some(Prediction::Jump),
                "next" => Some(Prediction::Next),
                _ => None,
            },
            "jump|next",
        )?;
        Ok(Self::from_table(entries))
    }

    /// Table form for the branches of `p`.
    pub fn to_text(&self, p: &Program) -> Result<String> {
        Ok(self
            .on(p)?
            .into_iter()
            .map(|(pc, x)| format!("{pc} {}\n", if x == Prediction::Jump { "jump" } else { "next" }))
            .collect())
    }
}

/// Which rule of the speculating hardware fires.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpecRule {
    Rollback,
    Commit,
    Step,
    BranchNext,
    BranchJump,
    /// Speculating past the end of the program: only the window shrinks.
    Idle,
    Halted,
}

impl SpecRule {
    pub const ALL: [SpecRule; 7] = [
        SpecRule::Rollback,
        SpecRule::Commit,
        SpecRule::Step,
        SpecRule::BranchNext,
        SpecRule::BranchJump,
        SpecRule::Idle,
        SpecRule::Halted,
    ];
}

/// Speculating hardware for one program, predictor, and window.
#[derive(Clone, Debug)]
pub struct SpecHardware {
    pub machine: Machine,
    pub program: Program,
    pub predictor: Predictor,
    pub w: u32,
}

impl SpecHardware {
    pub fn new(machine: Machine, program: Program, predictor: Predictor, w: u32) -> Result<Self> {
        predictor.on(&program)?;
        Ok(SpecHardware {
            machine,
            program,
            predictor,
            w,
        })
    }

    pub fn rule(&self, st: &SpecHwState) -> SpecRule {
        if st.omega.is_zero() {
            return match &st.cp {
                Some(cp) if cp.correct => SpecRule::Commit,
                _ => SpecRule::Rollback,
            };
        }
        match self.program.get(st.s.arch.pc) {
            None if st.is_speculating() => SpecRule::Idle,
            None => SpecRule::Halted,
            Some(i) if st.is_speculating() || !i.is_branch() => SpecRule::Step,
            Some(_) => match self.predictor.predict(st.s.arch.pc) {
                Some(Prediction::Jump) => SpecRule::BranchJump,
                _ => SpecRule::BranchNext,
            },
        }
    }

    /// Address this step reads from memory, if any.
    pub fn pending_load(&self, st: &SpecHwState) -> Option<u32> {
        match self.rule(st) {
            SpecRule::Step => self.machine.load_address(&st.s.arch, self.program.get(st.s.arch.pc)?),
            _ => None,
        }
    }

    /// Successor, or `None` once halted. The leak is always the current cache.
    pub fn next(&self, st: &SpecHwState) -> Option<SpecHwState> {
        let pc = st.s.arch.pc;
        let next = match self.rule(st) {
            SpecRule::Halted => return None,
            SpecRule::Rollback => {
                let cp = st.cp.as_ref().expect("window 0 without checkpoint");
                SpecHwState {
                    s: VanillaHwState::new(cp.rollback.clone(), st.s.c.clone()),
                    omega: Window::Infinite,
                    cp: None,
                }
            }
            SpecRule::Commit => SpecHwState {
                s: st.s.clone(),
                omega: Window::Infinite,
                cp: None,
            },
            SpecRule::Idle => SpecHwState {
                omega: st.omega.dec(),
                ..st.clone()
            },
            SpecRule::Step => SpecHwState {
                s: self.machine.hw_next(&st.s, &self.program.instructions()[pc]),
                omega: st.omega.dec(),
                cp: st.cp.clone(),
            },
            rule @ (SpecRule::BranchNext | SpecRule::BranchJump) => {
                let Instruction::Beqz { target, .. } = self.program.instructions()[pc] else {
                    unreachable!("branch rule on a non-branch")
                };
                let actual = self.machine.arch_step(&st.s.arch, &self.program.instructions()[pc]);
                let predicted = if rule == SpecRule::BranchJump { target } else { pc + 1 };
                SpecHwState {
                    s: VanillaHwState::new(st.s.arch.with_pc(predicted), st.s.c.clone()),
                    omega: Window::Finite(self.w),
                    cp: Some(Checkpoint {
                        correct: actual.pc == predicted,
                        rollback: actual,
                    }),
                }
            }
        };
        debug_assert!(
            st.cp.is_none() || next.cp.is_none() || next.cp == st.cp,
            "nested speculation"
        );
        Some(next)
    }
}

impl PartialSystem for SpecHardware {
    type State = SpecHwState;

    fn try_step(&self, st: &SpecHwState) -> Option<(SpecHwState, Obs)> {
        self.next(st).map(|n| (n, st.s.cache_obs()))
    }

    fn halt_obs(&self, st: &SpecHwState) -> Obs {
        st.s.cache_obs()
    }

    fn normalize_pair(&self, a: &SpecHwState, b: &SpecHwState) -> Option<(SpecHwState, SpecHwState)> {
        let (ca, cb) = strip_common_suffix(&a.s.c, &b.s.c)?;
        let mut a = a.clone();
        let mut b = b.clone();
        a.s.c = ca;
        b.s.c = cb;
        Some((a, b))
    }
}

/// One step of the speculating hardware; a halted state loops on itself.
pub fn spec_hw_next_leak(
    machine: Machine,
    program: &Program,
    predictor: &Predictor,
    w: u32,
    st: &SpecHwState,
) -> (SpecHwState, Obs) {
    let h = SpecHardware {
        machine,
        program: program.clone(),
        predictor: predictor.clone(),
        w,
    };
    let n = h.next(st).unwrap_or_else(|| st.clone());
    (n, st.s.cache_obs())
}

/// Always-mispredict contract configuration.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AmState {
    pub sigma: ArchState,
    pub omega: Window,
    pub rollback: Option<ArchState>,
}

impl AmState {
    pub fn initial(sigma: ArchState) -> Self {
        AmState {
            sigma,
            omega: Window::Infinite,
            rollback: None,
        }
    }

    pub fn is_speculating(&self) -> bool {
        self.rollback.is_some()
    }
}

impl fmt::Display for AmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, ", self.sigma, self.omega)?;
        match &self.rollback {
            None => write!(f, "bot>"),
            Some(s) => write!(f, "{s}>"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AmRule {
    Step,
    Rollback,
    Branch,
    Idle,
    Halted,
}

impl AmRule {
    pub const ALL: [AmRule; 5] = [AmRule::Step, AmRule::Rollback, AmRule::Branch, AmRule::Idle, AmRule::Halted];
}

#[derive(Clone, Debug)]
pub struct AmContract {
    pub machine: Machine,
    pub program: Program,
    pub w: u32,
}

impl AmContract {
    pub fn new(machine: Machine, program: Program, w: u32) -> Self {
        AmContract { machine, program, w }
    }

    pub fn rule(&self, st: &AmState) -> AmRule {
        if st.omega.is_zero() {
            return AmRule::Rollback;
        }
        match self.program.get(st.sigma.pc) {
            None if st.is_speculating() => AmRule::Idle,
            None => AmRule::Halted,
            Some(i) if st.is_speculating() || !i.is_branch() => AmRule::Step,
            Some(_) => AmRule::Branch,
        }
    }

    pub fn pending_load(&self, st: &AmState) -> Option<u32> {
        match self.rule(st) {
            AmRule::Step => self.machine.load_address(&st.sigma, self.program.get(st.sigma.pc)?),
            _ => None,
        }
    }

    pub fn next_leak(&self, st: &AmState) -> Option<(AmState, Obs)> {
        let pc = st.sigma.pc;
        Some(match self.rule(st) {
            AmRule::Halted => return None,
            AmRule::Rollback => (
                AmState::initial(st.rollback.clone().expect("window 0 without rollback state")),
                Obs::Unit,
            ),
            AmRule::Idle => (
                AmState {
                    omega: st.omega.dec(),
                    ..st.clone()
                },
                Obs::Unit,
            ),
            AmRule::Step => {
                let i = &self.program.instructions()[pc];
                (
                    AmState {
                        sigma: self.machine.arch_step(&st.sigma, i),
                        omega: st.omega.dec(),
                        rollback: st.rollback.clone(),
                    },
                    self.machine.contract_leak(&st.sigma, i),
                )
            }
            AmRule::Branch => {
                let i = &self.program.instructions()[pc];
                let Instruction::Beqz { reg, target } = *i else {
                    unreachable!("branch rule on a non-branch")
                };
                let taken = st.sigma.reg(reg) == 0;
                let wrong = if taken { pc + 1 } else { target };
                (
                    AmState {
                        sigma: st.sigma.with_pc(wrong),
                        omega: Window::Finite(self.w),
                        rollback: Some(self.machine.arch_step(&st.sigma, i)),
                    },
                    Obs::Branch(taken),
                )
            }
        })
    }
}

impl PartialSystem for AmContract {
    type State = AmState;

    fn try_step(&self, st: &AmState) -> Option<(AmState, Obs)> {
        self.next_leak(st)
    }

    fn halt_obs(&self, _: &AmState) -> Obs {
        Obs::Halt
    }
}

/// One step of the always-mispredict contract; a halted state loops on itself.
pub fn am_next_leak(machine: Machine, program: &Program, w: u32, st: &AmState) -> (AmState, Obs) {
    AmContract::new(machine, program.clone(), w)
        .next_leak(st)
        .unwrap_or_else(|| (st.clone(), Obs::Halt))
}

pub type AmSystem = Terminating<AmContract>;
pub type SpecSystem = Terminating<SpecHardware>;

/// Contract and hardware systems for one speculation case-study instance.
pub fn build_am_instance(
    machine: Machine,
    program: &Program,
    predictor: &Predictor,
    w: u32,
) -> Result<(AmSystem, SpecSystem)> {
    if w == 0 {
        return Err(IsaError::Bounds("speculation window must be at least 1".into()));
    }
    let h = SpecHardware::new(machine, program.clone(), predictor.clone(), w)?;
    Ok((encode_termination(AmContract::new(machine, program.clone(), w)), encode_termination(h)))
}

/// The quad `(<σ1,∞,⊥>, <σ2,∞,⊥>, <(σ1,c),∞,⊥>, <(σ2,c),∞,⊥>)`.
pub fn am_quad(s1: &ArchState, s2: &ArchState, cache: &[u32]) -> rbisim_core::Quad<AmState, SpecHwState> {
    rbisim_core::Quad::new(
        AmState::initial(s1.clone()),
        AmState::initial(s2.clone()),
        SpecHwState::initial(s1.clone(), cache.to_vec()),
        SpecHwState::initial(s2.clone(), cache.to_vec()),
    )
}

/// Membership in the speculation invariant: both sides out of speculation,
/// each hardware state running its own contract state, common pc and cache.
pub fn in_am_invariant(q: &rbisim_core::Quad<AmState, SpecHwState>) -> bool {
    let idle = Window::Infinite;
    (q.s1.omega, q.s2.omega, q.h1.omega, q.h2.omega) == (idle, idle, idle, idle)
        && !q.s1.is_speculating()
        && !q.s2.is_speculating()
        && !q.h1.is_speculating()
        && !q.h2.is_speculating()
        && q.s1.sigma == q.h1.s.arch
        && q.s2.sigma == q.h2.s.arch
        && q.s1.sigma.pc == q.s2.sigma.pc
        && q.h1.s.c == q.h2.s.c
}
