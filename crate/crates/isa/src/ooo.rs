//! Out-of-order hardware with a one-instruction buffer.

use std::collections::BTreeMap;
use std::fmt;

use rbisim_core::{encode_termination, Obs, PartialSystem, Quad, Terminating};
use serde::{Deserialize, Serialize};

use crate::asm::parse_table;
use crate::error::{IsaError, Result};
use crate::machine::{strip_common_suffix, ArchState, Instruction, Machine, Program, Reg, SeqContract, VanillaHwState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Schedule {
    Execute,
    Delay,
}

/// Scheduling function: pc to decision, `execute` where unlisted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scheduler {
    delays: BTreeMap<usize, Schedule>,
}

impl Scheduler {
    pub fn all_execute() -> Self {
        Self::default()
    }

    pub fn delaying(pcs: impl IntoIterator<Item = usize>) -> Self {
        Scheduler {
            delays: pcs.into_iter().map(|pc| (pc, Schedule::Delay)).collect(),
        }
    }

    pub fn decide(&self, pc: usize) -> Schedule {
        self.delays.get(&pc).copied().unwrap_or(Schedule::Execute)
    }

    pub fn delay_pcs(&self) -> impl Iterator<Item = usize> + '_ {
        self.delays.iter().filter(|(_, d)| **d == Schedule::Delay).map(|(pc, _)| *pc)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_table(
            text,
            |t| match t {
                "execute" => Some(Schedule::Execute),
                "delay" => Some(Schedule::Delay),
                _ => None,
            },
            "execute|delay",
        )?;
        Ok(Scheduler {
            delays: entries.into_iter().collect(),
        })
    }

    pub fn to_text(&self) -> String {
        self.delay_pcs().map(|pc| format!("{pc} delay\n")).collect()
    }

    /// Delay is only requested where the instruction and its successor are
    /// delayable.
    pub fn validate(&self, p: &Program) -> Result<()> {
        for pc in self.delay_pcs() {
            let (Some(i1), Some(i2)) = (p.get(pc), p.get(pc + 1)) else {
                return Err(IsaError::InvalidScheduler {
                    pc,
                    reason: "delay needs a following instruction".into(),
                });
            };
            if !delayable(i1, i2) {
                return Err(IsaError::InvalidScheduler {
                    pc,
                    reason: format!("`{i1}` and `{i2}` are not delayable"),
                });
            }
        }
        Ok(())
    }

    /// Every valid scheduler of `p`.
    pub fn all_valid(p: &Program) -> Vec<Scheduler> {
        let spots: Vec<usize> = (0..p.len().saturating_sub(1))
            .filter(|&pc| delayable(&p.instructions()[pc], &p.instructions()[pc + 1]))
            .collect();
        (0u32..1 << spots.len())
            .map(|mask| Scheduler::delaying(spots.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, pc)| *pc)))
            .collect()
    }
}

/// A register, or the program counter written by a branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Loc {
    Reg(Reg),
    Pc,
}

fn src(i: &Instruction) -> Loc {
    match *i {
        Instruction::Add { src, .. } | Instruction::Load { src, .. } => Loc::Reg(src),
        Instruction::Beqz { reg, .. } => Loc::Reg(reg),
    }
}

fn des(i: &Instruction) -> Loc {
    match *i {
        Instruction::Add { dst, .. } | Instruction::Load { dst, .. } => Loc::Reg(dst),
        Instruction::Beqz { .. } => Loc::Pc,
    }
}

/// Whether `i1` may run after its successor `i2`.
pub fn delayable(i1: &Instruction, i2: &Instruction) -> bool {
    !i1.is_branch() && des(i1) != des(i2) && des(i1) != src(i2) && src(i1) != des(i2)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OooState {
    pub s: VanillaHwState,
    pub buf: Option<Instruction>,
}

impl OooState {
    pub fn initial(arch: ArchState, cache: Vec<u32>) -> Self {
        OooState {
            s: VanillaHwState::new(arch, cache),
            buf: None,
        }
    }
}

impl fmt::Display for OooState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{} c={:?}, ", self.s.arch, self.s.c)?;
        match &self.buf {
            None => write!(f, "bot>"),
            Some(i) => write!(f, "{i}>"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OooRule {
    Execute,
    ExecuteHeap,
    Delay,
    Halted,
}

impl OooRule {
    pub const ALL: [OooRule; 4] = [OooRule::Execute, OooRule::ExecuteHeap, OooRule::Delay, OooRule::Halted];
}

#[derive(Clone, Debug)]
pub struct OooHardware {
    pub machine: Machine,
    pub program: Program,
    pub scheduler: Scheduler,
    checked: bool,
}

impl OooHardware {
    pub fn new(machine: Machine, program: Program, scheduler: Scheduler) -> Result<Self> {
        scheduler.validate(&program)?;
        Ok(OooHardware {
            machine,
            program,
            scheduler,
            checked: true,
        })
    }

    /// Skips validation: `delay` then reorders any pair, delayable or not.
    /// For negative controls only.
    pub fn new_unchecked(machine: Machine, program: Program, scheduler: Scheduler) -> Self {
        OooHardware {
            machine,
            program,
            scheduler,
            checked: false,
        }
    }

    pub fn rule(&self, st: &OooState) -> Result<OooRule> {
        if st.buf.is_some() {
            return Ok(OooRule::ExecuteHeap);
        }
        let pc = st.s.arch.pc;
        let Some(i1) = self.program.get(pc) else {
            return Ok(OooRule::Halted);
        };
        if self.scheduler.decide(pc) == Schedule::Execute {
            return Ok(OooRule::Execute);
        }
        match self.program.get(pc + 1) {
            Some(i2) if !self.checked || delayable(i1, i2) => Ok(OooRule::Delay),
            None if !self.checked => Ok(OooRule::Execute),
            _ => Err(IsaError::InvalidScheduler {
                pc,
                reason: "delay requested on a non-delayable pair".into(),
            }),
        }
    }

    pub fn pending_load(&self, st: &OooState) -> Option<u32> {
        let pc = st.s.arch.pc;
        let i = match self.rule(st).ok()? {
            OooRule::ExecuteHeap => st.buf?,
            OooRule::Execute => *self.program.get(pc)?,
            OooRule::Delay => *self.program.get(pc + 1)?,
            OooRule::Halted => return None,
        };
        self.machine.load_address(&st.s.arch, &i)
    }

    pub fn next(&self, st: &OooState) -> Result<Option<OooState>> {
        let pc = st.s.arch.pc;
        Ok(Some(match self.rule(st)? {
            OooRule::Halted => return Ok(None),
            OooRule::ExecuteHeap => {
                let mut s = self.machine.hw_next(&st.s, &st.buf.expect("heap rule with empty buffer"));
                s.arch.pc = pc;
                OooState { s, buf: None }
            }
            OooRule::Execute => OooState {
                s: self.machine.hw_next(&st.s, &self.program.instructions()[pc]),
                buf: None,
            },
            OooRule::Delay => {
                let ahead = VanillaHwState::new(st.s.arch.with_pc(pc + 1), st.s.c.clone());
                OooState {
                    s: self.machine.hw_next(&ahead, &self.program.instructions()[pc + 1]),
                    buf: Some(self.program.instructions()[pc]),
                }
            }
        }))
    }
}

impl PartialSystem for OooHardware {
    type State = OooState;

    fn try_step(&self, st: &OooState) -> Option<(OooState, Obs)> {
        let n = self.next(st).expect("scheduler validated at construction")?;
        Some((n, st.s.cache_obs()))
    }

    fn halt_obs(&self, st: &OooState) -> Obs {
        st.s.cache_obs()
    }

    fn normalize_pair(&self, a: &OooState, b: &OooState) -> Option<(OooState, OooState)> {
        let (ca, cb) = strip_common_suffix(&a.s.c, &b.s.c)?;
        let mut a = a.clone();
        let mut b = b.clone();
        a.s.c = ca;
        b.s.c = cb;
        Some((a, b))
    }
}

/// One out-of-order step; a halted state loops on itself.
pub fn ooo_next_leak(machine: Machine, program: &Program, scheduler: &Scheduler, st: &OooState) -> Result<(OooState, Obs)> {
    let h = OooHardware {
        machine,
        program: program.clone(),
        scheduler: scheduler.clone(),
        checked: true,
    };
    let n = h.next(st)?.unwrap_or_else(|| st.clone());
    Ok((n, st.s.cache_obs()))
}

/// One step of the sequential contract; a halted state loops on itself.
pub fn seq_next_leak(machine: Machine, program: &Program, s: &ArchState) -> (ArchState, Obs) {
    SeqContract::new(machine, program.clone())
        .next_leak(s)
        .unwrap_or_else(|| (s.clone(), Obs::Halt))
}

pub type SeqSystem = Terminating<SeqContract>;
pub type OooSystem = Terminating<OooHardware>;

pub fn build_ooo_instance(machine: Machine, program: &Program, scheduler: &Scheduler) -> Result<(SeqSystem, OooSystem)> {
    let h = OooHardware::new(machine, program.clone(), scheduler.clone())?;
    Ok((encode_termination(SeqContract::new(machine, program.clone())), encode_termination(h)))
}

pub fn ooo_quad(s1: &ArchState, s2: &ArchState, cache: &[u32]) -> Quad<ArchState, OooState> {
    Quad::new(
        s1.clone(),
        s2.clone(),
        OooState::initial(s1.clone(), cache.to_vec()),
        OooState::initial(s2.clone(), cache.to_vec()),
    )
}

/// Membership in the out-of-order invariant: empty buffers, each hardware
/// state running its own contract state, common pc and cache.
pub fn in_ooo_invariant(q: &Quad<ArchState, OooState>) -> bool {
    q.h1.buf.is_none()
        && q.h2.buf.is_none()
        && q.s1 == q.h1.s.arch
        && q.s2 == q.h2.s.arch
        && q.s1.pc == q.s2.pc
        && q.h1.s.c == q.h2.s.c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i(t: &str) -> Instruction {
        crate::asm::parse_program(t).unwrap().instructions()[0]
    }

    #[test]
    fn branches_are_never_delayed() {
        assert!(!delayable(&i("beqz r1 0"), &i("add r2 r2 1")));
        assert!(!delayable(&i("beqz r1 0"), &i("beqz r2 0")));
    }

    #[test]
    fn register_conflicts() {
        assert!(!delayable(&i("load r1 r2"), &i("load r2 r1")));
        assert!(delayable(&i("add r1 r1 1"), &i("load r2 r2")));
        assert!(!delayable(&i("add r1 r1 1"), &i("add r1 r2 0")));
        // A branch second is fine when it does not read the delayed result.
        assert!(delayable(&i("add r1 r1 1"), &i("beqz r2 0")));
        assert!(!delayable(&i("add r1 r1 1"), &i("beqz r1 0")));
    }

    #[test]
    fn scheduler_enumeration() {
        let p = crate::asm::parse_program("add r1 r1 1\nload r2 r2\nadd r1 r1 2").unwrap();
        let all = Scheduler::all_valid(&p);
        assert_eq!(all.len(), 4);
        assert!(all.iter().all(|s| s.validate(&p).is_ok()));
        assert!(Scheduler::delaying([2]).validate(&p).is_err());
    }
}
