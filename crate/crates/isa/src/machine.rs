//! Instructions, architectural states, and the vanilla semantics.

use std::fmt;
use std::sync::Arc;

use rbisim_core::Obs;
use serde::{Deserialize, Serialize};

use crate::error::{IsaError, Result};

pub type Value = i64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reg {
    R1,
    R2,
}

impl Reg {
    pub const ALL: [Reg; 2] = [Reg::R1, Reg::R2];

    fn index(self) -> usize {
        match self {
            Reg::R1 => 0,
            Reg::R2 => 1,
        }
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reg::R1 => "r1",
            Reg::R2 => "r2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Instruction {
    /// `x1 := m(a(x2))`
    Load { dst: Reg, src: Reg },
    /// `x1 := a(x2) + k`
    Add { dst: Reg, src: Reg, k: Value },
    /// Jump to `target` when `a(reg) = 0`.
    Beqz { reg: Reg, target: usize },
}

impl Instruction {
    pub fn is_branch(&self) -> bool {
        matches!(self, Instruction::Beqz { .. })
    }

    pub fn is_load(&self) -> bool {
        matches!(self, Instruction::Load { .. })
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Load { dst, src } => write!(f, "load {dst} {src}"),
            Instruction::Add { dst, src, k } => write!(f, "add {dst} {src} {k}"),
            Instruction::Beqz { reg, target } => write!(f, "beqz {reg} {target}"),
        }
    }
}

/// A non-empty instruction sequence addressed from pc 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Instruction>", into = "Vec<Instruction>")]
pub struct Program(Arc<[Instruction]>);

impl Program {
    pub fn new(instructions: Vec<Instruction>) -> Result<Self> {
        if instructions.is_empty() {
            return Err(IsaError::Bounds("a program needs at least one instruction".into()));
        }
        Ok(Program(instructions.into()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, pc: usize) -> Option<&Instruction> {
        self.0.get(pc)
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.0
    }

    pub fn has_branch(&self) -> bool {
        self.0.iter().any(Instruction::is_branch)
    }

    pub fn branch_pcs(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, i)| i.is_branch()).map(|(pc, _)| pc)
    }
}

impl TryFrom<Vec<Instruction>> for Program {
    type Error = IsaError;
    fn try_from(v: Vec<Instruction>) -> Result<Self> {
        Program::new(v)
    }
}

impl From<Program> for Vec<Instruction> {
    fn from(p: Program) -> Self {
        p.0.to_vec()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in self.0.iter() {
            writeln!(f, "{i}")?;
        }
        Ok(())
    }
}

/// How register arithmetic treats results.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueDomain {
    /// Plain integers.
    Unbounded,
    /// Results wrap into `lo..=hi`, keeping enumerated state spaces finite.
    Wrapping { lo: Value, hi: Value },
}

impl ValueDomain {
    pub fn range(lo: Value, hi: Value) -> Result<Self> {
        if lo > hi {
            return Err(IsaError::Bounds(format!("empty value range {lo}..={hi}")));
        }
        Ok(ValueDomain::Wrapping { lo, hi })
    }

    pub fn normalize(self, v: Value) -> Value {
        match self {
            ValueDomain::Unbounded => v,
            ValueDomain::Wrapping { lo, hi } => lo + (v - lo).rem_euclid(hi - lo + 1),
        }
    }

    pub fn contains(self, v: Value) -> bool {
        match self {
            ValueDomain::Unbounded => true,
            ValueDomain::Wrapping { lo, hi } => (lo..=hi).contains(&v),
        }
    }

    /// Every value, for bounded domains.
    pub fn values(self) -> Option<Vec<Value>> {
        match self {
            ValueDomain::Unbounded => None,
            ValueDomain::Wrapping { lo, hi } => Some((lo..=hi).collect()),
        }
    }
}

/// Memory size and value domain shared by all semantics of one instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Machine {
    pub mem_size: u32,
    pub values: ValueDomain,
}

impl Default for Machine {
    fn default() -> Self {
        Machine {
            mem_size: 4,
            values: ValueDomain::Unbounded,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArchState {
    pub m: Arc<[Value]>,
    pub a: [Value; 2],
    pub pc: usize,
}

impl ArchState {
    pub fn new(m: Vec<Value>, a: [Value; 2], pc: usize) -> Self {
        ArchState { m: m.into(), a, pc }
    }

    pub fn reg(&self, r: Reg) -> Value {
        self.a[r.index()]
    }

    pub fn with_reg(&self, r: Reg, v: Value) -> Self {
        let mut s = self.clone();
        s.a[r.index()] = v;
        s
    }

    pub fn with_pc(&self, pc: usize) -> Self {
        ArchState { pc, ..self.clone() }
    }
}

impl fmt::Display for ArchState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m={:?} r1={} r2={} pc={}", self.m, self.a[0], self.a[1], self.pc)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VanillaHwState {
    pub arch: ArchState,
    /// Most recent first.
    pub c: Vec<u32>,
}

impl VanillaHwState {
    pub fn new(arch: ArchState, c: Vec<u32>) -> Self {
        VanillaHwState { arch, c }
    }

    pub fn cache_obs(&self) -> Obs {
        Obs::cache(&self.c)
    }
}

/// Longest common suffix of two caches, removed from both. Caches only grow
/// at the front, so the shared tail never affects future equality.
pub(crate) fn strip_common_suffix(a: &[u32], b: &[u32]) -> Option<(Vec<u32>, Vec<u32>)> {
    let n = a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count();
    (n > 0).then(|| (a[..a.len() - n].to_vec(), b[..b.len() - n].to_vec()))
}

impl Machine {
    pub fn new(mem_size: u32, values: ValueDomain) -> Result<Self> {
        if mem_size == 0 {
            return Err(IsaError::Bounds("memory size must be positive".into()));
        }
        Ok(Machine { mem_size, values })
    }

    /// Negative values clamp to 0, then wrap into the memory.
    pub fn address(&self, v: Value) -> u32 {
        (v.max(0) as u64 % self.mem_size as u64) as u32
    }

    /// Address read by `i` in `σ`, if `i` is a load.
    pub fn load_address(&self, s: &ArchState, i: &Instruction) -> Option<u32> {
        match i {
            Instruction::Load { src, .. } => Some(self.address(s.reg(*src))),
            _ => None,
        }
    }

    pub fn arch_step(&self, s: &ArchState, i: &Instruction) -> ArchState {
        match *i {
            Instruction::Add { dst, src, k } => {
                let mut n = s.with_reg(dst, self.values.normalize(s.reg(src) + k));
                n.pc += 1;
                n
            }
            Instruction::Load { dst, src } => {
                let v = s.m[self.address(s.reg(src)) as usize];
                let mut n = s.with_reg(dst, v);
                n.pc += 1;
                n
            }
            Instruction::Beqz { reg, target } => {
                let pc = if s.reg(reg) == 0 { target } else { s.pc + 1 };
                s.with_pc(pc)
            }
        }
    }

    /// One instruction on the cache-leaking hardware. Leaks the pre-state cache.
    pub fn hw_step(&self, h: &VanillaHwState, i: &Instruction) -> (VanillaHwState, Obs) {
        let obs = h.cache_obs();
        (self.hw_next(h, i), obs)
    }

    pub fn hw_next(&self, h: &VanillaHwState, i: &Instruction) -> VanillaHwState {
        let arch = self.arch_step(&h.arch, i);
        let c = match self.load_address(&h.arch, i) {
            Some(adr) => {
                let mut c = Vec::with_capacity(h.c.len() + 1);
                c.push(adr);
                c.extend_from_slice(&h.c);
                c
            }
            None => h.c.clone(),
        };
        VanillaHwState { arch, c }
    }

    /// What a contract exposes for executing `i` in `σ`: the loaded address,
    /// the branch condition, or nothing.
    pub fn contract_leak(&self, s: &ArchState, i: &Instruction) -> Obs {
        match *i {
            Instruction::Load { src, .. } => Obs::Address(self.address(s.reg(src))),
            Instruction::Beqz { reg, .. } => Obs::Branch(s.reg(reg) == 0),
            Instruction::Add { .. } => Obs::Unit,
        }
    }

    pub fn check_state(&self, s: &ArchState) -> Result<()> {
        if s.m.len() != self.mem_size as usize {
            return Err(IsaError::Bounds(format!(
                "memory has {} cells, expected {}",
                s.m.len(),
                self.mem_size
            )));
        }
        if let Some(v) = s.m.iter().chain(s.a.iter()).find(|v| !self.values.contains(**v)) {
            return Err(IsaError::Bounds(format!("value {v} outside the value domain")));
        }
        Ok(())
    }
}

/// Sequential contract: in-order execution leaking addresses and branch
/// conditions. Halts when the pc leaves the program.
#[derive(Clone, Debug)]
pub struct SeqContract {
    pub machine: Machine,
    pub program: Program,
}

impl SeqContract {
    pub fn new(machine: Machine, program: Program) -> Self {
        SeqContract { machine, program }
    }

    pub fn next_leak(&self, s: &ArchState) -> Option<(ArchState, Obs)> {
        let i = self.program.get(s.pc)?;
        Some((self.machine.arch_step(s, i), self.machine.contract_leak(s, i)))
    }
}

impl rbisim_core::PartialSystem for SeqContract {
    type State = ArchState;
    fn try_step(&self, s: &ArchState) -> Option<(ArchState, Obs)> {
        self.next_leak(s)
    }
    fn halt_obs(&self, _: &ArchState) -> Obs {
        Obs::Halt
    }
}

/// In-order cache-leaking hardware. A halted machine keeps leaking its cache.
#[derive(Clone, Debug)]
pub struct VanillaHardware {
    pub machine: Machine,
    pub program: Program,
}

impl rbisim_core::PartialSystem for VanillaHardware {
    type State = VanillaHwState;
    fn try_step(&self, h: &VanillaHwState) -> Option<(VanillaHwState, Obs)> {
        let i = self.program.get(h.arch.pc)?;
        Some(self.machine.hw_step(h, i))
    }
    fn halt_obs(&self, h: &VanillaHwState) -> Obs {
        h.cache_obs()
    }
    fn normalize_pair(&self, a: &VanillaHwState, b: &VanillaHwState) -> Option<(VanillaHwState, VanillaHwState)> {
        let (ca, cb) = strip_common_suffix(&a.c, &b.c)?;
        Some((VanillaHwState::new(a.arch.clone(), ca), VanillaHwState::new(b.arch.clone(), cb)))
    }
}
