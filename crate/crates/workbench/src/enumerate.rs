//! Bounded enumeration of programs and initial states.
//!
//! Initial states are enumerated lazily: memory cells start unassigned and a
//! run that is about to read one is restarted once per value for that cell.
//! Every leaf of that search stands for all completions of its unassigned
//! cells, which no run ever reads, so they all share the leaf's traces.
//!
//! Hardware runs start from the empty cache. Both hardware states of a quad
//! share their initial cache and caches only grow at the front, so two
//! hardware traces agree iff the sequences of pushed addresses agree, whatever
//! the initial cache. Hardware traces are therefore keyed by pushed addresses,
//! which also keeps them finite-state when a loop keeps loading.

use std::collections::HashMap;
use std::hash::Hash;

use rbisim_core::{Lasso, Obs};
use rbisim_isa::{ArchState, Instruction, Machine, Program, Reg, Value};

use crate::models::CaseModel;

/// Marks a memory cell no run has read yet.
pub const UNSET: Value = Value::MIN;

/// Every program of length `1..=max_len` over the instruction set, with
/// `add` constants from `constants` and branch targets `0..=len`.
pub fn all_programs(max_len: usize, constants: &[Value]) -> Vec<Program> {
    let mut out = Vec::new();
    for len in 1..=max_len {
        let mut slot = Vec::new();
        for dst in Reg::ALL {
            for src in Reg::ALL {
                slot.push(Instruction::Load { dst, src });
            }
        }
        for dst in Reg::ALL {
            for src in Reg::ALL {
                for &k in constants {
                    slot.push(Instruction::Add { dst, src, k });
                }
            }
        }
        for reg in Reg::ALL {
            for target in 0..=len {
                slot.push(Instruction::Beqz { reg, target });
            }
        }
        let mut idx = vec![0usize; len];
        loop {
            out.push(Program::new(idx.iter().map(|&i| slot[i]).collect()).expect("non-empty"));
            let mut k = len;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < slot.len() {
                    break;
                }
                idx[k] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    out
}

/// A run that stopped before reading an unassigned cell.
#[derive(Debug)]
pub(crate) struct NeedCell(pub u32);

/// States visited from a start state until the first repeat.
pub(crate) struct Walk<S> {
    pub states: Vec<S>,
    pub obs: Vec<Obs>,
    pub loop_at: usize,
}

impl<S> Walk<S> {
    pub fn state(&self, k: usize) -> &S {
        &self.states[self.index(k)]
    }

    pub fn obs(&self, k: usize) -> &Obs {
        &self.obs[self.index(k)]
    }

    fn index(&self, k: usize) -> usize {
        if k < self.states.len() {
            k
        } else {
            self.loop_at + (k - self.loop_at) % (self.states.len() - self.loop_at)
        }
    }

    pub fn lasso(&self) -> Lasso {
        Lasso::canonical(self.obs[..self.loop_at].to_vec(), self.obs[self.loop_at..].to_vec())
    }
}

pub(crate) const WALK_LIMIT: usize = 1 << 20;

pub(crate) fn walk<S: Clone + Eq + Hash>(
    start: S,
    mem: &[Value],
    pending: impl Fn(&S) -> Option<u32>,
    step: impl Fn(&S) -> (S, Obs),
    mut on_rule: impl FnMut(&S),
) -> Result<Walk<S>, NeedCell> {
    let mut states: Vec<S> = Vec::new();
    let mut obs = Vec::new();
    let mut index: HashMap<S, usize> = HashMap::new();
    let mut cur = start;
    loop {
        // Short walks are searched linearly; long ones get a hash index.
        let seen = if states.len() < 48 {
            states.iter().position(|s| *s == cur)
        } else {
            if index.is_empty() {
                index.extend(states.iter().cloned().enumerate().map(|(i, s)| (s, i)));
            }
            index.get(&cur).copied()
        };
        if let Some(loop_at) = seen {
            return Ok(Walk { states, obs, loop_at });
        }
        assert!(states.len() < WALK_LIMIT, "walk exceeded {WALK_LIMIT} states");
        if let Some(a) = pending(&cur) {
            if mem[a as usize] == UNSET {
                return Err(NeedCell(a));
            }
        }
        on_rule(&cur);
        let (n, o) = step(&cur);
        if !index.is_empty() {
            index.insert(cur.clone(), states.len());
        }
        states.push(cur);
        obs.push(o);
        cur = n;
    }
}

/// Exactly what the closure search can observe about one side of a quad.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    pub c_leaks: Vec<Obs>,
    pub c_pcs: Vec<usize>,
    pub pushes: Vec<Obs>,
    /// `matches(C^j s, H^d h)` for `j ≤ J`, `1 ≤ d ≤ h`, row-major in `j`.
    pub matches: Vec<bool>,
}

/// One class of initial states at a fixed pc.
pub struct Leaf {
    /// Memory with [`UNSET`] for cells never read.
    pub arch: ArchState,
    /// Number of concrete initial states this leaf stands for.
    pub weight: u64,
    pub c_key: Lasso,
    pub h_key: Lasso,
    pub sig: Signature,
}

impl Leaf {
    /// A concrete member: unassigned cells take `fill`.
    pub fn concrete(&self, fill: Value) -> ArchState {
        let m: Vec<Value> = self.arch.m.iter().map(|&v| if v == UNSET { fill } else { v }).collect();
        ArchState::new(m, self.arch.a, self.arch.pc)
    }
}

/// Rule names seen while enumerating, with counts.
pub type RuleHits = HashMap<&'static str, u64>;

fn push_obs(p: Option<u32>) -> Obs {
    p.map_or(Obs::Unit, Obs::Address)
}

fn leaf_of<M: CaseModel>(model: &M, arch: &ArchState, hits: &mut RuleHits) -> Result<(Lasso, Lasso, Signature), NeedCell> {
    let (c0, h0) = model.initial(arch, &[]);
    let mut local: Vec<&'static str> = Vec::new();
    let cw = walk(c0, &arch.m, |c| model.c_pending(c), |c| model.c_step(c), |c| local.push(model.c_rule(c)))?;
    let hw = walk(
        h0,
        &arch.m,
        |h| model.h_pending(h),
        |h| {
            let (n, p) = model.h_step(h);
            (n, push_obs(p))
        },
        |h| local.push(model.h_rule(h)),
    )?;
    for r in local {
        *hits.entry(r).or_default() += 1;
    }
    let b = model.budget();
    let (c, h) = (b.c_steps as usize, b.h_steps as usize);
    let j_max = (h + 1) * c;
    let sig = Signature {
        c_leaks: (0..=j_max).map(|j| cw.obs(j).clone()).collect(),
        c_pcs: (0..=j_max).map(|j| model.c_pc(cw.state(j))).collect(),
        pushes: (0..h).map(|d| hw.obs(d).clone()).collect(),
        matches: (0..=j_max)
            .flat_map(|j| (1..=h).map(move |d| (j, d)))
            .map(|(j, d)| model.matches(cw.state(j), hw.state(d)))
            .collect(),
    };
    Ok((cw.lasso(), hw.lasso(), sig))
}

/// All leaves at `pc`, for registers and memory over `values`.
pub fn leaves<M: CaseModel>(model: &M, machine: &Machine, values: &[Value], pc: usize, hits: &mut RuleHits) -> Vec<Leaf> {
    let mut out = Vec::new();
    let n = values.len() as u64;
    for &r1 in values {
        for &r2 in values {
            let mut stack = vec![vec![UNSET; machine.mem_size as usize]];
            while let Some(mem) = stack.pop() {
                let arch = ArchState::new(mem.clone(), [r1, r2], pc);
                match leaf_of(model, &arch, hits) {
                    Ok((c_key, h_key, sig)) => {
                        let unset = mem.iter().filter(|&&v| v == UNSET).count() as u32;
                        out.push(Leaf {
                            arch,
                            weight: n.pow(unset),
                            c_key,
                            h_key,
                            sig,
                        });
                    }
                    Err(NeedCell(a)) => {
                        for &v in values.iter().rev() {
                            let mut m = mem.clone();
                            m[a as usize] = v;
                            stack.push(m);
                        }
                    }
                }
            }
        }
    }
    out
}
