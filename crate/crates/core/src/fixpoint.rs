//! Fixpoint characterizations of bisimilarity and its relative variants.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lts::TransitionSystem;
use crate::universe::{QuadSet, QuadUniverse};

/// Greatest bisimulation over a next-closed set of state pairs.
pub fn compute_bisim<T: TransitionSystem>(
    t: &T,
    pairs: &[(T::State, T::State)],
) -> Result<HashSet<(T::State, T::State)>> {
    let index: HashMap<&(T::State, T::State), usize> = pairs.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let mut succ = Vec::with_capacity(pairs.len());
    let mut same = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (a, la) = t.step(&p.0);
        let (b, lb) = t.step(&p.1);
        let n = (a, b);
        let j = *index.get(&n).ok_or_else(|| Error::NotClosed {
            from: format!("{p:?}"),
            missing: format!("{n:?}"),
        })?;
        succ.push(j);
        same.push(la == lb);
    }
    let mut x = vec![true; pairs.len()];
    loop {
        let y: Vec<bool> = (0..pairs.len()).map(|i| same[i] && x[succ[i]]).collect();
        if y == x {
            break;
        }
        x = y;
    }
    Ok(pairs.iter().zip(x).filter(|(_, keep)| *keep).map(|(p, _)| p.clone()).collect())
}

/// Every pair over a next-closed state list.
pub fn all_pairs<S: Clone>(states: &[S]) -> Vec<(S, S)> {
    states
        .iter()
        .flat_map(|a| states.iter().map(move |b| (a.clone(), b.clone())))
        .collect()
}

fn gfp(n: usize, f: impl Fn(&QuadSet) -> QuadSet) -> QuadSet {
    let mut x = QuadSet::full(n);
    loop {
        let y = f(&x);
        if y == x {
            return x;
        }
        x = y;
    }
}

/// Greatest fixpoint of the lockstep functional: a contract leak mismatch, or
/// equal hardware leaks and the all-four successor in the relation.
pub fn compute_rbisim_lockstep<S, H>(u: &QuadUniverse<S, H>) -> QuadSet
where
    S: Clone + Eq + Hash + fmt::Debug,
    H: Clone + Eq + Hash + fmt::Debug,
{
    gfp(u.len(), |x| {
        QuadSet::from_fn(u.len(), |i| {
            u.c_leak_differs(i) || (u.h_leak_equal(i) && x.contains(u.lockstep_succ(i)))
        })
    })
}

/// Greatest fixpoint with both contract and hardware steps coinductive.
/// It is always the whole universe.
pub fn compute_rbisim_relaxed<S, H>(u: &QuadUniverse<S, H>) -> QuadSet
where
    S: Clone + Eq + Hash + fmt::Debug,
    H: Clone + Eq + Hash + fmt::Debug,
{
    gfp(u.len(), |x| {
        QuadSet::from_fn(u.len(), |i| {
            u.c_leak_differs(i) || x.contains(u.c_succ(i)) || (u.h_leak_equal(i) && x.contains(u.h_succ(i)))
        })
    })
}

/// Which disjunct put a quad into the inner least fixpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Justification {
    CLeak,
    CStep,
    HStep,
}

/// Result of one inner least-fixpoint computation.
#[derive(Clone, Debug)]
pub struct InnerFixpoint {
    pub set: QuadSet,
    /// For each member: the disjunct used and the iteration it entered at.
    /// A C-step member's successor always entered strictly earlier.
    pub justification: Vec<Option<(Justification, u32)>>,
    pub iterates: usize,
}

/// `μR. C-Leak ∪ C-Step(R) ∪ H-Step(x)`: the one-step functional whose
/// greatest fixpoint is relative bisimilarity.
pub fn rbisim_functional<S, H>(u: &QuadUniverse<S, H>, x: &QuadSet) -> InnerFixpoint
where
    S: Clone + Eq + Hash + fmt::Debug,
    H: Clone + Eq + Hash + fmt::Debug,
{
    inner_lfp(u, x, None)
}

fn inner_lfp<S, H>(u: &QuadUniverse<S, H>, x: &QuadSet, mut trace: Option<&mut Vec<QuadSet>>) -> InnerFixpoint
where
    S: Clone + Eq + Hash + fmt::Debug,
    H: Clone + Eq + Hash + fmt::Debug,
{
    let n = u.len();
    let mut r = QuadSet::empty(n);
    let mut just = vec![None; n];
    let mut round = 0u32;
    loop {
        if let Some(t) = trace.as_deref_mut() {
            t.push(r.clone());
        }
        let mut added = Vec::new();
        for i in 0..n {
            if r.contains(i) {
                continue;
            }
            let j = if u.c_leak_differs(i) {
                Some(Justification::CLeak)
            } else if u.h_leak_equal(i) && x.contains(u.h_succ(i)) {
                Some(Justification::HStep)
            } else if r.contains(u.c_succ(i)) {
                Some(Justification::CStep)
            } else {
                None
            };
            if let Some(j) = j {
                added.push((i, j));
            }
        }
        if added.is_empty() {
            return InnerFixpoint {
                set: r,
                justification: just,
                iterates: round as usize,
            };
        }
        for (i, j) in added {
            r.insert(i);
            just[i] = Some((j, round));
        }
        round += 1;
    }
}

/// Relative bisimilarity with the data needed to rebuild derivations.
#[derive(Clone, Debug)]
pub struct RbisimComputation {
    pub members: QuadSet,
    /// Justification from the final inner fixpoint.
    pub justification: Vec<Option<(Justification, u32)>>,
    /// Outer iterates, starting from the full set and ending at the fixpoint.
    pub outer: Vec<QuadSet>,
    /// Inner iterates of each outer round, starting from the empty set.
    pub inner: Vec<Vec<QuadSet>>,
}

/// `νR1. μR2. C-Leak ∪ C-Step(R2) ∪ H-Step(R1)`, outer iteration downward
/// from the full set, inner iteration upward from empty at every round.
pub fn compute_rbisim<S, H>(u: &QuadUniverse<S, H>) -> QuadSet
where
    S: Clone + Eq + Hash + fmt::Debug,
    H: Clone + Eq + Hash + fmt::Debug,
{
    compute_rbisim_traced(u, false).members
}

/// As [`compute_rbisim`]. With `keep_iterates`, every outer and inner iterate
/// is recorded.
pub fn compute_rbisim_traced<S, H>(u: &QuadUniverse<S, H>, keep_iterates: bool) -> RbisimComputation
where
    S: Clone + Eq + Hash + fmt::Debug,
    H: Clone + Eq + Hash + fmt::Debug,
{
    let mut x = u.full_set();
    let mut outer = Vec::new();
    let mut inner = Vec::new();
    loop {
        if keep_iterates {
            outer.push(x.clone());
        }
        let mut trace = Vec::new();
        let step = inner_lfp(u, &x, keep_iterates.then_some(&mut trace));
        if keep_iterates {
            inner.push(trace);
        }
        if step.set == x {
            return RbisimComputation {
                members: x,
                justification: step.justification,
                outer,
                inner,
            };
        }
        x = step.set;
    }
}
