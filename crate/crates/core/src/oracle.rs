//! Decision procedures for trace equality on finite deterministic systems.

use std::collections::HashMap;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lts::{Quad, TransitionSystem};
use crate::obs::Obs;

/// Default bound on the number of pairs or quads any procedure may visit.
pub const DEFAULT_BUDGET: usize = 100_000;

/// Outcome of a pair walk. `witness_index` is the first position where the
/// two traces differ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairGraphVerdict {
    pub witness_index: Option<usize>,
}

impl PairGraphVerdict {
    pub const EQUAL: PairGraphVerdict = PairGraphVerdict { witness_index: None };

    pub fn differs_at(k: usize) -> Self {
        PairGraphVerdict { witness_index: Some(k) }
    }

    pub fn equal(&self) -> bool {
        self.witness_index.is_none()
    }
}

/// Walk `(s1, s2), (next s1, next s2), ...` until leaks differ or a pair repeats.
pub fn traces_equal<T: TransitionSystem>(t: &T, s1: &T::State, s2: &T::State) -> Result<PairGraphVerdict> {
    traces_equal_within(t, s1, s2, DEFAULT_BUDGET)
}

pub fn traces_equal_within<T: TransitionSystem>(
    t: &T,
    s1: &T::State,
    s2: &T::State,
    budget: usize,
) -> Result<PairGraphVerdict> {
    let mut seen: HashSet<(T::State, T::State)> = HashSet::new();
    let mut a = s1.clone();
    let mut b = s2.clone();
    for k in 0.. {
        if a == b {
            return Ok(PairGraphVerdict::EQUAL);
        }
        if let Some((x, y)) = t.normalize_pair(&a, &b) {
            a = x;
            b = y;
        }
        if !seen.insert((a.clone(), b.clone())) {
            return Ok(PairGraphVerdict::EQUAL);
        }
        if seen.len() > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        let (na, la) = t.step(&a);
        let (nb, lb) = t.step(&b);
        if la != lb {
            return Ok(PairGraphVerdict::differs_at(k));
        }
        a = na;
        b = nb;
    }
    unreachable!()
}

/// Contract trace equality implies hardware trace equality, at one quad.
pub fn rel_trace_eq<C, H>(c: &C, h: &H, q: &Quad<C::State, H::State>) -> Result<bool>
where
    C: TransitionSystem,
    H: TransitionSystem,
{
    rel_trace_eq_within(c, h, q, DEFAULT_BUDGET)
}

pub fn rel_trace_eq_within<C, H>(c: &C, h: &H, q: &Quad<C::State, H::State>, budget: usize) -> Result<bool>
where
    C: TransitionSystem,
    H: TransitionSystem,
{
    if !traces_equal_within(c, &q.s1, &q.s2, budget)?.equal() {
        return Ok(true);
    }
    Ok(traces_equal_within(h, &q.h1, &q.h2, budget)?.equal())
}

/// Membership in the lockstep relation, decided along the single lockstep path
/// of `q`: some contract leak mismatch must come no later than the first
/// hardware leak mismatch.
pub fn lockstep_rel<C, H>(c: &C, h: &H, q: &Quad<C::State, H::State>, budget: usize) -> Result<bool>
where
    C: TransitionSystem,
    H: TransitionSystem,
{
    let mut seen = HashSet::new();
    let mut cur = q.clone();
    loop {
        if c.leak(&cur.s1) != c.leak(&cur.s2) {
            return Ok(true);
        }
        if h.leak(&cur.h1) != h.leak(&cur.h2) {
            return Ok(false);
        }
        if !seen.insert(cur.clone()) {
            return Ok(true);
        }
        if seen.len() > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        cur = Quad::new(c.next(&cur.s1), c.next(&cur.s2), h.next(&cur.h1), h.next(&cur.h2));
    }
}

/// An eventually periodic trace `prefix · cycle^ω` in canonical form: the
/// cycle is primitive and the prefix is as short as possible. Two states have
/// equal traces iff their lassos are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lasso {
    pub prefix: Vec<Obs>,
    pub cycle: Vec<Obs>,
}

impl Lasso {
    pub fn canonical(mut prefix: Vec<Obs>, mut cycle: Vec<Obs>) -> Self {
        assert!(!cycle.is_empty(), "a lasso needs a non-empty cycle");
        // Smallest period of the cycle.
        let n = cycle.len();
        if let Some(p) = (1..n).find(|&p| n.is_multiple_of(p) && (p..n).all(|i| cycle[i] == cycle[i - p])) {
            cycle.truncate(p);
        }
        // Roll the cycle back into the prefix while the last prefix element
        // matches the last cycle element.
        while let Some(last) = prefix.last() {
            if last == cycle.last().expect("non-empty") {
                let o = prefix.pop().expect("non-empty");
                cycle.rotate_right(1);
                debug_assert_eq!(cycle[0], o);
            } else {
                break;
            }
        }
        Lasso { prefix, cycle }
    }

    /// Observation at position `k`.
    pub fn at(&self, k: usize) -> &Obs {
        if k < self.prefix.len() {
            &self.prefix[k]
        } else {
            &self.cycle[(k - self.prefix.len()) % self.cycle.len()]
        }
    }
}

/// The canonical lasso of the trace of `s`, found by walking until a state
/// repeats. Only usable on systems where single traces are finite-state.
pub fn trace_lasso<T: TransitionSystem>(t: &T, s: &T::State, budget: usize) -> Result<Lasso> {
    let mut index: HashMap<T::State, usize> = HashMap::new();
    let mut obs = Vec::new();
    let mut cur = s.clone();
    loop {
        if let Some(&i) = index.get(&cur) {
            let cycle = obs.split_off(i);
            return Ok(Lasso::canonical(obs, cycle));
        }
        if index.len() >= budget {
            return Err(Error::BudgetExceeded { budget });
        }
        index.insert(cur.clone(), obs.len());
        let (nx, o) = t.step(&cur);
        obs.push(o);
        cur = nx;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explicit::ExplicitSystem;

    fn sys(rows: &[(u32, &str)]) -> ExplicitSystem {
        ExplicitSystem::new(
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| Obs::named(r.1)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn reflexive_and_immediate_difference() {
        let t = sys(&[(0, "A"), (1, "B")]);
        assert!(traces_equal(&t, &0, &0).unwrap().equal());
        assert_eq!(traces_equal(&t, &0, &1).unwrap(), PairGraphVerdict::differs_at(0));
    }

    #[test]
    fn difference_found_after_shared_prefix() {
        // 0 -A-> 1 -B-> 1, 2 -A-> 3 -C-> 3
        let t = sys(&[(1, "A"), (1, "B"), (3, "A"), (3, "C")]);
        assert_eq!(traces_equal(&t, &0, &2).unwrap().witness_index, Some(1));
    }

    #[test]
    fn unrolled_cycles_are_equal() {
        // 0 <-> 1 alternate A,B; 2 -> 3 -> 4 -> 5 -> 2 alternate A,B
        let t = sys(&[(1, "A"), (0, "B"), (3, "A"), (4, "B"), (5, "A"), (2, "B")]);
        assert!(traces_equal(&t, &0, &2).unwrap().equal());
        assert_eq!(trace_lasso(&t, &0, 100).unwrap(), trace_lasso(&t, &2, 100).unwrap());
        assert_ne!(trace_lasso(&t, &0, 100).unwrap(), trace_lasso(&t, &1, 100).unwrap());
    }

    #[test]
    fn lasso_canonical_form() {
        let a = Obs::named("A");
        let b = Obs::named("B");
        let l = Lasso::canonical(vec![a.clone(), b.clone(), a.clone()], vec![b.clone(), a.clone(), b.clone(), a.clone()]);
        assert_eq!(l, Lasso { prefix: vec![], cycle: vec![a.clone(), b.clone()] });
        assert_eq!(l.at(5), &b);
    }

    #[test]
    fn relative_trace_equality() {
        let c = sys(&[(1, "A"), (1, "B"), (3, "A"), (3, "C")]);
        let h = sys(&[(0, "D"), (1, "E")]);
        assert!(rel_trace_eq(&c, &h, &Quad::new(0, 0, 1, 1)).unwrap());
        assert!(rel_trace_eq(&c, &h, &Quad::new(0, 2, 0, 1)).unwrap());
        assert!(!rel_trace_eq(&c, &h, &Quad::new(0, 0, 0, 1)).unwrap());
        assert!(!lockstep_rel(&c, &h, &Quad::new(0, 2, 0, 1), 100).unwrap());
        assert!(lockstep_rel(&c, &h, &Quad::new(0, 1, 0, 1), 100).unwrap());
    }
}
