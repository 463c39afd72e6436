//! Deterministic labeled transition systems and the quads built from them.

use std::collections::HashSet;
use std::fmt;
use std::hash::Hash;
use std::rc::Rc;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::obs::Obs;

/// A total, deterministic system: every state has one successor and one leak.
///
/// Infinite traces are never built; see [`trace_prefix`] and the pair walks in
/// [`crate::oracle`].
pub trait TransitionSystem {
    type State: Clone + Eq + Hash + fmt::Debug;

    /// Successor and leak of `s` in one call.
    fn step(&self, s: &Self::State) -> (Self::State, Obs);

    fn next(&self, s: &Self::State) -> Self::State {
        self.step(s).0
    }

    fn leak(&self, s: &Self::State) -> Obs {
        self.step(s).1
    }

    /// Optionally rewrite a pair of states to a smaller pair with the same
    /// pointwise leak agreement on all future steps.
    ///
    /// Pair walks call this to keep unbounded but shared state (such as equal
    /// caches) from blowing up the pair graph. The default does nothing.
    fn normalize_pair(
        &self,
        _a: &Self::State,
        _b: &Self::State,
    ) -> Option<(Self::State, Self::State)> {
        None
    }
}

impl<T: TransitionSystem + ?Sized> TransitionSystem for &T {
    type State = T::State;
    fn step(&self, s: &Self::State) -> (Self::State, Obs) {
        (**self).step(s)
    }
    fn next(&self, s: &Self::State) -> Self::State {
        (**self).next(s)
    }
    fn leak(&self, s: &Self::State) -> Obs {
        (**self).leak(s)
    }
    fn normalize_pair(&self, a: &Self::State, b: &Self::State) -> Option<(Self::State, Self::State)> {
        (**self).normalize_pair(a, b)
    }
}

impl<T: TransitionSystem + ?Sized> TransitionSystem for Arc<T> {
    type State = T::State;
    fn step(&self, s: &Self::State) -> (Self::State, Obs) {
        (**self).step(s)
    }
    fn next(&self, s: &Self::State) -> Self::State {
        (**self).next(s)
    }
    fn leak(&self, s: &Self::State) -> Obs {
        (**self).leak(s)
    }
    fn normalize_pair(&self, a: &Self::State, b: &Self::State) -> Option<(Self::State, Self::State)> {
        (**self).normalize_pair(a, b)
    }
}

/// A system whose step may be undefined. Undefined means halted.
pub trait PartialSystem {
    type State: Clone + Eq + Hash + fmt::Debug;

    fn try_step(&self, s: &Self::State) -> Option<(Self::State, Obs)>;

    /// What a halted state leaks forever.
    fn halt_obs(&self, s: &Self::State) -> Obs;

    fn normalize_pair(
        &self,
        _a: &Self::State,
        _b: &Self::State,
    ) -> Option<(Self::State, Self::State)> {
        None
    }
}

/// Total system obtained from a [`PartialSystem`] by turning halted states
/// into self-loops.
#[derive(Clone, Debug)]
pub struct Terminating<P> {
    inner: P,
}

pub fn encode_termination<P: PartialSystem>(inner: P) -> Terminating<P> {
    Terminating { inner }
}

impl<P: PartialSystem> Terminating<P> {
    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn is_halted(&self, s: &P::State) -> bool {
        self.inner.try_step(s).is_none()
    }
}

impl<P: PartialSystem> TransitionSystem for Terminating<P> {
    type State = P::State;

    fn step(&self, s: &P::State) -> (P::State, Obs) {
        match self.inner.try_step(s) {
            Some(r) => r,
            None => (s.clone(), self.inner.halt_obs(s)),
        }
    }

    fn normalize_pair(&self, a: &P::State, b: &P::State) -> Option<(P::State, P::State)> {
        self.inner.normalize_pair(a, b)
    }
}

/// A partial system given by closures.
pub struct FnPartial<S> {
    step: Rc<dyn Fn(&S) -> Option<(S, Obs)>>,
    halt: Rc<dyn Fn(&S) -> Obs>,
}

impl<S> Clone for FnPartial<S> {
    fn clone(&self) -> Self {
        FnPartial {
            step: self.step.clone(),
            halt: self.halt.clone(),
        }
    }
}

impl<S> FnPartial<S> {
    pub fn new(
        step: impl Fn(&S) -> Option<(S, Obs)> + 'static,
        halt: impl Fn(&S) -> Obs + 'static,
    ) -> Self {
        FnPartial {
            step: Rc::new(step),
            halt: Rc::new(halt),
        }
    }
}

impl<S: Clone + Eq + Hash + fmt::Debug> PartialSystem for FnPartial<S> {
    type State = S;
    fn try_step(&self, s: &S) -> Option<(S, Obs)> {
        (self.step)(s)
    }
    fn halt_obs(&self, s: &S) -> Obs {
        (self.halt)(s)
    }
}

/// A finite prefix of the leakage trace of `origin`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracePrefix<S> {
    pub origin: S,
    pub observations: Vec<Obs>,
}

impl<S> TracePrefix<S> {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// `[leak(s), leak(next s), ..., leak(next^(n-1) s)]`.
pub fn trace_prefix<T: TransitionSystem>(t: &T, s: &T::State, n: usize) -> TracePrefix<T::State> {
    let mut observations = Vec::with_capacity(n);
    let mut cur = s.clone();
    for _ in 0..n {
        let (nx, o) = t.step(&cur);
        observations.push(o);
        cur = nx;
    }
    TracePrefix {
        origin: s.clone(),
        observations,
    }
}

/// States on the path from `s`, stopping at the first repeat.
///
/// Fails with `BudgetExceeded` if `bound` states are visited without the path
/// closing, which only happens for infinite-state systems or tiny bounds.
pub fn reachable_states<T: TransitionSystem>(
    t: &T,
    s: &T::State,
    bound: usize,
) -> Result<Vec<T::State>> {
    if bound == 0 {
        return Err(Error::InvalidArgument("bound must be at least 1".into()));
    }
    let mut seen = HashSet::new();
    let mut path = Vec::new();
    let mut cur = s.clone();
    for _ in 0..bound {
        if seen.contains(&cur) {
            return Ok(path);
        }
        seen.insert(cur.clone());
        let nx = t.next(&cur);
        path.push(cur);
        cur = nx;
    }
    if seen.contains(&cur) {
        Ok(path)
    } else {
        Err(Error::BudgetExceeded { budget: bound })
    }
}

/// Two contract states and two hardware states.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Quad<S, H> {
    pub s1: S,
    pub s2: S,
    pub h1: H,
    pub h2: H,
}

impl<S, H> Quad<S, H> {
    pub fn new(s1: S, s2: S, h1: H, h2: H) -> Self {
        Quad { s1, s2, h1, h2 }
    }
}

impl<S: Clone, H: Clone> Quad<S, H> {
    pub fn swap_contract(&self) -> Self {
        Quad::new(self.s2.clone(), self.s1.clone(), self.h1.clone(), self.h2.clone())
    }

    pub fn swap_hardware(&self) -> Self {
        Quad::new(self.s1.clone(), self.s2.clone(), self.h2.clone(), self.h1.clone())
    }

    pub fn with_contract(&self, s1: S, s2: S) -> Self {
        Quad::new(s1, s2, self.h1.clone(), self.h2.clone())
    }

    pub fn with_hardware(&self, h1: H, h2: H) -> Self {
        Quad::new(self.s1.clone(), self.s2.clone(), h1, h2)
    }
}

impl<S: fmt::Debug, H: fmt::Debug> fmt::Display for Quad<S, H> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?} | {:?}, {:?})", self.s1, self.s2, self.h1, self.h2)
    }
}

/// Step both contract components.
pub fn contract_step<C: TransitionSystem, H: Clone>(c: &C, q: &Quad<C::State, H>) -> Quad<C::State, H> {
    q.with_contract(c.next(&q.s1), c.next(&q.s2))
}

/// Step both hardware components.
pub fn hardware_step<S: Clone, H: TransitionSystem>(h: &H, q: &Quad<S, H::State>) -> Quad<S, H::State> {
    q.with_hardware(h.next(&q.h1), h.next(&q.h2))
}

/// Apply a system's pair normalization to the hardware components of a quad.
pub fn normalize_hardware<S: Clone, H: TransitionSystem>(h: &H, q: Quad<S, H::State>) -> Quad<S, H::State> {
    match h.normalize_pair(&q.h1, &q.h2) {
        Some((a, b)) => Quad::new(q.s1, q.s2, a, b),
        None => q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Cycle3;
    impl TransitionSystem for Cycle3 {
        type State = u8;
        fn step(&self, s: &u8) -> (u8, Obs) {
            ((s + 1) % 3, Obs::Unit)
        }
    }

    struct Counter;
    impl TransitionSystem for Counter {
        type State = u64;
        fn step(&self, s: &u64) -> (u64, Obs) {
            (s + 1, Obs::Unit)
        }
    }

    #[test]
    fn zero_length_prefix_is_empty() {
        assert!(trace_prefix(&Cycle3, &0, 0).is_empty());
    }

    #[test]
    fn self_loop_prefix() {
        let p = encode_termination(FnPartial::new(|_: &u8| None, |_| Obs::Unit));
        assert_eq!(trace_prefix(&p, &0, 3).observations, vec![Obs::Unit; 3]);
    }

    #[test]
    fn halted_states_loop_and_others_keep_their_step() {
        let p = encode_termination(FnPartial::new(
            |s: &u8| (*s < 2).then(|| (s + 1, Obs::Address(*s as u32))),
            |_| Obs::Halt,
        ));
        assert_eq!(p.next(&0), 1);
        assert_eq!(p.leak(&0), Obs::Address(0));
        assert_eq!(p.next(&2), 2);
        assert_eq!(
            trace_prefix(&p, &2, 4).observations,
            vec![Obs::Halt; 4]
        );
        assert!(p.is_halted(&2));
    }

    #[test]
    fn reachable_on_self_loop_and_cycle() {
        let p = encode_termination(FnPartial::new(|_: &u8| None, |_| Obs::Halt));
        assert_eq!(reachable_states(&p, &7, 1).unwrap(), vec![7]);
        assert_eq!(reachable_states(&p, &7, 50).unwrap(), vec![7]);
        let mut r = reachable_states(&Cycle3, &0, 10).unwrap();
        r.sort();
        assert_eq!(r, vec![0, 1, 2]);
        assert_eq!(reachable_states(&Cycle3, &0, 3).unwrap().len(), 3);
    }

    #[test]
    fn reachable_reports_budget() {
        assert_eq!(
            reachable_states(&Counter, &0, 5),
            Err(Error::BudgetExceeded { budget: 5 })
        );
        assert!(reachable_states(&Counter, &0, 0).is_err());
    }

    #[test]
    fn quad_swaps() {
        let q = Quad::new(1, 2, 'a', 'b');
        assert_eq!(q.swap_contract(), Quad::new(2, 1, 'a', 'b'));
        assert_eq!(q.swap_hardware(), Quad::new(1, 2, 'b', 'a'));
    }
}
