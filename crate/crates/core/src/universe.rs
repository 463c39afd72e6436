//! Finite quad universes and the relations evaluated over them.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::hash::Hash;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::lts::{Quad, TransitionSystem};

/// A finite set of quads closed under both componentwise successor maps,
/// with successors and leak comparisons precomputed by index.
#[derive(Clone, Debug)]
pub struct QuadUniverse<S, H> {
    quads: Vec<Quad<S, H>>,
    index: HashMap<Quad<S, H>, usize>,
    c_succ: Vec<usize>,
    h_succ: Vec<usize>,
    c_leak_differs: Vec<bool>,
    h_leak_equal: Vec<bool>,
}

impl<S, H> QuadUniverse<S, H>
where
    S: Clone + Eq + Hash + fmt::Debug,
    H: Clone + Eq + Hash + fmt::Debug,
{
    /// Close `seeds` under contract steps and hardware steps. Fails if more
    /// than `budget` quads are reached.
    pub fn closure<C, Hw>(c: &C, h: &Hw, seeds: impl IntoIterator<Item = Quad<S, H>>, budget: usize) -> Result<Self>
    where
        C: TransitionSystem<State = S>,
        Hw: TransitionSystem<State = H>,
    {
        let mut index: HashMap<Quad<S, H>, usize> = HashMap::new();
        let mut quads = Vec::new();
        let mut queue = VecDeque::new();
        let mut push = |q: Quad<S, H>, quads: &mut Vec<Quad<S, H>>, queue: &mut VecDeque<usize>| -> Result<()> {
            if !index.contains_key(&q) {
                if quads.len() >= budget {
                    return Err(Error::BudgetExceeded { budget });
                }
                index.insert(q.clone(), quads.len());
                queue.push_back(quads.len());
                quads.push(q);
            }
            Ok(())
        };
        for q in seeds {
            push(q, &mut quads, &mut queue)?;
        }
        while let Some(i) = queue.pop_front() {
            let q = quads[i].clone();
            push(q.with_contract(c.next(&q.s1), c.next(&q.s2)), &mut quads, &mut queue)?;
            push(q.with_hardware(h.next(&q.h1), h.next(&q.h2)), &mut quads, &mut queue)?;
        }
        Self::from_quads(c, h, quads)
    }

    /// All quads over the given contract and hardware state lists. The lists
    /// must each be closed under their system's successor.
    pub fn product<C, Hw>(c: &C, h: &Hw, cs: &[S], hs: &[H]) -> Result<Self>
    where
        C: TransitionSystem<State = S>,
        Hw: TransitionSystem<State = H>,
    {
        let mut quads = Vec::with_capacity(cs.len() * cs.len() * hs.len() * hs.len());
        for s1 in cs {
            for s2 in cs {
                for h1 in hs {
                    for h2 in hs {
                        quads.push(Quad::new(s1.clone(), s2.clone(), h1.clone(), h2.clone()));
                    }
                }
            }
        }
        Self::from_quads(c, h, quads)
    }

    /// Use an explicit quad list; fails with `NotClosed` if a successor is missing.
    pub fn from_quads<C, Hw>(c: &C, h: &Hw, quads: Vec<Quad<S, H>>) -> Result<Self>
    where
        C: TransitionSystem<State = S>,
        Hw: TransitionSystem<State = H>,
    {
        let mut index = HashMap::with_capacity(quads.len());
        let mut uniq = Vec::with_capacity(quads.len());
        for q in quads {
            if !index.contains_key(&q) {
                index.insert(q.clone(), uniq.len());
                uniq.push(q);
            }
        }
        let quads = uniq;
        let lookup = |from: &Quad<S, H>, q: Quad<S, H>| {
            index.get(&q).copied().ok_or_else(|| Error::NotClosed {
                from: from.to_string(),
                missing: q.to_string(),
            })
        };
        let mut c_succ = Vec::with_capacity(quads.len());
        let mut h_succ = Vec::with_capacity(quads.len());
        let mut c_leak_differs = Vec::with_capacity(quads.len());
        let mut h_leak_equal = Vec::with_capacity(quads.len());
        for q in &quads {
            let (n1, l1) = c.step(&q.s1);
            let (n2, l2) = c.step(&q.s2);
            c_succ.push(lookup(q, q.with_contract(n1, n2))?);
            c_leak_differs.push(l1 != l2);
            let (m1, k1) = h.step(&q.h1);
            let (m2, k2) = h.step(&q.h2);
            h_succ.push(lookup(q, q.with_hardware(m1, m2))?);
            h_leak_equal.push(k1 == k2);
        }
        Ok(QuadUniverse {
            quads,
            index,
            c_succ,
            h_succ,
            c_leak_differs,
            h_leak_equal,
        })
    }

    pub fn len(&self) -> usize {
        self.quads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quads.is_empty()
    }

    pub fn quads(&self) -> &[Quad<S, H>] {
        &self.quads
    }

    pub fn quad(&self, i: usize) -> &Quad<S, H> {
        &self.quads[i]
    }

    pub fn index_of(&self, q: &Quad<S, H>) -> Option<usize> {
        self.index.get(q).copied()
    }

    pub fn contains(&self, q: &Quad<S, H>) -> bool {
        self.index.contains_key(q)
    }

    pub fn c_succ(&self, i: usize) -> usize {
        self.c_succ[i]
    }

    pub fn h_succ(&self, i: usize) -> usize {
        self.h_succ[i]
    }

    /// All four components stepped together.
    pub fn lockstep_succ(&self, i: usize) -> usize {
        self.h_succ[self.c_succ[i]]
    }

    pub fn c_leak_differs(&self, i: usize) -> bool {
        self.c_leak_differs[i]
    }

    pub fn h_leak_equal(&self, i: usize) -> bool {
        self.h_leak_equal[i]
    }

    pub fn full_set(&self) -> QuadSet {
        QuadSet::full(self.len())
    }

    pub fn empty_set(&self) -> QuadSet {
        QuadSet::empty(self.len())
    }

    pub fn set_of(&self, quads: impl IntoIterator<Item = Quad<S, H>>) -> QuadSet {
        let mut s = self.empty_set();
        for q in quads {
            if let Some(i) = self.index_of(&q) {
                s.insert(i);
            }
        }
        s
    }
}

/// A subset of a universe, by quad index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadSet {
    bits: Vec<bool>,
}

impl QuadSet {
    pub fn empty(n: usize) -> Self {
        QuadSet { bits: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        QuadSet { bits: vec![true; n] }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> bool) -> Self {
        QuadSet {
            bits: (0..n).map(f).collect(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.bits.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn insert(&mut self, i: usize) -> bool {
        !std::mem::replace(&mut self.bits[i], true)
    }

    pub fn remove(&mut self, i: usize) -> bool {
        std::mem::replace(&mut self.bits[i], false)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn is_subset(&self, other: &QuadSet) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|b| *b)
    }
}

type Pred<S, H> = Rc<dyn Fn(&Quad<S, H>) -> bool>;
type Domain<S, H> = Rc<dyn Fn() -> Vec<Quad<S, H>>>;

#[derive(Clone)]
enum Repr<S, H> {
    Extensional(Rc<HashSet<Quad<S, H>>>),
    Indexed(Rc<QuadUniverse<S, H>>, Rc<QuadSet>),
    Intensional { pred: Pred<S, H>, domain: Option<Domain<S, H>> },
}

/// A named set of quads: an explicit set, a subset of a universe, or a
/// membership predicate with an optional enumerator of its members.
#[derive(Clone)]
pub struct QuadRelation<S, H> {
    name: Rc<str>,
    repr: Repr<S, H>,
}

impl<S, H> fmt::Debug for QuadRelation<S, H> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::Extensional(s) => format!("extensional, {} quads", s.len()),
            Repr::Indexed(_, s) => format!("universe subset, {} quads", s.count()),
            Repr::Intensional { domain, .. } => {
                format!("intensional{}", if domain.is_some() { " with domain" } else { "" })
            }
        };
        write!(f, "QuadRelation({}: {kind})", self.name)
    }
}

impl<S, H> QuadRelation<S, H> {
    pub fn name(&self) -> &str {
        &self.name
    }
}

impl<S, H> QuadRelation<S, H>
where
    S: Clone + Eq + Hash + fmt::Debug + 'static,
    H: Clone + Eq + Hash + fmt::Debug + 'static,
{
    pub fn extensional(name: &str, quads: impl IntoIterator<Item = Quad<S, H>>) -> Self {
        QuadRelation {
            name: Rc::from(name),
            repr: Repr::Extensional(Rc::new(quads.into_iter().collect())),
        }
    }

    pub fn from_set(name: &str, universe: Rc<QuadUniverse<S, H>>, set: QuadSet) -> Self {
        assert_eq!(universe.len(), set.capacity(), "set does not belong to universe");
        QuadRelation {
            name: Rc::from(name),
            repr: Repr::Indexed(universe, Rc::new(set)),
        }
    }

    pub fn intensional(name: &str, pred: impl Fn(&Quad<S, H>) -> bool + 'static) -> Self {
        QuadRelation {
            name: Rc::from(name),
            repr: Repr::Intensional {
                pred: Rc::new(pred),
                domain: None,
            },
        }
    }

    /// Every quad.
    pub fn top() -> Self {
        Self::intensional("top", |_| true)
    }

    pub fn empty() -> Self {
        Self::extensional("empty", [])
    }

    /// Attach an enumerator to an intensional relation. Enumerated quads that
    /// fail the predicate are dropped.
    pub fn with_domain(self, domain: impl Fn() -> Vec<Quad<S, H>> + 'static) -> Self {
        match self.repr {
            Repr::Intensional { pred, .. } => QuadRelation {
                name: self.name,
                repr: Repr::Intensional {
                    pred,
                    domain: Some(Rc::new(domain)),
                },
            },
            _ => self,
        }
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = Rc::from(name);
        self
    }

    pub fn contains(&self, q: &Quad<S, H>) -> bool {
        match &self.repr {
            Repr::Extensional(s) => s.contains(q),
            Repr::Indexed(u, s) => u.index_of(q).is_some_and(|i| s.contains(i)),
            Repr::Intensional { pred, .. } => pred(q),
        }
    }

    /// Enumerate members. Intensional relations use their own domain if they
    /// have one, otherwise the given universe.
    pub fn members(&self, universe: Option<&QuadUniverse<S, H>>) -> Result<Vec<Quad<S, H>>> {
        match &self.repr {
            Repr::Extensional(s) => {
                let mut v: Vec<_> = s.iter().cloned().collect();
                // Deterministic order independent of hashing.
                if let Some(u) = universe {
                    v.sort_by_key(|q| u.index_of(q).unwrap_or(usize::MAX));
                }
                Ok(v)
            }
            Repr::Indexed(u, s) => Ok(s.iter().map(|i| u.quad(i).clone()).collect()),
            Repr::Intensional { pred, domain } => match (domain, universe) {
                (Some(d), _) => Ok(d().into_iter().filter(|q| pred(q)).collect()),
                (None, Some(u)) => Ok(u.quads().iter().filter(|q| pred(q)).cloned().collect()),
                (None, None) => Err(Error::NotEnumerable(self.name.to_string())),
            },
        }
    }

    /// The relation restricted to a universe, as an index set.
    pub fn to_set(&self, universe: &QuadUniverse<S, H>) -> QuadSet {
        QuadSet::from_fn(universe.len(), |i| self.contains(universe.quad(i)))
    }

    pub fn is_extensional(&self) -> bool {
        !matches!(self.repr, Repr::Intensional { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explicit::ExplicitSystem;
    use crate::obs::Obs;

    fn two_cycle() -> ExplicitSystem {
        ExplicitSystem::new(vec![1, 0], vec![Obs::named("A"), Obs::named("B")]).unwrap()
    }

    #[test]
    fn closure_is_closed_and_indexed() {
        let t = two_cycle();
        let u = QuadUniverse::closure(&t, &t, [Quad::new(0, 0, 0, 1)], 1000).unwrap();
        assert_eq!(u.len(), 4);
        for i in 0..u.len() {
            let q = u.quad(i);
            assert_eq!(u.quad(u.c_succ(i)), &q.with_contract(t.next(&q.s1), t.next(&q.s2)));
            assert_eq!(u.index_of(q), Some(i));
        }
    }

    #[test]
    fn closure_budget_is_hard() {
        let t = two_cycle();
        assert_eq!(
            QuadUniverse::closure(&t, &t, [Quad::new(0, 0, 0, 1)], 3).unwrap_err(),
            Error::BudgetExceeded { budget: 3 }
        );
    }

    #[test]
    fn from_quads_detects_open_sets() {
        let t = two_cycle();
        let err = QuadUniverse::from_quads(&t, &t, vec![Quad::new(0, 0, 0, 0)]).unwrap_err();
        assert!(matches!(err, Error::NotClosed { .. }));
    }

    #[test]
    fn views_agree() {
        let t = two_cycle();
        let u = Rc::new(QuadUniverse::product(&t, &t, &[0, 1], &[0, 1]).unwrap());
        let pred = |q: &Quad<u32, u32>| q.s1 == q.h2;
        let int = QuadRelation::intensional("p", pred);
        let set = int.to_set(&u);
        let ext = QuadRelation::extensional("p", int.members(Some(&u)).unwrap());
        let idx = QuadRelation::from_set("p", u.clone(), set);
        for q in u.quads() {
            assert_eq!(int.contains(q), ext.contains(q));
            assert_eq!(int.contains(q), idx.contains(q));
        }
        assert!(QuadRelation::<u32, u32>::top().members(None).is_err());
    }
}
