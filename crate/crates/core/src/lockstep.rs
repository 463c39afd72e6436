//! Lockstep quintuples: all four components step together.

use crate::error::{Error, Result};
use crate::kernel::{Checked, Goal, Kernel, KernelState, Verdict};
use crate::lts::{Quad, TransitionSystem};
use crate::script::{Case, LockstepScript};
use crate::universe::QuadRelation;

/// Goals of the lockstep system share the quintuple shape.
pub type LockstepGoal<S, H> = Goal<S, H>;

#[derive(Clone, Debug)]
pub enum LockstepRule<S, H> {
    Leak,
    Step,
    Invariant(QuadRelation<S, H>),
    Cycle,
    Guard,
}

impl<S, H> LockstepRule<S, H> {
    pub fn name(&self) -> &'static str {
        match self {
            LockstepRule::Leak => "Leak",
            LockstepRule::Step => "Step",
            LockstepRule::Invariant(_) => "Invariant",
            LockstepRule::Cycle => "Cycle",
            LockstepRule::Guard => "Guard",
        }
    }
}

impl<'a, C, H> Kernel<'a, C, H>
where
    C: TransitionSystem,
    H: TransitionSystem,
    C::State: KernelState,
    H::State: KernelState,
{
    pub fn apply_lockstep_rule(
        &self,
        g: &LockstepGoal<C::State, H::State>,
        r: &LockstepRule<C::State, H::State>,
    ) -> Result<Vec<LockstepGoal<C::State, H::State>>> {
        use crate::kernel::Rule;
        let fail = |reason: &str| Err(Error::side(r.name(), g, reason));
        match r {
            LockstepRule::Leak => {
                if !g.guarded {
                    return fail("the goal is unguarded");
                }
                if self.c_leak_differs(&g.quad) {
                    Ok(vec![])
                } else {
                    fail("left-hand leaks agree")
                }
            }
            LockstepRule::Step => {
                if !g.guarded {
                    return fail("the goal is unguarded");
                }
                if !self.h_leak_equal(&g.quad) {
                    return fail("right-hand leaks differ");
                }
                let c = self.contract;
                let h = self.hardware;
                let q = &g.quad;
                Ok(vec![Goal {
                    quad: Quad::new(c.next(&q.s1), c.next(&q.s2), h.next(&q.h1), h.next(&q.h2)),
                    hypothesis: g.hypothesis.clone(),
                    guarded: false,
                }])
            }
            LockstepRule::Invariant(rel) => self.apply_rule(g, &Rule::Invariant(rel.clone())),
            LockstepRule::Cycle => self.apply_rule(g, &Rule::Cycle),
            LockstepRule::Guard => self.apply_rule(g, &Rule::Guard),
        }
    }

    pub fn check_lockstep_script(&self, root: &LockstepGoal<C::State, H::State>, script: &LockstepScript) -> Verdict {
        match self.check_lockstep(root, script) {
            Ok(()) => Verdict::accept(),
            Err(f) => Verdict::reject(f),
        }
    }

    fn check_lockstep(&self, g: &LockstepGoal<C::State, H::State>, script: &LockstepScript) -> Checked {
        let apply = |r: LockstepRule<C::State, H::State>| {
            self.apply_lockstep_rule(g, &r).map_err(|e| Self::failure(g, r.name(), e))
        };
        match script {
            LockstepScript::Leak => apply(LockstepRule::Leak).map(|_| ()),
            LockstepScript::Cycle => apply(LockstepRule::Cycle).map(|_| ()),
            LockstepScript::Step(b) => apply(LockstepRule::Step)?
                .iter()
                .try_for_each(|s| self.check_lockstep(s, b)),
            LockstepScript::Guard(b) => apply(LockstepRule::Guard)?
                .iter()
                .try_for_each(|s| self.check_lockstep(s, b)),
            LockstepScript::Invariant { relation, cases } => {
                let rel = self.relation(relation).map_err(|e| Self::failure(g, "Invariant", e))?;
                for m in apply(LockstepRule::Invariant(rel))? {
                    self.discharge_lockstep(&m, relation, cases)?;
                }
                Ok(())
            }
        }
    }

    fn discharge_lockstep(
        &self,
        m: &LockstepGoal<C::State, H::State>,
        relation: &str,
        cases: &[Case<LockstepScript>],
    ) -> Checked {
        for c in cases {
            match self.case_matches(&c.label, &m.quad) {
                Ok(true) => {
                    if self.check_lockstep(m, &c.body).is_ok() {
                        return Ok(());
                    }
                }
                Ok(false) => {}
                Err(e) => return Err(Self::failure(m, "Invariant", e)),
            }
        }
        Err(Self::failure(
            m,
            "Invariant",
            Error::UnmatchedObligation {
                relation: relation.to_string(),
                member: m.quad.to_string(),
            },
        ))
    }

    /// Bounded search for a lockstep derivation of `q`: plain
    /// `Step;Guard` chains ending in `Leak`, and invariants made of a prefix
    /// of the lockstep orbit of `q` discharged by `Leak` or `Step;Cycle`.
    pub fn search_lockstep_derivation(&mut self, q: &Quad<C::State, H::State>, depth: usize) -> Option<LockstepScript> {
        let root = Goal::root(q.clone());
        let mut chain = LockstepScript::Leak;
        for _ in 0..=depth {
            if self.check_lockstep_script(&root, &chain).accepted {
                return Some(chain);
            }
            chain = LockstepScript::step(LockstepScript::guard(chain));
        }
        let mut orbit = vec![q.clone()];
        for _ in 0..depth {
            let last = orbit.last().expect("non-empty");
            let nx = Quad::new(
                self.contract.next(&last.s1),
                self.contract.next(&last.s2),
                self.hardware.next(&last.h1),
                self.hardware.next(&last.h2),
            );
            if orbit.contains(&nx) {
                break;
            }
            orbit.push(nx);
        }
        let script = LockstepScript::invariant(
            "orbit",
            vec![("_", LockstepScript::Leak), ("_", LockstepScript::step(LockstepScript::Cycle))],
        );
        for n in 1..=orbit.len() {
            self.register_relation(QuadRelation::extensional("orbit", orbit[..n].iter().cloned()));
            if self.check_lockstep_script(&root, &script).accepted {
                return Some(script);
            }
        }
        None
    }

    /// A lockstep script for a member of the computed lockstep relation.
    pub fn derive_lockstep_proof(&self, q: &Quad<C::State, H::State>) -> Result<LockstepScript> {
        let u = self
            .universe
            .as_ref()
            .ok_or_else(|| Error::NotEnumerable("rbisim-lockstep".into()))?;
        let set = self.lockstep_set()?;
        match u.index_of(q) {
            Some(i) if set.contains(i) => Ok(LockstepScript::invariant(
                "rbisim-lockstep",
                vec![("_", LockstepScript::Leak), ("_", LockstepScript::step(LockstepScript::Cycle))],
            )),
            _ => Err(Error::NotProvable { quad: q.to_string() }),
        }
    }
}
