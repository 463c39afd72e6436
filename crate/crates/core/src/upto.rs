//! Up-to reasoning: registered compatible functions and the rules built on
//! them.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixpoint::rbisim_functional;
use crate::kernel::{Goal, Kernel, KernelState};
use crate::lts::{Quad, TransitionSystem};
use crate::oracle::{lockstep_rel, rel_trace_eq_within, traces_equal_within, PairGraphVerdict};
use crate::script::{ProofScript, Side, SideProof, UpToStep};
use crate::universe::{QuadSet, QuadUniverse};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum UpToKind {
    CSwap,
    HSwap,
    CLeakEq,
    HLeakEq,
    ReduceCLeak,
    AugmentHLeak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Compatibility {
    /// Known to be compatible; usable in accepted proofs.
    Proven,
    /// Sandbox only; the kernel refuses it.
    TestOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum UpToFunction {
    Registered(UpToKind),
    Identity,
    /// Maps every relation to the whole universe. Not compatible.
    Top,
}

/// The six functions accepted in proofs.
pub const REGISTERED: [UpToKind; 6] = [
    UpToKind::CSwap,
    UpToKind::HSwap,
    UpToKind::CLeakEq,
    UpToKind::HLeakEq,
    UpToKind::ReduceCLeak,
    UpToKind::AugmentHLeak,
];

pub fn registry() -> Vec<UpToFunction> {
    REGISTERED.iter().map(|k| UpToFunction::Registered(*k)).collect()
}

impl UpToFunction {
    pub fn name(&self) -> &'static str {
        match self {
            UpToFunction::Registered(k) => match k {
                UpToKind::CSwap => "c-swap",
                UpToKind::HSwap => "h-swap",
                UpToKind::CLeakEq => "c-leak-eq",
                UpToKind::HLeakEq => "h-leak-eq",
                UpToKind::ReduceCLeak => "reduce-c-leak",
                UpToKind::AugmentHLeak => "augment-h-leak",
            },
            UpToFunction::Identity => "identity",
            UpToFunction::Top => "top",
        }
    }

    pub fn status(&self) -> Compatibility {
        match self {
            UpToFunction::Registered(_) => Compatibility::Proven,
            _ => Compatibility::TestOnly,
        }
    }
}

impl fmt::Display for UpToFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A replacement for one component of a goal's quad.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Replacement<S, H> {
    Contract(Side, S),
    Hardware(Side, H),
}

impl<'a, C, H> Kernel<'a, C, H>
where
    C: TransitionSystem,
    H: TransitionSystem,
    C::State: KernelState,
    H::State: KernelState,
{
    /// Is `q` in `f({witness})`? Decided with the oracles.
    pub fn upto_image_contains(
        &self,
        f: UpToKind,
        witness: &Quad<C::State, H::State>,
        q: &Quad<C::State, H::State>,
    ) -> Result<bool> {
        let (c, h, b) = (self.contract, self.hardware, self.budget);
        Ok(match f {
            UpToKind::CSwap => *q == witness.swap_contract(),
            UpToKind::HSwap => *q == witness.swap_hardware(),
            UpToKind::CLeakEq => {
                q.s2 == witness.s2
                    && q.h1 == witness.h1
                    && q.h2 == witness.h2
                    && traces_equal_within(c, &q.s1, &witness.s1, b)?.equal()
            }
            UpToKind::HLeakEq => {
                q.s1 == witness.s1
                    && q.s2 == witness.s2
                    && q.h2 == witness.h2
                    && traces_equal_within(h, &q.h1, &witness.h1, b)?.equal()
            }
            UpToKind::ReduceCLeak => {
                q.h1 == witness.h1
                    && q.h2 == witness.h2
                    && rel_trace_eq_within(
                        c,
                        c,
                        &Quad::new(q.s1.clone(), q.s2.clone(), witness.s1.clone(), witness.s2.clone()),
                        b,
                    )?
            }
            UpToKind::AugmentHLeak => {
                q.s1 == witness.s1
                    && q.s2 == witness.s2
                    && lockstep_rel(
                        h,
                        h,
                        &Quad::new(witness.h1.clone(), witness.h2.clone(), q.h1.clone(), q.h2.clone()),
                        b,
                    )?
            }
        })
    }

    /// Replace the goal's quad by `witness`, provided `f` is registered and
    /// the goal's quad is in `f({witness})`. Guardedness is kept.
    pub fn apply_upto(
        &self,
        g: &Goal<C::State, H::State>,
        f: UpToFunction,
        witness: Quad<C::State, H::State>,
    ) -> Result<Goal<C::State, H::State>> {
        let UpToFunction::Registered(kind) = f else {
            return Err(Error::NotRegistered(f.name().to_string()));
        };
        if !self.upto_image_contains(kind, &witness, &g.quad)? {
            return Err(Error::WitnessMismatch(format!(
                "{} is not in {f}({witness})",
                g.quad
            )));
        }
        Ok(Goal {
            quad: witness,
            hypothesis: g.hypothesis.clone(),
            guarded: g.guarded,
        })
    }

    pub(crate) fn apply_upto_step(
        &self,
        g: &Goal<C::State, H::State>,
        step: &UpToStep<C::State, H::State>,
    ) -> std::result::Result<(Goal<C::State, H::State>, &'static str), (&'static str, Error)> {
        let q = &g.quad;
        let (kind, witness) = match step {
            UpToStep::CSwap => (UpToKind::CSwap, q.swap_contract()),
            UpToStep::HSwap => (UpToKind::HSwap, q.swap_hardware()),
            UpToStep::CLeakEq(Side::First, s) => (UpToKind::CLeakEq, q.with_contract(s.clone(), q.s2.clone())),
            UpToStep::CLeakEq(Side::Second, s) => {
                // The registered function replaces the first component; the
                // second is reached through C-Swap on both sides.
                let w = q.with_contract(q.s1.clone(), s.clone());
                let f = UpToFunction::Registered(UpToKind::CLeakEq);
                let swapped = Goal {
                    quad: q.swap_contract(),
                    ..g.clone()
                };
                let rule = "C-Leak-Eq";
                let r = self
                    .apply_upto(&swapped, f, w.swap_contract())
                    .map_err(|e| (rule, e))?;
                return Ok((
                    Goal {
                        quad: r.quad.swap_contract(),
                        ..r
                    },
                    rule,
                ));
            }
            UpToStep::HLeakEq(Side::First, h) => (UpToKind::HLeakEq, q.with_hardware(h.clone(), q.h2.clone())),
            UpToStep::HLeakEq(Side::Second, h) => {
                let w = q.with_hardware(q.h1.clone(), h.clone());
                let f = UpToFunction::Registered(UpToKind::HLeakEq);
                let swapped = Goal {
                    quad: q.swap_hardware(),
                    ..g.clone()
                };
                let rule = "H-Leak-Eq";
                let r = self
                    .apply_upto(&swapped, f, w.swap_hardware())
                    .map_err(|e| (rule, e))?;
                return Ok((
                    Goal {
                        quad: r.quad.swap_hardware(),
                        ..r
                    },
                    rule,
                ));
            }
            UpToStep::ReduceCLeak(a, b) => (UpToKind::ReduceCLeak, q.with_contract(a.clone(), b.clone())),
            UpToStep::AugmentHLeak(a, b) => (UpToKind::AugmentHLeak, q.with_hardware(a.clone(), b.clone())),
        };
        let rule = match kind {
            UpToKind::CSwap => "C-Swap",
            UpToKind::HSwap => "H-Swap",
            UpToKind::CLeakEq => "C-Leak-Eq",
            UpToKind::HLeakEq => "H-Leak-Eq",
            UpToKind::ReduceCLeak => "Reduce-Contract-Leakage",
            UpToKind::AugmentHLeak => "Augment-Hardware-Leakage",
        };
        self.apply_upto(g, UpToFunction::Registered(kind), witness)
            .map(|g| (g, rule))
            .map_err(|e| (rule, e))
    }

    /// Replace one component by a trace-equal state. The certificate is
    /// re-checked with the oracle rather than trusted.
    pub fn apply_leak_eq(
        &self,
        g: &Goal<C::State, H::State>,
        replacement: Replacement<C::State, H::State>,
        certificate: PairGraphVerdict,
    ) -> Result<Goal<C::State, H::State>> {
        if !certificate.equal() {
            return Err(Error::EquivalenceNotEstablished("certificate reports a difference".into()));
        }
        let q = &g.quad;
        let (equal, quad) = match &replacement {
            Replacement::Contract(side, s) => {
                let old = if *side == Side::First { &q.s1 } else { &q.s2 };
                let v = traces_equal_within(self.contract, old, s, self.budget)?;
                let quad = match side {
                    Side::First => q.with_contract(s.clone(), q.s2.clone()),
                    Side::Second => q.with_contract(q.s1.clone(), s.clone()),
                };
                (v, quad)
            }
            Replacement::Hardware(side, h) => {
                let old = if *side == Side::First { &q.h1 } else { &q.h2 };
                let v = traces_equal_within(self.hardware, old, h, self.budget)?;
                let quad = match side {
                    Side::First => q.with_hardware(h.clone(), q.h2.clone()),
                    Side::Second => q.with_hardware(q.h1.clone(), h.clone()),
                };
                (v, quad)
            }
        };
        if let Some(k) = equal.witness_index {
            return Err(Error::EquivalenceNotEstablished(format!("traces differ at position {k}")));
        }
        Ok(Goal {
            quad,
            hypothesis: g.hypothesis.clone(),
            guarded: g.guarded,
        })
    }

    /// Replace the contract pair by `(s1', s2')`, given a proof of the
    /// quintuple `(s1, s2, s1', s2')` over the contract on both sides.
    pub fn apply_reduce_contract_leakage(
        &self,
        g: &Goal<C::State, H::State>,
        s1: &C::State,
        s2: &C::State,
        side: &ProofScript<C::State, C::State>,
    ) -> Result<Goal<C::State, H::State>> {
        let root = Quad::new(g.quad.s1.clone(), g.quad.s2.clone(), s1.clone(), s2.clone());
        let mut sk = Kernel::new(self.contract, self.contract).with_budget(self.budget);
        sk.mutation = self.mutation;
        let sk = sk.with_closure([root.clone()])?;
        let v = sk.check_script(&Goal::root(root), side);
        if let Some(f) = v.failure {
            return Err(Error::SideProofRejected(format!("{} at {}: {}", f.rule, f.goal, f.reason)));
        }
        Ok(Goal {
            quad: g.quad.with_contract(s1.clone(), s2.clone()),
            hypothesis: g.hypothesis.clone(),
            guarded: g.guarded,
        })
    }

    /// Replace the hardware pair by `(h1', h2')`, given a lockstep proof of
    /// `(h1', h2', h1, h2)` over the hardware on both sides.
    pub fn apply_augment_hardware_leakage(
        &self,
        g: &Goal<C::State, H::State>,
        h1: &H::State,
        h2: &H::State,
        side: &SideProof<H::State>,
    ) -> Result<Goal<C::State, H::State>> {
        let SideProof::Lockstep(script) = side else {
            return Err(Error::NonLockstepSideProof);
        };
        let root = Quad::new(h1.clone(), h2.clone(), g.quad.h1.clone(), g.quad.h2.clone());
        let mut sk = Kernel::new(self.hardware, self.hardware).with_budget(self.budget);
        sk.mutation = self.mutation;
        let sk = sk.with_closure([root.clone()])?;
        let v = sk.check_lockstep_script(&Goal::root(root), script);
        if let Some(f) = v.failure {
            return Err(Error::SideProofRejected(format!("{} at {}: {}", f.rule, f.goal, f.reason)));
        }
        Ok(Goal {
            quad: g.quad.with_hardware(h1.clone(), h2.clone()),
            hypothesis: g.hypothesis.clone(),
            guarded: g.guarded,
        })
    }
}

/// Precomputed equivalences used to apply up-to functions to whole subsets
/// of a universe.
pub struct UpToEnv<'u, S, H> {
    universe: &'u QuadUniverse<S, H>,
    /// Quads grouped by everything except the first contract component, etc.
    c_class: HashMap<S, usize>,
    h_class: HashMap<H, usize>,
    /// rel_trace_eq over (C, C) on contract pairs.
    c_rel: HashMap<(S, S, S, S), bool>,
    /// Lockstep membership over (H, H) on hardware pairs.
    h_lock: HashMap<(H, H, H, H), bool>,
    c_pairs: Vec<(S, S)>,
    h_pairs: Vec<(H, H)>,
}

impl<'u, S: KernelState, H: KernelState> UpToEnv<'u, S, H> {
    pub fn new<C, Hw>(c: &C, h: &Hw, universe: &'u QuadUniverse<S, H>, budget: usize) -> Result<Self>
    where
        C: TransitionSystem<State = S>,
        Hw: TransitionSystem<State = H>,
    {
        let mut cs: Vec<S> = Vec::new();
        let mut hs: Vec<H> = Vec::new();
        let mut c_pairs = Vec::new();
        let mut h_pairs = Vec::new();
        for q in universe.quads() {
            for s in [&q.s1, &q.s2] {
                if !cs.contains(s) {
                    cs.push(s.clone());
                }
            }
            for x in [&q.h1, &q.h2] {
                if !hs.contains(x) {
                    hs.push(x.clone());
                }
            }
            let cp = (q.s1.clone(), q.s2.clone());
            if !c_pairs.contains(&cp) {
                c_pairs.push(cp);
            }
            let hp = (q.h1.clone(), q.h2.clone());
            if !h_pairs.contains(&hp) {
                h_pairs.push(hp);
            }
        }
        let classes = |states: &[S]| -> Result<HashMap<S, usize>> {
            let mut reps: Vec<S> = Vec::new();
            let mut out = HashMap::new();
            for s in states {
                let mut found = None;
                for (i, r) in reps.iter().enumerate() {
                    if traces_equal_within(c, s, r, budget)?.equal() {
                        found = Some(i);
                        break;
                    }
                }
                let i = found.unwrap_or_else(|| {
                    reps.push(s.clone());
                    reps.len() - 1
                });
                out.insert(s.clone(), i);
            }
            Ok(out)
        };
        let c_class = classes(&cs)?;
        let mut reps: Vec<H> = Vec::new();
        let mut h_class = HashMap::new();
        for x in &hs {
            let mut found = None;
            for (i, r) in reps.iter().enumerate() {
                if traces_equal_within(h, x, r, budget)?.equal() {
                    found = Some(i);
                    break;
                }
            }
            let i = found.unwrap_or_else(|| {
                reps.push(x.clone());
                reps.len() - 1
            });
            h_class.insert(x.clone(), i);
        }
        let mut c_rel = HashMap::new();
        for (a, b) in &c_pairs {
            for (x, y) in &c_pairs {
                let q = Quad::new(a.clone(), b.clone(), x.clone(), y.clone());
                c_rel.insert((a.clone(), b.clone(), x.clone(), y.clone()), rel_trace_eq_within(c, c, &q, budget)?);
            }
        }
        let mut h_lock = HashMap::new();
        for (a, b) in &h_pairs {
            for (x, y) in &h_pairs {
                let q = Quad::new(a.clone(), b.clone(), x.clone(), y.clone());
                h_lock.insert((a.clone(), b.clone(), x.clone(), y.clone()), lockstep_rel(h, h, &q, budget)?);
            }
        }
        Ok(UpToEnv {
            universe,
            c_class,
            h_class,
            c_rel,
            h_lock,
            c_pairs,
            h_pairs,
        })
    }

    /// `f(X)`, restricted to the universe.
    pub fn transform(&self, f: UpToFunction, x: &QuadSet) -> QuadSet {
        let u = self.universe;
        let mut out = u.empty_set();
        let mut add = |q: Quad<S, H>| {
            if let Some(i) = u.index_of(&q) {
                out.insert(i);
            }
        };
        for i in x.iter() {
            let w = u.quad(i);
            match f {
                UpToFunction::Identity => add(w.clone()),
                UpToFunction::Top => {}
                UpToFunction::Registered(k) => match k {
                    UpToKind::CSwap => add(w.swap_contract()),
                    UpToKind::HSwap => add(w.swap_hardware()),
                    UpToKind::CLeakEq => {
                        let cls = self.c_class[&w.s1];
                        for (s, c) in &self.c_class {
                            if *c == cls {
                                add(w.with_contract(s.clone(), w.s2.clone()));
                            }
                        }
                    }
                    UpToKind::HLeakEq => {
                        let cls = self.h_class[&w.h1];
                        for (h, c) in &self.h_class {
                            if *c == cls {
                                add(w.with_hardware(h.clone(), w.h2.clone()));
                            }
                        }
                    }
                    UpToKind::ReduceCLeak => {
                        for (a, b) in &self.c_pairs {
                            let key = (a.clone(), b.clone(), w.s1.clone(), w.s2.clone());
                            if self.c_rel.get(&key).copied().unwrap_or(false) {
                                add(w.with_contract(a.clone(), b.clone()));
                            }
                        }
                    }
                    UpToKind::AugmentHLeak => {
                        for (a, b) in &self.h_pairs {
                            let key = (w.h1.clone(), w.h2.clone(), a.clone(), b.clone());
                            if self.h_lock.get(&key).copied().unwrap_or(false) {
                                add(w.with_hardware(a.clone(), b.clone()));
                            }
                        }
                    }
                },
            }
        }
        if f == UpToFunction::Top {
            return u.full_set();
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatibilityReport {
    pub function: String,
    pub samples: usize,
    /// `(sample index, quad in f(F(X)) but not in F(f(X)))`.
    pub violations: Vec<(usize, String)>,
}

impl CompatibilityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sampled check of `f(F(X)) ⊆ F(f(X))` for random subsets `X`.
pub fn check_compatibility<S, H, R>(
    f: UpToFunction,
    env: &UpToEnv<'_, S, H>,
    samples: usize,
    rng: &mut R,
) -> CompatibilityReport
where
    S: KernelState,
    H: KernelState,
    R: Rng + ?Sized,
{
    let u = env.universe;
    let mut violations = Vec::new();
    for n in 0..samples {
        let density: f64 = rng.gen_range(0.0..=1.0);
        let x = QuadSet::from_fn(u.len(), |_| rng.gen_bool(density));
        let lhs = env.transform(f, &rbisim_functional(u, &x).set);
        let rhs = rbisim_functional(u, &env.transform(f, &x)).set;
        let missing = lhs.iter().find(|&i| !rhs.contains(i));
        if let Some(i) = missing {
            violations.push((n, u.quad(i).to_string()));
        }
    }
    CompatibilityReport {
        function: f.name().to_string(),
        samples,
        violations,
    }
}
