//! The trusted proof kernel: quintuple goals, the core rules, script
//! checking, invariant closure, and derivations from computed relative
//! bisimilarity.

use std::cell::{OnceCell, RefCell};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::rc::Rc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixpoint::{compute_rbisim_lockstep, compute_rbisim_traced, Justification, RbisimComputation};
use crate::lts::{Quad, TransitionSystem};
use crate::oracle::{rel_trace_eq_within, DEFAULT_BUDGET};
use crate::script::{Case, ProofScript};
use crate::universe::{QuadRelation, QuadSet, QuadUniverse};

/// Bounds shared by every state type the kernel handles.
pub trait KernelState: Clone + Eq + Hash + fmt::Debug + 'static {}
impl<T: Clone + Eq + Hash + fmt::Debug + 'static> KernelState for T {}

pub type CaseFn<S, H> = Rc<dyn Fn(&Quad<S, H>) -> bool>;

/// The accumulated coinduction hypothesis: a union of relations, only ever
/// extended along a branch.
#[derive(Clone)]
pub struct Hypothesis<S, H> {
    parts: Rc<Vec<QuadRelation<S, H>>>,
}

impl<S: KernelState, H: KernelState> Hypothesis<S, H> {
    pub fn empty() -> Self {
        Hypothesis { parts: Rc::new(Vec::new()) }
    }

    pub fn of(r: QuadRelation<S, H>) -> Self {
        Hypothesis { parts: Rc::new(vec![r]) }
    }

    pub fn contains(&self, q: &Quad<S, H>) -> bool {
        self.parts.iter().any(|r| r.contains(q))
    }

    pub fn extended(&self, r: QuadRelation<S, H>) -> Self {
        let mut parts = (*self.parts).clone();
        parts.push(r);
        Hypothesis { parts: Rc::new(parts) }
    }

    pub fn names(&self) -> Vec<String> {
        self.parts.iter().map(|r| r.name().to_string()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

impl<S, H> fmt::Debug for Hypothesis<S, H> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.parts.iter().map(|r| r.name().to_string())).finish()
    }
}

/// A proof quintuple: the quad to relate, the hypothesis, and whether the
/// hypothesis is guarded (not yet usable by `Cycle`).
#[derive(Clone, Debug)]
pub struct Goal<S, H> {
    pub quad: Quad<S, H>,
    pub hypothesis: Hypothesis<S, H>,
    pub guarded: bool,
}

impl<S: KernelState, H: KernelState> Goal<S, H> {
    /// Guarded goal with an empty hypothesis.
    pub fn root(quad: Quad<S, H>) -> Self {
        Goal {
            quad,
            hypothesis: Hypothesis::empty(),
            guarded: true,
        }
    }
}

impl<S: fmt::Debug, H: fmt::Debug> fmt::Display for Goal<S, H> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} under {:?}",
            if self.guarded { "guarded" } else { "unguarded" },
            self.quad,
            self.hypothesis
        )
    }
}

#[derive(Clone, Debug)]
pub enum Rule<S, H> {
    CLeak,
    CStep,
    CStepPrime,
    HStep,
    Invariant(QuadRelation<S, H>),
    Cycle,
    Guard,
}

impl<S, H> Rule<S, H> {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::CLeak => "C-Leak",
            Rule::CStep => "C-Step",
            Rule::CStepPrime => "C-Step'",
            Rule::HStep => "H-Step",
            Rule::Invariant(_) => "Invariant",
            Rule::Cycle => "Cycle",
            Rule::Guard => "Guard",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub goal: String,
    pub rule: String,
    pub reason: String,
    #[serde(skip)]
    pub error: Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub accepted: bool,
    pub failure: Option<Failure>,
}

impl Verdict {
    pub fn accept() -> Self {
        Verdict {
            accepted: true,
            failure: None,
        }
    }

    pub fn reject(f: Failure) -> Self {
        Verdict {
            accepted: false,
            failure: Some(f),
        }
    }

    fn from_result(r: std::result::Result<(), Failure>) -> Self {
        match r {
            Ok(()) => Verdict::accept(),
            Err(f) => Verdict::reject(f),
        }
    }
}

/// Deliberate kernel defects used to check that the differential tests
/// notice them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mutation {
    #[default]
    None,
    /// H-Step no longer checks that hardware leaks agree.
    SkipHStepLeakCheck,
}

/// One successful rule application, recorded when logging is on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEntry {
    pub parent: Option<usize>,
    pub rule: String,
    pub guarded: bool,
    pub hypothesis: Vec<String>,
}

/// Bounds for the derivation search behind invariant closure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ClosureBudget {
    /// Maximum number of consecutive contract steps: before the first
    /// H-Step, between two H-Steps, and after the last one.
    pub c_steps: u32,
    /// Maximum number of hardware steps in one derivation. With 1, the only
    /// H-Step lands directly in the invariant.
    pub h_steps: u32,
}

impl ClosureBudget {
    pub fn new(c_steps: u32, h_steps: u32) -> Self {
        ClosureBudget { c_steps, h_steps }
    }
}

/// Per-member derivations found while checking closure.
#[derive(Clone, Debug)]
pub struct ClosureReport<S, H> {
    pub verdict: Verdict,
    pub members: usize,
    pub derivations: Vec<(Quad<S, H>, ProofScript<S, H>)>,
}

impl<S: Clone, H: Clone> ClosureReport<S, H> {
    /// `(invariant NAME (case _ d1) (case _ d2) ...)` with duplicate bodies removed.
    pub fn script(&self, relation: &str) -> ProofScript<S, H>
    where
        ProofScript<S, H>: PartialEq,
    {
        let mut cases: Vec<Case<ProofScript<S, H>>> = Vec::new();
        for (_, d) in &self.derivations {
            if !cases.iter().any(|c| &c.body == d) {
                cases.push(Case {
                    label: "_".into(),
                    body: d.clone(),
                });
            }
        }
        ProofScript::Invariant {
            relation: relation.to_string(),
            cases,
        }
    }
}

/// The kernel for one contract system and one hardware system.
pub struct Kernel<'a, C: TransitionSystem, H: TransitionSystem> {
    pub(crate) contract: &'a C,
    pub(crate) hardware: &'a H,
    pub(crate) universe: Option<Rc<QuadUniverse<C::State, H::State>>>,
    relations: HashMap<String, QuadRelation<C::State, H::State>>,
    cases: HashMap<String, CaseFn<C::State, H::State>>,
    pub(crate) budget: usize,
    pub(crate) mutation: Mutation,
    rbisim: OnceCell<Rc<RbisimComputation>>,
    lockstep: OnceCell<QuadSet>,
    log: RefCell<Option<Vec<LogEntry>>>,
    /// Invariant obligations already decided during the current check,
    /// keyed by case list address, member quad and hypothesis.
    memo: RefCell<HashMap<MemoKey<C::State, H::State>, bool>>,
    /// Invariants whose members were all discharged, by relation, enclosing
    /// hypothesis and cases. Their obligations do not depend on the root.
    closed: RefCell<Vec<ClosedInvariant<C::State, H::State>>>,
}

type ClosedInvariant<S, H> = (String, Vec<String>, Vec<Case<ProofScript<S, H>>>);

type MemoKey<S, H> = (usize, Quad<S, H>, Vec<String>);

pub(crate) type Checked = std::result::Result<(), Failure>;

impl<'a, C, H> Kernel<'a, C, H>
where
    C: TransitionSystem,
    H: TransitionSystem,
    C::State: KernelState,
    H::State: KernelState,
{
    pub fn new(contract: &'a C, hardware: &'a H) -> Self {
        Kernel {
            contract,
            hardware,
            universe: None,
            relations: HashMap::new(),
            cases: HashMap::new(),
            budget: DEFAULT_BUDGET,
            mutation: Mutation::None,
            rbisim: OnceCell::new(),
            lockstep: OnceCell::new(),
            log: RefCell::new(None),
            memo: RefCell::new(HashMap::new()),
            closed: RefCell::new(Vec::new()),
        }
    }

    /// Use `u` to enumerate relations and to compute built-in relations.
    pub fn with_universe(mut self, u: QuadUniverse<C::State, H::State>) -> Self {
        self.universe = Some(Rc::new(u));
        self.rbisim = OnceCell::new();
        self.lockstep = OnceCell::new();
        self
    }

    /// Build the universe by closing `seeds` under both successor maps.
    pub fn with_closure(self, seeds: impl IntoIterator<Item = Quad<C::State, H::State>>) -> Result<Self> {
        let u = QuadUniverse::closure(self.contract, self.hardware, seeds, self.budget)?;
        Ok(self.with_universe(u))
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    #[cfg(feature = "mutation-testing")]
    pub fn with_mutation(mut self, m: Mutation) -> Self {
        self.mutation = m;
        self.closed.get_mut().clear();
        self
    }

    pub fn contract(&self) -> &'a C {
        self.contract
    }

    pub fn hardware(&self) -> &'a H {
        self.hardware
    }

    pub fn universe(&self) -> Option<&QuadUniverse<C::State, H::State>> {
        self.universe.as_deref()
    }

    /// Make `r` available to scripts under its name. Built-in names are
    /// `top`, `empty`, `rbisim` and `rbisim-lockstep`.
    pub fn register_relation(&mut self, r: QuadRelation<C::State, H::State>) {
        self.closed.get_mut().clear();
        self.relations.insert(r.name().to_string(), r);
    }

    /// Make a case label available to invariant nodes.
    pub fn register_case(&mut self, label: &str, pred: impl Fn(&Quad<C::State, H::State>) -> bool + 'static) {
        self.closed.get_mut().clear();
        self.cases.insert(label.to_string(), Rc::new(pred));
    }

    pub fn relation(&self, name: &str) -> Result<QuadRelation<C::State, H::State>> {
        if let Some(r) = self.relations.get(name) {
            return Ok(r.clone());
        }
        match name {
            "top" => Ok(QuadRelation::top()),
            "empty" => Ok(QuadRelation::empty()),
            "rbisim" | "rbisim-lockstep" => {
                let u = self
                    .universe
                    .clone()
                    .ok_or_else(|| Error::NotEnumerable(name.to_string()))?;
                let set = if name == "rbisim" {
                    self.rbisim_computation()?.members.clone()
                } else {
                    self.lockstep_set()?.clone()
                };
                Ok(QuadRelation::from_set(name, u, set))
            }
            _ => Err(Error::UnknownRelation(name.to_string())),
        }
    }

    pub fn rbisim_computation(&self) -> Result<Rc<RbisimComputation>> {
        let u = self.universe.as_ref().ok_or_else(|| Error::NotEnumerable("rbisim".into()))?;
        Ok(self
            .rbisim
            .get_or_init(|| Rc::new(compute_rbisim_traced(u, false)))
            .clone())
    }

    pub(crate) fn lockstep_set(&self) -> Result<&QuadSet> {
        let u = self
            .universe
            .as_ref()
            .ok_or_else(|| Error::NotEnumerable("rbisim-lockstep".into()))?;
        Ok(self.lockstep.get_or_init(|| compute_rbisim_lockstep(u)))
    }

    pub(crate) fn case_matches(&self, label: &str, q: &Quad<C::State, H::State>) -> Result<bool> {
        if label == "_" {
            return Ok(true);
        }
        let p = self.cases.get(label).ok_or_else(|| Error::UnknownCase(label.to_string()))?;
        Ok(p(q))
    }

    pub(crate) fn members(&self, r: &QuadRelation<C::State, H::State>) -> Result<Vec<Quad<C::State, H::State>>> {
        let m = r.members(self.universe.as_deref())?;
        if m.len() > self.budget {
            return Err(Error::BudgetExceeded { budget: self.budget });
        }
        Ok(m)
    }

    pub fn c_leak_differs(&self, q: &Quad<C::State, H::State>) -> bool {
        self.contract.leak(&q.s1) != self.contract.leak(&q.s2)
    }

    pub fn h_leak_equal(&self, q: &Quad<C::State, H::State>) -> bool {
        self.hardware.leak(&q.h1) == self.hardware.leak(&q.h2)
    }

    fn c_stepped(&self, g: &Goal<C::State, H::State>) -> Goal<C::State, H::State> {
        Goal {
            quad: g.quad.with_contract(self.contract.next(&g.quad.s1), self.contract.next(&g.quad.s2)),
            hypothesis: g.hypothesis.clone(),
            guarded: true,
        }
    }

    /// Apply one core rule, returning the remaining subgoals.
    pub fn apply_rule(
        &self,
        g: &Goal<C::State, H::State>,
        r: &Rule<C::State, H::State>,
    ) -> Result<Vec<Goal<C::State, H::State>>> {
        let fail = |reason: &str| Err(Error::side(r.name(), g, reason));
        let needs_guard = !matches!(r, Rule::Cycle | Rule::Guard);
        if needs_guard && !g.guarded {
            return fail("the goal is unguarded");
        }
        match r {
            Rule::CLeak => {
                if self.c_leak_differs(&g.quad) {
                    Ok(vec![])
                } else {
                    fail("contract leaks agree")
                }
            }
            Rule::CStep => Ok(vec![self.c_stepped(g)]),
            Rule::CStepPrime => {
                if self.c_leak_differs(&g.quad) {
                    Ok(vec![])
                } else {
                    Ok(vec![self.c_stepped(g)])
                }
            }
            Rule::HStep => {
                if self.mutation != Mutation::SkipHStepLeakCheck && !self.h_leak_equal(&g.quad) {
                    return fail("hardware leaks differ");
                }
                Ok(vec![Goal {
                    quad: g
                        .quad
                        .with_hardware(self.hardware.next(&g.quad.h1), self.hardware.next(&g.quad.h2)),
                    hypothesis: g.hypothesis.clone(),
                    guarded: false,
                }])
            }
            Rule::Invariant(rel) => {
                if !rel.contains(&g.quad) {
                    return fail(&format!("the quad is not in `{}`", rel.name()));
                }
                let hypothesis = g.hypothesis.extended(rel.clone());
                Ok(self
                    .members(rel)?
                    .into_iter()
                    .map(|quad| Goal {
                        quad,
                        hypothesis: hypothesis.clone(),
                        guarded: true,
                    })
                    .collect())
            }
            Rule::Cycle => {
                if g.guarded {
                    fail("the hypothesis is guarded")
                } else if g.hypothesis.contains(&g.quad) {
                    Ok(vec![])
                } else {
                    fail("the quad is not in the hypothesis")
                }
            }
            Rule::Guard => {
                if g.guarded {
                    return fail("the goal is already guarded");
                }
                Ok(vec![Goal {
                    guarded: true,
                    ..g.clone()
                }])
            }
        }
    }

    pub fn check_script(&self, root: &Goal<C::State, H::State>, script: &ProofScript<C::State, H::State>) -> Verdict {
        self.memo.borrow_mut().clear();
        let v = Verdict::from_result(self.check(root, script, None));
        self.memo.borrow_mut().clear();
        v
    }

    /// As [`Kernel::check_script`], also returning every successful rule
    /// application with a link to its parent application.
    pub fn check_script_logged(
        &self,
        root: &Goal<C::State, H::State>,
        script: &ProofScript<C::State, H::State>,
    ) -> (Verdict, Vec<LogEntry>) {
        *self.log.borrow_mut() = Some(Vec::new());
        let v = self.check_script(root, script);
        let log = self.log.borrow_mut().take().unwrap_or_default();
        (v, log)
    }

    pub(crate) fn record(&self, parent: Option<usize>, rule: &str, g: &Goal<C::State, H::State>) -> Option<usize> {
        let mut log = self.log.borrow_mut();
        let log = log.as_mut()?;
        log.push(LogEntry {
            parent,
            rule: rule.to_string(),
            guarded: g.guarded,
            hypothesis: g.hypothesis.names(),
        });
        Some(log.len() - 1)
    }

    pub(crate) fn failure(g: &Goal<C::State, H::State>, rule: &str, e: Error) -> Failure {
        Failure {
            goal: g.to_string(),
            rule: rule.to_string(),
            reason: e.to_string(),
            error: e,
        }
    }

    /// Apply `r`, recording it, and turn errors into failures.
    fn step_rule(
        &self,
        g: &Goal<C::State, H::State>,
        r: &Rule<C::State, H::State>,
        parent: Option<usize>,
    ) -> std::result::Result<(Vec<Goal<C::State, H::State>>, Option<usize>), Failure> {
        let subs = self.apply_rule(g, r).map_err(|e| Self::failure(g, r.name(), e))?;
        let id = self.record(parent, r.name(), g);
        Ok((subs, id))
    }

    pub(crate) fn check(
        &self,
        g: &Goal<C::State, H::State>,
        script: &ProofScript<C::State, H::State>,
        parent: Option<usize>,
    ) -> Checked {
        let single = |r: Rule<C::State, H::State>, body: &ProofScript<C::State, H::State>| -> Checked {
            let (subs, id) = self.step_rule(g, &r, parent)?;
            subs.iter().try_for_each(|s| self.check(s, body, id))
        };
        match script {
            ProofScript::CLeak => self.step_rule(g, &Rule::CLeak, parent).map(|_| ()),
            ProofScript::Cycle => self.step_rule(g, &Rule::Cycle, parent).map(|_| ()),
            ProofScript::CStep(b) => single(Rule::CStep, b),
            ProofScript::CStepPrime(b) => single(Rule::CStepPrime, b),
            ProofScript::HStep(b) => single(Rule::HStep, b),
            ProofScript::Guard(b) => single(Rule::Guard, b),
            ProofScript::Invariant { relation, cases } => {
                let rel = self.relation(relation).map_err(|e| Self::failure(g, "Invariant", e))?;
                let (members, id) = self.step_rule(g, &Rule::Invariant(rel), parent)?;
                let logging = self.log.borrow().is_some();
                let names = g.hypothesis.names();
                let known = |c: &ClosedInvariant<C::State, H::State>| c.0 == *relation && c.1 == names && c.2 == *cases;
                if !logging && self.closed.borrow().iter().any(known) {
                    return Ok(());
                }
                for m in &members {
                    self.discharge_member(m, relation, cases, id)?;
                }
                if !logging {
                    self.closed.borrow_mut().push((relation.clone(), names, cases.clone()));
                }
                Ok(())
            }
            ProofScript::UpTo { step, body } => {
                let (next, rule) = self.apply_upto_step(g, step).map_err(|(rule, e)| Self::failure(g, rule, e))?;
                let id = self.record(parent, rule, g);
                self.check(&next, body, id)
            }
            ProofScript::ReduceContractLeakage { witness, side, body } => {
                let rule = "Reduce-Contract-Leakage";
                let next = self
                    .apply_reduce_contract_leakage(g, &witness.0, &witness.1, side)
                    .map_err(|e| Self::failure(g, rule, e))?;
                let id = self.record(parent, rule, g);
                self.check(&next, body, id)
            }
            ProofScript::AugmentHardwareLeakage { witness, side, body } => {
                let rule = "Augment-Hardware-Leakage";
                let next = self
                    .apply_augment_hardware_leakage(g, &witness.0, &witness.1, side)
                    .map_err(|e| Self::failure(g, rule, e))?;
                let id = self.record(parent, rule, g);
                self.check(&next, body, id)
            }
        }
    }

    fn discharge_member(
        &self,
        m: &Goal<C::State, H::State>,
        relation: &str,
        cases: &[Case<ProofScript<C::State, H::State>>],
        parent: Option<usize>,
    ) -> Checked {
        let key = (cases.as_ptr() as usize, m.quad.clone(), m.hypothesis.names());
        let known = self.memo.borrow().get(&key).copied();
        match known {
            Some(true) => return Ok(()),
            Some(false) => {
                let e = Error::UnmatchedObligation {
                    relation: relation.to_string(),
                    member: m.quad.to_string(),
                };
                return Err(Self::failure(m, "Invariant", e));
            }
            None => {}
        }
        let r = self.discharge_member_uncached(m, relation, cases, parent);
        self.memo.borrow_mut().insert(key, r.is_ok());
        r
    }

    fn discharge_member_uncached(
        &self,
        m: &Goal<C::State, H::State>,
        relation: &str,
        cases: &[Case<ProofScript<C::State, H::State>>],
        parent: Option<usize>,
    ) -> Checked {
        let mut last = None;
        for c in cases {
            match self.case_matches(&c.label, &m.quad) {
                Ok(true) => {}
                Ok(false) => continue,
                Err(e) => return Err(Self::failure(m, "Invariant", e)),
            }
            match self.check(m, &c.body, parent) {
                Ok(()) => return Ok(()),
                Err(f) => last = Some(f),
            }
        }
        let e = Error::UnmatchedObligation {
            relation: relation.to_string(),
            member: m.quad.to_string(),
        };
        let mut f = Self::failure(m, "Invariant", e);
        if let Some(l) = last {
            f.reason = format!("{}; last case failed: {} at {}", f.reason, l.reason, l.goal);
        }
        Err(f)
    }

    /// Search for a derivation of the member `q` of the guarded hypothesis `r`,
    /// trying C-Leak, then H-Step, then C-Step at every node.
    pub fn closure_derivation(
        &self,
        r: &QuadRelation<C::State, H::State>,
        q: &Quad<C::State, H::State>,
        budget: ClosureBudget,
    ) -> Option<ProofScript<C::State, H::State>> {
        let mut failed = HashSet::new();
        self.search(r, q, 0, budget.h_steps, budget.c_steps, &mut failed)
    }

    fn search(
        &self,
        r: &QuadRelation<C::State, H::State>,
        q: &Quad<C::State, H::State>,
        k: u32,
        d: u32,
        max_c: u32,
        failed: &mut HashSet<(Quad<C::State, H::State>, u32, u32)>,
    ) -> Option<ProofScript<C::State, H::State>> {
        let (n1, l1) = self.contract.step(&q.s1);
        let (n2, l2) = self.contract.step(&q.s2);
        if l1 != l2 {
            return Some(ProofScript::CLeak);
        }
        if failed.contains(&(q.clone(), k, d)) {
            return None;
        }
        if d > 0 {
            let (m1, o1) = self.hardware.step(&q.h1);
            let (m2, o2) = self.hardware.step(&q.h2);
            if o1 == o2 {
                let landed = q.with_hardware(m1, m2);
                if r.contains(&landed) {
                    return Some(ProofScript::hstep(ProofScript::Cycle));
                }
                if let Some(s) = self.search(r, &landed, 0, d - 1, max_c, failed) {
                    return Some(ProofScript::hstep(ProofScript::guard(s)));
                }
            }
        }
        if k < max_c {
            if let Some(s) = self.search(r, &q.with_contract(n1, n2), k + 1, d, max_c, failed) {
                return Some(ProofScript::cstep(s));
            }
        }
        failed.insert((q.clone(), k, d));
        None
    }

    /// Check `R ⊆ rbisimF(R)` member by member with bounded derivations.
    pub fn check_invariant_closure(
        &self,
        r: &QuadRelation<C::State, H::State>,
        budget: ClosureBudget,
    ) -> ClosureReport<C::State, H::State> {
        let members = match self.members(r) {
            Ok(m) => m,
            Err(e) => {
                return ClosureReport {
                    verdict: Verdict::reject(Failure {
                        goal: r.name().to_string(),
                        rule: "Invariant".into(),
                        reason: e.to_string(),
                        error: e,
                    }),
                    members: 0,
                    derivations: vec![],
                }
            }
        };
        let mut derivations = Vec::with_capacity(members.len());
        for q in &members {
            match self.closure_derivation(r, q, budget) {
                Some(d) => derivations.push((q.clone(), d)),
                None => {
                    let e = Error::ClosureFailed {
                        quad: q.to_string(),
                        note: format!(
                            " (no derivation within {} consecutive contract and {} hardware steps)",
                            budget.c_steps, budget.h_steps
                        ),
                    };
                    return ClosureReport {
                        verdict: Verdict::reject(Failure {
                            goal: q.to_string(),
                            rule: "Invariant".into(),
                            reason: e.to_string(),
                            error: e,
                        }),
                        members: members.len(),
                        derivations,
                    };
                }
            }
        }
        ClosureReport {
            verdict: Verdict::accept(),
            members: members.len(),
            derivations,
        }
    }

    /// Default contract-step budget: the number of contract pairs in the
    /// universe plus one.
    pub fn default_closure_budget(&self) -> ClosureBudget {
        let pairs = self
            .universe
            .as_ref()
            .map(|u| {
                u.quads()
                    .iter()
                    .map(|q| (&q.s1, &q.s2))
                    .collect::<HashSet<_>>()
                    .len()
            })
            .unwrap_or(0);
        ClosureBudget::new(pairs as u32 + 1, 1)
    }

    /// A script proving `q`, using computed relative bisimilarity as the
    /// invariant. Fails with `NotProvable` when relative trace equality fails.
    pub fn derive_proof(&self, q: &Quad<C::State, H::State>) -> Result<ProofScript<C::State, H::State>> {
        let u = self
            .universe
            .as_ref()
            .ok_or_else(|| Error::NotEnumerable("rbisim".into()))?;
        let root = u.index_of(q).ok_or_else(|| Error::NotClosed {
            from: "derive_proof".into(),
            missing: q.to_string(),
        })?;
        let comp = self.rbisim_computation()?;
        if !comp.members.contains(root) {
            debug_assert!(!rel_trace_eq_within(self.contract, self.hardware, q, self.budget).unwrap_or(true));
            return Err(Error::NotProvable { quad: q.to_string() });
        }
        // Each member's derivation is C-Step^k followed by C-Leak or
        // H-Step;Cycle, read off the recorded justifications.
        let mut shapes: Vec<(u32, bool)> = Vec::new();
        let mut seen = HashSet::new();
        for i in comp.members.iter() {
            let shape = self.member_shape(u, &comp, i);
            if seen.insert(shape) {
                shapes.push(shape);
            }
        }
        shapes.sort();
        let cases = shapes
            .into_iter()
            .map(|(k, leak)| Case {
                label: "_".into(),
                body: shape_script(k, leak),
            })
            .collect();
        Ok(ProofScript::Invariant {
            relation: "rbisim".into(),
            cases,
        })
    }

    /// The derivation `derive_proof` uses for the member `q` itself.
    pub fn member_derivation(&self, q: &Quad<C::State, H::State>) -> Result<ProofScript<C::State, H::State>> {
        let u = self
            .universe
            .as_ref()
            .ok_or_else(|| Error::NotEnumerable("rbisim".into()))?;
        let comp = self.rbisim_computation()?;
        match u.index_of(q) {
            Some(i) if comp.members.contains(i) => {
                let (k, leak) = self.member_shape(u, &comp, i);
                Ok(shape_script(k, leak))
            }
            _ => Err(Error::NotProvable { quad: q.to_string() }),
        }
    }

    fn member_shape(&self, u: &QuadUniverse<C::State, H::State>, comp: &RbisimComputation, mut i: usize) -> (u32, bool) {
        let mut k = 0;
        loop {
            match comp.justification[i].expect("member has a justification").0 {
                Justification::CLeak => return (k, true),
                Justification::HStep => return (k, false),
                Justification::CStep => {
                    k += 1;
                    i = u.c_succ(i);
                }
            }
        }
    }
}

fn shape_script<S, H>(k: u32, leak: bool) -> ProofScript<S, H> {
    let mut s = if leak {
        ProofScript::CLeak
    } else {
        ProofScript::hstep(ProofScript::Cycle)
    };
    for _ in 0..k {
        s = ProofScript::cstep(s);
    }
    s
}
