//! Exhaustive case studies: the oracle and the invariant closure check over
//! every bounded initial quad of an instance.
//!
//! Quads are handled in classes (see [`crate::enumerate`]):
//!
//! * The oracle groups initial states by contract trace; relative trace
//!   equality holds for every quad iff hardware traces agree inside each group.
//! * The closure search only looks at contract leaks, contract pcs, pushed
//!   addresses, and which contract and hardware states run in step, all within
//!   the budget. States with equal [`Signature`]s are interchangeable for it,
//!   so one representative pair per pair of signatures is searched. Pairs whose
//!   contract leaks differ within `c_steps` are closed by `C-Step^p; C-Leak`.

use std::collections::HashMap;
use std::time::Instant;

use rbisim_core::{trace_prefix, traces_equal, Kernel};
use rbisim_isa::{Machine, Prediction, Predictor, Program, Scheduler, Value, ValueDomain};
use serde::{Deserialize, Serialize};

use crate::enumerate::{leaves, Leaf, RuleHits};
use crate::enumerate::all_programs;
use crate::models::{AmModel, CaseModel, OooModel};
use crate::report::{Counterexample, QuadVerdict, Report};

/// Outcome of one instance (program, model, and its parameters).
#[derive(Clone, Debug, Default)]
pub struct InstanceOutcome {
    pub label: String,
    pub checked: u64,
    pub contract_equal: u64,
    pub refuted: u64,
    pub closed: bool,
    pub closure_failure: Option<String>,
    /// Representative pairs handed to the kernel search.
    pub searched: u64,
    pub counterexample: Option<Counterexample>,
    pub verdicts: Vec<QuadVerdict>,
}

impl InstanceOutcome {
    pub fn proved(&self) -> u64 {
        if self.closed {
            self.checked
        } else {
            0
        }
    }
}

pub fn analyze<M: CaseModel>(
    model: &M,
    machine: &Machine,
    values: &[Value],
    program: &Program,
    label: &str,
    keep_verdicts: bool,
    hits: &mut RuleHits,
) -> InstanceOutcome {
    let mut out = InstanceOutcome {
        label: label.to_string(),
        closed: true,
        ..Default::default()
    };
    let kernel = Kernel::new(model.contract(), model.hardware());
    let inv = model.invariant();
    let budget = model.budget();
    let c = budget.c_steps as usize;
    let fill = values[0];
    let mut verdict_groups = Vec::new();
    for pc in 0..=program.len() {
        let ls = leaves(model, machine, values, pc, hits);
        let total: u64 = ls.iter().map(|l| l.weight).sum();
        out.checked += total * total;

        // Oracle.
        let mut groups: HashMap<_, Vec<&Leaf>> = HashMap::new();
        for l in &ls {
            groups.entry(&l.c_key).or_default().push(l);
        }
        let mut groups: Vec<_> = groups.into_values().collect();
        groups.sort_by_key(|g| (g[0].arch.a, g[0].arch.m.to_vec()));
        for g in &groups {
            let w: u64 = g.iter().map(|l| l.weight).sum();
            let mut by_h: HashMap<_, u64> = HashMap::new();
            for l in g {
                *by_h.entry(&l.h_key).or_default() += l.weight;
            }
            let same: u64 = by_h.values().map(|x| x * x).sum();
            out.contract_equal += w * w;
            out.refuted += w * w - same;
            let a = g[0].concrete(fill);
            if keep_verdicts {
                verdict_groups.push((model.quad(&a, &a, &[]).to_string(), same, true));
            }
            if by_h.len() > 1 {
                let b = g.iter().find(|l| l.h_key != g[0].h_key).expect("two hardware classes").concrete(fill);
                if keep_verdicts {
                    verdict_groups.push((model.quad(&a, &b, &[]).to_string(), w * w - same, false));
                }
                if out.counterexample.is_none() {
                    out.counterexample = Some(counterexample(model, label, &a, &b));
                }
            }
        }
        if keep_verdicts {
            let vacuous = total * total - groups.iter().map(|g| g.iter().map(|l| l.weight).sum::<u64>().pow(2)).sum::<u64>();
            if vacuous > 0 {
                let a = groups[0][0].concrete(fill);
                let b = groups[1][0].concrete(fill);
                verdict_groups.push((model.quad(&a, &b, &[]).to_string(), vacuous, true));
            }
        }

        // Closure of the invariant.
        if !out.closed {
            continue;
        }
        let mut reps: HashMap<_, &Leaf> = HashMap::new();
        for l in &ls {
            reps.entry(&l.sig).or_insert(l);
        }
        let mut by_prefix: HashMap<_, Vec<&Leaf>> = HashMap::new();
        for l in reps.into_values() {
            by_prefix.entry(&l.sig.c_leaks[..=c]).or_default().push(l);
        }
        let mut by_prefix: Vec<_> = by_prefix.into_values().collect();
        by_prefix.sort_by_key(|g| (g[0].arch.a, g[0].arch.m.to_vec()));
        'pairs: for g in &by_prefix {
            for a in g {
                for b in g {
                    let q = model.quad(&a.concrete(fill), &b.concrete(fill), &[]);
                    out.searched += 1;
                    if kernel.closure_derivation(&inv, &q, budget).is_none() {
                        out.closed = false;
                        out.closure_failure = Some(format!(
                            "no derivation for {q} within {} consecutive contract and {} hardware steps",
                            budget.c_steps, budget.h_steps
                        ));
                        break 'pairs;
                    }
                }
            }
        }
    }
    if out.closed && out.refuted > 0 {
        panic!("workbench bug: {label}: the kernel closed the invariant but the oracle refutes {} quads", out.refuted);
    }
    if keep_verdicts {
        out.verdicts = verdict_groups
            .into_iter()
            .map(|(quad, quads, oracle)| QuadVerdict {
                instance: label.to_string(),
                quad,
                quads,
                oracle,
                kernel: out.closed,
            })
            .collect();
    }
    out
}

fn counterexample<M: CaseModel>(
    model: &M,
    label: &str,
    s1: &rbisim_isa::ArchState,
    s2: &rbisim_isa::ArchState,
) -> Counterexample {
    let q = model.quad(s1, s2, &[]);
    let k = traces_equal(model.hardware(), &q.h1, &q.h2)
        .ok()
        .and_then(|v| v.witness_index)
        .unwrap_or(0);
    let show = |o: Vec<rbisim_core::Obs>| o.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let n = k + 1;
    Counterexample {
        instance: label.to_string(),
        quad: q.to_string(),
        diverges_at: k,
        contract: [
            show(trace_prefix(model.contract(), &q.s1, n).observations),
            show(trace_prefix(model.contract(), &q.s2, n).observations),
        ],
        hardware: [
            show(trace_prefix(model.hardware(), &q.h1, n).observations),
            show(trace_prefix(model.hardware(), &q.h2, n).observations),
        ],
    }
}

/// Summary of a sweep over many instances.
#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    pub instances: u64,
    pub checked: u64,
    pub proved: u64,
    pub refuted: u64,
    pub not_closed: Vec<String>,
    pub counterexample: Option<Counterexample>,
    pub searched: u64,
    pub hits: RuleHits,
    pub elapsed_ms: u64,
}

impl SweepOutcome {
    pub fn absorb(&mut self, o: InstanceOutcome) {
        self.instances += 1;
        self.checked += o.checked;
        self.proved += o.proved();
        self.refuted += o.refuted;
        self.searched += o.searched;
        if let Some(f) = o.closure_failure {
            self.not_closed.push(format!("{}: {f}", o.label));
        }
        if self.counterexample.is_none() {
            self.counterexample = o.counterexample;
        }
    }

    pub fn passed(&self) -> bool {
        self.refuted == 0 && self.not_closed.is_empty() && self.proved == self.checked
    }
}

pub(crate) fn timed<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_millis() as u64)
}


#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    AlwaysJump,
    AlwaysNext,
    /// `jump` and `next` on alternate branches.
    Mixed,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 3] = [PredictorKind::AlwaysJump, PredictorKind::AlwaysNext, PredictorKind::Mixed];

    pub fn build(self, p: &Program) -> Predictor {
        match self {
            PredictorKind::AlwaysJump => Predictor::constant(Prediction::Jump),
            PredictorKind::AlwaysNext => Predictor::constant(Prediction::Next),
            PredictorKind::Mixed => Predictor::alternating(p),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::AlwaysJump => "always-jump",
            PredictorKind::AlwaysNext => "always-next",
            PredictorKind::Mixed => "mixed",
        }
    }
}

/// Bounds of an exhaustive sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub max_len: usize,
    /// Initial register and memory values; arithmetic wraps into their range.
    pub values: Vec<Value>,
    pub mem_size: u32,
    /// Constants of `add` instructions.
    pub constants: Vec<Value>,
    pub windows: Vec<u32>,
    pub predictors: Vec<PredictorKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            max_len: 3,
            values: vec![0, 1, 2],
            mem_size: 4,
            constants: vec![0, 1, 2],
            windows: vec![1, 2],
            predictors: PredictorKind::ALL.to_vec(),
        }
    }
}

impl SweepConfig {
    pub fn machine(&self) -> rbisim_isa::Result<Machine> {
        let lo = *self.values.iter().min().ok_or_else(|| rbisim_isa::IsaError::Bounds("no values".into()))?;
        let hi = *self.values.iter().max().expect("non-empty");
        Machine::new(self.mem_size, ValueDomain::range(lo, hi)?)
    }

    pub fn programs(&self) -> Vec<Program> {
        all_programs(self.max_len, &self.constants)
    }
}

fn one_line(p: &Program) -> String {
    p.instructions().iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

/// Speculating hardware against the always-mispredict contract, for every
/// program, window and predictor of `cfg`.
///
/// Instances that are provably the same transition systems are analysed once
/// and counted for each: a branch-free program never speculates, so neither
/// the predictor nor the window matters beyond the budget, and two predictors
/// that agree on every branch of the program build the same hardware.
pub fn am_sweep(cfg: &SweepConfig, programs: &[Program]) -> rbisim_isa::Result<SweepOutcome> {
    let machine = cfg.machine()?;
    let mut sweep = SweepOutcome::default();
    let (r, ms) = timed(|| -> rbisim_isa::Result<()> {
        for p in programs {
            let mut done: Vec<(u32, Vec<(usize, Prediction)>, InstanceOutcome)> = Vec::new();
            let mut branch_free: Option<InstanceOutcome> = None;
            for &w in &cfg.windows {
                for &kind in &cfg.predictors {
                    let pred = kind.build(p);
                    let table = pred.on(p)?;
                    let label = format!("am w={w} {} [{}]", kind.name(), one_line(p));
                    if let Some((_, _, o)) = done.iter().find(|(dw, t, _)| *dw == w && *t == table) {
                        sweep.absorb(InstanceOutcome { label, searched: 0, ..o.clone() });
                        continue;
                    }
                    if let Some(o) = branch_free.as_ref().filter(|o| o.closed) {
                        sweep.absorb(InstanceOutcome { label, searched: 0, ..o.clone() });
                        continue;
                    }
                    let model = AmModel::new(machine, p, &pred, w)?;
                    let o = analyze(&model, &machine, &cfg.values, p, &label, false, &mut sweep.hits);
                    if !p.has_branch() && branch_free.is_none() {
                        // A larger window only grows the search budget.
                        branch_free = Some(o.clone());
                    }
                    done.push((w, table, o.clone()));
                    sweep.absorb(o);
                }
            }
        }
        Ok(())
    });
    r?;
    sweep.elapsed_ms = ms;
    Ok(sweep)
}

/// Out-of-order hardware against the sequential contract, for every program
/// and every valid scheduler.
pub fn ooo_sweep(cfg: &SweepConfig, programs: &[Program]) -> rbisim_isa::Result<SweepOutcome> {
    let machine = cfg.machine()?;
    let mut sweep = SweepOutcome::default();
    let (r, ms) = timed(|| -> rbisim_isa::Result<()> {
        for p in programs {
            for sched in Scheduler::all_valid(p) {
                let label = format!("ooo delay={:?} [{}]", sched.delay_pcs().collect::<Vec<_>>(), one_line(p));
                let model = OooModel::new(machine, p, &sched)?;
                let o = analyze(&model, &machine, &cfg.values, p, &label, false, &mut sweep.hits);
                sweep.absorb(o);
            }
        }
        Ok(())
    });
    r?;
    sweep.elapsed_ms = ms;
    Ok(sweep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Speculating hardware against the always-mispredict contract.
    AmSpec,
    /// Out-of-order hardware against the sequential contract.
    OooSeq,
}

/// One case-study instance.
#[derive(Clone, Debug)]
pub struct InstanceConfig {
    pub model: ModelKind,
    pub program: Program,
    /// Required for `am-spec`.
    pub predictor: Option<Predictor>,
    /// Required for `ooo-seq`.
    pub scheduler: Option<Scheduler>,
    pub w: u32,
    pub mem_size: u32,
    pub values: Vec<Value>,
    /// Overrides the model's closure budget.
    pub budget: Option<rbisim_core::ClosureBudget>,
    /// Build the out-of-order hardware without checking the scheduler.
    pub unchecked: bool,
}

impl InstanceConfig {
    pub fn machine(&self) -> crate::Result<Machine> {
        if self.mem_size == 0 || self.values.is_empty() {
            return Err(crate::error::config("memory size and value range must be non-empty"));
        }
        let lo = *self.values.iter().min().expect("non-empty");
        let hi = *self.values.iter().max().expect("non-empty");
        Ok(Machine::new(self.mem_size, ValueDomain::range(lo, hi)?)?)
    }
}

/// Exhaustive oracle and closure check of every bounded initial quad of one
/// instance, keeping a verdict per class of quads.
pub fn run_case_study(cfg: &InstanceConfig) -> crate::Result<Report> {
    let machine = cfg.machine()?;
    let p = &cfg.program;
    let mut hits = RuleHits::new();
    let (o, ms) = match cfg.model {
        ModelKind::AmSpec => {
            let pred = cfg
                .predictor
                .as_ref()
                .ok_or_else(|| crate::error::config("am-spec needs a predictor"))?;
            if cfg.w == 0 {
                return Err(crate::error::config("the speculation window must be positive"));
            }
            let mut model = AmModel::new(machine, p, pred, cfg.w)?;
            if let Some(b) = cfg.budget {
                model.budget = b;
            }
            let label = format!("am w={} [{}]", cfg.w, one_line(p));
            timed(|| analyze(&model, &machine, &cfg.values, p, &label, true, &mut hits))
        }
        ModelKind::OooSeq => {
            let sched = cfg
                .scheduler
                .clone()
                .unwrap_or_else(Scheduler::all_execute);
            let mut model = if cfg.unchecked {
                OooModel::new_unchecked(machine, p, &sched)
            } else {
                OooModel::new(machine, p, &sched)?
            };
            if let Some(b) = cfg.budget {
                model.budget = b;
            }
            let label = format!("ooo delay={:?} [{}]", sched.delay_pcs().collect::<Vec<_>>(), one_line(p));
            timed(|| analyze(&model, &machine, &cfg.values, p, &label, true, &mut hits))
        }
    };
    let mut r = Report::new("casestudy", o.label.clone());
    r.checked = o.checked;
    r.proved = o.proved();
    r.refuted = o.refuted;
    r.verdicts = o.verdicts;
    r.counterexample = o.counterexample;
    r.findings.extend(o.closure_failure);
    r.rule_hits = hits.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    r.elapsed_ms = ms;
    r.finish();
    Ok(r)
}

/// A sweep summarized as a report.
pub fn sweep_report(subject: impl Into<String>, s: SweepOutcome) -> Report {
    let mut r = Report::new("casestudy", subject);
    r.checked = s.checked;
    r.proved = s.proved;
    r.refuted = s.refuted;
    r.findings = s.not_closed;
    r.counterexample = s.counterexample;
    r.notes.push(format!("{} instances, {} closure searches", s.instances, s.searched));
    r.rule_hits = s.hits.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    r.elapsed_ms = s.elapsed_ms;
    r.finish();
    r
}
