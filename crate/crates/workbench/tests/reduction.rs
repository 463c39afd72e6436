//! The class-based case-study analysis agrees with brute force over every
//! concrete quad, including quads with nonempty initial caches.

use rbisim_core::{rel_trace_eq, ClosureBudget, Kernel};
use rbisim_isa::{parse_program, ArchState, Machine, Program, Scheduler, Value, ValueDomain};
use rbisim_workbench::casestudy::{analyze, PredictorKind};
use rbisim_workbench::enumerate::{all_programs, RuleHits};
use rbisim_workbench::models::{AmModel, CaseModel, OooModel};

const VALUES: [Value; 2] = [0, 1];
const CACHES: [&[u32]; 3] = [&[], &[1], &[0, 1]];

fn machine() -> Machine {
    Machine::new(2, ValueDomain::range(0, 1).unwrap()).unwrap()
}

fn states(pc: usize) -> Vec<ArchState> {
    let mut out = Vec::new();
    for r1 in VALUES {
        for r2 in VALUES {
            for m0 in VALUES {
                for m1 in VALUES {
                    out.push(ArchState::new(vec![m0, m1], [r1, r2], pc));
                }
            }
        }
    }
    out
}

struct Brute {
    checked: u64,
    refuted: u64,
    closed: bool,
}

fn brute<M: CaseModel>(model: &M, p: &Program) -> Brute {
    let kernel = Kernel::new(model.contract(), model.hardware());
    let inv = model.invariant();
    let mut b = Brute {
        checked: 0,
        refuted: 0,
        closed: true,
    };
    for pc in 0..=p.len() {
        let ss = states(pc);
        for s1 in &ss {
            for s2 in &ss {
                let verdicts: Vec<bool> = CACHES
                    .iter()
                    .map(|c| rel_trace_eq(model.contract(), model.hardware(), &model.quad(s1, s2, c)).unwrap())
                    .collect();
                assert!(verdicts.iter().all(|&v| v == verdicts[0]), "verdict depends on the cache");
                b.checked += 1;
                b.refuted += u64::from(!verdicts[0]);
                if b.closed {
                    for c in CACHES {
                        let q = model.quad(s1, s2, c);
                        assert!(inv.contains(&q));
                        if kernel.closure_derivation(&inv, &q, model.budget()).is_none() {
                            b.closed = false;
                        }
                    }
                }
            }
        }
    }
    b
}

fn agree<M: CaseModel>(model: &M, p: &Program) -> (u64, bool) {
    let mut hits = RuleHits::new();
    let o = analyze(model, &machine(), &VALUES, p, "x", false, &mut hits);
    let b = brute(model, p);
    assert_eq!((o.checked, o.refuted, o.closed), (b.checked, b.refuted, b.closed), "{p}");
    (o.refuted, o.closed)
}

fn sample() -> Vec<Program> {
    all_programs(2, &[0, 1]).into_iter().step_by(5).collect()
}

#[test]
fn am_classes_match_brute_force() {
    for p in sample() {
        for kind in PredictorKind::ALL {
            let model = AmModel::new(machine(), &p, &kind.build(&p), 1).unwrap();
            assert_eq!(agree(&model, &p), (0, true), "{p}");
        }
    }
}

#[test]
fn ooo_classes_match_brute_force() {
    for p in sample() {
        for sched in Scheduler::all_valid(&p) {
            let model = OooModel::new(machine(), &p, &sched).unwrap();
            assert_eq!(agree(&model, &p), (0, true), "{p}");
        }
    }
}

#[test]
fn starved_budgets_fail_the_same_way() {
    let mut failures = 0;
    for p in sample().into_iter().filter(|p| p.has_branch()) {
        let mut model = AmModel::new(machine(), &p, &PredictorKind::AlwaysJump.build(&p), 2).unwrap();
        model.budget = ClosureBudget::new(1, 1);
        failures += u64::from(!agree(&model, &p).1);
    }
    assert!(failures > 0);
}

#[test]
fn invalid_schedulers_are_refuted_the_same_way() {
    for text in ["load r1 r2\nload r2 r1", "add r2 r1 1\nload r1 r2"] {
        let p = parse_program(text).unwrap();
        let model = OooModel::new_unchecked(machine(), &p, &Scheduler::delaying([0]));
        let (refuted, closed) = agree(&model, &p);
        assert!(refuted > 0 && !closed, "{p}");
    }
}
