use proptest::prelude::*;
use rbisim_core::{encode_termination, trace_prefix, Obs, TransitionSystem};
use rbisim_isa::*;

fn machine() -> Machine {
    Machine::new(4, ValueDomain::range(0, 2).unwrap()).unwrap()
}

fn prog(text: &str) -> Program {
    parse_program(text).unwrap()
}

fn start(r: [Value; 2], c: Vec<u32>) -> OooState {
    OooState::initial(ArchState::new(vec![1, 2, 0, 1], r, 0), c)
}

#[test]
fn execute_is_the_vanilla_step() {
    let p = prog("add r1 r2 1");
    let st = start([0, 1], vec![3]);
    let (n, o) = ooo_next_leak(machine(), &p, &Scheduler::all_execute(), &st).unwrap();
    let (v, vo) = machine().hw_step(&st.s, &p.instructions()[0]);
    assert_eq!(n, OooState { s: v, buf: None });
    assert_eq!(o, vo);
}

#[test]
fn delay_runs_the_successor_first() {
    let p = prog("add r1 r1 1\nload r2 r2");
    let sched = Scheduler::delaying([0]);
    let st = start([0, 3], vec![]);
    let (n, o) = ooo_next_leak(machine(), &p, &sched, &st).unwrap();
    assert_eq!(o, Obs::cache(&[]));
    assert_eq!(n.s.c, vec![3]);
    assert_eq!(n.buf, Some(p.instructions()[0]));
    assert_eq!(n.s.arch.a, [0, 1]);
    let (n2, o2) = ooo_next_leak(machine(), &p, &sched, &n).unwrap();
    assert_eq!(o2, Obs::cache(&[3]));
    assert_eq!(n2.buf, None);
    assert_eq!(n2.s.arch.a, [1, 1]);
    assert_eq!(n2.s.arch.pc, 2);
}

#[test]
fn swapped_loads_end_in_the_in_order_state() {
    let p = prog("load r1 r1\nload r2 r2");
    let h = OooHardware::new(machine(), p.clone(), Scheduler::delaying([0])).unwrap();
    let st = start([0, 3], vec![]);
    let two = h.next(&h.next(&st).unwrap().unwrap()).unwrap().unwrap();
    let m = machine();
    let in_order = m.arch_step(&m.arch_step(&st.s.arch, &p.instructions()[0]), &p.instructions()[1]);
    assert_eq!(two.s.arch, in_order);
    // The contract leaks r1's address first; the cache saw it last.
    let c = encode_termination(SeqContract::new(m, p));
    let leaks = trace_prefix(&c, &st.s.arch, 2).observations;
    assert_eq!(leaks, vec![Obs::Address(0), Obs::Address(3)]);
    assert_eq!(two.s.c, vec![0, 3]);
}

#[test]
fn invalid_schedulers_are_rejected() {
    let p = prog("beqz r1 0\nadd r2 r2 1");
    assert!(matches!(
        build_ooo_instance(machine(), &p, &Scheduler::delaying([0])),
        Err(IsaError::InvalidScheduler { pc: 0, .. })
    ));
    assert!(OooHardware::new(machine(), p.clone(), Scheduler::delaying([1])).is_err());
    let st = start([0, 0], vec![]);
    assert!(ooo_next_leak(machine(), &p, &Scheduler::delaying([0]), &st).is_err());
}

#[test]
fn scheduler_files() {
    let s = Scheduler::parse("1 delay\n0 execute\n").unwrap();
    assert_eq!(s.decide(1), Schedule::Delay);
    assert_eq!(s.decide(0), Schedule::Execute);
    assert_eq!(s.to_text(), "1 delay\n");
    assert!(Scheduler::parse("1 later").is_err());
}

#[test]
fn delayable_examples() {
    let i = |t: &str| prog(t).instructions()[0];
    assert!(!delayable(&i("beqz r1 0"), &i("add r2 r2 1")));
    assert!(!delayable(&i("load r1 r2"), &i("load r2 r1")));
    assert!(delayable(&i("add r1 r1 1"), &i("load r2 r2")));
}

fn every_instruction() -> Vec<Instruction> {
    let mut out = Vec::new();
    for a in Reg::ALL {
        for b in Reg::ALL {
            out.push(Instruction::Load { dst: a, src: b });
            for k in 0..3 {
                out.push(Instruction::Add { dst: a, src: b, k });
            }
        }
        for target in 0..3 {
            out.push(Instruction::Beqz { reg: a, target });
        }
    }
    out
}

fn every_state() -> Vec<ArchState> {
    let mut out = Vec::new();
    for r1 in 0..3 {
        for r2 in 0..3 {
            for cells in 0..81 {
                let m = (0..4).map(|k| (cells / 3i64.pow(k)) % 3).collect();
                out.push(ArchState::new(m, [r1, r2], 0));
            }
        }
    }
    out
}

#[test]
fn delaying_preserves_contract_leaks() {
    let m = machine();
    let is = every_instruction();
    let states = every_state();
    let mut pairs = 0;
    for i1 in &is {
        for i2 in &is {
            if !delayable(i1, i2) {
                continue;
            }
            pairs += 1;
            for s in &states {
                let o1 = m.contract_leak(s, i1);
                let o2 = m.contract_leak(&m.arch_step(s, i1), i2);
                assert_eq!(m.contract_leak(s, i2), o2, "{i1}; {i2}");
                assert_eq!(m.contract_leak(&m.arch_step(s, i2), i1), o1, "{i1}; {i2}");
            }
        }
    }
    assert!(pairs > 0);
}

#[test]
fn valid_scheduler_enumeration() {
    let p = prog("add r1 r1 1\nload r2 r2\nadd r1 r1 2");
    assert_eq!(Scheduler::all_valid(&p).len(), 4);
    assert_eq!(Scheduler::all_valid(&prog("beqz r1 0\nbeqz r2 0")), vec![Scheduler::all_execute()]);
}

fn instruction() -> impl Strategy<Value = Instruction> {
    prop::sample::select(every_instruction())
}

fn delayable_pair() -> impl Strategy<Value = (Instruction, Instruction)> {
    let is = every_instruction();
    let pairs: Vec<_> = is.iter().flat_map(|a| is.iter().map(move |b| (*a, *b))).filter(|(a, b)| delayable(a, b)).collect();
    prop::sample::select(pairs)
}

fn state() -> impl Strategy<Value = ArchState> {
    (prop::collection::vec(0i64..3, 4), 0i64..3, 0i64..3).prop_map(|(m, r1, r2)| ArchState::new(m, [r1, r2], 0))
}

fn multiset(c: &[u32]) -> Vec<u32> {
    let mut c = c.to_vec();
    c.sort_unstable();
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn swapping_delayable_pairs((i1, i2) in delayable_pair(), s in state(), c in prop::collection::vec(0u32..4, 0..3)) {
        let m = machine();
        let p = Program::new(vec![i1, i2]).unwrap();
        let h = OooHardware::new(m, p.clone(), Scheduler::delaying([0])).unwrap();
        let st = OooState::initial(s.clone(), c.clone());
        let swapped = h.next(&h.next(&st).unwrap().unwrap()).unwrap().unwrap();
        let v = VanillaHwState::new(s, c);
        let in_order = m.hw_next(&m.hw_next(&v, &i1), &i2);
        prop_assert_eq!(&swapped.s.arch, &in_order.arch);
        prop_assert_eq!(swapped.buf, None);
        prop_assert_eq!(multiset(&swapped.s.c), multiset(&in_order.c));
        if !(i1.is_load() && i2.is_load()) {
            prop_assert_eq!(&swapped.s.c, &in_order.c);
        }
    }

    #[test]
    fn all_execute_is_vanilla(p in prop::collection::vec(instruction(), 1..4), s in state(), c in prop::collection::vec(0u32..4, 0..3)) {
        let m = machine();
        let p = Program::new(p).unwrap();
        let (_, ooo) = build_ooo_instance(m, &p, &Scheduler::all_execute()).unwrap();
        let van = encode_termination(VanillaHardware { machine: m, program: p });
        let a = trace_prefix(&ooo, &OooState::initial(s.clone(), c.clone()), 12).observations;
        let b = trace_prefix(&van, &VanillaHwState::new(s, c), 12).observations;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn buffered_instructions_are_never_branches(p in prop::collection::vec(instruction(), 2..4), s in state()) {
        let p = Program::new(p).unwrap();
        for sched in Scheduler::all_valid(&p) {
            let (_, h) = build_ooo_instance(machine(), &p, &sched).unwrap();
            let mut st = OooState::initial(s.clone(), vec![]);
            for _ in 0..12 {
                prop_assert!(!st.buf.is_some_and(|i| i.is_branch()));
                st = h.step(&st).0;
            }
        }
    }
}
