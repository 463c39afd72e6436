use proptest::prelude::*;
use rbisim_core::{encode_termination, trace_prefix, Obs};
use rbisim_isa::*;

fn machine() -> Machine {
    Machine::new(4, ValueDomain::range(-1, 3).unwrap()).unwrap()
}

fn i(text: &str) -> Instruction {
    parse_program(text).unwrap().instructions()[0]
}

fn st(a: [Value; 2]) -> ArchState {
    ArchState::new(vec![10, 11, 12, 13], a, 0)
}

#[test]
fn add_writes_source_plus_constant() {
    let n = Machine::default().arch_step(&st([0, 3]), &i("add r1 r2 2"));
    assert_eq!(n.a, [5, 3]);
    assert_eq!(n.pc, 1);
}

#[test]
fn negative_load_address_reads_cell_zero() {
    let n = Machine::default().arch_step(&st([0, -1]), &i("load r1 r2"));
    assert_eq!(n.reg(Reg::R1), 10);
}

#[test]
fn branch_targets() {
    let m = Machine::default();
    assert_eq!(m.arch_step(&st([0, 9]), &i("beqz r1 7")).pc, 7);
    assert_eq!(m.arch_step(&st([1, 9]), &i("beqz r1 7")).pc, 1);
}

#[test]
fn load_prepends_to_the_cache() {
    let m = Machine::default();
    let h = VanillaHwState::new(st([0, 3]), vec![1]);
    let (n, o) = m.hw_step(&h, &i("load r1 r2"));
    assert_eq!(o, Obs::cache(&[1]));
    assert_eq!(n.c, vec![3, 1]);
}

#[test]
fn add_leaves_the_cache() {
    let m = Machine::default();
    let h = VanillaHwState::new(st([0, 3]), vec![2]);
    let (n, o) = m.hw_step(&h, &i("add r1 r2 1"));
    assert_eq!(o, Obs::cache(&[2]));
    assert_eq!(n.c, vec![2]);
}

#[test]
fn consecutive_loads_grow_the_cache() {
    let m = Machine::default();
    let p = parse_program("load r1 r1\nload r2 r2").unwrap();
    let hw = encode_termination(VanillaHardware { machine: m, program: p });
    let start = VanillaHwState::new(ArchState::new(vec![0; 4], [1, 2], 0), vec![]);
    let t = trace_prefix(&hw, &start, 3).observations;
    assert_eq!(t, vec![Obs::cache(&[]), Obs::cache(&[1]), Obs::cache(&[2, 1])]);
}

#[test]
fn sequential_contract_leaks() {
    let m = Machine::default();
    let s = st([5, 2]);
    assert_eq!(m.contract_leak(&s, &i("load r1 r2")), Obs::Address(2));
    assert_eq!(m.contract_leak(&s, &i("add r1 r2 1")), Obs::Unit);
    assert_eq!(m.contract_leak(&s, &i("beqz r1 0")), Obs::Branch(false));
    let (_, o) = seq_next_leak(m, &parse_program("beqz r1 0").unwrap(), &s);
    assert_eq!(o, Obs::Branch(false));
}

#[test]
fn halted_programs_loop() {
    let m = Machine::default();
    let p = parse_program("add r1 r1 1").unwrap();
    let c = encode_termination(SeqContract::new(m, p.clone()));
    let t = trace_prefix(&c, &st([0, 0]), 4).observations;
    assert_eq!(t, vec![Obs::Unit, Obs::Halt, Obs::Halt, Obs::Halt]);
    let hw = encode_termination(VanillaHardware { machine: m, program: p });
    let h = VanillaHwState::new(st([0, 0]), vec![3]);
    assert!(trace_prefix(&hw, &h, 3).observations.iter().all(|o| *o == Obs::cache(&[3])));
}

#[test]
fn parser_examples() {
    assert_eq!(
        parse_program("add r1 r2 5").unwrap().instructions(),
        &[Instruction::Add { dst: Reg::R1, src: Reg::R2, k: 5 }]
    );
    let p = parse_program("load r1 r2\nbeqz r1 0").unwrap();
    assert_eq!(p.len(), 2);
    assert_eq!(p.instructions()[1], Instruction::Beqz { reg: Reg::R1, target: 0 });
}

#[test]
fn machine_bounds() {
    assert!(Machine::new(0, ValueDomain::Unbounded).is_err());
    let m = machine();
    assert!(m.check_state(&ArchState::new(vec![0; 4], [0, 0], 0)).is_ok());
    assert!(m.check_state(&ArchState::new(vec![0; 3], [0, 0], 0)).is_err());
    assert!(m.check_state(&ArchState::new(vec![0; 4], [7, 0], 0)).is_err());
}

fn reg() -> impl Strategy<Value = Reg> {
    prop_oneof![Just(Reg::R1), Just(Reg::R2)]
}

fn instruction(max_target: usize) -> impl Strategy<Value = Instruction> {
    prop_oneof![
        (reg(), reg()).prop_map(|(dst, src)| Instruction::Load { dst, src }),
        (reg(), reg(), -2i64..3).prop_map(|(dst, src, k)| Instruction::Add { dst, src, k }),
        (reg(), 0..=max_target).prop_map(|(reg, target)| Instruction::Beqz { reg, target }),
    ]
}

fn state() -> impl Strategy<Value = ArchState> {
    (prop::collection::vec(-1i64..4, 4), -1i64..4, -1i64..4, 0usize..4)
        .prop_map(|(m, r1, r2, pc)| ArchState::new(m, [r1, r2], pc))
}

proptest! {
    #[test]
    fn memory_is_read_only(s in state(), ins in instruction(5)) {
        prop_assert_eq!(&machine().arch_step(&s, &ins).m, &s.m);
    }

    #[test]
    fn hardware_projects_to_architecture(s in state(), c in prop::collection::vec(0u32..4, 0..4), ins in instruction(5)) {
        let m = machine();
        let h = VanillaHwState::new(s.clone(), c.clone());
        let (n, o) = m.hw_step(&h, &ins);
        prop_assert_eq!(&n.arch, &m.arch_step(&s, &ins));
        prop_assert_eq!(n.c.len(), c.len() + usize::from(ins.is_load()));
        prop_assert_eq!(&n.c[n.c.len() - c.len()..], &c[..]);
        // The leak depends on the pre-state only.
        prop_assert_eq!(o, h.cache_obs());
    }

    #[test]
    fn programs_round_trip(p in prop::collection::vec(instruction(6), 1..6)) {
        let p = Program::new(p).unwrap();
        let text = print_program(&p);
        prop_assert_eq!(parse_program(&text).unwrap(), p);
        prop_assert!(text.lines().all(|l| !l.ends_with(' ') && !l.contains("  ")));
    }
}
