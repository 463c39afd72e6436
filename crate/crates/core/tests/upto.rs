use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rbisim_core::*;

fn sys(rows: &[(u32, &str)]) -> ExplicitSystem {
    ExplicitSystem::new(
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| Obs::named(r.1)).collect(),
    )
    .unwrap()
}

/// Contract: one silent self-loop. Hardware: h1 (0) and h2 (1) differ at
/// once; h1' (2) and h2' (3) agree once and then differ.
fn augment_instance() -> (ExplicitSystem, ExplicitSystem) {
    let c = sys(&[(0, "c")]);
    let h = sys(&[(4, "X"), (4, "Y"), (5, "W"), (6, "W"), (4, "Z"), (5, "P"), (6, "Q")]);
    (c, h)
}

fn instance(seed: u64) -> ExplicitInstance {
    ExplicitInstance::random(&mut ChaCha8Rng::seed_from_u64(seed), 5, 3)
}

fn product(inst: &ExplicitInstance) -> QuadUniverse<u32, u32> {
    let cs: Vec<u32> = inst.contract.states().collect();
    let hs: Vec<u32> = inst.hardware.states().collect();
    QuadUniverse::product(&inst.contract, &inst.hardware, &cs, &hs).unwrap()
}

#[test]
fn swaps_need_the_matching_witness() {
    let t = sys(&[(0, "A"), (1, "B")]);
    let k = Kernel::new(&t, &t);
    let g = Goal::root(Quad::new(0, 1, 0, 1));
    let c = k
        .apply_upto(&g, UpToFunction::Registered(UpToKind::CSwap), Quad::new(1, 0, 0, 1))
        .unwrap();
    assert_eq!(c.quad, Quad::new(1, 0, 0, 1));
    assert!(c.guarded);
    let h = k
        .apply_upto(&g, UpToFunction::Registered(UpToKind::HSwap), Quad::new(0, 1, 1, 0))
        .unwrap();
    assert_eq!(h.quad, Quad::new(0, 1, 1, 0));
    let unguarded = Goal { guarded: false, ..g.clone() };
    assert!(!k.apply_upto(&unguarded, UpToFunction::Registered(UpToKind::HSwap), Quad::new(0, 1, 1, 0)).unwrap().guarded);
    assert!(matches!(
        k.apply_upto(&g, UpToFunction::Registered(UpToKind::CSwap), Quad::new(1, 1, 0, 0)),
        Err(Error::WitnessMismatch(_))
    ));
    assert!(matches!(
        k.apply_upto(&g, UpToFunction::Identity, g.quad.clone()),
        Err(Error::NotRegistered(_))
    ));
}

#[test]
fn leak_eq_rechecks_certificates() {
    // 0 <-> 1 and 2 <-> 3 both alternate A, B.
    let t = sys(&[(1, "A"), (0, "B"), (3, "A"), (2, "B")]);
    let k = Kernel::new(&t, &t);
    let g = Goal::root(Quad::new(0, 1, 0, 1));
    let same = k.apply_leak_eq(&g, Replacement::Contract(Side::First, 0), PairGraphVerdict::EQUAL).unwrap();
    assert_eq!(same.quad, g.quad);
    let cert = traces_equal(&t, &0, &2).unwrap();
    let r = k.apply_leak_eq(&g, Replacement::Hardware(Side::First, 2), cert).unwrap();
    assert_eq!(r.quad, Quad::new(0, 1, 2, 1));
    // A forged certificate is not trusted.
    assert!(matches!(
        k.apply_leak_eq(&g, Replacement::Contract(Side::Second, 0), PairGraphVerdict::EQUAL),
        Err(Error::EquivalenceNotEstablished(_))
    ));
}

#[test]
fn reduce_contract_leakage() {
    // Contract: 0 -A-> 4, 1 -A-> 5; 2 -bot-> 4, 3 -bot-> 5; 4 = B loop, 5 = C loop.
    let c = ExplicitSystem::new(
        vec![4, 5, 4, 5, 4, 5],
        vec![Obs::named("A"), Obs::named("A"), Obs::Unit, Obs::Unit, Obs::named("B"), Obs::named("C")],
    )
    .unwrap();
    let h = sys(&[(0, "D"), (1, "E")]);
    let k = Kernel::new(&c, &h);
    let g = Goal::root(Quad::new(0, 1, 0, 1));
    // Identity rewrite with the tautological side proof.
    let side_k = Kernel::new(&c, &c).with_closure([Quad::new(0, 1, 0, 1)]).unwrap();
    let taut = side_k.derive_proof(&Quad::new(0, 1, 0, 1)).unwrap();
    assert_eq!(k.apply_reduce_contract_leakage(&g, &0, &1, &taut).unwrap().quad, g.quad);
    // Replace by the states that skip the shared first leak.
    let side = parse_script::<u32, u32>("(cstep (cleak))").unwrap();
    let r = k.apply_reduce_contract_leakage(&g, &2, &3, &side).unwrap();
    assert_eq!(r.quad, Quad::new(2, 3, 0, 1));
    let body = parse_script::<u32, u32>("(cstep (cleak))").unwrap();
    assert!(k.check_script(&r, &body).accepted);
    let whole = ProofScript::ReduceContractLeakage { witness: (2, 3), side: Box::new(side.clone()), body: Box::new(body) };
    assert!(k.check_script(&g, &whole).accepted);
    assert!(rel_trace_eq(&c, &h, &g.quad).unwrap());
    // Side proof for the wrong quad.
    let wrong = parse_script::<u32, u32>("(cleak)").unwrap();
    assert!(matches!(
        k.apply_reduce_contract_leakage(&g, &2, &3, &wrong),
        Err(Error::SideProofRejected(_))
    ));
}

#[test]
fn augment_requires_lockstep_side_proofs() {
    let (c, h) = augment_instance();
    let k = Kernel::new(&c, &h).with_closure([Quad::new(0, 0, 0, 1), Quad::new(0, 0, 2, 3)]).unwrap();
    let top = Hypothesis::of(QuadRelation::top());
    let first = Goal { quad: Quad::new(0, 0, 2, 3), hypothesis: top.clone(), guarded: true };
    assert!(k.check_script(&first, &parse_script("(hstep (cycle))").unwrap()).accepted);

    // The side quad holds only in the non-lockstep system.
    let hk = Kernel::new(&h, &h).with_closure([Quad::new(2, 3, 0, 1)]).unwrap();
    let side_root = Goal::root(Quad::new(2, 3, 0, 1));
    assert!(hk.check_script(&side_root, &parse_script("(cstep (cleak))").unwrap()).accepted);
    let mut hk = hk;
    assert!(hk.search_lockstep_derivation(&Quad::new(2, 3, 0, 1), 8).is_none());

    let third = Goal { quad: Quad::new(0, 0, 0, 1), hypothesis: top, guarded: true };
    assert!(!rel_trace_eq(&c, &h, &third.quad).unwrap());
    let side = SideProof::General(Box::new(parse_script("(cstep (cleak))").unwrap()));
    assert!(matches!(
        k.apply_augment_hardware_leakage(&third, &2, &3, &side),
        Err(Error::NonLockstepSideProof)
    ));
    let script = parse_script::<u32, u32>(
        "(augment-h-leak (witness 2 3) (side (cstep (cleak))) (hstep (cycle)))",
    )
    .unwrap();
    assert!(!k.check_script(&third, &script).accepted);
    let script = parse_script::<u32, u32>(
        "(augment-h-leak (witness 2 3) (lockstep-side (step (guard (leak)))) (hstep (cycle)))",
    )
    .unwrap();
    assert!(!k.check_script(&third, &script).accepted);
}

#[test]
fn augment_accepts_real_lockstep_refinements() {
    let (c, h) = augment_instance();
    // Contract pair that differs at once, hardware states that agree.
    let c2 = sys(&[(0, "A"), (1, "B")]);
    let _ = c;
    let k = Kernel::new(&c2, &h);
    let g = Goal::root(Quad::new(0, 1, 4, 4));
    let ident = SideProof::Lockstep(Box::new(parse_lockstep_script("(invariant top (case _ (step (cycle))))").unwrap()));
    assert_eq!(k.apply_augment_hardware_leakage(&g, &4, &4, &ident).unwrap().quad, g.quad);
    let leak = SideProof::Lockstep(Box::new(parse_lockstep_script("(step (guard (leak)))").unwrap()));
    let r = k.apply_augment_hardware_leakage(&g, &2, &3, &leak).unwrap();
    assert_eq!(r.quad, Quad::new(0, 1, 2, 3));
    assert!(k.check_script(&r, &ProofScript::CLeak).accepted);
    assert!(rel_trace_eq(&c2, &h, &g.quad).unwrap());
}

#[test]
fn lockstep_rules() {
    let t = sys(&[(0, "A"), (1, "B")]);
    let k = Kernel::new(&t, &t).with_closure([Quad::new(0, 0, 0, 0)]).unwrap();
    let s = parse_lockstep_script("(invariant top (case _ (step (cycle))))").unwrap();
    assert!(k.check_lockstep_script(&Goal::root(Quad::new(0, 0, 0, 0)), &s).accepted);
    assert!(k.apply_lockstep_rule(&Goal::root(Quad::new(0, 1, 0, 0)), &LockstepRule::Leak).unwrap().is_empty());
    assert!(k.apply_lockstep_rule(&Goal::root(Quad::new(0, 0, 0, 1)), &LockstepRule::Step).is_err());
}

#[test]
fn registry_has_exactly_six_functions() {
    let r = registry();
    assert_eq!(r.len(), 6);
    assert!(r.iter().all(|f| f.status() == Compatibility::Proven));
    assert_eq!(UpToFunction::Top.status(), Compatibility::TestOnly);
    assert_eq!(UpToFunction::Identity.status(), Compatibility::TestOnly);
}

#[test]
fn bogus_top_function_is_caught() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut found = false;
    for seed in 0..50 {
        let inst = instance(seed);
        let u = product(&inst);
        let env = UpToEnv::new(&inst.contract, &inst.hardware, &u, 10_000).unwrap();
        if !check_compatibility(UpToFunction::Top, &env, 5, &mut rng).passed() {
            found = true;
            break;
        }
    }
    assert!(found);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn registered_functions_pass_sampled_compatibility(seed in any::<u64>()) {
        let inst = instance(seed);
        let u = product(&inst);
        let env = UpToEnv::new(&inst.contract, &inst.hardware, &u, 10_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(check_compatibility(UpToFunction::Identity, &env, 10, &mut rng).passed());
        for f in registry() {
            let rep = check_compatibility(f, &env, 10, &mut rng);
            prop_assert!(rep.passed(), "{:?}", rep);
        }
    }

    #[test]
    fn transforms_are_monotone(seed in any::<u64>()) {
        let inst = instance(seed);
        let u = product(&inst);
        let env = UpToEnv::new(&inst.contract, &inst.hardware, &u, 10_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for f in registry() {
            let y = QuadSet::from_fn(u.len(), |_| rng.gen_bool(0.5));
            let x = QuadSet::from_fn(u.len(), |i| y.contains(i) && rng.gen_bool(0.5));
            prop_assert!(env.transform(f, &x).is_subset(&env.transform(f, &y)));
        }
    }

    #[test]
    fn swaps_and_leak_eq_preserve_the_oracle(seed in any::<u64>()) {
        let inst = instance(seed);
        let (c, h) = (&inst.contract, &inst.hardware);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let q = Quad::new(rng.gen_range(0..c.len() as u32), rng.gen_range(0..c.len() as u32),
                              rng.gen_range(0..h.len() as u32), rng.gen_range(0..h.len() as u32));
            let v = rel_trace_eq(c, h, &q).unwrap();
            prop_assert_eq!(v, rel_trace_eq(c, h, &q.swap_contract()).unwrap());
            prop_assert_eq!(v, rel_trace_eq(c, h, &q.swap_hardware()).unwrap());
            for s in c.states() {
                if traces_equal(c, &q.s1, &s).unwrap().equal() {
                    prop_assert_eq!(v, rel_trace_eq(c, h, &q.with_contract(s, q.s2)).unwrap());
                }
            }
            for x in h.states() {
                if traces_equal(h, &q.h2, &x).unwrap().equal() {
                    prop_assert_eq!(v, rel_trace_eq(c, h, &q.with_hardware(q.h1, x)).unwrap());
                }
            }
        }
    }

    #[test]
    fn lockstep_side_acceptance_implies_membership(seed in any::<u64>()) {
        let inst = instance(seed);
        let h = &inst.hardware;
        let hs: Vec<u32> = h.states().collect();
        let u = QuadUniverse::product(h, h, &hs, &hs).unwrap();
        let k = Kernel::new(h, h).with_universe(u);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lock = compute_rbisim_lockstep(k.universe().unwrap());
        for _ in 0..30 {
            let s = rbisim_core::random::random_lockstep_script(&mut rng, 4);
            let i = rng.gen_range(0..k.universe().unwrap().len());
            let q = k.universe().unwrap().quad(i).clone();
            if k.check_lockstep_script(&Goal::root(q.clone()), &s).accepted {
                prop_assert!(lock.contains(i), "{}", print_lockstep_script(&s));
            }
            if lock.contains(i) {
                let d = k.derive_lockstep_proof(&q).unwrap();
                prop_assert!(k.check_lockstep_script(&Goal::root(q), &d).accepted);
            }
        }
    }
}
