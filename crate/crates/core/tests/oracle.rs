use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbisim_core::fixpoint::all_pairs;
use rbisim_core::*;

fn instance(seed: u64) -> ExplicitInstance {
    ExplicitInstance::random(&mut ChaCha8Rng::seed_from_u64(seed), 6, 3)
}

fn product(inst: &ExplicitInstance) -> QuadUniverse<u32, u32> {
    let cs: Vec<u32> = inst.contract.states().collect();
    let hs: Vec<u32> = inst.hardware.states().collect();
    QuadUniverse::product(&inst.contract, &inst.hardware, &cs, &hs).unwrap()
}

fn sys(rows: &[(u32, &str)]) -> ExplicitSystem {
    ExplicitSystem::new(
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| Obs::named(r.1)).collect(),
    )
    .unwrap()
}

#[test]
fn shared_prefix_counterexample_differs_at_one() {
    let c = sys(&[(1, "obsA"), (1, "obsB"), (3, "obsA"), (3, "obsC")]);
    assert_eq!(traces_equal(&c, &0, &2).unwrap().witness_index, Some(1));
}

#[test]
fn single_self_loop_is_bisimilar_to_itself() {
    let t = sys(&[(0, "A"), (1, "B")]);
    let b = compute_bisim(&t, &all_pairs(&[0, 1])).unwrap();
    assert!(b.contains(&(0, 0)));
    assert!(!b.contains(&(0, 1)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rbisim_is_relative_trace_equality(seed in any::<u64>()) {
        let inst = instance(seed);
        let u = product(&inst);
        let r = compute_rbisim(&u);
        for (i, q) in u.quads().iter().enumerate() {
            prop_assert_eq!(r.contains(i), rel_trace_eq(&inst.contract, &inst.hardware, q).unwrap(), "{}", q);
        }
    }

    #[test]
    fn lockstep_is_sound_and_matches_path_walk(seed in any::<u64>()) {
        let inst = instance(seed);
        let u = product(&inst);
        let l = compute_rbisim_lockstep(&u);
        let r = compute_rbisim(&u);
        prop_assert!(l.is_subset(&r));
        for (i, q) in u.quads().iter().enumerate() {
            prop_assert_eq!(l.contains(i), lockstep_rel(&inst.contract, &inst.hardware, q, 1000).unwrap());
            if l.contains(i) {
                prop_assert!(rel_trace_eq(&inst.contract, &inst.hardware, q).unwrap());
            }
        }
    }

    #[test]
    fn relaxed_relation_is_everything(seed in any::<u64>()) {
        let inst = instance(seed);
        prop_assert!(compute_rbisim_relaxed(&product(&inst)).is_full());
    }

    #[test]
    fn bisim_is_trace_equality(seed in any::<u64>()) {
        let inst = instance(seed);
        let states: Vec<u32> = inst.contract.states().collect();
        let b = compute_bisim(&inst.contract, &all_pairs(&states)).unwrap();
        for (x, y) in all_pairs(&states) {
            let eq = traces_equal(&inst.contract, &x, &y).unwrap();
            prop_assert_eq!(b.contains(&(x, y)), eq.equal());
            prop_assert_eq!(
                trace_lasso(&inst.contract, &x, 100).unwrap() == trace_lasso(&inst.contract, &y, 100).unwrap(),
                eq.equal()
            );
            if let Some(k) = eq.witness_index {
                let a = trace_prefix(&inst.contract, &x, k + 1).observations;
                let b = trace_prefix(&inst.contract, &y, k + 1).observations;
                prop_assert_eq!(&a[..k], &b[..k]);
                prop_assert_ne!(&a[k], &b[k]);
            }
        }
    }

    #[test]
    fn iterates_are_monotone_and_short(seed in any::<u64>()) {
        let inst = instance(seed);
        let u = product(&inst);
        let comp = compute_rbisim_traced(&u, true);
        prop_assert!(comp.outer.len() <= u.len() + 1);
        for w in comp.outer.windows(2) {
            prop_assert!(w[1].is_subset(&w[0]));
        }
        for inner in &comp.inner {
            prop_assert!(inner.len() <= u.len() + 1);
            for w in inner.windows(2) {
                prop_assert!(w[0].is_subset(&w[1]));
            }
        }
        prop_assert_eq!(comp.outer.last().unwrap(), &comp.members);
    }

    #[test]
    fn prefix_shift_invariance(seed in any::<u64>(), n in 1usize..12) {
        let inst = instance(seed);
        let t = &inst.hardware;
        for s in t.states() {
            let whole = trace_prefix(t, &s, n).observations;
            let mut shifted = vec![t.leak(&s)];
            shifted.extend(trace_prefix(t, &t.next(&s), n - 1).observations);
            prop_assert_eq!(&whole, &shifted);
            prop_assert_eq!(whole, trace_prefix(t, &s, n).observations);
        }
    }

    #[test]
    fn reachable_sets_are_closed(seed in any::<u64>()) {
        let inst = instance(seed);
        let t = &inst.contract;
        for s in t.states() {
            let r = reachable_states(t, &s, 64).unwrap();
            for x in &r {
                prop_assert!(r.contains(&t.next(x)));
            }
            prop_assert!(r.contains(&s));
        }
    }

    #[test]
    fn closure_universe_agrees_with_product(seed in any::<u64>(), a in 0u32..6, b in 0u32..6) {
        let inst = instance(seed);
        let n_c = inst.contract.len() as u32;
        let n_h = inst.hardware.len() as u32;
        let q = Quad::new(a % n_c, b % n_c, a % n_h, b % n_h);
        let u = QuadUniverse::closure(&inst.contract, &inst.hardware, [q.clone()], 10_000).unwrap();
        let p = product(&inst);
        let ru = compute_rbisim(&u);
        let rp = compute_rbisim(&p);
        for (i, x) in u.quads().iter().enumerate() {
            prop_assert_eq!(ru.contains(i), rp.contains(p.index_of(x).unwrap()));
        }
    }
}
