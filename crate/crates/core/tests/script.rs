use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbisim_core::random::{random_lockstep_script, random_script, ScriptGen};
use rbisim_core::*;

#[test]
fn printer_layout() {
    let s: ProofScript<u32, u32> = parse_script("(invariant top (case _ (hstep (cycle))))").unwrap();
    assert_eq!(
        print_script(&s),
        "(invariant top\n  (case _\n    (hstep\n      (cycle))))\n"
    );
}

#[test]
fn parse_errors_carry_positions() {
    match parse_script::<u32, u32>("(cstep\n  (bogus))") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    assert!(parse_script::<u32, u32>("(cstep (cleak)").is_err());
    assert!(parse_script::<u32, u32>("(cleak) (cleak)").is_err());
}

#[test]
fn quad_lists_round_trip() {
    let qs = vec![Quad::new(1u32, 2, 3u32, 4), Quad::new(0, 0, 7, 7)];
    let text = print_quads(&qs);
    assert_eq!(parse_quads::<u32, u32>(&text).unwrap(), qs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn scripts_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: ProofScript<u32, u32> = random_script(&mut rng, &ScriptGen::default(), &[0, 1, 2], &[0, 1, 5]);
        let text = print_script(&s);
        let back: ProofScript<u32, u32> = parse_script(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(print_script(&back), text);
    }

    #[test]
    fn lockstep_scripts_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_lockstep_script(&mut rng, 5);
        let text = print_lockstep_script(&s);
        let back = parse_lockstep_script(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(print_lockstep_script(&back), text);
    }
}
