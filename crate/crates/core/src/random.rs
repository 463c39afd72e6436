//! Random proof scripts for differential testing.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::script::{Case, LockstepScript, ProofScript, Side, SideProof, UpToStep};

/// Shape parameters for [`random_script`].
#[derive(Clone, Debug)]
pub struct ScriptGen {
    pub max_depth: u32,
    /// Relation names available to `invariant` nodes.
    pub relations: Vec<String>,
    pub allow_upto: bool,
    /// Probability of emitting one of a few proof-like templates at a node
    /// instead of a uniformly random rule.
    pub template_bias: f64,
}

impl Default for ScriptGen {
    fn default() -> Self {
        ScriptGen {
            max_depth: 5,
            relations: vec!["top".into(), "rbisim".into()],
            allow_upto: true,
            template_bias: 0.3,
        }
    }
}

fn leaf<S, H, R: Rng + ?Sized>(rng: &mut R) -> ProofScript<S, H> {
    if rng.gen_bool(0.5) {
        ProofScript::CLeak
    } else {
        ProofScript::Cycle
    }
}

fn template<S, H, R: Rng + ?Sized>(rng: &mut R, rel: &str) -> ProofScript<S, H> {
    let hc = || ProofScript::hstep(ProofScript::Cycle);
    match rng.gen_range(0..5) {
        0 => ProofScript::invariant(rel, vec![("_", hc())]),
        1 => ProofScript::invariant(rel, vec![("_", ProofScript::CLeak), ("_", hc())]),
        2 => ProofScript::invariant(rel, vec![("_", ProofScript::cstep_prime(hc()))]),
        3 => ProofScript::invariant(rel, vec![("_", ProofScript::cstep(hc())), ("_", ProofScript::CLeak)]),
        _ => ProofScript::invariant(rel, vec![("_", ProofScript::hstep(ProofScript::guard(ProofScript::hstep(ProofScript::Cycle))))]),
    }
}

/// A random script over the given witness states.
pub fn random_script<S: Clone, H: Clone, R: Rng + ?Sized>(
    rng: &mut R,
    g: &ScriptGen,
    cs: &[S],
    hs: &[H],
) -> ProofScript<S, H> {
    gen(rng, g, cs, hs, g.max_depth)
}

fn gen<S: Clone, H: Clone, R: Rng + ?Sized>(
    rng: &mut R,
    g: &ScriptGen,
    cs: &[S],
    hs: &[H],
    depth: u32,
) -> ProofScript<S, H> {
    if depth == 0 {
        return leaf(rng);
    }
    let rel = g.relations.choose(rng).cloned().unwrap_or_else(|| "top".into());
    if rng.gen_bool(g.template_bias) {
        return template(rng, &rel);
    }
    let sub = |rng: &mut R| Box::new(gen(rng, g, cs, hs, depth - 1));
    let kinds = if g.allow_upto && !cs.is_empty() && !hs.is_empty() { 10 } else { 7 };
    match rng.gen_range(0..kinds) {
        0 => ProofScript::CLeak,
        1 => ProofScript::Cycle,
        2 => ProofScript::CStep(sub(rng)),
        3 => ProofScript::CStepPrime(sub(rng)),
        4 => ProofScript::HStep(sub(rng)),
        5 => ProofScript::Guard(sub(rng)),
        6 => {
            let n = rng.gen_range(1..=3);
            let cases = (0..n)
                .map(|_| Case {
                    label: "_".into(),
                    body: gen(rng, g, cs, hs, depth - 1),
                })
                .collect();
            ProofScript::Invariant { relation: rel, cases }
        }
        7 => {
            let side = if rng.gen_bool(0.5) { Side::First } else { Side::Second };
            let step = match rng.gen_range(0..6) {
                0 => UpToStep::CSwap,
                1 => UpToStep::HSwap,
                2 => UpToStep::CLeakEq(side, cs.choose(rng).expect("non-empty").clone()),
                3 => UpToStep::HLeakEq(side, hs.choose(rng).expect("non-empty").clone()),
                4 => UpToStep::ReduceCLeak(cs.choose(rng).expect("non-empty").clone(), cs.choose(rng).expect("non-empty").clone()),
                _ => UpToStep::AugmentHLeak(hs.choose(rng).expect("non-empty").clone(), hs.choose(rng).expect("non-empty").clone()),
            };
            ProofScript::UpTo { step, body: sub(rng) }
        }
        8 => {
            let side_gen = ScriptGen {
                allow_upto: false,
                max_depth: depth.min(3),
                ..g.clone()
            };
            ProofScript::ReduceContractLeakage {
                witness: (cs.choose(rng).expect("non-empty").clone(), cs.choose(rng).expect("non-empty").clone()),
                side: Box::new(gen(rng, &side_gen, cs, cs, side_gen.max_depth)),
                body: sub(rng),
            }
        }
        _ => ProofScript::AugmentHardwareLeakage {
            witness: (hs.choose(rng).expect("non-empty").clone(), hs.choose(rng).expect("non-empty").clone()),
            side: SideProof::Lockstep(Box::new(random_lockstep_script(rng, depth.min(3)))),
            body: sub(rng),
        },
    }
}

pub fn random_lockstep_script<R: Rng + ?Sized>(rng: &mut R, depth: u32) -> LockstepScript {
    if depth == 0 {
        return if rng.gen_bool(0.5) { LockstepScript::Leak } else { LockstepScript::Cycle };
    }
    match rng.gen_range(0..6) {
        0 => LockstepScript::Leak,
        1 => LockstepScript::Cycle,
        2 => LockstepScript::step(random_lockstep_script(rng, depth - 1)),
        3 => LockstepScript::guard(random_lockstep_script(rng, depth - 1)),
        4 => LockstepScript::invariant("top", vec![("_", LockstepScript::step(LockstepScript::Cycle))]),
        _ => LockstepScript::invariant(
            "rbisim-lockstep",
            vec![("_", LockstepScript::Leak), ("_", random_lockstep_script(rng, depth - 1))],
        ),
    }
}
