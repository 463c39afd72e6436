//! Small hand-built systems showing why the proof system looks the way it
//! does. Each entry checks its claim and reports a finding if it fails.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rbisim_core::{
    compute_rbisim, compute_rbisim_lockstep, compute_rbisim_relaxed, lockstep_rel, parse_script, rel_trace_eq, Error,
    ExplicitInstance, ExplicitSystem, Goal, Hypothesis, Kernel, Obs, Quad, QuadRelation, QuadUniverse, SideProof,
    DEFAULT_BUDGET,
};

use crate::error::{config, Result};
use crate::report::Report;

pub const ENTRIES: [&str; 4] = ["lockstep-incomplete", "relaxed-vacuous", "augment-unsound", "guarded-cycle-rejected"];

fn sys(rows: &[(u32, &str)]) -> ExplicitSystem {
    ExplicitSystem::new(
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| Obs::named(r.1)).collect(),
    )
    .expect("gallery systems are well formed")
}

struct Claims(Report);

impl Claims {
    fn check(&mut self, what: &str, expected: bool, got: bool) {
        self.0.checked += 1;
        self.0.notes.push(format!("{what}: {got}"));
        if expected == got {
            self.0.proved += 1;
        } else {
            self.0.findings.push(format!("{what}: expected {expected}, got {got}"));
        }
    }
}

/// Run one gallery entry by name. `seed` picks the random instance of
/// `relaxed-vacuous`.
pub fn run_counterexample(name: &str, seed: u64) -> Result<Report> {
    let mut c = Claims(Report::new("gallery", name));
    match name {
        "lockstep-incomplete" => lockstep_incomplete(&mut c)?,
        "relaxed-vacuous" => relaxed_vacuous(&mut c, seed)?,
        "augment-unsound" => augment_unsound(&mut c)?,
        "guarded-cycle-rejected" => guarded_cycle(&mut c)?,
        _ => return Err(config(format!("unknown gallery entry `{name}`; expected one of {}", ENTRIES.join(", ")))),
    }
    c.0.finish();
    Ok(c.0)
}

/// Contracts agree once (A) and then differ (B vs C); hardware differs at
/// once (D vs E). Relative trace equality holds, but no lockstep argument
/// can see past the first step.
pub fn lockstep_incomplete_instance() -> (ExplicitSystem, ExplicitSystem, Quad<u32, u32>) {
    let c = sys(&[(2, "A"), (3, "A"), (2, "B"), (3, "C")]);
    let h = sys(&[(0, "D"), (1, "E")]);
    (c, h, Quad::new(0, 1, 0, 1))
}

fn lockstep_incomplete(c: &mut Claims) -> Result<()> {
    let (cs, hs, q) = lockstep_incomplete_instance();
    c.check("oracle", true, rel_trace_eq(&cs, &hs, &q)?);
    c.check("lockstep", false, lockstep_rel(&cs, &hs, &q, DEFAULT_BUDGET)?);
    let u = QuadUniverse::closure(&cs, &hs, [q.clone()], DEFAULT_BUDGET)?;
    let i = u.index_of(&q).expect("seed is in its closure");
    c.check("rbisim", true, compute_rbisim(&u).contains(i));
    c.check("rbisim_lockstep", false, compute_rbisim_lockstep(&u).contains(i));
    Ok(())
}

fn relaxed_vacuous(c: &mut Claims, seed: u64) -> Result<()> {
    let inst = ExplicitInstance::random(&mut ChaCha8Rng::seed_from_u64(seed), 4, 3);
    let cs: Vec<u32> = inst.contract.states().collect();
    let hs: Vec<u32> = inst.hardware.states().collect();
    let u = QuadUniverse::product(&inst.contract, &inst.hardware, &cs, &hs)?;
    let relaxed = compute_rbisim_relaxed(&u).count();
    c.0.notes.push(format!("universe: {} quads, relaxed relation: {relaxed}", u.len()));
    c.check("relaxed relation is the whole universe", true, relaxed == u.len());
    let sound = u
        .quads()
        .iter()
        .filter(|q| rel_trace_eq(&inst.contract, &inst.hardware, q).unwrap_or(false))
        .count();
    c.0.notes.push(format!("quads with relative trace equality: {sound}"));
    Ok(())
}

/// A silent contract self-loop. Hardware states 0 and 1 differ at once;
/// 2 and 3 agree once and then differ.
pub fn augment_instance() -> (ExplicitSystem, ExplicitSystem) {
    let c = sys(&[(0, "c")]);
    let h = sys(&[(4, "X"), (4, "Y"), (5, "W"), (6, "W"), (4, "Z"), (5, "P"), (6, "Q")]);
    (c, h)
}

fn augment_unsound(c: &mut Claims) -> Result<()> {
    let (cs, hs) = augment_instance();
    let k = Kernel::new(&cs, &hs).with_closure([Quad::new(0, 0, 0, 1), Quad::new(0, 0, 2, 3)])?;
    let top = Hypothesis::of(QuadRelation::top());

    let first = Goal {
        quad: Quad::new(0, 0, 2, 3),
        hypothesis: top.clone(),
        guarded: true,
    };
    c.check("first quintuple derivable", true, k.check_script(&first, &parse_script("(hstep (cycle))")?).accepted);

    let mut side = Kernel::new(&hs, &hs).with_closure([Quad::new(2, 3, 0, 1)])?;
    let side_goal = Goal::root(Quad::new(2, 3, 0, 1));
    let general = parse_script("(cstep (cleak))")?;
    c.check("second quintuple derivable", true, side.check_script(&side_goal, &general).accepted);
    c.check(
        "second quintuple derivable in lockstep",
        false,
        side.search_lockstep_derivation(&Quad::new(2, 3, 0, 1), 8).is_some(),
    );

    let third = Goal {
        quad: Quad::new(0, 0, 0, 1),
        hypothesis: top,
        guarded: true,
    };
    c.check("third quintuple (oracle)", false, rel_trace_eq(&cs, &hs, &third.quad)?);
    let composed = k.apply_augment_hardware_leakage(&third, &2, &3, &SideProof::General(Box::new(general)));
    c.check(
        "augment rejects the non-lockstep side proof",
        true,
        matches!(composed, Err(Error::NonLockstepSideProof)),
    );
    let script = parse_script("(augment-h-leak (witness 2 3) (side (cstep (cleak))) (hstep (cycle)))")?;
    c.check("composed script accepted", false, k.check_script(&third, &script).accepted);
    Ok(())
}

/// Contracts agree forever and hardware differs at once: closing a cycle
/// right after a contract step would prove a false quad.
fn guarded_cycle(c: &mut Claims) -> Result<()> {
    let cs = sys(&[(0, "A")]);
    let hs = sys(&[(0, "D"), (1, "E")]);
    let q = Quad::new(0, 0, 0, 1);
    let k = Kernel::new(&cs, &hs).with_closure([q.clone()])?;
    c.check("oracle", false, rel_trace_eq(&cs, &hs, &q)?);
    let exploit = parse_script("(invariant top (case _ (cstep (cycle))))")?;
    c.check("cstep; cycle accepted", false, k.check_script(&Goal::root(q.clone()), &exploit).accepted);
    let unguarded = parse_script("(invariant top (case _ (hstep (cycle))))")?;
    c.check("hstep; cycle accepted", false, k.check_script(&Goal::root(q), &unguarded).accepted);
    Ok(())
}
