//! Differential testing of the fixpoint characterization and the proof
//! kernel against the trace oracle on random explicit systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbisim_core::random::{random_script, ScriptGen};
use rbisim_core::{
    compute_rbisim, print_script, rel_trace_eq, ExplicitInstance, ExplicitSystem, Goal, Kernel, QuadRelation,
    QuadUniverse,
};
use serde::{Deserialize, Serialize};

use crate::casestudy::timed;
use crate::error::{config, Result};
use crate::report::Report;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzBounds {
    pub max_states: usize,
    pub max_obs: usize,
    /// Random scripts checked per instance.
    pub scripts: usize,
    pub script_depth: u32,
    /// Also derive and check a proof for every quad the oracle accepts.
    pub derive: bool,
}

impl Default for FuzzBounds {
    fn default() -> Self {
        FuzzBounds {
            max_states: 8,
            max_obs: 3,
            scripts: 10,
            script_depth: 5,
            derive: true,
        }
    }
}

type ExplicitKernel<'a> = Kernel<'a, ExplicitSystem, ExplicitSystem>;

pub fn fuzz_differential(seed: u64, trials: usize, bounds: FuzzBounds) -> Result<Report> {
    fuzz_differential_with(seed, trials, bounds, &|k| k)
}

/// [`fuzz_differential`] with a hook that adjusts every kernel before use.
pub fn fuzz_differential_with(
    seed: u64,
    trials: usize,
    bounds: FuzzBounds,
    configure: &dyn for<'a> Fn(ExplicitKernel<'a>) -> ExplicitKernel<'a>,
) -> Result<Report> {
    if trials == 0 {
        return Err(config("fuzzing needs at least one trial"));
    }
    if bounds.max_states == 0 || bounds.max_obs == 0 {
        return Err(config("instances need at least one state and one observation"));
    }
    let mut report = Report::new("fuzz", format!("seed {seed}, {trials} trials"));
    let (r, ms) = timed(|| -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for trial in 0..trials {
            let inst = ExplicitInstance::random(&mut rng, bounds.max_states, bounds.max_obs);
            run_trial(&inst, trial, &mut rng, bounds, configure, &mut report)?;
        }
        Ok(())
    });
    r?;
    report.elapsed_ms = ms;
    report.notes.push(format!("first trial with a finding: {}", first_trial(&report)));
    report.finish();
    Ok(report)
}

fn first_trial(r: &Report) -> String {
    r.findings
        .iter()
        .filter_map(|f| f.strip_prefix("trial ")?.split(':').next()?.parse::<usize>().ok())
        .min()
        .map_or("none".into(), |t| t.to_string())
}

fn run_trial(
    inst: &ExplicitInstance,
    trial: usize,
    rng: &mut ChaCha8Rng,
    bounds: FuzzBounds,
    configure: &dyn for<'a> Fn(ExplicitKernel<'a>) -> ExplicitKernel<'a>,
    report: &mut Report,
) -> Result<()> {
    let cs: Vec<u32> = inst.contract.states().collect();
    let hs: Vec<u32> = inst.hardware.states().collect();
    let u = QuadUniverse::product(&inst.contract, &inst.hardware, &cs, &hs)?;
    let rb = compute_rbisim(&u);
    let mut truth = Vec::with_capacity(u.len());
    for (i, q) in u.quads().iter().enumerate() {
        let t = rel_trace_eq(&inst.contract, &inst.hardware, q)?;
        truth.push(t);
        report.checked += 1;
        if rb.contains(i) != t {
            report.findings.push(format!("trial {trial}: rbisim and the oracle disagree on {q}"));
        }
    }

    let mut k = configure(Kernel::new(&inst.contract, &inst.hardware).with_universe(u.clone()));
    if bounds.derive {
        for (q, &t) in u.quads().iter().zip(&truth) {
            match k.derive_proof(q) {
                Ok(s) if t => {
                    if k.check_script(&Goal::root(q.clone()), &s).accepted {
                        report.proved += 1;
                    } else {
                        report.findings.push(format!("trial {trial}: derived proof rejected for {q}"));
                    }
                }
                Ok(_) => report.findings.push(format!("trial {trial}: derived a proof of the refuted quad {q}")),
                Err(_) if t => report.findings.push(format!("trial {trial}: no proof derived for {q}")),
                Err(_) => {}
            }
        }
    }

    let sub: Vec<_> = u.quads().iter().filter(|_| rng.gen_bool(0.3)).cloned().collect();
    k.register_relation(QuadRelation::extensional("r0", sub));
    let gen = ScriptGen {
        relations: vec!["top".into(), "rbisim".into(), "r0".into()],
        max_depth: bounds.script_depth,
        ..ScriptGen::default()
    };
    for _ in 0..bounds.scripts {
        let i = rng.gen_range(0..u.len());
        let q = u.quad(i).clone();
        let s = random_script(rng, &gen, &cs, &hs);
        if k.check_script(&Goal::root(q.clone()), &s).accepted && !truth[i] {
            report.findings.push(format!(
                "trial {trial}: kernel accepted a script for the refuted quad {q}: {}",
                print_script(&s).split_whitespace().collect::<Vec<_>>().join(" ")
            ));
        }
    }
    Ok(())
}
