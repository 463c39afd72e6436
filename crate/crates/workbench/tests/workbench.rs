use std::path::PathBuf;
use std::process::Command;

use rbisim_core::{print_script, ExplicitInstance, Kernel};
use rbisim_isa::{parse_program, Predictor, Prediction, Scheduler};
use rbisim_workbench::casestudy::*;
use rbisim_workbench::fuzz::{fuzz_differential, FuzzBounds};
use rbisim_workbench::gallery::{lockstep_incomplete_instance, run_counterexample, ENTRIES};
use rbisim_workbench::WorkbenchError;

const GADGET: &str = include_str!("../../isa/programs/spectre_gadget.s");

fn am(program: &str, predictor: Predictor, w: u32) -> InstanceConfig {
    InstanceConfig {
        model: ModelKind::AmSpec,
        program: parse_program(program).unwrap(),
        predictor: Some(predictor),
        scheduler: None,
        w,
        mem_size: 4,
        values: vec![0, 1, 2],
        budget: None,
        unchecked: false,
    }
}

fn ooo(program: &str, scheduler: Scheduler, unchecked: bool) -> InstanceConfig {
    InstanceConfig {
        model: ModelKind::OooSeq,
        predictor: None,
        scheduler: Some(scheduler),
        unchecked,
        ..am(program, Predictor::constant(Prediction::Jump), 1)
    }
}

#[test]
fn gallery_entries_hold() {
    for name in ENTRIES {
        let r = run_counterexample(name, 0).unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.consistent(), "{r}");
        assert!(r.checked > 0);
    }
    assert!(matches!(run_counterexample("nope", 0), Err(WorkbenchError::Config(_))));
}

#[test]
fn fuzzing_finds_nothing() {
    let r = fuzz_differential(0, 100, FuzzBounds::default()).unwrap();
    assert!(r.passed(), "{r}");
    assert!(r.notes.iter().any(|n| n == "first trial with a finding: none"));
    assert!(fuzz_differential(0, 0, FuzzBounds::default()).is_err());
    let zero = FuzzBounds { max_obs: 0, ..FuzzBounds::default() };
    assert!(fuzz_differential(0, 1, zero).is_err());
}

#[test]
fn straight_line_program_is_proved() {
    let r = run_case_study(&ooo("load r1 r2\nadd r2 r1 1", Scheduler::all_execute(), false)).unwrap();
    assert!(r.passed(), "{r}");
    assert_eq!(r.proved, r.checked);
    assert!(r.consistent());
}

#[test]
fn gadget_is_proved_under_both_predictors() {
    for pred in [Prediction::Jump, Prediction::Next] {
        let r = run_case_study(&am(GADGET, Predictor::constant(pred), 2)).unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.consistent());
        assert!(r.checked > 0);
    }
}

#[test]
fn invalid_scheduler_is_refuted() {
    let cfg = ooo("add r2 r1 1\nload r1 r2", Scheduler::delaying([0]), true);
    let r = run_case_study(&cfg).unwrap();
    assert!(r.refuted > 0);
    assert!(!r.passed());
    assert!(r.consistent());
    let cx = r.counterexample.as_ref().expect("a counterexample");
    assert!(!cx.quad.is_empty());
    // Checked construction refuses the same scheduler.
    assert!(run_case_study(&ooo("add r2 r1 1\nload r1 r2", Scheduler::delaying([0]), false)).is_err());
}

#[test]
fn reports_are_deterministic() {
    let strip = |mut r: rbisim_workbench::report::Report| {
        r.elapsed_ms = 0;
        r.to_json()
    };
    let cfg = am(GADGET, Predictor::constant(Prediction::Next), 1);
    assert_eq!(strip(run_case_study(&cfg).unwrap()), strip(run_case_study(&cfg).unwrap()));
    let f = || strip(fuzz_differential(7, 5, FuzzBounds::default()).unwrap());
    assert_eq!(f(), f());
}

#[test]
fn sweeps_exercise_every_rule() {
    let cfg = SweepConfig { max_len: 2, ..SweepConfig::default() };
    let programs = cfg.programs();
    let a = am_sweep(&cfg, &programs).unwrap();
    let o = ooo_sweep(&cfg, &programs).unwrap();
    assert!(a.passed() && o.passed());
    let mut names: Vec<&str> = a.hits.keys().chain(o.hits.keys()).copied().collect();
    names.sort_unstable();
    names.dedup();
    let mut expected = vec![
        "am:Step", "am:Rollback", "am:Branch", "am:Idle", "am:Halted",
        "hw:Rollback", "hw:Commit", "hw:Step", "hw:BranchNext", "hw:BranchJump", "hw:Idle", "hw:Halted",
        "ooo:Execute", "ooo:ExecuteHeap", "ooo:Delay", "ooo:Halted",
        "seq:Step", "seq:Halted",
    ];
    expected.sort_unstable();
    assert_eq!(names, expected);
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rbisim")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rbisim-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn cli_exit_codes() {
    let (c, h, q) = lockstep_incomplete_instance();
    let k = Kernel::new(&c, &h).with_closure([q.clone()]).unwrap();
    let script = print_script(&k.derive_proof(&q).unwrap());
    let inst = scratch("inst.txt", &ExplicitInstance { contract: c, hardware: h }.to_text());
    let inst = inst.to_str().unwrap();
    let script = scratch("proof.txt", &script);

    let (code, out) = cli(&["oracle", "--instance", inst, "--quad", "0 1 0 1"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("relative trace equality: true"));
    assert_eq!(cli(&["oracle", "--instance", inst, "--quad", "0 0 0 1"]).0, 1);
    assert_eq!(cli(&["prove", "--instance", inst, "--script", script.to_str().unwrap(), "--quad", "0 1 0 1"]).0, 0);
    assert_eq!(cli(&["oracle", "--instance", "/nonexistent", "--quad", "0 1 0 1"]).0, 2);
    assert_eq!(cli(&["oracle", "--instance", inst, "--quad", "0 1"]).0, 2);
    assert_eq!(cli(&["gallery", "lockstep-incomplete"]).0, 0);
    assert_eq!(cli(&["gallery", "nope"]).0, 2);

    let prog = scratch("bad.s", "add r2 r1 1\nload r1 r2\n");
    let sched = scratch("bad.sched", "0 delay\n");
    let json = std::env::temp_dir().join(format!("rbisim-cli-{}/out.json", std::process::id()));
    let args = [
        "casestudy", "--model", "ooo-seq", "--program", prog.to_str().unwrap(), "--scheduler",
        sched.to_str().unwrap(), "--unchecked", "--json", json.to_str().unwrap(),
    ];
    assert_eq!(cli(&args).0, 1);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(v["refuted"].as_u64().unwrap() > 0);
    assert!(v["counterexample"].is_object());
    assert_eq!(cli(&args[..args.len() - 3]).0, 2);
}
