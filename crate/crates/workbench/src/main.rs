use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rbisim_core::{
    compute_rbisim, parse_quads, parse_script, rel_trace_eq, ClosureBudget, ExplicitInstance, Goal, Kernel, Quad,
    QuadRelation,
};
use rbisim_isa::{parse_program, Predictor, Program, Scheduler, Value};
use rbisim_workbench::casestudy::{
    am_sweep, ooo_sweep, run_case_study, sweep_report, InstanceConfig, ModelKind, PredictorKind, SweepConfig,
};
use rbisim_workbench::error::WorkbenchError;
use rbisim_workbench::fuzz::{fuzz_differential, FuzzBounds};
use rbisim_workbench::gallery::{run_counterexample, ENTRIES};
use rbisim_workbench::report::Report;
use rbisim_workbench::Result;

#[derive(Parser)]
#[command(name = "rbisim", version, about = "Relative bisimulation checker and case-study workbench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Also write the report as JSON.
    #[arg(long, global = true, value_name = "OUT")]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide relative trace equality of one quad of an explicit instance.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        /// `s1 s2 h1 h2`
        #[arg(long)]
        quad: String,
    },
    /// Check a proof script for one quad of an explicit instance.
    Prove {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        quad: String,
    },
    /// Check that a relation, given as a file of quads, is closed.
    Closure {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        invariant: PathBuf,
        /// `C,H`: consecutive contract steps and hardware steps.
        #[arg(long)]
        budget: Option<String>,
    },
    /// Exhaustive case study: one program, or every program up to a length.
    Casestudy(CaseArgs),
    /// Run counterexample gallery entries.
    Gallery {
        #[arg(default_value = "all")]
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Differential fuzzing of the kernel against the oracle.
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 8)]
        max_states: usize,
        #[arg(long, default_value_t = 3)]
        max_obs: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    AmSpec,
    OooSeq,
}

#[derive(clap::Args)]
struct CaseArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Assembly file; without it every program up to --max-len is checked.
    #[arg(long)]
    program: Option<PathBuf>,
    /// `always-jump`, `always-next`, `mixed`, or a file of `pc jump|next` lines.
    #[arg(long)]
    predictor: Option<String>,
    /// File of `pc execute|delay` lines.
    #[arg(long)]
    scheduler: Option<PathBuf>,
    /// Speculation window; sweeps default to 1 and 2.
    #[arg(long)]
    window: Option<u32>,
    #[arg(long, default_value_t = 4)]
    mem_size: u32,
    /// `LO..HI` or a comma-separated list.
    #[arg(long, default_value = "0..2")]
    values: String,
    #[arg(long, default_value_t = 3)]
    max_len: usize,
    /// `C,H`: consecutive contract steps and hardware steps.
    #[arg(long)]
    budget: Option<String>,
    /// Skip the scheduler validity check (negative controls).
    #[arg(long)]
    unchecked: bool,
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|source| WorkbenchError::Io {
        path: p.display().to_string(),
        source,
    })
}

fn usage(msg: impl Into<String>) -> WorkbenchError {
    WorkbenchError::Config(msg.into())
}

fn parse_quad(text: &str) -> Result<Quad<u32, u32>> {
    let mut qs = parse_quads::<u32, u32>(text)?;
    if qs.len() != 1 {
        return Err(usage("expected one quad `s1 s2 h1 h2`"));
    }
    Ok(qs.remove(0))
}

fn parse_budget(text: &str) -> Result<ClosureBudget> {
    let bad = || usage(format!("bad budget `{text}`; expected `C,H`"));
    let (c, h) = text.split_once(',').ok_or_else(bad)?;
    Ok(ClosureBudget::new(
        c.trim().parse().map_err(|_| bad())?,
        h.trim().parse().map_err(|_| bad())?,
    ))
}

fn parse_values(text: &str) -> Result<Vec<Value>> {
    let bad = || usage(format!("bad value range `{text}`"));
    let vs: Vec<Value> = if let Some((lo, hi)) = text.split_once("..") {
        let lo: Value = lo.trim().parse().map_err(|_| bad())?;
        let hi: Value = hi.trim().parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        text.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if vs.is_empty() {
        return Err(bad());
    }
    Ok(vs)
}

fn predictor_kind(name: &str) -> Option<PredictorKind> {
    PredictorKind::ALL.into_iter().find(|k| k.name() == name)
}

fn instance(path: &Path) -> Result<ExplicitInstance> {
    Ok(ExplicitInstance::parse(&read(path)?)?)
}

fn oracle(path: &Path, quad: &str) -> Result<Report> {
    let inst = instance(path)?;
    let q = parse_quad(quad)?;
    let k = Kernel::new(&inst.contract, &inst.hardware).with_closure([q.clone()])?;
    let holds = rel_trace_eq(&inst.contract, &inst.hardware, &q)?;
    let u = k.universe().expect("universe was built");
    let member = compute_rbisim(u).contains(u.index_of(&q).expect("seed is in its closure"));
    let mut r = Report::new("oracle", q.to_string());
    r.checked = 1;
    r.refuted = u64::from(!holds);
    r.notes.push(format!("relative trace equality: {holds}"));
    r.notes.push(format!("rbisim: {member}"));
    if holds != member {
        r.findings.push("rbisim disagrees with the trace oracle".into());
    }
    Ok(r)
}

fn prove(path: &Path, script: &Path, quad: &str) -> Result<Report> {
    let inst = instance(path)?;
    let q = parse_quad(quad)?;
    let s = parse_script::<u32, u32>(&read(script)?)?;
    let k = Kernel::new(&inst.contract, &inst.hardware).with_closure([q.clone()])?;
    let v = k.check_script(&Goal::root(q.clone()), &s);
    let mut r = Report::new("prove", q.to_string());
    r.checked = 1;
    if v.accepted {
        r.proved = 1;
    } else if let Some(f) = v.failure {
        r.findings.push(format!("rejected at {} by {}: {}", f.goal, f.rule, f.reason));
    }
    Ok(r)
}

fn closure(path: &Path, invariant: &Path, budget: Option<&str>) -> Result<Report> {
    let inst = instance(path)?;
    let quads = parse_quads::<u32, u32>(&read(invariant)?)?;
    let k = Kernel::new(&inst.contract, &inst.hardware).with_closure(quads.clone())?;
    let budget = budget.map(parse_budget).transpose()?.unwrap_or_else(|| k.default_closure_budget());
    let rel = QuadRelation::extensional("invariant", quads.clone());
    let rep = k.check_invariant_closure(&rel, budget);
    let mut r = Report::new("closure", invariant.display().to_string());
    r.checked = rep.members as u64;
    for q in &quads {
        if !rel_trace_eq(&inst.contract, &inst.hardware, q)? {
            r.refuted += 1;
        }
    }
    if rep.verdict.accepted {
        r.proved = r.checked;
    } else if let Some(f) = rep.verdict.failure {
        r.findings.push(format!("{}: {}", f.goal, f.reason));
    }
    Ok(r)
}

fn casestudy(a: &CaseArgs) -> Result<Report> {
    let values = parse_values(&a.values)?;
    let budget = a.budget.as_deref().map(parse_budget).transpose()?;
    let model = match a.model {
        ModelArg::AmSpec => ModelKind::AmSpec,
        ModelArg::OooSeq => ModelKind::OooSeq,
    };
    if let Some(path) = &a.program {
        let program = parse_program(&read(path)?)?;
        let predictor = match (&a.predictor, model) {
            (Some(p), _) => Some(match predictor_kind(p) {
                Some(k) => k.build(&program),
                None => Predictor::parse(&read(Path::new(p))?)?,
            }),
            (None, ModelKind::AmSpec) => return Err(usage("am-spec needs --predictor")),
            (None, ModelKind::OooSeq) => None,
        };
        let scheduler = a.scheduler.as_deref().map(|p| -> Result<Scheduler> { Ok(Scheduler::parse(&read(p)?)?) });
        let cfg = InstanceConfig {
            model,
            program,
            predictor,
            scheduler: scheduler.transpose()?,
            w: a.window.unwrap_or(2),
            mem_size: a.mem_size,
            values,
            budget,
            unchecked: a.unchecked,
        };
        return run_case_study(&cfg);
    }
    if a.max_len == 0 {
        return Err(usage("--max-len must be positive"));
    }
    if a.scheduler.is_some() || a.unchecked || budget.is_some() {
        return Err(usage("--scheduler, --unchecked and --budget need --program"));
    }
    let predictors = match &a.predictor {
        None => PredictorKind::ALL.to_vec(),
        Some(p) => vec![predictor_kind(p).ok_or_else(|| usage("sweeps take a named predictor"))?],
    };
    let cfg = SweepConfig {
        max_len: a.max_len,
        values,
        mem_size: a.mem_size,
        windows: a.window.map_or(vec![1, 2], |w| vec![w]),
        predictors,
        ..SweepConfig::default()
    };
    if cfg.windows.contains(&0) {
        return Err(usage("the speculation window must be positive"));
    }
    let programs: Vec<Program> = cfg.programs();
    let (name, s) = match model {
        ModelKind::AmSpec => ("am-spec", am_sweep(&cfg, &programs)?),
        ModelKind::OooSeq => ("ooo-seq", ooo_sweep(&cfg, &programs)?),
    };
    Ok(sweep_report(format!("{name}, {} programs up to length {}", programs.len(), cfg.max_len), s))
}

fn gallery(name: &str, seed: u64) -> Result<Vec<Report>> {
    if name == "all" {
        ENTRIES.iter().map(|n| run_counterexample(n, seed)).collect()
    } else {
        Ok(vec![run_counterexample(name, seed)?])
    }
}

fn run(cli: &Cli) -> Result<Vec<Report>> {
    Ok(match &cli.cmd {
        Cmd::Oracle { instance, quad } => vec![oracle(instance, quad)?],
        Cmd::Prove { instance, script, quad } => vec![prove(instance, script, quad)?],
        Cmd::Closure { instance, invariant, budget } => vec![closure(instance, invariant, budget.as_deref())?],
        Cmd::Casestudy(a) => vec![casestudy(a)?],
        Cmd::Gallery { name, seed } => gallery(name, *seed)?,
        Cmd::Fuzz { seed, trials, max_states, max_obs } => {
            let bounds = FuzzBounds {
                max_states: *max_states,
                max_obs: *max_obs,
                ..FuzzBounds::default()
            };
            vec![fuzz_differential(*seed, *trials, bounds)?]
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let reports = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut out = std::io::stdout().lock();
    for r in &reports {
        // A closed pipe (`| head`) just stops the listing.
        if write!(out, "{r}").is_err() {
            break;
        }
    }
    drop(out);
    if let Some(out) = &cli.json {
        let body = if reports.len() == 1 {
            reports[0].to_json()
        } else {
            serde_json::to_string_pretty(&reports).expect("reports serialize")
        };
        if let Err(e) = std::fs::write(out, body + "\n") {
            eprintln!("error: {}: {e}", out.display());
            return ExitCode::from(2);
        }
    }
    if reports.iter().all(Report::passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
